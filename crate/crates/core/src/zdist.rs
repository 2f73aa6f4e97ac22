//! Rows of the z-normalized Euclidean distance matrix between the
//! subsequences of one segment and every subsequence of the series.
//!
//! Distances come from dot products: for windows `a`, `b` of length `l`
//! with Pearson correlation `rho`, `d(a, b) = sqrt(2 l (1 - rho))`. Nearly
//! identical shapes, and windows whose mean dwarfs their deviation, are
//! recomputed from the z-normalized values instead.
//! Constant windows z-normalize to the zero vector, so two constant windows
//! are at distance 0 and a constant window is at distance `sqrt(l)` from any
//! other window.

use crate::error::{Error, Result};
use crate::series::{SlidingStats, TimeSeries};

/// How dot products are obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Kernel {
    /// O(1) update per entry from the previous row along the diagonal.
    #[default]
    Streaming,
    /// O(l) dot product per entry. Slower, used for cross-checking.
    Direct,
}

/// One row of the distance matrix: subsequence `row_index` of the segment
/// against all `n - l + 1` subsequences of the series.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub row_index: usize,
    pub entries: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Below this `1 - rho`, `sqrt(2 l (1 - rho))` magnifies the round-off in
/// `rho` too much and the distance is recomputed directly.
const REFINE_GAP: f64 = 1e-3;
/// Above this `(|mu_a| / sd_a + 1) (|mu_b| / sd_b + 1)` the dot product
/// loses too many digits to cancellation and the distance is recomputed
/// directly.
const REFINE_CONDITION: f64 = 1e4;

/// Correlation distance, or `None` when the caller should compute it
/// directly.
#[inline]
fn distance_from_dot(qt: f64, l: f64, mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> Option<f64> {
    match (sd_a == 0.0, sd_b == 0.0) {
        (true, true) => Some(0.0),
        (true, false) | (false, true) => Some(l.sqrt()),
        (false, false) => {
            let rho = ((qt - l * mu_a * mu_b) / (l * sd_a * sd_b)).clamp(-1.0, 1.0);
            let gap = 1.0 - rho;
            let condition = (mu_a.abs() / sd_a + 1.0) * (mu_b.abs() / sd_b + 1.0);
            if gap < REFINE_GAP || condition > REFINE_CONDITION {
                None
            } else {
                Some((2.0 * l * gap).sqrt())
            }
        }
    }
}

/// Distance between two non-constant windows from their z-normalized values.
fn direct_distance(a: &[f64], mu_a: f64, sd_a: f64, b: &[f64], mu_b: f64, sd_b: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let e = (x - mu_a) / sd_a - (y - mu_b) / sd_b;
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Walks the rows of the distance matrix of one segment in order.
///
/// The streaming kernel computes the first row directly and derives each
/// following row from the previous one:
/// `QT(i, j) = QT(i-1, j-1) - x[p-1] x[j-1] + x[p+l-1] x[j+l-1]`, where `p`
/// is the series position of row `i`. Round-off therefore accumulates over at
/// most `rows` steps.
pub struct SegmentRows<'a> {
    x: &'a [f64],
    stats: &'a SlidingStats,
    seg_start: usize,
    rows: usize,
    next: usize,
    qt: Vec<f64>,
    kernel: Kernel,
}

impl<'a> SegmentRows<'a> {
    /// Rows for the segment `[seg_start, seg_start + seg_len)`.
    pub fn new(
        ts: &'a TimeSeries,
        stats: &'a SlidingStats,
        seg_start: usize,
        seg_len: usize,
        kernel: Kernel,
    ) -> Result<Self> {
        let l = stats.window();
        if seg_len < l {
            return Err(Error::InvalidParams(format!(
                "segment length {seg_len} shorter than subsequence length {l}"
            )));
        }
        if seg_start + seg_len > ts.len() {
            return Err(Error::IndexOutOfRange {
                index: seg_start + seg_len - 1,
                limit: ts.len(),
            });
        }
        if stats.len() != ts.num_windows(l) {
            return Err(Error::LengthMismatch {
                left: stats.len(),
                right: ts.num_windows(l),
            });
        }
        Ok(Self {
            x: ts.centered(),
            stats,
            seg_start,
            rows: seg_len - l + 1,
            next: 0,
            qt: Vec::new(),
            kernel,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.stats.len()
    }

    /// Fills `out` (length `n - l + 1`) with the next row; returns its index.
    pub fn fill_next(&mut self, out: &mut [f64]) -> Option<usize> {
        if self.next == self.rows {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let l = self.stats.window();
        let cols = self.columns();
        debug_assert_eq!(out.len(), cols);
        let p = self.seg_start + i;
        let x = self.x;
        let query = &x[p..p + l];

        match self.kernel {
            Kernel::Direct => {
                self.qt.clear();
                self.qt.extend((0..cols).map(|j| dot(query, &x[j..j + l])));
            }
            Kernel::Streaming if i == 0 => {
                self.qt.clear();
                self.qt.extend((0..cols).map(|j| dot(query, &x[j..j + l])));
            }
            Kernel::Streaming => {
                let out_old = x[p - 1];
                let in_new = x[p + l - 1];
                for j in (1..cols).rev() {
                    self.qt[j] = self.qt[j - 1] - out_old * x[j - 1] + in_new * x[j + l - 1];
                }
                self.qt[0] = dot(query, &x[0..l]);
            }
        }

        let means = self.stats.centered_means();
        let stds = self.stats.stds();
        let (mu_a, sd_a) = (means[p], stds[p]);
        let lf = l as f64;
        for (j, d) in out.iter_mut().enumerate() {
            *d = distance_from_dot(self.qt[j], lf, mu_a, sd_a, means[j], stds[j]).unwrap_or_else(
                || direct_distance(query, mu_a, sd_a, &x[j..j + l], means[j], stds[j]),
            );
        }
        // identical windows
        out[p] = 0.0;
        Some(i)
    }
}

/// Row `i` of the distance matrix of the segment starting at `seg_start`:
/// the distances from subsequence `seg_start + i` to every subsequence.
pub fn distance_row(
    ts: &TimeSeries,
    stats: &SlidingStats,
    seg_start: usize,
    i: usize,
    l: usize,
    kernel: Kernel,
) -> Result<DistanceRow> {
    if stats.window() != l {
        return Err(Error::StatsMismatch {
            stats: stats.window(),
            requested: l,
        });
    }
    if seg_start + i + l > ts.len() {
        return Err(Error::IndexOutOfRange {
            index: seg_start + i + l - 1,
            limit: ts.len(),
        });
    }
    let mut entries = vec![0.0; stats.len()];
    match kernel {
        Kernel::Direct => {
            let mut rows = SegmentRows::new(ts, stats, seg_start + i, l, Kernel::Direct)?;
            rows.fill_next(&mut entries);
        }
        Kernel::Streaming => {
            let mut rows = SegmentRows::new(ts, stats, seg_start, i + l, Kernel::Streaming)?;
            while rows.fill_next(&mut entries) != Some(i) {}
        }
    }
    Ok(DistanceRow {
        row_index: i,
        entries,
    })
}

/// Reference z-normalized Euclidean distance: z-normalize both windows
/// (population deviation, constant windows become all zeros), then take
/// the plain Euclidean distance.
pub fn znorm_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("window"));
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let za = znormalize(a);
    let zb = znormalize(b);
    Ok(za
        .iter()
        .zip(&zb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

fn znormalize(w: &[f64]) -> Vec<f64> {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    if w.iter().all(|&v| v == w[0]) {
        return vec![0.0; w.len()];
    }
    let std = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    w.iter().map(|v| (v - mean) / std).collect()
}
