//! MPdist between a segment and every length-`m` window of the series.
//!
//! For one segment the pipeline is:
//!
//! 1. distance rows of the segment's `l`-subsequences against the series
//!    ([`crate::zdist`]),
//! 2. columnwise minima over the rows (BA join),
//! 3. sliding minima of width `m - l + 1` along each row (AB join),
//! 4. for every window `j`, the `k`-th smallest of the AB column at `j`
//!    concatenated with the BA slice `[j, j + m - l]`.
//!
//! The full distance matrix is never held; rows are consumed as they are
//! produced.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SlidingStats, TimeSeries};
use crate::zdist::{Kernel, SegmentRows};

/// Snippet length `m`, subsequence length `l` and order statistic `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MPdistParams {
    m: usize,
    l: usize,
    k: usize,
}

impl MPdistParams {
    /// `l` defaults to `ceil(m / 2)`. `k = ceil(0.05 * 2m)`, at least 1.
    pub fn new(m: usize, l: Option<usize>) -> Result<Self> {
        let l = l.unwrap_or(m.div_ceil(2));
        if l == 0 || l > m {
            return Err(Error::InvalidParams(format!(
                "need 1 <= l <= m, got l = {l}, m = {m}"
            )));
        }
        Ok(Self {
            m,
            l,
            k: Self::default_k(m),
        })
    }

    /// `ceil(0.05 * 2m) = ceil(m / 10)`, computed in integers.
    pub fn default_k(m: usize) -> usize {
        m.div_ceil(10).max(1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of `l`-subsequences in a length-`m` window.
    pub fn inner_count(&self) -> usize {
        self.m - self.l + 1
    }

    pub fn check_series(&self, n: usize) -> Result<()> {
        if self.m > n {
            return Err(Error::InvalidParams(format!(
                "m = {} exceeds series length {n}",
                self.m
            )));
        }
        Ok(())
    }
}

/// MPdist values between one segment and all `n - m + 1` windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MPdistProfile {
    pub segment_index: usize,
    pub values: Vec<f64>,
}

impl MPdistProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Columnwise minimum over equal-length rows.
pub fn column_minima<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(Error::Empty("rows"))?.as_ref();
    let mut out = first.to_vec();
    for row in &rows[1..] {
        let row = row.as_ref();
        if row.len() != out.len() {
            return Err(Error::LengthMismatch {
                left: out.len(),
                right: row.len(),
            });
        }
        fold_min(&mut out, row);
    }
    Ok(out)
}

#[inline]
fn fold_min(acc: &mut [f64], row: &[f64]) {
    for (a, &r) in acc.iter_mut().zip(row) {
        if r < *a {
            *a = r;
        }
    }
}

/// Minimum of every width-`window` slice of `row`, in O(len) with a
/// monotonic deque. Output length is `row.len() - window + 1`.
pub fn row_sliding_minima(row: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > row.len() {
        return Err(Error::InvalidParams(format!(
            "window {window} does not fit a row of length {}",
            row.len()
        )));
    }
    let mut out = vec![0.0; row.len() - window + 1];
    sliding_minima_into(row, window, &mut out, &mut VecDeque::new());
    Ok(out)
}

fn sliding_minima_into(row: &[f64], window: usize, out: &mut [f64], deque: &mut VecDeque<usize>) {
    deque.clear();
    for (idx, &v) in row.iter().enumerate() {
        while deque.back().is_some_and(|&b| row[b] >= v) {
            deque.pop_back();
        }
        deque.push_back(idx);
        if idx + 1 >= window {
            let start = idx + 1 - window;
            while deque.front().is_some_and(|&f| f < start) {
                deque.pop_front();
            }
            out[start] = row[deque[0]];
        }
    }
}

/// `k`-th smallest (1-based) of `buf` when `buf.len() > k`, otherwise the
/// maximum. Reorders `buf`.
fn kth_or_max(buf: &mut [f64], k: usize) -> f64 {
    if buf.len() > k {
        *buf.select_nth_unstable_by(k - 1, f64::total_cmp).1
    } else {
        buf.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// MPdist from the AB part (one column of the sliding-minima rows) and the
/// BA part (the matching slice of the columnwise minima).
pub fn mpdist_at(ab: &[f64], ba: &[f64], params: &MPdistParams) -> Result<f64> {
    let want = params.inner_count();
    if ab.len() != want || ba.len() != want {
        return Err(Error::LengthMismatch {
            left: ab.len(),
            right: ba.len(),
        });
    }
    let mut joined = Vec::with_capacity(2 * want);
    joined.extend_from_slice(ab);
    joined.extend_from_slice(ba);
    Ok(kth_or_max(&mut joined, params.k))
}

/// Profile of segment `segment_index` (the window starting at
/// `segment_index * m`).
pub fn mpdist_profile(
    ts: &TimeSeries,
    segment_index: usize,
    params: &MPdistParams,
) -> Result<MPdistProfile> {
    let stats = SlidingStats::new(ts, params.l)?;
    mpdist_profile_with(ts, &stats, segment_index, params, Kernel::Streaming)
}

/// As [`mpdist_profile`] with precomputed statistics and a chosen kernel.
pub fn mpdist_profile_with(
    ts: &TimeSeries,
    stats: &SlidingStats,
    segment_index: usize,
    params: &MPdistParams,
    kernel: Kernel,
) -> Result<MPdistProfile> {
    params.check_series(ts.len())?;
    let segments = ts.len() / params.m;
    if segment_index >= segments {
        return Err(Error::IndexOutOfRange {
            index: segment_index,
            limit: segments,
        });
    }
    let values = window_profile(ts, stats, segment_index * params.m, params, kernel)?;
    Ok(MPdistProfile {
        segment_index,
        values,
    })
}

/// MPdist between the length-`m` query starting at `start` and every
/// length-`m` window of the series.
pub fn window_profile(
    ts: &TimeSeries,
    stats: &SlidingStats,
    start: usize,
    params: &MPdistParams,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    params.check_series(ts.len())?;
    if stats.window() != params.l {
        return Err(Error::StatsMismatch {
            stats: stats.window(),
            requested: params.l,
        });
    }
    let mut rows = SegmentRows::new(ts, stats, start, params.m, kernel)?;
    let inner = params.inner_count();
    let cols = rows.columns();
    let windows = ts.num_windows(params.m);

    let mut row = vec![0.0; cols];
    let mut ba = vec![f64::INFINITY; cols];
    // AB minima stored window-major so each window's column is contiguous
    let mut ab = vec![0.0; windows * inner];
    let mut mins = vec![0.0; windows];
    let mut deque = VecDeque::with_capacity(inner + 1);

    while let Some(i) = rows.fill_next(&mut row) {
        fold_min(&mut ba, &row);
        sliding_minima_into(&row, inner, &mut mins, &mut deque);
        for (j, &v) in mins.iter().enumerate() {
            ab[j * inner + i] = v;
        }
    }

    let mut joined = Vec::with_capacity(2 * inner);
    let values = (0..windows)
        .map(|j| {
            joined.clear();
            joined.extend_from_slice(&ab[j * inner..(j + 1) * inner]);
            joined.extend_from_slice(&ba[j..j + inner]);
            kth_or_max(&mut joined, params.k)
        })
        .collect();
    Ok(values)
}
