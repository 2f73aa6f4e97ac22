//! Series ingestion and sliding window statistics.
//!
//! A [`TimeSeries`] is one coordinate of a (possibly multi-column) input.
//! Multi-coordinate inputs are handled by loading each column separately
//! and running the pipeline per coordinate.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One coordinate of a time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    coordinate_id: usize,
    offset: f64,
    centered: Vec<f64>,
}

impl TimeSeries {
    /// Minimum admissible length.
    pub const MIN_LEN: usize = 2;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_coordinate(values, 0)
    }

    pub fn with_coordinate(values: Vec<f64>, coordinate_id: usize) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(Error::TooShort {
                n: values.len(),
                min: Self::MIN_LEN,
            });
        }
        if let Some((row, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: row + 1,
                value,
            });
        }
        let offset = values.iter().sum::<f64>() / values.len() as f64;
        let centered = values.iter().map(|v| v - offset).collect();
        Ok(Self {
            values,
            coordinate_id,
            offset,
            centered,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn coordinate_id(&self) -> usize {
        self.coordinate_id
    }

    /// Number of length-`window` subsequences, `n - window + 1`.
    pub fn num_windows(&self, window: usize) -> usize {
        self.len() + 1 - window
    }

    /// Samples shifted by the global mean. The distance kernel works on
    /// these; z-normalized distances do not depend on a global shift.
    pub(crate) fn centered(&self) -> &[f64] {
        &self.centered
    }

    /// Returns a copy with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_coordinate(
            self.values.iter().map(|v| v * factor).collect(),
            self.coordinate_id,
        )
    }

    /// Write one value per line. Rust's float formatting is the shortest
    /// representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Load column `column` (zero-based) of a CSV file.
pub fn load_series(path: impl AsRef<Path>, column: usize) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_series(file, column).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse column `column` of comma-separated records. A first line that does
/// not parse as numbers is treated as a header. Rows are reported 1-based
/// by file line.
pub fn read_series<R: Read>(reader: R, column: usize) -> Result<TimeSeries> {
    let mut values = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: Default::default(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let cell = cells.get(column).ok_or(Error::ColumnOutOfRange {
            row,
            column,
            available: cells.len(),
        })?;
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            cell: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite { row, value });
        }
        values.push(value);
    }
    TimeSeries::with_coordinate(values, column)
}

/// Per-window mean and population standard deviation for one window length.
#[derive(Debug, Clone)]
pub struct SlidingStats {
    window: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
    centered_means: Vec<f64>,
}

impl SlidingStats {
    /// Prefix sums over the centered series give every window in O(1).
    /// Windows whose samples are all equal get exactly zero deviation.
    pub fn new(ts: &TimeSeries, window: usize) -> Result<Self> {
        let n = ts.len();
        if window == 0 || window > n {
            return Err(Error::WindowOutOfRange { window, n });
        }
        let x = ts.centered();
        let sum = PrefixSum::new(x.iter().copied());
        let sq = PrefixSum::new(x.iter().map(|v| v * v));
        // changes[i] counts positions p < i with values[p] != values[p - 1]
        let mut changes = vec![0usize; n + 1];
        for i in 0..n {
            let changed = i > 0 && ts.values[i] != ts.values[i - 1];
            changes[i + 1] = changes[i] + usize::from(changed);
        }

        let count = n - window + 1;
        let w = window as f64;
        let mut means = Vec::with_capacity(count);
        let mut stds = Vec::with_capacity(count);
        let mut centered_means = Vec::with_capacity(count);
        for i in 0..count {
            let end = i + window;
            if changes[end] - changes[i + 1] == 0 {
                centered_means.push(x[i]);
                means.push(ts.values[i]);
                stds.push(0.0);
                continue;
            }
            let mu = sum.range(i, end) / w;
            let var = (sq.range(i, end) / w - mu * mu).max(0.0);
            centered_means.push(mu);
            means.push(mu + ts.offset);
            stds.push(var.sqrt());
        }
        Ok(Self {
            window,
            means,
            stds,
            centered_means,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub(crate) fn centered_means(&self) -> &[f64] {
        &self.centered_means
    }
}

/// Prefix sums with Neumaier compensation, so that a range sum loses
/// precision relative to the range, not to the whole prefix.
struct PrefixSum {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSum {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let mut hi = vec![0.0];
        let mut lo = vec![0.0];
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for v in values {
            let t = s + v;
            c += if s.abs() >= v.abs() {
                (s - t) + v
            } else {
                (v - t) + s
            };
            s = t;
            hi.push(s);
            lo.push(c);
        }
        Self { hi, lo }
    }

    /// Sum of elements `from..to`.
    fn range(&self, from: usize, to: usize) -> f64 {
        (self.hi[to] - self.hi[from]) + (self.lo[to] - self.lo[from])
    }
}
