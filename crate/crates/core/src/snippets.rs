//! Segmentation and greedy snippet selection.
//!
//! The series is cut into `floor(n / m)` non-overlapping segments. Each
//! segment gets an MPdist profile against every window; snippets are picked
//! greedily so that the pointwise minimum of the chosen profiles (the
//! representativeness curve) has the smallest possible sum. Every window is
//! then attributed to its nearest segment.
//!
//! Indices and positions are zero-based: segment `i` starts at `i * m`.
//! Samples past the last full segment belong to no segment but are still
//! covered by windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::mpdist::{mpdist_profile_with, MPdistParams, MPdistProfile};
use crate::series::{SlidingStats, TimeSeries};
use crate::zdist::Kernel;
use crate::SCHEMA_VERSION;

/// Execution knobs shared by the profile computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exec {
    /// Threads used for the per-segment profiles of one length.
    pub threads: usize,
    pub kernel: Kernel,
}

impl Default for Exec {
    fn default() -> Self {
        Self {
            threads: 1,
            kernel: Kernel::Streaming,
        }
    }
}

impl Exec {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads,
            ..Self::default()
        }
    }

    /// Runs `f` on a pool of `self.threads` threads, or inline for one.
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.threads <= 1 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSet {
    pub m: usize,
    pub starts: Vec<usize>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}

/// Non-overlapping segments of length `m`; requires `2 <= m <= n / 2`.
pub fn segment(ts: &TimeSeries, m: usize) -> Result<SegmentSet> {
    let n = ts.len();
    if m < 2 || m > n / 2 {
        return Err(Error::InvalidParams(format!(
            "segment length {m} must lie in 2..={} to form at least two segments",
            n / 2
        )));
    }
    Ok(SegmentSet {
        m,
        starts: (0..n / m).map(|i| i * m).collect(),
    })
}

/// Pointwise minimum over a non-empty set of equal-length profiles.
pub fn representativeness_curve<P: AsRef<[f64]>>(profiles: &[P]) -> Result<Vec<f64>> {
    let first = profiles
        .first()
        .ok_or(Error::Empty("profile subset"))?
        .as_ref();
    let mut curve = first.to_vec();
    for p in &profiles[1..] {
        let p = p.as_ref();
        if p.len() != curve.len() {
            return Err(Error::LengthMismatch {
                left: curve.len(),
                right: p.len(),
            });
        }
        for (c, &v) in curve.iter_mut().zip(p) {
            *c = c.min(v);
        }
    }
    Ok(curve)
}

/// Sum of all curve entries.
pub fn profile_area(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Empty("curve"));
    }
    Ok(curve.iter().sum())
}

impl AsRef<[f64]> for MPdistProfile {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// MPdist profiles of every segment at one length.
#[derive(Debug, Clone)]
pub struct SegmentProfiles {
    pub params: MPdistParams,
    pub n: usize,
    pub profiles: Vec<MPdistProfile>,
}

impl SegmentProfiles {
    pub fn compute(ts: &TimeSeries, params: &MPdistParams, exec: &Exec) -> Result<Self> {
        let segments = segment(ts, params.m())?;
        let stats = SlidingStats::new(ts, params.l())?;
        let profiles = exec.install(|| {
            (0..segments.len())
                .into_par_iter()
                .map(|i| mpdist_profile_with(ts, &stats, i, params, exec.kernel))
                .collect::<Result<Vec<_>>>()
        })??;
        Ok(Self {
            params: *params,
            n: ts.len(),
            profiles,
        })
    }

    /// Largest entry over all profiles.
    pub fn max_value(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.values.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn windows(&self) -> usize {
        self.n - self.params.m() + 1
    }

    /// Index of the nearest segment for every window, ties to the lower index.
    pub fn nearest_segments(&self) -> Vec<usize> {
        let mut lowest = self.profiles[0].values.clone();
        for p in &self.profiles[1..] {
            for (b, &v) in lowest.iter_mut().zip(&p.values) {
                *b = b.min(v);
            }
        }
        let mut best = vec![usize::MAX; self.windows()];
        for (r, p) in self.profiles.iter().enumerate() {
            for ((b, &low), &v) in best.iter_mut().zip(&lowest).zip(&p.values) {
                if *b == usize::MAX && is_tie(v, low) {
                    *b = r;
                }
            }
        }
        best
    }
}

/// Relative tolerance under which two distances or areas count as equal.
/// Copies of the same pattern at different offsets give values that differ
/// only by rounding; the tie rules must treat them as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Whether `v` ties with the minimum `low`.
pub(crate) fn is_tie(v: f64, low: f64) -> bool {
    v <= low + TIE_TOLERANCE * low.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    /// Segment number.
    pub index: usize,
    /// Position of the first sample in the series.
    pub start: usize,
    pub length: usize,
    /// Share of all windows whose nearest segment is this one.
    pub frac: f64,
    /// Start positions of those windows.
    pub neighbors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnippetResult {
    pub m: usize,
    pub l: usize,
    pub k: usize,
    /// Ordered by `frac` descending, ties by segment index.
    pub snippets: Vec<Snippet>,
    pub curve: Vec<f64>,
    pub profile_area: f64,
    /// Profiles of `snippets`, same order.
    pub profiles: Vec<MPdistProfile>,
    /// Curve area after each greedy step.
    pub area_trace: Vec<f64>,
    /// Windows whose nearest segment was not selected.
    pub unassigned: usize,
}

impl SnippetResult {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "schema": SCHEMA_VERSION,
            "m": self.m,
            "l": self.l,
            "k": self.k,
            "snippets": self.snippets.iter().map(|s| json!({
                "index": s.index,
                "start": s.start,
                "frac": s.frac,
                "neighbor_count": s.neighbors.len(),
            })).collect::<Vec<_>>(),
            "profile_area": self.profile_area,
            "unassigned": self.unassigned,
        })
    }

    /// Series length the result was computed on.
    pub fn series_len(&self) -> usize {
        self.curve.len() + self.m - 1
    }
}

/// Greedy snippet search with default execution settings.
pub fn select_snippets(
    ts: &TimeSeries,
    params: &MPdistParams,
    count: usize,
) -> Result<SnippetResult> {
    select_snippets_with(ts, params, count, &Exec::default())
}

pub fn select_snippets_with(
    ts: &TimeSeries,
    params: &MPdistParams,
    count: usize,
    exec: &Exec,
) -> Result<SnippetResult> {
    let all = SegmentProfiles::compute(ts, params, exec)?;
    select_from_profiles(&all, count, exec)
}

/// Greedy selection over precomputed segment profiles.
pub fn select_from_profiles(
    all: &SegmentProfiles,
    count: usize,
    exec: &Exec,
) -> Result<SnippetResult> {
    let segments = all.profiles.len();
    if count == 0 || count > segments {
        return Err(Error::InvalidParams(format!(
            "snippet count {count} must lie in 1..={segments}"
        )));
    }
    let windows = all.windows();
    let mut curve = vec![f64::INFINITY; windows];
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let mut area_trace = Vec::with_capacity(count);

    for _ in 0..count {
        let candidates: Vec<usize> = (0..segments).filter(|c| !chosen.contains(c)).collect();
        let areas = exec.install(|| {
            candidates
                .par_iter()
                .map(|&c| {
                    curve
                        .iter()
                        .zip(&all.profiles[c].values)
                        .map(|(a, b)| a.min(*b))
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
        })?;
        let low = areas.iter().copied().fold(f64::INFINITY, f64::min);
        let (best, area) = candidates
            .iter()
            .zip(&areas)
            .find(|(_, &a)| is_tie(a, low))
            .map(|(&c, &a)| (c, a))
            .expect("at least one candidate");
        for (c, &v) in curve.iter_mut().zip(&all.profiles[best].values) {
            *c = c.min(v);
        }
        chosen.push(best);
        area_trace.push(area);
    }

    let nearest = all.nearest_segments();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); segments];
    for (j, &r) in nearest.iter().enumerate() {
        neighbors[r].push(j);
    }
    let m = all.params.m();
    let mut snippets: Vec<Snippet> = chosen
        .iter()
        .map(|&idx| Snippet {
            index: idx,
            start: idx * m,
            length: m,
            frac: neighbors[idx].len() as f64 / windows as f64,
            neighbors: std::mem::take(&mut neighbors[idx]),
        })
        .collect();
    let unassigned = neighbors.iter().map(Vec::len).sum();
    snippets.sort_by(|a, b| b.frac.total_cmp(&a.frac).then(a.index.cmp(&b.index)));
    let profiles = snippets
        .iter()
        .map(|s| all.profiles[s.index].clone())
        .collect();

    Ok(SnippetResult {
        m,
        l: all.params.l(),
        k: all.params.k(),
        snippets,
        profile_area: profile_area(&curve)?,
        curve,
        profiles,
        area_trace,
        unassigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values).unwrap()
    }

    #[test]
    fn segment_starts() {
        let s = segment(&ts(vec![0.0; 8]), 2).unwrap();
        assert_eq!(s.starts, vec![0, 2, 4, 6]);
        let s = segment(&ts(vec![0.0; 9]), 2).unwrap();
        assert_eq!(s.starts, vec![0, 2, 4, 6]);
        assert!(segment(&ts(vec![0.0; 9]), 5).is_err());
        assert!(segment(&ts(vec![0.0; 9]), 1).is_err());
    }

    #[test]
    fn curve_examples() {
        let d1 = vec![1.0, 3.0, 2.0];
        let d2 = vec![2.0, 1.0, 4.0];
        let m = representativeness_curve(&[&d1, &d2]).unwrap();
        assert_eq!(m, vec![1.0, 1.0, 2.0]);
        assert_eq!(representativeness_curve(&[&d1]).unwrap(), d1);
        assert_eq!(profile_area(&m).unwrap(), 4.0);
        assert_eq!(profile_area(&[0.0; 5]).unwrap(), 0.0);
        assert!(profile_area(&[]).is_err());
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(representativeness_curve(&empty).is_err());
        assert!(representativeness_curve(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn homogeneous_series_single_snippet() {
        let block = [0.0, 2.0, 1.0, 3.0, -1.0, 0.5, 2.5, 1.5];
        let values: Vec<f64> = block.iter().cycle().take(64).copied().collect();
        let res = select_snippets(&ts(values), &MPdistParams::new(8, None).unwrap(), 1).unwrap();
        assert_eq!(res.snippets.len(), 1);
        assert_eq!(res.snippets[0].frac, 1.0);
        assert_eq!(res.unassigned, 0);
    }

    #[test]
    fn all_segments_partition_windows() {
        let values: Vec<f64> = (0..96)
            .map(|i| ((i * 7) % 11) as f64 + (i as f64 * 0.2).sin())
            .collect();
        let t = ts(values);
        let p = MPdistParams::new(8, None).unwrap();
        let res = select_snippets(&t, &p, 12).unwrap();
        let total: f64 = res.snippets.iter().map(|s| s.frac).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let count: usize = res.snippets.iter().map(|s| s.neighbors.len()).sum();
        assert_eq!(count, 96 - 8 + 1);
        assert!(res.snippets.windows(2).all(|w| w[0].frac >= w[1].frac));
        assert!(res.area_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((res.profile_area - res.curve.iter().sum::<f64>()).abs() < 1e-6);
        assert!(select_snippets(&t, &p, 13).is_err());
        assert!(select_snippets(&t, &p, 0).is_err());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let values: Vec<f64> = (0..400)
            .map(|i| (i as f64 * 0.3).sin() * (1.0 + (i / 100) as f64))
            .collect();
        let t = ts(values);
        let p = MPdistParams::new(20, None).unwrap();
        let a = select_snippets_with(&t, &p, 3, &Exec::with_threads(1)).unwrap();
        let b = select_snippets_with(&t, &p, 3, &Exec::with_threads(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_shape() {
        let values: Vec<f64> = (0..64).map(|i| (i as f64 * 0.5).sin()).collect();
        let res = select_snippets(&ts(values), &MPdistParams::new(8, None).unwrap(), 2).unwrap();
        let v = res.to_json();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["m"], 8);
        assert_eq!(v["l"], 4);
        assert_eq!(v["snippets"].as_array().unwrap().len(), 2);
        assert!(v["snippets"][0]["neighbor_count"].is_u64());
    }
}
