//! Choosing the snippet length.
//!
//! For each candidate length the snippets are found and scored by how far
//! apart their MPdist profiles are: the L1 area between every unordered pair
//! of snippet profiles, divided by the largest entry of any segment profile
//! at that length. The best length maximizes the score.
//!
//! Scores are not normalized by profile length (`n - m + 1`), so over a wide
//! range of `m` shorter lengths get a slight edge from their longer profiles.

use serde_json::json;

use crate::error::{Error, Result};
use crate::mpdist::{MPdistParams, MPdistProfile};
use crate::series::TimeSeries;
use crate::snippets::{select_from_profiles, Exec, SegmentProfiles, SnippetResult};
use crate::SCHEMA_VERSION;

/// How the subsequence length `l` follows from `m`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SubseqRule {
    /// `l = ceil(m / 2)`.
    #[default]
    Half,
    Fixed(usize),
}

impl SubseqRule {
    pub fn l_for(&self, m: usize) -> usize {
        match *self {
            SubseqRule::Half => m.div_ceil(2),
            SubseqRule::Fixed(l) => l,
        }
    }

    pub fn params(&self, m: usize) -> Result<MPdistParams> {
        MPdistParams::new(m, Some(self.l_for(m)))
    }
}

/// Candidate lengths between `m_min` and `m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRule {
    /// `m_min, 2 m_min, 4 m_min, ...`
    PowerOfTwo,
    /// `m_min, m_min + step, ...`
    Arithmetic(usize),
}

pub fn make_grid(m_min: usize, m_max: usize, rule: GridRule) -> Result<Vec<usize>> {
    if m_min == 0 || m_min > m_max {
        return Err(Error::InvalidParams(format!(
            "empty length range {m_min}..={m_max}"
        )));
    }
    let grid = match rule {
        GridRule::PowerOfTwo => std::iter::successors(Some(m_min), |&m| m.checked_mul(2))
            .take_while(|&m| m <= m_max)
            .collect(),
        GridRule::Arithmetic(0) => {
            return Err(Error::InvalidParams("grid step must be positive".into()))
        }
        GridRule::Arithmetic(step) => (m_min..=m_max).step_by(step).collect(),
    };
    Ok(grid)
}

/// Inter-profile separation of a snippet set.
pub fn criterion_score(result: &SnippetResult, all_profiles: &[MPdistProfile]) -> Result<f64> {
    if result.profiles.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "length criterion needs at least 2 snippets, got {}",
            result.profiles.len()
        )));
    }
    if all_profiles.is_empty() {
        return Err(Error::Empty("segment profiles"));
    }
    let mut numerator = 0.0;
    for (p, a) in result.profiles.iter().enumerate() {
        for b in &result.profiles[p + 1..] {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            numerator += a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>();
        }
    }
    let denominator = all_profiles
        .iter()
        .flat_map(|p| p.values.iter().copied())
        .fold(0.0, f64::max);
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

/// Snippets and score at one length.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthOutcome {
    pub m: usize,
    pub score: f64,
    pub result: SnippetResult,
}

/// Finds snippets at length `m` and scores them.
pub fn evaluate_length(
    ts: &TimeSeries,
    m: usize,
    rule: SubseqRule,
    count: usize,
    exec: &Exec,
) -> Result<LengthOutcome> {
    let params = rule.params(m)?;
    let all = SegmentProfiles::compute(ts, &params, exec)?;
    let result = select_from_profiles(&all, count, exec)?;
    let score = criterion_score(&result, &all.profiles)?;
    Ok(LengthOutcome { m, score, result })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthReport {
    /// Sorted by `m`.
    pub candidates: Vec<LengthOutcome>,
    pub m_best: usize,
}

impl LengthReport {
    /// Argmax of the score; ties go to the smaller length.
    pub fn from_outcomes(mut candidates: Vec<LengthOutcome>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("length grid"));
        }
        candidates.sort_by_key(|c| c.m);
        let mut best = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.score > candidates[best].score {
                best = i;
            }
        }
        let m_best = candidates[best].m;
        Ok(Self { candidates, m_best })
    }

    pub fn best(&self) -> &LengthOutcome {
        self.candidates
            .iter()
            .find(|c| c.m == self.m_best)
            .expect("m_best is one of the candidates")
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "schema": SCHEMA_VERSION,
            "m_best": self.m_best,
            "candidates": self.candidates.iter().map(|c| json!({
                "m": c.m,
                "score": c.score,
                "profile_area": c.result.profile_area,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Evaluates every length in `grid` in turn and picks the best one.
pub fn select_length(
    ts: &TimeSeries,
    grid: &[usize],
    rule: SubseqRule,
    count: usize,
) -> Result<LengthReport> {
    validate_grid(ts, grid, rule, count)?;
    let exec = Exec::default();
    let outcomes = grid
        .iter()
        .map(|&m| evaluate_length(ts, m, rule, count, &exec))
        .collect::<Result<Vec<_>>>()?;
    LengthReport::from_outcomes(outcomes)
}

/// Every length must give valid parameters and at least `count` (and at
/// least two) segments.
pub fn validate_grid(
    ts: &TimeSeries,
    grid: &[usize],
    rule: SubseqRule,
    count: usize,
) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("length grid"));
    }
    for &m in grid {
        rule.params(m)?;
        let segments = ts.len().checked_div(m).unwrap_or(0);
        if m < 2 || segments < count.max(2) {
            return Err(Error::InvalidParams(format!(
                "m = {m} gives {segments} segments, need at least {}",
                count.max(2)
            )));
        }
    }
    Ok(())
}
