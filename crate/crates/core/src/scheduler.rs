//! Load-balanced evaluation of a length grid.
//!
//! Each candidate length is one job. Job costs are predicted by a
//! polynomial regression on runtimes observed in earlier runs (or by an
//! operation count before any runtimes exist), the jobs are split across
//! workers with the Karmarkar-Karp differencing method, and every worker
//! runs its share on its own thread. Results are merged by length, so the
//! output does not depend on the worker count.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::length_select::{
    evaluate_length, validate_grid, LengthOutcome, LengthReport, SubseqRule,
};
use crate::series::TimeSeries;
use crate::snippets::Exec;

/// Polynomial `c0 + c1 m + ... + cd m^d` fitted to observed job runtimes.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub degree: usize,
    /// Ascending powers.
    pub coefficients: Vec<f64>,
    pub training_set: Vec<(f64, f64)>,
}

impl CostModel {
    pub fn predict(&self, m: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * m + c)
    }

    /// Sum of squared residuals over the training set.
    pub fn residual(&self) -> f64 {
        self.training_set
            .iter()
            .map(|&(m, y)| (self.predict(m) - y).powi(2))
            .sum()
    }
}

/// Least-squares polynomial fit of `(m, seconds)` samples.
pub fn fit_cost_model(samples: &[(f64, f64)], degree: usize) -> Result<CostModel> {
    let cols = degree + 1;
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if samples.len() < cols || distinct.len() < cols {
        return Err(Error::InvalidParams(format!(
            "degree {degree} fit needs {cols} distinct lengths, got {}",
            distinct.len()
        )));
    }
    if samples
        .iter()
        .any(|(m, y)| !m.is_finite() || !y.is_finite())
    {
        return Err(Error::InvalidParams("non-finite training sample".into()));
    }
    let mut a: Vec<Vec<f64>> = samples
        .iter()
        .map(|&(m, _)| (0..cols).map(|p| m.powi(p as i32)).collect())
        .collect();
    let b: Vec<f64> = samples.iter().map(|s| s.1).collect();

    // equilibrate columns; the powers of m differ by orders of magnitude
    let norms: Vec<f64> = (0..cols)
        .map(|c| a.iter().map(|r| r[c] * r[c]).sum::<f64>().sqrt())
        .collect();
    for row in &mut a {
        for (v, s) in row.iter_mut().zip(&norms) {
            *v /= s;
        }
    }
    let scaled = householder_lstsq(a, b)?;
    Ok(CostModel {
        degree,
        coefficients: scaled.iter().zip(&norms).map(|(c, s)| c / s).collect(),
        training_set: samples.to_vec(),
    })
}

/// Solves `min ||A x - b||` for a tall, full-rank `A` by Householder QR.
fn householder_lstsq(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let rows = a.len();
    let cols = a[0].len();
    for k in 0..cols {
        let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParams("rank-deficient design matrix".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        #[allow(clippy::needless_range_loop)]
        for c in k..cols {
            let proj = (k..rows).map(|i| v[i - k] * a[i][c]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..rows {
                a[i][c] -= proj * v[i - k];
            }
        }
        let proj = (k..rows).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..rows {
            b[i] -= proj * v[i - k];
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        if a[k][k].abs() < 1e-12 {
            return Err(Error::InvalidParams("rank-deficient design matrix".into()));
        }
        let s: f64 = (k + 1..cols).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

/// Cold-start weight: distance-matrix entries per segment times segments.
pub fn default_cost(m: usize, n: usize, rule: SubseqRule) -> f64 {
    let l = rule.l_for(m).min(m).max(1);
    let segments = n.checked_div(m).unwrap_or(0);
    ((m - l + 1) * (n.saturating_sub(l) + 1) * segments) as f64
}

/// Assignment of jobs to workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Job indices per worker, ascending.
    pub assignments: Vec<Vec<usize>>,
    /// Sum of job weights per worker.
    pub predicted_loads: Vec<f64>,
    /// Job weights quantized to integer ticks; the differencing runs on
    /// these so that it is exact.
    pub ticks: Vec<u64>,
    /// Final value of the differencing loop, in ticks.
    pub difference: u64,
}

impl Schedule {
    pub fn workers(&self) -> usize {
        self.assignments.len()
    }

    pub fn makespan(&self) -> f64 {
        self.predicted_loads.iter().copied().fold(0.0, f64::max)
    }

    pub fn tick_loads(&self) -> Vec<u64> {
        self.assignments
            .iter()
            .map(|jobs| jobs.iter().map(|&j| self.ticks[j]).sum())
            .collect()
    }

    /// Max minus min worker load in ticks, recomputed from the assignment.
    pub fn reconstructed_difference(&self) -> u64 {
        let loads = self.tick_loads();
        let max = loads.iter().copied().max().unwrap_or(0);
        let min = loads.iter().copied().min().unwrap_or(0);
        max - min
    }
}

const TICK_SCALE: f64 = (1u64 << 40) as f64;

fn quantize(weights: &[f64]) -> Vec<u64> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    weights
        .iter()
        .map(|w| ((w / max * TICK_SCALE).round() as u64).max(1))
        .collect()
}

/// Karmarkar-Karp partition of `weights` over `workers` sets.
///
/// Two workers use the largest differencing method: the two largest values
/// are replaced by their difference and an edge records that they go to
/// different sides; two-coloring the resulting tree gives the sets. More
/// workers use the tuple extension: each job starts as a `workers`-tuple
/// `(w, 0, ..., 0)`, and the two tuples with the largest spread are merged
/// largest-with-smallest until one tuple remains.
pub fn kk_partition(weights: &[f64], workers: usize) -> Result<Schedule> {
    if workers == 0 {
        return Err(Error::InvalidParams("need at least one worker".into()));
    }
    if weights.is_empty() {
        return Err(Error::Empty("job weights"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidParams(format!(
            "job weights must be positive, got {w}"
        )));
    }
    let ticks = quantize(weights);
    let (assignments, difference) = match workers {
        1 => ((vec![(0..weights.len()).collect()]), 0),
        2 => differencing_two_way(&ticks),
        _ => differencing_multiway(&ticks, workers),
    };
    let predicted_loads = assignments
        .iter()
        .map(|jobs: &Vec<usize>| jobs.iter().map(|&j| weights[j]).sum())
        .collect();
    Ok(Schedule {
        assignments,
        predicted_loads,
        ticks,
        difference,
    })
}

fn differencing_two_way(ticks: &[u64]) -> (Vec<Vec<usize>>, u64) {
    let n = ticks.len();
    let mut heap: BinaryHeap<(u64, Reverse<usize>)> = ticks
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, Reverse(i)))
        .collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    while heap.len() > 1 {
        let (a, Reverse(na)) = heap.pop().expect("len > 1");
        let (b, Reverse(nb)) = heap.pop().expect("len > 1");
        adjacency[na].push(nb);
        adjacency[nb].push(na);
        heap.push((a - b, Reverse(na)));
    }
    let difference = heap.pop().map_or(0, |(v, _)| v);

    let mut side = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if side[root] != usize::MAX {
            continue;
        }
        side[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if side[v] == usize::MAX {
                    side[v] = 1 - side[u];
                    queue.push_back(v);
                }
            }
        }
    }
    let mut sets = vec![Vec::new(), Vec::new()];
    for (job, &s) in side.iter().enumerate() {
        sets[s].push(job);
    }
    (sets, difference)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Partial {
    /// Descending.
    sums: Vec<u64>,
    sets: Vec<Vec<usize>>,
    id: usize,
}

impl Partial {
    fn spread(&self) -> u64 {
        self.sums[0] - self.sums[self.sums.len() - 1]
    }
}

impl Ord for Partial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.spread()
            .cmp(&other.spread())
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn differencing_multiway(ticks: &[u64], workers: usize) -> (Vec<Vec<usize>>, u64) {
    let mut heap: BinaryHeap<Partial> = ticks
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut sums = vec![0; workers];
            let mut sets = vec![Vec::new(); workers];
            sums[0] = t;
            sets[0].push(i);
            Partial { sums, sets, id: i }
        })
        .collect();
    let mut next_id = ticks.len();
    while heap.len() > 1 {
        let a = heap.pop().expect("len > 1");
        let b = heap.pop().expect("len > 1");
        let mut merged: Vec<(u64, Vec<usize>)> = (0..workers)
            .map(|i| {
                let j = workers - 1 - i;
                let mut set = a.sets[i].clone();
                set.extend_from_slice(&b.sets[j]);
                (a.sums[i] + b.sums[j], set)
            })
            .collect();
        merged.sort_by_key(|x| Reverse(x.0));
        let (sums, sets) = merged.into_iter().unzip();
        heap.push(Partial {
            sums,
            sets,
            id: next_id,
        });
        next_id += 1;
    }
    let last = heap.pop().expect("at least one job");
    let difference = last.spread();
    let sets = last
        .sets
        .into_iter()
        .map(|mut s| {
            s.sort_unstable();
            s
        })
        .collect();
    (sets, difference)
}

/// One observed job runtime, as stored in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub seconds: f64,
    pub timestamp: f64,
}

/// Append-only JSON-lines file of observed runtimes.
#[derive(Debug, Clone)]
pub struct TrainingLog {
    path: PathBuf,
}

impl TrainingLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records; a missing file is an empty log.
    pub fn load(&self) -> Result<Vec<TrainingRecord>> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(Error::Io {
                    path: self.path.clone(),
                    source,
                })
            }
        };
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|e| {
                    Error::TrainingLog(format!("{}:{}: {e}", self.path.display(), i + 1))
                })
            })
            .collect()
    }

    pub fn append(&self, records: &[TrainingRecord]) -> Result<()> {
        let io_err = |source| Error::Io {
            path: self.path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err)?;
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).expect("record serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err)
    }
}

/// Where the job weights came from.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSource {
    Default,
    Learned(CostModel),
}

/// Predicted weight of every grid length. Uses a fitted model when the
/// history holds enough runtimes for this series length, else the
/// operation count.
pub fn predict_costs(
    n: usize,
    grid: &[usize],
    rule: SubseqRule,
    history: &[TrainingRecord],
    degree: usize,
) -> (Vec<f64>, CostSource) {
    let samples: Vec<(f64, f64)> = history
        .iter()
        .filter(|r| r.n == n && r.l == rule.l_for(r.m))
        .map(|r| (r.m as f64, r.seconds))
        .collect();
    if let Ok(model) = fit_cost_model(&samples, degree) {
        let costs: Vec<f64> = grid.iter().map(|&m| model.predict(m as f64)).collect();
        if costs.iter().all(|c| c.is_finite() && *c > 0.0) {
            return (costs, CostSource::Learned(model));
        }
    }
    let costs = grid.iter().map(|&m| default_cost(m, n, rule)).collect();
    (costs, CostSource::Default)
}

/// Output of [`run_schedule`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcomes: BTreeMap<usize, LengthOutcome>,
    /// Observed runtime per job, sorted by `m`.
    pub observations: Vec<TrainingRecord>,
}

/// Runs every worker's job list on its own thread. `exec` applies inside
/// each job.
pub fn run_schedule(
    ts: &TimeSeries,
    grid: &[usize],
    schedule: &Schedule,
    rule: SubseqRule,
    count: usize,
    exec: &Exec,
) -> Result<RunOutput> {
    let mut seen = vec![false; grid.len()];
    for &j in schedule.assignments.iter().flatten() {
        if j >= grid.len() || seen[j] {
            return Err(Error::InvalidParams(format!(
                "schedule does not assign job {j} exactly once"
            )));
        }
        seen[j] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidParams(
            "schedule leaves jobs unassigned".into(),
        ));
    }

    let results: Mutex<Vec<(usize, Result<LengthOutcome>)>> = Mutex::new(Vec::new());
    let observations: Mutex<Vec<TrainingRecord>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for jobs in &schedule.assignments {
            let results = &results;
            let observations = &observations;
            scope.spawn(move || {
                for &j in jobs {
                    let m = grid[j];
                    let started = Instant::now();
                    let outcome = evaluate_length(ts, m, rule, count, exec);
                    let seconds = started.elapsed().as_secs_f64();
                    if outcome.is_ok() {
                        observations.lock().expect("lock").push(TrainingRecord {
                            m,
                            n: ts.len(),
                            l: rule.l_for(m),
                            seconds,
                            timestamp: unix_now(),
                        });
                    }
                    results.lock().expect("lock").push((m, outcome));
                }
            });
        }
    });

    let mut results = results.into_inner().expect("lock");
    results.sort_by_key(|r| r.0);
    let mut outcomes = BTreeMap::new();
    for (m, outcome) in results {
        let outcome = outcome.map_err(|e| Error::Job {
            m,
            source: Box::new(e),
        })?;
        outcomes.insert(m, outcome);
    }
    let mut observations = observations.into_inner().expect("lock");
    observations.sort_by_key(|r| r.m);
    Ok(RunOutput {
        outcomes,
        observations,
    })
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Settings for [`sweep`].
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub rule: SubseqRule,
    pub count: usize,
    pub workers: usize,
    /// Threads inside each worker.
    pub exec: Exec,
    pub degree: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            rule: SubseqRule::Half,
            count: 2,
            workers: 1,
            exec: Exec::default(),
            degree: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub report: LengthReport,
    pub schedule: Schedule,
    pub cost_source: CostSource,
    pub observations: Vec<TrainingRecord>,
}

/// Plans, runs and scores a whole length grid.
pub fn sweep(
    ts: &TimeSeries,
    grid: &[usize],
    options: &SweepOptions,
    history: &[TrainingRecord],
) -> Result<SweepOutput> {
    validate_grid(ts, grid, options.rule, options.count)?;
    let (costs, cost_source) = predict_costs(ts.len(), grid, options.rule, history, options.degree);
    let schedule = kk_partition(&costs, options.workers)?;
    let run = run_schedule(
        ts,
        grid,
        &schedule,
        options.rule,
        options.count,
        &options.exec,
    )?;
    let report = LengthReport::from_outcomes(run.outcomes.into_values().collect())?;
    Ok(SweepOutput {
        report,
        schedule,
        cost_source,
        observations: run.observations,
    })
}
