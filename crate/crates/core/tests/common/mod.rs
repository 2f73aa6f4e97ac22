//! Series generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let step = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x += step.sample(rng);
            x
        })
        .collect()
}

/// Unit-amplitude sine and square waves of period 32, each lasting one
/// period, alternating; Gaussian noise of standard deviation `sigma`.
/// Returns the series and the regime (0 sine, 1 square) of every point.
pub fn alternating_regimes(n: usize, sigma: f64, seed: u64) -> (Vec<f64>, Vec<u32>) {
    regime_blocks(n, 32, sigma, seed)
}

/// Sine and square waves of period 32 in alternating blocks of `block`
/// points.
pub fn regime_blocks(n: usize, block: usize, sigma: f64, seed: u64) -> (Vec<f64>, Vec<u32>) {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut values = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let phase = (i % 32) as f64 / 32.0;
        let regime = ((i / block) % 2) as u32;
        let clean = if regime == 0 {
            (std::f64::consts::TAU * phase).sin()
        } else if phase < 0.5 {
            1.0
        } else {
            -1.0
        };
        let e = if sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        values.push(clean + e);
        truth.push(regime);
    }
    (values, truth)
}

/// Two-pass z-normalization; a window of identical samples maps to zeros.
fn znorm(w: &[f64]) -> Vec<f64> {
    if w.iter().all(|&x| x == w[0]) {
        return vec![0.0; w.len()];
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    w.iter().map(|x| (x - mean) / sd).collect()
}

pub fn zdist(a: &[f64], b: &[f64]) -> f64 {
    znorm(a)
        .iter()
        .zip(znorm(b))
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// MPdist between two equal-length windows by the definition: every
/// `l`-subsequence of each side takes its nearest neighbor on the other
/// side, the two lists are pooled, and the `k`-th smallest is returned
/// (the largest if the pool has at most `k` values).
pub fn naive_mpdist(a: &[f64], b: &[f64], l: usize, k: usize) -> f64 {
    let subs = |w: &[f64]| -> Vec<Vec<f64>> { w.windows(l).map(<[f64]>::to_vec).collect() };
    let (sa, sb) = (subs(a), subs(b));
    let mut pool = Vec::with_capacity(sa.len() + sb.len());
    for x in &sa {
        pool.push(sb.iter().map(|y| zdist(x, y)).fold(f64::INFINITY, f64::min));
    }
    for y in &sb {
        pool.push(sa.iter().map(|x| zdist(x, y)).fold(f64::INFINITY, f64::min));
    }
    pool.sort_by(f64::total_cmp);
    if pool.len() > k {
        pool[k - 1]
    } else {
        pool[pool.len() - 1]
    }
}

/// MPdist from the segment at `start` to every length-`m` window.
pub fn naive_profile(values: &[f64], start: usize, m: usize, l: usize, k: usize) -> Vec<f64> {
    let seg = &values[start..start + m];
    (0..=values.len() - m)
        .map(|j| naive_mpdist(seg, &values[j..j + m], l, k))
        .collect()
}

/// Area under the pointwise minimum of the chosen profiles.
pub fn subset_area(profiles: &[Vec<f64>], subset: &[usize]) -> f64 {
    (0..profiles[0].len())
        .map(|j| {
            subset
                .iter()
                .map(|&s| profiles[s][j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Smallest area over all size-`k` subsets.
pub fn exhaustive_area(profiles: &[Vec<f64>], k: usize) -> f64 {
    fn rec(profiles: &[Vec<f64>], k: usize, from: usize, cur: &mut Vec<usize>, best: &mut f64) {
        if cur.len() == k {
            *best = best.min(subset_area(profiles, cur));
            return;
        }
        for i in from..profiles.len() {
            cur.push(i);
            rec(profiles, k, i + 1, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(profiles, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Longest-processing-time-first makespan.
pub fn lpt_makespan(weights: &[f64], workers: usize) -> f64 {
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut loads = vec![0.0f64; workers];
    for w in sorted {
        let i = (0..workers)
            .min_by(|&a, &b| loads[a].total_cmp(&loads[b]))
            .unwrap();
        loads[i] += w;
    }
    loads.into_iter().fold(0.0, f64::max)
}

pub fn random_weights(rng: &mut ChaCha8Rng, max_jobs: usize) -> Vec<f64> {
    let n = rng.random_range(2..=max_jobs);
    (0..n).map(|_| rng.random_range(0.1..100.0)).collect()
}

/// The same definition as [`naive_mpdist`], with all pairwise subsequence
/// distances of one series computed up front.
pub struct PairwiseOracle {
    dist: Vec<Vec<f64>>,
    l: usize,
    k: usize,
}

impl PairwiseOracle {
    pub fn new(values: &[f64], l: usize, k: usize) -> Self {
        let z: Vec<Vec<f64>> = values.windows(l).map(znorm).collect();
        let dist = z
            .iter()
            .map(|a| {
                z.iter()
                    .map(|b| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        Self { dist, l, k }
    }

    pub fn mpdist(&self, a: usize, b: usize, m: usize) -> f64 {
        let inner = m - self.l + 1;
        let mut pool = Vec::with_capacity(2 * inner);
        for i in a..a + inner {
            pool.push(
                (b..b + inner)
                    .map(|j| self.dist[i][j])
                    .fold(f64::INFINITY, f64::min),
            );
        }
        for j in b..b + inner {
            pool.push(
                (a..a + inner)
                    .map(|i| self.dist[i][j])
                    .fold(f64::INFINITY, f64::min),
            );
        }
        pool.sort_by(f64::total_cmp);
        if pool.len() > self.k {
            pool[self.k - 1]
        } else {
            pool[pool.len() - 1]
        }
    }

    pub fn profile(&self, start: usize, m: usize) -> Vec<f64> {
        let windows = self.dist.len() + self.l - m;
        (0..windows).map(|j| self.mpdist(start, j, m)).collect()
    }
}

/// Z-normalized copies of every length-`l` subsequence.
pub fn normalized_subsequences(values: &[f64], l: usize) -> Vec<Vec<f64>> {
    values.windows(l).map(znorm).collect()
}
