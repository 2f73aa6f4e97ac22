mod common;

use common::*;
use rand::Rng;
use tsnip::snippets::{select_from_profiles, SegmentProfiles};
use tsnip::zdist::SegmentRows;
use tsnip::{
    mpdist_profile, select_snippets, Exec, Kernel, MPdistParams, SlidingStats, TimeSeries,
};

#[test]
fn profiles_match_naive_mpdist() {
    let mut rng = rng(11);
    for trial in 0..6 {
        let n = rng.random_range(64..160);
        let m = [6, 8, 11][trial % 3];
        let values = random_walk(&mut rng, n);
        let ts = TimeSeries::new(values.clone()).unwrap();
        let params = MPdistParams::new(m, None).unwrap();
        for seg in 0..n / m {
            let fast = mpdist_profile(&ts, seg, &params).unwrap();
            let slow = naive_profile(&values, seg * m, m, params.l(), params.k());
            for (j, (a, b)) in fast.values.iter().zip(&slow).enumerate() {
                assert!(
                    (a - b).abs() < 1e-6,
                    "trial {trial} seg {seg} window {j}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn fixed_subsequence_length_matches_naive() {
    let mut rng = rng(12);
    let values = random_walk(&mut rng, 120);
    let ts = TimeSeries::new(values.clone()).unwrap();
    for l in [2, 5, 10] {
        let params = MPdistParams::new(10, Some(l)).unwrap();
        let fast = mpdist_profile(&ts, 3, &params).unwrap();
        let slow = naive_profile(&values, 30, 10, l, params.k());
        for (a, b) in fast.values.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn kernels_agree_with_direct_distance() {
    let mut rng = rng(13);
    for _ in 0..5 {
        let n = rng.random_range(100..400);
        let l = rng.random_range(2..24);
        let seg_len = rng.random_range(l..3 * l);
        let start = rng.random_range(0..n - seg_len);
        let values = random_walk(&mut rng, n);
        let ts = TimeSeries::new(values.clone()).unwrap();
        let stats = SlidingStats::new(&ts, l).unwrap();
        for kernel in [Kernel::Streaming, Kernel::Direct] {
            let mut rows = SegmentRows::new(&ts, &stats, start, seg_len, kernel).unwrap();
            let mut row = vec![0.0; rows.columns()];
            while let Some(i) = rows.fill_next(&mut row) {
                let q = &values[start + i..start + i + l];
                for (j, &d) in row.iter().enumerate() {
                    let want = zdist(q, &values[j..j + l]);
                    assert!(
                        (d - want).abs() < 1e-6,
                        "{kernel:?} row {i} col {j}: {d} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn greedy_matches_exhaustive_on_clean_regimes() {
    // noise-free copies tie, and ties go to the earliest segment
    let (values, _) = regime_blocks(384, 64, 0.0, 0);
    let ts = TimeSeries::new(values).unwrap();
    let params = MPdistParams::new(32, None).unwrap();
    let all = SegmentProfiles::compute(&ts, &params, &Exec::default()).unwrap();
    let result = select_from_profiles(&all, 2, &Exec::default()).unwrap();
    let raw: Vec<Vec<f64>> = all.profiles.iter().map(|p| p.values.clone()).collect();
    assert!((result.profile_area - exhaustive_area(&raw, 2)).abs() < 1e-9);

    let mut regimes: Vec<usize> = result.snippets.iter().map(|s| (s.start / 64) % 2).collect();
    regimes.sort_unstable();
    assert_eq!(regimes, vec![0, 1]);
    for s in &result.snippets {
        assert!((s.frac - 0.5).abs() < 0.1, "frac {}", s.frac);
    }
}

#[test]
fn fracs_partition_windows() {
    let mut rng = rng(14);
    for _ in 0..5 {
        let n = rng.random_range(80..200);
        let ts = TimeSeries::new(random_walk(&mut rng, n)).unwrap();
        let params = MPdistParams::new(8, None).unwrap();
        let windows = (n - 8 + 1) as f64;
        for count in [1, 2, n / 8] {
            let r = select_snippets(&ts, &params, count).unwrap();
            let total: f64 =
                r.snippets.iter().map(|s| s.frac).sum::<f64>() + r.unassigned as f64 / windows;
            assert!((total - 1.0).abs() < 1e-9);
            if count == n / 8 {
                assert_eq!(r.unassigned, 0);
            }
            for pair in r.snippets.windows(2) {
                assert!(pair[0].frac >= pair[1].frac);
            }
        }
    }
}

#[test]
fn threads_do_not_change_results() {
    let mut rng = rng(15);
    let ts = TimeSeries::new(random_walk(&mut rng, 600)).unwrap();
    let params = MPdistParams::new(20, None).unwrap();
    let one = tsnip::select_snippets_with(&ts, &params, 3, &Exec::default()).unwrap();
    let four = tsnip::select_snippets_with(&ts, &params, 3, &Exec::with_threads(4)).unwrap();
    assert_eq!(one, four);
}
