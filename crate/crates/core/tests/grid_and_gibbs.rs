use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specobs::gibbs::{self, ProbeVerdict};
use specobs::primegrid::{self, LogGrid, Sieve};
use specobs::Error;

/// Plain Eratosthenes over a fixed range, independent of the segmented sieve.
fn oracle_primes(limit: usize) -> Vec<u64> {
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for k in 2..=limit {
        if !composite[k] {
            out.push(k as u64);
            let mut m = k * k;
            while m <= limit {
                composite[m] = true;
                m += k;
            }
        }
    }
    out
}

fn sorted_grid(mut coords: Vec<f64>) -> LogGrid {
    coords.sort_by(f64::total_cmp);
    coords.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    LogGrid::custom(coords).unwrap()
}

fn grid_strategy() -> impl Strategy<Value = LogGrid> {
    prop::collection::vec(0.0f64..6.0, 3..40)
        .prop_filter("needs three distinct points", |v| {
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            s.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            s.len() >= 3
        })
        .prop_map(sorted_grid)
}

#[test]
fn first_hundred_thousand_primes_match_oracle() {
    let primes = Sieve::with_capacity(100_000).first(100_000).unwrap();
    assert_eq!(primes.len(), 100_000);
    assert_eq!(primes[99_999], 1_299_709);
    assert_eq!(primes, oracle_primes(1_299_709));
}

#[test]
fn sieve_rejects_zero_and_overflow() {
    let sieve = Sieve::with_capacity(10);
    assert!(matches!(sieve.first(0), Err(Error::InvalidInput(_))));
    assert!(matches!(sieve.first(11), Err(Error::Capacity { .. })));
}

#[test]
fn divergence_count_matches_linear_scan() {
    let grid = LogGrid::primes(10_000).unwrap();
    let i = 25; // p = 101
    assert_eq!(primegrid::generate_primes(26).unwrap()[25], 101);
    let u = grid.coords();
    for r in [0.0, 1e-3, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0] {
        let scan = u.iter().filter(|&&v| (v - u[i]).abs() <= r).count();
        assert_eq!(primegrid::divergence_count(&grid, i, r).unwrap(), scan, "r = {r}");
    }
}

#[test]
fn divergence_count_rejects_bad_input() {
    let grid = LogGrid::primes(50).unwrap();
    assert!(matches!(primegrid::divergence_count(&grid, 50, 1.0), Err(Error::IndexOutOfRange { .. })));
    assert!(primegrid::divergence_count(&grid, 0, -1.0).is_err());
}

#[test]
fn density_is_slowly_varying_and_gaps_follow_prime_number_theorem() {
    let grid = LogGrid::primes(220_000).unwrap();
    let top = *grid.coords().last().unwrap();
    let (lo, hi) = (1e3f64.ln(), 1e6f64.ln());
    assert!(top > hi + 1.1);
    let mut u = lo;
    while u <= hi {
        let a = grid.count_in(u, u + 1.0) as f64;
        let b = grid.count_in(u + 0.1, u + 1.1) as f64;
        let ratio = b / a;
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "u = {u}: ratio {ratio}");
        u += 0.25;
    }
    // Mean gap in log coordinates near u is about u e^{-u}.
    let stats = primegrid::mesh_statistics(&grid, hi, hi + 1.0).unwrap();
    let centre = hi + 0.5;
    let predicted = centre * (-centre).exp();
    let ratio = stats.mean_gap / predicted;
    assert!((0.5..=2.0).contains(&ratio), "mean gap {} vs {predicted}", stats.mean_gap);
}

#[test]
fn mesh_shrinks_with_grid_size() {
    let small = LogGrid::primes(10_000).unwrap();
    let large = LogGrid::primes(200_000).unwrap();
    // A fixed window only gains points when the grid grows.
    let fixed_small = primegrid::mesh_statistics(&small, 5.0, 9.0).unwrap();
    let fixed_large = primegrid::mesh_statistics(&large, 5.0, 9.0).unwrap();
    assert!(fixed_large.max_gap <= fixed_small.max_gap);
    // The top window of fixed width moves up and tightens.
    let (a, b) = primegrid::top_window(&small, 1.0);
    let (c, d) = primegrid::top_window(&large, 1.0);
    let top_small = primegrid::mesh_statistics(&small, a, b).unwrap();
    let top_large = primegrid::mesh_statistics(&large, c, d).unwrap();
    assert!(top_large.max_gap < top_small.max_gap);
    assert!(matches!(
        primegrid::mesh_statistics(&small, 100.0, 101.0),
        Err(Error::EmptyWindow { .. })
    ));
}

#[test]
fn two_point_row_inverts_exactly() {
    let grid = LogGrid::custom(vec![0.0, 1.0]).unwrap();
    let row = gibbs::solve_beta(&grid, 0, 0.25, 1e-12).unwrap();
    assert!((row.beta - 3f64.ln()).abs() <= 1e-10);
    assert!((row.z - (1.0 + (-row.beta).exp())).abs() < 1e-15);
}

#[test]
fn stieltjes_oracle_on_fifty_points() {
    // Direct summation in a different order and form: Φ = Σ Δ e^{-βΔ} / Σ e^{-βΔ}.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut coords: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..4.0)).collect();
    coords.sort_by(f64::total_cmp);
    let grid = LogGrid::custom(coords.clone()).unwrap();
    for (i, beta) in [(0, 0.3), (17, 2.0), (49, 7.5)] {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in (0..50).rev() {
            let d = (coords[j] - coords[i]).abs();
            num += d * (-beta * d).exp();
            den += (-beta * d).exp();
        }
        let got = gibbs::mean_divergence(&grid, i, beta).unwrap().phi;
        assert!((got - num / den).abs() <= 1e-13 * (num / den), "row {i}");
    }
}

#[test]
fn round_trip_on_fifty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut coords: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..4.0)).collect();
    coords.sort_by(f64::total_cmp);
    let grid = LogGrid::custom(coords).unwrap();
    for i in [0, 10, 25, 49] {
        for beta in [0.5, 2.0, 8.0] {
            let target = gibbs::mean_divergence(&grid, i, beta).unwrap().phi;
            let row = gibbs::solve_beta(&grid, i, target, 1e-13).unwrap();
            assert!((row.beta - beta).abs() / beta <= 1e-8, "row {i}, beta {beta}: {}", row.beta);
        }
    }
}

#[test]
fn solved_rows_meet_target_on_primes() {
    let grid = LogGrid::primes(500).unwrap();
    let rows = gibbs::solve_all(&grid, 0.05, 1e-12).unwrap();
    for row in &rows {
        assert!(row.beta > 1.0, "row {} beta {}", row.row, row.beta);
        assert!((row.phi - 0.05).abs() <= 1e-12);
    }
}

#[test]
fn infeasible_targets_report_the_interval() {
    let grid = LogGrid::custom(vec![0.0, 1.0, 2.0]).unwrap();
    match gibbs::solve_beta(&grid, 0, 5.0, 1e-12) {
        Err(Error::InfeasibleTarget { target, hi, .. }) => {
            assert_eq!(target, 5.0);
            assert!(hi < 5.0);
        }
        other => panic!("expected infeasible target, got {other:?}"),
    }
    assert!(gibbs::mean_divergence(&LogGrid::custom(vec![1.0]).unwrap(), 0, 1.0).is_err());
}

#[test]
fn probe_well_inside_integrable_region_stabilizes() {
    let grid = LogGrid::primes(200_000).unwrap();
    let report = gibbs::integrability_probe(&grid, 0, 3.0).unwrap();
    assert_eq!(report.verdict, ProbeVerdict::Stabilizing);
    assert!(report.min_increment < 1e-9, "{}", report.min_increment);
}

#[test]
fn probe_at_critical_temperature_keeps_growing() {
    let grid = LogGrid::primes(200_000).unwrap();
    let report = gibbs::integrability_probe(&grid, 0, 1.0).unwrap();
    assert_eq!(report.verdict, ProbeVerdict::Growing);
    assert!(report.min_increment >= 0.05);
}

proptest! {
    #[test]
    fn phi_strictly_decreases(grid in grid_strategy(), a in 0.01f64..20.0, b in 0.01f64..20.0, seed in 0usize..1000) {
        prop_assume!((a - b).abs() > 1e-3);
        let i = seed % grid.len();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = gibbs::mean_divergence(&grid, i, lo).unwrap().phi;
        let p_hi = gibbs::mean_divergence(&grid, i, hi).unwrap().phi;
        prop_assert!(p_hi < p_lo);
    }

    #[test]
    fn derivative_of_phi_is_minus_variance(grid in grid_strategy(), beta in 0.1f64..10.0, seed in 0usize..1000) {
        let i = seed % grid.len();
        let h = 1e-4;
        let up = gibbs::mean_divergence(&grid, i, beta + h).unwrap().phi;
        let down = gibbs::mean_divergence(&grid, i, beta - h).unwrap().phi;
        let fd = -(up - down) / (2.0 * h);
        let var = gibbs::mean_divergence(&grid, i, beta).unwrap().variance;
        prop_assert!((fd - var).abs() <= 1e-5 * var + 1e-14, "fd {} var {}", fd, var);
    }

    #[test]
    fn divergence_count_is_monotone_in_radius(n in 5usize..400, seed in 0usize..1000, r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
        let grid = LogGrid::primes(n).unwrap();
        let i = seed % n;
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(primegrid::divergence_count(&grid, i, lo).unwrap() <= primegrid::divergence_count(&grid, i, hi).unwrap());
    }

    #[test]
    fn gibbs_row_solves_its_own_target(grid in grid_strategy(), beta in 0.2f64..6.0, seed in 0usize..1000) {
        let i = seed % grid.len();
        let delta0 = gibbs::mean_divergence(&grid, i, beta).unwrap().phi;
        let row = gibbs::solve_beta(&grid, i, delta0, 1e-12).unwrap();
        prop_assert!((row.phi - delta0).abs() <= 1e-12);
        let total: f64 = row.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

/// On small grids the Gibbs row beats 10^4 random feasible distributions in entropy.
#[test]
fn gibbs_row_maximizes_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..12 {
        let n = 3 + trial % 4;
        let grid = sorted_grid((0..n).map(|_| rng.gen_range(0.0..3.0)).collect());
        let i = rng.gen_range(0..grid.len());
        let beta = rng.gen_range(0.2..5.0);
        let delta0 = gibbs::mean_divergence(&grid, i, beta).unwrap().phi;
        let row = gibbs::gibbs_row(&grid, i, beta, delta0).unwrap();
        let h_gibbs = gibbs::entropy(&row.probabilities);
        let d: Vec<f64> = (0..grid.len()).map(|j| grid.divergence(i, j)).collect();
        let m = d.len() as f64;
        let mean_d = d.iter().sum::<f64>() / m;
        let dc: Vec<f64> = d.iter().map(|x| x - mean_d).collect();
        let dd: f64 = dc.iter().map(|x| x * x).sum();
        for _ in 0..10_000 {
            // Random direction in the null space of both constraints, random feasible step.
            let v: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean_v = v.iter().sum::<f64>() / m;
            let mut w: Vec<f64> = v.iter().map(|x| x - mean_v).collect();
            let proj: f64 = w.iter().zip(&dc).map(|(a, b)| a * b).sum::<f64>() / dd;
            w.iter_mut().zip(&dc).for_each(|(a, b)| *a -= proj * b);
            let limit = row
                .probabilities
                .iter()
                .zip(&w)
                .filter(|(_, &wi)| wi < 0.0)
                .map(|(p, wi)| p / -wi)
                .fold(f64::INFINITY, f64::min);
            let eps = rng.gen_range(0.0..=limit.min(10.0));
            let q: Vec<f64> = row.probabilities.iter().zip(&w).map(|(p, wi)| (p + eps * wi).max(0.0)).collect();
            let mean: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
            assert!((mean - delta0).abs() < 1e-9);
            assert!(gibbs::entropy(&q) <= h_gibbs + 1e-9, "trial {trial}");
        }
    }
}

#[test]
fn solved_rows_have_gibbs_form() {
    let grid = LogGrid::primes(300).unwrap();
    for row in gibbs::solve_all(&grid, 0.05, 1e-12).unwrap() {
        let worst = (0..grid.len())
            .map(|j| (row.probabilities[j] * row.z - (-row.beta * grid.divergence(row.row, j)).exp()).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst <= 1e-12, "row {}: {worst}", row.row);
    }
}
