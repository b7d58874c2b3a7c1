//! Exponential (maximum-entropy) transition kernels on a [`LogGrid`].
//!
//! Row `i` of the kernel is `T_ij = exp(-β_i Δ_ij) / Z_i(β_i)` where β_i is the
//! unique inverse temperature meeting the mean-divergence target
//! `Φ_i(β_i) = Σ_j T_ij Δ_ij = δ₀`. Φ is strictly decreasing in β with
//! `Φ' = -Var`, so the solve is a bracketed bisection.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primegrid::{GridKind, LogGrid};

/// Offset above the integrability threshold where bracketing starts.
pub const BRACKET_OFFSET: f64 = 1e-6;

const MAX_EXPANSIONS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct GibbsRow {
    pub row: usize,
    pub beta: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub phi: f64,
    pub variance: f64,
    pub delta0: f64,
    #[serde(skip)]
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiSample {
    pub beta: f64,
    pub phi: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiCurve {
    pub row: usize,
    pub samples: Vec<PhiSample>,
}

/// Smallest admissible β for a grid. The prime-log partition sum converges
/// only for β > 1; finite surrogate grids only need β > 0.
pub fn admissible_threshold(kind: GridKind) -> f64 {
    match kind {
        GridKind::Prime => 1.0,
        GridKind::Uniform | GridKind::Custom => 0.0,
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("beta must be positive and finite, got {beta}")))
    }
}

/// `(Δ_ij, exp(-β Δ_ij))` in ascending j. The row always contains `Δ_ii = 0`,
/// so the largest weight is exactly 1 and no log-shift is needed.
fn weights(grid: &LogGrid, i: usize, beta: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let u = grid.coords()[i];
    grid.coords().iter().map(move |&v| {
        let d = (u - v).abs();
        (d, (-beta * d).exp())
    })
}

/// `Z_i(β) = Σ_j exp(-β |u_i - u_j|)`, summed in ascending j.
pub fn partition_function(grid: &LogGrid, i: usize, beta: f64) -> Result<f64> {
    grid.check_index(i)?;
    check_beta(beta)?;
    Ok(weights(grid, i, beta).map(|(_, w)| w).sum())
}

/// `Φ_i(β)` and the Gibbs variance of Δ, which equals `-dΦ/dβ`.
pub fn mean_divergence(grid: &LogGrid, i: usize, beta: f64) -> Result<PhiSample> {
    grid.check_index(i)?;
    check_beta(beta)?;
    if grid.len() < 2 {
        return Err(Error::DegenerateRow(i));
    }
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (d, w) in weights(grid, i, beta) {
        z += w;
        m1 += w * d;
        m2 += w * d * d;
    }
    let phi = m1 / z;
    let variance = (m2 / z - phi * phi).max(0.0);
    Ok(PhiSample {
        beta,
        phi,
        variance,
    })
}

/// The Gibbs row at a prescribed β.
pub fn gibbs_row(grid: &LogGrid, i: usize, beta: f64, delta0: f64) -> Result<GibbsRow> {
    let sample = mean_divergence(grid, i, beta)?;
    let z = partition_function(grid, i, beta)?;
    let u = grid.coords()[i];
    let probabilities = grid
        .coords()
        .iter()
        .map(|&v| (-beta * (u - v).abs()).exp() / z)
        .collect();
    Ok(GibbsRow {
        row: i,
        beta,
        z,
        phi: sample.phi,
        variance: sample.variance,
        delta0,
        probabilities,
    })
}

pub fn phi_curve(grid: &LogGrid, i: usize, betas: &[f64]) -> Result<PhiCurve> {
    let samples = betas
        .iter()
        .map(|&b| mean_divergence(grid, i, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhiCurve { row: i, samples })
}

/// Solves `Φ_i(β) = δ₀` on the admissible range `β > threshold(kind)`.
///
/// Bracketing starts at `threshold + 1e-6` and doubles upward; bisection then
/// runs until the bracket collapses to machine resolution.
pub fn solve_beta(grid: &LogGrid, i: usize, delta0: f64, tol: f64) -> Result<GibbsRow> {
    grid.check_index(i)?;
    if grid.len() < 2 {
        return Err(Error::DegenerateRow(i));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let threshold = admissible_threshold(grid.kind());
    let mut lo = threshold + BRACKET_OFFSET;
    let phi_lo = mean_divergence(grid, i, lo)?.phi;
    // At the threshold itself Φ is the supremum; β = 0 uses the plain mean.
    let sup = if threshold == 0.0 {
        let n = grid.len() as f64;
        (0..grid.len()).map(|j| grid.divergence(i, j)).sum::<f64>() / n
    } else {
        phi_lo
    };
    if !(delta0 > 0.0 && delta0 < sup) {
        return Err(Error::InfeasibleTarget {
            target: delta0,
            lo: 0.0,
            hi: sup,
        });
    }
    if delta0 >= phi_lo {
        // δ₀ lies in the sliver (Φ(threshold + offset), sup).
        return Err(Error::InfeasibleTarget {
            target: delta0,
            lo: 0.0,
            hi: phi_lo,
        });
    }
    let mut hi = (2.0 * lo).max(1.0);
    let mut phi_hi = mean_divergence(grid, i, hi)?.phi;
    let mut expansions = 0;
    while phi_hi > delta0 {
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::NonBracketing {
                target: delta0,
                beta: hi,
                phi: phi_hi,
                iterations: expansions,
            });
        }
        lo = hi;
        hi *= 2.0;
        phi_hi = mean_divergence(grid, i, hi)?.phi;
    }
    let mut best = (hi, (phi_hi - delta0).abs());
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let phi = mean_divergence(grid, i, mid)?.phi;
        let miss = (phi - delta0).abs();
        if miss < best.1 {
            best = (mid, miss);
        }
        if phi == delta0 {
            break;
        }
        if phi > delta0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 > tol {
        return Err(Error::Convergence(format!(
            "bisection for row {i} stalled at beta = {} with |Phi - delta0| = {:e}",
            best.0, best.1
        )));
    }
    gibbs_row(grid, i, best.0, delta0)
}

/// Solves every row independently; output is in row order.
pub fn solve_all(grid: &LogGrid, delta0: f64, tol: f64) -> Result<Vec<GibbsRow>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| solve_beta(grid, i, delta0, tol))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    Stabilizing,
    Growing,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeStep {
    pub n: usize,
    pub partial_sum: f64,
    /// `Z(n) - Z(n/2)`; absent for the first rung.
    pub increment: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub beta: f64,
    pub row: usize,
    pub steps: Vec<ProbeStep>,
    /// Ratios of successive increments.
    pub ratios: Vec<f64>,
    pub min_increment: f64,
    /// Geometric extrapolation of the remaining tail from the last ratio;
    /// infinite when the ratio does not contract.
    pub tail_estimate: f64,
    pub verdict: ProbeVerdict,
}

/// Successive increments must shrink at least this fast for a stabilizing verdict.
pub const PROBE_CONTRACTION: f64 = 0.8;

/// Partial sums of `Z_i(β)` over the first `N = 1000·2^k ≤ n_max` primes.
///
/// Increments over a doubling behave like `p_N^{1-β} / ln p_N`: geometric
/// decay for β > 1, but only the slow `ln p_N / ln p_2N` ratio at β = 1.
/// The verdict is stabilizing when every increment ratio is at most
/// [`PROBE_CONTRACTION`], growing otherwise.
pub fn integrability_probe(grid: &LogGrid, row: usize, beta: f64) -> Result<ProbeReport> {
    grid.check_index(row)?;
    check_beta(beta)?;
    if grid.kind() != GridKind::Prime {
        return Err(Error::InvalidInput("integrability probe needs a prime grid".into()));
    }
    let mut ladder = Vec::new();
    let mut n = 1000;
    while n <= grid.len() {
        ladder.push(n);
        n *= 2;
    }
    if ladder.len() < 3 || row >= ladder[0] {
        return Err(Error::InvalidInput(format!(
            "probe needs row < 1000 and at least 4000 primes, got row {row} with {}",
            grid.len()
        )));
    }
    let u = grid.coords()[row];
    let mut steps = Vec::with_capacity(ladder.len());
    let mut running = 0.0;
    let mut start = 0;
    for &n in &ladder {
        running += grid.coords()[start..n]
            .iter()
            .map(|&v| (-beta * (u - v).abs()).exp())
            .sum::<f64>();
        start = n;
        let increment = steps.last().map(|s: &ProbeStep| running - s.partial_sum);
        steps.push(ProbeStep {
            n,
            partial_sum: running,
            increment,
        });
    }
    let increments: Vec<f64> = steps.iter().filter_map(|s| s.increment).collect();
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let min_increment = increments.iter().copied().fold(f64::INFINITY, f64::min);
    let last_ratio = *ratios.last().expect("at least one ratio");
    let tail_estimate = if last_ratio < 1.0 {
        increments.last().copied().unwrap_or(0.0) * last_ratio / (1.0 - last_ratio)
    } else {
        f64::INFINITY
    };
    let verdict = if ratios.iter().all(|&r| r <= PROBE_CONTRACTION) {
        ProbeVerdict::Stabilizing
    } else {
        ProbeVerdict::Growing
    };
    Ok(ProbeReport {
        beta,
        row,
        steps,
        ratios,
        min_increment,
        tail_estimate,
        verdict,
    })
}

/// Shannon entropy `-Σ p ln p` (natural log, `0 ln 0 = 0`).
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> LogGrid {
        LogGrid::custom(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn single_point_partition() {
        let g = LogGrid::custom(vec![3.0]).unwrap();
        assert_eq!(partition_function(&g, 0, 7.0).unwrap(), 1.0);
        assert!(matches!(mean_divergence(&g, 0, 1.0), Err(Error::DegenerateRow(0))));
    }

    #[test]
    fn two_term_partition() {
        let g = LogGrid::custom(vec![0.0, 2f64.ln()]).unwrap();
        assert!((partition_function(&g, 0, 1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_phi_closed_form() {
        for &b in &[0.1, 1.0, 3.0] {
            let phi = mean_divergence(&pair(), 0, b).unwrap().phi;
            assert!((phi - 1.0 / (1.0 + b.exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_solve() {
        let row = solve_beta(&pair(), 0, 0.25, 1e-12).unwrap();
        assert!((row.beta - 3f64.ln()).abs() < 1e-10);
        assert!(matches!(
            solve_beta(&pair(), 0, 0.5, 1e-12),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn prime_rows_respect_threshold() {
        let g = LogGrid::primes(2000).unwrap();
        let row = solve_beta(&g, 1000, 0.05, 1e-12).unwrap();
        assert!(row.beta > 1.0);
        let total: f64 = row.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one_and_match_gibbs_form() {
        let g = LogGrid::uniform(0.0, 5.0, 40).unwrap();
        let row = solve_beta(&g, 7, 0.3, 1e-12).unwrap();
        let u = g.coords()[7];
        for (j, &p) in row.probabilities.iter().enumerate() {
            let w = (-row.beta * (u - g.coords()[j]).abs()).exp();
            assert!((p * row.z - w).abs() <= 1e-12);
        }
        assert!((row.phi - 0.3).abs() <= 1e-12);
    }
}
