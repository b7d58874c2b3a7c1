//! Continuum references: the biharmonic heat kernel, its similarity profile,
//! and flat-torus heat traces of order-m operators.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{self, gamma, Tolerance};
use crate::spectral::{HeatTraceCurve, Provenance, Window};

/// Largest `|x|` accepted by [`phi_profile`].
pub const PHI_RANGE: f64 = 60.0;

/// Torus lattice sums are truncated once `exp(-t K^m)` falls below this.
pub const TORUS_TAIL: f64 = 1e-14;

// exp(-k⁴) < e^{-40} beyond this wavenumber.
const QUARTIC_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContinuumModel {
    Biharmonic { c4: f64 },
    Torus { d: usize, m: f64, k: usize },
}

impl ContinuumModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ContinuumModel::Biharmonic { c4 } if c4 > 0.0 && c4.is_finite() => Ok(()),
            ContinuumModel::Torus { d, m, k } if d >= 1 && m > 0.0 && k >= 1 => Ok(()),
            other => Err(Error::InvalidInput(format!("invalid continuum model {other:?}"))),
        }
    }
}

fn tight() -> Tolerance {
    Tolerance {
        abs: 1e-15,
        rel: 1e-13,
        max_intervals: 4000,
    }
}

/// `(1/2π) ∫ exp(-t c₄ k⁴) dk` by quadrature over the even half-line.
pub fn biharmonic_diag(t: f64, c4: f64) -> Result<f64> {
    if !(t > 0.0 && c4 > 0.0 && t.is_finite() && c4.is_finite()) {
        return Err(Error::InvalidInput(format!("t and c4 must be positive, got t = {t}, c4 = {c4}")));
    }
    let s = t * c4;
    let upper = (QUARTIC_CUTOFF / s).powf(0.25);
    let est = quadrature::integrate(|k| (-s * k.powi(4)).exp(), 0.0, upper, tight())?;
    Ok(est.value / PI)
}

/// Closed form `Γ(¼) / (4π (c₄ t)^{1/4})`.
pub fn biharmonic_closed_form(t: f64, c4: f64) -> f64 {
    gamma(0.25) / (4.0 * PI * (c4 * t).powf(0.25))
}

/// `Φ(x) = (1/2π) ∫ exp(-k⁴) cos(kx) dk`, so that `∫ Φ = 1`.
pub fn phi_profile(x: f64) -> Result<f64> {
    if !(x.abs() <= PHI_RANGE) {
        return Err(Error::Domain(format!("|x| = {} exceeds the profile range {PHI_RANGE}", x.abs())));
    }
    let upper = QUARTIC_CUTOFF.powf(0.25);
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-12,
        max_intervals: 4000,
    };
    let half_period = if x == 0.0 { f64::INFINITY } else { PI / x.abs() };
    let est = quadrature::integrate_panels(|k| (-k.powi(4)).exp() * (k * x).cos(), 0.0, upper, half_period, tol)?;
    Ok(est.value / PI)
}

/// Biharmonic heat kernel `p_t(u, v) = (c₄t)^{-1/4} Φ((u - v)/(c₄t)^{1/4})`.
pub fn biharmonic_kernel(t: f64, c4: f64, du: f64) -> Result<f64> {
    if !(t > 0.0 && c4 > 0.0) {
        return Err(Error::InvalidInput(format!("t and c4 must be positive, got t = {t}, c4 = {c4}")));
    }
    let scale = (c4 * t).powf(0.25);
    Ok(phi_profile(du / scale)? / scale)
}

/// Heat-trace exponent `d_s = 2d/m` of an order-m elliptic operator in dimension d.
pub fn seeley_exponent(d: usize, m: f64) -> Result<f64> {
    if d == 0 || !(m > 0.0) {
        return Err(Error::InvalidInput(format!("need d >= 1 and m > 0, got d = {d}, m = {m}")));
    }
    Ok(2.0 * d as f64 / m)
}

/// Fit window `[100^{-m}, 3^{-m}]`: wavenumbers between 3 and 100 dominate.
pub fn torus_window(m: f64) -> Window {
    Window {
        lo: 100f64.powf(-m),
        hi: 3f64.powf(-m),
    }
}

/// Smallest lattice cap meeting the tail bound at `t_min`.
pub fn torus_cap(m: f64, t_min: f64) -> usize {
    ((-TORUS_TAIL.ln()) / t_min).powf(1.0 / m).ceil() as usize + 1
}

/// Multiplicities of `|k|²` over `k ∈ [-K, K]^d`, ascending.
fn shells(d: usize, cap: usize) -> Vec<(u64, u64)> {
    let side = 2 * cap + 1;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut idx = vec![0usize; d];
    loop {
        let r2: u64 = idx
            .iter()
            .map(|&i| {
                let k = i as i64 - cap as i64;
                (k * k) as u64
            })
            .sum();
        *counts.entry(r2).or_default() += 1;
        let mut axis = 0;
        loop {
            if axis == d {
                return counts.into_iter().collect();
            }
            idx[axis] += 1;
            if idx[axis] < side {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// `Θ(t) = Σ_{k ∈ [-K,K]^d} exp(-t |k|^m)`: the flat torus of side 2π with
/// eigenvalues `|k|^m`.
pub fn torus_heat_trace(d: usize, m: f64, cap: usize, ts: &[f64]) -> Result<HeatTraceCurve> {
    ContinuumModel::Torus { d, m, k: cap }.validate()?;
    let Some(&t_min) = ts.first() else {
        return Err(Error::InvalidInput("t grid is empty".into()));
    };
    if ts.iter().any(|&t| !(t > 0.0)) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("t grid must be positive and strictly ascending".into()));
    }
    let tail = (-t_min * (cap as f64).powf(m)).exp();
    if tail > TORUS_TAIL {
        return Err(Error::TailTruncation {
            cap,
            t: t_min,
            tail,
            limit: TORUS_TAIL,
        });
    }
    let levels: Vec<(f64, f64)> = shells(d, cap)
        .into_iter()
        .map(|(r2, mult)| ((r2 as f64).powf(0.5 * m), mult as f64))
        .collect();
    let theta = ts
        .par_iter()
        .map(|&t| levels.iter().map(|&(lam, mult)| mult * (-t * lam).exp()).sum())
        .collect();
    Ok(HeatTraceCurve {
        t: ts.to_vec(),
        theta,
        per_unit_length: false,
        provenance: Provenance::EigenSum,
    })
}
