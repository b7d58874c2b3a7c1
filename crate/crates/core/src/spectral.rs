//! Eigensolves, heat traces and spectral-dimension fits.
//!
//! A heat trace `Θ(t) = Σ exp(-t λ)` is fitted either as a pure power
//! `C t^{-α}` or with a logarithmic correction `(A log(1/t) + B) / t`. The
//! spectral dimension of a fit is `d_s = 2α`.

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete_op::SymmetricOperator;
use crate::error::{Error, Result};

/// Largest matrix order handed to the dense eigensolver.
pub const DEFAULT_EIGEN_CAP: usize = 4096;

/// Minimum number of curve points inside a fit window.
pub const MIN_FIT_POINTS: usize = 8;

/// A closed interval of heat-trace times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("window needs 0 < lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// The central part of the window spanning `fraction` of its log-width.
    pub fn shrink(&self, fraction: f64) -> Window {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let pad = 0.5 * (1.0 - fraction) * (b - a);
        Window {
            lo: (a + pad).exp(),
            hi: (b - pad).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    EigenSum,
    Quadrature,
    ZeroTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatTraceCurve {
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub per_unit_length: bool,
    pub provenance: Provenance,
}

impl HeatTraceCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `α(t) = -Δ log Θ / Δ log t`, centred inside, one-sided at the ends.
    pub fn local_slope(&self) -> Vec<f64> {
        let n = self.t.len();
        if n < 2 {
            return vec![f64::NAN; n];
        }
        let lt: Vec<f64> = self.t.iter().map(|t| t.ln()).collect();
        let lth: Vec<f64> = self.theta.iter().map(|v| v.ln()).collect();
        (0..n)
            .map(|k| {
                let (a, b) = match k {
                    0 => (0, 1),
                    _ if k + 1 == n => (n - 2, n - 1),
                    _ => (k - 1, k + 1),
                };
                -(lth[b] - lth[a]) / (lt[b] - lt[a])
            })
            .collect()
    }

    /// Points with `t` inside the window.
    fn window_points(&self, window: Window) -> Vec<(f64, f64)> {
        self.t
            .iter()
            .zip(&self.theta)
            .filter(|(t, _)| window.contains(**t))
            .map(|(&t, &v)| (t, v))
            .collect()
    }

    /// CSV with header naming units.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let theta_col = if self.per_unit_length {
            "theta_per_length (1/log-units)"
        } else {
            "theta (dimensionless)"
        };
        writeln!(
            out,
            "t (inverse-eigenvalue time),{theta_col},local_slope (dimensionless)"
        )?;
        for ((t, v), s) in self.t.iter().zip(&self.theta).zip(self.local_slope()) {
            writeln!(out, "{t:e},{v:e},{s:.9}")?;
        }
        Ok(())
    }
}

/// `per_decade` log-spaced points covering `[lo, hi]`, both ends included.
pub fn log_spaced(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    Window::new(lo, hi)?;
    if per_decade == 0 {
        return Err(Error::InvalidInput("points per decade must be positive".into()));
    }
    let decades = (hi / lo).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                hi
            } else if k == 0 {
                lo
            } else {
                (a + (b - a) * k as f64 / steps as f64).exp()
            }
        })
        .collect())
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::EigenCap { n, cap })
    } else {
        Ok(())
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigenvalues_of(matrix: &Mat<f64>, cap: usize) -> Result<Vec<f64>> {
    check_cap(matrix.nrows(), cap)?;
    let mut values = matrix
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Convergence(format!("symmetric eigensolve of order {}: {e:?}", matrix.nrows())))?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn eigenvalues(op: &SymmetricOperator, cap: usize) -> Result<Vec<f64>> {
    eigenvalues_of(op.matrix(), cap)
}

/// Eigenvalues with eigenvectors as columns, ascending.
pub fn eigen_pairs(matrix: &Mat<f64>, cap: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    check_cap(matrix.nrows(), cap)?;
    let evd = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("symmetric eigensolve of order {}: {e:?}", matrix.nrows())))?;
    let s = evd.S().column_vector();
    let n = matrix.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok((values, vectors))
}

/// `Θ(t) = Σ exp(-t λ)` over ascending λ, optionally divided by `normalization`.
pub fn heat_trace(eigs: &[f64], ts: &[f64], normalization: Option<f64>) -> Result<HeatTraceCurve> {
    if eigs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite".into()));
    }
    if ts.iter().any(|&t| !(t > 0.0)) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("t grid must be positive and strictly ascending".into()));
    }
    if let Some(l) = normalization {
        if !(l > 0.0) {
            return Err(Error::InvalidInput(format!("normalization must be positive, got {l}")));
        }
    }
    let scale = normalization.map_or(1.0, |l| 1.0 / l);
    let theta = ts
        .par_iter()
        .map(|&t| eigs.iter().map(|&l| (-t * l).exp()).sum::<f64>() * scale)
        .collect();
    Ok(HeatTraceCurve {
        t: ts.to_vec(),
        theta,
        per_unit_length: normalization.is_some(),
        provenance: Provenance::EigenSum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    PurePower,
    LogCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFit {
    pub model: Model,
    pub alpha: f64,
    /// Pure power: `[C]` in `C t^{-α}`. Log-corrected: `[A, B]` in `(A log(1/t) + B)/t`.
    pub coefficients: Vec<f64>,
    pub window: Window,
    /// Root-mean-square residual of `log Θ`.
    pub residual: f64,
    pub d_s: f64,
    pub points: usize,
}

fn fit_points(curve: &HeatTraceCurve, window: Window) -> Result<Vec<(f64, f64)>> {
    let points = curve.window_points(window);
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            got: points.len(),
            need: MIN_FIT_POINTS,
        });
    }
    if points.iter().any(|&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("heat trace values must be positive and finite".into()));
    }
    Ok(points)
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::IllConditioned("abscissae have no spread".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

fn rms(residuals: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for r in residuals {
        s += r * r;
        n += 1;
    }
    (s / n as f64).sqrt()
}

/// Least-squares line in `(log t, log Θ)`; `α = -slope`.
pub fn fit_power(curve: &HeatTraceCurve, window: Window) -> Result<SpectralFit> {
    let points = fit_points(curve, window)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (a, b) = line_fit(&xs, &ys)?;
    let residual = rms(xs.iter().zip(&ys).map(|(x, y)| y - (a + b * x)));
    let alpha = -b;
    Ok(SpectralFit {
        model: Model::PurePower,
        alpha,
        coefficients: vec![a.exp()],
        window,
        residual,
        d_s: 2.0 * alpha,
        points: points.len(),
    })
}

/// Fits `Θ(t) = (A log(1/t) + B) / t` with α fixed at 1.
///
/// With `y = tΘ` and `x = log(1/t)`, minimizes `Σ ((A x + B)/y - 1)²`, the
/// linearization of the log-space residual. The reported residual is the
/// log-space RMS; it is infinite when the model turns nonpositive in the window.
pub fn fit_log_corrected(curve: &HeatTraceCurve, window: Window) -> Result<SpectralFit> {
    let points = fit_points(curve, window)?;
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, v) in &points {
        let y = t * v;
        let p = (1.0 / t).ln() / y;
        let q = 1.0 / y;
        s11 += p * p;
        s12 += p * q;
        s22 += q * q;
        r1 += p;
        r2 += q;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-12 * s11 * s22) {
        return Err(Error::IllConditioned(format!(
            "normal matrix determinant {det:e} relative to {:e}",
            s11 * s22
        )));
    }
    let a = (r1 * s22 - r2 * s12) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    let residual = if points.iter().any(|&(t, _)| a * (1.0 / t).ln() + b <= 0.0) {
        f64::INFINITY
    } else {
        rms(points.iter().map(|&(t, v)| ((t * v) / (a * (1.0 / t).ln() + b)).ln()))
    };
    Ok(SpectralFit {
        model: Model::LogCorrected,
        alpha: 1.0,
        coefficients: vec![a, b],
        window,
        residual,
        d_s: 2.0,
        points: points.len(),
    })
}

/// Residual ratio the log-corrected model must achieve before it is preferred.
pub const LOG_MODEL_MARGIN: f64 = 2.0;

const RESIDUAL_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub model: Model,
    /// Loser residual over winner residual, both floored at 1e-15.
    pub ratio: f64,
    pub pure_power: SpectralFit,
    pub log_corrected: SpectralFit,
}

impl Selection {
    pub fn winner(&self) -> &SpectralFit {
        match self.model {
            Model::PurePower => &self.pure_power,
            Model::LogCorrected => &self.log_corrected,
        }
    }
}

/// Chooses between the two model classes on a common window.
///
/// Pure power is the null hypothesis: the log-corrected model wins only with a
/// positive log coefficient and a residual at least [`LOG_MODEL_MARGIN`] times
/// smaller. The extra parameter otherwise absorbs curvature in any curve.
pub fn model_select(curve: &HeatTraceCurve, window: Window) -> Result<Selection> {
    let pure_power = fit_power(curve, window)?;
    let log_corrected = fit_log_corrected(curve, window)?;
    let rp = pure_power.residual.max(RESIDUAL_FLOOR);
    let rl = log_corrected.residual.max(RESIDUAL_FLOOR);
    let log_wins = log_corrected.coefficients[0] > 0.0 && rp >= LOG_MODEL_MARGIN * rl;
    let (model, ratio) = if log_wins {
        (Model::LogCorrected, rp / rl)
    } else {
        (Model::PurePower, rl / rp)
    };
    Ok(Selection {
        model,
        ratio,
        pure_power,
        log_corrected,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlowVariation {
    /// `(r, max_λ |L(λr)/L(r) - 1|)` along the r grid.
    pub profile: Vec<(f64, f64)>,
    /// Deviation at the largest r.
    pub max_deviation: f64,
    /// Deviations vanish or shrink by at least 10% from the smallest to the largest r.
    pub slowly_varying: bool,
}

/// Tests `L(λr)/L(r) → 1` along an r grid spanning at least three decades.
pub fn slow_variation_test<F: Fn(f64) -> f64>(l: F, rs: &[f64], lambdas: &[f64]) -> Result<SlowVariation> {
    let (first, last) = match (rs.first(), rs.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => (a, b),
        _ => return Err(Error::InvalidInput("r grid must be positive and nonempty".into())),
    };
    if (last / first).log10() < 3.0 - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "r grid spans {:.2} decades, at least 3 required",
            (last / first).log10()
        )));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("lambdas must be positive and nonempty".into()));
    }
    let profile: Vec<(f64, f64)> = rs
        .iter()
        .map(|&r| {
            let base = l(r);
            let dev = lambdas
                .iter()
                .map(|&lam| (l(lam * r) / base - 1.0).abs())
                .fold(0.0, f64::max);
            (r, dev)
        })
        .collect();
    let d0 = profile[0].1;
    let d1 = profile[profile.len() - 1].1;
    Ok(SlowVariation {
        max_deviation: d1,
        slowly_varying: d1 <= 1e-12 || d1 <= 0.9 * d0,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationSign {
    /// Eigenvalues of the perturbation uniform in `[-1, 1]`, rescaled.
    Indefinite,
    /// Eigenvalues uniform in `[0, 1]`, rescaled.
    PositiveSemidefinite,
}

/// Random symmetric rank-`rank` matrix `Q S Qᵀ` with `Q` Haar-distributed
/// orthonormal columns and spectral norm exactly `magnitude`.
pub fn random_low_rank<R: Rng>(
    n: usize,
    rank: usize,
    magnitude: f64,
    sign: PerturbationSign,
    rng: &mut R,
) -> Result<Mat<f64>> {
    if rank == 0 || rank > n {
        return Err(Error::InvalidInput(format!("rank must lie in 1..={n}, got {rank}")));
    }
    let mut q: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    // Modified Gram-Schmidt, applied twice for orthogonality to rounding.
    for _ in 0..2 {
        for k in 0..rank {
            for m in 0..k {
                let dot: f64 = q[k].iter().zip(&q[m]).map(|(a, b)| a * b).sum();
                let (head, tail) = q.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[m]) {
                    *x -= dot * y;
                }
            }
            let norm = q[k].iter().map(|x| x * x).sum::<f64>().sqrt();
            q[k].iter_mut().for_each(|x| *x /= norm);
        }
    }
    let mut s: Vec<f64> = (0..rank)
        .map(|_| match sign {
            PerturbationSign::Indefinite => rng.gen_range(-1.0..=1.0),
            PerturbationSign::PositiveSemidefinite => rng.gen_range(0.0..=1.0),
        })
        .collect();
    let top = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top > 0.0 {
        s.iter_mut().for_each(|v| *v *= magnitude / top);
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        (0..rank).map(|k| s[k] * q[k][i] * q[k][j]).sum()
    }))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Stability {
    pub d_s_before: f64,
    pub d_s_after: f64,
    pub delta: f64,
}

/// Refits d_s on the same window after adding a random symmetric perturbation.
/// Both traces are per unit length; `base_eigs` are the unperturbed eigenvalues.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_stability<R: Rng>(
    op: &SymmetricOperator,
    base_eigs: &[f64],
    rank: usize,
    magnitude: f64,
    sign: PerturbationSign,
    ts: &[f64],
    window: Window,
    cap: usize,
    rng: &mut R,
) -> Result<Stability> {
    let norm = Some(op.normalization());
    let before = fit_power(&heat_trace(base_eigs, ts, norm)?, window)?;
    let delta = random_low_rank(op.len(), rank, magnitude, sign, rng)?;
    let after_eigs = eigenvalues(&op.perturbed(&delta)?, cap)?;
    let after = fit_power(&heat_trace(&after_eigs, ts, norm)?, window)?;
    Ok(Stability {
        d_s_before: before.d_s,
        d_s_after: after.d_s,
        delta: after.d_s - before.d_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic<F: Fn(f64) -> f64>(f: F) -> HeatTraceCurve {
        let t = log_spaced(1e-3, 1e-1, 32).unwrap();
        let theta = t.iter().map(|&x| f(x)).collect();
        HeatTraceCurve {
            t,
            theta,
            per_unit_length: false,
            provenance: Provenance::Quadrature,
        }
    }

    fn full() -> Window {
        Window { lo: 1e-3, hi: 1e-1 }
    }

    #[test]
    fn diagonal_eigenvalues() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        assert_eq!(eigenvalues_of(&m, 10).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(eigenvalues_of(&m, 2), Err(Error::EigenCap { n: 3, cap: 2 })));
    }

    #[test]
    fn trace_of_single_eigenvalues() {
        let c = heat_trace(&[0.0], &[0.5, 2.0], None).unwrap();
        assert_eq!(c.theta, vec![1.0, 1.0]);
        let c = heat_trace(&[1.0], &[1.0], None).unwrap();
        assert!((c.theta[0] - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn power_recovery() {
        let f = fit_power(&synthetic(|t| t.powf(-0.25)), full()).unwrap();
        assert!((f.alpha - 0.25).abs() < 1e-12);
        assert!((f.d_s - 0.5).abs() < 1e-12);
        assert!(f.residual <= 1e-12);
        let f = fit_power(&synthetic(|t| 5.0 / t), full()).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_corrected_recovery() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = fit_log_corrected(&synthetic(|t| (1.0 / t).ln() / (two_pi * t)), full()).unwrap();
        assert!((f.coefficients[0] - 1.0 / two_pi).abs() < 1e-12);
        assert!(f.coefficients[1].abs() < 1e-12);
        assert!(f.residual <= 1e-12);
        let f = fit_log_corrected(&synthetic(|t| 1.0 / t), full()).unwrap();
        assert!(f.coefficients[0].abs() < 1e-9);
    }

    #[test]
    fn selection_on_exact_models() {
        let s = model_select(&synthetic(|t| t.powf(-0.25)), full()).unwrap();
        assert_eq!(s.model, Model::PurePower);
        assert!(s.ratio > 10.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        let s = model_select(&synthetic(|t| (1.0 / t).ln() / (two_pi * t)), full()).unwrap();
        assert_eq!(s.model, Model::LogCorrected);
        assert!(s.ratio > 10.0);
    }

    #[test]
    fn too_few_points() {
        let c = synthetic(|t| 1.0 / t);
        assert!(matches!(
            fit_power(&c, Window { lo: 1e-3, hi: 1.1e-3 }),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn slow_variation_examples() {
        let rs = log_spaced(1e3, 1e6, 8).unwrap();
        let log = slow_variation_test(|r: f64| r.ln(), &rs, &[2.0]).unwrap();
        assert!((log.max_deviation - 0.0502).abs() < 1e-3);
        assert!(log.slowly_varying);
        let c = slow_variation_test(|_| 3.0, &rs, &[2.0]).unwrap();
        assert_eq!(c.max_deviation, 0.0);
        assert!(c.slowly_varying);
        let p = slow_variation_test(|r: f64| r.powf(0.1), &rs, &[2.0]).unwrap();
        assert!((p.max_deviation - (2f64.powf(0.1) - 1.0)).abs() < 1e-12);
        assert!(!p.slowly_varying);
    }

    #[test]
    fn low_rank_has_requested_norm() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = random_low_rank(40, 5, 1.0, PerturbationSign::Indefinite, &mut rng).unwrap();
        let eigs = eigenvalues_of(&p, 100).unwrap();
        let top = eigs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((top - 1.0).abs() < 1e-12);
        assert_eq!(eigs.iter().filter(|v| v.abs() > 1e-12).count(), 5);
    }
}
