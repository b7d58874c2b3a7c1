//! Kernel matrices, graph Laplacians and their quadratic forms.
//!
//! Storage convention: the Laplacian has diagonal `D_i = Σ_{j≠i} K_ij` and
//! off-diagonal entries `-K_ij`, so `(L f)_i = Σ_{j≠i} K_ij (f_i - f_j)`.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::GibbsRow;
use crate::primegrid::LogGrid;
use crate::quadrature::{self, Tolerance};
use crate::spectral::Window;

/// Default sparsity cutoff relative to the largest kernel entry.
pub const DEFAULT_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorLabel {
    Laplacian,
    Squared,
    Perturbed,
}

/// Symmetric kernel weights with a zero diagonal.
#[derive(Debug, Clone)]
pub struct Kernel {
    weights: Mat<f64>,
    grid: LogGrid,
}

impl Kernel {
    pub fn weights(&self) -> &Mat<f64> {
        &self.weights
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Graph Laplacian `D - K`.
    pub fn laplacian(&self) -> SymmetricOperator {
        let n = self.len();
        let mut matrix = Mat::<f64>::zeros(n, n);
        matrix
            .par_col_chunks_mut(1)
            .enumerate()
            .for_each(|(j, mut col)| {
                let mut degree = 0.0;
                for i in 0..n {
                    if i != j {
                        let k = self.weights[(i, j)];
                        col[(i, 0)] = -k;
                        degree += k;
                    }
                }
                col[(j, 0)] = degree;
            });
        SymmetricOperator {
            matrix,
            grid: self.grid.clone(),
            label: OperatorLabel::Laplacian,
            normalization: self.grid.length(),
            window: None,
        }
    }
}

fn assemble<F>(grid: &LogGrid, cutoff: f64, weight: F) -> Result<Kernel>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if !(0.0..1.0).contains(&cutoff) {
        return Err(Error::InvalidInput(format!("cutoff must lie in [0, 1), got {cutoff}")));
    }
    let n = grid.len();
    let mut weights = Mat::<f64>::zeros(n, n);
    // Each column j holds K_ij for all i; the formula is symmetric in (i, j).
    weights
        .par_col_chunks_mut(1)
        .enumerate()
        .for_each(|(j, mut col)| {
            for i in 0..n {
                if i != j {
                    col[(i, 0)] = weight(i, j);
                }
            }
        });
    if cutoff > 0.0 {
        let mut max = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                max = max.max(weights[(i, j)]);
            }
        }
        let floor = cutoff * max;
        for j in 0..n {
            for i in 0..n {
                if weights[(i, j)] < floor {
                    weights[(i, j)] = 0.0;
                }
            }
        }
    }
    Ok(Kernel {
        weights,
        grid: grid.clone(),
    })
}

/// Fixed-β kernel `K_ij = exp(-β |u_i - u_j|)`, entries below `cutoff · max` zeroed.
pub fn kernel_matrix(grid: &LogGrid, beta: f64, cutoff: f64) -> Result<Kernel> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    assemble(grid, cutoff, |i, j| (-beta * grid.divergence(i, j)).exp())
}

/// Kernel from row-solved inverse temperatures, symmetrized as
/// `K_ij = ½ (exp(-β_i Δ_ij) + exp(-β_j Δ_ij))`.
pub fn kernel_from_rows(grid: &LogGrid, rows: &[GibbsRow], cutoff: f64) -> Result<Kernel> {
    if rows.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: rows.len(),
        });
    }
    let betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    assemble(grid, cutoff, |i, j| {
        let d = grid.divergence(i, j);
        0.5 * ((-betas[i] * d).exp() + (-betas[j] * d).exp())
    })
}

/// Fixed-β graph Laplacian on `grid`.
pub fn laplacian(grid: &LogGrid, beta: f64, cutoff: f64) -> Result<SymmetricOperator> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("a Laplacian needs at least two grid points".into()));
    }
    Ok(kernel_matrix(grid, beta, cutoff)?.laplacian())
}

#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    matrix: Mat<f64>,
    grid: LogGrid,
    label: OperatorLabel,
    normalization: f64,
    window: Option<Window>,
}

impl SymmetricOperator {
    /// Wraps an explicit matrix; asymmetry above 1e-14 is rejected.
    pub fn new(matrix: Mat<f64>, grid: LogGrid, label: OperatorLabel, normalization: f64) -> Result<Self> {
        let n = grid.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        for j in 0..n {
            for i in 0..j {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-14 {
                    return Err(Error::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricOperator {
            matrix,
            grid,
            label,
            normalization,
            window: None,
        })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    /// Length used for per-unit-length heat traces.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Admissible fit window attached at construction, if any.
    pub fn window(&self) -> Option<Window> {
        self.window
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = Some(window);
        self
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        Ok((0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * f[j]).sum())
            .collect())
    }

    /// Adds a symmetric perturbation; the result is labelled `perturbed`.
    pub fn perturbed(&self, delta: &Mat<f64>) -> Result<Self> {
        if delta.nrows() != self.len() || delta.ncols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: delta.nrows(),
            });
        }
        let n = self.len();
        let matrix = Mat::from_fn(n, n, |i, j| {
            self.matrix[(i, j)] + 0.5 * (delta[(i, j)] + delta[(j, i)])
        });
        Ok(SymmetricOperator {
            matrix,
            grid: self.grid.clone(),
            label: OperatorLabel::Perturbed,
            normalization: self.normalization,
            window: self.window,
        })
    }

    /// Writes `row,col,value` triplets of the nonzero entries.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i},{j},{v:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Matrix square of a Laplacian, re-symmetrized to remove rounding asymmetry.
pub fn square(op: &SymmetricOperator) -> Result<SymmetricOperator> {
    if op.label != OperatorLabel::Laplacian {
        return Err(Error::InvalidInput(format!(
            "square expects a laplacian, got {:?}",
            op.label
        )));
    }
    let product = &op.matrix * &op.matrix;
    let n = op.len();
    let matrix = Mat::from_fn(n, n, |i, j| 0.5 * (product[(i, j)] + product[(j, i)]));
    Ok(SymmetricOperator {
        matrix,
        grid: op.grid.clone(),
        label: OperatorLabel::Squared,
        normalization: op.normalization,
        window: None,
    })
}

/// Circle Laplacian `(N/2π)² (2I - S - Sᵀ)` on N equispaced points of a
/// circle of length 2π. Its low eigenvalues approximate `k²`, `k ∈ ℤ`.
pub fn circle_laplacian(n: usize) -> Result<SymmetricOperator> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("circle needs at least 3 points, got {n}")));
    }
    let scale = (n as f64 / (2.0 * PI)).powi(2);
    let matrix = Mat::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * scale
        } else if (i + 1) % n == j || (j + 1) % n == i {
            -scale
        } else {
            0.0
        }
    });
    let grid = LogGrid::uniform(0.0, 2.0 * PI * (n - 1) as f64 / n as f64, n)?;
    Ok(SymmetricOperator {
        matrix,
        grid,
        label: OperatorLabel::Laplacian,
        normalization: 2.0 * PI,
        window: Some(circle_window(n)),
    })
}

/// Circle window: wavenumbers 1 ≤ ξ ≤ N/50, where the lattice dispersion
/// `sin(πk/N)/(πk/N)` stays within 0.07% of 1, mapped through `t = 1/ξ²`.
pub fn circle_window(n: usize) -> Window {
    let xi_hi = n as f64 / 50.0;
    Window {
        lo: 1.0 / (xi_hi * xi_hi),
        hi: 1.0,
    }
}

/// `c₂ = ½ ∫ z² exp(-|z|/δ₀) dz` by adaptive quadrature; equals `2 δ₀³`.
pub fn c2_moment(delta0: f64) -> Result<f64> {
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidInput(format!("delta0 must be positive, got {delta0}")));
    }
    // Even integrand: ½ ∫_ℝ = ∫_0^∞, truncated where exp(-z/δ₀) < e^{-80}.
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-13,
        max_intervals: 2000,
    };
    let est = quadrature::integrate(|z| z * z * (-z / delta0).exp(), 0.0, 80.0 * delta0, tol)?;
    Ok(est.value)
}

/// Fit window where the squared (`order = 2`) or plain (`order = 1`)
/// surrogate operator behaves like its continuum symbol `(c_eff ξ²)^order`.
///
/// The raw operator acts as `-(c₂/h) ∂²` with `h` the mean gap. The dominant
/// wavenumber `ξ*(t) = (c_eff^order t)^{-1/(2 order)}` must satisfy
/// `10·2π/L ≤ ξ* ≤ 0.1/δ₀`.
pub fn admissible_window(grid: &LogGrid, delta0: f64, order: u32) -> Result<Window> {
    if grid.len() < 2 || !(order == 1 || order == 2) {
        return Err(Error::InvalidInput(format!(
            "admissible window needs N >= 2 and order 1 or 2, got N = {} and order {order}",
            grid.len()
        )));
    }
    let c_eff = c2_moment(delta0)? / grid.mean_gap();
    let xi_lo = 10.0 * 2.0 * PI / grid.length();
    let xi_hi = 0.1 / delta0;
    if !(xi_lo < xi_hi) {
        return Err(Error::InvalidInput(format!(
            "no scale separation: 20π/L = {xi_lo} exceeds 0.1/δ₀ = {xi_hi}"
        )));
    }
    let p = 2 * order as i32;
    let c = c_eff.powi(order as i32);
    Ok(Window {
        lo: 1.0 / (c * xi_hi.powi(p)),
        hi: 1.0 / (c * xi_lo.powi(p)),
    })
}

/// Uniform surrogate for the arithmetic operator: `(L^{(N)})²` with the fixed
/// kernel `exp(-|Δ|/δ₀)` on `n` points of `[0, length]`, carrying its window.
pub fn surrogate_squared(n: usize, length: f64, delta0: f64, cutoff: f64) -> Result<SymmetricOperator> {
    let grid = LogGrid::uniform(0.0, length, n)?;
    let window = admissible_window(&grid, delta0, 2)?;
    let op = laplacian(&grid, 1.0 / delta0, cutoff)?;
    Ok(square(&op)?.with_window(window))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormValue {
    pub value: f64,
    pub normalized: bool,
    pub label: String,
}

/// `½ ΣΣ K_ij (f_i - f_j)²`, optionally divided by the grid length.
pub fn quadratic_form(kernel: &Kernel, f: &[f64], normalized: bool, label: &str) -> Result<FormValue> {
    let n = kernel.len();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let mut raw = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = f[i] - f[j];
            raw += kernel.get(i, j) * d * d;
        }
    }
    raw *= 0.5;
    Ok(FormValue {
        value: if normalized { raw / kernel.grid.length() } else { raw },
        normalized,
        label: label.to_string(),
    })
}

/// Smooth compactly supported test functions for the Mosco check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFunction {
    Zero,
    /// `exp(-1 / (1 - s²))` with `s = (u - centre) / half_width`, zero for `|s| ≥ 1`.
    Bump { centre: f64, half_width: f64 },
}

impl TestFunction {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Bump { centre, half_width } => {
                let s = (u - centre) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Bump { centre, half_width } => {
                let s = (u - centre) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - s * s;
                    -2.0 * s / (q * q) * (-1.0 / q).exp() / half_width
                }
            }
        }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Zero => None,
            TestFunction::Bump { centre, half_width } => Some((centre - half_width, centre + half_width)),
        }
    }

    /// `∫ |f'|²` by adaptive quadrature.
    pub fn dirichlet_energy(&self) -> Result<f64> {
        match self.support() {
            None => Ok(0.0),
            Some((a, b)) => {
                let tol = Tolerance {
                    abs: 1e-14,
                    rel: 1e-12,
                    max_intervals: 4000,
                };
                Ok(quadrature::integrate(|u| self.derivative(u).powi(2), a, b, tol)?.value)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MoscoRow {
    pub n: usize,
    pub length: f64,
    pub raw: FormValue,
    pub normalized: FormValue,
    /// `½ ΣΣ w_i w_j K_ij (f_i - f_j)²` with cell widths `w`.
    pub weighted: f64,
    /// `c₂ ∫ |f'|²`.
    pub continuum: f64,
    /// `(weighted - continuum) / continuum`; zero when both vanish.
    pub relative_gap: f64,
}

/// Compares the discrete energy of `f` restricted to each grid with `c₂ ∫ |f'|²`.
///
/// The kernel is `exp(-|Δ|/δ₀)`. The comparison uses the cell-width weighted
/// form, a Riemann sum for `½ ∫∫ k(u - v) (f(u) - f(v))² du dv`; the raw and
/// per-unit-length forms are reported alongside.
pub fn mosco_empirical(grids: &[LogGrid], f: &TestFunction, delta0: f64) -> Result<Vec<MoscoRow>> {
    let c2 = c2_moment(delta0)?;
    let continuum = c2 * f.dirichlet_energy()?;
    let beta = 1.0 / delta0;
    grids
        .iter()
        .map(|grid| {
            let coords = grid.coords();
            let (lo, hi) = (coords[0], coords[coords.len() - 1]);
            if let Some((a, b)) = f.support() {
                if a < lo || b > hi {
                    return Err(Error::SupportEscape {
                        support_lo: a,
                        support_hi: b,
                        grid_lo: lo,
                        grid_hi: hi,
                    });
                }
            }
            let values: Vec<f64> = coords.iter().map(|&u| f.value(u)).collect();
            let cells = grid.cell_widths();
            let active: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
            let (mut raw, mut weighted) = (0.0, 0.0);
            // Pairs with both ends outside the support contribute nothing;
            // pairs with exactly one active end are visited twice below.
            for &i in &active {
                for j in 0..values.len() {
                    if i == j {
                        continue;
                    }
                    let d = values[i] - values[j];
                    let k = (-beta * grid.divergence(i, j)).exp() * d * d;
                    let both = values[j] != 0.0;
                    let share = if both { 0.5 } else { 1.0 };
                    raw += share * k;
                    weighted += share * k * cells[i] * cells[j];
                }
            }
            let relative_gap = if continuum == 0.0 {
                0.0
            } else {
                (weighted - continuum) / continuum
            };
            Ok(MoscoRow {
                n: grid.len(),
                length: grid.length(),
                raw: FormValue {
                    value: raw,
                    normalized: false,
                    label: "restricted".into(),
                },
                normalized: FormValue {
                    value: raw / grid.length(),
                    normalized: true,
                    label: "restricted".into(),
                },
                weighted,
                continuum,
                relative_gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_kernel() {
        let g = LogGrid::custom(vec![0.0, 1.0]).unwrap();
        let k = kernel_matrix(&g, 1.0, 0.0).unwrap();
        assert!((k.get(0, 1) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(k.get(0, 0), 0.0);
    }

    #[test]
    fn constant_vector_in_kernel() {
        let g = LogGrid::uniform(0.0, 3.0, 30).unwrap();
        let op = laplacian(&g, 2.0, 0.0).unwrap();
        let lf = op.apply(&vec![1.0; 30]).unwrap();
        assert!(lf.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn single_pair_form() {
        let g = LogGrid::custom(vec![0.0, 0.5]).unwrap();
        let k = kernel_matrix(&g, 1.0, 0.0).unwrap();
        let w = k.get(0, 1);
        let form = quadratic_form(&k, &[1.0, 0.0], false, "pair").unwrap();
        assert!((form.value - w).abs() < 1e-16);
        assert!(quadratic_form(&k, &[1.0], false, "short").is_err());
    }

    #[test]
    fn c2_closed_forms() {
        assert!((c2_moment(1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((c2_moment(0.5).unwrap() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn square_requires_laplacian() {
        let op = circle_laplacian(8).unwrap();
        let sq = square(&op).unwrap();
        assert_eq!(sq.label(), OperatorLabel::Squared);
        assert!(square(&sq).is_err());
    }

    #[test]
    fn surrogate_window_is_ordered() {
        let g = LogGrid::uniform(0.0, 50.0, 2048).unwrap();
        let w = admissible_window(&g, 0.05, 2).unwrap();
        assert!(w.lo < w.hi);
        assert!((w.lo - 596.7).abs() < 1.0, "{w:?}");
    }

    #[test]
    fn support_escape() {
        let g = LogGrid::uniform(0.0, 1.0, 10).unwrap();
        let f = TestFunction::Bump {
            centre: 0.9,
            half_width: 0.5,
        };
        assert!(matches!(
            mosco_empirical(&[g], &f, 0.05),
            Err(Error::SupportEscape { .. })
        ));
    }

    #[test]
    fn bump_derivative_matches_difference() {
        let f = TestFunction::Bump {
            centre: 1.0,
            half_width: 0.7,
        };
        for &u in &[0.5, 0.9, 1.2, 1.6] {
            let h = 1e-6;
            let fd = (f.value(u + h) - f.value(u - h)) / (2.0 * h);
            assert!((fd - f.derivative(u)).abs() < 1e-7);
        }
    }
}
