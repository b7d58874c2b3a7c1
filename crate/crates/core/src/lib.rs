//! Heat-trace laboratory for two operator families: squared nonlocal
//! Laplacians built from maximum-entropy kernels on logarithmic grids, and
//! spectra given by zeta-zero ordinates. The crate computes both heat traces,
//! fits their small-time laws and reports whether the two exponent classes
//! (`t^{-1/4}` against `t^{-1} log(1/t)`) separate at finite size.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod discrete_op;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod primegrid;
pub mod quadrature;
pub mod report;
pub mod spectral;
pub mod zeta;

pub use error::{Error, Result};

/// Pins the dense linear algebra to one thread so results are bit-reproducible.
/// Row assembly and trace sums still use the rayon pool.
pub fn init_linear_algebra() {
    faer::set_global_parallelism(faer::Par::Seq);
}
