//! Configuration, run persistence and grid-spec parsing shared by the CLI.

pub mod config;
pub mod persist;

use crate::error::{Error, Result};
use crate::primegrid::LogGrid;

pub use config::RunConfig;
pub use persist::{persist_run, Artifact, InputRecord, Manifest};

/// Grid specifications accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `primes:N`
    Primes(usize),
    /// `uniform:a:b:n`
    Uniform(f64, f64, usize),
    /// `circle:N`, only meaningful for operators.
    Circle(usize),
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidInput(format!("grid spec '{s}': expected primes:N, uniform:a:b:n or circle:N"));
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["primes", n] => Ok(GridSpec::Primes(int(n)?)),
            ["uniform", a, b, n] => Ok(GridSpec::Uniform(num(a)?, num(b)?, int(n)?)),
            ["circle", n] => Ok(GridSpec::Circle(int(n)?)),
            _ => Err(bad()),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<LogGrid> {
        match *self {
            GridSpec::Primes(n) => LogGrid::primes(n),
            GridSpec::Uniform(a, b, n) => LogGrid::uniform(a, b, n),
            GridSpec::Circle(_) => Err(Error::InvalidInput(
                "circle specs describe an operator, not a coordinate grid".into(),
            )),
        }
    }
}
