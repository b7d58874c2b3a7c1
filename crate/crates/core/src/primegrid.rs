//! Prime generation and logarithmic coordinate grids.
//!
//! A [`LogGrid`] is an ascending list of coordinates. For prime grids the
//! coordinate of the j-th prime is `ln p_j`; uniform grids are evenly spaced
//! surrogates used to isolate continuum behaviour from prime irregularity.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default sieve capacity, in primes.
pub const DEFAULT_PRIME_CAPACITY: usize = 1_000_000;

const SEGMENT: usize = 1 << 16;

/// Segmented sieve of Eratosthenes with a configurable capacity.
#[derive(Debug, Clone, Copy)]
pub struct Sieve {
    capacity: usize,
}

impl Default for Sieve {
    fn default() -> Self {
        Sieve {
            capacity: DEFAULT_PRIME_CAPACITY,
        }
    }
}

impl Sieve {
    pub fn with_capacity(capacity: usize) -> Self {
        Sieve { capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The first `n` primes in increasing order.
    pub fn first(&self, n: usize) -> Result<Vec<u64>> {
        if n == 0 {
            return Err(Error::InvalidInput("prime count must be at least 1".into()));
        }
        if n > self.capacity {
            return Err(Error::Capacity {
                requested: n,
                capacity: self.capacity,
            });
        }
        let mut primes = primes_up_to(nth_prime_upper_bound(n));
        primes.truncate(n);
        debug_assert_eq!(primes.len(), n);
        Ok(primes)
    }
}

/// Rosser–Schoenfeld style upper bound for the n-th prime.
fn nth_prime_upper_bound(n: usize) -> u64 {
    if n < 6 {
        return 13;
    }
    let x = n as f64;
    (x * (x.ln() + x.ln().ln())).ceil() as u64 + 1
}

fn small_primes(limit: usize) -> Vec<u64> {
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for p in 2..=limit {
        if !composite[p] {
            out.push(p as u64);
            let mut m = p * p;
            while m <= limit {
                composite[m] = true;
                m += p;
            }
        }
    }
    out
}

/// All primes `<= limit`, sieved segment by segment.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let root = (limit as f64).sqrt() as usize + 1;
    let base = small_primes(root);
    let mut out: Vec<u64> = base.iter().copied().filter(|&p| p <= limit).collect();
    let mut low = root as u64 + 1;
    let mut marks = vec![false; SEGMENT];
    while low <= limit {
        let high = (low + SEGMENT as u64 - 1).min(limit);
        let width = (high - low + 1) as usize;
        marks[..width].fill(false);
        for &p in &base {
            if p * p > high {
                break;
            }
            let mut start = low.div_ceil(p) * p;
            if start < p * p {
                start = p * p;
            }
            let mut m = start;
            while m <= high {
                marks[(m - low) as usize] = true;
                m += p;
            }
        }
        out.extend(
            marks[..width]
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(k, _)| low + k as u64),
        );
        low = high + 1;
    }
    out
}

/// The first `n` primes using the default sieve.
pub fn generate_primes(n: usize) -> Result<Vec<u64>> {
    Sieve::default().first(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Prime,
    Uniform,
    /// Arbitrary ascending coordinates (synthetic grids in tests and probes).
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    coords: Vec<f64>,
    kind: GridKind,
    length: f64,
}

impl LogGrid {
    /// `u_j = ln p_j`. Every entry must be prime and the list strictly increasing.
    pub fn from_primes(primes: &[u64]) -> Result<Self> {
        let Some(&largest) = primes.iter().max() else {
            return Err(Error::InvalidInput("prime list is empty".into()));
        };
        let table = primes_up_to(largest);
        for &p in primes {
            if table.binary_search(&p).is_err() {
                return Err(Error::InvalidInput(format!("{p} is not prime")));
            }
        }
        let coords = primes.iter().map(|&p| (p as f64).ln()).collect();
        Self::build(coords, GridKind::Prime)
    }

    /// Grid on the logarithms of the first `n` primes.
    pub fn primes(n: usize) -> Result<Self> {
        let primes = generate_primes(n)?;
        let coords = primes.iter().map(|&p| (p as f64).ln()).collect();
        Self::build(coords, GridKind::Prime)
    }

    /// `n` evenly spaced points on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput(format!("uniform grid {{{a}, {b}, {n}}}")));
        }
        if n == 1 {
            return Self::build(vec![a], GridKind::Uniform);
        }
        if !(b > a) {
            return Err(Error::InvalidInput(format!("uniform grid needs b > a, got [{a}, {b}]")));
        }
        let step = (b - a) / (n - 1) as f64;
        let coords = (0..n)
            .map(|k| if k + 1 == n { b } else { a + step * k as f64 })
            .collect();
        Self::build(coords, GridKind::Uniform)
    }

    pub fn custom(coords: Vec<f64>) -> Result<Self> {
        Self::build(coords, GridKind::Custom)
    }

    fn build(coords: Vec<f64>, kind: GridKind) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("grid needs at least one point".into()));
        }
        for (k, w) in coords.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "coordinates not strictly increasing at index {}: {} then {}",
                    k + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        let length = coords.windows(2).map(|w| w[1] - w[0]).sum();
        Ok(LogGrid {
            coords,
            kind,
            length,
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Total length `L = Σ gaps` in log-units.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.coords.windows(2).map(|w| w[1] - w[0])
    }

    /// Mean spacing `L / (N - 1)`; zero for a single point.
    pub fn mean_gap(&self) -> f64 {
        if self.coords.len() < 2 {
            0.0
        } else {
            self.length / (self.coords.len() - 1) as f64
        }
    }

    /// Divergence `Δ_ij = |u_i - u_j|`.
    #[inline]
    pub fn divergence(&self, i: usize, j: usize) -> f64 {
        (self.coords[i] - self.coords[j]).abs()
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.coords.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.coords.len(),
            })
        }
    }

    /// Voronoi cell widths; the end cells are half the adjacent gap.
    pub fn cell_widths(&self) -> Vec<f64> {
        let n = self.coords.len();
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|k| {
                let lo = if k == 0 { self.coords[0] } else { self.coords[k - 1] };
                let hi = if k + 1 == n { self.coords[n - 1] } else { self.coords[k + 1] };
                0.5 * (hi - lo)
            })
            .collect()
    }

    /// Index of the coordinate closest to `u`.
    pub fn nearest(&self, u: f64) -> usize {
        let k = self.coords.partition_point(|&c| c < u);
        if k == 0 {
            0
        } else if k == self.coords.len() {
            k - 1
        } else if (self.coords[k] - u) < (u - self.coords[k - 1]) {
            k
        } else {
            k - 1
        }
    }

    /// Number of points with coordinate in `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.coords.partition_point(|&c| c < lo);
        let b = self.coords.partition_point(|&c| c <= hi);
        b.saturating_sub(a)
    }
}

/// `N_i(r) = #{ j : |u_i - u_j| <= r }`, the point itself included.
pub fn divergence_count(grid: &LogGrid, i: usize, r: f64) -> Result<usize> {
    grid.check_index(i)?;
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("radius must be nonnegative, got {r}")));
    }
    let u = grid.coords[i];
    Ok(grid.count_in(u - r, u + r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshStats {
    pub max_gap: f64,
    pub mean_gap: f64,
    pub pairs: usize,
}

/// Gap statistics over consecutive pairs with both ends inside `[lo, hi]`.
pub fn mesh_statistics(grid: &LogGrid, lo: f64, hi: f64) -> Result<MeshStats> {
    let mut max_gap = 0.0_f64;
    let mut sum = 0.0;
    let mut pairs = 0;
    for w in grid.coords.windows(2) {
        if w[0] >= lo && w[1] <= hi {
            let gap = w[1] - w[0];
            max_gap = max_gap.max(gap);
            sum += gap;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    Ok(MeshStats {
        max_gap,
        mean_gap: sum / pairs as f64,
        pairs,
    })
}

/// The window `[u_N - width, u_N]` at the top of the grid.
pub fn top_window(grid: &LogGrid, width: f64) -> (f64, f64) {
    let top = *grid.coords.last().expect("grids are nonempty");
    (top - width, top)
}
