use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::TimeGrid;
use crate::error::{Error, Result};

/// A scalar Brownian path sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub seed: u64,
    pub dt: f64,
    /// ΔW_n = W(t_{n+1}) − W(t_n)
    pub increments: Vec<f64>,
}

impl BrownianPath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// W(t_0), …, W(t_N) with W(0) = 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        w.push(0.0);
        for d in &self.increments {
            acc += d;
            w.push(acc);
        }
        w
    }

    /// The same path on a grid `factor` times coarser: each coarse increment is
    /// the sum of `factor` consecutive fine ones.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.increments.len() % factor != 0 {
            return Err(Error::invalid(format!(
                "cannot coarsen {} increments by {factor}",
                self.increments.len()
            )));
        }
        Ok(Self {
            seed: self.seed,
            dt: self.dt * factor as f64,
            increments: self.increments.chunks(factor).map(|c| c.iter().sum()).collect(),
        })
    }

    /// A path that is identically zero (deterministic runs).
    pub fn zero(grid: &TimeGrid) -> Self {
        Self {
            seed: 0,
            dt: grid.dt(),
            increments: vec![0.0; grid.n],
        }
    }
}

/// Increments √Δt·ξ_n with ξ_n standard normal from a ChaCha8 stream seeded by `seed`.
pub fn sample_brownian(seed: u64, grid: &TimeGrid) -> BrownianPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    let increments = (0..grid.n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    BrownianPath {
        seed,
        dt: grid.dt(),
        increments,
    }
}
