#![allow(dead_code)]

use gsp::qcore::{DensityMatrix, C64};
use gsp::rng::Rng;
use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Ginibre-ensemble density matrix of the given rank.
pub fn random_density_rank(n: usize, rank: usize, rng: &mut Rng) -> DensityMatrix {
    let dim = 1 << n;
    let g = DMatrix::<C64>::from_fn(dim, rank, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).expect("Ginibre matrix is a valid state")
}

/// Ginibre state with rank drawn uniformly from 1..=2^n.
pub fn random_density(n: usize, rng: &mut Rng) -> DensityMatrix {
    let rank = rng.random_range(1..=1usize << n);
    random_density_rank(n, rank, rng)
}
