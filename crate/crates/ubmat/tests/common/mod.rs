//! Shared instance generators for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use ubmat::rng::Draws;
use ubmat::{Partition, UbMatrix};

/// Uniform draw from [lo, hi).
pub fn uniform_in(draws: &mut Draws, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * draws.uniform()
}

pub fn random_partition(draws: &mut Draws, max_k: usize, max_pk: usize) -> Partition {
    let k = 1 + (draws.uniform() * max_k as f64) as usize;
    let sizes = (0..k.min(max_k))
        .map(|_| 2 + (draws.uniform() * (max_pk - 1) as f64) as usize)
        .map(|pk| pk.min(max_pk))
        .collect();
    Partition::new(sizes).unwrap()
}

/// Arbitrary symmetric coordinates (not necessarily positive definite).
pub fn random_ub(draws: &mut Draws, partition: &Partition) -> UbMatrix {
    let k = partition.block_count();
    let a: Vec<f64> = (0..k).map(|_| uniform_in(draws, -2.0, 3.0)).collect();
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = uniform_in(draws, -0.5, 0.5);
            b[i * k + j] = v;
            b[j * k + i] = v;
        }
    }
    UbMatrix::new(a, b, partition.clone()).unwrap()
}

/// Positive definite coordinates: the B magnitude is capped so that the
/// symmetrized Delta stays diagonally dominant, which guarantees positive
/// eigenvalues without rejection sampling.
pub fn random_spd_ub(draws: &mut Draws, partition: &Partition) -> UbMatrix {
    let k = partition.block_count();
    let a: Vec<f64> = (0..k).map(|_| uniform_in(draws, 0.5, 3.0)).collect();
    let min_a = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_p = partition.sizes().iter().copied().max().unwrap() as f64;
    let cap = uniform_in(draws, 0.2, 0.9) * min_a / (k as f64 * max_p);
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = uniform_in(draws, -cap, cap);
            b[i * k + j] = v;
            b[j * k + i] = v;
        }
    }
    let x = UbMatrix::new(a, b, partition.clone()).unwrap();
    assert!(x.is_positive_definite(), "generator must stay SPD");
    x
}

/// Coordinates on the dyadic grid i/256, where expand-compress round-trips
/// are exact in floating point.
#[allow(dead_code)]
pub fn random_dyadic_ub(draws: &mut Draws, partition: &Partition) -> UbMatrix {
    let k = partition.block_count();
    let grid = |draws: &mut Draws, lo: f64, hi: f64| {
        (uniform_in(draws, lo, hi) * 256.0).round() / 256.0
    };
    let a: Vec<f64> = (0..k).map(|_| grid(draws, -2.0, 3.0)).collect();
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = grid(draws, -0.5, 0.5);
            b[i * k + j] = v;
            b[j * k + i] = v;
        }
    }
    UbMatrix::new(a, b, partition.clone()).unwrap()
}
