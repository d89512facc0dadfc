#![allow(dead_code)]

use dynclass_core::numerics::Matrix;
use dynclass_core::sysmodel::{feasibility_check, LinearSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_row_slice(rows, cols, &data).unwrap()
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random observable system with spectral radius near one.
pub fn random_system<R: Rng>(rng: &mut R, n: usize, m: usize) -> LinearSystem {
    loop {
        let a = gaussian_matrix(rng, n, n).scale(1.0 / (n as f64).sqrt());
        let c = gaussian_matrix(rng, m, n);
        if let Ok(sys) = LinearSystem::new(a, c) {
            return sys;
        }
    }
}

/// Random pair passing the rank test at `n1 + n2 + 2`.
pub fn random_feasible_pair<R: Rng>(rng: &mut R, max_order: usize) -> (LinearSystem, LinearSystem, usize) {
    loop {
        let n1 = rng.random_range(1..=max_order);
        let n2 = rng.random_range(1..=max_order);
        let m = rng.random_range(1..=2);
        let s1 = random_system(rng, n1, m);
        let s2 = random_system(rng, n2, m);
        let horizon = n1 + n2 + 2;
        if feasibility_check(&s1, &s2, horizon).unwrap().feasible {
            return (s1, s2, horizon);
        }
    }
}

/// Random invertible matrix with 2-norm condition number at most `kappa`.
pub fn conditioned_matrix<R: Rng>(rng: &mut R, n: usize, kappa: f64) -> Matrix {
    let q1 = dynclass_core::numerics::svd(&gaussian_matrix(rng, n, n)).unwrap().u;
    let q2 = dynclass_core::numerics::svd(&gaussian_matrix(rng, n, n)).unwrap().u;
    let diag: Vec<f64> = (0..n)
        .map(|i| if n == 1 { 1.0 } else { kappa.powf(i as f64 / (n - 1) as f64) })
        .collect();
    q1.matmul(&Matrix::from_diag(&diag)).matmul(&q2.transpose())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
