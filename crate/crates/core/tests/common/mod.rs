//! Generators shared by the integration suites.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setkf::linalg::{spectral_radius, Mat};
use setkf::SystemModel;

pub fn s(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

pub fn scalar() -> SystemModel {
    SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap()
}

/// The two-state plant with one output used across the examples.
pub fn two_state() -> SystemModel {
    SystemModel::new(
        Mat::from_row_slice(2, 2, &[0.8, 1.0, 0.0, 0.95]),
        Mat::from_row_slice(1, 2, &[1.0, 0.0]),
        Mat::identity(2, 2),
        Mat::identity(1, 1),
        Mat::identity(2, 2),
    )
    .unwrap()
}

fn uniform_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `G G' + floor I` with entries of `G` uniform on `[-scale, scale]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64, floor: f64) -> Mat {
    let g = uniform_mat(rng, n, n) * scale;
    &g * g.transpose() + Mat::identity(n, n) * floor
}

/// Stable plant with spectral radius uniform on `[0.2, 0.95]`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SystemModel {
    let raw = uniform_mat(rng, n, n);
    let rho = spectral_radius(&raw).max(1e-3);
    let a = raw * (rng.random_range(0.2..0.95) / rho);
    let c = uniform_mat(rng, m, n);
    let q = random_spd(rng, n, 1.0, 0.1);
    let r = random_spd(rng, m, 1.0, 0.1);
    SystemModel::new(a, c, q, r, Mat::identity(n, n)).unwrap()
}

/// Plant that may be unstable but stays detectable (full-state-rank `C`
/// when `m >= n`, otherwise retried until the PBH test passes).
pub fn random_detectable(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SystemModel {
    loop {
        let raw = uniform_mat(rng, n, n);
        let rho = spectral_radius(&raw).max(1e-3);
        let a = raw * (rng.random_range(0.2..1.3) / rho);
        let c = uniform_mat(rng, m, n);
        let q = random_spd(rng, n, 1.0, 0.1);
        let r = random_spd(rng, m, 1.0, 0.1);
        if let Ok(model) = SystemModel::new(a, c, q, r, Mat::identity(n, n)) {
            return model;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dimension pair with `1 <= n, m <= 4` plus a seed for the matrices.
pub fn dims_and_seed() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=4, 1usize..=4, any::<u64>())
}

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Random `(plant, Y, Delta0)` where `Delta0 - X_upper` has eigenvalues drawn
/// on `[-0.2, 1] * lambda_min(X_upper)`, so roughly `0.8^n` of the cases are
/// feasible and `Delta0` stays positive definite.
pub fn random_design_case(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (SystemModel, Mat, Mat) {
    let model = random_stable(rng, n, m);
    let y = random_spd(rng, m, 1.0, 0.05);
    let w = model.r() + setkf::linalg::spd_inverse(&y).unwrap();
    let x_upper = setkf::riccati::fixed_point(&model, &w).unwrap();
    let scale = setkf::linalg::min_eigenvalue(&x_upper);
    let basis = uniform_mat(rng, n, n).qr().q();
    let d = Mat::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        rng.random_range(-0.2..1.0) * scale
    }));
    let delta0 = setkf::linalg::symmetrize(&(&x_upper + &basis * d * basis.transpose()));
    (model, y, delta0)
}
