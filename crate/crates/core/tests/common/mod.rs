#![allow(dead_code)]

use adasel::subspace::{FeatureVector, SubspaceBasis};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `a×b` basis from Gram–Schmidt on a Gaussian matrix.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, a: usize, b: usize) -> DMatrix<f64> {
    let mut m = gaussian_matrix(rng, a, b);
    for j in 0..b {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).into_owned();
                m.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let n = m.column(j).norm();
        m.column_mut(j).unscale_mut(n);
    }
    m
}

pub fn random_subspace(rng: &mut ChaCha8Rng, a: usize, b: usize) -> SubspaceBasis {
    SubspaceBasis::from_basis(random_orthonormal(rng, a, b)).unwrap()
}

pub fn random_feature(rng: &mut ChaCha8Rng, a: usize) -> FeatureVector {
    FeatureVector::new((0..a).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Profile built from a synthetic config's training data, the way the CLI
/// builds it: clustering seeded with 42, majority-label names and loose
/// constraints.
pub fn synthetic_profile(
    cfg: &adasel::harness::SyntheticConfig,
    data: &adasel::harness::SyntheticData,
) -> adasel::Result<adasel::profile::DesignProfile> {
    use adasel::profile::{scenarios_from_training, Constraints, DesignProfile, ProfileConfig};
    let scenarios = scenarios_from_training(
        &data.training_frames,
        Some(&data.training_labels),
        cfg.scenarios,
        cfg.subspace_dim,
        42,
    )?;
    DesignProfile::build(
        ProfileConfig {
            feature_dim: cfg.feature_dim,
            subspace_dim: cfg.subspace_dim,
            scenario_count: cfg.scenarios,
            window_length: cfg.window_length,
            clustering_seed: 42,
            constraints: Constraints {
                max_mean_error: 1e9,
                required_fps: 1.0,
                max_cost: 1e9,
            },
        },
        data.combos.clone(),
        data.platforms.clone(),
        data.performance.clone(),
        scenarios,
    )
}
