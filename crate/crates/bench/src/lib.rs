//! Shared fixtures for the criterion benchmarks.

use posevote_core::{generate_scene, Correspondence, Method, SceneConfig, SolveOptions};

/// Reference scene used throughout the benchmarks: true pose
/// `(0.3, 0.2, 0.1, 0.6)`, 10% inliers, noise 0.02.
pub fn reference_scene(n: usize, seed: u64) -> Vec<Correspondence> {
    let config = SceneConfig { n, inlier_ratio: 0.1, noise_sigma: 0.02, seed, ..Default::default() };
    generate_scene(&config).expect("reference scene").correspondences
}

/// Options as used in timing runs: early exit on, no rescaling.
pub fn timing_options(method: Method, epsilon: f64) -> SolveOptions {
    SolveOptions { method, epsilon, early_exit: true, normalize: false, ..Default::default() }
}

pub const METHODS: [Method; 3] = [Method::Naive, Method::PrimalDual, Method::Canonical];
