//! Synthetic scenes and timing harness.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{project, AnalyticConstants, Correspondence, Pose};
use crate::result::Method;
use crate::solve::{solve, SolveOptions};

/// Pose used by the recovery experiments.
pub const REFERENCE_POSE: Pose = Pose { x: 0.3, y: 0.2, z: 0.1, kappa: 0.6 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub n: usize,
    pub inlier_ratio: f64,
    pub noise_sigma: f64,
    pub true_pose: Pose,
    pub seed: u64,
    pub image_bound: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { n: 1000, inlier_ratio: 0.5, noise_sigma: 0.01, true_pose: REFERENCE_POSE, seed: 0, image_bound: 3.0 }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("scene needs at least one correspondence".into()));
        }
        if !(0.0..=1.0).contains(&self.inlier_ratio) {
            return Err(Error::InvalidConfig(format!("inlier ratio {} not in [0, 1]", self.inlier_ratio)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        if !self.true_pose.in_domain() {
            return Err(Error::InvalidConfig("true pose outside [0,1]^3 x [-1,1]".into()));
        }
        if self.image_bound.is_nan() || self.image_bound <= 0.0 {
            return Err(Error::InvalidConfig("image bound must be positive".into()));
        }
        Ok(())
    }

    pub fn inlier_count(&self) -> usize {
        ((self.n as f64 * self.inlier_ratio) - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub correspondences: Vec<Correspondence>,
    pub inlier: Vec<bool>,
}

/// The camera looks along `(1, kappa)` in the plane; positive means in front.
fn in_front(v: &Pose, w: [f64; 3]) -> bool {
    (w[0] - v.x) + v.kappa * (w[1] - v.y) > 0.0
}

fn clamp_unit(w: [f64; 3]) -> [f64; 3] {
    w.map(|c| c.clamp(0.0, 1.0))
}

/// Draws a scene: inliers are observed from the true pose and then get
/// Gaussian scene noise, outliers are noisy points seen from random poses.
/// Draws whose image coordinates exceed the bound, or that lie behind the
/// camera, are redrawn.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let limit = 1000 * config.n as u64;
    let mut redraws = 0u64;
    let n_in = config.inlier_count();
    let mut out = Vec::with_capacity(config.n);
    let bound = config.image_bound;

    while out.len() < config.n {
        let inlier = out.len() < n_in;
        let w: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let drawn = if inlier {
            let v = config.true_pose;
            let seen = in_front(&v, w).then(|| project(&v, w).ok()).flatten();
            seen.map(|(xi, eta)| {
                let wn = clamp_unit(w.map(|c| c + noise.sample(&mut rng)));
                Correspondence::new(wn[0], wn[1], wn[2], xi, eta)
            })
        } else {
            let wn = clamp_unit(w.map(|c| c + noise.sample(&mut rng)));
            let v = Pose::new(rng.gen(), rng.gen(), rng.gen(), rng.gen_range(-1.0..=1.0));
            let seen = in_front(&v, wn).then(|| project(&v, wn).ok()).flatten();
            seen.map(|(xi, eta)| Correspondence::new(wn[0], wn[1], wn[2], xi, eta))
        };
        match drawn {
            Some(c) if c.within_image_bound(bound) => out.push((c, inlier)),
            _ => {
                redraws += 1;
                if redraws > limit {
                    return Err(Error::RejectionOverflow { redraws });
                }
            }
        }
    }
    out.shuffle(&mut rng);
    let (correspondences, inlier) = out.into_iter().unzip();
    Ok(Scene { config: *config, correspondences, inlier })
}

/// One timed run of one method on one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub n: usize,
    pub epsilon: f64,
    pub inlier_ratio: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Median wall time over the timed repetitions.
    pub seconds: f64,
    pub recovered: Option<Pose>,
    pub best_count: u64,
    /// Absolute error in `(x, y, z, kappa)`.
    pub pose_error: Option<[f64; 4]>,
    pub counters: BTreeMap<String, u64>,
    pub error: Option<String>,
}

impl BenchRecord {
    /// Configuration fields other than the method, for grouping.
    pub fn config_key(&self) -> (usize, u64, u64, u64, u64) {
        (self.n, self.epsilon.to_bits(), self.inlier_ratio.to_bits(), self.noise_sigma.to_bits(), self.seed)
    }

    pub fn recovered_within(&self, xyz: f64, kappa: f64) -> bool {
        self.pose_error.is_some_and(|e| e[0] <= xyz && e[1] <= xyz && e[2] <= xyz && e[3] <= kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub repetitions: usize,
    pub early_exit: bool,
    pub top_k: usize,
    pub consts: AnalyticConstants,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { repetitions: 3, early_exit: false, top_k: 10, consts: AnalyticConstants::default() }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs one method on a prepared scene: one discarded warm-up, then
/// `repetitions` timed runs. Solver failures are recorded, not raised.
pub fn bench_scene(scene: &Scene, method: Method, epsilon: f64, opts: &BenchOptions) -> BenchRecord {
    let cfg = scene.config;
    let solve_opts = SolveOptions {
        method,
        epsilon,
        consts: opts.consts,
        top_k: opts.top_k,
        early_exit: opts.early_exit,
        normalize: false,
    };
    let mut rec = BenchRecord {
        method,
        n: cfg.n,
        epsilon,
        inlier_ratio: cfg.inlier_ratio,
        noise_sigma: cfg.noise_sigma,
        seed: cfg.seed,
        seconds: f64::NAN,
        recovered: None,
        best_count: 0,
        pose_error: None,
        counters: BTreeMap::new(),
        error: None,
    };
    let mut times = Vec::with_capacity(opts.repetitions);
    let mut last = None;
    for rep in 0..opts.repetitions.max(1) + 1 {
        let start = Instant::now();
        let out = solve(&scene.correspondences, &solve_opts);
        let elapsed = start.elapsed().as_secs_f64();
        match out {
            Ok(res) => {
                if rep > 0 {
                    times.push(elapsed);
                }
                last = Some(res.result);
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                return rec;
            }
        }
    }
    rec.seconds = median(&mut times);
    if let Some(res) = last {
        if let Some(best) = res.best() {
            rec.recovered = Some(best.pose);
            rec.best_count = best.count;
            rec.pose_error = Some(best.pose.abs_diff(&cfg.true_pose));
        }
        rec.counters = res.counters;
    }
    rec
}

/// One line of a benchmark sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub method: Method,
    pub scene: SceneConfig,
    pub epsilon: f64,
}

/// Runs every entry; scenes shared by several entries are generated once.
pub fn run_benchmark(entries: &[SweepEntry], opts: &BenchOptions) -> Vec<BenchRecord> {
    let mut cache: Vec<(SceneConfig, std::result::Result<Scene, String>)> = Vec::new();
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let pos = match cache.iter().position(|(c, _)| *c == e.scene) {
            Some(p) => p,
            None => {
                cache.push((e.scene, generate_scene(&e.scene).map_err(|err| err.to_string())));
                cache.len() - 1
            }
        };
        match &cache[pos].1 {
            Ok(scene) => out.push(bench_scene(scene, e.method, e.epsilon, opts)),
            Err(msg) => out.push(BenchRecord {
                method: e.method,
                n: e.scene.n,
                epsilon: e.epsilon,
                inlier_ratio: e.scene.inlier_ratio,
                noise_sigma: e.scene.noise_sigma,
                seed: e.scene.seed,
                seconds: f64::NAN,
                recovered: None,
                best_count: 0,
                pose_error: None,
                counters: BTreeMap::new(),
                error: Some(msg.clone()),
            }),
        }
    }
    out
}

/// Timings of the methods run on one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonGroup {
    pub n: usize,
    pub epsilon: f64,
    pub inlier_ratio: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub fastest: Method,
    /// `slowest time / time` per method, so the slowest method has 1.
    pub speedups: BTreeMap<Method, f64>,
}

/// Groups records by configuration and ranks the methods in each group.
/// Fails unless some configuration was run by at least two methods.
pub fn compare_methods(records: &[BenchRecord]) -> Result<Vec<ComparisonGroup>> {
    let mut groups: BTreeMap<_, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.error.is_none() && r.seconds.is_finite()) {
        groups.entry(r.config_key()).or_default().push(r);
    }
    let mut out = Vec::new();
    for rs in groups.values() {
        let mut methods: Vec<Method> = rs.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        if methods.len() < 2 {
            continue;
        }
        let mut time: BTreeMap<Method, f64> = BTreeMap::new();
        for m in &methods {
            let mut ts: Vec<f64> = rs.iter().filter(|r| r.method == *m).map(|r| r.seconds).collect();
            time.insert(*m, median(&mut ts));
        }
        let slowest = time.values().cloned().fold(0.0, f64::max);
        let fastest = *time.iter().min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0))).expect("two methods").0;
        let speedups = time
            .iter()
            .map(|(m, t)| {
                (
                    *m,
                    if *t > 0.0 {
                        slowest / t
                    } else if slowest > 0.0 {
                        f64::INFINITY
                    } else {
                        1.0
                    },
                )
            })
            .collect();
        let r0 = rs[0];
        out.push(ComparisonGroup {
            n: r0.n,
            epsilon: r0.epsilon,
            inlier_ratio: r0.inlier_ratio,
            noise_sigma: r0.noise_sigma,
            seed: r0.seed,
            fastest,
            speedups,
        });
    }
    if out.is_empty() {
        return Err(Error::MismatchedConfigs("no configuration was run by two or more methods".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inlier_count_rounds_up() {
        let c = SceneConfig { n: 10, inlier_ratio: 0.25, ..Default::default() };
        assert_eq!(c.inlier_count(), 3);
        let c = SceneConfig { n: 8000, inlier_ratio: 0.1, ..Default::default() };
        assert_eq!(c.inlier_count(), 800);
    }

    #[test]
    fn noiseless_inliers_lie_on_the_true_surface() {
        let cfg = SceneConfig { n: 200, inlier_ratio: 1.0, noise_sigma: 0.0, seed: 4, ..Default::default() };
        let scene = generate_scene(&cfg).unwrap();
        for c in &scene.correspondences {
            let fd = crate::geometry::frame_distance(&cfg.true_pose, c).unwrap();
            assert!(fd < 1e-9);
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
