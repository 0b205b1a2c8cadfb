//! Input cleaning, normalization and method dispatch.

use rayon::prelude::*;

use crate::canonical::{camera_solve, OctreeOptions};
use crate::error::{Error, Result};
use crate::geometry::{AnalyticConstants, Correspondence, Pose, SurfaceSigma};
use crate::grid::{build_grid, naive_count, oracle_count};
use crate::primal_dual::{primal_dual_solve, PrimalDualOptions};
use crate::result::{Candidate, IncidenceResult, Method};

/// Uniform scale plus translation taking scene points into the unit cube.
/// Image coordinates are invariant under it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub offset: [f64; 3],
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { offset: [0.0; 3], scale: 1.0 };

    /// Identity when every point already lies in the unit cube.
    pub fn fit(corrs: &[Correspondence]) -> Self {
        if corrs.iter().all(|c| c.in_unit_cube()) {
            return Self::IDENTITY;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in corrs {
            for (a, v) in c.scene_point().into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        Self { offset: lo, scale: if extent > 0.0 { 1.0 / extent } else { 1.0 } }
    }

    pub fn apply(&self, c: &Correspondence) -> Correspondence {
        let w = c.scene_point();
        let f = |a: usize| ((w[a] - self.offset[a]) * self.scale).clamp(0.0, 1.0);
        Correspondence::new(f(0), f(1), f(2), c.xi, c.eta)
    }

    /// Maps a pose found in normalized coordinates back to the input frame.
    pub fn restore(&self, p: &Pose) -> Pose {
        Pose::new(
            p.x / self.scale + self.offset[0],
            p.y / self.scale + self.offset[1],
            p.z / self.scale + self.offset[2],
            p.kappa,
        )
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub received: usize,
    pub non_finite: usize,
    pub outside_image_bound: usize,
    pub outside_unit_cube: usize,
    pub kept: usize,
}

/// Drops unusable correspondences and normalizes the rest if asked to.
/// Without normalization, points outside the unit cube are dropped.
pub fn ingest(
    corrs: &[Correspondence],
    consts: &AnalyticConstants,
    normalize: bool,
) -> (Vec<Correspondence>, Normalization, IngestReport) {
    let mut report = IngestReport { received: corrs.len(), ..Default::default() };
    let mut kept: Vec<Correspondence> = Vec::with_capacity(corrs.len());
    for c in corrs {
        if !c.is_finite() {
            report.non_finite += 1;
        } else if !c.within_image_bound(consts.image_bound) {
            report.outside_image_bound += 1;
        } else {
            kept.push(*c);
        }
    }
    let norm = if normalize { Normalization::fit(&kept) } else { Normalization::IDENTITY };
    let kept: Vec<Correspondence> = if norm.is_identity() {
        let before = kept.len();
        let k: Vec<_> = kept.into_iter().filter(|c| c.in_unit_cube()).collect();
        report.outside_unit_cube = before - k.len();
        k
    } else {
        kept.iter().map(|c| norm.apply(c)).collect()
    };
    report.kept = kept.len();
    (kept, norm, report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub epsilon: f64,
    pub consts: AnalyticConstants,
    pub top_k: usize,
    pub early_exit: bool,
    pub normalize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::PrimalDual,
            epsilon: 0.03,
            consts: AnalyticConstants::default(),
            top_k: 10,
            early_exit: false,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Candidates are in the input frame.
    pub result: IncidenceResult,
    pub normalization: Normalization,
    pub ingest: IngestReport,
}

fn ranked(method: Method, epsilon: f64, cells: Vec<(Pose, u64)>) -> IncidenceResult {
    let mut res = IncidenceResult::new(method, epsilon, epsilon);
    res.candidates = cells.into_iter().map(|(pose, count)| Candidate { pose, count }).collect();
    res
}

/// Counts incidences with the selected method and ranks candidate poses.
pub fn solve(corrs: &[Correspondence], opts: &SolveOptions) -> Result<SolveOutput> {
    opts.consts.validate()?;
    if corrs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (clean, normalization, report) = ingest(corrs, &opts.consts, opts.normalize);
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let surfaces: Vec<SurfaceSigma> = clean.iter().copied().map(SurfaceSigma::new).collect();
    let eps = opts.epsilon;
    let k = opts.top_k.max(1);
    let mut result = match opts.method {
        Method::Naive => {
            let nc = naive_count(&surfaces, eps, &opts.consts)?;
            let grid = *nc.histogram.grid();
            let top: Vec<_> = nc.histogram.top(k).into_iter().map(|(c, n)| (grid.center(c), n as u64)).collect();
            if top.is_empty() {
                return Err(Error::EmptyHistogram);
            }
            let mut res = ranked(Method::Naive, eps, top);
            res.counter("grid_cells", grid.num_cells() as u64);
            res.counter("columns_visited", nc.tally.columns_visited);
            res.counter("columns_marked", nc.tally.columns_marked);
            res.counter("cells_marked", nc.tally.cells_marked);
            res.counter("unresolved_pieces", nc.tally.unresolved_pieces);
            res
        }
        Method::PrimalDual => {
            let pd = PrimalDualOptions { early_exit: opts.early_exit, top_k: k, ..Default::default() };
            let out = primal_dual_solve(&surfaces, eps, &opts.consts, &pd)?;
            if out.result.candidates.is_empty() {
                return Err(Error::EmptyHistogram);
            }
            out.result
        }
        Method::Canonical => {
            let oo = OctreeOptions { early_exit: opts.early_exit, track_members: false, top_k: k };
            camera_solve(&clean, eps, &opts.consts, &oo)?.0
        }
        Method::Oracle => {
            let grid = build_grid(eps, &opts.consts)?;
            let mut counts: Vec<(usize, usize)> = (0..grid.num_cells())
                .into_par_iter()
                .map(|i| (i, oracle_count(&grid.center(grid.unlinear(i)), &surfaces, eps).count))
                .filter(|(_, c)| *c > 0)
                .collect();
            counts.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            counts.truncate(k);
            if counts.is_empty() {
                return Err(Error::EmptyHistogram);
            }
            let top = counts.into_iter().map(|(i, c)| (grid.center(grid.unlinear(i)), c as u64)).collect();
            let mut res = ranked(Method::Oracle, eps, top);
            res.counter("grid_cells", grid.num_cells() as u64);
            res
        }
    };
    for c in &mut result.candidates {
        c.pose = normalization.restore(&c.pose);
    }
    result.counter("input_correspondences", report.received as u64);
    result.counter("kept_correspondences", report.kept as u64);
    result.counter("dropped_non_finite", report.non_finite as u64);
    result.counter("dropped_image_bound", report.outside_image_bound as u64);
    result.counter("dropped_outside_cube", report.outside_unit_cube as u64);
    Ok(SolveOutput { result, normalization, ingest: report })
}
