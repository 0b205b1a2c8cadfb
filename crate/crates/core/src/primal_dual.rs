//! The primal-dual counter.
//!
//! Pose space is cut into coarse cells `tau`. Every surface passing close
//! enough to `tau` to matter for one of its vertices is mapped to a dual point
//! `(w, xi - F(c; w), eta - G(c; w))`, with `c` the center of `tau`. A
//! fine vertex `v` inside `tau` then becomes a three-dimensional dual surface
//! `w -> (F(v; w) - F(c; w), G(v; w) - G(c; w))`, and its count is the number
//! of dual points in the dual cells that surface crosses, plus neighbours.
//! Dual points are grouped in `w`-cubes; each (vertex, cube) pair is decided
//! by an interval enclosure of the two residual functions over the cube.
//! When cubes hold too few points for that to pay off, each point is tested
//! against the cell's vertices directly, sharing work along grid lines.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{
    frame_distance, project, AnalyticConstants, Correspondence, Pose, SurfaceSigma, DEGENERACY_THRESHOLD,
};
use crate::grid::{
    mark_surface, mark_surface_in, naive_count, CellIndex, CrossingTally, GridSpec, IncidenceHistogram, Widen,
};
use crate::interval::Interval;
use crate::planar::XyRect;
use crate::result::{Candidate, IncidenceResult, Method};

/// Bounds of the measured residual factor.
pub const GAMMA_RANGE: (f64, f64) = (0.5, 4.0);
/// Memberships gathered per pass in early-exit mode.
const GATHER_BUDGET: u64 = 40_000_000;
/// Cells counted up front in early-exit mode to seed the threshold.
const PILOT_CELLS: usize = 16;
/// Enclosures wider than this many epsilons fall back to per-point checks.
const MAX_ENCLOSURE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    PrimalOnly,
    Balanced,
    DualOnly,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PrimalOnly => "primal-only",
            Regime::Balanced => "balanced",
            Regime::DualOnly => "dual-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub delta1: f64,
    pub delta2: f64,
    pub regime: Regime,
    pub gamma: f64,
    pub epsilon: f64,
}

/// Picks the coarse scale `delta1` and dual scale `delta2` for `n` surfaces and
/// `m` fine vertices.
///
/// With `delta2 = eps / (2 gamma delta1)`, keeping both scales in
/// `[eps / (2 gamma), 1]` amounts to `eps/(2 gamma) <= delta1 <= 1`. The coarse
/// grid must also nest the fine one, so `delta1 >= eps`, which is the binding
/// lower bound for `gamma >= 1/2`. In terms of `n` this is
/// `eps^2 m <= n <= m / eps^3`.
pub fn choose_regime(n: usize, epsilon: f64, gamma: f64, m: usize) -> RegimeParams {
    let nf = n.max(1) as f64;
    let mf = m.max(1) as f64;
    let lower = epsilon * epsilon * mf;
    let upper = mf / epsilon.powi(3);
    // Boundaries are inclusive up to floating-point noise.
    let (regime, delta1) = if nf < lower * (1.0 - 1e-9) {
        (Regime::PrimalOnly, epsilon)
    } else if nf > upper * (1.0 + 1e-9) {
        (Regime::DualOnly, 1.0)
    } else {
        (Regime::Balanced, (epsilon.powi(3) * nf / mf).powf(0.2).clamp(epsilon, 1.0))
    };
    RegimeParams { delta1, delta2: dual_scale(epsilon, gamma, delta1), regime, gamma, epsilon }
}

fn dual_scale(epsilon: f64, gamma: f64, delta1: f64) -> f64 {
    (epsilon / (2.0 * gamma * delta1)).clamp(epsilon / (2.0 * gamma), 1.0)
}

/// The fine grid whose cell centers are the reported vertices.
pub fn fine_grid(epsilon: f64, consts: &AnalyticConstants) -> Result<GridSpec> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(crate::Error::InvalidEpsilon { value: epsilon, range: "(0, 1)" });
    }
    GridSpec::covering_domain([epsilon, epsilon, std::f64::consts::SQRT_2 * epsilon, consts.c_grid * epsilon])
}

/// A coarse grid whose cells are `block^4` fine cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseLayout {
    pub fine: GridSpec,
    pub coarse: GridSpec,
    pub block: usize,
}

impl CoarseLayout {
    pub fn new(fine: GridSpec, block: usize) -> Result<Self> {
        let block = block.max(1);
        let mut dims = fine.cell_dims;
        let mut counts = fine.counts;
        for a in 0..4 {
            dims[a] *= block as f64;
            counts[a] = fine.counts[a].div_ceil(block);
        }
        Ok(Self { fine, coarse: GridSpec::new(fine.origin, dims, counts)?, block })
    }

    pub fn delta1(&self) -> f64 {
        self.coarse.cell_dims[0]
    }

    /// How far a surface can sit from a vertex it is within `eps` of, along
    /// z (`r eps <= sqrt(2) eps`) and kappa (`(1 + kappa^2) eps`, plus
    /// curvature slack), measured above the vertex's `(x, y)`.
    pub(crate) fn margin(&self) -> Widen {
        Widen::Units { z: self.fine.cell_dims[2] * (1.0 + 1e-9), kappa: 1.25 * self.fine.cell_dims[3] }
    }

    /// Fine cells nested in coarse cell `tau`, in index order.
    pub fn fine_cells(&self, tau: CellIndex) -> Vec<CellIndex> {
        let t = tau.to_array();
        let mut ranges = [(0usize, 0usize); 4];
        for a in 0..4 {
            ranges[a] = (t[a] * self.block, ((t[a] + 1) * self.block).min(self.fine.counts[a]));
        }
        let mut out = Vec::new();
        for i in ranges[0].0..ranges[0].1 {
            for j in ranges[1].0..ranges[1].1 {
                for k in ranges[2].0..ranges[2].1 {
                    for l in ranges[3].0..ranges[3].1 {
                        out.push(CellIndex::new(i, j, k, l));
                    }
                }
            }
        }
        out
    }
}

/// Coarse cell lists `S_tau`, in cell order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrimalAssignment {
    pub lists: Vec<(usize, Vec<u32>)>,
    pub memberships: u64,
    pub tally: CrossingTally,
}

/// Buckets each surface into the coarse cells it comes within the vertex
/// tolerance of.
pub fn assign_primal(surfaces: &[SurfaceSigma], layout: &CoarseLayout) -> PrimalAssignment {
    let mut lists: HashMap<usize, Vec<u32>> = HashMap::new();
    let mut tally = CrossingTally::default();
    for (id, s) in surfaces.iter().enumerate() {
        mark_surface(s, &layout.coarse, layout.margin(), &mut tally, |idx| {
            lists.entry(idx).or_default().push(id as u32)
        });
    }
    let mut lists: Vec<_> = lists.into_iter().collect();
    lists.sort_unstable_by_key(|(idx, _)| *idx);
    let memberships = lists.iter().map(|(_, l)| l.len() as u64).sum();
    PrimalAssignment { lists, memberships, tally }
}

/// A correspondence seen relative to a coarse cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub xi_tau: f64,
    pub eta_tau: f64,
}

pub fn dualize(corr: &Correspondence, tau_center: &Pose) -> Result<DualPoint> {
    let (f, g) = project(tau_center, corr.scene_point())?;
    Ok(DualPoint { w1: corr.w1, w2: corr.w2, w3: corr.w3, xi_tau: corr.xi - f, eta_tau: corr.eta - g })
}

/// The dual image of fine vertex `v` inside the cell centered at `tau_center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSurface {
    pub v: Pose,
    pub tau_center: Pose,
}

impl DualSurface {
    /// `(F(v; w) - F(c; w), G(v; w) - G(c; w))`.
    pub fn residual(&self, w: [f64; 3]) -> Result<(f64, f64)> {
        let (fv, gv) = project(&self.v, w)?;
        let (fc, gc) = project(&self.tau_center, w)?;
        Ok((fv - fc, gv - gc))
    }

    /// Enclosures of both residuals over the box `lo..=hi` of scene points.
    pub fn enclose(&self, lo: [f64; 3], hi: [f64; 3]) -> (Interval, Interval) {
        let (v, c) = (&self.v, &self.tau_center);
        let w = [Interval::new(lo[0], hi[0]), Interval::new(lo[1], hi[1]), Interval::new(lo[2], hi[2])];

        // xi: (N_v D_c - N_c D_v) / (D_v D_c) with
        // N_v D_c - N_c D_v = (1 + kc kv) cross + (kc - kv) dot.
        let cross = Interval::affine(c.x * v.y - c.y * v.x, &[c.y - v.y, v.x - c.x], &w[..2]);
        let dot = w[0].product_of_offsets(c.x, v.x) + w[1].product_of_offsets(c.y, v.y);
        let num = cross * (1.0 + c.kappa * v.kappa) + dot * (c.kappa - v.kappa);
        let d_v = Interval::affine(-v.x - v.kappa * v.y, &[1.0, v.kappa], &w[..2]);
        let d_c = Interval::affine(-c.x - c.kappa * c.y, &[1.0, c.kappa], &w[..2]);
        let xi = num.div(&(d_v * d_c));

        // eta: (w3 - zc)(rc^2 - rv^2) / (rv rc (rv + rc)) + (zc - zv) / rv.
        let rect = XyRect::new(lo[0], hi[0], lo[1], hi[1]);
        let (rv_lo, rv_hi) = rect.distance_range(v.x, v.y);
        let (rc_lo, rc_hi) = rect.distance_range(c.x, c.y);
        if rv_lo < DEGENERACY_THRESHOLD || rc_lo < DEGENERACY_THRESHOLD {
            return (xi, Interval::entire());
        }
        let rv = Interval::new(rv_lo, rv_hi).inflate(rv_hi * f64::EPSILON);
        let rc = Interval::new(rc_lo, rc_hi).inflate(rc_hi * f64::EPSILON);
        let diff_sq = Interval::affine(
            c.x * c.x + c.y * c.y - v.x * v.x - v.y * v.y,
            &[2.0 * (v.x - c.x), 2.0 * (v.y - c.y)],
            &w[..2],
        );
        let height = w[2] - Interval::point(c.z);
        let eta = (height * diff_sq).div(&(rv * rc * (rv + rc))) + Interval::point(c.z - v.z).div(&rv);
        (xi, eta)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DualTally {
    pub dual_points: u64,
    /// Surfaces whose dual point is undefined; checked directly instead.
    pub degenerate: u64,
    /// Dual points outside the `gamma delta1` residual box.
    pub residual_violations: u64,
    pub enclosures: u64,
    pub pointwise: u64,
    pub cubes: u64,
}

impl DualTally {
    fn absorb(&mut self, o: &DualTally) {
        self.dual_points += o.dual_points;
        self.degenerate += o.degenerate;
        self.residual_violations += o.residual_violations;
        self.enclosures += o.enclosures;
        self.pointwise += o.pointwise;
        self.cubes += o.cubes;
    }
}

struct Cube {
    lo: [f64; 3],
    hi: [f64; 3],
    /// Slice of the cell's point list, sorted by residual cells.
    range: (usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct DualEntry {
    /// Residual cells of the dual point.
    ci: i64,
    cj: i64,
    id: u32,
    w: [f64; 3],
    /// Projection of the scene point from the cell center.
    fc: f64,
    gc: f64,
}

/// Per-vertex counts of one coarse cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DualCount {
    /// `(fine cell, count)` for every vertex of the cell.
    pub counts: Vec<(CellIndex, u32)>,
    /// Counted `(fine cell, surface id)` pairs when auditing.
    pub pairs: Vec<(CellIndex, u32)>,
    pub tally: DualTally,
}

fn cell_of(value: f64, epsilon: f64) -> i64 {
    // floor via truncation; `f64::floor` is a libm call on baseline x86-64.
    let q = value / epsilon;
    let t = q as i64;
    t - ((t as f64) > q) as i64
}

/// Below this many dual points per occupied cube, enclosures cost more than
/// testing the points directly.
const MIN_CUBE_OCCUPANCY: f64 = 16.0;

/// Vertices forming a full product grid, ordered `(x, y, z, kappa)`-major.
struct VertexLattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
    ks: Vec<f64>,
}

type VertexKey<'a> = &'a dyn Fn(&(CellIndex, Pose)) -> (usize, f64);

impl VertexLattice {
    fn of(vertices: &[(CellIndex, Pose)]) -> Option<Self> {
        let axis = |f: VertexKey| {
            let mut v: Vec<(usize, f64)> = vertices.iter().map(f).collect();
            v.sort_by_key(|p| p.0);
            v.dedup_by_key(|p| p.0);
            v
        };
        let xs = axis(&|(c, p)| (c.i, p.x));
        let ys = axis(&|(c, p)| (c.j, p.y));
        let zs = axis(&|(c, p)| (c.k, p.z));
        let ks = axis(&|(c, p)| (c.l, p.kappa));
        if xs.len() * ys.len() * zs.len() * ks.len() != vertices.len() {
            return None;
        }
        let mut pos = 0;
        for x in &xs {
            for y in &ys {
                for z in &zs {
                    for k in &ks {
                        if vertices[pos].0 != CellIndex::new(x.0, y.0, z.0, k.0) {
                            return None;
                        }
                        pos += 1;
                    }
                }
            }
        }
        let vals = |v: Vec<(usize, f64)>| v.into_iter().map(|p| p.1).collect();
        Some(Self { xs: vals(xs), ys: vals(ys), zs: vals(zs), ks: vals(ks) })
    }
}

/// Tests every dual point against every vertex, reusing the planar distance
/// per `(x, y)` column and the kappa test across `z`.
fn count_points(
    lat: &VertexLattice,
    points: &[DualEntry],
    eps: f64,
    vertices: &[(CellIndex, Pose)],
    counts: &mut [u32],
    out: &mut DualCount,
    audit: bool,
) {
    let (nz, nk) = (lat.zs.len(), lat.ks.len());
    let inv_eps = 1.0 / eps;
    let mut ok_z = vec![false; nz];
    let mut ok_k = vec![false; nk];
    for p in points {
        out.tally.pointwise += vertices.len() as u64;
        let [w1, w2, w3] = p.w;
        for (a, x) in lat.xs.iter().enumerate() {
            let dx = w1 - x;
            for (b, y) in lat.ys.iter().enumerate() {
                let dy = w2 - y;
                let r2 = dx * dx + dy * dy;
                if r2 < DEGENERACY_THRESHOLD {
                    continue;
                }
                let inv_r = 1.0 / r2.sqrt();
                let mut any = false;
                for (c, z) in lat.zs.iter().enumerate() {
                    ok_z[c] = (cell_of(((w3 - z) * inv_r - p.gc) * inv_eps, 1.0) - p.cj).abs() <= 1;
                    any |= ok_z[c];
                }
                if !any {
                    continue;
                }
                for (d, k) in lat.ks.iter().enumerate() {
                    let den = dx + k * dy;
                    ok_k[d] = den.abs() >= DEGENERACY_THRESHOLD
                        && (cell_of(((dy - k * dx) / den - p.fc) * inv_eps, 1.0) - p.ci).abs() <= 1;
                }
                let base = (a * lat.ys.len() + b) * nz;
                for c in (0..nz).filter(|&c| ok_z[c]) {
                    for d in (0..nk).filter(|&d| ok_k[d]) {
                        let vi = (base + c) * nk + d;
                        counts[vi] += 1;
                        if audit {
                            out.pairs.push((vertices[vi].0, p.id));
                        }
                    }
                }
            }
        }
    }
}

/// Counts, for each fine vertex of `tau`, the dual points near its dual surface.
pub fn dual_count(
    tau_center: &Pose,
    s_tau: &[u32],
    surfaces: &[SurfaceSigma],
    vertices: &[(CellIndex, Pose)],
    params: &RegimeParams,
    audit: bool,
) -> DualCount {
    let mut out = DualCount::default();
    if vertices.is_empty() {
        return out;
    }
    let eps = params.epsilon;
    let delta2 = params.delta2;
    let per_axis = (1.0 / delta2 - 1e-9).ceil().max(1.0) as i64;
    let cube_key = |w: f64| ((w / delta2).floor() as i64).clamp(0, per_axis - 1);
    let residual_cap = params.gamma * params.delta1;

    let mut entries: Vec<((i64, i64, i64), DualEntry)> = Vec::with_capacity(s_tau.len());
    let mut exceptional: Vec<u32> = Vec::new();
    for &id in s_tau {
        let corr = &surfaces[id as usize].corr;
        let Ok(dp) = dualize(corr, tau_center) else {
            exceptional.push(id);
            continue;
        };
        if dp.xi_tau.abs() > residual_cap || dp.eta_tau.abs() > residual_cap {
            out.tally.residual_violations += 1;
        }
        let w = [dp.w1, dp.w2, dp.w3];
        let entry = DualEntry {
            ci: cell_of(dp.xi_tau, eps),
            cj: cell_of(dp.eta_tau, eps),
            id,
            w,
            fc: corr.xi - dp.xi_tau,
            gc: corr.eta - dp.eta_tau,
        };
        entries.push(((cube_key(w[0]), cube_key(w[1]), cube_key(w[2])), entry));
    }
    out.tally.dual_points = entries.len() as u64;
    out.tally.degenerate = exceptional.len() as u64;
    let mut counts = vec![0u32; vertices.len()];
    // Cubes cannot average the occupancy if there are too many of them.
    let sparse = (entries.len() as f64) < MIN_CUBE_OCCUPANCY * (per_axis as f64).powi(3);
    if let Some(lat) = sparse.then(|| VertexLattice::of(vertices)).flatten() {
        let points: Vec<DualEntry> = entries.iter().map(|e| e.1).collect();
        count_points(&lat, &points, eps, vertices, &mut counts, &mut out, audit);
    } else {
        count_cubes(tau_center, entries, eps, vertices, &mut counts, &mut out, audit);
    }
    for (vi, &(cell, v)) in vertices.iter().enumerate() {
        for &id in &exceptional {
            if matches!(frame_distance(&v, &surfaces[id as usize].corr), Ok(d) if d <= eps) {
                counts[vi] += 1;
                if audit {
                    out.pairs.push((cell, id));
                }
            }
        }
    }
    out.counts = vertices.iter().zip(counts).map(|(v, n)| (v.0, n)).collect();
    out
}

/// Groups dual points into `w`-cubes and decides each (vertex, cube) pair with
/// an enclosure of the residuals when it is tight enough.
fn count_cubes(
    tau_center: &Pose,
    mut entries: Vec<((i64, i64, i64), DualEntry)>,
    eps: f64,
    vertices: &[(CellIndex, Pose)],
    counts: &mut [u32],
    out: &mut DualCount,
    audit: bool,
) {
    entries.sort_unstable_by_key(|(k, p)| (*k, p.ci, p.cj, p.id));
    let points: Vec<DualEntry> = entries.iter().map(|e| e.1).collect();
    let mut cubes: Vec<Cube> = Vec::new();
    for (i, (key, p)) in entries.iter().enumerate() {
        match cubes.last_mut() {
            Some(c) if entries[c.range.0].0 == *key => {
                for a in 0..3 {
                    c.lo[a] = c.lo[a].min(p.w[a]);
                    c.hi[a] = c.hi[a].max(p.w[a]);
                }
                c.range.1 = i + 1;
            }
            _ => cubes.push(Cube { lo: p.w, hi: p.w, range: (i, i + 1) }),
        }
    }
    out.tally.cubes = cubes.len() as u64;

    for (vi, &(cell, v)) in vertices.iter().enumerate() {
        let dual = DualSurface { v, tau_center: *tau_center };
        let count = &mut counts[vi];
        for cube in &cubes {
            let pts = &points[cube.range.0..cube.range.1];
            let (xi_enc, eta_enc) = dual.enclose(cube.lo, cube.hi);
            let tight = xi_enc.is_bounded()
                && eta_enc.is_bounded()
                && xi_enc.width() <= MAX_ENCLOSURE_WIDTH * eps
                && eta_enc.width() <= MAX_ENCLOSURE_WIDTH * eps;
            if tight {
                out.tally.enclosures += 1;
                // Cells meeting the enclosure, plus one neighbour each way.
                let i0 = (xi_enc.lo / eps).ceil() as i64 - 2;
                let i1 = (xi_enc.hi / eps).floor() as i64 + 1;
                let j0 = (eta_enc.lo / eps).ceil() as i64 - 2;
                let j1 = (eta_enc.hi / eps).floor() as i64 + 1;
                let start = pts.partition_point(|p| p.ci < i0);
                for p in &pts[start..] {
                    if p.ci > i1 {
                        break;
                    }
                    if p.cj >= j0 && p.cj <= j1 {
                        *count += 1;
                        if audit {
                            out.pairs.push((cell, p.id));
                        }
                    }
                }
            } else {
                for p in pts {
                    out.tally.pointwise += 1;
                    let Ok((rx, ry)) = dual.residual(p.w) else { continue };
                    if (p.ci - cell_of(rx, eps)).abs() <= 1 && (p.cj - cell_of(ry, eps)).abs() <= 1 {
                        *count += 1;
                        if audit {
                            out.pairs.push((cell, p.id));
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimalDualOptions {
    /// Visit coarse cells by decreasing `|S_tau|` and stop once no cell can
    /// beat the best count so far. Only the first candidate is then exact.
    pub early_exit: bool,
    /// Estimate `gamma` from a pilot sample instead of the configured value.
    pub adaptive_gamma: bool,
    /// Force a balanced run with `delta1 = block * eps`.
    pub block: Option<usize>,
    /// Keep every counted `(vertex, surface)` pair.
    pub audit: bool,
    pub top_k: usize,
}

impl Default for PrimalDualOptions {
    fn default() -> Self {
        Self { early_exit: false, adaptive_gamma: true, block: None, audit: false, top_k: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct PrimalDualOutput {
    pub result: IncidenceResult,
    pub params: RegimeParams,
    /// The vertex grid (naive grid in the primal-only regime).
    pub grid: GridSpec,
    /// Counts over `grid`; complete unless early exit skipped cells.
    pub histogram: IncidenceHistogram,
    /// Counted `(vertex cell, surface id)` pairs when auditing.
    pub pairs: Vec<(CellIndex, u32)>,
}

/// Estimates `gamma` as the 99th percentile of `max(|xi_tau|, |eta_tau|) / delta1`
/// over a sample of (surface, crossed cell) pairs: at most `PILOT_SURFACES`
/// surfaces, every tenth pair of each.
pub fn pilot_gamma(surfaces: &[SurfaceSigma], layout: &CoarseLayout) -> Option<f64> {
    const PILOT_SURFACES: usize = 512;
    let stride = 10usize;
    let delta1 = layout.delta1();
    let mut ratios = Vec::new();
    let mut tally = CrossingTally::default();
    let mut seen = 0usize;
    for s in surfaces.iter().step_by(surfaces.len().div_ceil(PILOT_SURFACES).max(1)) {
        let mut cells = Vec::new();
        mark_surface(s, &layout.coarse, 0, &mut tally, |idx| cells.push(idx));
        for idx in cells {
            seen += 1;
            if seen % stride != 1 {
                continue;
            }
            let center = layout.coarse.center(layout.coarse.unlinear(idx));
            if let Ok(dp) = dualize(&s.corr, &center) {
                ratios.push(dp.xi_tau.abs().max(dp.eta_tau.abs()) / delta1);
            }
        }
    }
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_unstable_by(f64::total_cmp);
    let q = ratios[((ratios.len() - 1) as f64 * 0.99).round() as usize];
    Some(q.clamp(GAMMA_RANGE.0, GAMMA_RANGE.1))
}

/// Runs the primal-dual counter, choosing the regime from `n` and `epsilon`.
pub fn primal_dual_solve(
    surfaces: &[SurfaceSigma],
    epsilon: f64,
    consts: &AnalyticConstants,
    opts: &PrimalDualOptions,
) -> Result<PrimalDualOutput> {
    let fine = fine_grid(epsilon, consts)?;
    let mut params = choose_regime(surfaces.len(), epsilon, consts.gamma, fine.num_cells());
    if let Some(b) = opts.block {
        params.regime = Regime::Balanced;
        params.delta1 = b.max(1) as f64 * epsilon;
    }
    if params.regime == Regime::PrimalOnly {
        return primal_only(surfaces, epsilon, consts, opts, params);
    }
    let block = match params.regime {
        Regime::DualOnly => *fine.counts.iter().max().unwrap_or(&1),
        _ => ((params.delta1 / epsilon).round() as usize).max(1),
    };
    let layout = CoarseLayout::new(fine, block)?;
    params.delta1 = layout.delta1();
    if opts.adaptive_gamma {
        if let Some(g) = pilot_gamma(surfaces, &layout) {
            params.gamma = g;
        }
    }
    params.delta2 = dual_scale(epsilon, params.gamma, params.delta1);

    let mut run = Run::new(surfaces, layout, params, opts);
    if opts.early_exit {
        run.best_first();
    } else {
        run.exhaustive();
    }
    Ok(run.finish(epsilon))
}

fn primal_only(
    surfaces: &[SurfaceSigma],
    epsilon: f64,
    consts: &AnalyticConstants,
    opts: &PrimalDualOptions,
    params: RegimeParams,
) -> Result<PrimalDualOutput> {
    let nc = naive_count(surfaces, epsilon, consts)?;
    let grid = *nc.histogram.grid();
    let mut result = IncidenceResult::new(Method::PrimalDual, epsilon, epsilon);
    result.candidates = nc
        .histogram
        .top(opts.top_k.max(1))
        .into_iter()
        .map(|(c, n)| Candidate { pose: grid.center(c), count: n as u64 })
        .collect();
    record_params(&mut result, &params);
    result.counter("columns_visited", nc.tally.columns_visited);
    result.counter("cells_marked", nc.tally.cells_marked);
    Ok(PrimalDualOutput { result, params, grid, histogram: nc.histogram, pairs: Vec::new() })
}

fn record_params(result: &mut IncidenceResult, params: &RegimeParams) {
    result.parameter("delta1", params.delta1);
    result.parameter("delta2", params.delta2);
    result.parameter("gamma", params.gamma);
    result.counter(
        match params.regime {
            Regime::PrimalOnly => "regime_primal_only",
            Regime::Balanced => "regime_balanced",
            Regime::DualOnly => "regime_dual_only",
        },
        1,
    );
}

/// State of one balanced or dual-only run.
struct Run<'a> {
    surfaces: &'a [SurfaceSigma],
    layout: CoarseLayout,
    params: RegimeParams,
    opts: &'a PrimalDualOptions,
    histogram: IncidenceHistogram,
    /// Best vertices so far, ordered by (count desc, fine index asc).
    top: Vec<(u32, usize)>,
    pairs: Vec<(CellIndex, u32)>,
    primal: CrossingTally,
    dual: DualTally,
    memberships: u64,
    cells_processed: u64,
    cells_pruned: u64,
    passes: u64,
}

impl<'a> Run<'a> {
    fn new(
        surfaces: &'a [SurfaceSigma],
        layout: CoarseLayout,
        params: RegimeParams,
        opts: &'a PrimalDualOptions,
    ) -> Self {
        let histogram = if opts.early_exit {
            IncidenceHistogram::sparse(layout.fine)
        } else {
            IncidenceHistogram::dense(layout.fine)
        };
        Self {
            surfaces,
            layout,
            params,
            opts,
            histogram,
            top: Vec::new(),
            pairs: Vec::new(),
            primal: CrossingTally::default(),
            dual: DualTally::default(),
            memberships: 0,
            cells_processed: 0,
            cells_pruned: 0,
            passes: 0,
        }
    }

    fn vertices(&self, tau: CellIndex) -> Vec<(CellIndex, Pose)> {
        self.layout.fine_cells(tau).into_iter().map(|c| (c, self.layout.fine.center(c))).collect()
    }

    fn process(&self, tau_linear: usize, list: &[u32]) -> DualCount {
        let tau = self.layout.coarse.unlinear(tau_linear);
        let center = self.layout.coarse.center(tau);
        dual_count(&center, list, self.surfaces, &self.vertices(tau), &self.params, self.opts.audit)
    }

    fn absorb(&mut self, dc: DualCount) {
        self.cells_processed += 1;
        self.dual.absorb(&dc.tally);
        for (cell, count) in dc.counts {
            let idx = self.layout.fine.linear(cell);
            if count > 0 {
                self.histogram.add(idx, count);
            }
            self.offer(count, idx);
        }
        self.pairs.extend(dc.pairs);
    }

    fn offer(&mut self, count: u32, idx: usize) {
        let k = self.opts.top_k.max(1);
        if count == 0 {
            return;
        }
        if self.top.len() == k {
            let last = self.top[k - 1];
            if (count, std::cmp::Reverse(idx)) <= (last.0, std::cmp::Reverse(last.1)) {
                return;
            }
            self.top.pop();
        }
        let pos = self.top.partition_point(|&(c, i)| c > count || (c == count && i < idx));
        self.top.insert(pos, (count, idx));
    }

    /// Smallest `|S_tau|` that could still beat the best vertex so far.
    fn threshold(&self) -> u32 {
        self.top.first().map(|t| t.0).unwrap_or(1)
    }

    fn exhaustive(&mut self) {
        self.passes = 1;
        let assignment = assign_primal(self.surfaces, &self.layout);
        self.primal = assignment.tally;
        self.memberships = assignment.memberships;
        let results: Vec<DualCount> = assignment.lists.par_iter().map(|(tau, list)| self.process(*tau, list)).collect();
        for dc in results {
            self.absorb(dc);
        }
    }

    /// Exact `|S_tau|` for every coarse cell.
    fn scan(&mut self) -> Vec<u32> {
        self.passes += 1;
        let coarse = self.layout.coarse;
        let margin = self.layout.margin();
        let mut counts = vec![0u32; coarse.num_cells()];
        let mut tally = CrossingTally::default();
        for s in self.surfaces {
            mark_surface(s, &coarse, margin, &mut tally, |idx| counts[idx] += 1);
        }
        self.primal = tally;
        counts
    }

    /// Lists of `wanted` cells, visiting only the columns they sit in.
    fn gather(&mut self, wanted: &[usize]) -> Vec<Vec<u32>> {
        self.passes += 1;
        let coarse = self.layout.coarse;
        let margin = self.layout.margin();
        let per_column = coarse.counts[2] * coarse.counts[3];
        let mut columns: Vec<usize> = wanted.iter().map(|&tau| tau / per_column).collect();
        columns.sort_unstable();
        columns.dedup();
        let columns: Vec<(usize, usize)> =
            columns.into_iter().map(|c| (c / coarse.counts[1], c % coarse.counts[1])).collect();
        let mut slot = vec![u32::MAX; coarse.num_cells()];
        for (s, &tau) in wanted.iter().enumerate() {
            slot[tau] = s as u32;
        }
        let mut lists = vec![Vec::new(); wanted.len()];
        let mut tally = CrossingTally::default();
        for (id, s) in self.surfaces.iter().enumerate() {
            mark_surface_in(s, &coarse, margin, columns.iter().copied(), &mut tally, |idx| {
                let sl = slot[idx];
                if sl != u32::MAX {
                    lists[sl as usize].push(id as u32);
                }
            });
        }
        self.primal.absorb(&tally);
        lists
    }

    /// Cells ordered by decreasing size, cut at the gather budget.
    fn select(order: &[(u32, usize)], done: &[bool], floor: u32) -> Vec<usize> {
        let mut budget = 0u64;
        let mut out = Vec::new();
        for &(n, tau) in order {
            if n < floor {
                break;
            }
            if done[tau] {
                continue;
            }
            if !out.is_empty() && budget + n as u64 > GATHER_BUDGET {
                break;
            }
            budget += n as u64;
            out.push(tau);
        }
        out
    }

    fn process_lists(&mut self, cells: Vec<usize>, lists: Vec<Vec<u32>>, done: &mut [bool]) {
        for (tau, list) in cells.into_iter().zip(lists) {
            let dc = self.process(tau, &list);
            self.absorb(dc);
            done[tau] = true;
        }
    }

    /// Visits cells by decreasing `|S_tau|` and skips those that cannot beat
    /// the current top list, since no vertex of `tau` counts more than
    /// `|S_tau|` surfaces.
    fn best_first(&mut self) {
        let coarse = self.layout.coarse;
        let cells = coarse.num_cells();
        let margin = self.layout.margin();
        let mut done = vec![false; cells];
        // A cheap subsampled pass guesses where the heavy cells are.
        let stride = 16usize;
        let mut guess: Vec<(u32, usize)> = if self.surfaces.len() >= 64 * stride {
            let mut est = vec![0u32; cells];
            let mut tally = CrossingTally::default();
            for s in self.surfaces.iter().step_by(stride) {
                mark_surface(s, &coarse, margin, &mut tally, |idx| est[idx] += stride as u32);
            }
            est.into_iter().enumerate().filter(|(_, n)| *n > 0).map(|(i, n)| (n, i)).collect()
        } else {
            Vec::new()
        };
        guess.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        // Real counts in a few likely cells give a useful threshold early.
        if guess.len() > 4 * PILOT_CELLS {
            let pilot: Vec<usize> = guess.iter().take(PILOT_CELLS).map(|g| g.1).collect();
            let lists = self.gather(&pilot);
            self.process_lists(pilot, lists, &mut done);
        }
        let exact = self.scan();
        self.memberships = exact.iter().map(|&n| n as u64).sum();
        let mut order: Vec<(u32, usize)> =
            exact.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, &n)| (n, i)).collect();
        order.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        loop {
            let wanted = Self::select(&order, &done, self.threshold());
            if wanted.is_empty() {
                break;
            }
            let lists = self.gather(&wanted);
            for (tau, list) in wanted.into_iter().zip(lists) {
                // The threshold may have risen since the batch was picked.
                if exact[tau] >= self.threshold() {
                    let dc = self.process(tau, &list);
                    self.absorb(dc);
                }
                done[tau] = true;
            }
        }
        self.cells_pruned = order.iter().filter(|(_, tau)| !done[*tau]).count() as u64;
    }

    fn finish(self, epsilon: f64) -> PrimalDualOutput {
        let mut result = IncidenceResult::new(Method::PrimalDual, epsilon, epsilon);
        let fine = self.layout.fine;
        result.candidates = self
            .top
            .iter()
            .map(|&(count, idx)| Candidate { pose: fine.center(fine.unlinear(idx)), count: count as u64 })
            .collect();
        record_params(&mut result, &self.params);
        result.counter("block", self.layout.block as u64);
        result.counter("primal_memberships", self.memberships);
        result.counter("primal_columns_visited", self.primal.columns_visited);
        result.counter("primal_unresolved_pieces", self.primal.unresolved_pieces);
        result.counter("coarse_cells_processed", self.cells_processed);
        result.counter("coarse_cells_pruned", self.cells_pruned);
        result.counter("primal_passes", self.passes);
        result.counter("dual_points", self.dual.dual_points);
        result.counter("dual_degenerate", self.dual.degenerate);
        result.counter("dual_residual_violations", self.dual.residual_violations);
        result.counter("dual_cubes", self.dual.cubes);
        result.counter("dual_enclosures", self.dual.enclosures);
        result.counter("dual_pointwise", self.dual.pointwise);
        PrimalDualOutput { result, params: self.params, grid: fine, histogram: self.histogram, pairs: self.pairs }
    }
}
