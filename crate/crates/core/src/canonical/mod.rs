//! Canonical surfaces on an octree.
//!
//! A family of `k`-dimensional surfaces in `[0,1]^d` is written as
//! `x_j = F_j(x; t) + f_j` for the `d - k` dependent coordinates, where
//! `x` are the first `k` coordinates, `t` the essential parameters and `f`
//! the free (additive) ones. Surfaces are snapped to a parameter lattice at
//! the root and re-snapped, on a lattice that coarsens with depth, every time
//! they are pushed into a child cell. Snapping merges surfaces, so the work
//! per cell is bounded by the lattice size rather than by `n`. Each leaf of
//! side `4 eps` reports the total weight of the surfaces that reach it.

mod camera;
mod hyperplane;

pub use camera::{camera_family, camera_params, camera_solve, CameraFamily};
pub use hyperplane::{hyperplane_family, hyperplane_params, HyperplaneFamily};

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;
pub const MAX_ESSENTIAL: usize = 4;
pub const MAX_FREE: usize = 2;

/// Per-coordinate ranges of the dependent functions over one parametric face.
pub type DepBox = [(f64, f64); MAX_FREE];

#[derive(Debug, Clone, Default)]
pub struct FaceBoxes {
    pub boxes: SmallVec<[DepBox; 2]>,
    /// The face lies where the family's analytic constants do not apply.
    pub flagged: bool,
}

/// A parametric family of surfaces the octree can round.
pub trait SurfaceFamily: Sync {
    /// Ambient dimension `d`.
    fn ambient_dim(&self) -> usize;
    /// Parametric dimension `k`.
    fn surface_dim(&self) -> usize;
    /// Number of essential parameters.
    fn essential_len(&self) -> usize;
    /// For each dependent coordinate, whether its free parameter is genuine
    /// (true) or artificial and fixed at zero (false).
    fn free_genuine(&self) -> &[bool];
    /// Bound on the gradients of `F_j` in `x` and `t`.
    fn c1(&self) -> f64;
    /// Lipschitz bound of the `x`-gradients in `t`.
    fn c2(&self) -> f64;
    fn essential_range(&self, i: usize) -> (f64, f64);
    fn free_range(&self, j: usize) -> (f64, f64);
    /// `F_j(x; t)`; may be non-finite near singularities.
    fn eval(&self, j: usize, x: &[f64], t: &[f64]) -> f64;
    /// Enclosures of every `F_j(.; t)` over the cube face `x_lo + [0, side]^k`.
    /// `offsets` are the additive offsets the caller will apply and may be
    /// used to discard pieces that cannot reach `[0, 1]`.
    fn face_boxes(&self, t: &[f64], x_lo: &[f64], side: f64, offsets: &[f64]) -> FaceBoxes;

    /// Rounding scale: `eps / (c2 log2(1/eps))`.
    fn eps_prime(&self, epsilon: f64) -> f64 {
        epsilon / (self.c2() * (1.0 / epsilon).log2())
    }

    fn dependent_len(&self) -> usize {
        self.ambient_dim() - self.surface_dim()
    }

    /// Exponent of the per-cell population bound `(delta / eps')^e`.
    fn size_exponent(&self) -> usize {
        self.essential_len() + self.ambient_dim() - self.surface_dim()
    }
}

/// An original surface: essential and free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceParams {
    pub t: [f64; MAX_ESSENTIAL],
    pub f: [f64; MAX_FREE],
}

/// A lattice surface. Essential parameters are `s * step_t(level)` and free
/// ones `g * step_f`; the cell corner it is anchored at is held by the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoundedSurface {
    pub s: [i32; MAX_ESSENTIAL],
    pub g: [i64; MAX_FREE],
    pub weight: u32,
}

impl RoundedSurface {
    fn key(&self) -> ([i32; MAX_ESSENTIAL], [i64; MAX_FREE]) {
        (self.s, self.g)
    }
}

/// Lattice scales of one build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub eps_prime: f64,
    pub essential_len: usize,
}

impl Lattice {
    pub fn side(level: u32) -> f64 {
        (-(level as f64)).exp2()
    }

    /// Essential step at a cell of the given level.
    pub fn step_t(&self, level: u32) -> f64 {
        self.eps_prime / ((self.essential_len + 1) as f64 * Self::side(level))
    }

    /// Free-parameter step, the same at every level.
    pub fn step_f(&self) -> f64 {
        self.eps_prime / (self.essential_len + 1) as f64
    }

    pub fn essentials(&self, rs: &RoundedSurface, level: u32) -> [f64; MAX_ESSENTIAL] {
        let step = self.step_t(level);
        let mut t = [0.0; MAX_ESSENTIAL];
        for i in 0..self.essential_len {
            t[i] = rs.s[i] as f64 * step;
        }
        t
    }
}

/// Where a cell sits: its level and minimal corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFrame {
    pub level: u32,
    pub corner: [f64; MAX_DIM],
}

impl CellFrame {
    pub fn root() -> Self {
        Self { level: 0, corner: [0.0; MAX_DIM] }
    }

    pub fn side(&self) -> f64 {
        Lattice::side(self.level)
    }
}

/// Additive offsets `C_j` so that the surface in `frame` reads
/// `x_j = F_j(x; t) + C_j`. Below the root the surface is anchored at the
/// cell corner: `C_j = g_j step_f + corner_j - F_j(corner_x; t)`.
pub fn offsets<F: SurfaceFamily + ?Sized>(
    family: &F,
    lattice: &Lattice,
    frame: &CellFrame,
    rs: &RoundedSurface,
    t: &[f64],
) -> [f64; MAX_FREE] {
    let k = family.surface_dim();
    let mut c = [0.0; MAX_FREE];
    for j in 0..family.dependent_len() {
        c[j] = rs.g[j] as f64 * lattice.step_f();
        if frame.level > 0 {
            c[j] += frame.corner[k + j] - family.eval(j, &frame.corner[..k], t);
        }
    }
    c
}

/// Value of dependent coordinate `j` of a lattice surface at `x`.
pub fn rounded_value<F: SurfaceFamily + ?Sized>(
    family: &F,
    lattice: &Lattice,
    frame: &CellFrame,
    rs: &RoundedSurface,
    j: usize,
    x: &[f64],
) -> f64 {
    let t = lattice.essentials(rs, frame.level);
    let c = offsets(family, lattice, frame, rs, &t[..family.essential_len()]);
    family.eval(j, x, &t[..family.essential_len()]) + c[j]
}

/// Value of dependent coordinate `j` of an original surface at `x`.
pub fn original_value<F: SurfaceFamily + ?Sized>(family: &F, p: &SurfaceParams, j: usize, x: &[f64]) -> f64 {
    family.eval(j, x, &p.t[..family.essential_len()]) + p.f[j]
}

fn round_index(v: f64) -> Option<i64> {
    let r = v.round();
    (r.is_finite() && r.abs() < 1e15).then_some(r as i64)
}

/// Nearest integer to `s / 2`, ties away from zero.
fn halve(s: i32) -> i32 {
    if s % 2 == 0 {
        s / 2
    } else {
        (s + s.signum()) / 2
    }
}

/// A weighted set of lattice surfaces, optionally with the ids of the
/// originals folded into each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceSet {
    pub surfaces: Vec<RoundedSurface>,
    pub members: Option<Vec<Vec<u32>>>,
}

impl SurfaceSet {
    pub fn total_weight(&self) -> u64 {
        self.surfaces.iter().map(|s| s.weight as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Sorts by lattice key and merges equal keys, summing weights.
    fn merged(mut entries: Vec<(RoundedSurface, Vec<u32>)>, track: bool) -> Self {
        entries.sort_unstable_by_key(|(rs, _)| rs.key());
        let mut surfaces: Vec<RoundedSurface> = Vec::with_capacity(entries.len());
        let mut members: Vec<Vec<u32>> = Vec::new();
        for (rs, m) in entries {
            match surfaces.last_mut() {
                Some(last) if last.key() == rs.key() => {
                    last.weight += rs.weight;
                    if track {
                        members.last_mut().expect("parallel to surfaces").extend(m);
                    }
                }
                _ => {
                    surfaces.push(rs);
                    if track {
                        members.push(m);
                    }
                }
            }
        }
        Self { surfaces, members: track.then_some(members) }
    }
}

/// Snaps every surface to the root lattice and merges duplicates.
pub fn canonize<F: SurfaceFamily + ?Sized>(
    originals: &[SurfaceParams],
    family: &F,
    lattice: &Lattice,
    track_members: bool,
) -> Result<SurfaceSet> {
    let ell = family.essential_len();
    let step_t = lattice.step_t(0);
    let step_f = lattice.step_f();
    let genuine = family.free_genuine();
    let mut entries = Vec::with_capacity(originals.len());
    for (id, p) in originals.iter().enumerate() {
        let mut rs = RoundedSurface { s: [0; MAX_ESSENTIAL], g: [0; MAX_FREE], weight: 1 };
        for i in 0..ell {
            let (lo, hi) = family.essential_range(i);
            if !(lo..=hi).contains(&p.t[i]) {
                return Err(Error::ParameterOutOfRange { index: i, value: p.t[i], lo, hi });
            }
            rs.s[i] = (p.t[i] / step_t).round() as i32;
        }
        for j in 0..family.dependent_len() {
            let (lo, hi) = family.free_range(j);
            if !(lo..=hi).contains(&p.f[j]) {
                return Err(Error::ParameterOutOfRange { index: ell + j, value: p.f[j], lo, hi });
            }
            if genuine[j] {
                rs.g[j] = (p.f[j] / step_f).round() as i64;
            }
        }
        entries.push((rs, if track_members { vec![id as u32] } else { Vec::new() }));
    }
    Ok(SurfaceSet::merged(entries, track_members))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DescendTally {
    /// Surfaces rounded out of a cell they were pushed into.
    pub dropped_after_rounding: u64,
    /// Re-anchored offsets that were not finite.
    pub degenerate: u64,
    /// Face evaluations outside the family's analytic regime.
    pub flagged_faces: u64,
}

impl DescendTally {
    fn absorb(&mut self, o: &DescendTally) {
        self.dropped_after_rounding += o.dropped_after_rounding;
        self.degenerate += o.degenerate;
        self.flagged_faces += o.flagged_faces;
    }
}

fn overlaps(b: &DepBox, offsets: &[f64], lo: &[f64], side: f64, m: usize) -> bool {
    (0..m).all(|j| b[j].0 + offsets[j] <= lo[j] + side && b[j].1 + offsets[j] >= lo[j])
}

/// Pushes the surfaces of a cell into its `2^d` children, re-anchoring and
/// re-rounding them (the three rounding steps), and merges duplicates.
/// Returns the children in child-index order; bit `a` of the index selects the
/// upper half along axis `a`.
pub fn descend<F: SurfaceFamily + ?Sized>(
    family: &F,
    lattice: &Lattice,
    frame: &CellFrame,
    set: &SurfaceSet,
) -> (Vec<(CellFrame, SurfaceSet)>, DescendTally) {
    let d = family.ambient_dim();
    let k = family.surface_dim();
    let m = d - k;
    let ell = family.essential_len();
    let half = 0.5 * frame.side();
    let child_level = frame.level + 1;
    let step_f = lattice.step_f();
    let track = set.members.is_some();
    let mut tally = DescendTally::default();

    let frames: Vec<CellFrame> = (0..1usize << d)
        .map(|b| {
            let mut corner = frame.corner;
            for a in 0..d {
                if (b >> a) & 1 == 1 {
                    corner[a] += half;
                }
            }
            CellFrame { level: child_level, corner }
        })
        .collect();
    let mut buckets: Vec<Vec<(RoundedSurface, Vec<u32>)>> = vec![Vec::new(); frames.len()];

    for (si, rs) in set.surfaces.iter().enumerate() {
        let t = lattice.essentials(rs, frame.level);
        let c = offsets(family, lattice, frame, rs, &t[..ell]);
        let mut s_child = rs.s;
        for i in 0..ell {
            s_child[i] = halve(rs.s[i]);
        }
        let t_child = lattice.essentials(&RoundedSurface { s: s_child, ..*rs }, child_level);
        for xb in 0..1usize << k {
            let x_lo = &frames[xb].corner[..k];
            let raw = family.face_boxes(&t[..ell], x_lo, half, &c[..m]);
            if raw.flagged {
                tally.flagged_faces += 1;
            }
            if raw.boxes.is_empty() {
                continue;
            }
            let mut f_t = [0.0; MAX_FREE];
            let mut f_child = [0.0; MAX_FREE];
            for j in 0..m {
                f_t[j] = family.eval(j, x_lo, &t[..ell]);
                f_child[j] = family.eval(j, x_lo, &t_child[..ell]);
            }
            let mut raw_child: Option<FaceBoxes> = None;
            for db in 0..1usize << m {
                let child = xb | (db << k);
                let dep_lo = &frames[child].corner[k..d];
                if !raw.boxes.iter().any(|b| overlaps(b, &c[..m], dep_lo, half, m)) {
                    continue;
                }
                // Step 1: re-anchor at the child corner; step 3: snap the new offset.
                let mut g = [0i64; MAX_FREE];
                let mut c_child = [0.0; MAX_FREE];
                let mut ok = true;
                for j in 0..m {
                    let f_new = f_t[j] + c[j] - dep_lo[j];
                    match round_index(f_new / step_f) {
                        Some(q) => g[j] = q,
                        None => ok = false,
                    }
                    c_child[j] = g[j] as f64 * step_f + dep_lo[j] - f_child[j];
                    ok &= c_child[j].is_finite();
                }
                if !ok {
                    tally.degenerate += 1;
                    continue;
                }
                // Step 2 happened above (s_child); drop if the snapped surface misses.
                let rc = raw_child.get_or_insert_with(|| family.face_boxes(&t_child[..ell], x_lo, half, &c[..m]));
                if !rc.boxes.iter().any(|b| overlaps(b, &c_child[..m], dep_lo, half, m)) {
                    tally.dropped_after_rounding += 1;
                    continue;
                }
                let members = match &set.members {
                    Some(ms) => ms[si].clone(),
                    None => Vec::new(),
                };
                buckets[child].push((RoundedSurface { s: s_child, g, weight: rs.weight }, members));
            }
        }
    }
    let children = frames
        .into_iter()
        .zip(buckets)
        .filter(|(_, b)| !b.is_empty())
        .map(|(f, b)| (f, SurfaceSet::merged(b, track)))
        .collect();
    (children, tally)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctreeOptions {
    /// Skip subtrees lighter than the heaviest leaf found so far. Only the
    /// first reported leaf is then guaranteed to be the true maximum.
    pub early_exit: bool,
    /// Keep the original ids behind every lattice surface.
    pub track_members: bool,
    /// Leaves to report in early-exit mode.
    pub top_k: usize,
}

impl Default for OctreeOptions {
    fn default() -> Self {
        Self { early_exit: false, track_members: false, top_k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    /// Integer coordinates of the leaf among the `2^depth` per axis.
    pub index: [u32; MAX_DIM],
    pub frame: CellFrame,
    pub center: [f64; MAX_DIM],
    pub weight: u64,
    /// The leaf's lattice surfaces; kept when tracking members.
    pub surfaces: Option<SurfaceSet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelStats {
    pub nodes: u64,
    pub surfaces: u64,
    pub max_surfaces: u64,
}

/// A built octree: its weighted leaves and per-level populations.
#[derive(Debug, Clone)]
pub struct Octree {
    pub effective_epsilon: f64,
    pub lattice: Lattice,
    pub depth: u32,
    /// Every nonempty leaf, or only the best ones in early-exit mode; sorted
    /// by decreasing weight, ties by index.
    pub leaves: Vec<Leaf>,
    pub levels: Vec<LevelStats>,
    pub tally: DescendTally,
    pub root_weight: u64,
    pub pruned: u64,
}

/// The value of `eps` actually used: the largest value not above `epsilon`
/// for which `4 eps` is a power of two, and the matching leaf depth.
pub fn snap_epsilon(epsilon: f64) -> Result<(f64, u32)> {
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(Error::InvalidEpsilon { value: epsilon, range: "(0, 0.25]" });
    }
    let depth = (-(4.0 * epsilon).log2() - 1e-9).ceil().max(0.0) as u32;
    Ok((Lattice::side(depth) / 4.0, depth))
}

struct Builder<'a, F: SurfaceFamily + ?Sized> {
    family: &'a F,
    lattice: Lattice,
    depth: u32,
    opts: OctreeOptions,
    leaves: Vec<Leaf>,
    levels: Vec<LevelStats>,
    tally: DescendTally,
    pruned: u64,
}

impl<F: SurfaceFamily + ?Sized> Builder<'_, F> {
    fn note(&mut self, level: u32, set: &SurfaceSet) {
        let st = &mut self.levels[level as usize];
        st.nodes += 1;
        st.surfaces += set.len() as u64;
        st.max_surfaces = st.max_surfaces.max(set.len() as u64);
    }

    /// Weight a subtree must reach to beat the heaviest leaf so far.
    fn threshold(&self) -> u64 {
        if !self.opts.early_exit {
            1
        } else {
            self.leaves.first().map(|l| l.weight).unwrap_or(1)
        }
    }

    fn offer(&mut self, frame: CellFrame, set: SurfaceSet) {
        let d = self.family.ambient_dim();
        let side = frame.side();
        let mut index = [0u32; MAX_DIM];
        let mut center = [0.0; MAX_DIM];
        for a in 0..d {
            index[a] = (frame.corner[a] / side).round() as u32;
            center[a] = frame.corner[a] + 0.5 * side;
        }
        let leaf =
            Leaf { index, frame, center, weight: set.total_weight(), surfaces: self.opts.track_members.then_some(set) };
        let pos = self
            .leaves
            .partition_point(|l| l.weight > leaf.weight || (l.weight == leaf.weight && l.index < leaf.index));
        if self.opts.early_exit {
            let k = self.opts.top_k.max(1);
            if pos >= k {
                return;
            }
            self.leaves.insert(pos, leaf);
            self.leaves.truncate(k);
        } else {
            self.leaves.insert(pos, leaf);
        }
    }

    fn visit(&mut self, frame: CellFrame, set: SurfaceSet) {
        if frame.level == self.depth {
            self.offer(frame, set);
            return;
        }
        let (children, tally) = descend(self.family, &self.lattice, &frame, &set);
        drop(set);
        self.tally.absorb(&tally);
        let mut children: Vec<(u64, usize, CellFrame, SurfaceSet)> =
            children.into_iter().enumerate().map(|(i, (f, s))| (s.total_weight(), i, f, s)).collect();
        for c in &children {
            self.note(c.2.level, &c.3);
        }
        if self.opts.early_exit {
            children.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        }
        for (w, _, f, s) in children {
            if w < self.threshold() {
                self.pruned += 1;
                continue;
            }
            self.visit(f, s);
        }
    }
}

/// Canonizes the surfaces and pushes them down to leaves of side `4 eps`.
pub fn build_structure<F: SurfaceFamily + ?Sized>(
    originals: &[SurfaceParams],
    family: &F,
    epsilon: f64,
    opts: &OctreeOptions,
) -> Result<Octree> {
    let (effective_epsilon, depth) = snap_epsilon(epsilon)?;
    let lattice = Lattice { eps_prime: family.eps_prime(effective_epsilon), essential_len: family.essential_len() };
    let root = canonize(originals, family, &lattice, opts.track_members)?;
    let root_weight = root.total_weight();
    let mut b = Builder {
        family,
        lattice,
        depth,
        opts: *opts,
        leaves: Vec::new(),
        levels: vec![LevelStats::default(); depth as usize + 1],
        tally: DescendTally::default(),
        pruned: 0,
    };
    b.note(0, &root);
    if !root.is_empty() {
        b.visit(CellFrame::root(), root);
    }
    Ok(Octree {
        effective_epsilon,
        lattice,
        depth,
        leaves: b.leaves,
        levels: b.levels,
        tally: b.tally,
        root_weight,
        pruned: b.pruned,
    })
}

/// Center and weight of the heaviest leaf; ties by smallest leaf index.
pub fn best_leaf(tree: &Octree) -> Result<([f64; MAX_DIM], u64)> {
    tree.leaves.first().map(|l| (l.center, l.weight)).ok_or(Error::EmptyStructure)
}

/// Weight per leaf index, for lookups in tests and tools.
pub fn leaf_weights(tree: &Octree) -> HashMap<[u32; MAX_DIM], u64> {
    tree.leaves.iter().map(|l| (l.index, l.weight)).collect()
}
