//! The naive grid algorithm: bucket every surface into the cells of an
//! anisotropic grid over pose space and read counts at the cell centers.

use std::collections::HashMap;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geometry::{frame_distance, AnalyticConstants, Pose, SurfaceSigma};
use crate::planar::XyRect;

/// Lower corner of the primal domain `[0,1]^3 x [-1,1]`.
pub const DOMAIN_ORIGIN: [f64; 4] = [0.0, 0.0, 0.0, -1.0];
/// Extent of the primal domain per axis.
pub const DOMAIN_EXTENT: [f64; 4] = [1.0, 1.0, 1.0, 2.0];

/// Grids sparser than this fraction of occupied cells use hashed storage.
const SPARSE_OCCUPANCY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

impl CellIndex {
    pub fn new(i: usize, j: usize, k: usize, l: usize) -> Self {
        Self { i, j, k, l }
    }

    pub fn to_array(&self) -> [usize; 4] {
        [self.i, self.j, self.k, self.l]
    }
}

/// Axis-aligned grid of half-open cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: [f64; 4],
    pub cell_dims: [f64; 4],
    pub counts: [usize; 4],
}

impl GridSpec {
    pub fn new(origin: [f64; 4], cell_dims: [f64; 4], counts: [usize; 4]) -> Result<Self> {
        for a in 0..4 {
            if !(cell_dims[a].is_finite() && cell_dims[a] > 0.0) || counts[a] == 0 {
                return Err(Error::InvalidConfig(format!("grid axis {a}: dim {} count {}", cell_dims[a], counts[a])));
            }
        }
        Ok(Self { origin, cell_dims, counts })
    }

    /// The grid anchored at the domain's lower corner with just enough cells
    /// per axis to cover it.
    pub fn covering_domain(cell_dims: [f64; 4]) -> Result<Self> {
        let mut counts = [0usize; 4];
        for a in 0..4 {
            counts[a] = ceil_count(DOMAIN_EXTENT[a] / cell_dims[a]);
        }
        Self::new(DOMAIN_ORIGIN, cell_dims, counts)
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn linear(&self, c: CellIndex) -> usize {
        ((c.i * self.counts[1] + c.j) * self.counts[2] + c.k) * self.counts[3] + c.l
    }

    pub fn unlinear(&self, mut idx: usize) -> CellIndex {
        let l = idx % self.counts[3];
        idx /= self.counts[3];
        let k = idx % self.counts[2];
        idx /= self.counts[2];
        let j = idx % self.counts[1];
        CellIndex::new(idx / self.counts[1], j, k, l)
    }

    /// The half-open cell containing `p`, if any.
    pub fn cell_of(&self, p: &Pose) -> Option<CellIndex> {
        let v = p.to_array();
        let mut idx = [0usize; 4];
        for a in 0..4 {
            let t = ((v[a] - self.origin[a]) / self.cell_dims[a]).floor();
            if !(t >= 0.0 && t < self.counts[a] as f64) {
                return None;
            }
            idx[a] = t as usize;
        }
        Some(CellIndex::new(idx[0], idx[1], idx[2], idx[3]))
    }

    pub fn center(&self, c: CellIndex) -> Pose {
        let idx = c.to_array();
        let mut p = [0.0; 4];
        for a in 0..4 {
            p[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.cell_dims[a];
        }
        Pose::from_array(p)
    }

    pub fn lower_corner(&self, c: CellIndex) -> [f64; 4] {
        let idx = c.to_array();
        let mut p = [0.0; 4];
        for a in 0..4 {
            p[a] = self.origin[a] + idx[a] as f64 * self.cell_dims[a];
        }
        p
    }

    /// The xy-rectangle of column `(i, j)`.
    pub fn column_rect(&self, i: usize, j: usize) -> XyRect {
        let x0 = self.origin[0] + i as f64 * self.cell_dims[0];
        let y0 = self.origin[1] + j as f64 * self.cell_dims[1];
        XyRect::new(x0, x0 + self.cell_dims[0], y0, y0 + self.cell_dims[1])
    }

    /// Indices of the cells along `axis` whose closed extent meets `[lo, hi]`.
    pub fn closed_span(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return None;
        }
        let last = (self.counts[axis] - 1) as f64;
        let a = -floor_fast(1.0 - (lo - self.origin[axis]) / self.cell_dims[axis]);
        let b = floor_fast((hi - self.origin[axis]) / self.cell_dims[axis]);
        if b < 0.0 || a > last {
            return None;
        }
        Some((a.max(0.0) as usize, b.min(last) as usize))
    }

    /// Largest `|kappa|` the grid reaches.
    pub fn kappa_reach(&self) -> f64 {
        let lo = self.origin[3];
        let hi = lo + self.counts[3] as f64 * self.cell_dims[3];
        lo.abs().max(hi.abs())
    }
}

/// `ceil`, tolerant of quotients that land a hair above an integer.
/// `x.floor()` without the libm call baseline x86-64 makes for it.
#[inline]
pub(crate) fn floor_fast(x: f64) -> f64 {
    if x.abs() < 4.0e15 {
        let t = x as i64 as f64;
        if t > x {
            t - 1.0
        } else {
            t
        }
    } else {
        x
    }
}

pub(crate) fn ceil_count(q: f64) -> usize {
    ((q - 1e-9).ceil() as usize).max(1)
}

/// The naive grid: cells of `eps x eps x 2 sqrt2 eps x 2 c_grid eps`.
pub fn build_grid(epsilon: f64, consts: &AnalyticConstants) -> Result<GridSpec> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon { value: epsilon, range: "(0, 1)" });
    }
    GridSpec::covering_domain([
        epsilon,
        epsilon,
        2.0 * std::f64::consts::SQRT_2 * epsilon,
        2.0 * consts.c_grid * epsilon,
    ])
}

/// Bookkeeping of one or many surface-to-grid crossings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrossingTally {
    pub columns_visited: u64,
    pub columns_marked: u64,
    pub cells_marked: u64,
    /// Column pieces near a pole whose kappa range was left unbounded.
    pub unresolved_pieces: u64,
}

impl CrossingTally {
    pub fn absorb(&mut self, o: &CrossingTally) {
        self.columns_visited += o.columns_visited;
        self.columns_marked += o.columns_marked;
        self.cells_marked += o.cells_marked;
        self.unresolved_pieces += o.unresolved_pieces;
    }
}

/// How far a surface's per-column range is widened before marking cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Widen {
    /// Whole cells along z and kappa.
    Cells(usize),
    /// Absolute margins along z and kappa.
    Units { z: f64, kappa: f64 },
}

/// Calls `mark` with the linear index of every cell whose closed box meets the
/// surface's per-column range box, widened along z and kappa.
pub(crate) fn mark_surface(
    sigma: &SurfaceSigma,
    grid: &GridSpec,
    widen: impl Into<Widen>,
    tally: &mut CrossingTally,
    mark: impl FnMut(usize),
) {
    let [ci, cj, _, _] = grid.counts;
    let columns = (0..ci).flat_map(|i| (0..cj).map(move |j| (i, j)));
    mark_surface_in(sigma, grid, widen, columns, tally, mark)
}

/// [`mark_surface`] restricted to the given `(i, j)` columns.
pub(crate) fn mark_surface_in(
    sigma: &SurfaceSigma,
    grid: &GridSpec,
    widen: impl Into<Widen>,
    columns: impl IntoIterator<Item = (usize, usize)>,
    tally: &mut CrossingTally,
    mut mark: impl FnMut(usize),
) {
    let (expand, mz, mk) = match widen.into() {
        Widen::Cells(e) => (e, 0.0, 0.0),
        Widen::Units { z, kappa } => (0, z, kappa),
    };
    let reach = grid.kappa_reach() + mk;
    let [_, _, cz, cl] = grid.counts;
    let mut spans: SmallVec<[(usize, usize, usize, usize); 2]> = SmallVec::new();
    let mut covered: Vec<bool> = Vec::new();
    for (i, j) in columns {
        tally.columns_visited += 1;
        let rr = sigma.rect_ranges(&grid.column_rect(i, j), reach);
        tally.unresolved_pieces += rr.unresolved as u64;
        spans.clear();
        for b in &rr.boxes {
            let (z_lo, z_hi) = sigma.z_range(b.r.0, b.r.1);
            let Some((k0, k1)) = grid.closed_span(2, z_lo - mz, z_hi + mz) else { continue };
            let Some((l0, l1)) = grid.closed_span(3, b.kappa.0 - mk, b.kappa.1 + mk) else { continue };
            spans.push((
                k0.saturating_sub(expand),
                (k1 + expand).min(cz - 1),
                l0.saturating_sub(expand),
                (l1 + expand).min(cl - 1),
            ));
        }
        if spans.is_empty() {
            continue;
        }
        tally.columns_marked += 1;
        let base = (i * grid.counts[1] + j) * cz;
        if spans.len() == 1 {
            let (k0, k1, l0, l1) = spans[0];
            for k in k0..=k1 {
                for l in l0..=l1 {
                    mark((base + k) * cl + l);
                }
            }
            tally.cells_marked += ((k1 - k0 + 1) * (l1 - l0 + 1)) as u64;
            continue;
        }
        // Union of overlapping spans over their bounding box.
        let k_lo = spans.iter().map(|s| s.0).min().unwrap_or(0);
        let k_hi = spans.iter().map(|s| s.1).max().unwrap_or(0);
        let l_lo = spans.iter().map(|s| s.2).min().unwrap_or(0);
        let l_hi = spans.iter().map(|s| s.3).max().unwrap_or(0);
        let width = l_hi - l_lo + 1;
        covered.clear();
        covered.resize((k_hi - k_lo + 1) * width, false);
        for &(k0, k1, l0, l1) in &spans {
            for k in k0..=k1 {
                let row = (k - k_lo) * width;
                covered[row + l0 - l_lo..=row + l1 - l_lo].fill(true);
            }
        }
        for (pos, _) in covered.iter().enumerate().filter(|(_, c)| **c) {
            mark((base + k_lo + pos / width) * cl + l_lo + pos % width);
            tally.cells_marked += 1;
        }
    }
}

impl From<usize> for Widen {
    fn from(cells: usize) -> Self {
        Widen::Cells(cells)
    }
}

/// A superset of the grid cells the surface passes through, in index order.
pub fn cells_crossed(sigma: &SurfaceSigma, grid: &GridSpec) -> (Vec<CellIndex>, CrossingTally) {
    let mut tally = CrossingTally::default();
    let mut out = Vec::new();
    mark_surface(sigma, grid, 0, &mut tally, |idx| out.push(idx));
    out.sort_unstable();
    (out.into_iter().map(|idx| grid.unlinear(idx)).collect(), tally)
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<u32>),
    Sparse(HashMap<usize, u32>),
}

/// Per-cell counts over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceHistogram {
    grid: GridSpec,
    storage: Storage,
}

impl IncidenceHistogram {
    pub fn dense(grid: GridSpec) -> Self {
        Self { grid, storage: Storage::Dense(vec![0; grid.num_cells()]) }
    }

    pub fn sparse(grid: GridSpec) -> Self {
        Self { grid, storage: Storage::Sparse(HashMap::new()) }
    }

    /// Dense or sparse storage depending on the expected number of marks.
    pub fn for_expected_marks(grid: GridSpec, expected_marks: f64) -> Self {
        if expected_marks < SPARSE_OCCUPANCY * grid.num_cells() as f64 {
            Self::sparse(grid)
        } else {
            Self::dense(grid)
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    #[inline]
    pub fn add(&mut self, linear: usize, amount: u32) {
        match &mut self.storage {
            Storage::Dense(v) => v[linear] += amount,
            Storage::Sparse(m) => *m.entry(linear).or_insert(0) += amount,
        }
    }

    pub fn get_linear(&self, linear: usize) -> u32 {
        match &self.storage {
            Storage::Dense(v) => v[linear],
            Storage::Sparse(m) => m.get(&linear).copied().unwrap_or(0),
        }
    }

    pub fn get(&self, c: CellIndex) -> u32 {
        self.get_linear(self.grid.linear(c))
    }

    /// Nonzero cells in index order.
    pub fn nonzero(&self) -> Vec<(usize, u32)> {
        match &self.storage {
            Storage::Dense(v) => v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect(),
            Storage::Sparse(m) => {
                let mut out: Vec<_> = m.iter().filter(|(_, &c)| c > 0).map(|(&i, &c)| (i, c)).collect();
                out.sort_unstable();
                out
            }
        }
    }

    pub fn total(&self) -> u64 {
        match &self.storage {
            Storage::Dense(v) => v.iter().map(|&c| c as u64).sum(),
            Storage::Sparse(m) => m.values().map(|&c| c as u64).sum(),
        }
    }

    pub fn merge(&mut self, other: &IncidenceHistogram) {
        debug_assert_eq!(self.grid, other.grid);
        match &other.storage {
            Storage::Dense(v) => {
                for (i, &c) in v.iter().enumerate() {
                    if c > 0 {
                        self.add(i, c);
                    }
                }
            }
            Storage::Sparse(m) => {
                for (&i, &c) in m {
                    self.add(i, c);
                }
            }
        }
    }

    /// The `k` largest cells, ties by smallest index.
    pub fn top(&self, k: usize) -> Vec<(CellIndex, u32)> {
        let mut cells = self.nonzero();
        cells.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        cells.truncate(k);
        cells.into_iter().map(|(i, c)| (self.grid.unlinear(i), c)).collect()
    }
}

/// Per-cell lists of the surfaces bucketed into each cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketIndex {
    lists: HashMap<usize, Vec<u32>>,
}

impl BucketIndex {
    pub fn list(&self, linear: usize) -> &[u32] {
        self.lists.get(&linear).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Output of the naive algorithm.
#[derive(Debug, Clone)]
pub struct NaiveCount {
    pub histogram: IncidenceHistogram,
    pub tally: CrossingTally,
    /// Present when requested; needed by [`exact_count_at`].
    pub index: Option<BucketIndex>,
}

fn expected_marks(n: usize, grid: &GridSpec) -> f64 {
    // Roughly three (z, kappa) cells per column per surface.
    3.0 * n as f64 * (grid.counts[0] * grid.counts[1]) as f64
}

/// Counts, for every cell, the surfaces crossing it.
pub fn naive_count(surfaces: &[SurfaceSigma], epsilon: f64, consts: &AnalyticConstants) -> Result<NaiveCount> {
    let grid = build_grid(epsilon, consts)?;
    let chunk = surfaces.len().div_ceil(rayon::current_num_threads()).max(1);
    let partials: Vec<(IncidenceHistogram, CrossingTally)> = surfaces
        .par_chunks(chunk)
        .map(|part| {
            let mut hist = IncidenceHistogram::for_expected_marks(grid, expected_marks(surfaces.len(), &grid));
            let mut tally = CrossingTally::default();
            for s in part {
                mark_surface(s, &grid, 0, &mut tally, |idx| hist.add(idx, 1));
            }
            (hist, tally)
        })
        .collect();
    let mut parts = partials.into_iter();
    let (mut histogram, mut tally) = match parts.next() {
        Some(first) => first,
        None => (IncidenceHistogram::sparse(grid), CrossingTally::default()),
    };
    for (h, t) in parts {
        histogram.merge(&h);
        tally.absorb(&t);
    }
    Ok(NaiveCount { histogram, tally, index: None })
}

/// [`naive_count`] that also keeps each cell's surface list.
pub fn naive_count_indexed(surfaces: &[SurfaceSigma], epsilon: f64, consts: &AnalyticConstants) -> Result<NaiveCount> {
    let grid = build_grid(epsilon, consts)?;
    let mut histogram = IncidenceHistogram::for_expected_marks(grid, expected_marks(surfaces.len(), &grid));
    let mut tally = CrossingTally::default();
    let mut lists: HashMap<usize, Vec<u32>> = HashMap::new();
    for (id, s) in surfaces.iter().enumerate() {
        mark_surface(s, &grid, 0, &mut tally, |idx| {
            histogram.add(idx, 1);
            lists.entry(idx).or_default().push(id as u32);
        });
    }
    Ok(NaiveCount { histogram, tally, index: Some(BucketIndex { lists }) })
}

/// Exact epsilon-incidence count at `v`, scanning only its cell's list.
pub fn exact_count_at(
    v: &Pose,
    surfaces: &[SurfaceSigma],
    epsilon: f64,
    grid: &GridSpec,
    index: &BucketIndex,
) -> usize {
    let Some(cell) = grid.cell_of(v) else { return 0 };
    index
        .list(grid.linear(cell))
        .iter()
        .filter(|&&id| matches!(frame_distance(v, &surfaces[id as usize].corr), Ok(d) if d <= epsilon))
        .count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCount {
    pub count: usize,
    /// Pairs whose frame distance is undefined.
    pub degenerate: usize,
}

/// Brute-force count of surfaces within frame distance `epsilon` of `v`.
pub fn oracle_count(v: &Pose, surfaces: &[SurfaceSigma], epsilon: f64) -> OracleCount {
    let mut out = OracleCount::default();
    for s in surfaces {
        match frame_distance(v, &s.corr) {
            Ok(d) if d <= epsilon => out.count += 1,
            Ok(_) => {}
            Err(_) => out.degenerate += 1,
        }
    }
    out
}

/// Center of the highest cell; ties go to the smallest index.
pub fn best_vertex(hist: &IncidenceHistogram) -> Result<(Pose, u32)> {
    let (cell, count) = hist.top(1).into_iter().next().ok_or(Error::EmptyHistogram)?;
    Ok((hist.grid().center(cell), count))
}
