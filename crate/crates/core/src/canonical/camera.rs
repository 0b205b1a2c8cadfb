use super::{
    best_leaf, build_structure, DepBox, FaceBoxes, Octree, OctreeOptions, SurfaceFamily, SurfaceParams, MAX_ESSENTIAL,
    MAX_FREE,
};
use crate::error::Result;
use crate::geometry::{z_range, AnalyticConstants, Correspondence, Pose};
use crate::planar::{rect_ranges, XyRect};
use crate::result::{Candidate, IncidenceResult, Method};

/// Camera surfaces in the unit cube of `(x, y, z, u)` with `u = (kappa + 1) / 2`.
///
/// Essential parameters are `(w1, w2, xi, eta)`; the free parameter of `z`
/// is `w3`, and `u` carries an artificial one fixed at zero.
#[derive(Debug, Clone)]
pub struct CameraFamily {
    consts: AnalyticConstants,
    genuine: [bool; 2],
}

pub fn camera_family(consts: &AnalyticConstants) -> CameraFamily {
    CameraFamily { consts: *consts, genuine: [true, false] }
}

pub fn camera_params(c: &Correspondence) -> SurfaceParams {
    SurfaceParams { t: [c.w1, c.w2, c.xi, c.eta], f: [c.w3, 0.0] }
}

impl SurfaceFamily for CameraFamily {
    fn ambient_dim(&self) -> usize {
        4
    }

    fn surface_dim(&self) -> usize {
        2
    }

    fn essential_len(&self) -> usize {
        MAX_ESSENTIAL
    }

    fn free_genuine(&self) -> &[bool] {
        &self.genuine
    }

    fn c1(&self) -> f64 {
        self.consts.c1
    }

    fn c2(&self) -> f64 {
        self.consts.c2
    }

    fn essential_range(&self, i: usize) -> (f64, f64) {
        if i < 2 {
            (0.0, 1.0)
        } else {
            (-self.consts.image_bound, self.consts.image_bound)
        }
    }

    fn free_range(&self, j: usize) -> (f64, f64) {
        if j == 0 {
            (0.0, 1.0)
        } else {
            (0.0, 0.0)
        }
    }

    fn eval(&self, j: usize, x: &[f64], t: &[f64]) -> f64 {
        let dx = t[0] - x[0];
        let dy = t[1] - x[1];
        if j == 0 {
            -t[3] * (dx * dx + dy * dy).sqrt()
        } else {
            let den = dx + t[2] * dy;
            if den == 0.0 {
                return f64::NAN;
            }
            0.5 * ((dy - t[2] * dx) / den + 1.0)
        }
    }

    fn face_boxes(&self, t: &[f64], x_lo: &[f64], side: f64, offsets: &[f64]) -> FaceBoxes {
        let rect = XyRect::new(x_lo[0], x_lo[0] + side, x_lo[1], x_lo[1] + side);
        // u + C_u in [0, 1] bounds |kappa|; the margin covers re-rounding drift.
        let kappa_bound = 1.0 + 2.0 * offsets[1].abs() + 0.05;
        let ranges = rect_ranges(t[0], t[1], t[2], &rect, kappa_bound);
        let (rmin, _) = rect.distance_range(t[0], t[1]);
        let a = self.consts.a;
        let image_den =
            rect.corners().iter().map(|&(x, y)| ((t[0] - x) + t[2] * (t[1] - y)).abs()).fold(f64::INFINITY, f64::min);
        let den_changes_sign = {
            let vals = rect.corners().map(|(x, y)| (t[0] - x) + t[2] * (t[1] - y));
            vals.iter().any(|v| *v <= 0.0) && vals.iter().any(|v| *v >= 0.0)
        };
        let flagged = ranges.unresolved > 0 || rmin * rmin < a || image_den < a || den_changes_sign;
        let boxes = ranges
            .boxes
            .iter()
            .map(|pb| {
                let mut b: DepBox = [(0.0, 0.0); MAX_FREE];
                b[0] = z_range(0.0, t[3], pb.r.0, pb.r.1);
                b[1] = (0.5 * (pb.kappa.0 + 1.0), 0.5 * (pb.kappa.1 + 1.0));
                b
            })
            .collect();
        FaceBoxes { boxes, flagged }
    }
}

/// Runs the octree over camera surfaces and reports leaf centers as poses.
pub fn camera_solve(
    correspondences: &[Correspondence],
    epsilon: f64,
    consts: &AnalyticConstants,
    opts: &OctreeOptions,
) -> Result<(IncidenceResult, Octree)> {
    let family = camera_family(consts);
    let params: Vec<SurfaceParams> = correspondences.iter().map(camera_params).collect();
    let tree = build_structure(&params, &family, epsilon, opts)?;
    best_leaf(&tree)?;
    let mut res = IncidenceResult::new(Method::Canonical, epsilon, tree.effective_epsilon);
    let k = opts.top_k.max(1);
    res.candidates = tree
        .leaves
        .iter()
        .take(k)
        .map(|l| Candidate {
            pose: Pose::new(l.center[0], l.center[1], l.center[2], 2.0 * l.center[3] - 1.0),
            count: l.weight,
        })
        .collect();
    res.counter("leaves_reported", tree.leaves.len() as u64);
    res.counter("root_surfaces", tree.levels[0].surfaces);
    res.counter("flagged_faces", tree.tally.flagged_faces);
    res.counter("dropped_after_rounding", tree.tally.dropped_after_rounding);
    res.counter("degenerate_reanchors", tree.tally.degenerate);
    res.counter("pruned_subtrees", tree.pruned);
    res.counter("nodes_total", tree.levels.iter().map(|l| l.nodes).sum());
    res.counter("memberships_total", tree.levels.iter().map(|l| l.surfaces).sum());
    res.parameter("eps_prime", tree.lattice.eps_prime);
    res.parameter("depth", tree.depth as f64);
    res.parameter("leaf_side", 4.0 * tree.effective_epsilon);
    Ok((res, tree))
}
