//! Exact ranges of the parametric surface over axis-aligned xy-rectangles.
//!
//! Over a rectangle, `z` depends on `(x, y)` only through the planar distance
//! `r` to `(w1, w2)`, and `kappa = N / D` is a ratio of two affine functions
//! whose level sets are lines through `(w1, w2)`. When `D` keeps one sign on
//! the rectangle, the extremes of `kappa` sit at the corners. When it changes
//! sign the rectangle is split; pieces provably outside `|kappa| <= bound`
//! are dropped and pieces that stay unresolved get an unbounded kappa range.

use smallvec::SmallVec;

use crate::geometry::DEGENERACY_THRESHOLD;

const MAX_SPLIT_DEPTH: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XyRect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl XyRect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, x1, y0, y1 }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [(self.x0, self.y0), (self.x1, self.y0), (self.x0, self.y1), (self.x1, self.y1)]
    }

    pub fn quadrants(&self) -> [XyRect; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            XyRect::new(self.x0, xm, self.y0, ym),
            XyRect::new(xm, self.x1, self.y0, ym),
            XyRect::new(self.x0, xm, ym, self.y1),
            XyRect::new(xm, self.x1, ym, self.y1),
        ]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Smallest and largest Euclidean distance from `(px, py)` to the rectangle.
    pub fn distance_range(&self, px: f64, py: f64) -> (f64, f64) {
        let cx = px.clamp(self.x0, self.x1) - px;
        let cy = py.clamp(self.y0, self.y1) - py;
        let fx = (px - self.x0).abs().max((px - self.x1).abs());
        let fy = (py - self.y0).abs().max((py - self.y1).abs());
        ((cx * cx + cy * cy).sqrt(), (fx * fx + fy * fy).sqrt())
    }
}

/// Planar distance range and kappa range over (part of) a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub r: (f64, f64),
    pub kappa: (f64, f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RectRanges {
    pub boxes: SmallVec<[ParamBox; 2]>,
    /// Pieces whose kappa range could not be bounded.
    pub unresolved: u32,
}

impl RectRanges {
    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Ranges of `r` and `kappa` over `rect` for the surface with planar anchor
/// `(w1, w2)` and image azimuth `xi`; pieces where `|kappa| > kappa_bound`
/// everywhere are omitted.
pub fn rect_ranges(w1: f64, w2: f64, xi: f64, rect: &XyRect, kappa_bound: f64) -> RectRanges {
    let mut out = RectRanges::default();
    // |kappa| <= K forces |D| >= r sqrt((1 + xi^2) / (1 + K^2)).
    let reach = ((1.0 + xi * xi) / (1.0 + kappa_bound * kappa_bound)).sqrt();
    resolve(w1, w2, xi, reach, rect, MAX_SPLIT_DEPTH, &mut out);
    out
}

fn resolve(w1: f64, w2: f64, xi: f64, reach: f64, rect: &XyRect, depth: u32, out: &mut RectRanges) {
    let mut d_lo = f64::INFINITY;
    let mut d_hi = f64::NEG_INFINITY;
    let mut dens = [0.0; 4];
    let mut nums = [0.0; 4];
    for (c, &(x, y)) in rect.corners().iter().enumerate() {
        let dx = w1 - x;
        let dy = w2 - y;
        dens[c] = dx + xi * dy;
        nums[c] = dy - xi * dx;
        d_lo = d_lo.min(dens[c]);
        d_hi = d_hi.max(dens[c]);
    }
    let r = rect.distance_range(w1, w2);
    if d_lo >= DEGENERACY_THRESHOLD || d_hi <= -DEGENERACY_THRESHOLD {
        let mut k_lo = f64::INFINITY;
        let mut k_hi = f64::NEG_INFINITY;
        for c in 0..4 {
            let k = nums[c] / dens[c];
            k_lo = k_lo.min(k);
            k_hi = k_hi.max(k);
        }
        out.boxes.push(ParamBox { r, kappa: (k_lo, k_hi) });
        return;
    }
    if d_lo.abs().max(d_hi.abs()) < r.0 * reach {
        return;
    }
    if depth == 0 {
        out.boxes.push(ParamBox { r, kappa: (f64::NEG_INFINITY, f64::INFINITY) });
        out.unresolved += 1;
        return;
    }
    for q in rect.quadrants() {
        resolve(w1, w2, xi, reach, &q, depth - 1, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface_parametric, Correspondence};

    fn sampled_kappa_range(c: &Correspondence, rect: &XyRect, bound: f64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let steps = 60;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = rect.x0 + (rect.x1 - rect.x0) * i as f64 / steps as f64;
                let y = rect.y0 + (rect.y1 - rect.y0) * j as f64 / steps as f64;
                if let Ok((_, k)) = surface_parametric(c, x, y) {
                    if k.abs() <= bound {
                        lo = lo.min(k);
                        hi = hi.max(k);
                    }
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    #[test]
    fn distance_range_of_inside_point_starts_at_zero() {
        let rect = XyRect::new(0.0, 1.0, 0.0, 1.0);
        let (lo, hi) = rect.distance_range(0.25, 0.5);
        assert_eq!(lo, 0.0);
        assert!((hi - (0.75f64.powi(2) + 0.25).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn far_rectangle_has_one_exact_box() {
        let c = Correspondence::new(0.9, 0.8, 0.5, 0.3, 0.1);
        let rect = XyRect::new(0.1, 0.2, 0.1, 0.2);
        let rr = rect_ranges(c.w1, c.w2, c.xi, &rect, 1.0);
        assert_eq!(rr.boxes.len(), 1);
        let (lo, hi) = sampled_kappa_range(&c, &rect, f64::INFINITY).unwrap();
        let b = rr.boxes[0];
        assert!((b.kappa.0 - lo).abs() < 1e-12 && (b.kappa.1 - hi).abs() < 1e-12);
    }

    #[test]
    fn pole_straddling_rectangle_still_encloses_in_bound_values() {
        let c = Correspondence::new(0.5, 0.5, 0.5, 0.2, 0.1);
        for rect in [XyRect::new(0.0, 1.0, 0.0, 1.0), XyRect::new(0.4, 0.6, 0.0, 0.3)] {
            let rr = rect_ranges(c.w1, c.w2, c.xi, &rect, 1.0);
            let steps = 80;
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = rect.x0 + (rect.x1 - rect.x0) * i as f64 / steps as f64;
                    let y = rect.y0 + (rect.y1 - rect.y0) * j as f64 / steps as f64;
                    let Ok((_, k)) = surface_parametric(&c, x, y) else { continue };
                    if k.abs() > 1.0 {
                        continue;
                    }
                    let hit = rr.boxes.iter().any(|b| b.kappa.0 <= k && k <= b.kappa.1);
                    assert!(hit, "kappa {k} at ({x},{y}) not enclosed");
                }
            }
        }
    }
}
