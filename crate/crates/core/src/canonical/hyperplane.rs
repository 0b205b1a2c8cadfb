use smallvec::smallvec;

use super::{DepBox, FaceBoxes, SurfaceFamily, SurfaceParams, MAX_ESSENTIAL, MAX_FREE};
use crate::error::{Error, Result};

/// Hyperplanes `x_d = a . x + b` in `[0,1]^d` with `|a_i| <= 1`, `|b| <= d`.
#[derive(Debug, Clone)]
pub struct HyperplaneFamily {
    d: usize,
    genuine: [bool; 1],
}

pub fn hyperplane_family(d: usize) -> Result<HyperplaneFamily> {
    if !(2..=MAX_ESSENTIAL).contains(&d) {
        return Err(Error::InvalidConfig(format!("hyperplane dimension {d} not in 2..={MAX_ESSENTIAL}")));
    }
    Ok(HyperplaneFamily { d, genuine: [true] })
}

/// Packs slopes and offset as surface parameters.
pub fn hyperplane_params(a: &[f64], b: f64) -> SurfaceParams {
    let mut t = [0.0; MAX_ESSENTIAL];
    t[..a.len()].copy_from_slice(a);
    let mut f = [0.0; MAX_FREE];
    f[0] = b;
    SurfaceParams { t, f }
}

impl HyperplaneFamily {
    /// Euclidean distance from `p` to the hyperplane.
    pub fn distance(&self, a: &[f64], b: f64, p: &[f64]) -> f64 {
        let k = self.d - 1;
        let dot: f64 = (0..k).map(|i| a[i] * p[i]).sum();
        let norm = (1.0 + a[..k].iter().map(|x| x * x).sum::<f64>()).sqrt();
        (p[k] - dot - b).abs() / norm
    }
}

impl SurfaceFamily for HyperplaneFamily {
    fn ambient_dim(&self) -> usize {
        self.d
    }

    fn surface_dim(&self) -> usize {
        self.d - 1
    }

    fn essential_len(&self) -> usize {
        self.d - 1
    }

    fn free_genuine(&self) -> &[bool] {
        &self.genuine
    }

    /// l1 bound on the slopes, which is what moving across a cube costs.
    fn c1(&self) -> f64 {
        (self.d - 1) as f64
    }

    fn c2(&self) -> f64 {
        1.0
    }

    fn essential_range(&self, _i: usize) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn free_range(&self, _j: usize) -> (f64, f64) {
        (-(self.d as f64), self.d as f64)
    }

    fn eval(&self, _j: usize, x: &[f64], t: &[f64]) -> f64 {
        (0..self.d - 1).map(|i| t[i] * x[i]).sum()
    }

    fn face_boxes(&self, t: &[f64], x_lo: &[f64], side: f64, _offsets: &[f64]) -> FaceBoxes {
        let (mut lo, mut hi) = (0.0, 0.0);
        for i in 0..self.d - 1 {
            let (p, q) = (t[i] * x_lo[i], t[i] * (x_lo[i] + side));
            lo += p.min(q);
            hi += p.max(q);
        }
        let slack = 4.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs()));
        let mut b: DepBox = [(0.0, 0.0); MAX_FREE];
        b[0] = (lo - slack, hi + slack);
        FaceBoxes { boxes: smallvec![b], flagged: false }
    }

    fn eps_prime(&self, epsilon: f64) -> f64 {
        epsilon / (1.0 / epsilon).log2()
    }
}
