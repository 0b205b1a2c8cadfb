//! Closed intervals with outward-safe arithmetic for residual enclosures.

use std::ops::{Add, Mul, Neg, Sub};

/// Relative widening applied after each division to absorb rounding.
const SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn entire() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// Widens both ends by `pad`.
    pub fn inflate(&self, pad: f64) -> Self {
        Self { lo: self.lo - pad, hi: self.hi + pad }
    }

    /// Range of the affine map `c + sum g_i x_i` over the box `x_i in boxes[i]`.
    pub fn affine(c: f64, grads: &[f64], boxes: &[Interval]) -> Self {
        let mut lo = c;
        let mut hi = c;
        for (g, b) in grads.iter().zip(boxes) {
            if *g >= 0.0 {
                lo += g * b.lo;
                hi += g * b.hi;
            } else {
                lo += g * b.hi;
                hi += g * b.lo;
            }
        }
        let pad = SLACK * (lo.abs().max(hi.abs()) + c.abs());
        Self { lo: lo - pad, hi: hi + pad }
    }

    /// Exact range of `(t - a)(t - b)` for `t` in `self`.
    pub fn product_of_offsets(&self, a: f64, b: f64) -> Self {
        let f = |t: f64| (t - a) * (t - b);
        let mut lo = f(self.lo).min(f(self.hi));
        let hi = f(self.lo).max(f(self.hi));
        let vertex = 0.5 * (a + b);
        if self.contains(vertex) {
            lo = lo.min(f(vertex));
        }
        let pad = SLACK * (lo.abs().max(hi.abs()));
        Self { lo: lo - pad, hi: hi + pad }
    }

    /// `1 / self`; unbounded when the interval touches zero.
    pub fn recip(&self) -> Self {
        if self.contains_zero() {
            return Self::entire();
        }
        let lo = 1.0 / self.hi;
        let hi = 1.0 / self.lo;
        Self { lo: lo - SLACK * lo.abs(), hi: hi + SLACK * hi.abs() }
    }

    pub fn div(&self, other: &Interval) -> Self {
        *self * other.recip()
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval { lo: self.lo - o.hi, hi: self.hi - o.lo }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        if !self.is_bounded() || !o.is_bounded() {
            // 0 * inf would poison the bounds with NaN.
            if (self.lo == 0.0 && self.hi == 0.0) || (o.lo == 0.0 && o.hi == 0.0) {
                return Interval::point(0.0);
            }
            return Interval::entire();
        }
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = SLACK * lo.abs().max(hi.abs());
        Interval { lo: lo - pad, hi: hi + pad }
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, k: f64) -> Interval {
        self * Interval::point(k)
    }
}
