//! Closed intervals and axis-aligned boxes with outward-rounded arithmetic.
//!
//! Every operation returns an interval that contains the exact real result for
//! all operand values. Rounding is detected with error-free transformations
//! (two-sum and fused multiply-add residuals), so an endpoint is only widened
//! by one ulp when the floating-point result was actually inexact. Results that
//! are exactly representable stay exact, which keeps dyadic grids bit-stable.

use alloc::vec::Vec;
use core::fmt;

use crate::error::EvalError;

/// Smallest magnitude at which `fma` residuals are still exact.
const RESIDUAL_FLOOR: f64 = 1e-290;

fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn mul_residual(a: f64, b: f64, p: f64) -> Option<f64> {
    if a == 0.0 || b == 0.0 {
        return Some(0.0);
    }
    if p.abs() < RESIDUAL_FLOOR {
        // underflow: residual unreliable, caller widens unconditionally
        return None;
    }
    Some(libm::fma(a, b, -p))
}

fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    match mul_residual(a, b, p) {
        Some(r) if r >= 0.0 => p,
        _ => p.next_down(),
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    match mul_residual(a, b, p) {
        Some(r) if r <= 0.0 => p,
        _ => p.next_up(),
    }
}

/// Sign of `a/b - fl(a/b)`, or `None` when it cannot be determined exactly.
fn div_residual_sign(a: f64, b: f64, q: f64) -> Option<f64> {
    if a == 0.0 {
        return Some(0.0);
    }
    if q.abs() < RESIDUAL_FLOOR || a.abs() < RESIDUAL_FLOOR {
        return None;
    }
    let r = libm::fma(-q, b, a);
    Some(if r == 0.0 { 0.0 } else { r.signum() * b.signum() })
}

fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    match div_residual_sign(a, b, q) {
        Some(s) if s >= 0.0 => q,
        _ => q.next_down(),
    }
}

fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    match div_residual_sign(a, b, q) {
        Some(s) if s <= 0.0 => q,
        _ => q.next_up(),
    }
}

fn pow_down(base: f64, n: u32) -> f64 {
    // base >= 0 here; downward rounding of each factor keeps the chain a lower bound
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_down(acc, base);
    }
    acc
}

fn pow_up(base: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_up(acc, base);
    }
    acc
}

/// A closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

// Inherent rather than `core::ops` so division can stay fallible next to its siblings.
#[allow(clippy::should_implement_trait)]
impl Interval {
    /// Builds `[lo, hi]`. Panics if the bounds are NaN or reversed.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Closed-set intersection test; touching endpoints count.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Splits into `k` equal closed pieces whose union is exactly `self`.
    pub fn split(&self, k: usize) -> Vec<Interval> {
        assert!(k >= 1);
        let mut out = Vec::with_capacity(k);
        let bound = |i: usize| {
            if i == k {
                self.hi
            } else {
                self.lo + (self.hi - self.lo) * (i as f64) / (k as f64)
            }
        };
        for i in 0..k {
            out.push(Interval::new(bound(i), bound(i + 1)));
        }
        out
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, o.lo),
            hi: add_up(self.hi, o.hi),
        }
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, -o.hi),
            hi: add_up(self.hi, -o.lo),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(self, o: Interval) -> Interval {
        let pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(mul_down(a, b));
            hi = hi.max(mul_up(a, b));
        }
        Interval { lo, hi }
    }

    /// Division; fails when the divisor contains zero.
    pub fn div(self, o: Interval) -> Result<Interval, EvalError> {
        if o.contains(0.0) {
            return Err(EvalError::DivisionByZeroInterval { lo: o.lo, hi: o.hi });
        }
        let pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(div_down(a, b));
            hi = hi.max(div_up(a, b));
        }
        Ok(Interval { lo, hi })
    }

    /// Integer power with tight handling of even exponents.
    pub fn powi(self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => self,
            _ if n % 2 == 1 => {
                // odd powers are monotone increasing
                let lo = if self.lo >= 0.0 {
                    pow_down(self.lo, n)
                } else {
                    -pow_up(-self.lo, n)
                };
                let hi = if self.hi >= 0.0 {
                    pow_up(self.hi, n)
                } else {
                    -pow_down(-self.hi, n)
                };
                Interval { lo, hi }
            }
            _ => {
                let (mag_lo, mag_hi) = if self.lo >= 0.0 {
                    (self.lo, self.hi)
                } else if self.hi <= 0.0 {
                    (-self.hi, -self.lo)
                } else {
                    (0.0, self.hi.max(-self.lo))
                };
                Interval {
                    lo: pow_down(mag_lo, n),
                    hi: pow_up(mag_hi, n),
                }
            }
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// An axis-aligned box, one closed interval per dimension.
#[derive(Clone, PartialEq, Debug)]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        Self { dims }
    }

    /// Builds a box from bound vectors, rejecting reversed or non-finite bounds.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Option<Self> {
        if lo.len() != hi.len() {
            return None;
        }
        let mut dims = Vec::with_capacity(lo.len());
        for (&l, &h) in lo.iter().zip(hi) {
            if !l.is_finite() || !h.is_finite() {
                return None;
            }
            dims.push(Interval::try_new(l, h)?);
        }
        Some(Self { dims })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            dims: alloc::vec![Interval::new(lo, hi); dim],
        }
    }

    pub fn point(p: &[f64]) -> Self {
        Self {
            dims: p.iter().map(|&v| Interval::point(v)).collect(),
        }
    }

    pub fn empty_dims() -> Self {
        Self { dims: Vec::new() }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn intervals(&self) -> &[Interval] {
        &self.dims
    }

    pub fn lo(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::hi).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.dims.iter().all(Interval::is_finite)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(i, &v)| i.contains(v))
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        other.dim() == self.dim() && self.dims.iter().zip(&other.dims).all(|(a, b)| a.contains_interval(b))
    }

    pub fn intersects(&self, other: &IntervalBox) -> bool {
        self.dims.iter().zip(&other.dims).all(|(a, b)| a.intersects(b))
    }

    /// Coordinate projection onto `indices`, in the given order.
    pub fn project(&self, indices: &[usize]) -> IntervalBox {
        IntervalBox {
            dims: indices.iter().map(|&i| self.dims[i]).collect(),
        }
    }

    /// Concatenation `self × other`.
    pub fn product(&self, other: &IntervalBox) -> IntervalBox {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        IntervalBox { dims }
    }

    /// Uniform partition into `k` pieces per dimension (row-major order).
    pub fn partition(&self, k: usize) -> Vec<IntervalBox> {
        let pieces: Vec<Vec<Interval>> = self.dims.iter().map(|i| i.split(k)).collect();
        let mut out = Vec::new();
        let mut idx = alloc::vec![0usize; self.dims.len()];
        loop {
            out.push(IntervalBox {
                dims: idx.iter().enumerate().map(|(d, &j)| pieces[d][j]).collect(),
            });
            let mut d = self.dims.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < k {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

impl From<Vec<Interval>> for IntervalBox {
    fn from(dims: Vec<Interval>) -> Self {
        Self { dims }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_results_stay_exact() {
        let x = Interval::new(-5.0, -2.5);
        let two = Interval::point(2.0);
        let u = Interval::new(-1.0, 1.0);
        let r = two.mul(x).add(u);
        assert_eq!(r, Interval::new(-11.0, -4.0));
    }

    #[test]
    fn inexact_sum_is_widened() {
        let a = Interval::point(0.1);
        let b = Interval::point(0.2);
        let r = a.add(b);
        assert!(r.lo() < r.hi());
        assert!(r.lo() <= 0.30000000000000004 && r.hi() >= 0.3);
    }

    #[test]
    fn inexact_product_encloses_true_value() {
        let a = Interval::point(1.0 / 3.0);
        let r = a.mul(Interval::point(3.0));
        assert!(r.contains(1.0));
    }

    #[test]
    fn even_power_recognized() {
        let r = Interval::new(-1.0, 2.0).powi(2);
        assert_eq!(r, Interval::new(0.0, 4.0));
        let r = Interval::new(-3.0, -2.0).powi(2);
        assert_eq!(r, Interval::new(4.0, 9.0));
    }

    #[test]
    fn odd_power_monotone() {
        let r = Interval::new(-2.0, 1.0).powi(3);
        assert_eq!(r, Interval::new(-8.0, 1.0));
    }

    #[test]
    fn division_by_zero_interval_is_reported() {
        let err = Interval::point(1.0).div(Interval::new(-1.0, 1.0));
        assert!(matches!(err, Err(EvalError::DivisionByZeroInterval { .. })));
        let ok = Interval::new(1.0, 2.0).div(Interval::new(2.0, 4.0)).unwrap();
        assert_eq!(ok, Interval::new(0.25, 1.0));
    }

    #[test]
    fn one_third_division_encloses() {
        let r = Interval::point(1.0).div(Interval::point(3.0)).unwrap();
        assert!(r.lo() < r.hi());
        assert!(r.lo() * 3.0 <= 1.0 && r.hi() * 3.0 >= 1.0);
    }

    #[test]
    fn split_covers_exactly() {
        let parts = Interval::new(-1.0, 1.0).split(3);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].lo(), -1.0);
        assert_eq!(parts[2].hi(), 1.0);
        for w in parts.windows(2) {
            assert_eq!(w[0].hi(), w[1].lo());
        }
    }

    #[test]
    fn box_partition_count_and_order() {
        let b = IntervalBox::cube(2, 0.0, 1.0);
        let parts = b.partition(2);
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[1].intervals()[0], Interval::new(0.0, 0.5));
        assert_eq!(parts[1].intervals()[1], Interval::new(0.5, 1.0));
    }

    #[test]
    fn projection() {
        let b = IntervalBox::from_bounds(&[0.0, 1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap();
        let p = b.project(&[1, 2]);
        assert_eq!(p.lo(), [1.0, 2.0]);
        assert_eq!(p.hi(), [4.0, 5.0]);
    }
}
