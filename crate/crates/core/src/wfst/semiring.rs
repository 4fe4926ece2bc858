//! Tropical semiring: `⊕ = min`, `⊗ = +`, `0̄ = +∞`, `1̄ = 0`.

pub type Weight = f64;

pub const ZERO: Weight = f64::INFINITY;
pub const ONE: Weight = 0.0;

#[inline]
pub fn plus(a: Weight, b: Weight) -> Weight {
    a.min(b)
}

#[inline]
pub fn times(a: Weight, b: Weight) -> Weight {
    a + b
}

/// Right division `a ⊗ b⁻¹`; dividing by `0̄` is undefined and returns `0̄`.
#[inline]
pub fn divide(a: Weight, b: Weight) -> Weight {
    if b == ZERO || a == ZERO {
        ZERO
    } else {
        a - b
    }
}

pub fn approx_eq(a: Weight, b: Weight, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol
}

/// Hashable bucket for a weight; `0̄` maps to `i64::MAX`.
pub(crate) fn quantize(w: Weight, delta: f64) -> i64 {
    if w == ZERO {
        i64::MAX
    } else {
        (w / delta).round() as i64
    }
}
