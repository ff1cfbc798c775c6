//! Daubechies scaling functions, 2D tensor bases over a box, the fast
//! wavelet transform and Green-function coefficients.

mod filter;
mod fwt;
mod green;
mod grid;
mod table;

pub use filter::ScalingFilter;
pub use fwt::{analyze2, analyze2_low, fwt2, ifwt2, Fwt2, OffsetGrid};
pub use green::{
    detail_coeffs, direct_scaling_coeff, fine_coefficients, green_coeffs, lowpass_kernel, min_depth, sampling_box,
    scaling_coeffs, smoothed_green, DEFAULT_SMOOTHING,
};
pub use grid::{detail_set, support_range, Rect, WaveletGrid};
pub use table::ScalingTable;

use libm::ldexp;

use crate::geometry::Vec2;

/// `φ_{L,n}(x) = 2^{−L} φ(2^{−L}x₁ − n₁) φ(2^{−L}x₂ − n₂)`.
pub fn eval_phi2d(table: &ScalingTable, scale: i32, n: [i64; 2], x: Vec2) -> f64 {
    let inv = ldexp(1.0, -scale);
    inv * table.phi(inv * x.x - n[0] as f64) * table.phi(inv * x.y - n[1] as f64)
}

/// Value and gradient of `φ_{L,n}` at `x`.
pub fn eval_phi2d_grad(table: &ScalingTable, scale: i32, n: [i64; 2], x: Vec2) -> (f64, Vec2) {
    let inv = ldexp(1.0, -scale);
    let (a, da) = table.phi_and_derivative(inv * x.x - n[0] as f64);
    let (b, db) = table.phi_and_derivative(inv * x.y - n[1] as f64);
    (inv * a * b, Vec2::new(inv * inv * da * b, inv * inv * a * db))
}
