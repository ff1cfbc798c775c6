use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::filter::ScalingFilter;
use crate::{Error, Result};

/// Dense 2D array over the integer box `origin + [0, dims)`; zero outside.
/// Storage is row-major with the second index contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetGrid {
    pub origin: [i64; 2],
    pub dims: [usize; 2],
    pub data: Vec<f64>,
}

impl OffsetGrid {
    pub fn zeros(origin: [i64; 2], dims: [usize; 2]) -> Self {
        OffsetGrid { origin, dims, data: vec![0.0; dims[0] * dims[1]] }
    }

    pub fn from_fn(origin: [i64; 2], dims: [usize; 2], mut f: impl FnMut([i64; 2]) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                data.push(f([origin[0] + i as i64, origin[1] + j as i64]));
            }
        }
        OffsetGrid { origin, dims, data }
    }

    pub fn end(&self) -> [i64; 2] {
        [self.origin[0] + self.dims[0] as i64, self.origin[1] + self.dims[1] as i64]
    }

    pub fn get(&self, n: [i64; 2]) -> f64 {
        let i = n[0] - self.origin[0];
        let j = n[1] - self.origin[1];
        if i < 0 || j < 0 || i as usize >= self.dims[0] || j as usize >= self.dims[1] {
            return 0.0;
        }
        self.data[i as usize * self.dims[1] + j as usize]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Copy of the sub-box `origin + [0, dims)`, zero-filled where it leaves `self`.
    pub fn restrict(&self, origin: [i64; 2], dims: [usize; 2]) -> OffsetGrid {
        OffsetGrid::from_fn(origin, dims, |n| self.get(n))
    }
}

fn floor_half(a: i64) -> i64 {
    a.div_euclid(2)
}

fn ceil_half(a: i64) -> i64 {
    -(-a).div_euclid(2)
}

/// Coarse index range reached by `c[n] = Σ_k f_k a[2n + k]` for input indices
/// `[o, o + len)`.
fn coarse_range(o: i64, len: usize, taps: usize) -> (i64, usize) {
    let lo = ceil_half(o - taps as i64 + 1);
    let hi = floor_half(o + len as i64 - 1);
    (lo, (hi - lo + 1) as usize)
}

/// One analysis step along `axis`: `c[n] = Σ_k f_k a[2n + k]` with zero padding.
pub(crate) fn analyze_axis(a: &OffsetGrid, taps: &[f64], axis: usize) -> OffsetGrid {
    let (lo, len) = coarse_range(a.origin[axis], a.dims[axis], taps.len());
    let mut origin = a.origin;
    let mut dims = a.dims;
    origin[axis] = lo;
    dims[axis] = len;
    let mut out = OffsetGrid::zeros(origin, dims);
    let o = a.origin[axis];
    let n_in = a.dims[axis] as i64;
    if axis == 0 {
        let w = a.dims[1];
        for n in 0..len {
            let dst = &mut out.data[n * w..(n + 1) * w];
            for (k, fk) in taps.iter().enumerate() {
                let m = 2 * (lo + n as i64) + k as i64 - o;
                if m < 0 || m >= n_in {
                    continue;
                }
                let src = &a.data[m as usize * w..(m as usize + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += fk * s;
                }
            }
        }
    } else {
        for r in 0..a.dims[0] {
            let src = &a.data[r * a.dims[1]..(r + 1) * a.dims[1]];
            let dst = &mut out.data[r * len..(r + 1) * len];
            for (n, d) in dst.iter_mut().enumerate() {
                let base = 2 * (lo + n as i64) - o;
                let mut s = 0.0;
                for (k, fk) in taps.iter().enumerate() {
                    let m = base + k as i64;
                    if m >= 0 && m < n_in {
                        s += fk * src[m as usize];
                    }
                }
                *d = s;
            }
        }
    }
    out
}

/// Adjoint of [`analyze_axis`]: `a[m] += Σ_n f_{m − 2n} c[n]`.
fn synthesize_axis(c: &OffsetGrid, taps: &[f64], axis: usize) -> OffsetGrid {
    let lo = 2 * c.origin[axis];
    let len = 2 * c.dims[axis] + taps.len() - 2;
    let mut origin = c.origin;
    let mut dims = c.dims;
    origin[axis] = lo;
    dims[axis] = len;
    let mut out = OffsetGrid::zeros(origin, dims);
    if axis == 0 {
        let w = c.dims[1];
        for n in 0..c.dims[0] {
            let src = &c.data[n * w..(n + 1) * w];
            for (k, fk) in taps.iter().enumerate() {
                let m = 2 * n + k;
                let dst = &mut out.data[m * w..(m + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += fk * s;
                }
            }
        }
    } else {
        for r in 0..c.dims[0] {
            let src = &c.data[r * c.dims[1]..(r + 1) * c.dims[1]];
            let dst = &mut out.data[r * len..(r + 1) * len];
            for (n, s) in src.iter().enumerate() {
                for (k, fk) in taps.iter().enumerate() {
                    dst[2 * n + k] += fk * s;
                }
            }
        }
    }
    out
}

fn add_into(acc: &mut OffsetGrid, other: &OffsetGrid) {
    if acc.origin == other.origin && acc.dims == other.dims {
        for (a, b) in acc.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        return;
    }
    let lo = [acc.origin[0].min(other.origin[0]), acc.origin[1].min(other.origin[1])];
    let e1 = acc.end();
    let e2 = other.end();
    let hi = [e1[0].max(e2[0]), e1[1].max(e2[1])];
    let dims = [(hi[0] - lo[0]) as usize, (hi[1] - lo[1]) as usize];
    let merged = OffsetGrid::from_fn(lo, dims, |n| acc.get(n) + other.get(n));
    *acc = merged;
}

/// Multilevel 2D decomposition; `details[0]` is the finest level. The three
/// detail orientations are `ψ⊗φ`, `φ⊗ψ` and `ψ⊗ψ` (first factor on axis 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Fwt2 {
    pub approx: OffsetGrid,
    pub details: Vec<[OffsetGrid; 3]>,
}

/// One full 2D analysis step.
pub fn analyze2(a: &OffsetGrid, filter: &ScalingFilter) -> (OffsetGrid, [OffsetGrid; 3]) {
    let lo0 = analyze_axis(a, filter.h(), 0);
    let hi0 = analyze_axis(a, filter.g(), 0);
    let ll = analyze_axis(&lo0, filter.h(), 1);
    let lh = analyze_axis(&lo0, filter.g(), 1);
    let hl = analyze_axis(&hi0, filter.h(), 1);
    let hh = analyze_axis(&hi0, filter.g(), 1);
    (ll, [hl, lh, hh])
}

/// Low-pass-only 2D analysis step.
pub fn analyze2_low(a: &OffsetGrid, filter: &ScalingFilter) -> OffsetGrid {
    analyze_axis(&analyze_axis(a, filter.h(), 1), filter.h(), 0)
}

/// Forward transform with zero padding. Sides must be divisible by `2^levels`.
pub fn fwt2(samples: &OffsetGrid, filter: &ScalingFilter, levels: u32) -> Result<Fwt2> {
    let block = 1usize << levels;
    if !samples.dims[0].is_multiple_of(block) || !samples.dims[1].is_multiple_of(block) {
        return Err(Error::DimensionMismatch(format!(
            "grid {}x{} not divisible by 2^{levels}",
            samples.dims[0], samples.dims[1]
        )));
    }
    let mut approx = samples.clone();
    let mut details = Vec::with_capacity(levels as usize);
    for _ in 0..levels {
        let (next, d) = analyze2(&approx, filter);
        details.push(d);
        approx = next;
    }
    Ok(Fwt2 { approx, details })
}

/// Inverse of [`fwt2`]; the result covers every index the synthesis reaches,
/// and agrees with the input on the input's box.
pub fn ifwt2(coeffs: &Fwt2, filter: &ScalingFilter) -> OffsetGrid {
    let (h, g) = (filter.h(), filter.g());
    let mut approx = coeffs.approx.clone();
    for d in coeffs.details.iter().rev() {
        let mut lo0 = synthesize_axis(&approx, h, 1);
        add_into(&mut lo0, &synthesize_axis(&d[1], g, 1));
        let mut hi0 = synthesize_axis(&d[0], h, 1);
        add_into(&mut hi0, &synthesize_axis(&d[2], g, 1));
        let mut next = synthesize_axis(&lo0, h, 0);
        add_into(&mut next, &synthesize_axis(&hi0, g, 0));
        approx = next;
    }
    approx
}
