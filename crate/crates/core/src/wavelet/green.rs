use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, floor, ldexp, log, sqrt};

use super::filter::ScalingFilter;
use super::fwt::{analyze2, analyze2_low, OffsetGrid};
use super::grid::{Rect, WaveletGrid};
use super::table::integer_values;
use crate::geometry::Vec2;
use crate::{Error, Result};

/// Coarsest fine-lattice depth accepted for scale `L`.
pub fn min_depth(scale: i32) -> i32 {
    3 - scale
}

/// Radius, in fine-lattice steps, inside which `Γ(· − x_s)` is replaced by
/// its ring average.
pub const DEFAULT_SMOOTHING: f64 = 3.0;

fn check_depth(scale: i32, depth: u32) -> Result<u32> {
    if depth > 16 {
        return Err(Error::Config(format!("fine lattice depth {depth} exceeds 16")));
    }
    let need = min_depth(scale);
    if (depth as i32) < need {
        return Err(Error::Resolution { depth: depth as i32, scale, required: need });
    }
    Ok((depth as i32 + scale) as u32)
}

/// Weights taking samples `f(2^{−J} i)` to the scaling coefficient at `n = 0`
/// after `levels` low-pass steps: `a_L[n] = Σ_i W[i] f(2^{−J}(2^levels·n + i))`.
///
/// The fine-level coefficients use the quadrature
/// `⟨f, φ_{−J,m}⟩ ≈ 2^{−J} Σ_k φ(k₁)φ(k₂) f(2^{−J}(m + k))`, exact for
/// polynomials of degree below the number of vanishing moments.
pub fn lowpass_kernel(filter: &ScalingFilter, depth: u32, levels: u32) -> Result<Vec<f64>> {
    let h = filter.h();
    let mut a = vec![1.0];
    for _ in 0..levels {
        let mut next = vec![0.0; 2 * a.len() + h.len() - 2];
        for (n, c) in a.iter().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                next[2 * n + k] += hk * c;
            }
        }
        a = next;
    }
    let pre: Vec<f64> = integer_values(filter)?.into_iter().map(|v| v * sqrt(ldexp(1.0, -(depth as i32)))).collect();
    let mut w = vec![0.0; a.len() + pre.len() - 1];
    for (m, am) in a.iter().enumerate() {
        for (k, pk) in pre.iter().enumerate() {
            w[m + k] += am * pk;
        }
    }
    Ok(w)
}

/// Scaling coefficients `⟨f, φ_{L,n}⟩` for every `n` of `grid`, in the grid's
/// linear order, from samples of `f` on the lattice `2^{−depth} ℤ²`.
pub fn scaling_coeffs(
    f: impl Fn(Vec2) -> f64,
    grid: &WaveletGrid,
    filter: &ScalingFilter,
    depth: u32,
) -> Result<Vec<f64>> {
    let levels = check_depth(grid.scale(), depth)?;
    let w = lowpass_kernel(filter, depth, levels)?;
    let stride = 1i64 << levels;
    let [c0, c1] = grid.counts();
    let [n0, n1] = grid.n_min();
    let base = [stride * n0, stride * n1];
    let span = [stride * (c0 as i64 - 1) + w.len() as i64, stride * (c1 as i64 - 1) + w.len() as i64];
    let step = ldexp(1.0, -(depth as i32));
    // Contract axis 1 row by row, then axis 0.
    let mut partial = vec![0.0; span[0] as usize * c1];
    let mut row = vec![0.0; span[1] as usize];
    for i in 0..span[0] as usize {
        let x = step * (base[0] + i as i64) as f64;
        for (j, r) in row.iter_mut().enumerate() {
            *r = f(Vec2::new(x, step * (base[1] + j as i64) as f64));
        }
        let out = &mut partial[i * c1..(i + 1) * c1];
        for (b, o) in out.iter_mut().enumerate() {
            let off = b * stride as usize;
            *o = w.iter().zip(&row[off..off + w.len()]).map(|(a, s)| a * s).sum();
        }
    }
    let mut coeffs = vec![0.0; c0 * c1];
    for a in 0..c0 {
        let off = a * stride as usize;
        let dst = &mut coeffs[a * c1..(a + 1) * c1];
        for (k, wk) in w.iter().enumerate() {
            let src = &partial[(off + k) * c1..(off + k + 1) * c1];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sampled function".into()));
    }
    Ok(coeffs)
}

/// Box covered by the fine samples that [`scaling_coeffs`] reads.
pub fn sampling_box(grid: &WaveletGrid, filter: &ScalingFilter) -> Rect {
    let s = grid.spacing();
    let [lo0, lo1] = grid.n_min();
    let [hi0, hi1] = grid.n_max();
    let w = filter.support() as f64;
    Rect { min: Vec2::new(s * lo0 as f64, s * lo1 as f64), max: Vec2::new(s * (hi0 as f64 + w), s * (hi1 as f64 + w)) }
}

/// `Γ(x − x_s)`, with the value clamped to `Γ(r₀)` inside the disk of radius
/// `r₀` around `x_s`. `Γ` is radial about `x_s`, so this equals the average
/// over the ring of radius `r₀`.
pub fn smoothed_green(xs: Vec2, r0: f64) -> impl Fn(Vec2) -> f64 {
    let r0sq = r0 * r0;
    let inv4pi = 1.0 / (4.0 * core::f64::consts::PI);
    move |x: Vec2| log((x - xs).norm_sq().max(r0sq)) * inv4pi
}

/// Coefficients `⟨Γ(· − x_s), φ_{L,n}⟩` over the grid. `smoothing` is the
/// clamping radius in fine-lattice steps; a source inside the sampling box
/// without smoothing is rejected.
pub fn green_coeffs(
    xs: Vec2,
    grid: &WaveletGrid,
    filter: &ScalingFilter,
    depth: u32,
    smoothing: Option<f64>,
) -> Result<Vec<f64>> {
    let step = ldexp(1.0, -(depth as i32));
    let inside = sampling_box(grid, filter).dilate(step).contains(xs);
    let r0 = match smoothing {
        Some(r) if r > 0.0 => r * step,
        _ if inside => {
            return Err(Error::Config(format!(
                "source ({:.4}, {:.4}) lies inside the sampling lattice and no smoothing radius is set",
                xs.x, xs.y
            )))
        }
        _ => 0.0,
    };
    scaling_coeffs(smoothed_green(xs, r0), grid, filter, depth)
}

/// Fine-level coefficients `a_{−J}[m]` for every `m` with `2^{−J} m ∈ region`.
pub fn fine_coefficients(
    f: impl Fn(Vec2) -> f64,
    region: &Rect,
    filter: &ScalingFilter,
    depth: u32,
) -> Result<OffsetGrid> {
    let inv = ldexp(1.0, depth as i32);
    let step = 1.0 / inv;
    let lo = [ceil(region.min.x * inv) as i64, ceil(region.min.y * inv) as i64];
    let hi = [floor(region.max.x * inv) as i64, floor(region.max.y * inv) as i64];
    if hi[0] < lo[0] || hi[1] < lo[1] {
        return Err(Error::Config("sampling region smaller than one lattice step".into()));
    }
    let dims = [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize];
    let taps = filter.len() - 1;
    let pre: Vec<f64> = integer_values(filter)?.into_iter().map(|v| v * sqrt(step)).collect();
    let mut out = OffsetGrid::zeros(lo, dims);
    let mut samples = vec![0.0; dims[1] + taps];
    let mut row = vec![0.0; dims[1]];
    // One sample row at a time: filter along the second axis, then scatter
    // into every output row it contributes to.
    for i in 0..dims[0] + taps {
        let x = step * (lo[0] + i as i64) as f64;
        for (j, s) in samples.iter_mut().enumerate() {
            *s = f(Vec2::new(x, step * (lo[1] + j as i64) as f64));
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r = pre.iter().zip(&samples[j..]).map(|(p, s)| p * s).sum();
        }
        for (k, p) in pre.iter().enumerate() {
            if i < k || i - k >= dims[0] {
                continue;
            }
            let dst = &mut out.data[(i - k) * dims[1]..(i - k + 1) * dims[1]];
            for (d, r) in dst.iter_mut().zip(&row) {
                *d += p * r;
            }
        }
    }
    Ok(out)
}

/// Detail coefficients `⟨f, ψ^k_{j,n}⟩`, `k = 1, 2, 3`, on the detail set of
/// `omega` (every `n` whose support meets it), exact up to the fine quadrature.
pub fn detail_coeffs(
    f: impl Fn(Vec2) -> f64,
    omega: &Rect,
    j: i32,
    filter: &ScalingFilter,
    depth: u32,
) -> Result<[OffsetGrid; 3]> {
    if depth as i32 + j < 1 {
        return Err(Error::Resolution { depth: depth as i32, scale: j, required: 1 - j });
    }
    let levels = (depth as i32 + j) as u32;
    let margin = (filter.support() + 1) as f64 * ldexp(1.0, j);
    let mut a = fine_coefficients(f, &omega.dilate(margin), filter, depth)?;
    for _ in 1..levels {
        a = analyze2_low(&a, filter);
    }
    let (a0, b0) = super::grid::support_range(j, omega.min.x, omega.max.x, filter.support());
    let (a1, b1) = super::grid::support_range(j, omega.min.y, omega.max.y, filter.support());
    let (origin, dims) = ([a0, a1], [(b0 - a0 + 1) as usize, (b1 - a1 + 1) as usize]);
    Ok(analyze2(&a, filter).1.map(|d| d.restrict(origin, dims)))
}

/// Reference value of `⟨f, φ_{L,n}⟩` by dyadic Riemann sum against table
/// samples; slow, used to check the transform.
pub fn direct_scaling_coeff(
    f: impl Fn(Vec2) -> f64,
    table: &super::table::ScalingTable,
    scale: i32,
    n: [i64; 2],
    sub: u32,
) -> f64 {
    let s = ldexp(1.0, scale);
    let support = table.support() as f64;
    let h = ldexp(1.0, -(sub as i32));
    let count = (support / h) as usize;
    let mut acc = 0.0;
    for a in 0..count {
        let u = a as f64 * h;
        let pa = table.phi(u);
        if pa == 0.0 {
            continue;
        }
        for b in 0..count {
            let v = b as f64 * h;
            let pb = table.phi(v);
            acc += pa * pb * f(Vec2::new(s * (u + n[0] as f64), s * (v + n[1] as f64)));
        }
    }
    // ∫ f(x) 2^{−L} φ(2^{−L}x₁ − n₁)φ(2^{−L}x₂ − n₂) dx = 2^{L} ∫ f(2^L(u + n)) Φ(u) du
    acc * h * h * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{detail_set, ScalingTable};

    fn setup(scale: i32) -> (ScalingFilter, WaveletGrid) {
        let f = ScalingFilter::db6();
        let g = WaveletGrid::for_filter(scale, Rect::square(1.0), &f).unwrap();
        (f, g)
    }

    #[test]
    fn constants_integrate_to_lattice_spacing() {
        let (f, g) = setup(-3);
        let c = scaling_coeffs(|_| 2.5, &g, &f, 8).unwrap();
        assert!(c.iter().all(|v| (v - 2.5 * 0.125).abs() < 1e-12));
        let xs = Vec2::new(3.0, 0.5);
        let a = green_coeffs(xs, &g, &f, 8, None).unwrap();
        let b = scaling_coeffs(|x| smoothed_green(xs, 0.0)(x) + 0.7, &g, &f, 8).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((v - u - 0.7 * 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomials_match_direct_quadrature() {
        let (f, g) = setup(-2);
        let table = ScalingTable::cascade(&f, 7).unwrap();
        let poly = |x: Vec2| 0.3 - x.x + 2.0 * x.x * x.y + x.y * x.y * x.y * x.x - 0.2 * libm::pow(x.y, 5.0);
        let c = scaling_coeffs(poly, &g, &f, 7).unwrap();
        for lin in [0, 3, 17, g.len() - 1] {
            let n = g.index(lin);
            let d = direct_scaling_coeff(poly, &table, -2, n, 7);
            assert!((c[lin] - d).abs() < 1e-11, "{n:?}: {} vs {}", c[lin], d);
        }
    }

    #[test]
    fn green_matches_direct_quadrature() {
        let (f, g) = setup(-3);
        let table = ScalingTable::cascade(&f, 9).unwrap();
        let xs = Vec2::new(2.0, -1.5);
        let c = green_coeffs(xs, &g, &f, 9, None).unwrap();
        for n in [[-6, -6], [0, 0], [2, -3]] {
            let lin = g.linear(n).unwrap();
            let d = direct_scaling_coeff(smoothed_green(xs, 0.0), &table, -3, n, 9);
            assert!((c[lin] - d).abs() < 1e-6, "{n:?}");
        }
    }

    #[test]
    fn depth_rule_and_source_checks() {
        let (f, g) = setup(-5);
        assert!(matches!(
            green_coeffs(Vec2::new(3.0, 0.0), &g, &f, 7, None),
            Err(Error::Resolution { required: 8, .. })
        ));
        assert!(matches!(green_coeffs(Vec2::new(0.1, 0.0), &g, &f, 8, None), Err(Error::Config(_))));
        assert!(green_coeffs(Vec2::new(0.1, 0.0), &g, &f, 8, Some(DEFAULT_SMOOTHING)).is_ok());
    }

    #[test]
    fn quintic_has_vanishing_details() {
        let f = ScalingFilter::db6();
        let omega = Rect::square(0.5);
        let d = detail_coeffs(|x| x.x * x.x * x.y - libm::pow(x.y, 5.0), &omega, -3, &f, 7).unwrap();
        for n in detail_set(-3, &omega, f.support()) {
            for band in &d {
                assert!(band.get(n).abs() < 1e-12);
            }
        }
    }
}
