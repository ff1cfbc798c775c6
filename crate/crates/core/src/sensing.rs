//! Measurement systems, the forward operator `L(X) = Gxᵀ X Gy`, noise and
//! singular-value diagnostics.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::features::{multi_indices, BandMask, WaveletCoeffMatrix};
use crate::geometry::{BoundaryMesh, Vec2};
use crate::wavelet::{green_coeffs, Rect, ScalingFilter, WaveletGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Equispaced points on a circle of radius `radius` around `center`.
    FarField { center: Vec2, radius: f64, count: usize },
    /// Cell-centred `counts[0] × counts[1]` grid over `extent`.
    NearField { extent: Rect, counts: [usize; 2], standoff: f64 },
    /// Explicit point lists.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSystem {
    pub sources: Vec<Vec2>,
    pub receivers: Vec<Vec2>,
    pub layout: Layout,
    pub coincident: bool,
}

impl MeasurementSystem {
    pub fn far_field(center: Vec2, radius: f64, count: usize) -> Result<Self> {
        if count == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("far field needs count >= 1 and radius > 0, got {count}, {radius}")));
        }
        let pts: Vec<Vec2> = (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                center + Vec2::new(radius * cos(t), radius * sin(t))
            })
            .collect();
        Ok(MeasurementSystem {
            sources: pts.clone(),
            receivers: pts,
            layout: Layout::FarField { center, radius, count },
            coincident: true,
        })
    }

    pub fn near_field(extent: Rect, counts: [usize; 2], standoff: f64) -> Result<Self> {
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::Config("near-field grid needs at least one point per axis".into()));
        }
        if !(standoff >= 0.0) {
            return Err(Error::Config(format!("standoff must be non-negative, got {standoff}")));
        }
        let (dx, dy) =
            ((extent.max.x - extent.min.x) / counts[0] as f64, (extent.max.y - extent.min.y) / counts[1] as f64);
        let mut pts = Vec::with_capacity(counts[0] * counts[1]);
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                pts.push(Vec2::new(extent.min.x + (i as f64 + 0.5) * dx, extent.min.y + (j as f64 + 0.5) * dy));
            }
        }
        Ok(MeasurementSystem {
            sources: pts.clone(),
            receivers: pts,
            layout: Layout::NearField { extent, counts, standoff },
            coincident: true,
        })
    }

    pub fn custom(sources: Vec<Vec2>, receivers: Vec<Vec2>) -> Result<Self> {
        if sources.is_empty() || receivers.is_empty() {
            return Err(Error::Config("need at least one source and one receiver".into()));
        }
        let coincident = sources == receivers;
        Ok(MeasurementSystem { sources, receivers, layout: Layout::Custom, coincident })
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    pub fn receiver_count(&self) -> usize {
        self.receivers.len()
    }

    /// Checks the layout against the inclusion: far-field radius beyond the
    /// target, near-field points at least `standoff` away from `∂D`.
    pub fn validate_against(&self, mesh: &BoundaryMesh) -> Result<()> {
        match &self.layout {
            Layout::FarField { center, radius, .. } => {
                let reach = mesh.points.iter().map(|p| (*p - *center).norm()).fold(0.0, f64::max);
                if *radius <= reach {
                    return Err(Error::Config(format!(
                        "far-field radius {radius} does not clear the target (extent {reach:.4})"
                    )));
                }
            }
            Layout::NearField { standoff, .. } => {
                for (i, p) in self.sources.iter().chain(&self.receivers).enumerate() {
                    let d = mesh.distance_to(*p);
                    if d <= *standoff {
                        return Err(Error::Placement { index: i % self.sources.len().max(1), distance: d });
                    }
                }
            }
            Layout::Custom => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simulated,
    Loaded,
}

/// `N_s × N_r` data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrMatrix {
    pub entries: DMatrix<f64>,
    pub noisy: bool,
    pub provenance: Provenance,
}

impl MsrMatrix {
    pub fn loaded(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MSR entries".into()));
        }
        Ok(MsrMatrix { entries, noisy: false, provenance: Provenance::Loaded })
    }
}

/// White Gaussian noise with `σ = σ₀‖V‖_F / √(N_s N_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma0: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn sigma(&self, v: &MsrMatrix) -> f64 {
        let n = (v.entries.nrows() * v.entries.ncols()) as f64;
        self.sigma0 * v.entries.norm() / sqrt(n)
    }
}

/// Returns `V + W` and the absolute noise level `σ`.
pub fn add_noise(v: &MsrMatrix, model: &NoiseModel) -> Result<(MsrMatrix, f64)> {
    if !(model.sigma0 >= 0.0) || !model.sigma0.is_finite() {
        return Err(Error::Config(format!("noise level must be >= 0, got {}", model.sigma0)));
    }
    let sigma = model.sigma(v);
    let mut out = v.clone();
    out.noisy = model.sigma0 > 0.0;
    if sigma == 0.0 {
        return Ok((out, 0.0));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(model.seed);
    let (ns, nr) = v.entries.shape();
    for s in 0..ns {
        for r in 0..nr {
            let w: f64 = StandardNormal.sample(&mut rng);
            out.entries[(s, r)] += sigma * w;
        }
    }
    Ok((out, sigma))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Wavelet {
        grid: WaveletGrid,
        depth: u32,
    },
    /// Monomials `x^α`, `1 ≤ |α| ≤ order`.
    Polynomial {
        order: u32,
    },
    /// `Re zᵐ, Im zᵐ`, `m = 1..order`.
    Harmonic {
        order: u32,
    },
}

/// `L(X) = Gxᵀ X Gy`; columns of `Gx` (`K × N_s`) are the coefficient
/// vectors of `Γ(· − x_s)` in the chosen basis.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    pub basis: Basis,
    gx: DMatrix<f64>,
    gy: DMatrix<f64>,
    gxt: DMatrix<f64>,
    gyt: DMatrix<f64>,
}

/// `∂^α Γ(x) = (−1)^{m−1}(m−1)!/(2π)·Re(i^{α₂} z^{−m})`, `m = |α| ≥ 1`.
pub fn green_derivative(alpha: [u32; 2], x: Vec2) -> f64 {
    let m = (alpha[0] + alpha[1]) as i32;
    let z = Complex64::new(x.x, x.y);
    let fact: f64 = (1..m).map(|k| k as f64).product();
    let sign = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let ipow = match alpha[1] % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    sign * fact / (2.0 * PI) * (ipow * z.powi(-m)).re
}

/// Taylor coefficients of `Γ(· − x_s)` at the origin on `x^α`:
/// `(−1)^{|α|}/α!·∂^αΓ(x_s)`.
pub fn taylor_coeffs(xs: Vec2, order: u32) -> Vec<f64> {
    multi_indices(order)
        .into_iter()
        .map(|a| {
            let fact: f64 = (1..=a[0]).chain(1..=a[1]).map(|k| k as f64).product();
            let sign = if (a[0] + a[1]) % 2 == 0 { 1.0 } else { -1.0 };
            sign / fact * green_derivative(a, xs)
        })
        .collect()
}

/// Coefficients of `Γ(· − x_s)` on `Re zᵐ, Im zᵐ`:
/// `−Re(w^{−m})/(2πm)` and `Im(w^{−m})/(2πm)` with `w = x_s` as complex.
pub fn harmonic_coeffs(xs: Vec2, order: u32) -> Vec<f64> {
    let w = Complex64::new(xs.x, xs.y);
    let mut out = Vec::with_capacity(2 * order as usize);
    for m in 1..=order as i32 {
        let p = w.powi(-m);
        let c = 1.0 / (2.0 * PI * m as f64);
        out.push(-p.re * c);
        out.push(p.im * c);
    }
    out
}

fn columns(points: &[Vec2], mut f: impl FnMut(Vec2) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
    let cols: Vec<Vec<f64>> = points.iter().map(|p| f(*p)).collect::<Result<_>>()?;
    let k = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(k, points.len(), |i, j| cols[j][i]))
}

impl ForwardOperator {
    pub fn from_factors(basis: Basis, gx: DMatrix<f64>, gy: DMatrix<f64>) -> Result<Self> {
        if gx.nrows() != gy.nrows() {
            return Err(Error::DimensionMismatch(format!("Gx has {} rows, Gy has {}", gx.nrows(), gy.nrows())));
        }
        let (gxt, gyt) = (gx.transpose(), gy.transpose());
        Ok(ForwardOperator { basis, gx, gy, gxt, gyt })
    }

    /// Wavelet operator; `smoothing` is the clamping radius (fine steps)
    /// for sources inside the sampling lattice.
    pub fn wavelet(
        system: &MeasurementSystem,
        grid: &WaveletGrid,
        filter: &ScalingFilter,
        depth: u32,
        smoothing: Option<f64>,
    ) -> Result<Self> {
        let f = |p: Vec2| green_coeffs(p, grid, filter, depth, smoothing);
        let gx = columns(&system.sources, f)?;
        let gy = if system.coincident { gx.clone() } else { columns(&system.receivers, f)? };
        Self::from_factors(Basis::Wavelet { grid: grid.clone(), depth }, gx, gy)
    }

    pub fn polynomial(system: &MeasurementSystem, order: u32) -> Result<Self> {
        if order == 0 || order > 6 {
            return Err(Error::Config(format!("polynomial order must be in 1..=6, got {order}")));
        }
        let f = |p: Vec2| Ok(taylor_coeffs(p, order));
        let gx = columns(&system.sources, f)?;
        let gy = columns(&system.receivers, f)?;
        Self::from_factors(Basis::Polynomial { order }, gx, gy)
    }

    pub fn harmonic(system: &MeasurementSystem, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("harmonic order must be >= 1".into()));
        }
        let f = |p: Vec2| Ok(harmonic_coeffs(p, order));
        let gx = columns(&system.sources, f)?;
        let gy = columns(&system.receivers, f)?;
        Self::from_factors(Basis::Harmonic { order }, gx, gy)
    }

    pub fn gx(&self) -> &DMatrix<f64> {
        &self.gx
    }

    pub fn gy(&self) -> &DMatrix<f64> {
        &self.gy
    }

    /// Basis dimension `K`.
    pub fn dim(&self) -> usize {
        self.gx.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gx.ncols(), self.gy.ncols())
    }

    pub fn apply_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.gx.tr_mul(x) * &self.gy
    }

    pub fn adjoint_dense(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gx * r * &self.gyt
    }

    /// `L(X)` for `X` given by values on `(row, col)` entries.
    pub fn apply_sparse(&self, entries: &[(usize, usize)], values: &[f64]) -> DMatrix<f64> {
        let nr = self.gy.ncols();
        // ztt[:, n] = Σ_{n'} X[n, n'] Gy[n', :]
        let mut ztt = DMatrix::zeros(nr, self.dim());
        let gyt = self.gyt.as_slice();
        let z = ztt.as_mut_slice();
        for (&(n, np), &v) in entries.iter().zip(values) {
            if v != 0.0 {
                let src = &gyt[np * nr..(np + 1) * nr];
                for (d, s) in z[n * nr..(n + 1) * nr].iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        (ztt * &self.gx).transpose()
    }

    /// `[Lᵀ(R)]_e = (Gx R Gyᵀ)[n, n']` on the listed entries.
    pub fn adjoint_sparse(&self, entries: &[(usize, usize)], r: &DMatrix<f64>) -> Vec<f64> {
        let nr = self.gy.ncols();
        let qt = r.tr_mul(&self.gxt);
        let (q, gyt) = (qt.as_slice(), self.gyt.as_slice());
        entries
            .iter()
            .map(|&(n, np)| {
                let a = &q[n * nr..(n + 1) * nr];
                let b = &gyt[np * nr..(np + 1) * nr];
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            })
            .collect()
    }

    pub fn apply_wavelet(&self, x: &WaveletCoeffMatrix) -> DMatrix<f64> {
        let (e, v): (Vec<(usize, usize)>, Vec<f64>) = x.iter().map(|(r, c, v)| ((r, c), v)).unzip();
        self.apply_sparse(&e, &v)
    }

    /// Column norms `‖Gx row n‖·‖Gy row n'‖` of `L` on the listed entries.
    pub fn column_norms(&self, entries: &[(usize, usize)]) -> Vec<f64> {
        let rx: Vec<f64> = (0..self.dim()).map(|n| self.gxt.column(n).norm()).collect();
        let ry: Vec<f64> = (0..self.dim()).map(|n| self.gyt.column(n).norm()).collect();
        entries.iter().map(|&(n, np)| rx[n] * ry[np]).collect()
    }

    /// Entries of a band mask in the operator's lattice order.
    pub fn mask_entries(&self, mask: &BandMask) -> Result<Vec<(usize, usize)>> {
        match &self.basis {
            Basis::Wavelet { grid, .. } => Ok(mask.entries(grid)),
            _ => Err(Error::Config("band masks apply to wavelet operators only".into())),
        }
    }
}

/// Singular values of `X ↦ Gxᵀ X Gy`: all pairwise products of the factor
/// singular values, sorted non-increasing and truncated to `count`.
pub fn singular_value_profile(op: &ForwardOperator, count: usize) -> Vec<f64> {
    let sx = op.gx.clone().svd(false, false).singular_values;
    let sy = if op.gx == op.gy { sx.clone() } else { op.gy.clone().svd(false, false).singular_values };
    let mut prods: Vec<f64> = sx.iter().flat_map(|a| sy.iter().map(move |b| a * b)).collect();
    prods.sort_by(|a, b| b.total_cmp(a));
    prods.truncate(count);
    prods
}

/// `σ_max / σ_min` of a factor (infinite when rank deficient).
pub fn condition_number(g: &DMatrix<f64>) -> f64 {
    let s = g.clone().svd(false, false).singular_values;
    let max = s.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = s.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `‖V − L(X)‖_F / ‖V‖_F`.
pub fn truncation_residual(op: &ForwardOperator, x: &WaveletCoeffMatrix, v: &MsrMatrix) -> f64 {
    let r = op.apply_wavelet(x) - &v.entries;
    r.norm() / v.entries.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_boundary, ParametricShape};
    use rand::Rng;

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() - 0.5)
    }

    fn toy() -> ForwardOperator {
        ForwardOperator::from_factors(Basis::Polynomial { order: 1 }, random_matrix(6, 5, 1), random_matrix(6, 4, 2))
            .unwrap()
    }

    #[test]
    fn single_entry_gives_rank_one() {
        let op = toy();
        let v = op.apply_sparse(&[(2, 4)], &[1.0]);
        let expect = op.gx().row(2).transpose() * op.gy().row(4);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let op = toy();
        let entries: Vec<(usize, usize)> = (0..6).flat_map(|a| (0..6).map(move |b| (a, b))).collect();
        let x = random_matrix(6, 6, 3);
        let vals: Vec<f64> = entries.iter().map(|&(a, b)| x[(a, b)]).collect();
        assert!((op.apply_sparse(&entries, &vals) - op.apply_dense(&x)).norm() < 1e-13);
        let r = random_matrix(5, 4, 4);
        let adj = op.adjoint_dense(&r);
        let sp = op.adjoint_sparse(&entries, &r);
        for (e, s) in entries.iter().zip(&sp) {
            assert!((adj[*e] - s).abs() < 1e-13);
        }
        let lhs = op.apply_dense(&x).dot(&r);
        let rhs = x.dot(&adj);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn noise_calibration_and_determinism() {
        let v = MsrMatrix::loaded(random_matrix(120, 100, 5)).unwrap();
        let (same, s0) = add_noise(&v, &NoiseModel { sigma0: 0.0, seed: 1 }).unwrap();
        assert_eq!(s0, 0.0);
        assert_eq!(same.entries, v.entries);
        let model = NoiseModel { sigma0: 1.0, seed: 42 };
        let (a, sigma) = add_noise(&v, &model).unwrap();
        let (b, _) = add_noise(&v, &model).unwrap();
        assert_eq!(a.entries, b.entries);
        let w = &a.entries - &v.entries;
        let n = w.len() as f64;
        let std = sqrt(w.iter().map(|x| x * x).sum::<f64>() / n);
        assert!((std - sigma).abs() < 0.05 * sigma);
        assert!((w.norm() / v.entries.norm() - 1.0).abs() < 0.03);
    }

    #[test]
    fn green_derivatives_match_finite_differences() {
        let x = Vec2::new(1.3, -0.7);
        let h = 1e-4;
        for a in multi_indices(3) {
            if a[0] > 0 {
                let fd = (green_derivative([a[0] - 1, a[1]], x + Vec2::new(h, 0.0))
                    - green_derivative([a[0] - 1, a[1]], x - Vec2::new(h, 0.0)))
                    / (2.0 * h);
                if a[0] - 1 + a[1] > 0 {
                    assert!((fd - green_derivative(a, x)).abs() < 1e-6, "{a:?}");
                }
            }
            if a[1] > 0 && a[0] + a[1] - 1 > 0 {
                let fd = (green_derivative([a[0], a[1] - 1], x + Vec2::new(0.0, h))
                    - green_derivative([a[0], a[1] - 1], x - Vec2::new(0.0, h)))
                    / (2.0 * h);
                assert!((fd - green_derivative(a, x)).abs() < 1e-6, "{a:?}");
            }
        }
        let g = |p: Vec2| crate::bem::green(p);
        let fd = (g(x + Vec2::new(h, 0.0)) - g(x - Vec2::new(h, 0.0))) / (2.0 * h);
        assert!((fd - green_derivative([1, 0], x)).abs() < 1e-8);
    }

    #[test]
    fn taylor_and_harmonic_expansions_agree() {
        let xs = Vec2::new(2.2, 1.1);
        let c = crate::features::harmonic_contraction(4);
        let h = nalgebra::DVector::from_vec(harmonic_coeffs(xs, 4));
        let t = nalgebra::DVector::from_vec(taylor_coeffs(xs, 4));
        assert!((c.transpose() * h - &t).norm() < 1e-14 * t.norm().max(1.0) + 1e-15);
        // Expansion reproduces Γ(x − x_s) − Γ(x_s) for small x.
        let x = Vec2::new(0.05, -0.03);
        let series: f64 = multi_indices(4)
            .iter()
            .zip(t.iter())
            .map(|(a, c)| c * libm::pow(x.x, a[0] as f64) * libm::pow(x.y, a[1] as f64))
            .sum();
        let exact = crate::bem::green(x - xs) - crate::bem::green(xs);
        assert!((series - exact).abs() < 1e-8);
    }

    #[test]
    fn product_singular_values() {
        let op = toy();
        let sv = singular_value_profile(&op, 100);
        assert_eq!(sv.len(), 20);
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        let dense = DMatrix::from_fn(20, 36, |row, col| {
            let (s, r) = (row / 4, row % 4);
            let (n, np) = (col / 6, col % 6);
            op.gx()[(n, s)] * op.gy()[(np, r)]
        });
        let direct = dense.svd(false, false).singular_values;
        let mut d: Vec<f64> = direct.iter().copied().collect();
        d.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sv.iter().zip(&d) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn layouts_and_validation() {
        let mesh = sample_boundary(&ParametricShape::flower(0.5, 5, 0.3), 256).unwrap();
        let far = MeasurementSystem::far_field(Vec2::ZERO, 3.0, 64).unwrap();
        assert!(far.sources.iter().all(|p| (p.norm() - 3.0).abs() < 1e-14));
        far.validate_against(&mesh).unwrap();
        assert!(MeasurementSystem::far_field(Vec2::ZERO, 0.3, 8).unwrap().validate_against(&mesh).is_err());
        let near = MeasurementSystem::near_field(Rect::square(1.0), [15, 15], 1e-3).unwrap();
        assert_eq!(near.source_count(), 225);
        assert!(near.coincident);
        assert!(near.sources.iter().all(|p| Rect::square(1.0).contains(*p)));
    }
}
