//! Feature matrices of `T_D`: the wavelet coefficient matrix, the polynomial
//! GPT matrix and the band mask, with their approximation diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, floor, ldexp, log2, pow, sqrt};
use nalgebra::DMatrix;

use crate::bem::{tau_bilinear, DensitySolver};
use crate::geometry::{BoundaryMesh, Vec2};
use crate::linalg::power_iteration;
use crate::wavelet::{scaling_coeffs, Rect, ScalingFilter, ScalingTable, WaveletGrid};
use crate::{Error, Result};

/// Entries below this magnitude are not stored.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Minimum number of mesh nodes per wavelet support length.
pub const NODES_PER_SUPPORT: f64 = 8.0;

/// Sparse matrix over a wavelet lattice, rows and columns in the grid's
/// linear order (compressed rows).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffMatrix {
    grid: WaveletGrid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl WaveletCoeffMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(grid: WaveletGrid, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        let dim = grid.len();
        if let Some(t) = triplets.iter().find(|t| t.0 >= dim || t.1 >= dim) {
            return Err(Error::DimensionMismatch(format!("entry ({}, {}) outside a {dim}-lattice", t.0, t.1)));
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            rows.push(r);
            cols.push(c as u32);
            vals.push(v);
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.iter().zip(&cols).zip(&vals) {
            if *v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(*c);
                keep_vals.push(*v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(WaveletCoeffMatrix { grid, row_ptr, cols: keep_cols, vals: keep_vals })
    }

    pub fn zeros(grid: WaveletGrid) -> Self {
        let dim = grid.len();
        WaveletCoeffMatrix { grid, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn grid(&self) -> &WaveletGrid {
        &self.grid
    }

    pub fn scale(&self) -> i32 {
        self.grid.scale()
    }

    /// Number of lattice functions (rows = columns).
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(c, v)| (r, *c as usize, *v))
        })
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.vals.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(c, v)| v * x[*c as usize]).sum()
            })
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (r, yr) in y.iter().enumerate().take(self.dim()) {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                out[*c as usize] += v * yr;
            }
        }
        out
    }

    /// `xᵀ X y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `‖X‖₂` by power iteration on `XᵀX`.
    pub fn spectral_norm(&self, iters: usize) -> Result<f64> {
        let sq = power_iteration(self.dim(), iters, |v| self.matvec_transpose(&self.matvec(v)))?;
        Ok(sqrt(sq))
    }

    /// Rows with at least one stored entry.
    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.dim()).filter(|r| self.row_ptr[r + 1] > self.row_ptr[*r]).collect()
    }

    /// Entry-wise product with a mask.
    pub fn masked(&self, mask: &BandMask) -> WaveletCoeffMatrix {
        let trip = self.iter().filter(|(r, c, _)| mask.contains_linear(&self.grid, *r, *c)).collect();
        WaveletCoeffMatrix::from_triplets(self.grid.clone(), trip).unwrap()
    }
}

fn node_window(u: f64, support: usize, lo: i64, hi: i64) -> (i64, i64) {
    let a = (ceil(u - support as f64) as i64).max(lo);
    let b = (floor(u) as i64).min(hi);
    (a, b)
}

/// Checks that the mesh places enough nodes along every wavelet support.
pub fn check_resolution(mesh: &BoundaryMesh, scale: i32, support: usize) -> Result<()> {
    let limit = support as f64 * ldexp(1.0, scale) / NODES_PER_SUPPORT;
    let spacing = mesh.max_spacing();
    if spacing > limit {
        return Err(Error::UnderResolved { scale, spacing, limit });
    }
    Ok(())
}

/// `X_{n,n'} = T_D(φ_{L,n}, φ_{L,n'})` for all `n, n'` in the grid.
///
/// One density solve per boundary-touching `n` (through the factored
/// solver), then an inner product against the traces of every `φ_{L,n'}`.
pub fn assemble_wavelet_matrix(
    mesh: &BoundaryMesh,
    solver: &DensitySolver,
    grid: &WaveletGrid,
    table: &ScalingTable,
) -> Result<WaveletCoeffMatrix> {
    if solver.len() != mesh.len() {
        return Err(Error::DimensionMismatch("solver and mesh sizes differ".into()));
    }
    let support = table.support();
    check_resolution(mesh, grid.scale(), support)?;
    let inv = ldexp(1.0, -grid.scale());
    let [lo0, lo1] = grid.n_min();
    let [hi0, hi1] = grid.n_max();

    // Per node: (linear index, trace, normal derivative).
    let mut offsets = Vec::with_capacity(mesh.len() + 1);
    let mut entries: Vec<(usize, f64, f64)> = Vec::new();
    let mut ax: Vec<(i64, f64, f64)> = Vec::with_capacity(support + 2);
    let mut ay: Vec<(i64, f64, f64)> = Vec::with_capacity(support + 2);
    offsets.push(0);
    for (x, nu) in mesh.points.iter().zip(&mesh.normals) {
        let (u, v) = (inv * x.x, inv * x.y);
        ax.clear();
        ay.clear();
        let (a0, b0) = node_window(u, support, lo0, hi0);
        for n in a0..=b0 {
            let (p, d) = table.phi_and_derivative(u - n as f64);
            if p != 0.0 || d != 0.0 {
                ax.push((n, p, d));
            }
        }
        let (a1, b1) = node_window(v, support, lo1, hi1);
        for n in a1..=b1 {
            let (p, d) = table.phi_and_derivative(v - n as f64);
            if p != 0.0 || d != 0.0 {
                ay.push((n, p, d));
            }
        }
        for &(n1, p1, d1) in &ax {
            for &(n2, p2, d2) in &ay {
                let lin = grid.linear([n1, n2]).expect("window inside lattice");
                let value = inv * p1 * p2;
                let dn = inv * inv * (d1 * p2 * nu.x + p1 * d2 * nu.y);
                entries.push((lin, value, dn));
            }
        }
        offsets.push(entries.len());
    }

    let mut column = vec![u32::MAX; grid.len()];
    for e in &entries {
        column[e.0] = 0;
    }
    let mut touched = Vec::new();
    for (lin, c) in column.iter_mut().enumerate() {
        if *c == 0 {
            *c = touched.len() as u32;
            touched.push(lin);
        }
    }
    let nt = touched.len();
    if nt == 0 {
        return Ok(WaveletCoeffMatrix::zeros(grid.clone()));
    }
    let m = mesh.len();
    let mut b = DMatrix::zeros(m, nt);
    let mut tw = DMatrix::zeros(m, nt);
    for i in 0..m {
        for &(lin, value, dn) in &entries[offsets[i]..offsets[i + 1]] {
            let t = column[lin] as usize;
            b[(i, t)] += dn;
            tw[(i, t)] += value * mesh.weights[i];
        }
    }
    let phi = solver.solve_many(&b)?;
    // dense[(t, t')] = Σ_i Φ_t(x_i) φ_{t'}(x_i) w_i
    let dense = phi.tr_mul(&tw);
    let mut trip = Vec::new();
    for (a, &ra) in touched.iter().enumerate() {
        for (c, &rc) in touched.iter().enumerate() {
            let v = dense[(a, c)];
            if v.abs() >= DROP_TOLERANCE {
                trip.push((ra, rc, v));
            }
        }
    }
    WaveletCoeffMatrix::from_triplets(grid.clone(), trip)
}

/// Non-adaptive band mask `M(n, n') = 1 ⇔ |n − n'|_∞ ≤ N₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMask {
    half_width: u32,
    counts: [usize; 2],
}

impl BandMask {
    pub fn half_width(&self) -> u32 {
        self.half_width
    }

    pub fn contains(&self, n: [i64; 2], np: [i64; 2]) -> bool {
        let h = self.half_width as i64;
        (n[0] - np[0]).abs() <= h && (n[1] - np[1]).abs() <= h
    }

    pub fn contains_linear(&self, grid: &WaveletGrid, r: usize, c: usize) -> bool {
        self.contains(grid.index(r), grid.index(c))
    }

    /// `‖M‖₁`, the number of admitted pairs.
    pub fn nnz(&self) -> usize {
        let per_axis = |n: usize| -> usize {
            let h = self.half_width as usize;
            (0..n).map(|i| (i + h).min(n - 1) - i.saturating_sub(h) + 1).sum()
        };
        per_axis(self.counts[0]) * per_axis(self.counts[1])
    }

    pub fn density(&self) -> f64 {
        let dim = (self.counts[0] * self.counts[1]) as f64;
        self.nnz() as f64 / (dim * dim)
    }

    /// Admitted pairs `(row, col)` in row-major order.
    pub fn entries(&self, grid: &WaveletGrid) -> Vec<(usize, usize)> {
        let h = self.half_width as i64;
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..grid.len() {
            let n = grid.index(r);
            for d0 in -h..=h {
                for d1 in -h..=h {
                    if let Some(c) = grid.linear([n[0] + d0, n[1] + d1]) {
                        out.push((r, c));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn build_band_mask(grid: &WaveletGrid, half_width: u32) -> BandMask {
    BandMask { half_width, counts: grid.counts() }
}

/// Relative Frobenius error of keeping the `keep` largest-magnitude entries.
pub fn n_term_error(x: &WaveletCoeffMatrix, keep: usize) -> f64 {
    let total = x.frobenius();
    if total == 0.0 {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|t| t.2 * t.2).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let dropped: f64 = mags.iter().skip(keep).sum();
    sqrt(dropped) / total
}

/// `‖X − M∘X‖_F / ‖X‖_F`.
pub fn mask_error(x: &WaveletCoeffMatrix, mask: &BandMask) -> f64 {
    let total = x.frobenius();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = x.iter().filter(|(r, c, _)| !mask.contains_linear(x.grid(), *r, *c)).map(|t| t.2 * t.2).sum();
    sqrt(outside) / total
}

/// Share of rows (among rows with entries) whose largest entry lies within
/// `radius` of the diagonal in the lattice ∞-metric.
pub fn localization_fraction(x: &WaveletCoeffMatrix, radius: i64) -> f64 {
    let rows = x.active_rows();
    if rows.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for &r in &rows {
        let (cols, vals) = x.row(r);
        let mut best = (0usize, -1.0);
        for (c, v) in cols.iter().zip(vals) {
            if v.abs() > best.1 {
                best = (*c as usize, v.abs());
            }
        }
        let (n, np) = (x.grid().index(r), x.grid().index(best.0));
        if (n[0] - np[0]).abs() <= radius && (n[1] - np[1]).abs() <= radius {
            hits += 1;
        }
    }
    hits as f64 / rows.len() as f64
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Slope of `log₂‖X‖₂` against `−L` from `(L, ‖X_L‖₂)` pairs.
pub fn spectral_norm_scaling(norms: &[(i32, f64)]) -> Result<f64> {
    if norms.len() < 2 {
        return Err(Error::Config("need at least two scales".into()));
    }
    let x: Vec<f64> = norms.iter().map(|(l, _)| -(*l as f64)).collect();
    let y: Vec<f64> = norms.iter().map(|(_, n)| log2(*n)).collect();
    Ok(fit_slope(&x, &y))
}

/// Smooth test function with an analytic gradient.
pub trait TestFunction {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
}

/// `exp(−|x − c|² / (2s²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub center: Vec2,
    pub width: f64,
}

impl TestFunction for Gaussian {
    fn value(&self, x: Vec2) -> f64 {
        libm::exp(-(x - self.center).norm_sq() / (2.0 * self.width * self.width))
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        (x - self.center) * (-self.value(x) / (self.width * self.width))
    }
}

/// Monomial `x₁^a x₂^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial(pub u32, pub u32);

impl TestFunction for Monomial {
    fn value(&self, x: Vec2) -> f64 {
        pow(x.x, self.0 as f64) * pow(x.y, self.1 as f64)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let (a, b) = (self.0 as f64, self.1 as f64);
        let gx = if self.0 == 0 { 0.0 } else { a * pow(x.x, a - 1.0) * pow(x.y, b) };
        let gy = if self.1 == 0 { 0.0 } else { b * pow(x.x, a) * pow(x.y, b - 1.0) };
        Vec2::new(gx, gy)
    }
}

/// `T_D(f, g)` on exact traces.
pub fn tau_exact(
    mesh: &BoundaryMesh,
    solver: &DensitySolver,
    f: &dyn TestFunction,
    g: &dyn TestFunction,
) -> Result<f64> {
    let dn: Vec<f64> = mesh.points.iter().zip(&mesh.normals).map(|(x, n)| f.gradient(*x).dot(*n)).collect();
    let tr: Vec<f64> = mesh.points.iter().map(|x| g.value(*x)).collect();
    tau_bilinear(mesh, solver, &dn, &tr)
}

/// Lattice at scale `L` holding every scaling function whose support meets
/// the mesh's bounding box.
pub fn covering_grid(mesh: &BoundaryMesh, scale: i32, filter: &ScalingFilter) -> Result<WaveletGrid> {
    let (lo, hi) = mesh.bounding_box();
    let s = ldexp(1.0, scale);
    let w = filter.support() as f64 * s;
    let mu = filter.centroid() * s;
    // Centroids range over (lo − (w − μ), hi + μ).
    let omega =
        Rect::new(Vec2::new(lo.x - (w - mu) - s, lo.y - (w - mu) - s), Vec2::new(hi.x + mu + s, hi.y + mu + s))?;
    WaveletGrid::for_filter(scale, omega, filter)
}

/// Per-scale truncation errors `|T_D(P_L f, P_L g) − T_D(f, g)|`, where the
/// projected value is `γ_fᵀ X γ_g` on a lattice covering the inclusion.
pub fn truncation_decay(
    mesh: &BoundaryMesh,
    solver: &DensitySolver,
    f: &dyn TestFunction,
    g: &dyn TestFunction,
    table: &ScalingTable,
    scales: &[i32],
    depth: impl Fn(i32) -> u32,
) -> Result<Vec<f64>> {
    let exact = tau_exact(mesh, solver, f, g)?;
    let filter = table.filter();
    let mut out = Vec::with_capacity(scales.len());
    for &l in scales {
        let grid = covering_grid(mesh, l, filter)?;
        let x = assemble_wavelet_matrix(mesh, solver, &grid, table)?;
        let gf = scaling_coeffs(|p| f.value(p), &grid, filter, depth(l))?;
        let gg = scaling_coeffs(|p| g.value(p), &grid, filter, depth(l))?;
        out.push((x.bilinear(&gf, &gg) - exact).abs());
    }
    Ok(out)
}

/// Multi-indices `α` with `1 ≤ |α| ≤ K`, by order then by `α₂`.
pub fn multi_indices(order: u32) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    for m in 1..=order {
        for j in 0..=m {
            out.push([m - j, j]);
        }
    }
    out
}

/// `X_{αβ} = T_D(x^α, x^β)` for `1 ≤ |α|, |β| ≤ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GptMatrix {
    pub order: u32,
    pub indices: Vec<[u32; 2]>,
    pub entries: DMatrix<f64>,
}

pub fn assemble_gpt(mesh: &BoundaryMesh, solver: &DensitySolver, order: u32) -> Result<GptMatrix> {
    if order == 0 || order > 6 {
        return Err(Error::Config(format!("GPT order must be in 1..=6, got {order}")));
    }
    let indices = multi_indices(order);
    let m = mesh.len();
    let k = indices.len();
    let mut b = DMatrix::zeros(m, k);
    let mut tw = DMatrix::zeros(m, k);
    for i in 0..m {
        let (x, nu, w) = (mesh.points[i], mesh.normals[i], mesh.weights[i]);
        for (a, al) in indices.iter().enumerate() {
            let mono = Monomial(al[0], al[1]);
            b[(i, a)] = mono.gradient(x).dot(nu);
            tw[(i, a)] = mono.value(x) * w;
        }
    }
    let phi = solver.solve_many(&b)?;
    Ok(GptMatrix { order, indices, entries: phi.tr_mul(&tw) })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Matrix `C` (2K × #multi-indices) with rows `Re zᵐ`, `Im zᵐ`,
/// `m = 1..K`, expressed in the monomial basis.
pub fn harmonic_contraction(order: u32) -> DMatrix<f64> {
    let indices = multi_indices(order);
    let mut c = DMatrix::zeros(2 * order as usize, indices.len());
    for (col, al) in indices.iter().enumerate() {
        let m = al[0] + al[1];
        let j = al[1];
        let coef = binomial(m, j);
        // i^j
        let (re, im) = match j % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        let row = 2 * (m as usize - 1);
        c[(row, col)] = coef * re;
        c[(row + 1, col)] = coef * im;
    }
    c
}

impl GptMatrix {
    /// Contracted GPTs `C X Cᵀ` on the harmonic basis.
    pub fn contracted(&self) -> DMatrix<f64> {
        let c = harmonic_contraction(self.order);
        &c * &self.entries * c.transpose()
    }

    pub fn index_of(&self, alpha: [u32; 2]) -> Option<usize> {
        self.indices.iter().position(|a| *a == alpha)
    }
}
