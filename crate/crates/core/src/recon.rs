//! Estimation of feature matrices from MSR data: truncated-SVD least squares
//! for GPTs and masked weighted-ℓ1 minimization (FISTA) for wavelets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use nalgebra::DMatrix;

use crate::features::{BandMask, WaveletCoeffMatrix};
use crate::linalg::power_iteration;
use crate::sensing::ForwardOperator;
use crate::wavelet::WaveletGrid;
use crate::{Error, Result};

/// Relative singular-value cutoff of the least-squares estimator.
pub const TSVD_CUTOFF: f64 = 1e-10;

/// `sign(x)·max(|x| − τ, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `μ = c·σ·√(N_s N_r)·√(2·max(log‖M‖₁, 1))`; the guard keeps `μ` from
/// vanishing for masks with a single entry.
pub fn universal_mu(sigma: f64, ns: usize, nr: usize, mask_nnz: usize, c: f64) -> Result<f64> {
    if mask_nnz == 0 {
        return Err(Error::EmptyMask);
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("noise level must be >= 0, got {sigma}")));
    }
    let l = log(mask_nnz as f64).max(1.0);
    Ok(c * sigma * sqrt((ns * nr) as f64) * sqrt(2.0 * l))
}

/// Least-squares estimate of `X` in `L(X) = Gxᵀ X Gy ≈ V` with a truncated
/// SVD of the Kronecker operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub estimate: DMatrix<f64>,
    pub effective_rank: usize,
    pub full_rank: usize,
}

pub fn least_squares(op: &ForwardOperator, v: &DMatrix<f64>, cutoff: f64) -> Result<LeastSquares> {
    let (ns, nr) = op.shape();
    if v.shape() != (ns, nr) {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{}, operator expects {ns}x{nr}",
            v.nrows(),
            v.ncols()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("MSR data".into()));
    }
    let sx = op.gx().transpose().svd(true, true);
    let sy = op.gy().transpose().svd(true, true);
    let (ux, vxt, s1) = (sx.u.as_ref().unwrap(), sx.v_t.as_ref().unwrap(), &sx.singular_values);
    let (uy, vyt, s2) = (sy.u.as_ref().unwrap(), sy.v_t.as_ref().unwrap(), &sy.singular_values);
    let top = s1.iter().fold(0.0f64, |a, b| a.max(*b)) * s2.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut z = ux.tr_mul(v) * uy;
    let mut kept = 0;
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            let s = s1[i] * s2[j];
            if s > cutoff * top && s > 0.0 {
                z[(i, j)] /= s;
                kept += 1;
            } else {
                z[(i, j)] = 0.0;
            }
        }
    }
    let estimate = vxt.tr_mul(&z) * vyt;
    Ok(LeastSquares { estimate, effective_rank: kept, full_rank: op.dim() * op.dim() })
}

/// GPT estimator on the harmonic basis (`N_s > 2K` transmitters).
pub fn least_squares_gpt(op: &ForwardOperator, v: &DMatrix<f64>) -> Result<LeastSquares> {
    least_squares(op, v, TSVD_CUTOFF)
}

/// `min ½‖L(M∘X) − V‖²_F + μ‖M∘X‖_{1,w}` over the masked entries.
///
/// With the weights of [`L1Problem::masked`], `c = 1` in [`universal_mu`]
/// is the classical universal threshold on column-normalized correlations.
#[derive(Debug, Clone)]
pub struct L1Problem<'a> {
    pub op: &'a ForwardOperator,
    pub data: &'a DMatrix<f64>,
    pub entries: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl<'a> L1Problem<'a> {
    /// Problem over a band mask with weights that normalize the columns of
    /// `L` to root-mean-square one: `w_e = ‖Gx row n‖·‖Gy row n'‖ / √(N_s N_r)`.
    pub fn masked(op: &'a ForwardOperator, data: &'a DMatrix<f64>, mask: &BandMask, mu: f64) -> Result<Self> {
        let entries = op.mask_entries(mask)?;
        Self::with_entries(op, data, entries, mu)
    }

    pub fn with_entries(
        op: &'a ForwardOperator,
        data: &'a DMatrix<f64>,
        entries: Vec<(usize, usize)>,
        mu: f64,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyMask);
        }
        let (ns, nr) = op.shape();
        let scale = 1.0 / sqrt((ns * nr) as f64);
        let weights = op.column_norms(&entries).into_iter().map(|w| w * scale).collect();
        Ok(L1Problem { op, data, entries, weights, mu, max_iter: 2000, tol: 1e-6 })
    }

    fn objective(&self, resid_sq: f64, x: &[f64]) -> f64 {
        0.5 * resid_sq + self.mu * x.iter().zip(&self.weights).map(|(a, w)| w * a.abs()).sum::<f64>()
    }

    /// Gradient of the data term, `Lᵀ(L(X) − V)`, on the masked entries.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = self.op.apply_sparse(&self.entries, x) - self.data;
        self.op.adjoint_sparse(&self.entries, &r)
    }

    /// Largest violation of the optimality conditions `|g_e| ≤ μw_e` off the
    /// support and `g_e = −μw_e sign(x_e)` on it, with `g` the gradient.
    pub fn kkt_residual(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        let mut worst: f64 = 0.0;
        for ((gi, xi), w) in g.iter().zip(x).zip(&self.weights) {
            let v = if *xi == 0.0 { (gi.abs() - self.mu * w).max(0.0) } else { (gi + self.mu * w * xi.signum()).abs() };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    /// Values on the problem's entry list.
    pub values: Vec<f64>,
    pub entries: Vec<(usize, usize)>,
    pub trace: Vec<TraceRow>,
    /// Final `‖L(X̂) − V‖_F`.
    pub residual: f64,
    pub nnz: usize,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
}

impl ReconResult {
    pub fn to_matrix(&self, grid: &WaveletGrid) -> Result<WaveletCoeffMatrix> {
        let trip =
            self.entries.iter().zip(&self.values).filter(|(_, v)| **v != 0.0).map(|(&(r, c), &v)| (r, c, v)).collect();
        WaveletCoeffMatrix::from_triplets(grid.clone(), trip)
    }
}

fn combine(a: &DMatrix<f64>, b: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    a + (a - b) * beta
}

/// FISTA with monotone restart: a step that raises the objective is
/// discarded and momentum restarts from the last accepted iterate.
pub fn fista_l1(p: &L1Problem) -> Result<ReconResult> {
    let (ns, nr) = p.op.shape();
    if p.data.shape() != (ns, nr) {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{}, operator expects {ns}x{nr}",
            p.data.nrows(),
            p.data.ncols()
        )));
    }
    if p.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("MSR data".into()));
    }
    if !(p.mu >= 0.0) || !p.mu.is_finite() {
        return Err(Error::Config(format!("mu must be >= 0, got {}", p.mu)));
    }
    if p.weights.len() != p.entries.len() || p.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config("weights must be positive, one per masked entry".into()));
    }
    let n = p.entries.len();
    let norm_sq = power_iteration(n, 50, |v| {
        let lv = p.op.apply_sparse(&p.entries, v);
        p.op.adjoint_sparse(&p.entries, &lv)
    })?;
    if !(norm_sq > 0.0) || !norm_sq.is_finite() {
        return Err(Error::Numeric(format!("Lipschitz estimate {norm_sq}")));
    }
    // Head-room absorbs the power-iteration underestimate of ‖L‖².
    let lipschitz = norm_sq * 1.02;
    let mut step = 1.0 / lipschitz;

    let mut x = vec![0.0; n];
    let mut lx = DMatrix::zeros(ns, nr);
    let mut fx = p.objective(p.data.norm_squared(), &x);
    let mut y = x.clone();
    let mut ly = lx.clone();
    let mut t = 1.0f64;
    let mut trace = vec![TraceRow { iteration: 0, objective: fx, residual: p.data.norm(), nnz: 0 }];
    let mut converged = false;
    let mut restarted = true;
    let mut iterations = 0;

    while iterations < p.max_iter {
        iterations += 1;
        let r = &ly - p.data;
        let g = p.op.adjoint_sparse(&p.entries, &r);
        let z: Vec<f64> =
            y.iter().zip(&g).zip(&p.weights).map(|((yi, gi), w)| shrink(yi - step * gi, step * p.mu * w)).collect();
        let lz = p.op.apply_sparse(&p.entries, &z);
        let rz = (&lz - p.data).norm_squared();
        let fz = p.objective(rz, &z);
        if fz > fx {
            if restarted {
                // Even a plain proximal step from x rose: shrink the step.
                step *= 0.5;
            }
            y.clone_from(&x);
            ly.clone_from(&lx);
            t = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        let t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t));
        let beta = (t - 1.0) / t_next;
        y = z.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        ly = combine(&lz, &lx, beta);
        let change = (fx - fz).abs() / fx.max(f64::MIN_POSITIVE);
        x = z;
        lx = lz;
        fx = fz;
        t = t_next;
        trace.push(TraceRow {
            iteration: iterations,
            objective: fx,
            residual: sqrt(rz),
            nnz: x.iter().filter(|v| **v != 0.0).count(),
        });
        if change < p.tol {
            converged = true;
            break;
        }
    }
    let residual = (&lx - p.data).norm();
    let nnz = x.iter().filter(|v| **v != 0.0).count();
    Ok(ReconResult { values: x, entries: p.entries.clone(), trace, residual, nnz, iterations, converged, lipschitz })
}
