//! Nyström discretization of the Neumann–Poincaré operator, the transmission
//! density solve, the bilinear form `T_D` and multistatic response simulation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::log;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::{BoundaryMesh, Vec2};
use crate::linalg::invert;
use crate::sensing::{MeasurementSystem, MsrMatrix, Provenance};
use crate::{Error, Result};

/// Minimal gap between `|λ|` and 1/2 before the system counts as singular.
pub const CONTRAST_MARGIN: f64 = 1e-10;

/// Laplace fundamental solution `Γ(x) = log|x| / 2π`.
#[inline]
pub fn green(x: Vec2) -> f64 {
    log(x.norm_sq()) / (4.0 * PI)
}

/// Gradient of `Γ` at `x`.
#[inline]
pub fn green_gradient(x: Vec2) -> Vec2 {
    x * (1.0 / (2.0 * PI * x.norm_sq()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductivity {
    k: f64,
    lambda: f64,
}

impl Conductivity {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 || k == 1.0 {
            return Err(Error::InvalidConductivity(k));
        }
        Ok(Conductivity { k, lambda: (k + 1.0) / (2.0 * (k - 1.0)) })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `λ = (k+1) / (2(k−1))`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Dense `M×M` discretization of `K*_D` with quadrature weights folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct NpMatrix {
    pub entries: DMatrix<f64>,
}

impl NpMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(f)).as_slice().to_vec()
    }
}

/// Assembles `K*_D`. Off-diagonal entries are
/// `⟨x_i − x_j, ν_i⟩ / (2π|x_i − x_j|²)·w_j`; the diagonal takes the smooth
/// limit of the kernel, `κ_i/(4π)·w_i`.
pub fn assemble_np(mesh: &BoundaryMesh) -> Result<NpMatrix> {
    let m = mesh.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        let xi = mesh.points[i];
        let ni = mesh.normals[i];
        for j in 0..m {
            let v = if i == j {
                mesh.curvature[i] / (4.0 * PI)
            } else {
                let d = xi - mesh.points[j];
                let r2 = d.norm_sq();
                if r2 == 0.0 {
                    return Err(Error::DegenerateMesh(i.min(j), i.max(j)));
                }
                d.dot(ni) / (2.0 * PI * r2)
            };
            k[(i, j)] = v * mesh.weights[j];
        }
    }
    Ok(NpMatrix { entries: k })
}

/// Eigenvalues of the discretized operator sorted by real part.
pub fn np_spectrum(np: &NpMatrix) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = np.entries.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Factor-once solver for `(λI − K*)φ = rhs`.
#[derive(Debug, Clone)]
pub struct DensitySolver {
    inverse: DMatrix<f64>,
    system: DMatrix<f64>,
}

impl DensitySolver {
    pub fn new(np: &NpMatrix, cond: &Conductivity) -> Result<Self> {
        let lambda = cond.lambda();
        if lambda.abs() - 0.5 <= CONTRAST_MARGIN {
            return Err(Error::IllPosedContrast { k: cond.k(), lambda_abs: lambda.abs() });
        }
        let m = np.len();
        let system = DMatrix::identity(m, m) * lambda - &np.entries;
        let inverse = invert(system.clone())?;
        Ok(DensitySolver { inverse, system })
    }

    pub fn len(&self) -> usize {
        self.system.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.system.nrows() == 0
    }

    /// Explicit inverse of `λI − K*`.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, mesh has {} nodes",
                rhs.len(),
                self.len()
            )));
        }
        let b = DVector::from_column_slice(rhs);
        let mut phi = &self.inverse * &b;
        // One refinement step keeps the residual at round-off level.
        let r = &b - &self.system * &phi;
        phi += &self.inverse * r;
        Ok(phi.as_slice().to_vec())
    }

    /// Solves for every column of `rhs` at once.
    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, mesh has {} nodes",
                rhs.nrows(),
                self.len()
            )));
        }
        Ok(&self.inverse * rhs)
    }

    /// `‖(λI − K*)φ − rhs‖₂`.
    pub fn residual(&self, phi: &[f64], rhs: &[f64]) -> f64 {
        let r = &self.system * DVector::from_column_slice(phi) - DVector::from_column_slice(rhs);
        r.norm()
    }
}

/// Surface density on the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    pub values: Vec<f64>,
}

pub fn solve_density(np: &NpMatrix, cond: &Conductivity, rhs: &[f64]) -> Result<BoundaryDensity> {
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density right-hand side".into()));
    }
    let solver = DensitySolver::new(np, cond)?;
    Ok(BoundaryDensity { values: solver.solve(rhs)? })
}

/// `T_D(f, g) = Σ_i g_i φ_i w_i` with `(λI − K*)φ = ∂f/∂ν`.
pub fn tau_bilinear(
    mesh: &BoundaryMesh,
    solver: &DensitySolver,
    f_normal_deriv: &[f64],
    g_trace: &[f64],
) -> Result<f64> {
    if g_trace.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "trace has length {}, mesh has {} nodes",
            g_trace.len(),
            mesh.len()
        )));
    }
    let phi = solver.solve(f_normal_deriv)?;
    Ok(phi.iter().zip(g_trace).zip(&mesh.weights).map(|((p, g), w)| p * g * w).sum())
}

/// Smallest admissible distance from a transmitter to the discrete boundary:
/// the sagitta of the widest chord, below which the polyline cannot tell
/// the point from the curve.
pub fn placement_tolerance(mesh: &BoundaryMesh) -> f64 {
    let h = mesh.max_spacing();
    let kappa = mesh.curvature.iter().fold(0.0f64, |a, k| a.max(k.abs()));
    0.25 * h * h * kappa + 1e-12
}

fn check_placement(mesh: &BoundaryMesh, points: &[Vec2], offset: usize) -> Result<()> {
    let tol = placement_tolerance(mesh);
    for (i, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::NonFinite(format!("transmitter {}", i + offset)));
        }
        let d = mesh.distance_to(*p);
        if d <= tol {
            return Err(Error::Placement { index: i + offset, distance: d });
        }
    }
    Ok(())
}

/// `∂Γ(· − x_s)/∂ν` at every node, one column per source.
pub fn green_normal_derivatives(mesh: &BoundaryMesh, sources: &[Vec2]) -> DMatrix<f64> {
    DMatrix::from_fn(mesh.len(), sources.len(), |i, s| green_gradient(mesh.points[i] - sources[s]).dot(mesh.normals[i]))
}

/// `V_sr = T_D(Γ(· − x_s), Γ(· − y_r))` for explicit point lists.
pub fn msr_between(
    mesh: &BoundaryMesh,
    solver: &DensitySolver,
    sources: &[Vec2],
    receivers: &[Vec2],
) -> Result<DMatrix<f64>> {
    check_placement(mesh, sources, 0)?;
    check_placement(mesh, receivers, 0)?;
    let phi = solver.solve_many(&green_normal_derivatives(mesh, sources))?;
    let traces =
        DMatrix::from_fn(receivers.len(), mesh.len(), |r, i| green(receivers[r] - mesh.points[i]) * mesh.weights[i]);
    Ok((traces * phi).transpose())
}

/// Simulates the clean multistatic response of the inclusion.
pub fn simulate_msr(mesh: &BoundaryMesh, cond: &Conductivity, system: &MeasurementSystem) -> Result<MsrMatrix> {
    let np = assemble_np(mesh)?;
    let solver = DensitySolver::new(&np, cond)?;
    let v = msr_between(mesh, &solver, &system.sources, &system.receivers)?;
    Ok(MsrMatrix { entries: v, noisy: false, provenance: Provenance::Simulated })
}
