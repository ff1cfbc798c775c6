//! Small dense helpers shared by the solvers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::DMatrix;

use crate::{Error, Result};

/// Inverse through partial-pivot LU; fails on exact singularity.
pub(crate) fn invert(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    a.lu().try_inverse().ok_or_else(|| Error::Numeric(format!("singular {n}x{n} system")))
}

/// Deterministic, non-degenerate starting vector for power iterations.
pub(crate) fn start_vector(len: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut v = vec![0.0; len];
    for x in v.iter_mut() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        *x = 1.0 + (state >> 11) as f64 / (1u64 << 53) as f64;
    }
    v
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Largest eigenvalue of a symmetric positive semidefinite map given by
/// `apply`, estimated with `iters` power steps.
pub(crate) fn power_iteration(len: usize, iters: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> Result<f64> {
    if len == 0 {
        return Ok(0.0);
    }
    let mut v = start_vector(len);
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        let nw = norm(&w);
        if !nw.is_finite() {
            return Err(Error::Numeric("power iteration diverged".into()));
        }
        if nw == 0.0 {
            return Ok(0.0);
        }
        estimate = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(estimate)
}
