use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use libm::floor;
use nalgebra::{DMatrix, DVector};

use super::filter::ScalingFilter;
use crate::{Error, Result};

/// Dyadic samples of `φ`, `ψ` and `φ'` at spacing `2^{−q}` over `[0, support]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    filter: ScalingFilter,
    q: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
    dphi: Vec<f64>,
}

/// Values of `φ` at the integers `0..N−1`: the fixed point of the
/// refinement relation with `Σ φ(k) = 1`.
pub(crate) fn integer_values(filter: &ScalingFilter) -> Result<Vec<f64>> {
    let h = filter.h();
    let n = h.len();
    let tap = |i: isize| if i >= 0 && (i as usize) < n { h[i as usize] } else { 0.0 };
    // φ(N−1) = 0, so only the first N−1 values are unknown.
    let u = n - 1;
    let mut a = DMatrix::zeros(n + 1, u);
    let mut b = DVector::zeros(n + 1);
    for j in 0..n {
        for m in 0..u {
            a[(j, m)] = SQRT_2 * tap(2 * j as isize - m as isize) - if j == m { 1.0 } else { 0.0 };
        }
    }
    for m in 0..u {
        a[(n, m)] = 1.0;
    }
    b[n] = 1.0;
    let x = a.svd(true, true).solve(&b, 1e-13).map_err(|e| Error::Numeric(format!("cascade fixed point: {e}")))?;
    let mut out: Vec<f64> = x.iter().copied().collect();
    out.push(0.0);
    Ok(out)
}

impl ScalingTable {
    /// Cascade algorithm: exact integer values, then `q` dyadic refinements
    /// of the two-scale relation.
    pub fn cascade(filter: &ScalingFilter, q: u32) -> Result<Self> {
        if q > 20 {
            return Err(Error::Config(format!("refinement depth {q} exceeds 20")));
        }
        let support = filter.support();
        let res = 1usize << q;
        let len = support * res + 1;
        let h = filter.h();
        let mut phi = vec![0.0; len];
        for (k, v) in integer_values(filter)?.into_iter().enumerate() {
            phi[k * res] = v;
        }
        for level in 1..=q {
            let step = 1usize << (q - level);
            let mut i = step;
            while i < len {
                let mut s = 0.0;
                for (k, hk) in h.iter().enumerate() {
                    let idx = 2 * i as isize - (k * res) as isize;
                    if idx >= 0 && (idx as usize) < len {
                        s += hk * phi[idx as usize];
                    }
                }
                phi[i] = SQRT_2 * s;
                i += 2 * step;
            }
        }
        let g = filter.g();
        let psi = (0..len)
            .map(|i| {
                SQRT_2
                    * g.iter()
                        .enumerate()
                        .map(|(k, gk)| {
                            let idx = 2 * i as isize - (k * res) as isize;
                            if idx >= 0 && (idx as usize) < len {
                                gk * phi[idx as usize]
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
            })
            .collect();
        let rate = res as f64;
        let dphi = (0..len)
            .map(|i| {
                let left = if i > 0 { phi[i - 1] } else { 0.0 };
                let right = if i + 1 < len { phi[i + 1] } else { 0.0 };
                0.5 * (right - left) * rate
            })
            .collect();
        Ok(ScalingTable { filter: filter.clone(), q, phi, psi, dphi })
    }

    pub fn filter(&self) -> &ScalingFilter {
        &self.filter
    }

    pub fn depth(&self) -> u32 {
        self.q
    }

    pub fn step(&self) -> f64 {
        1.0 / (1u64 << self.q) as f64
    }

    pub fn support(&self) -> usize {
        self.filter.support()
    }

    /// Samples of `φ(i·2^{−q})`, `i = 0..=support·2^q`.
    pub fn phi_samples(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_samples(&self) -> &[f64] {
        &self.psi
    }

    /// `φ(k)` at the integers `0..=support`.
    pub fn phi_at_integers(&self) -> Vec<f64> {
        let res = 1usize << self.q;
        (0..=self.support()).map(|k| self.phi[k * res]).collect()
    }

    fn interp(&self, data: &[f64], x: f64) -> f64 {
        let t = x * (1u64 << self.q) as f64;
        if !(t >= 0.0) || t > (data.len() - 1) as f64 {
            return 0.0;
        }
        let i = floor(t) as usize;
        if i + 1 >= data.len() {
            return data[data.len() - 1];
        }
        let f = t - i as f64;
        data[i] + f * (data[i + 1] - data[i])
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.interp(&self.phi, x)
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.interp(&self.psi, x)
    }

    pub fn dphi(&self, x: f64) -> f64 {
        self.interp(&self.dphi, x)
    }

    /// `φ` and `φ'` in one lookup.
    pub fn phi_and_derivative(&self, x: f64) -> (f64, f64) {
        (self.phi(x), self.dphi(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::pow;

    #[test]
    fn haar_is_box_indicator() {
        let t = ScalingTable::cascade(&ScalingFilter::haar(), 8).unwrap();
        let s = t.phi_samples();
        assert_eq!(s.len(), 257);
        assert!(s[..256].iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(s[256], 0.0);
    }

    #[test]
    fn db6_integral_and_partition_of_unity() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 10).unwrap();
        let s = t.phi_samples();
        let integral: f64 = s.iter().sum::<f64>() * t.step();
        assert!((integral - 1.0).abs() < 1e-8);
        let res = 1usize << 10;
        for i in 0..res {
            let total: f64 = (0..=t.support()).filter_map(|k| s.get(i + k * res)).sum();
            assert!((total - 1.0).abs() < 1e-12, "offset {i}: {total}");
        }
    }

    #[test]
    fn db6_wavelet_moments_vanish() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 10).unwrap();
        let h = t.step();
        for m in 0..6 {
            let mom: f64 =
                t.psi_samples().iter().enumerate().map(|(i, v)| v * pow(i as f64 * h, m as f64)).sum::<f64>() * h;
            assert!(mom.abs() < 1e-7, "m = {m}: {mom}");
        }
        let sixth: f64 = t.psi_samples().iter().enumerate().map(|(i, v)| v * pow(i as f64 * h, 6.0)).sum::<f64>() * h;
        assert!(sixth.abs() > 1e-3);
    }

    #[test]
    fn orthonormal_translates() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 10).unwrap();
        let s = t.phi_samples();
        let res = 1usize << 10;
        for shift in 0..4 {
            let dot: f64 = (0..s.len() - shift * res).map(|i| s[i] * s[i + shift * res]).sum::<f64>() * t.step();
            let expect = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-6, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn centroid_is_first_moment() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 10).unwrap();
        let m1: f64 = t.phi_samples().iter().enumerate().map(|(i, v)| v * i as f64 * t.step()).sum::<f64>() * t.step();
        assert!((m1 - t.filter().centroid()).abs() < 1e-10);
    }

    #[test]
    fn derivative_integrates_back() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 12).unwrap();
        let mut acc = 0.0;
        let h = t.step();
        let mut worst: f64 = 0.0;
        for i in 0..t.phi_samples().len() - 1 {
            acc += 0.5 * (t.dphi(i as f64 * h) + t.dphi((i + 1) as f64 * h)) * h;
            worst = worst.max((acc - t.phi((i + 1) as f64 * h)).abs());
        }
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn outside_support_is_zero() {
        let t = ScalingTable::cascade(&ScalingFilter::db6(), 8).unwrap();
        assert_eq!(t.phi(-0.1), 0.0);
        assert_eq!(t.phi(11.5), 0.0);
        assert_eq!(t.psi(-3.0), 0.0);
    }
}
