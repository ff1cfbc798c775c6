#![allow(clippy::excessive_precision)]

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::{Error, Result};

const DB2: [f64; 4] = [0.48296291314453414337, 0.83651630373780790558, 0.22414386804201338103, -0.12940952255126038117];

const DB4: [f64; 8] = [
    0.23037781330889650086,
    0.71484657055291564709,
    0.63088076792985890788,
    -0.027983769416859854211,
    -0.18703481171909308408,
    0.030841381835560763627,
    0.032883011666885199735,
    -0.010597401785069032105,
];

const DB6: [f64; 12] = [
    0.11154074335010946362,
    0.49462389039845308568,
    0.75113390802109535068,
    0.31525035170919762909,
    -0.22626469396543982008,
    -0.12976686756726193556,
    0.097501605587323049102,
    0.027522865530305728626,
    -0.031582039317486029565,
    0.00055384220116149613925,
    0.0047772575109455106396,
    -0.0010773010853084795649,
];

const DB8: [f64; 16] = [
    0.054415842243104009955,
    0.31287159091429997066,
    0.67563073629728980681,
    0.58535468365420671277,
    -0.015829105256349305667,
    -0.28401554296154692652,
    0.00047248457391328277036,
    0.12874742662047845886,
    -0.01736930100180754617,
    -0.044088253930794751507,
    0.013981027917398281649,
    0.0087460940474057767164,
    -0.0048703529934515743104,
    -0.0003917403733769470463,
    0.00067544940645056936637,
    -0.00011747678412476953373,
];

/// Orthonormal two-scale filter pair. `h` is the low-pass refinement mask
/// (`φ(x) = √2 Σ h_k φ(2x − k)`), `g_k = (−1)^k h_{N−1−k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFilter {
    h: Vec<f64>,
    g: Vec<f64>,
    moments: usize,
}

impl ScalingFilter {
    pub fn from_taps(h: Vec<f64>, moments: usize) -> Result<Self> {
        if h.len() < 2 || !h.len().is_multiple_of(2) {
            return Err(Error::Config(format!("filter needs an even tap count >= 2, got {}", h.len())));
        }
        let sum: f64 = h.iter().sum();
        if (sum - SQRT_2).abs() > 1e-10 {
            return Err(Error::Config(format!("filter taps sum to {sum}, expected sqrt(2)")));
        }
        let n = h.len();
        let g = (0..n).map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] }).collect();
        Ok(ScalingFilter { h, g, moments })
    }

    pub fn haar() -> Self {
        Self::from_taps(alloc::vec![SQRT_2 / 2.0; 2], 1).unwrap()
    }

    /// Daubechies filter with `p` vanishing moments, `p ∈ {1, 2, 4, 6, 8}`.
    pub fn daubechies(p: usize) -> Result<Self> {
        let taps: &[f64] = match p {
            1 => return Ok(Self::haar()),
            2 => &DB2,
            4 => &DB4,
            6 => &DB6,
            8 => &DB8,
            _ => return Err(Error::Config(format!("no Daubechies filter with {p} vanishing moments"))),
        };
        Self::from_taps(taps.to_vec(), p)
    }

    pub fn db6() -> Self {
        Self::daubechies(6).unwrap()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `φ` and `ψ` are supported on `[0, support]`.
    pub fn support(&self) -> usize {
        self.h.len() - 1
    }

    pub fn vanishing_moments(&self) -> usize {
        self.moments
    }

    /// First moment `∫ x φ(x) dx = Σ k h_k / √2`.
    pub fn centroid(&self) -> f64 {
        self.h.iter().enumerate().map(|(k, h)| k as f64 * h).sum::<f64>() / SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::pow;

    #[test]
    fn normalization_and_orthogonality() {
        for p in [1, 2, 4, 6, 8] {
            let f = ScalingFilter::daubechies(p).unwrap();
            let h = f.h();
            assert!((h.iter().sum::<f64>() - SQRT_2).abs() < 1e-12);
            for shift in 0..h.len() / 2 {
                let dot: f64 = (0..h.len() - 2 * shift).map(|k| h[k] * h[k + 2 * shift]).sum();
                let expect = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-14, "p = {p}, shift = {shift}");
            }
        }
    }

    #[test]
    fn high_pass_discrete_moments_vanish() {
        for p in [2, 4, 6, 8] {
            let f = ScalingFilter::daubechies(p).unwrap();
            for m in 0..p {
                let s: f64 = f.g().iter().enumerate().map(|(k, g)| g * pow(k as f64, m as f64)).sum();
                let scale = pow(f.len() as f64, m as f64);
                assert!(s.abs() < 1e-11 * scale, "p = {p}, m = {m}: {s}");
            }
        }
    }

    #[test]
    fn rejects_malformed_taps() {
        assert!(ScalingFilter::from_taps(alloc::vec![1.0, 1.0, 1.0], 1).is_err());
        assert!(ScalingFilter::from_taps(alloc::vec![1.0, 1.0], 1).is_err());
        assert!(ScalingFilter::daubechies(3).is_err());
    }
}
