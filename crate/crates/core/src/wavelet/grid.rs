use alloc::format;
use alloc::vec::Vec;

use libm::{ceil, floor, ldexp};

use crate::geometry::Vec2;
use crate::{Error, Result};

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y)
            || !min.x.is_finite()
            || !max.y.is_finite()
            || !max.x.is_finite()
            || !min.y.is_finite()
        {
            return Err(Error::Config(format!("degenerate box [{:?}, {:?}]", min, max)));
        }
        Ok(Rect { min, max })
    }

    /// `[−h, h]²`.
    pub fn square(h: f64) -> Self {
        Rect { min: Vec2::new(-h, -h), max: Vec2::new(h, h) }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn dilate(&self, d: f64) -> Rect {
        Rect { min: self.min - Vec2::new(d, d), max: self.max + Vec2::new(d, d) }
    }

    pub fn lo(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.min.x
        } else {
            self.min.y
        }
    }

    pub fn hi(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.max.x
        } else {
            self.max.y
        }
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        Vec2::new(dx, dy).norm()
    }
}

/// Index lattice `Λ` of the scaling functions `φ_{L,n}` used over `Ω`.
///
/// A function belongs to `Λ` when its centroid `2^L(n + μ)` lies in `Ω`,
/// so `[−1, 1]²` carries `2^{1−L}` indices per axis (`64×64` at `L = −5`).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletGrid {
    scale: i32,
    omega: Rect,
    n_min: [i64; 2],
    counts: [usize; 2],
    support: usize,
    centroid: f64,
}

impl WaveletGrid {
    /// `support` and `centroid` describe the scaling function (see
    /// [`super::ScalingFilter`]).
    pub fn new(scale: i32, omega: Rect, support: usize, centroid: f64) -> Result<Self> {
        if !(-20..=10).contains(&scale) {
            return Err(Error::Config(format!("scale {scale} out of range")));
        }
        let inv = ldexp(1.0, -scale);
        let mut n_min = [0i64; 2];
        let mut counts = [0usize; 2];
        for axis in 0..2 {
            let lo = ceil(omega.lo(axis) * inv - centroid) as i64;
            let hi = floor(omega.hi(axis) * inv - centroid) as i64;
            if hi < lo {
                return Err(Error::Config(format!("no scaling function centered in the box at scale {scale}")));
            }
            n_min[axis] = lo;
            counts[axis] = (hi - lo + 1) as usize;
        }
        Ok(WaveletGrid { scale, omega, n_min, counts, support, centroid })
    }

    pub fn for_filter(scale: i32, omega: Rect, filter: &super::ScalingFilter) -> Result<Self> {
        Self::new(scale, omega, filter.support(), filter.centroid())
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    /// Lattice spacing `2^L`.
    pub fn spacing(&self) -> f64 {
        ldexp(1.0, self.scale)
    }

    pub fn omega(&self) -> Rect {
        self.omega
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn n_min(&self) -> [i64; 2] {
        self.n_min
    }

    pub fn n_max(&self) -> [i64; 2] {
        [self.n_min[0] + self.counts[0] as i64 - 1, self.n_min[1] + self.counts[1] as i64 - 1]
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index, `n1` slow and `n2` fast.
    pub fn linear(&self, n: [i64; 2]) -> Option<usize> {
        let i = n[0] - self.n_min[0];
        let j = n[1] - self.n_min[1];
        if i < 0 || j < 0 || i as usize >= self.counts[0] || j as usize >= self.counts[1] {
            return None;
        }
        Some(i as usize * self.counts[1] + j as usize)
    }

    pub fn index(&self, lin: usize) -> [i64; 2] {
        [self.n_min[0] + (lin / self.counts[1]) as i64, self.n_min[1] + (lin % self.counts[1]) as i64]
    }

    /// Centroid `2^L(n + μ)` of `φ_{L,n}`.
    pub fn center(&self, n: [i64; 2]) -> Vec2 {
        let s = self.spacing();
        Vec2::new(s * (n[0] as f64 + self.centroid), s * (n[1] as f64 + self.centroid))
    }

    /// Support box `[2^L n, 2^L(n + S)]`.
    pub fn support_box(&self, n: [i64; 2]) -> Rect {
        let s = self.spacing();
        let w = self.support as f64;
        Rect {
            min: Vec2::new(s * n[0] as f64, s * n[1] as f64),
            max: Vec2::new(s * (n[0] as f64 + w), s * (n[1] as f64 + w)),
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (0..self.len()).map(move |l| self.index(l))
    }
}

/// Per-axis index range `[lo, hi]` of functions at scale `j` with support
/// `[2^j n, 2^j(n + S)]` meeting the open interval `(a, b)`.
pub fn support_range(j: i32, a: f64, b: f64, support: usize) -> (i64, i64) {
    let inv = ldexp(1.0, -j);
    let lo = floor(a * inv - support as f64) as i64 + 1;
    let hi = ceil(b * inv) as i64 - 1;
    (lo, hi)
}

/// Detail index set `Λ_j^k`: all `n` whose support box meets `Ω`. The set is
/// the same for the three detail orientations since `φ` and `ψ` share their
/// support.
pub fn detail_set(j: i32, omega: &Rect, support: usize) -> Vec<[i64; 2]> {
    let (a0, b0) = support_range(j, omega.min.x, omega.max.x, support);
    let (a1, b1) = support_range(j, omega.min.y, omega.max.y, support);
    let mut out = Vec::new();
    for n1 in a0..=b0 {
        for n2 in a1..=b1 {
            out.push([n1, n2]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::ScalingFilter;

    #[test]
    fn lattice_sizes_over_unit_box() {
        let f = ScalingFilter::db6();
        let g5 = WaveletGrid::for_filter(-5, Rect::square(1.0), &f).unwrap();
        let g4 = WaveletGrid::for_filter(-4, Rect::square(1.0), &f).unwrap();
        assert_eq!(g5.counts(), [64, 64]);
        assert_eq!(g4.counts(), [32, 32]);
        for l in [-3, -4, -5, -6] {
            let a = WaveletGrid::for_filter(l, Rect::square(1.0), &f).unwrap().len() as f64;
            let b = WaveletGrid::for_filter(l - 1, Rect::square(1.0), &f).unwrap().len() as f64;
            assert!((3.5..=4.5).contains(&(b / a)));
        }
    }

    #[test]
    fn linear_index_roundtrip() {
        let g = WaveletGrid::for_filter(-3, Rect::square(1.0), &ScalingFilter::db6()).unwrap();
        for l in 0..g.len() {
            assert_eq!(g.linear(g.index(l)), Some(l));
            assert!(g.omega().contains(g.center(g.index(l))));
        }
        assert_eq!(g.linear([1000, 0]), None);
    }

    #[test]
    fn detail_set_matches_brute_force() {
        let omega = Rect::new(Vec2::new(-1.0, -0.7), Vec2::new(0.9, 1.0)).unwrap();
        for j in [-5, -4, -3] {
            let set = detail_set(j, &omega, 11);
            let s = ldexp(1.0, j);
            let mut brute = Vec::new();
            for n1 in -200i64..200 {
                for n2 in -200i64..200 {
                    let (x0, x1) = (s * n1 as f64, s * (n1 + 11) as f64);
                    let (y0, y1) = (s * n2 as f64, s * (n2 + 11) as f64);
                    if x1 > omega.min.x && x0 < omega.max.x && y1 > omega.min.y && y0 < omega.max.y {
                        brute.push([n1, n2]);
                    }
                }
            }
            assert_eq!(set, brute, "j = {j}");
        }
    }
}
