//! Boundary images from wavelet coefficient matrices and from raw MSR data.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::ceil;

use crate::features::WaveletCoeffMatrix;
use crate::geometry::{BoundaryMesh, Vec2};
use crate::sensing::{Layout, MeasurementSystem, MsrMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageMethod {
    Diagonal,
    Maximum,
    Direct,
}

/// Pixel written by imaging-by-maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxVariant {
    /// Accumulate at the maximizing column `n*`.
    #[default]
    Prose,
    /// Accumulate at the row index `n`.
    Literal,
}

/// Row-major pixel image (first index slow) with one center per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryImage {
    pub dims: [usize; 2],
    pub values: Vec<f64>,
    pub centers: Vec<Vec2>,
    /// Pixel side length, the unit of localization distances.
    pub pixel: f64,
    pub scale: Option<i32>,
    pub method: ImageMethod,
}

impl BoundaryImage {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dims[1] + j]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |a, b| a.max(*b))
    }

    /// Fewest pixels whose intensities add up to `share` of the total.
    pub fn mass_count(&self, share: f64) -> usize {
        let total = self.total();
        if total <= 0.0 {
            return 0;
        }
        let mut v = self.values.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (i, x) in v.iter().enumerate() {
            acc += x;
            if acc >= share * total {
                return i + 1;
            }
        }
        v.len()
    }

    /// Pixel indices ordered by decreasing intensity, ties by index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx
    }
}

fn wavelet_image(x: &WaveletCoeffMatrix, values: Vec<f64>, method: ImageMethod) -> BoundaryImage {
    let grid = x.grid();
    BoundaryImage {
        dims: grid.counts(),
        values,
        centers: grid.indices().map(|n| grid.center(n)).collect(),
        pixel: grid.spacing(),
        scale: Some(grid.scale()),
        method,
    }
}

/// `I(n) = |X_{n,n}|`.
pub fn image_by_diagonal(x: &WaveletCoeffMatrix) -> BoundaryImage {
    let values = x.diagonal().into_iter().map(f64::abs).collect();
    wavelet_image(x, values, ImageMethod::Diagonal)
}

/// Row-wise maximum of `|X_{n,n'}|`, accumulated at `n* = argmax` (ties to
/// the smallest column) or at `n` for the literal variant.
pub fn image_by_maximum(x: &WaveletCoeffMatrix, variant: MaxVariant) -> BoundaryImage {
    let mut values = vec![0.0; x.dim()];
    for r in 0..x.dim() {
        let (cols, vals) = x.row(r);
        let mut best: Option<(usize, f64)> = None;
        for (c, v) in cols.iter().zip(vals) {
            let a = v.abs();
            // Columns are sorted, so a strict comparison keeps the smallest index.
            if a > 0.0 && best.is_none_or(|(_, b)| a > b) {
                best = Some((*c as usize, a));
            }
        }
        if let Some((c, a)) = best {
            let at = match variant {
                MaxVariant::Prose => c,
                MaxVariant::Literal => r,
            };
            values[at] += a;
        }
    }
    wavelet_image(x, values, ImageMethod::Maximum)
}

/// `|V_ss|` placed on the coincident near-field transmitter grid.
pub fn image_direct_msr(v: &MsrMatrix, system: &MeasurementSystem) -> Result<BoundaryImage> {
    let Layout::NearField { extent, counts, .. } = &system.layout else {
        return Err(Error::UnsupportedLayout("direct imaging needs a near-field grid".into()));
    };
    if !system.coincident {
        return Err(Error::UnsupportedLayout("direct imaging needs coincident sources and receivers".into()));
    }
    let n = system.source_count();
    if v.entries.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "MSR matrix is {}x{}, system has {n} transmitters",
            v.entries.nrows(),
            v.entries.ncols()
        )));
    }
    let dx = (extent.max.x - extent.min.x) / counts[0] as f64;
    let dy = (extent.max.y - extent.min.y) / counts[1] as f64;
    Ok(BoundaryImage {
        dims: *counts,
        values: (0..n).map(|s| v.entries[(s, s)].abs()).collect(),
        centers: system.sources.clone(),
        pixel: dx.max(dy),
        scale: None,
        method: ImageMethod::Direct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationScore {
    pub hit_fraction: f64,
    pub q: f64,
    pub d: f64,
    pub selected: usize,
}

/// Share of the top `⌈q·N⌉` positive pixels whose centers lie within `d`
/// pixels of the boundary polyline.
pub fn localization_score(img: &BoundaryImage, boundary: &BoundaryMesh, q: f64, d: f64) -> Result<LocalizationScore> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::Config(format!("q must lie in (0, 0.5], got {q}")));
    }
    if !(d >= 1.0) || !d.is_finite() {
        return Err(Error::Config(format!("d must be >= 1, got {d}")));
    }
    let want = ceil(q * img.len() as f64) as usize;
    let top: Vec<usize> = img.ranked().into_iter().take(want).filter(|&i| img.values[i] > 0.0).collect();
    if top.is_empty() {
        return Ok(LocalizationScore { hit_fraction: 0.0, q, d, selected: 0 });
    }
    let limit = d * img.pixel;
    let hits = top.iter().filter(|&&i| boundary.distance_to(img.centers[i]) <= limit).count();
    Ok(LocalizationScore { hit_fraction: hits as f64 / top.len() as f64, q, d, selected: top.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_boundary, ParametricShape};
    use crate::wavelet::{Rect, ScalingFilter, WaveletGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn grid() -> WaveletGrid {
        WaveletGrid::for_filter(-4, Rect::square(1.0), &ScalingFilter::db6()).unwrap()
    }

    #[test]
    fn zero_matrix_gives_zero_images() {
        let x = WaveletCoeffMatrix::zeros(grid());
        let d = image_by_diagonal(&x);
        assert_eq!(d.dims, [32, 32]);
        assert!(d.values.iter().all(|v| *v == 0.0));
        assert!(image_by_maximum(&x, MaxVariant::Prose).values.iter().all(|v| *v == 0.0));
        let mesh = sample_boundary(&ParametricShape::disk(0.5), 256).unwrap();
        assert_eq!(localization_score(&d, &mesh, 0.1, 2.0).unwrap().hit_fraction, 0.0);
    }

    #[test]
    fn diagonal_matrix_images_agree() {
        let g = grid();
        let trip = (0..g.len()).map(|i| (i, i, (i as f64 * 0.37).sin())).collect();
        let x = WaveletCoeffMatrix::from_triplets(g, trip).unwrap();
        assert_eq!(image_by_diagonal(&x).values, image_by_maximum(&x, MaxVariant::Prose).values);
        assert_eq!(image_by_diagonal(&x).values, image_by_maximum(&x, MaxVariant::Literal).values);
    }

    #[test]
    fn maximum_picks_smallest_tied_column_and_conserves_mass() {
        let g = grid();
        let trip = vec![(5, 9, 2.0), (5, 7, -2.0), (5, 5, 1.0), (6, 3, 0.5), (6, 4, -0.25)];
        let x = WaveletCoeffMatrix::from_triplets(g, trip).unwrap();
        let img = image_by_maximum(&x, MaxVariant::Prose);
        assert_eq!(img.values[7], 2.0);
        assert_eq!(img.values[3], 0.5);
        assert_eq!(img.total(), 2.5);
        let lit = image_by_maximum(&x, MaxVariant::Literal);
        assert_eq!(lit.values[5], 2.0);
        assert_eq!(lit.values[6], 0.5);
    }

    #[test]
    fn band_indicator_scores_one() {
        let g = grid();
        let mesh = sample_boundary(&ParametricShape::disk(0.5), 512).unwrap();
        let values =
            g.indices().map(|n| if mesh.distance_to(g.center(n)) <= g.spacing() { 1.0 } else { 0.0 }).collect();
        let img = BoundaryImage {
            dims: g.counts(),
            values,
            centers: g.indices().map(|n| g.center(n)).collect(),
            pixel: g.spacing(),
            scale: Some(-4),
            method: ImageMethod::Diagonal,
        };
        let s = localization_score(&img, &mesh, 0.05, 1.0).unwrap();
        assert_eq!(s.hit_fraction, 1.0);
    }

    #[test]
    fn random_image_matches_band_area() {
        let g = grid();
        let mesh = sample_boundary(&ParametricShape::disk(0.5), 512).unwrap();
        let centers: Vec<Vec2> = g.indices().map(|n| g.center(n)).collect();
        let band =
            centers.iter().filter(|c| mesh.distance_to(**c) <= 2.0 * g.spacing()).count() as f64 / centers.len() as f64;
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let img = BoundaryImage {
                dims: g.counts(),
                values: centers.iter().map(|_| rng.random::<f64>()).collect(),
                centers: centers.clone(),
                pixel: g.spacing(),
                scale: Some(-4),
                method: ImageMethod::Maximum,
            };
            let s = localization_score(&img, &mesh, 0.1, 2.0).unwrap();
            assert!((s.hit_fraction - band).abs() < 0.1, "seed {seed}: {} vs {band}", s.hit_fraction);
        }
    }

    #[test]
    fn direct_image_needs_grid() {
        let sys = MeasurementSystem::far_field(Vec2::new(0.0, 0.0), 2.0, 16).unwrap();
        let v = MsrMatrix::loaded(nalgebra::DMatrix::zeros(16, 16)).unwrap();
        assert!(matches!(image_direct_msr(&v, &sys), Err(Error::UnsupportedLayout(_))));
        let sys = MeasurementSystem::near_field(Rect::square(1.0), [4, 5], 0.0).unwrap();
        let v = MsrMatrix::loaded(nalgebra::DMatrix::from_fn(20, 20, |i, j| if i == j { -(i as f64) } else { 9.0 }))
            .unwrap();
        let img = image_direct_msr(&v, &sys).unwrap();
        assert_eq!(img.dims, [4, 5]);
        assert_eq!(img.get(3, 4), 19.0);
    }

    #[test]
    fn score_rejects_bad_parameters() {
        let x = WaveletCoeffMatrix::zeros(grid());
        let img = image_by_diagonal(&x);
        let mesh = sample_boundary(&ParametricShape::disk(0.5), 64).unwrap();
        assert!(localization_score(&img, &mesh, 0.0, 2.0).is_err());
        assert!(localization_score(&img, &mesh, 0.6, 2.0).is_err());
        assert!(localization_score(&img, &mesh, 0.1, 0.5).is_err());
    }
}
