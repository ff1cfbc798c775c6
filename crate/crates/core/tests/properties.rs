use proptest::prelude::*;
use wavesense::features::{build_band_mask, WaveletCoeffMatrix};
use wavesense::geometry::{sample_boundary, signed_area, ParametricShape};
use wavesense::imaging::{image_by_maximum, localization_score, MaxVariant};
use wavesense::recon::shrink;
use wavesense::wavelet::{fwt2, ifwt2, OffsetGrid, Rect, ScalingFilter, WaveletGrid};

fn grid(scale: i32) -> WaveletGrid {
    WaveletGrid::for_filter(scale, Rect::square(1.0), &ScalingFilter::daubechies(2).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn shrink_is_a_contraction_toward_zero(x in -10.0..10.0f64, tau in 0.0..5.0f64) {
        let s = shrink(x, tau);
        prop_assert!(s.abs() <= x.abs());
        prop_assert!(s == 0.0 || s.signum() == x.signum());
        prop_assert_eq!(s == 0.0, x.abs() <= tau);
        prop_assert!((x - s).abs() <= tau + 1e-15);
    }

    #[test]
    fn band_mask_is_symmetric(n0 in 0u32..6, a in 0usize..100, b in 0usize..100) {
        let g = grid(-2);
        let m = build_band_mask(&g, n0);
        let (a, b) = (a % g.len(), b % g.len());
        prop_assert_eq!(m.contains_linear(&g, a, b), m.contains_linear(&g, b, a));
        prop_assert!(m.contains_linear(&g, a, a));
    }

    #[test]
    fn fwt_roundtrip(seed in any::<u64>(), p in prop::sample::select(vec![1usize, 2, 4, 6, 8]), levels in 1u32..3) {
        let filter = ScalingFilter::daubechies(p).unwrap();
        let mut state = seed | 1;
        let samples = OffsetGrid::from_fn([-3, 5], [16, 8], |_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2001) as f64 / 1000.0 - 1.0
        });
        let back = ifwt2(&fwt2(&samples, &filter, levels).unwrap(), &filter);
        for i in 0..16i64 {
            for j in 0..8i64 {
                let n = [i - 3, j + 5];
                prop_assert!((back.get(n) - samples.get(n)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn max_image_total_is_sum_of_row_maxima(vals in proptest::collection::vec((0usize..64, 0usize..64, -5.0..5.0f64), 1..80)) {
        let g = grid(-2);
        let d = g.len();
        let trip: Vec<_> = vals.iter().map(|&(r, c, v)| (r % d, c % d, v)).collect();
        let x = WaveletCoeffMatrix::from_triplets(g, trip).unwrap();
        let expect: f64 = (0..d).map(|r| x.row(r).1.iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum();
        for variant in [MaxVariant::Prose, MaxVariant::Literal] {
            prop_assert!((image_by_maximum(&x, variant).total() - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn flower_area_is_positive_and_scores_are_fractions(petals in 1u32..8, amp in 0.0..0.4f64, q in 0.01..0.5f64) {
        let mesh = sample_boundary(&ParametricShape::flower(0.5, petals, amp), 256).unwrap();
        let exact = std::f64::consts::PI * 0.25 * (1.0 + amp * amp / 2.0);
        prop_assert!((signed_area(&mesh) - exact).abs() < 1e-3 * exact);
        let g = grid(-3);
        let trip: Vec<_> = (0..g.len()).map(|i| (i, i, ((i * 37) % 11) as f64)).collect();
        let img = image_by_maximum(&WaveletCoeffMatrix::from_triplets(g, trip).unwrap(), MaxVariant::Prose);
        let s = localization_score(&img, &mesh, q, 2.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.hit_fraction));
    }
}
