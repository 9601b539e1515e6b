mod support;

use gtda::data::TimeSeries;
use gtda::s2i::{self, CurveType, Normalization, S2IParams};
use proptest::prelude::*;
use support::{agreement, supersample_oracle};

fn ts(v: Vec<f64>) -> TimeSeries {
    TimeSeries::new("s", v).unwrap()
}

fn small(scale: f64, curve_type: CurveType, normalize: Normalization, size: usize) -> S2IParams {
    S2IParams {
        scale,
        curve_type,
        normalize,
        margin_px: 4,
        ..S2IParams::default().with_size(size, size)
    }
}

#[test]
fn two_point_line_matches_oracle() {
    let params = small(1.0, CurveType::Line, Normalization::NonNormal, 32);
    let series = ts(vec![0.0, 1.0]);
    let fast = s2i::rasterize(&series, &params).unwrap();
    let pts = s2i::plot_points(&series, &params);
    let oracle = supersample_oracle(&pts, CurveType::Line, 1.0, 32, 32);
    for (i, (a, b)) in fast.pixels().iter().zip(oracle.pixels()).enumerate() {
        assert!((*a as i32 - *b as i32).abs() <= 1, "pixel {i}: {a} vs {b}");
    }
    assert!(fast.total_ink() > 0);
}

#[test]
fn rendering_is_repeatable() {
    let series = ts((0..300).map(|i| ((i * 37) % 101) as f64 * 0.3).collect());
    let params = S2IParams::default();
    let a = s2i::rasterize(&series, &params).unwrap();
    let b = s2i::rasterize(&series, &params).unwrap();
    assert_eq!(a, b);
}

fn short_series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..=16)
}

fn curve() -> impl Strategy<Value = CurveType> {
    prop_oneof![Just(CurveType::Line), Just(CurveType::Point)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn agrees_with_supersampling_oracle(
        v in short_series(),
        curve_type in curve(),
        scale_idx in 0usize..5,
        size in prop_oneof![Just(32usize), Just(48), Just(64)],
    ) {
        let scale = s2i::SCALES[scale_idx];
        let params = small(scale, curve_type, Normalization::NonNormal, size);
        let series = ts(v);
        let fast = s2i::rasterize(&series, &params).unwrap();
        let oracle = supersample_oracle(&s2i::plot_points(&series, &params), curve_type, scale, size, size);
        prop_assert!(agreement(&fast, &oracle) >= 0.99);
    }

    #[test]
    fn normalized_rendering_ignores_offsets(v in short_series(), c in -1000.0f64..1000.0, curve_type in curve()) {
        let params = small(1.5, curve_type, Normalization::Normal, 48);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert_eq!(
            s2i::rasterize(&ts(v), &params).unwrap(),
            s2i::rasterize(&ts(shifted), &params).unwrap()
        );
    }

    #[test]
    fn wider_curves_carry_more_ink(v in short_series(), curve_type in curve()) {
        let series = ts(v);
        let thin = s2i::rasterize(&series, &small(0.5, curve_type, Normalization::Normal, 48)).unwrap();
        let thick = s2i::rasterize(&series, &small(2.5, curve_type, Normalization::Normal, 48)).unwrap();
        prop_assert!(thick.total_ink() >= thin.total_ink());
    }

    #[test]
    fn points_land_in_plot_box(v in prop::collection::vec(-1e6f64..1e6, 2..600), w in 32usize..100, h in 32usize..100) {
        let params = S2IParams { margin_px: 7, ..S2IParams::default().with_size(w, h) };
        for (x, y) in s2i::plot_points(&ts(v), &params) {
            prop_assert!(x >= 7.0 && x <= (w - 7) as f64);
            prop_assert!(y >= 7.0 && y <= (h - 7) as f64);
        }
    }

    #[test]
    fn pgm_roundtrip(v in short_series(), curve_type in curve()) {
        let img = s2i::rasterize(&ts(v), &small(2.0, curve_type, Normalization::Normal, 32)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        s2i::write_pgm(&img, &path).unwrap();
        prop_assert_eq!(s2i::read_pgm(&path).unwrap(), img);
    }
}
