//! Property checks shared by the proptest suites and the acceptance run.

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use tapersim::coupling::{mfd_1e2, overlap_efficiency, Axis};
use tapersim::field::{make_grid, Grid2D, IntensityProfile, ScalarField};
use tapersim::inscription::{single_pass_profile, InscriptionParams, MaterialModel, TaperIndexMap};

pub fn field_grid() -> Grid2D {
    make_grid(8.0, 8.0, 16, 16).unwrap()
}

pub fn profile_grid() -> Grid2D {
    make_grid(72.0, 72.0, 144, 144).unwrap()
}

/// Random complex field on [`field_grid`] with non-negligible power.
pub fn field() -> impl Strategy<Value = ScalarField> {
    let g = field_grid();
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), g.len())
        .prop_map(move |v| {
            let values = v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            ScalarField::new(g, values, 800.0).unwrap()
        })
        .prop_filter("non-zero power", |f| f.values.iter().any(|v| v.norm() > 1e-3))
}

pub fn check_overlap(a: &ScalarField, b: &ScalarField, phase: f64) -> Result<(), TestCaseError> {
    let ab = overlap_efficiency(a, b).unwrap();
    let ba = overlap_efficiency(b, a).unwrap();
    prop_assert!((0.0..=1.0).contains(&ab), "eta = {ab}");
    prop_assert!((ab - ba).abs() <= 1e-12, "asymmetric: {ab} vs {ba}");
    let rotated = overlap_efficiency(&a.scaled(Complex64::from_polar(1.0, phase)), b).unwrap();
    prop_assert!((rotated - ab).abs() <= 1e-12, "phase dependence: {rotated} vs {ab}");
    let self_eta = overlap_efficiency(a, a).unwrap();
    prop_assert!((self_eta - 1.0).abs() <= 1e-12);
    Ok(())
}

/// Elliptical Gaussian intensity on a 64 x 64 um grid.
pub fn gaussian_intensity(wx: f64, wy: f64, cx: f64, cy: f64) -> IntensityProfile {
    let g = make_grid(64.0, 64.0, 128, 128).unwrap();
    let v =
        g.coords().map(|(x, y)| (-2.0 * ((x - cx).powi(2) / (wx * wx) + (y - cy).powi(2) / (wy * wy))).exp()).collect();
    IntensityProfile::new(g, v).unwrap()
}

pub fn check_mfd_scale(wx: f64, wy: f64, cx: f64, cy: f64, scale: f64) -> Result<(), TestCaseError> {
    let base = gaussian_intensity(wx, wy, cx, cy);
    let scaled = base.scaled(scale);
    for axis in [Axis::H, Axis::V] {
        let a = mfd_1e2(&base, axis).unwrap();
        let b = mfd_1e2(&scaled, axis).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a, "{axis:?}: {a} vs {b} at scale {scale}");
    }
    Ok(())
}

/// The 1/e^2 contour of the facet profile matches the untapered guide.
pub fn check_footprint(p0: f64, pa_over_p0: f64, reps: u32) -> Result<(), TestCaseError> {
    let g = profile_grid();
    let model = MaterialModel::default();
    let params = InscriptionParams { p0, pa_over_p0, reps, ..Default::default() };
    let map = TaperIndexMap::taper_only(params, model, g).unwrap();
    let (bx, by) = map.regular_profile().footprint_widths().unwrap();
    let (fx, fy) = map.facet_profile().unwrap().footprint_widths().unwrap();
    prop_assert!((bx - fx).abs() <= g.dx, "H footprint {bx} -> {fx}");
    prop_assert!((by - fy).abs() <= g.dy, "V footprint {by} -> {fy}");
    Ok(())
}

/// Peak contrast rises with reruns, never falls, and has settled by 16.
pub fn check_saturation(pa_over_p0: f64) -> Result<(), TestCaseError> {
    let g = profile_grid();
    let model = MaterialModel::default();
    let peaks: Vec<f64> = (0..=16)
        .map(|n| {
            let params = InscriptionParams { pa_over_p0, reps: n, ..Default::default() };
            TaperIndexMap::taper_only(params, model, g).unwrap().facet_profile().unwrap().max_dn()
        })
        .collect();
    prop_assert!(peaks[1] > peaks[0]);
    for w in peaks.windows(2) {
        prop_assert!(w[1] >= w[0], "decreasing: {peaks:?}");
    }
    prop_assert!(peaks[16] <= model.rerun_ceiling(pa_over_p0 * 1.5) * (1.0 + 1e-12));
    prop_assert!(peaks[16] - peaks[15] < 0.01 * model.dn_max, "{} -> {}", peaks[15], peaks[16]);
    Ok(())
}

pub fn check_monotone_in_power(p1: f64, dp: f64) -> Result<(), TestCaseError> {
    let g = profile_grid();
    let model = MaterialModel::default();
    let a = single_pass_profile(p1, &model, &g).unwrap();
    let b = single_pass_profile(p1 + dp, &model, &g).unwrap();
    prop_assert!(b.max_dn() > a.max_dn());
    let (ax, ay) = a.footprint_widths().unwrap();
    let (bx, by) = b.footprint_widths().unwrap();
    prop_assert!(bx > ax && by > ay, "({ax}, {ay}) -> ({bx}, {by})");
    Ok(())
}

/// Runs `test` over `cases` inputs drawn from a fixed-seed generator.
pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn overlap_cases() -> impl Strategy<Value = (ScalarField, ScalarField, f64)> {
    (field(), field(), 0.0..std::f64::consts::TAU)
}

pub fn mfd_cases() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (1.0f64..6.0, 1.0f64..6.0, -5.0f64..5.0, -5.0f64..5.0, -12.0f64..12.0)
        .prop_map(|(a, b, c, d, e)| (a, b, c, d, 10f64.powf(e)))
}

pub fn footprint_cases() -> impl Strategy<Value = (f64, f64, u32)> {
    (1.05f64..2.0, 0.667f64..1.0, 1u32..=16)
}

pub fn saturation_cases() -> impl Strategy<Value = f64> {
    0.667f64..1.0
}

pub fn monotone_cases() -> impl Strategy<Value = (f64, f64)> {
    (1.01f64..3.0, 0.01f64..1.0)
}
