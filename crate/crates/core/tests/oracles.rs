//! Numerical results checked against independent analytic references.

mod common;

use common::{beam_radius, gaussian_overlap, rayleigh_range, StepIndex};
use tapersim::coupling::{mfd_1e2, overlap_efficiency, Axis};
use tapersim::field::{gaussian_field, make_grid, power};
use tapersim::inscription::{single_pass_profile, IndexProfile, MaterialModel};
use tapersim::mode::{solve_fundamental, SolverConfig};
use tapersim::propagation::{propagate, propagate_field, PropagationConfig, Reversed, UniformGuide};

#[test]
fn bessel_reference_values() {
    assert!((common::bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
    assert!((common::bessel_j(1, 2.5) - 0.497_094_102_464_274_4).abs() < 1e-13);
    assert!(common::bessel_j(0, common::J0_ZERO).abs() < 1e-13);
    assert!((common::bessel_k(0, 1.0) - 0.421_024_438_240_708_3).abs() < 1e-12);
    assert!((common::bessel_k(1, 2.0) - 0.139_865_881_816_522_4).abs() < 1e-12);
}

#[test]
fn gaussian_overlap_matches_closed_form() {
    let g = make_grid(64.0, 64.0, 256, 256).unwrap();
    let fiber = gaussian_field(&g, 2.75, 2.75, (0.0, 0.0), 800.0).unwrap();
    for ratio in [1.0, 1.5, 2.0, 3.0] {
        let w = 2.75 * ratio;
        let mode = gaussian_field(&g, w, w, (0.0, 0.0), 800.0).unwrap();
        let eta = overlap_efficiency(&fiber, &mode).unwrap();
        assert!((eta - gaussian_overlap(2.75, w)).abs() < 1e-4, "ratio {ratio}: {eta}");
    }
}

fn step_index() -> StepIndex {
    StepIndex { radius: 4.0, n_core: 1.455, n_clad: 1.45, wavelength_nm: 800.0 }
}

#[test]
fn step_index_mode_matches_lp01() {
    let fiber = step_index();
    let g = make_grid(32.0, 32.0, 128, 128).unwrap();
    let mode = solve_fundamental(&fiber.profile(&g, 8), 800.0, &SolverConfig::default()).unwrap();
    let (n_ref, mfd_ref) = (fiber.n_eff(), fiber.mfd());
    assert!((mode.n_eff - n_ref).abs() < 1e-5, "n_eff {} vs {n_ref}", mode.n_eff);
    let i = mode.field.intensity();
    for axis in [Axis::H, Axis::V] {
        let mfd = mfd_1e2(&i, axis).unwrap();
        assert!((mfd / mfd_ref - 1.0).abs() < 0.03, "{axis:?} MFD {mfd} vs {mfd_ref}");
    }
}

#[test]
fn mode_index_converges_with_grid() {
    let fiber = StepIndex { radius: 4.0, n_core: 1.451, n_clad: 1.45, wavelength_nm: 800.0 };
    let coarse = make_grid(48.0, 48.0, 192, 192).unwrap();
    let fine = make_grid(48.0, 48.0, 384, 384).unwrap();
    let cfg = SolverConfig::default();
    let a = solve_fundamental(&fiber.profile(&coarse, 8), 800.0, &cfg).unwrap();
    let b = solve_fundamental(&fiber.profile(&fine, 8), 800.0, &cfg).unwrap();
    let exact = fiber.n_eff();
    assert!((a.n_eff - b.n_eff).abs() < 2e-6, "{} vs {}", a.n_eff, b.n_eff);
    assert!((b.n_eff - exact).abs() <= (a.n_eff - exact).abs() + 1e-7);
}

#[test]
fn symmetric_profile_gives_symmetric_mode() {
    let g = make_grid(72.0, 72.0, 144, 144).unwrap();
    let prof = single_pass_profile(1.5, &MaterialModel::default(), &g).unwrap();
    let mode = solve_fundamental(&prof, 800.0, &SolverConfig::default()).unwrap();
    let v = mode.real_values();
    let peak = v.iter().copied().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    // Samples sit at x0 + i dx with x0 = -L/2, so i mirrors to n - i. The
    // Dirichlet walls are one cell further out on the low side, so compare
    // the central half only.
    for iy in g.ny / 4..3 * g.ny / 4 {
        for ix in g.nx / 4..3 * g.nx / 4 {
            let a = v[g.index(ix, iy)];
            worst = worst.max((a - v[g.index(g.nx - ix, iy)]).abs()).max((a - v[g.index(ix, g.ny - iy)]).abs());
        }
    }
    assert!(worst < 1e-5 * peak, "asymmetry {}", worst / peak);
}

#[test]
fn stronger_guide_confines_more() {
    let g = make_grid(72.0, 72.0, 144, 144).unwrap();
    let prof = single_pass_profile(1.5, &MaterialModel::default(), &g).unwrap();
    let cfg = SolverConfig::default();
    let mut last = (f64::INFINITY, f64::INFINITY, 0.0);
    for c in [1.0, 1.5, 2.0] {
        let m = solve_fundamental(&prof.scaled(c), 800.0, &cfg).unwrap();
        let i = m.field.intensity();
        let (h, v) = (mfd_1e2(&i, Axis::H).unwrap(), mfd_1e2(&i, Axis::V).unwrap());
        assert!(h < last.0 && v < last.1 && m.n_eff > last.2);
        last = (h, v, m.n_eff);
    }
}

#[test]
fn free_space_gaussian_follows_beam_law() {
    let g = make_grid(64.0, 64.0, 256, 256).unwrap();
    let (w0, n) = (3.0, 1.45);
    let zr = rayleigh_range(w0, 800.0, n);
    let input = gaussian_field(&g, w0, w0, (0.0, 0.0), 800.0).unwrap();
    let guide = UniformGuide { profile: IndexProfile::uniform(g, n), length_mm: 2.0 * zr * 1e-3 };
    let cfg = PropagationConfig { dz_um: 0.5, ..Default::default() }.without_absorber();
    let out = propagate_field(&guide, &input, &cfg, None).unwrap();
    let expected = 2.0 * beam_radius(w0, 2.0 * zr, 800.0, n);
    let i = out.intensity();
    for axis in [Axis::H, Axis::V] {
        let mfd = mfd_1e2(&i, axis).unwrap();
        assert!((mfd / expected - 1.0).abs() < 0.01, "{axis:?}: {mfd} vs {expected}");
    }
}

#[test]
fn wide_gaussian_follows_beam_law() {
    let g = make_grid(96.0, 96.0, 384, 384).unwrap();
    let (w0, n) = (5.0, 1.45);
    let input = gaussian_field(&g, w0, w0, (0.0, 0.0), 800.0).unwrap();
    let guide = UniformGuide { profile: IndexProfile::uniform(g, n), length_mm: 0.5 };
    let cfg = PropagationConfig::default().without_absorber();
    let mut rows = Vec::new();
    propagate_field(&guide, &input, &cfg, Some((&mut rows, 20))).unwrap();
    for r in &rows {
        let expected = 2.0 * beam_radius(w0, r.z_mm * 1e3, 800.0, n);
        assert!((r.mfd_h / expected - 1.0).abs() < 0.01, "z = {}: {} vs {expected}", r.z_mm, r.mfd_h);
        assert!((r.mfd_v / expected - 1.0).abs() < 0.01);
    }
}

#[test]
fn norm_is_conserved_without_absorber() {
    let g = make_grid(48.0, 48.0, 128, 128).unwrap();
    let input = gaussian_field(&g, 2.0, 3.0, (1.0, -2.0), 800.0).unwrap();
    let guide = UniformGuide { profile: IndexProfile::uniform(g, 1.45), length_mm: 1.0 };
    let cfg = PropagationConfig::default().without_absorber();
    let out = propagate_field(&guide, &input, &cfg, None).unwrap();
    assert!((power(&out) / power(&input) - 1.0).abs() < 1e-6);
}

#[test]
fn absorber_removes_escaping_power() {
    let g = make_grid(48.0, 48.0, 128, 128).unwrap();
    let input = gaussian_field(&g, 1.0, 1.0, (0.0, 0.0), 800.0).unwrap();
    let guide = UniformGuide { profile: IndexProfile::uniform(g, 1.45), length_mm: 1.0 };
    let on = propagate_field(&guide, &input, &PropagationConfig::default(), None).unwrap();
    assert!(power(&on) < 0.5 * power(&input));
}

#[test]
fn eigenmode_is_stationary() {
    let g = make_grid(72.0, 72.0, 144, 144).unwrap();
    let prof = single_pass_profile(1.5, &MaterialModel::default(), &g).unwrap();
    let cfg = SolverConfig::default();
    let mode = solve_fundamental(&prof, 800.0, &cfg).unwrap();
    let guide = UniformGuide { profile: prof, length_mm: 3.0 };
    let r = propagate(&guide, &mode, &PropagationConfig::default(), &cfg).unwrap();
    assert!(r.transmission >= 0.999, "{}", r.transmission);
    assert!((r.transmission + r.radiated - 1.0).abs() < 1e-12);
}

fn default_taper() -> (tapersim::inscription::TaperIndexMap, tapersim::mode::GuidedMode) {
    let g = make_grid(72.0, 72.0, 144, 144).unwrap();
    let params = tapersim::inscription::InscriptionParams::default();
    let map = tapersim::inscription::TaperIndexMap::taper_only(params, MaterialModel::default(), g).unwrap();
    let input = solve_fundamental(map.regular_profile(), 800.0, &SolverConfig::default()).unwrap();
    (map, input)
}

#[test]
fn halving_the_step_barely_changes_transmission() {
    let (map, input) = default_taper();
    let cfg = SolverConfig::default();
    let t = |dz: f64| {
        propagate(&map, &input, &PropagationConfig { dz_um: dz, ..Default::default() }, &cfg).unwrap().transmission
    };
    let (coarse, fine) = (t(5.0), t(2.5));
    assert!((coarse - fine).abs() < 1e-4, "{coarse} vs {fine}");
}

#[test]
fn absorber_is_local_for_adiabatic_taper() {
    let (map, input) = default_taper();
    let cfg = SolverConfig::default();
    let on = propagate(&map, &input, &PropagationConfig::default(), &cfg).unwrap().transmission;
    let off = propagate(&map, &input, &PropagationConfig::default().without_absorber(), &cfg).unwrap().transmission;
    assert!((on - off).abs() < 1e-3, "{on} vs {off}");
}

#[test]
fn reciprocal_taper_transmission() {
    let g = make_grid(72.0, 72.0, 144, 144).unwrap();
    let model = MaterialModel::default();
    let params = tapersim::inscription::InscriptionParams { taper_length: 1.0, ..Default::default() };
    let map = tapersim::inscription::TaperIndexMap::taper_only(params, model, g).unwrap();
    let cfg = SolverConfig::default();
    let prop = PropagationConfig::default();
    let regular = solve_fundamental(map.regular_profile(), 800.0, &cfg).unwrap();
    let facet = solve_fundamental(&map.facet_profile().unwrap(), 800.0, &cfg).unwrap();
    let forward = propagate(&map, &regular, &prop, &cfg).unwrap().transmission;
    let backward = propagate(&Reversed(&map), &facet, &prop, &cfg).unwrap().transmission;
    assert!((forward - backward).abs() < 1e-3, "{forward} vs {backward}");
}
