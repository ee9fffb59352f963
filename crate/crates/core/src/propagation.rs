//! Paraxial split-step Fourier beam propagation through z-varying profiles.
//!
//! The envelope obeys `dE/dz = i/(2k) * lap(E) + i (k0^2 n^2 - k^2)/(2k) * E`
//! with `k = k0 n_ref`. Each step applies half a diffraction step in the
//! spectral domain, the full index phase at the step midpoint, and the other
//! half diffraction step; adjacent half steps are merged. The index term is
//! written in Helmholtz form so that eigenmodes from [`crate::mode`] are
//! stationary up to discretisation. Transverse boundaries are periodic, with
//! an optional absorbing margin.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coupling::{mfd_1e2, Axis};
use crate::error::{invalid, Error, Result};
use crate::field::{power, Grid2D, ScalarField};
use crate::inscription::{facet_profile, IndexProfile, InscriptionParams, MaterialModel, TaperIndexMap};
use crate::mode::{solve_fundamental, wavenumber, GuidedMode, SolverConfig};

/// Fewest z steps accepted over a propagation length.
pub const MIN_STEPS: usize = 100;

/// A z-dependent index distribution over `[0, length_mm()]`.
pub trait IndexSource: Sync {
    fn grid(&self) -> &Grid2D;
    fn n_clad(&self) -> f64;
    fn length_mm(&self) -> f64;
    fn profile_at(&self, z_mm: f64) -> Result<IndexProfile>;
}

impl IndexSource for TaperIndexMap {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn n_clad(&self) -> f64 {
        self.model.n_clad
    }

    fn length_mm(&self) -> f64 {
        self.z_extent
    }

    fn profile_at(&self, z_mm: f64) -> Result<IndexProfile> {
        TaperIndexMap::profile_at(self, z_mm)
    }
}

/// z-invariant guide of a given length.
#[derive(Debug, Clone)]
pub struct UniformGuide {
    pub profile: IndexProfile,
    pub length_mm: f64,
}

impl IndexSource for UniformGuide {
    fn grid(&self) -> &Grid2D {
        &self.profile.grid
    }

    fn n_clad(&self) -> f64 {
        self.profile.n_clad
    }

    fn length_mm(&self) -> f64 {
        self.length_mm
    }

    fn profile_at(&self, _z_mm: f64) -> Result<IndexProfile> {
        Ok(self.profile.clone())
    }
}

/// Another source traversed from its far end back to its start.
pub struct Reversed<'a, S: IndexSource>(pub &'a S);

impl<S: IndexSource> IndexSource for Reversed<'_, S> {
    fn grid(&self) -> &Grid2D {
        self.0.grid()
    }

    fn n_clad(&self) -> f64 {
        self.0.n_clad()
    }

    fn length_mm(&self) -> f64 {
        self.0.length_mm()
    }

    fn profile_at(&self, z_mm: f64) -> Result<IndexProfile> {
        self.0.profile_at((self.0.length_mm() - z_mm).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// Nominal step, um. The actual step divides the length evenly.
    pub dz_um: f64,
    /// Width of the absorbing margin on each edge, um; 0 disables it.
    pub absorber_width_um: f64,
    /// Attenuation rate at the outer edge, um^-1 (quadratic ramp inwards).
    pub absorber_strength: f64,
    /// Paraxial reference index; `None` uses the source's cladding index.
    pub n_ref: Option<f64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { dz_um: 5.0, absorber_width_um: 6.0, absorber_strength: 0.05, n_ref: None }
    }
}

impl PropagationConfig {
    pub fn without_absorber(self) -> Self {
        Self { absorber_width_um: 0.0, absorber_strength: 0.0, ..self }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        if !(self.dz_um > 0.0 && self.dz_um.is_finite()) {
            return Err(invalid(format!("dz must be positive, got {}", self.dz_um)));
        }
        if !(self.absorber_width_um >= 0.0 && self.absorber_strength >= 0.0) {
            return Err(invalid("absorber width and strength must be non-negative"));
        }
        let half = 0.5 * grid.extent_x().min(grid.extent_y());
        if self.absorber_width_um >= 0.5 * half {
            return Err(invalid(format!(
                "absorber width {} um exceeds the outer margin of a {half} um half-extent",
                self.absorber_width_um
            )));
        }
        if let Some(n) = self.n_ref {
            if !(n >= 1.0 && n.is_finite()) {
                return Err(invalid(format!("n_ref must be >= 1, got {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub output: ScalarField,
    /// Power in the facet eigenmode relative to the input power.
    pub transmission: f64,
    /// Absorbed or unguided fraction, `1 - transmission`.
    pub radiated: f64,
    /// Total output power relative to the input power.
    pub output_power: f64,
}

/// One row of the optional per-step diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub z_mm: f64,
    pub power: f64,
    pub mfd_h: f64,
    pub mfd_v: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "z_mm,power,mfd_h_um,mfd_v_um";

pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticRow], mut out: W) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.z_mm, r.power, r.mfd_h, r.mfd_v)?;
    }
    Ok(())
}

struct Fft2 {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    cols: Vec<Complex64>,
}

impl Fft2 {
    fn new(g: &Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx: g.nx,
            ny: g.ny,
            fx: planner.plan_fft_forward(g.nx),
            ix: planner.plan_fft_inverse(g.nx),
            fy: planner.plan_fft_forward(g.ny),
            iy: planner.plan_fft_inverse(g.ny),
            cols: vec![Complex64::new(0.0, 0.0); g.len()],
        }
    }

    /// Unnormalised 2D transform in place.
    fn run(&mut self, data: &mut [Complex64], forward: bool) {
        let (row, col) = if forward { (&self.fx, &self.fy) } else { (&self.ix, &self.iy) };
        row.process(data);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                self.cols[ix * self.ny + iy] = data[iy * self.nx + ix];
            }
        }
        col.process(&mut self.cols);
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                data[iy * self.nx + ix] = self.cols[ix * self.ny + iy];
            }
        }
    }
}

/// Angular spatial frequency of FFT bin `k` of `n` with spacing `d`.
fn spatial_frequency(k: usize, n: usize, d: f64) -> f64 {
    let signed = if k <= (n - 1) / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / (n as f64 * d)
}

/// Diffraction propagator over `dz` (um), with the inverse FFT's `1/N`
/// folded in.
fn diffraction_factor(g: &Grid2D, k: f64, dz: f64) -> Vec<Complex64> {
    let norm = 1.0 / g.len() as f64;
    let mut out = Vec::with_capacity(g.len());
    for iy in 0..g.ny {
        let ky = spatial_frequency(iy, g.ny, g.dy);
        for ix in 0..g.nx {
            let kx = spatial_frequency(ix, g.nx, g.dx);
            out.push(Complex64::from_polar(norm, -(kx * kx + ky * ky) * dz / (2.0 * k)));
        }
    }
    out
}

/// Per-step amplitude mask of the edge absorber, `None` when disabled.
fn absorber_mask(g: &Grid2D, cfg: &PropagationConfig, dz: f64) -> Option<Vec<f64>> {
    let w = cfg.absorber_width_um;
    if w <= 0.0 || cfg.absorber_strength <= 0.0 {
        return None;
    }
    let (xmin, xmax) = (g.x0, g.x0 + (g.nx - 1) as f64 * g.dx);
    let (ymin, ymax) = (g.y0, g.y0 + (g.ny - 1) as f64 * g.dy);
    Some(
        g.coords()
            .map(|(x, y)| {
                let depth = |v: f64, lo: f64, hi: f64| ((lo + w - v).max(v - (hi - w)) / w).clamp(0.0, 1.0);
                let s = depth(x, xmin, xmax).max(depth(y, ymin, ymax));
                (-cfg.absorber_strength * dz * s * s).exp()
            })
            .collect(),
    )
}

/// Number of steps and the step length (um) for a source of `length_mm`.
pub fn step_plan(length_mm: f64, dz_um: f64) -> Result<(usize, f64)> {
    let length_um = length_mm * 1e3;
    if !(length_um > 0.0 && length_um.is_finite()) {
        return Err(invalid(format!("propagation length must be positive, got {length_mm} mm")));
    }
    let ratio = length_um / dz_um;
    if ratio < MIN_STEPS as f64 - 1e-9 {
        return Err(invalid(format!(
            "dz = {dz_um} um gives only {ratio:.1} steps over {length_mm} mm; at least {MIN_STEPS} required"
        )));
    }
    let steps = (ratio - 1e-9).ceil() as usize;
    Ok((steps, length_um / steps as f64))
}

/// Marches `input` through `source`, returning the field at its far end.
/// When `diagnostics` is given, one row is pushed every `every` steps.
pub fn propagate_field<S: IndexSource>(
    source: &S,
    input: &ScalarField,
    config: &PropagationConfig,
    mut diagnostics: Option<(&mut Vec<DiagnosticRow>, usize)>,
) -> Result<ScalarField> {
    let g = *source.grid();
    input.grid.ensure_same(&g)?;
    config.validate(&g)?;
    let (steps, h) = step_plan(source.length_mm(), config.dz_um)?;
    let k0 = wavenumber(input.wavelength_nm);
    let n_ref = config.n_ref.unwrap_or_else(|| source.n_clad());
    let k = k0 * n_ref;
    let half = diffraction_factor(&g, k, 0.5 * h);
    let full = diffraction_factor(&g, k, h);
    let mask = absorber_mask(&g, config, h);
    let mut fft = Fft2::new(&g);
    let mut e = input.values.clone();

    let diffract = |fft: &mut Fft2, e: &mut [Complex64], factor: &[Complex64]| {
        fft.run(e, true);
        e.iter_mut().zip(factor).for_each(|(v, f)| *v *= f);
        fft.run(e, false);
    };

    diffract(&mut fft, &mut e, &half);
    for s in 0..steps {
        let z_mid_mm = (s as f64 + 0.5) * h * 1e-3;
        let profile = source.profile_at(z_mid_mm)?;
        profile.grid.ensure_same(&g)?;
        let k0sq = k0 * k0;
        for (idx, v) in e.iter_mut().enumerate() {
            let n = profile.index(idx);
            let phase = (k0sq * n * n - k * k) / (2.0 * k) * h;
            *v *= Complex64::from_polar(1.0, phase);
            if let Some(m) = &mask {
                *v *= m[idx];
            }
        }
        let last = s + 1 == steps;
        diffract(&mut fft, &mut e, if last { &half } else { &full });
        if let Some((rows, every)) = diagnostics.as_mut() {
            if (s + 1) % (*every).max(1) == 0 || last {
                let field = ScalarField { grid: g, values: e.clone(), wavelength_nm: input.wavelength_nm };
                let intensity = field.intensity();
                rows.push(DiagnosticRow {
                    z_mm: (s + 1) as f64 * h * 1e-3,
                    power: power(&field),
                    mfd_h: mfd_1e2(&intensity, Axis::H).unwrap_or(f64::NAN),
                    mfd_v: mfd_1e2(&intensity, Axis::V).unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(ScalarField { grid: g, values: e, wavelength_nm: input.wavelength_nm })
}

/// Propagates and projects the output onto a known facet mode.
pub fn propagate_to_facet<S: IndexSource>(
    source: &S,
    input: &ScalarField,
    facet: &GuidedMode,
    config: &PropagationConfig,
    diagnostics: Option<(&mut Vec<DiagnosticRow>, usize)>,
) -> Result<PropagationResult> {
    let p_in = power(input);
    if !(p_in > 0.0) {
        return Err(Error::ZeroPower);
    }
    let output = propagate_field(source, input, config, diagnostics)?;
    let overlap = facet.field.inner(&output)?;
    let facet_power = power(&facet.field);
    let transmission = (overlap.norm_sqr() / (facet_power * p_in)).min(1.0);
    let output_power = power(&output) / p_in;
    Ok(PropagationResult { output, transmission, radiated: 1.0 - transmission, output_power })
}

/// Propagates a guided input mode through `source` and measures the modal
/// transmission into the fundamental mode of the final profile.
pub fn propagate<S: IndexSource>(
    source: &S,
    input: &GuidedMode,
    config: &PropagationConfig,
    solver: &SolverConfig,
) -> Result<PropagationResult> {
    let facet_profile = source.profile_at(source.length_mm())?;
    let facet = solve_fundamental(&facet_profile, input.wavelength_nm, solver)?;
    propagate_to_facet(source, &input.field, &facet, config, None)
}

#[derive(Debug)]
pub struct ScanEntry {
    pub length_mm: f64,
    pub transmission: Result<f64>,
}

/// Shared setup of a simulation: sampling, wavelength and numerics.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub grid: Grid2D,
    pub wavelength_nm: f64,
    pub propagation: PropagationConfig,
    pub solver: SolverConfig,
}

/// Transmission of the taper described by `params` for each candidate taper
/// length. Start and end profiles are the same for every length, so the
/// input and facet modes are solved once.
pub fn adiabatic_scan(
    params: &InscriptionParams,
    model: &MaterialModel,
    lengths: &[f64],
    setup: &Setup,
) -> Result<Vec<ScanEntry>> {
    if lengths.is_empty() {
        return Err(invalid("adiabatic scan needs at least one taper length"));
    }
    if let Some(bad) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(invalid(format!("taper lengths must be positive, got {bad}")));
    }
    let regular = crate::inscription::single_pass_profile(params.p0, model, &setup.grid)?;
    let input = solve_fundamental(&regular, setup.wavelength_nm, &setup.solver)?;
    let facet = solve_fundamental(&facet_profile(params, model, &setup.grid)?, setup.wavelength_nm, &setup.solver)?;
    Ok(lengths
        .par_iter()
        .map(|&length_mm| {
            let run = || -> Result<f64> {
                let p = InscriptionParams { taper_length: length_mm, ..*params };
                let map = TaperIndexMap::taper_only(p, *model, setup.grid)?;
                let dz = setup.propagation.dz_um.min(length_mm * 1e3 / MIN_STEPS as f64);
                let cfg = PropagationConfig { dz_um: dz, ..setup.propagation };
                Ok(propagate_to_facet(&map, &input.field, &facet, &cfg, None)?.transmission)
            };
            ScanEntry { length_mm, transmission: run() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gaussian_field, make_grid};

    #[test]
    fn step_plan_limits() {
        assert_eq!(step_plan(3.0, 5.0).unwrap(), (600, 5.0));
        assert!(step_plan(0.4, 5.0).is_err());
        let (n, h) = step_plan(0.5, 5.0).unwrap();
        assert_eq!(n, 100);
        assert!((h - 5.0).abs() < 1e-12);
        assert!(step_plan(0.0, 5.0).is_err());
    }

    #[test]
    fn frequencies_follow_fft_layout() {
        assert_eq!(spatial_frequency(0, 8, 1.0), 0.0);
        assert!(spatial_frequency(3, 8, 1.0) > 0.0);
        assert!(spatial_frequency(4, 8, 1.0) < 0.0);
        assert!((spatial_frequency(7, 8, 1.0) + 2.0 * PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn fft_round_trip() {
        let g = make_grid(16.0, 24.0, 16, 24).unwrap();
        let f = gaussian_field(&g, 2.0, 3.0, (1.0, 0.0), 800.0).unwrap();
        let mut fft = Fft2::new(&g);
        let mut v = f.values.clone();
        fft.run(&mut v, true);
        fft.run(&mut v, false);
        let n = g.len() as f64;
        for (a, b) in v.iter().zip(&f.values) {
            assert!((a / n - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_coarse_step_and_grid_mismatch() {
        let g = make_grid(32.0, 32.0, 32, 32).unwrap();
        let guide = UniformGuide { profile: IndexProfile::uniform(g, 1.45), length_mm: 0.1 };
        let f = gaussian_field(&g, 3.0, 3.0, (0.0, 0.0), 800.0).unwrap();
        let cfg = PropagationConfig::default().without_absorber();
        assert!(propagate_field(&guide, &f, &cfg, None).is_err());
        let other = make_grid(32.0, 32.0, 64, 64).unwrap();
        let g2 = gaussian_field(&other, 3.0, 3.0, (0.0, 0.0), 800.0).unwrap();
        let guide = UniformGuide { profile: IndexProfile::uniform(g, 1.45), length_mm: 1.0 };
        assert!(matches!(propagate_field(&guide, &g2, &cfg, None), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn absorber_must_fit_margin() {
        let g = make_grid(32.0, 32.0, 32, 32).unwrap();
        let cfg = PropagationConfig { absorber_width_um: 10.0, ..Default::default() };
        assert!(cfg.validate(&g).is_err());
    }

    #[test]
    fn diagnostics_rows() {
        let g = make_grid(32.0, 32.0, 64, 64).unwrap();
        let guide = UniformGuide { profile: IndexProfile::uniform(g, 1.45), length_mm: 0.1 };
        let f = gaussian_field(&g, 3.0, 3.0, (0.0, 0.0), 800.0).unwrap();
        let cfg = PropagationConfig { dz_um: 1.0, ..Default::default() }.without_absorber();
        let mut rows = Vec::new();
        propagate_field(&guide, &f, &cfg, Some((&mut rows, 25))).unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[3].z_mm - 0.1).abs() < 1e-12);
        let mut buf = Vec::new();
        write_diagnostics_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(DIAGNOSTICS_HEADER));
    }
}
