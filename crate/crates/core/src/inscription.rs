//! Fabrication parameters to refractive-index profiles.
//!
//! A single writing pass above threshold leaves an elliptical-Gaussian index
//! increase whose contrast and size both grow with power. Reruns over an
//! existing track raise the contrast inside the already-modified region only,
//! saturating towards a ceiling; a taper is a regular track followed by `reps`
//! reruns along a linear power ramp ending at the facet.
//!
//! Powers are dimensionless multiples of the first-pass modification
//! threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Grid2D;

/// Fraction of the peak contrast below which a sample counts as unmodified.
pub const MODIFIED_FLOOR: f64 = 1e-3;

/// Upper bound on any profile's contrast relative to `dn_max`.
pub const RUNAWAY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    #[default]
    Linear,
}

fn default_ramp_start_margin() -> f64 {
    0.999
}

/// Writing recipe for one waveguide and its output taper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InscriptionParams {
    /// Regular-pass power in units of the modification threshold.
    pub p0: f64,
    /// Ramp end power relative to `p0`.
    pub pa_over_p0: f64,
    /// Additional runs over the taper; 0 is an untapered waveguide.
    pub reps: u32,
    /// Taper length in mm, ending at the facet.
    pub taper_length: f64,
    #[serde(default)]
    pub ramp: RampShape,
    /// Ramp start power as a fraction of the rerun threshold.
    #[serde(default = "default_ramp_start_margin")]
    pub ramp_start_margin: f64,
}

impl Default for InscriptionParams {
    fn default() -> Self {
        Self {
            p0: 1.5,
            pa_over_p0: 0.667,
            reps: 8,
            taper_length: 3.0,
            ramp: RampShape::Linear,
            ramp_start_margin: 0.999,
        }
    }
}

impl InscriptionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 1.0 && self.p0.is_finite()) {
            return Err(invalid(format!("p0 must exceed the modification threshold (p0 > 1), got {}", self.p0)));
        }
        if !(self.pa_over_p0 > 0.0 && self.pa_over_p0 <= 1.0) {
            return Err(invalid(format!("pa_over_p0 must lie in (0, 1], got {}", self.pa_over_p0)));
        }
        if self.reps > 0 && !(self.taper_length > 0.0 && self.taper_length.is_finite()) {
            return Err(invalid(format!("taper_length must be positive, got {}", self.taper_length)));
        }
        if !(self.ramp_start_margin > 0.0 && self.ramp_start_margin <= 1.0) {
            return Err(invalid(format!("ramp_start_margin must lie in (0, 1], got {}", self.ramp_start_margin)));
        }
        Ok(())
    }

    pub fn with_reps(self, reps: u32) -> Self {
        Self { reps, ..self }
    }
}

/// Calibrated material response of the glass to writing passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    /// Saturated peak contrast; single passes approach it as power rises.
    pub dn_max: f64,
    /// Modification half-widths at threshold, um.
    pub wx0: f64,
    pub wy0: f64,
    /// Half-width growth per unit relative power above threshold, um.
    pub volume_slope_x: f64,
    pub volume_slope_y: f64,
    /// Rerun threshold relative to the first-pass threshold.
    pub rerun_threshold_factor: f64,
    /// Dose scale of contrast accumulation across reruns.
    pub saturation_dose: f64,
    pub n_clad: f64,
    /// Power scale of the single-pass contrast rise above threshold.
    pub contrast_rise: f64,
}

impl Default for MaterialModel {
    /// Uncalibrated starting point for [`crate::calibration::calibrate_model`].
    fn default() -> Self {
        Self {
            dn_max: 2.5e-3,
            wx0: 5.0,
            wy0: 10.0,
            volume_slope_x: 1.0,
            volume_slope_y: 0.1,
            rerun_threshold_factor: 0.95,
            saturation_dose: 0.08,
            n_clad: 1.45,
            contrast_rise: 1.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.dn_max) && self.dn_max <= 5e-3) {
            return Err(invalid(format!("dn_max must lie in (0, 5e-3], got {}", self.dn_max)));
        }
        if !(pos(self.wx0) && pos(self.wy0)) {
            return Err(invalid("modification half-widths must be positive"));
        }
        if !(self.wy0 > self.wx0) {
            return Err(invalid(format!(
                "modification must be elongated vertically (wy0 > wx0), got wx0 = {}, wy0 = {}",
                self.wx0, self.wy0
            )));
        }
        if !(self.volume_slope_x >= 0.0 && self.volume_slope_y >= 0.0)
            || !self.volume_slope_x.is_finite()
            || !self.volume_slope_y.is_finite()
        {
            return Err(invalid("volume slopes must be non-negative"));
        }
        if !(self.rerun_threshold_factor > 0.0 && self.rerun_threshold_factor < 1.0) {
            return Err(invalid(format!(
                "rerun_threshold_factor must lie in (0, 1), got {}",
                self.rerun_threshold_factor
            )));
        }
        if !pos(self.saturation_dose) || !pos(self.contrast_rise) {
            return Err(invalid("saturation_dose and contrast_rise must be positive"));
        }
        if !(self.n_clad >= 1.0 && self.n_clad.is_finite()) {
            return Err(invalid(format!("n_clad must be >= 1, got {}", self.n_clad)));
        }
        Ok(())
    }

    /// Single-pass peak contrast at relative power `p`.
    pub fn contrast(&self, p: f64) -> f64 {
        if p <= 1.0 {
            0.0
        } else {
            self.dn_max * (1.0 - (-(p - 1.0) / self.contrast_rise).exp())
        }
    }

    /// Modification half-widths `(wx, wy)` at relative power `p`.
    pub fn half_widths(&self, p: f64) -> (f64, f64) {
        let excess = (p - 1.0).max(0.0);
        (self.wx0 + self.volume_slope_x * excess, self.wy0 + self.volume_slope_y * excess)
    }

    /// Peak contrast reruns at power `p` saturate towards. Energy deposited
    /// by a rerun spreads over its own focal volume, so the ceiling drops as
    /// that volume grows with power.
    pub fn rerun_ceiling(&self, p: f64) -> f64 {
        let (wx, wy) = self.half_widths(p);
        self.dn_max * (self.wx0 * self.wy0) / (wx * wy)
    }

    /// Dose one rerun at power `p` delivers; zero at or below the rerun
    /// threshold.
    pub fn rerun_dose(&self, p: f64) -> f64 {
        (p - self.rerun_threshold_factor).max(0.0)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ModelFile { material: *self }).expect("model serialises")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| crate::error::Error::Parse(e.to_string()))?;
        file.material.validate()?;
        Ok(file.material)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    material: MaterialModel,
}

/// Index increase over the cladding, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexProfile {
    pub grid: Grid2D,
    pub dn: Vec<f64>,
    pub n_clad: f64,
}

impl IndexProfile {
    pub fn new(grid: Grid2D, dn: Vec<f64>, n_clad: f64) -> Result<Self> {
        if dn.len() != grid.len() {
            return Err(invalid(format!("profile has {} samples, grid holds {}", dn.len(), grid.len())));
        }
        if dn.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("index contrast must be finite and non-negative"));
        }
        if !(n_clad >= 1.0 && n_clad.is_finite()) {
            return Err(invalid(format!("n_clad must be >= 1, got {n_clad}")));
        }
        Ok(Self { grid, dn, n_clad })
    }

    pub fn uniform(grid: Grid2D, n_clad: f64) -> Self {
        Self { grid, dn: vec![0.0; grid.len()], n_clad }
    }

    pub fn max_dn(&self) -> f64 {
        self.dn.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn index(&self, k: usize) -> f64 {
        self.n_clad + self.dn[k]
    }

    /// Returns a profile with every contrast sample multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, dn: self.dn.iter().map(|v| v * c).collect(), n_clad: self.n_clad }
    }

    /// Full 1/e^2 widths of the contrast along x and y through its peak.
    pub fn footprint_widths(&self) -> Result<(f64, f64)> {
        let as_intensity = crate::field::IntensityProfile::new(self.grid, self.dn.clone())?;
        Ok((
            crate::coupling::mfd_1e2(&as_intensity, crate::coupling::Axis::H)?,
            crate::coupling::mfd_1e2(&as_intensity, crate::coupling::Axis::V)?,
        ))
    }

    /// Area enclosed by the 1/e^2 contour of the contrast, um^2.
    pub fn footprint_area(&self) -> f64 {
        let thr = self.max_dn() * (-2.0f64).exp();
        if thr <= 0.0 {
            return 0.0;
        }
        self.dn.iter().filter(|&&v| v >= thr).count() as f64 * self.grid.cell_area()
    }
}

/// Index change left by one pass at relative power `p` in pristine glass.
pub fn single_pass_profile(p: f64, model: &MaterialModel, grid: &Grid2D) -> Result<IndexProfile> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(invalid(format!("relative power must be non-negative, got {p}")));
    }
    if p <= 1.0 {
        return Ok(IndexProfile::uniform(*grid, model.n_clad));
    }
    let amp = model.contrast(p);
    let (wx, wy) = model.half_widths(p);
    let dn = grid.coords().map(|(x, y)| amp * (-2.0 * (x * x / (wx * wx) + y * y / (wy * wy))).exp()).collect();
    Ok(IndexProfile { grid: *grid, dn, n_clad: model.n_clad })
}

/// One rerun at relative power `p` over an existing track.
///
/// Only samples above [`MODIFIED_FLOOR`] of the base peak change. Each moves
/// towards a local ceiling shaped like the base,
/// `dn_new = L - (L - dn_old) * exp(-dose(p) / saturation_dose)`,
/// so the 1/e^2 footprint is preserved and repeated reruns converge to `L`.
pub fn accumulate_rerun(base: &IndexProfile, p: f64, model: &MaterialModel) -> Result<IndexProfile> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(invalid(format!("relative power must be non-negative, got {p}")));
    }
    let dose = model.rerun_dose(p);
    let peak = base.max_dn();
    if dose <= 0.0 || peak <= 0.0 {
        return Ok(base.clone());
    }
    Ok(rerun_n(base, peak, model.rerun_ceiling(p), (-dose / model.saturation_dose).exp(), 1))
}

/// `n` identical reruns; `decay` is the per-run remaining fraction.
fn rerun_n(base: &IndexProfile, peak: f64, ceiling: f64, decay: f64, n: u32) -> IndexProfile {
    let floor = MODIFIED_FLOOR * peak;
    let scale = ceiling / peak;
    let remaining = decay.powi(n as i32);
    let dn = base
        .dn
        .iter()
        .map(|&old| {
            if old > floor {
                let ceil_local = scale * old;
                ceil_local - (ceil_local - old) * remaining
            } else {
                old
            }
        })
        .collect();
    IndexProfile { grid: base.grid, dn, n_clad: base.n_clad }
}

/// Regular track followed by a tapered section along z.
///
/// `z = 0` is the start of the map and `z = z_extent` the facet; the taper
/// occupies the last `taper_length` mm before the facet.
#[derive(Debug, Clone)]
pub struct TaperIndexMap {
    pub params: InscriptionParams,
    pub model: MaterialModel,
    pub grid: Grid2D,
    pub z_extent: f64,
    regular: IndexProfile,
}

impl TaperIndexMap {
    pub fn new(params: InscriptionParams, model: MaterialModel, grid: Grid2D, z_extent: f64) -> Result<Self> {
        params.validate()?;
        model.validate()?;
        if !(z_extent > 0.0 && z_extent.is_finite()) {
            return Err(invalid(format!("z_extent must be positive, got {z_extent}")));
        }
        if params.reps > 0 && params.taper_length > z_extent * (1.0 + 1e-12) {
            return Err(invalid(format!("taper_length {} mm exceeds z_extent {z_extent} mm", params.taper_length)));
        }
        let regular = single_pass_profile(params.p0, &model, &grid)?;
        Ok(Self { params, model, grid, z_extent, regular })
    }

    /// Map covering exactly the taper.
    pub fn taper_only(params: InscriptionParams, model: MaterialModel, grid: Grid2D) -> Result<Self> {
        Self::new(params, model, grid, params.taper_length)
    }

    pub fn regular_profile(&self) -> &IndexProfile {
        &self.regular
    }

    pub fn rerun_threshold(&self) -> f64 {
        self.model.rerun_threshold_factor
    }

    /// Ramp power at `z` mm, or `None` before the taper starts.
    pub fn ramp_power(&self, z: f64) -> Option<f64> {
        let p = &self.params;
        if p.reps == 0 {
            return None;
        }
        let local = z - (self.z_extent - p.taper_length);
        if local < 0.0 {
            return None;
        }
        let start = self.rerun_threshold() * p.ramp_start_margin;
        let end = p.pa_over_p0 * p.p0;
        let frac = (local / p.taper_length).min(1.0);
        Some(match p.ramp {
            RampShape::Linear => start + (end - start) * frac,
        })
    }

    pub fn profile_at(&self, z: f64) -> Result<IndexProfile> {
        const Z_SLACK: f64 = 1e-9;
        if !(z >= -Z_SLACK && z <= self.z_extent + Z_SLACK) {
            return Err(invalid(format!("z = {z} mm outside [0, {}]", self.z_extent)));
        }
        let Some(p) = self.ramp_power(z.clamp(0.0, self.z_extent)) else {
            return Ok(self.regular.clone());
        };
        let dose = self.model.rerun_dose(p);
        let peak = self.regular.max_dn();
        if dose <= 0.0 || peak <= 0.0 {
            return Ok(self.regular.clone());
        }
        let decay = (-dose / self.model.saturation_dose).exp();
        Ok(rerun_n(&self.regular, peak, self.model.rerun_ceiling(p), decay, self.params.reps))
    }

    pub fn facet_profile(&self) -> Result<IndexProfile> {
        self.profile_at(self.z_extent)
    }
}

/// Convenience: the profile at the facet of a taper written with `params`.
pub fn facet_profile(params: &InscriptionParams, model: &MaterialModel, grid: &Grid2D) -> Result<IndexProfile> {
    let length = if params.reps > 0 { params.taper_length } else { 1.0 };
    TaperIndexMap::new(*params, *model, *grid, length)?.facet_profile()
}
