//! Mode-size metrics and butt-coupling efficiency against a single-mode fiber.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{gaussian_field, power, resample, Grid2D, IntensityProfile, ScalarField};

/// Transverse measurement axis: H is x, V is y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    H,
    V,
}

/// 1/e^2 intensity widths along both axes of a mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfdReport {
    pub mfd_h: f64,
    pub mfd_v: f64,
    /// Ellipse through the two widths, `pi * mfd_h * mfd_v / 4`, in um^2.
    pub area: f64,
    pub centroid: (f64, f64),
}

/// Parametric single-mode fiber: a circular Gaussian whose MFD scales as
/// `(lambda / lambda_ref)^scaling_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub mfd_at_reference: f64,
    pub reference_wavelength: f64,
    pub scaling_exponent: f64,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self { mfd_at_reference: 5.5, reference_wavelength: 800.0, scaling_exponent: 1.0 }
    }
}

/// Wavelength band over which the fiber model is trusted, in nm.
pub const FIBER_WAVELENGTH_RANGE: (f64, f64) = (600.0, 1000.0);

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mfd_at_reference > 0.0 && self.mfd_at_reference.is_finite()) {
            return Err(invalid(format!("fiber MFD must be positive, got {}", self.mfd_at_reference)));
        }
        if !(self.reference_wavelength > 0.0 && self.reference_wavelength.is_finite()) {
            return Err(invalid("fiber reference wavelength must be positive"));
        }
        if !self.scaling_exponent.is_finite() {
            return Err(invalid("fiber scaling exponent must be finite"));
        }
        Ok(())
    }

    /// Fiber MFD at `wavelength_nm`.
    pub fn mfd_at(&self, wavelength_nm: f64) -> Result<f64> {
        self.validate()?;
        let (lo, hi) = FIBER_WAVELENGTH_RANGE;
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(invalid(format!("wavelength {wavelength_nm} nm outside fiber model range [{lo}, {hi}]")));
        }
        Ok(self.mfd_at_reference * (wavelength_nm / self.reference_wavelength).powf(self.scaling_exponent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReport {
    pub eta: f64,
    pub mfd: MfdReport,
    pub fiber_mfd: f64,
    pub wavelength: f64,
}

impl CouplingReport {
    pub const CSV_HEADER: &'static str = "wavelength_nm,mfd_h_um,mfd_v_um,area_um2,fiber_mfd_um,eta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.wavelength, self.mfd.mfd_h, self.mfd.mfd_v, self.mfd.area, self.fiber_mfd, self.eta
        )
    }
}

/// Sample with the largest intensity; ties go to the one nearest the centroid.
fn peak_index(intensity: &IntensityProfile) -> Result<usize> {
    let max = intensity.values.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroPower);
    }
    let (cx, cy) = intensity.centroid().ok_or(Error::ZeroPower)?;
    let g = &intensity.grid;
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (k, &v) in intensity.values.iter().enumerate() {
        if v == max {
            let (x, y) = (g.x(k % g.nx), g.y(k / g.nx));
            let d = (x - cx).powi(2) + (y - cy).powi(2);
            if d < best_d {
                best_d = d;
                best = Some(k);
            }
        }
    }
    best.ok_or(Error::ZeroPower)
}

/// Full width at 1/e^2 of the peak intensity along `axis`, measured on the
/// cut through the peak sample. The outermost threshold crossings are located
/// by linear interpolation between samples.
pub fn mfd_1e2(intensity: &IntensityProfile, axis: Axis) -> Result<f64> {
    let k = peak_index(intensity)?;
    let g = &intensity.grid;
    let (ix, iy) = (k % g.nx, k / g.nx);
    let peak = intensity.values[k];
    let (cut, spacing): (Vec<f64>, f64) = match axis {
        Axis::H => ((0..g.nx).map(|i| intensity.values[g.index(i, iy)] / peak).collect(), g.dx),
        Axis::V => ((0..g.ny).map(|j| intensity.values[g.index(ix, j)] / peak).collect(), g.dy),
    };
    let thr = (-2.0f64).exp();
    let first = cut.iter().position(|&v| v >= thr).ok_or(Error::ZeroPower)?;
    let last = cut.iter().rposition(|&v| v >= thr).ok_or(Error::ZeroPower)?;
    if first == 0 || last == cut.len() - 1 {
        return Err(Error::NotContained(format!("1/e^2 contour reaches the {axis:?} grid edge")));
    }
    let left = (first - 1) as f64 + (thr - cut[first - 1]) / (cut[first] - cut[first - 1]);
    let right = last as f64 + (cut[last] - thr) / (cut[last] - cut[last + 1]);
    Ok((right - left) * spacing)
}

pub fn mfd_report(intensity: &IntensityProfile) -> Result<MfdReport> {
    let mfd_h = mfd_1e2(intensity, Axis::H)?;
    let mfd_v = mfd_1e2(intensity, Axis::V)?;
    let centroid = intensity.centroid().ok_or(Error::ZeroPower)?;
    Ok(MfdReport { mfd_h, mfd_v, area: PI * mfd_h * mfd_v / 4.0, centroid })
}

/// Second-moment (D4sigma) widths. Diagnostic only; reported MFDs use
/// [`mfd_1e2`].
pub fn d4sigma(intensity: &IntensityProfile) -> Result<(f64, f64)> {
    let (cx, cy) = intensity.centroid().ok_or(Error::ZeroPower)?;
    let (mut total, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), &v) in intensity.grid.coords().zip(&intensity.values) {
        total += v;
        sxx += v * (x - cx).powi(2);
        syy += v * (y - cy).powi(2);
    }
    Ok((4.0 * (sxx / total).sqrt(), 4.0 * (syy / total).sqrt()))
}

/// Normalised overlap `|<a, b>|^2 / (<a, a> <b, b>)`. `b` is resampled onto
/// `a`'s grid when the grids differ.
pub fn overlap_efficiency(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let b =
        if a.grid == b.grid { std::borrow::Cow::Borrowed(b) } else { std::borrow::Cow::Owned(resample(b, &a.grid)) };
    let pa = power(a);
    let pb = power(&b);
    if !(pa > 0.0) || !(pb > 0.0) {
        return Err(Error::ZeroPower);
    }
    let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    let da = a.grid.cell_area();
    let eta = (s * da).norm_sqr() / (pa * pb);
    debug_assert!(eta <= 1.0 + 1e-9, "overlap above unity: {eta}");
    Ok(eta.min(1.0))
}

/// Fiber mode centred on the origin.
pub fn fiber_mode(spec: &FiberSpec, wavelength_nm: f64, grid: &Grid2D) -> Result<ScalarField> {
    fiber_mode_at(spec, wavelength_nm, grid, (0.0, 0.0))
}

pub fn fiber_mode_at(spec: &FiberSpec, wavelength_nm: f64, grid: &Grid2D, center: (f64, f64)) -> Result<ScalarField> {
    let w = spec.mfd_at(wavelength_nm)? / 2.0;
    gaussian_field(grid, w, w, center, wavelength_nm)
}

/// Mode widths plus coupling into a fiber aligned on the mode's intensity
/// centroid.
pub fn coupling_report(field: &ScalarField, spec: &FiberSpec) -> Result<CouplingReport> {
    if !(field.wavelength_nm > 0.0) {
        return Err(invalid("field wavelength is not set"));
    }
    let mfd = mfd_report(&field.intensity())?;
    let fiber = fiber_mode_at(spec, field.wavelength_nm, &field.grid, mfd.centroid)?;
    let eta = overlap_efficiency(&fiber, field)?;
    Ok(CouplingReport { eta, mfd, fiber_mfd: spec.mfd_at(field.wavelength_nm)?, wavelength: field.wavelength_nm })
}
