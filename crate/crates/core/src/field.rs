//! Transverse grids and the complex scalar fields sampled on them.
//!
//! Lengths are micrometres throughout; wavelengths are carried in
//! nanometres and converted where a wavenumber is needed. Samples are stored
//! row-major: `values[iy * nx + ix]`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Minimum sample count per axis.
pub const MIN_SAMPLES: usize = 8;

/// Uniform rectangular sampling of the transverse plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    /// Sample spacing along x, in um.
    pub dx: f64,
    /// Sample spacing along y, in um.
    pub dy: f64,
    /// x coordinate of the first sample, in um.
    pub x0: f64,
    /// y coordinate of the first sample, in um.
    pub y0: f64,
}

/// Grid of `nx` x `ny` samples covering `extent_x` x `extent_y` um, centred on
/// the origin.
pub fn make_grid(extent_x: f64, extent_y: f64, nx: usize, ny: usize) -> Result<Grid2D> {
    if !(extent_x > 0.0 && extent_y > 0.0) || !extent_x.is_finite() || !extent_y.is_finite() {
        return Err(invalid(format!("grid extents must be positive, got {extent_x} x {extent_y}")));
    }
    if nx < MIN_SAMPLES || ny < MIN_SAMPLES {
        return Err(invalid(format!("grid needs at least {MIN_SAMPLES} samples per axis, got {nx} x {ny}")));
    }
    Ok(Grid2D { nx, ny, dx: extent_x / nx as f64, dy: extent_y / ny as f64, x0: -extent_x / 2.0, y0: -extent_y / 2.0 })
}

impl Grid2D {
    /// Checked constructor for explicitly placed grids (e.g. parsed files).
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < MIN_SAMPLES || ny < MIN_SAMPLES {
            return Err(invalid(format!("grid needs at least {MIN_SAMPLES} samples per axis, got {nx} x {ny}")));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(invalid(format!("grid spacing must be positive, got {dx}, {dy}")));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(Self { nx, ny, dx, dy, x0, y0 })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.dy
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Area element `dx * dy`.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Iterator over `(x, y)` sample coordinates in storage order.
    pub fn coords(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| (self.x(ix), self.y(iy))))
    }

    /// Checks that the grid is at least four mode-field diameters wide on each
    /// axis, so that fields reach numerical zero at the boundary.
    pub fn validate_extent(&self, mfd_h: f64, mfd_v: f64) -> Result<()> {
        if self.extent_x() < 4.0 * mfd_h || self.extent_y() < 4.0 * mfd_v {
            return Err(Error::NotContained(format!(
                "grid {:.2} x {:.2} um is smaller than 4x the mode field ({mfd_h:.2} x {mfd_v:.2} um)",
                self.extent_x(),
                self.extent_y()
            )));
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &Grid2D) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{}x{} @ ({}, {}) vs {}x{} @ ({}, {})",
                self.nx, self.ny, self.dx, self.dy, other.nx, other.ny, other.dx, other.dy
            )));
        }
        Ok(())
    }
}

/// Complex scalar field on a grid, tagged with its vacuum wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
    pub wavelength_nm: f64,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<Complex64>, wavelength_nm: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("field has {} samples but grid holds {}", values.len(), grid.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("field contains non-finite samples"));
        }
        Ok(Self { grid, values, wavelength_nm })
    }

    pub fn zeros(grid: Grid2D, wavelength_nm: f64) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()], wavelength_nm }
    }

    /// Builds a real field from real samples.
    pub fn from_real(grid: Grid2D, values: &[f64], wavelength_nm: f64) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), wavelength_nm)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect(), wavelength_nm: self.wavelength_nm }
    }

    pub fn intensity(&self) -> IntensityProfile {
        IntensityProfile { grid: self.grid, values: self.values.iter().map(|v| v.norm_sqr()).collect() }
    }

    /// Rescales to unit power. Fails on an all-zero field.
    pub fn normalized(&self) -> Result<Self> {
        let p = power(self);
        if !(p > 0.0) {
            return Err(Error::ZeroPower);
        }
        Ok(self.scaled(Complex64::new(1.0 / p.sqrt(), 0.0)))
    }

    /// Discrete inner product `sum conj(self) * other * dA` on a shared grid.
    pub fn inner(&self, other: &ScalarField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_area())
    }
}

/// Non-negative intensity samples, e.g. a camera near-field image.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl IntensityProfile {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("profile has {} samples but grid holds {}", values.len(), grid.len())));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("intensity samples must be finite and non-negative"));
        }
        Ok(Self { grid, values })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Intensity-weighted centre of mass, `None` for an all-zero profile.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut total = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for ((x, y), &v) in self.grid.coords().zip(&self.values) {
            total += v;
            sx += v * x;
            sy += v * y;
        }
        (total > 0.0).then(|| (sx / total, sy / total))
    }
}

/// Elliptical Gaussian `exp(-((x-cx)^2/wx^2 + (y-cy)^2/wy^2))` normalised to
/// unit power. The intensity falls to 1/e^2 at `|x - cx| = wx`.
pub fn gaussian_field(grid: &Grid2D, wx: f64, wy: f64, center: (f64, f64), wavelength_nm: f64) -> Result<ScalarField> {
    if !(wx > 0.0 && wy > 0.0) || !wx.is_finite() || !wy.is_finite() {
        return Err(invalid(format!("Gaussian waists must be positive, got {wx}, {wy}")));
    }
    let (cx, cy) = center;
    let values = grid
        .coords()
        .map(|(x, y)| {
            let u = (x - cx) / wx;
            let v = (y - cy) / wy;
            Complex64::new((-(u * u + v * v)).exp(), 0.0)
        })
        .collect();
    ScalarField { grid: *grid, values, wavelength_nm }.normalized()
}

/// Total power, midpoint rule: `sum |E|^2 dx dy`.
pub fn power(field: &ScalarField) -> f64 {
    field.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * field.grid.cell_area()
}

/// Bilinear resampling onto `target`. Samples outside the source's sampled
/// extent are zero.
pub fn resample(field: &ScalarField, target: &Grid2D) -> ScalarField {
    if field.grid == *target {
        return field.clone();
    }
    let src = &field.grid;
    let zero = Complex64::new(0.0, 0.0);
    let mut values = Vec::with_capacity(target.len());
    for iy in 0..target.ny {
        let fy = (target.y(iy) - src.y0) / src.dy;
        for ix in 0..target.nx {
            let fx = (target.x(ix) - src.x0) / src.dx;
            values.push(bilinear(&field.values, src, fx, fy).unwrap_or(zero));
        }
    }
    ScalarField { grid: *target, values, wavelength_nm: field.wavelength_nm }
}

fn bilinear(values: &[Complex64], src: &Grid2D, fx: f64, fy: f64) -> Option<Complex64> {
    const EDGE: f64 = 1e-9;
    let max_x = (src.nx - 1) as f64;
    let max_y = (src.ny - 1) as f64;
    if !(fx >= -EDGE && fx <= max_x + EDGE && fy >= -EDGE && fy <= max_y + EDGE) {
        return None;
    }
    let fx = fx.clamp(0.0, max_x);
    let fy = fy.clamp(0.0, max_y);
    let ix = (fx.floor() as usize).min(src.nx - 2);
    let iy = (fy.floor() as usize).min(src.ny - 2);
    let tx = fx - ix as f64;
    let ty = fy - iy as f64;
    let v00 = values[src.index(ix, iy)];
    let v10 = values[src.index(ix + 1, iy)];
    let v01 = values[src.index(ix, iy + 1)];
    let v11 = values[src.index(ix + 1, iy + 1)];
    Some(v00 * ((1.0 - tx) * (1.0 - ty)) + v10 * (tx * (1.0 - ty)) + v01 * ((1.0 - tx) * ty) + v11 * (tx * ty))
}
