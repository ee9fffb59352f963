//! Fundamental guided mode of a weakly guiding index profile.
//!
//! Solves the scalar Helmholtz eigenproblem
//! `(d2/dx2 + d2/dy2 + k0^2 n(x, y)^2) E = beta^2 E`
//! with the five-point Laplacian and zero-Dirichlet walls. The largest
//! eigenvalue is isolated by inverse iteration on `sigma I - A` with the
//! shift `sigma = k0^2 (n_clad + max dn)^2` above the whole spectrum, which
//! makes the shifted operator positive definite and lets a banded Cholesky
//! factor be reused across iterations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Grid2D, ScalarField};
use crate::inscription::IndexProfile;
use crate::linalg::BandCholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    ZeroDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bound on `||A E - beta^2 E|| / ||E||`, in um^-2.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub boundary: Boundary,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_iterations: 1000, boundary: Boundary::ZeroDirichlet }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Fundamental eigenmode: real field with unit power and a positive peak.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedMode {
    pub field: ScalarField,
    pub n_eff: f64,
    pub wavelength_nm: f64,
    pub residual: f64,
}

impl GuidedMode {
    /// Metadata line stored beside a CSV field dump.
    pub fn sidecar_line(&self) -> String {
        format!("n_eff={},wavelength_nm={},residual={}", self.n_eff, self.wavelength_nm, self.residual)
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.field.values.iter().map(|v| v.re).collect()
    }
}

/// Parsed mode sidecar line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSidecar {
    pub n_eff: f64,
    pub wavelength_nm: f64,
    pub residual: f64,
}

pub fn parse_mode_sidecar(line: &str) -> Result<ModeSidecar> {
    let mut n_eff = None;
    let mut wavelength = None;
    let mut residual = None;
    for part in line.trim().split(',') {
        let (key, value) =
            part.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::Parse(format!("bad number for {key}: {value:?}")))?;
        let slot = match key.trim() {
            "n_eff" => &mut n_eff,
            "wavelength_nm" => &mut wavelength,
            "residual" => &mut residual,
            other => return Err(Error::Parse(format!("unknown sidecar key {other:?}"))),
        };
        if slot.replace(v).is_some() {
            return Err(Error::Parse(format!("duplicate sidecar key {key:?}")));
        }
    }
    match (n_eff, wavelength, residual) {
        (Some(n_eff), Some(wavelength_nm), Some(residual)) => Ok(ModeSidecar { n_eff, wavelength_nm, residual }),
        _ => Err(Error::Parse("sidecar needs n_eff, wavelength_nm and residual".into())),
    }
}

/// Writes `<stem>.csv` (field dump) and `<stem>.meta` (sidecar line).
pub fn export_mode(mode: &GuidedMode, dir: &std::path::Path, stem: &str) -> Result<()> {
    let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    crate::io::write_field_csv(&mode.field, std::io::BufWriter::new(file))?;
    let mut meta = mode.sidecar_line();
    meta.push('\n');
    std::fs::write(dir.join(format!("{stem}.meta")), meta)?;
    Ok(())
}

/// Vacuum wavenumber in um^-1 for a wavelength in nm.
pub fn wavenumber(wavelength_nm: f64) -> f64 {
    2.0 * PI / (wavelength_nm * 1e-3)
}

/// `out = (L + k0^2 n^2) x` on the natural grid ordering.
fn apply_helmholtz(profile: &IndexProfile, k0: f64, x: &[f64], out: &mut [f64]) {
    let g = &profile.grid;
    let (cx, cy) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    let k0sq = k0 * k0;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let k = g.index(ix, iy);
            let c = x[k];
            let left = if ix > 0 { x[k - 1] } else { 0.0 };
            let right = if ix + 1 < g.nx { x[k + 1] } else { 0.0 };
            let down = if iy > 0 { x[k - g.nx] } else { 0.0 };
            let up = if iy + 1 < g.ny { x[k + g.nx] } else { 0.0 };
            let n = profile.index(k);
            out[k] = cx * (left + right - 2.0 * c) + cy * (down + up - 2.0 * c) + k0sq * n * n * c;
        }
    }
}

fn residual_norm(profile: &IndexProfile, k0: f64, x: &[f64], beta_sq: f64, scratch: &mut [f64]) -> f64 {
    apply_helmholtz(profile, k0, x, scratch);
    let r: f64 = scratch.iter().zip(x).map(|(a, v)| (a - beta_sq * v).powi(2)).sum();
    let nx: f64 = x.iter().map(|v| v * v).sum();
    (r / nx).sqrt()
}

/// Eigen-equation residual `||(L + k0^2 n^2) E - beta^2 E|| / ||E||` of a mode
/// evaluated against `profile`.
pub fn mode_residual(mode: &GuidedMode, profile: &IndexProfile) -> Result<f64> {
    mode.field.grid.ensure_same(&profile.grid)?;
    let k0 = wavenumber(mode.wavelength_nm);
    let beta_sq = (k0 * mode.n_eff).powi(2);
    let x = mode.real_values();
    let mut scratch = vec![0.0; x.len()];
    Ok(residual_norm(profile, k0, &x, beta_sq, &mut scratch))
}

/// Maps between the natural ordering and the solver ordering, which runs
/// fastest along the shorter axis to minimise the bandwidth.
struct Ordering {
    transposed: bool,
    inner: usize,
    d_inner: f64,
    d_outer: f64,
}

impl Ordering {
    fn new(g: &Grid2D) -> Self {
        if g.nx <= g.ny {
            Self { transposed: false, inner: g.nx, d_inner: g.dx, d_outer: g.dy }
        } else {
            Self { transposed: true, inner: g.ny, d_inner: g.dy, d_outer: g.dx }
        }
    }

    /// Natural index of solver index `s`.
    #[inline]
    fn natural(&self, g: &Grid2D, s: usize) -> usize {
        let (i, o) = (s % self.inner, s / self.inner);
        if self.transposed {
            g.index(o, i)
        } else {
            g.index(i, o)
        }
    }
}

pub fn solve_fundamental(profile: &IndexProfile, wavelength_nm: f64, config: &SolverConfig) -> Result<GuidedMode> {
    solve_fundamental_from(profile, wavelength_nm, config, None)
}

/// As [`solve_fundamental`], starting inverse iteration from `guess`
/// (natural ordering) when given.
pub fn solve_fundamental_from(
    profile: &IndexProfile,
    wavelength_nm: f64,
    config: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<GuidedMode> {
    config.validate()?;
    if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength_nm}")));
    }
    let g = profile.grid;
    let k0 = wavenumber(wavelength_nm);
    let cutoff = (k0 * profile.n_clad).powi(2);
    let max_dn = profile.max_dn();
    if max_dn <= 0.0 {
        let box_mode = cutoff - (PI / g.extent_x()).powi(2) - (PI / g.extent_y()).powi(2);
        return Err(Error::Cutoff { beta_sq: box_mode, cutoff });
    }
    let sigma = (k0 * (profile.n_clad + max_dn)).powi(2);
    let ord = Ordering::new(&g);
    let n = g.len();
    let perm: Vec<usize> = (0..n).map(|s| ord.natural(&g, s)).collect();
    let (ci, co) = (1.0 / (ord.d_inner * ord.d_inner), 1.0 / (ord.d_outer * ord.d_outer));
    let k0sq = k0 * k0;
    let b = ord.inner;

    let chol = BandCholesky::factor(n, b, |s, row| {
        let nk = profile.index(perm[s]);
        row[b] = sigma - k0sq * nk * nk + 2.0 * ci + 2.0 * co;
        if s % ord.inner > 0 {
            row[b - 1] = -ci;
        }
        if s >= ord.inner {
            row[0] = -co;
        }
    })
    .ok_or_else(|| invalid("shifted Helmholtz operator is not positive definite"))?;

    let mut x: Vec<f64> = match guess {
        Some(v) if v.len() == n && v.iter().any(|a| *a != 0.0) => perm.iter().map(|&k| v[k]).collect(),
        Some(v) if v.len() != n => {
            return Err(Error::GridMismatch(format!("guess has {} samples, grid {}", v.len(), n)))
        }
        _ => perm.iter().map(|&k| profile.dn[k] / max_dn + 1e-3).collect(),
    };
    normalize(&mut x);

    // Helmholtz operator in solver ordering.
    let apply = |v: &[f64], out: &mut [f64]| {
        for s in 0..n {
            let i = s % ord.inner;
            let c = v[s];
            let lo = if i > 0 { v[s - 1] } else { 0.0 };
            let hi = if i + 1 < ord.inner { v[s + 1] } else { 0.0 };
            let down = if s >= ord.inner { v[s - ord.inner] } else { 0.0 };
            let up = if s + ord.inner < n { v[s + ord.inner] } else { 0.0 };
            let nk = profile.index(perm[s]);
            out[s] = ci * (lo + hi - 2.0 * c) + co * (down + up - 2.0 * c) + k0sq * nk * nk * c;
        }
    };

    let mut ax = vec![0.0; n];
    let mut beta_sq = 0.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        chol.solve_in_place(&mut x);
        normalize(&mut x);
        apply(&x, &mut ax);
        beta_sq = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        residual = ax.iter().zip(&x).map(|(a, v)| (a - beta_sq * v).powi(2)).sum::<f64>().sqrt();
        if residual <= config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations: config.max_iterations, residual });
    }
    if beta_sq <= cutoff {
        return Err(Error::Cutoff { beta_sq, cutoff });
    }

    let mut natural = vec![0.0; n];
    for (s, &k) in perm.iter().enumerate() {
        natural[k] = x[s];
    }
    let peak = natural.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    let scale = peak.signum() / (natural.iter().map(|v| v * v).sum::<f64>() * g.cell_area()).sqrt();
    let values: Vec<Complex64> = natural.iter().map(|v| Complex64::new(v * scale, 0.0)).collect();
    let n_eff = beta_sq.sqrt() / k0;
    let mut mode =
        GuidedMode { field: ScalarField { grid: g, values, wavelength_nm }, n_eff, wavelength_nm, residual: 0.0 };
    mode.residual = mode_residual(&mode, profile)?;
    Ok(mode)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
}
