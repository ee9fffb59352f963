//! Config-driven experiment runs behind the `tapersim` command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{calibrate, Calibration, CalibrationSetup, CalibrationTargets};
use crate::coupling::{coupling_report, CouplingReport, FiberSpec, FIBER_WAVELENGTH_RANGE};
use crate::error::{invalid, Error, Result};
use crate::field::{make_grid, Grid2D};
use crate::inscription::{facet_profile, InscriptionParams, MaterialModel, TaperIndexMap};
use crate::mode::{solve_fundamental, GuidedMode, SolverConfig};
use crate::propagation::{adiabatic_scan, propagate_to_facet, PropagationConfig, Setup};

/// Transmission an adiabatic-scan row must reach to be flagged.
pub const ADIABATIC_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// `"calibrate"`, `"default"`, or a model file path relative to the config.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaterialSource {
    Calibrate,
    Default,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub extent_x_um: f64,
    pub extent_y_um: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { extent_x_um: 72.0, extent_y_um: 72.0, nx: 144, ny: 144 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub eta_regular: f64,
    pub eta_taper: f64,
    pub mfd_ratio: f64,
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let setup = CalibrationSetup::default();
        let t = CalibrationTargets::default();
        Self {
            eta_regular: t.eta_regular,
            eta_taper: t.eta_taper,
            mfd_ratio: t.mfd_ratio,
            tolerance: setup.tolerance,
            max_evaluations: setup.max_evaluations,
        }
    }
}

impl CalibrationConfig {
    pub fn targets(&self) -> CalibrationTargets {
        CalibrationTargets { eta_regular: self.eta_regular, eta_taper: self.eta_taper, mfd_ratio: self.mfd_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerRampSweep {
    pub pa_over_p0: Vec<f64>,
    pub reps: u32,
}

impl Default for PowerRampSweep {
    fn default() -> Self {
        Self { pa_over_p0: vec![0.667, 0.75, 0.833, 0.917, 1.0], reps: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavelengthSweep {
    pub wavelengths_nm: Vec<f64>,
    pub reps: u32,
}

impl Default for WavelengthSweep {
    fn default() -> Self {
        Self { wavelengths_nm: vec![632.8, 700.0, 750.0, 800.0, 850.0, 900.0, 950.0], reps: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepetitionSweep {
    pub reps: Vec<u32>,
}

impl Default for RepetitionSweep {
    fn default() -> Self {
        Self { reps: vec![0, 1, 2, 4, 8, 16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiabaticSweep {
    pub lengths_mm: Vec<f64>,
}

impl Default for AdiabaticSweep {
    fn default() -> Self {
        Self { lengths_mm: vec![0.25, 0.5, 1.0, 2.0, 3.0] }
    }
}

fn default_wavelength() -> f64 {
    800.0
}

/// Everything a command needs, read from one TOML file. Only `[material]`
/// is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Working wavelength for calibration and the power and repetition sweeps.
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    pub material: MaterialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub fiber: FiberSpec,
    #[serde(default)]
    pub inscription: InscriptionParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub power_ramp: PowerRampSweep,
    #[serde(default)]
    pub wavelength: WavelengthSweep,
    #[serde(default)]
    pub repetitions: RepetitionSweep,
    #[serde(default)]
    pub adiabatic_scan: AdiabaticSweep,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    raw: String,
}

fn strictly_increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("{name} must be finite and strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a config; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.raw = text.to_owned();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.fiber.validate()?;
        self.fiber.mfd_at(self.wavelength_nm)?;
        self.inscription.validate()?;
        self.solver.validate()?;
        self.propagation.validate(&grid)?;
        self.calibration.targets().validate()?;
        if !(self.calibration.tolerance > 0.0) || self.calibration.max_evaluations == 0 {
            return Err(invalid("calibration tolerance and max_evaluations must be positive"));
        }
        strictly_increasing("power_ramp.pa_over_p0", &self.power_ramp.pa_over_p0)?;
        for &pa in &self.power_ramp.pa_over_p0 {
            InscriptionParams { pa_over_p0: pa, ..self.inscription }.validate()?;
        }
        strictly_increasing("wavelength.wavelengths_nm", &self.wavelength.wavelengths_nm)?;
        let (lo, hi) = FIBER_WAVELENGTH_RANGE;
        if let Some(w) = self.wavelength.wavelengths_nm.iter().find(|w| !(lo..=hi).contains(*w)) {
            return Err(invalid(format!("sweep wavelength {w} nm outside [{lo}, {hi}]")));
        }
        let reps: Vec<f64> = self.repetitions.reps.iter().map(|&n| n as f64).collect();
        strictly_increasing("repetitions.reps", &reps)?;
        strictly_increasing("adiabatic_scan.lengths_mm", &self.adiabatic_scan.lengths_mm)?;
        if self.adiabatic_scan.lengths_mm[0] <= 0.0 {
            return Err(invalid("adiabatic_scan.lengths_mm must be positive"));
        }
        if let MaterialSource::File(p) = self.material_source() {
            if !p.is_file() {
                return Err(invalid(format!("material file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        let g = &self.grid;
        make_grid(g.extent_x_um, g.extent_y_um, g.nx, g.ny)
    }

    pub fn material_source(&self) -> MaterialSource {
        match self.material.source.as_str() {
            "calibrate" => MaterialSource::Calibrate,
            "default" => MaterialSource::Default,
            path => MaterialSource::File(self.base_dir.join(path)),
        }
    }

    pub fn calibration_setup(&self) -> Result<CalibrationSetup> {
        Ok(CalibrationSetup {
            params: self.inscription,
            grid: self.grid()?,
            wavelength_nm: self.wavelength_nm,
            fiber: self.fiber,
            solver: self.solver,
            tolerance: self.calibration.tolerance,
            max_evaluations: self.calibration.max_evaluations,
        })
    }

    /// SHA-256 of the config text as read.
    pub fn digest(&self) -> String {
        hex_digest(self.raw.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn load_model_file(path: &Path) -> Result<MaterialModel> {
    let text =
        fs::read_to_string(path).map_err(|e| invalid(format!("cannot read material file {}: {e}", path.display())))?;
    MaterialModel::from_toml_str(&text)
}

/// The material model a sweep runs with, calibrating first if asked to.
pub fn resolve_model(cfg: &ExperimentConfig) -> Result<MaterialModel> {
    match cfg.material_source() {
        MaterialSource::Default => Ok(MaterialModel::default()),
        MaterialSource::File(p) => load_model_file(&p),
        MaterialSource::Calibrate => {
            Ok(calibrate(&cfg.calibration.targets(), &cfg.calibration_setup()?, &MaterialModel::default())?.model)
        }
    }
}

/// One row of a sweep table. `value` is empty for baseline rows of sweeps
/// over writing parameters; `transmission` is present only when the row was
/// propagated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: Option<f64>,
    pub reps: u32,
    pub mfd_h: f64,
    pub mfd_v: f64,
    /// Mode area relative to the untapered guide at the same wavelength.
    pub area_ratio: f64,
    pub eta: f64,
    pub transmission: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(variable: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("{variable},reps,mfd_h_um,mfd_v_um,area_ratio,eta,transmission\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            opt(r.value),
            r.reps,
            r.mfd_h,
            r.mfd_v,
            r.area_ratio,
            r.eta,
            opt(r.transmission)
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub length_mm: f64,
    pub transmission: f64,
    /// Shortest length reaching [`ADIABATIC_THRESHOLD`].
    pub flagged: bool,
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("length_mm,transmission,first_above_99\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.length_mm, r.transmission, u8::from(r.flagged));
    }
    s
}

/// Facet mode of a writing recipe and its coupling figures.
fn facet_point(
    params: &InscriptionParams,
    model: &MaterialModel,
    grid: &Grid2D,
    wavelength_nm: f64,
    cfg: &ExperimentConfig,
) -> Result<(GuidedMode, CouplingReport)> {
    let profile = facet_profile(params, model, grid)?;
    let mode = solve_fundamental(&profile, wavelength_nm, &cfg.solver)?;
    let report = coupling_report(&mode.field, &cfg.fiber)?;
    grid.validate_extent(report.mfd.mfd_h, report.mfd.mfd_v)?;
    Ok((mode, report))
}

fn row(value: Option<f64>, reps: u32, r: &CouplingReport, baseline_area: f64) -> SweepRow {
    SweepRow {
        value,
        reps,
        mfd_h: r.mfd.mfd_h,
        mfd_v: r.mfd.mfd_v,
        area_ratio: r.mfd.area / baseline_area,
        eta: r.eta,
        transmission: None,
    }
}

/// Facet modes of `N`-rerun tapers over the configured ramp end powers,
/// preceded by the untapered baseline.
pub fn sweep_power(cfg: &ExperimentConfig, model: &MaterialModel) -> Result<Vec<SweepRow>> {
    let grid = cfg.grid()?;
    let n = cfg.power_ramp.reps;
    let jobs: Vec<(Option<f64>, InscriptionParams)> = std::iter::once((None, cfg.inscription.with_reps(0)))
        .chain(
            cfg.power_ramp
                .pa_over_p0
                .iter()
                .map(|&pa| (Some(pa), InscriptionParams { pa_over_p0: pa, reps: n, ..cfg.inscription })),
        )
        .collect();
    let reports = jobs
        .par_iter()
        .map(|(_, p)| facet_point(p, model, &grid, cfg.wavelength_nm, cfg).map(|(_, r)| r))
        .collect::<Result<Vec<_>>>()?;
    let base = reports[0].mfd.area;
    Ok(jobs.iter().zip(&reports).map(|((v, p), r)| row(*v, p.reps, r, base)).collect())
}

/// Untapered and tapered facet modes at each configured wavelength.
pub fn sweep_wavelength(cfg: &ExperimentConfig, model: &MaterialModel) -> Result<Vec<SweepRow>> {
    let grid = cfg.grid()?;
    let tapered = cfg.inscription.with_reps(cfg.wavelength.reps);
    let jobs: Vec<(f64, InscriptionParams)> =
        cfg.wavelength.wavelengths_nm.iter().flat_map(|&w| [(w, cfg.inscription.with_reps(0)), (w, tapered)]).collect();
    let reports = jobs
        .par_iter()
        .map(|(w, p)| facet_point(p, model, &grid, *w, cfg).map(|(_, r)| r))
        .collect::<Result<Vec<_>>>()?;
    Ok(jobs
        .chunks(2)
        .zip(reports.chunks(2))
        .flat_map(|(j, r)| {
            let base = r[0].mfd.area;
            [row(Some(j[0].0), j[0].1.reps, &r[0], base), row(Some(j[1].0), j[1].1.reps, &r[1], base)]
        })
        .collect())
}

/// Coupling and transmission for each configured number of reruns.
pub fn sweep_reps(cfg: &ExperimentConfig, model: &MaterialModel) -> Result<Vec<SweepRow>> {
    let grid = cfg.grid()?;
    let (input, base) = facet_point(&cfg.inscription.with_reps(0), model, &grid, cfg.wavelength_nm, cfg)?;
    cfg.repetitions
        .reps
        .par_iter()
        .map(|&n| {
            let params = cfg.inscription.with_reps(n);
            let (facet, report) = facet_point(&params, model, &grid, cfg.wavelength_nm, cfg)?;
            let map = TaperIndexMap::taper_only(params, *model, grid)?;
            let t = propagate_to_facet(&map, &input.field, &facet, &cfg.propagation, None)?.transmission;
            let value = (n > 0).then_some(params.pa_over_p0);
            Ok(SweepRow { transmission: Some(t), ..row(value, n, &report, base.mfd.area) })
        })
        .collect()
}

/// Taper transmission against taper length, flagging the shortest length
/// above [`ADIABATIC_THRESHOLD`].
pub fn scan_lengths(cfg: &ExperimentConfig, model: &MaterialModel) -> Result<Vec<ScanRow>> {
    let setup =
        Setup { grid: cfg.grid()?, wavelength_nm: cfg.wavelength_nm, propagation: cfg.propagation, solver: cfg.solver };
    let entries = adiabatic_scan(&cfg.inscription, model, &cfg.adiabatic_scan.lengths_mm, &setup)?;
    let mut rows = Vec::with_capacity(entries.len());
    let mut flagged = false;
    for e in entries {
        let transmission = e.transmission?;
        let flag = !flagged && transmission >= ADIABATIC_THRESHOLD;
        flagged |= flag;
        rows.push(ScanRow { length_mm: e.length_mm, transmission, flagged: flag });
    }
    Ok(rows)
}

/// Writes the `run.meta` provenance record and the model used.
fn write_run_files(cfg: &ExperimentConfig, model: &MaterialModel, command: &str, out: &Path) -> Result<()> {
    let model_text = model.to_toml_string();
    fs::write(out.join("model.toml"), &model_text)?;
    let meta = format!(
        "command={command}\nconfig_sha256={}\nmodel_sha256={}\n",
        cfg.digest(),
        hex_digest(model_text.as_bytes())
    );
    fs::write(out.join("run.meta"), meta)?;
    Ok(())
}

/// Calibrates, starting from the configured model file if there is one, and
/// writes `model.toml`, `calibration.csv` and `run.meta`. A non-converged
/// fit still writes its best model and report before failing.
pub fn cmd_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<Calibration> {
    let start = match cfg.material_source() {
        MaterialSource::File(p) => load_model_file(&p)?,
        _ => MaterialModel::default(),
    };
    fs::create_dir_all(out)?;
    let result = calibrate(&cfg.calibration.targets(), &cfg.calibration_setup()?, &start);
    let calibration = match &result {
        Ok(c) => c,
        Err(Error::CalibrationNotConverged(c)) => c.as_ref(),
        Err(_) => return result,
    };
    let mut report = Vec::new();
    calibration.write_report(&mut report)?;
    fs::write(out.join("calibration.csv"), report)?;
    write_run_files(cfg, &calibration.model, "calibrate", out)?;
    result
}

fn run_sweep<T>(
    cfg: &ExperimentConfig,
    out: &Path,
    command: &str,
    file: &str,
    sweep: impl FnOnce(&ExperimentConfig, &MaterialModel) -> Result<T>,
    render: impl FnOnce(&T) -> String,
) -> Result<T> {
    let model = resolve_model(cfg)?;
    let rows = sweep(cfg, &model)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(file), render(&rows))?;
    write_run_files(cfg, &model, command, out)?;
    Ok(rows)
}

pub fn cmd_sweep_power(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    run_sweep(cfg, out, "sweep-power", "sweep_power.csv", sweep_power, |r| sweep_csv("pa_over_p0", r))
}

pub fn cmd_sweep_wavelength(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    run_sweep(cfg, out, "sweep-wavelength", "sweep_wavelength.csv", sweep_wavelength, |r| sweep_csv("wavelength_nm", r))
}

pub fn cmd_sweep_reps(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    run_sweep(cfg, out, "sweep-reps", "sweep_reps.csv", sweep_reps, |r| sweep_csv("pa_over_p0", r))
}

pub fn cmd_adiabatic_scan(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ScanRow>> {
    run_sweep(cfg, out, "adiabatic-scan", "adiabatic_scan.csv", scan_lengths, |r| scan_csv(r))
}
