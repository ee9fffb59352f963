//! Fitting the material model to measured coupling and mode-size targets.

use std::io::Write;

use crate::coupling::{coupling_report, CouplingReport, FiberSpec};
use crate::error::{invalid, Error, Result};
use crate::field::{make_grid, Grid2D};
use crate::inscription::{facet_profile, single_pass_profile, InscriptionParams, MaterialModel};
use crate::mode::{solve_fundamental, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// Coupling efficiency of the untapered waveguide.
    pub eta_regular: f64,
    /// Coupling efficiency at the facet of the reference taper.
    pub eta_taper: f64,
    /// Untapered H-axis MFD over the fiber MFD.
    pub mfd_ratio: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self { eta_regular: 0.52, eta_taper: 0.77, mfd_ratio: 2.0 }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_regular", self.eta_regular), ("eta_taper", self.eta_taper)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("target {name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.mfd_ratio > 0.0 && self.mfd_ratio.is_finite()) {
            return Err(invalid(format!("target mfd_ratio must be positive, got {}", self.mfd_ratio)));
        }
        Ok(())
    }
}

/// Forward-simulation settings the targets are evaluated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSetup {
    /// Reference taper; its facet provides the `eta_taper` value.
    pub params: InscriptionParams,
    pub grid: Grid2D,
    pub wavelength_nm: f64,
    pub fiber: FiberSpec,
    pub solver: SolverConfig,
    /// Objective value regarded as converged.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for CalibrationSetup {
    fn default() -> Self {
        Self {
            params: InscriptionParams::default(),
            grid: make_grid(72.0, 72.0, 144, 144).expect("valid default grid"),
            wavelength_nm: 800.0,
            fiber: FiberSpec::default(),
            solver: SolverConfig::default(),
            tolerance: 1e-7,
            max_evaluations: 600,
        }
    }
}

/// Simulated values of the calibrated quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Achieved {
    pub regular: CouplingReport,
    pub taper: CouplingReport,
    pub mfd_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub model: MaterialModel,
    pub targets: CalibrationTargets,
    pub achieved: Achieved,
    /// Sum of squared relative errors.
    pub residual: f64,
    pub evaluations: usize,
    pub converged: bool,
}

pub const REPORT_HEADER: &str = "target,goal,achieved,rel_error";

impl Calibration {
    /// `(name, goal, achieved)` for each target.
    pub fn rows(&self) -> [(&'static str, f64, f64); 3] {
        rows(&self.targets, &self.achieved)
    }

    pub fn write_report<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for (name, goal, achieved) in self.rows() {
            writeln!(out, "{name},{goal},{achieved},{}", (achieved - goal) / goal)?;
        }
        Ok(())
    }
}

fn rows(t: &CalibrationTargets, a: &Achieved) -> [(&'static str, f64, f64); 3] {
    [
        ("eta_regular", t.eta_regular, a.regular.eta),
        ("eta_taper", t.eta_taper, a.taper.eta),
        ("mfd_ratio", t.mfd_ratio, a.mfd_ratio),
    ]
}

fn objective(t: &CalibrationTargets, a: &Achieved) -> f64 {
    rows(t, a).iter().map(|(_, goal, got)| ((got - goal) / goal).powi(2)).sum()
}

/// Runs the forward model for the untapered guide and the reference taper.
pub fn evaluate(model: &MaterialModel, setup: &CalibrationSetup) -> Result<Achieved> {
    model.validate()?;
    setup.params.validate()?;
    let regular = single_pass_profile(setup.params.p0, model, &setup.grid)?;
    let facet = facet_profile(&setup.params, model, &setup.grid)?;
    let (a, b) = rayon::join(
        || solve_fundamental(&regular, setup.wavelength_nm, &setup.solver),
        || solve_fundamental(&facet, setup.wavelength_nm, &setup.solver),
    );
    let regular = coupling_report(&a?.field, &setup.fiber)?;
    let taper = coupling_report(&b?.field, &setup.fiber)?;
    let mfd_ratio = regular.mfd.mfd_h / setup.fiber.mfd_at(setup.wavelength_nm)?;
    Ok(Achieved { regular, taper, mfd_ratio })
}

const N_FREE: usize = 6;

fn pack(m: &MaterialModel) -> [f64; N_FREE] {
    [m.dn_max, m.wx0, m.wy0, m.volume_slope_x, m.volume_slope_y, m.saturation_dose].map(f64::ln)
}

fn unpack(v: &[f64; N_FREE], base: &MaterialModel) -> MaterialModel {
    let e = v.map(f64::exp);
    MaterialModel {
        dn_max: e[0],
        wx0: e[1],
        wy0: e[2],
        volume_slope_x: e[3],
        volume_slope_y: e[4],
        saturation_dose: e[5],
        ..*base
    }
}

/// Nelder-Mead over the logarithms of the free material constants, starting
/// from `start` with a fixed simplex. Models that fail validation or lose
/// their guided mode score as infinitely bad.
pub fn calibrate(targets: &CalibrationTargets, setup: &CalibrationSetup, start: &MaterialModel) -> Result<Calibration> {
    targets.validate()?;
    start.validate()?;
    if !(setup.tolerance > 0.0) || setup.max_evaluations == 0 {
        return Err(invalid("calibration tolerance and evaluation budget must be positive"));
    }
    let first = evaluate(start, setup)?;
    let f0 = objective(targets, &first);
    let finish = |model: MaterialModel, achieved: Achieved, evaluations: usize| {
        let residual = objective(targets, &achieved);
        let c = Calibration {
            model,
            targets: *targets,
            achieved,
            residual,
            evaluations,
            converged: residual <= setup.tolerance,
        };
        if c.converged {
            Ok(c)
        } else {
            Err(Error::CalibrationNotConverged(Box::new(c)))
        }
    };
    if f0 <= setup.tolerance {
        return finish(*start, first, 1);
    }

    let evaluations = std::cell::Cell::new(1usize);
    let score = |v: &[f64; N_FREE]| -> f64 {
        evaluations.set(evaluations.get() + 1);
        let m = unpack(v, start);
        if m.validate().is_err() {
            return f64::INFINITY;
        }
        evaluate(&m, setup).map_or(f64::INFINITY, |a| objective(targets, &a))
    };

    let x0 = pack(start);
    let mut simplex: Vec<([f64; N_FREE], f64)> = vec![(x0, f0)];
    for i in 0..N_FREE {
        let mut v = x0;
        v[i] += 0.1;
        let f = score(&v);
        simplex.push((v, f));
    }

    let centroid = |s: &[([f64; N_FREE], f64)]| {
        let mut c = [0.0; N_FREE];
        for (v, _) in &s[..N_FREE] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / N_FREE as f64;
            }
        }
        c
    };
    let along = |c: &[f64; N_FREE], w: &[f64; N_FREE], t: f64| {
        let mut out = [0.0; N_FREE];
        for i in 0..N_FREE {
            out[i] = c[i] + t * (w[i] - c[i]);
        }
        out
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let budget_left = evaluations.get() < setup.max_evaluations;
        if simplex[0].1 <= setup.tolerance || !budget_left {
            break;
        }
        let spread = simplex[N_FREE].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() < 1e-14 && size < 1e-8 {
            break;
        }

        let c = centroid(&simplex);
        let worst = simplex[N_FREE];
        let xr = along(&c, &worst.0, -1.0);
        let fr = score(&xr);
        if fr < simplex[0].1 {
            let xe = along(&c, &worst.0, -2.0);
            let fe = score(&xe);
            simplex[N_FREE] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N_FREE - 1].1 {
            simplex[N_FREE] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(&c, &xr, 0.5);
                (x, score(&x))
            } else {
                let x = along(&c, &worst.0, 0.5);
                (x, score(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[N_FREE] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = along(&best, &entry.0, 0.5);
                    *entry = (x, score(&x));
                }
            }
        }
    }

    let best = unpack(&simplex[0].0, start);
    let achieved = evaluate(&best, setup)?;
    finish(best, achieved, evaluations.get() + 1)
}

/// Calibrates against `targets` with the default setup and starting model.
pub fn calibrate_model(targets: &CalibrationTargets) -> Result<Calibration> {
    calibrate(targets, &CalibrationSetup::default(), &MaterialModel::default())
}
