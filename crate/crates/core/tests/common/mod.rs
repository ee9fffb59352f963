//! Independent reference solutions used by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use tapersim::field::Grid2D;
use tapersim::inscription::IndexProfile;

pub mod properties;

/// First zero of J0.
pub const J0_ZERO: f64 = 2.404_825_557_695_773;

/// Bessel J_n from its integral representation, trapezoid rule over one
/// period (spectrally accurate for the periodic integrand).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let t = k as f64 * h;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        s += w * (n as f64 * t - x * t.sin()).cos();
    }
    s * h / PI
}

/// Modified Bessel K_n from `int_0^inf exp(-x cosh t) cosh(n t) dt`.
pub fn bessel_k(n: i32, x: f64) -> f64 {
    let h = 0.005;
    let mut s = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let v = (-x * t.cosh()).exp() * (n as f64 * t).cosh();
        s += v;
        if v < 1e-300 || x * t.cosh() > 750.0 {
            break;
        }
        t += h;
    }
    s * h
}

/// Weakly guiding step-index fiber, scalar LP01 mode.
#[derive(Debug, Clone, Copy)]
pub struct StepIndex {
    pub radius: f64,
    pub n_core: f64,
    pub n_clad: f64,
    pub wavelength_nm: f64,
}

impl StepIndex {
    pub fn k0(&self) -> f64 {
        2.0 * PI / (self.wavelength_nm * 1e-3)
    }

    pub fn v(&self) -> f64 {
        self.radius * self.k0() * (self.n_core * self.n_core - self.n_clad * self.n_clad).sqrt()
    }

    /// Core parameter `u` solving `u J1(u)/J0(u) = w K1(w)/K0(w)`.
    pub fn u(&self) -> f64 {
        let v = self.v();
        let f = |u: f64| {
            let w = (v * v - u * u).sqrt();
            u * bessel_j(1, u) / bessel_j(0, u) - w * bessel_k(1, w) / bessel_k(0, w)
        };
        let (mut lo, mut hi) = (1e-9, v.min(J0_ZERO) - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn n_eff(&self) -> f64 {
        let (u, a, k0) = (self.u(), self.radius, self.k0());
        ((k0 * self.n_core).powi(2) - (u / a).powi(2)).sqrt() / k0
    }

    /// Radial field, 1 at the core boundary.
    pub fn field(&self, r: f64) -> f64 {
        let u = self.u();
        let w = (self.v().powi(2) - u * u).sqrt();
        let a = self.radius;
        if r <= a {
            bessel_j(0, u * r / a) / bessel_j(0, u)
        } else {
            bessel_k(0, w * r / a) / bessel_k(0, w)
        }
    }

    /// Full width where the intensity drops to `exp(-2)` of its peak.
    pub fn mfd(&self) -> f64 {
        let peak = self.field(0.0).powi(2);
        let (mut lo, mut hi) = (0.0, 20.0 * self.radius);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.field(mid).powi(2) > peak * (-2.0f64).exp() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo + hi
    }

    /// Index contrast averaged over each cell with `sub x sub` samples.
    pub fn profile(&self, grid: &Grid2D, sub: usize) -> IndexProfile {
        let dn = self.n_core - self.n_clad;
        let mut v = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let (cx, cy) = (grid.x(ix), grid.y(iy));
                let mut inside = 0;
                for sy in 0..sub {
                    for sx in 0..sub {
                        let x = cx + ((sx as f64 + 0.5) / sub as f64 - 0.5) * grid.dx;
                        let y = cy + ((sy as f64 + 0.5) / sub as f64 - 0.5) * grid.dy;
                        if x * x + y * y <= self.radius * self.radius {
                            inside += 1;
                        }
                    }
                }
                v.push(dn * inside as f64 / (sub * sub) as f64);
            }
        }
        IndexProfile::new(*grid, v, self.n_clad).unwrap()
    }
}

/// Power coupling between two aligned circular Gaussians of waists w1, w2.
pub fn gaussian_overlap(w1: f64, w2: f64) -> f64 {
    (2.0 * w1 * w2 / (w1 * w1 + w2 * w2)).powi(2)
}

/// 1/e^2 intensity radius of a Gaussian beam after `z_um` in index `n`.
pub fn beam_radius(w0: f64, z_um: f64, wavelength_nm: f64, n: f64) -> f64 {
    let zr = PI * w0 * w0 * n / (wavelength_nm * 1e-3);
    w0 * (1.0 + (z_um / zr).powi(2)).sqrt()
}

pub fn rayleigh_range(w0: f64, wavelength_nm: f64, n: f64) -> f64 {
    PI * w0 * w0 * n / (wavelength_nm * 1e-3)
}
