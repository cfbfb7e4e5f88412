//! Supersolution calculus and the closed-form Hardy bounds.
//!
//! The certificate is φ = θ^α with θ = e^{2πρ} + e^{−2πρ} − 2cos(2πa)
//! = 4(sinh²(πρ) + sin²(πa)). For dh = 1 the pointwise ratio is
//!
//! ```text
//! −Δφ/(Vφ) = −2α(d−2) − 4α²π·ρ(e^{2πρ}+e^{−2πρ}+2cos 2πa)/(e^{2πρ}−e^{−2πρ})
//! ```
//!
//! whose geometric factor is bounded by C₁(R) = R√d·coth(πR√d) on C_R;
//! maximizing over α at α = −(d−2)/(4πC₁) yields the lower Hardy bound
//! (d−2)²/(4πC₁(R)).
//!
//! The Laplacian identities Δρ = d(d−2)/(d²h²ρ) and div(∇ρ/ρ) =
//! d(d−3)/(d²h²ρ²) follow the general-h derivation (self-consistent with
//! the pole limit of the ratio); finite differences adjudicate them here.

use crate::geometry::{reduced_coords, LatticeConfig, ReducedCoords};
use crate::potential::RHO_SWITCH;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Exponent of the supersolution family φ = θ^α.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SupersolutionParams {
    pub alpha: f64,
}

/// Analytic first/second-order calculus of a and ρ at a point, with the
/// worst finite-difference discrepancy across all checked quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalculusReport {
    pub grad_a: Vec<f64>,
    pub grad_rho: Vec<f64>,
    pub lap_rho: f64,
    pub norm2_grad_rho: f64,
    pub div_grad_rho_over_rho: f64,
    pub dot_grad_rho_grad_a: f64,
    pub fd_max_error: f64,
}

/// θ(a, ρ) = e^{2πρ} + e^{−2πρ} − 2cos(2πa), in the exact rewrite
/// 4(sinh²(πρ) + sin²(πa)); zero exactly at the poles.
pub fn theta(c: ReducedCoords) -> f64 {
    // fold to the nearest integer so periodicity (and the pole zeros) are
    // exact in floating point
    let a_star = c.a - c.a.round();
    let sh = (PI * c.rho).sinh();
    let sn = (PI * a_star).sin();
    4.0 * (sh * sh + sn * sn)
}

/// ∂θ/∂a and ∂θ/∂ρ.
pub fn theta_grad(c: ReducedCoords) -> (f64, f64) {
    let a_star = c.a - c.a.round();
    (4.0 * PI * (2.0 * PI * a_star).sin(), 4.0 * PI * (2.0 * PI * c.rho).sinh())
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0
    } else {
        x.sinh() / x
    }
}

/// The geometric factor f = ρ(e^{2πρ}+e^{−2πρ}+2cos 2πa)/(e^{2πρ}−e^{−2πρ}),
/// continuously extended through ρ = 0 where it tends to cos²(πa)/π·(…);
/// rewritten as ρ(sinh²(πρ) + cos²(πa))/(sinh(πρ)cosh(πρ)), a quotient of
/// nonnegative terms with no cancellation.
pub fn geometric_factor(c: ReducedCoords) -> f64 {
    let x = PI * c.rho;
    let cs = (PI * (c.a - c.a.round())).cos();
    let num = x.sinh().powi(2) + cs * cs;
    if c.rho < RHO_SWITCH {
        // ρ/sinh(πρ) = 1/(π·sinhc(πρ))
        num / (PI * sinhc(x)) / x.cosh()
    } else {
        c.rho * num / (x.sinh() * x.cosh())
    }
}

/// −Δφ/(Vφ) for φ = θ^α; requires dh = 1.
pub fn ratio_neg_lap_phi_over_v_phi(
    c: ReducedCoords,
    params: SupersolutionParams,
    cfg: &LatticeConfig,
) -> Result<f64> {
    cfg.require_normalized()?;
    if c.pole_distance() < crate::potential::POLE_EPS {
        return Err(Error::PoleInput);
    }
    let alpha = params.alpha;
    let d = cfg.d as f64;
    Ok(-2.0 * alpha * (d - 2.0) - 4.0 * alpha * alpha * PI * geometric_factor(c))
}

/// C₁(R) = R√d·coth(πR√d); tends to 1/π as R → 0.
pub fn c1(radius: f64, d: usize) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("R = {radius}, need R > 0")));
    }
    if d < 1 {
        return Err(Error::InvalidParameter("d >= 1 required".into()));
    }
    let x = PI * radius * (d as f64).sqrt();
    if x < 1e-4 {
        // x·coth(x) = 1 + x²/3 − x⁴/45 + 2x⁶/945
        let x2 = x * x;
        Ok((1.0 + x2 / 3.0 - x2 * x2 / 45.0 + 2.0 * x2 * x2 * x2 / 945.0) / PI)
    } else {
        Ok(radius * (d as f64).sqrt() / x.tanh())
    }
}

fn require_d3(d: usize) -> Result<()> {
    if d < 3 {
        Err(Error::DimensionTooSmall(d))
    } else {
        Ok(())
    }
}

/// α = −(d−2)/(4πC₁(R)), the maximizer of the pointwise ratio bound.
pub fn optimal_alpha(radius: f64, d: usize) -> Result<f64> {
    require_d3(d)?;
    Ok(-(d as f64 - 2.0) / (4.0 * PI * c1(radius, d)?))
}

/// Lower Hardy bound (d−2)²/(4πC₁(R)); < (d−2)²/4 for all R > 0.
pub fn lambda_lower(radius: f64, d: usize) -> Result<f64> {
    require_d3(d)?;
    let dm2 = d as f64 - 2.0;
    Ok(dm2 * dm2 / (4.0 * PI * c1(radius, d)?))
}

/// The two-sided sandwich: (lambda_lower, (d−2)²/4).
pub fn theorem_bounds(radius: f64, d: usize) -> Result<(f64, f64)> {
    require_d3(d)?;
    let dm2 = d as f64 - 2.0;
    Ok((lambda_lower(radius, d)?, dm2 * dm2 / 4.0))
}

/// Radial C² cutoff profile: 1 on [0, h/8], quintic smoothstep down to 0
/// across [h/8, h/4].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub samples: usize,
    pub safety: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { samples: 4096, safety: 1.01 }
    }
}

/// g, g', g'' of the cutoff profile at radial distance t from a pole.
pub fn cutoff_profile(t: f64, h: f64) -> (f64, f64, f64) {
    let lo = h / 8.0;
    let hi = h / 4.0;
    if t <= lo {
        return (1.0, 0.0, 0.0);
    }
    if t >= hi {
        return (0.0, 0.0, 0.0);
    }
    let w = hi - lo; // = h/8
    let u = (t - lo) / w;
    let s = 6.0 * u.powi(5) - 15.0 * u.powi(4) + 10.0 * u.powi(3);
    let sp = (30.0 * u.powi(4) - 60.0 * u.powi(3) + 30.0 * u * u) / w;
    let spp = (120.0 * u.powi(3) - 180.0 * u * u + 60.0 * u) / (w * w);
    (1.0 - s, -sp, -spp)
}

/// Explicit constant of the L²-compensated inequality:
/// C = 1.01·sup|ξΔξ| + ((d−2)²/4)·(128·⌊R/h⌋/h² + π²/(3h²)),
/// the supremum sampled densely on the cutoff shell [h/8, h/4].
pub fn theorem35_constant(cfg: &LatticeConfig, cutoff: CutoffSpec) -> Result<f64> {
    require_d3(cfg.d)?;
    let h = cfg.h;
    let d = cfg.d as f64;
    let lo = h / 8.0;
    let hi = h / 4.0;
    let mut sup = 0.0f64;
    for i in 0..cutoff.samples {
        let t = lo + (hi - lo) * (i as f64 + 0.5) / cutoff.samples as f64;
        let (g, gp, gpp) = cutoff_profile(t, h);
        let lap = gpp + (d - 1.0) / t * gp;
        sup = sup.max((g * lap).abs());
    }
    let dm2 = d - 2.0;
    let series = 128.0 / (h * h) * (cfg.radius / h).floor() + PI * PI / (3.0 * h * h);
    Ok(cutoff.safety * sup + dm2 * dm2 / 4.0 * series)
}

/// Central-difference gradient and (2d+1)-point Laplacian of a scalar field.
pub fn fd_check<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let d = p.len();
    let f0 = f(p);
    let mut grad = vec![0.0; d];
    let mut lap = 0.0;
    let mut q = p.to_vec();
    for i in 0..d {
        q[i] = p[i] + eps;
        let fp = f(&q);
        q[i] = p[i] - eps;
        let fm = f(&q);
        q[i] = p[i];
        grad[i] = (fp - fm) / (2.0 * eps);
        lap += (fp - 2.0 * f0 + fm) / (eps * eps);
    }
    (grad, lap)
}

fn rho_of(p: &[f64], cfg: &LatticeConfig) -> f64 {
    reduced_coords(p, cfg).unwrap().rho
}

fn a_of(p: &[f64], cfg: &LatticeConfig) -> f64 {
    reduced_coords(p, cfg).unwrap().a
}

/// Analytic ∇/Δ of a and ρ at a Cartesian point, cross-checked against
/// central differences at steps 1e−4 and 1e−5.
pub fn calculus_at(p: &[f64], cfg: &LatticeConfig) -> Result<CalculusReport> {
    let rc = reduced_coords(p, cfg)?;
    if rc.rho <= 1e-12 * (1.0 + rc.a.abs()) {
        return Err(Error::InvalidParameter(
            "calculus formulas are singular on the axis (rho = 0)".into(),
        ));
    }
    let d = cfg.d as f64;
    let h = cfg.h;
    let d2h2 = d * d * h * h;
    let grad_a: Vec<f64> = vec![1.0 / (d * h); cfg.d];
    let grad_rho: Vec<f64> = p
        .iter()
        .map(|&x| (d * x - d * h * rc.a) / (d2h2 * rc.rho))
        .collect();
    let norm2_grad_rho = d / d2h2;
    let lap_rho = d * (d - 2.0) / (d2h2 * rc.rho);
    let div_grad_rho_over_rho = d * (d - 3.0) / (d2h2 * rc.rho * rc.rho);

    let mut fd_max_error = 0.0f64;
    for &eps in &[1e-4, 1e-5] {
        let e = fd_errors(p, cfg, eps, &grad_a, &grad_rho, norm2_grad_rho, lap_rho,
                          div_grad_rho_over_rho);
        fd_max_error = fd_max_error.max(e);
    }
    Ok(CalculusReport {
        grad_a,
        grad_rho,
        lap_rho,
        norm2_grad_rho,
        div_grad_rho_over_rho,
        dot_grad_rho_grad_a: 0.0,
        fd_max_error,
    })
}

/// Worst discrepancy between the analytic calculus values and central
/// differences at step `eps`; exposed so callers can estimate the
/// convergence order from two steps.
pub fn fd_calculus_error(p: &[f64], cfg: &LatticeConfig, eps: f64) -> Result<f64> {
    let rc = reduced_coords(p, cfg)?;
    if rc.rho <= 1e-12 * (1.0 + rc.a.abs()) {
        return Err(Error::InvalidParameter("rho = 0".into()));
    }
    let d = cfg.d as f64;
    let h = cfg.h;
    let d2h2 = d * d * h * h;
    let grad_a: Vec<f64> = vec![1.0 / (d * h); cfg.d];
    let grad_rho: Vec<f64> = p
        .iter()
        .map(|&x| (d * x - d * h * rc.a) / (d2h2 * rc.rho))
        .collect();
    Ok(fd_errors(
        p,
        cfg,
        eps,
        &grad_a,
        &grad_rho,
        d / d2h2,
        d * (d - 2.0) / (d2h2 * rc.rho),
        d * (d - 3.0) / (d2h2 * rc.rho * rc.rho),
    ))
}

#[allow(clippy::too_many_arguments)]
fn fd_errors(
    p: &[f64],
    cfg: &LatticeConfig,
    eps: f64,
    grad_a: &[f64],
    grad_rho: &[f64],
    norm2_grad_rho: f64,
    lap_rho: f64,
    div_g: f64,
) -> f64 {
    let d = cfg.d as f64;
    let h = cfg.h;
    let d2h2 = d * d * h * h;
    let (fd_ga, fd_la) = fd_check(|q| a_of(q, cfg), p, eps);
    let (fd_gr, fd_lr) = fd_check(|q| rho_of(q, cfg), p, eps);
    let mut err = fd_la.abs(); // Δa = 0
    for i in 0..cfg.d {
        err = err.max((fd_ga[i] - grad_a[i]).abs());
        err = err.max((fd_gr[i] - grad_rho[i]).abs());
    }
    let fd_norm2: f64 = fd_gr.iter().map(|g| g * g).sum();
    err = err.max((fd_norm2 - norm2_grad_rho).abs());
    err = err.max((fd_lr - lap_rho).abs());
    let fd_dot: f64 = fd_gr.iter().zip(fd_ga.iter()).map(|(x, y)| x * y).sum();
    err = err.max(fd_dot.abs());
    // div(∇ρ/ρ) via central differences of the closed-form components
    let mut div = 0.0;
    let mut q = p.to_vec();
    for i in 0..cfg.d {
        let comp = |q: &[f64]| {
            let rc = reduced_coords(q, cfg).unwrap();
            (d * q[i] - d * h * rc.a) / (d2h2 * rc.rho * rc.rho)
        };
        q[i] = p[i] + eps;
        let fp = comp(&q);
        q[i] = p[i] - eps;
        let fm = comp(&q);
        q[i] = p[i];
        div += (fp - fm) / (2.0 * eps);
    }
    err.max((div - div_g).abs())
}
