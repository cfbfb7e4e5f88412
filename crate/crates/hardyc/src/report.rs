//! Machine-readable run reports: every CLI command emits a JSON record with
//! an embedded manifest (command, configuration echo, seed, version, wall
//! time) under the schema tag "hardyc/1", plus the verification suites the
//! `verify` subcommand dispatches to.

use crate::geometry::{LatticeConfig, ReducedCoords};
use crate::potential::{eval_closed, local_normalized};
use crate::quadrature::{
    allegretto_residual, theorem35_check, Profile1D, TestFunction,
};
use crate::sampling::{to_cartesian, CylinderSampler};
use crate::supersolution::{
    fd_calculus_error, lambda_lower, optimal_alpha, ratio_neg_lap_phi_over_v_phi,
    SupersolutionParams,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

pub const SCHEMA: &str = "hardyc/1";

/// Provenance block embedded in every output artifact. Identical manifests
/// produce identical output bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, started: Instant) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }
}

/// One pass/fail line of a verification suite; `margin` is the worst-case
/// distance to the failure threshold (nonnegative iff the check passed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, margin: f64, detail: String) -> Self {
        Self { name: name.to_string(), pass, margin, detail }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
}

pub fn suite_report(suite: &str, checks: Vec<Check>, manifest: RunManifest) -> SuiteReport {
    SuiteReport {
        schema: SCHEMA.to_string(),
        suite: suite.to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        manifest,
    }
}

/// Differential identities of the reduced coordinates, checked against
/// central differences at seeded Cartesian points.
pub fn run_identities(cfg: &LatticeConfig, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut sampler = CylinderSampler::new(cfg, seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        // stay clear of the axis: the 1/ρ-singular identities blow up the
        // eps² truncation term of the second differences near ρ = 0
        let c = sampler.next_off_axis(0.3 * cfg.rho_max().min(1.0));
        let p = to_cartesian(c, cfg);
        worst = worst.max(fd_calculus_error(&p, cfg, 1e-4)?);
    }
    // convergence order from two larger steps where truncation dominates
    let c = CylinderSampler::new(cfg, seed ^ 0x9e37).next_off_axis(0.3);
    let p = to_cartesian(c, cfg);
    let e1 = fd_calculus_error(&p, cfg, 5e-3)?;
    let e2 = fd_calculus_error(&p, cfg, 2.5e-3)?;
    let order = (e1 / e2).log2();
    Ok(vec![
        Check::new(
            "max finite-difference error at eps=1e-4",
            worst <= 1e-6,
            1e-6 - worst,
            format!("max_err = {worst:.3e} over {samples} points"),
        ),
        Check::new(
            "Richardson order",
            order >= 1.9,
            order - 1.9,
            format!("order = {order:.3}"),
        ),
    ])
}

/// Pointwise supersolution certificate: −Δφ/(Vφ) ≥ lambda_lower − 1e−9 on
/// seeded points of the cylinder, for the optimal exponent.
pub fn run_supersolution(cfg: &LatticeConfig, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let alpha = optimal_alpha(cfg.radius, cfg.d)?;
    let lower = lambda_lower(cfg.radius, cfg.d)?;
    let params = SupersolutionParams { alpha };
    let mut sampler = CylinderSampler::new(cfg, seed).with_pole_floor(1e-9);
    let mut min_margin = f64::INFINITY;
    for _ in 0..samples {
        let c = sampler.next_point();
        let ratio = ratio_neg_lap_phi_over_v_phi(c, params, cfg)?;
        min_margin = min_margin.min(ratio - lower);
    }
    Ok(vec![Check::new(
        "ratio - lambda_lower >= -1e-9",
        min_margin >= -1e-9,
        min_margin + 1e-9,
        format!("min margin = {min_margin:.3e}, alpha = {alpha:.6}"),
    )])
}

fn seeded_bump(sampler: &mut CylinderSampler, cfg: &LatticeConfig) -> TestFunction {
    let period = cfg.axial_period();
    let s_lo = sampler.gen_range(0.05, 0.35) * period;
    let s_hi = sampler.gen_range(0.65, 0.95) * period;
    let r_lo = sampler.gen_range(0.05, 0.3) * cfg.radius;
    let r_hi = sampler.gen_range(0.6, 0.95) * cfg.radius;
    TestFunction::Separable {
        axial: Profile1D::Bump { lo: s_lo, hi: s_hi },
        radial: Profile1D::Bump { lo: r_lo, hi: r_hi },
    }
}

/// Exactness of the weighted integration-by-parts identity for seeded
/// (trial function, exponent) pairs.
pub fn run_allegretto(cfg: &LatticeConfig, pairs: usize, seed: u64) -> Result<Vec<Check>> {
    let mut sampler = CylinderSampler::new(cfg, seed);
    let mut worst_rel = 0.0f64;
    for _ in 0..pairs {
        let u = seeded_bump(&mut sampler, cfg);
        let alpha = sampler.gen_range(-0.5, 0.1);
        let rep = allegretto_residual(&u, alpha, cfg)?;
        let scale = rep.lhs.abs().max(rep.rhs.abs()).max(1e-300);
        worst_rel = worst_rel.max(rep.residual / scale);
    }
    Ok(vec![Check::new(
        "residual <= 1e-6 * max(LHS, RHS)",
        worst_rel <= 1e-6,
        1e-6 - worst_rel,
        format!("worst relative residual = {worst_rel:.3e} over {pairs} pairs"),
    )])
}

/// Strict two-sided bracket of the pole-normalized potential on seeded
/// points of the half-spacing ball around pole 0.
pub fn run_local(cfg: &LatticeConfig, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut sampler = CylinderSampler::new(cfg, seed);
    let rad = 0.5 / (cfg.d as f64).sqrt(); // |x - a0| < h/2 in reduced units
    let mut strict_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut n = 0usize;
    while n < samples {
        let a = sampler.gen_range(-rad, rad);
        let rho = sampler.gen_range(0.0, rad);
        let c = ReducedCoords { a, rho };
        if a.hypot(rho) >= rad || a.hypot(rho) < 1e-9 {
            continue;
        }
        n += 1;
        let val = local_normalized(c, cfg, 0)?;
        let t2 = cfg.dh2() * (a * a + rho * rho);
        strict_margin = strict_margin.min(val - 1.0);
        upper_margin =
            upper_margin.min(1.0 + 4.0 * PI * PI / (3.0 * cfg.h * cfg.h) * t2 - val);
    }
    Ok(vec![
        Check::new(
            "V*t^2 > 1 strictly",
            strict_margin > -1e-12,
            strict_margin,
            format!("min(V*t^2 - 1) = {strict_margin:.3e}"),
        ),
        Check::new(
            "V*t^2 <= 1 + (4pi^2/(3h^2))*t^2",
            upper_margin >= 0.0,
            upper_margin,
            format!("min slack = {upper_margin:.3e}"),
        ),
    ])
}

/// L²-compensated inequality on seeded admissible trial functions inside
/// the axial window |s| ≤ 2R.
pub fn run_thm35(cfg: &LatticeConfig, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut sampler = CylinderSampler::new(cfg, seed);
    let mut min_margin = f64::INFINITY;
    for _ in 0..samples {
        let width = sampler.gen_range(0.3, 1.0) * cfg.axial_period();
        let lo = sampler.gen_range(-2.0 * cfg.radius, 2.0 * cfg.radius - width);
        let r_lo = sampler.gen_range(0.05, 0.3) * cfg.radius;
        let r_hi = sampler.gen_range(0.6, 0.95) * cfg.radius;
        let u = TestFunction::Separable {
            axial: Profile1D::Bump { lo, hi: lo + width },
            radial: Profile1D::Bump { lo: r_lo, hi: r_hi },
        };
        let (lhs, rhs, err) = theorem35_check(&u, cfg)?;
        min_margin = min_margin.min(lhs - rhs + err);
    }
    Ok(vec![Check::new(
        "C*mass + energy >= ((d-2)^2/4)*potential - err",
        min_margin >= 0.0,
        min_margin,
        format!("min margin = {min_margin:.3e} over {samples} trial functions"),
    )])
}

/// Closed-vs-series potential record for the `potential` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub schema: String,
    pub a: f64,
    pub rho: f64,
    pub value_closed: Option<f64>,
    pub value_series: Option<f64>,
    pub error_bound: f64,
    pub agree: bool,
    pub manifest: RunManifest,
}

pub fn potential_record(
    c: ReducedCoords,
    cfg: &LatticeConfig,
    method: &str,
    tol: f64,
    manifest: RunManifest,
) -> Result<PotentialRecord> {
    let closed = if method != "series" {
        Some(eval_closed(c, cfg)?)
    } else {
        None
    };
    let series = if method != "closed" {
        Some(crate::potential::eval_series(c, cfg, tol)?)
    } else {
        None
    };
    let (agree, err) = match (&closed, &series) {
        (Some(cl), Some(se)) => {
            let gap = (cl.value - se.value).abs();
            (gap <= tol + 4.0 * f64::EPSILON * cl.value, se.error_bound.max(gap))
        }
        (Some(cl), None) => (true, cl.error_bound),
        (None, Some(se)) => (true, se.error_bound),
        (None, None) => {
            return Err(Error::InvalidParameter(format!("unknown method {method}")))
        }
    };
    Ok(PotentialRecord {
        schema: SCHEMA.to_string(),
        a: c.a,
        rho: c.rho,
        value_closed: closed.map(|v| v.value),
        value_series: series.map(|v| v.value),
        error_bound: err,
        agree,
        manifest,
    })
}

/// Analytic constants for the `bounds` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub schema: String,
    pub d: usize,
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    pub c1: f64,
    pub alpha_opt: f64,
    pub manifest: RunManifest,
}

pub fn bounds_record(d: usize, radius: f64, manifest: RunManifest) -> Result<BoundsRecord> {
    let (lower, upper) = crate::supersolution::theorem_bounds(radius, d)?;
    Ok(BoundsRecord {
        schema: SCHEMA.to_string(),
        d,
        radius,
        lower,
        upper,
        c1: crate::supersolution::c1(radius, d)?,
        alpha_opt: optimal_alpha(radius, d)?,
        manifest,
    })
}

/// CSV serialization of a sweep: fixed seven columns, LF line endings,
/// '.' decimal separator (Rust float formatting).
pub fn sweep_csv(rows: &[crate::spectral::SweepRow]) -> String {
    let mut out = String::from("R,lower,mu_hat,upper,gap,grid,delta\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.r, r.lower, r.mu_hat, r.upper, r.gap, r.grid, r.delta
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest {
            command: "test".into(),
            config: serde_json::json!({}),
            seed: 0,
            version: "0".into(),
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn suites_pass_at_small_sample_counts() {
        let cfg = LatticeConfig::normalized(3, 0.5).unwrap();
        for checks in [
            run_identities(&cfg, 20, 7).unwrap(),
            run_supersolution(&cfg, 200, 7).unwrap(),
            run_allegretto(&cfg, 2, 7).unwrap(),
            run_local(&cfg, 100, 7).unwrap(),
        ] {
            for c in &checks {
                assert!(c.pass, "{}: {}", c.name, c.detail);
            }
        }
        let cfg35 = LatticeConfig::normalized(3, 1.0).unwrap();
        for c in run_thm35(&cfg35, 3, 7).unwrap() {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn potential_record_agreement() {
        let cfg = LatticeConfig::normalized(3, 1.0).unwrap();
        let c = ReducedCoords { a: 0.37, rho: 0.81 };
        let rec = potential_record(c, &cfg, "both", 1e-10, manifest()).unwrap();
        assert!(rec.agree);
        let (vc, vs) = (rec.value_closed.unwrap(), rec.value_series.unwrap());
        assert!((vc - vs).abs() <= 1e-10 + 4.0 * f64::EPSILON * vc);
    }

    #[test]
    fn bounds_record_values() {
        let rec = bounds_record(3, 0.5, manifest()).unwrap();
        assert!((rec.lower - 0.091095205414931296).abs() < 1e-15);
        assert_eq!(rec.upper, 0.25);
        assert!((rec.c1 - 0.87356377521164499).abs() < 1e-15);
        assert!((rec.alpha_opt + 0.091095205414931296).abs() < 1e-15);
        assert!(bounds_record(2, 1.0, manifest()).is_err());
    }

    #[test]
    fn csv_shape() {
        let rows = vec![crate::spectral::SweepRow {
            r: 0.5,
            lower: 0.09,
            mu_hat: 0.37,
            upper: 0.25,
            gap: 0.16,
            grid: "64x32".into(),
            delta: 1e-3,
        }];
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("R,lower,mu_hat,upper,gap,grid,delta\n"));
        assert_eq!(csv.lines().count(), 2);
        assert!(!csv.contains('\r'));
    }
}
