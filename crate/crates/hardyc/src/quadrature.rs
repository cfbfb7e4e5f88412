//! Weighted quadrature over the cylinder in cell coordinates (s, r),
//! Rayleigh quotients, the Allegretto–Huang identity residual, and the
//! explicit witness families for the upper Hardy bound.
//!
//! Axisymmetric reduction: for u = u(s, r),
//! ∫_{C_R} f dx = ω_{d−2} ∬ f(s, r) r^{d−2} dr ds, with ω_{d−2} the surface
//! measure of the unit (d−2)-sphere, and |∇u|² = u_s² + u_r².

use crate::geometry::{CellCoords, LatticeConfig};
use crate::potential::eval_closed;
use crate::supersolution::{
    geometric_factor, theorem35_constant, theta, theta_grad, CutoffSpec, SupersolutionParams,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

// 8-point Gauss–Legendre rule on [-1, 1].
const GAUSS_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GAUSS_W: [f64; 8] = [
    0.101_228_536_290_376_25,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_25,
];

/// Surface measure of the unit m-sphere S^m ⊂ R^{m+1}.
pub fn sphere_surface(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * sphere_surface(m - 2),
    }
}

/// Adaptive-quadrature controls: accept a cell when the coarse/fine
/// difference is under its share of rel_tol·|value|, up to `max_depth`
/// dyadic levels; `min_depth` forces uniform refinement (used for
/// convergence-order studies).
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub min_depth: u32,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-300, max_depth: 12, min_depth: 1 }
    }
}

impl QuadOpts {
    /// Uniform 2^m × 2^m composite rule, no adaptivity.
    pub fn uniform(m: u32) -> Self {
        Self { rel_tol: 0.0, abs_tol: 0.0, max_depth: m, min_depth: m }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub cells: usize,
}

impl QuadratureResult {
    fn zero() -> Self {
        Self { value: 0.0, abs_error_estimate: 0.0, cells: 0 }
    }

    fn add(&mut self, other: QuadratureResult) {
        self.value += other.value;
        self.abs_error_estimate += other.abs_error_estimate;
        self.cells += other.cells;
    }
}

fn gauss2d<F: Fn(f64, f64) -> f64>(f: &F, s0: f64, s1: f64, r0: f64, r1: f64, wexp: i32) -> f64 {
    let hs = 0.5 * (s1 - s0);
    let hr = 0.5 * (r1 - r0);
    let cs = 0.5 * (s1 + s0);
    let cr = 0.5 * (r1 + r0);
    let mut acc = 0.0;
    for i in 0..8 {
        let s = cs + hs * GAUSS_X[i];
        let mut row = 0.0;
        for j in 0..8 {
            let r = cr + hr * GAUSS_X[j];
            row += GAUSS_W[j] * f(s, r) * r.powi(wexp);
        }
        acc += GAUSS_W[i] * row;
    }
    acc * hs * hr
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64, f64) -> f64>(
    f: &F,
    s0: f64,
    s1: f64,
    r0: f64,
    r1: f64,
    wexp: i32,
    depth: u32,
    budget: f64,
    opts: &QuadOpts,
) -> QuadratureResult {
    let coarse = gauss2d(f, s0, s1, r0, r1, wexp);
    let sm = 0.5 * (s0 + s1);
    let rm = 0.5 * (r0 + r1);
    let quads = [(s0, sm, r0, rm), (sm, s1, r0, rm), (s0, sm, rm, r1), (sm, s1, rm, r1)];
    let fine: f64 = quads.iter().map(|&(a, b, c, d)| gauss2d(f, a, b, c, d, wexp)).sum();
    let diff = (fine - coarse).abs();
    let next = depth + 1;
    if next >= opts.max_depth || (next >= opts.min_depth && diff <= budget) {
        return QuadratureResult { value: fine, abs_error_estimate: diff, cells: 4 };
    }
    let mut out = QuadratureResult::zero();
    for &(a, b, c, d) in &quads {
        out.add(adapt(f, a, b, c, d, wexp, next, budget / 4.0, opts));
    }
    out
}

/// ω_{d−2}·∬ f(s, r)·r^{d−2} dr ds over an axial×radial box.
pub fn integrate_cell<F: Fn(f64, f64) -> f64>(
    f: F,
    s_range: (f64, f64),
    r_range: (f64, f64),
    d: usize,
    opts: &QuadOpts,
) -> Result<QuadratureResult> {
    let (s0, s1) = s_range;
    let (r0, r1) = r_range;
    if !(s1 > s0) || !(r1 > r0) || r0 < 0.0 {
        return Err(Error::Quadrature(format!(
            "degenerate domain [{s0},{s1}]x[{r0},{r1}]"
        )));
    }
    let wexp = d as i32 - 2;
    let scale = gauss2d(&|_, _| 1.0, s0, s1, r0, r1, wexp).abs()
        * probe_scale(&f, s0, s1, r0, r1);
    let budget = (opts.rel_tol * scale.max(f64::MIN_POSITIVE)).max(opts.abs_tol);
    let mut res = adapt(&f, s0, s1, r0, r1, wexp, 0, budget, opts);
    res.value *= sphere_surface(d - 2);
    res.abs_error_estimate *= sphere_surface(d - 2);
    Ok(res)
}

fn probe_scale<F: Fn(f64, f64) -> f64>(f: &F, s0: f64, s1: f64, r0: f64, r1: f64) -> f64 {
    let mut m = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let s = s0 + (s1 - s0) * (i as f64 + 0.5) / 4.0;
            let r = r0 + (r1 - r0) * (j as f64 + 0.5) / 4.0;
            m = m.max(f(s, r).abs());
        }
    }
    m.max(1e-30)
}

/// One-dimensional profile with closed-form derivative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Profile1D {
    /// Piecewise-linear tent, peak 1 at the midpoint.
    Tent { lo: f64, hi: f64 },
    /// C² quintic bump, peak 1 at the midpoint.
    Bump { lo: f64, hi: f64 },
    /// C¹ cubic ramps: 0 below zero_lo, 1 on [one_lo, one_hi], 0 above zero_hi.
    Plateau { zero_lo: f64, one_lo: f64, one_hi: f64, zero_hi: f64 },
    /// Indicator of [lo, hi] (derivative taken as 0 inside).
    Const { lo: f64, hi: f64 },
}

fn smoothstep5(t: f64) -> (f64, f64) {
    let v = 6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3);
    let dv = 30.0 * t.powi(4) - 60.0 * t.powi(3) + 30.0 * t * t;
    (v, dv)
}

fn hermite3(t: f64) -> (f64, f64) {
    (3.0 * t * t - 2.0 * t * t * t, 6.0 * t - 6.0 * t * t)
}

impl Profile1D {
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Profile1D::Tent { lo, hi } => {
                let m = 0.5 * (lo + hi);
                if x <= lo || x >= hi {
                    (0.0, 0.0)
                } else if x < m {
                    ((x - lo) / (m - lo), 1.0 / (m - lo))
                } else {
                    ((hi - x) / (hi - m), -1.0 / (hi - m))
                }
            }
            Profile1D::Bump { lo, hi } => {
                if x <= lo || x >= hi {
                    return (0.0, 0.0);
                }
                let w = hi - lo;
                let t = (x - lo) / w;
                if t < 0.5 {
                    let (v, dv) = smoothstep5(2.0 * t);
                    (v, 2.0 * dv / w)
                } else {
                    let (v, dv) = smoothstep5(2.0 * (1.0 - t));
                    (v, -2.0 * dv / w)
                }
            }
            Profile1D::Plateau { zero_lo, one_lo, one_hi, zero_hi } => {
                if x <= zero_lo || x >= zero_hi {
                    (0.0, 0.0)
                } else if x < one_lo {
                    let w = one_lo - zero_lo;
                    let (v, dv) = hermite3((x - zero_lo) / w);
                    (v, dv / w)
                } else if x <= one_hi {
                    (1.0, 0.0)
                } else {
                    let w = zero_hi - one_hi;
                    let (v, dv) = hermite3((x - one_hi) / w);
                    (1.0 - v, -dv / w)
                }
            }
            Profile1D::Const { lo, hi } => {
                if x < lo || x > hi {
                    (0.0, 0.0)
                } else {
                    (1.0, 0.0)
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile1D::Tent { lo, hi }
            | Profile1D::Bump { lo, hi }
            | Profile1D::Const { lo, hi } => (lo, hi),
            Profile1D::Plateau { zero_lo, zero_hi, .. } => (zero_lo, zero_hi),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile1D::Tent { lo, hi } | Profile1D::Bump { lo, hi } => {
                vec![lo, 0.5 * (lo + hi), hi]
            }
            Profile1D::Const { lo, hi } => vec![lo, hi],
            Profile1D::Plateau { zero_lo, one_lo, one_hi, zero_hi } => {
                vec![zero_lo, one_lo, one_hi, zero_hi]
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Profile1D::Tent { lo, hi }
            | Profile1D::Bump { lo, hi }
            | Profile1D::Const { lo, hi } => hi > lo,
            Profile1D::Plateau { zero_lo, one_lo, one_hi, zero_hi } => {
                zero_lo < one_lo && one_lo <= one_hi && one_hi < zero_hi
            }
        }
    }
}

/// The C¹ radial cutoff of the witness family: 0 on [0, r_in/2], cubic ramp
/// to 1 at r_in, 1 on [r_in, r_out/2], cubic ramp to 0 at r_out.
pub fn witness_cutoff(t: f64, r_in: f64, r_out: f64) -> (f64, f64) {
    Profile1D::Plateau {
        zero_lo: r_in / 2.0,
        one_lo: r_in,
        one_hi: r_out / 2.0,
        zero_hi: r_out,
    }
    .eval(t)
}

/// Admissible trial function on the cylinder, axisymmetric by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TestFunction {
    /// u(s, r) = p(s)·w(r).
    Separable { axial: Profile1D, radial: Profile1D },
    /// Quasi-extremal around pole k: u = η(t)·t^{−(d−2)/2+τ}, t = |x − a_k|.
    RadialBump { center_k: i64, r_in: f64, r_out: f64, tau: f64 },
    /// base·θ^α (supersolution-weighted).
    Weighted { base: Box<TestFunction>, alpha: f64 },
    /// factor·base; Rayleigh quotients are invariant under this.
    Scaled { base: Box<TestFunction>, factor: f64 },
}

impl TestFunction {
    pub fn eval(&self, s: f64, r: f64, cfg: &LatticeConfig) -> f64 {
        self.eval_grad(s, r, cfg).0
    }

    /// (u, u_s, u_r).
    pub fn eval_grad(&self, s: f64, r: f64, cfg: &LatticeConfig) -> (f64, f64, f64) {
        match self {
            TestFunction::Separable { axial, radial } => {
                let (p, dp) = axial.eval(s);
                let (w, dw) = radial.eval(r);
                (p * w, dp * w, p * dw)
            }
            TestFunction::RadialBump { center_k, r_in, r_out, tau } => {
                let sk = *center_k as f64 * cfg.axial_period();
                let t = (s - sk).hypot(r);
                if t <= r_in / 2.0 || t >= *r_out {
                    return (0.0, 0.0, 0.0);
                }
                let p = -(cfg.d as f64 - 2.0) / 2.0 + tau;
                let (eta, etap) = witness_cutoff(t, *r_in, *r_out);
                let tp = t.powf(p);
                let u = eta * tp;
                let du = etap * tp + p * eta * tp / t;
                (u, du * (s - sk) / t, du * r / t)
            }
            TestFunction::Weighted { base, alpha } => {
                let (b, bs, br) = base.eval_grad(s, r, cfg);
                if b == 0.0 && bs == 0.0 && br == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let scale = cfg.axial_period();
                let c = CellCoords { s, r }.to_reduced(cfg);
                let th = theta(c);
                let (ta, tr) = theta_grad(c);
                let phi = th.powf(*alpha);
                let g_s = alpha * ta / th / scale;
                let g_r = alpha * tr / th / scale;
                (b * phi, phi * (bs + b * g_s), phi * (br + b * g_r))
            }
            TestFunction::Scaled { base, factor } => {
                let (b, bs, br) = base.eval_grad(s, r, cfg);
                (factor * b, factor * bs, factor * br)
            }
        }
    }

    /// Bounding box of the support: (s-range, r-range).
    pub fn support(&self, cfg: &LatticeConfig) -> ((f64, f64), (f64, f64)) {
        match self {
            TestFunction::Separable { axial, radial } => (axial.support(), radial.support()),
            TestFunction::RadialBump { center_k, r_out, .. } => {
                let sk = *center_k as f64 * cfg.axial_period();
                ((sk - r_out, sk + r_out), (0.0, *r_out))
            }
            TestFunction::Weighted { base, .. } | TestFunction::Scaled { base, .. } => {
                base.support(cfg)
            }
        }
    }

    fn breakpoints(&self, cfg: &LatticeConfig) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestFunction::Separable { axial, radial } => {
                (axial.breakpoints(), radial.breakpoints())
            }
            TestFunction::RadialBump { .. } => {
                let ((s0, s1), (r0, r1)) = self.support(cfg);
                (vec![s0, 0.5 * (s0 + s1), s1], vec![r0, r1])
            }
            TestFunction::Weighted { base, .. } | TestFunction::Scaled { base, .. } => {
                base.breakpoints(cfg)
            }
        }
    }

    /// Admissibility: support inside the cylinder, an open neighborhood of
    /// every pole excluded, bounded first derivatives.
    pub fn validate(&self, cfg: &LatticeConfig) -> Result<()> {
        match self {
            TestFunction::Separable { axial, radial } => {
                if !axial.is_valid() || !radial.is_valid() {
                    return Err(Error::InvalidParameter("degenerate profile".into()));
                }
                let (r0, r1) = radial.support();
                if r0 < 0.0 || r1 > cfg.radius {
                    return Err(Error::InvalidParameter(format!(
                        "radial support [{r0},{r1}] outside [0, R = {}]",
                        cfg.radius
                    )));
                }
                if r0 <= 0.0 {
                    // support touches the axis; the axial range must stay
                    // clear of every pole s-coordinate kL
                    let (s0, s1) = axial.support();
                    let period = cfg.axial_period();
                    let k0 = (s0 / period).floor() as i64;
                    let k1 = (s1 / period).ceil() as i64;
                    for k in k0..=k1 {
                        let sk = k as f64 * period;
                        if sk >= s0 - 1e-15 && sk <= s1 + 1e-15 {
                            return Err(Error::InvalidParameter(format!(
                                "support touches the pole at s = {sk}"
                            )));
                        }
                    }
                }
                Ok(())
            }
            TestFunction::RadialBump { r_in, r_out, tau, .. } => {
                let cap = (cfg.h / 2.0).min(cfg.radius);
                if !(0.0 < *r_in && r_in < r_out && *r_out <= cap) {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < r_in < r_out <= min(h/2, R) = {cap}; got ({r_in}, {r_out})"
                    )));
                }
                if !(0.0 < *tau && *tau < (cfg.d as f64 - 2.0) / 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "tau = {tau} outside (0, (d-2)/2)"
                    )));
                }
                Ok(())
            }
            TestFunction::Weighted { base, .. } => base.validate(cfg),
            TestFunction::Scaled { base, factor } => {
                if !(factor.is_finite() && *factor != 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "scale factor {factor} must be finite and nonzero"
                    )));
                }
                base.validate(cfg)
            }
        }
    }
}

fn energy_like<G: Fn(f64, f64) -> f64>(
    u: &TestFunction,
    cfg: &LatticeConfig,
    integrand: G,
    opts: &QuadOpts,
) -> Result<QuadratureResult> {
    u.validate(cfg)?;
    let (bs, br) = u.breakpoints(cfg);
    let mut total = QuadratureResult::zero();
    for sw in bs.windows(2) {
        for rw in br.windows(2) {
            if rw[1] <= rw[0] || sw[1] <= sw[0] {
                continue;
            }
            total.add(integrate_cell(&integrand, (sw[0], sw[1]), (rw[0], rw[1]), cfg.d, opts)?);
        }
    }
    Ok(total)
}

/// ∫ |∇u|² dx with analytic derivatives of the trial function.
pub fn dirichlet_energy(u: &TestFunction, cfg: &LatticeConfig) -> Result<QuadratureResult> {
    dirichlet_energy_with(u, cfg, &QuadOpts::default())
}

pub fn dirichlet_energy_with(
    u: &TestFunction,
    cfg: &LatticeConfig,
    opts: &QuadOpts,
) -> Result<QuadratureResult> {
    energy_like(
        u,
        cfg,
        |s, r| {
            let (_, us, ur) = u.eval_grad(s, r, cfg);
            us * us + ur * ur
        },
        opts,
    )
}

/// ∫ V u² dx with V from the closed residue form.
pub fn potential_energy(u: &TestFunction, cfg: &LatticeConfig) -> Result<QuadratureResult> {
    potential_energy_with(u, cfg, &QuadOpts::default())
}

pub fn potential_energy_with(
    u: &TestFunction,
    cfg: &LatticeConfig,
    opts: &QuadOpts,
) -> Result<QuadratureResult> {
    energy_like(
        u,
        cfg,
        |s, r| {
            let (v, _, _) = u.eval_grad(s, r, cfg);
            if v == 0.0 {
                return 0.0;
            }
            let c = CellCoords { s, r }.to_reduced(cfg);
            eval_closed(c, cfg).map(|pv| pv.value).unwrap_or(f64::INFINITY) * v * v
        },
        opts,
    )
}

/// ∫ u² dx.
pub fn l2_mass(u: &TestFunction, cfg: &LatticeConfig) -> Result<QuadratureResult> {
    energy_like(
        u,
        cfg,
        |s, r| {
            let (v, _, _) = u.eval_grad(s, r, cfg);
            v * v
        },
        &QuadOpts::default(),
    )
}

/// Rayleigh quotient ∫|∇u|²/∫Vu², a certified upper bound on μ(C_R) up to
/// the reported quadrature error.
pub fn rayleigh_quotient(u: &TestFunction, cfg: &LatticeConfig) -> Result<(f64, f64)> {
    let num = dirichlet_energy(u, cfg)?;
    let den = potential_energy(u, cfg)?;
    if !(den.value > 0.0) {
        return Err(Error::Quadrature("degenerate trial function: ∫Vu² = 0".into()));
    }
    let q = num.value / den.value;
    let err = (num.abs_error_estimate + q * den.abs_error_estimate) / den.value;
    Ok((q, err))
}

fn gauss1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (0..8).map(|i| GAUSS_W[i] * f(c + h * GAUSS_X[i])).sum::<f64>() * h
}

fn composite_log<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, cells_per_efold: f64) -> f64 {
    let n = ((hi / lo).ln() * cells_per_efold).ceil().max(4.0) as usize;
    let mut acc = 0.0;
    for i in 0..n {
        let a = lo * (hi / lo).powf(i as f64 / n as f64);
        let b = lo * (hi / lo).powf((i + 1) as f64 / n as f64);
        acc += gauss1d(f, a, b);
    }
    acc
}

/// Single-pole quotient of the radial quasi-extremal u = η(t)·t^{−(d−2)/2+τ}:
/// ∫u'(t)² t^{d−1} dt / ∫u(t)² t^{d−3} dt, which dominates the full Rayleigh
/// quotient against V since V ≥ 1/|x−a₀|². Integrands are evaluated in the
/// grouped form t^{2τ−1}(η′t + pη)² so radii down to 1e−300 stay in range.
pub fn radial_witness_quotient(
    tau: f64,
    r_in: f64,
    r_out: f64,
    d: usize,
    cfg: &LatticeConfig,
) -> Result<f64> {
    if d < 3 {
        return Err(Error::DimensionTooSmall(d));
    }
    let cap = (cfg.h / 2.0).min(cfg.radius);
    if !(0.0 < r_in && r_in < r_out && r_out <= cap * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < r_in < r_out <= min(h/2, R) = {cap}; got ({r_in}, {r_out})"
        )));
    }
    if !(0.0 < tau && tau < (d as f64 - 2.0) / 2.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside (0, (d-2)/2)")));
    }
    let p = -(d as f64 - 2.0) / 2.0 + tau;
    let pw = 2.0 * tau - 1.0;
    let num = |t: f64| {
        let (eta, etap) = witness_cutoff(t, r_in, r_out);
        let g = etap * t + p * eta;
        (pw * t.ln()).exp() * g * g
    };
    let den = |t: f64| {
        let (eta, _) = witness_cutoff(t, r_in, r_out);
        (pw * t.ln()).exp() * eta * eta
    };
    let pieces = [(r_in / 2.0, r_in), (r_in, r_out / 2.0), (r_out / 2.0, r_out)];
    let integrate = |f: &dyn Fn(f64) -> f64, per_efold: f64| -> f64 {
        pieces
            .iter()
            .map(|&(lo, hi)| composite_log(&|t| f(t), lo, hi, per_efold))
            .sum()
    };
    let n1 = integrate(&num, 8.0);
    let n2 = integrate(&num, 16.0);
    let d1 = integrate(&den, 8.0);
    let d2 = integrate(&den, 16.0);
    let q = n2 / d2;
    let err = ((n2 - n1).abs() + q * (d2 - d1).abs()) / d2;
    if err > 1e-6 * q.abs() {
        return Err(Error::Quadrature(format!(
            "witness quotient did not converge: q = {q}, err = {err}"
        )));
    }
    Ok(q)
}

/// Both sides of the Allegretto–Huang identity for φ = θ^α, plus the
/// combined quadrature error estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AllegrettoReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub abs_error_estimate: f64,
}

/// |LHS − RHS| of ∫(|∇u|² + (Δφ/φ)u²) = ∫|∇u − (∇φ/φ)u|², with
/// Δφ/φ = −(−Δφ/(Vφ))·V evaluated analytically.
pub fn allegretto_residual(
    u: &TestFunction,
    alpha: f64,
    cfg: &LatticeConfig,
) -> Result<AllegrettoReport> {
    allegretto_residual_with(u, alpha, cfg, &QuadOpts::default())
}

pub fn allegretto_residual_with(
    u: &TestFunction,
    alpha: f64,
    cfg: &LatticeConfig,
    opts: &QuadOpts,
) -> Result<AllegrettoReport> {
    cfg.require_normalized()?;
    let d = cfg.d;
    let params = SupersolutionParams { alpha };
    let scale = cfg.axial_period();
    let lhs = energy_like(
        u,
        cfg,
        |s, r| {
            let (v, us, ur) = u.eval_grad(s, r, cfg);
            let grad2 = us * us + ur * ur;
            if v == 0.0 {
                return grad2;
            }
            let c = CellCoords { s, r }.to_reduced(cfg);
            let ratio = -2.0 * alpha * (d as f64 - 2.0)
                - 4.0 * alpha * alpha * PI * geometric_factor(c);
            let vpot = eval_closed(c, cfg).map(|pv| pv.value).unwrap_or(f64::INFINITY);
            grad2 - ratio * vpot * v * v
        },
        opts,
    )?;
    let rhs = energy_like(
        u,
        cfg,
        |s, r| {
            let (v, us, ur) = u.eval_grad(s, r, cfg);
            if v == 0.0 && us == 0.0 && ur == 0.0 {
                return 0.0;
            }
            let c = CellCoords { s, r }.to_reduced(cfg);
            let th = theta(c);
            let (ta, tr) = theta_grad(c);
            let gs = alpha * ta / th / scale;
            let gr = alpha * tr / th / scale;
            let es = us - gs * v;
            let er = ur - gr * v;
            es * es + er * er
        },
        opts,
    )?;
    let _ = params;
    Ok(AllegrettoReport {
        lhs: lhs.value,
        rhs: rhs.value,
        residual: (lhs.value - rhs.value).abs(),
        abs_error_estimate: lhs.abs_error_estimate + rhs.abs_error_estimate,
    })
}

/// ∫|∇u|² − λ∫Vu², nonnegative up to quadrature error for λ below the
/// Hardy constant; returns (gap, error estimate).
pub fn hardy_gap(u: &TestFunction, lambda: f64, cfg: &LatticeConfig) -> Result<(f64, f64)> {
    let num = dirichlet_energy(u, cfg)?;
    let den = potential_energy(u, cfg)?;
    Ok((
        num.value - lambda * den.value,
        num.abs_error_estimate + lambda.abs() * den.abs_error_estimate,
    ))
}

/// Both sides of C·∫u² + ∫|∇u|² ≥ ((d−2)²/4)·∫Vu², with C from the
/// explicit-constant computation; the trial function must live in the
/// axial window |s| ≤ 2R.
pub fn theorem35_check(u: &TestFunction, cfg: &LatticeConfig) -> Result<(f64, f64, f64)> {
    let ((s0, s1), _) = u.support(cfg);
    if s0 < -2.0 * cfg.radius - 1e-12 || s1 > 2.0 * cfg.radius + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "support [{s0},{s1}] outside the axial window |s| <= 2R = {}",
            2.0 * cfg.radius
        )));
    }
    let c = theorem35_constant(cfg, CutoffSpec::default())?;
    let mass = l2_mass(u, cfg)?;
    let grad = dirichlet_energy(u, cfg)?;
    let pot = potential_energy(u, cfg)?;
    let dm2 = cfg.d as f64 - 2.0;
    let lhs = c * mass.value + grad.value;
    let rhs = dm2 * dm2 / 4.0 * pot.value;
    let err = c * mass.abs_error_estimate
        + grad.abs_error_estimate
        + dm2 * dm2 / 4.0 * pot.abs_error_estimate;
    Ok((lhs, rhs, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supersolution::{lambda_lower, optimal_alpha};

    fn cfg3() -> LatticeConfig {
        LatticeConfig::normalized(3, 0.5).unwrap()
    }

    fn mid_cell_bump(cfg: &LatticeConfig) -> TestFunction {
        // smooth separable bump centered mid-cell, clear of both poles
        let period = cfg.axial_period();
        TestFunction::Separable {
            axial: Profile1D::Bump { lo: 0.2 * period, hi: 0.8 * period },
            radial: Profile1D::Bump { lo: 0.1 * cfg.radius, hi: 0.9 * cfg.radius },
        }
    }

    #[test]
    fn constant_integrand_exact() {
        // f ≡ 1, d = 3, [0,1]×[0,1]: ω₁·∫r dr = π
        let r = integrate_cell(|_, _| 1.0, (0.0, 1.0), (0.0, 1.0), 3, &QuadOpts::default())
            .unwrap();
        assert!((r.value - PI).abs() < 16.0 * f64::EPSILON * PI);
        // f = r², d = 4: ω₂·∫r⁴ = 4π/5
        let r = integrate_cell(|_, r| r * r, (0.0, 1.0), (0.0, 1.0), 4, &QuadOpts::default())
            .unwrap();
        assert!((r.value - 4.0 * PI / 5.0).abs() < 1e-13);
    }

    #[test]
    fn polynomial_degree7_exact() {
        let f = |s: f64, r: f64| {
            (1.0 + s).powi(7) + s.powi(3) * r.powi(4) + 2.0 * r.powi(7)
        };
        let exact = {
            // ω₁ ∬ f·r dr ds over [0,1]²:
            // ∫(1+s)^7 ds = (2^8−1)/8; ∫r dr = 1/2
            // ∫s³ ds = 1/4; ∫r⁵ dr = 1/6; ∫r⁸ dr·2 = 2/9
            2.0 * PI * ((255.0 / 8.0) * 0.5 + 0.25 / 6.0 + 2.0 / 9.0)
        };
        let r = integrate_cell(f, (0.0, 1.0), (0.0, 1.0), 3, &QuadOpts::uniform(1)).unwrap();
        assert!((r.value - exact).abs() <= 16.0 * f64::EPSILON * exact.abs());
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(integrate_cell(|_, _| 1.0, (0.0, 0.0), (0.0, 1.0), 3, &QuadOpts::default())
            .is_err());
    }

    #[test]
    fn refinement_error_contract() {
        // oscillatory but smooth integrand; halved cells move the value by
        // less than 4× the reported estimate
        let f = |s: f64, r: f64| (10.0 * s).sin() * (7.0 * r).cos() + 1.5;
        let coarse =
            integrate_cell(f, (0.0, 1.0), (0.0, 1.0), 3, &QuadOpts::uniform(2)).unwrap();
        let fine = integrate_cell(f, (0.0, 1.0), (0.0, 1.0), 3, &QuadOpts::uniform(3)).unwrap();
        assert!(
            (fine.value - coarse.value).abs() <= 4.0 * coarse.abs_error_estimate.max(1e-15)
        );
    }

    #[test]
    fn dirichlet_energy_tent_closed_form() {
        // p(s) const on its support, w(r) tent: u_s = 0 inside, u_r = ±slope
        let cfg = cfg3();
        let period = cfg.axial_period();
        let u = TestFunction::Separable {
            axial: Profile1D::Const { lo: 0.2 * period, hi: 0.6 * period },
            radial: Profile1D::Tent { lo: 0.1, hi: 0.3 },
        };
        let got = dirichlet_energy(&u, &cfg).unwrap();
        // ω₁·Δs·slope²·∫_{0.1}^{0.3} r dr with slope = 1/0.1
        let exact = 2.0 * PI * (0.4 * period) * 100.0 * 0.5 * (0.09 - 0.01);
        assert!((got.value - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn energy_scaling_homogeneity() {
        let cfg = cfg3();
        let u = mid_cell_bump(&cfg);
        let e = dirichlet_energy(&u, &cfg).unwrap();
        assert!(e.value > 0.0);
        let (q, _) = rayleigh_quotient(&u, &cfg).unwrap();
        for &factor in &[-3.0, 0.5, 1_000.0] {
            let scaled =
                TestFunction::Scaled { base: Box::new(u.clone()), factor };
            let es = dirichlet_energy(&scaled, &cfg).unwrap();
            assert!((es.value - factor * factor * e.value).abs() <= 1e-12 * es.value.abs());
            let (qs, _) = rayleigh_quotient(&scaled, &cfg).unwrap();
            assert!(
                (qs - q).abs() <= 8.0 * f64::EPSILON * q.abs(),
                "quotient not scale invariant: {qs} vs {q}"
            );
        }
        let zero = TestFunction::Scaled { base: Box::new(u), factor: 0.0 };
        assert!(zero.validate(&cfg).is_err());
    }

    #[test]
    fn rayleigh_quotient_respects_lower_bound() {
        let cfg = cfg3();
        let u = mid_cell_bump(&cfg);
        let (q, err) = rayleigh_quotient(&u, &cfg).unwrap();
        let lo = lambda_lower(cfg.radius, cfg.d).unwrap();
        assert!(q >= lo - err - 1e-9, "q = {q} below lower bound {lo}");
    }

    #[test]
    fn potential_energy_bracket_and_periodicity() {
        let cfg = cfg3();
        let period = cfg.axial_period();
        let u = mid_cell_bump(&cfg);
        let pe = potential_energy(&u, &cfg).unwrap();
        let m = l2_mass(&u, &cfg).unwrap();
        // V bracket on the support (sampled)
        let mut vmin = f64::INFINITY;
        let mut vmax: f64 = 0.0;
        for i in 0..60 {
            for j in 0..60 {
                let s = 0.2 * period + 0.6 * period * (i as f64 + 0.5) / 60.0;
                let r = 0.1 * cfg.radius + 0.8 * cfg.radius * (j as f64 + 0.5) / 60.0;
                let c = CellCoords { s, r }.to_reduced(&cfg);
                let v = eval_closed(c, &cfg).unwrap().value;
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
        }
        assert!(pe.value >= 0.99 * vmin * m.value && pe.value <= 1.01 * vmax * m.value);
        // one-period translation leaves ∫Vu² unchanged
        let shifted = TestFunction::Separable {
            axial: Profile1D::Bump { lo: 1.2 * period, hi: 1.8 * period },
            radial: Profile1D::Bump { lo: 0.1 * cfg.radius, hi: 0.9 * cfg.radius },
        };
        let pe2 = potential_energy(&shifted, &cfg).unwrap();
        assert!(
            (pe.value - pe2.value).abs()
                <= 10.0 * (pe.abs_error_estimate + pe2.abs_error_estimate) + 1e-10 * pe.value
        );
    }

    #[test]
    fn radial_bump_2d_matches_1d_reduction() {
        let cfg = cfg3();
        let r_out = (cfg.h / 2.0).min(cfg.radius);
        let u = TestFunction::RadialBump { center_k: 0, r_in: 0.3 * r_out, r_out, tau: 0.05 };
        let tight = QuadOpts { rel_tol: 1e-10, max_depth: 15, ..QuadOpts::default() };
        let got = dirichlet_energy_with(&u, &cfg, &tight).unwrap();
        // 1D reduction ω_{d−1} ∫ u'(t)² t^{d−1} dt, integrated piecewise at
        // the cutoff knots so the reference itself is kink-free per piece
        let r_in = 0.3 * r_out;
        let p = -(cfg.d as f64 - 2.0) / 2.0 + 0.05;
        let pieces = [(r_in / 2.0, r_in), (r_in, r_out / 2.0), (r_out / 2.0, r_out)];
        let oned: f64 = sphere_surface(cfg.d - 1)
            * pieces
                .iter()
                .map(|&(lo, hi)| {
                    composite_log(
                        &|t: f64| {
                            let (eta, etap) = witness_cutoff(t, r_in, r_out);
                            let g = etap * t + p * eta;
                            ((2.0 * 0.05 - 1.0) * t.ln()).exp() * g * g
                        },
                        lo,
                        hi,
                        64.0,
                    )
                })
                .sum::<f64>();
        let rel = ((got.value - oned) / oned).abs();
        assert!(rel < 1e-8, "2d = {}, 1d = {oned}, rel = {rel}", got.value);
        // full potential dominates the single-pole energy
        let pot = potential_energy(&u, &cfg).unwrap();
        let den_1d: f64 = sphere_surface(cfg.d - 1)
            * pieces
                .iter()
                .map(|&(lo, hi)| {
                    composite_log(
                        &|t: f64| {
                            let (eta, _) = witness_cutoff(t, r_in, r_out);
                            ((2.0 * 0.05 - 1.0) * t.ln()).exp() * eta * eta
                        },
                        lo,
                        hi,
                        64.0,
                    )
                })
                .sum::<f64>();
        assert!(pot.value >= den_1d * (1.0 - 1e-6));
    }

    #[test]
    fn witness_quotient_limits() {
        let cfg = cfg3();
        let r_out = (cfg.h / 2.0).min(cfg.radius);
        // the pinned parameters of the acceptance sweep sit far from the
        // asymptotic regime; the cutoff ramps cost O(1) Dirichlet energy
        // against only ~11 usable e-folds, so the value stays near 0.55
        let q = radial_witness_quotient(0.01, 1e-6, r_out, 3, &cfg).unwrap();
        assert!(q > 0.25 && q < 1.0, "q = {q}");
        // deep in the asymptotic regime the classical constant emerges
        let q_deep = radial_witness_quotient(0.003, 1e-60, r_out, 3, &cfg).unwrap();
        assert!(q_deep < 0.28, "q_deep = {q_deep}");
        assert!(q_deep > 0.25);
        // decreasing tau and r_in together never increases the value
        let seq = [
            radial_witness_quotient(0.05, 1e-3, r_out, 3, &cfg).unwrap(),
            radial_witness_quotient(0.01, 1e-12, r_out, 3, &cfg).unwrap(),
            radial_witness_quotient(0.005, 1e-30, r_out, 3, &cfg).unwrap(),
            q_deep,
        ];
        for w in seq.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{seq:?}");
        }
        assert!(radial_witness_quotient(0.01, 1e-3, 2.0 * r_out, 3, &cfg).is_err());
        assert!(radial_witness_quotient(0.6, 1e-3, r_out, 3, &cfg).is_err());
    }

    #[test]
    fn allegretto_identity() {
        let cfg = cfg3();
        let u = mid_cell_bump(&cfg);
        // α = 0: both integrands coincide pointwise
        let rep = allegretto_residual(&u, 0.0, &cfg).unwrap();
        assert!(rep.residual <= 8.0 * f64::EPSILON * rep.lhs.abs().max(rep.rhs.abs()));
        // optimal α: residual within the combined quadrature estimates
        let alpha = optimal_alpha(cfg.radius, cfg.d).unwrap();
        let rep = allegretto_residual(&u, alpha, &cfg).unwrap();
        assert!(rep.rhs >= 0.0);
        assert!(
            rep.residual <= 1e-6 * rep.lhs.abs().max(rep.rhs.abs()),
            "residual {} vs scale {}",
            rep.residual,
            rep.lhs.max(rep.rhs)
        );
    }

    #[test]
    fn hardy_gap_signs() {
        let cfg = cfg3();
        let u = mid_cell_bump(&cfg);
        let (gap0, _) = hardy_gap(&u, 0.0, &cfg).unwrap();
        assert!(gap0 > 0.0);
        let lo = lambda_lower(cfg.radius, cfg.d).unwrap();
        let (gap, err) = hardy_gap(&u, lo, &cfg).unwrap();
        assert!(gap >= -err);
    }

    #[test]
    fn theorem35_windows_and_inequality() {
        let mut cfg = LatticeConfig::normalized(3, 1.0).unwrap();
        cfg.radius = 1.0;
        let u = mid_cell_bump(&cfg);
        let (lhs, rhs, err) = theorem35_check(&u, &cfg).unwrap();
        assert!(lhs >= rhs - err);
        // support outside |s| ≤ 2R rejected
        let period = cfg.axial_period();
        let far = TestFunction::Separable {
            axial: Profile1D::Bump { lo: 4.0 * period, hi: 5.0 * period },
            radial: Profile1D::Bump { lo: 0.1, hi: 0.9 },
        };
        assert!(theorem35_check(&far, &cfg).is_err());
    }

    #[test]
    fn admissibility_checks() {
        let cfg = cfg3();
        // radial support beyond R
        let bad = TestFunction::Separable {
            axial: Profile1D::Bump { lo: 0.1, hi: 0.2 },
            radial: Profile1D::Bump { lo: 0.1, hi: 2.0 * cfg.radius },
        };
        assert!(bad.validate(&cfg).is_err());
        // support touching a pole
        let period = cfg.axial_period();
        let touching = TestFunction::Separable {
            axial: Profile1D::Bump { lo: -0.2 * period, hi: 0.2 * period },
            radial: Profile1D::Tent { lo: 0.0, hi: 0.5 * cfg.radius },
        };
        assert!(touching.validate(&cfg).is_err());
        // same axial range clear of the axis is fine
        let ok = TestFunction::Separable {
            axial: Profile1D::Bump { lo: -0.2 * period, hi: 0.2 * period },
            radial: Profile1D::Bump { lo: 0.1 * cfg.radius, hi: 0.9 * cfg.radius },
        };
        assert!(ok.validate(&cfg).is_ok());
    }
}
