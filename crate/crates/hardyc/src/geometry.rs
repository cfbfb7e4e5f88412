//! Lattice geometry: reduced coordinates, cylinder membership, embeddings.
//!
//! The poles sit at a_k = k·(h,…,h). Every quantity of interest depends on a
//! point x only through the reduced pair
//!
//! ```text
//! a = Σ x_j / (dh),    ρ² = (d·Σ x_j² − (Σ x_j)²) / (d²h²)
//! ```
//!
//! so that |x − a_k|² = dh²((k−a)² + ρ²). The cylinder C_R of radius R is
//! {ρ ≤ R√d}. Cell coordinates (s, r) are arc length along the axis and
//! distance to it; they relate to (a, ρ) by (a, ρ) = (s, r)/(h√d).

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lattice and cylinder parameters; `normalized` means dh = 1 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub d: usize,
    pub h: f64,
    pub radius: f64,
    pub normalized: bool,
}

impl LatticeConfig {
    /// General spacing; `normalized` is set only when d*h == 1 exactly.
    pub fn new(d: usize, h: f64, radius: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d = {d}, need d >= 2")));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("h = {h}, need h > 0")));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("R = {radius}, need R > 0")));
        }
        let normalized = d as f64 * h == 1.0;
        Ok(Self { d, h, radius, normalized })
    }

    /// The dh = 1 case used throughout the bound formulas; h is stored as
    /// exactly 1/d so dh² factors do not drift.
    pub fn normalized(d: usize, radius: f64) -> Result<Self> {
        let mut cfg = Self::new(d, 1.0, radius)?;
        cfg.h = 1.0 / d as f64;
        cfg.normalized = true;
        Ok(cfg)
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }

    /// dh², the scale factor of the reduced series.
    pub fn dh2(&self) -> f64 {
        self.d as f64 * self.h * self.h
    }

    /// Axial pole spacing L = h√d, also the cell-to-reduced scale.
    pub fn axial_period(&self) -> f64 {
        self.h * (self.d as f64).sqrt()
    }

    /// Cylinder bound in reduced coordinates: ρ ≤ R√d.
    pub fn rho_max(&self) -> f64 {
        self.radius * (self.d as f64).sqrt()
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.d {
            Err(Error::DimensionMismatch { expected: self.d, got: p.len() })
        } else {
            Ok(())
        }
    }
}

/// Axial lattice coordinate a and transverse coordinate ρ ≥ 0.
/// Poles are exactly the points (a, ρ) = (k, 0), k ∈ Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoords {
    pub a: f64,
    pub rho: f64,
}

impl ReducedCoords {
    pub fn new(a: f64, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho}, need rho >= 0")));
        }
        Ok(Self { a, rho })
    }

    /// Distance in the (a, ρ) half-plane to the nearest pole (k, 0).
    pub fn pole_distance(&self) -> f64 {
        let frac = self.a - self.a.round();
        frac.hypot(self.rho)
    }
}

/// Cell coordinates: s arc length along the axis, r distance to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCoords {
    pub s: f64,
    pub r: f64,
}

impl CellCoords {
    pub fn new(s: f64, r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("r = {r}, need r >= 0")));
        }
        Ok(Self { s, r })
    }

    /// (a, ρ) = (s, r)/(h√d).
    pub fn to_reduced(self, cfg: &LatticeConfig) -> ReducedCoords {
        let scale = cfg.axial_period();
        ReducedCoords { a: self.s / scale, rho: self.r / scale }
    }
}

/// Map a Cartesian point to (a, ρ).
///
/// ρ² is computed in the variance form Σ(x_j − mean)²/(dh²), which is
/// cancellation-free; the raw d·|x|² − (Σx)² difference loses all accuracy
/// near the axis.
pub fn reduced_coords(p: &[f64], cfg: &LatticeConfig) -> Result<ReducedCoords> {
    cfg.check_dim(p)?;
    let d = cfg.d as f64;
    let sum: f64 = p.iter().sum();
    let mean = sum / d;
    let var: f64 = p.iter().map(|x| (x - mean) * (x - mean)).sum();
    let a = sum / (d * cfg.h);
    Ok(ReducedCoords { a, rho: (var / (d * cfg.h * cfg.h)).sqrt() })
}

/// Residual of the identity |x|² = dh²(ρ² + a²).
pub fn norm_identity_residual(p: &[f64], cfg: &LatticeConfig) -> Result<f64> {
    let rc = reduced_coords(p, cfg)?;
    let norm2: f64 = p.iter().map(|x| x * x).sum();
    Ok((norm2 - cfg.dh2() * (rc.rho * rc.rho + rc.a * rc.a)).abs())
}

/// Membership in the closed cylinder C_R: ρ ≤ R√d.
pub fn in_cylinder(c: ReducedCoords, cfg: &LatticeConfig) -> bool {
    c.rho <= cfg.rho_max()
}

/// Embed cell coordinates back into Cartesian space along a unit transverse
/// direction: x = (s/√d)·(1,…,1) + r·dir.
pub fn embed(c: CellCoords, dir: &[f64], cfg: &LatticeConfig) -> Result<Vec<f64>> {
    cfg.check_dim(dir)?;
    let d = cfg.d as f64;
    let dot_axis: f64 = dir.iter().sum::<f64>() / d.sqrt();
    let norm: f64 = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dot_axis.abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "direction not orthogonal to the axis (axis component {dot_axis:e})"
        )));
    }
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("direction not unit (norm {norm})")));
    }
    Ok(dir
        .iter()
        .map(|&e| c.s / d.sqrt() + c.r * e)
        .collect())
}
