//! Seeded sampling of points in the cylinder, shared by the verification
//! suites and the CLI so identical seeds reproduce identical runs.

use crate::geometry::{LatticeConfig, ReducedCoords};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stream of reduced-coordinate points of C_R.
pub struct CylinderSampler {
    rng: ChaCha8Rng,
    rho_max: f64,
    d: usize,
    /// Points closer than this (in the (a, ρ) metric) to a pole are redrawn.
    pub pole_floor: f64,
}

impl CylinderSampler {
    pub fn new(cfg: &LatticeConfig, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rho_max: cfg.rho_max(),
            d: cfg.d,
            pole_floor: 1e-12,
        }
    }

    pub fn with_pole_floor(mut self, floor: f64) -> Self {
        self.pole_floor = floor;
        self
    }

    /// Volume-uniform point of one periodic cell: a ∈ [−1/2, 1/2),
    /// ρ = ρ_max·u^{1/(d−1)} (the r^{d−2} radial weight).
    pub fn next_point(&mut self) -> ReducedCoords {
        loop {
            let a: f64 = self.rng.gen_range(-0.5..0.5);
            let u: f64 = self.rng.gen();
            let rho = self.rho_max * u.powf(1.0 / (self.d as f64 - 1.0));
            let c = ReducedCoords { a, rho };
            if c.pole_distance() >= self.pole_floor {
                return c;
            }
        }
    }

    /// A point at least `floor` and at most ρ_max away from the axis,
    /// for finite-difference work that needs smoothness around the point.
    pub fn next_off_axis(&mut self, floor: f64) -> ReducedCoords {
        let a: f64 = self.rng.gen_range(-0.5..0.5);
        let rho: f64 = self.rng.gen_range(floor..self.rho_max);
        ReducedCoords { a, rho }
    }

    pub fn gen_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}

/// Embed a reduced point into Cartesian coordinates using a fixed
/// transverse direction (deterministic, orthogonal to the axis).
pub fn to_cartesian(c: ReducedCoords, cfg: &LatticeConfig) -> Vec<f64> {
    let d = cfg.d;
    let mut dir = vec![0.0; d];
    dir[0] = 1.0 / 2f64.sqrt();
    dir[1] = -1.0 / 2f64.sqrt();
    let scale = cfg.axial_period(); // cell = reduced · h√d
    let s = c.a * scale;
    let r = c.rho * scale;
    (0..d)
        .map(|i| s / (d as f64).sqrt() + r * dir[i])
        .collect()
}
