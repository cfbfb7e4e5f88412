//! Discrete estimation of the Hardy constant μ(C_R): piecewise-bilinear
//! finite elements on one periodic axial cell of the (s, r) domain, weighted
//! stiffness/potential-mass pair, smallest generalized eigenvalue by inverse
//! iteration, with a dense oracle for small instances.
//!
//! Trial functions are L-periodic in s, vanish at r = R and on a small
//! exclusion disk of radius δ around the pole at (s, r) = (0, 0), so every
//! discrete eigenvalue is an upper bound for the periodic-cell quotient.

use crate::geometry::{CellCoords, LatticeConfig};
use crate::potential::eval_closed;
use crate::supersolution::theorem_bounds;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tensor grid on [0, L) × [0, R]: uniform in s, geometrically graded
/// toward r = 0 so the innermost radial cell is at most δ/2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid2D {
    pub n_s: usize,
    pub n_r: usize,
    /// Axial period L = h√d.
    pub period: f64,
    pub radius: f64,
    /// Pole-exclusion radius.
    pub delta: f64,
    /// n_r + 1 radial nodes, strictly increasing from 0 to R.
    pub r_nodes: Vec<f64>,
}

impl Grid2D {
    /// Graded grid; errors when the shape or δ violates the invariants
    /// (n_s, n_r ≥ 4; 0 < δ < min(h/2, R)/4; radial cells at most 32× the
    /// axial spacing).
    pub fn graded(n_s: usize, n_r: usize, cfg: &LatticeConfig, delta: f64) -> Result<Self> {
        let cap = (cfg.h / 2.0).min(cfg.radius) / 4.0;
        if n_s < 4 || n_r < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid {n_s}x{n_r} too coarse, need n_s, n_r >= 4"
            )));
        }
        if !(delta > 0.0 && delta < cap) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} outside (0, min(h/2, R)/4 = {cap})"
            )));
        }
        let r = cfg.radius;
        let c = (delta / 2.0).min(r / n_r as f64);
        let r_nodes = graded_nodes(n_r, c, r);
        let grid = Self {
            n_s,
            n_r,
            period: cfg.axial_period(),
            radius: r,
            delta,
            r_nodes,
        };
        let ds = grid.ds();
        let max_dr = grid
            .r_nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        if max_dr > 32.0 * ds {
            return Err(Error::InvalidParameter(format!(
                "radial cell {max_dr} exceeds 32x the axial spacing {ds}"
            )));
        }
        Ok(grid)
    }

    pub fn ds(&self) -> f64 {
        self.period / self.n_s as f64
    }

    /// Bisect every cell in both directions; the refined grid contains this
    /// grid's nodes exactly, so the discrete spaces are nested.
    pub fn refine(&self) -> Self {
        let mut r_nodes = Vec::with_capacity(2 * self.n_r + 1);
        for w in self.r_nodes.windows(2) {
            r_nodes.push(w[0]);
            r_nodes.push(0.5 * (w[0] + w[1]));
        }
        r_nodes.push(*self.r_nodes.last().unwrap());
        Self {
            n_s: 2 * self.n_s,
            n_r: 2 * self.n_r,
            period: self.period,
            radius: self.radius,
            delta: self.delta,
            r_nodes,
        }
    }

    /// True when `fine` refines `self`: doubled axial count, radial nodes a
    /// superset, identical period/radius/δ.
    pub fn is_refined_by(&self, fine: &Grid2D) -> bool {
        fine.n_s == 2 * self.n_s
            && fine.period == self.period
            && fine.radius == self.radius
            && fine.delta == self.delta
            && self.r_nodes.iter().all(|r| fine.r_nodes.binary_search_by(|x| x.partial_cmp(r).unwrap()).is_ok())
    }

    /// Distance from grid node (is, ir) to the pole at (0, 0), periodic in s.
    fn pole_distance(&self, is: usize, ir: usize) -> f64 {
        let s = is as f64 * self.ds();
        let sd = s.min(self.period - s);
        sd.hypot(self.r_nodes[ir])
    }

    /// Active-DOF map in r-major order (index = row·n_s + column position),
    /// which keeps the factorization bandwidth near n_s.
    fn dof_map(&self) -> (Vec<Option<usize>>, usize) {
        let mut map = vec![None; self.n_s * (self.n_r + 1)];
        let mut next = 0;
        for ir in 0..self.n_r {
            // ir = n_r is the Dirichlet boundary r = R
            for is in 0..self.n_s {
                if self.pole_distance(is, ir) < self.delta {
                    continue; // exclusion disk
                }
                map[ir * self.n_s + is] = Some(next);
                next += 1;
            }
        }
        (map, next)
    }

    pub fn active_dofs(&self) -> usize {
        self.dof_map().1
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.n_s, self.n_r)
    }
}

fn graded_nodes(n: usize, first_cell: f64, total: f64) -> Vec<f64> {
    // cell sizes first_cell·g^j with the smallest g ≥ 1 covering `total`
    let nf = n as f64;
    let sum = |g: f64| -> f64 {
        if (g - 1.0).abs() < 1e-14 {
            nf * first_cell
        } else {
            first_cell * (g.powf(nf) - 1.0) / (g - 1.0)
        }
    };
    let g = if nf * first_cell >= total {
        1.0
    } else {
        let mut lo = 1.0;
        let mut hi = 2.0;
        while sum(hi) < total {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum(mid) < total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut nodes = Vec::with_capacity(n + 1);
    let mut r = 0.0;
    let mut cell = first_cell * total / sum(g); // rescale so the sum is exact
    nodes.push(0.0);
    for i in 0..n {
        r += cell;
        cell *= g;
        nodes.push(if i + 1 == n { total } else { r });
    }
    nodes
}

/// Symmetric sparse matrix in compressed-row layout (both triangles stored).
#[derive(Debug, Clone)]
pub struct SymmetricSparseOperator {
    pub dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricSparseOperator {
    fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        // stable sort keeps per-(i,j) accumulation in element order, so the
        // (i,j) and (j,i) sums are bitwise equal
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, col_idx, vals }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => self.vals[lo + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Entry-wise symmetry defect max|A − Aᵀ| (must be exactly 0).
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                worst = worst.max((self.vals[p] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn bandwidth(&self) -> usize {
        let mut b = 0usize;
        for i in 0..self.dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                b = b.max(i.abs_diff(self.col_idx[p]));
            }
        }
        b
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.vals[p];
            }
        }
        m
    }
}

const G3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const G3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Stiffness a(u,v) = ∬(u_s v_s + u_r v_r) r^{d−2} and potential mass
/// b(u,v) = ∬ V u v r^{d−2} on the active DOFs, 3×3 Gauss per element,
/// V from the closed residue form.
pub fn assemble(
    grid: &Grid2D,
    cfg: &LatticeConfig,
) -> Result<(SymmetricSparseOperator, SymmetricSparseOperator)> {
    cfg.require_normalized()?;
    if grid.delta >= grid.radius {
        return Err(Error::InvalidParameter(
            "exclusion disk reaches the outer boundary".into(),
        ));
    }
    let (map, ndof) = grid.dof_map();
    let ds = grid.ds();
    let n_s = grid.n_s;

    // per-element 4x4 local matrices, computed in parallel, scattered in a
    // fixed element order so assembly is bit-stable across thread counts
    let elements: Vec<(usize, usize)> = (0..grid.n_r)
        .flat_map(|ir| (0..n_s).map(move |is| (is, ir)))
        .collect();
    let locals: Vec<([[f64; 4]; 4], [[f64; 4]; 4])> = elements
        .par_iter()
        .map(|&(is, ir)| {
            let s0 = is as f64 * ds;
            let r0 = grid.r_nodes[ir];
            let r1 = grid.r_nodes[ir + 1];
            element_matrices(s0, ds, r0, r1, cfg)
        })
        .collect();

    let mut kt: Vec<(usize, usize, f64)> = Vec::with_capacity(16 * elements.len());
    let mut mt: Vec<(usize, usize, f64)> = Vec::with_capacity(16 * elements.len());
    for (&(is, ir), (ke, me)) in elements.iter().zip(&locals) {
        let isp = (is + 1) % n_s;
        let nodes = [
            map[ir * n_s + is],
            map[ir * n_s + isp],
            map.get((ir + 1) * n_s + is).copied().flatten(),
            map.get((ir + 1) * n_s + isp).copied().flatten(),
        ];
        for (a, &ia) in nodes.iter().enumerate() {
            let Some(ia) = ia else { continue };
            for (b, &ib) in nodes.iter().enumerate() {
                let Some(ib) = ib else { continue };
                kt.push((ia, ib, ke[a][b]));
                mt.push((ia, ib, me[a][b]));
            }
        }
    }
    let k = SymmetricSparseOperator::from_triplets(ndof, kt);
    let m = SymmetricSparseOperator::from_triplets(ndof, mt);
    assert_eq!(k.symmetry_defect(), 0.0, "stiffness not symmetric");
    assert_eq!(m.symmetry_defect(), 0.0, "potential mass not symmetric");
    Ok((k, m))
}

/// Local stiffness/potential-mass for the bilinear element
/// [s0, s0+ds] × [r0, r1]; node order (s0,r0), (s1,r0), (s0,r1), (s1,r1).
///
/// The stiffness integrand is polynomial of per-direction degree ≤ 5 for
/// d ≤ 5, so the 3×3 rule integrates it exactly; the potential mass carries
/// all of V's variation and is refined adaptively (deterministic dyadic
/// recursion), which matters on elements bordering the exclusion disk.
fn element_matrices(
    s0: f64,
    ds: f64,
    r0: f64,
    r1: f64,
    cfg: &LatticeConfig,
) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let dr = r1 - r0;
    let wexp = cfg.d as i32 - 2;
    let mut ke = [[0.0; 4]; 4];
    for (gi, &xi) in G3_X.iter().enumerate() {
        let u = 0.5 * (xi + 1.0); // ξ ∈ [0,1]
        for (gj, &xj) in G3_X.iter().enumerate() {
            let v = 0.5 * (xj + 1.0);
            let r = r0 + v * dr;
            let w = G3_W[gi] * G3_W[gj] * 0.25 * ds * dr * r.powi(wexp);
            let dshape_s = [-(1.0 - v) / ds, (1.0 - v) / ds, -v / ds, v / ds];
            let dshape_r = [-(1.0 - u) / dr, -u / dr, (1.0 - u) / dr, u / dr];
            for a in 0..4 {
                for b in 0..4 {
                    // grouping keeps the local matrices bitwise symmetric,
                    // which the assembly asserts
                    ke[a][b] += w * (dshape_s[a] * dshape_s[b] + dshape_r[a] * dshape_r[b]);
                }
            }
        }
    }
    let me = mass_adaptive(s0, ds, r0, dr, s0, s0 + ds, r0, r0 + dr, cfg, 0);
    (ke, me)
}

/// 3×3 Gauss evaluation of the V-weighted shape-pair products of the parent
/// element over one sub-rectangle.
#[allow(clippy::too_many_arguments)]
fn mass_on_subcell(
    es0: f64,
    eds: f64,
    er0: f64,
    edr: f64,
    s0: f64,
    s1: f64,
    r0: f64,
    r1: f64,
    cfg: &LatticeConfig,
) -> [[f64; 4]; 4] {
    let wexp = cfg.d as i32 - 2;
    let mut me = [[0.0; 4]; 4];
    for (gi, &xi) in G3_X.iter().enumerate() {
        let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * xi;
        let u = (s - es0) / eds;
        for (gj, &xj) in G3_X.iter().enumerate() {
            let r = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * xj;
            let v = (r - er0) / edr;
            let w = G3_W[gi] * G3_W[gj] * 0.25 * (s1 - s0) * (r1 - r0) * r.powi(wexp);
            let shape = [(1.0 - u) * (1.0 - v), u * (1.0 - v), (1.0 - u) * v, u * v];
            let c = CellCoords { s, r }.to_reduced(cfg);
            let vpot = eval_closed(c, cfg)
                .map(|p| p.value)
                .expect("Gauss node cannot hit a pole for dr > 0");
            for a in 0..4 {
                for b in 0..4 {
                    me[a][b] += (w * vpot) * (shape[a] * shape[b]);
                }
            }
        }
    }
    me
}

#[allow(clippy::too_many_arguments)]
fn mass_adaptive(
    es0: f64,
    eds: f64,
    er0: f64,
    edr: f64,
    s0: f64,
    s1: f64,
    r0: f64,
    r1: f64,
    cfg: &LatticeConfig,
    depth: u32,
) -> [[f64; 4]; 4] {
    let coarse = mass_on_subcell(es0, eds, er0, edr, s0, s1, r0, r1, cfg);
    let sm = 0.5 * (s0 + s1);
    let rm = 0.5 * (r0 + r1);
    let quads = [(s0, sm, r0, rm), (sm, s1, r0, rm), (s0, sm, rm, r1), (sm, s1, rm, r1)];
    let mut fine = [[0.0; 4]; 4];
    let mut children = [[[0.0; 4]; 4]; 4];
    for (q, &(a, b, c, d)) in quads.iter().enumerate() {
        children[q] = mass_on_subcell(es0, eds, er0, edr, a, b, c, d, cfg);
        for i in 0..4 {
            for j in 0..4 {
                fine[i][j] += children[q][i][j];
            }
        }
    }
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            diff = diff.max((fine[i][j] - coarse[i][j]).abs());
            scale = scale.max(fine[i][j].abs());
        }
    }
    if depth >= 12 || diff <= 1e-11 * scale {
        return fine;
    }
    let mut out = [[0.0; 4]; 4];
    for &(a, b, c, d) in &quads {
        let sub = mass_adaptive(es0, eds, er0, edr, a, b, c, d, cfg, depth + 1);
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += sub[i][j];
            }
        }
    }
    out
}

/// Smallest generalized eigenvalue estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigEstimate {
    pub mu_hat: f64,
    pub residual_norm: f64,
    pub grid: String,
    pub dofs: usize,
    pub iterations: usize,
}

struct BandCholesky {
    n: usize,
    bw: usize,
    // row i stores entries (i, i−bw..=i) at data[i*(bw+1) + j−i+bw]
    data: Vec<f64>,
}

impl BandCholesky {
    fn factor(a: &SymmetricSparseOperator, shift: &SymmetricSparseOperator, sigma: f64) -> Result<Self> {
        let n = a.dim;
        let bw = a.bandwidth().max(shift.bandwidth());
        let stride = bw + 1;
        let mut data = vec![0.0; n * stride];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                data[i * stride + (j + bw - i)] = a.get(i, j) + sigma * shift.get(i, j);
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = data[i * stride + (j + bw - i)];
                for k in k0..j {
                    sum -= data[i * stride + (k + bw - i)] * data[j * stride + (k + bw - j)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::Solver(format!(
                            "factorization broke down at row {i} (pivot {sum:e})"
                        )));
                    }
                    data[i * stride + bw] = sum.sqrt();
                } else {
                    data[i * stride + (j + bw - i)] = sum / data[j * stride + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let stride = self.bw + 1;
        x.copy_from_slice(b);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let mut sum = x[i];
            for j in j0..i {
                sum -= self.data[i * stride + (j + self.bw - i)] * x[j];
            }
            x[i] = sum / self.data[i * stride + self.bw];
        }
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            let hi = (i + self.bw).min(self.n - 1);
            for j in i + 1..=hi {
                sum -= self.data[j * stride + (i + self.bw - j)] * x[j];
            }
            x[i] = sum / self.data[i * stride + self.bw];
        }
    }
}

/// Inverse iteration on K + σM (σ = 1e−8, subtracted exactly by taking the
/// Rayleigh quotient against the unshifted K) with deterministic all-ones
/// start; residual_norm = ‖Kv − μMv‖₂ for the M-normalized eigenvector.
pub fn smallest_eig(
    k: &SymmetricSparseOperator,
    m: &SymmetricSparseOperator,
    grid: &Grid2D,
    tol: f64,
) -> Result<EigEstimate> {
    smallest_eig_with_vector(k, m, grid, tol).map(|(e, _)| e)
}

/// As `smallest_eig`, also returning the M-normalized eigenvector.
pub fn smallest_eig_with_vector(
    k: &SymmetricSparseOperator,
    m: &SymmetricSparseOperator,
    grid: &Grid2D,
    tol: f64,
) -> Result<(EigEstimate, Vec<f64>)> {
    let n = k.dim;
    if n == 0 {
        return Err(Error::Solver("no active degrees of freedom".into()));
    }
    let chol = BandCholesky::factor(k, m, 1e-8)?;
    let mut v = vec![1.0f64; n];
    let mut mv = vec![0.0; n];
    let mut kv = vec![0.0; n];
    let mut w = vec![0.0; n];
    m.matvec(&v, &mut mv);
    let nrm = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= nrm;
    }
    let mut mu = 0.0;
    let mut rn = f64::INFINITY;
    for it in 1..=500 {
        m.matvec(&v, &mut mv);
        chol.solve(&mv, &mut w);
        m.matvec(&w, &mut mv);
        let beta = w.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().sqrt();
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / beta;
        }
        m.matvec(&v, &mut mv);
        k.matvec(&v, &mut kv);
        mu = v.iter().zip(&kv).map(|(a, b)| a * b).sum::<f64>();
        rn = kv
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - mu * b) * (a - mu * b))
            .sum::<f64>()
            .sqrt();
        if rn <= tol * (1.0 + mu.abs()) {
            return Ok((
                EigEstimate {
                    mu_hat: mu,
                    residual_norm: rn,
                    grid: grid.label(),
                    dofs: n,
                    iterations: it,
                },
                v,
            ));
        }
    }
    Err(Error::Solver(format!(
        "inverse iteration did not converge in 500 steps (mu = {mu}, residual = {rn:e})"
    )))
}

/// Rayleigh quotient of the piecewise-bilinear interpolant of the DOF
/// vector `v`, integrated independently by the adaptive quadrature module
/// (not the 3×3 element rule); returns (quotient, error estimate).
pub fn interpolant_quotient(
    grid: &Grid2D,
    cfg: &LatticeConfig,
    v: &[f64],
) -> Result<(f64, f64)> {
    use crate::quadrature::{integrate_cell, QuadOpts};
    cfg.require_normalized()?;
    let (map, ndof) = grid.dof_map();
    if v.len() != ndof {
        return Err(Error::DimensionMismatch { expected: ndof, got: v.len() });
    }
    let nodal = |is: usize, ir: usize| -> f64 {
        if ir > grid.n_r {
            return 0.0;
        }
        map.get(ir * grid.n_s + is % grid.n_s)
            .copied()
            .flatten()
            .map_or(0.0, |i| v[i])
    };
    let ds = grid.ds();
    let opts = QuadOpts { rel_tol: 1e-10, max_depth: 10, ..QuadOpts::default() };
    let mut num = 0.0;
    let mut num_err = 0.0;
    let mut den = 0.0;
    let mut den_err = 0.0;
    for ir in 0..grid.n_r {
        let (r0, r1) = (grid.r_nodes[ir], grid.r_nodes[ir + 1]);
        let dr = r1 - r0;
        for is in 0..grid.n_s {
            let s0 = is as f64 * ds;
            let c = [
                nodal(is, ir),
                nodal(is + 1, ir),
                nodal(is, ir + 1),
                nodal(is + 1, ir + 1),
            ];
            if c == [0.0; 4] {
                continue;
            }
            let interp = move |s: f64, r: f64| -> (f64, f64, f64) {
                let u = (s - s0) / ds;
                let w = (r - r0) / dr;
                let val = c[0] * (1.0 - u) * (1.0 - w)
                    + c[1] * u * (1.0 - w)
                    + c[2] * (1.0 - u) * w
                    + c[3] * u * w;
                let d_s = (-c[0] * (1.0 - w) + c[1] * (1.0 - w) - c[2] * w + c[3] * w) / ds;
                let d_r = (-c[0] * (1.0 - u) - c[1] * u + c[2] * (1.0 - u) + c[3] * u) / dr;
                (val, d_s, d_r)
            };
            let e = integrate_cell(
                |s, r| {
                    let (_, a, b) = interp(s, r);
                    a * a + b * b
                },
                (s0, s0 + ds),
                (r0, r1),
                cfg.d,
                &opts,
            )?;
            num += e.value;
            num_err += e.abs_error_estimate;
            let p = integrate_cell(
                |s, r| {
                    let (val, _, _) = interp(s, r);
                    let rc = CellCoords { s, r }.to_reduced(cfg);
                    eval_closed(rc, cfg).map(|pv| pv.value).unwrap_or(f64::INFINITY)
                        * val
                        * val
                },
                (s0, s0 + ds),
                (r0, r1),
                cfg.d,
                &opts,
            )?;
            den += p.value;
            den_err += p.abs_error_estimate;
        }
    }
    if !(den > 0.0) {
        return Err(Error::Quadrature("zero potential mass of the interpolant".into()));
    }
    let q = num / den;
    Ok((q, (num_err + q * den_err) / den))
}

/// Dense oracle: smallest eigenvalue of Kx = λMx via M = LLᵀ and a
/// symmetric eigensolve of L⁻¹KL⁻ᵀ. Intended for small instances.
pub fn dense_smallest_eig(
    k: &SymmetricSparseOperator,
    m: &SymmetricSparseOperator,
) -> Result<f64> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = nalgebra::Cholesky::new(md)
        .ok_or_else(|| Error::Solver("potential mass not positive definite".into()))?;
    let l = chol.l();
    let mut x = kd;
    l.solve_lower_triangular_mut(&mut x);
    let mut xt = x.transpose();
    l.solve_lower_triangular_mut(&mut xt);
    let sym = 0.5 * (&xt + xt.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Ladder result with the Richardson/Aitken extrapolated limit and the
/// analytic sandwich verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuReport {
    pub estimates: Vec<EigEstimate>,
    pub extrapolated: f64,
    pub lower: f64,
    pub upper: f64,
    /// mu_hat ≥ lower − 1e−6 on the finest grid.
    pub lower_ok: bool,
    /// mu_hat ≤ upper·1.05 on the finest grid.
    pub upper_ok: bool,
}

impl MuReport {
    pub fn sandwich_pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub const SOLVER_TOL: f64 = 1e-11;

/// Run a nested ladder of grids; every estimate is an upper bound for the
/// periodic-cell quotient up to solver tolerance.
pub fn estimate_mu(cfg: &LatticeConfig, grids: &[Grid2D]) -> Result<MuReport> {
    if grids.is_empty() {
        return Err(Error::InvalidParameter("empty grid ladder".into()));
    }
    for w in grids.windows(2) {
        if !w[0].is_refined_by(&w[1]) {
            return Err(Error::InvalidParameter(format!(
                "ladder not nested at {} -> {}",
                w[0].label(),
                w[1].label()
            )));
        }
    }
    let mut estimates = Vec::with_capacity(grids.len());
    for g in grids {
        let (k, m) = assemble(g, cfg)?;
        estimates.push(smallest_eig(&k, &m, g, SOLVER_TOL)?);
    }
    let mus: Vec<f64> = estimates.iter().map(|e| e.mu_hat).collect();
    let extrapolated = aitken_limit(&mus);
    let (lower, upper) = theorem_bounds(cfg.radius, cfg.d)?;
    let last = *mus.last().unwrap();
    Ok(MuReport {
        estimates,
        extrapolated,
        lower,
        upper,
        lower_ok: last >= lower - 1e-6,
        upper_ok: last <= upper * 1.05,
    })
}

fn aitken_limit(mus: &[f64]) -> f64 {
    let n = mus.len();
    if n < 3 {
        return mus[n - 1];
    }
    let (a, b, c) = (mus[n - 3], mus[n - 2], mus[n - 1]);
    let d2 = (c - b) - (b - a);
    if d2.abs() < 1e-15 * c.abs().max(1.0) {
        return c;
    }
    let extrap = c - (c - b) * (c - b) / d2;
    // extrapolation past the analytic floor of 0 is a divergence artifact
    if extrap.is_finite() && extrap > 0.0 {
        extrap
    } else {
        c
    }
}

/// Mesh policy for sweeps: base grid shape, number of nested refinements,
/// and δ as a multiple of h.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridPolicy {
    pub base_n_s: usize,
    pub base_n_r: usize,
    pub refinements: usize,
    pub delta_over_h: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { base_n_s: 64, base_n_r: 32, refinements: 2, delta_over_h: 1e-3 }
    }
}

impl GridPolicy {
    pub fn ladder(&self, cfg: &LatticeConfig) -> Result<Vec<Grid2D>> {
        let base = Grid2D::graded(
            self.base_n_s,
            self.base_n_r,
            cfg,
            self.delta_over_h * cfg.h,
        )?;
        let mut grids = vec![base];
        for _ in 0..self.refinements {
            let next = grids.last().unwrap().refine();
            grids.push(next);
        }
        Ok(grids)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub lower: f64,
    pub mu_hat: f64,
    pub upper: f64,
    pub gap: f64,
    pub grid: String,
    pub delta: f64,
}

/// Per-R estimates over a strictly decreasing list of radii; `gap` is the
/// analytic upper − lower, which shrinks to 0 as R → 0.
pub fn sweep_r(d: usize, r_list: &[f64], policy: &GridPolicy) -> Result<Vec<SweepRow>> {
    if r_list.is_empty() {
        return Err(Error::InvalidParameter("empty R list".into()));
    }
    for w in r_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(format!(
                "R list must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    r_list
        .par_iter()
        .map(|&r| {
            let cfg = LatticeConfig::normalized(d, r)?;
            let grids = policy.ladder(&cfg)?;
            let rep = estimate_mu(&cfg, &grids)?;
            let last = rep.estimates.last().unwrap();
            Ok(SweepRow {
                r,
                lower: rep.lower,
                mu_hat: last.mu_hat,
                upper: rep.upper,
                gap: rep.upper - rep.lower,
                grid: last.grid.clone(),
                delta: grids[0].delta,
            })
        })
        .collect()
}
