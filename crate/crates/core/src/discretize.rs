//! Finite-dimensional realizations of the coupled resolvent systems by
//! Chebyshev collocation.
//!
//! Two systems are assembled, both 2x2 blocks acting on stacked grid
//! vectors:
//!
//! * `Bz` (parameter z): ((1/n) Lap - z) u + ((n-1)/n) v = f,
//!   (Lap - z) v = g, with clamped rows u = du = 0 on the boundary.
//! * `Tilde` (parameter k): (Lap + k^2 n) w = f, (Lap + k^2) v = g, with
//!   the matching rows w = v and dw = dv on the boundary.
//!
//! The disk is reduced per angular mode m to the radial operator
//! d^2/dr^2 + (1/r) d/dr - m^2/r^2 on a folded diameter grid whose node
//! placement avoids r = 0; regularity at the center enters through the
//! parity fold of the differentiation matrices.

use crate::chebyshev::{clenshaw_curtis_weights, diff_matrix, lobatto_nodes, radial_fold_weights};
use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, CMat, CVec};
use crate::problem::{Geometry, TransmissionProblem};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::io::Write;
use std::sync::Arc;

const MIN_NODES: usize = 16;
const MAX_MODE: i32 = 60;
const CONDITION_CEILING: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// (u, v) system in the spectral parameter z.
    Bz,
    /// (w, v) system in the wavenumber k.
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    Bz,
    Tilde,
    DiskMode { m: i32, system: SystemKind },
}

impl OperatorForm {
    pub fn system(&self) -> SystemKind {
        match self {
            OperatorForm::Bz => SystemKind::Bz,
            OperatorForm::Tilde => SystemKind::Tilde,
            OperatorForm::DiskMode { system, .. } => *system,
        }
    }

    /// Tag for the binary dump header.
    pub fn tag(&self) -> u32 {
        match self {
            OperatorForm::Bz => 1,
            OperatorForm::Tilde => 2,
            OperatorForm::DiskMode { .. } => 3,
        }
    }
}

/// A discretized coupled operator: matrix-valued function of the spectral
/// parameter (z for `Bz`, k for `Tilde`-kind forms), immutable and
/// shareable across threads.
#[derive(Clone)]
pub struct DiscretizedOperator {
    pub form: OperatorForm,
    /// Total matrix dimension (2 x nodes).
    pub size: usize,
    pub collocation_nodes: Vec<f64>,
    pub quadrature_weights: Vec<f64>,
    pub boundary_rows: Vec<usize>,
    /// Ambient dimension of the underlying geometry (1 or 2).
    pub ambient_dim: usize,
    d1: Arc<DMatrix<f64>>,
    d2: Arc<DMatrix<f64>>,
    assemble: Arc<dyn Fn(C64) -> CMat + Send + Sync>,
}

impl std::fmt::Debug for DiscretizedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscretizedOperator")
            .field("form", &self.form)
            .field("size", &self.size)
            .field("boundary_rows", &self.boundary_rows)
            .finish()
    }
}

impl DiscretizedOperator {
    pub fn matrix_of(&self, param: C64) -> CMat {
        (self.assemble)(param)
    }

    pub fn nodes_per_unknown(&self) -> usize {
        self.size / 2
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Zeroes the boundary-row slots of a stacked data vector (the
    /// boundary rows carry the homogeneous boundary/matching conditions).
    pub fn project_data(&self, data: &CVec) -> CVec {
        let mut out = data.clone();
        for &r in &self.boundary_rows {
            out[r] = C64::new(0.0, 0.0);
        }
        out
    }

    /// Binary dump: 16-byte header (magic "ITESPEC1", u32 size, u32 form
    /// tag) followed by row-major complex128 little-endian entries.
    pub fn dump_matrix(&self, path: &std::path::Path, param: C64) -> Result<()> {
        let m = self.matrix_of(param);
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"ITESPEC1")?;
        f.write_all(&(self.size as u32).to_le_bytes())?;
        f.write_all(&self.form.tag().to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                f.write_all(&m[(i, j)].re.to_le_bytes())?;
                f.write_all(&m[(i, j)].im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Discrete norms of one solution component.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ComponentNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub first: Vec<C64>,
    pub second: Vec<C64>,
    pub first_norms: ComponentNorms,
    pub second_norms: ComponentNorms,
}

fn weighted_l2(values: &[C64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| v.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

fn component_norms(values: &[C64], weights: &[f64], d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> ComponentNorms {
    let v = CVec::from_column_slice(values);
    let dv = apply_real(d1, &v);
    let d2v = apply_real(d2, &v);
    let l2 = weighted_l2(values, weights);
    let dn = weighted_l2(dv.as_slice(), weights);
    let d2n = weighted_l2(d2v.as_slice(), weights);
    ComponentNorms {
        l2,
        h1: (l2 * l2 + dn * dn).sqrt(),
        h2: (l2 * l2 + dn * dn + d2n * d2n).sqrt(),
    }
}

fn apply_real(m: &DMatrix<f64>, v: &CVec) -> CVec {
    let n = m.nrows();
    CVec::from_fn(n, |i, _| {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..m.ncols() {
            s += m[(i, j)] * v[j];
        }
        s
    })
}

/// Assembles the interval collocation operator for either system.
/// Boundary rows: `Bz` clamps u and u' at both endpoints; `Tilde` imposes
/// the four matching conditions w = v, w' = v'.
pub fn assemble_interval(
    problem: &TransmissionProblem,
    system: SystemKind,
    n_nodes: usize,
) -> Result<DiscretizedOperator> {
    if n_nodes < MIN_NODES {
        return Err(Error::TooFewNodes(n_nodes, MIN_NODES));
    }
    let Geometry::Interval { a, b } = problem.geometry else {
        return Err(Error::GeometryMismatch(format!(
            "assemble_interval needs an interval geometry, got {:?}",
            problem.geometry
        )));
    };
    let n = n_nodes;
    let nodes = lobatto_nodes(n - 1, a, b);
    let weights = clenshaw_curtis_weights(n - 1, a, b);
    let d1 = Arc::new(diff_matrix(n - 1, a, b));
    let d2 = Arc::new(&*d1 * &*d1);
    let problem = problem.clone();
    let nodes_c = nodes.clone();
    let d1c = Arc::clone(&d1);
    let d2c = Arc::clone(&d2);

    let assemble: Arc<dyn Fn(C64) -> CMat + Send + Sync> = match system {
        SystemKind::Bz => Arc::new(move |z: C64| {
            // n evaluated at the k corresponding to z (k^2 = -z)
            let k = (-z).sqrt();
            let mut m = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                let x = [nodes_c[i]];
                let nv = problem.index.n_at(&x, k);
                let vv = (nv - 1.0) / nv;
                if i == 0 || i == n - 1 {
                    // u = 0
                    m[(i, i)] = C64::new(1.0, 0.0);
                    // u' = 0 replaces the v-equation row at the endpoint
                    for j in 0..n {
                        m[(n + i, j)] = C64::new(d1c[(i, j)], 0.0);
                    }
                } else {
                    for j in 0..n {
                        m[(i, j)] = d2c[(i, j)] / nv;
                        m[(n + i, n + j)] = C64::new(d2c[(i, j)], 0.0);
                    }
                    m[(i, i)] -= z;
                    m[(i, n + i)] = vv;
                    m[(n + i, n + i)] -= z;
                }
            }
            m
        }),
        SystemKind::Tilde => Arc::new(move |k: C64| {
            let k2 = k * k;
            let mut m = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                let x = [nodes_c[i]];
                let nv = problem.index.n_at(&x, k);
                if i == 0 || i == n - 1 {
                    // w - v = 0
                    m[(i, i)] = C64::new(1.0, 0.0);
                    m[(i, n + i)] = C64::new(-1.0, 0.0);
                    // w' - v' = 0
                    for j in 0..n {
                        m[(n + i, j)] = C64::new(d1c[(i, j)], 0.0);
                        m[(n + i, n + j)] = C64::new(-d1c[(i, j)], 0.0);
                    }
                } else {
                    for j in 0..n {
                        m[(i, j)] = C64::new(d2c[(i, j)], 0.0);
                        m[(n + i, n + j)] = C64::new(d2c[(i, j)], 0.0);
                    }
                    m[(i, i)] += k2 * nv;
                    m[(n + i, n + i)] += k2;
                }
            }
            m
        }),
    };

    Ok(DiscretizedOperator {
        form: match system {
            SystemKind::Bz => OperatorForm::Bz,
            SystemKind::Tilde => OperatorForm::Tilde,
        },
        size: 2 * n,
        collocation_nodes: nodes,
        quadrature_weights: weights,
        boundary_rows: vec![0, n - 1, n, 2 * n - 1],
        ambient_dim: 1,
        d1,
        d2,
        assemble,
    })
}

/// Assembles the mode-m radial operator on the disk. The index must be
/// radially symmetric; nodes are the positive half of an odd diameter
/// Lobatto grid (no node at r = 0) and the differentiation matrices are
/// folded with parity (-1)^m, which carries the center regularity.
pub fn assemble_disk_mode(
    problem: &TransmissionProblem,
    mode: i32,
    system: SystemKind,
    n_nodes: usize,
) -> Result<DiscretizedOperator> {
    if n_nodes < MIN_NODES {
        return Err(Error::TooFewNodes(n_nodes, MIN_NODES));
    }
    if mode.abs() > MAX_MODE {
        return Err(Error::ModeTooLarge(mode, MAX_MODE));
    }
    let Geometry::Disk { radius } = problem.geometry else {
        return Err(Error::GeometryMismatch(format!(
            "assemble_disk_mode needs a disk geometry, got {:?}",
            problem.geometry
        )));
    };
    check_radial(problem, radius)?;

    let n_diam = 2 * n_nodes - 1; // odd: diameter grid avoids r = 0
    let full_nodes = lobatto_nodes(n_diam, -radius, radius);
    let d1_full = diff_matrix(n_diam, -radius, radius);
    let d2_full = &d1_full * &d1_full;
    // positive nodes ascend; node n_nodes - 1 is r = radius
    let pos: Vec<usize> = (0..full_nodes.len()).filter(|&j| full_nodes[j] > 0.0).collect();
    debug_assert_eq!(pos.len(), n_nodes);
    let nodes: Vec<f64> = pos.iter().map(|&j| full_nodes[j]).collect();
    let mirror = |j: usize| n_diam - j; // x_{mirror(j)} = -x_j
    let parity = if mode.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let fold = |dm: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(n_nodes, n_nodes);
        for (i, &gi) in pos.iter().enumerate() {
            for (j, &gj) in pos.iter().enumerate() {
                out[(i, j)] = dm[(gi, gj)] + parity * dm[(gi, mirror(gj))];
            }
        }
        out
    };
    let d1 = Arc::new(fold(&d1_full));
    let d2 = Arc::new(fold(&d2_full));
    let weights = radial_fold_weights(&nodes, radius);

    let n = n_nodes;
    let rim = n - 1; // index of r = radius
    let m2 = (mode * mode) as f64;
    let problem = problem.clone();
    let nodes_c = nodes.clone();
    let d1c = Arc::clone(&d1);
    let d2c = Arc::clone(&d2);

    // radial Laplacian rows: d2 + (1/r) d1 - m^2/r^2
    let radial_lap = move |i: usize, j: usize| -> f64 {
        let r = nodes_c[i];
        let mut val = d2c[(i, j)] + d1c[(i, j)] / r;
        if i == j {
            val -= m2 / (r * r);
        }
        val
    };

    let nodes_c2 = nodes.clone();
    let d1m = Arc::clone(&d1);
    let assemble: Arc<dyn Fn(C64) -> CMat + Send + Sync> = match system {
        SystemKind::Tilde => Arc::new(move |k: C64| {
            let k2 = k * k;
            let mut m = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                if i == rim {
                    m[(i, i)] = C64::new(1.0, 0.0);
                    m[(i, n + i)] = C64::new(-1.0, 0.0);
                    for j in 0..n {
                        m[(n + i, j)] = C64::new(d1m[(rim, j)], 0.0);
                        m[(n + i, n + j)] = C64::new(-d1m[(rim, j)], 0.0);
                    }
                } else {
                    let x = [nodes_c2[i], 0.0];
                    let nv = problem.index.n_at(&x, k);
                    for j in 0..n {
                        let lap = radial_lap(i, j);
                        m[(i, j)] = C64::new(lap, 0.0);
                        m[(n + i, n + j)] = C64::new(lap, 0.0);
                    }
                    m[(i, i)] += k2 * nv;
                    m[(n + i, n + i)] += k2;
                }
            }
            m
        }),
        SystemKind::Bz => Arc::new(move |z: C64| {
            let k = (-z).sqrt();
            let mut m = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                if i == rim {
                    m[(i, i)] = C64::new(1.0, 0.0);
                    for j in 0..n {
                        m[(n + i, j)] = C64::new(d1m[(rim, j)], 0.0);
                    }
                } else {
                    let x = [nodes_c2[i], 0.0];
                    let nv = problem.index.n_at(&x, k);
                    let vv = (nv - 1.0) / nv;
                    for j in 0..n {
                        let lap = radial_lap(i, j);
                        m[(i, j)] = lap / nv;
                        m[(n + i, n + j)] = C64::new(lap, 0.0);
                    }
                    m[(i, i)] -= z;
                    m[(i, n + i)] = vv;
                    m[(n + i, n + i)] -= z;
                }
            }
            m
        }),
    };

    Ok(DiscretizedOperator {
        form: OperatorForm::DiskMode { m: mode, system },
        size: 2 * n,
        collocation_nodes: nodes,
        quadrature_weights: weights,
        boundary_rows: vec![rim, n + rim],
        ambient_dim: 2,
        d1,
        d2,
        assemble,
    })
}

fn check_radial(problem: &TransmissionProblem, radius: f64) -> Result<()> {
    let probe_k = C64::new(1.0, 0.0);
    let mut spread = 0.0f64;
    for ir in 1..=4 {
        let r = radius * ir as f64 / 4.0;
        let base = problem.index.n_at(&[r, 0.0], probe_k);
        for it in 1..8 {
            let th = std::f64::consts::PI * it as f64 / 4.0;
            let v = problem.index.n_at(&[r * th.cos(), r * th.sin()], probe_k);
            spread = spread.max((v - base).norm() / base.norm().max(1e-30));
        }
    }
    if spread > 1e-10 {
        return Err(Error::NotRadial(spread));
    }
    Ok(())
}

/// Solves the discretized system at the given parameter. The data vectors
/// are grid samples of (f, g); their boundary-row slots are forced to the
/// homogeneous boundary values. Fails `NearSingular` when the condition
/// estimate crosses 1e14 (used as the eigenvalue detector).
pub fn apply_resolvent(
    op: &DiscretizedOperator,
    param: C64,
    f_data: &[C64],
    g_data: &[C64],
) -> Result<SolutionPair> {
    let n = op.nodes_per_unknown();
    assert_eq!(f_data.len(), n);
    assert_eq!(g_data.len(), n);
    let m = op.matrix_of(param);
    let cond = condition_estimate(&m);
    if !cond.is_finite() || cond > CONDITION_CEILING {
        return Err(Error::NearSingular(param, cond));
    }
    let mut rhs = CVec::zeros(2 * n);
    for i in 0..n {
        rhs[i] = f_data[i];
        rhs[n + i] = g_data[i];
    }
    let rhs = op.project_data(&rhs);
    let lu = m.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or(Error::NearSingular(param, f64::INFINITY))?;
    let first: Vec<C64> = (0..n).map(|i| sol[i]).collect();
    let second: Vec<C64> = (0..n).map(|i| sol[n + i]).collect();
    let first_norms = component_norms(&first, &op.quadrature_weights, op.d1(), op.d2());
    let second_norms = component_norms(&second, &op.quadrature_weights, op.d1(), op.d2());
    Ok(SolutionPair {
        first,
        second,
        first_norms,
        second_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, Geometry, ProblemConfig};

    fn n4_interval() -> TransmissionProblem {
        build_problem(&ProblemConfig::default()).unwrap()
    }

    fn n4_disk() -> TransmissionProblem {
        build_problem(&ProblemConfig {
            geometry: Geometry::Disk { radius: 1.0 },
            ..ProblemConfig::default()
        })
        .unwrap()
    }

    fn apply_matrix(m: &CMat, u: &[C64], v: &[C64]) -> Vec<C64> {
        let n = u.len();
        let mut x = CVec::zeros(2 * n);
        for i in 0..n {
            x[i] = u[i];
            x[n + i] = v[i];
        }
        let y = m * x;
        y.iter().cloned().collect()
    }

    #[test]
    fn too_few_nodes_rejected() {
        let p = n4_interval();
        assert!(matches!(
            assemble_interval(&p, SystemKind::Bz, 8),
            Err(Error::TooFewNodes(8, 16))
        ));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let p = n4_disk();
        assert!(matches!(
            assemble_interval(&p, SystemKind::Bz, 32),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn interval_bz_manufactured_solution() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 64).unwrap();
        let z = C64::new(1.0, 0.0);
        let m = op.matrix_of(z);
        // u = (x(1-x))^2 sin(3x): clamped to second order at both ends
        let u_f = |x: f64| (x * (1.0 - x)).powi(2) * (3.0 * x).sin();
        let upp = |x: f64| {
            // second derivative, by elementary calculus
            let s = (3.0 * x).sin();
            let c = (3.0 * x).cos();
            let w = x * (1.0 - x);
            let wp = 1.0 - 2.0 * x;
            let wpp = -2.0;
            // (w^2 s)'' = (2 w wp s + 3 w^2 c)' =
            //   2 wp^2 s + 2 w wpp s + 6 w wp c + 6 w wp c - 9 w^2 s + ...
            2.0 * wp * wp * s + 2.0 * w * wpp * s + 12.0 * w * wp * c - 9.0 * w * w * s
        };
        let v_f = |x: f64| (2.0 * x).cos() + 0.3 * (5.0 * x).sin();
        let vpp = |x: f64| -4.0 * (2.0 * x).cos() - 7.5 * (5.0 * x).sin();
        let u: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(u_f(x), 0.0)).collect();
        let v: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(v_f(x), 0.0)).collect();
        let out = apply_matrix(&m, &u, &v);
        let n = op.nodes_per_unknown();
        for (i, &x) in op.collocation_nodes.iter().enumerate() {
            if i == 0 || i == n - 1 {
                // boundary rows evaluate the clamped conditions
                assert!(out[i].norm() < 1e-9, "u clamp row {i}: {}", out[i]);
                assert!(out[n + i].norm() < 1e-7, "u' clamp row {i}: {}", out[n + i]);
                continue;
            }
            let f = 0.25 * upp(x) - u_f(x) + 0.75 * v_f(x);
            let g = vpp(x) - v_f(x);
            assert!(
                (out[i] - f).norm() < 1e-8 * (1.0 + f.abs()),
                "row {i}: {} vs {f}",
                out[i]
            );
            assert!(
                (out[n + i] - g).norm() < 1e-8 * (1.0 + g.abs()),
                "row {}: {} vs {g}",
                n + i,
                out[n + i]
            );
        }
    }

    #[test]
    fn interval_bz_block_structure() {
        // z = 0: with V = 0 (index n = 1 away from the collar is not
        // allowed, so check the v-block instead: it is the plain second
        // derivative operator regardless of the index)
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 32).unwrap();
        let m = op.matrix_of(C64::new(0.0, 0.0));
        let n = op.nodes_per_unknown();
        for i in 1..n - 1 {
            for j in 0..n {
                assert!((m[(n + i, n + j)] - C64::new(op.d2()[(i, j)], 0.0)).norm() < 1e-12);
                // v does not couple back into the v-equation
                assert_eq!(m[(n + i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn interval_tilde_manufactured_solution() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Tilde, 64).unwrap();
        let k = C64::new(2.0, 0.3);
        let m = op.matrix_of(k);
        // v smooth, w = v + (x(1-x))^2 psi so that both matching rows vanish
        let v_f = |x: f64| (1.5 * x).cos();
        let vpp = |x: f64| -2.25 * (1.5 * x).cos();
        let psi = |x: f64| (x * (1.0 - x)).powi(2) * (2.0 * x).sin();
        let psipp = |x: f64| {
            let s = (2.0 * x).sin();
            let c = (2.0 * x).cos();
            let w = x * (1.0 - x);
            let wp = 1.0 - 2.0 * x;
            2.0 * wp * wp * s - 4.0 * w * s + 8.0 * w * wp * c - 4.0 * w * w * s
        };
        let w_f = |x: f64| v_f(x) + psi(x);
        let wpp = |x: f64| vpp(x) + psipp(x);
        let w: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(w_f(x), 0.0)).collect();
        let v: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(v_f(x), 0.0)).collect();
        let out = apply_matrix(&m, &w, &v);
        let n = op.nodes_per_unknown();
        let k2 = k * k;
        for (i, &x) in op.collocation_nodes.iter().enumerate() {
            if i == 0 || i == n - 1 {
                assert!(out[i].norm() < 1e-10);
                assert!(out[n + i].norm() < 1e-7);
                continue;
            }
            let f = C64::new(wpp(x), 0.0) + k2 * 4.0 * w_f(x);
            let g = C64::new(vpp(x), 0.0) + k2 * v_f(x);
            assert!((out[i] - f).norm() < 1e-8 * (1.0 + f.norm()));
            assert!((out[n + i] - g).norm() < 1e-8 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn disk_mode_manufactured_solution() {
        let p = n4_disk();
        for mode in [0i32, 1, 3] {
            let op = assemble_disk_mode(&p, mode, SystemKind::Tilde, 40).unwrap();
            let k = C64::new(1.0, 0.0);
            let m = op.matrix_of(k);
            let mm = mode as f64;
            // monomial combinations r^{m+2j}: radial Laplacian of r^s is
            // (s^2 - m^2) r^{s-2}
            let w_f = |r: f64| r.powf(mm) - 2.0 * r.powf(mm + 2.0) + 0.5 * r.powf(mm + 4.0);
            let lap_w = |r: f64| {
                ((mm).powi(2) - mm * mm) * r.powf(mm - 2.0)
                    - 2.0 * ((mm + 2.0).powi(2) - mm * mm) * r.powf(mm)
                    + 0.5 * ((mm + 4.0).powi(2) - mm * mm) * r.powf(mm + 2.0)
            };
            // v = w + r^m (1-r^2)^2 keeps both matching rows zero
            let q = |r: f64| r.powf(mm) * (1.0 - r * r).powi(2);
            let lap_q = |r: f64| {
                // r^m - 2 r^{m+2} + r^{m+4}
                -2.0 * ((mm + 2.0).powi(2) - mm * mm) * r.powf(mm)
                    + ((mm + 4.0).powi(2) - mm * mm) * r.powf(mm + 2.0)
            };
            let v_f = |r: f64| w_f(r) + q(r);
            let lap_v = |r: f64| lap_w(r) + lap_q(r);
            let w: Vec<C64> = op.collocation_nodes.iter().map(|&r| C64::new(w_f(r), 0.0)).collect();
            let v: Vec<C64> = op.collocation_nodes.iter().map(|&r| C64::new(v_f(r), 0.0)).collect();
            let out = apply_matrix(&m, &w, &v);
            let n = op.nodes_per_unknown();
            for (i, &r) in op.collocation_nodes.iter().enumerate() {
                if i == n - 1 {
                    assert!(out[i].norm() < 1e-9, "mode {mode} matching w-v: {}", out[i]);
                    assert!(out[n + i].norm() < 1e-7, "mode {mode} matching w'-v': {}", out[n + i]);
                    continue;
                }
                let f = lap_w(r) + 4.0 * w_f(r); // k = 1, n = 4
                let g = lap_v(r) + v_f(r);
                assert!(
                    (out[i] - f).norm() < 2e-7 * (1.0 + f.abs()),
                    "mode {mode} row {i} at r={r}: {} vs {f}",
                    out[i]
                );
                assert!(
                    (out[n + i] - g).norm() < 2e-7 * (1.0 + g.abs()),
                    "mode {mode} v-row {i}: {} vs {g}",
                    out[n + i]
                );
            }
        }
    }

    #[test]
    fn disk_mode_sign_symmetry() {
        let p = n4_disk();
        let op_plus = assemble_disk_mode(&p, 3, SystemKind::Tilde, 24).unwrap();
        let op_minus = assemble_disk_mode(&p, -3, SystemKind::Tilde, 24).unwrap();
        let k = C64::new(1.3, -0.2);
        let a = op_plus.matrix_of(k);
        let b = op_minus.matrix_of(k);
        assert!((&a - &b).iter().all(|d| d.norm() < 1e-13));
    }

    #[test]
    fn nonradial_index_rejected() {
        let p = build_problem(&ProblemConfig {
            geometry: Geometry::Disk { radius: 1.0 },
            n_expr: Some("4 + x".into()),
            ..ProblemConfig::default()
        })
        .unwrap();
        assert!(matches!(
            assemble_disk_mode(&p, 0, SystemKind::Tilde, 24),
            Err(Error::NotRadial(_))
        ));
    }

    #[test]
    fn mode_too_large_rejected() {
        let p = n4_disk();
        assert!(matches!(
            assemble_disk_mode(&p, 61, SystemKind::Tilde, 24),
            Err(Error::ModeTooLarge(61, 60))
        ));
    }

    #[test]
    fn quadrature_weights_sum_to_measure() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 48).unwrap();
        let s: f64 = op.quadrature_weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(op.quadrature_weights.iter().all(|&w| w > 0.0));
        let p = n4_disk();
        let op = assemble_disk_mode(&p, 2, SystemKind::Tilde, 32).unwrap();
        let s: f64 = op.quadrature_weights.iter().sum();
        assert!((s - std::f64::consts::PI).abs() < 1e-12, "{s}");
        assert!(op.quadrature_weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn zero_data_zero_solution() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 32).unwrap();
        let n = op.nodes_per_unknown();
        let zero = vec![C64::new(0.0, 0.0); n];
        let sol = apply_resolvent(&op, C64::new(2.0, 1.0), &zero, &zero).unwrap();
        assert!(sol.first.iter().all(|v| v.norm() == 0.0));
        assert!(sol.second.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn resolvent_recovers_manufactured_pair() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 64).unwrap();
        let z = C64::new(3.0, 2.0);
        let m = op.matrix_of(z);
        let u_f = |x: f64| (x * (1.0 - x)).powi(2) * (1.0 + x);
        let v_f = |x: f64| (1.0 + (2.5 * x).cos()) * 0.5;
        let u: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(u_f(x), 0.0)).collect();
        let v: Vec<C64> = op.collocation_nodes.iter().map(|&x| C64::new(v_f(x), 0.0)).collect();
        let data = apply_matrix(&m, &u, &v);
        let n = op.nodes_per_unknown();
        let f: Vec<C64> = data[..n].to_vec();
        let g: Vec<C64> = data[n..].to_vec();
        let sol = apply_resolvent(&op, z, &f, &g).unwrap();
        for i in 0..n {
            assert!((sol.first[i] - u[i]).norm() < 1e-8);
            assert!((sol.second[i] - v[i]).norm() < 1e-8);
        }
        assert!(sol.second_norms.l2 > 0.0 && sol.second_norms.h2 >= sol.second_norms.h1);
    }

    #[test]
    fn resolvent_identity_first_order() {
        // R_z - R_z' = (z - z') R_z R_z' with the boundary-projected
        // composition, as an exact pencil identity up to roundoff
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 48).unwrap();
        let n = op.nodes_per_unknown();
        let z1 = C64::new(2.0, 1.5);
        let z2 = C64::new(-1.0, 0.4);
        let f: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64 * 0.3).sin(), (i as f64 * 0.17).cos()))
            .collect();
        let g: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64 * 0.23).cos(), 0.1))
            .collect();
        let r1 = apply_resolvent(&op, z1, &f, &g).unwrap();
        let r2 = apply_resolvent(&op, z2, &f, &g).unwrap();
        let rr = apply_resolvent(&op, z1, &r2.first, &r2.second).unwrap();
        let dz = z1 - z2;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            num += ((r1.first[i] - r2.first[i]) - dz * rr.first[i]).norm_sqr();
            num += ((r1.second[i] - r2.second[i]) - dz * rr.second[i]).norm_sqr();
            den += (r1.first[i] - r2.first[i]).norm_sqr() + (r1.second[i] - r2.second[i]).norm_sqr();
        }
        assert!(num.sqrt() <= 1e-8 * den.sqrt().max(1e-30), "{:.3e}", num.sqrt() / den.sqrt());
    }

    #[test]
    fn apriori_ratio_non_exploding_along_admissible_ray() {
        use crate::problem::{admissible_direction, cone_ce};
        let p = n4_interval();
        let cone = cone_ce(&p, 200).unwrap();
        let z0 = admissible_direction(&cone).unwrap();
        let op = assemble_interval(&p, SystemKind::Bz, 96).unwrap();
        let n = op.nodes_per_unknown();
        let f: Vec<C64> = op
            .collocation_nodes
            .iter()
            .map(|&x| C64::new((2.0 * x).sin(), (3.0 * x).cos()))
            .collect();
        let g: Vec<C64> = op
            .collocation_nodes
            .iter()
            .map(|&x| C64::new((1.0 + x).ln(), -0.2))
            .collect();
        let norm_of = |vals: &[C64]| weighted_l2(vals, &op.quadrature_weights);
        // the proven large-|z| shape: |z| ||u|| <= C(||f|| + |z|^{-1}||g||)
        // and ||v|| <= C(||f|| + |z|^{-1}||g||); the bulk solution
        // u ~ -f/z pins the |z| power, so these are the bounded ratios
        let mut ratios_u = Vec::new();
        let mut ratios_v = Vec::new();
        for &lam in &[1e2, 1e3, 1e4] {
            let z = z0 * lam;
            let sol = apply_resolvent(&op, z, &f, &g).unwrap();
            let rhs = norm_of(&f) + norm_of(&g) / z.norm();
            ratios_u.push(z.norm() * norm_of(&sol.first) / rhs);
            ratios_v.push(norm_of(&sol.second) / rhs);
            let _ = n;
        }
        for r in [&ratios_u, &ratios_v] {
            assert!(r[1] < 1.5 * r[0] + 1e-6, "{r:?}");
            assert!(r[2] < 1.5 * r[1] + 1e-6, "{r:?}");
        }
    }

    #[test]
    fn greens_identity_discrete() {
        // (v | lap q) - (lap v | q) = boundary terms, spectrally accurate
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Bz, 64).unwrap();
        let x = &op.collocation_nodes;
        let v: Vec<C64> = x.iter().map(|&t| C64::new((2.2 * t).sin(), 0.3 * t)).collect();
        let q: Vec<C64> = x.iter().map(|&t| C64::new((1.7 * t).cos(), t * t)).collect();
        let vv = CVec::from_column_slice(&v);
        let qv = CVec::from_column_slice(&q);
        let lap_v = apply_real(op.d2(), &vv);
        let lap_q = apply_real(op.d2(), &qv);
        let dv = apply_real(op.d1(), &vv);
        let dq = apply_real(op.d1(), &qv);
        let n = op.nodes_per_unknown();
        let mut lhs = C64::new(0.0, 0.0);
        for i in 0..n {
            lhs += op.quadrature_weights[i] * (vv[i] * lap_q[i].conj() - lap_v[i] * qv[i].conj());
        }
        // exterior normal: -d/dx at a, +d/dx at b
        let rhs = (vv[n - 1] * dq[n - 1].conj() - dv[n - 1] * qv[n - 1].conj())
            - (vv[0] * dq[0].conj() - dv[0] * qv[0].conj());
        assert!((lhs - rhs).norm() < 1e-6 * rhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn binary_dump_round_trips() {
        let p = n4_interval();
        let op = assemble_interval(&p, SystemKind::Tilde, 16).unwrap();
        let k = C64::new(2.0, 0.1);
        let dir = std::env::temp_dir().join("itespec_dump_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        op.dump_matrix(&path, k).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"ITESPEC1");
        let size = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let tag = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(size, op.size);
        assert_eq!(tag, 2);
        assert_eq!(bytes.len(), 16 + size * size * 16);
        let m = op.matrix_of(k);
        // spot-check the first two entries (row-major)
        let re0 = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let im0 = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        assert_eq!(C64::new(re0, im0), m[(0, 0)]);
        let re1 = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        assert_eq!(re1, m[(0, 1)].re);
        std::fs::remove_file(&path).ok();
    }
}
