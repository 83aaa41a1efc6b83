//! Resolvent-norm machinery: pseudospectrum scans over the k^2 plane, the
//! exponential upper-envelope fit along the real axis, the Green-identity
//! estimate for indices with nonnegative imaginary part, and the
//! Gaussian-beam quasimode lower bounds.

mod quasimode;

pub use quasimode::{
    build_quasimode, quasimode_lower_bound, LowerBoundRow, Potential, Quasimode, QuasimodeDomain,
};

use crate::discretize::{apply_resolvent, DiscretizedOperator, SolutionPair};
use crate::error::{Error, Result};
use crate::halfspace::loglog_slope;
use crate::linalg::weighted_inverse_norm;
use crate::problem::{IndexMode, TransmissionProblem};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

const VALUE_CAP: f64 = 1e10;
const CELL_BUDGET: usize = 4_000_000;

/// 1/sigma_min over a rectangle of the k^2 plane, in the weighted
/// discrete L^2 (+) L^2 norms.
#[derive(Debug, Clone, Serialize)]
pub struct PseudospectrumField {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub nre: usize,
    pub nim: usize,
    /// row-major over (re index, im index): 1/sigma_min, capped at 1e10
    pub values: Vec<f64>,
    pub norms_used: String,
}

impl PseudospectrumField {
    pub fn node(&self, i: usize, j: usize) -> C64 {
        let re = if self.nre == 1 {
            0.5 * (self.re_range.0 + self.re_range.1)
        } else {
            self.re_range.0 + (self.re_range.1 - self.re_range.0) * i as f64 / (self.nre - 1) as f64
        };
        let im = if self.nim == 1 {
            0.5 * (self.im_range.0 + self.im_range.1)
        } else {
            self.im_range.0 + (self.im_range.1 - self.im_range.0) * j as f64 / (self.nim - 1) as f64
        };
        C64::new(re, im)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nim + j]
    }
}

/// The discrete surrogate of ||R~_{k^2}||: weighted operator norm of the
/// inverse at k = principal sqrt(k^2).
pub fn resolvent_norm_at(op: &DiscretizedOperator, k2: C64) -> f64 {
    let k = k2.sqrt();
    let m = op.matrix_of(k);
    let mut w2 = Vec::with_capacity(op.size);
    w2.extend_from_slice(&op.quadrature_weights);
    w2.extend_from_slice(&op.quadrature_weights);
    weighted_inverse_norm(&m, &w2, &op.boundary_rows).min(VALUE_CAP)
}

/// Scans 1/sigma_min of the operator over a k^2-plane rectangle.
pub fn sigma_min_scan(
    op: &DiscretizedOperator,
    re_range: (f64, f64),
    im_range: (f64, f64),
    nre: usize,
    nim: usize,
) -> Result<PseudospectrumField> {
    if nre * nim > CELL_BUDGET {
        return Err(Error::GridTooFine(nre * nim, CELL_BUDGET));
    }
    let mut field = PseudospectrumField {
        re_range,
        im_range,
        nre,
        nim,
        values: vec![0.0; nre * nim],
        norms_used: "quadrature-weighted discrete L2 (+) L2; k = principal sqrt(k^2)".into(),
    };
    let nodes: Vec<(usize, usize)> = (0..nre)
        .flat_map(|i| (0..nim).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&(i, j)| resolvent_norm_at(op, field.node(i, j)))
        .collect();
    field.values = values;
    Ok(field)
}

/// Envelope fit of log ||R~_{k^2}|| <= C1 + C2 k along the real axis.
#[derive(Debug, Clone, Serialize)]
pub struct BoundFit {
    pub c1: f64,
    pub c2: f64,
    /// rms distance of the running-max points from the fitted envelope
    pub fit_residual: f64,
    /// max over grid of log norm - (C1 + C2 k); <= 0 by construction
    pub max_violation: f64,
    pub rows: Vec<(f64, f64)>, // (k, norm)
}

/// Computes ||R~_{k^2}|| along a real k grid and fits the running maximum
/// of the log by least squares, then lifts the line to an upper envelope.
/// The index must satisfy Im n >= 0 (resp. n2 >= 0), not identically 0.
pub fn real_axis_bound_fit(
    problem: &TransmissionProblem,
    op: &DiscretizedOperator,
    k_grid: &[f64],
) -> Result<BoundFit> {
    check_sign_hypothesis(problem)?;
    assert!(!k_grid.is_empty());
    let rows: Vec<(f64, f64)> = k_grid
        .par_iter()
        .map(|&k| (k, resolvent_norm_at(op, C64::new(k * k, 0.0))))
        .collect();
    for &(k, v) in &rows {
        if v >= VALUE_CAP {
            return Err(Error::SingularOnRealAxis(k, 1.0 / v));
        }
    }
    // running maximum of the log
    let mut run_max = f64::NEG_INFINITY;
    let mut envelope_pts = Vec::with_capacity(rows.len());
    for &(k, v) in &rows {
        run_max = run_max.max(v.ln());
        envelope_pts.push((k, run_max));
    }
    // affine least squares through (k, run_max)
    let n = envelope_pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(k, y) in &envelope_pts {
        sx += k;
        sy += y;
        sxx += k * k;
        sxy += k * y;
    }
    let c2 = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let mut c1 = (sy - c2 * sx) / n;
    // lift to a true envelope
    let shift = envelope_pts
        .iter()
        .map(|&(k, y)| y - (c1 + c2 * k))
        .fold(f64::NEG_INFINITY, f64::max);
    c1 += shift.max(0.0);
    let fit_residual = (envelope_pts
        .iter()
        .map(|&(k, y)| (y - (c1 + c2 * k)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let max_violation = rows
        .iter()
        .map(|&(k, v)| v.ln() - (c1 + c2 * k))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundFit {
        c1,
        c2,
        fit_residual,
        max_violation,
        rows,
    })
}

fn check_sign_hypothesis(problem: &TransmissionProblem) -> Result<()> {
    let probe_k = C64::new(1.0, 0.0);
    let mut any_positive = false;
    for x in problem.sample_points(2000) {
        let im = match problem.index.mode {
            IndexMode::FixedComplex => problem.index.n_at(&x, probe_k).im,
            IndexMode::KDependent => problem.index.n2_at(&x).unwrap_or(0.0),
        };
        if im < -1e-12 {
            return Err(Error::HypothesisViolated(x));
        }
        if im > 1e-12 {
            any_positive = true;
        }
    }
    if !any_positive {
        // Im n identically zero: the theorem needs Im n not identically 0
        return Err(Error::HypothesisViolated(vec![f64::NAN]));
    }
    Ok(())
}

/// Both sides of the Green-identity estimate
/// delta int_omega k^2 |w|^2 <= ||v|| ||g|| + ||w|| ||f||
/// (k-dependent mode: k^1 weight on the left).
#[derive(Debug, Clone, Serialize)]
pub struct GreenCheck {
    pub delta: f64,
    pub omega_nodes: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn green_identity_check(
    problem: &TransmissionProblem,
    op: &DiscretizedOperator,
    solution: &SolutionPair,
    f_data: &[C64],
    g_data: &[C64],
    k: f64,
    delta: f64,
) -> Result<GreenCheck> {
    check_sign_hypothesis(problem)?;
    let probe_k = C64::new(k, 0.0);
    let n = op.nodes_per_unknown();
    let mut lhs = 0.0f64;
    let mut omega_nodes = 0usize;
    let k_weight = match problem.index.mode {
        IndexMode::FixedComplex => k * k,
        IndexMode::KDependent => k,
    };
    for i in 0..n {
        let x = [op.collocation_nodes[i]];
        let im = match problem.index.mode {
            IndexMode::FixedComplex => problem.index.n_at(&x, probe_k).im,
            IndexMode::KDependent => problem.index.n2_at(&x).unwrap_or(0.0),
        };
        if im >= delta {
            omega_nodes += 1;
            lhs += delta * k_weight * solution.first[i].norm_sqr() * op.quadrature_weights[i];
        }
    }
    if omega_nodes == 0 {
        return Err(Error::EmptyOmega(delta));
    }
    let norm = |vals: &[C64]| -> f64 {
        vals.iter()
            .zip(&op.quadrature_weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    };
    let rhs = norm(&solution.second) * norm(g_data) + norm(&solution.first) * norm(f_data);
    Ok(GreenCheck {
        delta,
        omega_nodes,
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-6) + 1e-10,
    })
}

/// Convenience driver: random smooth data instances solved on the Tilde
/// form, Green-checked at the given k values. Returns every check row.
pub fn green_random_batch(
    problem: &TransmissionProblem,
    op: &DiscretizedOperator,
    ks: &[f64],
    delta: f64,
    seed: u64,
    instances: usize,
) -> Result<Vec<GreenCheck>> {
    use rand::{Rng, SeedableRng};
    let n = op.nodes_per_unknown();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..instances {
        // band-limited random smooth data
        let mut coeffs_f = Vec::new();
        let mut coeffs_g = Vec::new();
        for _ in 0..6 {
            coeffs_f.push((
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.5..9.0),
            ));
            coeffs_g.push((
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.5..9.0),
            ));
        }
        let smooth = |x: f64, coeffs: &[(C64, f64)]| -> C64 {
            coeffs
                .iter()
                .map(|&(c, freq)| c * C64::new((freq * x).cos(), (freq * x * 0.7).sin()))
                .sum()
        };
        let f_data: Vec<C64> = op
            .collocation_nodes
            .iter()
            .map(|&x| smooth(x, &coeffs_f))
            .collect();
        let g_data: Vec<C64> = op
            .collocation_nodes
            .iter()
            .map(|&x| smooth(x, &coeffs_g))
            .collect();
        for &k in ks {
            let _ = n;
            let sol = apply_resolvent(op, C64::new(k, 0.0), &f_data, &g_data)?;
            out.push(green_identity_check(
                problem, op, &sol, &f_data, &g_data, k, delta,
            )?);
        }
    }
    Ok(out)
}

/// Self-consistency of the scan under grid refinement: relative change of
/// 1/sigma_min at probe nodes when the discretization size doubles.
pub fn refinement_drift(
    coarse: &DiscretizedOperator,
    fine: &DiscretizedOperator,
    probes: &[C64],
) -> f64 {
    probes
        .par_iter()
        .map(|&k2| {
            let a = resolvent_norm_at(coarse, k2);
            let b = resolvent_norm_at(fine, k2);
            (a - b).abs() / b.max(1e-300)
        })
        .reduce(|| 0.0, f64::max)
}

/// Fitted slope of log(err) vs log(h); re-exported for report assembly.
pub fn fit_slope(points: &[(f64, f64)]) -> (f64, f64) {
    loglog_slope(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_interval, SystemKind};
    use crate::problem::{build_problem, ProblemConfig};

    fn bump_problem() -> TransmissionProblem {
        build_problem(&ProblemConfig {
            n_expr: Some("4 + i*bump((x-0.5)/0.35)".into()),
            ..ProblemConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn single_point_scan_equals_direct_value() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        let field = sigma_min_scan(&op, (4.0, 4.0), (0.5, 0.5), 1, 1).unwrap();
        let direct = resolvent_norm_at(&op, C64::new(4.0, 0.5));
        assert_eq!(field.values.len(), 1);
        assert!((field.values[0] - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn grid_budget_enforced() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        assert!(matches!(
            sigma_min_scan(&op, (0.0, 1.0), (0.0, 1.0), 4000, 4000),
            Err(Error::GridTooFine(_, _))
        ));
    }

    #[test]
    fn scan_value_large_at_eigenvalue() {
        // the interval n = 4 operator is singular at k = 2 pi; the Tilde
        // problem with real n=4 at k^2 = (2pi)^2 has 1/sigma at the cap
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let op = assemble_interval(&p, SystemKind::Tilde, 96).unwrap();
        let k2 = C64::new(std::f64::consts::TAU * std::f64::consts::TAU, 0.0);
        let v = resolvent_norm_at(&op, k2);
        assert!(v > 1e9, "expected near-cap value, got {v:.3e}");
    }

    #[test]
    fn bound_fit_produces_envelope() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 64).unwrap();
        let k_grid: Vec<f64> = (10..=60).map(|i| i as f64 * 0.1).collect();
        let fit = real_axis_bound_fit(&p, &op, &k_grid).unwrap();
        assert!(fit.max_violation <= 1e-12, "violation {}", fit.max_violation);
        assert!(fit.c1.is_finite() && fit.c2.is_finite());
        // norms stay finite on the real axis when Im n >= 0, not == 0
        assert!(fit.rows.iter().all(|&(_, v)| v < VALUE_CAP));
    }

    #[test]
    fn bound_fit_rejects_real_index() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let op = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        let err = real_axis_bound_fit(&p, &op, &[1.0, 2.0]);
        assert!(matches!(err, Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn bound_fit_k_dependent_mode() {
        let p = build_problem(&ProblemConfig {
            mode: crate::problem::IndexMode::KDependent,
            n_expr: None,
            n1_expr: Some("4".into()),
            n2_expr: Some("bump((x-0.5)/0.35)".into()),
            ..ProblemConfig::default()
        })
        .unwrap();
        let op = assemble_interval(&p, SystemKind::Tilde, 64).unwrap();
        let k_grid: Vec<f64> = (10..=40).map(|i| i as f64 * 0.1).collect();
        let fit = real_axis_bound_fit(&p, &op, &k_grid).unwrap();
        assert!(fit.max_violation <= 1e-12);
    }

    #[test]
    fn green_zero_data() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        let n = op.nodes_per_unknown();
        let zero = vec![C64::new(0.0, 0.0); n];
        let sol = apply_resolvent(&op, C64::new(2.0, 0.0), &zero, &zero).unwrap();
        let check = green_identity_check(&p, &op, &sol, &zero, &zero, 2.0, 0.5).unwrap();
        assert!(check.pass);
        assert_eq!(check.lhs, 0.0);
    }

    #[test]
    fn green_random_instances_hold() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 80).unwrap();
        let checks = green_random_batch(&p, &op, &[2.0, 5.0], 0.5, 7, 5).unwrap();
        assert_eq!(checks.len(), 10);
        for c in &checks {
            assert!(c.pass, "{c:?}");
            assert!(c.omega_nodes > 0);
        }
    }

    #[test]
    fn green_empty_omega() {
        let p = bump_problem();
        let op = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        let n = op.nodes_per_unknown();
        let zero = vec![C64::new(0.0, 0.0); n];
        let sol = apply_resolvent(&op, C64::new(2.0, 0.0), &zero, &zero).unwrap();
        let err = green_identity_check(&p, &op, &sol, &zero, &zero, 2.0, 5.0);
        assert!(matches!(err, Err(Error::EmptyOmega(_))));
    }

    #[test]
    fn refinement_keeps_field_stable() {
        let p = bump_problem();
        let coarse = assemble_interval(&p, SystemKind::Tilde, 48).unwrap();
        let fine = assemble_interval(&p, SystemKind::Tilde, 96).unwrap();
        let probes: Vec<C64> = (0..8)
            .map(|i| C64::new(2.0 + i as f64, 0.4 + 0.1 * i as f64))
            .collect();
        let drift = refinement_drift(&coarse, &fine, &probes);
        assert!(drift < 0.05, "drift {drift:.3e}");
    }
}
