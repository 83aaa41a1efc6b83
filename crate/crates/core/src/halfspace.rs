//! Constant-coefficient half-space model on {x_n > 0}.
//!
//! Per tangential frequency xi' the coupled system reads, with
//! D = (h/i) d/dx_n and R = |xi'|^2,
//!
//!   (a (D^2 + R) - mu) u - h^2 V v = h^2 f
//!   (D^2 + R - mu) v              = h^2 g
//!   u(0) = u'(0) = 0,  u, v -> 0 as x_n -> +infinity.
//!
//! Data profiles are finite sums of decaying exponentials
//! c e^{i theta x_n / h}, Im theta > 0, which keeps the exact solution in
//! closed form: the companion first-order system has eigenvalues
//! rho_{1,2}, lam_{1,2} and the two decaying modes close the 2x2 solve for
//! the free constants. The exact traces (gamma1, gamma0) = (v(0), Dv(0))
//! are the oracle against which the principal-symbol boundary reduction is
//! measured as h -> 0.

use crate::error::{Error, Result};
use crate::symbols::{boundary_trace_solve, roots_inner, roots_outer, symbol_roots, trace_kernel4};
use num_complex::Complex64 as C64;
use serde::Serialize;

const COLLISION_TOL: f64 = 1e-10;

/// Finite sum of decaying exponentials sum_k c_k e^{i theta_k x_n / h}.
#[derive(Debug, Clone, Default)]
pub struct ExpProfile {
    pub terms: Vec<(C64, C64)>, // (coefficient, theta)
}

impl ExpProfile {
    pub fn zero() -> Self {
        ExpProfile { terms: Vec::new() }
    }

    pub fn single(coeff: C64, theta: C64) -> Self {
        ExpProfile {
            terms: vec![(coeff, theta)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| c.norm() == 0.0)
    }

    /// Boundary value sum_k c_k.
    pub fn boundary_value(&self) -> C64 {
        self.terms.iter().map(|(c, _)| c).sum()
    }

    pub fn eval(&self, x_n: f64, h: f64) -> C64 {
        self.terms
            .iter()
            .map(|(c, th)| c * (C64::i() * th * x_n / h).exp())
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for (c, th) in &self.terms {
            if c.norm() > 0.0 && th.im <= 0.0 {
                return Err(Error::NonDecayingData(th.im));
            }
        }
        Ok(())
    }

    fn scale(&self, c: C64) -> Self {
        ExpProfile {
            terms: self.terms.iter().map(|(a, th)| (a * c, *th)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HalfSpaceInstance {
    pub a_val: C64,
    pub v_val: C64,
    pub mu: C64,
    pub xi_prime: f64,
    pub h: f64,
    pub f_data: ExpProfile,
    pub g_data: ExpProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTraces {
    /// gamma0 = D_{x_n} v at x_n = 0 (alpha = 0 model).
    pub gamma0: C64,
    /// gamma1 = v at x_n = 0.
    pub gamma1: C64,
}

/// The exact solution of a half-space instance: the two forced profiles
/// plus the decaying homogeneous modes with their closure constants.
#[derive(Debug, Clone)]
pub struct HalfSpaceSolution {
    pub v_profile: ExpProfile,
    pub u_profile: ExpProfile,
    pub traces: BoundaryTraces,
}

impl HalfSpaceInstance {
    fn r_val(&self) -> f64 {
        self.xi_prime * self.xi_prime
    }

    fn decoupled(&self) -> bool {
        self.v_val.norm() < 1e-14
    }
}

/// Exact traces of the coupled system, by eigen-decomposition of the
/// companion first-order system (computed in closed form from the
/// characteristic roots) with decay at +infinity and u(0) = u'(0) = 0.
pub fn exact_halfspace_traces(inst: &HalfSpaceInstance) -> Result<BoundaryTraces> {
    Ok(exact_halfspace_solution(inst)?.traces)
}

pub fn exact_halfspace_solution(inst: &HalfSpaceInstance) -> Result<HalfSpaceSolution> {
    inst.f_data.validate()?;
    inst.g_data.validate()?;
    let r = inst.r_val();
    let h2 = C64::new(inst.h * inst.h, 0.0);
    let (rho1, rho2) = roots_outer(r, inst.mu)?;
    let (lam1, lam2) = roots_inner(inst.a_val, r, inst.mu)?;

    if inst.decoupled() {
        // V = 0 forces a = 1 (lam = rho): the u-block is overdetermined
        // unless f vanishes; the scalar oracle is the decaying full-line
        // solution of the v-equation, made of the data exponential and the
        // rho1 response.
        if !inst.f_data.is_zero() {
            return Err(Error::DegenerateCompanionMatrix(
                "V = 0 decouples u, whose clamped conditions admit no solution for f != 0".into(),
            ));
        }
        let mut v_terms: Vec<(C64, C64)> = Vec::new();
        let mut c_rho = C64::new(0.0, 0.0);
        for &(g_c, th) in &inst.g_data.terms {
            check_resonance(th, &[rho1, rho2])?;
            let beta = h2 * g_c / ((th - rho1) * (th - rho2));
            v_terms.push((beta, th));
            c_rho += h2 * g_c / ((rho1 - rho2) * (rho1 - th));
        }
        v_terms.push((c_rho, rho1));
        let v_profile = ExpProfile { terms: v_terms };
        let gamma1 = v_profile.boundary_value();
        let gamma0 = v_profile.terms.iter().map(|(c, th)| c * th).sum();
        return Ok(HalfSpaceSolution {
            v_profile,
            u_profile: ExpProfile::zero(),
            traces: BoundaryTraces { gamma0, gamma1 },
        });
    }

    for (l, r_) in [(lam1, rho1), (lam1, rho2), (lam2, rho1), (lam2, rho2)] {
        if (l - r_).norm() < COLLISION_TOL {
            return Err(Error::DegenerateCompanionMatrix(format!(
                "lam = {l} collides with rho = {r_}"
            )));
        }
    }

    // forced response per data exponential
    let inner_char = |xi: C64| inst.a_val * (xi * xi + r) - inst.mu;
    let mut v_terms: Vec<(C64, C64)> = Vec::new();
    let mut u_terms: Vec<(C64, C64)> = Vec::new();
    for &(g_c, th) in &inst.g_data.terms {
        if g_c.norm() == 0.0 {
            continue;
        }
        check_resonance(th, &[rho1, rho2, lam1, lam2])?;
        let beta = h2 * g_c / ((th - rho1) * (th - rho2));
        v_terms.push((beta, th));
        // the v response forces u through the coupling
        u_terms.push((h2 * inst.v_val * beta / inner_char(th), th));
    }
    for &(f_c, th) in &inst.f_data.terms {
        if f_c.norm() == 0.0 {
            continue;
        }
        check_resonance(th, &[rho1, rho2, lam1, lam2])?;
        u_terms.push((h2 * f_c / inner_char(th), th));
    }

    // decaying homogeneous modes: the rho1 v-mode carries the u-component
    // U_rho = h^2 V / (a (rho1 - lam1)(rho1 - lam2)), the lam1 mode is pure u
    let u_rho = h2 * inst.v_val / inner_char(rho1);
    let s0: C64 = u_terms.iter().map(|(c, _)| c).sum();
    let s1: C64 = u_terms.iter().map(|(c, th)| c * th).sum();
    // [u_rho, 1; u_rho rho1, lam1] [c; d] = -[s0; s1]
    let det = u_rho * (lam1 - rho1);
    if det.norm() < 1e-300 {
        return Err(Error::DegenerateCompanionMatrix(
            "closure system singular".into(),
        ));
    }
    let c = (-s0 * lam1 + s1) / det;
    let d = (-u_rho * s1 + u_rho * rho1 * s0) / det;

    v_terms.push((c, rho1));
    u_terms.push((c * u_rho, rho1));
    u_terms.push((d, lam1));

    let v_profile = ExpProfile { terms: v_terms };
    let u_profile = ExpProfile { terms: u_terms };
    let gamma1 = v_profile.boundary_value();
    let gamma0 = v_profile.terms.iter().map(|(c, th)| c * th).sum();
    Ok(HalfSpaceSolution {
        v_profile,
        u_profile,
        traces: BoundaryTraces { gamma0, gamma1 },
    })
}

fn check_resonance(theta: C64, roots: &[C64]) -> Result<()> {
    for &r in roots {
        if (theta - r).norm() < COLLISION_TOL {
            return Err(Error::DegenerateCompanionMatrix(format!(
                "data pole {theta} resonates with characteristic root {r}"
            )));
        }
    }
    Ok(())
}

/// Residue sum for the principal-order data kernels: value at x_n = 0+ of
/// (1/2 i pi) int 1 / ((xi - q_1)...(xi - q_m)(xi - theta)) d xi with the
/// data pole theta sent to its h -> 0 limit 0. `upper` flags which of the
/// q_i lie in the upper half plane (theta itself approaches 0 from above
/// and always contributes).
fn principal_data_kernel(poles: &[(C64, bool)]) -> C64 {
    // residue at theta = 0
    let mut den = C64::new(1.0, 0.0);
    for &(p, _) in poles {
        den *= -p;
    }
    let mut total = 1.0 / den;
    // residues at the upper q_j, with the (xi - theta) -> xi factor
    for (j, &(p, up)) in poles.iter().enumerate() {
        if !up {
            continue;
        }
        let mut den = p; // the (xi - 0) factor
        for (i, &(q, _)) in poles.iter().enumerate() {
            if i != j {
                den *= p - q;
            }
        }
        total += 1.0 / den;
    }
    total
}

/// Principal-symbol prediction of the traces: the g2 and g7 slots are
/// computed from the data at principal order (the data profile enters
/// through its boundary value, its pole sent to the h -> 0 limit) and the
/// reduced 2x2 system is solved by `boundary_trace_solve`.
pub fn symbol_predicted_traces(inst: &HalfSpaceInstance) -> Result<BoundaryTraces> {
    inst.f_data.validate()?;
    inst.g_data.validate()?;
    let r = inst.r_val();
    let h2 = C64::new(inst.h * inst.h, 0.0);
    let roots = symbol_roots(inst.a_val, r, inst.mu, inst.xi_prime)?;
    let (rho1, rho2, lam1, lam2) = (roots.rho1, roots.rho2, roots.lam1, roots.lam2);
    let two_i_pi = C64::new(0.0, 2.0 * std::f64::consts::PI);

    // g1 at the boundary: h^2 ghat(0) * residue of 1/((xi-rho1)(xi-rho2) xi)
    let jv = principal_data_kernel(&[(rho1, true), (rho2, false)]);
    let g1_0 = h2 * inst.g_data.boundary_value() * jv;
    let g2 = (rho2 - rho1) * g1_0;

    if inst.decoupled() {
        // scalar reduction: gamma1 from the v-equation alone
        // (the lem-sym-1 residue formula), gamma0 from the first trace row
        let gamma1 = g1_0;
        let gamma0 = g2 - rho2 * gamma1;
        return Ok(BoundaryTraces { gamma0, gamma1 });
    }

    // g4 = -(1/a) [ fhat(0) Jf + h^2 V ghat(0) J5 ]
    let jf = principal_data_kernel(&[(lam1, true), (lam2, false)]);
    let j5 = principal_data_kernel(&[(lam1, true), (lam2, false), (rho1, true), (rho2, false)]);
    let g4 = -(inst.f_data.boundary_value() * jf + h2 * inst.v_val * inst.g_data.boundary_value() * j5)
        / inst.a_val;

    // clear the gamma-kernel A_0 (Lemma lem-sym-2 closed form) out of the
    // second relation (V/a)(A_0 gamma0 + A_1 gamma1) = g4:
    // g6 = (a/V) Dnm g4 and the gamma0 row coefficient is Dnm A_0
    let dnm = (lam1 - lam2) * (lam1 - rho2) * (rho1 - lam2) * (rho1 - rho2);
    let a0 = trace_kernel4(lam1, lam2, rho1, rho2, 0)? / two_i_pi;
    let g6 = inst.a_val / inst.v_val * dnm * g4;
    let g7 = g6 - dnm * a0 * g2;
    let (gamma1, gamma0) = boundary_trace_solve(&roots, g2, g7)?;
    Ok(BoundaryTraces { gamma0, gamma1 })
}

/// Data of one convergence run: per-h errors and the fitted slopes.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub slope0: f64,
    pub slope1: f64,
    /// max residual of the two log-log fits, in log10 units
    pub fit_residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub err_gamma0: f64,
    pub err_gamma1: f64,
}

/// Least-squares slope of log err vs log h; the intercept is discarded.
pub fn loglog_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = x.log10();
        let ly = y.log10();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = points
        .iter()
        .map(|&(x, y)| (y.log10() - (slope * x.log10() + intercept)).abs())
        .fold(0.0, f64::max);
    (slope, residual)
}

/// Runs exact vs predicted traces over a dyadic h grid and fits the decay
/// order of both trace errors.
pub fn convergence_study(
    family: &dyn Fn(f64) -> HalfSpaceInstance,
    h_grid: &[f64],
) -> Result<ConvergenceStudy> {
    assert!(h_grid.len() >= 5, "need at least 5 dyadic h points");
    let mut rows = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let inst = family(h);
        debug_assert_eq!(inst.h, h);
        let exact = exact_halfspace_traces(&inst)?;
        let predicted = symbol_predicted_traces(&inst)?;
        rows.push(ConvergenceRow {
            h,
            err_gamma0: (exact.gamma0 - predicted.gamma0).norm(),
            err_gamma1: (exact.gamma1 - predicted.gamma1).norm(),
        });
    }
    // reject degenerate studies (identical traces)
    let floor = 1e-14;
    if rows.iter().all(|r| r.err_gamma0 < floor && r.err_gamma1 < floor) {
        return Err(Error::FitUnstable(
            "differences at machine zero: exact match, no order to fit".into(),
        ));
    }
    let pts0: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.err_gamma0.max(floor))).collect();
    let pts1: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.err_gamma1.max(floor))).collect();
    let (slope0, res0) = loglog_slope(&pts0);
    let (slope1, res1) = loglog_slope(&pts1);
    let fit_residual = res0.max(res1);
    if fit_residual > 0.5 {
        return Err(Error::FitUnstable(format!(
            "log-log fit residual {fit_residual:.3} exceeds 0.5"
        )));
    }
    Ok(ConvergenceStudy {
        rows,
        slope0,
        slope1,
        fit_residual,
    })
}

/// Residual diagnostics of an exact solution: max ODE residual over sample
/// points (relative) and the clamped-boundary values of u.
pub fn solution_residual(inst: &HalfSpaceInstance, sol: &HalfSpaceSolution) -> (f64, f64) {
    let h = inst.h;
    let r = inst.r_val();
    // D^2 acting on e^{i th x/h} multiplies by th^2
    let apply = |profile: &ExpProfile, ch: &dyn Fn(C64) -> C64, x: f64| -> C64 {
        profile
            .terms
            .iter()
            .map(|(c, th)| c * ch(*th) * (C64::i() * th * x / h).exp())
            .sum()
    };
    let outer = |th: C64| th * th + r - inst.mu;
    let inner = |th: C64| inst.a_val * (th * th + r) - inst.mu;
    let mut worst = 0.0f64;
    let h2 = C64::new(h * h, 0.0);
    for i in 0..40 {
        let x = h * i as f64 / 4.0;
        let lhs_v = apply(&sol.v_profile, &outer, x);
        let rhs_v = h2 * inst.g_data.eval(x, h);
        let scale_v = sol.v_profile.eval(x, h).norm().max(rhs_v.norm()).max(1e-30);
        worst = worst.max((lhs_v - rhs_v).norm() / scale_v);
        let lhs_u = apply(&sol.u_profile, &inner, x)
            - h2 * inst.v_val * sol.v_profile.eval(x, h);
        let rhs_u = h2 * inst.f_data.eval(x, h);
        let scale_u = sol.u_profile.eval(x, h).norm().max(rhs_u.norm()).max(1e-30);
        worst = worst.max((lhs_u - rhs_u).norm() / scale_u);
    }
    let u0 = sol.u_profile.boundary_value().norm();
    let du0: C64 = sol.u_profile.terms.iter().map(|(c, th)| c * th).sum();
    (worst, u0.max(du0.norm()))
}
