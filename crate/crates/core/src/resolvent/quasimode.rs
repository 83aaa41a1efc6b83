//! Gaussian-beam quasimodes for P = -h^2 Lap + V(x) - z at a phase-space
//! point (x0, xi0) with Im<xi0, dV(x0)> != 0.
//!
//! The ansatz is u = h^{-d/4} a(tau; h) chi(x) e^{i phi/h} with
//! phi = eta.(x-x0) + (x-x0)^T Q (x-x0)/2, tau = (x-x0)/sqrt(h), and
//! z = xi0^2 + V(x0). The propagation direction eta = +/- xi0 and the
//! symmetric matrix Q solve the first-order eikonal matching
//! 2 Q eta = -grad V(x0) on the branch where Im Q is positive definite
//! (the decaying beam); the transverse block of Im Q is free and set to a
//! fixed positive scale. Amplitude corrections through order K (powers of
//! sqrt(h)) cancel successive terms of the conjugated operator
//!   L = h (Q tau)^2 + h tau^T HessV tau / 2
//!     - i h^{1/2} 2 eta.grad_tau - i h (2 (Q tau).grad_tau + tr Q)
//!     - h Lap_tau,
//! giving residual ratios O(h^{1 + K/2}) for affine and quadratic V.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Potential supplied as an evaluator; derivatives are taken by central
/// differences (exact for the affine verification models).
#[derive(Clone)]
pub struct Potential {
    eval: Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>,
    dim: usize,
}

impl Potential {
    pub fn new(dim: usize, eval: Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>) -> Self {
        Potential { eval, dim }
    }

    /// V(x) = v0 + grad . (x - base): the analytic model of the lower
    /// bound theorems.
    pub fn affine(base: Vec<f64>, v0: C64, grad: Vec<C64>) -> Self {
        let dim = base.len();
        let g = grad.clone();
        let b = base.clone();
        Potential {
            eval: Arc::new(move |x: &[f64]| {
                let mut v = v0;
                for i in 0..b.len() {
                    v += g[i] * (x[i] - b[i]);
                }
                v
            }),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, x: &[f64]) -> C64 {
        (self.eval)(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<C64> {
        let fd = 1e-5;
        (0..self.dim)
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += fd;
                xm[i] -= fd;
                (self.at(&xp) - self.at(&xm)) / (2.0 * fd)
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<C64>> {
        let fd = 1e-4;
        let mut h = vec![vec![C64::new(0.0, 0.0); self.dim]; self.dim];
        for i in 0..self.dim {
            for j in i..self.dim {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[i] += fd;
                xpp[j] += fd;
                xpm[i] += fd;
                xpm[j] -= fd;
                xmp[i] -= fd;
                xmp[j] += fd;
                xmm[i] -= fd;
                xmm[j] -= fd;
                let v = (self.at(&xpp) - self.at(&xpm) - self.at(&xmp) + self.at(&xmm))
                    / (4.0 * fd * fd);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }
}

/// Axis-aligned box the beam must live in.
#[derive(Debug, Clone)]
pub struct QuasimodeDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl QuasimodeDomain {
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| (xi - self.lo[i]).min(self.hi[i] - xi))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sparse polynomial in the scaled variables tau with complex
/// coefficients; exponents per dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TauPoly {
    terms: BTreeMap<Vec<u32>, C64>,
}

impl TauPoly {
    fn one(dim: usize) -> Self {
        let mut t = TauPoly::default();
        t.terms.insert(vec![0; dim], C64::new(1.0, 0.0));
        t
    }

    fn insert(&mut self, mono: Vec<u32>, c: C64) {
        if c.norm() == 0.0 {
            return;
        }
        let e = self.terms.entry(mono).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if e.norm() < 1e-300 {
            // keep the map tidy
        }
    }

    fn scale(&self, c: C64) -> Self {
        let mut out = TauPoly::default();
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v * c);
        }
        out
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.insert(m.clone(), *v);
        }
        out.terms.retain(|_, v| v.norm() > 0.0);
        out
    }

    fn mul_mono(&self, mono: &[u32], c: C64) -> Self {
        let mut out = TauPoly::default();
        for (m, v) in &self.terms {
            let mut m2 = m.clone();
            for (a, b) in m2.iter_mut().zip(mono) {
                *a += b;
            }
            out.terms.insert(m2, v * c);
        }
        out
    }

    fn diff(&self, dir: usize) -> Self {
        let mut out = TauPoly::default();
        for (m, v) in &self.terms {
            if m[dir] == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2[dir] -= 1;
            out.insert(m2, v * m[dir] as f64);
        }
        out
    }

    /// Antiderivative in the given direction (zero constant term).
    fn antiderivative(&self, dir: usize) -> Self {
        let mut out = TauPoly::default();
        for (m, v) in &self.terms {
            let mut m2 = m.clone();
            m2[dir] += 1;
            let denom = m2[dir] as f64;
            out.insert(m2, v / denom);
        }
        out
    }

    pub fn eval(&self, tau: &[f64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (m, v) in &self.terms {
            let mut p = 1.0f64;
            for (e, &t) in m.iter().zip(tau) {
                p *= t.powi(*e as i32);
            }
            s += v * p;
        }
        s
    }

    fn is_zero(&self) -> bool {
        self.terms.values().all(|v| v.norm() < 1e-14)
    }

    pub fn coefficients(&self) -> Vec<(Vec<u32>, C64)> {
        self.terms.iter().map(|(m, c)| (m.clone(), *c)).collect()
    }
}

/// A built Gaussian beam with its amplitude hierarchy.
#[derive(Clone)]
pub struct Quasimode {
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
    /// chosen propagation direction (+/- xi0, the decaying branch)
    pub eta: Vec<f64>,
    pub z: C64,
    /// complex symmetric phase Hessian with Im Q positive definite
    pub q_phase: Vec<Vec<C64>>,
    /// a_0 .. a_K in powers of sqrt(h)
    pub amplitude_terms: Vec<TauPoly>,
    pub order: usize,
    /// plateau radius of the cutoff; support radius is twice this
    pub core_radius: f64,
    potential: Potential,
    pub domain: QuasimodeDomain,
}

impl std::fmt::Debug for Quasimode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Quasimode")
            .field("x0", &self.x0)
            .field("xi0", &self.xi0)
            .field("z", &self.z)
            .field("order", &self.order)
            .finish()
    }
}

fn min_eig_im(q: &[Vec<C64>]) -> f64 {
    let d = q.len();
    let m = nalgebra::DMatrix::<f64>::from_fn(d, d, |i, j| q[i][j].im);
    let eig = m.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Builds the beam: sign-condition check, decaying-branch selection for
/// Q, and the amplitude hierarchy through order K (powers of sqrt(h)).
pub fn build_quasimode(
    potential: &Potential,
    domain: &QuasimodeDomain,
    x0: &[f64],
    xi0: &[f64],
    order: usize,
    h_max: f64,
) -> Result<Quasimode> {
    assert!(order <= 4, "amplitude order capped at 4");
    let d = potential.dim();
    assert_eq!(x0.len(), d);
    assert_eq!(xi0.len(), d);

    let grad = potential.gradient(x0);
    let sign: f64 = xi0
        .iter()
        .zip(&grad)
        .map(|(&xi, g)| xi * g.im)
        .sum();
    if sign.abs() < 1e-10 {
        return Err(Error::SignConditionFails(sign));
    }

    let loc_width = h_max.sqrt();
    let dist = domain.boundary_distance(x0);
    if dist < 5.0 * loc_width {
        return Err(Error::SupportLeaksBoundary(dist));
    }
    let core_radius = (dist / 2.0).min(2.0);

    let xi_norm_sq: f64 = xi0.iter().map(|v| v * v).sum();
    assert!(xi_norm_sq > 0.0, "xi0 must be nonzero");

    // decaying branch: eta = s xi0 with
    // Q eta = -grad V / 2, transverse block i c I
    let mut chosen: Option<(Vec<f64>, Vec<Vec<C64>>)> = None;
    for s in [1.0f64, -1.0] {
        let eta: Vec<f64> = xi0.iter().map(|&v| s * v).collect();
        let b: Vec<C64> = grad.iter().map(|g| -g / 2.0).collect();
        // Q = (b eta^T + eta b^T)/|eta|^2 - (eta.b) eta eta^T/|eta|^4
        //     + i c (I - eta eta^T/|eta|^2)
        let eb: C64 = eta.iter().zip(&b).map(|(&e, bv)| bv * e).sum();
        let bnorm: f64 = b.iter().map(|v| v.norm()).sum();
        let c_scale = 0.5 * (1.0 + bnorm / xi_norm_sq.sqrt());
        let mut q = vec![vec![C64::new(0.0, 0.0); d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut v = (b[i] * eta[j] + b[j] * eta[i]) / xi_norm_sq
                    - eb * eta[i] * eta[j] / (xi_norm_sq * xi_norm_sq);
                let proj = if i == j { 1.0 } else { 0.0 } - eta[i] * eta[j] / xi_norm_sq;
                v += C64::new(0.0, c_scale) * proj;
                q[i][j] = v;
            }
        }
        if min_eig_im(&q) > 1e-12 {
            chosen = Some((eta, q));
            break;
        }
    }
    let Some((eta, q)) = chosen else {
        return Err(Error::NoDecayingBranch);
    };

    let z = C64::new(xi_norm_sq, 0.0) + potential.at(x0);
    let hess = potential.hessian(x0);

    // amplitude hierarchy: L1 a_{s+1} = -(L2 a_s), L1 = -2 i eta.grad
    let l2 = |a: &TauPoly| -> TauPoly {
        let mut out = TauPoly::default();
        // (Q tau)^2 term + quadratic Hessian term, with coefficients
        // c_{jk} = (Q^2)_{jk} + Hess_{jk}/2 on the monomial tau_j tau_k
        for j in 0..d {
            for k in 0..d {
                let mut cjk = hess[j][k] / 2.0;
                for l in 0..d {
                    cjk += q[j][l] * q[l][k];
                }
                let mut mono = vec![0u32; d];
                mono[j] += 1;
                mono[k] += 1;
                out = out.add(&a.mul_mono(&mono, cjk));
            }
        }
        // -2 i (Q tau).grad_tau a
        for j in 0..d {
            for l in 0..d {
                let da = a.diff(l);
                let mut mono = vec![0u32; d];
                mono[j] = 1;
                out = out.add(&da.mul_mono(&mono, C64::new(0.0, -2.0) * q[j][l]));
            }
        }
        // -i tr Q a
        let mut tr = C64::new(0.0, 0.0);
        for j in 0..d {
            tr += q[j][j];
        }
        out = out.add(&a.scale(C64::new(0.0, -1.0) * tr));
        // -Lap a
        for l in 0..d {
            out = out.add(&a.diff(l).diff(l).scale(C64::new(-1.0, 0.0)));
        }
        out
    };

    // solve L1 a = rhs: integrate along eta; with eta along a single
    // coordinate the antiderivative is direct, otherwise rotate. The
    // verification models use axis-aligned xi0, so require it here.
    let axis = eta
        .iter()
        .position(|&v| v.abs() > 1e-14)
        .expect("eta nonzero");
    for (i, &v) in eta.iter().enumerate() {
        if i != axis {
            assert!(
                v.abs() < 1e-14,
                "beam direction must be axis-aligned in this implementation"
            );
        }
    }
    let inv_l1 = |rhs: &TauPoly| -> TauPoly {
        // L1 = -2 i eta_axis d/d tau_axis
        rhs.antiderivative(axis)
            .scale(1.0 / (C64::new(0.0, -2.0) * eta[axis]))
    };

    let mut amplitude_terms = vec![TauPoly::one(d)];
    for _s in 0..order {
        let rhs = l2(amplitude_terms.last().unwrap()).scale(C64::new(-1.0, 0.0));
        amplitude_terms.push(inv_l1(&rhs));
    }

    Ok(Quasimode {
        x0: x0.to_vec(),
        xi0: xi0.to_vec(),
        eta,
        z,
        q_phase: q,
        amplitude_terms,
        order,
        core_radius,
        potential: potential.clone(),
        domain: domain.clone(),
    })
}

/// Smooth cutoff: 1 on [0, 1/2], exp taper to 0 at 1 (in units of the
/// support radius), with two derivatives available.
fn cutoff(s: f64) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    // psi(t) = exp(1 - 1/(1 - t^2)) on t = 2s - 1 in (0, 1)
    let t = 2.0 * s - 1.0;
    let om = 1.0 - t * t;
    let psi = (1.0 - 1.0 / om).exp();
    // dpsi/dt = psi * (-2t / om^2)
    let dpsi = psi * (-2.0 * t / (om * om));
    let d2psi = psi * ((4.0 * t * t / om.powi(4)) - 2.0 / (om * om) - 8.0 * t * t / om.powi(3));
    // chain rule for s
    (psi, 2.0 * dpsi, 4.0 * d2psi)
}

impl Quasimode {
    /// Pointwise value (without the h^{-d/4} normalization).
    pub fn amplitude_at(&self, tau: &[f64], h: f64) -> C64 {
        let mut a = C64::new(0.0, 0.0);
        let mut hp = 1.0f64;
        for term in &self.amplitude_terms {
            a += term.eval(tau) * hp;
            hp *= h.sqrt();
        }
        a
    }

    fn phase_at(&self, t: &[f64]) -> C64 {
        let d = t.len();
        let mut phi = C64::new(0.0, 0.0);
        for i in 0..d {
            phi += self.eta[i] * t[i];
            for j in 0..d {
                phi += 0.5 * self.q_phase[i][j] * t[i] * t[j];
            }
        }
        phi
    }

    /// u and (P - z) u at the physical point x, exactly (analytic
    /// derivatives of the polynomial-Gaussian-cutoff product).
    pub fn eval_with_residual(&self, x: &[f64], h: f64) -> (C64, C64) {
        let d = x.len();
        let t: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        let r = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let support = 2.0 * self.core_radius;
        if r >= support {
            return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        let sh = h.sqrt();
        let tau: Vec<f64> = t.iter().map(|v| v / sh).collect();
        let norm_factor = h.powf(-(d as f64) / 4.0);

        // amplitude a(tau) and derivatives in x (chain rule 1/sqrt(h))
        let mut a = C64::new(0.0, 0.0);
        let mut da = vec![C64::new(0.0, 0.0); d];
        let mut lap_a = C64::new(0.0, 0.0);
        let mut hp = 1.0f64;
        for term in &self.amplitude_terms {
            a += term.eval(&tau) * hp;
            for l in 0..d {
                da[l] += term.diff(l).eval(&tau) * (hp / sh);
                lap_a += term.diff(l).diff(l).eval(&tau) * (hp / h);
            }
            hp *= sh;
        }

        // cutoff chi(r / support) and derivatives
        let (chi, dchi_ds, d2chi_ds) = cutoff(r / support);
        let mut dchi = vec![0.0f64; d];
        let mut lap_chi = 0.0f64;
        if r > 1e-14 {
            for l in 0..d {
                dchi[l] = dchi_ds * t[l] / (r * support);
            }
            lap_chi = d2chi_ds / (support * support)
                + dchi_ds * (d as f64 - 1.0) / (r * support);
        }

        // A = a chi and derivatives
        let mut grad_a_chi = vec![C64::new(0.0, 0.0); d];
        for l in 0..d {
            grad_a_chi[l] = da[l] * chi + a * dchi[l];
        }
        let mut dot_da_dchi = C64::new(0.0, 0.0);
        for l in 0..d {
            dot_da_dchi += da[l] * dchi[l];
        }
        let lap_a_chi = lap_a * chi + 2.0 * dot_da_dchi + a * lap_chi;
        let a_chi = a * chi;

        // phase and derivatives
        let phi = self.phase_at(&t);
        let mut grad_phi = vec![C64::new(0.0, 0.0); d];
        for i in 0..d {
            grad_phi[i] = C64::new(self.eta[i], 0.0);
            for j in 0..d {
                grad_phi[i] += self.q_phase[i][j] * t[j];
            }
        }
        let mut tr_q = C64::new(0.0, 0.0);
        let mut grad_phi_sq = C64::new(0.0, 0.0);
        let mut grad_phi_dot_grad_a = C64::new(0.0, 0.0);
        for i in 0..d {
            tr_q += self.q_phase[i][i];
            grad_phi_sq += grad_phi[i] * grad_phi[i];
            grad_phi_dot_grad_a += grad_phi[i] * grad_a_chi[i];
        }

        let osc = (C64::i() * phi / h).exp();
        let u = norm_factor * a_chi * osc;

        let e_term = grad_phi_sq + self.potential.at(x) - self.z;
        let residual = norm_factor
            * osc
            * (e_term * a_chi
                - C64::i() * h * (2.0 * grad_phi_dot_grad_a + tr_q * a_chi)
                - h * h * lap_a_chi);
        (u, residual)
    }

    /// ||(P - z) u|| / ||u|| by tensor-grid quadrature over the support.
    pub fn residual_ratio(&self, h: f64, pts_per_dim: usize) -> f64 {
        let (nu, nr, _outside) = self.norms(h, pts_per_dim, self.core_radius);
        nr / nu
    }

    /// (||u||, ||residual||, mass fraction outside the given radius).
    pub fn norms(&self, h: f64, pts_per_dim: usize, outside_radius: f64) -> (f64, f64, f64) {
        let d = self.x0.len();
        let support = 2.0 * self.core_radius;
        let n = pts_per_dim;
        let step = 2.0 * support / (n as f64 - 1.0);
        let mut nu2 = 0.0f64;
        let mut nr2 = 0.0f64;
        let mut outside2 = 0.0f64;
        let mut idx = vec![0usize; d];
        loop {
            let x: Vec<f64> = (0..d)
                .map(|l| self.x0[l] - support + idx[l] as f64 * step)
                .collect();
            let (u, r) = self.eval_with_residual(&x, h);
            let w = step.powi(d as i32);
            nu2 += u.norm_sqr() * w;
            nr2 += r.norm_sqr() * w;
            let dist = x
                .iter()
                .zip(&self.x0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > outside_radius {
                outside2 += u.norm_sqr() * w;
            }
            // advance the tensor index
            let mut l = 0;
            loop {
                idx[l] += 1;
                if idx[l] < n {
                    break;
                }
                idx[l] = 0;
                l += 1;
                if l == d {
                    return (nu2.sqrt(), nr2.sqrt(), outside2 / nu2.max(1e-300));
                }
            }
        }
    }
}

/// Per-h row of the lower-bound comparison.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundRow {
    pub h: f64,
    pub k2: C64,
    pub lower_bound: f64,
    pub scan_value: f64,
    pub residual_ratio: f64,
}

/// Lower bound ||R~_{k^2}|| >= ||u|| / ||f|| with f = Delta u + k^2 n u =
/// -h^{-2} (P u) and k^2 = -z0/h^2, compared against the sigma_min scan
/// surrogate at the same k^2.
pub fn quasimode_lower_bound(
    qm: &Quasimode,
    z0: C64,
    op: &crate::discretize::DiscretizedOperator,
    h_values: &[f64],
    pts_per_dim: usize,
) -> Result<Vec<LowerBoundRow>> {
    let mut rows = Vec::with_capacity(h_values.len());
    for &h in h_values {
        // support containment: the cutoff kills u beyond 2 core_radius,
        // which build_quasimode keeps inside the domain; verify mass
        let (nu, nr, outside) = qm.norms(h, pts_per_dim, 2.0 * qm.core_radius - 1e-9);
        if outside > 1e-12 {
            return Err(Error::SupportLeaksBoundary(outside));
        }
        let k2 = -z0 / (h * h);
        let lower_bound = (h * h) * nu / nr;
        let scan_value = crate::resolvent::resolvent_norm_at(op, k2);
        rows.push(LowerBoundRow {
            h,
            k2,
            lower_bound,
            scan_value,
            residual_ratio: nr / nu,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ix_potential() -> Potential {
        // V(x) = i x
        Potential::affine(vec![0.0], C64::new(0.0, 0.0), vec![C64::i()])
    }

    fn box1d() -> QuasimodeDomain {
        // wide box: the cutoff tail sits at e^{-32} of the beam mass even
        // at the largest h, so truncation cannot tilt the measured order
        QuasimodeDomain {
            lo: vec![-6.0],
            hi: vec![6.0],
        }
    }

    #[test]
    fn zero_potential_fails_sign_condition() {
        let v = Potential::affine(vec![0.0], C64::new(0.0, 0.0), vec![C64::new(0.0, 0.0)]);
        let err = build_quasimode(&v, &box1d(), &[0.0], &[1.0], 0, 2f64.powi(-4));
        assert!(matches!(err, Err(Error::SignConditionFails(_))));
    }

    #[test]
    fn branch_selection_gives_positive_im_q() {
        let qm = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 0, 2f64.powi(-4))
            .unwrap();
        assert!(min_eig_im(&qm.q_phase) > 0.0);
        // for V = i x and xi0 = +1 the decaying branch is eta = -xi0,
        // Q = i / 2
        assert_eq!(qm.eta, vec![-1.0]);
        assert!((qm.q_phase[0][0] - C64::new(0.0, 0.5)).norm() < 1e-12);
        assert_eq!(qm.z, C64::new(1.0, 0.0));
    }

    #[test]
    fn beam_near_boundary_rejected() {
        let err = build_quasimode(&ix_potential(), &box1d(), &[5.95], &[1.0], 0, 2f64.powi(-4));
        assert!(matches!(err, Err(Error::SupportLeaksBoundary(_))));
    }

    #[test]
    fn order0_residual_is_first_order_in_h() {
        let qm = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 0, 2f64.powi(-4))
            .unwrap();
        let hs: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .map(|&h| (h, qm.residual_ratio(h, 1600)))
            .collect();
        let (slope, _) = crate::halfspace::loglog_slope(&pts);
        // the exact model slope is 1.0 (residual = (h/2 - t^2/4) u gives
        // ratio sqrt(3)/4 h identically); compare at estimator precision
        assert!(slope >= 1.0 - 1e-9, "order-0 slope {slope}");
        // ratios decrease monotonically along the dyadic grid
        for w in pts.windows(2) {
            assert!(w[1].1 < w[0].1 * 1.05, "{pts:?}");
        }
        // exact first-order model: ratio = sqrt(3)/4 h for V = i x
        let expect = 3f64.sqrt() / 4.0;
        for &(h, r) in &pts[3..] {
            assert!((r / h - expect).abs() < 0.05 * expect, "h={h}: {r} vs {}", expect * h);
        }
    }

    #[test]
    fn order2_gains_a_full_power() {
        let q0 = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 0, 2f64.powi(-4))
            .unwrap();
        let q2 = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 2, 2f64.powi(-4))
            .unwrap();
        let hs: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
        let p0: Vec<(f64, f64)> = hs.iter().map(|&h| (h, q0.residual_ratio(h, 1600))).collect();
        let p2: Vec<(f64, f64)> = hs.iter().map(|&h| (h, q2.residual_ratio(h, 1600))).collect();
        let (s0, _) = crate::halfspace::loglog_slope(&p0);
        let (s2, _) = crate::halfspace::loglog_slope(&p2);
        assert!(s0 >= 1.0 - 1e-9, "{s0}");
        assert!(s2 - s0 >= 0.8, "s0 = {s0}, s2 = {s2}");
    }

    #[test]
    fn localization_mass_decays_exponentially() {
        let qm = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 0, 2f64.powi(-4))
            .unwrap();
        let hs: Vec<f64> = (3..=7).map(|j| 2f64.powi(-j)).collect();
        // mass outside a fixed radius behaves like e^{-c/h}, fitted c > 0
        let mut pts = Vec::new();
        for &h in &hs {
            let (_, _, outside) = qm.norms(h, 1200, 0.4);
            if outside > 0.0 {
                pts.push((1.0 / h, outside.ln()));
            }
        }
        assert!(pts.len() >= 3);
        // linear fit of ln(mass) vs 1/h: slope = -c
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope < 0.0, "mass decay constant c = {} must be > 0", -slope);
    }

    #[test]
    fn amplitude_hierarchy_for_linear_potential() {
        // for V = i x the first correction solves
        // L1 a1 = -L2 1 = -((Q tau)^2 - i tr Q)
        let qm = build_quasimode(&ix_potential(), &box1d(), &[0.0], &[1.0], 1, 2f64.powi(-4))
            .unwrap();
        let q = qm.q_phase[0][0];
        let eta = qm.eta[0];
        // a1 = [-(q^2 tau^3 / 3) + i q tau] / (-2 i eta)
        let a1 = &qm.amplitude_terms[1];
        let c3 = -(q * q) / 3.0 / (C64::new(0.0, -2.0) * eta);
        let c1 = C64::i() * q / (C64::new(0.0, -2.0) * eta);
        let got3 = a1.eval(&[1.0]) - a1.eval(&[0.0]);
        let expect = c3 + c1;
        assert!((got3 - expect).norm() < 1e-12, "{got3} vs {expect}");
    }
}
