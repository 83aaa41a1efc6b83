//! Matrix-level verification of the roots-of-unity operator algebra that
//! powers the spectral counting argument: the product factorization
//! (1 - z^p S^p) = prod_j (1 - w_j z S), the resolvent combination
//! p z^{p-1} T_{z^p} = sum_k w_k S_{w_k z} with T = S^p and
//! T_l = T (I - l T)^{-1}, the Hilbert-Schmidt eigenvalue bound
//! sum |mu_i|^2 <= ||T||_F^2, the counting-chain inequality, and the
//! kernel-stabilization behaviour at eigenvalue configurations l = w_j z.

use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, condition_estimate, frobenius_norm, CMat};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const MAX_SIZE: usize = 64;
const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct OperatorAlgebraInstance {
    pub s: CMat,
    pub p: u32,
    pub z: C64,
}

/// The p-th roots of unity w_j = e^{2 pi i j / p}, j = 1..=p.
pub fn roots_of_unity(p: u32) -> Vec<C64> {
    (1..=p)
        .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / p as f64))
        .collect()
}

impl OperatorAlgebraInstance {
    /// Seeded random instance with ||z S|| kept below 1 so every factor
    /// (I - w_j z S) stays well conditioned.
    pub fn random(seed: u64, size: usize, p: u32) -> Self {
        assert!(size <= MAX_SIZE);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = CMat::from_fn(size, size, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let scale = crate::linalg::sigma_max(&s);
        s /= C64::new(scale, 0.0);
        let z = C64::from_polar(rng.gen_range(0.2..0.8), rng.gen_range(0.0..std::f64::consts::TAU));
        OperatorAlgebraInstance { s, p, z }
    }

    fn check_invariants(&self) -> Result<()> {
        let n = self.s.nrows();
        let id = CMat::identity(n, n);
        for w in roots_of_unity(self.p) {
            let factor = &id - &self.s * (w * self.z);
            let cond = condition_estimate(&factor);
            if !cond.is_finite() || cond > CONDITION_CAP {
                return Err(Error::IllConditioned(cond));
            }
        }
        Ok(())
    }
}

fn matrix_power(s: &CMat, p: u32) -> CMat {
    let n = s.nrows();
    let mut out = CMat::identity(n, n);
    for _ in 0..p {
        out = &out * s;
    }
    out
}

/// Error of (1 - z^p S^p) = prod_j (1 - w_j z S), elementwise max,
/// required to be <= 1e-10 (1 + ||S||)^p.
pub fn check_product_identity(inst: &OperatorAlgebraInstance) -> Result<f64> {
    inst.check_invariants()?;
    let n = inst.s.nrows();
    let id = CMat::identity(n, n);
    let zp = inst.z.powu(inst.p);
    let lhs = &id - matrix_power(&inst.s, inst.p) * zp;
    let mut rhs = id.clone();
    for w in roots_of_unity(inst.p) {
        rhs = rhs * (&id - &inst.s * (w * inst.z));
    }
    let err = (&lhs - &rhs).iter().map(|d| d.norm()).fold(0.0, f64::max);
    Ok(err)
}

/// Error of p z^{p-1} T_{z^p} = sum_k w_k S_{w_k z}, with
/// T = S^p, X_l = X (I - l X)^{-1}; scaled max elementwise.
pub fn check_resolvent_combination(inst: &OperatorAlgebraInstance) -> Result<f64> {
    inst.check_invariants()?;
    let n = inst.s.nrows();
    let id = CMat::identity(n, n);
    let t = matrix_power(&inst.s, inst.p);
    let zp = inst.z.powu(inst.p);
    let tz = resolvent_transform(&t, zp).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let lhs = tz * (inst.z.powu(inst.p - 1) * inst.p as f64);
    let mut rhs = CMat::zeros(n, n);
    for w in roots_of_unity(inst.p) {
        let sw = resolvent_transform(&inst.s, w * inst.z)
            .ok_or(Error::IllConditioned(f64::INFINITY))?;
        rhs += sw * w;
    }
    let scale = 1.0 + frobenius_norm(&lhs);
    let err = (&lhs - &rhs).iter().map(|d| d.norm()).fold(0.0, f64::max) / scale;
    let _ = id;
    Ok(err)
}

/// X_l = X (I - l X)^{-1}.
pub fn resolvent_transform(x: &CMat, lambda: C64) -> Option<CMat> {
    let n = x.nrows();
    let id = CMat::identity(n, n);
    let inv = (&id - x * lambda).try_inverse()?;
    Some(x * inv)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HsReport {
    pub eigen_sum_sq: f64,
    pub frobenius_sq: f64,
    pub pass: bool,
}

/// Hilbert-Schmidt shadow of the Agmon bound: sum |mu_i|^2 <= ||T||_F^2
/// for the eigenvalues mu_i of T (with a 1e-8 slack for the extraction).
pub fn hs_eigenvalue_bound(t: &CMat) -> HsReport {
    let eigs = complex_eigenvalues(t);
    let eigen_sum_sq: f64 = eigs.iter().map(|e| e.norm_sqr()).sum();
    let frobenius_sq = frobenius_norm(t).powi(2);
    HsReport {
        eigen_sum_sq,
        frobenius_sq,
        pass: eigen_sum_sq <= frobenius_sq + 1e-8,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Counting-chain inequality: with lambda_j^{-1} the eigenvalues of S and
/// T = S^p, sum_j 1/|lambda_j^p - z^p|^2 <= ||T_{z^p}||_F^2.
pub fn counting_chain_check(s: &CMat, p: u32, z: C64) -> Result<ChainReport> {
    let eigs = complex_eigenvalues(s);
    // eigenvalues of S are 1/lambda_j; drop numerically-zero ones (their
    // lambda_j escapes to infinity and contributes nothing)
    let zp = z.powu(p);
    let mut lhs = 0.0f64;
    for mu in &eigs {
        if mu.norm() < 1e-12 {
            continue;
        }
        let lambda = 1.0 / mu;
        let denom = lambda.powu(p) - zp;
        if denom.norm() < 1e-9 {
            return Err(Error::EigenExtractionUnstable(format!(
                "z^p collides with lambda^p at lambda = {lambda}"
            )));
        }
        lhs += 1.0 / denom.norm_sqr();
    }
    let t = matrix_power(s, p);
    let tz = resolvent_transform(&t, zp).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let rhs = frobenius_norm(&tz).powi(2);
    Ok(ChainReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        pass: lhs <= rhs + 1e-8 * rhs.max(1.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// dim ker (I - z^p S^p)^k for k = 1.. until stabilization
    pub kernel_dims: Vec<usize>,
    pub stabilization_index: usize,
    pub pass: bool,
}

/// Numerical kernel dimension via the singular values below a relative
/// threshold.
pub fn kernel_dimension(m: &CMat, tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-300);
    svd.singular_values.iter().filter(|&&s| s < tol * smax).count()
}

/// Kernel detection at an eigenvalue configuration: whether
/// ker(I - z^p S^p) is nontrivial, and the stabilization index of the
/// kernel chain ker(I - z^p S^p)^k (= the Jordan block size for a
/// constructed single-block instance).
pub fn eigenvalue_form_check(s: &CMat, p: u32, z: C64) -> KernelReport {
    let n = s.nrows();
    let zp = z.powu(p);
    let base = CMat::identity(n, n) - matrix_power(s, p) * zp;
    let mut kernel_dims = Vec::new();
    let mut power = CMat::identity(n, n);
    let mut stab = 0usize;
    for k in 1..=n {
        power = &power * &base;
        let dim = kernel_dimension(&power, 1e-8);
        if let Some(&prev) = kernel_dims.last() {
            if dim == prev {
                stab = k - 1;
                kernel_dims.push(dim);
                break;
            }
        }
        kernel_dims.push(dim);
        if dim == 0 {
            stab = 0;
            break;
        }
        stab = k;
    }
    let pass = !kernel_dims.is_empty();
    KernelReport {
        kernel_dims,
        stabilization_index: stab,
        pass,
    }
}

/// One batch line of the identities check, as emitted in JSON reports.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityBatch {
    pub identity: String,
    pub instances: usize,
    pub max_error: f64,
    pub pass: bool,
}

/// Runs the seeded random batch used by the CLI and the acceptance suite:
/// `count` instances of sizes <= 32 with p cycling 1..=6.
pub fn run_identity_batch(seed: u64, count: usize) -> Result<Vec<IdentityBatch>> {
    let mut prod_err = 0.0f64;
    let mut comb_err = 0.0f64;
    let mut hs_all = true;
    let mut chain_all = true;
    for i in 0..count {
        let p = (i % 6 + 1) as u32;
        let size = 8 + (i % 4) * 8; // 8..32
        let inst = OperatorAlgebraInstance::random(seed.wrapping_add(i as u64), size, p);
        let scale = (1.0 + frobenius_norm(&inst.s)).powi(p as i32);
        prod_err = prod_err.max(check_product_identity(&inst)? / scale);
        comb_err = comb_err.max(check_resolvent_combination(&inst)?);
        if i % 10 == 0 {
            let t = matrix_power(&inst.s, inst.p);
            hs_all &= hs_eigenvalue_bound(&t).pass;
            chain_all &= counting_chain_check(&inst.s, inst.p, inst.z)?.pass;
        }
    }
    Ok(vec![
        IdentityBatch {
            identity: "product_factorization".into(),
            instances: count,
            max_error: prod_err,
            pass: prod_err <= 1e-10,
        },
        IdentityBatch {
            identity: "resolvent_combination".into(),
            instances: count,
            max_error: comb_err,
            pass: comb_err <= 1e-9,
        },
        IdentityBatch {
            identity: "hs_eigenvalue_bound".into(),
            instances: count / 10 + 1,
            max_error: 0.0,
            pass: hs_all,
        },
        IdentityBatch {
            identity: "counting_chain".into(),
            instances: count / 10 + 1,
            max_error: 0.0,
            pass: chain_all,
        },
    ])
}
