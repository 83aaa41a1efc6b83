//! Exact parametrix recursion for a second-order symbol p2 + h p1.
//!
//! Seeking q = q_{-2} + h q_{-3} + h^2 q_{-4} + ... with q_{-2} = 1/p2,
//! the h^s coefficient of the composition expansion
//!   q o p = sum 1/(alpha! i^|alpha|) d_xi^alpha q_{-k} d_x^alpha p_j
//!           * h^{(k-2)+(2-j)+|alpha|}
//! must vanish for s >= 1; solving for the highest term gives each
//! q_{-s-2} as a rational symbol S/p2^nu. The recursion tracks the claimed
//! structure: after cancellation, deg_xi S <= 3 nu - 6 and the denominator
//! power is at most 2 nu - 3.

use super::poly::{grat, GaussianRational, Poly, RationalSymbol};
use crate::error::{Error, Result};
use num::{BigInt, BigRational, One, Zero};
use serde::Serialize;

const MAX_DEPTH: usize = 8;
const TERM_CAP: usize = 500_000;

/// Multi-indices alpha in `dims` variables with |alpha| = weight.
fn multi_indices(dims: usize, weight: usize) -> Vec<Vec<u32>> {
    if dims == 0 {
        return if weight == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for head in 0..=weight {
        for mut tail in multi_indices(dims - 1, weight - head) {
            let mut alpha = vec![head as u32];
            alpha.append(&mut tail);
            out.push(alpha);
        }
    }
    out
}

fn factorial(n: u32) -> BigRational {
    let mut f = BigInt::one();
    for i in 2..=n as u64 {
        f *= BigInt::from(i);
    }
    BigRational::from(f)
}

/// (-i)^w / alpha!  — the 1/(alpha! i^{|alpha|}) prefactor.
fn alpha_coefficient(alpha: &[u32]) -> GaussianRational {
    let w: u32 = alpha.iter().sum();
    let minus_i_pow = match w % 4 {
        0 => grat(1, 0),
        1 => grat(0, -1),
        2 => grat(-1, 0),
        _ => grat(0, 1),
    };
    let mut fact = BigRational::one();
    for &a in alpha {
        fact *= factorial(a);
    }
    minus_i_pow * GaussianRational::new(fact.recip(), BigRational::zero())
}

fn diff_alpha_xi(r: &RationalSymbol, alpha: &[u32], dims: &[u8], p2: &Poly) -> RationalSymbol {
    let mut out = r.clone();
    for (slot, &count) in alpha.iter().enumerate() {
        for _ in 0..count {
            out = out.diff_xi(dims[slot], p2);
        }
    }
    out
}

fn diff_alpha_x(p: &Poly, alpha: &[u32], dims: &[u8]) -> Poly {
    let mut out = p.clone();
    for (slot, &count) in alpha.iter().enumerate() {
        for _ in 0..count {
            // x-variables are paired with the xi slots: Xi(i) <-> X(i)
            out = out.diff_x(dims[slot]);
        }
    }
    out
}

/// The terms [q_{-2}, ..., q_{-2-depth}] of the parametrix expansion,
/// computed exactly. Each returned symbol is reduced (common p2 factors
/// cancelled).
pub fn parametrix_recursion(p2: &Poly, p1: &Poly, depth: usize) -> Result<Vec<RationalSymbol>> {
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge(depth, MAX_DEPTH));
    }
    assert!(
        !p2.is_zero() && p2.xi_degree() == 2,
        "p2 must have a nonzero degree-2 leading part"
    );
    let dims = {
        let mut d = p2.xi_dims();
        d.extend(p1.xi_dims());
        d.sort_unstable();
        d.dedup();
        if d.is_empty() {
            vec![0]
        } else {
            d
        }
    };

    let mut terms: Vec<RationalSymbol> = vec![RationalSymbol::one_over_p2()];
    for nu in 1..=depth {
        // q_{-nu-2} = -(1/p2) * sum over k = 2..=nu+1, j in {1,2},
        // |alpha| = nu - k + j  of the composition terms.
        let mut acc = RationalSymbol::zero();
        for k in 2..=nu + 1 {
            let q_k = &terms[k - 2];
            if q_k.is_zero() {
                continue;
            }
            for j in [1usize, 2usize] {
                let p_j = if j == 1 { p1 } else { p2 };
                if p_j.is_zero() {
                    continue;
                }
                let Some(weight) = (nu + j).checked_sub(k) else {
                    continue;
                };
                if j == 2 && weight == 0 {
                    continue; // that is the q_{-nu-2} p2 term being solved for
                }
                for alpha in multi_indices(dims.len(), weight) {
                    let dpj = diff_alpha_x(p_j, &alpha, &dims);
                    if dpj.is_zero() {
                        continue;
                    }
                    let dq = diff_alpha_xi(q_k, &alpha, &dims, p2);
                    if dq.is_zero() {
                        continue;
                    }
                    let contrib = dq.mul_poly(&dpj).scale(&alpha_coefficient(&alpha));
                    acc = acc.add(&contrib, p2);
                    if acc.numerator.term_count() > TERM_CAP {
                        return Err(Error::SymbolicOverflow(
                            acc.numerator.term_count(),
                            TERM_CAP,
                        ));
                    }
                }
            }
        }
        let next = acc.scale(&grat(-1, 0)).div_p2().reduced(p2);
        terms.push(next);
    }
    Ok(terms)
}

/// The h^s coefficient of the composition expansion q o p for the given
/// terms; identically zero for 1 <= s <= depth when the terms come from
/// `parametrix_recursion`, and 1 at s = 0.
pub fn composition_coefficient(
    terms: &[RationalSymbol],
    p2: &Poly,
    p1: &Poly,
    s: usize,
) -> RationalSymbol {
    let dims = {
        let mut d = p2.xi_dims();
        d.extend(p1.xi_dims());
        d.sort_unstable();
        d.dedup();
        if d.is_empty() {
            vec![0]
        } else {
            d
        }
    };
    let mut acc = RationalSymbol::zero();
    for k in 2..=s + 2 {
        let Some(q_k) = terms.get(k - 2) else { continue };
        if q_k.is_zero() {
            continue;
        }
        for j in [1usize, 2usize] {
            let p_j = if j == 1 { p1 } else { p2 };
            if p_j.is_zero() {
                continue;
            }
            let Some(weight) = (s + j).checked_sub(k) else {
                continue;
            };
            for alpha in multi_indices(dims.len(), weight) {
                let dpj = diff_alpha_x(p_j, &alpha, &dims);
                if dpj.is_zero() {
                    continue;
                }
                let dq = diff_alpha_xi(q_k, &alpha, &dims, p2);
                let contrib = dq.mul_poly(&dpj).scale(&alpha_coefficient(&alpha));
                acc = acc.add(&contrib, p2);
            }
        }
    }
    acc.reduced(p2)
}

/// True iff the rational symbol equals the constant 1.
pub fn symbol_is_one(r: &RationalSymbol, p2: &Poly) -> bool {
    r.numerator == p2.pow(r.denominator_power)
}

/// One row of the structure report for q_{-nu}.
#[derive(Debug, Clone, Serialize)]
pub struct StructureRow {
    pub nu: usize,
    pub degree: usize,
    pub denom_power: usize,
    pub pass: bool,
}

/// Checks the claimed shape S_{3nu-6} / p2^{2nu-3} of every term (after
/// cancellation of common p2 factors) and reports degrees and powers.
pub fn verify_parametrix_structure(terms: &[RationalSymbol]) -> Result<Vec<StructureRow>> {
    let mut rows = Vec::with_capacity(terms.len());
    let mut violation: Option<Error> = None;
    for (idx, term) in terms.iter().enumerate() {
        let nu = idx + 2;
        let degree = term.numerator.xi_degree();
        let power = term.denominator_power as usize;
        let degree_bound = 3 * nu - 6;
        let power_bound = 2 * nu - 3;
        let pass = degree <= degree_bound && power <= power_bound;
        if !pass && violation.is_none() {
            violation = Some(Error::StructureViolation {
                nu,
                degree,
                power,
                degree_bound,
                power_bound,
            });
        }
        rows.push(StructureRow {
            nu,
            degree,
            denom_power: power,
            pass,
        });
    }
    match violation {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}
