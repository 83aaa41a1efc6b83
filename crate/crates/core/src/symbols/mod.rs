//! Semiclassical symbol machinery on the boundary: characteristic roots
//! of the two principal polynomials, the residue trace kernels, the 2x2
//! trace system and its ellipticity margin, and the exact parametrix
//! recursion.
//!
//! The outer polynomial is xi_n^2 + R(x, xi') - mu, the inner one is
//! a(x)(xi_n^2 + R(x, xi')) - mu. Ellipticity puts one root of each in
//! each open half plane; all boundary formulas live off those roots.

mod parametrix;
mod poly;

pub use parametrix::{
    composition_coefficient, parametrix_recursion, symbol_is_one, verify_parametrix_structure,
    StructureRow,
};
pub use poly::{Poly, RationalSymbol, Var};

use crate::error::{Error, Result};
use crate::problem::TransmissionProblem;
use num_complex::Complex64 as C64;

const REAL_ROOT_TOL: f64 = 1e-12;

/// Characteristic roots at one boundary phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRoots {
    /// Roots of xi_n^2 + R - mu, Im rho1 > 0 > Im rho2.
    pub rho1: C64,
    pub rho2: C64,
    /// Roots of a(xi_n^2 + R) - mu, Im lam1 > 0 > Im lam2.
    pub lam1: C64,
    pub lam2: C64,
    pub at: RootContext,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootContext {
    pub xi_prime: f64,
    pub mu: C64,
}

impl RootContext {
    /// Japanese bracket <xi'> = (1 + |xi'|^2)^{1/2}.
    pub fn xi_bracket_sq(&self) -> f64 {
        1.0 + self.xi_prime * self.xi_prime
    }
}

fn order_by_imag(root: C64, what: &str) -> Result<(C64, C64)> {
    // complex sqrt then explicit ordering; the principal branch alone
    // mis-orders the pair for some mu.
    if root.im.abs() < REAL_ROOT_TOL * root.norm().max(1.0) {
        return Err(Error::RealRoot(format!(
            "{what}: root {root} has |Im| below tolerance"
        )));
    }
    if root.im > 0.0 {
        Ok((root, -root))
    } else {
        Ok((-root, root))
    }
}

/// Roots of xi_n^2 + R - mu as (rho1, rho2) = (+/-)sqrt(mu - R) with
/// Im rho1 > 0.
pub fn roots_outer(r_val: f64, mu: C64) -> Result<(C64, C64)> {
    debug_assert!(r_val >= 0.0);
    order_by_imag((mu - r_val).sqrt(), "outer")
}

/// Roots of a(xi_n^2 + R) - mu as (lam1, lam2) = (+/-)sqrt(mu/a - R) with
/// Im lam1 > 0.
pub fn roots_inner(a_val: C64, r_val: f64, mu: C64) -> Result<(C64, C64)> {
    if a_val.norm() == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    order_by_imag((mu / a_val - r_val).sqrt(), "inner")
}

/// Both root pairs for a problem's coefficients at a boundary point.
pub fn symbol_roots(a_val: C64, r_val: f64, mu: C64, xi_prime: f64) -> Result<SymbolRoots> {
    let (rho1, rho2) = roots_outer(r_val, mu)?;
    let (lam1, lam2) = roots_inner(a_val, r_val, mu)?;
    Ok(SymbolRoots {
        rho1,
        rho2,
        lam1,
        lam2,
        at: RootContext { xi_prime, mu },
    })
}

/// Boundary value at x_n = 0+ of the oscillatory integral
/// int e^{i x_n xi/h} xi^k / ((xi - rho1)(xi - rho2)) d xi, k in {0, 1},
/// closed in the upper half plane: 2 i pi rho1^k / (rho1 - rho2).
pub fn trace_kernel2(rho1: C64, rho2: C64, k: u8) -> Result<C64> {
    debug_assert!(k <= 1);
    if rho1.im <= 0.0 || rho2.im >= 0.0 {
        return Err(Error::WrongHalfPlane(format!(
            "trace_kernel2 needs Im rho1 > 0 > Im rho2, got ({rho1}, {rho2})"
        )));
    }
    let two_i_pi = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let num = if k == 0 { C64::new(1.0, 0.0) } else { rho1 };
    Ok(two_i_pi * num / (rho1 - rho2))
}

/// Same boundary value for the four-pole kernel
/// xi^k / ((xi - lam1)(xi - lam2)(xi - rho1)(xi - rho2)); the closed form
/// 2 i pi A_k stays finite at the confluent point lam1 = rho1.
pub fn trace_kernel4(lam1: C64, lam2: C64, rho1: C64, rho2: C64, k: u8) -> Result<C64> {
    debug_assert!(k <= 1);
    if lam1.im <= 0.0 || lam2.im >= 0.0 || rho1.im <= 0.0 || rho2.im >= 0.0 {
        return Err(Error::WrongHalfPlane(format!(
            "trace_kernel4 needs Im lam1, Im rho1 > 0 > Im lam2, Im rho2, got ({lam1}, {lam2}, {rho1}, {rho2})"
        )));
    }
    let two_i_pi = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let num = if k == 0 {
        rho2 - rho1 + lam2 - lam1
    } else {
        lam2 * rho2 - lam1 * rho1
    };
    let den = (lam1 - lam2) * (lam1 - rho2) * (rho1 - lam2) * (rho1 - rho2);
    Ok(two_i_pi * num / den)
}

/// The 2x2 principal-symbol system acting on (gamma0, gamma1):
/// row 1 from the v-equation trace relation, row 2 from the eliminated
/// u-equation relation. Its determinant is the reduced scalar symbol.
#[derive(Debug, Clone, Copy)]
pub struct TraceSymbolSystem {
    /// Rows act on the vector (gamma0, gamma1).
    pub matrix: [[C64; 2]; 2],
    pub determinant: C64,
    /// (rho2 - rho1)(lam1 - rho2)
    pub reduced_symbol: C64,
}

pub fn trace_symbol_system(roots: &SymbolRoots) -> TraceSymbolSystem {
    let SymbolRoots {
        rho1,
        rho2,
        lam1,
        lam2,
        ..
    } = *roots;
    let row1 = [C64::new(1.0, 0.0), rho2];
    let row2 = [lam2 - lam1 + rho2 - rho1, rho2 * lam2 - rho1 * lam1];
    let det = row1[0] * row2[1] - row1[1] * row2[0];
    TraceSymbolSystem {
        matrix: [row1, row2],
        determinant: det,
        reduced_symbol: (rho2 - rho1) * (lam1 - rho2),
    }
}

/// Principal-order solve of the boundary system:
/// gamma1 = g7 / ((rho2 - rho1)(lam1 - rho2)), gamma0 = g2 - rho2 gamma1.
/// Returns (gamma1, gamma0).
pub fn boundary_trace_solve(roots: &SymbolRoots, g2_slot: C64, g7_slot: C64) -> Result<(C64, C64)> {
    let sym = (roots.rho2 - roots.rho1) * (roots.lam1 - roots.rho2);
    let threshold = 1e-10 * roots.at.xi_bracket_sq();
    if sym.norm() < threshold {
        return Err(Error::NotElliptic(sym.norm(), threshold));
    }
    let gamma1 = g7_slot / sym;
    let gamma0 = g2_slot - roots.rho2 * gamma1;
    Ok((gamma1, gamma0))
}

/// Minimum over a tangential frequency grid of
/// |(rho2 - rho1)(lam1 - rho2)| / <xi'>^2, sampled over boundary points of
/// the problem geometry.
pub fn ellipticity_margin(
    problem: &TransmissionProblem,
    mu: C64,
    xi_grid: &[f64],
) -> Result<f64> {
    assert!(!xi_grid.is_empty(), "xi grid must be nonempty");
    let boundary: Vec<Vec<f64>> = match problem.geometry {
        crate::problem::Geometry::Interval { a, b } => vec![vec![a], vec![b]],
        crate::problem::Geometry::Disk { radius } => (0..16)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / 16.0;
                vec![radius * th.cos(), radius * th.sin()]
            })
            .collect(),
        crate::problem::Geometry::HalfSpaceModel => vec![vec![0.0, 0.0]],
    };
    let mut margin = f64::INFINITY;
    for x in &boundary {
        let n = problem.index.n_principal(x);
        let a_val = 1.0 / n;
        for &xi in xi_grid {
            let r_val = xi * xi;
            let roots = symbol_roots(a_val, r_val, mu, xi)?;
            let sym = (roots.rho2 - roots.rho1) * (roots.lam1 - roots.rho2);
            margin = margin.min(sym.norm() / roots.at.xi_bracket_sq());
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::oracle::trace_integral_quadrature;

    const I: C64 = C64::new(0.0, 1.0);

    fn quadrature_kernel(poles: &[C64], k: u8, cut: f64) -> C64 {
        trace_integral_quadrature(poles, k, cut)
    }

    #[test]
    fn trace_kernel2_examples() {
        // (i, -i), k = 0: the arctangent integral, value pi
        let v = trace_kernel2(I, -I, 0).unwrap();
        assert!((v - C64::new(std::f64::consts::PI, 0.0)).norm() < 1e-14);
        // (2i, -2i), k = 1: 2 i pi (2i)/(4i) = i pi
        let v = trace_kernel2(2.0 * I, -2.0 * I, 1).unwrap();
        assert!((v - I * std::f64::consts::PI).norm() < 1e-14);
        // (1+i, 1-i), k = 0: 2 i pi / (2i) = pi; cross-check by quadrature
        let p1 = C64::new(1.0, 1.0);
        let p2 = C64::new(1.0, -1.0);
        let v = trace_kernel2(p1, p2, 0).unwrap();
        assert!((v - C64::new(std::f64::consts::PI, 0.0)).norm() < 1e-12);
        let q = quadrature_kernel(&[p1, p2], 0, 50.0);
        assert!((v - q).norm() / v.norm() < 1e-9);
    }

    #[test]
    fn trace_kernel4_examples() {
        // (i, -i, 2i, -2i), k = 0 -> pi/6
        let v = trace_kernel4(I, -I, 2.0 * I, -2.0 * I, 0).unwrap();
        assert!((v - C64::new(std::f64::consts::PI / 6.0, 0.0)).norm() < 1e-14);
        // confluent case lam = rho: value equals the limit of the generic form
        let v_conf = trace_kernel4(I, -I, I, -I, 0).unwrap();
        let mut prev = C64::new(f64::NAN, 0.0);
        for &eps in &[1e-3, 1e-5, 1e-7] {
            let lam1 = I * (1.0 + eps);
            prev = trace_kernel4(lam1, -lam1, I, -I, 0).unwrap();
        }
        assert!((v_conf - prev).norm() < 1e-6);
        // k = 1 antisymmetric example vanishes
        let v = trace_kernel4(I, -I, 2.0 * I, -2.0 * I, 1).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn kernels_match_quadrature_on_random_tuples() {
        // spot check here (the full 10^3-tuple sweep incl. near-confluent
        // tuples runs in the acceptance suite)
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut upper =
            |rng: &mut ChaCha8Rng| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..2.0));
        for trial in 0..60 {
            let rho1 = upper(&mut rng);
            let rho2 = -upper(&mut rng);
            let lam1 = if trial % 20 == 7 {
                rho1 + C64::new(1e-7, 1e-7) // near-confluent
            } else {
                upper(&mut rng)
            };
            let lam2 = -upper(&mut rng);
            let k = (trial % 2) as u8;

            let v2 = trace_kernel2(rho1, rho2, k).unwrap();
            let q2 = quadrature_kernel(&[rho1, rho2], k, 50.0);
            assert!(
                (v2 - q2).norm() / v2.norm().max(1e-12) < 1e-8,
                "kernel2 trial {trial}: {v2} vs {q2}"
            );

            let v4 = trace_kernel4(lam1, lam2, rho1, rho2, k).unwrap();
            let q4 = quadrature_kernel(&[lam1, lam2, rho1, rho2], k, 50.0);
            assert!(
                (v4 - q4).norm() / v4.norm().max(1e-9) < 1e-8,
                "kernel4 trial {trial} k={k}: {v4} vs {q4}"
            );
        }
    }

    #[test]
    fn kernel4_swap_symmetry_k0() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let lam1 = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0));
            let lam2 = C64::new(rng.gen_range(-2.0..2.0), -rng.gen_range(0.1..2.0));
            let rho1 = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0));
            let rho2 = C64::new(rng.gen_range(-2.0..2.0), -rng.gen_range(0.1..2.0));
            let a = trace_kernel4(lam1, lam2, rho1, rho2, 0).unwrap();
            let b = trace_kernel4(rho1, rho2, lam1, lam2, 0).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn root_sign_invariant_random() {
        // 10^5 random admissible (R, mu, a) samples
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0usize;
        while checked < 100_000 {
            let r_val: f64 = rng.gen_range(0.0..25.0);
            let mu = C64::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let a_val = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if a_val.norm() < 0.1 {
                continue;
            }
            // skip non-elliptic samples (mu on [R, inf) or mu/a - R real)
            let Ok((rho1, rho2)) = roots_outer(r_val, mu) else {
                continue;
            };
            let Ok((lam1, lam2)) = roots_inner(a_val, r_val, mu) else {
                continue;
            };
            assert!(rho1.im > 0.0 && rho2.im < 0.0 && lam1.im > 0.0 && lam2.im < 0.0);
            assert!((rho1 + rho2).norm() < 1e-12);
            assert!((lam1 + lam2).norm() < 1e-12);
            // Vieta: product of roots equals the constant term R - mu
            // (resp. R - mu/a)
            let res = rho1 * rho2 - (C64::new(r_val, 0.0) - mu);
            assert!(res.norm() <= 1e-12 * (r_val + mu.norm()).max(1.0));
            let res = lam1 * lam2 - (C64::new(r_val, 0.0) - mu / a_val);
            assert!(res.norm() <= 1e-12 * (r_val + (mu / a_val).norm()).max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn roots_examples() {
        let (r1, r2) = roots_outer(0.0, C64::new(-1.0, 0.0)).unwrap();
        assert!((r1 - I).norm() < 1e-15 && (r2 + I).norm() < 1e-15);
        let (r1, r2) = roots_outer(3.0, C64::new(-1.0, 0.0)).unwrap();
        assert!((r1 - 2.0 * I).norm() < 1e-15 && (r2 + 2.0 * I).norm() < 1e-15);
        let (r1, _) = roots_outer(0.0, I).unwrap();
        let expect = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((r1 - expect).norm() < 1e-15);

        let (l1, l2) = roots_inner(C64::new(1.0, 0.0), 0.0, C64::new(-1.0, 0.0)).unwrap();
        assert!((l1 - I).norm() < 1e-15 && (l2 + I).norm() < 1e-15);
        let (l1, _) = roots_inner(C64::new(0.25, 0.0), 0.0, C64::new(-1.0, 0.0)).unwrap();
        assert!((l1 - 2.0 * I).norm() < 1e-15);
        // residual oracle for a complex leading coefficient
        let a = C64::new(1.0, 1.0);
        let mu = C64::new(-1.0, 0.0);
        let (l1, l2) = roots_inner(a, 1.0, mu).unwrap();
        for l in [l1, l2] {
            let res = a * (l * l + 1.0) - mu;
            assert!(res.norm() < 1e-12);
        }
        // ellipticity violation: mu on the real ray [R, inf)
        assert!(matches!(
            roots_outer(2.0, C64::new(3.0, 0.0)),
            Err(Error::RealRoot(_))
        ));
        assert!(matches!(
            roots_inner(C64::new(0.0, 0.0), 0.0, I),
            Err(Error::ZeroLeadingCoefficient)
        ));
    }

    #[test]
    fn boundary_solve_example_and_consistency() {
        // lam = +/- i, rho = +/- 2i: gamma1 = 1/12, gamma0 = i/6
        let roots = SymbolRoots {
            rho1: 2.0 * I,
            rho2: -2.0 * I,
            lam1: I,
            lam2: -I,
            at: RootContext {
                xi_prime: 0.0,
                mu: C64::new(-1.0, 0.0),
            },
        };
        let (g1, g0) = boundary_trace_solve(&roots, C64::new(0.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!((g1 - C64::new(1.0 / 12.0, 0.0)).norm() < 1e-15);
        assert!((g0 - I / 6.0).norm() < 1e-15);
        // zero data
        let (g1, g0) = boundary_trace_solve(&roots, C64::new(0.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert!(g1.norm() == 0.0 && g0.norm() == 0.0);
        // degenerate rho1 = rho2 forced
        let degenerate = SymbolRoots {
            rho1: I * 1e-14,
            rho2: -I * 1e-14,
            lam1: I,
            lam2: -I,
            at: RootContext {
                xi_prime: 0.0,
                mu: C64::new(-1.0, 0.0),
            },
        };
        assert!(matches!(
            boundary_trace_solve(&degenerate, C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Err(Error::NotElliptic(_, _))
        ));
    }

    #[test]
    fn boundary_solve_substitutes_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let roots = symbol_roots(
                C64::new(rng.gen_range(0.2..2.0), rng.gen_range(-0.5..0.5)),
                rng.gen_range(0.0..9.0),
                C64::new(rng.gen_range(-3.0..-0.5), rng.gen_range(-1.0..1.0)),
                rng.gen_range(-3.0..3.0),
            );
            let Ok(roots) = roots else { continue };
            let g2 = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let g7 = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let Ok((gamma1, gamma0)) = boundary_trace_solve(&roots, g2, g7) else {
                continue;
            };
            let sys = trace_symbol_system(&roots);
            // row 1: gamma0 + rho2 gamma1 = g2
            let r1 = sys.matrix[0][0] * gamma0 + sys.matrix[0][1] * gamma1;
            assert!((r1 - g2).norm() <= 1e-12 * g2.norm().max(1.0));
            // row 2 reproduces g6 = g7 + (lam2-lam1+rho2-rho1) g2
            let g6 = g7 + (roots.lam2 - roots.lam1 + roots.rho2 - roots.rho1) * g2;
            let r2 = sys.matrix[1][0] * gamma0 + sys.matrix[1][1] * gamma1;
            assert!((r2 - g6).norm() <= 1e-11 * g6.norm().max(1.0));
        }
    }

    #[test]
    fn trace_system_determinant_is_reduced_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let Ok(roots) = symbol_roots(
                C64::new(rng.gen_range(0.2..2.0), rng.gen_range(-0.5..0.5)),
                rng.gen_range(0.0..9.0),
                C64::new(rng.gen_range(-3.0..-0.5), rng.gen_range(-1.0..1.0)),
                0.0,
            ) else {
                continue;
            };
            let sys = trace_symbol_system(&roots);
            assert!(
                (sys.determinant - sys.reduced_symbol).norm()
                    <= 1e-12 * sys.reduced_symbol.norm().max(1.0)
            );
        }
    }

    #[test]
    fn margin_for_constant_four() {
        use crate::problem::{build_problem, ProblemConfig};
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let mu = C64::new(-1.0, 0.0);
        // single point xi' = 0: roots (+/-i, +/-2i), |(rho2-rho1)(lam1-rho2)| = 2*3 = 6
        let m0 = ellipticity_margin(&p, mu, &[0.0]).unwrap();
        assert!((m0 - 6.0).abs() < 1e-12);
        // on the grid the ratio 2(sqrt((4+R)/(1+R)) + 1) decreases in R,
        // so the minimum sits at xi' = +/-10 (R = 100)
        let grid: Vec<f64> = (0..=400).map(|i| -10.0 + i as f64 * 0.05).collect();
        let m = ellipticity_margin(&p, mu, &grid).unwrap();
        assert!(m > 0.0);
        let expect = 2.0 * ((104.0_f64 / 101.0).sqrt() + 1.0);
        assert!((m - expect).abs() < 1e-12, "margin {m} vs {expect}");
        // mu on the real ray with R hitting it -> RealRoot
        let bad = ellipticity_margin(&p, C64::new(4.0, 0.0), &grid);
        assert!(matches!(bad, Err(Error::RealRoot(_))));
    }
}
