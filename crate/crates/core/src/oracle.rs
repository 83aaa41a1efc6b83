//! Test-only independent oracles. Compiled under the `test-oracles`
//! feature, which the crate's own test builds enable; nothing here is part
//! of the production surface and nothing here may call into the closed
//! forms it is used to check.

use num_complex::Complex64 as C64;

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance eps.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, eps: f64) -> C64 {
    fn rec(
        f: &dyn Fn(f64) -> C64,
        a: f64,
        b: f64,
        fa: C64,
        fb: C64,
        fm: C64,
        whole: C64,
        eps: f64,
        depth: u32,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let s2 = left + right;
        if depth == 0 || (s2 - whole).norm() < 15.0 * eps {
            s2 + (s2 - whole) / 15.0
        } else {
            rec(f, a, m, fa, fm, flm, left, eps / 2.0, depth - 1)
                + rec(f, m, b, fm, fb, frm, right, eps / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fb, fm, whole, eps, 60)
}

/// Numerical value of the defining trace contour integral at x_n = 0+:
/// the integral of xi^k prod_i (xi - p_i)^{-1} over the closed contour
/// made of the segment [-D, D] and the upper semicircular arc |xi| = D.
/// Once D encloses every upper pole the value is D-independent, which the
/// callers use as a self-check; nothing here touches the residue closed
/// forms being validated.
pub fn trace_integral_quadrature(poles: &[C64], k: u8, cut: f64) -> C64 {
    let f = |x: C64| -> C64 {
        let mut den = C64::new(1.0, 0.0);
        for &p in poles {
            den *= x - p;
        }
        let num = if k == 0 { C64::new(1.0, 0.0) } else { x };
        num / den
    };
    // segment, split at the pole real parts
    let mut cuts: Vec<f64> = vec![-cut, 0.0, cut];
    for p in poles {
        if p.re.abs() < cut {
            cuts.push(p.re);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = C64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let g = |t: f64| f(C64::new(t, 0.0));
        total += adaptive_simpson(&g, w[0], w[1], 1e-13);
    }
    // arc xi = cut e^{i theta}, theta from 0 to pi
    let arc = |theta: f64| -> C64 {
        let z = C64::from_polar(cut, theta);
        f(z) * C64::new(0.0, 1.0) * z
    };
    total + adaptive_simpson(&arc, 0.0, std::f64::consts::PI, 1e-13)
}
