//! Chebyshev–Lobatto collocation pieces: nodes, differentiation matrices,
//! Clenshaw–Curtis weights, and interpolatory weights for weighted
//! measures on folded (radial) grids.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Chebyshev–Lobatto nodes mapped to [a, b], ascending, j = 0..=n.
pub fn lobatto_nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            // x_j = cos(j pi / n) descending on [-1,1]; flip to ascending
            let x = (j as f64 * PI / n as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * (-x)
        })
        .collect()
}

/// First-derivative collocation matrix on the mapped Lobatto nodes.
pub fn diff_matrix(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    let np = n + 1;
    // standard matrix on cos(j pi/n) then flip and scale
    let x: Vec<f64> = (0..np).map(|j| (j as f64 * PI / n as f64).cos()).collect();
    let mut c = vec![1.0; np];
    c[0] = 2.0;
    c[n] = 2.0;
    let mut d = DMatrix::<f64>::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c[i] / c[j] * sign / (x[i] - x[j]);
            }
        }
    }
    for i in 0..np {
        let mut s = 0.0;
        for j in 0..np {
            if j != i {
                s += d[(i, j)];
            }
        }
        d[(i, i)] = -s;
    }
    // nodes were defined through the reflection map t -> -t, so the
    // ascending grid shares indices with the standard descending one and
    // the chain rule contributes the -2/(b-a) factor
    let scale = -2.0 / (b - a);
    let mut out = DMatrix::<f64>::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            out[(i, j)] = scale * d[(i, j)];
        }
    }
    out
}

/// Clenshaw–Curtis quadrature weights on the mapped Lobatto nodes;
/// positive and exactly summing to b - a for smooth integrands.
pub fn clenshaw_curtis_weights(n: usize, a: f64, b: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = j as f64 * PI / n as f64;
        let mut s = 1.0;
        for k in 1..=n / 2 {
            let bk = if 2 * k == n { 1.0 } else { 2.0 };
            s -= bk * (2.0 * k as f64 * theta).cos() / ((4 * k * k - 1) as f64);
        }
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        *wj = cj * s / n as f64;
    }
    // map [-1,1] -> [a,b]; node order does not matter (weights symmetric)
    w.iter().map(|wj| wj * 0.5 * (b - a)).collect()
}

/// Interpolatory quadrature weights on arbitrary nodes for the measure
/// omega(r) dr on [lo, hi], computed by solving the Vandermonde moment
/// system in the Chebyshev basis of the interval (well conditioned for
/// Chebyshev-like nodes). Panics if the system is singular.
pub fn interpolatory_weights(
    nodes: &[f64],
    lo: f64,
    hi: f64,
    omega: &dyn Fn(f64) -> f64,
) -> Vec<f64> {
    let m = nodes.len();
    let map = |r: f64| 2.0 * (r - lo) / (hi - lo) - 1.0;
    let cheb = |k: usize, t: f64| (k as f64 * t.clamp(-1.0, 1.0).acos()).cos();
    // V^T w = moments, V_{jk} = T_k(map(r_j))
    let mut vt = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        for (j, &r) in nodes.iter().enumerate() {
            vt[(k, j)] = cheb(k, map(r));
        }
    }
    // moments by composite Gauss-Legendre (exact beyond the basis degree)
    let moments: Vec<f64> = (0..m)
        .map(|k| gauss_integral(&|r| cheb(k, map(r)) * omega(r), lo, hi, 40 + 4 * m))
        .collect();
    let rhs = nalgebra::DVector::from_vec(moments);
    let w = vt
        .lu()
        .solve(&rhs)
        .expect("interpolatory weight system is singular");
    w.iter().cloned().collect()
}

/// Quadrature weights for the polar measure 2 pi r dr on the positive
/// Lobatto nodes of a folded diameter grid. The moment system uses the
/// even Chebyshev basis T_{2k}(r/R) — the space the folded interpolants
/// actually live in — which keeps the weights positive.
pub fn radial_fold_weights(nodes: &[f64], radius: f64) -> Vec<f64> {
    let m = nodes.len();
    let cheb = |k: usize, t: f64| ((2 * k) as f64 * t.clamp(-1.0, 1.0).acos()).cos();
    let mut vt = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        for (j, &r) in nodes.iter().enumerate() {
            vt[(k, j)] = cheb(k, r / radius);
        }
    }
    let moments: Vec<f64> = (0..m)
        .map(|k| {
            gauss_integral(
                &|r| cheb(k, r / radius) * 2.0 * PI * r,
                0.0,
                radius,
                40 + 8 * m,
            )
        })
        .collect();
    let rhs = nalgebra::DVector::from_vec(moments);
    let w = vt
        .lu()
        .solve(&rhs)
        .expect("radial weight system is singular");
    w.iter().cloned().collect()
}

/// Composite 8-point Gauss-Legendre integral of f over [a, b].
pub fn gauss_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const XS: [f64; 4] = [
        0.18343464249564980,
        0.52553240991632899,
        0.79666647741362674,
        0.96028985649753623,
    ];
    const WS: [f64; 4] = [
        0.36268378337836198,
        0.31370664587788729,
        0.22238103445337447,
        0.10122853629037626,
    ];
    let mut total = 0.0;
    let hp = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * hp;
        let mid = lo + 0.5 * hp;
        let half = 0.5 * hp;
        for i in 0..4 {
            total += WS[i] * half * (f(mid + half * XS[i]) + f(mid - half * XS[i]));
        }
    }
    total
}
