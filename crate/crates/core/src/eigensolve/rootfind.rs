//! Complex root location for analytic functions: argument-principle
//! counting on rectangles, recursive subdivision until roots are
//! isolated, then secant refinement and winding-number multiplicity.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        Rect { re, im }
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    pub fn diameter(&self) -> f64 {
        let dr = self.re.1 - self.re.0;
        let di = self.im.1 - self.im.0;
        (dr * dr + di * di).sqrt()
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }

    fn split(&self) -> [Rect; 2] {
        if self.re.1 - self.re.0 >= self.im.1 - self.im.0 {
            let m = 0.5 * (self.re.0 + self.re.1);
            [
                Rect::new((self.re.0, m), self.im),
                Rect::new((m, self.re.1), self.im),
            ]
        } else {
            let m = 0.5 * (self.im.0 + self.im.1);
            [
                Rect::new(self.re, (self.im.0, m)),
                Rect::new(self.re, (m, self.im.1)),
            ]
        }
    }

    fn boundary_point(&self, t: f64) -> C64 {
        // t in [0,1) runs counterclockwise from the lower-left corner
        let w = self.re.1 - self.re.0;
        let h = self.im.1 - self.im.0;
        let per = 2.0 * (w + h);
        let mut s = t.rem_euclid(1.0) * per;
        if s < w {
            return C64::new(self.re.0 + s, self.im.0);
        }
        s -= w;
        if s < h {
            return C64::new(self.re.1, self.im.0 + s);
        }
        s -= h;
        if s < w {
            return C64::new(self.re.1 - s, self.im.1);
        }
        s -= w;
        C64::new(self.re.0, self.im.1 - s)
    }
}

/// Winding number of f around the rectangle boundary; phase steps are
/// refined until each increment is below pi/2. Returns None when the
/// boundary passes too close to a zero (|f| underflows relative to the
/// sampled scale), signalling the caller to perturb the rectangle.
pub fn winding_on_rect(f: &dyn Fn(C64) -> C64, rect: &Rect, initial: usize) -> Option<i64> {
    let mut n = initial.max(16);
    loop {
        let vals: Vec<C64> = (0..n)
            .map(|j| f(rect.boundary_point(j as f64 / n as f64)))
            .collect();
        let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return None;
        }
        if vals.iter().any(|v| v.norm() < 1e-13 * scale) {
            return None;
        }
        let mut total = 0.0f64;
        let mut ok = true;
        for j in 0..n {
            let a = vals[j];
            let b = vals[(j + 1) % n];
            let d = (b / a).arg();
            if d.abs() > std::f64::consts::FRAC_PI_2 {
                ok = false;
                break;
            }
            total += d;
        }
        if ok {
            return Some((total / (2.0 * std::f64::consts::PI)).round() as i64);
        }
        n *= 2;
        if n > 1 << 17 {
            return None;
        }
    }
}

/// Nudges a rectangle whose boundary sits on a zero.
fn perturbed(rect: &Rect, step: f64) -> Rect {
    Rect::new(
        (rect.re.0 - step, rect.re.1 + step * 1.618),
        (rect.im.0 - step * 0.722, rect.im.1 + step * 1.414),
    )
}

/// All roots of f inside the rectangle, with winding multiplicities:
/// recursive bisection until each sub-rectangle holds one root cluster of
/// diameter below `isolate`, then secant refinement to `tol`.
pub fn roots_in_rect(
    f: &dyn Fn(C64) -> C64,
    rect: &Rect,
    isolate: f64,
    tol: f64,
) -> Vec<(C64, i64)> {
    let mut out: Vec<(C64, i64)> = Vec::new();
    let mut stack = vec![*rect];
    while let Some(r) = stack.pop() {
        let mut rr = r;
        let mut count = None;
        for attempt in 0..6 {
            count = winding_on_rect(f, &rr, 32);
            if count.is_some() {
                break;
            }
            rr = perturbed(&rr, r.diameter() * 1e-4 * (attempt + 1) as f64);
        }
        let Some(count) = count else { continue };
        if count == 0 {
            continue;
        }
        if rr.diameter() > isolate {
            stack.extend(r.split());
            continue;
        }
        // refined root from the cluster center; the cell winding is not a
        // trustworthy multiplicity (a root sitting on a split line shares
        // its turns between adjacent cells), so only the location is kept
        let root = secant_refine(f, rr.center(), rr.diameter(), tol);
        out.push((root, count));
    }
    // merge duplicates found through adjacent/perturbed cells
    out.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    let mut merged: Vec<C64> = Vec::new();
    for (z, _) in out {
        if let Some(&last) = merged.last() {
            if (last - z).norm() < isolate {
                continue;
            }
        }
        merged.push(z);
    }
    // multiplicity from a winding box centered at each merged root; roots
    // of order >= 2 sit in an eps^(1/m) determinant-underflow basin, so
    // they get a Muller polish of f/f' fitted at a safe radius
    merged
        .into_iter()
        .map(|z| {
            let half = 0.75 * isolate;
            let mut rect = Rect::new((z.re - half, z.re + half), (z.im - half, z.im + half));
            let mut m = None;
            for attempt in 0..6 {
                m = winding_on_rect(f, &rect, 64);
                if m.is_some() {
                    break;
                }
                rect = perturbed(&rect, half * 1e-3 * (attempt + 1) as f64);
            }
            let m = m.unwrap_or(1).max(1);
            if m < 2 {
                return (z, m);
            }
            let g = |q: C64| -> Option<C64> {
                let dq = 1e-7 * (1.0 + q.norm());
                let fp = (f(q + dq) - f(q - dq)) / C64::new(2.0 * dq, 0.0);
                let fq = f(q);
                if fp.norm() == 0.0 {
                    return None;
                }
                let u = fq / fp;
                if u.re.is_finite() && u.im.is_finite() {
                    Some(u)
                } else {
                    None
                }
            };
            let mut q = z;
            for radius in [(3.0 * isolate).max(3e-3), 1e-3] {
                if let Some(better) =
                    muller_polish(&g, q, radius).filter(|b| (b - q).norm() < 4.0 * radius)
                {
                    q = better;
                }
            }
            (q, m)
        })
        .collect()
}

/// Root of the quadratic interpolant of g through three points on a
/// circle of the given radius (Muller step). For a determinant zero of
/// order m >= 2, det-based values underflow in a basin of size
/// eps^(1/m) around the root; fitting g = det/det' at a safe radius and
/// intersecting the model recovers the root far below that basin size.
pub fn muller_polish(g: &dyn Fn(C64) -> Option<C64>, center: C64, radius: f64) -> Option<C64> {
    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let xs = [
        center + radius,
        center + radius * w,
        center + radius * w * w,
    ];
    let ys = [g(xs[0])?, g(xs[1])?, g(xs[2])?];
    // quadratic through the three points, in the shifted variable t = x - center
    let ts = [xs[0] - center, xs[1] - center, xs[2] - center];
    // Lagrange to monomial coefficients a t^2 + b t + c
    let mut a = C64::new(0.0, 0.0);
    let mut b = C64::new(0.0, 0.0);
    let mut c = C64::new(0.0, 0.0);
    for i in 0..3 {
        let (t0, t1, t2) = (ts[i], ts[(i + 1) % 3], ts[(i + 2) % 3]);
        let denom = (t0 - t1) * (t0 - t2);
        let scale = ys[i] / denom;
        a += scale;
        b -= scale * (t1 + t2);
        c += scale * t1 * t2;
    }
    // Muller root selection: smaller-magnitude root of a t^2 + b t + c
    let disc = (b * b - 4.0 * a * c).sqrt();
    let d1 = b + disc;
    let d2 = b - disc;
    let den = if d1.norm() >= d2.norm() { d1 } else { d2 };
    if den.norm() == 0.0 {
        return None;
    }
    let t = -2.0 * c / den;
    Some(center + t)
}

/// Secant iteration from a cluster center; falls back to the best seen
/// point. Suitable once a simple root is isolated.
pub fn secant_refine(f: &dyn Fn(C64) -> C64, start: C64, spread: f64, tol: f64) -> C64 {
    let mut x0 = start;
    let mut x1 = start + C64::new(0.37 * spread + tol, 0.21 * spread);
    let mut f0 = f(x0);
    let mut f1 = f(x1);
    let mut best = if f0.norm() < f1.norm() { (x0, f0) } else { (x1, f1) };
    for _ in 0..80 {
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        if !x2.re.is_finite() || !x2.im.is_finite() {
            break;
        }
        let f2 = f(x2);
        if f2.norm() < best.1.norm() {
            best = (x2, f2);
        }
        if (x2 - x1).norm() < tol {
            return x2;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_polynomial_roots_with_multiplicity() {
        let r1 = C64::new(0.5, 0.25);
        let r2 = C64::new(-0.75, -0.5);
        let f = |z: C64| (z - r1).powu(2) * (z - r2) * (z + 3.0);
        let rect = Rect::new((-2.0, 2.0), (-1.5, 1.5));
        let roots = roots_in_rect(&f, &rect, 1e-3, 1e-12);
        assert_eq!(roots.len(), 2, "{roots:?}");
        let find = |target: C64| {
            roots
                .iter()
                .find(|(z, _)| (z - target).norm() < 1e-8)
                .unwrap_or_else(|| panic!("missing {target}"))
        };
        assert_eq!(find(r1).1, 2);
        assert_eq!(find(r2).1, 1);
    }

    #[test]
    fn root_on_initial_boundary_is_still_found() {
        let r = C64::new(0.0, 0.0); // on the rectangle edge
        let f = |z: C64| z - r;
        let rect = Rect::new((0.0, 1.0), (-0.5, 0.5));
        let roots = roots_in_rect(&f, &rect, 1e-3, 1e-12);
        assert_eq!(roots.len(), 1);
        assert!((roots[0].0 - r).norm() < 1e-10);
    }

    #[test]
    fn empty_region_empty_report() {
        let f = |z: C64| z - C64::new(10.0, 10.0);
        let rect = Rect::new((-1.0, 1.0), (-1.0, 1.0));
        assert!(roots_in_rect(&f, &rect, 1e-3, 1e-12).is_empty());
    }

    #[test]
    fn entire_function_roots() {
        // sin(pi z): roots at the integers, all simple
        let f = |z: C64| (std::f64::consts::PI * z).sin();
        let rect = Rect::new((-3.4, 3.4), (-1.0, 1.0));
        let roots = roots_in_rect(&f, &rect, 1e-3, 1e-12);
        assert_eq!(roots.len(), 7);
        for (z, m) in roots {
            assert_eq!(m, 1);
            assert!((z - C64::new(z.re.round(), 0.0)).norm() < 1e-10);
        }
    }
}
