//! Transmission problem definition: geometry, refraction index, derived
//! coefficient fields, the cone C_e and the semiclassical scaling.
//!
//! For an index n(x) the derived fields are m = n - 1, a = 1/(1+m) and
//! V = m/(1+m). A k-dependent index means n = n1 + i n2 / k with real n1,
//! n2; it is re-evaluated with the current k whenever an operator is
//! assembled.

use crate::error::{Error, Result};
use crate::expr::Expr;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type FieldEval = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { a: f64, b: f64 },
    Disk { radius: f64 },
    HalfSpaceModel,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Interval { .. } => 1,
            Geometry::Disk { .. } | Geometry::HalfSpaceModel => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    FixedComplex,
    KDependent,
}

/// Refraction index as supplied evaluators. In `KDependent` mode the two
/// evaluators return the real fields n1 and n2 of n = n1 + i n2/k.
#[derive(Clone)]
pub struct RefractionIndex {
    pub mode: IndexMode,
    n_fixed: Option<FieldEval>,
    n1: Option<FieldEval>,
    n2: Option<FieldEval>,
    pub smoothness_degree: u32,
}

impl fmt::Debug for RefractionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RefractionIndex")
            .field("mode", &self.mode)
            .field("smoothness_degree", &self.smoothness_degree)
            .finish()
    }
}

impl RefractionIndex {
    pub fn fixed(n: FieldEval, smoothness_degree: u32) -> Self {
        RefractionIndex {
            mode: IndexMode::FixedComplex,
            n_fixed: Some(n),
            n1: None,
            n2: None,
            smoothness_degree,
        }
    }

    pub fn fixed_const(n: C64) -> Self {
        Self::fixed(Arc::new(move |_| n), u32::MAX)
    }

    pub fn k_dependent(n1: FieldEval, n2: FieldEval, smoothness_degree: u32) -> Self {
        RefractionIndex {
            mode: IndexMode::KDependent,
            n_fixed: None,
            n1: Some(n1),
            n2: Some(n2),
            smoothness_degree,
        }
    }

    /// Index value at `x` for wavenumber `k`. For the fixed mode `k` is
    /// ignored; for the k-dependent mode n = n1 + i n2/k.
    pub fn n_at(&self, x: &[f64], k: C64) -> C64 {
        match self.mode {
            IndexMode::FixedComplex => (self.n_fixed.as_ref().unwrap())(x),
            IndexMode::KDependent => {
                let n1 = (self.n1.as_ref().unwrap())(x);
                let n2 = (self.n2.as_ref().unwrap())(x);
                n1 + C64::i() * n2 / k
            }
        }
    }

    /// The h -> 0 principal value of the index: n itself for the fixed
    /// mode, n1 for the k-dependent mode.
    pub fn n_principal(&self, x: &[f64]) -> C64 {
        match self.mode {
            IndexMode::FixedComplex => (self.n_fixed.as_ref().unwrap())(x),
            IndexMode::KDependent => (self.n1.as_ref().unwrap())(x),
        }
    }

    pub fn n2_at(&self, x: &[f64]) -> Option<f64> {
        self.n2.as_ref().map(|f| f(x).re)
    }
}

#[derive(Clone)]
pub struct TransmissionProblem {
    pub geometry: Geometry,
    pub index: RefractionIndex,
    /// Width of the declared boundary collar W on which n != 1.
    pub collar_width: f64,
}

impl fmt::Debug for TransmissionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransmissionProblem")
            .field("geometry", &self.geometry)
            .field("index", &self.index)
            .field("collar_width", &self.collar_width)
            .finish()
    }
}

impl TransmissionProblem {
    pub fn m_at(&self, x: &[f64], k: C64) -> C64 {
        self.index.n_at(x, k) - 1.0
    }

    pub fn a_at(&self, x: &[f64], k: C64) -> C64 {
        1.0 / self.index.n_at(x, k)
    }

    pub fn v_at(&self, x: &[f64], k: C64) -> C64 {
        let n = self.index.n_at(x, k);
        (n - 1.0) / n
    }

    /// Principal (h -> 0) contrast field used by the cone and by the
    /// semiclassical symbol checks.
    pub fn m_principal(&self, x: &[f64]) -> C64 {
        self.index.n_principal(x) - 1.0
    }

    /// Sample points covering the closed domain, at least `count` of them.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        match self.geometry {
            Geometry::Interval { a, b } => {
                let n = count.max(2);
                (0..n)
                    .map(|i| vec![a + (b - a) * i as f64 / (n - 1) as f64])
                    .collect()
            }
            Geometry::Disk { radius } => {
                // r x theta product grid, denser angularly near the rim.
                let nr = ((count as f64).sqrt().ceil() as usize).max(2);
                let nt = nr.max(4);
                let mut pts = Vec::with_capacity(nr * nt + 1);
                pts.push(vec![0.0, 0.0]);
                for i in 1..=nr {
                    let r = radius * i as f64 / nr as f64;
                    for j in 0..nt {
                        let th = 2.0 * PI * j as f64 / nt as f64;
                        pts.push(vec![r * th.cos(), r * th.sin()]);
                    }
                }
                pts
            }
            Geometry::HalfSpaceModel => {
                let n = count.max(2);
                (0..n).map(|i| vec![0.0, i as f64 / (n - 1) as f64]).collect()
            }
        }
    }

    /// Sample points inside the boundary collar W.
    pub fn collar_points(&self, count: usize) -> Vec<Vec<f64>> {
        let w = self.collar_width;
        match self.geometry {
            Geometry::Interval { a, b } => {
                let n = (count / 2).max(2);
                let mut pts = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let t = w * i as f64 / (n - 1) as f64;
                    pts.push(vec![a + t]);
                    pts.push(vec![b - t]);
                }
                pts
            }
            Geometry::Disk { radius } => {
                let nr = ((count as f64).sqrt().ceil() as usize).max(2);
                let nt = nr.max(8);
                let mut pts = Vec::with_capacity(nr * nt);
                for i in 0..nr {
                    let r = (radius - w) + w * i as f64 / (nr - 1) as f64;
                    for j in 0..nt {
                        let th = 2.0 * PI * j as f64 / nt as f64;
                        pts.push(vec![r.max(0.0) * th.cos(), r.max(0.0) * th.sin()]);
                    }
                }
                pts
            }
            Geometry::HalfSpaceModel => (0..count.max(2))
                .map(|i| vec![0.0, w * i as f64 / (count.max(2) - 1) as f64])
                .collect(),
        }
    }
}

/// Angular hull of the directions -(1+conj(m(x))), lambda >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeDescription {
    pub is_full_plane: bool,
    /// (theta1, theta2) with theta1 in [0, 2pi) and theta1 <= theta2 <=
    /// theta1 + 2pi; equal angles describe a single ray.
    pub sector: Option<(f64, f64)>,
}

impl ConeDescription {
    /// Whether the normalized angle `phi` (radians) lies in the hull.
    pub fn contains_angle(&self, phi: f64) -> bool {
        if self.is_full_plane {
            return true;
        }
        let Some((t1, t2)) = self.sector else {
            return false;
        };
        let mut a = phi.rem_euclid(2.0 * PI);
        if a < t1 {
            a += 2.0 * PI;
        }
        a <= t2 + 1e-12
    }

    /// Angular distance from `phi` to the hull (0 when inside).
    pub fn angular_distance(&self, phi: f64) -> f64 {
        if self.is_full_plane {
            return 0.0;
        }
        let Some((t1, t2)) = self.sector else {
            return PI;
        };
        if self.contains_angle(phi) {
            return 0.0;
        }
        let a = phi.rem_euclid(2.0 * PI);
        let d = |t: f64| {
            let mut d = (a - t.rem_euclid(2.0 * PI)).abs();
            if d > PI {
                d = 2.0 * PI - d;
            }
            d
        };
        d(t1).min(d(t2))
    }
}

/// Semiclassical normalization mu = -h^2 z with |mu| = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalPoint {
    pub z: C64,
    pub h: f64,
    pub mu: C64,
    /// k with k^2 = -z, principal branch (Re k >= 0).
    pub k: C64,
}

/// Structured description used to build a problem; the CLI deserializes
/// its TOML block into this.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub geometry: Geometry,
    pub mode: IndexMode,
    /// Expression for n (fixed mode), in variables x (1D) or x, y, r (disk).
    pub n_expr: Option<String>,
    /// Expressions for n1 and n2 (k-dependent mode).
    pub n1_expr: Option<String>,
    pub n2_expr: Option<String>,
    pub collar_width: f64,
    pub smoothness_degree: u32,
    /// Sampling density for the invariant checks.
    pub sample_count: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            mode: IndexMode::FixedComplex,
            n_expr: Some("4".into()),
            n1_expr: None,
            n2_expr: None,
            collar_width: 0.1,
            smoothness_degree: 2,
            sample_count: 0,
        }
    }
}

fn eval_field(expr: &Expr, dim: usize) -> FieldEval {
    let expr = expr.clone();
    Arc::new(move |x: &[f64]| {
        let (px, py, pr) = match dim {
            1 => (x[0], 0.0, x[0]),
            _ => (x[0], x[1], (x[0] * x[0] + x[1] * x[1]).sqrt()),
        };
        expr.eval(&[
            ("x", C64::new(px, 0.0)),
            ("y", C64::new(py, 0.0)),
            ("r", C64::new(pr, 0.0)),
        ])
        .unwrap_or_else(|e| panic!("field evaluation failed: {e}"))
    })
}

/// Builds a problem and verifies the index invariants by dense sampling:
/// n != 0 on the closed domain and n != 1 on the collar (in k-dependent
/// mode the checks apply to n1).
pub fn build_problem(config: &ProblemConfig) -> Result<TransmissionProblem> {
    match config.geometry {
        Geometry::Interval { a, b } if b <= a => {
            return Err(Error::BadGeometry(format!("interval [{a}, {b}] has nonpositive length")))
        }
        Geometry::Disk { radius } if radius <= 0.0 => {
            return Err(Error::BadGeometry(format!("disk radius {radius} must be positive")))
        }
        _ => {}
    }
    if config.collar_width <= 0.0 {
        return Err(Error::BadGeometry(format!(
            "collar width {} must be positive",
            config.collar_width
        )));
    }

    let dim = config.geometry.dim();
    let parse = |field: &Option<String>, what: &str| -> Result<Expr> {
        let src = field
            .as_ref()
            .ok_or_else(|| Error::Config(format!("missing index expression `{what}`")))?;
        let expr = Expr::parse(src)?;
        // fail early on unknown variables
        for v in expr.variables() {
            if !matches!(v.as_str(), "x" | "y" | "r") {
                return Err(Error::Config(format!("`{what}` uses unknown variable `{v}`")));
            }
        }
        expr.eval(&[("x", C64::new(0.0, 0.0)), ("y", C64::new(0.0, 0.0)), ("r", C64::new(0.0, 0.0))])?;
        Ok(expr)
    };

    let index = match config.mode {
        IndexMode::FixedComplex => {
            let n = parse(&config.n_expr, "n")?;
            RefractionIndex::fixed(eval_field(&n, dim), config.smoothness_degree)
        }
        IndexMode::KDependent => {
            let n1 = parse(&config.n1_expr, "n1")?;
            let n2 = parse(&config.n2_expr, "n2")?;
            RefractionIndex::k_dependent(
                eval_field(&n1, dim),
                eval_field(&n2, dim),
                config.smoothness_degree,
            )
        }
    };

    let problem = TransmissionProblem {
        geometry: config.geometry,
        index,
        collar_width: config.collar_width,
    };

    let count = if config.sample_count > 0 {
        config.sample_count
    } else if dim == 1 {
        1000
    } else {
        10_000
    };
    for x in problem.sample_points(count) {
        let np = problem.index.n_principal(&x);
        if np.norm() < 1e-14 {
            return Err(Error::IndexVanishes(x));
        }
    }
    for x in problem.collar_points(count) {
        let np = problem.index.n_principal(&x);
        if (np - 1.0).norm() < 1e-14 {
            return Err(Error::IndexOneOnCollar(x));
        }
    }
    Ok(problem)
}

/// Angular hull of the sampled directions -(1 + conj m(x)).
pub fn cone_ce(problem: &TransmissionProblem, sample_count: usize) -> Result<ConeDescription> {
    assert!(sample_count >= 2, "sample_count must be >= 2");
    let mut angles: Vec<f64> = problem
        .sample_points(sample_count)
        .iter()
        .map(|x| {
            let d = -(1.0 + problem.m_principal(x).conj());
            d.arg().rem_euclid(2.0 * PI)
        })
        .collect();
    angles.sort_by(|p, q| p.partial_cmp(q).unwrap());
    angles.dedup_by(|p, q| (*p - *q).abs() < 1e-13);

    // largest gap between consecutive sampled directions; the hull is the
    // complement of that gap.
    let n = angles.len();
    if n == 1 {
        return Ok(ConeDescription {
            is_full_plane: false,
            sector: Some((angles[0], angles[0])),
        });
    }
    let mut gap = 0.0;
    let mut gap_at = 0;
    for i in 0..n {
        let next = if i + 1 == n { angles[0] + 2.0 * PI } else { angles[i + 1] };
        let g = next - angles[i];
        if g > gap {
            gap = g;
            gap_at = i;
        }
    }
    if gap <= 1e-12 {
        return Ok(ConeDescription {
            is_full_plane: true,
            sector: None,
        });
    }
    let t1 = if gap_at + 1 == n { angles[0] } else { angles[gap_at + 1] };
    let span = 2.0 * PI - gap;
    Ok(ConeDescription {
        is_full_plane: false,
        sector: Some((t1, t1 + span)),
    })
}

/// Direction z0 of modulus 1 whose ray stays farthest (angularly) from
/// C_e together with the negative real axis; ties broken by the smallest
/// nonnegative angle. Searches a fine angular grid of 1024 directions.
pub fn admissible_direction(cone: &ConeDescription) -> Result<C64> {
    const GRID: usize = 1024;
    if cone.is_full_plane {
        return Err(Error::NoAdmissibleDirection);
    }
    let mut best_phi = 0.0;
    let mut best_dist = -1.0;
    for j in 0..GRID {
        let phi = 2.0 * PI * j as f64 / GRID as f64;
        // distance to the union of the cone hull and the angle-pi ray
        let mut d_pi = (phi - PI).abs();
        if d_pi > PI {
            d_pi = 2.0 * PI - d_pi;
        }
        let d = cone.angular_distance(phi).min(d_pi);
        if d > best_dist + 1e-15 {
            best_dist = d;
            best_phi = phi;
        }
    }
    if best_dist <= 1e-12 {
        return Err(Error::NoAdmissibleDirection);
    }
    Ok(C64::from_polar(1.0, best_phi))
}

/// Normalizes z != 0 to the semiclassical point h = |z|^{-1/2},
/// mu = -z/|z|, so that mu = -h^2 z exactly and |mu| = 1.
pub fn semiclassical_scale(z: C64) -> Result<SemiclassicalPoint> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::ZeroSpectralParameter);
    }
    let h = r.powf(-0.5);
    let mu = -z / r;
    Ok(SemiclassicalPoint {
        z,
        h,
        mu,
        k: (-z).sqrt(),
    })
}
