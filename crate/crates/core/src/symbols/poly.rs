//! Exact multivariate polynomial arithmetic over Gaussian rationals,
//! carrier of the parametrix recursion.
//!
//! Variables come in three kinds: frequency variables Xi(i), space
//! variables X(i), and jet variables Jet{base, order} representing the
//! order-th x-derivative of a generic coefficient function. Differentiating
//! a jet raises its order, so generic-coefficient symbols stay polynomial.

use num::{BigInt, BigRational, One, Zero};
use num_complex::Complex;
use std::collections::BTreeMap;
use std::fmt;

pub type GaussianRational = Complex<BigRational>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    /// Frequency variable xi_i.
    Xi(u8),
    /// Space variable x_i.
    X(u8),
    /// order-th derivative of the generic coefficient #base (1D jets).
    Jet { base: u8, order: u8 },
}

pub type Monomial = BTreeMap<Var, u32>;

/// Sparse exact polynomial; keys are monomials, values Gaussian rationals.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, GaussianRational>,
}

pub fn grat(re: i64, im: i64) -> GaussianRational {
    Complex::new(
        BigRational::from(BigInt::from(re)),
        BigRational::from(BigInt::from(im)),
    )
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let vars: Vec<String> = m
                    .iter()
                    .map(|(v, e)| {
                        let name = match v {
                            Var::Xi(i) => format!("xi{i}"),
                            Var::X(i) => format!("x{i}"),
                            Var::Jet { base, order } => format!("a{base}^({order})"),
                        };
                        if *e == 1 {
                            name
                        } else {
                            format!("{name}^{e}")
                        }
                    })
                    .collect();
                if vars.is_empty() {
                    format!("({}+{}i)", c.re, c.im)
                } else {
                    format!("({}+{}i)*{}", c.re, c.im, vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: GaussianRational) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert(Monomial::new(), c);
        }
        p
    }

    pub fn one() -> Poly {
        Poly::constant(grat(1, 0))
    }

    pub fn var(v: Var) -> Poly {
        let mut m = Monomial::new();
        m.insert(v, 1);
        let mut p = Poly::default();
        p.terms.insert(m, grat(1, 0));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    fn insert(&mut self, m: Monomial, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly::zero().sub(self)
    }

    pub fn scale(&self, c: &GaussianRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut out = Poly::default();
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                for (v, e) in mb {
                    *m.entry(*v).or_insert(0) += e;
                }
                out.insert(m, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// d/d xi_i.
    pub fn diff_xi(&self, i: u8) -> Poly {
        let mut out = Poly::default();
        for (m, c) in &self.terms {
            if let Some(&e) = m.get(&Var::Xi(i)) {
                let mut m2 = m.clone();
                if e == 1 {
                    m2.remove(&Var::Xi(i));
                } else {
                    m2.insert(Var::Xi(i), e - 1);
                }
                out.insert(m2, c.clone() * grat(e as i64, 0));
            }
        }
        out
    }

    /// d/d x_i; jet variables are attached to direction 0 and step their
    /// order under differentiation (chain rule over the monomial factors).
    pub fn diff_x(&self, i: u8) -> Poly {
        let mut out = Poly::default();
        for (m, c) in &self.terms {
            for (v, &e) in m {
                let replacement = match v {
                    Var::X(j) if *j == i => None, // power rule, no new factor
                    Var::Jet { base, order } if i == 0 => Some(Var::Jet {
                        base: *base,
                        order: order + 1,
                    }),
                    _ => continue,
                };
                let mut m2 = m.clone();
                if e == 1 {
                    m2.remove(v);
                } else {
                    m2.insert(*v, e - 1);
                }
                if let Some(nv) = replacement {
                    *m2.entry(nv).or_insert(0) += 1;
                }
                out.insert(m2, c.clone() * grat(e as i64, 0));
            }
        }
        out
    }

    /// Total degree in the Xi variables.
    pub fn xi_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|m| {
                m.iter()
                    .filter(|(v, _)| matches!(v, Var::Xi(_)))
                    .map(|(_, e)| *e as usize)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    /// Indices of Xi variables present.
    pub fn xi_dims(&self) -> Vec<u8> {
        let mut dims: Vec<u8> = self
            .terms
            .keys()
            .flat_map(|m| m.keys())
            .filter_map(|v| match v {
                Var::Xi(i) => Some(*i),
                _ => None,
            })
            .collect();
        dims.sort_unstable();
        dims.dedup();
        dims
    }

    fn leading(&self) -> Option<(&Monomial, &GaussianRational)> {
        self.terms
            .iter()
            .max_by(|(a, _), (b, _)| cmp_monomials(a, b))
    }

    /// Exact division: Some(q) iff self = q * divisor exactly.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        let (dm, dc) = divisor.leading()?;
        let mut rem = self.clone();
        let mut quo = Poly::default();
        let mut guard = 0usize;
        while !rem.is_zero() {
            guard += 1;
            if guard > 2_000_000 {
                return None;
            }
            let (rm, rc) = rem.leading().map(|(m, c)| (m.clone(), c.clone()))?;
            // monomial divisibility
            let mut qm = Monomial::new();
            for (v, e) in &rm {
                let de = dm.get(v).copied().unwrap_or(0);
                if *e < de {
                    return None;
                }
                if *e > de {
                    qm.insert(*v, e - de);
                }
            }
            for (v, e) in dm {
                if rm.get(v).copied().unwrap_or(0) < *e {
                    return None;
                }
            }
            let qc = rc / dc.clone();
            let mut qt = Poly::default();
            qt.terms.insert(qm.clone(), qc.clone());
            quo.insert(qm, qc);
            rem = rem.sub(&qt.mul(divisor));
        }
        Some(quo)
    }
}

/// Graded lexicographic monomial order with absent variables read as
/// exponent zero; compatible with multiplication, as the division
/// algorithm requires.
fn cmp_monomials(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let deg = |m: &Monomial| m.values().map(|e| *e as u64).sum::<u64>();
    match deg(a).cmp(&deg(b)) {
        Ordering::Equal => {}
        other => return other,
    }
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (None, None) => return Ordering::Equal,
            // remaining exponents on one side only: that side has positive
            // exponent on an earlier-unmatched variable
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                // earlier variable with positive exponent wins lex
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match ea.cmp(eb) {
                    Ordering::Equal => {
                        ia.next();
                        ib.next();
                    }
                    other => return other,
                },
            },
        }
    }
}

/// A rational symbol: exact numerator over a power of the principal
/// polynomial p2 (the denominator basis is context, not stored).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalSymbol {
    pub numerator: Poly,
    pub denominator_power: u32,
}

impl RationalSymbol {
    pub fn zero() -> Self {
        RationalSymbol {
            numerator: Poly::zero(),
            denominator_power: 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// 1/p2, the seed of the recursion.
    pub fn one_over_p2() -> Self {
        RationalSymbol {
            numerator: Poly::one(),
            denominator_power: 1,
        }
    }

    pub fn add(&self, other: &Self, p2: &Poly) -> Self {
        let pow = self.denominator_power.max(other.denominator_power);
        let lift = |r: &Self| {
            let diff = pow - r.denominator_power;
            if diff == 0 {
                r.numerator.clone()
            } else {
                r.numerator.mul(&p2.pow(diff))
            }
        };
        RationalSymbol {
            numerator: lift(self).add(&lift(other)),
            denominator_power: pow,
        }
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        RationalSymbol {
            numerator: self.numerator.scale(c),
            denominator_power: self.denominator_power,
        }
    }

    pub fn mul_poly(&self, p: &Poly) -> Self {
        RationalSymbol {
            numerator: self.numerator.mul(p),
            denominator_power: self.denominator_power,
        }
    }

    pub fn div_p2(&self) -> Self {
        RationalSymbol {
            numerator: self.numerator.clone(),
            denominator_power: self.denominator_power + 1,
        }
    }

    /// Quotient-rule derivative in xi_i: (N' p2 - nu N p2') / p2^{nu+1}.
    pub fn diff_xi(&self, i: u8, p2: &Poly) -> Self {
        let nu = self.denominator_power;
        let num = self
            .numerator
            .diff_xi(i)
            .mul(p2)
            .sub(&self.numerator.mul(&p2.diff_xi(i)).scale(&grat(nu as i64, 0)));
        RationalSymbol {
            numerator: num,
            denominator_power: nu + 1,
        }
        .reduced(p2)
    }

    /// Quotient-rule derivative in x_i.
    pub fn diff_x(&self, i: u8, p2: &Poly) -> Self {
        let nu = self.denominator_power;
        let num = self
            .numerator
            .diff_x(i)
            .mul(p2)
            .sub(&self.numerator.mul(&p2.diff_x(i)).scale(&grat(nu as i64, 0)));
        RationalSymbol {
            numerator: num,
            denominator_power: nu + 1,
        }
        .reduced(p2)
    }

    /// Cancels every common factor of p2 between numerator and denominator.
    pub fn reduced(&self, p2: &Poly) -> Self {
        let mut out = self.clone();
        if out.numerator.is_zero() {
            out.denominator_power = 1;
            return out;
        }
        while out.denominator_power > 0 {
            match out.numerator.div_exact(p2) {
                Some(q) => {
                    out.numerator = q;
                    out.denominator_power -= 1;
                }
                None => break,
            }
        }
        if out.denominator_power == 0 {
            // keep the invariant nu >= 1 by un-cancelling once
            out.numerator = out.numerator.mul(p2);
            out.denominator_power = 1;
        }
        out
    }
}

impl One for Poly {
    fn one() -> Self {
        Poly::one()
    }
}

impl Zero for Poly {
    fn zero() -> Self {
        Poly::zero()
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
}

impl std::ops::Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        Poly::add(&self, &rhs)
    }
}

impl std::ops::Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        Poly::mul(&self, &rhs)
    }
}
