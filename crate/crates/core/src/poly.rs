//! Integer polynomials over bit and carry variables.
//!
//! Monomials are sorted variable sets. Multiplication takes the union of the
//! sets, i.e. `x·x = x`, which is only valid for 0/1 variables; carries are
//! never multiplied with anything.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitplan::Var;

pub type Monomial = Vec<Var>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntPoly {
    terms: BTreeMap<Monomial, i64>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    vars: Vec<Var>,
    coeff: i64,
}

impl Serialize for IntPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<TermRepr> = self
            .terms
            .iter()
            .map(|(m, &c)| TermRepr {
                vars: m.clone(),
                coeff: c,
            })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<TermRepr>::deserialize(d)?;
        let mut p = IntPoly::zero();
        for t in v {
            p.add_term(t.vars, t.coeff);
        }
        Ok(p)
    }
}

impl IntPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: i64) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![v], 1);
        p
    }

    pub fn add_term(&mut self, mut mono: Monomial, coeff: i64) {
        if coeff == 0 {
            return;
        }
        mono.sort();
        mono.dedup();
        let e = self.terms.entry(mono.clone()).or_insert(0);
        *e += coeff;
        if *e == 0 {
            self.terms.remove(&mono);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> i64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Vec::is_empty)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flatten().copied().collect()
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, k: i64) -> IntPoly {
        let mut out = IntPoly::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    /// Product under `x² = x`.
    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        let mut out = IntPoly::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    /// Replace every occurrence of `v` by `expr`.
    pub fn substitute(&self, v: Var, expr: &IntPoly) -> IntPoly {
        let mut out = IntPoly::zero();
        for (m, c) in self.terms() {
            if m.contains(&v) {
                let rest: Monomial = m.iter().copied().filter(|x| *x != v).collect();
                let mut base = IntPoly::zero();
                base.add_term(rest, c);
                out = out.add(&base.mul(expr));
            } else {
                out.add_term(m.clone(), c);
            }
        }
        out
    }

    pub fn eval(&self, value: impl Fn(Var) -> i64) -> i64 {
        self.terms()
            .map(|(m, c)| c * m.iter().map(|&v| value(v)).product::<i64>())
            .sum()
    }

    /// Divide by the coefficient gcd and make the leading coefficient
    /// positive. Preserves the solution set of `self = 0`.
    pub fn normalized(&self) -> IntPoly {
        let g = self.terms.values().fold(0i64, |g, &c| gcd(g, c.abs()));
        if g == 0 {
            return self.clone();
        }
        let lead = self
            .terms
            .iter()
            .rev()
            .find(|(m, _)| !m.is_empty())
            .or_else(|| self.terms.iter().next())
            .map(|(_, &c)| c)
            .unwrap_or(1);
        let sign = if lead < 0 { -1 } else { 1 };
        let mut out = IntPoly::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), sign * c / g);
        }
        out
    }

    /// Range of the polynomial when each variable ranges over `[0, ub(v)]`.
    /// Exact for multilinear terms with nonnegative domains.
    pub fn bounds(&self, ub: impl Fn(Var) -> i64) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = 0;
        for (m, c) in self.terms() {
            let top: i64 = m.iter().map(|&v| ub(v)).product();
            if c >= 0 {
                hi += c * top;
            } else {
                lo += c * top;
            }
        }
        (lo, hi)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for IntPoly {
    /// Renders `self = 0` with the constant moved to the right.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            if m.is_empty() {
                continue;
            }
            let name = m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("*");
            let (sign, mag) = if c < 0 { ("-", -c) } else { ("+", c) };
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            write!(f, "{name}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " = {}", -self.constant_term())
    }
}
