//! Diagonal problem Hamiltonians as polynomials in Pauli-Z.
//!
//! A bit `x` becomes the projector `A = (I - Z)/2`, so an integer polynomial
//! over bits maps to a real polynomial over Z factors. Coefficients are kept
//! as exact rationals (all denominators are powers of two) and converted to
//! floats only for simulation and JSON.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitplan::{BiPrimeInstance, BitEquationSystem, Split, Var};
use crate::poly::IntPoly;
use crate::reducer::{ReducedSystem, ReductionMode};

pub type Coeff = Ratio<i128>;

pub const DENSE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("substituted variable {var} leaves {{0,1}} on a satisfying assignment")]
    NonBinaryResidual { var: Var },
    #[error("{qubits} qubits exceed the dense cap of {cap}")]
    TooLarge { qubits: usize, cap: usize },
    #[error("coefficient {0} cannot be represented exactly")]
    InexactCoefficient(f64),
}

/// How the free bits are turned into qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// Reduced system with substitutions; one qubit per free bit.
    #[default]
    Substitution,
    /// Reduced system without substitutions; `p_i` and `q_i` share a qubit.
    PaperCompat,
    /// Reduced system without substitutions; one qubit per free bit.
    Columns,
    /// Unreduced `(N - PQ)^2` over every non-fixed bit.
    Product,
}

impl Encoding {
    /// Reduction the encoding is built on; `None` for the unreduced product.
    pub fn reduction_mode(self) -> Option<ReductionMode> {
        match self {
            Encoding::Substitution => Some(ReductionMode::Substitution),
            Encoding::PaperCompat | Encoding::Columns => Some(ReductionMode::PaperCompat),
            Encoding::Product => None,
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "substitution" => Ok(Encoding::Substitution),
            "paper-compat" => Ok(Encoding::PaperCompat),
            "columns" => Ok(Encoding::Columns),
            "product" => Ok(Encoding::Product),
            _ => Err(format!("unknown encoding `{s}`")),
        }
    }
}

/// `Σ coeff · Π_{i∈set} Z_i`; the empty set is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ZPolynomial {
    n_qubits: usize,
    terms: BTreeMap<Vec<usize>, Coeff>,
}

#[derive(Serialize, Deserialize)]
struct ZTermRepr {
    z: Vec<usize>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct ZPolyRepr {
    n_qubits: usize,
    terms: Vec<ZTermRepr>,
}

impl Serialize for ZPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ZPolyRepr {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(z, c)| ZTermRepr {
                    z: z.clone(),
                    coeff: ratio_to_f64(c),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ZPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ZPolyRepr::deserialize(d)?;
        let mut p = ZPolynomial::zero(r.n_qubits);
        for t in r.terms {
            if t.z.iter().any(|&q| q >= r.n_qubits) {
                return Err(serde::de::Error::custom("qubit index out of range"));
            }
            let c = exact_from_f64(t.coeff).map_err(serde::de::Error::custom)?;
            p.add_term(t.z, c);
        }
        Ok(p)
    }
}

fn ratio_to_f64(c: &Coeff) -> f64 {
    c.numer().to_f64().unwrap() / c.denom().to_f64().unwrap()
}

/// Exact rational value of a finite float with a small binary exponent.
fn exact_from_f64(x: f64) -> Result<Coeff, CompileError> {
    if !x.is_finite() {
        return Err(CompileError::InexactCoefficient(x));
    }
    if x == 0.0 {
        return Ok(Coeff::zero());
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mant = if exp == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    } as i128;
    let e = exp - 1075;
    if e >= 0 {
        if e > 60 {
            return Err(CompileError::InexactCoefficient(x));
        }
        Ok(Coeff::from_integer(sign * (mant << e)))
    } else {
        if -e > 120 {
            return Err(CompileError::InexactCoefficient(x));
        }
        Ok(Coeff::new(sign * mant, 1i128 << (-e)))
    }
}

impl ZPolynomial {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize, c: Coeff) -> Self {
        let mut p = Self::zero(n_qubits);
        p.add_term(Vec::new(), c);
        p
    }

    pub fn z(n_qubits: usize, qubit: usize) -> Self {
        let mut p = Self::zero(n_qubits);
        p.add_term(vec![qubit], Coeff::from_integer(1));
        p
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add_term(&mut self, mut set: Vec<usize>, c: Coeff) {
        assert!(set.iter().all(|&q| q < self.n_qubits), "qubit out of range");
        set.sort_unstable();
        // Z_i Z_i = I
        let mut reduced: Vec<usize> = Vec::with_capacity(set.len());
        for q in set {
            if reduced.last() == Some(&q) {
                reduced.pop();
            } else {
                reduced.push(q);
            }
        }
        let e = self.terms.entry(reduced.clone()).or_insert_with(Coeff::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&reduced);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff(&self, set: &[usize]) -> Coeff {
        self.terms.get(set).copied().unwrap_or_else(Coeff::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &ZPolynomial) -> ZPolynomial {
        let mut out = self.clone();
        out.n_qubits = out.n_qubits.max(other.n_qubits);
        for (z, c) in other.terms() {
            out.add_term(z.clone(), *c);
        }
        out
    }

    pub fn scale(&self, k: Coeff) -> ZPolynomial {
        let mut out = ZPolynomial::zero(self.n_qubits);
        for (z, c) in self.terms() {
            out.add_term(z.clone(), *c * k);
        }
        out
    }

    /// Operator product; Z factors multiply by symmetric difference.
    pub fn mul(&self, other: &ZPolynomial) -> ZPolynomial {
        let mut out = ZPolynomial::zero(self.n_qubits.max(other.n_qubits));
        for (za, ca) in self.terms() {
            for (zb, cb) in other.terms() {
                let mut z = za.clone();
                z.extend_from_slice(zb);
                out.add_term(z, *ca * *cb);
            }
        }
        out
    }

    pub fn exact_eigenvalue(&self, basis: u64) -> Coeff {
        self.terms
            .iter()
            .map(|(z, c)| {
                let parity = z.iter().filter(|&&q| (basis >> q) & 1 == 1).count() % 2;
                if parity == 0 {
                    *c
                } else {
                    -*c
                }
            })
            .sum()
    }

    /// Eigenvalue on `|basis⟩`: `Σ coeff · Π (1 - 2 x_i)`.
    pub fn eigenvalue(&self, basis: u64) -> f64 {
        ratio_to_f64(&self.exact_eigenvalue(basis))
    }

    /// Diagonal of the operator in the computational basis, qubit 0 least
    /// significant.
    pub fn diagonal(&self) -> Vec<f64> {
        let dim = 1usize << self.n_qubits;
        let mut out = vec![0.0; dim];
        for (z, c) in &self.terms {
            let mask: usize = z.iter().map(|&q| 1usize << q).sum();
            let cf = ratio_to_f64(c);
            for (x, o) in out.iter_mut().enumerate() {
                if (x & mask).count_ones().is_multiple_of(2) {
                    *o += cf;
                } else {
                    *o -= cf;
                }
            }
        }
        out
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// `A_q = (I - Z_q)/2`: eigenvalue 0 on `|0⟩`, 1 on `|1⟩`.
pub fn bit_operator(n_qubits: usize, qubit: usize) -> ZPolynomial {
    let half = Coeff::new(1, 2);
    let mut p = ZPolynomial::identity(n_qubits, half);
    p.add_term(vec![qubit], -half);
    p
}

/// Variable-to-qubit assignment. Under `PaperCompat` a `q_i` may share the
/// qubit of `p_i`, so the map is not injective there.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QubitMap {
    pub n_qubits: usize,
    pub assignment: BTreeMap<Var, usize>,
}

impl QubitMap {
    /// Variables that own their qubit (the first one mapped to it).
    fn owners(&self) -> BTreeMap<usize, Var> {
        let mut out = BTreeMap::new();
        for (v, q) in &self.assignment {
            out.entry(*q).or_insert(*v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledProblem {
    pub encoding: Encoding,
    pub hamiltonian: ZPolynomial,
    pub qubits: QubitMap,
}

/// Maps an integer bit polynomial to an operator with `x -> A_{q(x)}`.
pub fn poly_to_operator(poly: &IntPoly, map: &QubitMap) -> ZPolynomial {
    let mut out = ZPolynomial::zero(map.n_qubits);
    for (mono, c) in poly.terms() {
        let mut term = ZPolynomial::identity(map.n_qubits, Coeff::from_integer(c as i128));
        let qubits: BTreeSet<usize> = mono.iter().map(|v| map.assignment[v]).collect();
        for q in qubits {
            term = term.mul(&bit_operator(map.n_qubits, q));
        }
        out = out.add(&term);
    }
    out
}

fn qubit_map(reduced: &ReducedSystem, encoding: Encoding) -> QubitMap {
    let mut assignment = BTreeMap::new();
    let mut next = 0;
    for v in &reduced.free_vars {
        let shared = match (encoding, v) {
            (Encoding::PaperCompat, Var::Q(i)) => assignment.get(&Var::P(*i)).copied(),
            _ => None,
        };
        let q = shared.unwrap_or_else(|| {
            next += 1;
            next - 1
        });
        assignment.insert(*v, q);
    }
    QubitMap {
        n_qubits: next,
        assignment,
    }
}

/// `H_p = Σ_e residual_e²` over the free variables of a reduced system.
pub fn compile(reduced: &ReducedSystem, encoding: Encoding) -> Result<CompiledProblem, CompileError> {
    if reduced.free_vars.len() <= DENSE_CAP {
        check_binarity(reduced)?;
    }
    let map = qubit_map(reduced, encoding);
    let mut h = ZPolynomial::zero(map.n_qubits);
    for r in &reduced.residual_equations {
        let sq = r.terms.mul(&r.terms);
        h = h.add(&poly_to_operator(&sq, &map));
    }
    Ok(CompiledProblem {
        encoding,
        hamiltonian: h,
        qubits: map,
    })
}

/// Same Hamiltonian, squaring in operator algebra instead of bit algebra.
pub fn compile_operator_square(reduced: &ReducedSystem, encoding: Encoding) -> ZPolynomial {
    let map = qubit_map(reduced, encoding);
    let mut h = ZPolynomial::zero(map.n_qubits);
    for r in &reduced.residual_equations {
        let op = poly_to_operator(&r.terms, &map);
        h = h.add(&op.mul(&op));
    }
    h
}

fn check_binarity(reduced: &ReducedSystem) -> Result<(), CompileError> {
    let n = reduced.free_vars.len();
    for x in 0..(1u64 << n) {
        let free: Vec<i64> = (0..n).map(|i| ((x >> i) & 1) as i64).collect();
        let mut vals: BTreeMap<Var, i64> = reduced.fixed.clone();
        for (v, b) in reduced.free_vars.iter().zip(&free) {
            vals.insert(*v, *b);
        }
        if !reduced.residuals_hold(&vals) {
            continue;
        }
        for (v, expr) in &reduced.substitutions {
            let val = expr.eval(|u| vals.get(&u).copied().unwrap_or(0));
            if !v.is_carry() && !(0..=1).contains(&val) {
                return Err(CompileError::NonBinaryResidual { var: *v });
            }
        }
    }
    Ok(())
}

/// Unreduced `(N·I - P·Q)²` with `P = Σ 2^k A_k` over every free bit of the
/// split.
pub fn compile_product(instance: &BiPrimeInstance, split: Split) -> Result<CompiledProblem, CompileError> {
    let system = crate::bitplan::build_system(instance, split);
    let free = system.free_bits();
    if free.len() > DENSE_CAP {
        return Err(CompileError::TooLarge {
            qubits: free.len(),
            cap: DENSE_CAP,
        });
    }
    let map = QubitMap {
        n_qubits: free.len(),
        assignment: free.iter().enumerate().map(|(i, v)| (*v, i)).collect(),
    };
    let register = |bits: usize, var: fn(usize) -> Var| {
        let mut p = IntPoly::zero();
        for k in 0..bits {
            let v = var(k);
            match system.fixed_value(v) {
                Some(x) => p.add_term(Vec::new(), x << k),
                None => p.add_term(vec![v], 1 << k),
            }
        }
        p
    };
    let p = register(split.bp, Var::P);
    let q = register(split.bq, Var::Q);
    let residual = IntPoly::constant(instance.n() as i64).add(&p.mul(&q).scale(-1));
    let sq = residual.mul(&residual);
    Ok(CompiledProblem {
        encoding: Encoding::Product,
        hamiltonian: poly_to_operator(&sq, &map),
        qubits: map,
    })
}

/// Exact minimum of the diagonal and every basis state attaining it.
pub fn ground_states(h: &ZPolynomial) -> Result<(f64, Vec<u64>), CompileError> {
    if h.n_qubits() > DENSE_CAP {
        return Err(CompileError::TooLarge {
            qubits: h.n_qubits(),
            cap: DENSE_CAP,
        });
    }
    let mut best: Option<Coeff> = None;
    let mut states = Vec::new();
    for x in 0..(1u64 << h.n_qubits()) {
        let e = h.exact_eigenvalue(x);
        match best {
            Some(b) if e > b => {}
            Some(b) if e == b => states.push(x),
            _ => {
                best = Some(e);
                states = vec![x];
            }
        }
    }
    Ok((ratio_to_f64(&best.unwrap()), states))
}

impl CompiledProblem {
    /// Lifts a measured basis state to `(P, Q)` through the qubit map,
    /// substitutions and fixed bits. `None` if the state does not describe a
    /// consistent bit assignment.
    pub fn lift(&self, basis: u64, system: &BitEquationSystem, reduced: Option<&ReducedSystem>) -> Option<(u64, u64)> {
        let owners = self.qubits.owners();
        let mut vals: BTreeMap<Var, i64> = BTreeMap::new();
        for (q, v) in &owners {
            vals.insert(*v, ((basis >> q) & 1) as i64);
        }
        // Variables sharing a qubit with another one are read off the
        // residual equations.
        let followers: Vec<Var> = self
            .qubits
            .assignment
            .keys()
            .filter(|v| !vals.contains_key(v))
            .copied()
            .collect();

        let bits = match (self.encoding, reduced) {
            (Encoding::Product, _) | (_, None) => {
                let mut all = vals.clone();
                for (v, s) in &system.variables {
                    if let crate::bitplan::VarState::Fixed(x) = s {
                        all.insert(*v, *x);
                    }
                }
                all
            }
            (_, Some(red)) => {
                let mut found = None;
                for y in 0..(1u64 << followers.len()) {
                    let mut trial = vals.clone();
                    for (i, v) in followers.iter().enumerate() {
                        trial.insert(*v, ((y >> i) & 1) as i64);
                    }
                    let free: Vec<i64> = red.free_vars.iter().map(|v| trial[v]).collect();
                    let Some(lifted) = red.lift_bits(&free) else { continue };
                    if red.residuals_hold(&lifted) {
                        found = Some(lifted);
                        break;
                    }
                }
                found?
            }
        };
        let value = |n: usize, var: fn(usize) -> Var| -> Option<u64> {
            (0..n).try_fold(0u64, |acc, k| bits.get(&var(k)).map(|&b| acc | ((b as u64) << k)))
        };
        Some((value(system.split.bp, Var::P)?, value(system.split.bq, Var::Q)?))
    }
}
