//! Classical simplification of the column equations.
//!
//! Propagation runs to a fixed point over the column equations, visiting the
//! two boundary columns first and then the rest in ascending order. For each
//! equation it enumerates the local solutions over the still-unknown
//! variables (bits in `{0,1}`, carries in `[0, upper]`):
//!
//! * a variable that takes one value in every local solution is fixed;
//! * in substitution mode, two bits that are equal (or complementary) in
//!   every local solution become a substitution `y := x` (or `y := 1 - x`).
//!
//! Carries that stay unknown are eliminated by merging neighbouring columns
//! (`eq_c + 2·eq_{c+1}` cancels `C_{c+1}`); they are recomputed from the bits
//! when a solution is lifted back. A final pass drops residual equations that
//! are implied by the remaining ones.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitplan::{BitEquationSystem, Var, VarState};
use crate::poly::IntPoly;

/// Above this many local assignments an equation is only range-checked.
const LOCAL_ENUM_CAP: u64 = 1 << 18;
/// Largest free-variable count for brute-force implication checks.
const PRUNE_CAP: usize = 20;
pub const VERIFY_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("column equation(s) {columns:?} became unsatisfiable")]
    Inconsistent { columns: (usize, usize) },
    #[error("enumeration over {vars} free variables exceeds the cap of {cap}")]
    TooLarge { vars: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarryBound {
    pub column: usize,
    pub lower: i64,
    pub upper: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMode {
    /// Complementary/equal bit pairs become substitutions.
    #[default]
    Substitution,
    /// Only fixings; relations stay as residual equations.
    PaperCompat,
}

/// `constant + Σ coeff·var`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: i64,
    pub terms: Vec<(Var, i64)>,
}

impl Affine {
    pub fn eval(&self, value: impl Fn(Var) -> i64) -> i64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * value(v)).sum::<i64>()
    }

    pub fn to_poly(&self) -> IntPoly {
        let mut p = IntPoly::constant(self.constant);
        for &(v, c) in &self.terms {
            p.add_term(vec![v], c);
        }
        p
    }

    fn from_poly(p: &IntPoly) -> Option<Affine> {
        if p.degree() > 1 {
            return None;
        }
        let terms: Vec<(Var, i64)> = p
            .terms()
            .filter(|(m, _)| !m.is_empty())
            .map(|(m, c)| (m[0], c))
            .collect();
        if terms.iter().any(|&(_, c)| c.abs() != 1) {
            return None;
        }
        Some(Affine {
            constant: p.constant_term(),
            terms,
        })
    }
}

impl std::fmt::Display for Affine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        if self.constant != 0 || self.terms.is_empty() {
            s.push_str(&self.constant.to_string());
        }
        for &(v, c) in &self.terms {
            match (s.is_empty(), c < 0) {
                (true, true) => s.push('-'),
                (true, false) => {}
                (false, true) => s.push_str(" - "),
                (false, false) => s.push_str(" + "),
            }
            if c.abs() != 1 {
                s.push_str(&format!("{}*", c.abs()));
            }
            s.push_str(&v.to_string());
        }
        f.write_str(&s)
    }
}

/// A residual equation `terms = 0`, spanning columns `columns.0..=columns.1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub columns: (usize, usize),
    pub terms: IntPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub mode: ReductionMode,
    pub bounds: Vec<CarryBound>,
    pub fixed: BTreeMap<Var, i64>,
    pub substitutions: BTreeMap<Var, Affine>,
    /// Carries left undetermined; recomputed from the bits on lifting.
    pub eliminated_carries: Vec<Var>,
    pub residual_equations: Vec<Residual>,
    pub free_vars: Vec<Var>,
    /// Number of fix/substitute rule firings until the fixed point.
    pub rule_applications: usize,
}

impl ReducedSystem {
    /// Carry values `C_0..`, `None` where the carry was eliminated.
    pub fn carries(&self) -> Vec<Option<i64>> {
        (0..self.bounds.len())
            .map(|c| {
                let v = Var::Carry(c);
                self.fixed.get(&v).copied().or_else(|| {
                    self.substitutions
                        .get(&v)
                        .filter(|a| a.terms.is_empty())
                        .map(|a| a.constant)
                })
            })
            .collect()
    }

    /// Value of every non-carry variable for an assignment of `free_vars`.
    /// `None` if a substituted bit leaves `{0, 1}`.
    pub fn lift_bits(&self, free_values: &[i64]) -> Option<BTreeMap<Var, i64>> {
        let mut vals: BTreeMap<Var, i64> = self.fixed.clone();
        for (v, x) in self.free_vars.iter().zip(free_values) {
            vals.insert(*v, *x);
        }
        for (v, expr) in &self.substitutions {
            let x = expr.eval(|u| vals.get(&u).copied().unwrap_or(0));
            if !v.is_carry() && !(0..=1).contains(&x) {
                return None;
            }
            vals.insert(*v, x);
        }
        Some(vals)
    }

    pub fn residuals_hold(&self, vals: &BTreeMap<Var, i64>) -> bool {
        self.residual_equations
            .iter()
            .all(|r| r.terms.eval(|v| vals.get(&v).copied().unwrap_or(0)) == 0)
    }
}

/// Upper bounds on every cumulative carry `C_0 ..= C_{b_p+b_q-1}`.
///
/// `C_{c+1} <= floor((#products_c + upper(C_c) - n_c) / 2)` with every
/// product term at 1 and `C_0 = 0`.
pub fn carry_bounds(system: &BitEquationSystem) -> Vec<CarryBound> {
    let mut out = vec![CarryBound {
        column: 0,
        lower: 0,
        upper: 0,
    }];
    for eq in &system.equations {
        let prev = out[eq.c].upper;
        let s = eq.products.len() as i64 + prev - eq.target as i64;
        out.push(CarryBound {
            column: eq.c + 1,
            lower: 0,
            upper: s.div_euclid(2).max(0),
        });
    }
    out
}

enum LocalOutcome {
    Nothing,
    Fix(Vec<(Var, i64)>),
    Relate { target: Var, source: Var, negated: bool },
}

struct Engine {
    mode: ReductionMode,
    upper: Vec<i64>,
    fixed: BTreeMap<Var, i64>,
    subs: BTreeMap<Var, IntPoly>,
    applications: usize,
}

impl Engine {
    fn domain(&self, v: Var) -> i64 {
        match v {
            Var::Carry(c) => self.upper[c],
            _ => 1,
        }
    }

    fn simplify(&self, poly: &IntPoly) -> IntPoly {
        let mut p = poly.clone();
        loop {
            let hit = p
                .vars()
                .into_iter()
                .find(|v| self.fixed.contains_key(v) || self.subs.contains_key(v));
            let Some(v) = hit else { return p };
            p = match self.fixed.get(&v) {
                Some(&x) => p.substitute(v, &IntPoly::constant(x)),
                None => p.substitute(v, &self.subs[&v]),
            };
        }
    }

    fn fix(&mut self, v: Var, x: i64) {
        self.fixed.insert(v, x);
        self.applications += 1;
    }

    fn local(&self, poly: &IntPoly, columns: (usize, usize)) -> Result<LocalOutcome, ReduceError> {
        if poly.is_constant() {
            return if poly.constant_term() == 0 {
                Ok(LocalOutcome::Nothing)
            } else {
                Err(ReduceError::Inconsistent { columns })
            };
        }
        let (lo, hi) = poly.bounds(|v| self.domain(v));
        if lo > 0 || hi < 0 {
            return Err(ReduceError::Inconsistent { columns });
        }
        let vars: Vec<Var> = poly.vars().into_iter().collect();
        let radix: Vec<i64> = vars.iter().map(|&v| self.domain(v) + 1).collect();
        let combos = radix.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r as u64));
        match combos {
            Some(c) if c <= LOCAL_ENUM_CAP => {}
            _ => return Ok(LocalOutcome::Nothing),
        }

        let index: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let compiled: Vec<(Vec<usize>, i64)> = poly
            .terms()
            .map(|(m, c)| (m.iter().map(|v| index[v]).collect(), c))
            .collect();
        let binary: Vec<usize> = (0..vars.len()).filter(|&i| radix[i] == 2).collect();

        // seen[i] bit k set when variable i took value k in some solution.
        let mut seen = vec![0u64; vars.len()];
        // (any equal, any different) per ordered binary pair.
        let mut pair_eq = vec![vec![false; vars.len()]; vars.len()];
        let mut pair_ne = vec![vec![false; vars.len()]; vars.len()];
        let mut any = false;
        let mut digits = vec![0i64; vars.len()];
        loop {
            let val: i64 = compiled
                .iter()
                .map(|(m, c)| c * m.iter().map(|&i| digits[i]).product::<i64>())
                .sum();
            if val == 0 {
                any = true;
                for (i, &d) in digits.iter().enumerate() {
                    seen[i] |= 1 << d;
                }
                for (a, &i) in binary.iter().enumerate() {
                    for &j in &binary[a + 1..] {
                        if digits[i] == digits[j] {
                            pair_eq[i][j] = true;
                        } else {
                            pair_ne[i][j] = true;
                        }
                    }
                }
            }
            // mixed-radix increment
            let mut k = 0;
            loop {
                if k == digits.len() {
                    break;
                }
                digits[k] += 1;
                if digits[k] < radix[k] {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }
        if !any {
            return Err(ReduceError::Inconsistent { columns });
        }
        let fixes: Vec<(Var, i64)> = vars
            .iter()
            .zip(&seen)
            .filter(|(_, s)| s.count_ones() == 1)
            .map(|(v, s)| (*v, s.trailing_zeros() as i64))
            .collect();
        if !fixes.is_empty() {
            return Ok(LocalOutcome::Fix(fixes));
        }
        if self.mode == ReductionMode::Substitution {
            for (b, &j) in binary.iter().enumerate() {
                for &i in &binary[..b] {
                    if pair_eq[i][j] != pair_ne[i][j] {
                        return Ok(LocalOutcome::Relate {
                            target: vars[j],
                            source: vars[i],
                            negated: pair_ne[i][j],
                        });
                    }
                }
            }
        }
        Ok(LocalOutcome::Nothing)
    }

    /// Sweeps the equations until nothing changes. `order` lists indices
    /// into `eqs` in visiting order.
    fn run(&mut self, eqs: &mut [Option<Residual>], order: &[usize]) -> Result<(), ReduceError> {
        let mut solved: Vec<Option<IntPoly>> = vec![None; eqs.len()];
        loop {
            let mut changed = false;
            for &idx in order {
                let Some(eq) = eqs[idx].as_mut() else { continue };
                eq.terms = self.simplify(&eq.terms);
                if eq.terms.is_zero() {
                    eqs[idx] = None;
                    continue;
                }
                if solved[idx].as_ref() == Some(&eq.terms) {
                    continue;
                }
                let outcome = self.local(&eq.terms, eq.columns)?;
                solved[idx] = Some(eq.terms.clone());
                match outcome {
                    LocalOutcome::Nothing => {}
                    LocalOutcome::Fix(list) => {
                        for (v, x) in list {
                            self.fix(v, x);
                        }
                        changed = true;
                    }
                    LocalOutcome::Relate {
                        target,
                        source,
                        negated,
                    } => {
                        let expr = if negated {
                            IntPoly::constant(1).add(&IntPoly::var(source).scale(-1))
                        } else {
                            IntPoly::var(source)
                        };
                        self.subs.insert(target, expr);
                        self.applications += 1;
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }
}

/// Reduces `system` to a fixed point. Fails with `Inconsistent` when the
/// split cannot hold.
pub fn propagate(
    system: &BitEquationSystem,
    bounds: &[CarryBound],
    mode: ReductionMode,
) -> Result<ReducedSystem, ReduceError> {
    let top = system.split.top_column();
    let mut engine = Engine {
        mode,
        upper: bounds.iter().map(|b| b.upper).collect(),
        fixed: BTreeMap::new(),
        subs: BTreeMap::new(),
        applications: 0,
    };
    for (v, s) in &system.variables {
        if let VarState::Fixed(x) = s {
            if let Var::Carry(c) = v {
                if *x > engine.upper[*c] {
                    return Err(ReduceError::Inconsistent {
                        columns: (c.saturating_sub(1), c.saturating_sub(1)),
                    });
                }
            }
            engine.fixed.insert(*v, *x);
        }
    }
    for b in bounds {
        if b.upper == 0 && !engine.fixed.contains_key(&Var::Carry(b.column)) {
            engine.fix(Var::Carry(b.column), 0);
        }
    }

    let mut eqs: Vec<Option<Residual>> = system
        .equations
        .iter()
        .map(|eq| {
            let mut p = IntPoly::constant(-(eq.target as i64));
            for &(k, l) in &eq.products {
                p.add_term(vec![Var::P(k), Var::Q(l)], 1);
            }
            p.add_term(vec![Var::Carry(eq.in_carry)], 1);
            p.add_term(vec![Var::Carry(eq.out_carry)], -2);
            Some(Residual {
                columns: (eq.c, eq.c),
                terms: p,
            })
        })
        .collect();

    let mut order = vec![0];
    if top > 0 {
        order.push(top);
    }
    order.extend(1..top);
    engine.run(&mut eqs, &order)?;

    // Merge columns joined by carries that are still unknown.
    let unresolved =
        |e: &Engine, c: usize| !e.fixed.contains_key(&Var::Carry(c)) && !e.subs.contains_key(&Var::Carry(c));
    let mut eliminated = Vec::new();
    let mut merged: Vec<Option<Residual>> = Vec::new();
    let mut c = 0;
    while c <= top {
        let start = c;
        let mut acc = eqs[c].as_ref().map(|r| r.terms.clone()).unwrap_or_default();
        let mut weight = 1i64;
        while c < top && unresolved(&engine, c + 1) {
            eliminated.push(Var::Carry(c + 1));
            c += 1;
            weight *= 2;
            if let Some(r) = &eqs[c] {
                acc = acc.add(&r.terms.scale(weight));
            }
        }
        debug_assert!(acc
            .vars()
            .iter()
            .all(|v| !v.is_carry() || !unresolved(&engine, carry_index(*v))));
        merged.push(if acc.is_zero() {
            None
        } else {
            Some(Residual {
                columns: (start, c),
                terms: acc,
            })
        });
        c += 1;
    }
    let order: Vec<usize> = (0..merged.len()).collect();
    engine.run(&mut merged, &order)?;

    let mut residuals: Vec<Residual> = Vec::new();
    let mut seen = BTreeSet::new();
    for r in merged.into_iter().flatten() {
        let terms = engine.simplify(&r.terms).normalized();
        if terms.is_zero() {
            continue;
        }
        if seen.insert(terms.clone()) {
            residuals.push(Residual {
                columns: r.columns,
                terms,
            });
        }
    }
    let residuals = prune_implied(residuals);

    // Resolve substitutions down to free variables.
    let mut fixed = engine.fixed.clone();
    let mut substitutions = BTreeMap::new();
    for (v, expr) in &engine.subs {
        let e = engine.simplify(expr);
        if e.is_constant() {
            fixed.insert(*v, e.constant_term());
        } else {
            let a = Affine::from_poly(&e).expect("substitutions are affine with unit coefficients");
            substitutions.insert(*v, a);
        }
    }
    let free_vars: Vec<Var> = system
        .variables
        .keys()
        .filter(|v| !v.is_carry() && !fixed.contains_key(v) && !substitutions.contains_key(v))
        .copied()
        .collect();

    Ok(ReducedSystem {
        mode,
        bounds: bounds.to_vec(),
        fixed,
        substitutions,
        eliminated_carries: eliminated,
        residual_equations: residuals,
        free_vars,
        rule_applications: engine.applications,
    })
}

fn carry_index(v: Var) -> usize {
    match v {
        Var::Carry(c) => c,
        _ => unreachable!(),
    }
}

/// Enumerates every 0/1 assignment of `vars`.
fn assignments(n: usize) -> impl Iterator<Item = u64> {
    0..(1u64 << n)
}

/// Drops equations implied by the others under binarity. Candidates are
/// visited from the most complex down.
fn prune_implied(eqs: Vec<Residual>) -> Vec<Residual> {
    let all_vars: BTreeSet<Var> = eqs.iter().flat_map(|r| r.terms.vars()).collect();
    if eqs.len() < 2 || all_vars.len() > PRUNE_CAP {
        return eqs;
    }
    let vars: Vec<Var> = all_vars.into_iter().collect();
    let idx: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    // truth[e][x] = equation e holds at assignment x
    let truth: Vec<Vec<bool>> = eqs
        .iter()
        .map(|r| {
            assignments(vars.len())
                .map(|x| r.terms.eval(|v| ((x >> idx[&v]) & 1) as i64) == 0)
                .collect()
        })
        .collect();

    let mut candidates: Vec<usize> = (0..eqs.len()).collect();
    candidates.sort_by(|&a, &b| {
        let ka = (eqs[a].terms.degree(), eqs[a].terms.len(), eqs[a].columns);
        let kb = (eqs[b].terms.degree(), eqs[b].terms.len(), eqs[b].columns);
        kb.cmp(&ka)
    });
    let mut kept = vec![true; eqs.len()];
    for &cand in &candidates {
        let implied = (0..truth[cand].len()).all(|x| {
            let others = (0..eqs.len()).filter(|&e| e != cand && kept[e]).all(|e| truth[e][x]);
            !others || truth[cand][x]
        });
        if implied {
            kept[cand] = false;
        }
    }
    eqs.into_iter().zip(kept).filter(|(_, k)| *k).map(|(e, _)| e).collect()
}

/// Checks that the reduced system's solutions are in bijection with the
/// original system's solutions (within the carry bounds).
pub fn verify_reduction(system: &BitEquationSystem, reduced: &ReducedSystem) -> Result<bool, ReduceError> {
    let orig_free = system.free_bits();
    if orig_free.len() > VERIFY_CAP {
        return Err(ReduceError::TooLarge {
            vars: orig_free.len(),
            cap: VERIFY_CAP,
        });
    }
    if reduced.free_vars.len() > VERIFY_CAP {
        return Err(ReduceError::TooLarge {
            vars: reduced.free_vars.len(),
            cap: VERIFY_CAP,
        });
    }
    let (bp, bq) = (system.split.bp, system.split.bq);
    let within_bounds = |carries: &[i64]| {
        carries
            .iter()
            .zip(&reduced.bounds)
            .all(|(c, b)| b.lower <= *c && *c <= b.upper)
    };

    let mut original = BTreeSet::new();
    for x in assignments(orig_free.len()) {
        let mut vals: BTreeMap<Var, i64> = BTreeMap::new();
        for (i, v) in orig_free.iter().enumerate() {
            vals.insert(*v, ((x >> i) & 1) as i64);
        }
        let p: Vec<i64> = (0..bp)
            .map(|k| system.fixed_value(Var::P(k)).or(vals.get(&Var::P(k)).copied()).unwrap())
            .collect();
        let q: Vec<i64> = (0..bq)
            .map(|l| system.fixed_value(Var::Q(l)).or(vals.get(&Var::Q(l)).copied()).unwrap())
            .collect();
        if let Some(c) = system.carries_for(&p, &q) {
            if within_bounds(&c) {
                original.insert((p, q, c));
            }
        }
    }

    let mut lifted = BTreeSet::new();
    for x in assignments(reduced.free_vars.len()) {
        let free: Vec<i64> = (0..reduced.free_vars.len()).map(|i| ((x >> i) & 1) as i64).collect();
        let Some(vals) = reduced.lift_bits(&free) else {
            return Ok(false);
        };
        if !reduced.residuals_hold(&vals) {
            continue;
        }
        let (Some(p), Some(q)) = (
            (0..bp)
                .map(|k| vals.get(&Var::P(k)).copied())
                .collect::<Option<Vec<i64>>>(),
            (0..bq)
                .map(|l| vals.get(&Var::Q(l)).copied())
                .collect::<Option<Vec<i64>>>(),
        ) else {
            return Ok(false);
        };
        let Some(c) = system.carries_for(&p, &q) else {
            return Ok(false);
        };
        let carries_agree = c.iter().enumerate().all(|(i, &ci)| match vals.get(&Var::Carry(i)) {
            Some(&known) => known == ci,
            None => reduced.eliminated_carries.contains(&Var::Carry(i)),
        });
        if !carries_agree || !within_bounds(&c) {
            return Ok(false);
        }
        if !lifted.insert((p, q, c)) {
            return Ok(false);
        }
    }
    Ok(lifted == original)
}

/// Builds, bounds and propagates in one call.
pub fn reduce(system: &BitEquationSystem, mode: ReductionMode) -> Result<ReducedSystem, ReduceError> {
    let bounds = carry_bounds(system);
    propagate(system, &bounds, mode)
}
