//! Binary multiplication tables and column-wise carry equations.
//!
//! For a candidate split `(b_p, b_q)` the product `P·Q` is laid out as a long
//! multiplication. Column `c` collects every partial product `p_{c-l} q_l`
//! with `c_min <= l <= c_max` and yields
//!
//! ```text
//! Σ p_{c-l} q_l + C_c - 2·C_{c+1} = n_c
//! ```
//!
//! where `C_c` is the cumulative carry flowing into column `c`. All bit
//! indices are least-significant first.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("N = {0} is even")]
    Even(u64),
    #[error("N = {0} is below the smallest admissible value 9")]
    TooSmall(u64),
    #[error("N = {0} is a perfect square")]
    PerfectSquare(u64),
}

/// An odd, non-square integer `N >= 9` together with its binary digits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct BiPrimeInstance {
    n: u64,
    bits: Vec<u8>,
}

impl BiPrimeInstance {
    pub fn new(n: u64) -> Result<Self, InstanceError> {
        if n < 9 {
            return Err(InstanceError::TooSmall(n));
        }
        if n.is_multiple_of(2) {
            return Err(InstanceError::Even(n));
        }
        let r = isqrt(n);
        if r * r == n {
            return Err(InstanceError::PerfectSquare(n));
        }
        let len = 64 - n.leading_zeros() as usize;
        let bits = (0..len).map(|j| ((n >> j) & 1) as u8).collect();
        Ok(Self { n, bits })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Bit length `b_n`.
    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    /// Digit `n_j`; zero beyond the bit length.
    pub fn bit(&self, j: usize) -> u8 {
        self.bits.get(j).copied().unwrap_or(0)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

impl TryFrom<u64> for BiPrimeInstance {
    type Error = InstanceError;
    fn try_from(n: u64) -> Result<Self, Self::Error> {
        Self::new(n)
    }
}

impl From<BiPrimeInstance> for u64 {
    fn from(i: BiPrimeInstance) -> u64 {
        i.n
    }
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}

/// Bit-length split of the two factors, `b_p <= b_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Split {
    pub bp: usize,
    pub bq: usize,
}

impl Split {
    pub fn new(bp: usize, bq: usize) -> Self {
        Self { bp, bq }
    }

    /// Index of the highest column, `b_p + b_q - 2`.
    pub fn top_column(&self) -> usize {
        self.bp + self.bq - 2
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.bp, self.bq)
    }
}

/// Which of the two admissible length relations a split satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCase {
    /// `b_p + b_q = b_n`, terminal carry 1.
    A,
    /// `b_p + b_q = b_n + 1`, terminal carry 0.
    B,
}

/// All candidate splits, Case A first, balanced splits first within a case.
pub fn enumerate_splits(instance: &BiPrimeInstance) -> Vec<Split> {
    let bn = instance.bit_len();
    let mut out = Vec::new();
    for total in [bn, bn + 1] {
        let mut bp = total / 2;
        while bp >= 2 {
            out.push(Split::new(bp, total - bp));
            bp -= 1;
        }
    }
    out
}

/// Identity of a bit or carry variable.
///
/// Serialized as `p3`, `q1`, `C4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    P(usize),
    Q(usize),
    Carry(usize),
}

impl Var {
    pub fn is_carry(&self) -> bool {
        matches!(self, Var::Carry(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::P(i) => write!(f, "p{i}"),
            Var::Q(i) => write!(f, "q{i}"),
            Var::Carry(i) => write!(f, "C{i}"),
        }
    }
}

impl FromStr for Var {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, tail) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let idx: usize = tail.parse().map_err(|_| format!("bad variable name `{s}`"))?;
        match head {
            "p" => Ok(Var::P(idx)),
            "q" => Ok(Var::Q(idx)),
            "C" => Ok(Var::Carry(idx)),
            _ => Err(format!("bad variable name `{s}`")),
        }
    }
}

impl Serialize for Var {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "state", content = "value")]
pub enum VarState {
    Free,
    Fixed(i64),
    Substituted,
}

/// `Σ p_{c-l} q_l + C_c - 2·C_{c+1} = n_c` for one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnEquation {
    pub c: usize,
    /// `(k, l)` pairs with `k + l = c`.
    pub products: Vec<(usize, usize)>,
    pub in_carry: usize,
    pub out_carry: usize,
    pub target: u8,
}

impl ColumnEquation {
    /// Left side minus right side for a concrete assignment.
    pub fn residual(&self, p: &[i64], q: &[i64], carries: &[i64]) -> i64 {
        let s: i64 = self.products.iter().map(|&(k, l)| p[k] * q[l]).sum();
        s + carries[self.in_carry] - 2 * carries[self.out_carry] - self.target as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitEquationSystem {
    pub instance: BiPrimeInstance,
    pub split: Split,
    pub case: SplitCase,
    pub equations: Vec<ColumnEquation>,
    pub variables: BTreeMap<Var, VarState>,
}

pub fn build_system(instance: &BiPrimeInstance, split: Split) -> BitEquationSystem {
    let Split { bp, bq } = split;
    assert!(bp >= 2 && bq >= bp, "invalid split {split}");
    let top = split.top_column();
    let case = if bp + bq == instance.bit_len() {
        SplitCase::A
    } else {
        SplitCase::B
    };

    let equations = (0..=top)
        .map(|c| {
            let lo = c.saturating_sub(bp - 1);
            let hi = c.min(bq - 1);
            ColumnEquation {
                c,
                products: (lo..=hi).map(|l| (c - l, l)).collect(),
                in_carry: c,
                out_carry: c + 1,
                target: instance.bit(c),
            }
        })
        .collect();

    let mut variables = BTreeMap::new();
    for k in 0..bp {
        let fixed = k == 0 || k == bp - 1;
        variables.insert(Var::P(k), if fixed { VarState::Fixed(1) } else { VarState::Free });
    }
    for l in 0..bq {
        let fixed = l == 0 || l == bq - 1;
        variables.insert(Var::Q(l), if fixed { VarState::Fixed(1) } else { VarState::Free });
    }
    for c in 0..=top + 1 {
        variables.insert(Var::Carry(c), VarState::Free);
    }
    variables.insert(Var::Carry(0), VarState::Fixed(0));
    // Comparing the telescoped sum with the digits of N pins the last carry.
    let terminal = match case {
        SplitCase::A => 1,
        SplitCase::B => 0,
    };
    variables.insert(Var::Carry(top + 1), VarState::Fixed(terminal));

    BitEquationSystem {
        instance: instance.clone(),
        split,
        case,
        equations,
        variables,
    }
}

impl BitEquationSystem {
    pub fn carry_count(&self) -> usize {
        self.split.top_column() + 2
    }

    pub fn fixed_value(&self, v: Var) -> Option<i64> {
        match self.variables.get(&v) {
            Some(VarState::Fixed(x)) => Some(*x),
            _ => None,
        }
    }

    /// P and Q bits that are not fixed by construction.
    pub fn free_bits(&self) -> Vec<Var> {
        self.variables
            .iter()
            .filter(|(v, s)| !v.is_carry() && **s == VarState::Free)
            .map(|(v, _)| *v)
            .collect()
    }

    /// Carries implied by the bit vectors, or `None` if some column fails.
    pub fn carries_for(&self, p: &[i64], q: &[i64]) -> Option<Vec<i64>> {
        let mut carries = vec![0i64; self.carry_count()];
        for eq in &self.equations {
            let s: i64 = eq.products.iter().map(|&(k, l)| p[k] * q[l]).sum();
            let t = s + carries[eq.in_carry] - eq.target as i64;
            if t < 0 || t % 2 != 0 {
                return None;
            }
            carries[eq.out_carry] = t / 2;
        }
        let last = *carries.last().unwrap();
        if self.fixed_value(Var::Carry(self.carry_count() - 1)) != Some(last) {
            return None;
        }
        Some(carries)
    }

    /// Multiplication table in display order (most significant column left).
    pub fn render_table(&self) -> String {
        let top = self.split.top_column();
        let ncols = top + 2;
        let name_p = |k: usize| self.bit_label(Var::P(k));
        let name_q = |l: usize| self.bit_label(Var::Q(l));

        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        let mut pr = vec![String::new(); ncols];
        for (k, cell) in pr.iter_mut().take(self.split.bp).enumerate() {
            *cell = name_p(k);
        }
        rows.push(("P".into(), pr));
        let mut qr = vec![String::new(); ncols];
        for (l, cell) in qr.iter_mut().take(self.split.bq).enumerate() {
            *cell = name_q(l);
        }
        rows.push(("Q".into(), qr));
        for l in 0..self.split.bq {
            let mut r = vec![String::new(); ncols];
            for k in 0..self.split.bp {
                r[k + l] = product_label(&name_p(k), &name_q(l));
            }
            rows.push((format!("l={l}"), r));
        }
        let cr = (0..ncols).map(|c| format!("C{c}")).collect();
        rows.push(("carry".into(), cr));
        let nr = (0..ncols).map(|c| self.instance.bit(c).to_string()).collect();
        rows.push(("n_j".into(), nr));

        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let cell_w = rows
            .iter()
            .flat_map(|(_, r)| r.iter().map(String::len))
            .max()
            .unwrap_or(1)
            .max(2);
        let mut out = String::new();
        out.push_str(&format!("{:label_w$} |", "c"));
        for c in (0..ncols).rev() {
            out.push_str(&format!(" {:>cell_w$}", c));
        }
        out.push('\n');
        out.push_str(&"-".repeat(label_w + 2 + ncols * (cell_w + 1)));
        out.push('\n');
        for (label, r) in rows {
            out.push_str(&format!("{label:label_w$} |"));
            for c in (0..ncols).rev() {
                out.push_str(&format!(" {:>cell_w$}", r[c]));
            }
            out.push('\n');
        }
        out
    }

    /// Table as JSON: columns keyed by `c`, product rows keyed by `l`.
    pub fn table_json(&self) -> serde_json::Value {
        let top = self.split.top_column();
        let columns: serde_json::Map<String, serde_json::Value> = (0..=top + 1)
            .map(|c| {
                let mut rows = serde_json::Map::new();
                if let Some(eq) = self.equations.get(c) {
                    for &(k, l) in &eq.products {
                        rows.insert(
                            l.to_string(),
                            product_label(&self.bit_label(Var::P(k)), &self.bit_label(Var::Q(l))).into(),
                        );
                    }
                }
                let col = serde_json::json!({
                    "rows": rows,
                    "carry": format!("C{c}"),
                    "n": self.instance.bit(c),
                });
                (c.to_string(), col)
            })
            .collect();
        serde_json::json!({
            "n": self.instance.n(),
            "split": self.split,
            "columns": columns,
        })
    }

    fn bit_label(&self, v: Var) -> String {
        match self.fixed_value(v) {
            Some(x) => x.to_string(),
            None => v.to_string(),
        }
    }
}

fn product_label(a: &str, b: &str) -> String {
    match (a, b) {
        ("1", x) | (x, "1") => x.to_string(),
        ("0", _) | (_, "0") => "0".to_string(),
        _ => format!("{a}{b}"),
    }
}
