//! Shot sampling, single-qubit linear-inversion tomography and factor readout.
//!
//! Sampling is driven by ChaCha8 seeded from the run seed. Register readout
//! uses stream 0; tomography of qubit `q` in basis `b` (Z=0, X=1, Y=2) uses
//! stream `1 + 3q + b`, so every draw is reproducible on its own.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adia::StateVector;
use crate::bitplan::BitEquationSystem;
use crate::hamcomp::CompiledProblem;
use crate::reducer::ReducedSystem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TomoError {
    #[error("no counts for the {0} basis")]
    BasisMissing(Basis),
    #[error("counts refer to different qubits")]
    QubitMismatch,
    #[error("no maximal outcome lifts to a factorization of {n}")]
    NotAFactorization { n: u64 },
    #[error("shots must be positive")]
    NoShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    fn index(self) -> u64 {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
            Basis::Y => 2,
        }
    }

    /// Pre-rotation applied before a Z measurement.
    pub fn rotation(self) -> [[Complex64; 2]; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| Complex64::new(x, 0.0);
        let i = |x: f64| Complex64::new(0.0, x);
        match self {
            Basis::Z => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
            Basis::X => [[r(s), r(s)], [r(s), r(-s)]],
            // H·S†
            Basis::Y => [[r(s), i(-s)], [r(s), i(s)]],
        }
    }

    /// Pre-rotation gates in application order.
    pub fn gates(self, q: usize) -> Vec<crate::gatedec::Gate> {
        use crate::gatedec::Gate;
        match self {
            Basis::Z => vec![],
            Basis::X => vec![Gate::H { q }],
            Basis::Y => vec![Gate::Sdg { q }, Gate::H { q }],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementCounts {
    pub basis: Basis,
    pub shots: u64,
    pub seed: u64,
    /// Measured qubit, or `None` for a full register readout.
    pub qubit: Option<usize>,
    /// Outcome bitstring (qubit 0 rightmost) to count.
    pub counts: BTreeMap<String, u64>,
}

impl MeasurementCounts {
    pub fn count(&self, outcome: &str) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    /// `(n₀ - n₁) / shots` for a single-qubit record.
    pub fn expectation(&self) -> f64 {
        (self.count("0") as f64 - self.count("1") as f64) / self.shots as f64
    }

    /// Counts keyed by basis index.
    pub fn weights(&self) -> BTreeMap<u64, f64> {
        self.counts
            .iter()
            .map(|(k, v)| (u64::from_str_radix(k, 2).unwrap_or(0), *v as f64))
            .collect()
    }
}

pub fn bitstring(x: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Reduced density matrix of one qubit.
pub fn reduced_density(state: &StateVector, qubit: usize) -> DensityMatrix1Q {
    let amps = state.amplitudes();
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for x in 0..amps.len() {
        if (x >> qubit) & 1 == 0 {
            let y = x | (1 << qubit);
            let (a0, a1) = (amps[x], amps[y]);
            m[0][0] += a0 * a0.conj();
            m[0][1] += a0 * a1.conj();
            m[1][0] += a1 * a0.conj();
            m[1][1] += a1 * a1.conj();
        }
    }
    DensityMatrix1Q { m }
}

/// Outcome probabilities `(p₀, p₁)` after the basis pre-rotation.
pub fn basis_probabilities(rho: &DensityMatrix1Q, basis: Basis) -> (f64, f64) {
    let r = basis.rotation();
    let p = |k: usize| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                acc += r[k][a] * rho.m[a][b] * r[k][b].conj();
            }
        }
        acc.re
    };
    (p(0), p(1))
}

/// Samples one qubit in `basis`; other qubits are traced out.
pub fn sample(
    state: &StateVector,
    qubit: usize,
    basis: Basis,
    shots: u64,
    seed: u64,
) -> Result<MeasurementCounts, TomoError> {
    if shots == 0 {
        return Err(TomoError::NoShots);
    }
    let (p0, _) = basis_probabilities(&reduced_density(state, qubit), basis);
    let mut r = rng(seed, 1 + 3 * qubit as u64 + basis.index());
    let zeros = (0..shots).filter(|_| r.random::<f64>() < p0).count() as u64;
    let mut counts = BTreeMap::new();
    if zeros > 0 {
        counts.insert("0".to_string(), zeros);
    }
    if zeros < shots {
        counts.insert("1".to_string(), shots - zeros);
    }
    Ok(MeasurementCounts {
        basis,
        shots,
        seed,
        qubit: Some(qubit),
        counts,
    })
}

/// Samples the whole register in the computational basis.
pub fn sample_register(state: &StateVector, shots: u64, seed: u64) -> Result<MeasurementCounts, TomoError> {
    if shots == 0 {
        return Err(TomoError::NoShots);
    }
    let probs = state.probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut r = rng(seed, 0);
    let mut hits = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u = r.random::<f64>() * acc;
        let k = cdf.partition_point(|c| *c <= u).min(probs.len() - 1);
        hits[k] += 1;
    }
    let counts = hits
        .iter()
        .enumerate()
        .filter(|(_, h)| **h > 0)
        .map(|(k, h)| (bitstring(k as u64, state.n_qubits()), *h))
        .collect();
    Ok(MeasurementCounts {
        basis: Basis::Z,
        shots,
        seed,
        qubit: None,
        counts,
    })
}

/// Single-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix1Q {
    pub m: [[Complex64; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    real: [[f64; 2]; 2],
    imag: [[f64; 2]; 2],
}

impl Serialize for DensityMatrix1Q {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let part = |f: fn(&Complex64) -> f64| {
            [
                [f(&self.m[0][0]), f(&self.m[0][1])],
                [f(&self.m[1][0]), f(&self.m[1][1])],
            ]
        };
        DensityRepr {
            real: part(|z| z.re),
            imag: part(|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix1Q {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = DensityRepr::deserialize(d)?;
        let z = |i: usize, j: usize| Complex64::new(r.real[i][j], r.imag[i][j]);
        Ok(Self {
            m: [[z(0, 0), z(0, 1)], [z(1, 0), z(1, 1)]],
        })
    }
}

impl DensityMatrix1Q {
    /// `½(I + xX + yY + zZ)`.
    pub fn from_bloch([x, y, z]: [f64; 3]) -> Self {
        let h = |a: f64, b: f64| Complex64::new(a / 2.0, b / 2.0);
        Self {
            m: [[h(1.0 + z, 0.0), h(x, -y)], [h(x, y), h(1.0 - z, 0.0)]],
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        [
            2.0 * self.m[1][0].re,
            2.0 * self.m[1][0].im,
            (self.m[0][0] - self.m[1][1]).re,
        ]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = (self.m[0][1] - self.m[1][0].conj()).norm();
        d.max(self.m[0][0].im.abs()).max(self.m[1][1].im.abs())
    }

    /// Eigenvalues `(1 ± |r|)/2`, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let r = norm3(self.bloch());
        let t = self.trace().re;
        [(t - r) / 2.0, (t + r) / 2.0]
    }

    /// Nearest state with `|r| <= 1`.
    pub fn clamped(&self) -> Self {
        let b = self.bloch();
        let r = norm3(b);
        if r <= 1.0 {
            *self
        } else {
            Self::from_bloch(b.map(|x| x / r))
        }
    }

    pub fn trace_distance(&self, other: &Self) -> f64 {
        let (a, b) = (self.bloch(), other.bloch());
        norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]]) / 2.0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub qubit: usize,
    pub rho: DensityMatrix1Q,
    /// Trace distance to the nearest physical state.
    pub unphysicality: f64,
}

/// Linear inversion from Z, X and Y records of one qubit.
pub fn reconstruct(records: &[MeasurementCounts]) -> Result<Reconstruction, TomoError> {
    let find = |b: Basis| records.iter().find(|r| r.basis == b).ok_or(TomoError::BasisMissing(b));
    let (z, x, y) = (find(Basis::Z)?, find(Basis::X)?, find(Basis::Y)?);
    if z.qubit != x.qubit || z.qubit != y.qubit || z.qubit.is_none() {
        return Err(TomoError::QubitMismatch);
    }
    let rho = DensityMatrix1Q::from_bloch([x.expectation(), y.expectation(), z.expectation()]);
    Ok(Reconstruction {
        qubit: z.qubit.unwrap(),
        rho,
        unphysicality: rho.trace_distance(&rho.clamped()),
    })
}

/// Exact `⟨σ_b⟩` obtained through the same pre-rotation as sampling.
pub fn exact_expectation(state: &StateVector, qubit: usize, basis: Basis) -> f64 {
    let (p0, p1) = basis_probabilities(&reduced_density(state, qubit), basis);
    p0 - p1
}

/// Reconstruction from exact expectations instead of counts.
pub fn ideal_reconstruction(state: &StateVector, qubit: usize) -> DensityMatrix1Q {
    DensityMatrix1Q::from_bloch([
        exact_expectation(state, qubit, Basis::X),
        exact_expectation(state, qubit, Basis::Y),
        exact_expectation(state, qubit, Basis::Z),
    ])
}

/// Z, X and Y records for one qubit.
pub fn tomography(
    state: &StateVector,
    qubit: usize,
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementCounts>, TomoError> {
    Basis::ALL
        .iter()
        .map(|b| sample(state, qubit, *b, shots, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPair {
    pub p: u64,
    pub q: u64,
    /// Basis outcome the pair was lifted from.
    pub outcome: u64,
}

const TIE_TOL: f64 = 1e-9;

/// Lifts the most likely outcome(s) to `(P, Q)` with `P·Q = N`, `P <= Q`.
/// Among tied outcomes the smallest verified `P` wins.
pub fn extract_factors(
    weights: &BTreeMap<u64, f64>,
    compiled: &CompiledProblem,
    system: &BitEquationSystem,
    reduced: Option<&ReducedSystem>,
) -> Result<FactorPair, TomoError> {
    let n = system.instance.n();
    let fail = TomoError::NotAFactorization { n };
    let best = weights.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() || best <= 0.0 {
        return Err(fail);
    }
    let scale = weights.values().sum::<f64>().max(1.0);
    let mut found: Option<FactorPair> = None;
    for (&x, &w) in weights {
        if best - w > TIE_TOL * scale {
            continue;
        }
        let Some((a, b)) = compiled.lift(x, system, reduced) else {
            continue;
        };
        let (p, q) = (a.min(b), a.max(b));
        if p > 1 && p.checked_mul(q) == Some(n) && found.is_none_or(|f| p < f.p) {
            found = Some(FactorPair { p, q, outcome: x });
        }
    }
    found.ok_or(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> f64 {
        x * std::f64::consts::FRAC_1_SQRT_2
    }

    fn state(a: Complex64, b: Complex64) -> StateVector {
        StateVector::from_amplitudes(vec![a, b])
    }

    #[test]
    fn eigenstate_z() {
        let c = sample(&StateVector::basis(1, 0), 0, Basis::Z, 8192, 1).unwrap();
        assert_eq!(c.count("0"), 8192);
        assert_eq!(c.counts.len(), 1);
    }

    #[test]
    fn minus_state_x() {
        let psi = state(Complex64::new(s(1.0), 0.0), Complex64::new(s(-1.0), 0.0));
        let c = sample(&psi, 0, Basis::X, 8192, 7).unwrap();
        assert_eq!(c.count("1"), 8192);
    }

    #[test]
    fn plus_i_state_y_gives_outcome_zero() {
        let psi = state(Complex64::new(s(1.0), 0.0), Complex64::new(0.0, s(1.0)));
        let c = sample(&psi, 0, Basis::Y, 8192, 3).unwrap();
        assert_eq!(c.count("0"), 8192);
        assert!((exact_expectation(&psi, 0, Basis::Y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_counts_reconstruct_exactly() {
        let rec = |psi: &StateVector| {
            let recs: Vec<_> = Basis::ALL
                .iter()
                .map(|b| sample(psi, 0, *b, 4096, 0).unwrap())
                .collect();
            reconstruct(&recs).unwrap().rho
        };
        let zero = rec(&StateVector::basis(1, 0));
        assert_eq!(zero.bloch()[2], 1.0);
        // |0⟩ has random X and Y records, so only the exact route is exact.
        let exact = ideal_reconstruction(&StateVector::basis(1, 0), 0);
        assert_eq!(exact, DensityMatrix1Q::from_bloch([0.0, 0.0, 1.0]));
        let minus = state(Complex64::new(s(1.0), 0.0), Complex64::new(s(-1.0), 0.0));
        let rho = ideal_reconstruction(&minus, 0);
        assert!(rho.max_abs_diff(&DensityMatrix1Q::from_bloch([-1.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn missing_basis_reported() {
        let psi = StateVector::basis(1, 0);
        let recs = vec![
            sample(&psi, 0, Basis::Z, 10, 0).unwrap(),
            sample(&psi, 0, Basis::X, 10, 0).unwrap(),
        ];
        assert_eq!(reconstruct(&recs).unwrap_err(), TomoError::BasisMissing(Basis::Y));
    }

    #[test]
    fn sampling_is_deterministic() {
        let psi = StateVector::uniform(2);
        assert_eq!(sample(&psi, 1, Basis::Z, 1000, 42), sample(&psi, 1, Basis::Z, 1000, 42));
        assert_ne!(sample(&psi, 1, Basis::Z, 1000, 42), sample(&psi, 1, Basis::Z, 1000, 43));
        let a = sample_register(&psi, 1000, 5).unwrap();
        assert_eq!(a, sample_register(&psi, 1000, 5).unwrap());
        assert_eq!(a.counts.values().sum::<u64>(), 1000);
        assert!(a.counts.keys().all(|k| k.len() == 2));
    }

    #[test]
    fn bitstring_order() {
        assert_eq!(bitstring(1, 3), "001");
        assert_eq!(bitstring(6, 3), "110");
    }

    #[test]
    fn reduced_density_of_product_state() {
        // qubit 0 in |1⟩, qubit 1 in |+⟩
        let h = s(1.0);
        let psi = StateVector::from_amplitudes(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
        ]);
        assert!(reduced_density(&psi, 0).max_abs_diff(&DensityMatrix1Q::from_bloch([0.0, 0.0, -1.0])) < 1e-12);
        assert!(reduced_density(&psi, 1).max_abs_diff(&DensityMatrix1Q::from_bloch([1.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn density_json_shape() {
        let rho = DensityMatrix1Q::from_bloch([0.0, 1.0, 0.0]);
        let v = serde_json::to_value(rho).unwrap();
        assert_eq!(v["imag"][1][0], 0.5);
        let back: DensityMatrix1Q = serde_json::from_value(v).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn clamping_reports_distance() {
        let rho = DensityMatrix1Q::from_bloch([1.2, 0.0, 0.0]);
        assert!(rho.eigenvalues()[0] < 0.0);
        assert!((rho.trace_distance(&rho.clamped()) - 0.1).abs() < 1e-12);
    }
}
