//! Piecewise-constant adiabatic evolution on a dense state vector.
//!
//! `H(s) = (1 - s)·H_i + s·H_f`. The sweep is cut into `M` pieces, piece `m`
//! holding `H_m = H(m/M)` for `Δt = T/M`, and `U_m = exp(-i·H_m·Δt)` is
//! computed exactly from an eigendecomposition (ħ = 1, energies in rad/s,
//! times in seconds). Basis index bit `i` is qubit `i`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamcomp::ZPolynomial;

pub type Matrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdiaError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("interpolation parameter {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("state norm drifted to {norm} at step {step}")]
    NormViolation { step: usize, norm: f64 },
    #[error("minimum gap is zero; the evolution time must be set explicitly")]
    DegenerateGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `H_i = J·Σ Z_j`, started from `|1…1⟩`.
    PaperCompat,
    /// `H_i = -J·Σ X_j`, started from the uniform superposition.
    #[default]
    Transverse,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-compat" => Ok(Mode::PaperCompat),
            "transverse" => Ok(Mode::Transverse),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Total time `T` in seconds.
    pub total_time: f64,
    /// Number of pieces `M`.
    pub steps: usize,
    /// Energy scale `J` in rad/s.
    pub coupling: f64,
    pub mode: Mode,
}

impl Schedule {
    pub fn new(total_time: f64, steps: usize, coupling: f64, mode: Mode) -> Result<Self, AdiaError> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(AdiaError::InvalidSchedule(format!("T = {total_time}")));
        }
        if steps == 0 {
            return Err(AdiaError::InvalidSchedule("M = 0".into()));
        }
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(AdiaError::InvalidSchedule(format!("J = {coupling}")));
        }
        Ok(Self {
            total_time,
            steps,
            coupling,
            mode,
        })
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    /// `s_m = m / M`.
    pub fn s(&self, m: usize) -> f64 {
        m as f64 / self.steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn basis(n_qubits: usize, index: u64) -> Self {
        let mut amplitudes = DVector::from_element(1 << n_qubits, ZERO);
        amplitudes[index as usize] = ONE;
        Self { n_qubits, amplitudes }
    }

    pub fn uniform(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self {
            n_qubits,
            amplitudes: DVector::from_element(dim, a),
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        let dim = amplitudes.len();
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        Self {
            n_qubits: dim.trailing_zeros() as usize,
            amplitudes: DVector::from_vec(amplitudes),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&self, u: &Matrix) -> StateVector {
        StateVector {
            n_qubits: self.n_qubits,
            amplitudes: u * &self.amplitudes,
        }
    }

    /// Total probability on the given basis states.
    pub fn population(&self, states: &[u64]) -> f64 {
        states.iter().map(|&x| self.amplitudes[x as usize].norm_sqr()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AdiabaticRun {
    pub schedule: Schedule,
    pub unitaries: Vec<Matrix>,
    /// `trajectory[0]` is the initial state, `trajectory[m]` follows `U_m`.
    pub trajectory: Vec<StateVector>,
    pub final_probabilities: BTreeMap<u64, f64>,
}

impl AdiabaticRun {
    pub fn final_state(&self) -> &StateVector {
        self.trajectory.last().unwrap()
    }
}

fn pauli_on(n: usize, qubit: usize, x_type: bool) -> Matrix {
    let dim = 1usize << n;
    let mut m = Matrix::zeros(dim, dim);
    for i in 0..dim {
        if x_type {
            m[(i ^ (1 << qubit), i)] = ONE;
        } else {
            let sign = if (i >> qubit) & 1 == 0 { 1.0 } else { -1.0 };
            m[(i, i)] = Complex64::new(sign, 0.0);
        }
    }
    m
}

/// `J·Σ Z_j` (paper-compat) or `-J·Σ X_j` (transverse).
pub fn initial_hamiltonian(n_qubits: usize, mode: Mode, coupling: f64) -> Matrix {
    let dim = 1usize << n_qubits;
    let mut h = Matrix::zeros(dim, dim);
    for q in 0..n_qubits {
        match mode {
            Mode::PaperCompat => h += pauli_on(n_qubits, q, false) * Complex64::new(coupling, 0.0),
            Mode::Transverse => h -= pauli_on(n_qubits, q, true) * Complex64::new(coupling, 0.0),
        }
    }
    h
}

/// Ground state of the initial Hamiltonian.
pub fn initial_state(n_qubits: usize, mode: Mode) -> StateVector {
    match mode {
        Mode::PaperCompat => StateVector::basis(n_qubits, (1u64 << n_qubits) - 1),
        Mode::Transverse => StateVector::uniform(n_qubits),
    }
}

/// Dense diagonal matrix `scale · H_p`.
pub fn problem_hamiltonian(h: &ZPolynomial, scale: f64) -> Matrix {
    let d = h.diagonal();
    Matrix::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|x| Complex64::new(scale * x, 0.0)),
    ))
}

pub fn interpolate(hi: &Matrix, hf: &Matrix, s: f64) -> Result<Matrix, AdiaError> {
    if hi.shape() != hf.shape() {
        return Err(AdiaError::DimensionMismatch(hi.nrows(), hf.nrows()));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(AdiaError::OutOfRange(s));
    }
    Ok(hi * Complex64::new(1.0 - s, 0.0) + hf * Complex64::new(s, 0.0))
}

pub fn is_diagonal(h: &Matrix) -> bool {
    h.iter().enumerate().all(|(k, v)| {
        let (r, c) = (k % h.nrows(), k / h.nrows());
        r == c || *v == ZERO
    })
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(h: &Matrix) -> (Vec<f64>, Matrix) {
    let n = h.nrows();
    if is_diagonal(h) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| h[(a, a)].re.total_cmp(&h[(b, b)].re));
        let vals = idx.iter().map(|&i| h[(i, i)].re).collect();
        let mut vecs = Matrix::zeros(n, n);
        for (col, &i) in idx.iter().enumerate() {
            vecs[(i, col)] = ONE;
        }
        return (vals, vecs);
    }
    if h.iter().all(|z| z.im == 0.0) {
        let eig = SymmetricEigen::new(h.map(|z| z.re));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = Matrix::from_fn(n, n, |r, c| Complex64::new(eig.eigenvectors[(r, idx[c])], 0.0));
        return (vals, vecs);
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn spectrum(h: &Matrix) -> Vec<f64> {
    eigh(h).0
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(h: &Matrix) -> f64 {
    spectrum(h).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `exp(-i·H·t)` for Hermitian `H`.
pub fn expm_hermitian(h: &Matrix, t: f64) -> Matrix {
    let n = h.nrows();
    if is_diagonal(h) {
        return Matrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::from_polar(1.0, -h[(r, r)].re * t)
            } else {
                ZERO
            }
        });
    }
    let (vals, vecs) = eigh(h);
    let phases = DVector::from_iterator(n, vals.iter().map(|e| Complex64::from_polar(1.0, -e * t)));
    &vecs * Matrix::from_diagonal(&phases) * vecs.adjoint()
}

/// Step Hamiltonians `H_m`, `m = 1..=M`.
pub fn step_hamiltonians(hi: &Matrix, hf: &Matrix, schedule: &Schedule) -> Result<Vec<Matrix>, AdiaError> {
    (1..=schedule.steps)
        .map(|m| interpolate(hi, hf, schedule.s(m)))
        .collect()
}

pub fn step_unitaries(hi: &Matrix, hf: &Matrix, schedule: &Schedule) -> Result<Vec<Matrix>, AdiaError> {
    let dt = schedule.dt();
    Ok(step_hamiltonians(hi, hf, schedule)?
        .iter()
        .map(|h| expm_hermitian(h, dt))
        .collect())
}

/// Unwrapped phases `-E_k·Δt` (radians) of every diagonal step unitary, or
/// `None` if either Hamiltonian has off-diagonal entries.
pub fn step_phases(hi: &Matrix, hf: &Matrix, schedule: &Schedule) -> Result<Option<Vec<Vec<f64>>>, AdiaError> {
    if !is_diagonal(hi) || !is_diagonal(hf) {
        return Ok(None);
    }
    let dt = schedule.dt();
    let hs = step_hamiltonians(hi, hf, schedule)?;
    Ok(Some(
        hs.iter()
            .map(|h| (0..h.nrows()).map(|k| -h[(k, k)].re * dt).collect())
            .collect(),
    ))
}

/// Applies `U_1` first and `U_M` last.
pub fn evolve(initial: &StateVector, unitaries: &[Matrix], schedule: Schedule) -> Result<AdiabaticRun, AdiaError> {
    let n0 = initial.norm();
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(AdiaError::NormViolation { step: 0, norm: n0 });
    }
    let mut trajectory = Vec::with_capacity(unitaries.len() + 1);
    trajectory.push(initial.clone());
    for (m, u) in unitaries.iter().enumerate() {
        let next = trajectory.last().unwrap().apply(u);
        let norm = next.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(AdiaError::NormViolation { step: m + 1, norm });
        }
        trajectory.push(next);
    }
    let final_probabilities = trajectory
        .last()
        .unwrap()
        .probabilities()
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i as u64, p))
        .collect();
    Ok(AdiabaticRun {
        schedule,
        unitaries: unitaries.to_vec(),
        trajectory,
        final_probabilities,
    })
}

/// Propagates without storing unitaries or the trajectory.
pub fn evolve_final(
    initial: &StateVector,
    hi: &Matrix,
    hf: &Matrix,
    schedule: &Schedule,
) -> Result<StateVector, AdiaError> {
    let dt = schedule.dt();
    let mut psi = initial.clone();
    for m in 1..=schedule.steps {
        let h = interpolate(hi, hf, schedule.s(m))?;
        psi = psi.apply(&expm_hermitian(&h, dt));
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(AdiaError::NormViolation { step: m, norm });
        }
    }
    Ok(psi)
}

/// `max |U†U - I|`.
pub fn unitarity_error(u: &Matrix) -> f64 {
    let d = u.adjoint() * u - Matrix::identity(u.nrows(), u.ncols());
    d.iter().fold(0.0f64, |m, x| m.max(x.norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    /// `(s, levels ascending)`.
    pub points: Vec<(f64, Vec<f64>)>,
    /// Minimum of `E_1 - E_0` over the scan.
    pub min_gap: f64,
    pub min_gap_s: f64,
    /// `E_1 - E_0` vanished somewhere on the scan.
    pub degenerate: bool,
    /// Multiplicity of the lowest level of `H_f`.
    pub ground_degeneracy: usize,
    /// Minimum of `E_g - E_0` with `g = ground_degeneracy`: the gap from the
    /// ground state to the first level not ending in the final ground space.
    /// `None` when `H_f` is degenerate across its whole spectrum.
    pub band_gap: Option<f64>,
}

impl GapScan {
    /// `s,level0,level1,...` with levels divided by `unit`.
    pub fn to_csv(&self, unit: f64) -> String {
        let width = self.points.first().map_or(0, |p| p.1.len());
        let mut out = String::from("s");
        for k in 0..width {
            out.push_str(&format!(",level{k}"));
        }
        out.push('\n');
        for (s, levels) in &self.points {
            out.push_str(&s.to_string());
            for e in levels {
                out.push(',');
                out.push_str(&(e / unit).to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn degeneracy_tol(scale: f64) -> f64 {
    1e-9 * scale.max(1.0)
}

/// Full spectrum of `H(s)` at `resolution` uniformly spaced points.
pub fn gap_scan(hi: &Matrix, hf: &Matrix, resolution: usize) -> Result<GapScan, AdiaError> {
    if resolution < 2 {
        return Err(AdiaError::InvalidSchedule(format!("resolution {resolution} < 2")));
    }
    if hi.shape() != hf.shape() {
        return Err(AdiaError::DimensionMismatch(hi.nrows(), hf.nrows()));
    }
    let scale = spectral_norm(hi).max(spectral_norm(hf));
    let tol = degeneracy_tol(scale);
    let final_levels = spectrum(hf);
    let g = final_levels
        .iter()
        .take_while(|e| (**e - final_levels[0]).abs() <= tol)
        .count();

    let mut points = Vec::with_capacity(resolution);
    let mut min_gap = f64::INFINITY;
    let mut min_gap_s = 0.0;
    let mut band_gap: Option<f64> = None;
    for k in 0..resolution {
        let s = k as f64 / (resolution - 1) as f64;
        let levels = spectrum(&interpolate(hi, hf, s)?);
        if levels.len() > 1 {
            let gap = levels[1] - levels[0];
            if gap < min_gap {
                min_gap = gap;
                min_gap_s = s;
            }
        }
        if g < levels.len() {
            let bg = levels[g] - levels[0];
            band_gap = Some(band_gap.map_or(bg, |b: f64| b.min(bg)));
        }
        points.push((s, levels));
    }
    if !min_gap.is_finite() {
        min_gap = 0.0;
    }
    let degenerate = min_gap <= tol;
    if degenerate {
        min_gap = 0.0;
    }
    Ok(GapScan {
        points,
        min_gap,
        min_gap_s,
        degenerate,
        ground_degeneracy: g,
        band_gap,
    })
}

/// Heuristic sufficient time `‖H_f - H_i‖ / (ε·Δ²)`, with `Δ` the scanned
/// gap above the final ground band.
pub fn runtime_bound(hi: &Matrix, hf: &Matrix, epsilon: f64, resolution: usize) -> Result<f64, AdiaError> {
    let diff = hf - hi;
    let norm = spectral_norm(&diff);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let scan = gap_scan(hi, hf, resolution)?;
    let scale = spectral_norm(hi).max(spectral_norm(hf));
    match scan.band_gap {
        Some(d) if d > degeneracy_tol(scale) => Ok(norm / (epsilon * d * d)),
        _ => Err(AdiaError::DegenerateGap),
    }
}
