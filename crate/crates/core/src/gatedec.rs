//! Gate-level form of the step unitaries and OpenQASM 2.0 interchange.
//!
//! Programs list gates in application order. Diagonal single-qubit steps
//! become `X, U1(θ₁), X, U1(θ₂)`, which multiplies out to
//! `diag(e^{iθ₁}, e^{iθ₂})`. Steps with a transverse field are Trotterized:
//! RX layers for the field and CNOT-ladder/RZ phase polynomials for the
//! diagonal part.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adia::{Matrix, Mode};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("matrix is not diagonal (off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),
    #[error("diagonal entry has modulus {0}, expected 1")]
    NotUnitModulus(f64),
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("hamiltonian is not a diagonal part plus single-qubit X terms")]
    UnsupportedStructure,
    #[error("trotter order must be 1 or 2, got {0}")]
    UnsupportedOrder(usize),
    #[error("gate {0} is invalid for a {1}-qubit program")]
    InvalidGate(String, usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QasmError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing qreg declaration")]
    NoRegister,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    X {
        q: usize,
    },
    H {
        q: usize,
    },
    Sdg {
        q: usize,
    },
    /// `diag(1, e^{iθ})`.
    U1 {
        q: usize,
        theta: f64,
    },
    /// `exp(-iθZ/2)`.
    Rz {
        q: usize,
        theta: f64,
    },
    /// `exp(-iθX/2)`.
    Rx {
        q: usize,
        theta: f64,
    },
    Cx {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X { q } | Gate::H { q } | Gate::Sdg { q } => vec![q],
            Gate::U1 { q, .. } | Gate::Rz { q, .. } | Gate::Rx { q, .. } => vec![q],
            Gate::Cx { control, target } => vec![control, target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::U1 { theta, .. } | Gate::Rz { theta, .. } | Gate::Rx { theta, .. } => Some(theta),
            _ => None,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<(), DecomposeError> {
        let bad = || DecomposeError::InvalidGate(format!("{self:?}"), n_qubits);
        if self.qubits().iter().any(|&q| q >= n_qubits) {
            return Err(bad());
        }
        if let Gate::Cx { control, target } = self {
            if control == target {
                return Err(bad());
            }
        }
        if self.angle().is_some_and(|t| !t.is_finite()) {
            return Err(bad());
        }
        Ok(())
    }

    /// 2x2 matrix of a single-qubit gate.
    fn matrix_1q(&self) -> [[Complex64; 2]; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            Gate::X { .. } => [[ZERO, ONE], [ONE, ZERO]],
            Gate::H { .. } => [[c(s), c(s)], [c(s), c(-s)]],
            Gate::Sdg { .. } => [[ONE, ZERO], [ZERO, Complex64::new(0.0, -1.0)]],
            Gate::U1 { theta, .. } => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, theta)]],
            Gate::Rz { theta, .. } => [
                [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
                [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
            ],
            Gate::Rx { theta, .. } => {
                let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                [[c(co), Complex64::new(0.0, -si)], [Complex64::new(0.0, -si), c(co)]]
            }
            Gate::Cx { .. } => unreachable!("two-qubit gate"),
        }
    }

    /// Applies the gate in place to a state vector.
    pub fn apply(&self, state: &mut [Complex64]) {
        if let Gate::Cx { control, target } = *self {
            for i in 0..state.len() {
                if (i >> control) & 1 == 1 && (i >> target) & 1 == 0 {
                    state.swap(i, i | (1 << target));
                }
            }
            return;
        }
        let q = self.qubits()[0];
        let m = self.matrix_1q();
        for i in 0..state.len() {
            if (i >> q) & 1 == 0 {
                let j = i | (1 << q);
                let (a, b) = (state[i], state[j]);
                state[i] = m[0][0] * a + m[0][1] * b;
                state[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateProgram {
    pub n_qubits: usize,
    /// Index 0 is applied first.
    pub gates: Vec<Gate>,
    /// Step index `m` this program implements, if any.
    pub source_step: Option<usize>,
    pub mode: Option<Mode>,
}

impl GateProgram {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            source_step: None,
            mode: None,
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), DecomposeError> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, other: &GateProgram) -> Result<(), DecomposeError> {
        for g in &other.gates {
            self.push(*g)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), DecomposeError> {
        self.gates.iter().try_for_each(|g| g.validate(self.n_qubits))
    }

    /// Merges adjacent U1s on a qubit and cancels adjacent X pairs.
    pub fn peephole(&self) -> GateProgram {
        let mut out: Vec<Gate> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match (out.last().copied(), *g) {
                (_, Gate::U1 { theta: 0.0, .. }) => {}
                (Some(Gate::X { q: a }), Gate::X { q: b }) if a == b => {
                    out.pop();
                }
                (Some(Gate::U1 { q: a, theta: t1 }), Gate::U1 { q: b, theta: t2 }) if a == b => {
                    out.pop();
                    let theta = normalize_angle(t1 + t2);
                    if theta != 0.0 {
                        out.push(Gate::U1 { q: a, theta });
                    }
                }
                _ => out.push(*g),
            }
        }
        GateProgram {
            gates: out,
            ..self.clone()
        }
    }

    pub fn run(&self, state: &mut [Complex64]) {
        for g in &self.gates {
            g.apply(state);
        }
    }
}

/// Maps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Decomposes `diag(e^{iθ₁}, e^{iθ₂})` as `[X, U1(θ₁), X, U1(θ₂)]`.
pub fn decompose_diag_1q(u: &Matrix) -> Result<GateProgram, DecomposeError> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(DecomposeError::Shape {
            expected: 2,
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    let off = u[(0, 1)].norm().max(u[(1, 0)].norm());
    if off > 1e-12 {
        return Err(DecomposeError::NotDiagonal(off));
    }
    for k in 0..2 {
        let m = u[(k, k)].norm();
        if (m - 1.0).abs() > 1e-10 {
            return Err(DecomposeError::NotUnitModulus(m));
        }
    }
    let theta1 = normalize_angle(u[(0, 0)].arg());
    let theta2 = normalize_angle(u[(1, 1)].arg());
    let mut p = GateProgram::new(1);
    p.gates = vec![
        Gate::X { q: 0 },
        Gate::U1 { q: 0, theta: theta1 },
        Gate::X { q: 0 },
        Gate::U1 { q: 0, theta: theta2 },
    ];
    Ok(p)
}

/// `(θ₁, θ₂)` of a program produced by [`decompose_diag_1q`].
pub fn diag_angles(program: &GateProgram) -> Option<(f64, f64)> {
    match program.gates.as_slice() {
        [Gate::X { .. }, Gate::U1 { theta: t1, .. }, Gate::X { .. }, Gate::U1 { theta: t2, .. }] => Some((*t1, *t2)),
        _ => None,
    }
}

/// `H = Σ_S c_S Z_S + Σ_j b_j X_j`, with `S` a bit mask of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitHamiltonian {
    pub n_qubits: usize,
    pub z_terms: Vec<(u64, f64)>,
    pub x_terms: Vec<f64>,
}

impl SplitHamiltonian {
    pub fn from_matrix(h: &Matrix) -> Result<Self, DecomposeError> {
        let dim = h.nrows();
        if dim != h.ncols() || !dim.is_power_of_two() {
            return Err(DecomposeError::Shape {
                expected: dim.next_power_of_two(),
                rows: h.nrows(),
                cols: h.ncols(),
            });
        }
        let n = dim.trailing_zeros() as usize;
        let scale = h.iter().fold(1.0f64, |m, x| m.max(x.norm()));
        let tol = 1e-12 * scale;

        let mut x_terms = vec![0.0; n];
        for (q, b) in x_terms.iter_mut().enumerate() {
            *b = h[(1 << q, 0)].re;
        }
        for r in 0..dim {
            for col in 0..dim {
                if r == col {
                    continue;
                }
                let d = r ^ col;
                let expect = if d.is_power_of_two() {
                    x_terms[d.trailing_zeros() as usize]
                } else {
                    0.0
                };
                if (h[(r, col)] - c(expect)).norm() > tol {
                    return Err(DecomposeError::UnsupportedStructure);
                }
            }
        }

        let diag: Vec<f64> = (0..dim).map(|i| h[(i, i)].re).collect();
        let mut z_terms = Vec::new();
        for s in 0..dim as u64 {
            let sum: f64 = diag
                .iter()
                .enumerate()
                .map(|(x, d)| {
                    if (x as u64 & s).count_ones().is_multiple_of(2) {
                        *d
                    } else {
                        -*d
                    }
                })
                .sum();
            let coeff = sum / dim as f64;
            if coeff.abs() > tol {
                z_terms.push((s, coeff));
            }
        }
        Ok(Self {
            n_qubits: n,
            z_terms,
            x_terms,
        })
    }

    fn diagonal_matrix(&self) -> Matrix {
        let dim = 1usize << self.n_qubits;
        let mut m = Matrix::zeros(dim, dim);
        for x in 0..dim {
            let v: f64 = self
                .z_terms
                .iter()
                .map(|(s, k)| {
                    if (x as u64 & s).count_ones().is_multiple_of(2) {
                        *k
                    } else {
                        -*k
                    }
                })
                .sum();
            m[(x, x)] = c(v);
        }
        m
    }

    fn field_matrix(&self) -> Matrix {
        let dim = 1usize << self.n_qubits;
        let mut m = Matrix::zeros(dim, dim);
        for (q, b) in self.x_terms.iter().enumerate() {
            for x in 0..dim {
                m[(x ^ (1 << q), x)] += c(*b);
            }
        }
        m
    }

    fn push_diagonal(&self, program: &mut GateProgram, t: f64) {
        for (s, k) in &self.z_terms {
            let qubits: Vec<usize> = (0..self.n_qubits).filter(|q| s >> q & 1 == 1).collect();
            let Some(&last) = qubits.last() else { continue };
            let ladder: Vec<Gate> = qubits
                .windows(2)
                .map(|w| Gate::Cx {
                    control: w[0],
                    target: w[1],
                })
                .collect();
            program.gates.extend(ladder.iter().copied());
            program.gates.push(Gate::Rz {
                q: last,
                theta: normalize_angle(2.0 * k * t),
            });
            program.gates.extend(ladder.iter().rev().copied());
        }
    }

    fn push_field(&self, program: &mut GateProgram, t: f64) {
        for (q, b) in self.x_terms.iter().enumerate() {
            if *b != 0.0 {
                program.gates.push(Gate::Rx {
                    q,
                    theta: normalize_angle(2.0 * b * t),
                });
            }
        }
    }

    /// Upper bound on the spectral-norm error of `slices` Trotter slices
    /// over time `t`.
    pub fn trotter_bound(&self, t: f64, order: usize, slices: usize) -> f64 {
        let d = self.diagonal_matrix();
        let b = self.field_matrix();
        let tau = t / slices as f64;
        let comm = |x: &Matrix, y: &Matrix| x * y - y * x;
        match order {
            1 => slices as f64 * tau * tau / 2.0 * operator_norm(&comm(&b, &d)),
            _ => {
                let bd = comm(&b, &d);
                let ddb = comm(&d, &(-&bd));
                let bbd = comm(&b, &bd);
                slices as f64 * tau.powi(3) * (operator_norm(&ddb) / 12.0 + operator_norm(&bbd) / 24.0)
            }
        }
    }
}

/// Spectral norm via the eigenvalues of `M†M`.
pub fn operator_norm(m: &Matrix) -> f64 {
    let g = m.adjoint() * m;
    crate::adia::spectrum(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Max-entry distance between `a` and `b` after removing the best global
/// phase.
pub fn phase_distance(a: &Matrix, b: &Matrix) -> f64 {
    let overlap: Complex64 = b.iter().zip(a.iter()).map(|(y, x)| y.conj() * x).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y * phase).norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCircuit {
    pub program: GateProgram,
    pub order: usize,
    pub slices: usize,
    /// Bound on the distance to `exp(-i·H·Δt)` up to global phase.
    pub error_bound: f64,
}

pub const TROTTER_TARGET: f64 = 1e-3;
const MAX_SLICES: usize = 1 << 16;

/// Trotterizes `exp(-i·H·dt)`. With `slices = None` the smallest power of
/// two meeting [`TROTTER_TARGET`] is used.
pub fn decompose_step(h: &Matrix, dt: f64, order: usize, slices: Option<usize>) -> Result<StepCircuit, DecomposeError> {
    if order != 1 && order != 2 {
        return Err(DecomposeError::UnsupportedOrder(order));
    }
    let split = SplitHamiltonian::from_matrix(h)?;
    let commuting = split.x_terms.iter().all(|b| *b == 0.0);
    let slices = match slices {
        Some(r) => r.max(1),
        None if commuting => 1,
        None => {
            let mut r = 1;
            while r < MAX_SLICES && split.trotter_bound(dt, order, r) > TROTTER_TARGET {
                r *= 2;
            }
            r
        }
    };
    let error_bound = if commuting {
        0.0
    } else {
        split.trotter_bound(dt, order, slices)
    };
    let tau = dt / slices as f64;
    let mut program = GateProgram::new(split.n_qubits);
    for _ in 0..slices {
        match order {
            1 => {
                split.push_field(&mut program, tau);
                split.push_diagonal(&mut program, tau);
            }
            _ => {
                split.push_field(&mut program, tau / 2.0);
                split.push_diagonal(&mut program, tau);
                split.push_field(&mut program, tau / 2.0);
            }
        }
    }
    Ok(StepCircuit {
        program,
        order,
        slices,
        error_bound,
    })
}

/// Dense unitary of a program (gates applied in list order).
pub fn simulate_program(program: &GateProgram) -> Matrix {
    let dim = 1usize << program.n_qubits;
    let mut out = Matrix::zeros(dim, dim);
    let mut col = vec![ZERO; dim];
    for j in 0..dim {
        col.iter_mut().for_each(|x| *x = ZERO);
        col[j] = ONE;
        program.run(&mut col);
        for (i, v) in col.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_angle(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const ANGLE_DIGITS: usize = 12;

/// OpenQASM 2.0 text; `measure` appends `measure q[i] -> c[i];` for every
/// qubit.
pub fn emit_qasm(program: &GateProgram, measure: bool) -> String {
    let n = program.n_qubits;
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{n}];");
    let _ = writeln!(s, "creg c[{n}];");
    for g in &program.gates {
        let line = match *g {
            Gate::X { q } => format!("x q[{q}];"),
            Gate::H { q } => format!("h q[{q}];"),
            Gate::Sdg { q } => format!("sdg q[{q}];"),
            Gate::U1 { q, theta } => format!("u1({}) q[{q}];", format_angle(theta, ANGLE_DIGITS)),
            Gate::Rz { q, theta } => format!("rz({}) q[{q}];", format_angle(theta, ANGLE_DIGITS)),
            Gate::Rx { q, theta } => format!("rx({}) q[{q}];", format_angle(theta, ANGLE_DIGITS)),
            Gate::Cx { control, target } => format!("cx q[{control}],q[{target}];"),
        };
        s.push_str(&line);
        s.push('\n');
    }
    if measure {
        for q in 0..n {
            let _ = writeln!(s, "measure q[{q}] -> c[{q}];");
        }
    }
    s
}

/// A parsed QASM file: the gate program and the measured qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQasm {
    pub program: GateProgram,
    pub measured: Vec<usize>,
}

/// Reads back the subset written by [`emit_qasm`].
pub fn parse_qasm(text: &str) -> Result<ParsedQasm, QasmError> {
    let mut n_qubits = None;
    let mut gates = Vec::new();
    let mut measured = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: &str| QasmError::Syntax {
            line: line_no,
            msg: msg.to_string(),
        };
        let line = raw.split("//").next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let stmt = line.strip_suffix(';').ok_or_else(|| err("missing `;`"))?.trim();
        if stmt == "OPENQASM 2.0" || stmt == "include \"qelib1.inc\"" || stmt.starts_with("creg ") {
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qreg ") {
            n_qubits = Some(parse_index(rest.trim(), "q").ok_or_else(|| err("bad qreg"))?);
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("measure ") {
            let (lhs, _) = rest.split_once("->").ok_or_else(|| err("bad measure"))?;
            measured.push(parse_index(lhs.trim(), "q").ok_or_else(|| err("bad measure target"))?);
            continue;
        }
        let (head, args) = stmt.split_once(' ').ok_or_else(|| err("unknown statement"))?;
        let (name, angle) = match head.split_once('(') {
            Some((n, a)) => {
                let a = a.strip_suffix(')').ok_or_else(|| err("unclosed parameter"))?;
                (n, Some(a.trim().parse::<f64>().map_err(|_| err("bad angle"))?))
            }
            None => (head, None),
        };
        let qs: Vec<usize> = args
            .split(',')
            .map(|a| parse_index(a.trim(), "q"))
            .collect::<Option<_>>()
            .ok_or_else(|| err("bad qubit argument"))?;
        let gate = match (name, angle, qs.as_slice()) {
            ("x", None, [q]) => Gate::X { q: *q },
            ("h", None, [q]) => Gate::H { q: *q },
            ("sdg", None, [q]) => Gate::Sdg { q: *q },
            ("u1", Some(theta), [q]) => Gate::U1 { q: *q, theta },
            ("rz", Some(theta), [q]) => Gate::Rz { q: *q, theta },
            ("rx", Some(theta), [q]) => Gate::Rx { q: *q, theta },
            ("cx", None, [a, b]) => Gate::Cx {
                control: *a,
                target: *b,
            },
            _ => return Err(err(&format!("unsupported gate `{head}`"))),
        };
        gates.push(gate);
    }
    let n_qubits = n_qubits.ok_or(QasmError::NoRegister)?;
    let program = GateProgram {
        n_qubits,
        gates,
        source_step: None,
        mode: None,
    };
    program.validate().map_err(|e| QasmError::Syntax {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(ParsedQasm { program, measured })
}

fn parse_index(s: &str, reg: &str) -> Option<usize> {
    s.strip_prefix(reg)?.strip_prefix('[')?.strip_suffix(']')?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adia::{expm_hermitian, initial_hamiltonian, interpolate, problem_hamiltonian};
    use nalgebra::DVector;

    fn diag(a: f64, b: f64) -> Matrix {
        Matrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from_polar(1.0, a),
            Complex64::from_polar(1.0, b),
        ]))
    }

    #[test]
    fn diag_program_reconstructs_exactly() {
        for (a, b) in [(0.0, 0.0), (0.3, -2.0), (PI, -PI / 2.0), (-3.0, 3.1)] {
            let u = diag(a, b);
            let p = decompose_diag_1q(&u).unwrap();
            let back = simulate_program(&p);
            assert!((back - &u).iter().all(|x| x.norm() < 1e-12));
        }
    }

    #[test]
    fn identity_gives_zero_angles() {
        let p = decompose_diag_1q(&Matrix::identity(2, 2)).unwrap();
        assert_eq!(diag_angles(&p), Some((0.0, 0.0)));
        assert!(p.peephole().gates.is_empty());
    }

    #[test]
    fn rejects_non_diagonal_and_non_unitary() {
        let mut u = Matrix::identity(2, 2);
        u[(0, 1)] = c(1e-6);
        assert!(matches!(decompose_diag_1q(&u), Err(DecomposeError::NotDiagonal(_))));
        let u = Matrix::identity(2, 2) * c(0.5);
        assert!(matches!(decompose_diag_1q(&u), Err(DecomposeError::NotUnitModulus(_))));
    }

    #[test]
    fn angles_are_normalized() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn double_x_is_identity() {
        let mut p = GateProgram::new(1);
        p.push(Gate::X { q: 0 }).unwrap();
        p.push(Gate::X { q: 0 }).unwrap();
        assert_eq!(simulate_program(&p), Matrix::identity(2, 2));
    }

    #[test]
    fn invalid_gates_rejected() {
        let mut p = GateProgram::new(2);
        assert!(p.push(Gate::X { q: 2 }).is_err());
        assert!(p.push(Gate::Cx { control: 1, target: 1 }).is_err());
        assert!(p.push(Gate::U1 { q: 0, theta: f64::NAN }).is_err());
    }

    #[test]
    fn gate_matrices() {
        let mut p = GateProgram::new(1);
        p.gates = vec![Gate::H { q: 0 }, Gate::Rz { q: 0, theta: 0.4 }, Gate::H { q: 0 }];
        // H·RZ(θ)·H = RX(θ)
        let mut r = GateProgram::new(1);
        r.gates = vec![Gate::Rx { q: 0, theta: 0.4 }];
        assert!(phase_distance(&simulate_program(&p), &simulate_program(&r)) < 1e-12);
        // CX with control 0 maps |01> (index 1) to |11> (index 3)
        let mut cx = GateProgram::new(2);
        cx.gates = vec![Gate::Cx { control: 0, target: 1 }];
        let m = simulate_program(&cx);
        assert_eq!(m[(3, 1)], ONE);
        assert_eq!(m[(0, 0)], ONE);
    }

    #[test]
    fn diagonal_step_is_exact() {
        let h = problem_hamiltonian(
            &crate::hamcomp::bit_operator(3, 0)
                .mul(&crate::hamcomp::bit_operator(3, 2))
                .add(&crate::hamcomp::bit_operator(3, 1)),
            2.5,
        );
        let sc = decompose_step(&h, 0.7, 1, None).unwrap();
        assert_eq!(sc.error_bound, 0.0);
        assert!(phase_distance(&simulate_program(&sc.program), &expm_hermitian(&h, 0.7)) < 1e-10);
    }

    #[test]
    fn one_qubit_transverse_slice_within_bound() {
        let j = 1.0;
        let hi = initial_hamiltonian(1, Mode::Transverse, j);
        let hf = problem_hamiltonian(&crate::hamcomp::bit_operator(1, 0), j);
        let h = interpolate(&hi, &hf, 0.5).unwrap();
        let sc = decompose_step(&h, 1.0, 1, Some(16)).unwrap();
        let d = phase_distance(&simulate_program(&sc.program), &expm_hermitian(&h, 1.0));
        assert!(d <= sc.error_bound + 1e-12, "{d} > {}", sc.error_bound);
        assert!(d <= 1e-2);
    }

    #[test]
    fn second_order_shrinks_faster() {
        let hi = initial_hamiltonian(2, Mode::Transverse, 1.0);
        let hp = crate::hamcomp::bit_operator(2, 0).mul(&crate::hamcomp::bit_operator(2, 1));
        let h = interpolate(&hi, &problem_hamiltonian(&hp, 3.0), 0.4).unwrap();
        let exact = expm_hermitian(&h, 1.0);
        let err = |order, r| {
            let sc = decompose_step(&h, 1.0, order, Some(r)).unwrap();
            let d = phase_distance(&simulate_program(&sc.program), &exact);
            assert!(d <= sc.error_bound + 1e-12);
            d
        };
        let (a, b) = (err(1, 8), err(1, 16));
        assert!(a / b > 1.7, "first order ratio {}", a / b);
        let (a, b) = (err(2, 8), err(2, 16));
        assert!(a / b > 3.4, "second order ratio {}", a / b);
        let auto = decompose_step(&h, 1.0, 2, None).unwrap();
        assert!(auto.error_bound <= TROTTER_TARGET);
        assert!(auto.slices.is_power_of_two());
    }

    #[test]
    fn unsupported_structure_rejected() {
        let mut h = Matrix::zeros(4, 4);
        h[(0, 3)] = ONE;
        h[(3, 0)] = ONE;
        assert_eq!(
            decompose_step(&h, 1.0, 1, None).unwrap_err(),
            DecomposeError::UnsupportedStructure
        );
        assert_eq!(
            decompose_step(&h, 1.0, 3, None).unwrap_err(),
            DecomposeError::UnsupportedOrder(3)
        );
    }

    #[test]
    fn angle_formatting() {
        assert_eq!(format_angle(0.0, 12), "0");
        assert_eq!(format_angle(PI, 12), "3.14159265359");
        assert_eq!(format_angle(-0.5, 12), "-0.5");
        assert_eq!(format_angle(1.5e-7, 12), "1.5e-07");
        assert_eq!(format_angle(123456789012345.0, 12), "1.23456789012e+14");
        assert_eq!(format_angle(-7.853981633974483, 12), "-7.85398163397");
    }

    #[test]
    fn empty_program_qasm() {
        let s = emit_qasm(&GateProgram::new(1), false);
        assert_eq!(s, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\ncreg c[1];\n");
        let back = parse_qasm(&s).unwrap();
        assert_eq!(back.program.n_qubits, 1);
        assert!(back.program.gates.is_empty());
    }

    #[test]
    fn qasm_round_trip() {
        let mut p = GateProgram::new(3);
        p.gates = vec![
            Gate::X { q: 0 },
            Gate::H { q: 1 },
            Gate::Sdg { q: 2 },
            Gate::U1 {
                q: 0,
                theta: 1.234567890123456,
            },
            Gate::Rz { q: 1, theta: -2.5e-8 },
            Gate::Rx { q: 2, theta: PI },
            Gate::Cx { control: 2, target: 0 },
        ];
        let text = emit_qasm(&p, true);
        let back = parse_qasm(&text).unwrap();
        assert_eq!(back.measured, vec![0, 1, 2]);
        assert_eq!(back.program.gates.len(), p.gates.len());
        for (a, b) in back.program.gates.iter().zip(&p.gates) {
            assert_eq!(a.qubits(), b.qubits());
            let (x, y) = (a.angle().unwrap_or(0.0), b.angle().unwrap_or(0.0));
            assert!((x - y).abs() <= 1e-11 * y.abs().max(1.0));
        }
        assert!(phase_distance(&simulate_program(&back.program), &simulate_program(&p)) < 1e-10);
    }

    #[test]
    fn qasm_errors() {
        assert_eq!(parse_qasm("OPENQASM 2.0;\n"), Err(QasmError::NoRegister));
        assert!(parse_qasm("qreg q[1];\nfoo q[0];\n").is_err());
        assert!(parse_qasm("qreg q[1];\nx q[3];\n").is_err());
        assert!(parse_qasm("qreg q[1]\n").is_err());
    }
}
