//! End-to-end factoring: splits, reduction, compilation, evolution, readout.
//!
//! Every stage is deterministic for a fixed [`RunConfig`]. The reduction
//! stage serializes to JSON and can be fed back in place of `N`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adia::{self, AdiaError, Matrix, Mode, Schedule, StateVector};
use crate::bitplan::{build_system, enumerate_splits, BiPrimeInstance, BitEquationSystem, Split, SplitCase, Var};
use crate::gatedec::{self, GateProgram, StepCircuit};
use crate::hamcomp::{self, CompiledProblem, Encoding, ZPolynomial};
use crate::reducer::{self, CarryBound, ReduceError, ReducedSystem};
use crate::tomo::{self, DensityMatrix1Q, FactorPair, MeasurementCounts, Reconstruction};

pub const DEFAULT_J: f64 = 2.0 * PI * 1e6;
pub const DEFAULT_TIME_US: f64 = 10.0;
pub const DEFAULT_STEPS: usize = 8;
pub const DEFAULT_SHOTS: u64 = 8192;
const SCAN_RESOLUTION: usize = 101;
const MIN_AUTO_STEPS: usize = 64;
const MAX_AUTO_STEPS: usize = 8192;
/// Gate budget for one exported circuit.
const GATE_BUDGET: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no split of {n} yields a consistent system")]
    NoSplitConsistent { n: u64 },
    #[error("evolution did not produce a factorization of {n}")]
    EvolutionFailed { n: u64 },
    #[error("{n} = {p} x {q} is not a product of two primes")]
    NotBiPrime { n: u64, p: u64, q: u64 },
    #[error("circuit would exceed {budget} gates")]
    CircuitTooLarge { budget: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Adiabatic(#[from] AdiaError),
    #[error(transparent)]
    Decompose(#[from] gatedec::DecomposeError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::NoSplitConsistent { .. } | PipelineError::NotBiPrime { .. } => 2,
            PipelineError::EvolutionFailed { .. } => 3,
            PipelineError::InvalidInput(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    ReportJson,
    Qasm,
    GapCsv,
    TableText,
}

impl std::str::FromStr for Output {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "report-json" => Ok(Output::ReportJson),
            "qasm" => Ok(Output::Qasm),
            "gap-csv" => Ok(Output::GapCsv),
            "table-text" => Ok(Output::TableText),
            _ => Err(format!("unknown output `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: u64,
    pub mode: Mode,
    pub encoding: Encoding,
    /// Total time in microseconds; chosen from the gap when absent in
    /// transverse mode.
    pub time_us: Option<f64>,
    pub steps: Option<usize>,
    /// Energy scale `J` in rad/s.
    pub coupling_j: f64,
    pub shots: u64,
    pub seed: u64,
    /// Target `ε` of the runtime estimate.
    pub epsilon: f64,
    pub trotter_order: usize,
    pub outputs: BTreeSet<Output>,
    /// Record wall-clock stage timings (makes reports run-dependent).
    pub timings: bool,
}

impl RunConfig {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            mode: Mode::Transverse,
            encoding: Encoding::Substitution,
            time_us: None,
            steps: None,
            coupling_j: DEFAULT_J,
            shots: DEFAULT_SHOTS,
            seed: 0,
            epsilon: 0.1,
            trotter_order: 2,
            outputs: BTreeSet::new(),
            timings: false,
        }
    }

    /// Single-qubit σz-driven configuration, as in the classic 35 experiment.
    pub fn paper_compat(n: u64) -> Self {
        Self {
            mode: Mode::PaperCompat,
            encoding: Encoding::PaperCompat,
            ..Self::new(n)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidInput(m));
        if !(self.coupling_j > 0.0 && self.coupling_j.is_finite()) {
            return bad(format!("coupling J = {}", self.coupling_j));
        }
        if let Some(t) = self.time_us {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("time = {t} us"));
            }
        }
        if self.steps == Some(0) {
            return bad("steps = 0".into());
        }
        if self.shots == 0 {
            return bad("shots = 0".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {}", self.epsilon));
        }
        if self.trotter_order != 1 && self.trotter_order != 2 {
            return bad(format!("trotter order {}", self.trotter_order));
        }
        Ok(())
    }
}

/// Reduction outcome for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ReductionResult {
    Inconsistent {
        columns: (usize, usize),
    },
    TooLarge {
        vars: usize,
        cap: usize,
    },
    Reduced {
        system: ReducedSystem,
        verified: Option<bool>,
    },
    /// The product encoding works on the raw bits.
    Unreduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionAttempt {
    pub split: Split,
    pub case: SplitCase,
    pub result: ReductionResult,
}

/// Classical half of the pipeline, for every candidate split in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceStage {
    pub n: u64,
    pub encoding: Encoding,
    pub attempts: Vec<ReductionAttempt>,
}

pub fn instance(n: u64) -> Result<BiPrimeInstance, PipelineError> {
    BiPrimeInstance::new(n).map_err(|e| PipelineError::InvalidInput(format!("{n}: {e}")))
}

pub fn reduce_stage(instance: &BiPrimeInstance, encoding: Encoding) -> ReduceStage {
    let attempts = enumerate_splits(instance)
        .into_iter()
        .map(|split| {
            let system = build_system(instance, split);
            let result = match encoding.reduction_mode() {
                None => ReductionResult::Unreduced,
                Some(mode) => match reducer::reduce(&system, mode) {
                    Ok(red) => {
                        let verified = reducer::verify_reduction(&system, &red).ok();
                        ReductionResult::Reduced { system: red, verified }
                    }
                    Err(ReduceError::Inconsistent { columns }) => ReductionResult::Inconsistent { columns },
                    Err(ReduceError::TooLarge { vars, cap }) => ReductionResult::TooLarge { vars, cap },
                },
            };
            ReductionAttempt {
                split,
                case: system.case,
                result,
            }
        })
        .collect();
    ReduceStage {
        n: instance.n(),
        encoding,
        attempts,
    }
}

/// A stage file accepted in place of `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum StageFile {
    Reduce(ReduceStage),
    Report(Box<FactorReport>),
}

/// Everything needed to evolve one split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub system: BitEquationSystem,
    pub reduced: Option<ReducedSystem>,
    pub compiled: CompiledProblem,
    pub ground_energy: f64,
    pub ground_states: Vec<u64>,
    pub h_i: Matrix,
    pub h_f: Matrix,
    /// `H_f = hf_scale · H_p`.
    pub hf_scale: f64,
    pub schedule: Schedule,
    pub gap: Option<GapSummary>,
    pub runtime_bound: Option<f64>,
    /// Full gap scan, kept for CSV export.
    pub scan: Option<adia::GapScan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub min_gap: f64,
    pub min_gap_s: f64,
    pub degenerate: bool,
    pub ground_degeneracy: usize,
    pub band_gap: Option<f64>,
}

/// Why a split was passed over, or that it succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum AttemptOutcome {
    Inconsistent,
    TooLarge,
    NoZeroEnergyState { min_energy: f64 },
    EvolutionFailed,
    Factored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub split: Split,
    pub case: SplitCase,
    #[serde(flatten)]
    pub outcome: AttemptOutcome,
}

/// Unwrapped diagonal phases of one step, in turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAngles {
    pub m: usize,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitTomography {
    pub qubit: usize,
    pub estimate: Reconstruction,
    pub exact: DensityMatrix1Q,
    pub trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub n: u64,
    pub config: RunConfig,
    pub attempts: Vec<AttemptRecord>,
    pub split: Split,
    pub case: SplitCase,
    pub carry_bounds: Vec<CarryBound>,
    /// `C_0 ..`; `null` where a carry was eliminated.
    pub carries: Vec<Option<i64>>,
    pub fixed: BTreeMap<Var, i64>,
    pub substitutions: BTreeMap<Var, String>,
    pub residuals: Vec<String>,
    pub hamiltonian: ZPolynomial,
    pub qubits: BTreeMap<Var, usize>,
    pub hf_scale: f64,
    pub schedule: Schedule,
    pub gap: Option<GapSummary>,
    pub runtime_bound: Option<f64>,
    pub ground_states: Vec<String>,
    pub ground_population: f64,
    /// Outcome bitstring (qubit 0 rightmost) to probability, above 1e-12.
    pub final_probabilities: BTreeMap<String, f64>,
    pub readout: MeasurementCounts,
    pub tomography: Vec<QubitTomography>,
    pub step_angles: Option<Vec<StepAngles>>,
    pub factors: FactorPair,
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn next_pow2_clamped(x: f64, lo: usize, hi: usize) -> usize {
    if !x.is_finite() || x >= hi as f64 {
        return hi;
    }
    (x.ceil().max(1.0) as usize).next_power_of_two().clamp(lo, hi)
}

fn compile_attempt(
    instance: &BiPrimeInstance,
    attempt: &ReductionAttempt,
    encoding: Encoding,
) -> Result<(BitEquationSystem, Option<ReducedSystem>, CompiledProblem), AttemptOutcome> {
    let system = build_system(instance, attempt.split);
    match &attempt.result {
        ReductionResult::Inconsistent { .. } => Err(AttemptOutcome::Inconsistent),
        ReductionResult::TooLarge { .. } => Err(AttemptOutcome::TooLarge),
        ReductionResult::Reduced { system: red, .. } => {
            let compiled = hamcomp::compile(red, encoding).map_err(|_| AttemptOutcome::TooLarge)?;
            Ok((system, Some(red.clone()), compiled))
        }
        ReductionResult::Unreduced => {
            let compiled = hamcomp::compile_product(instance, attempt.split).map_err(|_| AttemptOutcome::TooLarge)?;
            Ok((system, None, compiled))
        }
    }
}

/// Builds `H_i`, `H_f` and the schedule for a compiled split.
pub fn prepare(
    config: &RunConfig,
    system: BitEquationSystem,
    reduced: Option<ReducedSystem>,
    compiled: CompiledProblem,
) -> Result<Result<Prepared, AttemptOutcome>, PipelineError> {
    let h = &compiled.hamiltonian;
    if h.n_qubits() > hamcomp::DENSE_CAP {
        return Ok(Err(AttemptOutcome::TooLarge));
    }
    let (ground_energy, ground_states) =
        hamcomp::ground_states(h).map_err(|_| PipelineError::InvalidInput("hamiltonian too large".into()))?;
    // Shared qubits make the paper-compat encoding's energies meaningless
    // (35 gives H_p = I); its readout is validated by lifting instead.
    if ground_energy > 0.0 && compiled.encoding != Encoding::PaperCompat {
        return Ok(Err(AttemptOutcome::NoZeroEnergyState {
            min_energy: ground_energy,
        }));
    }
    let nq = h.n_qubits();
    let j = config.coupling_j;
    let hf_scale = match config.mode {
        Mode::PaperCompat => j,
        Mode::Transverse => j / h.max_abs_eigenvalue().max(1.0),
    };
    let h_i = adia::initial_hamiltonian(nq, config.mode, j);
    let h_f = adia::problem_hamiltonian(h, hf_scale);

    let (scan, gap) = if nq == 0 {
        (None, None)
    } else {
        let scan = adia::gap_scan(&h_i, &h_f, SCAN_RESOLUTION)?;
        let gap = GapSummary {
            min_gap: scan.min_gap,
            min_gap_s: scan.min_gap_s,
            degenerate: scan.degenerate,
            ground_degeneracy: scan.ground_degeneracy,
            band_gap: scan.band_gap,
        };
        (Some(scan), Some(gap))
    };
    let runtime_bound = match nq {
        0 => None,
        _ => adia::runtime_bound(&h_i, &h_f, config.epsilon, SCAN_RESOLUTION)
            .ok()
            .filter(|t| *t > 0.0),
    };
    let (auto_t, auto_m) = match (config.mode, runtime_bound, gap.and_then(|g| g.band_gap)) {
        (Mode::Transverse, Some(t), Some(delta)) => {
            let ratio = adia::spectral_norm(&(&h_f - &h_i)) / delta;
            (t, next_pow2_clamped(4.0 * ratio, MIN_AUTO_STEPS, MAX_AUTO_STEPS))
        }
        _ => (DEFAULT_TIME_US / 1e6, DEFAULT_STEPS),
    };
    let total_time = config.time_us.map_or(auto_t, |t| t / 1e6);
    let steps = config.steps.unwrap_or(auto_m);
    let schedule = Schedule::new(total_time, steps, j, config.mode)?;
    Ok(Ok(Prepared {
        system,
        reduced,
        compiled,
        ground_energy,
        ground_states,
        h_i,
        h_f,
        hf_scale,
        schedule,
        gap,
        runtime_bound,
        scan,
    }))
}

/// First split of the stage that compiles to a zero-energy Hamiltonian.
pub fn first_viable(config: &RunConfig, stage: &ReduceStage) -> Result<Prepared, PipelineError> {
    let inst = instance(stage.n)?;
    for attempt in &stage.attempts {
        let Ok((system, reduced, compiled)) = compile_attempt(&inst, attempt, stage.encoding) else {
            continue;
        };
        if let Ok(p) = prepare(config, system, reduced, compiled)? {
            return Ok(p);
        }
    }
    Err(PipelineError::NoSplitConsistent { n: stage.n })
}

/// Full run: the report plus the prepared split it came from.
#[derive(Debug, Clone)]
pub struct FactorRun {
    pub report: FactorReport,
    pub prepared: Prepared,
    pub final_state: StateVector,
}

pub fn factor(config: &RunConfig) -> Result<FactorRun, PipelineError> {
    config.validate()?;
    let inst = instance(config.n)?;
    let t0 = Instant::now();
    let stage = reduce_stage(&inst, config.encoding);
    let reduce_ms = t0.elapsed().as_secs_f64() * 1e3;
    factor_from_stage(config, &stage, reduce_ms)
}

/// Resumes from a reduction stage; `config.n` and `config.encoding` are
/// taken from the stage.
pub fn factor_from_stage(config: &RunConfig, stage: &ReduceStage, reduce_ms: f64) -> Result<FactorRun, PipelineError> {
    let config = RunConfig {
        n: stage.n,
        encoding: stage.encoding,
        ..config.clone()
    };
    config.validate()?;
    let inst = instance(stage.n)?;
    let mut attempts = Vec::new();
    let mut evolution_failed = false;
    let mut timings = BTreeMap::new();
    timings.insert("reduce".to_string(), reduce_ms);

    for attempt in &stage.attempts {
        let record = |outcome| AttemptRecord {
            split: attempt.split,
            case: attempt.case,
            outcome,
        };
        let t = Instant::now();
        let compiled = compile_attempt(&inst, attempt, stage.encoding);
        let (system, reduced, compiled) = match compiled {
            Ok(x) => x,
            Err(o) => {
                attempts.push(record(o));
                continue;
            }
        };
        let prepared = match prepare(&config, system, reduced, compiled)? {
            Ok(p) => p,
            Err(o) => {
                attempts.push(record(o));
                continue;
            }
        };
        timings.insert("compile".to_string(), t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        let psi0 = adia::initial_state(prepared.compiled.hamiltonian.n_qubits(), config.mode);
        let final_state = adia::evolve_final(&psi0, &prepared.h_i, &prepared.h_f, &prepared.schedule)?;
        timings.insert("evolve".to_string(), t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        let readout = tomo::sample_register(&final_state, config.shots, config.seed).expect("shots validated");
        let factors = tomo::extract_factors(
            &readout.weights(),
            &prepared.compiled,
            &prepared.system,
            prepared.reduced.as_ref(),
        );
        let Ok(factors) = factors else {
            attempts.push(record(AttemptOutcome::EvolutionFailed));
            evolution_failed = true;
            continue;
        };
        if !is_prime(factors.p) || !is_prime(factors.q) {
            return Err(PipelineError::NotBiPrime {
                n: stage.n,
                p: factors.p,
                q: factors.q,
            });
        }
        attempts.push(record(AttemptOutcome::Factored));
        let tomography = tomography_records(&final_state, config.shots, config.seed);
        timings.insert("readout".to_string(), t.elapsed().as_secs_f64() * 1e3);

        let report = build_report(
            &config,
            attempts,
            &prepared,
            &final_state,
            readout,
            tomography,
            factors,
            timings,
        )?;
        return Ok(FactorRun {
            report,
            prepared,
            final_state,
        });
    }
    if evolution_failed {
        Err(PipelineError::EvolutionFailed { n: stage.n })
    } else {
        Err(PipelineError::NoSplitConsistent { n: stage.n })
    }
}

fn tomography_records(state: &StateVector, shots: u64, seed: u64) -> Vec<QubitTomography> {
    (0..state.n_qubits())
        .map(|q| {
            let records = tomo::tomography(state, q, shots, seed).expect("shots validated");
            let estimate = tomo::reconstruct(&records).expect("all bases sampled");
            let exact = tomo::reduced_density(state, q);
            QubitTomography {
                qubit: q,
                trace_distance: estimate.rho.trace_distance(&exact),
                estimate,
                exact,
            }
        })
        .collect()
}

/// Unwrapped step phases in turns when the run is a single diagonal qubit.
pub fn step_angles(prepared: &Prepared) -> Result<Option<Vec<StepAngles>>, PipelineError> {
    if prepared.h_i.nrows() != 2 {
        return Ok(None);
    }
    let Some(phases) = adia::step_phases(&prepared.h_i, &prepared.h_f, &prepared.schedule)? else {
        return Ok(None);
    };
    Ok(Some(
        phases
            .iter()
            .enumerate()
            .map(|(k, p)| StepAngles {
                m: k + 1,
                theta1: p[0] / (2.0 * PI),
                theta2: p[1] / (2.0 * PI),
            })
            .collect(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    config: &RunConfig,
    attempts: Vec<AttemptRecord>,
    prepared: &Prepared,
    final_state: &StateVector,
    readout: MeasurementCounts,
    tomography: Vec<QubitTomography>,
    factors: FactorPair,
    timings: BTreeMap<String, f64>,
) -> Result<FactorReport, PipelineError> {
    let nq = final_state.n_qubits();
    let system = &prepared.system;
    let (carry_bounds, carries, fixed, substitutions, residuals) = match &prepared.reduced {
        Some(r) => (
            r.bounds.clone(),
            r.carries(),
            r.fixed
                .iter()
                .filter(|(v, _)| !v.is_carry())
                .map(|(v, x)| (*v, *x))
                .collect(),
            r.substitutions.iter().map(|(v, a)| (*v, a.to_string())).collect(),
            r.residual_equations.iter().map(|e| e.terms.to_string()).collect(),
        ),
        None => {
            let fixed = system
                .variables
                .iter()
                .filter(|(v, _)| !v.is_carry())
                .filter_map(|(v, _)| system.fixed_value(*v).map(|x| (*v, x)))
                .collect();
            (
                reducer::carry_bounds(system),
                vec![None; system.carry_count()],
                fixed,
                BTreeMap::new(),
                Vec::new(),
            )
        }
    };
    let final_probabilities = final_state
        .probabilities()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 1e-12)
        .map(|(x, p)| (tomo::bitstring(x as u64, nq), p))
        .collect();
    Ok(FactorReport {
        n: config.n,
        config: config.clone(),
        attempts,
        split: system.split,
        case: system.case,
        carry_bounds,
        carries,
        fixed,
        substitutions,
        residuals,
        hamiltonian: prepared.compiled.hamiltonian.clone(),
        qubits: prepared.compiled.qubits.assignment.clone(),
        hf_scale: prepared.hf_scale,
        schedule: prepared.schedule,
        gap: prepared.gap,
        runtime_bound: prepared.runtime_bound,
        ground_states: prepared.ground_states.iter().map(|x| tomo::bitstring(*x, nq)).collect(),
        ground_population: final_state.population(&prepared.ground_states),
        final_probabilities,
        readout,
        tomography,
        step_angles: step_angles(prepared)?,
        factors,
        timings_ms: config.timings.then_some(timings),
    })
}

/// State preparation, per-step circuits and their concatenation.
#[derive(Debug, Clone)]
pub struct CircuitSet {
    pub preparation: GateProgram,
    pub steps: Vec<StepCircuit>,
    pub full: GateProgram,
}

pub fn build_circuits(prepared: &Prepared, order: usize) -> Result<Option<CircuitSet>, PipelineError> {
    let nq = prepared.compiled.hamiltonian.n_qubits();
    if nq == 0 {
        return Ok(None);
    }
    let mode = prepared.schedule.mode;
    let mut preparation = GateProgram::new(nq);
    preparation.mode = Some(mode);
    for q in 0..nq {
        preparation.push(match mode {
            Mode::PaperCompat => gatedec::Gate::X { q },
            Mode::Transverse => gatedec::Gate::H { q },
        })?;
    }
    let dt = prepared.schedule.dt();
    let mut steps = Vec::with_capacity(prepared.schedule.steps);
    let mut full = preparation.clone();
    for (k, h) in adia::step_hamiltonians(&prepared.h_i, &prepared.h_f, &prepared.schedule)?
        .iter()
        .enumerate()
    {
        let mut sc = if nq == 1 && adia::is_diagonal(h) {
            StepCircuit {
                program: gatedec::decompose_diag_1q(&adia::expm_hermitian(h, dt))?,
                order: 1,
                slices: 1,
                error_bound: 0.0,
            }
        } else {
            gatedec::decompose_step(h, dt, order, None)?
        };
        sc.program.source_step = Some(k + 1);
        sc.program.mode = Some(mode);
        if full.gates.len() + sc.program.gates.len() > GATE_BUDGET {
            return Err(PipelineError::CircuitTooLarge { budget: GATE_BUDGET });
        }
        full.extend(&sc.program)?;
        steps.push(sc);
    }
    Ok(Some(CircuitSet {
        preparation,
        steps,
        full,
    }))
}

/// Multiplication table of the chosen split followed by its reduction.
pub fn render_reduction_text(system: &BitEquationSystem, reduced: Option<&ReducedSystem>) -> String {
    let mut s = system.render_table();
    if let Some(r) = reduced {
        let carries: Vec<String> = r
            .carries()
            .iter()
            .enumerate()
            .map(|(c, v)| match v {
                Some(x) => format!("C{c}={x}"),
                None => format!("C{c}=?"),
            })
            .collect();
        let _ = writeln!(s, "\ncarries: {}", carries.join(" "));
        for (v, a) in &r.substitutions {
            let _ = writeln!(s, "substitution: {v} = {a}");
        }
        for e in &r.residual_equations {
            let _ = writeln!(s, "residual: {}", e.terms);
        }
        let free: Vec<String> = r.free_vars.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "free: {}", if free.is_empty() { "-".into() } else { free.join(" ") });
    }
    s
}

/// Per-step angles in turns, one row per step.
pub fn render_angle_table(angles: &[StepAngles]) -> String {
    let mut s = String::from("m  theta1    theta2\n");
    for a in angles {
        let _ = writeln!(s, "{}  {:.4}  {:.4}", a.m, a.theta1 + 0.0, a.theta2 + 0.0);
    }
    s
}

pub fn report_json(report: &FactorReport) -> String {
    serde_json::to_string_pretty(&StageFile::Report(Box::new(report.clone()))).expect("report serializes") + "\n"
}

pub fn reduce_json(stage: &ReduceStage) -> String {
    serde_json::to_string_pretty(&StageFile::Reduce(stage.clone())).expect("stage serializes") + "\n"
}

pub fn parse_stage(text: &str) -> Result<StageFile, PipelineError> {
    serde_json::from_str(text).map_err(|e| PipelineError::InvalidInput(format!("stage file: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, PipelineError> {
    std::fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// Writes the requested outputs into `dir` and returns the paths written.
pub fn emit_artifacts(run: &FactorRun, outputs: &BTreeSet<Output>, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if outputs.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let prepared = &run.prepared;
    for out in outputs {
        match out {
            Output::ReportJson => written.push(write_file(&dir.join("report.json"), &report_json(&run.report))?),
            Output::TableText => {
                let mut text = render_reduction_text(&prepared.system, prepared.reduced.as_ref());
                if let Some(angles) = &run.report.step_angles {
                    text.push('\n');
                    text.push_str(&render_angle_table(angles));
                }
                written.push(write_file(&dir.join("table.txt"), &text)?);
            }
            Output::GapCsv => {
                if let Some(scan) = &prepared.scan {
                    written.push(write_file(
                        &dir.join("gap.csv"),
                        &scan.to_csv(run.report.config.coupling_j),
                    )?);
                }
            }
            Output::Qasm => {
                if let Some(set) = build_circuits(prepared, run.report.config.trotter_order)? {
                    for sc in &set.steps {
                        let name = format!("step_{}.qasm", sc.program.source_step.unwrap_or(0));
                        written.push(write_file(&dir.join(name), &gatedec::emit_qasm(&sc.program, false))?);
                    }
                    written.push(write_file(
                        &dir.join("circuit.qasm"),
                        &gatedec::emit_qasm(&set.full, true),
                    )?);
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_check() {
        let primes: Vec<u64> = (0..30).filter(|n| is_prime(*n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn auto_steps_rule() {
        assert_eq!(next_pow2_clamped(1.0, 64, 8192), 64);
        assert_eq!(next_pow2_clamped(1000.0, 64, 8192), 1024);
        assert_eq!(next_pow2_clamped(1e9, 64, 8192), 8192);
        assert_eq!(next_pow2_clamped(f64::INFINITY, 64, 8192), 8192);
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(35);
        assert!(c.validate().is_ok());
        c.shots = 0;
        assert!(c.validate().is_err());
        let c = RunConfig {
            time_us: Some(-1.0),
            ..RunConfig::new(35)
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn invalid_n_maps_to_exit_four() {
        let err = factor(&RunConfig::new(36)).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn sigma_z_run_of_35() {
        let run = factor(&RunConfig::paper_compat(35)).unwrap();
        let r = &run.report;
        assert_eq!((r.factors.p, r.factors.q), (5, 7));
        assert_eq!(r.carries, vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]);
        assert_eq!(r.residuals, vec!["p1 + q1 = 1".to_string()]);
        let angles = r.step_angles.as_ref().unwrap();
        assert_eq!(angles.len(), 8);
    }
}
