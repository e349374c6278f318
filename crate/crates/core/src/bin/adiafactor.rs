//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 no consistent split,
//! 3 evolution failed, 4 invalid input.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use adiafactor::adia::Mode;
use adiafactor::gatedec;
use adiafactor::hamcomp::Encoding;
use adiafactor::pipeline::{self, Output, PipelineError, ReduceStage, RunConfig, StageFile};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adiafactor",
    version,
    about = "Factor bi-primes by carry reduction and simulated adiabatic evolution"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the whole pipeline and print the report.
    Factor(Common),
    /// Classical reduction only.
    Reduce(Common),
    /// Spectrum of the interpolated Hamiltonian as CSV.
    Spectrum(Common),
    /// Gate decomposition of the evolution as OpenQASM 2.0.
    Qasm(Common),
}

#[derive(Args)]
struct Common {
    /// Number to factor.
    #[arg(long, conflicts_with = "from", required_unless_present = "from")]
    n: Option<u64>,
    /// Stage or report JSON to resume from.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long, default_value = "transverse")]
    mode: Mode,
    #[arg(long, default_value = "substitution")]
    encoding: Encoding,
    /// Number of pieces M.
    #[arg(long)]
    steps: Option<usize>,
    /// Total evolution time in microseconds.
    #[arg(long)]
    time_us: Option<f64>,
    /// Energy scale J in rad/s.
    #[arg(long, default_value_t = pipeline::DEFAULT_J)]
    coupling_j: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target error of the runtime estimate.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Trotter order for circuits with a transverse field (1 or 2).
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Comma-separated outputs: report-json, qasm, gap-csv, table-text.
    #[arg(long, value_delimiter = ',')]
    emit: Vec<Output>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Include wall-clock stage timings in the report.
    #[arg(long)]
    timings: bool,
}

impl Common {
    fn config(&self, n: u64) -> RunConfig {
        RunConfig {
            n,
            mode: self.mode,
            encoding: self.encoding,
            time_us: self.time_us,
            steps: self.steps,
            coupling_j: self.coupling_j,
            shots: self.shots,
            seed: self.seed,
            epsilon: self.epsilon,
            trotter_order: self.order,
            outputs: self.emit.iter().copied().collect::<BTreeSet<_>>(),
            timings: self.timings,
        }
    }

    /// Config plus the reduction stage, from `--n` or `--from`.
    fn load(&self) -> Result<(RunConfig, ReduceStage, f64), PipelineError> {
        let Some(path) = &self.from else {
            let config = self.config(self.n.expect("clap enforces --n or --from"));
            config.validate()?;
            let t = Instant::now();
            let stage = pipeline::reduce_stage(&pipeline::instance(config.n)?, config.encoding);
            return Ok((config, stage, t.elapsed().as_secs_f64() * 1e3));
        };
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.clone(),
            source,
        })?;
        match pipeline::parse_stage(&text)? {
            StageFile::Reduce(stage) => {
                let config = RunConfig {
                    encoding: stage.encoding,
                    ..self.config(stage.n)
                };
                Ok((config, stage, 0.0))
            }
            StageFile::Report(report) => {
                let config = report.config;
                let t = Instant::now();
                let stage = pipeline::reduce_stage(&pipeline::instance(config.n)?, config.encoding);
                Ok((config, stage, t.elapsed().as_secs_f64() * 1e3))
            }
        }
    }
}

fn write_out(dir: &std::path::Path, name: &str, text: &str) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
}

fn run(cli: Cli) -> Result<String, PipelineError> {
    match cli.verb {
        Verb::Factor(args) => {
            let (config, stage, reduce_ms) = args.load()?;
            let run = pipeline::factor_from_stage(&config, &stage, reduce_ms)?;
            pipeline::emit_artifacts(&run, &config.outputs, &args.out_dir)?;
            Ok(pipeline::report_json(&run.report))
        }
        Verb::Reduce(args) => {
            let (config, stage, _) = args.load()?;
            if config.outputs.contains(&Output::TableText) {
                let inst = pipeline::instance(stage.n)?;
                let mut text = String::new();
                for a in &stage.attempts {
                    let system = adiafactor::bitplan::build_system(&inst, a.split);
                    let reduced = match &a.result {
                        pipeline::ReductionResult::Reduced { system, .. } => Some(system),
                        _ => None,
                    };
                    text.push_str(&format!("split {} case {:?}: {}\n", a.split, a.case, status(&a.result)));
                    text.push_str(&pipeline::render_reduction_text(&system, reduced));
                    text.push('\n');
                }
                write_out(&args.out_dir, "table.txt", &text)?;
            }
            Ok(pipeline::reduce_json(&stage))
        }
        Verb::Spectrum(args) => {
            let (config, stage, _) = args.load()?;
            let prepared = pipeline::first_viable(&config, &stage)?;
            let csv = prepared
                .scan
                .as_ref()
                .map(|s| s.to_csv(config.coupling_j))
                .unwrap_or_else(|| "s\n".to_string());
            if config.outputs.contains(&Output::GapCsv) {
                write_out(&args.out_dir, "gap.csv", &csv)?;
            }
            Ok(csv)
        }
        Verb::Qasm(args) => {
            let (config, stage, _) = args.load()?;
            let prepared = pipeline::first_viable(&config, &stage)?;
            let Some(set) = pipeline::build_circuits(&prepared, config.trotter_order)? else {
                return Err(PipelineError::InvalidInput("no qubits remain after reduction".into()));
            };
            if config.outputs.contains(&Output::Qasm) {
                for sc in &set.steps {
                    let name = format!("step_{}.qasm", sc.program.source_step.unwrap_or(0));
                    write_out(&args.out_dir, &name, &gatedec::emit_qasm(&sc.program, false))?;
                }
            }
            let full = gatedec::emit_qasm(&set.full, true);
            if config.outputs.contains(&Output::Qasm) {
                write_out(&args.out_dir, "circuit.qasm", &full)?;
            }
            Ok(full)
        }
    }
}

fn status(r: &pipeline::ReductionResult) -> &'static str {
    match r {
        pipeline::ReductionResult::Inconsistent { .. } => "inconsistent",
        pipeline::ReductionResult::TooLarge { .. } => "too large",
        pipeline::ReductionResult::Reduced { .. } => "reduced",
        pipeline::ReductionResult::Unreduced => "unreduced",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
