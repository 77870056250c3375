use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use condfix_core::corpus::{load_corpus, run_loaded, seed_bundle, seed_mutants, GridSpec, HarnessConfig};
use condfix_core::faultloc::{build_spectrum, effort_csv, rank, scores_csv, Metric};
use condfix_core::minilang::{ExecutionControls, Program};
use condfix_core::pipeline::{render_diff, repair, Mode, RepairConfig, RepairOutcome};
use condfix_core::synth::{decode, emit_smtlib, encode, solve, Backend, SmtLevel, SolveOutcome};
use condfix_core::testkit::{run_suite, Suite};
use condfix_core::trace::TraceMatrix;

#[derive(Parser)]
#[command(name = "condfix", version, about = "Test-driven repair of if-conditions and missing preconditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repair one program against its test suite.
    Repair {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        opts: RepairOpts,
    },
    /// Run the pipeline over every bundle of a corpus directory.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-bundle wall times (not byte-stable across runs).
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Wasted-effort aggregates per metric and bug type.
        #[arg(long)]
        effort: Option<PathBuf>,
        #[command(flatten)]
        opts: RepairOpts,
    },
    /// Print the suspiciousness ranking of a program's statements.
    Localize {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value = "ochiai")]
        metric: Metric,
        /// Print scores of all six metrics as CSV instead.
        #[arg(long)]
        csv: bool,
    },
    /// Write one bundle per detected condition mutant of a correct program.
    Seed {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        /// TOML file with an input grid (`function`, `axes`, `extra`).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Bundle ids are the prefix followed by a two-digit counter.
        #[arg(long, default_value = "SEED")]
        prefix: String,
        /// Start of the counter.
        #[arg(long, default_value_t = 1)]
        first: usize,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Synthesize an expression for a trace matrix file.
    Synth {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: u8,
        /// Print the SMT-LIB2 script instead of solving.
        #[arg(long)]
        emit: bool,
        #[arg(long, value_enum, default_value_t = BackendKind::Internal)]
        backend: BackendKind,
        #[arg(long, default_value = "z3 -in")]
        solver_cmd: String,
        #[arg(long, default_value_t = 60)]
        timeout: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Internal,
    Smt,
}

#[derive(Args)]
struct RepairOpts {
    #[arg(long, default_value = "both")]
    mode: Mode,
    #[arg(long, default_value = "ochiai")]
    metric: Metric,
    /// Global budget in seconds.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    /// Budget per synthesis level in seconds.
    #[arg(long, default_value_t = 60)]
    level_timeout: u64,
    #[arg(long, default_value_t = 3)]
    max_level: u8,
    #[arg(long, default_value_t = condfix_core::minilang::DEFAULT_STEP_BUDGET)]
    step_budget: u64,
    #[arg(long, value_enum, default_value_t = BackendKind::Internal)]
    backend: BackendKind,
    /// Solver invocation for `--backend smt`; the script is sent on stdin.
    #[arg(long, default_value = "z3 -in")]
    solver_cmd: String,
}

impl RepairOpts {
    fn config(&self) -> RepairConfig {
        RepairConfig {
            mode: self.mode,
            metric: self.metric,
            level_timeout: Duration::from_secs(self.level_timeout),
            global_timeout: Duration::from_secs(self.timeout),
            step_budget: self.step_budget,
            max_level: self.max_level,
            backend: backend(self.backend, &self.solver_cmd),
        }
    }
}

fn backend(kind: BackendKind, cmd: &str) -> Backend {
    match kind {
        BackendKind::Internal => Backend::Internal,
        BackendKind::Smt => Backend::external(cmd),
    }
}

/// Failure with the exit code to report.
struct Failure(u8, String);

fn usage(msg: impl ToString) -> Failure {
    Failure(2, msg.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes to standard output; a closed pipe ends the process quietly.
fn out(text: &str) {
    let mut stdout = io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load(program: &Path, suite: &Path) -> Result<(Program, Suite), Failure> {
    let p = Program::parse(&read(program)?).map_err(|e| usage(format!("{}: {e}", program.display())))?;
    let s = Suite::parse(&read(suite)?).map_err(|e| usage(format!("{}: {e}", suite.display())))?;
    Ok((p, s))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Repair { program, suite, report, opts } => {
            let (p, s) = load(&program, &suite)?;
            let result = repair(&p, &s, &opts.config()).map_err(usage)?;
            let json = result.to_json();
            match &report {
                Some(path) => write(path, &json)?,
                None => out(&format!("{json}\n")),
            }
            match (&result.outcome, result.patch()) {
                (RepairOutcome::Patched { level, rank, .. }, Some(patch)) => {
                    let fixed = p.apply_patch(&patch).map_err(usage)?;
                    let name = program.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    eprintln!("patched ({patch}; level {level}, rank {rank})");
                    eprint!("{}", render_diff(&p, &fixed, &name));
                    Ok(0)
                }
                _ => {
                    eprintln!("no patch: {}", result.reason().map(|r| r.name()).unwrap_or("unknown"));
                    Ok(1)
                }
            }
        }
        Command::Bench { corpus, out, timings, effort, opts } => {
            let loaded = load_corpus(&corpus).map_err(usage)?;
            let config = HarnessConfig { repair: opts.config(), ..HarnessConfig::default() };
            let report = run_loaded(loaded, &config);
            write(&out, &report.to_csv())?;
            if let Some(path) = timings {
                write(&path, &report.timing_csv())?;
            }
            if let Some(path) = effort {
                write(&path, &effort_csv(&report.effort_rows()))?;
            }
            let expected = report.rows.iter().filter(|r| r.as_expected).count();
            eprintln!("{} bundles, {} patched, {} as expected", report.rows.len(), report.fixed(), expected);
            Ok(if expected == report.rows.len() { 0 } else { 1 })
        }
        Command::Localize { program, suite, metric, csv } => {
            let (p, s) = load(&program, &suite)?;
            let result = run_suite(&p, &s, &ExecutionControls::default()).map_err(usage)?;
            let spectrum = build_spectrum(&result).map_err(usage)?;
            if csv {
                out(&scores_csv(&spectrum));
            } else {
                let mut text = String::from("rank,location,kind,score\n");
                for (i, (loc, score)) in rank(&spectrum, metric).entries.iter().enumerate() {
                    let kind = p.classify(*loc).map(|k| format!("{k:?}")).unwrap_or_default();
                    text.push_str(&format!("{},{},{},{}\n", i + 1, loc.0, kind, score));
                }
                out(&text);
            }
            Ok(0)
        }
        Command::Seed { program, suite, grid, out, prefix, first, limit } => {
            let (p, s) = load(&program, &suite)?;
            let grid: Option<GridSpec> = match grid {
                Some(path) => Some(condfix_core::corpus::parse_grid(&read(&path)?).map_err(usage)?),
                None => None,
            };
            let mut n = first;
            let mut written = 0;
            for mutant in seed_mutants(&p) {
                if limit.is_some_and(|l| written >= l) {
                    break;
                }
                let id = format!("{prefix}{n:02}");
                if let Some(bundle) = seed_bundle(&id, &p, &s, &mutant, grid.clone()) {
                    bundle.save(&out.join(&id)).map_err(usage)?;
                    eprintln!("{id}: {}", bundle.description);
                    n += 1;
                    written += 1;
                }
            }
            eprintln!("{written} bundles written");
            Ok(0)
        }
        Command::Synth { trace, level, emit, backend: kind, solver_cmd, timeout } => {
            let matrix = TraceMatrix::from_text(&read(&trace)?).map_err(usage)?;
            if !(1..=condfix_core::synth::MAX_LEVEL).contains(&level) {
                return Err(usage(format!("level must be within 1..={}", condfix_core::synth::MAX_LEVEL)));
            }
            let problem = encode(&matrix, &SmtLevel::level(level)).map_err(|e| Failure(1, e.to_string()))?;
            if emit {
                out(&emit_smtlib(&problem));
                return Ok(0);
            }
            match solve(&problem, &backend(kind, &solver_cmd), Duration::from_secs(timeout)).map_err(usage)? {
                SolveOutcome::Sat(model) => {
                    let expr = decode(&problem, &model).map_err(|e| Failure(1, e.to_string()))?;
                    out(&format!("{expr}\n"));
                    Ok(0)
                }
                SolveOutcome::Unsat => {
                    eprintln!("unsat");
                    Ok(1)
                }
                SolveOutcome::Timeout => {
                    eprintln!("timeout");
                    Ok(1)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
