use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mwcut::format::{parse_bipartite, parse_instance, write_bipartite, write_instance};
use mwcut::generate::{generate, Generator};
use mwcut::norms::{parse_norm_tag, Bipartite};
use mwcut::oracle::{brute_force_ssbve, OracleBudget};
use mwcut::reduction::{build_reduction, iterate_extraction, NormMultiwaySolver, OracleSolver, PipelineSolver, SsbveInstance};
use mwcut::report::{run_benchmark, run_instance, BenchInstance, Mode, RunOptions, RunReport, Status};
use mwcut::{Error, NormSpec, PipelineConfig, Result, TerminalSet, UtcSelect, Variant, WeightedGraph};

#[derive(Parser)]
#[command(name = "mwcut", version, about = "Multiway cut under l_p and monotonic-norm objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the approximation pipeline on an instance file.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also run the brute-force oracle and report the ratio.
        #[arg(long)]
        oracle: bool,
    },
    /// Solve an instance exactly by enumeration.
    Oracle {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a batch of generated instances and stream one JSON line each.
    Bench {
        #[command(flatten)]
        gen: GenArgs,
        /// Number of instances; instance `i` uses seed `gen-seed + i`.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Compare against the brute-force oracle.
        #[arg(long)]
        oracle: bool,
        /// Report the oracle in place of the pipeline.
        #[arg(long, conflicts_with = "oracle")]
        oracle_only: bool,
    },
    /// Write a generated instance.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Small Set Bipartite Vertex Expansion tools.
    Reduce {
        #[command(subcommand)]
        action: ReduceAction,
    },
    /// Run the pipeline and print its invariant checks.
    Check {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Subcommand)]
enum ReduceAction {
    /// Emit the multiway-cut instance of a bipartite file.
    Build {
        bipartite: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Find a t-subset of L with a small neighbourhood.
    Extract {
        bipartite: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverKind::Oracle)]
        solver: SolverKind,
        #[arg(long, default_value_t = 10_000_000)]
        oracle_budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normalize a bipartite file.
    Format { bipartite: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Oracle,
    Pipeline,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gnp,
    PlantedKPart,
    StarChain,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "gen", value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Edge probability for gnp.
    #[arg(long, default_value_t = 0.3)]
    prob: f64,
    #[arg(long, default_value_t = 0.7)]
    p_in: f64,
    #[arg(long, default_value_t = 0.1)]
    p_out: f64,
    #[arg(long, default_value_t = 1)]
    max_weight: u32,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
}

impl GenArgs {
    fn generator(&self) -> Generator {
        let (n, k, max_weight) = (self.n, self.k, self.max_weight);
        match self.kind {
            GenKind::Gnp => Generator::Gnp { n, k, p: self.prob, max_weight },
            GenKind::PlantedKPart => Generator::PlantedKPart { n, k, p_in: self.p_in, p_out: self.p_out, max_weight },
            GenKind::StarChain => Generator::StarChain { n, k },
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Shorthand for `--norm lp:<p>`; accepts `inf`.
    #[arg(long, conflicts_with = "norm")]
    p: Option<String>,
    /// `lp:<p>`, `wlp:<p>:<c1,..,ck>` or `nmax:<bipartite-file>`.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long, default_value = "auto")]
    utc: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    trials: usize,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long)]
    alpha_mult: Option<f64>,
    #[arg(long, default_value = "lp")]
    variant: String,
    #[arg(long, default_value_t = 10_000_000)]
    oracle_budget: u64,
    /// Include wall-clock times in reports.
    #[arg(long)]
    timings: bool,
}

impl SolverArgs {
    fn tag(&self) -> String {
        match (&self.norm, &self.p) {
            (Some(tag), _) => tag.clone(),
            (None, Some(p)) => format!("lp:{p}"),
            (None, None) => "lp:1".into(),
        }
    }

    fn spec(&self, k: usize) -> Result<NormSpec> {
        parse_norm_tag(&self.tag(), k, &load_bipartite)
    }

    fn config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            seed: self.seed,
            trials: self.trials,
            utc: self.utc.parse::<UtcSelect>()?,
            eps_weights: self.eps,
            alpha_mult: self.alpha_mult,
            variant: self.variant.parse::<Variant>()?,
        })
    }

    fn options(&self, mode: Mode) -> Result<RunOptions> {
        Ok(RunOptions { mode, budget: OracleBudget::new(self.oracle_budget)?, timings: self.timings })
    }
}

enum Failure {
    Usage(String),
    Lib(Error),
    Status(Status),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_bipartite(path: &str) -> Result<Bipartite> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {path}: {e}")))?;
    Ok(parse_bipartite(&text)?.0)
}

fn load_instance(path: &Path) -> std::result::Result<(WeightedGraph, TerminalSet), Failure> {
    Ok(parse_instance(&read(path)?)?)
}

fn emit(out: &mut impl Write, value: &impl serde::Serialize) -> std::result::Result<(), Failure> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out).map_err(|e| Failure::Usage(e.to_string()))
}

fn write_text(output: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn single(path: &Path, solver: &SolverArgs, mode: Mode) -> std::result::Result<RunReport, Failure> {
    let (graph, terminals) = load_instance(path)?;
    let spec = solver.spec(terminals.k())?;
    let report = run_instance(
        0,
        &path.display().to_string(),
        &graph,
        &terminals,
        &spec,
        &solver.config()?,
        &solver.options(mode)?,
    );
    emit(&mut io::stdout().lock(), &report)?;
    Ok(report)
}

fn status_failure(report: &RunReport) -> std::result::Result<(), Failure> {
    match report.status {
        Status::Ok => Ok(()),
        s => Err(Failure::Status(s)),
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Solve { instance, solver, oracle } => {
            let report = single(&instance, &solver, if oracle { Mode::Compare } else { Mode::Solve })?;
            status_failure(&report)
        }
        Command::Oracle { instance, solver } => {
            let report = single(&instance, &solver, Mode::OracleOnly)?;
            status_failure(&report)
        }
        Command::Check { instance, solver } => {
            let (graph, terminals) = load_instance(&instance)?;
            let spec = solver.spec(terminals.k())?;
            let report = run_instance(0, "", &graph, &terminals, &spec, &solver.config()?, &solver.options(Mode::Solve)?);
            let mut out = io::stdout().lock();
            for c in &report.checks {
                emit(&mut out, c)?;
            }
            if report.checks.iter().any(|c| !c.passed) {
                return Err(Failure::Status(Status::Invariant));
            }
            status_failure(&report)
        }
        Command::Bench { gen, count, solver, oracle, oracle_only } => {
            let generator = gen.generator();
            let instances = (0..count)
                .map(|i| {
                    let seed = gen.gen_seed + i as u64;
                    let g = generate(&generator, seed)?;
                    Ok(BenchInstance { name: format!("{generator} seed={seed}"), graph: g.graph, terminals: g.terminals })
                })
                .collect::<Result<Vec<_>>>()?;
            let mode = match (oracle, oracle_only) {
                (_, true) => Mode::OracleOnly,
                (true, _) => Mode::Compare,
                _ => Mode::Solve,
            };
            let spec_for = |k: usize| solver.spec(k);
            let summary = run_benchmark(
                instances,
                &spec_for,
                &solver.config()?,
                &solver.options(mode)?,
                &mut io::stdout().lock(),
            )?;
            if summary.invariant_failures > 0 {
                return Err(Failure::Status(Status::Invariant));
            }
            Ok(())
        }
        Command::Gen { gen, output } => {
            let g = generate(&gen.generator(), gen.gen_seed)?;
            write_text(output.as_deref(), &write_instance(&g.graph, &g.terminals))
        }
        Command::Reduce { action } => match action {
            ReduceAction::Build { bipartite, output } => {
                let (bip, t) = parse_bipartite(&read(&bipartite)?)?;
                let red = build_reduction(&SsbveInstance::new(bip, t)?)?;
                write_text(output.as_deref(), &write_instance(&red.graph, &red.terminals))
            }
            ReduceAction::Extract { bipartite, solver, oracle_budget, seed } => {
                let (bip, t) = parse_bipartite(&read(&bipartite)?)?;
                let ssbve = SsbveInstance::new(bip, t)?;
                let budget = OracleBudget::new(oracle_budget)?;
                let handle: Box<dyn NormMultiwaySolver> = match solver {
                    SolverKind::Oracle => Box::new(OracleSolver { budget }),
                    SolverKind::Pipeline => {
                        let mut p = PipelineSolver::default();
                        p.config.seed = seed;
                        Box::new(p)
                    }
                };
                let result = iterate_extraction(&ssbve, handle.as_ref())?;
                let optimum = brute_force_ssbve(&ssbve.bip, t, budget).ok().map(|(s, v)| json!({"set": s, "neighborhood": v}));
                emit(&mut io::stdout().lock(), &json!({"extraction": result, "optimum": optimum}))
            }
            ReduceAction::Format { bipartite } => {
                let (bip, t) = parse_bipartite(&read(&bipartite)?)?;
                write_text(None, &write_bipartite(&bip, t))
            }
        },
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 2,
        Error::Infeasible(_) | Error::AllTrialsRejected { .. } | Error::GuessTooLow { .. } => 3,
        Error::Invariant(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Status(s)) => ExitCode::from(match s {
            Status::Ok => 0,
            Status::Infeasible | Status::Rejected => 3,
            Status::Invariant => 4,
            Status::Error => 1,
        }),
    }
}
