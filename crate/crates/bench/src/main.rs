use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqr::driver::{BetaChoice, DriverConfig, Variant};
use cqr::suite::{Family, SuiteSpec};
use cqr_bench::{apply_json_overrides, load_json, run_and_write, BenchConfig, BenchError, Solver};

#[derive(Parser)]
#[command(name = "cqr-bench", version, about = "Run CQR and ARC solvers over generated problem suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (suite x solver x seed) matrix and write detail and summary CSVs.
    Run(RunArgs),
    /// Write one generated problem as JSON.
    Gen(GenArgs),
    /// Solve one problem file and optionally write its run-log CSV.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value = "random")]
    suite: String,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

impl SuiteArgs {
    fn spec(&self) -> Result<SuiteSpec, BenchError> {
        let family: Family = self.suite.parse()?;
        let p = SuiteSpec::preset(family, self.n, self.seed);
        Ok(SuiteSpec {
            a: self.a.unwrap_or(p.a),
            b: self.b.unwrap_or(p.b),
            c: self.c.unwrap_or(p.c),
            sigma: self.sigma.unwrap_or(p.sigma),
            scale: self.scale.unwrap_or(p.scale),
            noise: self.noise.unwrap_or(p.noise),
            ..p
        })
    }
}

#[derive(Args)]
struct DriverArgs {
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// framework, practical or optimal; used by the `cqr` solver.
    #[arg(long, default_value = "practical")]
    variant: String,
    /// 1, 2 or 3; used by the `cqr` solver.
    #[arg(long, default_value_t = 2)]
    beta_choice: u8,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl DriverArgs {
    fn config(&self) -> Result<DriverConfig, BenchError> {
        Ok(DriverConfig {
            eps: self.eps,
            variant: self.variant.parse::<Variant>()?,
            beta_choice: BetaChoice::try_from(self.beta_choice)?,
            alpha: self.alpha,
            max_iter: self.max_iter,
            ..DriverConfig::default()
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    #[command(flatten)]
    driver: DriverArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',', default_value = "cqr_practical_c2,arc")]
    solver: Vec<String>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Write one run-log CSV per cell.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "cqr_practical_c2")]
    solver: String,
    #[command(flatten)]
    driver: DriverArgs,
    /// Run-log CSV destination.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<(), BenchError> {
    let mut cfg = BenchConfig {
        suites: vec![args.suite.spec()?],
        solvers: args.solver.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
        repeats: args.repeats,
        driver: args.driver.config()?,
        out: args.out,
        trace: args.trace,
        threads: args.threads,
    };
    if let Some(path) = &args.config {
        cfg = apply_json_overrides(&cfg, &load_json(path)?)?;
    }
    let result = run_and_write(&cfg)?;
    for s in &result.summary {
        println!(
            "{:<40} {:<18} iters {:>7.2} succ {:>7.2} f {:>14.6e} rel {:.4} converged {}/{}",
            s.suite,
            s.solver,
            s.mean_total_iterations,
            s.mean_successful_iterations,
            s.mean_final_f,
            s.relative_min,
            s.converged,
            s.runs
        );
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), BenchError> {
    let p = args.suite.spec()?.generate()?;
    cqr::io::write_problem(&p, &args.out)?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), BenchError> {
    let p = cqr::io::read_problem(&args.problem)?;
    let solver: Solver = args.solver.parse()?;
    let log = solver.run(&p, &args.driver.config()?)?;
    println!(
        "{} status {} iters {} successful {} f {:.10e} grad {:.3e}",
        solver,
        log.status,
        log.total_iterations(),
        log.successful_iterations(),
        log.final_f,
        log.final_grad_norm
    );
    if let Some(path) = &args.trace {
        cqr_bench::emit_trace(&log, path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
