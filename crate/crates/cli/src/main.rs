//! `bai`: fixed-budget best-arm identification experiments from the shell.

mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use bai_core::harness::{run_rngs, sweep_with, ExperimentConfig, InstanceSource, SweepRow, SweepTable};
use bai_core::instances::{complete_matrix, ingest_ratings, read_completed, write_completed, AlsConfig, SyntheticSpec};
use bai_core::theory::{self, TheoryReport};
use bai_core::{halving, seed, Algorithm, AlgorithmParams, BanditInstance, PullRule};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(name = "bai", version, about = "Fixed-budget best-arm identification experiments", args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Base seed; together with the other flags it fixes every output byte.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write data here instead of standard output. Written only on success.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// More log output on standard error; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Worker threads for runs [default: available cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// File of `flag = value` lines; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo estimate for a single (algorithm, K, n) cell.
    Simulate(SimulateArgs),
    /// Mistake probabilities over a grid of algorithms, arm counts and budgets.
    Sweep(SweepArgs),
    /// Complexity measures and error bounds of one instance.
    Bounds(BoundsArgs),
    /// Draw a synthetic instance and write it as text.
    GenInstance(GenInstanceArgs),
    /// Complete a `user::movie::rating::timestamp` file by rank-r ALS and store the result.
    PrepareMovielens(PrepareArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Confidence level of the adaptive variance bound.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Confidence width multiplier of variance-based rejects.
    #[arg(long, default_value_t = bai_core::baselines::VBR_GAMMA)]
    gamma: f64,
    /// Bound constant c of GapE.
    #[arg(long, default_value_t = bai_core::baselines::GAPE_C)]
    gape_c: f64,
    /// Bound constant c of GapE-V.
    #[arg(long, default_value_t = bai_core::baselines::GAPEV_C)]
    gapev_c: f64,
}

impl ParamArgs {
    fn params(&self) -> AlgorithmParams {
        AlgorithmParams {
            delta: self.delta,
            gamma: self.gamma,
            gape_c: self.gape_c,
            gapev_c: self.gapev_c,
        }
    }
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Use this fixed instance file (as written by gen-instance) for every run.
    #[arg(long, value_name = "PATH", conflicts_with = "ratings")]
    instance: Option<PathBuf>,
    /// Draw movie bandits from a completed-ratings file (as written by prepare-movielens).
    #[arg(long, value_name = "PATH")]
    ratings: Option<PathBuf>,
    /// Reuse the first drawn instance for every run of a cell.
    #[arg(long)]
    fixed_instance: bool,
    /// Synthetic instances without mean and variance noise.
    #[arg(long)]
    unperturbed: bool,
    /// Add mean wall-clock milliseconds per run to the output.
    #[arg(long)]
    timing: bool,
    /// Monte Carlo runs per cell.
    #[arg(long, default_value_t = 5000)]
    runs: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// unif, sh, shvar, shadavar, gape, gapev or vbr.
    #[arg(long)]
    alg: Algorithm,
    /// Number of arms [default: 64, or the arm count of --instance].
    #[arg(long = "K")]
    arms: Option<usize>,
    /// Budget.
    #[arg(long)]
    n: u64,
    /// Write a `stage round arm reward` line per pull of run 0 (halving methods only).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated algorithms [default: all].
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set)]
    algs: Vec<Algorithm>,
    /// Comma-separated arm counts [default: 64, or the arm count of --instance].
    #[arg(long = "K", value_delimiter = ',', action = clap::ArgAction::Set)]
    arms: Vec<usize>,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, required = true)]
    n: Vec<u64>,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Comma-separated arm means.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, required = true, allow_negative_numbers = true)]
    means: Vec<f64>,
    /// Comma-separated arm variances.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, required = true)]
    vars: Vec<f64>,
    /// Budget.
    #[arg(long)]
    n: u64,
    /// Confidence level of the adaptive variance bound.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Debug, Args)]
struct GenInstanceArgs {
    /// Number of arms.
    #[arg(long = "K", default_value_t = 64)]
    arms: usize,
    /// Skip mean and variance noise.
    #[arg(long)]
    unperturbed: bool,
}

#[derive(Debug, Args)]
struct PrepareArgs {
    /// Ratings file with `user::movie::rating::timestamp` lines.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Keep users with the smallest ids only.
    #[arg(long)]
    max_users: Option<usize>,
    /// Keep movies with the smallest ids only.
    #[arg(long)]
    max_movies: Option<usize>,
    #[arg(long, default_value_t = AlsConfig::default().rank)]
    rank: usize,
    /// Ridge penalty on both factor matrices.
    #[arg(long, default_value_t = AlsConfig::default().reg)]
    reg: f64,
    /// Alternating sweeps.
    #[arg(long, default_value_t = AlsConfig::default().iters)]
    iters: usize,
}

fn main() -> ExitCode {
    let argv = match config::expand_argv(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(&cli.global);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(g: &Global) {
    let level = match (g.quiet, g.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.global.threads {
        ensure!(t > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => simulate(g, a),
        Command::Sweep(a) => sweep(g, a),
        Command::Bounds(a) => bounds(g, a),
        Command::GenInstance(a) => gen_instance(g, a),
        Command::PrepareMovielens(a) => prepare(g, a),
    }
}

/// Writes `data` to `--output` via a sibling temporary file, or to stdout.
fn emit(g: &Global, data: &[u8]) -> Result<()> {
    match &g.output {
        Some(path) => write_atomic(path, |tmp| Ok(std::fs::write(tmp, data)?)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(data)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut name = path.file_name().context("output path has no file name")?.to_os_string();
    name.push(".partial");
    let tmp = path.with_file_name(name);
    let res = write(&tmp).and_then(|()| Ok(std::fs::rename(&tmp, path)?));
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    res.with_context(|| format!("writing {}", path.display()))
}

fn setup(g: &Global, src: &SourceArgs, params: &ParamArgs, algs: Vec<Algorithm>, arms: Vec<usize>, budgets: Vec<u64>) -> Result<ExperimentConfig> {
    let params = params.params();
    params.validate()?;
    ensure!(src.runs > 0, "--runs must be at least 1");
    if src.unperturbed && src.instance.is_some() {
        bail!("--unperturbed applies to drawn instances, not --instance");
    }
    let spec = if src.unperturbed {
        SyntheticSpec::unperturbed(2)
    } else {
        SyntheticSpec::new(2)
    };
    let (source, arms) = if let Some(path) = &src.instance {
        let inst = BanditInstance::read(path).with_context(|| format!("reading instance {}", path.display()))?;
        let k = inst.num_arms();
        let arms = if arms.is_empty() { vec![k] } else { arms };
        if let Some(&bad) = arms.iter().find(|&&a| a != k) {
            bail!("--K {bad} does not match the {k} arms of {}", path.display());
        }
        (InstanceSource::Fixed(inst), arms)
    } else if let Some(path) = &src.ratings {
        let completed = read_completed(path).with_context(|| format!("reading ratings {}", path.display()))?;
        let arms = if arms.is_empty() { vec![64] } else { arms };
        let movies = completed.num_movies();
        if let Some(&bad) = arms.iter().find(|&&a| a > movies) {
            bail!("--K {bad} exceeds the {movies} movies of {}", path.display());
        }
        (InstanceSource::MovieLens(Arc::new(completed), spec), arms)
    } else {
        let arms = if arms.is_empty() { vec![64] } else { arms };
        (InstanceSource::Synthetic(spec), arms)
    };
    if let Some(&k) = arms.iter().find(|&&k| k < 2) {
        bail!("--K must be at least 2, got {k}");
    }
    for &alg in &algs {
        for &k in &arms {
            for &n in &budgets {
                let min = alg.min_budget(k);
                ensure!(n >= min, "{alg} with K = {k} needs n >= {min}, got n = {n}");
            }
        }
    }
    let config = ExperimentConfig {
        runs: src.runs,
        base_seed: g.seed,
        params,
        fixed_instance: src.fixed_instance,
        timing: src.timing,
        ..ExperimentConfig::new(algs, source, arms, budgets)
    };
    config.validate()?;
    Ok(config)
}

fn render_rows(g: &Global, rows: &[SweepRow], timing: bool) -> Result<String> {
    Ok(match g.format {
        Format::Csv => SweepTable { rows: rows.to_vec() }.to_csv(),
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        Format::Text => {
            let mut s = format!(
                "{:<10} {:>5} {:>8} {:>6} {:>8} {:>12} {:>12} {:>8}",
                "algorithm", "K", "n", "runs", "mistakes", "mistake_prob", "std_err", "degraded"
            );
            if timing {
                s += &format!(" {:>12}", "runtime_ms");
            }
            s.push('\n');
            for r in rows {
                write!(
                    s,
                    "{:<10} {:>5} {:>8} {:>6} {:>8} {:>12.6} {:>12.6} {:>8}",
                    r.algorithm.name(),
                    r.arms,
                    r.budget,
                    r.runs,
                    r.mistakes,
                    r.mistake_prob,
                    r.std_err,
                    r.degraded_runs
                )?;
                if let Some(t) = r.mean_runtime_ms {
                    write!(s, " {t:>12.4}")?;
                }
                s.push('\n');
            }
            s
        }
    })
}

fn warn_degraded(row: &SweepRow) {
    if row.degraded_runs > 0 {
        eprintln!(
            "warning[degraded]: {} of {} runs of {} (K={}, n={}) had stages too small for the forced pulls; those stages ran round robin",
            row.degraded_runs, row.runs, row.algorithm, row.arms, row.budget
        );
    }
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let arms = a.arms.into_iter().collect();
    let config = setup(g, &a.source, &a.params, vec![a.alg], arms, vec![a.n])?;
    let k = config.arms[0];
    if a.trace.is_some() && !a.alg.is_halving() {
        bail!("--trace is only available for sh, shvar and shadavar");
    }
    let row = bai_core::harness::run_cell(&config, a.alg, k, a.n)?;
    warn_degraded(&row);
    if let Some(path) = &a.trace {
        let (mut inst_rng, mut reward_rng) = run_rngs(&config, a.alg, k, a.n, 0);
        let env = config.source.draw(k, &mut inst_rng)?;
        let rule = match a.alg {
            Algorithm::Sh => PullRule::Sh,
            Algorithm::ShVar => PullRule::shvar(env.instance.variances().to_vec())?,
            _ => PullRule::shadavar(config.params.delta)?,
        };
        let mut buf = Vec::new();
        halving::run_traced(a.n, &rule, &env.source, &mut reward_rng, &mut buf)?;
        write_atomic(path, |tmp| Ok(std::fs::write(tmp, &buf)?))?;
    }
    emit(g, render_rows(g, std::slice::from_ref(&row), config.timing)?.as_bytes())
}

fn sweep(g: &Global, a: &SweepArgs) -> Result<()> {
    let algs = if a.algs.is_empty() { Algorithm::ALL.to_vec() } else { a.algs.clone() };
    let config = setup(g, &a.source, &a.params, algs, a.arms.clone(), a.n.clone())?;
    let table = sweep_with(&config, |row| {
        log::info!("{} K={} n={}: {} / {} mistakes", row.algorithm, row.arms, row.budget, row.mistakes, row.runs);
        warn_degraded(row);
    })
    .map_err(|f| anyhow::Error::new(f.error).context(format!("sweep stopped after {} rows; nothing written", f.completed.rows.len())))?;
    emit(g, render_rows(g, &table.rows, config.timing)?.as_bytes())
}

fn bounds_text(r: &TheoryReport) -> String {
    let mut s = String::new();
    let scalars: [(&str, String); 9] = [
        ("K", r.arms.to_string()),
        ("n", r.budget.to_string()),
        ("H2", r.h2.to_string()),
        ("delta_min", r.delta_min.to_string()),
        ("sigma_max_sq", r.sigma_max_sq.to_string()),
        ("sum_var", r.sum_var.to_string()),
        ("theory_delta", r.theory_delta.to_string()),
        ("alpha", r.alpha.to_string()),
        ("budget_condition_met", r.budget_condition_met.to_string()),
    ];
    for (k, v) in scalars {
        let _ = writeln!(s, "{k:<22} {v}");
    }
    let _ = writeln!(s, "\n{:<22} {:<24} vacuous", "bound", "value");
    for (name, b) in &r.bounds {
        let _ = writeln!(s, "{name:<22} {:<24} {}", b.value.to_string(), if b.vacuous { "yes" } else { "no" });
    }
    s
}

fn bounds(g: &Global, a: &BoundsArgs) -> Result<()> {
    ensure!(a.n > 0, "--n must be positive");
    bai_core::rules::check_delta(a.delta)?;
    let inst = BanditInstance::new(a.means.clone(), a.vars.clone())?;
    let report = theory::report(&inst, a.n as f64, a.delta);
    let text = match g.format {
        Format::Text => bounds_text(&report),
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let mut s = String::from("bound,value,vacuous\n");
            for (name, b) in &report.bounds {
                writeln!(s, "{name},{},{}", b.value, b.vacuous)?;
            }
            s
        }
    };
    emit(g, text.as_bytes())
}

fn gen_instance(g: &Global, a: &GenInstanceArgs) -> Result<()> {
    let spec = if a.unperturbed {
        SyntheticSpec::unperturbed(a.arms)
    } else {
        SyntheticSpec::new(a.arms)
    };
    spec.validate()?;
    // same stream as run 0 of a sweep with this seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(&[g.seed, seed::INSTANCE, a.arms as u64, 0]));
    let inst = bai_core::instances::synthetic_instance(&spec, &mut rng)?;
    let text = match g.format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({"means": inst.means(), "variances": inst.variances()}))? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("arm,mean,variance\n");
            for (i, (m, v)) in inst.means().iter().zip(inst.variances()).enumerate() {
                writeln!(s, "{i},{m:e},{v:e}")?;
            }
            s
        }
        Format::Text => inst.to_text(),
    };
    emit(g, text.as_bytes())
}

fn prepare(g: &Global, a: &PrepareArgs) -> Result<()> {
    let Some(output) = &g.output else {
        bail!("prepare-movielens needs --output for the completed-ratings file");
    };
    let als = AlsConfig {
        rank: a.rank,
        reg: a.reg,
        iters: a.iters,
        ..AlsConfig::default()
    };
    ensure!(a.max_users != Some(0) && a.max_movies != Some(0), "--max-users and --max-movies must be positive");
    let table = ingest_ratings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let table = table.subsample(a.max_users, a.max_movies);
    log::info!(
        "{} ratings from {} users on {} movies",
        table.ratings.len(),
        table.num_users(),
        table.num_movies()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let done = complete_matrix(&table, &als, &mut rng)?;
    let rmse = done.observed_rmse();
    write_atomic(output, |tmp| Ok(write_completed(tmp, &done.completed)?))?;
    let c = &done.completed;
    let summary = match g.format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({
                "users": c.users,
                "movies": c.num_movies(),
                "observed": table.ratings.len(),
                "rank": als.rank,
                "observed_rmse": rmse,
            }))? + "\n"
        }
        Format::Csv => format!(
            "users,movies,observed,rank,observed_rmse\n{},{},{},{},{}\n",
            c.users,
            c.num_movies(),
            table.ratings.len(),
            als.rank,
            rmse
        ),
        Format::Text => format!(
            "users          {}\nmovies         {}\nobserved       {}\nrank           {}\nobserved_rmse  {}\n",
            c.users,
            c.num_movies(),
            table.ratings.len(),
            als.rank,
            rmse
        ),
    };
    let mut out = std::io::stdout().lock();
    out.write_all(summary.as_bytes())?;
    Ok(())
}
