use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rgl_core::experiment::{self, ExperimentConfig, ExperimentResult};
use rgl_core::{ldp, Error, PayoffDistribution};

#[derive(Parser)]
#[command(name = "rgl", version, about = "Equilibria and social utility in random binary-action games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limit values (x_opt, x_beq, x_weq, x_typ, PoA, PoS) for a payoff law.
    Theory {
        #[arg(long)]
        dist: PayoffDistribution,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also write the output to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo run over one or more player counts.
    Simulate(SimulateArgs),
    /// Repeated simulations over a player-count range and/or a Bernoulli p grid.
    Sweep(SweepArgs),
    /// Figure data: 1 = Bernoulli limit curves, 2 = entropy curves.
    Figures {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        /// Grid points (p grid for figure 1, x grid for figure 2).
        #[arg(long)]
        grid: Option<usize>,
        /// Bernoulli parameter for figure 2.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact moments by enumerating every Bernoulli payoff table (n <= 3).
    Brute {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunFlags {
    /// Replications per player count.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Typical-set half widths.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Average-utility thresholds for the W/Z counters.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Payoff-table byte budget per game (overrides RGL_MEM_CAP_BYTES).
    #[arg(long)]
    mem_cap: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Standard output format; files are always results.csv and summary.json.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "config")]
    dist: Option<PayoffDistribution>,
    /// Player counts, comma separated.
    #[arg(long, value_delimiter = ',', required_unless_present_any = ["config", "n_range"])]
    n: Vec<usize>,
    /// Inclusive range `lo:hi` or `lo:hi:step`.
    #[arg(long, conflicts_with = "n")]
    n_range: Option<String>,
    /// JSON experiment config; flags given alongside it override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required_unless_present = "p_grid")]
    dist: Option<PayoffDistribution>,
    /// Bernoulli parameters, one run each.
    #[arg(long, value_delimiter = ',', conflicts_with = "dist")]
    p_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', required_unless_present = "n_range")]
    n: Vec<usize>,
    #[arg(long, conflicts_with = "n")]
    n_range: Option<String>,
    #[command(flatten)]
    run: RunFlags,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capacity { .. } => 3,
            Error::Io(_) | Error::QuadratureNonConvergence { .. } | Error::Bracketing { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T = ()> = Result<T, Failure>;

fn parse_range(text: &str) -> CliResult<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| invalid(format!("bad --n-range `{text}`")));
    let (lo, hi, step) = match parts.as_slice() {
        [lo, hi] => (num(lo)?, num(hi)?, 1),
        [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
        _ => return Err(invalid(format!("--n-range must be lo:hi or lo:hi:step, got `{text}`"))),
    };
    if step == 0 || lo > hi {
        return Err(invalid(format!("--n-range `{text}` is empty")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn player_counts(n: &[usize], range: &Option<String>) -> CliResult<Vec<usize>> {
    match range {
        Some(r) => parse_range(r),
        None => Ok(n.to_vec()),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> CliResult {
    if let Some(path) = out {
        experiment::write_file(path, text)?;
    }
    print!("{text}");
    Ok(())
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

/// A number, or the marker `"infinite"` when the denominator is not positive.
#[derive(Serialize)]
#[serde(untagged)]
enum Ratio {
    Finite(f64),
    Infinite(&'static str),
}

impl From<Option<f64>> for Ratio {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Ratio::Infinite("infinite"), Ratio::Finite)
    }
}

#[derive(Serialize)]
struct DistConfig {
    dist: String,
}

#[derive(Serialize)]
struct TheoryOutput {
    config: DistConfig,
    alpha: f64,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_tilde: Option<f64>,
    x_typ: f64,
    x_opt: f64,
    x_beq: f64,
    x_weq: f64,
    regime: ldp::Regime,
    price_of_anarchy: Ratio,
    price_of_stability: Ratio,
}

fn theory(dist: PayoffDistribution, format: Format, out: Option<PathBuf>) -> CliResult {
    let lim = ldp::limits(&dist)?;
    let report = TheoryOutput {
        config: DistConfig { dist: dist.to_string() },
        alpha: lim.alpha,
        beta: lim.beta,
        p_tilde: dist.bernoulli_p().map(rgl_core::dist::p_tilde),
        x_typ: lim.x_typ,
        x_opt: lim.x_opt,
        x_beq: lim.x_beq,
        x_weq: lim.x_weq,
        regime: lim.regime,
        price_of_anarchy: lim.price_of_anarchy().into(),
        price_of_stability: lim.price_of_stability().into(),
    };
    let text = match format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = experiment::config_line(&report.config)?;
            s.push_str("quantity,value\n");
            let ratio = |r: &Ratio| match r {
                Ratio::Finite(v) => v.to_string(),
                Ratio::Infinite(m) => m.to_string(),
            };
            for (k, v) in [
                ("alpha", lim.alpha.to_string()),
                ("beta", lim.beta.to_string()),
                ("x_typ", lim.x_typ.to_string()),
                ("x_opt", lim.x_opt.to_string()),
                ("x_beq", lim.x_beq.to_string()),
                ("x_weq", lim.x_weq.to_string()),
                ("price_of_anarchy", ratio(&report.price_of_anarchy)),
                ("price_of_stability", ratio(&report.price_of_stability)),
            ] {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
    };
    emit(&text, &out)
}

fn apply_flags(cfg: &mut ExperimentConfig, run: &RunFlags) {
    if let Some(r) = run.reps {
        cfg.replications = r;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if !run.eps.is_empty() {
        cfg.epsilons = run.eps.clone();
    }
    if !run.thresholds.is_empty() {
        cfg.thresholds = run.thresholds.clone();
    }
    cfg.workers = run.workers;
    if run.mem_cap.is_some() {
        cfg.mem_cap_bytes = run.mem_cap;
    }
}

fn fresh_config(dist: PayoffDistribution, n: Vec<usize>, run: &RunFlags) -> CliResult<ExperimentConfig> {
    let reps = run.reps.ok_or_else(|| invalid("--reps is required"))?;
    let seed = run.seed.ok_or_else(|| invalid("--seed is required; all randomness flows from it"))?;
    let mut cfg = ExperimentConfig::new(dist, n, reps, seed);
    apply_flags(&mut cfg, run);
    Ok(cfg)
}

fn capacity_failure(result: &ExperimentResult) -> Option<Failure> {
    let bad: Vec<String> =
        result.cells.iter().filter_map(|c| c.error.as_ref().map(|e| format!("n = {}: {e}", c.n))).collect();
    (!bad.is_empty()).then(|| Failure { code: 3, message: format!("partial results; {}", bad.join("; ")) })
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| invalid(format!("bad config {}: {e}", path.display())))?;
            if let Some(d) = &args.dist {
                cfg.dist = d.clone();
            }
            let n = player_counts(&args.n, &args.n_range)?;
            if !n.is_empty() {
                cfg.n = n;
            }
            apply_flags(&mut cfg, &args.run);
            cfg
        }
        None => {
            let dist = args.dist.clone().expect("clap requires --dist");
            fresh_config(dist, player_counts(&args.n, &args.n_range)?, &args.run)?
        }
    };
    cfg.workers = args.run.workers;
    let result = experiment::run(&cfg)?;
    experiment::write_outputs(&result, &args.run.out_dir)?;
    let text = match args.run.format {
        Format::Json => experiment::summary_json(&result)?,
        Format::Csv => experiment::results_csv(&result)?,
    };
    print!("{text}");
    capacity_failure(&result).map_or(Ok(()), Err)
}

fn sweep(args: SweepArgs) -> CliResult {
    let n = player_counts(&args.n, &args.n_range)?;
    let dists: Vec<PayoffDistribution> = match &args.dist {
        Some(d) => vec![d.clone()],
        None => args.p_grid.iter().map(|&p| PayoffDistribution::bernoulli(p)).collect::<Result<_, _>>()?,
    };
    let mut results = Vec::with_capacity(dists.len());
    for (k, dist) in dists.into_iter().enumerate() {
        let cfg = fresh_config(dist, n.clone(), &args.run)?;
        cfg.validate()?;
        let result = experiment::run(&cfg)?;
        experiment::write_outputs(&result, &args.run.out_dir.join(format!("run_{k:03}")))?;
        results.push(result);
    }
    let text = match args.run.format {
        Format::Json => json(&results)?,
        Format::Csv => results.iter().map(experiment::results_csv).collect::<Result<Vec<_>, _>>()?.concat(),
    };
    experiment::write_file(&args.run.out_dir.join("sweep.json"), &json(&results)?)?;
    print!("{text}");
    match results.iter().find_map(capacity_failure) {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct FigureConfig {
    which: u8,
    grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
}

fn figures(which: u8, grid: Option<usize>, p: f64, format: Format, out: Option<PathBuf>) -> CliResult {
    let text = if which == 1 {
        let grid = grid.unwrap_or(199);
        let config = FigureConfig { which, grid, p: None };
        let rows = experiment::figure1_data(&experiment::interior_grid(grid))?;
        match format {
            Format::Csv => experiment::figure1_csv(&rows, &config)?,
            Format::Json => json(&serde_json::json!({ "config": config, "rows": rows }))?,
        }
    } else {
        let grid = grid.unwrap_or(101);
        let config = FigureConfig { which, grid, p: Some(p) };
        let fig = experiment::figure2_data(p, &experiment::closed_grid(grid))?;
        match format {
            Format::Csv => experiment::figure2_csv(&fig, &config)?,
            Format::Json => json(&serde_json::json!({ "config": config, "figure": fig }))?,
        }
    };
    emit(&text, &out)
}

fn brute(p: f64, n: usize, thresholds: Vec<f64>, out: Option<PathBuf>) -> CliResult {
    let result = experiment::brute_force_expectations(n, p, &thresholds)?;
    let text = json(&serde_json::json!({
        "config": { "p": p, "n": n, "thresholds": thresholds },
        "result": result,
    }))?;
    emit(&text, &out)
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Theory { dist, format, out } => theory(dist, format, out),
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Figures { which, grid, p, format, out } => figures(which, grid, p, format, out),
        Command::Brute { p, n, thresholds, out } => brute(p, n, thresholds, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rgl: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
