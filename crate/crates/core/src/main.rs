use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pipemap::gen::{generate, ExperimentConfig, Family};
use pipemap::harness::{
    aggregate_plot_data, failure_threshold, run_sweep, sig6, spec_file::parse_sweep_spec,
    write_csv, Grid, HarnessError, SweepSpec,
};
use pipemap::heuristics::{Heuristic, HeuristicError, Mode};
use pipemap::model::format::{parse_instance, parse_mapping, write_instance, FormatError};
use pipemap::model::{evaluate, PipelineApp, Platform};
use pipemap::oracle::{self, Hetero1DInstance, OracleError};
use pipemap::sim::{self, SimError};

/// Failure classes, each with its exit code.
enum Failure {
    Infeasible(String),
    Invalid(String),
    TooLarge(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Infeasible(_) => 2,
            Failure::Invalid(_) => 3,
            Failure::TooLarge(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Infeasible(m) | Failure::Invalid(m) | Failure::TooLarge(m) => m,
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<pipemap::model::ModelError> for Failure {
    fn from(e: pipemap::model::ModelError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<HeuristicError> for Failure {
    fn from(e: HeuristicError) -> Self {
        match e {
            HeuristicError::PeriodUnreachable { .. } | HeuristicError::LatencyBelowOptimal { .. } => {
                Failure::Infeasible(e.to_string())
            }
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::InstanceTooLarge { .. } => Failure::TooLarge(e.to_string()),
            OracleError::Infeasible { .. } => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "pipemap", version, about = "Period/latency mapping of pipeline workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances of an experiment family.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of instances; instance k uses seed + k.
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Period and latency of a mapping.
    Eval {
        instance: PathBuf,
        #[arg(long = "map")]
        mapping: String,
    },
    /// Run one heuristic.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        heuristic: Heuristic,
        #[command(flatten)]
        threshold: Threshold,
    },
    /// Exact answers by exhaustive search (small instances).
    Oracle {
        instance: PathBuf,
        #[command(flatten)]
        query: OracleQuery,
        /// Lift the instance size guard.
        #[arg(long)]
        force: bool,
    },
    /// Discrete-event simulation of a mapping against the closed form.
    Simulate {
        instance: PathBuf,
        #[arg(long = "map")]
        mapping: String,
        #[arg(long, default_value_t = 100)]
        datasets: usize,
    },
    /// Threshold sweep over generated instances.
    Sweep(SweepArgs),
    /// Mean failure thresholds per heuristic.
    Failure(FailureArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Threshold {
    /// Fixed period (h1, h2a, h2b, h3).
    #[arg(long)]
    period: Option<f64>,
    /// Fixed latency (h4, h5).
    #[arg(long)]
    latency: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct OracleQuery {
    #[arg(long)]
    min_period: bool,
    #[arg(long)]
    min_latency: bool,
    #[arg(long)]
    pareto: bool,
    /// Heterogeneous chains-to-chains decision with bound K on the works and
    /// speeds (data sizes and bandwidth ignored, exactly p intervals).
    #[arg(long, value_name = "K")]
    decide: Option<f64>,
    /// Smallest latency with period at most K.
    #[arg(long, value_name = "K")]
    max_period: Option<f64>,
    /// Smallest period with latency at most K.
    #[arg(long, value_name = "K")]
    max_latency: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep specification; replaces the instance flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "e1")]
    family: Vec<Family>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    p: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "h1,h2a,h2b,h3,h4,h5")]
    heuristics: Vec<Heuristic>,
    /// `auto:COUNT`, `MIN:MAX:COUNT` (geometric) or `v1,v2,...`.
    #[arg(long, default_value = "auto:16")]
    period_grid: String,
    #[arg(long, default_value = "auto:16")]
    latency_grid: String,
    #[arg(long)]
    out: PathBuf,
    /// Directory for one series file per (config, heuristic).
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Fill the wall_ms column (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct FailureArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 50)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "h1,h2a,h2b,h3,h4,h5")]
    heuristics: Vec<Heuristic>,
    /// Grid shared by both modes, same syntax as `sweep`.
    #[arg(long, default_value = "auto:64")]
    grid: String,
}

fn parse_grid(text: &str) -> Result<Grid, Failure> {
    let bad = || Failure::Invalid(format!("cannot parse grid `{text}`"));
    let grid = if let Some(count) = text.strip_prefix("auto:") {
        Grid::Auto {
            count: count.parse().map_err(|_| bad())?,
        }
    } else if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [min, max, count] = parts[..] else {
            return Err(bad());
        };
        Grid::Geometric {
            min: min.parse().map_err(|_| bad())?,
            max: max.parse().map_err(|_| bad())?,
            count: count.parse().map_err(|_| bad())?,
        }
    } else {
        Grid::Explicit(
            text.split(',')
                .map(|v| v.trim().parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?,
        )
    };
    grid.validate()?;
    Ok(grid)
}

fn load(path: &Path) -> Result<(PipelineApp, Platform), Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_instance(&text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            family,
            n,
            p,
            seed,
            count,
            out,
        } => {
            if n == 0 || p == 0 {
                return Err(Failure::Invalid("n and p must be >= 1".into()));
            }
            fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            for k in 0..count {
                let config = ExperimentConfig::new(family, n, p, seed).nth(k);
                let (app, platform) = generate(&config);
                let path = out.join(config.file_name());
                write_file(&path, &write_instance(&app, &platform))?;
                println!("{}", path.display());
            }
        }
        Command::Eval { instance, mapping } => {
            let (app, platform) = load(&instance)?;
            let m = parse_mapping(&mapping)?;
            let r = evaluate(&app, &platform, &m)?;
            println!("{m}");
            println!("period {}", r.period);
            println!("latency {}", r.latency);
            println!("bottleneck {}", r.bottleneck + 1);
        }
        Command::Solve {
            instance,
            heuristic,
            threshold,
        } => {
            let (app, platform) = load(&instance)?;
            let (mode, value) = match (threshold.period, threshold.latency) {
                (Some(k), _) => (Mode::Period, k),
                (_, Some(k)) => (Mode::Latency, k),
                _ => unreachable!("clap enforces one threshold"),
            };
            if mode != heuristic.mode() {
                return Err(Failure::Invalid(format!(
                    "{heuristic} takes --{}, not --{mode}",
                    heuristic.mode()
                )));
            }
            let m = heuristic.run(&app, &platform, value)?;
            let r = evaluate(&app, &platform, &m)?;
            println!("{m}");
            println!("period {}", r.period);
            println!("latency {}", r.latency);
        }
        Command::Oracle {
            instance,
            query,
            force,
        } => {
            let (app, platform) = load(&instance)?;
            oracle_query(&app, &platform, &query, force)?;
        }
        Command::Simulate {
            instance,
            mapping,
            datasets,
        } => {
            let (app, platform) = load(&instance)?;
            let m = parse_mapping(&mapping)?;
            let (report, cost) = sim::compare(&app, &platform, &m, datasets)?;
            let (ep, el) = report.relative_error(&cost);
            println!("{m}");
            println!("datasets {}", report.trace_length);
            println!("period measured {} analytic {} rel_err {:e}", report.measured_period, cost.period, ep);
            println!("latency measured {} analytic {} rel_err {:e}", report.measured_latency, cost.latency, el);
        }
        Command::Sweep(args) => sweep(args)?,
        Command::Failure(args) => failure(args)?,
    }
    Ok(())
}

fn oracle_query(
    app: &PipelineApp,
    platform: &Platform,
    q: &OracleQuery,
    force: bool,
) -> Result<(), Failure> {
    if q.min_latency {
        let (l, m) = oracle::optimal_latency(app, platform);
        println!("{m}");
        println!("latency {l}");
    } else if q.min_period {
        let (period, m) = oracle::brute_force_min_period(app, platform, force)?;
        println!("{m}");
        println!("period {period}");
    } else if q.pareto {
        let front = oracle::pareto_front(app, platform, force)?;
        for pt in front.points() {
            println!("{} {} {}", pt.period, pt.latency, pt.witness);
        }
    } else if let Some(k) = q.max_period {
        let (l, m) = oracle::min_latency_given_period(app, platform, k, force)?;
        println!("{m}");
        println!("latency {l}");
    } else if let Some(k) = q.max_latency {
        let (p, m) = oracle::min_period_given_latency(app, platform, k, force)?;
        println!("{m}");
        println!("period {p}");
    } else if let Some(k) = q.decide {
        let inst = Hetero1DInstance {
            weights: app.work().to_vec(),
            speeds: platform.speeds().to_vec(),
            bound: k,
        };
        match oracle::hetero_1d_partition_decide(&inst, force)? {
            Some(w) => {
                println!("yes");
                println!("{}", w.as_mapping());
                println!("max_ratio {}", w.max_ratio(&inst));
            }
            None => {
                println!("no");
                return Err(Failure::Infeasible(format!("no partition meets bound {k}")));
            }
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_sweep_spec(&text)?
        }
        None => {
            let mut configs = Vec::new();
            for &f in &args.family {
                for &n in &args.n {
                    for &p in &args.p {
                        if n == 0 || p == 0 {
                            return Err(Failure::Invalid("n and p must be >= 1".into()));
                        }
                        configs.push(ExperimentConfig::new(f, n, p, args.seed));
                    }
                }
            }
            SweepSpec {
                configs,
                instances: args.instances,
                heuristics: args.heuristics.clone(),
                period_grid: Some(parse_grid(&args.period_grid)?),
                latency_grid: Some(parse_grid(&args.latency_grid)?),
            }
        }
    };
    let rows = run_sweep(&spec)?;
    write_file(&args.out, &write_csv(&rows, args.timing))?;
    eprintln!("{} rows written to {}", rows.len(), args.out.display());
    if let Some(dir) = &args.plot_data {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for series in aggregate_plot_data(&rows) {
            write_file(&dir.join(series.file_name()), &series.to_text())?;
        }
    }
    Ok(())
}

fn failure(args: FailureArgs) -> Result<(), Failure> {
    if args.n == 0 || args.p == 0 {
        return Err(Failure::Invalid("n and p must be >= 1".into()));
    }
    let grid = parse_grid(&args.grid)?;
    let config = ExperimentConfig::new(args.family, args.n, args.p, args.seed);
    println!("heuristic mode mean_threshold never_fails always_fails");
    for h in args.heuristics {
        match failure_threshold(&config, h, &grid, args.instances) {
            Ok(s) => println!(
                "{} {} {} {} {}",
                h,
                h.mode(),
                sig6(s.mean),
                s.never_fails,
                s.always_fails
            ),
            Err(HarnessError::AlwaysFails { .. }) => {
                println!("{} {} - 0 {}", h, h.mode(), args.instances)
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
