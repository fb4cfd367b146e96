use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wnp_core::kernelfn::{Kernel, KernelSpec};
use wnp_core::limitlab::{
    convergence_check, oracle_suite, AdditiveFn, Functional, OracleCheck, DEFAULT_FR1_DRAWS,
};
use wnp_core::mc::{
    emit_table, run_power, run_size, with_threads, McDesign, TableFormat, DEFAULT_SEED,
};
use wnp_core::procgen::{draw_path, InnovationSpec, PresampleMode, ProcessSpec};
use wnp_core::regress::{GFunction, PredictiveSample};
use wnp_core::rng::StreamSeed;
use wnp_core::spectest::{f_tilde_sample, wp_statistic, FTildeConfig, SpecTestResult};
use wnp_core::Error;

#[derive(Parser)]
#[command(
    name = "wnp",
    version,
    about = "Persistence-robust specification testing toolkit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (or file for `simulate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, default_value = "both")]
    format: TableFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one regressor path and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the specification tests on a CSV dataset with columns x and y.
    Test(TestArgs),
    /// Size table from a design config.
    McSize,
    /// Power tables from a design config with an alternative.
    McPower,
    /// Empirical convergence of functionals to their limits.
    Limits(LimitsArgs),
    /// Print the analytic oracle checks.
    Oracle,
}

#[derive(Args)]
struct SimulateArgs {
    /// Process spec as inline JSON (alternative to --config).
    #[arg(long)]
    process: Option<String>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Zero pre-sample innovations instead of random draws.
    #[arg(long)]
    zero_presample: bool,
    /// Also write y_t = x_{t-1} + u_t (empty for t = 1).
    #[arg(long)]
    response: bool,
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with columns `x` and `y`.
    #[arg(long)]
    data: PathBuf,
    /// Bandwidth; overrides --b.
    #[arg(long)]
    h: Option<f64>,
    /// Bandwidth exponent, h = n^b.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = 17)]
    p: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value = "gaussian")]
    kernel: Kernel,
    /// Also report the U-statistic test.
    #[arg(long)]
    wp: bool,
}

#[derive(Args)]
struct LimitsArgs {
    /// Process spec as inline JSON (alternative to --config).
    #[arg(long)]
    process: Option<String>,
    /// Additive function (`x^2`, `abs:1.5`, `pos`, `const:1`, `normal:0.25`)
    /// or `kernel` for the kernel functional.
    #[arg(long, default_value = "x^2")]
    functional: String,
    /// Kernel functional location.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x: f64,
    /// Kernel functional bandwidth exponent.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, value_delimiter = ',', default_value = "500,2000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Draws of the random FR1 limit.
    #[arg(long, default_value_t = DEFAULT_FR1_DRAWS)]
    draws: usize,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn process_spec(common: &Common, inline: &Option<String>) -> CliResult<ProcessSpec> {
    let spec: ProcessSpec = match (inline, &common.config) {
        (Some(json), _) => {
            serde_json::from_str(json).map_err(|e| config_err(format!("--process: {e}")))?
        }
        (None, Some(path)) => read_json(path)?,
        (None, None) => {
            return Err(config_err(
                "a process spec is required (--process or --config)",
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn design(common: &Common) -> CliResult<McDesign> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| config_err("--config <design.json> is required"))?;
    let design: McDesign = read_json(path)?;
    design.validate()?;
    Ok(design)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn simulate(common: &Common, args: &SimulateArgs) -> CliResult<()> {
    let spec = process_spec(common, &args.process)?;
    let innov = InnovationSpec::new(args.rho)?;
    let mode = if args.zero_presample {
        PresampleMode::Zero
    } else {
        PresampleMode::Random
    };
    let seed = StreamSeed::new(common.seed.unwrap_or(DEFAULT_SEED), 0);
    let (path, u) = draw_path(&spec, &innov, args.n, mode, seed)?;
    let mut sink: Box<dyn Write> = match &common.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    if args.response {
        let mut wtr = csv::Writer::from_writer(&mut sink);
        let io_err = |e: csv::Error| config_err(e.to_string());
        wtr.write_record(["t", "x", "y"]).map_err(io_err)?;
        for (t, &x) in path.values.iter().enumerate() {
            let y = if t == 0 {
                String::new()
            } else {
                (path.values[t - 1] + u[t]).to_string()
            };
            wtr.write_record([(t + 1).to_string(), x.to_string(), y])
                .map_err(io_err)?;
        }
        wtr.flush()?;
    } else {
        path.to_csv(&mut sink)?;
    }
    Ok(())
}

fn read_dataset(path: &Path) -> CliResult<PredictiveSample> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| config_err(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| config_err(format!("{} has no `{name}` column", path.display())))
    };
    let (ix, iy) = (col("x")?, col("y")?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| config_err(e.to_string()))?;
        let parse = |i: usize, allow_empty: bool| -> CliResult<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() && allow_empty {
                return Ok(f64::NAN);
            }
            s.parse::<f64>()
                .map_err(|_| config_err(format!("row {}: cannot parse `{s}`", row + 2)))
        };
        x.push(parse(ix, false)?);
        // y_1 never enters the regression
        y.push(parse(iy, row == 0)?);
    }
    Ok(PredictiveSample::new(x, y)?)
}

fn spec_test(common: &Common, args: &TestArgs) -> CliResult<()> {
    let sample = read_dataset(&args.data)?;
    let h = args.h.unwrap_or_else(|| (sample.n() as f64).powf(args.b));
    let cfg = FTildeConfig {
        kernel: KernelSpec::new(args.kernel)?,
        h,
        p: args.p,
        alpha: args.alpha,
    };
    let (result, points) = with_threads(common.threads, || {
        f_tilde_sample(&sample, &GFunction::Identity, &cfg)
    })??;
    let mut json = serde_json::to_value(&result).map_err(|e| config_err(e.to_string()))?;
    json["h"] = h.into();
    json["points"] = serde_json::to_value(&points.points).map_err(|e| config_err(e.to_string()))?;
    if !points.distinct {
        json["warning"] = "evaluation points are not distinct".into();
    }
    if args.wp {
        let s = wp_statistic(sample.response(), sample.lagged(), h, &cfg.kernel)?;
        json["wp"] = s.into();
    }
    let text = serde_json::to_string_pretty(&json).map_err(|e| config_err(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("result.json"), &text)?;
        fs::write(
            dir.join("result.csv"),
            format!(
                "{}\n{}\n",
                SpecTestResult::CSV_HEADER,
                result.to_csv_record()
            ),
        )?;
    }
    Ok(())
}

fn mc_size(common: &Common) -> CliResult<()> {
    let design = design(common)?;
    let table = with_threads(common.threads, || run_size(&design, common.seed))??;
    let files = emit_table(&table, &out_dir(common), "size", common.format)?;
    report(&files);
    Ok(())
}

fn mc_power(common: &Common) -> CliResult<()> {
    let design = design(common)?;
    if design.alternative.is_none() {
        return Err(config_err("power design needs an `alternative`"));
    }
    let report_tables = with_threads(common.threads, || run_power(&design, common.seed))??;
    let dir = out_dir(common);
    let mut files = Vec::new();
    for (stem, table) in [
        ("power_relative", &report_tables.relative),
        ("power_adjusted", &report_tables.adjusted),
        ("power_raw", &report_tables.raw),
        ("power_null", &report_tables.null),
    ] {
        files.extend(emit_table(table, &dir, stem, common.format)?);
    }
    report(&files);
    Ok(())
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn limits(common: &Common, args: &LimitsArgs) -> CliResult<()> {
    let spec = process_spec(common, &args.process)?;
    let functional = if args.functional == "kernel" {
        Functional::Kernel {
            kernel: KernelSpec::gaussian(),
            x: args.x,
            b: args.b,
        }
    } else {
        Functional::Additive {
            f: args.functional.parse::<AdditiveFn>()?,
        }
    };
    let seed = common.seed.unwrap_or(DEFAULT_SEED);
    let report = with_threads(common.threads, || {
        convergence_check(&spec, &functional, &args.n, args.reps, args.draws, seed)
    })??;
    print!("{}", report.summary());
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        let path = dir.join("limits.csv");
        fs::write(&path, report.to_csv())?;
        println!("wrote {}", path.display());
    } else {
        print!("{}", report.to_csv());
    }
    Ok(())
}

fn oracle() -> CliResult<bool> {
    let checks = oracle_suite()?;
    println!("{}", OracleCheck::CSV_HEADER);
    for c in &checks {
        println!("{}", c.to_csv_record());
    }
    Ok(checks.iter().all(OracleCheck::passed))
}

fn run(cli: Cli) -> CliResult<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Simulate(a) => simulate(common, a),
        Command::Test(a) => spec_test(common, a),
        Command::McSize => mc_size(common),
        Command::McPower => mc_power(common),
        Command::Limits(a) => limits(common, a),
        Command::Oracle => {
            if oracle()? {
                Ok(())
            } else {
                Err(Failure::Numerical("oracle check failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
