//! Command-line front end: `test`, `simulate`, `ppplot`, `critval`.
//!
//! Exit codes are stable: 0 success, 2 data error, 3 partition/cell
//! degeneracy, 4 unidentified direction, 5 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::ade::AdeSettings;
use crate::data::{CsvSchema, Dataset, Direction};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentGrid};
use crate::limit;
use crate::process::{self, ModeTag, TestMode};

#[derive(Parser)]
#[command(
    name = "condindep",
    about = "Distribution-free test of whether a scalar Z explains a binary Y \
             beyond a single linear index of X, plus its simulation study",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the test on a CSV dataset
    Test(TestArgs),
    /// Run a size/power experiment grid from a config file
    Simulate(SimulateArgs),
    /// Emit probability-probability pairs under the null
    Ppplot(PpplotArgs),
    /// Print quantiles of the asymptotic null distribution
    Critval(CritvalArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with covariate columns x1..xd, a label column, and a z column
    #[arg(long)]
    data: PathBuf,
    /// Number of index cells
    #[arg(long)]
    m: usize,
    /// Either `estimate` or an explicit comma-separated direction vector
    /// (normalized internally)
    #[arg(long, default_value = "estimate")]
    direction: String,
    /// Nominal significance level used for the reject/accept line
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// On an empty class/cell, retry with m-1 until the partition is valid
    #[arg(long)]
    auto_shrink_m: bool,
    /// Output format
    #[arg(long, default_value = "human", value_parser = ["human", "json-lines"])]
    format: String,
    /// Covariate column prefix
    #[arg(long, default_value = "x")]
    x_prefix: String,
    /// Label column name
    #[arg(long, default_value = "y")]
    y_col: String,
    /// Z column name
    #[arg(long, default_value = "z")]
    z_col: String,
    #[command(flatten)]
    ade: AdeArgs,
}

#[derive(Args)]
struct AdeArgs {
    /// Multiplier on the default bandwidth rule sigma_j * n^(-1/(d+6))
    #[arg(long = "ade-bandwidth-scale", default_value_t = 1.0)]
    bandwidth_scale: f64,
    /// Snap the estimated direction to the 1/sqrt(n) grid (true|false)
    #[arg(long = "ade-round-to-grid", default_value_t = true, action = clap::ArgAction::Set)]
    round_to_grid: bool,
}

impl AdeArgs {
    fn settings(&self) -> AdeSettings {
        AdeSettings {
            bandwidth_scale: self.bandwidth_scale,
            round_to_grid: self.round_to_grid,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Grid config file (flat key = value lines; see README)
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a pivoted (one rate column per m) CSV here
    #[arg(long)]
    pivot: Option<PathBuf>,
    /// Checkpoint file; completed grid cells are skipped on re-run
    /// (default: <out>.ckpt)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Disable checkpointing
    #[arg(long)]
    no_checkpoint: bool,
}

#[derive(Args)]
struct PpplotArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    m: usize,
    /// oracle | estimate
    #[arg(long, default_value = "estimate")]
    mode: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path for the pairs
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    ade: AdeArgs,
}

#[derive(Args)]
struct CritvalArgs {
    /// Comma-separated probability levels in (0,1)
    #[arg(long, default_value = "0.90,0.95,0.99")]
    levels: String,
}

/// Entry point used by main(); returns the process exit code.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 5,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Ppplot(args) => cmd_ppplot(&args),
        Command::Critval(args) => cmd_critval(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let schema = CsvSchema {
        x_prefix: args.x_prefix.clone(),
        y_column: args.y_col.clone(),
        z_column: args.z_col.clone(),
    };
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::LevelOutOfRange(args.level));
    }
    let ds = Dataset::from_csv_path(&args.data, &schema)?;
    let mode = parse_direction_spec(&args.direction, &args.ade)?;

    let mut m = args.m;
    let result = loop {
        match process::run_test_strict(&ds, m, &mode) {
            Ok(res) => break res,
            Err(e @ (Error::EmptyCell { .. } | Error::DistinctValueDeficiency { .. }))
                if args.auto_shrink_m && m > 1 =>
            {
                eprintln!("m = {m}: {e}; retrying with m = {}", m - 1);
                m -= 1;
            }
            Err(e) => return Err(e),
        }
    };

    if args.format == "json-lines" {
        println!(
            "{}",
            serde_json::to_string(&result).expect("result serializes")
        );
    } else {
        print_human(&result, args.level);
    }
    Ok(())
}

fn print_human(res: &process::TestResult, level: f64) {
    println!("T_n (Cramer-von Mises)   = {}", res.t_n);
    println!("KS statistic             = {}", res.ks_n);
    println!("p-value (asymptotic CvM) = {}", res.p_value_cvm);
    println!(
        "decision at level {level}: {}",
        if res.p_value_cvm < level {
            "reject conditional independence"
        } else {
            "no evidence against conditional independence"
        }
    );
    println!(
        "m = {}, n = {} (n0 = {}, n1 = {})",
        res.m,
        res.cell_counts.n(),
        res.cell_counts.n0(),
        res.cell_counts.n1()
    );
    println!("normalizer = {}", res.normalizer);
    let dir: Vec<String> = res.direction.iter().map(|b| format!("{b}")).collect();
    println!("direction ({}) = [{}]", res.mode, dir.join(", "));
    let per_cell: Vec<String> = (1..=res.m)
        .map(|k| {
            format!(
                "{k}:{}/{}",
                res.cell_counts.count(0, k),
                res.cell_counts.count(1, k)
            )
        })
        .collect();
    println!("cell counts (class0/class1): {}", per_cell.join(" "));
}

fn parse_direction_spec(spec: &str, ade: &AdeArgs) -> Result<TestMode> {
    if spec.trim() == "estimate" {
        return Ok(TestMode::Estimate(ade.settings()));
    }
    let parts: std::result::Result<Vec<f64>, _> =
        spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let v = parts.map_err(|_| Error::Config {
        key: "--direction".into(),
        message: format!("expected `estimate` or a comma-separated vector, got `{spec}`"),
    })?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config {
            key: "--direction".into(),
            message: "direction components must be finite".into(),
        });
    }
    Ok(TestMode::Oracle(Direction::from_unnormalized(&v)?))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut grid = parse_grid_config(&args.config)?;
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    let table = if args.no_checkpoint {
        harness::run_grid(&grid)?
    } else {
        let ckpt = args
            .checkpoint
            .clone()
            .unwrap_or_else(|| args.out.with_extension("ckpt"));
        harness::run_grid_checkpointed(&grid, &ckpt)?
    };
    harness::emit_table_csv_path(&table, &args.out)?;
    if let Some(pivot) = &args.pivot {
        let mut buf = Vec::new();
        harness::emit_pivot_csv(&table, &mut buf)?;
        fs::write(pivot, buf)?;
    }

    println!(
        "grid complete: {} cells x {} replications (n = {}, level = {}, seed = {})",
        table.rows.len(),
        table.reps,
        table.n,
        table.level,
        table.seed
    );
    for row in &table.rows {
        println!(
            "  d={} m={} sigma={} theta={} {}: rate {:.3} (se {:.3}, invalid {})",
            row.d,
            row.m,
            row.sigma,
            row.theta,
            row.mode,
            row.rate(),
            row.mc_se(),
            row.invalid
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_ppplot(args: &PpplotArgs) -> Result<()> {
    let mode: ModeTag = args.mode.parse().map_err(|message| Error::Config {
        key: "--mode".into(),
        message,
    })?;
    if args.reps < 1 {
        return Err(Error::Config {
            key: "--reps".into(),
            message: "need at least one replication".into(),
        });
    }
    let pairs = harness::pp_plot_data(
        args.d,
        args.sigma,
        args.m,
        mode,
        args.n,
        args.reps,
        args.seed,
        &args.ade.settings(),
    )?;
    let mut buf = Vec::new();
    harness::emit_pp_csv(&pairs, &mut buf)?;
    fs::write(&args.out, buf)?;
    println!(
        "{} pairs written to {}; sup-gap = {:.6}",
        pairs.len(),
        args.out.display(),
        harness::pp_sup_gap(&pairs)
    );
    Ok(())
}

fn cmd_critval(args: &CritvalArgs) -> Result<()> {
    let levels: std::result::Result<Vec<f64>, _> = args
        .levels
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let levels = levels.map_err(|_| Error::Config {
        key: "--levels".into(),
        message: format!(
            "expected comma-separated probabilities, got `{}`",
            args.levels
        ),
    })?;
    for level in levels {
        let q = limit::cvm_limit_quantile(level)?;
        println!("{level} -> {q:.6}");
    }
    Ok(())
}

// -- grid config file --------------------------------------------------------

/// Flat key = value format. Lists are comma-separated. Keys:
/// grid.d, grid.sigma, grid.theta, grid.m, grid.mode, n, reps, level, seed,
/// ade.bandwidth_scale, ade.round_to_grid. Lines starting with # are comments.
pub fn parse_grid_config(path: &Path) -> Result<ExperimentGrid> {
    let text = fs::read_to_string(path)?;
    let mut grid = ExperimentGrid {
        d_values: Vec::new(),
        sigma_values: Vec::new(),
        theta_values: Vec::new(),
        m_values: Vec::new(),
        modes: Vec::new(),
        n: 0,
        reps: 0,
        level: 0.05,
        seed: 0,
        ade: AdeSettings::default(),
    };
    let mut saw = std::collections::HashSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            key: format!("line {}", lineno + 1),
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |message: String| Error::Config {
            key: key.to_string(),
            message,
        };

        match key {
            "grid.d" => grid.d_values = parse_list(value).map_err(bad)?,
            "grid.m" => grid.m_values = parse_list(value).map_err(bad)?,
            "grid.sigma" => grid.sigma_values = parse_list(value).map_err(bad)?,
            "grid.theta" => grid.theta_values = parse_list(value).map_err(bad)?,
            "grid.mode" => {
                grid.modes = value
                    .split(',')
                    .map(|s| s.trim().parse::<ModeTag>())
                    .collect::<std::result::Result<Vec<_>, String>>()
                    .map_err(bad)?;
            }
            "n" => grid.n = parse_scalar(value).map_err(bad)?,
            "reps" => grid.reps = parse_scalar(value).map_err(bad)?,
            "level" => grid.level = parse_scalar(value).map_err(bad)?,
            "seed" => grid.seed = parse_scalar(value).map_err(bad)?,
            "ade.bandwidth_scale" => grid.ade.bandwidth_scale = parse_scalar(value).map_err(bad)?,
            "ade.round_to_grid" => {
                grid.ade.round_to_grid = value
                    .parse::<bool>()
                    .map_err(|_| bad(format!("expected true or false, got `{value}`")))?;
            }
            other => {
                return Err(Error::Config {
                    key: other.to_string(),
                    message: "unknown key".into(),
                })
            }
        }
        saw.insert(key.to_string());
    }

    for required in [
        "grid.d",
        "grid.sigma",
        "grid.theta",
        "grid.m",
        "grid.mode",
        "n",
        "reps",
    ] {
        if !saw.contains(required) {
            return Err(Error::Config {
                key: required.into(),
                message: "missing required key".into(),
            });
        }
    }
    grid.validate()?;
    Ok(grid)
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse `{}`", s.trim()))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("cannot parse `{value}`"))
}
