//! Experiment grids over (d, sigma, theta, m, mode): rejection-rate tables,
//! PP-plot data, CSV emission, and per-cell checkpointing.
//!
//! Replication r of a grid cell uses the stream key (master, cell, r) where
//! the cell key hashes the cell parameters, not its position in the grid.
//! Cells are therefore individually re-runnable and a resumed or re-shaped
//! grid reproduces exactly the same numbers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::ade::AdeSettings;
use crate::error::{Error, Result};
use crate::limit;
use crate::process::{ModeTag, TestMode};
use crate::rng::derive_key;
use crate::sim::{self, DgpConfig, Replication};

/// Full design of a size/power study.
#[derive(Clone, Debug)]
pub struct ExperimentGrid {
    pub d_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
    pub theta_values: Vec<f64>,
    pub m_values: Vec<usize>,
    pub modes: Vec<ModeTag>,
    pub n: usize,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub ade: AdeSettings,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, message: String| Error::Config {
            key: key.into(),
            message,
        };
        if self.d_values.is_empty() {
            return Err(err("grid.d", "empty list".into()));
        }
        if self.sigma_values.is_empty() {
            return Err(err("grid.sigma", "empty list".into()));
        }
        if self.theta_values.is_empty() {
            return Err(err("grid.theta", "empty list".into()));
        }
        if self.m_values.is_empty() {
            return Err(err("grid.m", "empty list".into()));
        }
        if self.modes.is_empty() {
            return Err(err("grid.mode", "empty list".into()));
        }
        if self.reps < 1 {
            return Err(err("reps", "need at least one replication".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(err(
                "level",
                format!("level must be in (0,1), got {}", self.level),
            ));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &d in &self.d_values {
            for &m in &self.m_values {
                for &sigma in &self.sigma_values {
                    for &theta in &self.theta_values {
                        for &mode in &self.modes {
                            out.push(CellSpec {
                                d,
                                m,
                                sigma,
                                theta,
                                mode,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One grid cell's coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSpec {
    pub d: usize,
    pub m: usize,
    pub sigma: f64,
    pub theta: f64,
    pub mode: ModeTag,
}

impl CellSpec {
    /// Position-independent stream key component for this cell.
    fn key(&self, n: usize) -> u64 {
        derive_key(
            0,
            &[
                self.d as u64,
                self.m as u64,
                self.sigma.to_bits(),
                self.theta.to_bits(),
                self.mode as u64,
                n as u64,
            ],
        )
    }

    fn label(&self) -> String {
        format!(
            "d={},m={},sigma={},theta={},mode={}",
            self.d, self.m, self.sigma, self.theta, self.mode
        )
    }
}

/// Aggregated outcome of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectionRow {
    pub d: usize,
    pub m: usize,
    pub sigma: f64,
    pub theta: f64,
    pub mode: ModeTag,
    pub rejections: usize,
    pub invalid: usize,
    pub reps: usize,
}

impl RejectionRow {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.reps as f64
    }

    /// Binomial Monte Carlo standard error sqrt(rate (1-rate) / R).
    pub fn mc_se(&self) -> f64 {
        let r = self.rate();
        (r * (1.0 - r) / self.reps as f64).sqrt()
    }
}

/// Rejection rates for every grid cell, sorted by (d, m, sigma, theta, mode).
#[derive(Clone, Debug)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
    pub n: usize,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

/// Run the whole grid. Deterministic for a given master seed, independent
/// of the rayon worker count: per-replication keys are fixed and outcomes
/// are reduced in replication order.
pub fn run_grid(grid: &ExperimentGrid) -> Result<RejectionTable> {
    run_grid_inner(grid, None)
}

/// Like [`run_grid`], but appends each finished cell to `checkpoint` and
/// skips cells already present, so an interrupted grid resumes where it
/// stopped.
pub fn run_grid_checkpointed(grid: &ExperimentGrid, checkpoint: &Path) -> Result<RejectionTable> {
    run_grid_inner(grid, Some(checkpoint))
}

fn run_grid_inner(grid: &ExperimentGrid, checkpoint: Option<&Path>) -> Result<RejectionTable> {
    grid.validate()?;
    let mut done: Vec<RejectionRow> = Vec::new();
    let mut ckpt_file = None;
    if let Some(path) = checkpoint {
        done = load_checkpoint(path, grid)?;
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        let mut file = std::io::BufWriter::new(file);
        if done.is_empty() && file.get_ref().metadata()?.len() == 0 {
            writeln!(
                file,
                "#grid n={} reps={} level={} seed={}",
                grid.n, grid.reps, grid.level, grid.seed
            )?;
            file.flush()?;
        }
        ckpt_file = Some(file);
    }

    let mut rows = Vec::new();
    for cell in grid.cells() {
        let existing = done.iter().find(|r| {
            r.d == cell.d
                && r.m == cell.m
                && r.sigma == cell.sigma
                && r.theta == cell.theta
                && r.mode == cell.mode
        });
        let row = match existing {
            Some(r) => r.clone(),
            None => {
                let row = run_cell(grid, &cell)?;
                if let Some(file) = ckpt_file.as_mut() {
                    writeln!(
                        file,
                        "{},{},{},{},{},{},{}",
                        row.d, row.m, row.sigma, row.theta, row.mode, row.rejections, row.invalid
                    )?;
                    file.flush()?;
                }
                row
            }
        };
        rows.push(row);
    }
    sort_rows(&mut rows);
    Ok(RejectionTable {
        rows,
        n: grid.n,
        reps: grid.reps,
        level: grid.level,
        seed: grid.seed,
    })
}

fn run_cell(grid: &ExperimentGrid, cell: &CellSpec) -> Result<RejectionRow> {
    let cfg = DgpConfig::new(cell.d, cell.sigma, cell.theta, grid.n)?;
    let mode = match cell.mode {
        ModeTag::Oracle => TestMode::Oracle(sim::oracle_direction(&cfg)),
        ModeTag::Estimate => TestMode::Estimate(grid.ade.clone()),
    };
    let cell_key = cell.key(grid.n);

    let outcomes: Vec<Result<Replication>> = (0..grid.reps as u64)
        .into_par_iter()
        .map(|r| {
            sim::replicate(
                &cfg,
                cell.m,
                &mode,
                derive_key(grid.seed, &[cell_key, r]),
                grid.level,
            )
        })
        .collect();

    let (rejections, invalid) = aggregate_outcomes(outcomes, grid.reps, &cell.label())?;
    Ok(RejectionRow {
        d: cell.d,
        m: cell.m,
        sigma: cell.sigma,
        theta: cell.theta,
        mode: cell.mode,
        rejections,
        invalid,
        reps: grid.reps,
    })
}

/// Fold replication outcomes into (rejections, invalid), aborting the cell
/// when invalid replications exceed 1% of the budget.
fn aggregate_outcomes(
    outcomes: Vec<Result<Replication>>,
    budget: usize,
    label: &str,
) -> Result<(usize, usize)> {
    let mut rejections = 0usize;
    let mut invalid = 0usize;
    for outcome in outcomes {
        match outcome? {
            Replication::Valid { reject, .. } => {
                if reject {
                    rejections += 1;
                }
            }
            Replication::Invalid => invalid += 1,
        }
    }
    if invalid as f64 > 0.01 * budget as f64 {
        return Err(Error::ExcessInvalid {
            cell: label.to_string(),
            invalid,
            budget,
        });
    }
    Ok((rejections, invalid))
}

fn sort_rows(rows: &mut [RejectionRow]) {
    rows.sort_by(|a, b| {
        a.d.cmp(&b.d)
            .then(a.m.cmp(&b.m))
            .then(a.sigma.partial_cmp(&b.sigma).unwrap())
            .then(a.theta.partial_cmp(&b.theta).unwrap())
            .then(a.mode.cmp(&b.mode))
    });
}

/// Sorted null statistics against the limit CDF: pairs
/// (cdf(T_(i)), i/R) for i = 1..R.
pub fn pairs_from_stats(mut stats: Vec<f64>) -> Vec<(f64, f64)> {
    if stats.is_empty() {
        return Vec::new();
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r = stats.len();
    stats
        .iter()
        .enumerate()
        .map(|(i, &t)| (limit::cvm_limit_cdf(t), (i + 1) as f64 / r as f64))
        .collect()
}

/// PP-plot data under the null: R statistics at theta = 0, sorted, paired
/// with the asymptotic CDF.
#[allow(clippy::too_many_arguments)]
pub fn pp_plot_data(
    d: usize,
    sigma: f64,
    m: usize,
    mode_tag: ModeTag,
    n: usize,
    reps: usize,
    seed: u64,
    ade: &AdeSettings,
) -> Result<Vec<(f64, f64)>> {
    if reps < 1 {
        return Err(Error::Config {
            key: "reps".into(),
            message: "need at least one replication".into(),
        });
    }
    let cfg = DgpConfig::new(d, sigma, 0.0, n)?;
    let mode = match mode_tag {
        ModeTag::Oracle => TestMode::Oracle(sim::oracle_direction(&cfg)),
        ModeTag::Estimate => TestMode::Estimate(ade.clone()),
    };
    let cell = CellSpec {
        d,
        m,
        sigma,
        theta: 0.0,
        mode: mode_tag,
    };
    let cell_key = cell.key(n);
    let stats: Vec<Result<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| sim::run_one(&cfg, m, &mode, derive_key(seed, &[cell_key, r])).map(|res| res.t_n))
        .collect();
    let stats: Result<Vec<f64>> = stats.into_iter().collect();
    Ok(pairs_from_stats(stats?))
}

/// Long-format CSV: one row per grid cell, rates at 3 decimals.
pub fn emit_table_csv<W: Write>(table: &RejectionTable, mut w: W) -> Result<()> {
    writeln!(w, "d,m,sigma,theta,mode,rate,mc_se,invalid_count")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{:.3},{:.6},{}",
            r.d,
            r.m,
            r.sigma,
            r.theta,
            r.mode,
            r.rate(),
            r.mc_se(),
            r.invalid
        )?;
    }
    Ok(())
}

pub fn emit_table_csv_path(table: &RejectionTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    emit_table_csv(table, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Wide-format CSV mirroring the usual table layout: one row per
/// (d, theta, mode, sigma), one rate column per m.
pub fn emit_pivot_csv<W: Write>(table: &RejectionTable, mut w: W) -> Result<()> {
    let mut ms: Vec<usize> = table.rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();

    let mut header = String::from("d,theta,mode,sigma");
    for m in &ms {
        let _ = write!(header, ",rate_m{m}");
    }
    writeln!(w, "{header}")?;

    let mut groups: Vec<(usize, f64, ModeTag, f64)> = table
        .rows
        .iter()
        .map(|r| (r.d, r.theta, r.mode, r.sigma))
        .collect();
    groups.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
            .then(a.3.partial_cmp(&b.3).unwrap())
    });
    groups.dedup_by(|a, b| a == b);

    for (d, theta, mode, sigma) in groups {
        let mut line = format!("{d},{theta},{mode},{sigma}");
        for &m in &ms {
            let cell = table.rows.iter().find(|r| {
                r.d == d && r.theta == theta && r.mode == mode && r.sigma == sigma && r.m == m
            });
            match cell {
                Some(r) => {
                    let _ = write!(line, ",{:.3}", r.rate());
                }
                None => line.push(','),
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Kolmogorov distance between the empirical CDF of the null statistics and
/// the limit CDF, recovered from the emitted pairs: at each sorted statistic
/// the empirical CDF takes both i/R and (i-1)/R against cdf(T_(i)).
pub fn pp_sup_gap(pairs: &[(f64, f64)]) -> f64 {
    let r = pairs.len();
    if r == 0 {
        return 0.0;
    }
    let step = 1.0 / r as f64;
    pairs
        .iter()
        .map(|&(c, e)| (c - e).abs().max((c - (e - step)).abs()))
        .fold(0.0, f64::max)
}

/// Two-column CSV of PP pairs.
pub fn emit_pp_csv<W: Write>(pairs: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "asymptotic_cdf,empirical_cdf")?;
    for (x, y) in pairs {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}

fn load_checkpoint(path: &Path, grid: &ExperimentGrid) -> Result<Vec<RejectionRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let bad = |message: String| Error::Checkpoint {
        path: path.display().to_string(),
        message,
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let expect = format!(
                "grid n={} reps={} level={} seed={}",
                grid.n, grid.reps, grid.level, grid.seed
            );
            if meta.trim() != expect {
                return Err(bad(format!(
                    "checkpoint belongs to a different run (`{}` vs `{}`); \
                     delete the file or point --checkpoint elsewhere",
                    meta.trim(),
                    expect
                )));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(bad(format!("line {}: expected 7 fields", lineno + 1)));
        }
        let parse_err = |what: &str| bad(format!("line {}: bad {what}", lineno + 1));
        rows.push(RejectionRow {
            d: parts[0].parse().map_err(|_| parse_err("d"))?,
            m: parts[1].parse().map_err(|_| parse_err("m"))?,
            sigma: parts[2].parse().map_err(|_| parse_err("sigma"))?,
            theta: parts[3].parse().map_err(|_| parse_err("theta"))?,
            mode: parts[4].parse().map_err(|e: String| bad(e))?,
            rejections: parts[5].parse().map_err(|_| parse_err("rejections"))?,
            invalid: parts[6].parse().map_err(|_| parse_err("invalid"))?,
            reps: grid.reps,
        });
    }
    Ok(rows)
}
