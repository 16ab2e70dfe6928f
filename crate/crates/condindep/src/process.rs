//! Within-cell rank transforms, the two subsample processes, the normalized
//! two-sample process gamma_n, and the test statistics.
//!
//! For observation i in cell k the transform is the pooled within-cell
//! empirical CDF with strict counting,
//!
//!   t_i = #{l in cell k : Z_l < Z_i} / (n_{0,k} + n_{1,k}),
//!
//! an exact rational carried as integer numerator/denominator until the
//! process is assembled. The subsample distributions
//!
//!   Gamma_j(u) = (1/n_j) #{i : Y_i = j, t_i < u}
//!
//! are compared through
//!
//!   gamma_n(u) = sqrt(n0 n1 / n) (Gamma_0(u) - Gamma_1(u)) / c_n,
//!   c_n = sqrt(1 - (n0 n1 / n) sum_k (n_{0,k}/n0 - n_{1,k}/n1)^2 / (n_{0,k}+n_{1,k})),
//!
//! and summarized by T_n = integral of gamma_n^2 over [0,1] (exact piecewise
//! integration) and the Kolmogorov-Smirnov variant sup |gamma_n|.

use serde::Serialize;

use crate::ade::{self, AdeSettings};
use crate::data::{Dataset, Direction};
use crate::error::{Error, Result};
use crate::limit;
use crate::partition::{self, CellCounts};

/// Threshold below which the expression under the normalizer root counts
/// as degenerate rather than floating-point noise.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

/// Per-observation cell id, class, and exact rational transform.
#[derive(Clone, Debug)]
pub struct TransformedSample {
    cell: Vec<usize>,
    y: Vec<u8>,
    num: Vec<u64>,
    den: Vec<u64>,
}

impl TransformedSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn cell(&self, i: usize) -> usize {
        self.cell[i]
    }

    pub fn y(&self, i: usize) -> u8 {
        self.y[i]
    }

    /// Exact rational transform (numerator, denominator).
    pub fn rational(&self, i: usize) -> (u64, u64) {
        (self.num[i], self.den[i])
    }

    /// The transform as a float in [0, 1).
    pub fn t(&self, i: usize) -> f64 {
        self.num[i] as f64 / self.den[i] as f64
    }
}

/// Within-cell pooled strict ranks for every observation.
///
/// Ties receive the same transform (the count of strictly smaller values);
/// no randomized tie-breaking.
pub fn transform_sample(ds: &Dataset, cells: &[usize], counts: &CellCounts) -> TransformedSample {
    let n = ds.n();
    let m = counts.m();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..n {
        members[cells[i] - 1].push(i);
    }

    let mut num = vec![0u64; n];
    let mut den = vec![0u64; n];
    for k in 1..=m {
        let idx = &mut members[k - 1];
        idx.sort_by(|&a, &b| ds.z(a).partial_cmp(&ds.z(b)).unwrap());
        let size = idx.len() as u64;
        debug_assert_eq!(size as usize, counts.pooled(k));
        let mut pos = 0;
        while pos < idx.len() {
            let mut end = pos + 1;
            while end < idx.len() && ds.z(idx[end]) == ds.z(idx[pos]) {
                end += 1;
            }
            // strict rank of the whole tied run = number of smaller values
            for &i in &idx[pos..end] {
                num[i] = pos as u64;
                den[i] = size;
            }
            pos = end;
        }
    }

    TransformedSample {
        cell: cells.to_vec(),
        y: ds.ys().to_vec(),
        num,
        den,
    }
}

/// Subsample empirical distribution Gamma_j of the transformed values,
/// evaluated with the strict convention Gamma_j(u) = #{t < u} / n_j.
#[derive(Clone, Debug)]
pub struct SubsampleEcdf {
    jumps: Vec<f64>,
    cum: Vec<usize>,
    total: usize,
}

impl SubsampleEcdf {
    pub fn eval(&self, u: f64) -> f64 {
        let idx = self.jumps.partition_point(|&t| t < u);
        let count = if idx == 0 { 0 } else { self.cum[idx - 1] };
        count as f64 / self.total as f64
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Build Gamma_j for one class.
pub fn gamma_hat(ts: &TransformedSample, class: u8) -> SubsampleEcdf {
    let mut vals: Vec<(u64, u64)> = (0..ts.len())
        .filter(|&i| ts.y(i) == class)
        .map(|i| ts.rational(i))
        .collect();
    vals.sort_unstable_by(|a, b| rational_cmp(*a, *b));
    let total = vals.len();

    let mut jumps = Vec::new();
    let mut cum = Vec::new();
    let mut seen = 0usize;
    let mut pos = 0usize;
    while pos < vals.len() {
        let mut end = pos + 1;
        while end < vals.len() && rational_eq(vals[end], vals[pos]) {
            end += 1;
        }
        seen += end - pos;
        jumps.push(vals[pos].0 as f64 / vals[pos].1 as f64);
        cum.push(seen);
        pos = end;
    }
    SubsampleEcdf { jumps, cum, total }
}

fn rational_cmp(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

fn rational_eq(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 as u128 * b.1 as u128 == b.0 as u128 * a.1 as u128
}

/// The variance normalizer c_n, in (0, 1].
///
/// The per-cell terms are summed in sorted order so the value does not
/// depend on how cells are labeled.
pub fn normalizer(counts: &CellCounts) -> Result<f64> {
    let n0 = counts.n0() as f64;
    let n1 = counts.n1() as f64;
    let n = n0 + n1;
    let mut terms: Vec<f64> = (1..=counts.m())
        .map(|k| {
            let a = counts.count(0, k) as f64 / n0;
            let b = counts.count(1, k) as f64 / n1;
            (a - b) * (a - b) / counts.pooled(k) as f64
        })
        .collect();
    terms.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let sum: f64 = terms.iter().sum();
    let under_root = 1.0 - (n0 * n1 / n) * sum;
    if under_root <= NORMALIZER_FLOOR {
        return Err(Error::NonPositiveNormalizer(under_root));
    }
    Ok(under_root.sqrt())
}

/// gamma_n as a step function on [0, 1].
///
/// `values[s]` is the constant value on the interval
/// (jumps[s], jumps[s+1]], with an implicit terminal breakpoint at 1.
/// gamma_n vanishes on [0, jumps[0]] and on the final interval, where both
/// subsample distributions have reached 1.
#[derive(Clone, Debug)]
pub struct GammaProcess {
    jumps: Vec<f64>,
    values: Vec<f64>,
    normalizer: f64,
}

impl GammaProcess {
    /// Assemble a step function directly; intended for tests and synthetic
    /// processes. `jumps` must be strictly increasing within [0, 1).
    pub fn from_pieces(jumps: Vec<f64>, values: Vec<f64>, normalizer: f64) -> Self {
        assert_eq!(jumps.len(), values.len());
        assert!(jumps.windows(2).all(|w| w[0] < w[1]));
        assert!(jumps.iter().all(|&u| (0.0..1.0).contains(&u)));
        GammaProcess {
            jumps,
            values,
            normalizer,
        }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Point evaluation honoring the strict-< convention.
    pub fn eval(&self, u: f64) -> f64 {
        let idx = self.jumps.partition_point(|&j| j < u);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Constant pieces as (lo, hi, value) with hi of the last piece = 1.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |s| {
            let hi = if s + 1 < self.jumps.len() {
                self.jumps[s + 1]
            } else {
                1.0
            };
            (self.jumps[s], hi, self.values[s])
        })
    }
}

/// Assemble gamma_n over the merged jump set of the two subsample
/// distributions. Jump ordering compares the exact rationals, so equal
/// transforms from different cells merge reliably.
pub fn gamma_process(ts: &TransformedSample, counts: &CellCounts) -> Result<GammaProcess> {
    let c_n = normalizer(counts)?;
    let n0 = counts.n0() as f64;
    let n1 = counts.n1() as f64;
    let n = n0 + n1;
    let scale = (n0 * n1 / n).sqrt();

    let mut obs: Vec<(u64, u64, u8)> = (0..ts.len())
        .map(|i| {
            let (p, q) = ts.rational(i);
            (p, q, ts.y(i))
        })
        .collect();
    obs.sort_unstable_by(|a, b| rational_cmp((a.0, a.1), (b.0, b.1)));

    let mut jumps = Vec::new();
    let mut values = Vec::new();
    let (mut cum0, mut cum1) = (0u64, 0u64);
    let mut pos = 0usize;
    while pos < obs.len() {
        let mut end = pos + 1;
        while end < obs.len() && rational_eq((obs[end].0, obs[end].1), (obs[pos].0, obs[pos].1)) {
            end += 1;
        }
        for o in &obs[pos..end] {
            match o.2 {
                0 => cum0 += 1,
                _ => cum1 += 1,
            }
        }
        jumps.push(obs[pos].0 as f64 / obs[pos].1 as f64);
        values.push(scale * (cum0 as f64 / n0 - cum1 as f64 / n1) / c_n);
        pos = end;
    }

    Ok(GammaProcess {
        jumps,
        values,
        normalizer: c_n,
    })
}

/// T_n: exact integral of the squared step function, no quadrature grid.
pub fn cvm_statistic(g: &GammaProcess) -> f64 {
    let mut acc = 0.0;
    for (lo, hi, v) in g.pieces() {
        acc += v * v * (hi - lo);
    }
    acc
}

/// sup |gamma_n|, attained on a piece.
pub fn ks_statistic(g: &GammaProcess) -> f64 {
    g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// How the index direction entering the partition was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeTag {
    Oracle,
    Estimate,
}

impl std::fmt::Display for ModeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeTag::Oracle => write!(f, "oracle"),
            ModeTag::Estimate => write!(f, "estimate"),
        }
    }
}

impl std::str::FromStr for ModeTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ModeTag::Oracle),
            "estimate" => Ok(ModeTag::Estimate),
            other => Err(format!("unknown mode `{other}` (use oracle|estimate)")),
        }
    }
}

/// Direction source for one test run: a known direction, or the
/// average-derivative estimator with the given settings.
#[derive(Clone, Debug)]
pub enum TestMode {
    Oracle(Direction),
    Estimate(AdeSettings),
}

impl TestMode {
    pub fn tag(&self) -> ModeTag {
        match self {
            TestMode::Oracle(_) => ModeTag::Oracle,
            TestMode::Estimate(_) => ModeTag::Estimate,
        }
    }
}

/// Everything a test run reports.
#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub t_n: f64,
    pub ks_n: f64,
    pub p_value_cvm: f64,
    pub m: usize,
    pub cell_counts: CellCounts,
    pub normalizer: f64,
    pub direction: Vec<f64>,
    pub mode: ModeTag,
}

/// Full pipeline: project, partition, transform, assemble gamma_n, compute
/// the statistics and the asymptotic p-value of T_n.
///
/// A class missing from some cell is tolerated: every defining formula
/// stays well-posed (per-class cell ECDFs are never evaluated on their own)
/// and fine partitions routinely leave an extreme cell without the rarer
/// class. Degenerate configurations surface through the normalizer check.
pub fn run_test(ds: &Dataset, m: usize, mode: &TestMode) -> Result<TestResult> {
    run_test_inner(ds, m, mode, false)
}

/// Like [`run_test`], but rejects partitions where any class is missing
/// from any cell. Interactive use: on real data that usually means m is
/// too large for the sample.
pub fn run_test_strict(ds: &Dataset, m: usize, mode: &TestMode) -> Result<TestResult> {
    run_test_inner(ds, m, mode, true)
}

fn run_test_inner(ds: &Dataset, m: usize, mode: &TestMode, strict: bool) -> Result<TestResult> {
    let (n0, n1) = ds.class_counts();
    if n0 == 0 {
        return Err(Error::MissingClass(0));
    }
    if n1 == 0 {
        return Err(Error::MissingClass(1));
    }

    let direction = match mode {
        TestMode::Oracle(dir) => {
            if dir.len() != ds.d() {
                return Err(Error::DimensionMismatch {
                    found: dir.len(),
                    expected: ds.d(),
                });
            }
            dir.clone()
        }
        TestMode::Estimate(settings) => {
            let cfg = ade::AdeConfig::from_dataset(ds, settings)?;
            ade::estimate_direction(ds, &cfg)?
        }
    };

    let index = partition::project_index(ds, &direction)?;
    let cells_def = partition::build_equal_mass_cells(&index, m)?;
    let cells = partition::assign_cells(&index, &cells_def)?;
    let counts = if strict {
        partition::validate_cells(&cells, ds.ys(), m)?
    } else {
        partition::count_cells(&cells, ds.ys(), m)
    };
    let ts = transform_sample(ds, &cells, &counts);
    let g = gamma_process(&ts, &counts)?;
    let t_n = cvm_statistic(&g);
    let ks_n = ks_statistic(&g);
    let p_value_cvm = limit::p_value(t_n)?;

    Ok(TestResult {
        t_n,
        ks_n,
        p_value_cvm,
        m,
        cell_counts: counts,
        normalizer: g.normalizer(),
        direction: direction.as_slice().to_vec(),
        mode: mode.tag(),
    })
}
