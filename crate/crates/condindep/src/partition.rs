//! Strip partition of the covariate space along an index direction.
//!
//! Observations are projected onto x'beta and split into m cells
//! A_k = { a_{k-1} < x'beta <= a_k } of approximately equal empirical mass.
//! Boundaries sit on order statistics, so cell sizes are integers and the
//! half-open/closed convention is exact.

use serde::Serialize;

use crate::data::{Dataset, Direction};
use crate::error::{Error, Result};

/// Cell boundaries a_0 < a_1 < ... < a_m on the index line.
///
/// Every projected sample point v used to build the partition satisfies
/// a_0 < v <= a_m: a_0 sits strictly below the sample minimum and a_m is
/// the sample maximum.
#[derive(Clone, Debug)]
pub struct Partition {
    boundaries: Vec<f64>,
}

impl Partition {
    pub fn m(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn lo(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn hi(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }
}

/// Per-cell, per-class observation counts n_{j,k} with row sums n_0, n_1.
#[derive(Clone, Debug, Serialize)]
pub struct CellCounts {
    counts: [Vec<usize>; 2],
    totals: [usize; 2],
}

impl CellCounts {
    pub fn m(&self) -> usize {
        self.counts[0].len()
    }

    /// n_{j,k}; `cell` is 1-based as in the partition definition.
    pub fn count(&self, class: u8, cell: usize) -> usize {
        self.counts[class as usize][cell - 1]
    }

    pub fn row(&self, class: u8) -> &[usize] {
        &self.counts[class as usize]
    }

    pub fn n0(&self) -> usize {
        self.totals[0]
    }

    pub fn n1(&self) -> usize {
        self.totals[1]
    }

    pub fn n(&self) -> usize {
        self.totals[0] + self.totals[1]
    }

    /// Pooled size of one cell, n_{0,k} + n_{1,k}.
    pub fn pooled(&self, cell: usize) -> usize {
        self.counts[0][cell - 1] + self.counts[1][cell - 1]
    }
}

/// Project every covariate row onto the direction: v_i = X_i' beta.
///
/// Plain left-to-right accumulation, so the result is reproducible across
/// platforms and runs.
pub fn project_index(ds: &Dataset, dir: &Direction) -> Result<Vec<f64>> {
    if dir.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            found: dir.len(),
            expected: ds.d(),
        });
    }
    let beta = dir.as_slice();
    Ok((0..ds.n())
        .map(|i| {
            let row = ds.row(i);
            let mut acc = 0.0;
            for j in 0..beta.len() {
                acc += row[j] * beta[j];
            }
            acc
        })
        .collect())
}

/// Equal-mass cell boundaries from order statistics.
///
/// Interior boundary a_k is the ceil(k*n/m)-th order statistic of the index
/// values; a_0 = min - 1 and a_m = max, so all points lie in (a_0, a_m].
/// With distinct index values the cell sizes differ by at most one.
pub fn build_equal_mass_cells(index_values: &[f64], m: usize) -> Result<Partition> {
    let n = index_values.len();
    if m == 0 {
        return Err(Error::ZeroCells);
    }
    if m > n {
        return Err(Error::TooManyCells { m, n });
    }
    let mut sorted = index_values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let mut boundaries = Vec::with_capacity(m + 1);
    boundaries.push(sorted[0] - 1.0);
    for k in 1..=m {
        // ceil(k*n/m) as integer arithmetic; 1-based order statistic
        let rank = (k * n).div_ceil(m);
        boundaries.push(sorted[rank - 1]);
    }
    for k in 1..=m {
        if boundaries[k] <= boundaries[k - 1] {
            return Err(Error::DistinctValueDeficiency { m, k });
        }
    }
    Ok(Partition { boundaries })
}

/// Map each index value to its cell id in 1..=m, where value v belongs to
/// cell k iff a_{k-1} < v <= a_k.
pub fn assign_cells(index_values: &[f64], p: &Partition) -> Result<Vec<usize>> {
    let b = &p.boundaries;
    let m = p.m();
    index_values
        .iter()
        .map(|&v| {
            let k = b.partition_point(|&bound| bound < v);
            if k == 0 || k > m {
                Err(Error::ValueOutOfRange {
                    value: v,
                    lo: p.lo(),
                    hi: p.hi(),
                })
            } else {
                Ok(k)
            }
        })
        .collect()
}

/// Tally n_{j,k}. Individual class/cell pairs may be empty; every cell is
/// pooled-nonempty by construction of the equal-mass boundaries, and the
/// statistic is well-defined regardless (only the variance normalizer can
/// flag a genuinely degenerate partition).
pub fn count_cells(cells: &[usize], ys: &[u8], m: usize) -> CellCounts {
    let mut counts = [vec![0usize; m], vec![0usize; m]];
    for (&k, &y) in cells.iter().zip(ys) {
        counts[y as usize][k - 1] += 1;
    }
    debug_assert!((0..m).all(|k| counts[0][k] + counts[1][k] > 0));
    let totals = [counts[0].iter().sum(), counts[1].iter().sum()];
    CellCounts { counts, totals }
}

/// Strict tally: additionally require every class to appear in every cell.
///
/// With fine partitions on moderate samples a missing class in an extreme
/// cell is routine and harmless, so the main pipeline does not insist on
/// this; the strict check is for interactive use, where an empty class/cell
/// pair usually means m is too large for the data at hand.
pub fn validate_cells(cells: &[usize], ys: &[u8], m: usize) -> Result<CellCounts> {
    let counts = count_cells(cells, ys, m);
    for cell in 1..=m {
        for class in 0..2u8 {
            if counts.count(class, cell) == 0 {
                return Err(Error::EmptyCell { class, cell });
            }
        }
    }
    Ok(counts)
}
