//! Distribution-free conditional independence testing in binary
//! single-index models.
//!
//! Given observations (X, Y, Z) with binary Y, the crate tests whether Z
//! carries explanatory power for Y beyond a single linear index X'beta:
//! the covariate space is split into equal-mass strips along the index,
//! Z is reduced to within-strip pooled ranks, and the two classes' rank
//! distributions are compared through a normalized two-sample process
//! whose null limit is a standard Brownian bridge. The Cramer-von Mises
//! functional of that process is the test statistic; p-values come from
//! the law of the integrated squared bridge.
//!
//! The index direction can be supplied (oracle) or estimated from the data
//! by a density-weighted average derivative. A simulation module and a
//! Monte Carlo harness reproduce size/power tables and PP plots for the
//! accompanying data-generating process, with bit-reproducible parallel
//! execution.

pub mod ade;
pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod limit;
pub mod partition;
pub mod process;
pub mod rng;
pub mod sim;

pub use ade::{
    ade_estimate, default_bandwidths, estimate_direction, round_to_grid, AdeConfig, AdeSettings,
};
pub use data::{CsvSchema, Dataset, Direction};
pub use error::{Error, Result};
pub use harness::{
    emit_pivot_csv, emit_table_csv, pp_plot_data, run_grid, run_grid_checkpointed, ExperimentGrid,
    RejectionRow, RejectionTable,
};
pub use limit::{cvm_limit_cdf, cvm_limit_quantile, p_value, CvmLimit};
pub use partition::{
    assign_cells, build_equal_mass_cells, count_cells, project_index, validate_cells, CellCounts,
    Partition,
};
pub use process::{
    cvm_statistic, gamma_hat, gamma_process, ks_statistic, normalizer, run_test, run_test_strict,
    transform_sample, GammaProcess, ModeTag, TestMode, TestResult, TransformedSample,
};
pub use rng::{derive_key, RngStream};
pub use sim::{draw_sample, oracle_direction, replicate, DgpConfig, Replication};
