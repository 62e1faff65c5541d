//! Stratified repeated partitioning, lasso regularisation paths and
//! consensus feature selection across partitions.

mod consensus;
mod lasso;
mod partitions;

pub use consensus::{consensus_select, SelectionReport, DEFAULT_CUTOFF, FORCED_IN};
pub use lasso::{
    alpha_max, kkt_residual, lasso_fit, lasso_objective, lasso_path, lasso_path_with,
    lasso_select, LassoFit, LassoOptions, LassoPath, NONZERO_TOL,
};
pub use partitions::{
    stratified_holdout, stratified_partitions, stratified_partitions_with, PartitionScheme,
    Split,
};
