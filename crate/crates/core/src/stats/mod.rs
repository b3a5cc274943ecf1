//! Model comparison over benchmark score tables: per-benchmark z-scores,
//! per-model aggregates and a one-sided significance test on pairwise
//! aggregate differences.

mod compare;
mod table;
mod zscore;

pub use compare::{
    compare, one_sided_t_test, regularized_incomplete_beta, student_t_cdf, SignificanceResult, TTest, Verdict, ALPHA,
};
pub use table::{ModelKey, ScoreTable};
pub use zscore::{aggregate, zscores, zscores_pooled, Aggregate, Pool};
