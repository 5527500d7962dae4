//! Ursell coefficients, the two-argument coefficients `kbar`, tree-graph
//! majorants, the convergence certificate and the truncated series built on them.

mod kbar;
mod limit;
mod series;
mod tree;
mod ursell;

pub use kbar::{kbar, kbar_points, kbar_recursive, KBAR_CAP};
pub use limit::{collar, limit_local_density, LocalDensity};
pub use series::{
    absolute_series, convergence_radius, correlation_ratio, correlation_truncated, log_partition_truncated,
    partition_direct_truncated, AbsoluteSeries, ExpansionReport, RadiusCertificate,
};
pub use tree::{
    tree_bound_q, tree_bound_q_multi, tree_bound_q_points, tree_bound_recursive, tree_sum_abs_mayer,
    tree_sum_enumerated, ursell_tree_bound, AnchorPolicy, TREE_BOUND_CAP,
};
pub use ursell::{
    boltzmann_functional, energy_table, ursell_direct, ursell_functional, ursell_table, ursell_table_in, ursell_value,
    UrsellTable, DIRECT_CAP,
};
