//! The ℓ_g distance between conditional distributions, greedy covers, and
//! the two ε-value partition constructions.

mod metric;
mod partition;

pub use metric::{greedy_cover, lg_distance, lg_distance_vec, CondDistFamily, Cover, ExtendedReal};
pub use partition::{
    build_partition, build_value_partition, layer_distances, max_same_cell_gap, tabular_bin_counts,
    tabular_bin_partition, PartitionBuilder, ValuePartition,
};
