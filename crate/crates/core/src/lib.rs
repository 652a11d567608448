//! Byzantine-robust aggregation for federated learning, with gradient
//! splitting, an omniscient attack suite and a deterministic desk-scale
//! simulator.

pub mod aggregators;
pub mod attacks;
pub mod error;
pub mod fedsim;
pub mod gas;
pub mod partition;
pub mod seed;
pub mod vector;

pub use aggregators::{aggregate, AggregatorSpec};
pub use attacks::{craft, AttackContext, AttackSpec};
pub use error::{Error, Result};
pub use gas::{gas_aggregate, GasConfig, PartitionPolicy, ScoreTable, Selection, SelectionResult};
pub use partition::{make_partition, IndexPartition};
pub use seed::SeedSpec;
pub use vector::{l2_norm, mean, GradientVector};
