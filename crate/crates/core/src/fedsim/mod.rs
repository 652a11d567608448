//! Deterministic desk-scale federated learning simulation.

pub mod data;
pub mod dirichlet;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod synthetic;
pub mod trainer;

pub use data::{generate_synthetic, DatasetParams, SyntheticDataset};
pub use dirichlet::{dirichlet_partition, DirichletPartition};
pub use metrics::{deviation_metric, inclusion_metrics};
pub use model::{Architecture, Model, Network};
pub use sim::{
    run_experiment, run_single, Defense, ExperimentConfig, ExperimentResult, ExperimentSummary, RoundRecord,
    RoundTrace, RunResult, Simulation,
};
pub use synthetic::{SyntheticGradientModel, SyntheticGradientSource};
pub use trainer::{local_train, TrainerConfig};
