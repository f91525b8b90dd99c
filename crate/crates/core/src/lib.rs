//! Multi-attribute stochastic choice model `P = WQ` over the attribute
//! power-set lattice, with a sequential stage-by-stage estimator of the
//! stochastic factors from binned choice frequencies.
//!
//! ```
//! use seqsmf::{estimate, sample_dataset, sample_ground_truth};
//!
//! let truth = sample_ground_truth(5, 2, 7).unwrap();
//! let data = sample_dataset(&truth, 500, 5, 7).unwrap();
//! let fit = estimate(&data, truth.lattice()).unwrap();
//! assert_eq!(fit.q_hat.shape(), (4, 5));
//! ```

pub mod bench;
pub mod error;
pub mod exec;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod stage;

pub use bench::{run_benchmark, run_benchmark_with, write_records, BenchConfig, BenchRecord};
pub use error::{Error, Result};
pub use exec::Execution;
pub use lattice::{enumerate_subsets, is_subset, AttributeLattice, AttributeSubset};
pub use linalg::{average_deviation, frobenius_distance, project_to_simplex, Matrix, SimplexVector, StochasticMatrix};
pub use model::{
    forward, sample_dataset, sample_dataset_with, sample_ground_truth, ChoiceDataset, GroundTruth,
    StructuredWeightMatrix,
};
pub use pipeline::{compute_metrics, estimate, estimate_in_order, estimate_with, EstimationResult, MetricRecord};
pub use stage::{
    build_stage_problem, extract_estimates, solve_simplex_ls, solve_stage, solve_stage1, StageProblem, StageSolution,
};
