//! 2D mechanics for the assembly design study: periodic homogenization,
//! interface connectivity, synthetic datasets, FE assembly solves and a GA.

mod banded;
pub mod assembly;
pub mod connectivity;
pub mod dataset;
pub mod experiment;
pub mod fe;
pub mod ga;
pub mod homogenize;

use thiserror::Error;

pub use assembly::{assemble_and_solve, mse, AssemblyProblem, AssemblySolver, Load, Support};
pub use connectivity::{n_disconnected, r_disconnected, InterfaceTable};
pub use dataset::{fill_properties, gen2d_dataset, Gen2dConfig};
pub use experiment::{experiment_mbb, ExperimentReport, NamedSubset, RunRecord, SubsetSummary};
pub use ga::{ga_design, Chromosome, DesignContext, Evaluation, GaConfig, GaOutcome};
pub use homogenize::{homogenize2d, homogenize2d_with, ElasticTensor2D, BASE_E, BASE_NU, E_MIN};

#[derive(Debug, Error)]
pub enum MechError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("no assembly without disconnected cells was found (best penalized fitness {})", .0.eval.fitness)]
    NoFeasible(Box<Chromosome>),
}
