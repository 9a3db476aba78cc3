//! Location embeddings trained on the joint tags / numerical features /
//! categories objective with Adagrad, and the GloVe baseline objective.

mod io;
mod model;
mod objective;
mod plan;
mod train;

pub use io::{export_vectors, load_vectors, save_vectors, VectorFormat, Vectors};
pub use model::{EmbeddingModel, Params, Shape, Table};
pub use objective::{evaluate, gradient_of, gradients, objective, ObjectiveValue};
pub use plan::{
    build_training_plan, negative_count, CategoryTerm, FeatureTerm, GloveWeighting, PlanConfig, TagTerm,
    TrainingPlan, NEGATIVE_CAP, NEGATIVE_RATIO,
};
pub use train::{init_model, run_epochs, train, write_objective_csv, TrainConfig, TrainOutcome, ADAGRAD_EPSILON};

/// Embedding sizes searched during tuning.
pub const DIM_GRID: [usize; 3] = [10, 50, 300];
/// Weights of the tag component searched during tuning.
pub const ALPHA_GRID: [f64; 4] = [0.1, 0.01, 0.001, 0.0001];
/// Weights of the category component searched during tuning.
pub const BETA_GRID: [f64; 6] = [1.0, 10.0, 100.0, 1000.0, 10_000.0, 100_000.0];
/// Adagrad passes over the data.
pub const DEFAULT_ITERATIONS: usize = 30;
