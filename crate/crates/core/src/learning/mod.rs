//! Residual models `â`, `b̂` of the Lyapunov derivative, their training data and
//! empirical risk minimization.

mod dataset;
mod erm;
mod estimator;
mod mlp;
mod serialize;

pub use dataset::{make_dataset, Dataset, Sample};
pub use erm::{empirical_risk, fit_erm, fit_rows, prepare_rows, ErmRow, TrainingConfig, TrainingReport};
pub use estimator::{features, LearnedDerivative, ResidualEstimator, Standardizer};
pub use mlp::{Mlp, MlpCache};
pub use serialize::{read_estimator, write_estimator};
