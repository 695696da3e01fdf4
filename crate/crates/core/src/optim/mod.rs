//! Optimisation and the training loop.

mod adabelief;
mod metrics;
mod train;

pub use adabelief::{AdaBeliefConfig, AdaBeliefState};
pub use metrics::{accuracy, macro_f1, micro_f1, Metrics};
pub use train::{
    evaluate_graphs, evaluate_nodes, train, EpochRecord, TrainConfig, TrainData, TrainOutcome,
};
