//! Learned components: the GNN initialiser, trainable parameters and the
//! SPSA/Adam trainer.

pub mod gnn;
pub mod params;
pub mod spsa;
pub mod train;

pub use gnn::{gnn_features, gnn_forward, GnnParams};
pub use params::{Checkpoint, TrainableParams, Variant};
pub use spsa::{spsa_gradient, Adam};
pub use train::{train, unrolled_loss, BatchItem, Hyper, StepRecord, TrainOutcome};
