//! Network embedding via deep sequence prediction.
//!
//! The pipeline samples a corpus of random walks from a weighted graph
//! (uniform, search-biased, or degree-weight biased transitions), trains a
//! recurrent next-node prediction model (RNN or LSTM) whose embedding layer
//! holds the node representations, and interleaves Laplacian embedding-space
//! optimization so connected nodes stay close. Downstream evaluation covers
//! clustering, classification, network reconstruction, and link prediction.
//!
//! With the default `parallel` feature the data-parallel inner loops (walk
//! generation, per-walk gradients, evaluation sweeps) run on rayon; disabling
//! the feature falls back to sequential execution with bit-identical results.

pub mod edge_features;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lapeo;
pub mod model;
pub(crate) mod par;
pub mod synth;
pub(crate) mod util;
pub mod walk;

pub use edge_features::EdgeOperator;
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use graph::{EdgeSplit, Graph, LabelSet};
pub use lapeo::{alternating_train, LapConfig, LapSchedule, TrainOutcome};
pub use model::{CellKind, EmbeddingMatrix, Model, TrainConfig};
pub use walk::{WalkConfig, WalkCorpus, WalkStrategy};
