//! Retrieval-augmented zero-shot text classification over precomputed
//! sentence embeddings.
//!
//! An input is scored against each candidate label by the cosine similarity
//! between its embedding and the label's prompt embedding, plus the mean
//! similarity to corpus sentences retrieved for that prompt. The label with
//! the highest total wins.
//!
//! * [`store`] reads and writes the `.remb` embedding format.
//! * [`index`] answers exact and partitioned top-k cosine queries.
//! * [`scoring`] renders verbalizers, builds label anchors and classifies.
//! * [`eval`] runs accuracy, ablation, sensitivity and few-shot protocols.
//! * [`synthetic`] generates seeded fixtures with known answers.

pub mod error;
pub mod eval;
pub mod index;
pub mod scoring;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use index::{CorpusIndex, FlatIndex, PartitionedIndex, RetrievalResult, TopK};
pub use scoring::{classify, LabelAnchorSet, RetrievalConfig, RetrievalMode, ScoredPrediction, VerbalizerSpec};
pub use store::{EmbeddingRecord, EmbeddingStore};
