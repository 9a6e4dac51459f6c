//! Video DNA: fingerprints frame-feature streams into sequences of visual
//! nucleotides, learns a binary metric over them, and aligns, searches and
//! clusters those sequences.

pub mod align;
pub mod benchmark;
mod binio;
pub mod bitcode;
pub mod dna;
pub mod error;
pub mod metric;
pub mod mutate;
pub mod phylo;
pub mod search;
pub mod sequencer;
pub mod synth;
pub mod vocab;

pub use bitcode::Bitcode;
pub use dna::{VideoDna, VisualNucleotide};
pub use error::{Error, Result};
pub use metric::{MetricModel, TrainConfig, TrainingSet};
pub use vocab::{DescriptorKind, IdfWeights, Vocabulary};
