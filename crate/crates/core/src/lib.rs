pub mod alignment;
pub mod data;
pub mod dissimilarity;
pub mod embedding;
pub mod error;
pub mod independence;
pub mod modelbench;
pub mod rng;
pub mod simcompare;
pub mod simplicial;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
