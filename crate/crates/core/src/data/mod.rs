//! Dataset ingestion, synthetic DNA generation, scaling and client partitioning.

mod csv_source;
mod dataset;
pub mod dna;
mod prep;

pub use csv_source::{breast_cancer, iris, load_csv, parse_csv, CsvSchema, IngestionReport};
pub use dataset::Dataset;
pub use dna::{generate_dna, CompositionWindow, DnaGenerator, DnaSamples};
pub use prep::{select_and_scale, split_and_partition, DatasetSplit, FeatureScaler};
