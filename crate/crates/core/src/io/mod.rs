//! File formats: sectioned key=value configs, CSV tables, and binary checkpoints.

pub mod checkpoint;
pub mod config;
pub mod csv;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::ConfigFile;
pub use csv::CsvTable;
