//! File formats and command-line interface for Tree Pólya Splitting models.
//!
//! The distribution, fitting and search live in [`treepolya_core`]; this crate
//! adds CSV count matrices, JSON model documents, report tables and the
//! `treepolya` binary.

pub mod cli;
pub mod csv_io;
pub mod error;
pub mod model_doc;
pub mod report;

pub use csv_io::{load_counts_csv, read_counts};
pub use error::{CliError, Result};
pub use model_doc::{parse_model, parse_tree, serialize_model, serialize_tree, ModelDocument, NamedModel, NamedTree};
