//! File formats and error plumbing behind the `sqlift` binary.

pub mod csv_out;
pub mod error;
pub mod problem_file;

pub use error::CliError;
pub use problem_file::{parse_problem_file, parse_problem_str, Meta, ProblemFile};
