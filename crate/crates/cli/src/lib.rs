//! Command-line front end: configuration, CSV formats and the `fit`,
//! `predict`, `summarize`, `simulate` and `bench` commands.

pub mod config;
pub mod fit;
pub mod io;
pub mod predict;
pub mod sim;

use qlbart::Error;

/// Worker-thread count for chain and replication parallelism.
pub const THREADS_ENV: &str = "QLBART_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_DATA: i32 = 5;
pub const EXIT_CONFIG: i32 = 6;
pub const EXIT_NUMERICAL: i32 = 7;
pub const EXIT_IO: i32 = 8;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        Error::Schema(_) => EXIT_SCHEMA,
        Error::Data { .. } | Error::Domain { .. } => EXIT_DATA,
        Error::Config(_) => EXIT_CONFIG,
        Error::Scenario { .. } => EXIT_USAGE,
        Error::Numerical(_) | Error::Optimization { .. } | Error::DegreesOfFreedom { .. } | Error::Design(_) => {
            EXIT_NUMERICAL
        }
        Error::Io(_) => EXIT_IO,
    }
}
