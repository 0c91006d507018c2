//! File formats, worker threads and the command line around `radfield-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod simulate;

pub use error::Error;
