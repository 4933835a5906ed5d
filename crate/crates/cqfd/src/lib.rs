//! File formats, seeded corpora, timing harness and the `cqfd` command
//! line on top of `cqfd-core`.

#![forbid(unsafe_code)]

pub mod cli;
pub mod corpus;
pub mod io;
pub mod profile;

pub use io::IoError;
