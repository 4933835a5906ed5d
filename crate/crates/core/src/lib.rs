//! Conjunctive queries under functional and cardinality dependencies.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithm of
//! the toolkit:
//!
//! * [`model`] / [`parse`] — queries, schemas, dependencies and their text
//!   formats;
//! * [`hypergraph`] — join trees, acyclicity, free-connexity, head-paths,
//!   pseudo-minors and `Tetra(k)`;
//! * [`extension`] — the FD-extension `Q⁺` and the tier classifier;
//! * [`instance`] — values, relations, dependency validation;
//! * [`transform`] — the exact reductions between `Q` and `Q⁺`;
//! * [`enumerate`] — the naive oracle and the constant-delay engine;
//! * [`hardness`] — instance generators for the matrix-multiplication and
//!   `Tetra(k)` reductions.
//!
//! File formats, timing, and the command-line front end live in the std
//! companion crate `cqfd`.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

mod bind;
pub mod enumerate;
pub mod error;
pub mod extension;
pub mod hardness;
pub mod hypergraph;
pub mod instance;
pub mod model;
pub mod parse;
pub mod transform;

pub use error::{Error, Result};
pub use model::{Atom, Dependency, Query, Schema, Var};
