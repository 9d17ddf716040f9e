//! Directed polymers in random environments at desk scale.
//!
//! The crate is organised around a log-space transfer-matrix engine
//! ([`polymer`]) that computes partition functions of nearest-neighbour
//! directed paths in a seeded i.i.d. disorder field ([`env`]). On top of it
//! sit a numerical certifier for nearly-gamma disorder laws
//! ([`nearly_gamma`]), Monte Carlo experiment drivers ([`estimators`]),
//! the block/skeleton coarse-graining vocabulary ([`skeletons`]) and the
//! configuration and emission layer behind the `polymerlab` binary ([`cli`]).

pub mod cli;
pub mod env;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod nearly_gamma;
pub mod polymer;
pub mod skeletons;
pub mod special;
pub mod stats;

pub use env::{DisorderModel, Environment, Point, Site};
pub use error::{Error, Result};
pub use polymer::{Dim, LogZField, PolymerParams, Skeleton};
