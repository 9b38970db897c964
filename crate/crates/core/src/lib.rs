//! Blind deconvolution of graph signals.
//!
//! Given observations `Y = H X` of sparse sources `X` diffused by an unknown
//! polynomial graph filter `H`, recover both the sources and the filter's
//! inverse frequency response. Two routes are provided: an ADMM solver for
//! the convex l1-synthesis relaxation ([`admm`]) and a trainable unrolled
//! network whose layers mirror the ADMM updates ([`slog`]).

pub mod admm;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod rng;
pub mod slog;
pub mod spectral;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use graph::Graph;
pub use spectral::{build_shift, FilterSpec, SpectralGraph};
