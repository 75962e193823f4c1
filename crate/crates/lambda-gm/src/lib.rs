//! Conditional independence and graphical models for measures that explode
//! at the origin.
//!
//! Exact CI oracles for atomic and homogeneous ray measures, factorization
//! checks on product grids, max-linear and Hüsler–Reiss models, Gaussian
//! asymptotic-independence constructions, and Monte Carlo validation.

pub mod asymp;
pub mod atomic;
pub mod error;
pub mod graph;
pub mod grid;
pub mod hr;
pub mod io;
pub mod par;
pub mod quad;
pub mod rays;
pub mod report;
pub mod sampling;
mod set;
pub mod special;

pub use error::{Error, Result};
pub use graph::{CliqueOrdering, Dag, UndirectedGraph};
pub use set::{VertexSet, MAX_VERTICES};
