//! Matching-based algebraic multilevel (AMLI) preconditioning for graph
//! Laplacians.
//!
//! The pipeline is: generate or load a [`graph::Graph`], coarsen it by
//! pairwise [`matching`], stack the levels into a [`hierarchy::Hierarchy`],
//! and wrap that in a [`precond::AmliPreconditioner`] for [`krylov::pcg_solve`].
//! [`stability`] and [`dense`] hold the analysis tools used to check the
//! theory on small instances.

pub mod dense;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod krylov;
pub mod matching;
pub mod mesh;
pub mod precond;
pub mod sparse;
pub mod stability;

pub use error::{Error, Result};
pub use graph::Graph;
