//! Decide whether a finite set of unitary black boxes admits a q-query,
//! ε-error quantum algorithm computing a property g, bound the answer from
//! below with a spectral adversary, and turn feasible solutions into
//! explicit algorithms that can be simulated.

pub mod error;
pub mod matlin;
pub mod problem;
pub mod sdp;
pub mod solver;
pub mod adversary;
pub mod reconstruct;
pub mod simulate;

pub use error::{QqcError, Result};
