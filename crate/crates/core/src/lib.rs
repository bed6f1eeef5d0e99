//! Determinant line bundles over index-zero Fredholm operators, realised on
//! finite-block operators `M ⊕ Id`.
//!
//! * [`operator`]: block operators, Fredholm determinants, kernel and cokernel.
//! * [`detline`]: transition functions, sections and the kernel/cokernel fiber map.
//! * [`symplectic`]: Lagrangian frames, the Souriau map and chart transitions.
//! * [`topology`]: operator families, spectral flow, holonomy and Chern numbers.
//! * [`io`]: the JSON file formats.

pub mod detline;
pub mod error;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod symplectic;
pub mod topology;

pub use error::{Error, Result};
pub use operator::{BlockOperator, KernelCokernelData, TraceClassPerturbation};

#[cfg(test)]
mod testutil;
