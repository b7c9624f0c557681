//! Recovery of time-harmonic acoustic point sources from microphone
//! pressure measurements.
//!
//! The library solves weighted measure-space least-squares problems
//! constrained by a finite-element Helmholtz model on a rectangular room:
//! candidate monopole positions are the mesh nodes of a control region, the
//! forward map is a precomputed mixing matrix of discrete Green's function
//! values, and sparsity across frequencies is promoted by a group norm.
//!
//! ```
//! use helmloc::mesh::build_mesh;
//!
//! let mesh = build_mesh([4.0, 4.0], 3).unwrap();
//! assert_eq!(mesh.num_nodes(), 33 * 33);
//! ```

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod measure;
pub mod mesh;
pub mod obsop;
pub mod scenario;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};

// Compiles and runs the book's code blocks as doc-tests so the guide can
// never drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
