//! Multicolor leaky sandpile simulation and its predicted limit shapes.
//!
//! A leaky sandpile on `Z^d x {1..p}` topples by color-dependent rules and
//! loses a fixed fraction of its sand each time. Started from `N` grains at
//! the origin, the visited region grows only logarithmically in `N`, and its
//! shape is governed by a killed random walk: the region is sandwiched
//! between two level sets of the walk's Green function, and after rescaling
//! by `log N` it converges to the polar dual of the level set `{rho = 1}`
//! of the walk's Laplace-transform spectral radius.
//!
//! The crate simulates the sandpile exactly, computes the Green function and
//! the spectral curve independently, and measures how well the two sides
//! agree. The narrative guide lives in `book/`; its code snippets are
//! compiled and run as doc-tests through the [`guide`] module.

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod green;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod sandpile;
pub mod spectral;

pub mod cli;
pub mod io;

pub use error::{Error, Result};
pub use model::{
    krw_measure, load_model_spec, non_killed_kernel, validate_assumptions, JumpKernel, ModelSpec,
};
pub use sandpile::{apply_t, shape, stabilize, topple_count, Odometer, SandpileState};

/// The book chapters, included so `cargo test --doc` keeps the guide's
/// examples compiling and passing.
pub mod guide {
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}

    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}

    #[doc = include_str!("../../../book/src/spectral-curve.md")]
    pub mod spectral_curve {}

    #[doc = include_str!("../../../book/src/green-thresholds.md")]
    pub mod green_thresholds {}

    #[doc = include_str!("../../../book/src/regimes.md")]
    pub mod regimes {}

    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
