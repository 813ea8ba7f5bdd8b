//! Augmented conformal formulation of quadratic f(R) gravity coupled to a
//! massless scalar field, evolved as a quasilinear wave–Klein-Gordon system in
//! wave coordinates on periodic grids.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod frmodel;
pub mod identities;
pub mod initialdata;
pub mod norms;
pub mod solver;
pub mod taylor;
pub mod tensor;

pub use error::{Error, Result};
pub use frmodel::FRModel;
