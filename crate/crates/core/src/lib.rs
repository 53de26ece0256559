#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convex;
pub mod error;
pub mod flow;
pub mod level_geometry;
pub mod manifold;
pub mod verify;

pub use error::{Error, Result};
