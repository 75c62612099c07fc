//! Cutting-plane solvers for L1, group and Slope regularized linear SVMs.

pub mod data;
pub mod error;
pub mod first_order;
pub mod group;
pub mod heuristics;
pub mod l1;
pub mod lp;
mod master;
pub mod prox;
pub mod slope;

pub use error::{Error, Result};
