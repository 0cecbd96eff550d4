//! Constant-depth KHK time evolution, Hadamard-test correlation functions and
//! hardware-assisted parameterized circuit execution on an emulated control stack.

pub mod cartan;
pub mod circuit;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod pauli;
pub mod report;
pub mod rip;
pub mod transpile;

pub use error::{PceError, Result};
