//! Random two-layer ReLU networks, analytic adversarial programs for Bernoulli
//! hypercube tasks, Euler simulation of gradient flow on orthogonally separable
//! data, and Monte-Carlo suites checking the accompanying bounds.

pub mod cli;
pub mod data;
pub mod error;
pub mod flow;
pub mod maxmargin;
pub mod network;
pub mod numerics;
pub mod reprogram;
pub mod verify;

pub use error::{Error, Result};
