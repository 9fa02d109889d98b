//! Approximation schemes for uniform-capacity k-median and k-means.
//!
//! The pipeline builds a randomized hierarchical decomposition, moves badly
//! cut clients onto a reference solution, solves a portal dynamic program
//! over the decomposition and bootstraps the result. A structural harness
//! constructs the flow and matching arguments behind the scheme and checks
//! their bounds on concrete instances.

pub mod assign;
pub mod decomp;
pub mod dp;
pub mod driver;
pub mod flow;
pub mod generate;
pub mod instance;
pub mod scalar;
pub mod structural;
pub mod transform;

pub use scalar::Scalar;

/// Double-precision instance.
pub type Instance = instance::Instance<f64>;
/// Double-precision solution.
pub type Solution = instance::Solution<f64>;
/// Double-precision metric.
pub type Metric = instance::Metric<f64>;
