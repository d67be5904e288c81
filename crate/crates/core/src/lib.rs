//! Cardinality-constrained binary quadratic optimization toolkit for
//! clone-structured quadratic assignment problems.
//!
//! The pipeline, end to end:
//!
//! 1. [`instance`] loads QAPLIB-format instances and evaluates objectives.
//! 2. [`reduction`] detects clone facilities in the flow matrix and, when the
//!    reduced flow matrix has selector structure, rewrites the QAP as a binary
//!    quadratic problem `min x^T B x` with a single cardinality constraint.
//! 3. [`symmetry`] discovers the automorphism group of the cost matrix by
//!    implicit enumeration and computes stabilizers and orbits.
//! 4. [`subproblem`] builds the reduced matrix and penalty QUBO for any
//!    node `(I0, I1)` of the search tree.
//! 5. [`bounding`] defines the interval-bracketing bounder contract and ships
//!    a projected spectral bound plus an exact enumeration oracle.
//! 6. [`bb`] runs the breadth-first, target-lower-bound branch and bound with
//!    orbit branching.
//! 7. [`estimator`] estimates the full enumeration-tree size by per-depth
//!    random sampling.
//!
//! [`synth`] provides deterministic instance generators used by tests,
//! benchmarks, and examples.

pub mod bb;
pub mod bounding;
pub mod error;
pub mod estimator;
pub mod index_set;
pub mod instance;
pub mod matrix;
pub mod reduction;
pub mod subproblem;
pub mod symmetry;
pub mod synth;

pub use bb::{certify, BbConfig, BbOutcome, BbReport, ScoreRule};
pub use bounding::{bound_node, Bounder, BounderSpec, BracketStep, Verdict, VerdictKind};
pub use error::Error;
pub use estimator::{estimate, EstimatorConfig, EstimatorReport};
pub use index_set::IndexSet;
pub use instance::{BinaryVector, CardBqop, Permutation, QapInstance};
pub use matrix::SymMatrix;
pub use reduction::{CloneClasses, GeneralReducedModel};
pub use subproblem::{NodeKey, QuboInstance, ReducedBqop};
pub use symmetry::{OrbitSet, PermutationGroup};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
