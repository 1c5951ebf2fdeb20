//! Quasi-local diagonalizing circuits for disordered spin chains.
//!
//! The crate is organized bottom-up: a sparse Pauli algebra ([`pauli`],
//! [`operator`]) with a dense oracle ([`dense`]), the disordered chain
//! ([`chain`]), the iterative diagonalizing flow ([`flow`]), a sampler for
//! abstract circuit families ([`family`]), measurements ([`observables`]),
//! Trotterized circuits ([`trotter`]), exact combinatorial checks
//! ([`bounds`]) and the experiment runner ([`experiment`]).

pub mod bounds;
pub mod chain;
pub mod circuit;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod family;
pub mod fit;
pub mod flow;
pub mod ladder;
pub mod lanczos;
pub mod observables;
pub mod operator;
pub mod pauli;
pub mod trotter;

pub use dense::{from_dense, op_norm, to_dense, to_dense_with_limit, DenseOperator, StateVector};
pub use error::{Error, Result};
pub use operator::{commutator, conjugate_by_exp, multiply, OperatorSum};
pub use pauli::{PauliString, SupportInterval};
