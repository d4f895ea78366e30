//! Verifiable Shapley-value settlement over committed multi-agent outputs.
//!
//! The library implements a desk-scale pipeline for splitting a
//! collaborative task's value fairly among autonomous agents without
//! trusting the coordinator that does the math:
//!
//! 1. every agent coalition runs the task; outputs and evaluated
//!    coalition values are hash-committed on a simulated ledger
//!    ([`commit`], [`ledger`]);
//! 2. a coordinator re-verifies the commitments and computes the exact
//!    Shapley allocation with integer arithmetic ([`game`]);
//! 3. the whole computation is laid out as a witness trace with locally
//!    checkable constraints ([`circuit`]);
//! 4. a Merkle-committed, Fiat-Shamir-sampled spot-check proof lets the
//!    ledger verify the allocation at near-constant cost ([`proof`]);
//! 5. settlement pays every agent its rounded share, conserving the grand
//!    value exactly ([`ledger`]).
//!
//! [`market`] provides the deterministic synthetic trading desk used as
//! the workload, and [`pipeline`] wires the phases together and hosts the
//! adversary harness (output manipulation, value tampering, allocation
//! tampering, collusion, withholding).

pub mod circuit;
pub mod commit;
pub mod error;
pub mod game;
pub mod ledger;
pub mod market;
pub mod pipeline;
pub mod proof;

pub use error::{CircuitError, GameError, LedgerError, MarketError, PipelineError, ProofError, StoreError};
