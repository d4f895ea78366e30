//! Error types, one enum per subsystem.

use thiserror::Error;

use crate::game::CoalitionMask;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("agent count {n} outside supported range 1..=16")]
    AgentCount { n: usize },
    #[error("characteristic table needs {expected} entries, got {got}")]
    TableSize { expected: usize, got: usize },
    #[error("coalition value for mask {mask} out of range: {raw}")]
    ValueOutOfRange { mask: u32, raw: i64 },
    #[error("table is not normalized (v(empty) != 0)")]
    NotNormalized,
    #[error("permutation oracle limited to 8 agents, got {n}")]
    OracleTooLarge { n: usize },
    #[error("monte carlo estimator needs at least one sample")]
    ZeroSamples,
    #[error("allocations cover different agent sets")]
    AllocationMismatch,
    #[error("bad table encoding: {0}")]
    BadEncoding(&'static str),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("output payload must be non-empty")]
    EmptyPayload,
    #[error("no object stored under cid {cid}")]
    NotFound { cid: String },
    #[error("stored object under cid {cid} fails its digest check")]
    Corrupt { cid: String },
    #[error("stored bytes are not a canonical digest set")]
    Malformed,
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("coalition {coalition} already has a committed record")]
    DuplicateCommit { coalition: CoalitionMask },
    #[error("no commitment for coalition {coalition}")]
    MissingCommitment { coalition: CoalitionMask },
    #[error("gas model: {0}")]
    BadGasModel(String),
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("journal line {line}: {reason}")]
    Divergence { line: usize, reason: String },
    #[error("journal i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("agent count {n} outside supported range 1..=16")]
    AgentCount { n: usize },
    #[error("witness needs outputs for all coalitions; {got} of {expected} provided")]
    MissingOutputs { expected: usize, got: usize },
    #[error("outputs for coalition {coalition} do not match its members")]
    WrongMembers { coalition: CoalitionMask },
    #[error("constraint index {index} out of range ({len} constraints)")]
    BadConstraintIndex { index: usize, len: usize },
    #[error("constraint references row {row} which is unresolvable")]
    UnresolvableCell { row: u32 },
    #[error("row {row} has the wrong shape for this constraint")]
    WrongRowKind { row: u32 },
    #[error("public input index out of range")]
    BadPublicRef,
    #[error("bad trace encoding: {0}")]
    BadEncoding(&'static str),
}

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("sample count k must be at least 1")]
    ZeroSamples,
    #[error("sample count k = {k} exceeds the supported maximum")]
    TooManySamples { k: u32 },
    #[error("honest prover refuses an unsatisfied trace (violated constraint {index})")]
    UnsatisfiedTrace { index: usize },
    #[error("circuit: {0}")]
    Circuit(#[from] CircuitError),
    #[error("bad proof encoding: {0}")]
    BadEncoding(&'static str),
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("price series needs at least 2 steps, got {steps}")]
    TooShort { steps: usize },
    #[error("signal series length {got} does not match price series length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coalition must be non-empty for evaluation")]
    EmptyCoalition,
    #[error("bad signal payload")]
    BadPayload,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error(transparent)]
    Market(#[from] MarketError),
}
