//! Arithmetization of the Shapley computation: a row-addressed witness
//! trace plus a system of locally checkable constraints.
//!
//! The trace records the whole computation the coordinator performed:
//! one row per coalition (value and output digests), one row per
//! accumulation step of each agent's weighted marginal sum, and one final
//! row per agent holding the Shapley numerator and the settled payout.
//!
//! Constraints are typed semantic checks over the integers, not field
//! gates. Multiplying the Shapley formula through by `n!` turns every
//! weight into the integer `(n-1-|S|)! * |S|!`, so no constraint needs a
//! division or a modular inverse. Five constraint families cover the
//! relation:
//!
//! * `HashOutputs` - the coalition row's digest set matches the committed
//!   cid in the public inputs (one per coalition).
//! * `HashValue`   - the coalition row's value hashes to the committed
//!   value hash (one per coalition).
//! * `AccumStep`   - one weighted-marginal accumulation step; reads at
//!   most 4 rows and no public inputs (n * 2^(n-1) total).
//! * `Finalize`    - the agent's numerator equals its final accumulator
//!   and the public allocation is the largest-remainder rounding of the
//!   numerators (one per agent).
//! * `Efficiency`  - the numerators sum to `n! * v(N)` (one).

use serde::{Deserialize, Serialize};

use crate::commit::{hash_value, Cid, Digest, DigestSet, OutputRecord};
use crate::error::CircuitError;
use crate::game::{
    factorial, largest_remainder_payouts, CharacteristicTable, CoalitionMask,
    FixedValue,
};
use crate::ledger::PublicInputs;

pub const MAX_AGENTS: usize = 16;

// ---------------------------------------------------------------------------
// Trace layout
// ---------------------------------------------------------------------------

/// Row count of a trace for `n` agents: `2^n` coalition rows, `n * 2^(n-1)`
/// accumulator rows, `n` final rows.
pub fn total_rows(n: usize) -> usize {
    (1usize << n) + n * (1usize << (n - 1)) + n
}

pub fn coalition_row_index(mask: u32) -> u32 {
    mask
}

pub fn accum_row_index(n: usize, agent: usize, step: u32) -> u32 {
    (1u32 << n) + (agent as u32) * (1u32 << (n - 1)) + step
}

pub fn final_row_index(n: usize, agent: usize) -> u32 {
    (1u32 << n) + (n as u32) * (1u32 << (n - 1)) + agent as u32
}

/// The `step`-th subset of the agent complement, in ascending mask order:
/// the bits of `step` deposited into the positions other than `agent`.
pub fn submask_at(n: usize, agent: usize, step: u32) -> u32 {
    let mut mask = 0u32;
    let mut bit = 0;
    for pos in 0..n {
        if pos == agent {
            continue;
        }
        if step >> bit & 1 == 1 {
            mask |= 1 << pos;
        }
        bit += 1;
    }
    mask
}

/// Integer Shapley weight `(n-1-|S|)! * |S|!` for a subset of size `size`.
pub fn shapley_coeff(n: usize, size: usize) -> u64 {
    (factorial(n - 1 - size) * factorial(size)) as u64
}

// ---------------------------------------------------------------------------
// Trace rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceRow {
    /// Per-coalition inputs: the value and the member output digests
    /// (sorted ascending, one per member agent).
    Coalition { mask: u32, value_raw: i64, digests: Vec<Digest> },
    /// One accumulation step of agent `agent`: running sum after adding
    /// `coeff * marginal` for the subset `subset_mask`.
    Accum { agent: u16, step: u32, subset_mask: u32, coeff: u64, marginal: i64, acc: i128 },
    /// Final per-agent result: numerator over `n!*SCALE` and the rounded
    /// payout in raw fixed-point units.
    Final { agent: u16, numerator: i128, payout_raw: i64 },
}

impl TraceRow {
    /// Canonical fixed-width bytes (width depends only on the row kind and
    /// `n`). These exact bytes feed Merkle leaf hashing, so the layout is
    /// versioned via the trace header and must not drift.
    pub fn canonical_bytes(&self, n: usize) -> Vec<u8> {
        match self {
            TraceRow::Coalition { mask, value_raw, digests } => {
                let mut out = Vec::with_capacity(14 + 32 * n);
                out.push(0x01);
                out.extend_from_slice(&mask.to_be_bytes());
                out.extend_from_slice(&value_raw.to_be_bytes());
                out.push(digests.len() as u8);
                for d in digests {
                    out.extend_from_slice(&d.0);
                }
                // Zero padding up to n digest slots keeps the width fixed.
                out.resize(14 + 32 * n, 0);
                out
            }
            TraceRow::Accum { agent, step, subset_mask, coeff, marginal, acc } => {
                let mut out = Vec::with_capacity(43);
                out.push(0x02);
                out.extend_from_slice(&agent.to_be_bytes());
                out.extend_from_slice(&step.to_be_bytes());
                out.extend_from_slice(&subset_mask.to_be_bytes());
                out.extend_from_slice(&coeff.to_be_bytes());
                out.extend_from_slice(&marginal.to_be_bytes());
                out.extend_from_slice(&acc.to_be_bytes());
                out
            }
            TraceRow::Final { agent, numerator, payout_raw } => {
                let mut out = Vec::with_capacity(27);
                out.push(0x03);
                out.extend_from_slice(&agent.to_be_bytes());
                out.extend_from_slice(&numerator.to_be_bytes());
                out.extend_from_slice(&payout_raw.to_be_bytes());
                out
            }
        }
    }

    fn parse(bytes: &[u8], n: usize) -> Result<(TraceRow, usize), CircuitError> {
        let bad = CircuitError::BadEncoding("truncated row");
        match bytes.first() {
            Some(0x01) => {
                let width = 14 + 32 * n;
                if bytes.len() < width {
                    return Err(bad);
                }
                let mask = u32::from_be_bytes(bytes[1..5].try_into().unwrap());
                let value_raw = i64::from_be_bytes(bytes[5..13].try_into().unwrap());
                let count = bytes[13] as usize;
                if count > n {
                    return Err(CircuitError::BadEncoding("digest count exceeds agent count"));
                }
                let mut digests = Vec::with_capacity(count);
                for i in 0..count {
                    let mut arr = [0u8; 32];
                    arr.copy_from_slice(&bytes[14 + i * 32..14 + (i + 1) * 32]);
                    digests.push(Digest(arr));
                }
                if bytes[14 + count * 32..width].iter().any(|&b| b != 0) {
                    return Err(CircuitError::BadEncoding("nonzero digest padding"));
                }
                Ok((TraceRow::Coalition { mask, value_raw, digests }, width))
            }
            Some(0x02) => {
                if bytes.len() < 43 {
                    return Err(bad);
                }
                Ok((
                    TraceRow::Accum {
                        agent: u16::from_be_bytes(bytes[1..3].try_into().unwrap()),
                        step: u32::from_be_bytes(bytes[3..7].try_into().unwrap()),
                        subset_mask: u32::from_be_bytes(bytes[7..11].try_into().unwrap()),
                        coeff: u64::from_be_bytes(bytes[11..19].try_into().unwrap()),
                        marginal: i64::from_be_bytes(bytes[19..27].try_into().unwrap()),
                        acc: i128::from_be_bytes(bytes[27..43].try_into().unwrap()),
                    },
                    43,
                ))
            }
            Some(0x03) => {
                if bytes.len() < 27 {
                    return Err(bad);
                }
                Ok((
                    TraceRow::Final {
                        agent: u16::from_be_bytes(bytes[1..3].try_into().unwrap()),
                        numerator: i128::from_be_bytes(bytes[3..19].try_into().unwrap()),
                        payout_raw: i64::from_be_bytes(bytes[19..27].try_into().unwrap()),
                    },
                    27,
                ))
            }
            _ => Err(CircuitError::BadEncoding("unknown row tag")),
        }
    }
}

// ---------------------------------------------------------------------------
// Witness trace
// ---------------------------------------------------------------------------

/// Addressable cell of a witness trace, for targeted tampering in the
/// adversary harness and mutation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceCell {
    CoalitionMaskField { mask: u32 },
    CoalitionValue { mask: u32 },
    CoalitionDigest { mask: u32, slot: usize },
    AccumAgentField { agent: u16, step: u32 },
    AccumStepField { agent: u16, step: u32 },
    AccumSubsetMask { agent: u16, step: u32 },
    AccumCoeff { agent: u16, step: u32 },
    AccumMarginal { agent: u16, step: u32 },
    AccumAcc { agent: u16, step: u32 },
    FinalAgentField { agent: u16 },
    FinalNumerator { agent: u16 },
    FinalPayout { agent: u16 },
}

/// Full execution trace of one Shapley computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessTrace {
    n: usize,
    rows: Vec<TraceRow>,
}

impl WitnessTrace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn row(&self, index: u32) -> Option<&TraceRow> {
        self.rows.get(index as usize)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Canonical serialization: `WTRC` magic, version, n, row count,
    /// then the fixed-width rows back to back in layout order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"WTRC");
        out.push(1u8);
        out.push(self.n as u8);
        out.extend_from_slice(&(self.rows.len() as u32).to_be_bytes());
        for row in &self.rows {
            out.extend_from_slice(&row.canonical_bytes(self.n));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CircuitError> {
        if bytes.len() < 10 || &bytes[0..4] != b"WTRC" {
            return Err(CircuitError::BadEncoding("missing WTRC header"));
        }
        if bytes[4] != 1 {
            return Err(CircuitError::BadEncoding("unsupported version"));
        }
        let n = bytes[5] as usize;
        if n == 0 || n > MAX_AGENTS {
            return Err(CircuitError::AgentCount { n });
        }
        let count = u32::from_be_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let mut rows = Vec::with_capacity(count);
        let mut offset = 10;
        for _ in 0..count {
            let (row, used) = TraceRow::parse(&bytes[offset..], n)?;
            rows.push(row);
            offset += used;
        }
        if offset != bytes.len() {
            return Err(CircuitError::BadEncoding("trailing bytes after rows"));
        }
        Ok(WitnessTrace { n, rows })
    }

    /// Every mutable cell of the trace, in row order.
    pub fn enumerate_cells(&self) -> Vec<TraceCell> {
        let mut cells = Vec::new();
        for row in &self.rows {
            match row {
                TraceRow::Coalition { mask, digests, .. } => {
                    cells.push(TraceCell::CoalitionMaskField { mask: *mask });
                    cells.push(TraceCell::CoalitionValue { mask: *mask });
                    for slot in 0..digests.len() {
                        cells.push(TraceCell::CoalitionDigest { mask: *mask, slot });
                    }
                }
                TraceRow::Accum { agent, step, .. } => {
                    cells.push(TraceCell::AccumAgentField { agent: *agent, step: *step });
                    cells.push(TraceCell::AccumStepField { agent: *agent, step: *step });
                    cells.push(TraceCell::AccumSubsetMask { agent: *agent, step: *step });
                    cells.push(TraceCell::AccumCoeff { agent: *agent, step: *step });
                    cells.push(TraceCell::AccumMarginal { agent: *agent, step: *step });
                    cells.push(TraceCell::AccumAcc { agent: *agent, step: *step });
                }
                TraceRow::Final { agent, .. } => {
                    cells.push(TraceCell::FinalAgentField { agent: *agent });
                    cells.push(TraceCell::FinalNumerator { agent: *agent });
                    cells.push(TraceCell::FinalPayout { agent: *agent });
                }
            }
        }
        cells
    }

    /// Applies an additive (wrapping) perturbation to one cell; digest
    /// cells get a byte flipped instead. `delta` must be nonzero, so the
    /// cell always changes.
    pub fn bump_cell(&mut self, cell: TraceCell, delta: i64) {
        assert!(delta != 0, "a zero bump would leave the trace unchanged");
        let n = self.n;
        match cell {
            TraceCell::CoalitionMaskField { mask } => {
                if let TraceRow::Coalition { mask: m, .. } = &mut self.rows[mask as usize] {
                    *m = m.wrapping_add(delta as u32);
                }
            }
            TraceCell::CoalitionValue { mask } => {
                if let TraceRow::Coalition { value_raw, .. } = &mut self.rows[mask as usize] {
                    *value_raw = value_raw.wrapping_add(delta);
                }
            }
            TraceCell::CoalitionDigest { mask, slot } => {
                if let TraceRow::Coalition { digests, .. } = &mut self.rows[mask as usize] {
                    let byte = (delta.unsigned_abs() % 32) as usize;
                    digests[slot].0[byte] ^= (delta as u8) | 1;
                }
            }
            TraceCell::AccumAgentField { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { agent: a, .. } = &mut self.rows[idx] {
                    *a = a.wrapping_add(delta as u16);
                }
            }
            TraceCell::AccumStepField { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { step: s, .. } = &mut self.rows[idx] {
                    *s = s.wrapping_add(delta as u32);
                }
            }
            TraceCell::AccumSubsetMask { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { subset_mask, .. } = &mut self.rows[idx] {
                    *subset_mask = subset_mask.wrapping_add(delta as u32);
                }
            }
            TraceCell::AccumCoeff { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { coeff, .. } = &mut self.rows[idx] {
                    *coeff = coeff.wrapping_add(delta as u64);
                }
            }
            TraceCell::AccumMarginal { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { marginal, .. } = &mut self.rows[idx] {
                    *marginal = marginal.wrapping_add(delta);
                }
            }
            TraceCell::AccumAcc { agent, step } => {
                let idx = accum_row_index(n, agent as usize, step) as usize;
                if let TraceRow::Accum { acc, .. } = &mut self.rows[idx] {
                    *acc = acc.wrapping_add(delta as i128);
                }
            }
            TraceCell::FinalAgentField { agent } => {
                let idx = final_row_index(n, agent as usize) as usize;
                if let TraceRow::Final { agent: a, .. } = &mut self.rows[idx] {
                    *a = a.wrapping_add(delta as u16);
                }
            }
            TraceCell::FinalNumerator { agent } => {
                let idx = final_row_index(n, agent as usize) as usize;
                if let TraceRow::Final { numerator, .. } = &mut self.rows[idx] {
                    *numerator = numerator.wrapping_add(delta as i128);
                }
            }
            TraceCell::FinalPayout { agent } => {
                let idx = final_row_index(n, agent as usize) as usize;
                if let TraceRow::Final { payout_raw, .. } = &mut self.rows[idx] {
                    *payout_raw = payout_raw.wrapping_add(delta);
                }
            }
        }
    }
}

/// Builds the witness trace for a normalized table and its per-coalition
/// outputs (`outputs[mask]` holds the member records of that coalition).
/// Final numerators always equal `exact_shapley`'s.
pub fn build_witness(
    table: &CharacteristicTable,
    outputs: &[Vec<OutputRecord>],
) -> Result<WitnessTrace, CircuitError> {
    let n = table.n();
    if n > MAX_AGENTS {
        return Err(CircuitError::AgentCount { n });
    }
    let coalition_count = 1usize << n;
    if outputs.len() != coalition_count {
        return Err(CircuitError::MissingOutputs { expected: coalition_count, got: outputs.len() });
    }
    let mut rows = Vec::with_capacity(total_rows(n));
    for mask in 0..coalition_count as u32 {
        let coalition = CoalitionMask(mask);
        let mut agents: Vec<u16> = outputs[mask as usize].iter().map(|r| r.agent().0).collect();
        agents.sort_unstable();
        agents.dedup();
        let members: Vec<u16> = coalition.members(n).map(|a| a.0).collect();
        if agents != members || outputs[mask as usize].len() != members.len() {
            return Err(CircuitError::WrongMembers { coalition });
        }
        let set = DigestSet::from_records(&outputs[mask as usize]);
        rows.push(TraceRow::Coalition {
            mask,
            value_raw: table.value(coalition).raw(),
            digests: set.entries().to_vec(),
        });
    }
    let steps = 1u32 << (n - 1);
    let mut numerators = Vec::with_capacity(n);
    for agent in 0..n {
        let bit = 1u32 << agent;
        let mut acc: i128 = 0;
        for step in 0..steps {
            let subset = submask_at(n, agent, step);
            let size = subset.count_ones() as usize;
            let coeff = shapley_coeff(n, size);
            let marginal =
                table.value(CoalitionMask(subset | bit)).raw() - table.value(CoalitionMask(subset)).raw();
            acc += coeff as i128 * marginal as i128;
            rows.push(TraceRow::Accum {
                agent: agent as u16,
                step,
                subset_mask: subset,
                coeff,
                marginal,
                acc,
            });
        }
        numerators.push(acc);
    }
    let payouts = largest_remainder_payouts(&numerators, factorial(n));
    for agent in 0..n {
        rows.push(TraceRow::Final {
            agent: agent as u16,
            numerator: numerators[agent],
            payout_raw: payouts[agent],
        });
    }
    Ok(WitnessTrace { n, rows })
}

// ---------------------------------------------------------------------------
// Constraint system
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// The coalition row's sorted digest set matches the committed cid.
    HashOutputs { mask: u32 },
    /// The coalition row's value hashes to the committed value hash.
    HashValue { mask: u32 },
    /// One accumulation step: running sum, weight, and marginal all check.
    AccumStep { agent: u16, step: u32 },
    /// Numerator equals the final accumulator; the public allocation is
    /// the largest-remainder rounding of the numerators.
    Finalize { agent: u16 },
    /// Numerators sum to `n! * v(N)`, with `v(N)` bound to the public
    /// grand value.
    Efficiency,
}

impl ConstraintKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConstraintKind::HashOutputs { .. } => "hash_outputs",
            ConstraintKind::HashValue { .. } => "hash_value",
            ConstraintKind::AccumStep { .. } => "accum_step",
            ConstraintKind::Finalize { .. } => "finalize",
            ConstraintKind::Efficiency => "efficiency",
        }
    }
}

/// Semantic reference into the public inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PublicRef {
    Allocation(u16),
    GrandValue,
    OutputCid(u32),
    ValueHash(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    /// Trace row indices this constraint reads.
    pub cell_refs: Vec<u32>,
    /// Public inputs this constraint reads.
    pub public_refs: Vec<PublicRef>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub hash_outputs: usize,
    pub hash_value: usize,
    pub accum_step: usize,
    pub finalize: usize,
    pub efficiency: usize,
}

impl ConstraintCounts {
    pub fn total(&self) -> usize {
        self.hash_outputs + self.hash_value + self.accum_step + self.finalize + self.efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    n: usize,
    constraints: Vec<Constraint>,
    counts: ConstraintCounts,
}

impl ConstraintSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, index: usize) -> Option<&Constraint> {
        self.constraints.get(index)
    }

    pub fn counts(&self) -> ConstraintCounts {
        self.counts
    }

    pub fn trace_rows(&self) -> usize {
        total_rows(self.n)
    }
}

/// Emits the constraint list for `n` agents in the fixed order:
/// all `HashOutputs`, all `HashValue` (ascending mask), all `AccumStep`
/// (by agent, then step), all `Finalize`, then the single `Efficiency`.
pub fn build_constraints(n: usize) -> Result<ConstraintSystem, CircuitError> {
    if n == 0 || n > MAX_AGENTS {
        return Err(CircuitError::AgentCount { n });
    }
    let coalition_count = 1u32 << n;
    let steps = 1u32 << (n - 1);
    let mut constraints = Vec::with_capacity(total_rows(n) + (1usize << n) + 1);
    for mask in 0..coalition_count {
        constraints.push(Constraint {
            kind: ConstraintKind::HashOutputs { mask },
            cell_refs: vec![coalition_row_index(mask)],
            public_refs: vec![PublicRef::OutputCid(mask)],
        });
    }
    for mask in 0..coalition_count {
        constraints.push(Constraint {
            kind: ConstraintKind::HashValue { mask },
            cell_refs: vec![coalition_row_index(mask)],
            public_refs: vec![PublicRef::ValueHash(mask)],
        });
    }
    for agent in 0..n {
        let bit = 1u32 << agent;
        for step in 0..steps {
            let subset = submask_at(n, agent, step);
            let mut cell_refs = vec![accum_row_index(n, agent, step)];
            if step > 0 {
                cell_refs.push(accum_row_index(n, agent, step - 1));
            }
            cell_refs.push(coalition_row_index(subset));
            cell_refs.push(coalition_row_index(subset | bit));
            constraints.push(Constraint {
                kind: ConstraintKind::AccumStep { agent: agent as u16, step },
                cell_refs,
                public_refs: vec![],
            });
        }
    }
    for agent in 0..n {
        let mut cell_refs = vec![accum_row_index(n, agent, steps - 1)];
        cell_refs.extend((0..n).map(|a| final_row_index(n, a)));
        constraints.push(Constraint {
            kind: ConstraintKind::Finalize { agent: agent as u16 },
            cell_refs,
            public_refs: vec![PublicRef::Allocation(agent as u16)],
        });
    }
    let mut cell_refs: Vec<u32> = (0..n).map(|a| final_row_index(n, a)).collect();
    cell_refs.push(coalition_row_index(coalition_count - 1));
    constraints.push(Constraint {
        kind: ConstraintKind::Efficiency,
        cell_refs,
        public_refs: vec![PublicRef::GrandValue],
    });
    let counts = ConstraintCounts {
        hash_outputs: coalition_count as usize,
        hash_value: coalition_count as usize,
        accum_step: n * steps as usize,
        finalize: n,
        efficiency: 1,
    };
    debug_assert_eq!(counts.total(), constraints.len());
    Ok(ConstraintSystem { n, constraints, counts })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Anything that can resolve trace row indices: the full trace during a
/// complete recheck, or just the opened rows during proof verification.
pub trait RowSource {
    fn resolve(&self, index: u32) -> Option<&TraceRow>;
}

impl RowSource for WitnessTrace {
    fn resolve(&self, index: u32) -> Option<&TraceRow> {
        self.row(index)
    }
}

impl RowSource for std::collections::BTreeMap<u32, TraceRow> {
    fn resolve(&self, index: u32) -> Option<&TraceRow> {
        self.get(&index)
    }
}

fn coalition_at<'a>(
    rows: &'a dyn RowSource,
    index: u32,
) -> Result<(&'a u32, &'a i64, &'a Vec<Digest>), CircuitError> {
    match rows.resolve(index) {
        None => Err(CircuitError::UnresolvableCell { row: index }),
        Some(TraceRow::Coalition { mask, value_raw, digests }) => Ok((mask, value_raw, digests)),
        Some(_) => Err(CircuitError::WrongRowKind { row: index }),
    }
}

/// Evaluates one constraint against resolvable rows and the public inputs.
/// `Ok(false)` means the constraint does not hold; `Err` means a reference
/// could not be resolved at all (a structural defect, not a violation).
pub fn eval_constraint(
    cs: &ConstraintSystem,
    index: usize,
    rows: &dyn RowSource,
    public: &PublicInputs,
) -> Result<bool, CircuitError> {
    let n = cs.n;
    let constraint = cs
        .constraint(index)
        .ok_or(CircuitError::BadConstraintIndex { index, len: cs.len() })?;
    match constraint.kind {
        ConstraintKind::HashOutputs { mask } => {
            let (row_mask, _, digests) = coalition_at(rows, coalition_row_index(mask))?;
            let cid = public
                .output_hash_cids
                .get(mask as usize)
                .ok_or(CircuitError::BadPublicRef)?;
            if *row_mask != mask || digests.len() != mask.count_ones() as usize {
                return Ok(false);
            }
            if digests.windows(2).any(|w| w[0] >= w[1]) {
                return Ok(false);
            }
            let set = DigestSet::from_digests(digests.clone());
            Ok(Cid::of_set(&set) == *cid)
        }
        ConstraintKind::HashValue { mask } => {
            let (row_mask, value_raw, _) = coalition_at(rows, coalition_row_index(mask))?;
            let committed = public
                .value_hashes
                .get(mask as usize)
                .ok_or(CircuitError::BadPublicRef)?;
            if *row_mask != mask {
                return Ok(false);
            }
            Ok(hash_value(FixedValue::from_raw(*value_raw), CoalitionMask(mask)) == *committed)
        }
        ConstraintKind::AccumStep { agent, step } => {
            let own_index = accum_row_index(n, agent as usize, step);
            let own = match rows.resolve(own_index) {
                None => return Err(CircuitError::UnresolvableCell { row: own_index }),
                Some(TraceRow::Accum { agent: a, step: s, subset_mask, coeff, marginal, acc }) => {
                    (*a, *s, *subset_mask, *coeff, *marginal, *acc)
                }
                Some(_) => return Err(CircuitError::WrongRowKind { row: own_index }),
            };
            let (row_agent, row_step, subset_mask, coeff, marginal, acc) = own;
            let expected_subset = submask_at(n, agent as usize, step);
            let expected_coeff = shapley_coeff(n, expected_subset.count_ones() as usize);
            if row_agent != agent || row_step != step {
                return Ok(false);
            }
            if subset_mask != expected_subset || coeff != expected_coeff {
                return Ok(false);
            }
            let bit = 1u32 << agent;
            let (without_mask, without_raw, _) = coalition_at(rows, coalition_row_index(expected_subset))?;
            let (with_mask, with_raw, _) =
                coalition_at(rows, coalition_row_index(expected_subset | bit))?;
            if *without_mask != expected_subset || *with_mask != expected_subset | bit {
                return Ok(false);
            }
            if marginal as i128 != *with_raw as i128 - *without_raw as i128 {
                return Ok(false);
            }
            let prev: i128 = if step == 0 {
                0
            } else {
                let prev_index = accum_row_index(n, agent as usize, step - 1);
                match rows.resolve(prev_index) {
                    None => return Err(CircuitError::UnresolvableCell { row: prev_index }),
                    Some(TraceRow::Accum { acc, .. }) => *acc,
                    Some(_) => return Err(CircuitError::WrongRowKind { row: prev_index }),
                }
            };
            Ok(acc == prev + coeff as i128 * marginal as i128)
        }
        ConstraintKind::Finalize { agent } => {
            let mut numerators = Vec::with_capacity(n);
            for a in 0..n {
                let idx = final_row_index(n, a);
                match rows.resolve(idx) {
                    None => return Err(CircuitError::UnresolvableCell { row: idx }),
                    Some(TraceRow::Final { numerator, .. }) => numerators.push(*numerator),
                    Some(_) => return Err(CircuitError::WrongRowKind { row: idx }),
                }
            }
            let own_index = final_row_index(n, agent as usize);
            let (own_agent, own_numerator, own_payout) = match rows.resolve(own_index) {
                None => return Err(CircuitError::UnresolvableCell { row: own_index }),
                Some(TraceRow::Final { agent: a, numerator, payout_raw }) => {
                    (*a, *numerator, *payout_raw)
                }
                Some(_) => return Err(CircuitError::WrongRowKind { row: own_index }),
            };
            if own_agent != agent {
                return Ok(false);
            }
            let last = accum_row_index(n, agent as usize, (1u32 << (n - 1)) - 1);
            let final_acc = match rows.resolve(last) {
                None => return Err(CircuitError::UnresolvableCell { row: last }),
                Some(TraceRow::Accum { acc, .. }) => *acc,
                Some(_) => return Err(CircuitError::WrongRowKind { row: last }),
            };
            if own_numerator != final_acc {
                return Ok(false);
            }
            let payouts = largest_remainder_payouts(&numerators, factorial(n));
            if own_payout != payouts[agent as usize] {
                return Ok(false);
            }
            let public_alloc = public
                .allocations
                .get(agent as usize)
                .ok_or(CircuitError::BadPublicRef)?;
            Ok(public_alloc.raw() == own_payout)
        }
        ConstraintKind::Efficiency => {
            let mut total: i128 = 0;
            for a in 0..n {
                let idx = final_row_index(n, a);
                match rows.resolve(idx) {
                    None => return Err(CircuitError::UnresolvableCell { row: idx }),
                    Some(TraceRow::Final { numerator, .. }) => total += *numerator,
                    Some(_) => return Err(CircuitError::WrongRowKind { row: idx }),
                }
            }
            let full = (1u32 << n) - 1;
            let (_, grand_raw, _) = coalition_at(rows, coalition_row_index(full))?;
            if public.grand_value.raw() != *grand_raw {
                return Ok(false);
            }
            Ok(total == factorial(n) * *grand_raw as i128)
        }
    }
}

/// Full-recheck oracle: conjunction of every constraint.
pub fn check_all(
    cs: &ConstraintSystem,
    trace: &WitnessTrace,
    public: &PublicInputs,
) -> Result<bool, CircuitError> {
    for index in 0..cs.len() {
        if !eval_constraint(cs, index, trace, public)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Indices of all violated constraints (no short-circuit).
pub fn violations(
    cs: &ConstraintSystem,
    trace: &WitnessTrace,
    public: &PublicInputs,
) -> Result<Vec<usize>, CircuitError> {
    let mut out = Vec::new();
    for index in 0..cs.len() {
        if !eval_constraint(cs, index, trace, public)? {
            out.push(index);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{exact_shapley, AgentId, SCALE};
    use crate::ledger::PublicInputs;

    fn outputs_for(n: usize) -> Vec<Vec<OutputRecord>> {
        (0..1u32 << n)
            .map(|mask| {
                CoalitionMask(mask)
                    .members(n)
                    .map(|a| {
                        OutputRecord::new(a, format!("agent {} in {}", a.0, mask).into_bytes())
                            .unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    fn fixture(n: usize, seed: u64) -> (CharacteristicTable, Vec<Vec<OutputRecord>>, WitnessTrace, ConstraintSystem, PublicInputs) {
        let table = CharacteristicTable::random(n, seed, 100 * SCALE).unwrap();
        let outputs = outputs_for(n);
        let trace = build_witness(&table, &outputs).unwrap();
        let cs = build_constraints(n).unwrap();
        let alloc = exact_shapley(&table).unwrap();
        let public = PublicInputs::derive(&table, &outputs, &alloc);
        (table, outputs, trace, cs, public)
    }

    #[test]
    fn constraint_counts_match_formulas() {
        let cs = build_constraints(4).unwrap();
        let c = cs.counts();
        assert_eq!(
            (c.hash_outputs, c.hash_value, c.accum_step, c.finalize, c.efficiency),
            (16, 16, 32, 4, 1)
        );
        assert_eq!(cs.len(), 69);

        let cs1 = build_constraints(1).unwrap();
        let c1 = cs1.counts();
        assert_eq!(
            (c1.hash_outputs, c1.hash_value, c1.accum_step, c1.finalize, c1.efficiency),
            (2, 2, 1, 1, 1)
        );
        assert_eq!(cs1.len(), 7);
    }

    #[test]
    fn constraint_order_is_stable() {
        let a = build_constraints(3).unwrap();
        let b = build_constraints(3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn build_constraints_rejects_out_of_range() {
        assert!(build_constraints(0).is_err());
        assert!(build_constraints(17).is_err());
    }

    #[test]
    fn single_agent_trace_shape() {
        let table = CharacteristicTable::new(
            1,
            vec![FixedValue::ZERO, FixedValue::from_raw(42 * SCALE)],
        )
        .unwrap();
        let outputs = outputs_for(1);
        let trace = build_witness(&table, &outputs).unwrap();
        assert_eq!(trace.row_count(), 4); // 2 coalition + 1 accum + 1 final
        match trace.row(final_row_index(1, 0)).unwrap() {
            TraceRow::Final { numerator, payout_raw, .. } => {
                assert_eq!(*numerator, 42 * SCALE as i128);
                assert_eq!(*payout_raw, 42 * SCALE);
            }
            other => panic!("unexpected row {other:?}"),
        }
    }

    #[test]
    fn two_agent_numerators_match_oracle_times_factorial() {
        let s = SCALE;
        let table = CharacteristicTable::new(
            2,
            [0, s, 3 * s, 6 * s].iter().map(|&r| FixedValue::from_raw(r)).collect(),
        )
        .unwrap();
        let trace = build_witness(&table, &outputs_for(2)).unwrap();
        let nums: Vec<i128> = (0..2)
            .map(|a| match trace.row(final_row_index(2, a)).unwrap() {
                TraceRow::Final { numerator, .. } => *numerator,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(nums, vec![4 * s as i128, 8 * s as i128]);
    }

    #[test]
    fn witness_matches_exact_shapley_on_random_games() {
        for seed in [1u64, 2, 3] {
            let table = CharacteristicTable::random(4, seed, 100 * SCALE).unwrap();
            let trace = build_witness(&table, &outputs_for(4)).unwrap();
            let alloc = exact_shapley(&table).unwrap();
            for agent in 0..4 {
                match trace.row(final_row_index(4, agent)).unwrap() {
                    TraceRow::Final { numerator, payout_raw, .. } => {
                        assert_eq!(*numerator, alloc.numerator(AgentId(agent as u16)));
                        assert_eq!(*payout_raw, alloc.payouts()[agent].raw());
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn witness_rejects_missing_or_mismatched_outputs() {
        let table = CharacteristicTable::random(2, 5, SCALE).unwrap();
        let mut outputs = outputs_for(2);
        outputs.pop();
        assert!(matches!(
            build_witness(&table, &outputs),
            Err(CircuitError::MissingOutputs { .. })
        ));

        let mut outputs = outputs_for(2);
        outputs[1].clear(); // coalition {0} now has no records
        assert!(matches!(
            build_witness(&table, &outputs),
            Err(CircuitError::WrongMembers { .. })
        ));
    }

    #[test]
    fn honest_trace_satisfies_every_constraint() {
        for n in [1usize, 2, 3, 4] {
            let (_, _, trace, cs, public) = fixture(n, 7 + n as u64);
            assert!(check_all(&cs, &trace, &public).unwrap(), "n={n}");
        }
    }

    #[test]
    fn value_edit_breaks_matching_hash_constraint() {
        let (_, _, mut trace, cs, public) = fixture(3, 11);
        trace.bump_cell(TraceCell::CoalitionValue { mask: 0b101 }, 1);
        let bad = violations(&cs, &trace, &public).unwrap();
        // HashValue for mask 0b101 sits at offset 2^n + mask.
        assert!(bad.contains(&(8 + 0b101)));
        assert!(bad
            .iter()
            .all(|&i| !matches!(cs.constraint(i).unwrap().kind, ConstraintKind::HashOutputs { .. })));
    }

    #[test]
    fn acc_edit_breaks_exactly_two_adjacent_steps() {
        let (_, _, mut trace, cs, public) = fixture(3, 13);
        // Edit an interior accumulator cell of agent 1 (step 1 of 4).
        trace.bump_cell(TraceCell::AccumAcc { agent: 1, step: 1 }, 5);
        let bad = violations(&cs, &trace, &public).unwrap();
        let expected: Vec<usize> = vec![
            16 + (1 * 4 + 1), // AccumStep(agent 1, step 1)
            16 + (1 * 4 + 2), // AccumStep(agent 1, step 2)
        ];
        assert_eq!(bad, expected);
    }

    #[test]
    fn final_acc_edit_breaks_last_step_and_finalize() {
        let (_, _, mut trace, cs, public) = fixture(2, 17);
        trace.bump_cell(TraceCell::AccumAcc { agent: 0, step: 1 }, 3);
        let bad = violations(&cs, &trace, &public).unwrap();
        let kinds: Vec<&'static str> =
            bad.iter().map(|&i| cs.constraint(i).unwrap().kind.label()).collect();
        assert_eq!(kinds, vec!["accum_step", "finalize"]);
    }

    #[test]
    fn tampered_public_allocation_breaks_only_finalize() {
        let (_, _, trace, cs, mut public) = fixture(3, 19);
        public.allocations[0] = FixedValue::from_raw(public.allocations[0].raw() + SCALE);
        public.refresh_digest();
        let bad = violations(&cs, &trace, &public).unwrap();
        assert_eq!(bad.len(), 1);
        assert!(matches!(cs.constraint(bad[0]).unwrap().kind, ConstraintKind::Finalize { agent: 0 }));
    }

    #[test]
    fn unresolvable_reference_is_structural_not_false() {
        let (_, _, trace, cs, public) = fixture(2, 23);
        let mut opened = std::collections::BTreeMap::new();
        // Provide only row 0; constraint 5 (HashValue mask 1) needs row 1.
        opened.insert(0u32, trace.row(0).unwrap().clone());
        let err = eval_constraint(&cs, 5, &opened, &public);
        assert!(matches!(err, Err(CircuitError::UnresolvableCell { row: 1 })));
    }

    #[test]
    fn trace_serialization_roundtrip() {
        let (_, _, trace, _, _) = fixture(3, 29);
        let bytes = trace.to_bytes();
        assert_eq!(WitnessTrace::from_bytes(&bytes).unwrap(), trace);
        assert!(WitnessTrace::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(WitnessTrace::from_bytes(b"JUNK").is_err());
    }

    #[test]
    fn empty_single_agent_game_is_satisfied_with_zero_allocation() {
        let table =
            CharacteristicTable::new(1, vec![FixedValue::ZERO, FixedValue::ZERO]).unwrap();
        let outputs = outputs_for(1);
        let trace = build_witness(&table, &outputs).unwrap();
        let cs = build_constraints(1).unwrap();
        let alloc = exact_shapley(&table).unwrap();
        let public = PublicInputs::derive(&table, &outputs, &alloc);
        assert!(check_all(&cs, &trace, &public).unwrap());
        assert_eq!(public.allocations[0], FixedValue::ZERO);
    }
}
