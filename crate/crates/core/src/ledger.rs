//! Simulated single-task ledger: commitment anchoring, constant-cost
//! verification and settlement, gas accounting, and a replayable journal.
//!
//! The ledger is append-only. One transaction per block, heights from 1.
//! Every transaction has a canonical byte form; its SHA-256 is the tx
//! hash, and a running transcript digest over the tx hashes acts as the
//! state digest for bit-exact replay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::build_constraints;
use crate::commit::{hash_value, sha256, Cid, Digest, DigestSet, OutputRecord};
use crate::error::{LedgerError, ReplayError};
use crate::game::{CharacteristicTable, CoalitionMask, FixedValue, ShapleyAllocation};
use crate::proof::{verify, Proof};

pub const ABORT_DIVERGENCE: &str = "public-input/ledger divergence";
pub const ABORT_PROOF_INVALID: &str = "proof invalid";
pub const ABORT_UNSETTLEABLE: &str = "unsettleable allocation";

// ---------------------------------------------------------------------------
// Gas model
// ---------------------------------------------------------------------------

/// Unit-cost model for on-chain work. The baseline models naive on-chain
/// computation as affine in the coalition count (`base + per_coalition *
/// 2^n`); the hybrid path charges a flat verification constant.
/// `hash_unit` and `constraint_unit` price the reference backend's actual
/// operations, reported separately from the modeled constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    pub verify_constant: u64,
    pub onchain_base: f64,
    pub onchain_per_coalition: f64,
    pub storage_write: u64,
    #[serde(default = "default_hash_unit")]
    pub hash_unit: u64,
    #[serde(default = "default_constraint_unit")]
    pub constraint_unit: u64,
}

fn default_hash_unit() -> u64 {
    60
}

fn default_constraint_unit() -> u64 {
    10_000
}

impl Default for GasModel {
    fn default() -> Self {
        // Baseline calibrated on the two-point system 16c + b = 367_000,
        // 64c + b = 1_330_000; hybrid verification pinned at 27_000.
        GasModel::calibrated((4, 367_000.0), (6, 1_330_000.0), 27_000)
    }
}

impl GasModel {
    /// Solves the affine baseline through two (agents, gas) points.
    pub fn calibrated(p1: (usize, f64), p2: (usize, f64), verify_constant: u64) -> Self {
        let x1 = (1u64 << p1.0) as f64;
        let x2 = (1u64 << p2.0) as f64;
        let per_coalition = (p2.1 - p1.1) / (x2 - x1);
        let base = p1.1 - per_coalition * x1;
        GasModel {
            verify_constant,
            onchain_base: base,
            onchain_per_coalition: per_coalition,
            storage_write: 20_000,
            hash_unit: default_hash_unit(),
            constraint_unit: default_constraint_unit(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LedgerError> {
        toml::from_str(text).map_err(|e| LedgerError::BadGasModel(e.to_string()))
    }

    pub fn baseline_units(&self, n: usize) -> f64 {
        self.onchain_base + self.onchain_per_coalition * (1u64 << n) as f64
    }

    pub fn report(&self, n: usize) -> GasReport {
        let baseline = self.baseline_units(n);
        let hybrid = self.verify_constant;
        GasReport {
            agents: n,
            baseline: baseline.round() as u64,
            hybrid,
            reduction: 1.0 - hybrid as f64 / baseline,
        }
    }

    /// Converts measured verifier operation counts to units.
    pub fn reference_units(&self, hash_evals: u64, constraint_evals: u64) -> u64 {
        hash_evals * self.hash_unit + constraint_evals * self.constraint_unit
    }
}

/// One row of the gas comparison: naive on-chain baseline versus the
/// constant-cost hybrid verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasReport {
    pub agents: usize,
    pub baseline: u64,
    pub hybrid: u64,
    /// Fraction of baseline cost avoided, in [0, 1].
    pub reduction: f64,
}

// ---------------------------------------------------------------------------
// Public inputs
// ---------------------------------------------------------------------------

/// On-chain anchor for verification: the proposed allocation, the grand
/// value, and the per-coalition commitments, plus a digest binding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicInputs {
    pub allocations: Vec<FixedValue>,
    pub grand_value: FixedValue,
    pub output_hash_cids: Vec<Cid>,
    pub value_hashes: Vec<Digest>,
    pub public_digest: Digest,
}

impl PublicInputs {
    pub fn new(
        allocations: Vec<FixedValue>,
        grand_value: FixedValue,
        output_hash_cids: Vec<Cid>,
        value_hashes: Vec<Digest>,
    ) -> Self {
        let mut p = PublicInputs {
            allocations,
            grand_value,
            output_hash_cids,
            value_hashes,
            public_digest: Digest([0u8; 32]),
        };
        p.refresh_digest();
        p
    }

    /// Convenience constructor from a pipeline's table, per-coalition
    /// outputs, and computed allocation.
    pub fn derive(
        table: &CharacteristicTable,
        outputs: &[Vec<OutputRecord>],
        allocation: &ShapleyAllocation,
    ) -> Self {
        let cids = outputs
            .iter()
            .map(|records| Cid::of_set(&DigestSet::from_records(records)))
            .collect();
        let value_hashes = (0..outputs.len() as u32)
            .map(|mask| hash_value(table.value(CoalitionMask(mask)), CoalitionMask(mask)))
            .collect();
        PublicInputs::new(allocation.payouts(), table.grand_value(), cids, value_hashes)
    }

    /// Canonical bytes of everything except the digest itself.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"PUB");
        out.extend_from_slice(&(self.allocations.len() as u16).to_be_bytes());
        for a in &self.allocations {
            out.extend_from_slice(&a.raw().to_be_bytes());
        }
        out.extend_from_slice(&self.grand_value.raw().to_be_bytes());
        out.extend_from_slice(&(self.output_hash_cids.len() as u32).to_be_bytes());
        for cid in &self.output_hash_cids {
            out.extend_from_slice(&cid.digest.0);
        }
        for h in &self.value_hashes {
            out.extend_from_slice(&h.0);
        }
        out
    }

    pub fn compute_digest(&self) -> Digest {
        sha256(&[&self.canonical_bytes()])
    }

    pub fn refresh_digest(&mut self) {
        self.public_digest = self.compute_digest();
    }
}

// ---------------------------------------------------------------------------
// Transactions and journal
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transaction {
    CommitCid { height: u64, coalition: CoalitionMask, cid: Cid },
    CommitValueHash { height: u64, coalition: CoalitionMask, hash: Digest },
    Settle { height: u64, payouts: Vec<i64>, grand_raw: i64 },
    Abort { height: u64, phase: u8, reason: String },
}

impl Transaction {
    pub fn height(&self) -> u64 {
        match self {
            Transaction::CommitCid { height, .. }
            | Transaction::CommitValueHash { height, .. }
            | Transaction::Settle { height, .. }
            | Transaction::Abort { height, .. } => *height,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Transaction::CommitCid { height, coalition, cid } => {
                out.push(1);
                out.extend_from_slice(&height.to_be_bytes());
                out.extend_from_slice(&coalition.0.to_be_bytes());
                out.extend_from_slice(&cid.digest.0);
            }
            Transaction::CommitValueHash { height, coalition, hash } => {
                out.push(2);
                out.extend_from_slice(&height.to_be_bytes());
                out.extend_from_slice(&coalition.0.to_be_bytes());
                out.extend_from_slice(&hash.0);
            }
            Transaction::Settle { height, payouts, grand_raw } => {
                out.push(3);
                out.extend_from_slice(&height.to_be_bytes());
                out.extend_from_slice(&(payouts.len() as u16).to_be_bytes());
                for p in payouts {
                    out.extend_from_slice(&p.to_be_bytes());
                }
                out.extend_from_slice(&grand_raw.to_be_bytes());
            }
            Transaction::Abort { height, phase, reason } => {
                out.push(4);
                out.extend_from_slice(&height.to_be_bytes());
                out.push(*phase);
                out.extend_from_slice(&(reason.len() as u16).to_be_bytes());
                out.extend_from_slice(reason.as_bytes());
            }
        }
        out
    }

    pub fn tx_hash(&self) -> Digest {
        sha256(&[&self.canonical_bytes()])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let need = |n: usize| -> Result<(), String> {
            if bytes.len() < n {
                Err("truncated transaction".into())
            } else {
                Ok(())
            }
        };
        need(9)?;
        let height = u64::from_be_bytes(bytes[1..9].try_into().unwrap());
        match bytes[0] {
            1 | 2 => {
                need(45)?;
                if bytes.len() != 45 {
                    return Err("trailing bytes".into());
                }
                let coalition = CoalitionMask(u32::from_be_bytes(bytes[9..13].try_into().unwrap()));
                let mut arr = [0u8; 32];
                arr.copy_from_slice(&bytes[13..45]);
                if bytes[0] == 1 {
                    Ok(Transaction::CommitCid { height, coalition, cid: Cid { digest: Digest(arr) } })
                } else {
                    Ok(Transaction::CommitValueHash { height, coalition, hash: Digest(arr) })
                }
            }
            3 => {
                need(11)?;
                let count = u16::from_be_bytes(bytes[9..11].try_into().unwrap()) as usize;
                if bytes.len() != 11 + count * 8 + 8 {
                    return Err("bad settle length".into());
                }
                let mut payouts = Vec::with_capacity(count);
                for i in 0..count {
                    payouts.push(i64::from_be_bytes(
                        bytes[11 + i * 8..11 + (i + 1) * 8].try_into().unwrap(),
                    ));
                }
                let grand_raw =
                    i64::from_be_bytes(bytes[11 + count * 8..].try_into().unwrap());
                Ok(Transaction::Settle { height, payouts, grand_raw })
            }
            4 => {
                need(12)?;
                let phase = bytes[9];
                let len = u16::from_be_bytes(bytes[10..12].try_into().unwrap()) as usize;
                if bytes.len() != 12 + len {
                    return Err("bad abort length".into());
                }
                let reason = String::from_utf8(bytes[12..].to_vec())
                    .map_err(|_| "abort reason is not utf-8".to_string())?;
                Ok(Transaction::Abort { height, phase, reason })
            }
            other => Err(format!("unknown transaction kind {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub t_block: u64,
    pub tx_hash: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Anchored<T> {
    value: T,
    t_block: u64,
    tx_hash: Digest,
}

/// Joined per-coalition anchor view, available once both commitments exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRecord {
    pub coalition: CoalitionMask,
    pub cid: Cid,
    pub value_hash: Digest,
    pub cid_anchor: TxReceipt,
    pub value_anchor: TxReceipt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementStatus {
    Settled,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub status: SettlementStatus,
    pub payouts: Vec<FixedValue>,
    pub tx_hash: Digest,
    pub reason: Option<String>,
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Ledger {
    gas_model: GasModel,
    allow_deficit: bool,
    next_height: u64,
    cids: BTreeMap<u32, Anchored<Cid>>,
    value_hashes: BTreeMap<u32, Anchored<Digest>>,
    settlement: Option<Settlement>,
    aborts: Vec<(u8, String)>,
    journal: Vec<Transaction>,
    transcript: Digest,
    gas_used: u64,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new(GasModel::default(), false)
    }
}

impl Ledger {
    pub fn new(gas_model: GasModel, allow_deficit: bool) -> Self {
        Ledger {
            gas_model,
            allow_deficit,
            next_height: 1,
            cids: BTreeMap::new(),
            value_hashes: BTreeMap::new(),
            settlement: None,
            aborts: Vec::new(),
            journal: Vec::new(),
            transcript: sha256(&[b"LEDGER"]),
            gas_used: 0,
        }
    }

    pub fn gas_model(&self) -> &GasModel {
        &self.gas_model
    }

    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    pub fn height(&self) -> u64 {
        self.next_height - 1
    }

    pub fn settlement(&self) -> Option<&Settlement> {
        self.settlement.as_ref()
    }

    pub fn aborts(&self) -> &[(u8, String)] {
        &self.aborts
    }

    pub fn journal(&self) -> &[Transaction] {
        &self.journal
    }

    /// Running transcript digest over all applied transactions; serves as
    /// the ledger state digest for replay comparison.
    pub fn state_digest(&self) -> Digest {
        self.transcript
    }

    fn apply(&mut self, tx: Transaction) -> Result<TxReceipt, LedgerError> {
        debug_assert_eq!(tx.height(), self.next_height);
        match &tx {
            Transaction::CommitCid { coalition, cid, .. } => {
                if self.cids.contains_key(&coalition.0) {
                    return Err(LedgerError::DuplicateCommit { coalition: *coalition });
                }
                self.cids.insert(
                    coalition.0,
                    Anchored { value: *cid, t_block: tx.height(), tx_hash: tx.tx_hash() },
                );
                self.gas_used += self.gas_model.storage_write;
            }
            Transaction::CommitValueHash { coalition, hash, .. } => {
                if self.value_hashes.contains_key(&coalition.0) {
                    return Err(LedgerError::DuplicateCommit { coalition: *coalition });
                }
                self.value_hashes.insert(
                    coalition.0,
                    Anchored { value: *hash, t_block: tx.height(), tx_hash: tx.tx_hash() },
                );
                self.gas_used += self.gas_model.storage_write;
            }
            Transaction::Settle { payouts, .. } => {
                self.settlement = Some(Settlement {
                    status: SettlementStatus::Settled,
                    payouts: payouts.iter().map(|&p| FixedValue::from_raw(p)).collect(),
                    tx_hash: tx.tx_hash(),
                    reason: None,
                });
                self.gas_used += self.gas_model.verify_constant;
            }
            Transaction::Abort { phase, reason, .. } => {
                self.aborts.push((*phase, reason.clone()));
            }
        }
        let receipt = TxReceipt { t_block: tx.height(), tx_hash: tx.tx_hash() };
        self.transcript = sha256(&[b"LSTEP", &self.transcript.0, &receipt.tx_hash.0]);
        self.journal.push(tx);
        self.next_height += 1;
        Ok(receipt)
    }

    pub fn commit_cid(&mut self, coalition: CoalitionMask, cid: Cid) -> Result<TxReceipt, LedgerError> {
        if self.cids.contains_key(&coalition.0) {
            return Err(LedgerError::DuplicateCommit { coalition });
        }
        self.apply(Transaction::CommitCid { height: self.next_height, coalition, cid })
    }

    pub fn commit_value_hash(
        &mut self,
        coalition: CoalitionMask,
        hash: Digest,
    ) -> Result<TxReceipt, LedgerError> {
        if self.value_hashes.contains_key(&coalition.0) {
            return Err(LedgerError::DuplicateCommit { coalition });
        }
        self.apply(Transaction::CommitValueHash { height: self.next_height, coalition, hash })
    }

    pub fn get_cid(&self, coalition: CoalitionMask) -> Result<Cid, LedgerError> {
        self.cids
            .get(&coalition.0)
            .map(|a| a.value)
            .ok_or(LedgerError::MissingCommitment { coalition })
    }

    pub fn get_value_hash(&self, coalition: CoalitionMask) -> Result<Digest, LedgerError> {
        self.value_hashes
            .get(&coalition.0)
            .map(|a| a.value)
            .ok_or(LedgerError::MissingCommitment { coalition })
    }

    pub fn commitment(&self, coalition: CoalitionMask) -> Option<CommitmentRecord> {
        let cid = self.cids.get(&coalition.0)?;
        let vh = self.value_hashes.get(&coalition.0)?;
        Some(CommitmentRecord {
            coalition,
            cid: cid.value,
            value_hash: vh.value,
            cid_anchor: TxReceipt { t_block: cid.t_block, tx_hash: cid.tx_hash },
            value_anchor: TxReceipt { t_block: vh.t_block, tx_hash: vh.tx_hash },
        })
    }

    /// Records an abort transaction (pipeline phase and reason).
    pub fn record_abort(&mut self, phase: u8, reason: &str) -> TxReceipt {
        self.apply(Transaction::Abort {
            height: self.next_height,
            phase,
            reason: reason.to_string(),
        })
        .expect("abort transactions cannot conflict")
    }

    fn abort_settlement(&mut self, reason: &str) -> Settlement {
        let receipt = self.record_abort(4, reason);
        let settlement = Settlement {
            status: SettlementStatus::Aborted,
            payouts: Vec::new(),
            tx_hash: receipt.tx_hash,
            reason: Some(reason.to_string()),
        };
        self.settlement = Some(settlement.clone());
        settlement
    }

    /// On-chain verification and settlement. Checks the public inputs
    /// against the committed anchors first, then verifies the proof, then
    /// settles the allocation, charging the constant verification cost.
    pub fn verify_and_settle(&mut self, proof: &Proof, public: &PublicInputs) -> Settlement {
        let n = public.allocations.len();
        let coalition_count = 1usize.checked_shl(n as u32).unwrap_or(0);
        if n == 0
            || n > crate::circuit::MAX_AGENTS
            || public.output_hash_cids.len() != coalition_count
            || public.value_hashes.len() != coalition_count
            || self.cids.len() != coalition_count
            || self.value_hashes.len() != coalition_count
        {
            return self.abort_settlement(ABORT_DIVERGENCE);
        }
        for mask in 0..coalition_count as u32 {
            let anchored_cid = match self.cids.get(&mask) {
                Some(a) => a.value,
                None => return self.abort_settlement(ABORT_DIVERGENCE),
            };
            let anchored_hash = match self.value_hashes.get(&mask) {
                Some(a) => a.value,
                None => return self.abort_settlement(ABORT_DIVERGENCE),
            };
            if public.output_hash_cids[mask as usize] != anchored_cid
                || public.value_hashes[mask as usize] != anchored_hash
            {
                return self.abort_settlement(ABORT_DIVERGENCE);
            }
        }
        let cs = match build_constraints(n) {
            Ok(cs) => cs,
            Err(_) => return self.abort_settlement(ABORT_DIVERGENCE),
        };
        if !verify(proof, public, &cs) {
            return self.abort_settlement(ABORT_PROOF_INVALID);
        }
        // Final on-chain efficiency check over public inputs alone.
        let total: i128 = public.allocations.iter().map(|p| p.raw() as i128).sum();
        if total != public.grand_value.raw() as i128 {
            return self.abort_settlement(ABORT_PROOF_INVALID);
        }
        if !self.allow_deficit && public.allocations.iter().any(|p| p.raw() < 0) {
            return self.abort_settlement(ABORT_UNSETTLEABLE);
        }
        let payouts: Vec<i64> = public.allocations.iter().map(|p| p.raw()).collect();
        let receipt = self
            .apply(Transaction::Settle {
                height: self.next_height,
                payouts,
                grand_raw: public.grand_value.raw(),
            })
            .expect("settle transactions cannot conflict");
        let settlement = Settlement {
            status: SettlementStatus::Settled,
            payouts: public.allocations.clone(),
            tx_hash: receipt.tx_hash,
            reason: None,
        };
        self.settlement = Some(settlement.clone());
        settlement
    }

    pub fn gas_report(&self, n: usize) -> GasReport {
        self.gas_model.report(n)
    }

    /// Line-delimited journal: one hex transaction per line, then a final
    /// `#`-prefixed line holding the hex terminal state digest.
    pub fn journal_string(&self) -> String {
        let mut out = String::new();
        for tx in &self.journal {
            out.push_str(&hex::encode(tx.canonical_bytes()));
            out.push('\n');
        }
        out.push('#');
        out.push_str(&self.state_digest().to_hex());
        out.push('\n');
        out
    }

    /// Rebuilds a ledger from a journal, checking every transaction and
    /// the terminal state digest. The first divergent line is reported.
    pub fn replay_journal(text: &str) -> Result<Ledger, ReplayError> {
        let mut ledger = Ledger::default();
        let mut saw_terminal = false;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if saw_terminal {
                return Err(ReplayError::Divergence {
                    line: lineno,
                    reason: "content after terminal state digest".into(),
                });
            }
            if let Some(hex_digest) = line.strip_prefix('#') {
                let expected = Digest::from_hex(hex_digest).ok_or(ReplayError::Divergence {
                    line: lineno,
                    reason: "malformed terminal state digest".into(),
                })?;
                let got = ledger.state_digest();
                if got != expected {
                    return Err(ReplayError::Divergence {
                        line: lineno,
                        reason: format!(
                            "terminal state digest mismatch: journal {expected}, replay {got}"
                        ),
                    });
                }
                saw_terminal = true;
                continue;
            }
            let bytes = hex::decode(line).map_err(|_| ReplayError::Divergence {
                line: lineno,
                reason: "line is not hex".into(),
            })?;
            let tx = Transaction::from_bytes(&bytes).map_err(|reason| ReplayError::Divergence {
                line: lineno,
                reason,
            })?;
            if tx.height() != ledger.next_height {
                return Err(ReplayError::Divergence {
                    line: lineno,
                    reason: format!(
                        "height {} does not follow ledger height {}",
                        tx.height(),
                        ledger.next_height - 1
                    ),
                });
            }
            ledger.apply(tx).map_err(|e| ReplayError::Divergence {
                line: lineno,
                reason: e.to_string(),
            })?;
        }
        if !saw_terminal && !ledger.journal.is_empty() {
            return Err(ReplayError::Divergence {
                line: text.lines().count() + 1,
                reason: "journal is missing its terminal state digest".into(),
            });
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cid_of(tag: &[u8]) -> Cid {
        Cid { digest: sha256(&[b"test", tag]) }
    }

    #[test]
    fn commits_increase_heights_and_reject_duplicates() {
        let mut ledger = Ledger::default();
        let r1 = ledger.commit_cid(CoalitionMask(0b011), cid_of(b"a")).unwrap();
        assert_eq!(r1.t_block, 1);
        let r2 = ledger.commit_value_hash(CoalitionMask(0b011), sha256(&[b"v"])).unwrap();
        assert_eq!(r2.t_block, 2);
        assert!(matches!(
            ledger.commit_cid(CoalitionMask(0b011), cid_of(b"b")),
            Err(LedgerError::DuplicateCommit { .. })
        ));
        // The value-hash namespace is separate from the cid namespace.
        assert!(ledger.commit_value_hash(CoalitionMask(0b100), sha256(&[b"w"])).is_ok());
        assert_eq!(ledger.get_cid(CoalitionMask(0b011)).unwrap(), cid_of(b"a"));
        assert!(ledger.get_cid(CoalitionMask(0b111)).is_err());
    }

    #[test]
    fn full_enumeration_strictly_increases_heights() {
        let mut ledger = Ledger::default();
        let mut last = 0;
        for mask in 0..16u32 {
            let r = ledger.commit_cid(CoalitionMask(mask), cid_of(&mask.to_be_bytes())).unwrap();
            assert!(r.t_block > last);
            last = r.t_block;
        }
        for mask in 0..16u32 {
            let r = ledger
                .commit_value_hash(CoalitionMask(mask), sha256(&[&mask.to_be_bytes()]))
                .unwrap();
            assert!(r.t_block > last);
            last = r.t_block;
        }
        assert_eq!(ledger.height(), 32);
    }

    #[test]
    fn journal_roundtrip_reproduces_state_and_hashes() {
        let mut ledger = Ledger::default();
        ledger.commit_cid(CoalitionMask(0), cid_of(b"0")).unwrap();
        ledger.commit_cid(CoalitionMask(1), cid_of(b"1")).unwrap();
        ledger.commit_value_hash(CoalitionMask(0), sha256(&[b"x"])).unwrap();
        ledger.record_abort(2, "coalition 0b1 failed its output check");
        let text = ledger.journal_string();
        let replayed = Ledger::replay_journal(&text).unwrap();
        assert_eq!(replayed.state_digest(), ledger.state_digest());
        assert_eq!(replayed.journal(), ledger.journal());
        assert_eq!(replayed.aborts().len(), 1);
    }

    #[test]
    fn truncated_journal_is_divergent() {
        let mut ledger = Ledger::default();
        ledger.commit_cid(CoalitionMask(0), cid_of(b"0")).unwrap();
        ledger.commit_cid(CoalitionMask(1), cid_of(b"1")).unwrap();
        let text = ledger.journal_string();
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            Ledger::replay_journal(&truncated),
            Err(ReplayError::Divergence { .. })
        ));
        // Tampering a committed line also diverges: the forged digest no
        // longer matches the recomputed transcript.
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[0] = lines[0].replace("01", "02");
        let forged = lines.join("\n");
        assert!(Ledger::replay_journal(&forged).is_err());
    }

    #[test]
    fn empty_journal_replays_to_empty_state() {
        let ledger = Ledger::replay_journal("").unwrap();
        assert_eq!(ledger.height(), 0);
        // An empty journal with just the terminal digest is also clean.
        let fresh = Ledger::default();
        let text = fresh.journal_string();
        assert!(Ledger::replay_journal(&text).is_ok());
    }

    #[test]
    fn default_gas_model_matches_published_endpoints() {
        let model = GasModel::default();
        let r4 = model.report(4);
        assert_eq!(r4.baseline, 367_000);
        assert_eq!(r4.hybrid, 27_000);
        assert!((r4.reduction - 0.926_430).abs() < 1e-4);
        let r6 = model.report(6);
        assert_eq!(r6.baseline, 1_330_000);
    }

    #[test]
    fn degenerate_model_reports_zero_reduction() {
        let mut model = GasModel::default();
        model.verify_constant = model.baseline_units(4).round() as u64;
        let r = model.report(4);
        assert!(r.reduction.abs() < 1e-9);
    }

    #[test]
    fn gas_model_toml_roundtrip() {
        let text = r#"
            verify_constant = 27000
            onchain_base = 46000.0
            onchain_per_coalition = 20062.5
            storage_write = 20000
        "#;
        let model = GasModel::from_toml_str(text).unwrap();
        assert_eq!(model.verify_constant, 27_000);
        assert_eq!(model.hash_unit, default_hash_unit());
        assert!(GasModel::from_toml_str("verify_constant = \"x\"").is_err());
    }
}
