//! Content-addressed storage and the dual hash commitment over agent
//! outputs and coalition values.
//!
//! Every hash is SHA-256 over domain-separated bytes; the tags ("OUT",
//! "VAL", "SET", and the Merkle tags in `proof`) keep digests from one
//! context from being replayed in another. Digest sets are sorted before
//! serialization, so commitment is order-insensitive.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::StoreError;
use crate::game::{AgentId, CoalitionMask, FixedValue};

/// 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..8])
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
    }
}

pub(crate) fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// One agent's output for one coalition run: the canonical payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputRecord {
    agent: AgentId,
    payload: Vec<u8>,
}

impl OutputRecord {
    pub fn new(agent: AgentId, payload: Vec<u8>) -> Result<Self, StoreError> {
        if payload.is_empty() {
            return Err(StoreError::EmptyPayload);
        }
        Ok(OutputRecord { agent, payload })
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Test/adversary hook: flips one payload byte in place.
    pub fn corrupt_byte(&mut self, index: usize) {
        let i = index % self.payload.len();
        self.payload[i] ^= 0x01;
    }
}

/// SHA-256 over `"OUT" || agent index (u16 BE) || payload len (u32 BE) || payload`.
pub fn hash_output(record: &OutputRecord) -> Digest {
    sha256(&[
        b"OUT",
        &record.agent.0.to_be_bytes(),
        &(record.payload.len() as u32).to_be_bytes(),
        &record.payload,
    ])
}

/// SHA-256 over `"VAL" || coalition mask (u32 BE) || raw value (i64 BE)`.
pub fn hash_value(value: FixedValue, coalition: CoalitionMask) -> Digest {
    sha256(&[b"VAL", &coalition.0.to_be_bytes(), &value.raw().to_be_bytes()])
}

/// Sorted, duplicate-free set of output digests for one coalition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestSet {
    entries: Vec<Digest>,
}

impl DigestSet {
    pub fn from_digests(mut digests: Vec<Digest>) -> Self {
        digests.sort();
        digests.dedup();
        DigestSet { entries: digests }
    }

    pub fn from_records(records: &[OutputRecord]) -> Self {
        Self::from_digests(records.iter().map(hash_output).collect())
    }

    pub fn entries(&self) -> &[Digest] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical serialization: `"SET" || count (u32 BE) || digests`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + self.entries.len() * 32);
        out.extend_from_slice(b"SET");
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for d in &self.entries {
            out.extend_from_slice(&d.0);
        }
        out
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < 7 || &bytes[0..3] != b"SET" {
            return Err(StoreError::Malformed);
        }
        let count = u32::from_be_bytes(bytes[3..7].try_into().unwrap()) as usize;
        if bytes.len() != 7 + count * 32 {
            return Err(StoreError::Malformed);
        }
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let mut arr = [0u8; 32];
            arr.copy_from_slice(&bytes[7 + i * 32..7 + (i + 1) * 32]);
            entries.push(Digest(arr));
        }
        // Reject non-canonical order so that equal content always has
        // equal bytes.
        for w in entries.windows(2) {
            if w[0] >= w[1] {
                return Err(StoreError::Malformed);
            }
        }
        Ok(DigestSet { entries })
    }
}

/// Content identifier: digest of a `DigestSet`'s canonical serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cid {
    pub digest: Digest,
}

impl Cid {
    pub fn of_set(set: &DigestSet) -> Cid {
        Cid { digest: sha256(&[&set.canonical_bytes()]) }
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.digest.fmt(f)
    }
}

/// In-process content-addressed store standing in for a distributed one.
/// Objects are keyed by the digest of their bytes; storage is idempotent
/// and reads re-verify the digest. With a persist directory, objects are
/// also written to disk as files named by their hex cid.
#[derive(Debug, Default)]
pub struct ContentStore {
    objects: BTreeMap<Digest, Vec<u8>>,
    persist_dir: Option<PathBuf>,
}

impl ContentStore {
    pub fn new() -> Self {
        ContentStore::default()
    }

    pub fn with_persist_dir(dir: PathBuf) -> Result<Self, StoreError> {
        std::fs::create_dir_all(&dir)?;
        Ok(ContentStore { objects: BTreeMap::new(), persist_dir: Some(dir) })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn store_hashset(&mut self, set: &DigestSet) -> Result<Cid, StoreError> {
        let bytes = set.canonical_bytes();
        let cid = Cid { digest: sha256(&[&bytes]) };
        if let Some(dir) = &self.persist_dir {
            if !self.objects.contains_key(&cid.digest) {
                std::fs::write(dir.join(cid.digest.to_hex()), &bytes)?;
            }
        }
        self.objects.entry(cid.digest).or_insert(bytes);
        Ok(cid)
    }

    pub fn retrieve(&self, cid: Cid) -> Result<DigestSet, StoreError> {
        let bytes = match self.objects.get(&cid.digest) {
            Some(b) => b.clone(),
            None => match &self.persist_dir {
                Some(dir) => {
                    let path = dir.join(cid.digest.to_hex());
                    if !path.exists() {
                        return Err(StoreError::NotFound { cid: cid.to_string() });
                    }
                    std::fs::read(path)?
                }
                None => return Err(StoreError::NotFound { cid: cid.to_string() }),
            },
        };
        if sha256(&[&bytes]) != cid.digest {
            return Err(StoreError::Corrupt { cid: cid.to_string() });
        }
        DigestSet::from_canonical_bytes(&bytes)
    }

    /// Fault-injection hook: overwrites the bytes stored under `cid`
    /// without recomputing the key. Retrieval then fails the digest check.
    pub fn put_raw_unchecked(&mut self, cid: Cid, bytes: Vec<u8>) {
        if let Some(dir) = &self.persist_dir {
            let _ = std::fs::write(dir.join(cid.digest.to_hex()), &bytes);
        }
        self.objects.insert(cid.digest, bytes);
    }
}

/// The Accept predicate: true iff the candidate records' digest set equals
/// the committed set behind `cid` exactly.
pub fn accept_outputs(
    candidate: &[OutputRecord],
    cid: Cid,
    store: &ContentStore,
) -> Result<bool, StoreError> {
    let committed = store.retrieve(cid)?;
    Ok(DigestSet::from_records(candidate) == committed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(agent: u16, payload: &[u8]) -> OutputRecord {
        OutputRecord::new(AgentId(agent), payload.to_vec()).unwrap()
    }

    #[test]
    fn output_digest_matches_independent_reference() {
        // SHA-256("OUT" || 0u16 || 1u32 || "x"), precomputed externally.
        let d = hash_output(&rec(0, b"x"));
        assert_eq!(
            d.to_hex(),
            "986ffaaa4088241179e36ac2e34c71eda83c5a16a6fcb8cc0740d9d666021e49"
        );
    }

    #[test]
    fn output_digest_depends_on_payload_and_agent() {
        assert_eq!(hash_output(&rec(0, b"abc")), hash_output(&rec(0, b"abc")));
        assert_ne!(hash_output(&rec(0, b"abc")), hash_output(&rec(0, b"abd")));
        assert_ne!(hash_output(&rec(0, b"abc")), hash_output(&rec(1, b"abc")));
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(matches!(
            OutputRecord::new(AgentId(0), vec![]),
            Err(StoreError::EmptyPayload)
        ));
    }

    #[test]
    fn value_digest_depends_on_coalition() {
        let v = FixedValue::from_raw(123_456);
        let a = hash_value(v, CoalitionMask(0b01));
        let b = hash_value(v, CoalitionMask(0b11));
        assert_ne!(a, b);
        assert_eq!(a, hash_value(v, CoalitionMask(0b01)));
        assert_ne!(a, hash_value(FixedValue::from_raw(123_457), CoalitionMask(0b01)));
    }

    #[test]
    fn store_is_idempotent_and_content_addressed() {
        let mut store = ContentStore::new();
        let set = DigestSet::from_records(&[rec(0, b"one"), rec(1, b"two")]);
        let cid1 = store.store_hashset(&set).unwrap();
        let cid2 = store.store_hashset(&set).unwrap();
        assert_eq!(cid1, cid2);
        assert_eq!(store.len(), 1);

        let other = DigestSet::from_records(&[rec(0, b"one")]);
        let cid3 = store.store_hashset(&other).unwrap();
        assert_ne!(cid1, cid3);
        assert_eq!(store.retrieve(cid1).unwrap(), set);
        assert_eq!(store.retrieve(cid3).unwrap(), other);
    }

    #[test]
    fn retrieve_unknown_cid_fails() {
        let store = ContentStore::new();
        let missing = Cid { digest: sha256(&[b"nothing here"]) };
        assert!(matches!(store.retrieve(missing), Err(StoreError::NotFound { .. })));
    }

    #[test]
    fn corrupted_object_detected_on_read() {
        let mut store = ContentStore::new();
        let set = DigestSet::from_records(&[rec(0, b"payload")]);
        let cid = store.store_hashset(&set).unwrap();
        let mut bytes = set.canonical_bytes();
        bytes[8] ^= 0xff;
        store.put_raw_unchecked(cid, bytes);
        assert!(matches!(store.retrieve(cid), Err(StoreError::Corrupt { .. })));
    }

    #[test]
    fn accept_is_order_insensitive() {
        let mut store = ContentStore::new();
        let a = rec(0, b"alpha");
        let b = rec(1, b"beta");
        let cid = store.store_hashset(&DigestSet::from_records(&[a.clone(), b.clone()])).unwrap();
        assert!(accept_outputs(&[b.clone(), a.clone()], cid, &store).unwrap());
        assert!(accept_outputs(&[a.clone(), b.clone()], cid, &store).unwrap());
    }

    #[test]
    fn accept_rejects_any_mutation() {
        let mut store = ContentStore::new();
        let a = rec(0, b"alpha");
        let b = rec(1, b"beta");
        let cid = store.store_hashset(&DigestSet::from_records(&[a.clone(), b.clone()])).unwrap();

        let mut tampered = a.clone();
        tampered.corrupt_byte(0);
        assert!(!accept_outputs(&[tampered, b.clone()], cid, &store).unwrap());
        assert!(!accept_outputs(&[a.clone()], cid, &store).unwrap());
        let extra = rec(2, b"gamma");
        assert!(!accept_outputs(&[a.clone(), b.clone(), extra], cid, &store).unwrap());
        // Swapping payloads between agents changes both digests because the
        // agent index is part of the hash domain.
        let swapped = [rec(0, b"beta"), rec(1, b"alpha")];
        assert!(!accept_outputs(&swapped, cid, &store).unwrap());
    }

    #[test]
    fn persisted_store_survives_reload() {
        let dir = tempfile::tempdir().unwrap();
        let set = DigestSet::from_records(&[rec(0, b"kept")]);
        let cid = {
            let mut store = ContentStore::with_persist_dir(dir.path().to_path_buf()).unwrap();
            store.store_hashset(&set).unwrap()
        };
        let fresh = ContentStore::with_persist_dir(dir.path().to_path_buf()).unwrap();
        assert_eq!(fresh.retrieve(cid).unwrap(), set);
    }
}
