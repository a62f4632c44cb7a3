use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// A (company, day) observation key. Every artifact in the pipeline —
/// articles, clean documents, labels, feature rows, scores — is joined on it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub pid: String,
    pub date: NaiveDate,
}

impl RowKey {
    pub fn new(pid: impl Into<String>, date: NaiveDate) -> Self {
        Self { pid: pid.into(), date }
    }
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.pid, self.date)
    }
}

/// Deterministic 64-bit string hash (FNV-1a). Used to derive per-document
/// RNG seeds that do not depend on processing order.
pub fn stable_hash64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a sub-seed from a master seed and a role tag, so one user-facing
/// seed deterministically fans out to splitting, SMOTE, LDA, etc.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    master ^ stable_hash64(tag).rotate_left(17)
}
