//! Commit-reveal for round records.

use sha2::{Digest, Sha256};
use threebox::RoundRecord;

/// Canonical serialization: compact JSON with fields in declaration order.
pub fn canonical_record(record: &RoundRecord) -> String {
    serde_json::to_string(record).expect("round records always serialize")
}

/// Fresh 128-bit salt as 32 lowercase hex digits.
pub fn new_salt() -> String {
    format!("{:032x}", rand::random::<u128>())
}

/// Lowercase hex SHA-256 of `salt ‖ canonical`.
pub fn commitment_hash(salt: &str, canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(canonical.as_bytes());
    hex::encode(h.finalize())
}

pub fn verify(commitment: &str, salt: &str, canonical: &str) -> bool {
    commitment_hash(salt, canonical) == commitment
}
