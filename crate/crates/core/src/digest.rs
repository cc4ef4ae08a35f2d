//! SHA-256 helpers used to stamp artifacts and cache keys.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON encoding of `value`.
///
/// Only stable for types whose serialization order is fixed (structs,
/// `BTreeMap`, vectors). Never feed a `HashMap` through here.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(&bytes)
}
