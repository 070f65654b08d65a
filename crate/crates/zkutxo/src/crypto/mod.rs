//! Deterministic cryptographic primitives: the 256-bit hash, the hash-based
//! key map, the deterministic sealed box used for audit data, the grabber-key
//! binding, and the append-only Merkle commitment tree.

pub mod domain;
mod keys;
mod merkle;
mod seal;

use sha2::{Digest as _, Sha256};

pub use keys::{
    account_of, create_grabber_key, derive_public_key, get_account, verify_binding, KeyError,
};
pub use merkle::{fold_path, CommitmentTree, MerkleError, MerklePath, MerkleStep};
pub use seal::{open_with_key, seal_to_key, SealedBox};

use crate::types::Digest;

/// The system-wide 256-bit hash. SHA-256 over the raw input bytes; callers
/// apply domain-separation prefixes from [`domain`].
pub fn hash256(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hashes `tag || parts...` in one pass.
pub(crate) fn hash_tagged(tag: &[u8], parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(tag);
    for p in parts {
        hasher.update(p);
    }
    Digest(hasher.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enc::Encoder;
    use crate::types::U256;

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(hash256(b"x"), hash256(b"x"));
        assert_ne!(hash256(b"x"), hash256(b"x\0"));
    }

    #[test]
    fn golden_vector_tuple_5_7() {
        // Frozen from an independent oracle run; see vectors/golden.json.
        let mut enc = Encoder::new();
        enc.put_u256(&U256::from(5u64));
        enc.put_u256(&U256::from(7u64));
        let got = hash256(&enc.into_bytes());
        assert_eq!(
            got.to_hex(),
            "0x8a2e8355525fe8ad65b1664f85f6d6bcfc018aa31178c3a9314a503aea66a0b4"
        );
    }
}
