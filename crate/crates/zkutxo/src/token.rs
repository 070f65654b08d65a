//! The token preimage and its three public derivations: commitment,
//! nullifier, and grabber. All three are the same commitment hash over the
//! preimage with different values in the owner slot — the account for the
//! commitment, the owner's secret key for the nullifier, and the grabber key
//! for the grabber.
//!
//! Also defines the off-chain envelopes participants exchange over the
//! private channel (transfer, burn, and DvP preimages).

use serde::{Deserialize, Serialize};

use crate::crypto::{domain, get_account, hash_tagged, KeyError};
use crate::enc::{Encode, Encoder};
use crate::types::{u256_be, Account, Digest, GrabberKey, SecretKey, U256};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("secret key does not own this token")]
    NotOwner,
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// The private UTXO. A fungible token carries a nonzero `amount` and zero
/// `id`; a nonfungible token the reverse. Circuits enforce that rule at
/// their boundaries, not construction. Hidden tokens carry a random nonce;
/// revealed outputs fix it to zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPreimage {
    pub owner: Account,
    pub token_type: U256,
    pub nonce: U256,
    pub amount: U256,
    pub id: U256,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<u8>>,
}

impl TokenPreimage {
    pub fn fungible(owner: Account, token_type: U256, nonce: U256, amount: U256) -> Self {
        TokenPreimage {
            owner,
            token_type,
            nonce,
            amount,
            id: U256::zero(),
            payload: None,
        }
    }

    pub fn nonfungible(owner: Account, token_type: U256, nonce: U256, id: U256) -> Self {
        TokenPreimage {
            owner,
            token_type,
            nonce,
            amount: U256::zero(),
            id,
            payload: None,
        }
    }

    pub fn with_payload(mut self, payload: Vec<u8>) -> Self {
        self.payload = Some(payload);
        self
    }
}

impl Encode for TokenPreimage {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_account(&self.owner);
        enc.put_u256(&self.token_type);
        enc.put_u256(&self.nonce);
        enc.put_u256(&self.amount);
        enc.put_u256(&self.id);
        enc.put_opt_bytes(&self.payload);
    }
}

macro_rules! digest_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub Digest);

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.0.to_hex())
            }
        }

        impl Encode for $name {
            fn encode(&self, enc: &mut Encoder) {
                enc.put_digest(&self.0);
            }
        }
    };
}

digest_newtype!(
    /// Public face of an existing token; hides its contents.
    TokenCommitment
);
digest_newtype!(
    /// Publishing this spends the token unlinkably.
    TokenNullifier
);
digest_newtype!(
    /// Marks a token as seized (by the authority) or provably not yet
    /// seized (by the owner, when spending).
    TokenGrabber
);

/// Hash of the main token fields with an arbitrary 32-byte owner slot. The
/// slot is where the nullifier and grabber substitutions happen.
fn partial_commit_slot(owner_slot: &[u8; 32], t: &TokenPreimage) -> Digest {
    hash_tagged(
        domain::DS_COMMIT,
        &[
            owner_slot,
            &u256_be(&t.token_type),
            &u256_be(&t.amount),
            &u256_be(&t.id),
            &u256_be(&t.nonce),
        ],
    )
}

fn commit_slot(owner_slot: &[u8; 32], t: &TokenPreimage) -> Digest {
    let partial = partial_commit_slot(owner_slot, t);
    match &t.payload {
        None => partial,
        Some(p) => fold_payload(&partial, p),
    }
}

fn fold_payload(partial: &Digest, payload: &[u8]) -> Digest {
    hash_tagged(
        domain::DS_COMMIT_PAYLOAD,
        &[&partial.0, &(payload.len() as u64).to_be_bytes(), payload],
    )
}

/// Hash of the main fields (owner, type, amount, id, nonce); excludes the
/// payload.
pub fn partial_commit(t: &TokenPreimage) -> Digest {
    partial_commit_slot(t.owner.as_bytes(), t)
}

/// Token commitment: the partial hash, folded with the payload when one is
/// present.
pub fn commit(t: &TokenPreimage) -> TokenCommitment {
    TokenCommitment(commit_slot(t.owner.as_bytes(), t))
}

/// Recombines a partial hash and payload into the commitment, per the same
/// rule as [`commit`]. This is how a receiver recognizes a consumed token
/// from its nullifier preimage.
pub fn commit_from_parts(partial_hash: Digest, payload: Option<&[u8]>) -> TokenCommitment {
    match payload {
        None => TokenCommitment(partial_hash),
        Some(p) => TokenCommitment(fold_payload(&partial_hash, p)),
    }
}

/// Nullifier: the commitment of the token with the owner slot replaced by
/// the owner's secret key. Only the owner can produce it.
pub fn nullify(t: &TokenPreimage, sk: &SecretKey) -> Result<TokenNullifier, TokenError> {
    if get_account(sk)? != t.owner {
        return Err(TokenError::NotOwner);
    }
    Ok(TokenNullifier(commit_slot(&u256_be(&sk.0), t)))
}

/// Grabber: the commitment of the token with the owner slot replaced by the
/// grabber key. Possession of the correct key is the capability; both the
/// authority and the owner hold it.
pub fn grab_token(t: &TokenPreimage, gk: &GrabberKey) -> TokenGrabber {
    TokenGrabber(commit_slot(&u256_be(&gk.0), t))
}

/// Consumed-token disclosure inside a transfer preimage: the partial hash of
/// the nullified token plus a clear copy of its payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullifierPreimage {
    pub partial_hash: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_payload: Option<Vec<u8>>,
}

impl NullifierPreimage {
    pub fn of(t: &TokenPreimage) -> Self {
        NullifierPreimage {
            partial_hash: partial_commit(t),
            input_payload: t.payload.clone(),
        }
    }

    /// Commitment of the consumed token, rebuilt from the disclosed parts.
    pub fn recombine(&self) -> TokenCommitment {
        commit_from_parts(self.partial_hash, self.input_payload.as_deref())
    }
}

/// Off-chain envelope from payer to payee: the payee's new token preimages,
/// plus optionally the consumed tokens' nullifier preimages for payload
/// inspection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPreimage {
    pub outputs: Vec<TokenPreimage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<NullifierPreimage>>,
}

/// Off-chain envelope from payer to the authority requesting a withdrawal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurnPreimage {
    pub amount: U256,
    pub ids: Vec<U256>,
    pub nonce: U256,
}

/// Off-chain envelope exchanged between DvP counterparties: consumed-token
/// disclosures, the tokens this bank will transfer, and the tokens it
/// expects to receive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvpPreimage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<NullifierPreimage>>,
    pub outputs: Vec<TokenPreimage>,
    pub delivery: Vec<TokenPreimage>,
}
