//! Pluggable proof backend behind the circuit predicates.
//!
//! The reference backend is transparent, not zero-knowledge: a proof is a
//! domain-tagged hash binding the circuit id, the canonical public inputs,
//! and the witness digest. Completeness holds (a satisfied predicate always
//! yields a verifying proof) and public-input binding holds (verification
//! fails if any public field differs from the proven one). Knowledge
//! soundness and zero knowledge are explicitly not claimed; a real SNARK
//! backend slots in behind [`ProofSystem`].

use serde::{Deserialize, Serialize};

use crate::crypto::{domain, hash256, hash_tagged};
use crate::enc::{Decoder, Encode, Encoder};
use crate::types::Digest;

/// Registry of circuit identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CircuitId {
    #[serde(rename = "mint")]
    Mint,
    #[serde(rename = "transfer")]
    Transfer,
    #[serde(rename = "revealing")]
    Revealing,
    #[serde(rename = "hiding")]
    Hiding,
    #[serde(rename = "grab")]
    Grab,
    #[serde(rename = "del_mint")]
    DelegatedMint,
    #[serde(rename = "del_transfer")]
    DelegatedTransfer,
    #[serde(rename = "del_revealing")]
    DelegatedRevealing,
    #[serde(rename = "del_hiding")]
    DelegatedHiding,
    #[serde(rename = "dvp")]
    Dvp,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown circuit id: {0}")]
pub struct UnknownCircuit(pub String);

impl CircuitId {
    pub const ALL: [CircuitId; 10] = [
        CircuitId::Mint,
        CircuitId::Transfer,
        CircuitId::Revealing,
        CircuitId::Hiding,
        CircuitId::Grab,
        CircuitId::DelegatedMint,
        CircuitId::DelegatedTransfer,
        CircuitId::DelegatedRevealing,
        CircuitId::DelegatedHiding,
        CircuitId::Dvp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CircuitId::Mint => "mint",
            CircuitId::Transfer => "transfer",
            CircuitId::Revealing => "revealing",
            CircuitId::Hiding => "hiding",
            CircuitId::Grab => "grab",
            CircuitId::DelegatedMint => "del_mint",
            CircuitId::DelegatedTransfer => "del_transfer",
            CircuitId::DelegatedRevealing => "del_revealing",
            CircuitId::DelegatedHiding => "del_hiding",
            CircuitId::Dvp => "dvp",
        }
    }

    pub fn parse(s: &str) -> Result<CircuitId, UnknownCircuit> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCircuit(s.to_string()))
    }
}

impl std::fmt::Display for CircuitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A proof over one circuit instance. The binding digest covers the circuit
/// id, the canonical public inputs, and the witness digest; the witness
/// digest travels with the proof so verification stays stateless.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub circuit_id: CircuitId,
    pub witness_digest: Digest,
    pub binding: Digest,
}

impl Proof {
    /// Fixed binary layout: length-prefixed circuit id, then the 32-byte
    /// binding, then the 32-byte witness digest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.circuit_id.as_str().as_bytes();
        let mut out = Vec::with_capacity(8 + id.len() + 64);
        out.extend_from_slice(&(id.len() as u64).to_be_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.binding.0);
        out.extend_from_slice(&self.witness_digest.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Proof, ProofDecodeError> {
        let mut dec = Decoder::new(bytes);
        let id_bytes = dec.take_bytes()?;
        let id_str = std::str::from_utf8(&id_bytes).map_err(|_| {
            ProofDecodeError::Unknown(UnknownCircuit(format!("{:?}", id_bytes)))
        })?;
        let circuit_id = CircuitId::parse(id_str)?;
        let binding = dec.take_digest()?;
        let witness_digest = dec.take_digest()?;
        dec.finish()?;
        Ok(Proof {
            circuit_id,
            witness_digest,
            binding,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProofDecodeError {
    #[error(transparent)]
    Decode(#[from] crate::enc::DecodeError),
    #[error(transparent)]
    Unknown(#[from] UnknownCircuit),
}

impl Encode for Proof {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_bytes(&self.to_bytes());
    }
}

/// The seam for proof backends. `public` and `witness` are canonical
/// encodings; the circuit predicates have already been checked by the time
/// `prove` runs.
pub trait ProofSystem: Send + Sync {
    fn prove(&self, circuit: CircuitId, public: &[u8], witness: &[u8]) -> Proof;
    fn verify(&self, proof: &Proof, circuit: CircuitId, public: &[u8]) -> bool;
}

/// Transparent hash-binding backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceBackend;

fn binding_digest(circuit: CircuitId, public: &[u8], witness_digest: &Digest) -> Digest {
    let id = circuit.as_str().as_bytes();
    hash_tagged(
        domain::DS_PROOF,
        &[
            &(id.len() as u64).to_be_bytes(),
            id,
            &(public.len() as u64).to_be_bytes(),
            public,
            &witness_digest.0,
        ],
    )
}

impl ProofSystem for ReferenceBackend {
    fn prove(&self, circuit: CircuitId, public: &[u8], witness: &[u8]) -> Proof {
        let witness_digest = hash256(witness);
        Proof {
            circuit_id: circuit,
            binding: binding_digest(circuit, public, &witness_digest),
            witness_digest,
        }
    }

    fn verify(&self, proof: &Proof, circuit: CircuitId, public: &[u8]) -> bool {
        proof.circuit_id == circuit
            && proof.binding == binding_digest(circuit, public, &proof.witness_digest)
    }
}

/// Registry-style verification keyed by circuit-id strings.
pub fn verify_by_id(
    backend: &dyn ProofSystem,
    circuit_id: &str,
    proof: &Proof,
    public: &[u8],
) -> Result<bool, UnknownCircuit> {
    let id = CircuitId::parse(circuit_id)?;
    Ok(backend.verify(proof, id, public))
}
