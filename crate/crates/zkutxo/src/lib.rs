//! Privacy-preserving UTXO token system.
//!
//! Tokens live as hash commitments in an append-only Merkle tree. Spending
//! publishes a nullifier (the commitment with the owner's secret key in the
//! owner slot) and a grabber (the grabber key in the same slot), so double
//! spends and seizures are detectable on-ledger without revealing token
//! contents. Ten constraint circuits cover mint, transfer/burn, revealing
//! and hiding transfers, grabs, their delegated variants, and DvP
//! settlement; a transparent reference backend turns satisfied predicates
//! into verifiable proofs behind a pluggable interface.
//!
//! Modules:
//! - [`crypto`]: hash, key map, deterministic sealed box, Merkle tree
//! - [`token`]: token preimage and its commitment/nullifier/grabber faces
//! - [`circuits`]: witness/public-input pairs, predicates, proof backend
//! - [`ledger`]: the token-contract state machine
//! - [`dvp`]: the DvP matching contract
//! - [`world`]: multi-contract container, snapshots, deterministic replay
//! - [`harness`]: multi-party scenario engine and audit tooling

pub mod circuits;
pub mod crypto;
pub mod dvp;
pub mod enc;
pub mod harness;
pub mod ledger;
pub mod token;
pub mod types;
pub mod world;

pub use types::{Account, Address, Digest, GrabberKey, HexBytes, PublicKey, SecretKey, U256};
