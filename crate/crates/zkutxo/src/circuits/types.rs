//! Witness and public-input pairs for every circuit, plus the transaction
//! envelopes that carry public inputs together with their proofs.
//!
//! Canonical encodings follow field declaration order; optional fields carry
//! presence flags. The witness encodings matter beyond proof binding: the
//! burn commitment, the delegate binding, and the DvP binding all hash entire
//! witnesses.

use serde::{Deserialize, Serialize};

use crate::circuits::backend::Proof;
use crate::crypto::MerklePath;
use crate::enc::{Encode, Encoder};
use crate::token::{TokenCommitment, TokenGrabber, TokenNullifier, TokenPreimage};
use crate::types::{Account, Address, Digest, GrabberKey, HexBytes, PublicKey, SecretKey, U256};

/// A consumed token with its Merkle membership path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImgPath {
    pub img: TokenPreimage,
    pub path: MerklePath,
}

impl Encode for ImgPath {
    fn encode(&self, enc: &mut Encoder) {
        self.img.encode(enc);
        self.path.encode(enc);
    }
}

/// Private side of the mint circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintWitness {
    pub outputs: Vec<TokenPreimage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer_sk: Option<SecretKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer_path: Option<MerklePath>,
}

impl Encode for MintWitness {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.outputs);
        enc.put_opt(&self.issuer_sk);
        enc.put_opt(&self.issuer_path);
    }
}

/// Public side of the mint circuit. `issuer_root` present means a hidden
/// issuer proves membership in the issuer tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintPublicInputs {
    pub token_type: U256,
    pub comms: Vec<TokenCommitment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer_root: Option<Digest>,
}

impl Encode for MintPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u256(&self.token_type);
        enc.put_list(&self.comms);
        enc.put_opt(&self.issuer_root);
    }
}

/// Private side of the transfer/burn circuit. A zero `burn_amount` and empty
/// `burn_ids` mean nothing is withdrawn; the burn commitment is present
/// either way.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferWitness {
    pub inputs: Vec<ImgPath>,
    pub outputs: Vec<TokenPreimage>,
    pub sk: SecretKey,
    pub audit_pk: PublicKey,
    pub burn_amount: U256,
    pub burn_ids: Vec<U256>,
}

impl Encode for TransferWitness {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.inputs);
        enc.put_list(&self.outputs);
        enc.put_secret_key(&self.sk);
        enc.put_public_key(&self.audit_pk);
        enc.put_u256(&self.burn_amount);
        enc.put_list(&self.burn_ids);
    }
}

/// Public side of the transfer/burn circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPublicInputs {
    pub nulls: Vec<TokenNullifier>,
    pub grabs: Vec<TokenGrabber>,
    pub comms: Vec<TokenCommitment>,
    pub token_type: U256,
    pub root: Digest,
    pub grab_nonce: U256,
    pub burn_commitment: Digest,
    pub audit_account: Account,
    pub audit_data: HexBytes,
}

impl Encode for TransferPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.nulls);
        enc.put_list(&self.grabs);
        enc.put_list(&self.comms);
        enc.put_u256(&self.token_type);
        enc.put_digest(&self.root);
        enc.put_u256(&self.grab_nonce);
        enc.put_digest(&self.burn_commitment);
        enc.put_account(&self.audit_account);
        self.audit_data.encode(enc);
    }
}

/// Private side of the revealing transfer. `hidden_outputs` holds the
/// change that stays in the commitment pool. The auditor's public key is
/// carried so the audit data equality can be recomputed in-circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealingWitness {
    pub inputs: Vec<ImgPath>,
    pub sk: SecretKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_outputs: Option<Vec<TokenPreimage>>,
    pub audit_pk: PublicKey,
}

impl Encode for RevealingWitness {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.inputs);
        enc.put_secret_key(&self.sk);
        match &self.hidden_outputs {
            None => enc.put_bool(false),
            Some(outputs) => {
                enc.put_bool(true);
                enc.put_list(outputs);
            }
        }
        enc.put_public_key(&self.audit_pk);
    }
}

/// Public side of the revealing transfer. Clear outputs are full preimages
/// with zero nonces; their owners must be registered contract accounts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealingPublicInputs {
    pub nulls: Vec<TokenNullifier>,
    pub grabs: Vec<TokenGrabber>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_comms: Option<Vec<TokenCommitment>>,
    pub clear_outputs: Vec<TokenPreimage>,
    pub token_type: U256,
    pub root: Digest,
    pub grab_nonce: U256,
    pub audit_data: HexBytes,
    pub audit_account: Account,
}

impl Encode for RevealingPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.nulls);
        enc.put_list(&self.grabs);
        match &self.hidden_comms {
            None => enc.put_bool(false),
            Some(comms) => {
                enc.put_bool(true);
                enc.put_list(comms);
            }
        }
        enc.put_list(&self.clear_outputs);
        enc.put_u256(&self.token_type);
        enc.put_digest(&self.root);
        enc.put_u256(&self.grab_nonce);
        self.audit_data.encode(enc);
        enc.put_account(&self.audit_account);
    }
}

/// Private side of the hiding transfer. `sk` is needed only when the public
/// inputs name the consumed account.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HidingWitness {
    pub outputs: Vec<TokenPreimage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sk: Option<SecretKey>,
    pub audit_pk: PublicKey,
}

impl Encode for HidingWitness {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.outputs);
        enc.put_opt(&self.sk);
        enc.put_public_key(&self.audit_pk);
    }
}

/// Public side of the hiding transfer. Zero `amount_in` and empty `ids_in`
/// mean that side is unused; `account_in` absent means the caller's account
/// is consumed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HidingPublicInputs {
    pub amount_in: U256,
    pub ids_in: Vec<U256>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account_in: Option<Account>,
    pub comms: Vec<TokenCommitment>,
    pub token_type: U256,
    pub audit_data: HexBytes,
    pub audit_account: Account,
}

impl Encode for HidingPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u256(&self.amount_in);
        enc.put_list(&self.ids_in);
        enc.put_opt(&self.account_in);
        enc.put_list(&self.comms);
        enc.put_u256(&self.token_type);
        self.audit_data.encode(enc);
        enc.put_account(&self.audit_account);
    }
}

/// Private side of the grab circuit: the authority seizes tokens using the
/// owner's grabber key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrabWitness {
    pub inputs: Vec<ImgPath>,
    pub outputs: Vec<TokenPreimage>,
    pub auth_sk: SecretKey,
    pub owner_pk: PublicKey,
    pub grabber_key: GrabberKey,
}

impl Encode for GrabWitness {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.inputs);
        enc.put_list(&self.outputs);
        enc.put_secret_key(&self.auth_sk);
        enc.put_public_key(&self.owner_pk);
        enc.put_grabber_key(&self.grabber_key);
    }
}

/// Public side of the grab circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrabPublicInputs {
    pub grabs: Vec<TokenGrabber>,
    pub comms: Vec<TokenCommitment>,
    pub token_type: U256,
    pub root: Digest,
    pub grab_nonce: U256,
    pub auth_account: Account,
}

impl Encode for GrabPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_list(&self.grabs);
        enc.put_list(&self.comms);
        enc.put_u256(&self.token_type);
        enc.put_digest(&self.root);
        enc.put_u256(&self.grab_nonce);
        enc.put_account(&self.auth_account);
    }
}

/// Delegated envelope around any public-input block: the proof only
/// satisfies the delegated circuit when `binding` ties the delegate address
/// to the witness hash, so only that address can submit it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delegated<P> {
    pub inner: P,
    pub delegate: Address,
    pub binding: Digest,
}

impl<P: Encode> Encode for Delegated<P> {
    fn encode(&self, enc: &mut Encoder) {
        self.inner.encode(enc);
        enc.put_address(&self.delegate);
        enc.put_digest(&self.binding);
    }
}

pub type DelegatedMintPublicInputs = Delegated<MintPublicInputs>;
pub type DelegatedTransferPublicInputs = Delegated<TransferPublicInputs>;
pub type DelegatedRevealingPublicInputs = Delegated<RevealingPublicInputs>;
pub type DelegatedHidingPublicInputs = Delegated<HidingPublicInputs>;

/// Private side of the DvP circuit: the delegated payment witness plus the
/// token preimages behind the delivery hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvpWitness {
    pub payment: TransferWitness,
    pub delivery: Vec<TokenPreimage>,
}

impl Encode for DvpWitness {
    fn encode(&self, enc: &mut Encoder) {
        self.payment.encode(enc);
        enc.put_list(&self.delivery);
    }
}

/// Public side of the DvP circuit. Carries the complete delegated transfer
/// transaction for the payment leg.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvpPublicInputs {
    pub payment: DelegatedTransferTransaction,
    pub delivery: Digest,
    pub delivery_type: U256,
    pub dvp_binding: Digest,
}

impl Encode for DvpPublicInputs {
    fn encode(&self, enc: &mut Encoder) {
        self.payment.encode(enc);
        enc.put_digest(&self.delivery);
        enc.put_u256(&self.delivery_type);
        enc.put_digest(&self.dvp_binding);
    }
}

/// Transaction envelope: public inputs plus the proof over them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope<P> {
    #[serde(rename = "pub")]
    pub public: P,
    pub proof: Proof,
}

impl<P: Encode> Encode for Envelope<P> {
    fn encode(&self, enc: &mut Encoder) {
        self.public.encode(enc);
        self.proof.encode(enc);
    }
}

pub type MintTransaction = Envelope<MintPublicInputs>;
pub type TransferTransaction = Envelope<TransferPublicInputs>;
pub type RevealingTransaction = Envelope<RevealingPublicInputs>;
pub type HidingTransaction = Envelope<HidingPublicInputs>;
pub type GrabTransaction = Envelope<GrabPublicInputs>;
pub type DelegatedMintTransaction = Envelope<DelegatedMintPublicInputs>;
pub type DelegatedTransferTransaction = Envelope<DelegatedTransferPublicInputs>;
pub type DelegatedRevealingTransaction = Envelope<DelegatedRevealingPublicInputs>;
pub type DelegatedHidingTransaction = Envelope<DelegatedHidingPublicInputs>;
pub type DvpTransaction = Envelope<DvpPublicInputs>;
