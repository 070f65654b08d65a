//! Multi-party flow engine: participants with keypairs and wallets, the
//! off-chain private channel, the authority with simulated reserve accounts,
//! and the end-to-end issuance, transfer, withdrawal, revealing, hiding,
//! grab, and DvP flows wired to the deployed contracts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circuits::{
    build_audit_data, burn_commitment, delegate_binding, delivery_hash, dvp_binding, prove_dvp,
    prove_delegated_transfer, prove_grabber, prove_hiding_transfer, prove_mint,
    prove_revealing_transfer, prove_transfer, witness_digest, AuditPreimage, ConstraintViolation,
    Delegated, DvpPublicInputs, DvpTransaction, DvpWitness, Envelope, GrabPublicInputs,
    GrabWitness, HidingPublicInputs, HidingWitness, ImgPath, MintPublicInputs, MintWitness,
    ReferenceBackend, RevealingPublicInputs, RevealingWitness, TransferPublicInputs,
    TransferWitness,
};
use crate::crypto::{create_grabber_key, derive_public_key, get_account, KeyError, MerkleError};
use crate::dvp::DvpError;
use crate::ledger::{Event, EventBody, TokenContractConfig};
use crate::token::{
    commit, grab_token, nullify, BurnPreimage, DvpPreimage, NullifierPreimage, TokenCommitment,
    TokenError, TokenPreimage, TransferPreimage,
};
use crate::types::{Account, Address, GrabberKey, PublicKey, SecretKey, U256};
use crate::world::{SystemConfig, Transaction, World, WorldError, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown participant: {0}")]
    UnknownParticipant(String),
    #[error("unknown token contract: {0}")]
    UnknownToken(String),
    #[error("wallet cannot cover {needed} (available {available})")]
    InsufficientFunds { needed: U256, available: U256 },
    #[error("wallet does not hold NFT id {0}")]
    MissingNftInWallet(U256),
    #[error("reserve account cannot cover the issuance")]
    InsufficientReserve,
    #[error("wallet index {0} out of range")]
    BadWalletIndex(usize),
    #[error("receiver-side validation failed: {0}")]
    ReceiverValidation(String),
    #[error("wallet/ledger reconciliation failed: {0}")]
    Reconciliation(String),
    #[error("conservation check failed: {0}")]
    Conservation(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Constraint(#[from] ConstraintViolation),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
}

/// One unspent token as tracked by its owner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalletEntry {
    pub contract: Address,
    pub token: TokenPreimage,
    pub leaf_index: u64,
}

/// A participating institution: keypair, per-contract grabber keys, and the
/// local wallet of unspent token preimages.
#[derive(Clone, Debug)]
pub struct Participant {
    pub name: String,
    pub address: Address,
    pub sk: SecretKey,
    pub pk: PublicKey,
    pub account: Account,
    pub grabber_keys: BTreeMap<Address, GrabberKey>,
    pub wallet: Vec<WalletEntry>,
    /// Tokens this participant has spent, in consumption order. Kept so
    /// adversarial scenarios can target already-consumed tokens.
    pub spent: Vec<WalletEntry>,
}

impl Participant {
    /// Wallet entries held on one contract, in acquisition order.
    pub fn wallet_on(&self, contract: &Address) -> Vec<&WalletEntry> {
        self.wallet
            .iter()
            .filter(|e| e.contract == *contract)
            .collect()
    }

    pub fn wallet_total(&self, contract: &Address) -> U256 {
        self.wallet_on(contract)
            .iter()
            .fold(U256::zero(), |acc, e| acc.saturating_add(e.token.amount))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    TransferPreimage,
    BurnPreimage,
    DvpRequest,
    Ack,
}

/// Off-chain channel message; never written to the ledger. The signature is
/// a recorded placeholder, kept for audit purposes but not verified.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelMessage {
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    pub body: serde_json::Value,
    pub signature: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Receipt {
    pub flow: String,
    pub details: serde_json::Value,
}

/// Ground-truth audit record for one accepted transaction, kept by the
/// harness to validate auditor output byte-for-byte.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub contract: Address,
    pub seq: u64,
    pub audit: AuditPreimage,
}

/// Per-contract conservation tally maintained from witness-side knowledge.
#[derive(Clone, Debug, Default)]
pub struct ContractTally {
    pub minted: U256,
    pub burned: U256,
    pub minted_ids: BTreeSet<U256>,
    pub burned_ids: BTreeSet<U256>,
    /// Live hidden tokens: commitment -> (amount, id).
    pub hidden: BTreeMap<TokenCommitment, (U256, U256)>,
}

impl ContractTally {
    pub fn hidden_mass(&self) -> U256 {
        self.hidden
            .values()
            .fold(U256::zero(), |acc, (a, _)| acc.saturating_add(*a))
    }

    pub fn hidden_ids(&self) -> BTreeSet<U256> {
        self.hidden
            .values()
            .filter(|(_, id)| !id.is_zero())
            .map(|(_, id)| *id)
            .collect()
    }
}

/// Construction parameters for a harness run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TokenSpec {
    pub name: String,
    pub token_type: U256,
    #[serde(default = "default_tree_depth")]
    pub tree_depth: usize,
}

fn default_tree_depth() -> usize {
    16
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnessSetup {
    pub seed: u64,
    pub tokens: Vec<TokenSpec>,
    pub participants: Vec<String>,
    #[serde(default)]
    pub contract_participants: Vec<String>,
    #[serde(default)]
    pub hidden_issuers: Vec<String>,
    /// Extra public issuers registered at genesis besides the authority;
    /// delegated mints go through these.
    #[serde(default)]
    pub public_issuers: Vec<String>,
    #[serde(default = "default_reserve")]
    pub initial_reserve: U256,
}

fn default_reserve() -> U256 {
    U256::from(1_000_000_000u64)
}

pub const AUTHORITY: &str = "authority";

/// The scenario engine. All randomness comes from the seeded generator, so
/// identical setups and flow sequences yield identical ledgers, event logs,
/// and reports.
pub struct Harness {
    pub backend: ReferenceBackend,
    pub world: World,
    pub participants: BTreeMap<String, Participant>,
    pub auditor_sk: SecretKey,
    pub auditor_pk: PublicKey,
    pub channel: Vec<ChannelMessage>,
    pub reserves: BTreeMap<String, U256>,
    pub tallies: BTreeMap<Address, ContractTally>,
    pub ground_truth: Vec<GroundTruthEntry>,
    pub receipts: Vec<Receipt>,
    token_names: BTreeMap<String, Address>,
    issuer_leaves: BTreeMap<(String, Address), usize>,
    rng: ChaCha20Rng,
}

impl Harness {
    pub fn new(setup: &HarnessSetup) -> Result<Harness, HarnessError> {
        let mut rng = ChaCha20Rng::seed_from_u64(setup.seed);

        let mut names: Vec<String> = vec![AUTHORITY.to_string()];
        names.extend(setup.participants.iter().cloned());
        names.extend(setup.contract_participants.iter().cloned());
        names.extend(setup.hidden_issuers.iter().cloned());
        names.extend(setup.public_issuers.iter().cloned());

        let mut participants = BTreeMap::new();
        for name in &names {
            if participants.contains_key(name) {
                continue;
            }
            let sk = SecretKey(fresh_u256(&mut rng));
            let pk = derive_public_key(&sk)?;
            let account = get_account(&sk)?;
            participants.insert(
                name.clone(),
                Participant {
                    name: name.clone(),
                    address: Address::from_name(name),
                    sk,
                    pk,
                    account,
                    grabber_keys: BTreeMap::new(),
                    wallet: Vec::new(),
                    spent: Vec::new(),
                },
            );
        }

        let auditor_sk = SecretKey(fresh_u256(&mut rng));
        let auditor_pk = derive_public_key(&auditor_sk)?;
        let audit_account = crate::crypto::account_of(&auditor_pk);
        let authority = participants[AUTHORITY].clone();

        let mut token_names = BTreeMap::new();
        let mut token_configs = Vec::new();
        for spec in &setup.tokens {
            let address = Address::from_name(&spec.name);
            token_names.insert(spec.name.clone(), address);
            token_configs.push(TokenContractConfig {
                name: spec.name.clone(),
                address,
                token_type: spec.token_type,
                tree_depth: spec.tree_depth,
                issuer_tree_depth: 8,
                auth_address: authority.address,
                auth_account: authority.account,
                audit_account,
                grab_nonce: fresh_u256(&mut rng),
            });
        }

        let config = SystemConfig {
            schema_version: SCHEMA_VERSION,
            tokens: token_configs,
            dvp_address: Address::from_name("dvp"),
            dvp_deployer: authority.address,
        };
        let world = World::new(config);

        let mut harness = Harness {
            backend: ReferenceBackend,
            world,
            participants,
            auditor_sk,
            auditor_pk,
            channel: Vec::new(),
            reserves: BTreeMap::new(),
            tallies: BTreeMap::new(),
            ground_truth: Vec::new(),
            receipts: Vec::new(),
            token_names,
            issuer_leaves: BTreeMap::new(),
            rng,
        };

        for name in &names {
            if name != AUTHORITY {
                harness.reserves.insert(name.clone(), setup.initial_reserve);
            }
        }

        harness.genesis(setup)?;
        Ok(harness)
    }

    /// Registers issuers, hidden issuers, contract accounts, and DvP token
    /// bindings. Runs through `World::apply` so genesis is replayable.
    fn genesis(&mut self, setup: &HarnessSetup) -> Result<(), HarnessError> {
        let authority_addr = self.participants[AUTHORITY].address;
        let token_addrs: Vec<(Address, U256)> = self
            .world
            .config
            .tokens
            .iter()
            .map(|c| (c.address, c.token_type))
            .collect();

        for (token, token_type) in &token_addrs {
            self.apply(
                authority_addr,
                Transaction::RegisterIssuer {
                    token: *token,
                    issuer: authority_addr,
                    enabled: true,
                },
            )?;
            for name in &setup.public_issuers {
                let issuer = self.participant(name)?.address;
                self.apply(
                    authority_addr,
                    Transaction::RegisterIssuer {
                        token: *token,
                        issuer,
                        enabled: true,
                    },
                )?;
            }
            self.apply(
                authority_addr,
                Transaction::RegisterTokenContract {
                    token_type: *token_type,
                    contract: *token,
                },
            )?;

            for name in &setup.hidden_issuers {
                let account = self.participant(name)?.account;
                let leaf_index = self.world.token(token)?.issuer_tree().next_index();
                self.apply(
                    authority_addr,
                    Transaction::RegisterHiddenIssuer {
                        token: *token,
                        account,
                    },
                )?;
                self.issuer_leaves
                    .insert((name.clone(), *token), leaf_index);
            }

            for name in &setup.contract_participants {
                let p = self.participant(name)?.clone();
                self.apply(
                    authority_addr,
                    Transaction::RegisterContractAccount {
                        token: *token,
                        contract: p.address,
                        account: p.account,
                    },
                )?;
            }
        }

        // Onboarding: every participant derives its grabber key per contract
        // and shares it with the authority (modeled by harness-side storage).
        let grab_nonces: BTreeMap<Address, U256> = self
            .world
            .config
            .tokens
            .iter()
            .map(|c| (c.address, c.grab_nonce))
            .collect();
        for p in self.participants.values_mut() {
            for (addr, nonce) in &grab_nonces {
                p.grabber_keys
                    .insert(*addr, create_grabber_key(&p.sk, *nonce)?);
            }
        }
        Ok(())
    }

    // -- lookups -------------------------------------------------------------

    pub fn participant(&self, name: &str) -> Result<&Participant, HarnessError> {
        self.participants
            .get(name)
            .ok_or_else(|| HarnessError::UnknownParticipant(name.to_string()))
    }

    fn participant_mut(&mut self, name: &str) -> Result<&mut Participant, HarnessError> {
        self.participants
            .get_mut(name)
            .ok_or_else(|| HarnessError::UnknownParticipant(name.to_string()))
    }

    pub fn token_address(&self, name: &str) -> Result<Address, HarnessError> {
        self.token_names
            .get(name)
            .copied()
            .ok_or_else(|| HarnessError::UnknownToken(name.to_string()))
    }

    pub fn dvp_address(&self) -> Address {
        self.world.config.dvp_address
    }

    fn fresh_nonce(&mut self) -> U256 {
        fresh_u256(&mut self.rng)
    }

    fn apply(&mut self, caller: Address, tx: Transaction) -> Result<Vec<Event>, HarnessError> {
        let backend = self.backend;
        Ok(self.world.apply(&backend, caller, tx)?)
    }

    fn send(&mut self, from: &str, to: &str, kind: MessageKind, body: serde_json::Value) {
        self.channel.push(ChannelMessage {
            from: from.to_string(),
            to: to.to_string(),
            kind,
            body,
            signature: format!("sig:{from}"),
        });
    }

    fn ack(&mut self, from: &str, to: &str) {
        self.send(from, to, MessageKind::Ack, json!({"ok": true}));
    }

    fn tally_mut(&mut self, contract: Address) -> &mut ContractTally {
        self.tallies.entry(contract).or_default()
    }

    fn record_ground_truth(&mut self, events: &[Event], audits: &[(Address, AuditPreimage)]) {
        let mut remaining: Vec<(Address, AuditPreimage)> = audits.to_vec();
        for ev in events {
            let has_audit = matches!(
                ev.body,
                EventBody::Transfer { .. }
                    | EventBody::RevealingTransfer { .. }
                    | EventBody::HidingTransfer { .. }
            );
            if !has_audit {
                continue;
            }
            if let Some(pos) = remaining.iter().position(|(addr, _)| *addr == ev.contract) {
                let (contract, audit) = remaining.remove(pos);
                self.ground_truth.push(GroundTruthEntry {
                    contract,
                    seq: ev.seq,
                    audit,
                });
            }
        }
        debug_assert!(remaining.is_empty(), "unmatched audit ground truth");
    }

    fn receipt(&mut self, flow: &str, details: serde_json::Value) -> Receipt {
        let receipt = Receipt {
            flow: flow.to_string(),
            details,
        };
        self.receipts.push(receipt.clone());
        receipt
    }

    // -- issuance --------------------------------------------------------------

    /// Full issuance flow: the authority debits the bank's reserve, proves
    /// the mint, submits it, and hands the preimage to the bank off-chain.
    pub fn issue(&mut self, bank: &str, token: &str, amount: U256) -> Result<Receipt, HarnessError> {
        self.issue_token(bank, token, amount, U256::zero())
    }

    pub fn issue_nft(&mut self, bank: &str, token: &str, id: U256) -> Result<Receipt, HarnessError> {
        self.issue_token(bank, token, U256::zero(), id)
    }

    fn issue_token(
        &mut self,
        bank: &str,
        token: &str,
        amount: U256,
        id: U256,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let bank_account = self.participant(bank)?.account;
        let authority_addr = self.participants[AUTHORITY].address;
        let token_type = self.world.token(&contract)?.config.token_type;

        let reserve = self
            .reserves
            .get_mut(bank)
            .ok_or_else(|| HarnessError::UnknownParticipant(bank.to_string()))?;
        if !amount.is_zero() {
            if *reserve < amount {
                return Err(HarnessError::InsufficientReserve);
            }
            *reserve -= amount;
        }

        let nonce = self.fresh_nonce();
        let out = TokenPreimage {
            owner: bank_account,
            token_type,
            nonce,
            amount,
            id,
            payload: None,
        };
        let wit = MintWitness {
            outputs: vec![out.clone()],
            issuer_sk: None,
            issuer_path: None,
        };
        let public = MintPublicInputs {
            token_type,
            comms: vec![commit(&out)],
            issuer_root: None,
        };
        let proof = prove_mint(&self.backend, &wit, &public)?;
        let events = self.apply(
            authority_addr,
            Transaction::Mint {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;

        let envelope = TransferPreimage {
            outputs: vec![out.clone()],
            inputs: None,
        };
        self.send(
            AUTHORITY,
            bank,
            MessageKind::TransferPreimage,
            serde_json::to_value(&envelope).expect("envelope serializes"),
        );
        self.ack(bank, AUTHORITY);

        let start_index = mint_start_index(&events, contract).unwrap_or(0);
        self.participant_mut(bank)?.wallet.push(WalletEntry {
            contract,
            token: out.clone(),
            leaf_index: start_index,
        });

        let tally = self.tally_mut(contract);
        tally.minted = tally.minted.saturating_add(amount);
        if !id.is_zero() {
            tally.minted_ids.insert(id);
        }
        tally.hidden.insert(commit(&out), (amount, id));

        Ok(self.receipt(
            "issuance",
            json!({"bank": bank, "token": token, "amount": amount, "id": id}),
        ))
    }

    /// Issuance by a hidden issuer proving membership in the issuer tree.
    pub fn hidden_issue(
        &mut self,
        issuer: &str,
        bank: &str,
        token: &str,
        amount: U256,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let bank_account = self.participant(bank)?.account;
        let issuer_p = self.participant(issuer)?.clone();
        let token_type = self.world.token(&contract)?.config.token_type;

        let leaf_index = *self
            .issuer_leaves
            .get(&(issuer.to_string(), contract))
            .ok_or_else(|| HarnessError::UnknownParticipant(format!("hidden issuer {issuer}")))?;
        let issuer_tree = self.world.token(&contract)?.issuer_tree();
        let issuer_path = issuer_tree.proof_for(leaf_index)?;
        let issuer_root = issuer_tree.root();

        let reserve = self
            .reserves
            .get_mut(bank)
            .ok_or_else(|| HarnessError::UnknownParticipant(bank.to_string()))?;
        if *reserve < amount {
            return Err(HarnessError::InsufficientReserve);
        }
        *reserve -= amount;

        let nonce = self.fresh_nonce();
        let out = TokenPreimage::fungible(bank_account, token_type, nonce, amount);
        let wit = MintWitness {
            outputs: vec![out.clone()],
            issuer_sk: Some(issuer_p.sk),
            issuer_path: Some(issuer_path),
        };
        let public = MintPublicInputs {
            token_type,
            comms: vec![commit(&out)],
            issuer_root: Some(issuer_root),
        };
        let proof = prove_mint(&self.backend, &wit, &public)?;
        let events = self.apply(
            issuer_p.address,
            Transaction::Mint {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;

        let start_index = mint_start_index(&events, contract).unwrap_or(0);
        self.participant_mut(bank)?.wallet.push(WalletEntry {
            contract,
            token: out.clone(),
            leaf_index: start_index,
        });
        let tally = self.tally_mut(contract);
        tally.minted = tally.minted.saturating_add(amount);
        tally.hidden.insert(commit(&out), (amount, U256::zero()));

        Ok(self.receipt(
            "hidden_issuance",
            json!({"issuer": issuer, "bank": bank, "token": token, "amount": amount}),
        ))
    }

    /// Delegated mint: the authority builds and proves a mint bound to a
    /// registered issuer contract, which then submits it as the delegate.
    pub fn delegated_issue(
        &mut self,
        delegate: &str,
        bank: &str,
        token: &str,
        amount: U256,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let bank_account = self.participant(bank)?.account;
        let delegate_addr = self.participant(delegate)?.address;
        let token_type = self.world.token(&contract)?.config.token_type;

        let reserve = self
            .reserves
            .get_mut(bank)
            .ok_or_else(|| HarnessError::UnknownParticipant(bank.to_string()))?;
        if *reserve < amount {
            return Err(HarnessError::InsufficientReserve);
        }
        *reserve -= amount;

        let nonce = self.fresh_nonce();
        let out = TokenPreimage::fungible(bank_account, token_type, nonce, amount);
        let wit = MintWitness {
            outputs: vec![out.clone()],
            issuer_sk: None,
            issuer_path: None,
        };
        let public = Delegated {
            inner: MintPublicInputs {
                token_type,
                comms: vec![commit(&out)],
                issuer_root: None,
            },
            delegate: delegate_addr,
            binding: delegate_binding(&delegate_addr, &witness_digest(&wit)),
        };
        let proof = crate::circuits::prove_delegated_mint(&self.backend, &wit, &public)?;
        let events = self.apply(
            delegate_addr,
            Transaction::DelegatedMint {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;

        let start_index = mint_start_index(&events, contract).unwrap_or(0);
        self.participant_mut(bank)?.wallet.push(WalletEntry {
            contract,
            token: out.clone(),
            leaf_index: start_index,
        });
        let tally = self.tally_mut(contract);
        tally.minted = tally.minted.saturating_add(amount);
        tally.hidden.insert(commit(&out), (amount, U256::zero()));

        Ok(self.receipt(
            "delegated_mint",
            json!({"delegate": delegate, "bank": bank, "token": token, "amount": amount}),
        ))
    }

    /// Delegated transfer: the payer proves a transfer bound to a delegate
    /// contract, which submits it on the payer's behalf.
    pub fn delegated_transfer_via(
        &mut self,
        delegate: &str,
        payer: &str,
        payee: &str,
        token: &str,
        amounts: &[U256],
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let delegate_addr = self.participant(delegate)?.address;
        let pays: Vec<(String, U256, U256)> = amounts
            .iter()
            .map(|a| (payee.to_string(), *a, U256::zero()))
            .collect();
        let plan = self.plan_transfer(payer, contract, &pays, U256::zero(), &[])?;

        let public = Delegated {
            inner: plan.public.clone(),
            delegate: delegate_addr,
            binding: delegate_binding(&delegate_addr, &witness_digest(&plan.witness)),
        };
        let proof = prove_delegated_transfer(&self.backend, &plan.witness, &public)?;
        let events = self.apply(
            delegate_addr,
            Transaction::DelegatedTransfer {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, plan.audit.clone())]);
        self.settle_transfer(payer, contract, &plan, &events)?;

        Ok(self.receipt(
            "delegated_transfer",
            json!({
                "delegate": delegate, "payer": payer, "payee": payee,
                "token": token, "amounts": amounts,
            }),
        ))
    }

    // -- transfer / withdrawal ---------------------------------------------------

    /// Transfer flow: preimage exchange over the channel, signed ack, proof,
    /// submission, and receiver-side recognition via commitment equality.
    pub fn transfer(
        &mut self,
        payer: &str,
        payee: &str,
        token: &str,
        amounts: &[U256],
        ids: &[U256],
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let mut pays: Vec<(String, U256, U256)> = Vec::new();
        for a in amounts {
            pays.push((payee.to_string(), *a, U256::zero()));
        }
        for id in ids {
            pays.push((payee.to_string(), U256::zero(), *id));
        }
        let plan = self.plan_transfer(payer, contract, &pays, U256::zero(), &[])?;

        // Off-chain: payee inspects the destined preimages and the consumed
        // tokens' disclosures, validates, and acks.
        let destined: Vec<TokenPreimage> = plan
            .outputs_for
            .iter()
            .filter(|(who, _)| who == payee)
            .map(|(_, t)| t.clone())
            .collect();
        let disclosures: Vec<NullifierPreimage> = plan
            .witness
            .inputs
            .iter()
            .map(|i| NullifierPreimage::of(&i.img))
            .collect();
        let envelope = TransferPreimage {
            outputs: destined,
            inputs: Some(disclosures),
        };
        self.send(
            payer,
            payee,
            MessageKind::TransferPreimage,
            serde_json::to_value(&envelope).expect("envelope serializes"),
        );
        self.validate_incoming_envelope(&envelope, contract)?;
        self.ack(payee, payer);

        let proof = prove_transfer(&self.backend, &plan.witness, &plan.public)?;
        let events = self.apply(
            self.participant(payer)?.address,
            Transaction::Transfer {
                token: contract,
                tx: Envelope {
                    public: plan.public.clone(),
                    proof,
                },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, plan.audit.clone())]);
        self.settle_transfer(payer, contract, &plan, &events)?;

        Ok(self.receipt(
            "transfer",
            json!({
                "payer": payer, "payee": payee, "token": token,
                "amounts": amounts, "ids": ids,
            }),
        ))
    }

    /// Withdrawal flow: burn request to the authority, transfer carrying the
    /// burn, reserve credit when the burn event with the announced
    /// commitment appears.
    pub fn withdraw(
        &mut self,
        payer: &str,
        token: &str,
        amount: U256,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let plan = self.plan_transfer(payer, contract, &[], amount, &[])?;

        let burn_nonce = self.fresh_nonce();
        let request = BurnPreimage {
            amount,
            ids: vec![],
            nonce: burn_nonce,
        };
        let expected = plan.public.burn_commitment;
        self.send(
            payer,
            AUTHORITY,
            MessageKind::BurnPreimage,
            json!({
                "burn_preimage": serde_json::to_value(&request).expect("serializes"),
                "expected_burn_commitment": expected,
            }),
        );
        self.ack(AUTHORITY, payer);

        let proof = prove_transfer(&self.backend, &plan.witness, &plan.public)?;
        let events = self.apply(
            self.participant(payer)?.address,
            Transaction::Transfer {
                token: contract,
                tx: Envelope {
                    public: plan.public.clone(),
                    proof,
                },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, plan.audit.clone())]);
        self.settle_transfer(payer, contract, &plan, &events)?;

        // The authority watches for the burn event carrying the announced
        // commitment, then credits the reserve.
        let burn_seen = events.iter().any(|e| {
            matches!(e.body, EventBody::Burn { burn_commitment } if burn_commitment == expected)
        });
        if burn_seen {
            let reserve = self
                .reserves
                .get_mut(payer)
                .ok_or_else(|| HarnessError::UnknownParticipant(payer.to_string()))?;
            *reserve = reserve.saturating_add(amount);
            let tally = self.tally_mut(contract);
            tally.burned = tally.burned.saturating_add(amount);
        }

        Ok(self.receipt(
            "withdrawal",
            json!({"payer": payer, "token": token, "amount": amount, "burn_commitment": expected}),
        ))
    }

    // -- revealing / hiding -------------------------------------------------------

    /// Revealing transfer: consumes hidden tokens, exposes clear outputs
    /// owned by a registered contract account, keeps change hidden.
    pub fn reveal(
        &mut self,
        participant: &str,
        token: &str,
        contract_participant: &str,
        amount: U256,
        ids: &[U256],
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let target_account = self.participant(contract_participant)?.account;
        let payer = self.participant(participant)?.clone();
        let token_type = self.world.token(&contract)?.config.token_type;
        let grab_nonce = self.world.token(&contract)?.config.grab_nonce;

        let input_indices = self.select_inputs(participant, contract, amount, ids)?;
        let (inputs, total_in) = self.input_paths(participant, &input_indices)?;

        let mut clear_outputs = Vec::new();
        if !amount.is_zero() {
            clear_outputs.push(TokenPreimage {
                owner: target_account,
                token_type,
                nonce: U256::zero(),
                amount,
                id: U256::zero(),
                payload: None,
            });
        }
        for id in ids {
            clear_outputs.push(TokenPreimage {
                owner: target_account,
                token_type,
                nonce: U256::zero(),
                amount: U256::zero(),
                id: *id,
                payload: None,
            });
        }

        let change = total_in - amount;
        let hidden_outputs: Vec<TokenPreimage> = if change.is_zero() {
            vec![]
        } else {
            let nonce = self.fresh_nonce();
            vec![TokenPreimage::fungible(payer.account, token_type, nonce, change)]
        };

        let nulls = inputs
            .iter()
            .map(|i| nullify(&i.img, &payer.sk))
            .collect::<Result<Vec<_>, _>>()?;
        let gk = payer.grabber_keys[&contract];
        let grabs = inputs.iter().map(|i| grab_token(&i.img, &gk)).collect();
        let hidden_comms: Vec<TokenCommitment> = hidden_outputs.iter().map(commit).collect();
        let root = self.world.token(&contract)?.tree().root();

        let audit = AuditPreimage {
            inputs: inputs.iter().map(|i| i.img.clone()).collect(),
            outputs: hidden_outputs.clone(),
            burn_amount: U256::zero(),
            burn_ids: vec![],
        };
        let wit = RevealingWitness {
            inputs,
            sk: payer.sk,
            hidden_outputs: if hidden_outputs.is_empty() {
                None
            } else {
                Some(hidden_outputs.clone())
            },
            audit_pk: self.auditor_pk,
        };
        let public = RevealingPublicInputs {
            nulls,
            grabs,
            hidden_comms: if hidden_comms.is_empty() {
                None
            } else {
                Some(hidden_comms)
            },
            clear_outputs: clear_outputs.clone(),
            token_type,
            root,
            grab_nonce,
            audit_data: build_audit_data(&self.auditor_pk, &audit),
            audit_account: self.world.token(&contract)?.config.audit_account,
        };
        let proof = prove_revealing_transfer(&self.backend, &wit, &public)?;
        let events = self.apply(
            payer.address,
            Transaction::RevealingTransfer {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, audit.clone())]);

        self.remove_wallet_entries(participant, &input_indices)?;
        if let Some(start) = revealing_start_index(&events, contract) {
            for (i, out) in hidden_outputs.iter().enumerate() {
                self.participant_mut(participant)?.wallet.push(WalletEntry {
                    contract,
                    token: out.clone(),
                    leaf_index: start + i as u64,
                });
            }
        }
        let tally = self.tally_mut(contract);
        for input in &audit.inputs {
            tally.hidden.remove(&commit(input));
        }
        for out in &hidden_outputs {
            tally.hidden.insert(commit(out), (out.amount, out.id));
        }

        Ok(self.receipt(
            "revealing_transfer",
            json!({
                "participant": participant, "token": token,
                "contract_account": contract_participant,
                "amount": amount, "ids": ids,
            }),
        ))
    }

    /// Hiding transfer: consumes open balance/NFTs held by a contract
    /// account and recreates them as hidden tokens for a new owner.
    pub fn hide(
        &mut self,
        caller_contract: &str,
        new_owner: &str,
        token: &str,
        amount: U256,
        ids: &[U256],
        use_account_in: bool,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let caller = self.participant(caller_contract)?.clone();
        let owner_account = self.participant(new_owner)?.account;
        let token_type = self.world.token(&contract)?.config.token_type;

        let mut outputs = Vec::new();
        if !amount.is_zero() {
            let nonce = self.fresh_nonce();
            outputs.push(TokenPreimage::fungible(
                owner_account,
                token_type,
                nonce,
                amount,
            ));
        }
        for id in ids {
            let nonce = self.fresh_nonce();
            outputs.push(TokenPreimage::nonfungible(
                owner_account,
                token_type,
                nonce,
                *id,
            ));
        }

        let audit = AuditPreimage {
            inputs: vec![],
            outputs: outputs.clone(),
            burn_amount: U256::zero(),
            burn_ids: vec![],
        };
        let wit = HidingWitness {
            outputs: outputs.clone(),
            sk: if use_account_in { Some(caller.sk) } else { None },
            audit_pk: self.auditor_pk,
        };
        let public = HidingPublicInputs {
            amount_in: amount,
            ids_in: ids.to_vec(),
            account_in: if use_account_in {
                Some(caller.account)
            } else {
                None
            },
            comms: outputs.iter().map(commit).collect(),
            token_type,
            audit_data: build_audit_data(&self.auditor_pk, &audit),
            audit_account: self.world.token(&contract)?.config.audit_account,
        };
        let proof = prove_hiding_transfer(&self.backend, &wit, &public)?;
        let events = self.apply(
            caller.address,
            Transaction::HidingTransfer {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, audit)]);

        if let Some(start) = hiding_start_index(&events, contract) {
            for (i, out) in outputs.iter().enumerate() {
                self.participant_mut(new_owner)?.wallet.push(WalletEntry {
                    contract,
                    token: out.clone(),
                    leaf_index: start + i as u64,
                });
            }
        }
        let tally = self.tally_mut(contract);
        for out in &outputs {
            tally.hidden.insert(commit(out), (out.amount, out.id));
        }

        Ok(self.receipt(
            "hiding_transfer",
            json!({
                "caller": caller_contract, "new_owner": new_owner, "token": token,
                "amount": amount, "ids": ids, "account_in": use_account_in,
            }),
        ))
    }

    // -- grab -----------------------------------------------------------------

    /// Authority seizure of one wallet token, reissued under authority
    /// control. When `noticed` is set the victim recognizes the seizure
    /// from the published grabber and drops the token; an unnoticed grab
    /// leaves the dead entry in the wallet so a later spend attempt runs
    /// into the consumed grabber on-ledger.
    pub fn grab(
        &mut self,
        victim: &str,
        token: &str,
        wallet_index: usize,
        noticed: bool,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let victim_p = self.participant(victim)?.clone();
        let entries = victim_p.wallet_on(&contract);
        let entry = (*entries
            .get(wallet_index)
            .ok_or(HarnessError::BadWalletIndex(wallet_index))?)
        .clone();
        self.grab_entry(victim, contract, entry, noticed)
    }

    /// Authority grab aimed at a token the victim has already consumed; the
    /// ledger rejects it because the transfer spent the grabber slot.
    pub fn grab_spent(
        &mut self,
        victim: &str,
        token: &str,
        spent_index: usize,
    ) -> Result<Receipt, HarnessError> {
        let contract = self.token_address(token)?;
        let victim_p = self.participant(victim)?.clone();
        let entry = victim_p
            .spent
            .iter()
            .filter(|e| e.contract == contract)
            .nth(spent_index)
            .ok_or(HarnessError::BadWalletIndex(spent_index))?
            .clone();
        self.grab_entry(victim, contract, entry, false)
    }

    fn grab_entry(
        &mut self,
        victim: &str,
        contract: Address,
        entry: WalletEntry,
        noticed: bool,
    ) -> Result<Receipt, HarnessError> {
        let authority = self.participants[AUTHORITY].clone();
        let victim_p = self.participant(victim)?.clone();
        let token = self.world.token(&contract)?.config.name.clone();
        let token_type = self.world.token(&contract)?.config.token_type;
        let grab_nonce = self.world.token(&contract)?.config.grab_nonce;
        let path = self
            .world
            .token(&contract)?
            .tree()
            .proof_for(entry.leaf_index as usize)?;
        let root = self.world.token(&contract)?.tree().root();

        // The authority holds the victim's grabber key from onboarding.
        let gk = victim_p.grabber_keys[&contract];
        let nonce = self.fresh_nonce();
        let reissued = TokenPreimage {
            owner: authority.account,
            token_type,
            nonce,
            amount: entry.token.amount,
            id: entry.token.id,
            payload: None,
        };
        let wit = GrabWitness {
            inputs: vec![ImgPath {
                img: entry.token.clone(),
                path,
            }],
            outputs: vec![reissued.clone()],
            auth_sk: authority.sk,
            owner_pk: victim_p.pk,
            grabber_key: gk,
        };
        let public = GrabPublicInputs {
            grabs: vec![grab_token(&entry.token, &gk)],
            comms: vec![commit(&reissued)],
            token_type,
            root,
            grab_nonce,
            auth_account: authority.account,
        };
        let proof = prove_grabber(&self.backend, &wit, &public)?;
        let events = self.apply(
            authority.address,
            Transaction::Grab {
                token: contract,
                tx: Envelope { public, proof },
            },
        )?;

        // Victim-side recognition: published grabbers match the victim's own
        // derivation, so the seized token leaves the wallet.
        if noticed {
            let published = grab_events_grabbers(&events, contract);
            let victim_mut = self.participant_mut(victim)?;
            victim_mut.wallet.retain(|e| {
                !(e.contract == contract && published.contains(&grab_token(&e.token, &gk)))
            });
        }

        if let Some(start) = grab_start_index(&events, contract) {
            self.participant_mut(AUTHORITY)?.wallet.push(WalletEntry {
                contract,
                token: reissued.clone(),
                leaf_index: start,
            });
        }
        let tally = self.tally_mut(contract);
        tally.hidden.remove(&commit(&entry.token));
        tally
            .hidden
            .insert(commit(&reissued), (reissued.amount, reissued.id));

        Ok(self.receipt(
            "grab",
            json!({
                "victim": victim, "token": token,
                "amount": entry.token.amount, "id": entry.token.id,
            }),
        ))
    }

    // -- shared transfer planning ------------------------------------------------

    fn select_inputs(
        &self,
        payer: &str,
        contract: Address,
        need_amount: U256,
        need_ids: &[U256],
    ) -> Result<Vec<usize>, HarnessError> {
        let p = self.participant(payer)?;
        let mut chosen: Vec<usize> = Vec::new();
        let mut covered = U256::zero();

        for id in need_ids {
            let found = p
                .wallet
                .iter()
                .enumerate()
                .find(|(i, e)| e.contract == contract && e.token.id == *id && !chosen.contains(i));
            match found {
                Some((i, e)) => {
                    covered = covered.saturating_add(e.token.amount);
                    chosen.push(i);
                }
                None => return Err(HarnessError::MissingNftInWallet(*id)),
            }
        }

        for (i, e) in p.wallet.iter().enumerate() {
            if covered >= need_amount {
                break;
            }
            if e.contract == contract && !chosen.contains(&i) && !e.token.amount.is_zero() {
                covered = covered.saturating_add(e.token.amount);
                chosen.push(i);
            }
        }
        if covered < need_amount {
            return Err(HarnessError::InsufficientFunds {
                needed: need_amount,
                available: covered,
            });
        }
        Ok(chosen)
    }

    fn input_paths(
        &self,
        payer: &str,
        indices: &[usize],
    ) -> Result<(Vec<ImgPath>, U256), HarnessError> {
        let p = self.participant(payer)?;
        let mut inputs = Vec::new();
        let mut total = U256::zero();
        for &i in indices {
            let entry = p.wallet.get(i).ok_or(HarnessError::BadWalletIndex(i))?;
            let tree = self.world.token(&entry.contract)?.tree();
            let path = tree.proof_for(entry.leaf_index as usize)?;
            total = total.saturating_add(entry.token.amount);
            inputs.push(ImgPath {
                img: entry.token.clone(),
                path,
            });
        }
        Ok((inputs, total))
    }

    fn plan_transfer(
        &mut self,
        payer: &str,
        contract: Address,
        pays: &[(String, U256, U256)],
        burn_amount: U256,
        burn_ids: &[U256],
    ) -> Result<TransferPlan, HarnessError> {
        let payer_p = self.participant(payer)?.clone();
        let token_type = self.world.token(&contract)?.config.token_type;
        let grab_nonce = self.world.token(&contract)?.config.grab_nonce;

        let mut need_amount = burn_amount;
        for (_, a, _) in pays {
            need_amount = need_amount.saturating_add(*a);
        }
        let mut need_ids: Vec<U256> = pays
            .iter()
            .filter(|(_, _, id)| !id.is_zero())
            .map(|(_, _, id)| *id)
            .collect();
        need_ids.extend_from_slice(burn_ids);

        let input_indices = self.select_inputs(payer, contract, need_amount, &need_ids)?;
        let (inputs, total_in) = self.input_paths(payer, &input_indices)?;

        let mut outputs_for: Vec<(String, TokenPreimage)> = Vec::new();
        for (recipient, amount, id) in pays {
            let account = self.participant(recipient)?.account;
            let nonce = self.fresh_nonce();
            outputs_for.push((
                recipient.clone(),
                TokenPreimage {
                    owner: account,
                    token_type,
                    nonce,
                    amount: *amount,
                    id: *id,
                    payload: None,
                },
            ));
        }
        // Burned NFT ids leave circulation without a replacement output.
        let change = total_in - need_amount;
        if !change.is_zero() {
            let nonce = self.fresh_nonce();
            outputs_for.push((
                payer.to_string(),
                TokenPreimage::fungible(payer_p.account, token_type, nonce, change),
            ));
        }

        let outputs: Vec<TokenPreimage> = outputs_for.iter().map(|(_, t)| t.clone()).collect();
        let nulls = inputs
            .iter()
            .map(|i| nullify(&i.img, &payer_p.sk))
            .collect::<Result<Vec<_>, _>>()?;
        let gk = payer_p.grabber_keys[&contract];
        let grabs = inputs.iter().map(|i| grab_token(&i.img, &gk)).collect();
        let comms = outputs.iter().map(commit).collect();
        let root = self.world.token(&contract)?.tree().root();

        let wit = TransferWitness {
            inputs,
            outputs: outputs.clone(),
            sk: payer_p.sk,
            audit_pk: self.auditor_pk,
            burn_amount,
            burn_ids: burn_ids.to_vec(),
        };
        let audit = AuditPreimage {
            inputs: wit.inputs.iter().map(|i| i.img.clone()).collect(),
            outputs,
            burn_amount,
            burn_ids: burn_ids.to_vec(),
        };
        let public = TransferPublicInputs {
            nulls,
            grabs,
            comms,
            token_type,
            root,
            grab_nonce,
            burn_commitment: burn_commitment(&wit),
            audit_account: self.world.token(&contract)?.config.audit_account,
            audit_data: build_audit_data(&self.auditor_pk, &audit),
        };
        Ok(TransferPlan {
            input_indices,
            witness: wit,
            public,
            outputs_for,
            audit,
        })
    }

    /// Receiver-side validation of an incoming transfer envelope: disclosed
    /// consumed tokens must recombine to on-ledger commitments.
    fn validate_incoming_envelope(
        &self,
        envelope: &TransferPreimage,
        contract: Address,
    ) -> Result<(), HarnessError> {
        let tree = self.world.token(&contract)?.tree();
        if let Some(disclosures) = &envelope.inputs {
            for d in disclosures {
                let comm = d.recombine();
                if !tree.contains_leaf(&comm.0) {
                    return Err(HarnessError::ReceiverValidation(format!(
                        "disclosed input {} is not an on-ledger commitment",
                        comm.0
                    )));
                }
            }
        }
        Ok(())
    }

    fn remove_wallet_entries(&mut self, who: &str, indices: &[usize]) -> Result<(), HarnessError> {
        let p = self.participant_mut(who)?;
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        for i in sorted {
            if i >= p.wallet.len() {
                return Err(HarnessError::BadWalletIndex(i));
            }
            let entry = p.wallet.remove(i);
            p.spent.push(entry);
        }
        Ok(())
    }

    fn settle_transfer(
        &mut self,
        payer: &str,
        contract: Address,
        plan: &TransferPlan,
        events: &[Event],
    ) -> Result<(), HarnessError> {
        self.remove_wallet_entries(payer, &plan.input_indices)?;
        if let Some(start) = transfer_start_index(events, contract) {
            for (i, (recipient, token)) in plan.outputs_for.iter().enumerate() {
                self.participant_mut(recipient)?.wallet.push(WalletEntry {
                    contract,
                    token: token.clone(),
                    leaf_index: start + i as u64,
                });
            }
        }
        let tally = self.tally_mut(contract);
        for input in &plan.audit.inputs {
            tally.hidden.remove(&commit(input));
        }
        for (_, token) in &plan.outputs_for {
            tally.hidden.insert(commit(token), (token.amount, token.id));
        }
        for id in &plan.witness.burn_ids {
            tally.burned_ids.insert(*id);
        }
        Ok(())
    }

    // -- DvP ---------------------------------------------------------------------

    pub fn dvp(&mut self, spec: &DvpSpec) -> Result<Receipt, HarnessError> {
        let contract_a = self.token_address(&spec.token_a)?;
        let contract_b = self.token_address(&spec.token_b)?;
        let dvp_address = self.dvp_address();
        let type_a = self.world.token(&contract_a)?.config.token_type;
        let type_b = self.world.token(&contract_b)?.config.token_type;

        // Each bank plans its payment leg; destined outputs cross over.
        let mut pays_a: Vec<(String, U256, U256)> = Vec::new();
        for a in &spec.pay_a_amounts {
            pays_a.push((spec.bank_b.clone(), *a, U256::zero()));
        }
        for id in &spec.pay_a_ids {
            pays_a.push((spec.bank_b.clone(), U256::zero(), *id));
        }
        let plan_a = self.plan_transfer(&spec.bank_a, contract_a, &pays_a, U256::zero(), &[])?;

        let mut pays_b: Vec<(String, U256, U256)> = Vec::new();
        for a in &spec.pay_b_amounts {
            pays_b.push((spec.bank_a.clone(), *a, U256::zero()));
        }
        for id in &spec.pay_b_ids {
            pays_b.push((spec.bank_a.clone(), U256::zero(), *id));
        }
        let plan_b = self.plan_transfer(&spec.bank_b, contract_b, &pays_b, U256::zero(), &[])?;

        let destined_a: Vec<TokenPreimage> = plan_a
            .outputs_for
            .iter()
            .filter(|(who, _)| *who == spec.bank_b)
            .map(|(_, t)| t.clone())
            .collect();
        let destined_b: Vec<TokenPreimage> = plan_b
            .outputs_for
            .iter()
            .filter(|(who, _)| *who == spec.bank_a)
            .map(|(_, t)| t.clone())
            .collect();

        // Preimage exchange: the request carries what A pays; the response
        // echoes it as B's expected delivery alongside B's own payment.
        let request = DvpPreimage {
            inputs: None,
            outputs: destined_a.clone(),
            delivery: vec![],
        };
        self.send(
            &spec.bank_a,
            &spec.bank_b,
            MessageKind::DvpRequest,
            serde_json::to_value(&request).expect("serializes"),
        );
        let response = DvpPreimage {
            inputs: None,
            outputs: destined_b.clone(),
            delivery: destined_a.clone(),
        };
        self.send(
            &spec.bank_b,
            &spec.bank_a,
            MessageKind::DvpRequest,
            serde_json::to_value(&response).expect("serializes"),
        );
        self.ack(&spec.bank_a, &spec.bank_b);

        // Both legs carry the same deal digest: the hash over the full
        // agreed exchange, A's destined tokens then B's. Each bank checks
        // the digest covers the tokens it expects before proving.
        let mut deal: Vec<TokenPreimage> = destined_a.clone();
        deal.extend(destined_b.clone());
        let deal_hash = delivery_hash(&deal);

        let leg_a = self.build_dvp_leg(&plan_a, &deal, type_b, dvp_address)?;
        let leg_b = match spec.sabotage {
            Some(DvpSabotage::WrongDelivery) => {
                // Leg B hashes a different (reordered) list, so the keys
                // never meet and the leg parks separately.
                let mut wrong = destined_b.clone();
                wrong.extend(destined_a.clone());
                self.build_dvp_leg(&plan_b, &wrong, type_a, dvp_address)?
            }
            _ => self.build_dvp_leg(&plan_b, &deal, type_a, dvp_address)?,
        };

        // Submit the first leg; without a counter-leg it parks as pending.
        let bank_a_addr = self.participant(&spec.bank_a)?.address;
        let bank_b_addr = self.participant(&spec.bank_b)?.address;
        self.apply(bank_a_addr, Transaction::Dvp { tx: leg_a })?;
        let mut outcome = "pending";
        let mut settle_events: Vec<Event> = Vec::new();

        if let Some(DvpSabotage::SpendPendingLegInput) = spec.sabotage {
            // Double-spend one of leg A's payment inputs before the match,
            // so the second inner transfer fails after the first succeeded.
            self.sabotage_spend(&spec.bank_a, contract_a, &plan_a)?;
        }
        if let Some(DvpSabotage::SpendArrivingLegInput) = spec.sabotage {
            self.sabotage_spend(&spec.bank_b, contract_b, &plan_b)?;
        }

        if spec.submit_second_leg {
            match self.apply(bank_b_addr, Transaction::Dvp { tx: leg_b }) {
                Ok(events_b) => {
                    if events_b
                        .iter()
                        .any(|e| matches!(e.body, EventBody::DvpMatched { .. }))
                    {
                        outcome = "settled";
                        settle_events = events_b;
                    } else {
                        outcome = "pending_both";
                    }
                }
                Err(HarnessError::World(WorldError::Dvp(DvpError::InnerTransferFailed(_)))) => {
                    outcome = "inner_failed";
                }
                Err(e) => return Err(e),
            }
        }

        if outcome == "settled" {
            // Leg B's payment executed on contract B, leg A's on contract A.
            self.record_ground_truth(
                &settle_events,
                &[
                    (contract_b, plan_b.audit.clone()),
                    (contract_a, plan_a.audit.clone()),
                ],
            );
            self.settle_transfer(&spec.bank_a, contract_a, &plan_a, &settle_events)?;
            self.settle_transfer(&spec.bank_b, contract_b, &plan_b, &settle_events)?;
        }

        Ok(self.receipt(
            "dvp",
            json!({
                "bank_a": spec.bank_a, "bank_b": spec.bank_b,
                "token_a": spec.token_a, "token_b": spec.token_b,
                "delivery": deal_hash, "outcome": outcome,
                "pending": self.world.dvp.pending_count(),
            }),
        ))
    }

    fn build_dvp_leg(
        &mut self,
        plan: &TransferPlan,
        delivery_list: &[TokenPreimage],
        delivery_type: U256,
        dvp_address: Address,
    ) -> Result<DvpTransaction, HarnessError> {
        let payment_public = Delegated {
            inner: plan.public.clone(),
            delegate: dvp_address,
            binding: delegate_binding(&dvp_address, &witness_digest(&plan.witness)),
        };
        let payment_proof =
            prove_delegated_transfer(&self.backend, &plan.witness, &payment_public)?;
        let payment = Envelope {
            public: payment_public,
            proof: payment_proof,
        };

        let dvp_wit = DvpWitness {
            payment: plan.witness.clone(),
            delivery: delivery_list.to_vec(),
        };
        let public = DvpPublicInputs {
            payment,
            delivery: delivery_hash(delivery_list),
            delivery_type,
            dvp_binding: dvp_binding(&dvp_wit),
        };
        let proof = prove_dvp(&self.backend, &dvp_wit, &public)?;
        Ok(Envelope { public, proof })
    }

    /// Consumes the first input of a planned payment through an ordinary
    /// self-transfer, making the plan's nullifier unusable.
    fn sabotage_spend(
        &mut self,
        bank: &str,
        contract: Address,
        plan: &TransferPlan,
    ) -> Result<(), HarnessError> {
        let first_input = plan.witness.inputs[0].img.clone();
        let bank_p = self.participant(bank)?.clone();

        let idx = bank_p
            .wallet
            .iter()
            .position(|e| e.contract == contract && e.token == first_input)
            .ok_or(HarnessError::BadWalletIndex(0))?;
        let (inputs, _) = self.input_paths(bank, &[idx])?;
        let token_type = self.world.token(&contract)?.config.token_type;
        let grab_nonce = self.world.token(&contract)?.config.grab_nonce;
        let nonce = self.fresh_nonce();
        let replacement = TokenPreimage {
            owner: bank_p.account,
            token_type,
            nonce,
            amount: first_input.amount,
            id: first_input.id,
            payload: None,
        };
        let outputs = vec![replacement.clone()];
        let gk = bank_p.grabber_keys[&contract];
        let wit = TransferWitness {
            inputs: inputs.clone(),
            outputs: outputs.clone(),
            sk: bank_p.sk,
            audit_pk: self.auditor_pk,
            burn_amount: U256::zero(),
            burn_ids: vec![],
        };
        let audit = AuditPreimage {
            inputs: inputs.iter().map(|i| i.img.clone()).collect(),
            outputs: outputs.clone(),
            burn_amount: U256::zero(),
            burn_ids: vec![],
        };
        let public = TransferPublicInputs {
            nulls: vec![nullify(&first_input, &bank_p.sk)?],
            grabs: vec![grab_token(&first_input, &gk)],
            comms: outputs.iter().map(commit).collect(),
            token_type,
            root: self.world.token(&contract)?.tree().root(),
            grab_nonce,
            burn_commitment: burn_commitment(&wit),
            audit_account: self.world.token(&contract)?.config.audit_account,
            audit_data: build_audit_data(&self.auditor_pk, &audit),
        };
        let proof = prove_transfer(&self.backend, &wit, &public)?;
        let events = self.apply(
            bank_p.address,
            Transaction::Transfer {
                token: contract,
                tx: Envelope {
                    public: public.clone(),
                    proof,
                },
            },
        )?;
        self.record_ground_truth(&events, &[(contract, audit.clone())]);
        let plan_like = TransferPlan {
            input_indices: vec![idx],
            witness: wit,
            public,
            outputs_for: vec![(bank.to_string(), replacement)],
            audit,
        };
        self.settle_transfer(bank, contract, &plan_like, &events)
    }

    // -- invariants ---------------------------------------------------------------

    /// After every flow: each wallet token's commitment is an unspent leaf.
    pub fn reconcile_wallets(&self) -> Result<(), HarnessError> {
        for p in self.participants.values() {
            for entry in &p.wallet {
                let contract = self.world.token(&entry.contract)?;
                let leaf = contract
                    .tree()
                    .leaves()
                    .get(entry.leaf_index as usize)
                    .copied();
                let comm = commit(&entry.token);
                if leaf != Some(comm.0) {
                    return Err(HarnessError::Reconciliation(format!(
                        "{}: wallet token at leaf {} does not match the tree",
                        p.name, entry.leaf_index
                    )));
                }
                let null = nullify(&entry.token, &p.sk)?;
                if contract.is_spent(&null) {
                    return Err(HarnessError::Reconciliation(format!(
                        "{}: wallet token at leaf {} already nullified",
                        p.name, entry.leaf_index
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ledger-wide conservation: minted mass equals hidden mass (ground
    /// truth) plus open balances plus burned mass, per contract, exactly.
    /// NFT ids must likewise be partitioned across hidden, open, and burned.
    pub fn check_conservation(&self) -> Result<(), HarnessError> {
        for (addr, tally) in &self.tallies {
            let contract = self.world.token(addr)?;
            let open: U256 = contract
                .balances()
                .values()
                .fold(U256::zero(), |acc, v| acc.saturating_add(*v));
            let hidden = tally.hidden_mass();
            let rhs = hidden.saturating_add(open).saturating_add(tally.burned);
            if tally.minted != rhs {
                return Err(HarnessError::Conservation(format!(
                    "{}: minted {} != hidden {} + open {} + burned {}",
                    contract.config.name, tally.minted, hidden, open, tally.burned
                )));
            }

            let mut accounted = tally.hidden_ids();
            for account in contract.balances().keys() {
                accounted.extend(contract.nfts_of(account));
            }
            let mut all_open: BTreeSet<U256> = BTreeSet::new();
            for p in self.participants.values() {
                all_open.extend(contract.nfts_of(&p.account));
            }
            accounted.extend(all_open);
            accounted.extend(tally.burned_ids.iter().copied());
            if tally.minted_ids != accounted {
                return Err(HarnessError::Conservation(format!(
                    "{}: NFT ids out of balance",
                    contract.config.name
                )));
            }
        }
        Ok(())
    }
}

/// Payment leg under construction: witness, public inputs, and who receives
/// which output.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    pub input_indices: Vec<usize>,
    pub witness: TransferWitness,
    pub public: TransferPublicInputs,
    pub outputs_for: Vec<(String, TokenPreimage)>,
    pub audit: AuditPreimage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DvpSabotage {
    /// Second leg carries a different delivery hash; no match fires.
    WrongDelivery,
    /// The pending leg's payment input is double-spent before the match.
    SpendPendingLegInput,
    /// The arriving leg's payment input is double-spent before the match.
    SpendArrivingLegInput,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DvpSpec {
    pub bank_a: String,
    pub bank_b: String,
    pub token_a: String,
    pub token_b: String,
    #[serde(default)]
    pub pay_a_amounts: Vec<U256>,
    #[serde(default)]
    pub pay_a_ids: Vec<U256>,
    #[serde(default)]
    pub pay_b_amounts: Vec<U256>,
    #[serde(default)]
    pub pay_b_ids: Vec<U256>,
    #[serde(default = "default_true")]
    pub submit_second_leg: bool,
    #[serde(default)]
    pub sabotage: Option<DvpSabotage>,
}

fn default_true() -> bool {
    true
}

fn fresh_u256(rng: &mut ChaCha20Rng) -> U256 {
    let mut bytes = [0u8; 32];
    rng.fill(&mut bytes);
    let v = U256::from_big_endian(&bytes);
    if v.is_zero() {
        U256::one()
    } else {
        v
    }
}

fn mint_start_index(events: &[Event], contract: Address) -> Option<u64> {
    events.iter().find_map(|e| match &e.body {
        EventBody::Mint { start_index, .. } if e.contract == contract => Some(*start_index),
        _ => None,
    })
}

fn transfer_start_index(events: &[Event], contract: Address) -> Option<u64> {
    events.iter().find_map(|e| match &e.body {
        EventBody::Transfer { start_index, .. } if e.contract == contract => Some(*start_index),
        _ => None,
    })
}

fn revealing_start_index(events: &[Event], contract: Address) -> Option<u64> {
    events.iter().find_map(|e| match &e.body {
        EventBody::RevealingTransfer { start_index, .. } if e.contract == contract => {
            Some(*start_index)
        }
        _ => None,
    })
}

fn hiding_start_index(events: &[Event], contract: Address) -> Option<u64> {
    events.iter().find_map(|e| match &e.body {
        EventBody::HidingTransfer { start_index, .. } if e.contract == contract => {
            Some(*start_index)
        }
        _ => None,
    })
}

fn grab_start_index(events: &[Event], contract: Address) -> Option<u64> {
    events.iter().find_map(|e| match &e.body {
        EventBody::Grab { start_index, .. } if e.contract == contract => Some(*start_index),
        _ => None,
    })
}

fn grab_events_grabbers(events: &[Event], contract: Address) -> Vec<crate::token::TokenGrabber> {
    events
        .iter()
        .filter(|e| e.contract == contract)
        .flat_map(|e| match &e.body {
            EventBody::Grab { grabs, .. } => grabs.clone(),
            _ => vec![],
        })
        .collect()
}
