//! Container for the deployed contracts: applies transactions strictly
//! sequentially, keeps the global event log and a journal of accepted
//! transactions, and supports bit-exact replay from that journal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuits::{
    DelegatedHidingTransaction, DelegatedMintTransaction, DelegatedRevealingTransaction,
    DelegatedTransferTransaction, DvpTransaction, GrabTransaction, HidingTransaction,
    MintTransaction, ProofSystem, RevealingTransaction, TransferTransaction,
};
use crate::crypto::hash256;
use crate::dvp::{DvpContract, DvpError};
use crate::ledger::{Event, LedgerError, TokenContract, TokenContractConfig};
use crate::types::{Account, Address, Digest, U256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("no token contract deployed at {0}")]
    UnknownContract(Address),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Dvp(#[from] DvpError),
}

/// Deployment parameters for the whole system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemConfig {
    pub schema_version: u32,
    pub tokens: Vec<TokenContractConfig>,
    pub dvp_address: Address,
    pub dvp_deployer: Address,
}

/// Every externally-submitted operation, in a replayable form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transaction {
    RegisterIssuer {
        token: Address,
        issuer: Address,
        enabled: bool,
    },
    RegisterHiddenIssuer {
        token: Address,
        account: Account,
    },
    RegisterContractAccount {
        token: Address,
        contract: Address,
        account: Account,
    },
    RegisterTokenContract {
        token_type: U256,
        contract: Address,
    },
    Mint {
        token: Address,
        tx: MintTransaction,
    },
    Transfer {
        token: Address,
        tx: TransferTransaction,
    },
    RevealingTransfer {
        token: Address,
        tx: RevealingTransaction,
    },
    HidingTransfer {
        token: Address,
        tx: HidingTransaction,
    },
    Grab {
        token: Address,
        tx: GrabTransaction,
    },
    DelegatedMint {
        token: Address,
        tx: DelegatedMintTransaction,
    },
    DelegatedTransfer {
        token: Address,
        tx: DelegatedTransferTransaction,
    },
    DelegatedRevealingTransfer {
        token: Address,
        tx: DelegatedRevealingTransaction,
    },
    DelegatedHidingTransfer {
        token: Address,
        tx: DelegatedHidingTransaction,
    },
    Dvp {
        tx: DvpTransaction,
    },
}

/// One accepted transaction with its authenticated caller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub caller: Address,
    pub tx: Transaction,
}

/// Snapshot of all contract state; hashing its canonical JSON gives the
/// state digest used by determinism checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub schema_version: u32,
    pub config: SystemConfig,
    pub tokens: BTreeMap<Address, TokenContract>,
    pub dvp: DvpContract,
}

/// Ordered transaction list that reproduces a world bit-exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayFile {
    pub schema_version: u32,
    pub config: SystemConfig,
    pub entries: Vec<JournalEntry>,
}

#[derive(Debug, thiserror::Error)]
#[error("replay failed at index {index}: {source}")]
pub struct ReplayError {
    pub index: usize,
    #[source]
    pub source: WorldError,
}

pub struct World {
    pub config: SystemConfig,
    pub tokens: BTreeMap<Address, TokenContract>,
    pub dvp: DvpContract,
    pub events: Vec<Event>,
    pub journal: Vec<JournalEntry>,
}

impl World {
    pub fn new(config: SystemConfig) -> Self {
        let tokens = config
            .tokens
            .iter()
            .map(|cfg| (cfg.address, TokenContract::new(cfg.clone())))
            .collect();
        let dvp = DvpContract::new(config.dvp_address, config.dvp_deployer);
        World {
            config,
            tokens,
            dvp,
            events: Vec::new(),
            journal: Vec::new(),
        }
    }

    pub fn token(&self, address: &Address) -> Result<&TokenContract, WorldError> {
        self.tokens
            .get(address)
            .ok_or(WorldError::UnknownContract(*address))
    }

    fn token_mut(&mut self, address: &Address) -> Result<&mut TokenContract, WorldError> {
        self.tokens
            .get_mut(address)
            .ok_or(WorldError::UnknownContract(*address))
    }

    /// Applies one transaction. On success the events are appended to the
    /// global log and the (caller, transaction) pair is journaled; on error
    /// no state changes.
    pub fn apply(
        &mut self,
        backend: &dyn ProofSystem,
        caller: Address,
        tx: Transaction,
    ) -> Result<Vec<Event>, WorldError> {
        let events = match &tx {
            Transaction::RegisterIssuer { token, issuer, enabled } => {
                self.token_mut(token)?.register_issuer(caller, *issuer, *enabled)?
            }
            Transaction::RegisterHiddenIssuer { token, account } => {
                self.token_mut(token)?.register_hidden_issuer(caller, *account)?
            }
            Transaction::RegisterContractAccount { token, contract, account } => self
                .token_mut(token)?
                .register_contract_account(caller, *contract, *account)?,
            Transaction::RegisterTokenContract { token_type, contract } => {
                self.dvp.register_token_contract(caller, *token_type, *contract)?
            }
            Transaction::Mint { token, tx } => self.token_mut(token)?.mint(backend, tx, caller)?,
            Transaction::Transfer { token, tx } => self.token_mut(token)?.transfer(backend, tx)?,
            Transaction::RevealingTransfer { token, tx } => {
                self.token_mut(token)?.revealing_transfer(backend, tx)?
            }
            Transaction::HidingTransfer { token, tx } => {
                self.token_mut(token)?.hiding_transfer(backend, tx, caller)?
            }
            Transaction::Grab { token, tx } => self.token_mut(token)?.grab(backend, tx, caller)?,
            Transaction::DelegatedMint { token, tx } => {
                self.token_mut(token)?.delegated_mint(backend, tx, caller)?
            }
            Transaction::DelegatedTransfer { token, tx } => {
                self.token_mut(token)?.delegated_transfer(backend, tx, caller)?
            }
            Transaction::DelegatedRevealingTransfer { token, tx } => self
                .token_mut(token)?
                .delegated_revealing_transfer(backend, tx, caller)?,
            Transaction::DelegatedHidingTransfer { token, tx } => self
                .token_mut(token)?
                .delegated_hiding_transfer(backend, tx, caller)?,
            Transaction::Dvp { tx } => {
                self.dvp
                    .dvp(backend, tx.clone(), caller, &mut self.tokens)?
            }
        };
        self.journal.push(JournalEntry { caller, tx });
        self.events.extend(events.iter().cloned());
        Ok(events)
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            schema_version: SCHEMA_VERSION,
            config: self.config.clone(),
            tokens: self.tokens.clone(),
            dvp: self.dvp.clone(),
        }
    }

    /// Hash of the canonical JSON snapshot.
    pub fn state_digest(&self) -> Digest {
        snapshot_digest(&self.snapshot())
    }

    pub fn replay_file(&self) -> ReplayFile {
        ReplayFile {
            schema_version: SCHEMA_VERSION,
            config: self.config.clone(),
            entries: self.journal.clone(),
        }
    }

    /// Rebuilds a world by reapplying an ordered transaction list. Errors
    /// name the offending index.
    pub fn replay(backend: &dyn ProofSystem, file: &ReplayFile) -> Result<World, ReplayError> {
        let mut world = World::new(file.config.clone());
        for (index, entry) in file.entries.iter().enumerate() {
            world
                .apply(backend, entry.caller, entry.tx.clone())
                .map_err(|source| ReplayError { index, source })?;
        }
        Ok(world)
    }
}

pub fn snapshot_digest(snapshot: &WorldSnapshot) -> Digest {
    hash256(&serde_json::to_vec(snapshot).expect("snapshot serializes"))
}
