//! The DvP matching contract: stores one leg pending under its delivery
//! hash, matches the counter-leg arriving with the same hash, and triggers
//! both delegated transfers atomically. Either both payments execute in the
//! same step or neither does; an inner failure rolls everything back and
//! the stored leg stays pending.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuits::{CircuitId, DvpTransaction, ProofSystem};
use crate::enc::canonical;
use crate::ledger::{Event, EventBody, LedgerError, TokenContract};
use crate::types::{Address, Digest, U256};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DvpError {
    #[error("DvP proof rejected")]
    ProofRejected,
    #[error("no token contract registered for the delivery type")]
    UnknownTokenType,
    #[error("inner delegated transfer failed: {0}")]
    InnerTransferFailed(LedgerError),
    #[error("caller is not the deployer")]
    NotAuthority,
}

/// DvP contract state. Pending legs are keyed by their delivery hash; both
/// counterparties of a deal carry the same hash, computed off-chain over the
/// agreed delivery preimages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DvpContract {
    pub address: Address,
    pub deployer: Address,
    contracts: BTreeMap<U256, Address>,
    pending: BTreeMap<Digest, DvpTransaction>,
    seq: u64,
}

impl DvpContract {
    pub fn new(address: Address, deployer: Address) -> Self {
        DvpContract {
            address,
            deployer,
            contracts: BTreeMap::new(),
            pending: BTreeMap::new(),
            seq: 0,
        }
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_keys(&self) -> Vec<Digest> {
        self.pending.keys().copied().collect()
    }

    pub fn token_contract_for(&self, token_type: &U256) -> Option<Address> {
        self.contracts.get(token_type).copied()
    }

    fn next_event(&mut self, body: EventBody) -> Event {
        let seq = self.seq;
        self.seq += 1;
        Event {
            contract: self.address,
            seq,
            body,
        }
    }

    /// Deployer-only registration of the token contract handling one token
    /// type. Re-registration overwrites.
    pub fn register_token_contract(
        &mut self,
        caller: Address,
        token_type: U256,
        contract: Address,
    ) -> Result<Vec<Event>, DvpError> {
        if caller != self.deployer {
            return Err(DvpError::NotAuthority);
        }
        self.contracts.insert(token_type, contract);
        Ok(Vec::new())
    }

    /// Processes one DvP leg. With no counter-leg pending under the same
    /// delivery hash, the leg is stored. Otherwise both stored and arriving
    /// payments are executed as delegated transfers with this contract as
    /// the caller; any inner failure restores the token contracts and the
    /// pending slot.
    pub fn dvp(
        &mut self,
        backend: &dyn ProofSystem,
        t1: DvpTransaction,
        _caller: Address,
        tokens: &mut BTreeMap<Address, TokenContract>,
    ) -> Result<Vec<Event>, DvpError> {
        if !backend.verify(&t1.proof, CircuitId::Dvp, &canonical(&t1.public)) {
            return Err(DvpError::ProofRejected);
        }
        if !self.contracts.contains_key(&t1.public.delivery_type) {
            return Err(DvpError::UnknownTokenType);
        }

        let delivery = t1.public.delivery;
        let Some(t2) = self.pending.get(&delivery).cloned() else {
            let event = self.next_event(EventBody::DvpPending {
                delivery,
                delivery_type: t1.public.delivery_type,
            });
            self.pending.insert(delivery, t1);
            return Ok(vec![event]);
        };

        // t1 pays in the type t2 expects and vice versa.
        let token1_addr = self
            .contracts
            .get(&t2.public.delivery_type)
            .copied()
            .ok_or(DvpError::UnknownTokenType)?;
        let token2_addr = self
            .contracts
            .get(&t1.public.delivery_type)
            .copied()
            .ok_or(DvpError::UnknownTokenType)?;

        let mut snapshots: Vec<(Address, TokenContract)> = Vec::new();
        for addr in [token1_addr, token2_addr] {
            if !snapshots.iter().any(|(a, _)| *a == addr) {
                let contract = tokens.get(&addr).ok_or(DvpError::UnknownTokenType)?;
                snapshots.push((addr, contract.clone()));
            }
        }

        let result = (|| -> Result<Vec<Event>, LedgerError> {
            let mut events = Vec::new();
            let token1 = tokens.get_mut(&token1_addr).expect("snapshotted above");
            events.extend(token1.delegated_transfer(backend, &t1.public.payment, self.address)?);
            let token2 = tokens.get_mut(&token2_addr).expect("snapshotted above");
            events.extend(token2.delegated_transfer(backend, &t2.public.payment, self.address)?);
            Ok(events)
        })();

        match result {
            Ok(mut events) => {
                self.pending.remove(&delivery);
                events.push(self.next_event(EventBody::DvpMatched { delivery }));
                Ok(events)
            }
            Err(inner) => {
                for (addr, snapshot) in snapshots {
                    tokens.insert(addr, snapshot);
                }
                Err(DvpError::InnerTransferFailed(inner))
            }
        }
    }
}
