//! Auditor tooling: opens every `audit_data` blob in an event log with the
//! auditor's key and reconstructs the full consumed/created/burned detail
//! per transaction, with reconciliation totals.

use serde::{Deserialize, Serialize};

use crate::circuits::AuditPreimage;
use crate::crypto::{open_with_key, KeyError, SealedBox};
use crate::ledger::{Event, EventBody};
use crate::token::TokenPreimage;
use crate::types::{Address, SecretKey, U256};

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("audit data is not a well-formed sealed box: {0}")]
    BadBox(#[from] crate::enc::DecodeError),
}

/// Decrypted view of one transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub contract: Address,
    pub seq: u64,
    pub kind: String,
    pub inputs: Vec<TokenPreimage>,
    pub outputs: Vec<TokenPreimage>,
    pub burn_amount: U256,
    pub burn_ids: Vec<U256>,
    /// Clear-side values read from the event itself (revealed outputs or
    /// consumed open amounts), not from the decrypted payload.
    pub clear_created_mass: U256,
    pub clear_consumed_mass: U256,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTotals {
    pub consumed_mass: U256,
    pub hidden_created_mass: U256,
    pub clear_created_mass: U256,
    pub clear_consumed_mass: U256,
    pub burned_mass: U256,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub entries: Vec<AuditEntry>,
    pub totals: AuditTotals,
    /// Consumed hidden mass plus consumed clear mass equals created hidden
    /// mass plus created clear mass plus burned mass, over all audited
    /// transactions.
    pub flows_balanced: bool,
}

fn mass(tokens: &[TokenPreimage]) -> U256 {
    tokens
        .iter()
        .fold(U256::zero(), |acc, t| acc.saturating_add(t.amount))
}

/// Opens every audit blob in the log. A non-auditor key fails on the first
/// blob with `WrongKey`.
pub fn audit_decrypt(auditor_sk: &SecretKey, events: &[Event]) -> Result<AuditReport, AuditError> {
    let mut entries = Vec::new();
    let mut totals = AuditTotals::default();

    for ev in events {
        let (kind, audit_data, clear_created, clear_consumed) = match &ev.body {
            EventBody::Transfer { audit_data, .. } => {
                ("transfer", audit_data, U256::zero(), U256::zero())
            }
            EventBody::RevealingTransfer {
                audit_data,
                clear_outputs,
                ..
            } => (
                "revealing_transfer",
                audit_data,
                mass(clear_outputs),
                U256::zero(),
            ),
            EventBody::HidingTransfer {
                audit_data,
                amount_in,
                ..
            } => ("hiding_transfer", audit_data, U256::zero(), *amount_in),
            _ => continue,
        };

        let sealed = SealedBox::from_bytes(audit_data.as_slice())?;
        let plain = open_with_key(auditor_sk, &sealed)?;
        let pre = AuditPreimage::decode(&plain)?;

        totals.consumed_mass = totals.consumed_mass.saturating_add(mass(&pre.inputs));
        totals.hidden_created_mass = totals.hidden_created_mass.saturating_add(mass(&pre.outputs));
        totals.clear_created_mass = totals.clear_created_mass.saturating_add(clear_created);
        totals.clear_consumed_mass = totals.clear_consumed_mass.saturating_add(clear_consumed);
        totals.burned_mass = totals.burned_mass.saturating_add(pre.burn_amount);

        entries.push(AuditEntry {
            contract: ev.contract,
            seq: ev.seq,
            kind: kind.to_string(),
            inputs: pre.inputs,
            outputs: pre.outputs,
            burn_amount: pre.burn_amount,
            burn_ids: pre.burn_ids,
            clear_created_mass: clear_created,
            clear_consumed_mass: clear_consumed,
        });
    }

    let lhs = totals
        .consumed_mass
        .saturating_add(totals.clear_consumed_mass);
    let rhs = totals
        .hidden_created_mass
        .saturating_add(totals.clear_created_mass)
        .saturating_add(totals.burned_mass);
    Ok(AuditReport {
        schema_version: crate::world::SCHEMA_VERSION,
        entries,
        totals,
        flows_balanced: lhs == rhs,
    })
}

/// Keeps only the named preimage fields in the report's token lists. Known
/// field names: owner, token_type, nonce, amount, id, payload. Used by the
/// operator tooling to control the level of detail exposed.
pub fn filter_report_fields(report: &AuditReport, fields: &[String]) -> serde_json::Value {
    let mut value = serde_json::to_value(report).expect("report serializes");
    if let Some(entries) = value.get_mut("entries").and_then(|e| e.as_array_mut()) {
        for entry in entries {
            for list in ["inputs", "outputs"] {
                if let Some(tokens) = entry.get_mut(list).and_then(|t| t.as_array_mut()) {
                    for token in tokens {
                        if let Some(obj) = token.as_object_mut() {
                            obj.retain(|k, _| fields.iter().any(|f| f == k));
                        }
                    }
                }
            }
        }
    }
    value
}
