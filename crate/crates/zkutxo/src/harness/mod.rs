//! Multi-party scenario engine: participants, the off-chain channel, the
//! authority and auditor roles, end-to-end flows, scenario files, and audit
//! tooling.

pub mod audit;
mod flows;
pub mod scenario;

pub use flows::{
    ChannelMessage, ContractTally, DvpSabotage, DvpSpec, GroundTruthEntry, Harness, HarnessError,
    HarnessSetup, MessageKind, Participant, Receipt, TokenSpec, TransferPlan, WalletEntry,
    AUTHORITY,
};
