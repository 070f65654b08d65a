//! Scenario files: a seed, a participant/contract setup, an ordered step
//! list, and expected-outcome assertions. Replaying the same scenario file
//! is bit-identical: all randomness derives from the seed.

use serde::{Deserialize, Serialize};

use crate::harness::audit::{audit_decrypt, AuditReport};
use crate::harness::{DvpSpec, Harness, HarnessError, HarnessSetup};
use crate::ledger::Event;
use crate::types::{Digest, U256};
use crate::world::{ReplayFile, WorldSnapshot};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
    #[error("step {index} ({step}) failed: {source}")]
    StepFailed {
        index: usize,
        step: String,
        #[source]
        source: HarnessError,
    },
    #[error("step {index} ({step}) succeeded but was expected to fail with `{expected}`")]
    ExpectedFailure {
        index: usize,
        step: String,
        expected: String,
    },
    #[error("step {index} ({step}) failed with `{got}`, expected `{expected}`")]
    WrongFailure {
        index: usize,
        step: String,
        expected: String,
        got: String,
    },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Audit(#[from] crate::harness::audit::AuditError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "flow", rename_all = "snake_case")]
pub enum Step {
    Issue {
        bank: String,
        token: String,
        amount: U256,
    },
    IssueNft {
        bank: String,
        token: String,
        id: U256,
    },
    HiddenIssue {
        issuer: String,
        bank: String,
        token: String,
        amount: U256,
    },
    DelegatedIssue {
        delegate: String,
        bank: String,
        token: String,
        amount: U256,
    },
    DelegatedTransfer {
        delegate: String,
        payer: String,
        payee: String,
        token: String,
        amounts: Vec<U256>,
    },
    Transfer {
        payer: String,
        payee: String,
        token: String,
        #[serde(default)]
        amounts: Vec<U256>,
        #[serde(default)]
        ids: Vec<U256>,
    },
    Withdraw {
        payer: String,
        token: String,
        amount: U256,
    },
    Reveal {
        participant: String,
        token: String,
        contract: String,
        #[serde(default)]
        amount: U256,
        #[serde(default)]
        ids: Vec<U256>,
    },
    Hide {
        caller: String,
        owner: String,
        token: String,
        #[serde(default)]
        amount: U256,
        #[serde(default)]
        ids: Vec<U256>,
        #[serde(default)]
        use_account_in: bool,
    },
    Grab {
        victim: String,
        token: String,
        #[serde(default)]
        wallet_index: usize,
        #[serde(default = "default_true_step")]
        noticed: bool,
    },
    /// Grab aimed at a token the victim already spent; used via
    /// `expect_fail` to show the grabber slot is consumed.
    GrabSpent {
        victim: String,
        token: String,
        #[serde(default)]
        spent_index: usize,
    },
    Dvp(DvpSpec),
    /// Runs the inner step expecting it to fail; the error display must
    /// contain `error_contains` and the ledger state must be untouched.
    ExpectFail {
        step: Box<Step>,
        error_contains: String,
    },
}

impl Step {
    fn name(&self) -> String {
        match self {
            Step::Issue { .. } => "issue".into(),
            Step::IssueNft { .. } => "issue_nft".into(),
            Step::HiddenIssue { .. } => "hidden_issue".into(),
            Step::DelegatedIssue { .. } => "delegated_issue".into(),
            Step::DelegatedTransfer { .. } => "delegated_transfer".into(),
            Step::Transfer { .. } => "transfer".into(),
            Step::Withdraw { .. } => "withdraw".into(),
            Step::Reveal { .. } => "reveal".into(),
            Step::Hide { .. } => "hide".into(),
            Step::Grab { .. } => "grab".into(),
            Step::GrabSpent { .. } => "grab_spent".into(),
            Step::Dvp(_) => "dvp".into(),
            Step::ExpectFail { step, .. } => format!("expect_fail({})", step.name()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Assertion {
    /// Total fungible amount across a participant's wallet on one contract.
    WalletTotal {
        participant: String,
        token: String,
        expected: U256,
    },
    /// Number of wallet entries on one contract.
    WalletCount {
        participant: String,
        token: String,
        expected: usize,
    },
    /// Open balance held by a contract participant's account.
    OpenBalance {
        token: String,
        contract: String,
        expected: U256,
    },
    ReserveBalance {
        bank: String,
        expected: U256,
    },
    NullifierCount {
        token: String,
        expected: usize,
    },
    PendingDvp {
        expected: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    pub tokens: Vec<crate::harness::TokenSpec>,
    pub participants: Vec<String>,
    #[serde(default)]
    pub contract_participants: Vec<String>,
    #[serde(default)]
    pub hidden_issuers: Vec<String>,
    #[serde(default)]
    pub public_issuers: Vec<String>,
    #[serde(default = "default_reserve")]
    pub initial_reserve: U256,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_schema_version() -> u32 {
    crate::world::SCHEMA_VERSION
}

fn default_true_step() -> bool {
    true
}

fn default_reserve() -> U256 {
    U256::from(1_000_000_000u64)
}

/// Everything a run produces.
pub struct RunOutput {
    pub events: Vec<Event>,
    pub snapshot: WorldSnapshot,
    pub snapshot_digest: Digest,
    pub replay: ReplayFile,
    pub receipts: Vec<crate::harness::Receipt>,
    pub audit_report: AuditReport,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Scenario, ScenarioError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn setup(&self, seed_override: Option<u64>) -> HarnessSetup {
        HarnessSetup {
            seed: seed_override.unwrap_or(self.seed),
            tokens: self.tokens.clone(),
            participants: self.participants.clone(),
            contract_participants: self.contract_participants.clone(),
            hidden_issuers: self.hidden_issuers.clone(),
            public_issuers: self.public_issuers.clone(),
            initial_reserve: self.initial_reserve,
        }
    }

    /// Runs every step, enforcing wallet reconciliation and conservation
    /// after each one, then checks the assertions.
    pub fn run(&self, seed_override: Option<u64>) -> Result<RunOutput, ScenarioError> {
        let mut harness = Harness::new(&self.setup(seed_override))?;
        for (index, step) in self.steps.iter().enumerate() {
            run_step(&mut harness, step, index)?;
            harness.reconcile_wallets()?;
            harness.check_conservation()?;
        }
        for assertion in &self.assertions {
            check_assertion(&harness, assertion)?;
        }

        let audit_report = audit_decrypt(&harness.auditor_sk, &harness.world.events)?;
        let snapshot = harness.world.snapshot();
        let snapshot_digest = crate::world::snapshot_digest(&snapshot);
        Ok(RunOutput {
            events: harness.world.events.clone(),
            snapshot,
            snapshot_digest,
            replay: harness.world.replay_file(),
            receipts: harness.receipts.clone(),
            audit_report,
        })
    }
}

fn run_step(harness: &mut Harness, step: &Step, index: usize) -> Result<(), ScenarioError> {
    match step {
        Step::ExpectFail {
            step,
            error_contains,
        } => {
            let before = harness.world.state_digest();
            match execute(harness, step) {
                Ok(()) => Err(ScenarioError::ExpectedFailure {
                    index,
                    step: step.name(),
                    expected: error_contains.clone(),
                }),
                Err(e) => {
                    let msg = error_chain(&e);
                    if !msg.contains(error_contains.as_str()) {
                        return Err(ScenarioError::WrongFailure {
                            index,
                            step: step.name(),
                            expected: error_contains.clone(),
                            got: msg,
                        });
                    }
                    let after = harness.world.state_digest();
                    if before != after {
                        return Err(ScenarioError::AssertionFailed(format!(
                            "step {index}: failed step mutated ledger state"
                        )));
                    }
                    Ok(())
                }
            }
        }
        other => execute(harness, other).map_err(|source| ScenarioError::StepFailed {
            index,
            step: other.name(),
            source,
        }),
    }
}

fn execute(harness: &mut Harness, step: &Step) -> Result<(), HarnessError> {
    match step {
        Step::Issue { bank, token, amount } => harness.issue(bank, token, *amount).map(drop),
        Step::IssueNft { bank, token, id } => harness.issue_nft(bank, token, *id).map(drop),
        Step::HiddenIssue {
            issuer,
            bank,
            token,
            amount,
        } => harness.hidden_issue(issuer, bank, token, *amount).map(drop),
        Step::DelegatedIssue {
            delegate,
            bank,
            token,
            amount,
        } => harness
            .delegated_issue(delegate, bank, token, *amount)
            .map(drop),
        Step::DelegatedTransfer {
            delegate,
            payer,
            payee,
            token,
            amounts,
        } => harness
            .delegated_transfer_via(delegate, payer, payee, token, amounts)
            .map(drop),
        Step::Transfer {
            payer,
            payee,
            token,
            amounts,
            ids,
        } => harness.transfer(payer, payee, token, amounts, ids).map(drop),
        Step::Withdraw { payer, token, amount } => {
            harness.withdraw(payer, token, *amount).map(drop)
        }
        Step::Reveal {
            participant,
            token,
            contract,
            amount,
            ids,
        } => harness
            .reveal(participant, token, contract, *amount, ids)
            .map(drop),
        Step::Hide {
            caller,
            owner,
            token,
            amount,
            ids,
            use_account_in,
        } => harness
            .hide(caller, owner, token, *amount, ids, *use_account_in)
            .map(drop),
        Step::Grab {
            victim,
            token,
            wallet_index,
            noticed,
        } => harness
            .grab(victim, token, *wallet_index, *noticed)
            .map(drop),
        Step::GrabSpent {
            victim,
            token,
            spent_index,
        } => harness.grab_spent(victim, token, *spent_index).map(drop),
        Step::Dvp(spec) => harness.dvp(spec).map(drop),
        Step::ExpectFail { .. } => unreachable!("handled by run_step"),
    }
}

fn error_chain(e: &HarnessError) -> String {
    use std::error::Error as _;
    let mut msg = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    msg
}

fn check_assertion(harness: &Harness, assertion: &Assertion) -> Result<(), ScenarioError> {
    let fail = |msg: String| Err(ScenarioError::AssertionFailed(msg));
    match assertion {
        Assertion::WalletTotal {
            participant,
            token,
            expected,
        } => {
            let contract = harness.token_address(token)?;
            let actual = harness.participant(participant)?.wallet_total(&contract);
            if actual != *expected {
                return fail(format!(
                    "wallet_total({participant}, {token}): expected {expected}, got {actual}"
                ));
            }
            Ok(())
        }
        Assertion::WalletCount {
            participant,
            token,
            expected,
        } => {
            let contract = harness.token_address(token)?;
            let actual = harness.participant(participant)?.wallet_on(&contract).len();
            if actual != *expected {
                return fail(format!(
                    "wallet_count({participant}, {token}): expected {expected}, got {actual}"
                ));
            }
            Ok(())
        }
        Assertion::OpenBalance {
            token,
            contract,
            expected,
        } => {
            let addr = harness.token_address(token)?;
            let account = harness.participant(contract)?.account;
            let actual = harness
                .world
                .token(&addr)
                .map_err(HarnessError::from)?
                .balance_of(&account);
            if actual != *expected {
                return fail(format!(
                    "open_balance({token}, {contract}): expected {expected}, got {actual}"
                ));
            }
            Ok(())
        }
        Assertion::ReserveBalance { bank, expected } => {
            let actual = harness
                .reserves
                .get(bank)
                .copied()
                .unwrap_or_default();
            if actual != *expected {
                return fail(format!(
                    "reserve_balance({bank}): expected {expected}, got {actual}"
                ));
            }
            Ok(())
        }
        Assertion::NullifierCount { token, expected } => {
            let addr = harness.token_address(token)?;
            let actual = harness
                .world
                .token(&addr)
                .map_err(HarnessError::from)?
                .nullifier_count();
            if actual != *expected {
                return fail(format!(
                    "nullifier_count({token}): expected {expected}, got {actual}"
                ));
            }
            Ok(())
        }
        Assertion::PendingDvp { expected } => {
            let actual = harness.world.dvp.pending_count();
            if actual != *expected {
                return fail(format!("pending_dvp: expected {expected}, got {actual}"));
            }
            Ok(())
        }
    }
}
