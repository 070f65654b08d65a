use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::crypto::{
    create_grabber_key, derive_public_key, get_account, open_with_key, CommitmentTree, SealedBox,
};
use crate::token::{commit, grab_token, nullify, TokenPreimage};
use crate::types::{Account, GrabberKey, SecretKey};

/// Honest single-owner setup over a small tree.
struct Fixture {
    backend: ReferenceBackend,
    tree: CommitmentTree,
    sk: SecretKey,
    account: Account,
    auditor_sk: SecretKey,
    audit_pk: PublicKey,
    audit_account: Account,
    token_type: U256,
    grab_nonce: U256,
    gk: GrabberKey,
    rng: ChaCha20Rng,
}

impl Fixture {
    fn new(seed: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sk = SecretKey(U256::from(rng.random::<u64>() | 1));
        let auditor_sk = SecretKey(U256::from(rng.random::<u64>() | 1));
        let audit_pk = derive_public_key(&auditor_sk).unwrap();
        let grab_nonce = U256::from(rng.random::<u64>());
        Fixture {
            backend: ReferenceBackend,
            tree: CommitmentTree::new(6),
            account: get_account(&sk).unwrap(),
            audit_account: crate::crypto::account_of(&audit_pk),
            token_type: U256::from(7u64),
            grab_nonce,
            gk: create_grabber_key(&sk, grab_nonce).unwrap(),
            sk,
            auditor_sk,
            audit_pk,
            rng,
        }
    }

    fn nonce(&mut self) -> U256 {
        U256::from(self.rng.random::<u64>() | 1)
    }

    fn ft(&mut self, amount: u64) -> TokenPreimage {
        let nonce = self.nonce();
        TokenPreimage::fungible(self.account, self.token_type, nonce, U256::from(amount))
    }

    fn nft(&mut self, id: u64) -> TokenPreimage {
        let nonce = self.nonce();
        TokenPreimage::nonfungible(self.account, self.token_type, nonce, U256::from(id))
    }

    /// Appends the commitments and returns input img/path pairs against the
    /// new root.
    fn fund(&mut self, tokens: &[TokenPreimage]) -> Vec<ImgPath> {
        let start = self.tree.next_index();
        let leaves: Vec<_> = tokens.iter().map(|t| commit(t).0).collect();
        self.tree.append(&leaves).unwrap();
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| ImgPath {
                img: t.clone(),
                path: self.tree.proof_for(start + i).unwrap(),
            })
            .collect()
    }

    fn audit_for(
        &self,
        inputs: &[ImgPath],
        outputs: &[TokenPreimage],
        burn_amount: U256,
        burn_ids: &[U256],
    ) -> (HexBytes, AuditPreimage) {
        let pre = AuditPreimage {
            inputs: inputs.iter().map(|i| i.img.clone()).collect(),
            outputs: outputs.to_vec(),
            burn_amount,
            burn_ids: burn_ids.to_vec(),
        };
        (build_audit_data(&self.audit_pk, &pre), pre)
    }

    /// Honest transfer instance over freshly funded inputs.
    fn transfer_instance(
        &mut self,
        input_amounts: &[u64],
        output_amounts: &[u64],
        burn_amount: u64,
    ) -> (TransferWitness, TransferPublicInputs) {
        let input_tokens: Vec<_> = input_amounts.iter().map(|a| self.ft(*a)).collect();
        let inputs = self.fund(&input_tokens);
        let outputs: Vec<_> = output_amounts.iter().map(|a| self.ft(*a)).collect();
        self.assemble(inputs, outputs, U256::from(burn_amount), vec![])
    }

    fn assemble(
        &mut self,
        inputs: Vec<ImgPath>,
        outputs: Vec<TokenPreimage>,
        burn_amount: U256,
        burn_ids: Vec<U256>,
    ) -> (TransferWitness, TransferPublicInputs) {
        let nulls = inputs
            .iter()
            .map(|i| nullify(&i.img, &self.sk).unwrap())
            .collect();
        let grabs = inputs.iter().map(|i| grab_token(&i.img, &self.gk)).collect();
        let comms = outputs.iter().map(commit).collect();
        let (audit_data, _) = self.audit_for(&inputs, &outputs, burn_amount, &burn_ids);
        let wit = TransferWitness {
            inputs,
            outputs,
            sk: self.sk,
            audit_pk: self.audit_pk,
            burn_amount,
            burn_ids,
        };
        let public = TransferPublicInputs {
            nulls,
            grabs,
            comms,
            token_type: self.token_type,
            root: self.tree.root(),
            grab_nonce: self.grab_nonce,
            burn_commitment: burn_commitment(&wit),
            audit_account: self.audit_account,
            audit_data,
        };
        (wit, public)
    }
}

// -- mint -------------------------------------------------------------------

#[test]
fn mint_public_issuer_round_trip() {
    let mut fx = Fixture::new(1);
    let out = fx.ft(100);
    let wit = MintWitness {
        outputs: vec![out.clone()],
        issuer_sk: None,
        issuer_path: None,
    };
    let public = MintPublicInputs {
        token_type: fx.token_type,
        comms: vec![commit(&out)],
        issuer_root: None,
    };
    let proof = prove_mint(&fx.backend, &wit, &public).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::Mint, &canonical(&public)));
}

#[test]
fn mint_commitment_mismatch_is_named() {
    let mut fx = Fixture::new(2);
    let out = fx.ft(100);
    let other = fx.ft(100);
    let wit = MintWitness {
        outputs: vec![out],
        issuer_sk: None,
        issuer_path: None,
    };
    let public = MintPublicInputs {
        token_type: fx.token_type,
        comms: vec![commit(&other)],
        issuer_root: None,
    };
    let err = prove_mint(&fx.backend, &wit, &public).unwrap_err();
    assert_eq!(err.constraint, "commitment");
}

#[test]
fn mint_hidden_issuer_branches() {
    let mut fx = Fixture::new(3);
    // Issuer tree with four registered accounts; ours sits at index 2.
    let mut issuer_tree = CommitmentTree::new(3);
    let issuer_sks: Vec<SecretKey> =
        (1..=4u64).map(|v| SecretKey(U256::from(v * 1000 + 7))).collect();
    let leaves: Vec<Digest> = issuer_sks
        .iter()
        .map(|sk| hash256(get_account(sk).unwrap().as_bytes()))
        .collect();
    issuer_tree.append(&leaves).unwrap();

    let out = fx.ft(50);
    let comms = vec![commit(&out)];
    let good = MintWitness {
        outputs: vec![out.clone()],
        issuer_sk: Some(issuer_sks[2]),
        issuer_path: Some(issuer_tree.proof_for(2).unwrap()),
    };
    let public = MintPublicInputs {
        token_type: fx.token_type,
        comms: comms.clone(),
        issuer_root: Some(issuer_tree.root()),
    };
    prove_mint(&fx.backend, &good, &public).unwrap();

    // Wrong path (sibling account's) fails the membership check.
    let bad = MintWitness {
        outputs: vec![out],
        issuer_sk: Some(issuer_sks[2]),
        issuer_path: Some(issuer_tree.proof_for(3).unwrap()),
    };
    let err = prove_mint(&fx.backend, &bad, &public).unwrap_err();
    assert_eq!(err.constraint, "root_i");
}

#[test]
fn mint_duplicate_outputs_rejected() {
    let mut fx = Fixture::new(4);
    let out = fx.ft(10);
    let wit = MintWitness {
        outputs: vec![out.clone(), out.clone()],
        issuer_sk: None,
        issuer_path: None,
    };
    let public = MintPublicInputs {
        token_type: fx.token_type,
        comms: vec![commit(&out), commit(&out)],
        issuer_root: None,
    };
    let err = prove_mint(&fx.backend, &wit, &public).unwrap_err();
    assert_eq!(err.constraint, "duplicate_token");
}

// -- transfer predicates ------------------------------------------------------

#[test]
fn check_inputs_honest_and_tampered() {
    let mut fx = Fixture::new(5);
    let (wit, public) = fx.transfer_instance(&[5, 7], &[12], 0);
    assert!(check_inputs(&wit, &public));

    // Nullifier computed with a foreign key.
    let mut wrong_sk = wit.clone();
    wrong_sk.sk = SecretKey(U256::from(424242u64));
    assert!(!check_inputs(&wrong_sk, &public));

    // Stale path: root moved after funding.
    let extra = fx.ft(1);
    fx.tree.append(&[commit(&extra).0]).unwrap();
    let mut moved = public.clone();
    moved.root = fx.tree.root();
    assert!(!check_inputs(&wit, &moved));
}

#[test]
fn check_outputs_examples() {
    let mut fx = Fixture::new(6);
    let (wit, public) = fx.transfer_instance(&[5], &[5], 0);
    assert!(check_outputs(&wit, &public));

    // An output with neither amount nor id is invalid.
    let mut zeroed = wit.clone();
    zeroed.outputs[0].amount = U256::zero();
    assert!(!check_outputs(&zeroed, &public));

    // Duplicated commitment on the public side.
    let two = fx.transfer_instance(&[4, 4], &[4, 4], 0);
    let (wit2, mut pub2) = two;
    pub2.comms[1] = pub2.comms[0];
    assert!(!check_outputs(&wit2, &pub2));
}

#[test]
fn check_burn_zero_burn_commitment_present() {
    let mut fx = Fixture::new(7);
    let (wit, public) = fx.transfer_instance(&[5], &[5], 0);
    assert!(check_burn(&wit, &public));
    // Zero burn still binds: hash over empty items and the witness hash.
    let expected = hash_tagged(domain::DS_BURN, &[&[], &witness_digest(&wit).0]);
    assert_eq!(public.burn_commitment, expected);

    let mut tampered = public.clone();
    tampered.burn_commitment = hash256(b"tampered");
    assert!(!check_burn(&wit, &tampered));
}

#[test]
fn check_burn_duplicate_ids_rejected() {
    let mut fx = Fixture::new(8);
    let (mut wit, _) = fx.transfer_instance(&[5], &[5], 0);
    wit.burn_ids = vec![U256::from(3u64), U256::from(3u64)];
    let public_dummy = fx.transfer_instance(&[1], &[1], 0).1;
    assert!(!check_burn(&wit, &public_dummy));
}

#[test]
fn mass_conservation_examples() {
    let mut fx = Fixture::new(9);
    let (wit, _) = fx.transfer_instance(&[5, 7], &[4, 8], 0);
    assert!(check_mass_conservation(&wit));

    let (bad, _) = fx.transfer_instance(&[5, 7], &[4, 8], 1);
    assert!(!check_mass_conservation(&bad));

    // NFT ids: {1,2} in, {2} out, {1} burned.
    let n1 = fx.nft(1);
    let n2 = fx.nft(2);
    let inputs = fx.fund(&[n1, n2]);
    let out = fx.nft(2);
    let mut out_kept = out.clone();
    out_kept.nonce = fx.nonce();
    let (wit_ids, _) = fx.assemble(inputs, vec![out_kept], U256::zero(), vec![U256::from(1u64)]);
    assert!(check_mass_conservation(&wit_ids));
}

#[test]
fn amount_sum_overflow_detected() {
    assert_eq!(get_amount_sum(&[]).unwrap(), U256::zero());

    let owner = Account([1u8; 32]);
    let t = |amount: U256| TokenPreimage::fungible(owner, U256::one(), U256::one(), amount);
    let five_seven = [t(U256::from(5u64)), t(U256::from(7u64))];
    assert_eq!(get_amount_sum(&five_seven).unwrap(), U256::from(12u64));

    let huge = [t(U256::MAX), t(U256::one())];
    assert_eq!(get_amount_sum(&huge).unwrap_err().constraint, "overflow");
}

#[test]
fn audit_data_round_trips_to_auditor() {
    let mut fx = Fixture::new(10);
    let (wit, public) = fx.transfer_instance(&[5, 7], &[6, 6], 0);
    assert!(check_audit(&wit, &public));

    // The auditor recovers the exact preimage set.
    let sealed = SealedBox::from_bytes(public.audit_data.as_slice()).unwrap();
    let plain = open_with_key(&fx.auditor_sk, &sealed).unwrap();
    let recovered = AuditPreimage::decode(&plain).unwrap();
    assert_eq!(recovered.inputs.len(), 2);
    assert_eq!(recovered.outputs, wit.outputs);
    assert_eq!(recovered.burn_amount, U256::zero());

    // Audit data for a different output set fails the equality.
    let (other_wit, _) = fx.transfer_instance(&[9], &[9], 0);
    let (other_audit, _) = fx.audit_for(&other_wit.inputs, &other_wit.outputs, U256::zero(), &[]);
    let mut tampered = public.clone();
    tampered.audit_data = other_audit;
    assert!(!check_audit(&wit, &tampered));

    // Mismatched audit account.
    let mut wrong_acc = public.clone();
    wrong_acc.audit_account = Account([9u8; 32]);
    assert!(!check_audit(&wit, &wrong_acc));
}

#[test]
fn prove_transfer_full_pipeline() {
    let mut fx = Fixture::new(11);
    let (wit, public) = fx.transfer_instance(&[5, 7], &[4, 8], 0);
    let proof = prove_transfer(&fx.backend, &wit, &public).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::Transfer, &canonical(&public)));

    // Burn consuming part of the mass also proves.
    let (wit_b, pub_b) = fx.transfer_instance(&[10], &[6], 4);
    prove_transfer(&fx.backend, &wit_b, &pub_b).unwrap();

    // NFT pass-through.
    let n = fx.nft(77);
    let inputs = fx.fund(&[n.clone()]);
    let mut out = n;
    out.nonce = fx.nonce();
    let (wit_n, pub_n) = fx.assemble(inputs, vec![out], U256::zero(), vec![]);
    prove_transfer(&fx.backend, &wit_n, &pub_n).unwrap();
}

#[test]
fn prove_transfer_rejects_empty_inputs() {
    let mut fx = Fixture::new(12);
    let (mut wit, mut public) = fx.transfer_instance(&[5], &[5], 0);
    wit.inputs.clear();
    wit.outputs.clear();
    public.nulls.clear();
    public.grabs.clear();
    public.comms.clear();
    let err = prove_transfer(&fx.backend, &wit, &public).unwrap_err();
    assert_eq!(err.constraint, "empty_inputs");
}

// -- revealing ------------------------------------------------------------------

fn revealing_instance(
    fx: &mut Fixture,
    input_amounts: &[u64],
    clear_amount: u64,
    hidden_amount: u64,
) -> (RevealingWitness, RevealingPublicInputs) {
    let contract_account = Account([0xCC; 32]);
    let input_tokens: Vec<_> = input_amounts.iter().map(|a| fx.ft(*a)).collect();
    let inputs = fx.fund(&input_tokens);
    let clear_outputs = if clear_amount == 0 {
        vec![]
    } else {
        vec![TokenPreimage {
            owner: contract_account,
            token_type: fx.token_type,
            nonce: U256::zero(),
            amount: U256::from(clear_amount),
            id: U256::zero(),
            payload: None,
        }]
    };
    let hidden: Vec<TokenPreimage> = if hidden_amount == 0 {
        vec![]
    } else {
        vec![fx.ft(hidden_amount)]
    };
    let nulls = inputs.iter().map(|i| nullify(&i.img, &fx.sk).unwrap()).collect();
    let grabs = inputs.iter().map(|i| grab_token(&i.img, &fx.gk)).collect();
    let (audit_data, _) = fx.audit_for(&inputs, &hidden, U256::zero(), &[]);
    let wit = RevealingWitness {
        inputs,
        sk: fx.sk,
        hidden_outputs: if hidden.is_empty() { None } else { Some(hidden.clone()) },
        audit_pk: fx.audit_pk,
    };
    let public = RevealingPublicInputs {
        nulls,
        grabs,
        hidden_comms: if hidden.is_empty() {
            None
        } else {
            Some(hidden.iter().map(commit).collect())
        },
        clear_outputs,
        token_type: fx.token_type,
        root: fx.tree.root(),
        grab_nonce: fx.grab_nonce,
        audit_data,
        audit_account: fx.audit_account,
    };
    (wit, public)
}

#[test]
fn revealing_full_and_split() {
    let mut fx = Fixture::new(13);
    // Reveal the full amount, no hidden outputs.
    let (wit, public) = revealing_instance(&mut fx, &[10], 10, 0);
    prove_revealing_transfer(&fx.backend, &wit, &public).unwrap();

    // Split: 3 clear + 9 hidden from 12.
    let (wit2, pub2) = revealing_instance(&mut fx, &[12], 3, 9);
    prove_revealing_transfer(&fx.backend, &wit2, &pub2).unwrap();

    // Broken split.
    let (wit3, pub3) = revealing_instance(&mut fx, &[12], 4, 9);
    let err = prove_revealing_transfer(&fx.backend, &wit3, &pub3).unwrap_err();
    assert_eq!(err.constraint, "fungible_mass");
}

#[test]
fn clear_output_nonce_must_be_zero() {
    let mut fx = Fixture::new(14);
    let (wit, mut public) = revealing_instance(&mut fx, &[10], 10, 0);
    public.clear_outputs[0].nonce = U256::one();
    assert!(!check_clear_outputs(&public));
    let err = prove_revealing_transfer(&fx.backend, &wit, &public).unwrap_err();
    assert_eq!(err.constraint, "nonce");

    let (_, mut pub2) = revealing_instance(&mut fx, &[5], 5, 0);
    pub2.clear_outputs[0].token_type = U256::from(99u64);
    assert!(!check_clear_outputs(&pub2));
}

#[test]
fn mass_with_clear_outputs_moves_nft_to_clear_set() {
    let mut fx = Fixture::new(15);
    let n = fx.nft(4);
    let inputs = fx.fund(&[n]);
    let clear = TokenPreimage {
        owner: Account([0xCC; 32]),
        token_type: fx.token_type,
        nonce: U256::zero(),
        amount: U256::zero(),
        id: U256::from(4u64),
        payload: None,
    };
    let nulls = inputs.iter().map(|i| nullify(&i.img, &fx.sk).unwrap()).collect();
    let grabs = inputs.iter().map(|i| grab_token(&i.img, &fx.gk)).collect();
    let (audit_data, _) = fx.audit_for(&inputs, &[], U256::zero(), &[]);
    let wit = RevealingWitness {
        inputs,
        sk: fx.sk,
        hidden_outputs: None,
        audit_pk: fx.audit_pk,
    };
    let public = RevealingPublicInputs {
        nulls,
        grabs,
        hidden_comms: None,
        clear_outputs: vec![clear],
        token_type: fx.token_type,
        root: fx.tree.root(),
        grab_nonce: fx.grab_nonce,
        audit_data,
        audit_account: fx.audit_account,
    };
    assert!(check_mass_with_clear_outputs(&wit, &public));
    prove_revealing_transfer(&fx.backend, &wit, &public).unwrap();
}

// -- hiding ----------------------------------------------------------------------

fn hiding_instance(
    fx: &mut Fixture,
    amount_in: u64,
    out_amounts: &[u64],
    with_account: bool,
) -> (HidingWitness, HidingPublicInputs) {
    let outputs: Vec<_> = out_amounts.iter().map(|a| fx.ft(*a)).collect();
    let pre = AuditPreimage {
        inputs: vec![],
        outputs: outputs.clone(),
        burn_amount: U256::zero(),
        burn_ids: vec![],
    };
    let audit_data = build_audit_data(&fx.audit_pk, &pre);
    let wit = HidingWitness {
        outputs: outputs.clone(),
        sk: if with_account { Some(fx.sk) } else { None },
        audit_pk: fx.audit_pk,
    };
    let public = HidingPublicInputs {
        amount_in: U256::from(amount_in),
        ids_in: vec![],
        account_in: if with_account { Some(fx.account) } else { None },
        comms: outputs.iter().map(commit).collect(),
        token_type: fx.token_type,
        audit_data,
        audit_account: fx.audit_account,
    };
    (wit, public)
}

#[test]
fn hiding_examples() {
    let mut fx = Fixture::new(16);
    let (wit, public) = hiding_instance(&mut fx, 10, &[10], false);
    prove_hiding_transfer(&fx.backend, &wit, &public).unwrap();

    // 10 into {6,4} holds; {6,5} does not.
    let (wit2, pub2) = hiding_instance(&mut fx, 10, &[6, 4], false);
    assert!(check_mass_with_clear_inputs(&wit2, &pub2));
    let (wit3, pub3) = hiding_instance(&mut fx, 10, &[6, 5], false);
    assert!(!check_mass_with_clear_inputs(&wit3, &pub3));

    // acc_i bound to the wrong secret key.
    let (mut wit4, pub4) = hiding_instance(&mut fx, 10, &[10], true);
    wit4.sk = Some(SecretKey(U256::from(31337u64)));
    let err = prove_hiding_transfer(&fx.backend, &wit4, &pub4).unwrap_err();
    assert_eq!(err.constraint, "acc_i");

    // Nothing consumed at all.
    let (wit5, mut pub5) = hiding_instance(&mut fx, 0, &[], false);
    pub5.ids_in.clear();
    let err = prove_hiding_transfer(&fx.backend, &wit5, &pub5).unwrap_err();
    assert_eq!(err.constraint, "empty_input");
}

#[test]
fn hiding_nft_ids() {
    let mut fx = Fixture::new(17);
    let out = fx.nft(4);
    let pre = AuditPreimage {
        inputs: vec![],
        outputs: vec![out.clone()],
        burn_amount: U256::zero(),
        burn_ids: vec![],
    };
    let audit_data = build_audit_data(&fx.audit_pk, &pre);
    let wit = HidingWitness {
        outputs: vec![out.clone()],
        sk: None,
        audit_pk: fx.audit_pk,
    };
    let public = HidingPublicInputs {
        amount_in: U256::zero(),
        ids_in: vec![U256::from(4u64)],
        account_in: None,
        comms: vec![commit(&out)],
        token_type: fx.token_type,
        audit_data,
        audit_account: fx.audit_account,
    };
    prove_hiding_transfer(&fx.backend, &wit, &public).unwrap();
}

// -- grab -------------------------------------------------------------------------

fn grab_instance(fx: &mut Fixture, amount: u64) -> (GrabWitness, GrabPublicInputs, SecretKey) {
    let auth_sk = SecretKey(U256::from(0xAAAAu64));
    let auth_account = get_account(&auth_sk).unwrap();
    let victim_token = fx.ft(amount);
    let inputs = fx.fund(&[victim_token.clone()]);
    let reissued = TokenPreimage::fungible(auth_account, fx.token_type, fx.nonce(), U256::from(amount));
    let wit = GrabWitness {
        inputs,
        outputs: vec![reissued.clone()],
        auth_sk,
        owner_pk: derive_public_key(&fx.sk).unwrap(),
        grabber_key: fx.gk,
    };
    let public = GrabPublicInputs {
        grabs: vec![grab_token(&victim_token, &fx.gk)],
        comms: vec![commit(&reissued)],
        token_type: fx.token_type,
        root: fx.tree.root(),
        grab_nonce: fx.grab_nonce,
        auth_account,
    };
    (wit, public, auth_sk)
}

#[test]
fn grab_honest_and_tampered() {
    let mut fx = Fixture::new(18);
    let (wit, public, _) = grab_instance(&mut fx, 25);
    assert!(check_grab_inputs(&wit, &public));
    let proof = prove_grabber(&fx.backend, &wit, &public).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::Grab, &canonical(&public)));

    // Non-authority secret key.
    let mut bad_auth = wit.clone();
    bad_auth.auth_sk = SecretKey(U256::from(5u64));
    let err = prove_grabber(&fx.backend, &bad_auth, &public).unwrap_err();
    assert_eq!(err.constraint, "auth_acc");

    // Grabber key that does not open to the contract nonce.
    let mut bad_gk = wit.clone();
    bad_gk.grabber_key = GrabberKey(U256::from(123u64));
    let err = prove_grabber(&fx.backend, &bad_gk, &public).unwrap_err();
    assert_eq!(err.constraint, "nonce_g");

    // Stale root.
    let filler = fx.ft(1);
    fx.tree.append(&[commit(&filler).0]).unwrap();
    let mut moved = public.clone();
    moved.root = fx.tree.root();
    assert!(!check_grab_inputs(&wit, &moved));
}

// -- delegation ---------------------------------------------------------------------

#[test]
fn delegate_binding_examples() {
    let mut fx = Fixture::new(19);
    let (wit, public) = fx.transfer_instance(&[5], &[5], 0);
    let delegate = Address::from_name("dvp");
    let env = Delegated {
        inner: public.clone(),
        delegate,
        binding: delegate_binding(&delegate, &witness_digest(&wit)),
    };
    assert!(check_delegate(&wit, &env));
    let proof = prove_delegated_transfer(&fx.backend, &wit, &env).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::DelegatedTransfer, &canonical(&env)));

    // Different delegate address.
    let mut other = env.clone();
    other.delegate = Address::from_name("someone-else");
    assert!(!check_delegate(&wit, &other));
    assert_eq!(
        prove_delegated_transfer(&fx.backend, &wit, &other)
            .unwrap_err()
            .constraint,
        "del_b"
    );

    // Perturbed witness.
    let mut perturbed = wit.clone();
    perturbed.burn_amount = U256::one();
    assert!(!check_delegate(&perturbed, &env));
}

#[test]
fn delegated_inner_violation_propagates() {
    let mut fx = Fixture::new(20);
    let (wit, mut public) = fx.transfer_instance(&[5, 7], &[4, 8], 0);
    // Break mass conservation on the inner public side via the witness.
    let mut bad_wit = wit.clone();
    bad_wit.burn_amount = U256::one();
    public.burn_commitment = burn_commitment(&bad_wit);
    let delegate = Address::from_name("dvp");
    let env = Delegated {
        inner: public,
        delegate,
        binding: delegate_binding(&delegate, &witness_digest(&bad_wit)),
    };
    let err = prove_delegated_transfer(&fx.backend, &bad_wit, &env).unwrap_err();
    assert_eq!(err.constraint, "fungible_mass");
}

#[test]
fn delegated_mint_and_revealing_and_hiding() {
    let mut fx = Fixture::new(21);
    let delegate = Address::from_name("minting-desk");

    let out = fx.ft(9);
    let mint_wit = MintWitness {
        outputs: vec![out.clone()],
        issuer_sk: None,
        issuer_path: None,
    };
    let mint_env = Delegated {
        inner: MintPublicInputs {
            token_type: fx.token_type,
            comms: vec![commit(&out)],
            issuer_root: None,
        },
        delegate,
        binding: delegate_binding(&delegate, &witness_digest(&mint_wit)),
    };
    prove_delegated_mint(&fx.backend, &mint_wit, &mint_env).unwrap();

    let (rev_wit, rev_pub) = revealing_instance(&mut fx, &[8], 8, 0);
    let rev_env = Delegated {
        inner: rev_pub,
        delegate,
        binding: delegate_binding(&delegate, &witness_digest(&rev_wit)),
    };
    prove_delegated_revealing_transfer(&fx.backend, &rev_wit, &rev_env).unwrap();

    let (hid_wit, hid_pub) = hiding_instance(&mut fx, 8, &[8], false);
    let hid_env = Delegated {
        inner: hid_pub,
        delegate,
        binding: delegate_binding(&delegate, &witness_digest(&hid_wit)),
    };
    prove_delegated_hiding_transfer(&fx.backend, &hid_wit, &hid_env).unwrap();
}

// -- DvP -------------------------------------------------------------------------------

fn dvp_instance(fx: &mut Fixture) -> (DvpWitness, DvpPublicInputs) {
    let (payment_wit, payment_pub) = fx.transfer_instance(&[20], &[20], 0);
    let dvp_addr = Address::from_name("dvp");
    let env = Delegated {
        inner: payment_pub,
        delegate: dvp_addr,
        binding: delegate_binding(&dvp_addr, &witness_digest(&payment_wit)),
    };
    let payment_proof = prove_delegated_transfer(&fx.backend, &payment_wit, &env).unwrap();
    let expected = vec![fx.ft(33)];
    let wit = DvpWitness {
        payment: payment_wit,
        delivery: expected.clone(),
    };
    let public = DvpPublicInputs {
        payment: Envelope {
            public: env,
            proof: payment_proof,
        },
        delivery: delivery_hash(&expected),
        delivery_type: U256::from(2u64),
        dvp_binding: dvp_binding(&wit),
    };
    (wit, public)
}

#[test]
fn dvp_binding_examples() {
    let mut fx = Fixture::new(22);
    let (wit, public) = dvp_instance(&mut fx);
    let proof = prove_dvp(&fx.backend, &wit, &public).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::Dvp, &canonical(&public)));

    // One delivery preimage altered.
    let mut altered = wit.clone();
    altered.delivery[0].amount = U256::from(34u64);
    let err = prove_dvp(&fx.backend, &altered, &public).unwrap_err();
    assert_eq!(err.constraint, "delivery");

    // Tampered witness behind the binding.
    let mut rebound = public.clone();
    rebound.dvp_binding = hash256(b"junk");
    let err = prove_dvp(&fx.backend, &wit, &rebound).unwrap_err();
    assert_eq!(err.constraint, "dvp_bind");

    // Embedded payment inconsistent with the payment witness.
    let mut wrong_payment = public.clone();
    wrong_payment.payment.public.inner.token_type = U256::from(9u64);
    let err = prove_dvp(&fx.backend, &wit, &wrong_payment).unwrap_err();
    assert_eq!(err.constraint, "payment");
}

// -- backend binding over real instances ------------------------------------------------

#[test]
fn verify_rejects_mutated_public_inputs() {
    let mut fx = Fixture::new(23);
    let (wit, public) = fx.transfer_instance(&[5, 7], &[12], 0);
    let proof = prove_transfer(&fx.backend, &wit, &public).unwrap();
    assert!(fx.backend.verify(&proof, CircuitId::Transfer, &canonical(&public)));

    let mut m = public.clone();
    m.root = hash256(b"other root");
    assert!(!fx.backend.verify(&proof, CircuitId::Transfer, &canonical(&m)));

    let mut m = public.clone();
    m.nulls[0] = nullify(&wit.inputs[1].img, &fx.sk).unwrap();
    assert!(!fx.backend.verify(&proof, CircuitId::Transfer, &canonical(&m)));
}

// -- independent brute-force oracle -----------------------------------------------------

/// Re-derives the transfer predicate from token-level primitives without
/// going through the check* implementations.
fn oracle_transfer_predicate(wit: &TransferWitness, public: &TransferPublicInputs) -> bool {
    if wit.inputs.len() != public.nulls.len() || wit.inputs.len() != public.grabs.len() {
        return false;
    }
    if wit.outputs.len() != public.comms.len() {
        return false;
    }
    for i in 0..wit.inputs.len() {
        for j in (i + 1)..wit.inputs.len() {
            if wit.inputs[i].img == wit.inputs[j].img {
                return false;
            }
        }
    }
    for i in 0..wit.outputs.len() {
        for j in (i + 1)..wit.outputs.len() {
            if wit.outputs[i] == wit.outputs[j] {
                return false;
            }
        }
    }
    for i in 0..public.comms.len() {
        for j in (i + 1)..public.comms.len() {
            if public.comms[i] == public.comms[j] {
                return false;
            }
        }
    }
    let grab_key = match create_grabber_key(&wit.sk, public.grab_nonce) {
        Ok(k) => k,
        Err(_) => return false,
    };
    for (i, input) in wit.inputs.iter().enumerate() {
        let img = &input.img;
        if img.amount.is_zero() && img.id.is_zero() {
            return false;
        }
        if img.token_type != public.token_type {
            return false;
        }
        match nullify(img, &wit.sk) {
            Ok(n) if n == public.nulls[i] => {}
            _ => return false,
        }
        if grab_token(img, &grab_key) != public.grabs[i] {
            return false;
        }
        if crate::crypto::fold_path(commit(img).0, &input.path) != public.root {
            return false;
        }
    }
    for (i, out) in wit.outputs.iter().enumerate() {
        if out.amount.is_zero() && out.id.is_zero() {
            return false;
        }
        if out.token_type != public.token_type {
            return false;
        }
        if commit(out) != public.comms[i] {
            return false;
        }
    }
    // Mass.
    let mut total_in = U256::zero();
    let mut ids_in = BTreeSet::new();
    for input in &wit.inputs {
        total_in = match total_in.checked_add(input.img.amount) {
            Some(v) => v,
            None => return false,
        };
        if !input.img.id.is_zero() {
            ids_in.insert(input.img.id);
        }
    }
    let mut total_out = wit.burn_amount;
    let mut ids_out: BTreeSet<U256> = wit.burn_ids.iter().copied().collect();
    for out in &wit.outputs {
        total_out = match total_out.checked_add(out.amount) {
            Some(v) => v,
            None => return false,
        };
        if !out.id.is_zero() {
            ids_out.insert(out.id);
        }
    }
    if total_in != total_out || ids_in != ids_out {
        return false;
    }
    // Burn.
    for i in 0..wit.burn_ids.len() {
        for j in (i + 1)..wit.burn_ids.len() {
            if wit.burn_ids[i] == wit.burn_ids[j] {
                return false;
            }
        }
    }
    let mut items = Vec::new();
    if !wit.burn_amount.is_zero() {
        items.extend_from_slice(&crate::types::u256_be(&wit.burn_amount));
    }
    for id in &wit.burn_ids {
        items.extend_from_slice(&crate::types::u256_be(id));
    }
    let wit_hash = hash256(&canonical(wit));
    if public.burn_commitment != hash_tagged(domain::DS_BURN, &[&items, &wit_hash.0]) {
        return false;
    }
    // Audit.
    if public.audit_account != crate::crypto::account_of(&wit.audit_pk) {
        return false;
    }
    let pre = AuditPreimage {
        inputs: wit.inputs.iter().map(|i| i.img.clone()).collect(),
        outputs: wit.outputs.clone(),
        burn_amount: wit.burn_amount,
        burn_ids: wit.burn_ids.clone(),
    };
    let sealed = crate::crypto::seal_to_key(&wit.audit_pk, &canonical(&pre));
    public.audit_data.as_slice() == sealed.to_bytes()
}

/// Random small instances, honest and mutated, must agree with the oracle.
#[test]
fn constraint_equivalence_against_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for case in 0..200u64 {
        let mut fx = Fixture::new(1000 + case);
        let n_in = 1 + (rng.random::<u64>() % 3) as usize;
        let n_out = 1 + (rng.random::<u64>() % 3) as usize;
        let per_in: Vec<u64> = (0..n_in).map(|_| 1 + rng.random::<u64>() % 16).collect();
        let total: u64 = per_in.iter().sum();
        // Split the total across outputs, last takes the remainder.
        let mut outs: Vec<u64> = Vec::new();
        let mut left = total;
        for i in 0..n_out {
            if i == n_out - 1 {
                outs.push(left);
            } else {
                let take = if left > 1 { 1 + rng.random::<u64>() % left.min(16) } else { left };
                outs.push(take);
                left -= take;
            }
        }
        outs.retain(|v| *v > 0);
        if outs.is_empty() {
            continue;
        }
        let (wit, mut public) = fx.transfer_instance(&per_in, &outs, 0);

        let honest_impl = check_transfer(&wit, &public).is_ok();
        let honest_oracle = oracle_transfer_predicate(&wit, &public);
        assert_eq!(honest_impl, honest_oracle, "case {case} honest");
        assert!(honest_impl, "case {case} should be satisfiable");

        // One random public-side mutation; both must reject identically.
        match rng.random::<u64>() % 5 {
            0 => public.root = hash256(&case.to_be_bytes()),
            1 => public.token_type = U256::from(12345u64),
            2 => public.grab_nonce = public.grab_nonce ^ U256::one(),
            3 => public.burn_commitment = hash256(b"mutated"),
            _ => {
                public.audit_data =
                    HexBytes(public.audit_data.as_slice().iter().map(|b| b ^ 1).collect())
            }
        }
        let mutated_impl = check_transfer(&wit, &public).is_ok();
        let mutated_oracle = oracle_transfer_predicate(&wit, &public);
        assert_eq!(mutated_impl, mutated_oracle, "case {case} mutated");
        assert!(!mutated_impl, "case {case} mutation must break the predicate");
    }
}
