//! End-to-end rounds between two parties over an authenticated public
//! channel, chained so each round's final key funds the next round's
//! message authentication.

use std::fmt;

use thiserror::Error;

use crate::auth::{
    bootstrap_round_auth, grow_keys, wc_tag, wc_verify, AuthError, AuthKeyPool, AuthMode, OtsContext, OtsParams,
    RejectReason, Verdict, DEFAULT_TAG_LEN,
};
use crate::bb84::{run_quantum_phase, ProtocolConfig, ProtocolError, QuantumPhaseOutput};
use crate::bits::Bits;
use crate::channel::{ChannelParams, EveModel};
use crate::postproc::{
    amplify_privacy, announce_and_sift, compute_final_length, correct_errors, estimate_eavesdropping, AbortReason,
    CodeParams, Decision, Disclosure, KeyMaterial, LeakageLedger, PostprocError, Stage, ToeplitzSeed,
    DEFAULT_THRESHOLD,
};
use crate::rng::{derive_rng, SessionSeeds, SimRng};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("{from} rejected the `{label}` message: {reason:?}")]
    Rejected {
        from: Role,
        label: &'static str,
        reason: RejectReason,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Alice,
    Bob,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub protocol: ProtocolConfig,
    pub channel: ChannelParams,
    pub eve: EveModel,
    pub threshold: f64,
    pub code: CodeParams,
    /// Length of the key-verification hash.
    pub verification_len: usize,
    pub mac_tag_len: usize,
    /// Subtracted from the final length on top of measured leakage.
    pub security_margin: u64,
    /// Leading final-key bits kept for the next round's authentication.
    pub auth_reserve: usize,
    /// Pre-shared authentication bits; zero means bootstrap with signatures.
    pub preshared_auth_bits: usize,
    pub ots: OtsParams,
    /// One-time signing keys each party generates up front.
    pub ots_keys: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            protocol: ProtocolConfig::new(1 << 17, crate::bb84::BasisStrategy::AsymmetricRandom { p_z: 0.9 }, 0.1)
                .expect("valid defaults"),
            channel: ChannelParams::new(0.5, 0.0, 1.0).expect("valid defaults"),
            eve: EveModel::none(),
            threshold: DEFAULT_THRESHOLD,
            code: CodeParams::default(),
            verification_len: 64,
            mac_tag_len: DEFAULT_TAG_LEN,
            security_margin: 0,
            auth_reserve: 16_384,
            preshared_auth_bits: 0,
            ots: OtsParams::default(),
            ots_keys: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: u32,
    pub seq: usize,
    pub from: Role,
    pub label: &'static str,
    pub category: Disclosure,
    pub payload: Bits,
    pub mode: AuthMode,
    /// Size of the tag or signature carried alongside.
    pub auth_bits: usize,
}

struct Party {
    role: Role,
    pool: AuthKeyPool,
    ots: OtsContext,
    rng: SimRng,
}

/// The public channel between the parties. Every payload is authenticated
/// and booked in the ledger under exactly one category.
#[derive(Debug, Clone, Default)]
pub struct PublicChannel {
    pub messages: Vec<MessageRecord>,
    pub ledger: LeakageLedger,
}

impl PublicChannel {
    #[allow(clippy::too_many_arguments)]
    fn send(
        &mut self,
        round: u32,
        mode: AuthMode,
        tag_len: usize,
        (from, to): (&mut Party, &mut Party),
        label: &'static str,
        category: Disclosure,
        payload: Bits,
    ) -> Result<(), SessionError> {
        let rejected = |reason| SessionError::Rejected {
            from: to.role,
            label,
            reason,
        };
        let auth_bits = match mode {
            AuthMode::WegmanCarter => {
                let tag = wc_tag(&payload, &mut from.pool, tag_len)?;
                if let Verdict::Reject(reason) = wc_verify(&payload, &tag, &mut to.pool) {
                    return Err(rejected(reason));
                }
                tag.tag.len()
            }
            AuthMode::Ots => {
                let (index, sig) = from.ots.sign_next(&payload)?;
                if !to.ots.verify_next(&payload, index, &sig) {
                    return Err(rejected(RejectReason::TagMismatch));
                }
                sig.bit_len()
            }
        };
        self.ledger.record(category, payload.len() as u64);
        self.messages.push(MessageRecord {
            round,
            seq: self.messages.len(),
            from: from.role,
            label,
            category,
            payload,
            mode,
            auth_bits,
        });
        Ok(())
    }

    /// Ledger rebuilt from intercepted payload sizes alone.
    pub fn recount(&self) -> LeakageLedger {
        let mut l = LeakageLedger::new();
        for m in &self.messages {
            l.record(m.category, m.payload.len() as u64);
        }
        l
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seq,from,label,category,bits,auth_mode,auth_bits\n");
        for m in &self.messages {
            out += &format!(
                "{},{},{},{:?},{},{},{}\n",
                m.seq,
                m.from,
                m.label,
                m.category,
                m.payload.len(),
                m.mode,
                m.auth_bits
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Completed,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub auth_mode: AuthMode,
    pub n_pulses: usize,
    pub n_detected: usize,
    pub n_sifted: usize,
    pub sample_size: usize,
    pub e_x: Option<f64>,
    pub outcome: RoundOutcome,
    pub code_name: Option<&'static str>,
    pub used_fallback: bool,
    pub ledger: LeakageLedger,
    pub final_len: usize,
    pub keys_equal: bool,
    /// Final-key bits moved into the authentication pool.
    pub reserved: usize,
    pub app_key_len: usize,
    /// False when the final key could not cover the authentication reserve.
    pub sustainable: bool,
    /// Pool bits spent authenticating this round.
    pub auth_consumed: usize,
    pub pool_after: usize,
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub report: RoundReport,
    pub quantum: QuantumPhaseOutput,
    /// Everything an eavesdropper on the public channel saw.
    pub channel: PublicChannel,
    pub alice_app_key: Option<KeyMaterial>,
    pub bob_app_key: Option<KeyMaterial>,
    pub alice_final: Option<KeyMaterial>,
    pub bob_final: Option<KeyMaterial>,
}

/// A two-party session: mirrored authentication pools, one-time signature
/// stocks, and per-round seeds derived from one master seed.
pub struct Session {
    cfg: SessionConfig,
    master_seed: u64,
    round: u32,
    alice: Party,
    bob: Party,
}

impl Session {
    pub fn new(cfg: SessionConfig, master_seed: u64) -> Result<Self, SessionError> {
        cfg.protocol.validate()?;
        estimate_eavesdropping(&[], cfg.threshold)?;
        let preshared = Bits::random(&mut derive_rng(master_seed, "preshared-auth"), cfg.preshared_auth_bits);
        let mut alice_ots = OtsContext::generate(&mut derive_rng(master_seed, "ots/alice"), cfg.ots, cfg.ots_keys)?;
        let mut bob_ots = OtsContext::generate(&mut derive_rng(master_seed, "ots/bob"), cfg.ots, cfg.ots_keys)?;
        // Public keys travel out of band as serialized blobs.
        alice_ots.import_peer(&bob_ots.public_blobs())?;
        bob_ots.import_peer(&alice_ots.public_blobs())?;
        Ok(Session {
            alice: Party {
                role: Role::Alice,
                pool: AuthKeyPool::with_bits(preshared.clone()),
                ots: alice_ots,
                rng: derive_rng(master_seed, "alice/postproc"),
            },
            bob: Party {
                role: Role::Bob,
                pool: AuthKeyPool::with_bits(preshared),
                ots: bob_ots,
                rng: derive_rng(master_seed, "bob/postproc"),
            },
            cfg,
            master_seed,
            round: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn rounds_run(&self) -> u32 {
        self.round
    }

    pub fn pools(&self) -> (&AuthKeyPool, &AuthKeyPool) {
        (&self.alice.pool, &self.bob.pool)
    }

    pub fn ots_logs(&self) -> (&OtsContext, &OtsContext) {
        (&self.alice.ots, &self.bob.ots)
    }

    /// Runs one full round. Aborts are reported in the outcome; authentication
    /// and configuration failures are errors.
    pub fn run_round(&mut self) -> Result<RoundResult, SessionError> {
        self.round += 1;
        let round = self.round;
        let cfg = self.cfg.clone();
        self.alice.pool.set_round(round);
        self.bob.pool.set_round(round);
        let mode = bootstrap_round_auth(round, &self.alice.pool, &self.alice.ots)?;
        let pool_before = self.alice.pool.cursor();
        let tag_len = cfg.mac_tag_len;
        let mut ch = PublicChannel::default();
        let (a, b) = (&mut self.alice, &mut self.bob);

        let seeds = SessionSeeds::derive(self.master_seed, &format!("round{round}"));
        let quantum = run_quantum_phase(&cfg.protocol, &cfg.channel, &cfg.eve, &seeds)?;
        let sift = announce_and_sift(&quantum.alice, &quantum.bob)?;
        ch.send(round, mode, tag_len, (b, a), "bob-announcement", Disclosure::Sifting, sift.bundle.bob_announcement())?;
        ch.send(round, mode, tag_len, (a, b), "alice-announcement", Disclosure::Sifting, sift.bundle.alice_announcement())?;
        ch.send(round, mode, tag_len, (b, a), "bob-x-sample", Disclosure::Sifting, sift.bundle.bob_x_disclosure())?;
        debug_assert_eq!(ch.ledger.sifting_disclosed, sift.ledger.sifting_disclosed);

        let n_sifted = sift.sifted_alice.len();
        let est = estimate_eavesdropping(&sift.x_sample, cfg.threshold)?;
        let mut report = RoundReport {
            round,
            auth_mode: mode,
            n_pulses: cfg.protocol.n_pulses,
            n_detected: quantum.n_detected(),
            n_sifted,
            sample_size: est.sample_size,
            e_x: est.e_x,
            outcome: RoundOutcome::Completed,
            code_name: None,
            used_fallback: false,
            ledger: LeakageLedger::new(),
            final_len: 0,
            keys_equal: false,
            reserved: 0,
            app_key_len: 0,
            sustainable: false,
            auth_consumed: 0,
            pool_after: 0,
        };
        let mut result = RoundResult {
            report: report.clone(),
            quantum,
            channel: PublicChannel::default(),
            alice_app_key: None,
            bob_app_key: None,
            alice_final: None,
            bob_final: None,
        };
        let finish = |mut result: RoundResult, report: RoundReport, ch: &PublicChannel, pool: &AuthKeyPool| {
            result.report = RoundReport {
                ledger: ch.ledger,
                auth_consumed: pool.cursor() - pool_before,
                pool_after: pool.available(),
                ..report
            };
            result.channel = ch.clone();
            Ok(result)
        };

        let e_x = match (est.decision, est.e_x) {
            (Decision::Proceed, Some(e)) => e,
            (decision, _) => {
                report.outcome = RoundOutcome::Aborted(match decision {
                    Decision::Abort(r) => r,
                    Decision::Proceed => AbortReason::EmptySample,
                });
                return finish(result, report, &ch, &self.alice.pool);
            }
        };

        // Reconciliation: Alice's key is the reference.
        let params = CodeParams {
            qber_estimate: e_x,
            ..cfg.code.clone()
        };
        let mut scratch = LeakageLedger::new();
        let rec = correct_errors(&sift.sifted_alice, &sift.sifted_bob, &params, &mut scratch);
        if n_sifted > 0 {
            let code = params.code();
            report.code_name = Some(code.name());
            // The syndrome is public whether or not decoding succeeds.
            let syndromes = match &rec {
                Ok(r) => r.syndrome_message(),
                Err(_) => {
                    let mut s = Bits::new();
                    let x = sift.sifted_alice.bits();
                    for start in (0..n_sifted).step_by(code.n()) {
                        let end = (start + code.n()).min(n_sifted);
                        let mut block = x.slice(start, end);
                        block.extend_from(&Bits::zeros(code.n() - (end - start)));
                        s.extend_from(&code.syndrome(&block));
                    }
                    s
                }
            };
            ch.send(round, mode, tag_len, (a, b), "syndromes", Disclosure::Syndrome, syndromes)?;
        }
        let rec = match rec {
            Ok(r) => r,
            Err(PostprocError::DecodeFailure { .. }) => {
                ch.send(round, mode, tag_len, (b, a), "reconciliation-status", Disclosure::Control, Bits::zeros(1))?;
                report.outcome = RoundOutcome::Aborted(AbortReason::DecodeFailure);
                return finish(result, report, &ch, &self.alice.pool);
            }
            Err(e) => return Err(e.into()),
        };
        if rec.used_fallback() {
            let (ref_par, noisy_par) = rec.fallback_messages();
            ch.send(round, mode, tag_len, (a, b), "fallback-parities-alice", Disclosure::Syndrome, ref_par)?;
            ch.send(round, mode, tag_len, (b, a), "fallback-parities-bob", Disclosure::Syndrome, noisy_par)?;
        }
        report.used_fallback = rec.used_fallback();
        debug_assert_eq!(ch.ledger.syndrome_bits, rec.syndrome_leak);
        ch.send(round, mode, tag_len, (b, a), "reconciliation-status", Disclosure::Control, Bits::from_bits([1u8]))?;

        // Verification by a fresh Toeplitz hash chosen by Alice.
        let alice_key = sift.sifted_alice.clone();
        let bob_key = rec.corrected;
        let verify_seed = ToeplitzSeed::random(&mut a.rng, n_sifted, cfg.verification_len);
        let alice_tag = verify_seed.hash(alice_key.bits())?;
        ch.send(round, mode, tag_len, (a, b), "verification-seed", Disclosure::Seed, verify_seed.bits().clone())?;
        ch.send(round, mode, tag_len, (a, b), "verification-tag", Disclosure::Verification, alice_tag.clone())?;
        let matched = verify_seed.hash(bob_key.bits())? == alice_tag;
        ch.send(round, mode, tag_len, (b, a), "verification-verdict", Disclosure::Control, Bits::from_bits([matched as u8]))?;
        if !matched {
            report.outcome = RoundOutcome::Aborted(AbortReason::VerificationFailed);
            return finish(result, report, &ch, &self.alice.pool);
        }
        let alice_key = alice_key.promote(Stage::Verified)?;
        let bob_key = bob_key.promote(Stage::Verified)?;

        // Privacy amplification to the length the ledger allows.
        let final_len = compute_final_length(n_sifted, e_x, &ch.ledger, cfg.security_margin)?;
        let pa_seed = ToeplitzSeed::random(&mut a.rng, n_sifted, final_len);
        ch.send(round, mode, tag_len, (a, b), "amplification-seed", Disclosure::Seed, pa_seed.bits().clone())?;
        let alice_final = amplify_privacy(alice_key, &pa_seed, final_len)?;
        let bob_final = amplify_privacy(bob_key, &pa_seed, final_len)?;
        report.final_len = final_len;
        report.keys_equal = alice_final.bits() == bob_final.bits();

        match (grow_keys(&alice_final, cfg.auth_reserve), grow_keys(&bob_final, cfg.auth_reserve)) {
            (Ok((a_pool, a_app)), Ok((b_pool, b_app))) => {
                self.alice.pool.fund(&a_pool);
                self.bob.pool.fund(&b_pool);
                report.reserved = a_pool.len();
                report.app_key_len = a_app.len();
                report.sustainable = true;
                result.alice_app_key = Some(a_app);
                result.bob_app_key = Some(b_app);
            }
            (Err(AuthError::InsufficientKey { .. }), _) | (_, Err(AuthError::InsufficientKey { .. })) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
        result.alice_final = Some(alice_final);
        result.bob_final = Some(bob_final);
        finish(result, report, &ch, &self.alice.pool)
    }

    /// Runs up to `rounds` rounds, stopping after the first round that does
    /// not complete.
    pub fn run(&mut self, rounds: u32) -> SessionRun {
        let mut out = SessionRun::default();
        for _ in 0..rounds {
            match self.run_round() {
                Ok(r) => {
                    let done = r.report.outcome == RoundOutcome::Completed;
                    out.rounds.push(r);
                    if !done {
                        break;
                    }
                }
                Err(e) => {
                    out.error = Some((self.round, e));
                    break;
                }
            }
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct SessionRun {
    pub rounds: Vec<RoundResult>,
    /// Round number and error, if a round failed outright.
    pub error: Option<(u32, SessionError)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bb84::BasisStrategy;

    fn small() -> SessionConfig {
        SessionConfig {
            protocol: ProtocolConfig::new(50_000, BasisStrategy::asymmetric(0.9).unwrap(), 0.1).unwrap(),
            auth_reserve: 11_000,
            ots: OtsParams::lamport(128, 128),
            ..SessionConfig::default()
        }
    }

    #[test]
    fn clean_rounds_chain() {
        let mut s = Session::new(small(), 11).unwrap();
        let run = s.run(3);
        assert!(run.error.is_none(), "{:?}", run.error);
        assert_eq!(run.rounds.len(), 3);
        for (i, r) in run.rounds.iter().enumerate() {
            let rep = &r.report;
            assert_eq!(rep.outcome, RoundOutcome::Completed);
            assert!(rep.keys_equal);
            assert_eq!(rep.e_x, Some(0.0));
            assert!(rep.sustainable);
            assert_eq!(rep.auth_mode, if i == 0 { AuthMode::Ots } else { AuthMode::WegmanCarter });
            assert_eq!(r.alice_app_key.as_ref().unwrap().bits(), r.bob_app_key.as_ref().unwrap().bits());
        }
        let (pa, pb) = s.pools();
        assert_eq!(pa.consumption_log(), pb.consumption_log());
    }

    #[test]
    fn ledger_matches_intercepted_channel() {
        let mut s = Session::new(small(), 12).unwrap();
        let r = s.run_round().unwrap();
        assert!(r.channel.messages.len() >= 8);
        assert_eq!(r.channel.recount(), r.report.ledger);
        assert_eq!(r.channel.to_csv().lines().count(), r.channel.messages.len() + 1);
        let sift_bits = 50_000 + 3 * r.report.n_detected + 2 * r.report.sample_size;
        assert_eq!(r.report.ledger.sifting_disclosed, sift_bits as u64);
        assert_eq!(r.report.ledger.verification_bits, 64);
    }

    #[test]
    fn full_interception_aborts() {
        let cfg = SessionConfig {
            eve: EveModel::intercept_resend(1.0).unwrap(),
            ..small()
        };
        let mut s = Session::new(cfg, 13).unwrap();
        let run = s.run(3);
        assert_eq!(run.rounds.len(), 1);
        let rep = &run.rounds[0].report;
        assert_eq!(rep.outcome, RoundOutcome::Aborted(AbortReason::ErrorRateAboveThreshold));
        assert!((rep.e_x.unwrap() - 0.25).abs() < 0.06);
    }

    #[test]
    fn no_bootstrap_material_cannot_authenticate() {
        let cfg = SessionConfig { ots_keys: 0, ..small() };
        let mut s = Session::new(cfg, 14).unwrap();
        assert!(matches!(s.run_round(), Err(SessionError::Auth(AuthError::CannotAuthenticate))));
    }

    #[test]
    fn reserve_larger_than_final_key_exhausts_the_pool() {
        let cfg = SessionConfig {
            auth_reserve: 1_000_000,
            ..small()
        };
        let mut s = Session::new(cfg, 15).unwrap();
        let run = s.run(2);
        assert!(!run.rounds[0].report.sustainable);
        assert!(matches!(run.error, Some((2, SessionError::Auth(AuthError::PoolExhausted { .. })))));
    }

    #[test]
    fn preshared_pool_skips_signatures() {
        let cfg = SessionConfig {
            preshared_auth_bits: 20_000,
            ..small()
        };
        let mut s = Session::new(cfg, 16).unwrap();
        let r = s.run_round().unwrap();
        assert_eq!(r.report.auth_mode, AuthMode::WegmanCarter);
        assert!(s.ots_logs().0.signed_log().is_empty());
    }
}
