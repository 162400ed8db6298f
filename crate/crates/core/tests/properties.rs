use proptest::prelude::*;

use hyqkd::apps::{mosca_check, otp_decrypt, otp_encrypt, AppError, MoscaParams, MoscaVerdict};
use hyqkd::auth::{wc_tag, wc_verify, AuthError, AuthKeyPool, Verdict};
use hyqkd::bits::Bits;
use hyqkd::netsim::{HashPqc, HybridPolicy, Network, NetworkTopology};
use hyqkd::postproc::{
    compute_final_length, estimate_eavesdropping, AbortReason, Decision, KeyMaterial, LeakageLedger, Stage,
    ToeplitzSeed,
};
use hyqkd::rng::derive_rng;

fn bits(len: std::ops::Range<usize>) -> impl Strategy<Value = Bits> {
    prop::collection::vec(0u8..2, len).prop_map(Bits::from_bits)
}

fn ledger(syndrome: u64, verification: u64) -> LeakageLedger {
    LeakageLedger {
        syndrome_bits: syndrome,
        verification_bits: verification,
        ..LeakageLedger::new()
    }
}

proptest! {
    #[test]
    fn final_length_is_monotone(
        n in 0usize..200_000,
        e in 0.0f64..0.5,
        de in 0.0f64..0.1,
        leak in 0u64..50_000,
        extra in 0u64..5_000,
        margin in 0u64..1_000,
    ) {
        let base = compute_final_length(n, e, &ledger(leak, 64), margin).unwrap();
        prop_assert!(base <= n);
        let e2 = (e + de).min(0.5);
        prop_assert!(compute_final_length(n, e2, &ledger(leak, 64), margin).unwrap() <= base);
        prop_assert!(compute_final_length(n, e, &ledger(leak + extra, 64), margin).unwrap() <= base);
        prop_assert!(compute_final_length(n, e, &ledger(leak, 64), margin + extra).unwrap() <= base);
        prop_assert!(compute_final_length(n + 1000, e, &ledger(leak, 64), margin).unwrap() >= base);
    }

    #[test]
    fn toeplitz_is_linear(a in bits(1..300), mask in bits(1..300), out in 1usize..128, seed in any::<u64>()) {
        let n = a.len().min(mask.len());
        let (a, b) = (a.slice(0, n), mask.slice(0, n));
        let t = ToeplitzSeed::random(&mut derive_rng(seed, "prop"), n, out);
        prop_assert_eq!(t.hash(&(&a ^ &b)).unwrap(), &t.hash(&a).unwrap() ^ &t.hash(&b).unwrap());
        prop_assert_eq!(t.hash(&Bits::zeros(n)).unwrap(), Bits::zeros(out));
    }

    #[test]
    fn otp_is_an_involution(msg in bits(1..1024), slack in 0usize..64, seed in any::<u64>()) {
        let key = Bits::random(&mut derive_rng(seed, "otp"), msg.len() + slack);
        let mut sender = KeyMaterial::new(key.clone(), Stage::Final);
        let mut receiver = KeyMaterial::new(key, Stage::Final);
        let c = otp_encrypt(&msg, &mut sender).unwrap();
        prop_assert_eq!(otp_decrypt(&c, &mut receiver).unwrap(), msg.clone());
        prop_assert_eq!(otp_encrypt(&msg, &mut sender), Err(AppError::KeyReuse));
        let mut short = KeyMaterial::new(Bits::zeros(msg.len() - 1), Stage::Final);
        let too_short = matches!(otp_encrypt(&msg, &mut short), Err(AppError::KeyTooShort { .. }));
        prop_assert!(too_short);
    }

    #[test]
    fn mosca_is_monotone(x in 0.0f64..50.0, y in 0.0f64..50.0, z in 0.0f64..100.0, d in 0.0f64..20.0) {
        let v = |x, y, z| mosca_check(&MoscaParams::new(x, y, z).unwrap()).verdict;
        if v(x, y, z) == MoscaVerdict::Safe {
            prop_assert_eq!(v(x, y, z + d), MoscaVerdict::Safe);
        } else {
            prop_assert_eq!(v(x + d, y, z), MoscaVerdict::AtRisk);
            prop_assert_eq!(v(x, y + d, z), MoscaVerdict::AtRisk);
        }
    }

    #[test]
    fn abort_is_a_threshold_function(
        sample in prop::collection::vec((0u8..2, 0u8..2), 1..500),
        t1 in 0.001f64..0.499,
        t2 in 0.001f64..0.499,
    ) {
        let r = estimate_eavesdropping(&sample, t1).unwrap();
        let e = r.e_x.unwrap();
        let errors = sample.iter().filter(|(a, b)| a != b).count();
        prop_assert_eq!(e, errors as f64 / sample.len() as f64);
        let aborts = r.decision == Decision::Abort(AbortReason::ErrorRateAboveThreshold);
        prop_assert_eq!(aborts, e > t1);
        // Raising the threshold never turns Proceed into Abort.
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if estimate_eavesdropping(&sample, lo).unwrap().decision == Decision::Proceed {
            prop_assert_eq!(estimate_eavesdropping(&sample, hi).unwrap().decision, Decision::Proceed);
        }
    }

    #[test]
    fn pool_hands_out_each_bit_once(total in 0usize..4000, takes in prop::collection::vec(1usize..700, 0..20)) {
        let data = Bits::random(&mut derive_rng(total as u64, "pool"), total);
        let mut pool = AuthKeyPool::with_bits(data.clone());
        let mut cursor = 0;
        for len in takes {
            match pool.take(len) {
                Ok((seg, got)) => {
                    prop_assert_eq!(seg.offset, cursor);
                    prop_assert_eq!(&got, &data.slice(cursor, cursor + len));
                    cursor += len;
                }
                Err(AuthError::PoolExhausted { needed, available }) => {
                    prop_assert_eq!(needed, len);
                    prop_assert_eq!(available, total - cursor);
                    prop_assert!(len > available);
                }
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
            prop_assert_eq!(pool.available(), total - cursor);
        }
        let log = pool.consumption_log();
        prop_assert!(log.windows(2).all(|w| w[0].end() == w[1].offset));
    }

    #[test]
    fn mac_accepts_exactly_the_tagged_message(msg in bits(0..1500), flip in any::<prop::sample::Index>(), t in 1usize..=64) {
        let data = Bits::random(&mut derive_rng(msg.len() as u64, "mac"), 4000);
        let mut sender = AuthKeyPool::with_bits(data.clone());
        let receiver = AuthKeyPool::with_bits(data);
        let tag = wc_tag(&msg, &mut sender, t).unwrap();
        prop_assert_eq!(wc_verify(&msg, &tag, &mut receiver.clone()), Verdict::Accept);
        if !msg.is_empty() && t >= 32 {
            let mut forged = msg.clone();
            forged.flip(flip.index(msg.len()));
            prop_assert_ne!(wc_verify(&forged, &tag, &mut receiver.clone()), Verdict::Accept);
        }
    }

    #[test]
    fn relays_agree_and_conserve_budget(
        hops in 1usize..7,
        rate in 64u64..2048,
        lens in prop::collection::vec(1usize..256, 1..12),
        hybrid in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut text = String::from("node s user\nnode d user\n");
        let names: Vec<String> = (0..=hops)
            .map(|i| match i { 0 => "s".to_string(), i if i == hops => "d".to_string(), i => format!("r{i}") })
            .collect();
        for n in &names[1..hops] {
            text += &format!("node {n} relay\n");
        }
        for w in names.windows(2) {
            text += &format!("link {} {} qkd {rate}\n", w[0], w[1]);
        }
        text += "link s d pqc\n";
        let topo = NetworkTopology::parse(&text).unwrap();
        let mut net = Network::new(topo, derive_rng(seed, "links"), HashPqc::new([3; 32]));
        let policy = if hybrid { HybridPolicy::HybridXor } else { HybridPolicy::QkdOnly };
        let mut spent = 0u64;
        for len in lens {
            match net.hybrid_establish("s", "d", policy, len) {
                Ok(k) => {
                    prop_assert_eq!(&k.src_key, &k.dst_key);
                    prop_assert_eq!(k.src_key.len(), len);
                    prop_assert_eq!(k.path.len(), hops + 1);
                    spent += len as u64;
                }
                Err(_) => prop_assert!(rate - spent < len as u64),
            }
            for w in names.windows(2) {
                prop_assert_eq!(net.remaining_budget(&w[0], &w[1]), Some(rate - spent));
            }
        }
        prop_assert_eq!(net.store.available("s", "d"), net.log.records.len());
    }
}
