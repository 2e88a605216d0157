use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threebox::lg_stats::{self, LgReport, PolicyEstimate, SamplingPolicy};
use threebox::{BobOutcome, Context, EngineKind, RoundRecord};

fn record(id: u64, context: Context, bob: BobOutcome, alice: bool) -> RoundRecord {
    RoundRecord {
        round_id: id,
        engine: EngineKind::Quantum,
        context,
        bob_outcome: Some(bob),
        alice_m3: alice,
        alice_bets: alice,
        alice_wins: alice.then_some(bob == BobOutcome::True),
        ground_truth_boxes: None,
        seed_path: format!("0/{id}"),
    }
}

/// Rounds per context: Alice true with probability `p_a`; given that, Bob
/// true / undetermined with the given probabilities.
fn synthetic(rng: &mut ChaCha8Rng, per_context: u64, p_a: f64, p_b: [f64; 2], p_u: f64) -> Vec<RoundRecord> {
    let mut out = Vec::new();
    for (c, ctx) in Context::MEASURED.into_iter().enumerate() {
        for _ in 0..per_context {
            let id = out.len() as u64 + 1;
            let alice = rng.gen_bool(p_a);
            let bob = if rng.gen_bool(p_u) {
                BobOutcome::Undetermined
            } else if alice && rng.gen_bool(p_b[c]) || !alice && rng.gen_bool(0.3) {
                BobOutcome::True
            } else {
                BobOutcome::False
            };
            out.push(record(id, ctx, bob, alice));
        }
    }
    out
}

#[test]
fn std_err_matches_bootstrap() {
    let mut rng = ChaCha8Rng::seed_from_u64(1200);
    let records = synthetic(&mut rng, 1200, 0.5, [0.8, 0.75], 0.0);
    let est = lg_stats::estimate_conditionals(&records, SamplingPolicy::FairSampling).unwrap();
    let analytic = lg_stats::k_std_err(&est);

    let by_context: Vec<Vec<(bool, bool)>> = Context::MEASURED
        .iter()
        .map(|&c| {
            records
                .iter()
                .filter(|r| r.context == c)
                .map(|r| (r.alice_m3, r.bob_outcome == Some(BobOutcome::True)))
                .collect()
        })
        .collect();
    let resamples = 10_000;
    let mut ks = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut p = [0.0; 2];
        for (c, rows) in by_context.iter().enumerate() {
            let (mut a, mut ab) = (0u32, 0u32);
            for _ in 0..rows.len() {
                let (alice, bob) = rows[rng.gen_range(0..rows.len())];
                a += alice as u32;
                ab += (alice && bob) as u32;
            }
            p[c] = f64::from(ab) / f64::from(a);
        }
        ks.push(4.0 / 9.0 * (1.0 - p[0] - p[1]) - 1.0);
    }
    let mean = ks.iter().sum::<f64>() / ks.len() as f64;
    let sd = (ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (ks.len() - 1) as f64).sqrt();
    let rel = (analytic - sd).abs() / sd;
    assert!(rel < 0.15, "analytic {analytic} vs bootstrap {sd}");
}

#[test]
fn ideal_quantum_conditionals_are_one() {
    let cfg = threebox::SessionConfig::quantum(threebox::NoiseParams::ideal(), 100_000, 3);
    let recs = threebox::protocol::simulate(&cfg, None).unwrap();
    for policy in [SamplingPolicy::FairSampling, SamplingPolicy::Adverse] {
        let est = lg_stats::estimate_conditionals(&recs, policy).unwrap();
        assert!(est.iter().all(|e| e.p_hat == 1.0 && e.std_err == 0.0));
    }
    let report = LgReport::from_records(&recs, SamplingPolicy::FairSampling).unwrap();
    assert!((report.k_hat + 13.0 / 9.0).abs() < 1e-12);
    assert_eq!(report.sigma_fair, f64::INFINITY);
    assert_eq!(report.q1, 1);
}

#[test]
fn report_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let recs = synthetic(&mut rng, 400, 0.3, [0.8, 0.8], 0.1);
    let report = LgReport::from_records(&recs, SamplingPolicy::Adverse).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: LgReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.k_hat, report.adverse.k_hat);
    let text = report.to_string();
    assert!(text.contains("adverse") && text.contains("P_M1(B|A)"), "{text}");
}

proptest! {
    #[test]
    fn k_respects_bound_regions(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
        let k = lg_stats::k_from_conditionals(p1, p2);
        prop_assert!(k >= -13.0 / 9.0 - 1e-12);
        if p1 + p2 <= 1.0 {
            prop_assert!(k >= -1.0 - 1e-12);
        }
    }

    #[test]
    fn adverse_never_exceeds_fair(
        seed in any::<u64>(),
        p_b in (0.6f64..1.0, 0.6f64..1.0),
        p_u in 0.0f64..0.3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = synthetic(&mut rng, 600, 0.3, [p_b.0, p_b.1], p_u);
        let fair = PolicyEstimate::from_records(&recs, SamplingPolicy::FairSampling);
        let adverse = PolicyEstimate::from_records(&recs, SamplingPolicy::Adverse);
        if let (Ok(f), Ok(a)) = (fair, adverse) {
            prop_assert!(a.k_hat >= f.k_hat);
            prop_assert!(a.sigma <= f.sigma, "adverse {} fair {}", a.sigma, f.sigma);
        }
    }

    #[test]
    fn estimates_ignore_record_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = synthetic(&mut rng, 200, 0.4, [0.7, 0.9], 0.1);
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rng);
        for policy in [SamplingPolicy::FairSampling, SamplingPolicy::Adverse] {
            prop_assert_eq!(
                lg_stats::estimate_conditionals(&recs, policy).ok(),
                lg_stats::estimate_conditionals(&shuffled, policy).ok()
            );
        }
    }
}
