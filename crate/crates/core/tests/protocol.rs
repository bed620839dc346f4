mod common;

use std::time::Instant;

use common::{all_tuples, honest, scripted_from_tuples, Act, Scripted};
use proptest::prelude::*;
use qsslab::codes::catalog;
use qsslab::protocol::{
    class_of, predict_outcome, recheck, reconstruct_secret, run_protocol, valid_runs, ActionClass, Content, Prediction,
    ProtocolConfig, ProtocolError, Strategy, Transcript, Variant,
};
use qsslab::quantum::{self, Basis, Outcome, PhaseAngle, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(config: &ProtocolConfig, strategies: &mut [Box<dyn Strategy>], seed: u64) -> Transcript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_protocol(config, strategies, &mut [], &mut rng).unwrap()
}

fn y_count(phases: &[PhaseAngle]) -> usize {
    phases.iter().filter(|p| class_of(**p) == ActionClass::Y).count()
}

#[test]
fn class_and_prediction_examples() {
    use PhaseAngle as P;
    assert_eq!(class_of(P::ZERO), ActionClass::X);
    assert_eq!(class_of(P::THREE_HALVES_PI), ActionClass::Y);
    assert_eq!(class_of(P::PI), ActionClass::X);
    assert_eq!(predict_outcome(&[P::HALF_PI, P::HALF_PI, P::PI]), Prediction::Deterministic(Sign::Plus));
    assert_eq!(predict_outcome(&[P::HALF_PI, P::ZERO, P::ZERO]), Prediction::Random);
    assert_eq!(predict_outcome(&[P::PI, P::ZERO, P::ZERO]), Prediction::Deterministic(Sign::Minus));
}

/// Every honest N = 4 phase tuple: the simulated X measurement agrees with
/// the prediction, with certainty when it is deterministic.
#[test]
fn determinism_law_exhaustive() {
    let start = Instant::now();
    for tuple in all_tuples(4) {
        let mut state = quantum::plus_x_state();
        for p in &tuple {
            state = quantum::apply_phase(&state, 0, *p).unwrap();
        }
        let prob = |sign| {
            let ((num, den), _) = state.project_qubit(0, Outcome::new(sign, Basis::X)).unwrap();
            num as f64 / (1u64 << den) as f64
        };
        match predict_outcome(&tuple) {
            Prediction::Deterministic(sign) => assert_eq!(prob(sign), 1.0, "{tuple:?}"),
            Prediction::Random => assert_eq!(prob(Sign::Plus), 0.5, "{tuple:?}"),
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

/// Random-class totals give an unbiased X outcome (chi-squared, one degree
/// of freedom, p > 0.001).
#[test]
fn random_outcomes_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut plus = 0u32;
    let samples = 10_000;
    for _ in 0..samples {
        let total = if rng.gen() { PhaseAngle::HALF_PI } else { PhaseAngle::THREE_HALVES_PI };
        let state = quantum::apply_phase(&quantum::plus_x_state(), 0, total).unwrap();
        let (outcome, _) = quantum::measure(&state, 0, Basis::X, &mut rng).unwrap();
        plus += u32::from(outcome.sign == Sign::Plus);
    }
    let expected = samples as f64 / 2.0;
    let chi2 = 2.0 * (plus as f64 - expected).powi(2) / expected;
    assert!(chi2 < 10.828, "chi2 = {chi2}");
}

/// All 4^4 phase tuples as the runs of one N = 4 execution: validity is
/// exactly even Y-parity, checks pass, and every (N-1)-coalition recovers
/// every target on every valid run.
#[test]
fn exhaustive_reconstruction() {
    let tuples = all_tuples(4);
    let config = ProtocolConfig::new(Variant::Original, 4, tuples.len(), 5);
    let t = run(&config, &mut scripted_from_tuples(&tuples), 5);
    assert!(t.passed());
    let mut checked = 0;
    for (r, tuple) in tuples.iter().enumerate() {
        assert_eq!(t.runs[r].valid, y_count(tuple).is_multiple_of(2));
        if !t.runs[r].valid {
            assert!(matches!(reconstruct_secret(&t, r, &[1, 2, 3], 4), Err(ProtocolError::RunNotValid(_))));
            continue;
        }
        for target in 1..=4 {
            let coalition: Vec<usize> = (1..=4).filter(|p| *p != target).collect();
            let got = reconstruct_secret(&t, r, &coalition, target).unwrap();
            if target == 4 {
                // Without R_N the coalition lacks the outcome; it learns
                // phi_N - T.
                let total = t.runs[r].rn_outcome.phase();
                assert_eq!(got, tuple[3] - total);
            } else {
                assert_eq!(got, tuple[target - 1]);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 128 * 4);
    assert!(matches!(reconstruct_secret(&t, 0, &[1, 2], 4), Err(ProtocolError::CoalitionWrongSize { expected: 3 })));
}

#[test]
fn reconstruction_examples() {
    use PhaseAngle as P;
    let tuples = vec![vec![P::HALF_PI, P::HALF_PI, P::PI], vec![P::ZERO, P::ZERO, P::ZERO]];
    let config = ProtocolConfig::new(Variant::Original, 3, 2, 0);
    let t = run(&config, &mut scripted_from_tuples(&tuples), 0);
    assert_eq!(t.runs[0].rn_outcome, Sign::Plus);
    assert_eq!(reconstruct_secret(&t, 0, &[1, 3], 2).unwrap(), P::HALF_PI);
    for target in 1..=2 {
        let coalition: Vec<usize> = (1..=3).filter(|p| *p != target).collect();
        assert_eq!(reconstruct_secret(&t, 1, &coalition, target).unwrap(), P::ZERO);
    }
}

/// A coalition missing two honest participants cannot tell the two phases
/// of a missing participant's announced class apart.
#[test]
fn sub_coalition_ignorance() {
    for tuple in all_tuples(4).into_iter().filter(|t| y_count(t).is_multiple_of(2)) {
        let total: PhaseAngle = tuple.iter().copied().sum();
        for i in 1..=4usize {
            for j in i + 1..=4 {
                for value in [tuple[i - 1], tuple[i - 1] + PhaseAngle::PI] {
                    // Some phase for j of its announced class makes the view
                    // consistent with the observed total.
                    let others: PhaseAngle = (1..=4).filter(|p| *p != i && *p != j).map(|p| tuple[p - 1]).sum();
                    let fits =
                        [tuple[j - 1], tuple[j - 1] + PhaseAngle::PI].iter().any(|pj| others + value + *pj == total);
                    assert!(fits, "{tuple:?} i={i} j={j}");
                }
            }
        }
    }
}

#[test]
fn honest_completeness_all_variants() {
    for variant in [Variant::Original, Variant::Modified1, Variant::Modified2] {
        for n in 3..=5 {
            for seed in 0..20 {
                let config = ProtocolConfig::new(variant, n, 8, seed);
                let t = run(&config, &mut honest(n), seed);
                assert!(t.passed(), "{variant:?} N={n} seed={seed}");
                assert_eq!(valid_runs(&t), t.runs.iter().filter(|r| r.valid).map(|r| r.idx).collect::<Vec<_>>());
            }
        }
    }
    let config = ProtocolConfig::new(Variant::Secure, 4, 16, 0).with_code(catalog::n16_w10(), 10);
    for seed in 0..20 {
        let t = run(&config, &mut honest(4), seed);
        assert!(t.passed(), "secure seed={seed}");
    }
}

#[test]
fn class_stage_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = ProtocolConfig::new(Variant::Modified1, 4, 50, 2);
    let t = run_protocol(&config, &mut honest(4), &mut [], &mut rng).unwrap();
    for r in &t.runs {
        let order: Vec<usize> = r.announcements.class_stage.iter().map(|e| e.participant).collect();
        assert_eq!(order, [4, 3, 2, 1]);
    }
    let config = ProtocolConfig::new(Variant::Modified2, 5, 200, 3);
    let t = run(&config, &mut honest(5), 3);
    let mut firsts = std::collections::BTreeSet::new();
    for r in &t.runs {
        let order: Vec<usize> = r.announcements.class_stage.iter().map(|e| e.participant).collect();
        let mut tail = order[3..].to_vec();
        tail.sort();
        assert_eq!(tail, [1, 5]);
        firsts.insert(order[0]);
    }
    assert_eq!(firsts.into_iter().collect::<Vec<_>>(), [2, 3, 4]);
}

#[test]
fn secure_announced_bits_are_codewords() {
    let code = catalog::n16_w10();
    let config = ProtocolConfig::new(Variant::Secure, 4, 16, 9).with_code(code.clone(), 10);
    let t = run(&config, &mut honest(4), 9);
    for p in 2..=3 {
        let bits: Vec<bool> = t.runs.iter().map(|r| r.announced_bit(p).unwrap()).collect();
        let word = qsslab::codes::Codeword::from_bools(&bits).unwrap();
        assert!(code.contains(&word));
        assert_eq!(word.weight(), 10);
    }
    for r in t.runs.iter().filter(|r| r.valid) {
        assert!(!r.has_z());
    }
}

/// N = 3 secure run with the worked chain: phi_1 = pi/2, R_2 applies pi/2,
/// measures (forced Minus), re-sends with pi/2; phi_3 = pi/2 forces Plus.
#[test]
fn forced_z_chain() {
    use PhaseAngle as P;
    let code = catalog::n16_w10();
    let word = code.codewords_of_weight(10)[0];
    let middle: Vec<Act> =
        (0..16).map(|r| if word.bit(r) { Act::Z(P::HALF_PI, P::HALF_PI) } else { Act::Phase(P::ZERO) }).collect();
    let ends: Vec<Act> = vec![Act::Phase(P::HALF_PI); 16];
    let mut strategies: Vec<Box<dyn Strategy>> =
        vec![Box::new(Scripted::new(ends.clone())), Box::new(Scripted::new(middle)), Box::new(Scripted::new(ends))];
    let config = ProtocolConfig::new(Variant::Secure, 3, 16, 4).with_code(code, 10);
    let t = run(&config, &mut strategies, 4);
    assert!(t.passed());
    for r in t.runs.iter().filter(|r| word.bit(r.idx)) {
        assert_eq!(r.action(2).z_outcome, Some(Sign::Minus));
        assert_eq!(r.rn_outcome, Sign::Plus);
        assert!(r.announcements.value_stage.is_some());
    }
}

#[test]
fn transcript_replay() {
    let config = ProtocolConfig::new(Variant::Secure, 4, 16, 1).with_code(catalog::n16_w10(), 10);
    let t = run(&config, &mut honest(4), 1);
    let json = t.to_json();
    let back = Transcript::from_json(&json).unwrap();
    assert_eq!(back, t);
    assert_eq!(recheck(&back).unwrap(), t.verdicts);
    assert_eq!(run(&config, &mut honest(4), 1).to_json(), json);
}

#[test]
fn tampered_bits_fail_check_one() {
    let config = ProtocolConfig::new(Variant::Secure, 4, 16, 6).with_code(catalog::n16_w10(), 10);
    let mut t = run(&config, &mut honest(4), 6);
    // Flip one of R_3's announced 1s to 0: weight w - 1.
    let run = t.runs.iter().position(|r| r.announced_bit(3) == Some(true)).unwrap();
    for e in t.runs[run].announcements.bit_stage.as_mut().unwrap() {
        if e.participant == 3 {
            e.content = Content::Bit(false);
        }
    }
    let verdicts = recheck(&t).unwrap();
    let one = verdicts.iter().find(|v| v.check == 1).unwrap();
    assert!(!one.pass);
    assert_eq!(one.failing_participants, [3]);
}

#[test]
fn tampered_value_fails_check_two() {
    let config = ProtocolConfig::new(Variant::Original, 4, 40, 8);
    let mut t = run(&config, &mut honest(4), 8);
    let run = t.runs.iter().position(|r| r.valid && r.checked).unwrap();
    let events = t.runs[run].announcements.value_stage.as_mut().unwrap();
    let e = events.iter_mut().find(|e| e.participant == 2).unwrap();
    if let Content::Value { phase, .. } = &mut e.content {
        *phase += PhaseAngle::PI;
    }
    let verdicts = recheck(&t).unwrap();
    let two = verdicts.iter().find(|v| v.check == 2).unwrap();
    assert!(!two.pass);
    assert_eq!(two.failing_runs, [run]);
}

#[test]
fn config_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let secure = ProtocolConfig::new(Variant::Secure, 4, 16, 0);
    assert!(matches!(run_protocol(&secure, &mut honest(4), &mut [], &mut rng), Err(ProtocolError::MissingCode)));
    assert_eq!(ProtocolError::MissingCode.to_string(), "secure variant requires a code file");
    let small = ProtocolConfig::new(Variant::Original, 2, 4, 0);
    assert!(small.validate().is_err());
    let mut frac = ProtocolConfig::new(Variant::Original, 4, 4, 0);
    frac.check_fraction = 1.0;
    assert!(frac.validate().is_err());
    let ok = ProtocolConfig::new(Variant::Original, 4, 4, 0);
    assert!(matches!(
        run_protocol(&ok, &mut honest(3), &mut [], &mut rng),
        Err(ProtocolError::StrategyCount { expected: 4, found: 3 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Honest executions: every check passes, each participant announces
    /// once per stage, the recorded trace follows the phase sums, and replay
    /// reproduces the verdicts.
    #[test]
    fn honest_invariants(variant in 0usize..3, n in 3usize..=6, runs in 1usize..24, seed in any::<u64>()) {
        let variant = [Variant::Original, Variant::Modified1, Variant::Modified2][variant];
        let config = ProtocolConfig::new(variant, n, runs, seed);
        let t = run(&config, &mut honest(n), seed);
        prop_assert!(t.passed());
        for v in &t.verdicts {
            prop_assert_eq!(v.pass, v.failing_runs.is_empty() && v.failing_participants.is_empty());
        }
        for r in &t.runs {
            let mut who: Vec<usize> = r.announcements.class_stage.iter().map(|e| e.participant).collect();
            who.sort();
            prop_assert_eq!(who, (1..=n).collect::<Vec<_>>());
            let mut theta = PhaseAngle::ZERO;
            for p in 1..=n {
                theta += r.action(p).single_phase().unwrap();
                prop_assert_eq!(r.theta[p], Some(theta));
            }
            let phases: Vec<PhaseAngle> = (1..=n).map(|p| r.action(p).single_phase().unwrap()).collect();
            if let Prediction::Deterministic(sign) = predict_outcome(&phases) {
                prop_assert_eq!(r.rn_outcome, sign);
            }
            prop_assert_eq!(r.valid, y_count(&phases).is_multiple_of(2));
        }
        prop_assert_eq!(recheck(&Transcript::from_json(&t.to_json()).unwrap()).unwrap(), t.verdicts.clone());
    }

    #[test]
    fn secure_trace_reanchors(seed in any::<u64>()) {
        let config = ProtocolConfig::new(Variant::Secure, 4, 16, seed).with_code(catalog::n16_w10(), 10);
        let t = run(&config, &mut honest(4), seed);
        prop_assert!(t.passed());
        for r in &t.runs {
            let mut theta = PhaseAngle::ZERO;
            for p in 1..=4 {
                let a = r.action(p);
                theta = match a.class {
                    Some(ActionClass::Z) => a.z_outcome.unwrap().phase() + a.phases[1],
                    _ => theta + a.phases[0],
                };
                prop_assert_eq!(r.theta[p], Some(theta));
            }
        }
    }
}
