mod common;

use eml_core::builders::{build, hybrid_erasure_set, ProtocolConfig};
use eml_core::circuit::count_locations;
use eml_core::noise::{
    annotate, idle_erasure, idle_pauli, idle_pauli_linear, idling_adjusted_params, named_scenario, two_qubit_erasure_split,
    IdlingModel, SCENARIO_NAMES,
};
use eml_core::{Cadence, Circuit, ErasurePlan, NoiseParams, Op};
use proptest::prelude::*;

fn hook() -> Circuit {
    build(&ProtocolConfig::hook(3, 2)).unwrap()
}

/// Two rounds on four qubits with every kind of location, and no noiseless tail.
fn small() -> Circuit {
    let mut c = Circuit::new();
    c.qubits = common::qubits(4);
    c.push(Op::ResetZ, vec![0, 1, 2]);
    c.push(Op::ResetX, vec![3]);
    c.push(Op::H, vec![0]);
    c.push(Op::Cx, vec![0, 1, 3, 2]);
    c.push(Op::MeasureZ, vec![1]);
    c.push(Op::Tick, vec![]);
    c.push(Op::ResetZ, vec![1]);
    c.push(Op::Cx, vec![2, 1]);
    c.push(Op::S, vec![3]);
    c.push(Op::MeasureZ, vec![1, 2]);
    c.push(Op::MeasureX, vec![3]);
    c.push(Op::Tick, vec![]);
    c
}

fn noise_ops(c: &Circuit) -> impl Iterator<Item = &eml_core::Instruction> {
    c.instructions.iter().filter(|i| i.op.is_noise())
}

#[test]
fn zero_params_add_no_noise() {
    let c = annotate(&hook(), &NoiseParams::zero(), &ErasurePlan::all(&hook())).unwrap();
    assert_eq!(noise_ops(&c).count(), 0);
    assert!(!c.instructions.iter().any(|i| matches!(i.op, Op::ErasureCheck { .. })));
}

#[test]
fn non_erasure_rates() {
    let base = hook();
    let c = annotate(&base, &named_scenario("non_erasure").unwrap(), &ErasurePlan::all(&base)).unwrap();
    let mut depol2 = 0;
    for w in c.instructions.windows(2) {
        if let Op::Depol2(p) = w[1].op {
            assert_eq!(p, 1e-3);
            assert_eq!(w[0].op, Op::Cx);
            assert_eq!(w[1].targets, w[0].targets);
            depol2 += 1;
        }
    }
    assert!(depol2 > 0);
    assert!(c.instructions.iter().any(|i| i.op == Op::Depol1(1e-4)));
    assert!(!c.instructions.iter().any(|i| matches!(i.op, Op::Erase1(_) | Op::Erase2(_) | Op::ErasureCheck { .. })));
}

#[test]
fn hybrid_erasure_stays_on_the_set() {
    let base = hook();
    let set = hybrid_erasure_set(&base).unwrap();
    let params = NoiseParams::erasure(1e-3, 1e-4).with_non_erasure(1e-3);
    let c = annotate(&base, &params, &ErasurePlan::subset(set.clone())).unwrap();
    let mut erase2 = 0;
    for i in &c.instructions {
        match i.op {
            Op::Erase2(_) => {
                erase2 += 1;
                assert!(i.targets.iter().all(|q| set.contains(q)));
            }
            Op::Erase1(_) | Op::ErasureCheck { .. } => assert!(i.targets.iter().all(|q| set.contains(q))),
            _ => {}
        }
    }
    assert!(erase2 > 0);
}

#[test]
fn annotation_is_not_repeated() {
    let base = hook();
    let params = NoiseParams::uniform_pauli(1e-3);
    let once = annotate(&base, &params, &ErasurePlan::all(&base)).unwrap();
    assert!(annotate(&once, &params, &ErasurePlan::all(&base)).is_err());
    assert_eq!(once, annotate(&base, &params, &ErasurePlan::all(&base)).unwrap());
}

#[test]
fn bad_inputs_are_rejected() {
    let base = hook();
    assert!(annotate(&base, &NoiseParams::uniform_pauli(1e-3), &ErasurePlan::subset([9999])).is_err());
    assert!(annotate(&base, &NoiseParams::uniform_pauli(1.5), &ErasurePlan::all(&base)).is_err());
}

#[test]
fn erasure_free_params_reproduce_the_pauli_stream() {
    let base = hook();
    let plan = ErasurePlan::all(&base);
    let a = annotate(&base, &NoiseParams::erasure(0.0, 1e-3), &plan).unwrap();
    let b = annotate(&base, &named_scenario("non_erasure").unwrap(), &plan).unwrap();
    assert_eq!(a, b);
}

#[test]
fn locations_are_unchanged_by_annotation() {
    let base = hook();
    for params in [NoiseParams::uniform_pauli(1e-3), NoiseParams::erasure(1e-2, 1e-4).with_detection(1e-2, 1e-2)] {
        for cadence in [Cadence::PerRound, Cadence::EndOnly, Cadence::PerGate] {
            let c = annotate(&base, &params, &ErasurePlan::all(&base).with_cadence(cadence)).unwrap();
            assert_eq!(count_locations(&c), count_locations(&base));
            assert!(c.validate().is_empty(), "{cadence:?} {:?}", c.validate().first());
        }
    }
}

#[test]
fn erasure_mass_matches_location_counts() {
    let c = small();
    let n = count_locations(&c);
    let params = NoiseParams { e1: 1e-4, e2: 3e-3, e_spam: 2e-3, ..NoiseParams::zero() };
    let out = annotate(&c, &params, &ErasurePlan::all(&c)).unwrap();
    let mut mass = 0.0;
    for i in &out.instructions {
        match i.op {
            Op::Erase1(p) => mass += p * i.targets.len() as f64,
            Op::Erase2(p) => mass += p * (i.targets.len() / 2) as f64,
            _ => {}
        }
    }
    let want = 2e-3 * n.x_spam as f64 + 1e-4 * n.x1 as f64 + 3e-3 * n.x2 as f64;
    assert!((mass - want).abs() < 1e-15, "{mass} vs {want}");
}

#[test]
fn per_gate_checks_follow_operations() {
    let c = small();
    let out = annotate(&c, &NoiseParams::erasure(1e-3, 0.0), &ErasurePlan::all(&c).with_cadence(Cadence::PerGate)).unwrap();
    let checks = out.instructions.iter().filter(|i| matches!(i.op, Op::ErasureCheck { .. })).count();
    let per_round = annotate(&c, &NoiseParams::erasure(1e-3, 0.0), &ErasurePlan::all(&c)).unwrap();
    let round_checks = per_round.instructions.iter().filter(|i| matches!(i.op, Op::ErasureCheck { .. })).count();
    assert_eq!(round_checks, 2);
    assert!(checks > round_checks);
}

#[test]
fn named_scenarios() {
    for name in SCENARIO_NAMES {
        assert!(named_scenario(name).is_some());
    }
    assert!(named_scenario("perfect").is_none());
    let s = named_scenario("imperfect_4e-3").unwrap();
    assert_eq!((s.e2, s.p2, s.e1), (4e-3, 1e-4, 4e-4));
}

#[test]
fn erasure_split() {
    assert_eq!(two_qubit_erasure_split(0.0), 0.0);
    assert!((two_qubit_erasure_split(0.19) - 0.1).abs() < 1e-15);
    for e2 in [0.01, 0.19] {
        let s = two_qubit_erasure_split(e2);
        assert!((1.0 - (1.0 - s).powi(2) - e2).abs() < 1e-15);
    }
}

#[test]
fn idling_closed_forms() {
    assert_eq!(idle_pauli(0.0, 1.0), 0.0);
    assert!((idle_pauli(1e6, 1.0) - 0.75).abs() < 1e-12);
    assert!((idle_erasure(2f64.ln(), 1.0) - 0.5).abs() < 1e-15);
    // Both closed forms are linear at small t, the twirled one with slope 1/T1.
    let t = 1e-6;
    assert!((idle_pauli(t, 1.0) / t - 1.0).abs() < 1e-5);
    assert_eq!(idle_pauli_linear(t, 1.0), t / 2.0);
}

#[test]
fn idling_adjusted_rate() {
    let base = NoiseParams::erasure(1e-2, 1e-4).with_non_erasure(1e-3);
    let model = IdlingModel { t1: 1e-4, t_2dr: 1e-7, t_2tr: 5e-8, t_trdr: 8e-8 };
    let adj = idling_adjusted_params(&base, &model).unwrap();
    assert!((adj.non_erasure.unwrap().p2 - 5.5e-3).abs() < 1e-15);
    assert!(idling_adjusted_params(&base, &IdlingModel { t_2dr: 1e-8, ..model }).is_err());
    assert!(idling_adjusted_params(&base, &IdlingModel { t1: 0.0, ..model }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn annotation_preserves_locations(seed in any::<u64>(), n in 2u32..=6, e in 0.0f64..0.1, p in 0.0f64..0.1) {
        let mut g = common::Gen::new(seed);
        let c = common::random_clifford(&mut g, n, 30);
        let out = annotate(&c, &NoiseParams::erasure(e, p), &ErasurePlan::all(&c)).unwrap();
        prop_assert_eq!(count_locations(&out), count_locations(&c));
        prop_assert!(out.validate().is_empty());
    }
}
