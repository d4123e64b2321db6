mod common;

use eml_core::builders::{build, ProtocolConfig};
use eml_core::fit::{fit_ansatz, FitForm, FitPoint};
use eml_core::noise::annotate;
use eml_core::protocol::{acceptance_prediction, expected_volume, mark_dominated, pareto_sweep, run_protocol, ParetoPoint, Runner};
use eml_core::{Circuit, ErasurePlan, Estimate, FrameSampler, NoiseParams, Op, PostSelectionPolicy, RunResult, Scenario};
use proptest::prelude::*;

fn point(d1: usize, volume: f64, pl: f64) -> ParetoPoint {
    let result = RunResult {
        scenario: "s".into(),
        d1,
        d2: d1,
        r: 1,
        shots: 100,
        acceptance: Estimate::wilson(90, 100),
        logical: Estimate { rate: pl, ..Estimate::wilson(1, 90) },
        volume: Some(volume),
    };
    ParetoPoint { d1, r: 1, result: Some(result), error: None, dominated: false }
}

#[test]
fn volume_formula() {
    assert!((expected_volume(17, 2, 0.85).unwrap() - 40.0).abs() < 1e-12);
    assert_eq!(expected_volume(17, 2, 0.0), None);
}

#[test]
fn noiseless_run() {
    let s = Scenario::new("clean", ProtocolConfig::hook(3, 2), NoiseParams::zero());
    let r = s.run(5000, 1).unwrap();
    assert_eq!((r.acceptance.rate, r.logical.rate), (1.0, 0.0));
    assert_eq!(r.volume, Some(34.0));
}

#[test]
fn single_cx_erasure_acceptance() {
    let mut c = Circuit::new();
    c.qubits = common::qubits(2);
    c.push(Op::ResetZ, vec![0, 1]);
    c.push(Op::Tick, vec![]);
    c.push(Op::Cx, vec![0, 1]);
    c.push(Op::Tick, vec![]);
    let clean = acceptance_prediction(&c).unwrap();
    assert_eq!((clean.ar_e, clean.ar_p), (1.0, 1.0));
    let params = NoiseParams { e2: 0.01, ..NoiseParams::zero() };
    let noisy = annotate(&c, &params, &ErasurePlan::all(&c)).unwrap();
    assert!((acceptance_prediction(&noisy).unwrap().ar_e - 0.99).abs() < 1e-15);
}

#[test]
fn erasure_acceptance_is_multiplicative() {
    let s = Scenario::new("e", ProtocolConfig::hook(3, 2), NoiseParams::erasure(4e-3, 0.0));
    let c = s.noisy_circuit().unwrap();
    let want = acceptance_prediction(&c).unwrap().ar_e;
    let r = run_protocol(&c, s.policy, 200_000, 3, "e").unwrap();
    assert!((r.acceptance.rate - want).abs() < 3.0 * r.acceptance.sigma().max(1e-12), "{} vs {want}", r.acceptance.rate);
}

#[test]
fn run_agrees_with_per_shot_verdicts() {
    let s = Scenario::new("mixed", ProtocolConfig::hook(3, 2), NoiseParams::erasure(1e-2, 1e-3).with_detection(1e-2, 1e-2));
    let s = Scenario { policy: PostSelectionPolicy::default().with_threshold(2), ..s };
    let c = s.noisy_circuit().unwrap();
    let runner = Runner::new(&c, s.policy).unwrap();
    let run = runner.run(4096, 12, "mixed").unwrap();
    let records = FrameSampler::new(&c).unwrap().sample(4096, 12);
    let accepted = records.iter().filter(|r| runner.accepts(r)).count() as u64;
    assert_eq!(run.acceptance.k, accepted);
}

#[test]
fn one_point_is_pareto_optimal() {
    let mut pts = vec![point(3, 10.0, 1e-3)];
    mark_dominated(&mut pts);
    assert!(!pts[0].dominated);
}

#[test]
fn dominated_point_is_flagged() {
    let mut pts = vec![point(3, 10.0, 1e-3), point(5, 20.0, 2e-3), point(7, 30.0, 5e-4)];
    mark_dominated(&mut pts);
    assert_eq!(pts.iter().map(|p| p.dominated).collect::<Vec<_>>(), vec![false, true, false]);
}

#[test]
fn sweep_keeps_failed_points() {
    let template = Scenario::new("lc", ProtocolConfig::lao_criger(3, 1), NoiseParams::uniform_pauli(1e-3));
    let pts = pareto_sweep(&template, &[(3, 1), (4, 1)], 2000, 0);
    assert!(pts[0].result.is_some());
    assert!(pts[1].result.is_none() && pts[1].error.is_some());
    assert!(pts[1].dominated);
}

fn synthetic(c: f64, x_th: f64, alpha: f64, form: FitForm) -> Vec<FitPoint> {
    let mut out = Vec::new();
    for d in [3, 5, 7] {
        for x in [1e-3, 2e-3, 4e-3] {
            let e = if form == FitForm::Erasure { d as f64 } else { d as f64 + 1.0 };
            out.push(FitPoint { x, d, p_l: c * (x / x_th).powf(alpha * e), weight: 1.0 });
        }
    }
    out
}

#[test]
fn fit_recovers_synthetic_parameters() {
    let f = fit_ansatz(&synthetic(0.1, 0.05, 1.0, FitForm::Erasure), FitForm::Erasure).unwrap();
    assert!((f.c / 0.1 - 1.0).abs() < 1e-6);
    assert!((f.x_th / 0.05 - 1.0).abs() < 1e-6);
    assert!((f.alpha - 1.0).abs() < 1e-6);
    assert!(f.residual < 1e-12);
}

#[test]
fn fit_needs_two_distances() {
    let pts: Vec<FitPoint> = synthetic(0.1, 0.05, 1.0, FitForm::Erasure).into_iter().filter(|p| p.d == 5).collect();
    assert!(fit_ansatz(&pts, FitForm::Erasure).is_err());
    assert!(fit_ansatz(&pts[..2], FitForm::Erasure).is_err());
}

#[test]
fn hook_footprint_is_seventeen_qubits() {
    let base = build(&ProtocolConfig::hook(3, 1)).unwrap();
    assert_eq!(base.meta_usize("q_d1"), Some(17));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wilson_interval_contains_the_rate(n in 1u64..100_000, f in 0.0f64..=1.0) {
        let k = ((n as f64) * f) as u64;
        let e = Estimate::wilson(k, n);
        prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.rate && e.rate <= e.ci_high && e.ci_high <= 1.0);
        prop_assert!(e.overlaps(&e));
        let other = Estimate::wilson(n - k, n);
        prop_assert_eq!(e.overlaps(&other), other.overlaps(&e));
    }

    #[test]
    fn volume_times_acceptance(q in 1usize..500, r in 1usize..10, ar in 1e-6f64..=1.0) {
        let v = expected_volume(q, r, ar).unwrap();
        prop_assert!((v * ar / (q * r) as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_round_trip(c in 0.01f64..1.0, x_th in 0.01f64..0.2, alpha in 0.3f64..1.5, erasure in any::<bool>()) {
        let form = if erasure { FitForm::Erasure } else { FitForm::NonErasure };
        let pts: Vec<FitPoint> = synthetic(c, x_th, alpha, form).into_iter().filter(|p| p.p_l < 0.5).collect();
        prop_assume!(pts.len() >= 4);
        let f = fit_ansatz(&pts, form).unwrap();
        prop_assert!((f.alpha / alpha - 1.0).abs() < 1e-6);
        prop_assert!((f.x_th / x_th - 1.0).abs() < 1e-6);
    }
}
