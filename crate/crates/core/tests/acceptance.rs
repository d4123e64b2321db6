//! End-to-end acceptance checks. Runs as a plain binary and prints one line per
//! criterion. `EML_ACCEPTANCE_SCALE` multiplies every Monte Carlo shot count.
//!
//! Criteria listed in `KNOWN_GAPS` are allowed to fail; any other failure makes
//! the run exit nonzero.

mod common;

use std::time::Instant;

use common::{agree_everywhere, attach_detectors, forced, random_clifford, random_dem, random_paulis, tableau_flips, Gen};
use eml_core::builders::{build, hybrid_erasure_set, ProtocolConfig};
use eml_core::faults::{coefficients, enumerate_faults, FaultCoefficients, LogicalLabel, Rational};
use eml_core::fit::{fit_ansatz, FitForm, FitPoint};
use eml_core::noise::{named_scenario, NoiseRegion};
use eml_core::protocol::acceptance_prediction;
use eml_core::{Estimate, FrameSampler, NoiseParams, PostSelectionPolicy, RunResult, Scenario};

const KNOWN_GAPS: &[u32] = &[1, 5, 6];

const HOOK_PL: f64 = 2.33e-4;
const PL_SIGMAS: f64 = 3.0;
const AR_PARITY: f64 = 0.10;
const DETECTION_PL_FACTOR: f64 = 2.0;
const DETECTION_AR_LOSS: f64 = 0.10;
const ALPHA_RATIO: f64 = 1.3;
const COLOR_GAIN: f64 = 5.0;

struct Outcome {
    id: u32,
    pass: bool,
    summary: String,
}

fn scale() -> f64 {
    std::env::var("EML_ACCEPTANCE_SCALE").ok().and_then(|s| s.parse().ok()).filter(|s: &f64| *s > 0.0).unwrap_or(1.0)
}

fn shots(n: f64) -> u64 {
    (n * scale()).ceil().max(1000.0) as u64
}

fn scenario(name: &str, protocol: ProtocolConfig) -> Scenario {
    Scenario::new(name, protocol, named_scenario(name).unwrap())
}

/// Runs until roughly `accepted` shots survive post-selection.
fn run_accepted(s: &Scenario, accepted: f64, seed: u64) -> RunResult {
    let ar = acceptance_prediction(&s.noisy_circuit().unwrap()).unwrap();
    let n = shots(accepted / (ar.ar_e * ar.ar_p) * 1.03);
    s.run(n, seed).unwrap()
}

fn show(e: &Estimate) -> String {
    format!("{:.3e} [{:.3e}, {:.3e}] ({} of {})", e.rate, e.ci_low, e.ci_high, e.k, e.n)
}

fn r(a: u64, b: u64) -> Rational {
    Rational::new(a, b)
}

fn pauli_coefficients(cfg: &ProtocolConfig) -> FaultCoefficients {
    let s = Scenario::new("non_erasure", cfg.clone(), NoiseParams::uniform_pauli(1e-3));
    coefficients(&enumerate_faults(&s.noisy_circuit().unwrap()).unwrap())
}

fn channel(c: &FaultCoefficients) -> String {
    c.channel.iter().map(|(l, s)| format!("{}={}", l.name(), s.at_reference())).collect::<Vec<_>>().join(" ")
}

fn analytic() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, cfg, want) in [
        ("hook d1=2", ProtocolConfig::hook(2, 2), r(7, 30)),
        ("hook d1=3", ProtocolConfig::hook(3, 2), r(7, 30)),
        ("lao-criger d1=3", ProtocolConfig::lao_criger(3, 2), r(46, 30)),
    ] {
        let c = pauli_coefficients(&cfg);
        let got = c.effective_rate();
        pass &= got == want;
        parts.push(format!("{label}: {got}·p (want {want}·p; channel {})", channel(&c)));
    }
    Outcome { id: 1, pass, summary: parts.join("; ") }
}

fn hook_non_erasure(base: &RunResult) -> Outcome {
    let sigma = base.logical.sigma();
    let z = (base.logical.rate - HOOK_PL).abs() / sigma;
    Outcome {
        id: 2,
        pass: z <= PL_SIGMAS && base.logical.n >= shots(2e6) * 98 / 100,
        summary: format!("p_L {} vs {HOOK_PL:.2e}, {z:.2} sigma", show(&base.logical)),
    }
}

fn erasure_independence(runs: &[RunResult]) -> Outcome {
    let mut pass = true;
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            pass &= a.logical.overlaps(&b.logical);
        }
    }
    let reference = 7.0 / 30.0 * 1e-4;
    let parts: Vec<String> =
        runs.iter().map(|r| format!("{}: {} ({:.2}x of 7/30·p)", r.scenario, show(&r.logical), r.logical.rate / reference)).collect();
    Outcome { id: 3, pass, summary: parts.join("; ") }
}

fn acceptance_parity(erasure: &RunResult, pauli: &RunResult) -> Outcome {
    let rel = (erasure.acceptance.rate / pauli.acceptance.rate - 1.0).abs();
    Outcome {
        id: 4,
        pass: rel <= AR_PARITY,
        summary: format!("AR {:.4} vs {:.4}, {:.1}% apart", erasure.acceptance.rate, pauli.acceptance.rate, 100.0 * rel),
    }
}

fn faulty_detection(reference: &RunResult) -> Outcome {
    let mut s = scenario("near_perfect", ProtocolConfig::hook(3, 2));
    s.name = "faulty_detection".into();
    s.noise = s.noise.with_detection(1e-2, 1e-2);
    let strict = run_accepted(&s, 1e7, 32);
    s.policy = PostSelectionPolicy::default().with_threshold(2);
    let run = run_accepted(&s, 1e7, 31);
    let factor = run.logical.rate / reference.logical.rate;
    let loss = 1.0 - run.acceptance.rate / reference.acceptance.rate;
    Outcome {
        id: 5,
        pass: factor <= DETECTION_PL_FACTOR && factor >= 1.0 / DETECTION_PL_FACTOR && loss <= DETECTION_AR_LOSS,
        summary: format!(
            "threshold 2: p_L {} ({factor:.2}x), AR {:.4} ({:.1}% lower); threshold 1: p_L {} ({:.2}x), AR {:.4}",
            show(&run.logical),
            run.acceptance.rate,
            100.0 * loss,
            show(&strict.logical),
            strict.logical.rate / reference.logical.rate,
            strict.acceptance.rate
        ),
    }
}

fn hybrid(all_erasure: &RunResult) -> Outcome {
    let cfg = ProtocolConfig::hook(3, 2);
    let set = hybrid_erasure_set(&build(&cfg).unwrap()).unwrap();
    let patch = |p_e: f64| {
        let mut s = Scenario::new("hybrid", cfg.clone(), NoiseParams::erasure(1e-3, p_e).with_non_erasure(1e-3));
        s.erasure_qubits = Some(set.iter().copied().collect());
        s
    };
    let linear = coefficients(&enumerate_faults(&patch(0.0).noisy_circuit().unwrap()).unwrap()).effective_rate();
    let run = run_accepted(&patch(1e-4), 1e7, 41);
    let residual = run_accepted(&patch(0.0), 1e7, 42);
    Outcome {
        id: 6,
        pass: run.logical.overlaps(&all_erasure.logical) && run.acceptance.rate > all_erasure.acceptance.rate,
        summary: format!(
            "erasure qubits {set:?}: p_L {} vs {}, AR {:.4} vs {:.4}; linear term from non-erasure qubits {linear}·p, p_e=0 residual {}",
            show(&run.logical),
            show(&all_erasure.logical),
            run.acceptance.rate,
            all_erasure.acceptance.rate,
            show(&residual.logical)
        ),
    }
}

fn expansion_series(erasure: bool, xs: &[f64], per_point: u64) -> (Vec<FitPoint>, Vec<String>, bool) {
    let mut pts = Vec::new();
    let mut notes = Vec::new();
    let mut decreasing = true;
    for &x in xs {
        let mut last = f64::INFINITY;
        for d in [3, 5, 7] {
            let noise = if erasure { NoiseParams::erasure(x, x / 100.0) } else { NoiseParams::uniform_pauli(x) };
            let mut s = Scenario::new("expansion", ProtocolConfig::hook(d, 2).expanded(11, 2), noise);
            s.region = NoiseRegion::FromExpansion;
            let run = s.run(per_point, 53 + d as u64).unwrap();
            decreasing &= run.logical.rate < last;
            last = run.logical.rate;
            if run.logical.k > 0 {
                pts.push(FitPoint { x, d, p_l: run.logical.rate, weight: run.logical.k as f64 });
            }
            notes.push(format!("x={x:.0e} d1={d} p_L={:.2e}", run.logical.rate));
        }
    }
    (pts, notes, decreasing)
}

fn expansion_scaling() -> Outcome {
    let per_point = shots(2e4);
    let (ep, en, edec) = expansion_series(true, &[8e-3, 1.2e-2, 1.6e-2], per_point);
    let (pp, pn, pdec) = expansion_series(false, &[4e-3, 6e-3, 8e-3], per_point);
    let (fe, fp) = (fit_ansatz(&ep, FitForm::Erasure), fit_ansatz(&pp, FitForm::NonErasure));
    let (Ok(fe), Ok(fp)) = (fe, fp) else {
        return Outcome { id: 7, pass: false, summary: "fit failed; too few logical failures".into() };
    };
    let ratio = fe.alpha / fp.alpha;
    Outcome {
        id: 7,
        pass: edec && pdec && ratio >= ALPHA_RATIO,
        summary: format!(
            "alpha {:.3} (erasure, x_th {:.3}) vs {:.3} (pauli, x_th {:.3}), ratio {ratio:.2}; decreasing {edec}/{pdec}; {} | {}",
            fe.alpha,
            fe.x_th,
            fp.alpha,
            fp.x_th,
            en.join(", "),
            pn.join(", ")
        ),
    }
}

fn decoder_oracle() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..20 {
        let mut g = Gen::new(1000 + seed);
        let dem = random_dem(&mut g, 8, 18);
        let erased: Vec<u32> = (0..dem.edges.len() as u32).filter(|_| g.below(4) == 0).collect();
        for e in [&[][..], &erased[..]] {
            if let Err(m) = agree_everywhere(&dem, e) {
                bad.push(format!("dem {seed}: {m}"));
            }
        }
    }
    Outcome { id: 8, pass: bad.is_empty(), summary: format!("20 DEMs x 256 syndromes, plain and erased; {} mismatches {bad:?}", bad.len()) }
}

fn frame_vs_tableau() -> Outcome {
    let mut bad = 0;
    let mut detectors = 0;
    for i in 0..50u64 {
        let mut g = Gen::new(2000 + i);
        let n = 1 + (i % 10) as u32;
        let mut c = random_clifford(&mut g, n, 40);
        let paulis = random_paulis(&mut g, &c, 1 + (i % 3) as usize);
        let sets = attach_detectors(&mut c);
        let want = tableau_flips(&c, &sets, &paulis);
        let b = FrameSampler::new(&c).unwrap().sample_batch_forced(i, 0, &forced(&paulis));
        detectors += want.len();
        bad += want.iter().enumerate().filter(|&(d, &w)| b.detectors[d] != if w { !0 } else { 0 }).count();
    }
    Outcome { id: 9, pass: bad == 0, summary: format!("50 circuits, {detectors} detectors, {bad} differ") }
}

fn color_code() -> Outcome {
    let coef = pauli_coefficients(&ProtocolConfig::color());
    let formula = r(2, 15) + r(1, 3) * r(1, 10);
    let erasure = run_accepted(&scenario("near_perfect", ProtocolConfig::color()), 1e7, 61);
    let pauli = run_accepted(&scenario("non_erasure", ProtocolConfig::color()), 2e6, 62);
    let gain = pauli.logical.rate / erasure.logical.rate;
    let y_free = coef.channel.get(&LogicalLabel::Y).map(|s| s.at_reference()).unwrap_or_default();
    Outcome {
        id: 10,
        pass: gain >= COLOR_GAIN,
        summary: format!(
            "p_L {} vs {}, {gain:.1}x; enumerated {}·p2 + {}·p1 = {}·p vs 2/15·p2 + 1/3·p1 = {formula}·p (Y_L {y_free}·p harmless)",
            show(&erasure.logical),
            show(&pauli.logical),
            coef.effective.p2,
            coef.effective.p1,
            coef.effective_rate()
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut out = vec![analytic()];
    let hook = ProtocolConfig::hook(3, 2);
    let non_erasure = run_accepted(&scenario("non_erasure", hook.clone()), 2e6, 21);
    out.push(hook_non_erasure(&non_erasure));
    let runs: Vec<RunResult> = ["near_perfect", "imperfect_4e-3", "imperfect_1e-2"]
        .iter()
        .enumerate()
        .map(|(i, name)| run_accepted(&scenario(name, hook.clone()), 1e7, 22 + i as u64))
        .collect();
    out.push(erasure_independence(&runs));
    out.push(acceptance_parity(&runs[0], &non_erasure));
    out.push(faulty_detection(&runs[0]));
    out.push(hybrid(&runs[0]));
    out.push(expansion_scaling());
    out.push(decoder_oracle());
    out.push(frame_vs_tableau());
    out.push(color_code());

    let mut unexpected = Vec::new();
    for o in &out {
        let known = KNOWN_GAPS.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2} {tag}: {}", o.id, o.summary);
        if !o.pass && !known {
            unexpected.push(o.id);
        }
    }
    println!("scale {} finished in {:.1?}", scale(), start.elapsed());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: criteria {unexpected:?}");
        std::process::exit(1);
    }
}
