use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::time::{SystemTime, UNIX_EPOCH};

use eml_core::circuit::{parse, serialize};
use eml_core::faults::{coefficients, detection_histogram, enumerate_faults, pair_search, GateKind, Rational, SourceCoefficients};
use eml_core::fit::fit_ansatz;
use eml_core::noise::annotate_region;
use eml_core::protocol::{acceptance_prediction, check_shots, pareto_sweep, Runner};
use eml_core::{Circuit, ErasurePlan, FrameSampler, RunResult, ShotRecord};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::fail::CliError;
use crate::Options;

pub fn emit(opts: &Options, text: &str) -> Result<(), CliError> {
    match &opts.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::new("io", e.to_string()))
        }
    }
}

fn csv_preamble(opts: &Options) -> String {
    let mut s = String::new();
    if opts.timestamp {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(s, "# generated at unix time {t}").unwrap();
    }
    s
}

fn noisy_circuit(cfg: &ExperimentConfig, opts: &Options) -> Result<Circuit, CliError> {
    let Some(path) = &opts.input else {
        return Ok(cfg.scenario()?.noisy_circuit()?);
    };
    // An explicit noiseless circuit is annotated with the configured noise.
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let c = parse(&text)?;
    let plan = match &cfg.erasure {
        crate::config::ErasureSelection::Qubits(q) => ErasurePlan::subset(q.iter().copied()),
        crate::config::ErasureSelection::None => ErasurePlan::subset([]),
        _ => ErasurePlan::all(&c),
    }
    .with_cadence(cfg.cadence)
    .with_threshold(cfg.policy.discard_threshold);
    Ok(annotate_region(&c, &cfg.noise()?, &plan, cfg.region)?)
}

pub fn build(cfg: &ExperimentConfig) -> Result<String, CliError> {
    Ok(serialize(&eml_core::builders::build(cfg.protocol()?)?))
}

pub fn annotate(cfg: &ExperimentConfig, opts: &Options) -> Result<String, CliError> {
    Ok(serialize(&noisy_circuit(cfg, opts)?))
}

pub fn sample(cfg: &ExperimentConfig, opts: &Options) -> Result<String, CliError> {
    check_shots(opts.shots)?;
    let scenario = cfg.scenario()?;
    let c = scenario.noisy_circuit()?;
    let runner = Runner::new(&c, scenario.policy)?;
    let s = FrameSampler::new(&c)?;
    let mut out = csv_preamble(opts);
    writeln!(out, "{}", ShotRecord::CSV_HEADER).unwrap();
    for r in s.sample(opts.shots, opts.seed) {
        writeln!(out, "{}", r.csv_row(runner.accepts(&r))).unwrap();
    }
    Ok(out)
}

pub fn decode(cfg: &ExperimentConfig, opts: &Options) -> Result<String, CliError> {
    let path = opts.input.as_ref().ok_or_else(|| CliError::field("input", "decode needs a shot dump via --input"))?;
    let scenario = cfg.scenario()?;
    let c = scenario.noisy_circuit()?;
    let runner = Runner::new(&c, scenario.policy)?;
    let dem = runner.dem();
    let slots = FrameSampler::new(&c)?.check_slots().len();
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = csv_preamble(opts);
    out.push_str("shot,accepted,predicted,actual,weight\n");
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') || line == ShotRecord::CSV_HEADER {
            continue;
        }
        let r = ShotRecord::from_csv_row(&line, opts.seed, dem.num_detectors, slots)
            .map_err(|e| CliError::new("parse", format!("{} line {}: {e}", path.display(), n + 1)))?;
        let fired: Vec<u32> = (0..r.detectors.len() as u32).filter(|&d| r.detectors[d as usize]).collect();
        let corr = runner.decoder().decode(&fired, &dem.erased_edges(&r.erased_locations))?;
        let actual = r.observable_flip[0];
        writeln!(out, "{},{},{},{},{}", r.shot, runner.accepts(&r) as u8, corr.observables & 1, actual as u8, corr.weight).unwrap();
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig, opts: &Options) -> Result<String, CliError> {
    check_shots(opts.shots)?;
    let r = cfg.scenario()?.run(opts.shots, opts.seed)?;
    let mut out = csv_preamble(opts);
    writeln!(out, "{}\n{}", RunResult::CSV_HEADER, r.csv_row()).unwrap();
    Ok(out)
}

pub fn sweep(cfg: &ExperimentConfig, opts: &Options) -> Result<String, CliError> {
    check_shots(opts.shots)?;
    let configs = cfg.sweep.as_ref().filter(|s| !s.is_empty()).ok_or_else(|| CliError::field("sweep", "list at least one [d1, r] pair"))?;
    let template = cfg.scenario()?;
    let points = pareto_sweep(&template, configs, opts.shots, opts.seed);
    let mut out = csv_preamble(opts);
    writeln!(out, "{},pareto,error", RunResult::CSV_HEADER).unwrap();
    for p in &points {
        match &p.result {
            Some(r) => writeln!(out, "{},{},", r.csv_row(), !p.dominated as u8).unwrap(),
            None => {
                let msg = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                let d2 = template.protocol.d2.unwrap_or(p.d1).max(p.d1);
                writeln!(out, "{},{},{},{},0,0,nan,nan,nan,0,nan,nan,nan,nan,0,{msg}", template.name, p.d1, d2, p.r).unwrap()
            }
        }
    }
    Ok(out)
}

fn ratio(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn sources(s: &SourceCoefficients) -> Value {
    json!({ "p1": ratio(&s.p1), "p2": ratio(&s.p2), "p_in": ratio(&s.p_in), "at_reference": ratio(&s.at_reference()) })
}

pub fn enumerate(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let c = cfg.scenario()?.noisy_circuit()?;
    let report = enumerate_faults(&c)?;
    let coef = coefficients(&report);
    let channel: serde_json::Map<String, Value> = coef.channel.iter().map(|(l, s)| (l.name().to_string(), sources(s))).collect();
    let pred = acceptance_prediction(&c)?;
    let mut doc = json!({
        "protocol": c.meta("protocol").unwrap_or(""),
        "effective": sources(&coef.effective),
        "effective_rate": ratio(&coef.effective_rate()),
        "channel": channel,
        "channel_total": ratio(&coef.channel_total()),
        "acceptance": pred,
        "distinct_signatures": report.distinct_signatures,
        "histogram": {
            "one_qubit": detection_histogram(&report, GateKind::OneQubit, 10),
            "two_qubit": detection_histogram(&report, GateKind::TwoQubit, 10),
            "spam": detection_histogram(&report, GateKind::Spam, 10),
        },
        "gates": report.gates,
        "faults": report.faults,
    });
    if let Some(n) = cfg.max_pairs {
        doc["pairs"] = serde_json::to_value(pair_search(&c, n)?)?;
    }
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn fit(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let spec = cfg.fit.as_ref().ok_or_else(|| CliError::field("fit", "missing fit section with `form` and `points`"))?;
    let r = fit_ansatz(&spec.points, spec.form)?;
    Ok(serde_json::to_string_pretty(&r)? + "\n")
}
