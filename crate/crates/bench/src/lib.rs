//! Fixed circuits shared by the benchmarks.

use eml_core::builders::{build, ProtocolConfig};
use eml_core::noise::{annotate, annotate_region, NoiseRegion};
use eml_core::{Circuit, ErasurePlan, NoiseParams};

/// Hook injection, `d1 = 3`, `r = 2`, Pauli noise at `p = 1e-3`.
pub fn hook_pauli() -> Circuit {
    let c = build(&ProtocolConfig::hook(3, 2)).expect("hook circuit");
    annotate(&c, &NoiseParams::uniform_pauli(1e-3), &ErasurePlan::subset([])).expect("annotation")
}

/// Hook injection with erasure qubits at `e = 1e-3`, `p = 1e-4`.
pub fn hook_erasure() -> Circuit {
    let c = build(&ProtocolConfig::hook(3, 2)).expect("hook circuit");
    annotate(&c, &NoiseParams::erasure(1e-3, 1e-4), &ErasurePlan::all(&c)).expect("annotation")
}

/// Hook injection grown to `d2`, noisy from the expansion round on.
pub fn expansion(d1: usize, d2: usize, p: f64) -> Circuit {
    let c = build(&ProtocolConfig::hook(d1, 2).expanded(d2, 2)).expect("expansion circuit");
    annotate_region(&c, &NoiseParams::uniform_pauli(p), &ErasurePlan::subset([]), NoiseRegion::FromExpansion).expect("annotation")
}
