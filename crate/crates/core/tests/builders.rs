use std::collections::BTreeSet;

use eml_core::builders::{
    build, build_color_unitary_injection, build_expansion, build_hook_injection, build_lao_criger_injection, build_surface_patch,
    hybrid_erasure_set, Basis, InjectedState, ProtocolConfig,
};
use eml_core::circuit::validate;
use eml_core::tableau::{annotation_exprs, symbolic_outcomes};
use eml_core::{FrameSampler, Op, Role};

fn overlap(a: &[u32], b: &[u32]) -> usize {
    a.iter().filter(|q| b.contains(q)).count()
}

#[test]
fn distance_two_patch() {
    let p = build_surface_patch(2).unwrap();
    assert_eq!(p.num_data(), 4);
    let xs = p.stabilizers.iter().filter(|s| s.basis == Basis::X).count();
    let zs = p.stabilizers.iter().filter(|s| s.basis == Basis::Z).count();
    assert_eq!((xs, zs), (2, 1));
    assert!(build_surface_patch(1).is_err());
}

#[test]
fn patch_sizes_and_code_structure() {
    for d in [2, 3, 5, 7] {
        let p = build_surface_patch(d).unwrap();
        assert_eq!(p.qubits.len(), 2 * d * d - 1);
        assert_eq!(p.stabilizers.len(), d * d - 1);
        assert_eq!(p.logical_z.len(), d);
        assert_eq!(p.logical_x.len(), d);
        let coords: BTreeSet<_> = p.qubits.iter().map(|q| q.coords).collect();
        assert_eq!(coords.len(), p.qubits.len());
        for a in &p.stabilizers {
            for b in &p.stabilizers {
                if a.basis != b.basis {
                    assert_eq!(overlap(&a.support(), &b.support()) % 2, 0, "d={d}");
                }
            }
            let logical = if a.basis == Basis::X { &p.logical_z } else { &p.logical_x };
            assert_eq!(overlap(&a.support(), logical) % 2, 0);
        }
        assert_eq!(overlap(&p.logical_x, &p.logical_z) % 2, 1);
    }
}

fn noiseless_detectors_are_zero(cfg: &ProtocolConfig) {
    let c = build(cfg).unwrap();
    assert!(validate(&c).is_empty(), "{cfg:?}");
    let s = FrameSampler::new(&c).unwrap();
    for r in s.sample(256, 5) {
        assert!(r.detectors.iter().all(|&d| !d), "{cfg:?}");
        assert!(r.observable_flip.iter().all(|&o| !o), "{cfg:?}");
    }
    // Every detector is a deterministic parity of the noiseless circuit.
    let (out, sw) = symbolic_outcomes(&c).unwrap();
    let (dets, obs) = annotation_exprs(&c, &out, sw);
    assert!(dets.iter().all(|d| d.is_deterministic()));
    assert!(obs.iter().all(|o| o.is_deterministic()));
}

#[test]
fn all_builders_sample_to_zero_without_noise() {
    for cfg in [
        ProtocolConfig::hook(2, 1),
        ProtocolConfig::hook(3, 2),
        ProtocolConfig::hook(5, 3),
        ProtocolConfig::lao_criger(3, 2),
        ProtocolConfig::lao_criger(5, 1),
        ProtocolConfig::color(),
        ProtocolConfig::hook(3, 2).expanded(7, 2),
        ProtocolConfig::lao_criger(3, 1).expanded(5, 1),
    ] {
        noiseless_detectors_are_zero(&cfg);
    }
}

#[test]
fn hook_has_one_s_on_a_z_ancilla() {
    for d in [2, 3, 5] {
        let c = build_hook_injection(&ProtocolConfig::hook(d, 2)).unwrap();
        let rounds = c.round_of_instructions();
        let end = c.meta_usize("noiseless_from").unwrap();
        let s: Vec<u32> = c
            .instructions
            .iter()
            .zip(&rounds)
            .filter(|(i, &r)| i.op == Op::S && r < end)
            .flat_map(|(i, _)| i.targets.clone())
            .collect();
        assert_eq!(s.len(), 1);
        assert_eq!(c.qubits[s[0] as usize].role, Role::ZAncilla);
    }
}

#[test]
fn builders_check_their_protocol() {
    assert!(build_hook_injection(&ProtocolConfig::lao_criger(3, 1)).is_err());
    assert!(build_lao_criger_injection(&ProtocolConfig::lao_criger(4, 1)).is_err());
    let mut color = ProtocolConfig::color();
    color.d1 = 5;
    assert!(build_color_unitary_injection(&color).is_err());
    assert!(build(&ProtocolConfig::hook(3, 0)).is_err());
}

#[test]
fn t_state_is_not_sampled() {
    let c = build(&ProtocolConfig::hook(3, 1).with_state(InjectedState::T)).unwrap();
    assert!(c.instructions.iter().any(|i| i.op == Op::T));
    assert!(FrameSampler::new(&c).is_err());
}

#[test]
fn lao_criger_prepares_only_the_center() {
    let c = build(&ProtocolConfig::lao_criger(3, 2)).unwrap();
    let prepared: BTreeSet<u32> = c
        .instructions
        .iter()
        .take_while(|i| i.op != Op::Tick)
        .filter(|i| matches!(i.op, Op::S | Op::H))
        .flat_map(|i| i.targets.clone())
        .filter(|&q| c.qubits[q as usize].role == Role::Data)
        .collect();
    assert_eq!(prepared, BTreeSet::from([4]));
}

#[test]
fn expansion_sizes() {
    let grown = build(&ProtocolConfig::hook(3, 2).expanded(15, 1)).unwrap();
    // The patch plus one readout ancilla outside the grid.
    assert_eq!(grown.num_qubits(), 449 + 1);
    assert_eq!(grown.qubits.iter().filter(|q| q.role == Role::Data).count(), 15 * 15);
    assert_eq!(grown.meta_usize("q_d1"), Some(17));

    let inner = build(&ProtocolConfig::hook(3, 2)).unwrap();
    let same = ProtocolConfig::hook(3, 2).expanded(3, 2);
    let flat = build_expansion(&same, &inner).unwrap();
    assert_eq!(flat.num_qubits(), inner.num_qubits());
    assert!(build(&ProtocolConfig::hook(5, 2).expanded(3, 1)).is_err());
}

#[test]
fn hybrid_set_is_three_qubits_at_every_size() {
    for d in [2, 3, 5] {
        let c = build(&ProtocolConfig::hook(d, 2)).unwrap();
        let set = hybrid_erasure_set(&c).unwrap();
        assert_eq!(set.len(), 3);
        let roles: Vec<Role> = set.iter().map(|&q| c.qubits[q as usize].role).collect();
        assert_eq!(roles.iter().filter(|&&r| r == Role::Data).count(), 2);
        assert_eq!(roles.iter().filter(|&&r| r == Role::ZAncilla).count(), 1);
    }
    let lc = build(&ProtocolConfig::lao_criger(3, 1)).unwrap();
    assert!(hybrid_erasure_set(&lc).is_err());
}
