use eml_core::builders::{build, ProtocolConfig};
use eml_core::circuit::{count_locations, parse, serialize, validate, LocationCounts};
use eml_core::{Circuit, Coord, Error, Op, Qubit, Role};
use proptest::prelude::*;

fn line(n: u32) -> Circuit {
    let mut c = Circuit::new();
    for i in 0..n {
        c.qubits.push(Qubit { index: i, coords: Coord::site(i as i32, 0), role: Role::Data });
    }
    c
}

#[test]
fn empty_circuit_is_valid() {
    assert!(validate(&Circuit::new()).is_empty());
    assert_eq!(count_locations(&Circuit::new()), LocationCounts::default());
}

#[test]
fn odd_cx_is_reported_at_its_index() {
    let mut c = line(3);
    c.push(Op::ResetZ, vec![0, 1, 2]);
    c.push(Op::Cx, vec![0, 1, 2]);
    let v = validate(&c);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].index, Some(1));
    assert!(v[0].message.contains("odd pair count"));
}

#[test]
fn detector_beyond_history_dangles() {
    let mut c = line(1);
    c.push(Op::MeasureZ, vec![0]);
    c.push(Op::Detector(vec![2]), vec![]);
    let v = validate(&c);
    assert!(v.iter().any(|v| v.index == Some(1) && v.message.contains("dangling record")));
}

#[test]
fn out_of_range_probability_and_target() {
    let mut c = line(2);
    c.push(Op::Depol1(1.5), vec![0]);
    c.push(Op::H, vec![7]);
    let v = validate(&c);
    assert!(v.iter().any(|v| v.index == Some(0) && v.message.contains("outside")));
    assert!(v.iter().any(|v| v.index == Some(1) && v.message.contains("out of range")));
}

#[test]
fn repeated_erasure_check_without_operation() {
    let mut c = line(1);
    c.push(Op::ResetZ, vec![0]);
    c.push(Op::ErasureCheck { fp: 0.0, fn_: 0.0 }, vec![0]);
    c.push(Op::Tick, vec![]);
    c.push(Op::ErasureCheck { fp: 0.0, fn_: 0.0 }, vec![0]);
    assert_eq!(validate(&c).len(), 1);
}

#[test]
fn one_line_round_trip() {
    let c = parse("CX 0 1").unwrap();
    assert_eq!(c.instructions.len(), 1);
    assert_eq!(serialize(&c), "CX 0 1\n");
    assert_eq!(parse(&serialize(&c)).unwrap(), c);
}

#[test]
fn grammar_elements_parse() {
    let text = "\
# two qubits
QUBIT 0 0 0 data
QUBIT 1 0.5 0.5 z_ancilla
RESET_Z 0 1
DEPOL2(0.001) 0 1
ERASURE_CHECK(0.01,0.02) 1
MEASURE_Z 1  # trailing comment
DETECTOR rec[-1]
OBSERVABLE 0 rec[-1]
";
    let c = parse(text).unwrap();
    assert_eq!(c.qubits[1].coords, Coord::new(1, 1));
    assert_eq!(c.qubits[1].role, Role::ZAncilla);
    assert_eq!(c.instructions[1].op, Op::Depol2(0.001));
    assert_eq!(c.instructions[2].op, Op::ErasureCheck { fp: 0.01, fn_: 0.02 });
    assert_eq!(c.num_detectors(), 1);
    assert_eq!(c.num_observables(), 1);
    assert!(validate(&c).is_empty());
}

#[test]
fn unknown_opcode_is_named_with_its_line() {
    match parse("H 0\nFOO 1\n") {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 2);
            assert!(message.contains("FOO"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn malformed_lines_are_rejected() {
    for bad in ["DEPOL1 0", "DEPOL1(0.1 0", "H(0.1) 0", "DETECTOR rec[1]", "QUBIT 0 0.25 0 data", "QUBIT 0 0 0 wizard", "CX a b"] {
        assert!(matches!(parse(bad), Err(Error::Parse { .. })), "{bad}");
    }
    assert!(parse("H 0\nQUBIT 0 0 0 data").is_err());
}

#[test]
fn small_hook_circuit_round_trips() {
    let c = build(&ProtocolConfig::hook(2, 1)).unwrap();
    assert_eq!(c.num_qubits(), 7 + 1);
    let back = parse(&serialize(&c)).unwrap();
    assert_eq!(back, c);
    assert_eq!(count_locations(&back), count_locations(&c));
}

#[test]
fn single_cx_counts() {
    let mut c = line(2);
    c.push(Op::Cx, vec![0, 1]);
    assert_eq!(count_locations(&c), LocationCounts { x1: 0, x2: 1, x_spam: 0 });
}

#[test]
fn first_hook_round_spam_count() {
    let c = build(&ProtocolConfig::hook(2, 1)).unwrap();
    let first = c.rounds()[0].clone();
    let mut round = line(c.num_qubits() as u32);
    round.instructions = c.instructions[first].to_vec();
    let resets: usize = round.instructions.iter().filter(|i| i.op.is_reset()).map(|i| i.targets.len()).sum();
    let measures: usize = round.instructions.iter().filter(|i| i.op.is_measure()).map(|i| i.targets.len()).sum();
    assert_eq!((resets, measures), (7, 3));
    assert_eq!(count_locations(&round).x_spam, 10);
}

fn configs() -> impl Strategy<Value = ProtocolConfig> {
    prop_oneof![
        (2usize..=5, 1usize..=3).prop_map(|(d, r)| ProtocolConfig::hook(d, r)),
        (1usize..=2, 1usize..=3).prop_map(|(h, r)| ProtocolConfig::lao_criger(2 * h + 1, r)),
        Just(ProtocolConfig::color()),
        (1usize..=2, 0usize..=2).prop_map(|(h, m)| ProtocolConfig::hook(3, 1).expanded(3 + 2 * h, m)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn builder_outputs_round_trip(cfg in configs()) {
        let c = build(&cfg).unwrap();
        prop_assert!(validate(&c).is_empty());
        let back = parse(&serialize(&c)).unwrap();
        prop_assert_eq!(count_locations(&back), count_locations(&c));
        prop_assert_eq!(back, c);
    }
}
