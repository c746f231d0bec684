use pqk_core::eval::Mutation;
use pqk_core::metatheory::{check_progress, check_sr, Verdict};
use pqk_core::{gen_well_typed, parse_term, run_corpus, type_closed, GateSet, GenConfig, Harness, LabelContext, Term};

#[test]
fn generated_programs_are_closed_well_typed_and_bounded() {
    for seed in 0..100 {
        let cfg = GenConfig { seed, ..GenConfig::default() };
        let m = gen_well_typed(&cfg).unwrap();
        assert!(m.depth() <= cfg.max_depth, "{m}");
        let reparsed: Term = parse_term(&m.to_string()).unwrap();
        assert!(type_closed(&reparsed, &LabelContext::new(), &cfg.gates).is_ok(), "{m}");
    }
}

#[test]
fn unmutated_corpus_has_no_violations() {
    let cfg = GenConfig { seed: 11, ..GenConfig::default() };
    let report = run_corpus(&cfg, 150, &Harness::default()).unwrap();
    assert!(report.is_clean(), "{report}");
    assert!(report.lifting_apply > 0);
}

#[test]
fn mutation_findings_replay_and_stay_well_typed() {
    let gates = GateSet::default();
    let cfg = GenConfig { seed: 3, ..GenConfig::default() };
    let h = Harness { mutation: Some(Mutation::SkipLetFlatten), ..Harness::default() };
    let report = run_corpus(&cfg, 200, &h).unwrap();
    assert!(report.sr_violations > 0, "{report}");
    assert!(!report.findings.is_empty());
    for f in &report.findings {
        assert!(f.size <= f.original_size);
        assert!(f.replays(&gates), "{}", f.program);
        let m = parse_term(&f.program).unwrap();
        assert!(type_closed(&m, &LabelContext::new(), &gates).is_ok(), "{}", f.program);
        // Without the fault the shrunk program is fine.
        assert!(check_sr(&m).is_ok());
        assert!(matches!(check_progress(&m, 1_000_000), Ok(Verdict::Done)));
    }
}
