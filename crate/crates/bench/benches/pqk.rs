use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pqk_core::metatheory::oracle::random_tree;
use pqk_core::{
    branch_distribution, check_program, check_signature, parse_init, parse_program, random_circuit, run_corpus,
    run_with_input, Assignment, EvalEnv, EvalOutcome, GateSet, GenConfig, Harness, LiftedObject,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const TELEPORT: &str = include_str!("../../../fixtures/teleport.pqk");

fn lifting(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trees: Vec<_> = (0..64).map(|_| random_tree(&mut rng, 4, &mut Vec::new())).collect();
    let r = random_tree(&mut rng, 2, &mut Vec::new());
    c.bench_function("graft_depth4", |b| {
        b.iter(|| {
            for t in &trees {
                let o = LiftedObject::from_tree(t, ());
                let _ = black_box(o.graft_with(&Assignment::empty(), |_, _| Ok(LiftedObject::from_tree(&r, ()))));
            }
        })
    });
}

fn signatures(c: &mut Criterion) {
    let gates = GateSet::default_set();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let circuits: Vec<_> = (0..32).map(|_| random_circuit(&mut rng, 20, &gates)).collect();
    c.bench_function("check_signature_x32", |b| {
        b.iter(|| {
            for k in &circuits {
                black_box(check_signature(k, &gates).unwrap());
            }
        })
    });
}

fn teleport(c: &mut Criterion) {
    let gates = GateSet::default_set();
    let program = parse_program(TELEPORT, &gates).unwrap();
    c.bench_function("teleport_check", |b| b.iter(|| black_box(check_program(&program, &gates).unwrap())));
    c.bench_function("teleport_eval", |b| {
        b.iter(|| {
            let mut env = EvalEnv::new(gates.clone());
            black_box(run_with_input(&program.term, program.labels.clone(), &mut env))
        })
    });
    let mut env = EvalEnv::new(gates.clone());
    let EvalOutcome::Done(r) = run_with_input(&program.term, program.labels.clone(), &mut env) else {
        panic!("teleport did not evaluate")
    };
    let circuit = r.described_circuit().clone();
    let init = parse_init("", &circuit.input).unwrap();
    c.bench_function("teleport_sim_1000_shots", |b| {
        b.iter(|| black_box(branch_distribution(&circuit, &init, 1000, 0, &gates).unwrap()))
    });
}

fn fuzz(c: &mut Criterion) {
    let cfg = GenConfig::default();
    let h = Harness::default();
    let mut group = c.benchmark_group("fuzz");
    group.sample_size(10);
    group.bench_function("corpus_100", |b| b.iter(|| black_box(run_corpus(&cfg, 100, &h).unwrap())));
    group.finish();
}

criterion_group!(benches, lifting, signatures, teleport, fuzz);
criterion_main!(benches);
