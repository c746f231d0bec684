use pqk_core::metatheory::oracle::run_lifting_oracle;
use pqk_core::{
    check_signature, extend_random, insert, random_circuit, Assignment, Circuit, GateSet, Label, LabelContext,
    LiftedVar, Perm, RenameLabels, RenameLifted,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn label_perm(rng: &mut impl Rng, c: &Circuit) -> Perm<Label> {
    let labels: Vec<Label> = c.labels().into_iter().collect();
    let mut targets = labels.clone();
    targets.shuffle(rng);
    // Also move a few labels onto names the circuit never uses.
    for (i, t) in targets.iter_mut().enumerate() {
        if rng.gen_bool(0.2) {
            *t = Label::new(format!("z{i}"));
        }
    }
    Perm::from_pairs(labels.into_iter().zip(targets)).expect("injective")
}

fn lifted_perm(rng: &mut impl Rng, c: &Circuit) -> Perm<LiftedVar> {
    let vars = c.lifted_vars();
    let mut targets = vars.clone();
    targets.shuffle(rng);
    for (i, t) in targets.iter_mut().enumerate() {
        if rng.gen_bool(0.2) {
            *t = LiftedVar::new(format!("y{i}"));
        }
    }
    Perm::from_pairs(vars.into_iter().zip(targets)).expect("injective")
}

#[test]
fn signature_commutes_with_label_renaming() {
    let gates = GateSet::default_set();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let c = random_circuit(&mut rng, 14, &gates);
        let sig = check_signature(&c, &gates).unwrap();
        let rho = label_perm(&mut rng, &c);
        let renamed = check_signature(&c.rename_labels(&rho), &gates).unwrap();
        assert_eq!(renamed, sig.rename_labels(&rho), "{c}");
    }
}

#[test]
fn signature_commutes_with_lifted_renaming() {
    let gates = GateSet::default_set();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lifted = 0;
    for _ in 0..200 {
        let c = random_circuit(&mut rng, 14, &gates);
        let sig = check_signature(&c, &gates).unwrap();
        lifted += usize::from(!sig.tree.is_leaf());
        let pi = lifted_perm(&mut rng, &c);
        let renamed = check_signature(&c.rename_lifted(&pi), &gates).unwrap();
        assert_eq!(renamed, sig.rename_lifted(&pi), "{c}");
        assert_eq!(c.rename_lifted(&pi).rename_lifted(&pi.inverse()), c);
    }
    assert!(lifted > 50, "only {lifted} circuits lift anything");
}

#[test]
fn insertion_signature_is_grafted() {
    let gates = GateSet::default_set();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut nontrivial = 0;
    for _ in 0..200 {
        let c = random_circuit(&mut rng, 10, &gates);
        let sig = check_signature(&c, &gates).unwrap();
        let paths = sig.tree.path_set();
        let p = paths.choose(&mut rng).unwrap();
        let a: Assignment =
            p.iter().filter(|_| rng.gen_bool(0.6)).fold(Assignment::empty(), |a, (v, b)| a.with(v.clone(), b));
        let reach: Vec<&Assignment> = paths.iter().filter(|q| a.is_sub_of(q)).collect();
        let mut shared = LabelContext::new();
        for (l, w) in sig.outputs.lookup(p).unwrap().iter() {
            let everywhere = reach.iter().all(|q| sig.outputs.lookup(q).unwrap().get(l) == Some(w));
            if everywhere && rng.gen_bool(0.7) {
                shared.insert(l.clone(), w);
            }
        }
        let d = extend_random(&mut rng, Circuit::input(shared.clone()), 6, &gates, "d");
        let sig_d = check_signature(&d, &gates).unwrap();
        nontrivial += usize::from(!sig_d.tree.is_leaf());

        let predicted = sig
            .outputs
            .graft_with(&a, |_, ctx| {
                let rest = ctx.extract(&shared).unwrap();
                Ok(sig_d.outputs.map(|o| rest.disjoint_union(o).unwrap()))
            })
            .unwrap();
        let got = check_signature(&insert(&c, &a, &d).unwrap(), &gates).unwrap();
        assert_eq!(got.input, sig.input);
        assert_eq!(got.tree, sig.tree.graft(&a, &sig_d.tree).unwrap());
        assert_eq!(got.outputs, predicted, "{c}\n--\n{d}\nat {a}");
    }
    assert!(nontrivial > 20);
}

#[test]
fn lifting_tree_matches_path_map_oracle() {
    let r = run_lifting_oracle(2024, 1000);
    assert_eq!(r.discrepancies(), 0, "{r}");
}
