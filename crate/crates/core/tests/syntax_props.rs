use proptest::prelude::*;

use pqk_core::crl::{GateSet, MType};
use pqk_core::lifting_tree::{LiftedObject, LiftedVar};
use pqk_core::syntax::{alpha_equiv_term, parse_term, parse_type, substitute_term, Term, Type, Value};

fn lvar() -> impl Strategy<Value = LiftedVar> {
    prop::sample::select(vec!["u", "s", "v1", "w"]).prop_map(LiftedVar::new)
}

fn arb_mtype() -> impl Strategy<Value = MType> + Clone {
    let leaf = prop_oneof![Just(MType::Unit), Just(MType::qubit()), Just(MType::bit())];
    leaf.prop_recursive(3, 8, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| MType::tensor(a, b)))
}

fn lifted<X: Clone + std::fmt::Debug + 'static>(
    leaf: impl Strategy<Value = X> + Clone + 'static,
) -> impl Strategy<Value = LiftedObject<X>> {
    prop_oneof![
        3 => leaf.clone().prop_map(LiftedObject::leaf),
        1 => (lvar(), leaf.clone(), leaf).prop_map(|(u, a, b)| LiftedObject::node(u, LiftedObject::leaf(a), LiftedObject::leaf(b))),
    ]
}

fn arb_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![Just(Type::Unit), Just(Type::qubit()), Just(Type::bit())];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::tensor(a, b)),
            (inner.clone(), lifted(inner.clone())).prop_map(|(a, b)| Type::arrow(a, b)),
            inner.clone().prop_map(Type::bang),
            (arb_mtype(), lifted(arb_mtype())).prop_map(|(t, th)| Type::Circ(t, th)),
        ]
    })
}

fn name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["x", "y", "z", "f"])
}

fn arb_value_leaf() -> impl Strategy<Value = Value> + Clone {
    prop_oneof![
        Just(Value::Unit),
        name().prop_map(Value::var),
        prop::sample::select(vec!["l", "k"]).prop_map(Value::label),
        prop::sample::select(vec!["H", "CNOT", "Meas"])
            .prop_map(|g| Value::boxed(GateSet::default().boxed_gate(g).unwrap())),
    ]
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = arb_value_leaf().prop_map(Term::Return);
    leaf.prop_recursive(4, 24, 3, |t| {
        let v = prop_oneof![
            3 => arb_value_leaf(),
            1 => (name(), arb_type(), t.clone()).prop_map(|(x, a, m)| Value::lam(x, a, m)),
            1 => t.clone().prop_map(Value::lift),
            1 => (arb_value_leaf(), arb_value_leaf()).prop_map(|(a, b)| Value::pair(a, b)),
        ];
        prop_oneof![
            (v.clone(), v.clone()).prop_map(|(a, b)| Term::App(a, b)),
            (name(), t.clone(), lifted(t.clone())).prop_map(|(x, m, mu)| Term::let_in(x, m, mu)),
            (name(), name(), v.clone(), t.clone())
                .prop_filter("distinct binders", |(x, y, _, _)| x != y)
                .prop_map(|(x, y, w, m)| Term::let_pair(x, y, w, m)),
            v.clone().prop_map(Term::Force),
            (arb_mtype(), v.clone()).prop_map(|(ty, w)| Term::Box(ty, vec![], w)),
            (prop::collection::btree_set(lvar(), 0..3), v.clone(), v.clone()).prop_map(|(us, a, b)| Term::Apply(
                us.into_iter().collect(),
                a,
                b
            )),
            v.prop_map(Term::Return),
        ]
    })
}

proptest! {
    #[test]
    fn printed_terms_parse_back(t in arb_term()) {
        let printed = t.to_string();
        let back = parse_term(&printed).map_err(|e| TestCaseError::fail(format!("{}: {}", e.render(&printed), printed)))?;
        prop_assert_eq!(back, t);
    }

    #[test]
    fn printed_types_parse_back(a in arb_type()) {
        let printed = a.to_string();
        let back = parse_type(&printed).map_err(|e| TestCaseError::fail(format!("{}: {}", e.render(&printed), printed)))?;
        prop_assert_eq!(back, a);
    }

    #[test]
    fn substituting_a_fresh_variable_back_is_alpha_identity(t in arb_term()) {
        let there = substitute_term(&t, &Value::var("fresh"), "x");
        let back = substitute_term(&there, &Value::var("x"), "fresh");
        prop_assert!(alpha_equiv_term(&back, &t), "{} vs {}", back, t);
    }

    #[test]
    fn alpha_equivalence_is_reflexive(t in arb_term()) {
        prop_assert!(alpha_equiv_term(&t, &t.clone()));
    }
}
