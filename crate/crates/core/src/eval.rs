//! Big-step evaluation of configurations `⟨C, a, M⟩ ⇓ ⟨D, φ⟩`, with a fuel
//! budget standing in for divergence.

use std::fmt;

use thiserror::Error;

use crate::crl::{self, BoxedCircuit, Circuit, CrlError, GateSet, Label, LabelContext, LabelSupply, MType, MValue};
use crate::lifting_tree::{flatten, Assignment, LiftedObject, Nested};
use crate::syntax::{substitute_term, Term, Value};

/// Default step budget.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Deliberate evaluator faults, used to check that the metatheory harness
/// notices a broken semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mutation {
    /// `let` returns the first leaf of each branch result instead of
    /// flattening the branch results into the lifted value.
    SkipLetFlatten,
}

/// Mutable state of one evaluation.
#[derive(Debug, Clone)]
pub struct EvalEnv {
    pub fuel: u64,
    pub labels: LabelSupply,
    pub gates: GateSet,
    pub mutation: Option<Mutation>,
    /// Branch-independence violations observed in `let` (instructions of a
    /// branch appended under a condition that does not extend the branch).
    pub findings: Vec<String>,
}

impl EvalEnv {
    pub fn new(gates: GateSet) -> Self {
        EvalEnv { fuel: DEFAULT_FUEL, labels: LabelSupply::new(), gates, mutation: None, findings: Vec::new() }
    }

    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.fuel = fuel;
        self
    }

    pub fn with_mutation(mut self, m: Mutation) -> Self {
        self.mutation = Some(m);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeftConfig {
    pub circuit: Circuit,
    pub branch: Assignment,
    pub term: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RightConfig {
    pub circuit: Circuit,
    pub value: LiftedObject<Value>,
}

impl RightConfig {
    /// The circuit a program describes: what it built, or, when it built
    /// nothing and returned a single boxed circuit, the boxed one.
    pub fn described_circuit(&self) -> &Circuit {
        match self.value.as_leaf() {
            Some(Value::Boxed(b)) if self.circuit.instructions.is_empty() => &b.circuit,
            _ => &self.circuit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StuckReason {
    #[error("applying a value that is not a function")]
    AppNonLambda,
    #[error("destructuring a value that is not a pair")]
    DestNonPair,
    #[error("forcing a value that is not a lifted computation")]
    ForceNonLift,
    #[error("boxing a value that is not a lifted computation")]
    BoxNonLift,
    #[error("apply on a value that is not a boxed circuit")]
    ApplyNonBoxed,
    #[error("apply target is not an M-value")]
    ApplyNonMValue,
    #[error("append failed: {0}")]
    Append(CrlError),
    #[error("boxed computation did not return M-values")]
    BoxResultNotMValue,
    #[error("continuation tree {found} does not match value tree {expected}")]
    BranchTreeMismatch { expected: String, found: String },
    #[error("flattening failed: {0}")]
    FlattenClash(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalOutcome {
    Done(RightConfig),
    FuelExhausted,
    Stuck(StuckReason, Box<LeftConfig>),
}

impl EvalOutcome {
    pub fn is_stuck(&self) -> bool {
        matches!(self, EvalOutcome::Stuck(..))
    }

    pub fn done(self) -> Option<RightConfig> {
        match self {
            EvalOutcome::Done(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for EvalOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalOutcome::Done(r) => write!(f, "done: {}", crate::syntax::LiftedValue(&r.value)),
            EvalOutcome::FuelExhausted => f.write_str("fuel exhausted"),
            EvalOutcome::Stuck(reason, cfg) => {
                write!(f, "stuck on branch {}: {} in `{}`", cfg.branch, reason, cfg.term)
            }
        }
    }
}

enum Halt {
    Fuel,
    Stuck(StuckReason, LeftConfig),
}

type Step = Result<(Circuit, LiftedObject<Value>), Halt>;

fn stuck(reason: StuckReason, c: &Circuit, a: &Assignment, m: &Term) -> Halt {
    Halt::Stuck(reason, LeftConfig { circuit: c.clone(), branch: a.clone(), term: m.clone() })
}

/// `freshlabels(T)`: a context `Q` and tuple `ℓ⃗` with `Q ⊨ ℓ⃗ : T`.
pub fn freshlabels(supply: &mut LabelSupply, t: &MType) -> (LabelContext, MValue) {
    fresh_avoiding(supply, t, &Default::default())
}

fn fresh_avoiding(
    supply: &mut LabelSupply,
    t: &MType,
    avoid: &std::collections::BTreeSet<Label>,
) -> (LabelContext, MValue) {
    fn go(
        supply: &mut LabelSupply,
        t: &MType,
        avoid: &std::collections::BTreeSet<Label>,
        q: &mut LabelContext,
    ) -> MValue {
        match t {
            MType::Unit => MValue::Unit,
            MType::Wire(w) => {
                let l = supply.fresh(avoid);
                q.insert(l.clone(), *w);
                MValue::Label(l)
            }
            MType::Tensor(a, b) => {
                let va = go(supply, a, avoid, q);
                let vb = go(supply, b, avoid, q);
                MValue::pair(va, vb)
            }
        }
    }
    let mut q = LabelContext::new();
    let v = go(supply, t, avoid, &mut q);
    (q, v)
}

/// Evaluates `cfg`.
pub fn eval(cfg: &LeftConfig, env: &mut EvalEnv) -> EvalOutcome {
    let result = Evaluator { env }.term(cfg.circuit.clone(), &cfg.branch, &cfg.term);
    match result {
        Ok((circuit, value)) => EvalOutcome::Done(RightConfig { circuit, value }),
        Err(Halt::Fuel) => EvalOutcome::FuelExhausted,
        Err(Halt::Stuck(r, c)) => EvalOutcome::Stuck(r, Box::new(c)),
    }
}

/// `⟨input(∅), ∅, M⟩ ⇓ ?`.
pub fn run_closed(m: &Term, env: &mut EvalEnv) -> EvalOutcome {
    run_with_input(m, LabelContext::new(), env)
}

/// `⟨input(Q), ∅, M⟩ ⇓ ?`, for programs over an ambient label context.
pub fn run_with_input(m: &Term, q: LabelContext, env: &mut EvalEnv) -> EvalOutcome {
    let cfg = LeftConfig { circuit: Circuit::input(q), branch: Assignment::empty(), term: m.clone() };
    eval(&cfg, env)
}

struct Evaluator<'e> {
    env: &'e mut EvalEnv,
}

impl Evaluator<'_> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.env.fuel == 0 {
            return Err(Halt::Fuel);
        }
        self.env.fuel -= 1;
        Ok(())
    }

    fn term(&mut self, c: Circuit, a: &Assignment, m: &Term) -> Step {
        self.tick()?;
        match m {
            Term::Return(v) => Ok((c, LiftedObject::leaf(v.clone()))),
            Term::App(v, w) => match v {
                Value::Lam(x, _, body) => {
                    let n = substitute_term(body, w, &x.name);
                    self.term(c, a, &n)
                }
                _ => Err(stuck(StuckReason::AppNonLambda, &c, a, m)),
            },
            Term::LetPair(x, y, v, body) => match v {
                Value::Pair(v1, v2) => {
                    let n = substitute_term(&substitute_term(body, v1, &x.name), v2, &y.name);
                    self.term(c, a, &n)
                }
                _ => Err(stuck(StuckReason::DestNonPair, &c, a, m)),
            },
            Term::Force(v) => match v {
                Value::Lift(body) => self.term(c, a, body),
                _ => Err(stuck(StuckReason::ForceNonLift, &c, a, m)),
            },
            Term::Apply(us, v, w) => {
                let Value::Boxed(b) = v else {
                    return Err(stuck(StuckReason::ApplyNonBoxed, &c, a, m));
                };
                let Some(target) = w.to_mvalue() else {
                    return Err(stuck(StuckReason::ApplyNonMValue, &c, a, m));
                };
                match crl::append(&c, a, &target, b, us, &self.env.gates, &mut self.env.labels) {
                    Ok((d, lam)) => Ok((d, lam.map(Value::from_mvalue))),
                    Err(e) => Err(stuck(StuckReason::Append(e), &c, a, m)),
                }
            }
            Term::Box(t, _, v) => {
                let Value::Lift(body) = v else {
                    return Err(stuck(StuckReason::BoxNonLift, &c, a, m));
                };
                let (q, ells) = fresh_avoiding(&mut self.env.labels, t, &c.labels());
                let sandbox = Circuit::input(q);
                let empty = Assignment::empty();
                let (d1, phi) = self.term(sandbox, &empty, body)?;
                let arg = Value::from_mvalue(&ells);
                let (d, lam) = self.branches(d1, &empty, &phi, m, |_, f| Term::App(f.clone(), arg.clone()))?;
                let Ok(out_tuples) = lam.try_map(|v| v.to_mvalue().ok_or(())) else {
                    return Err(stuck(StuckReason::BoxResultNotMValue, &c, a, m));
                };
                let boxed = BoxedCircuit { in_tuple: ells, circuit: d, out_tuples };
                Ok((c, LiftedObject::leaf(Value::boxed(boxed))))
            }
            Term::Let(x, n, mu) => {
                let (c1, phi) = self.term(c, a, n)?;
                if mu.tree() != phi.tree() {
                    let reason = StuckReason::BranchTreeMismatch {
                        expected: phi.tree().to_string(),
                        found: mu.tree().to_string(),
                    };
                    return Err(stuck(reason, &c1, a, m));
                }
                self.branches(c1, a, &phi, m, |p, v| substitute_term(mu.lookup(p).expect("same tree"), v, &x.name))
            }
        }
    }

    /// Evaluates the continuation of each path of `phi` in path order,
    /// threading the circuit, and flattens the results.
    fn branches(
        &mut self,
        c1: Circuit,
        a: &Assignment,
        phi: &LiftedObject<Value>,
        whole: &Term,
        mut cont: impl FnMut(&crate::lifting_tree::Assignment, &Value) -> Term,
    ) -> Step {
        let mut c = c1;
        let mut results = std::collections::BTreeMap::new();
        for (p, v) in phi.path_values() {
            let Ok(ap) = a.union(&p) else {
                return Err(stuck(StuckReason::FlattenClash(format!("{} and {} overlap", a, p)), &c, a, whole));
            };
            let before = c.instructions.len();
            let n = cont(&p, &v);
            let (next, psi) = self.term(c, &ap, &n)?;
            for ins in &next.instructions[before..] {
                if !ap.is_sub_of(ins.cond()) {
                    self.env.findings.push(format!("instruction `{}` escapes branch {}", ins, ap));
                }
            }
            c = next;
            results.insert(p, psi);
        }
        let nested = match self.env.mutation {
            Some(Mutation::SkipLetFlatten) => phi.try_map_paths(|p, _| {
                let first = results[p].leaves()[0].clone();
                Ok::<_, ()>(Nested::Plain(first))
            }),
            None => phi.try_map_paths(|p, _| Ok(Nested::Lifted(results[p].clone()))),
        }
        .expect("infallible");
        match flatten(nested) {
            Ok(v) => Ok((c, v)),
            Err(e) => Err(stuck(StuckReason::FlattenClash(e.to_string()), &c, a, whole)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crl::WireType;
    use crate::lifting_tree::LiftingTree;
    use crate::syntax::parse_program;

    const ML: &str =
        "circuit ML = crl (l) { input(l:Qubit); Meas(l) -> m; lift(m) => u; } => case u { 0 => * | 1 => * };\n";

    fn run(src: &str) -> EvalOutcome {
        let gs = GateSet::default();
        let p = parse_program(src, &gs).unwrap();
        run_with_input(&p.term, p.labels.clone(), &mut EvalEnv::new(gs))
    }

    #[test]
    fn freshlabels_shapes() {
        let mut s = LabelSupply::new();
        assert_eq!(freshlabels(&mut s, &MType::Unit), (LabelContext::new(), MValue::Unit));
        let mut s = LabelSupply::new();
        let (q, v) = freshlabels(&mut s, &MType::qubit());
        assert_eq!(q, LabelContext::from_pairs([("%0", WireType::Qubit)]).unwrap());
        assert_eq!(v, MValue::label("%0"));
        let mut s = LabelSupply::new();
        let (q, v) = freshlabels(&mut s, &MType::tensor(MType::qubit(), MType::bit()));
        assert_eq!(q, LabelContext::from_pairs([("%0", WireType::Qubit), ("%1", WireType::Bit)]).unwrap());
        assert_eq!(v, MValue::tuple(&["%0", "%1"]));
    }

    #[test]
    fn return_leaves_circuit_alone() {
        let out = run_closed(&Term::Return(Value::Unit), &mut EvalEnv::new(GateSet::default()));
        assert_eq!(
            out,
            EvalOutcome::Done(RightConfig {
                circuit: Circuit::input(LabelContext::new()),
                value: LiftedObject::leaf(Value::Unit)
            })
        );
    }

    #[test]
    fn let_example_builds_conditional_h() {
        let src = format!("labels (l:Qubit, k:Qubit);\n{}let _ = apply[u](ML, @l) in when u = 1 do apply(H, @k)", ML);
        let r = run(&src).done().unwrap();
        let text = r.circuit.to_string();
        assert_eq!(text, "input(k:Qubit, l:Qubit);\nMeas(l) -> %0;\nlift(%0) => u;\n(u=1) ? H(k) -> %1;");
        assert_eq!(r.value.tree(), LiftingTree::single("u"));
        assert_eq!(r.value.leaves(), vec![&Value::label("k"), &Value::label("%1")]);
    }

    #[test]
    fn stuck_and_fuel() {
        let out = run("force *");
        assert!(matches!(out, EvalOutcome::Stuck(StuckReason::ForceNonLift, _)));
        let gs = GateSet::default();
        let m = Term::Return(Value::Unit);
        assert_eq!(run_closed(&m, &mut EvalEnv::new(gs).with_fuel(0)), EvalOutcome::FuelExhausted);
    }

    #[test]
    fn box_leaves_ambient_circuit_untouched() {
        let src = "box[Qubit * Qubit] lift return fun (qa : Qubit * Qubit) -> \
                   let (q, a) = qa in let r = apply(CNOT, (q, a)) in let (q, a) = r in \
                   let q = apply(H, q) in apply(Meas2, (q, a))";
        let r = run(src).done().unwrap();
        assert!(r.circuit.instructions.is_empty());
        let Value::Boxed(b) = r.value.as_leaf().unwrap() else { panic!() };
        assert_eq!(b.circuit.instructions.len(), 3);
    }

    #[test]
    fn one_way_branches() {
        let src = format!(
            "labels (q0:Qubit, a0:Qubit);\n{}let f = return fun (q : Qubit) -> return fun (a : Qubit) -> \
             let q = apply(H, q) in let _ = apply[u](ML, q) in case u {{ 0 => return a | 1 => apply(Meas, a) }} in \
             let g = f @q0 in g @a0",
            ML
        );
        let r = run(&src).done().unwrap();
        assert_eq!(r.value.tree(), LiftingTree::single("u"));
        assert_eq!(r.circuit.instructions.len(), 4);
    }

    #[test]
    fn mutation_changes_shape() {
        let gs = GateSet::default();
        let src = format!("labels (l:Qubit);\n{}let x = return * in apply[u](ML, @l)", ML);
        let p = parse_program(&src, &gs).unwrap();
        let good = run_with_input(&p.term, p.labels.clone(), &mut EvalEnv::new(gs.clone())).done().unwrap();
        let bad =
            run_with_input(&p.term, p.labels.clone(), &mut EvalEnv::new(gs).with_mutation(Mutation::SkipLetFlatten))
                .done()
                .unwrap();
        assert_eq!(good.value.tree(), LiftingTree::single("u"));
        assert_eq!(bad.value.tree(), LiftingTree::Leaf);
    }
}
