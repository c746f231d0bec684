//! Linear type-and-effect checking in left-over style: each judgment consumes
//! the linear resources it needs from a context and hands the rest on.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crl::{self, Circuit, CrlError, GateSet, Label, LabelContext, MType, MValue};
use crate::lifting_tree::{
    flatten, Assignment, LiftError, LiftedObject, LiftedVar, LiftingTree, Nested, Perm, RenameLifted,
};
use crate::syntax::{types_alpha_equiv, Ident, LiftedType, Program, Term, Type, Value};
use crate::text::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Binding {
    name: String,
    ty: Type,
    id: u64,
    used: bool,
}

/// Variables and labels available to a judgment.
///
/// Linear bindings are marked used rather than removed, so a later use of the
/// same name reports a linearity violation instead of reaching a shadowed
/// outer binding.
#[derive(Debug, Clone, Default)]
pub struct TypingContext {
    vars: Vec<Binding>,
    labels: LabelContext,
    spent: BTreeSet<Label>,
    /// Linear bindings below this index and all labels are out of reach
    /// (inside `lift`).
    barrier: Option<usize>,
    next_id: u64,
}

impl TypingContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_labels(labels: LabelContext) -> Self {
        TypingContext { labels, ..Self::default() }
    }

    pub fn with_var(mut self, name: &str, ty: Type) -> Self {
        self.bind(name, ty);
        self
    }

    pub fn labels(&self) -> &LabelContext {
        &self.labels
    }

    /// Live bindings, innermost last.
    pub fn vars(&self) -> impl Iterator<Item = (&str, &Type)> {
        self.vars.iter().filter(|b| !b.used).map(|b| (b.name.as_str(), &b.ty))
    }

    /// Unconsumed linear variables.
    pub fn leftover_linear(&self) -> Vec<String> {
        self.vars.iter().filter(|b| !b.used && !b.ty.is_parameter()).map(|b| b.name.clone()).collect()
    }

    fn bind(&mut self, name: &str, ty: Type) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.vars.push(Binding { name: name.to_string(), ty, id, used: false });
        id
    }

    /// Removes binding `id`, failing if it is linear and still unused.
    fn unbind(&mut self, id: u64, x: &Ident, rule: &'static str) -> Result<(), TypeError> {
        let pos = self.vars.iter().rposition(|b| b.id == id).expect("binding present");
        let b = self.vars.remove(pos);
        if !b.used && !b.ty.is_parameter() {
            return Err(TypeError::new(TypeErrorKind::UnusedLinear(vec![b.name]), rule).at(x.span));
        }
        Ok(())
    }

    /// Consumption state, ignoring binding identities.
    fn resources(&self) -> (Vec<(String, bool)>, &LabelContext) {
        (self.vars.iter().map(|b| (b.name.clone(), b.used)).collect(), &self.labels)
    }
}

/// `(t, α)` with `α.tree() = t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationTyping {
    pub ty: LiftedObject<Type>,
}

impl ComputationTyping {
    pub fn leaf(a: Type) -> Self {
        ComputationTyping { ty: LiftedObject::leaf(a) }
    }

    pub fn tree(&self) -> LiftingTree {
        self.ty.tree()
    }

    pub fn alpha_equiv(&self, other: &ComputationTyping) -> bool {
        crate::syntax::lifted_types_alpha_equiv(&self.ty, &other.ty)
    }
}

impl fmt::Display for ComputationTyping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.tree(), LiftedType(&self.ty))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum TypeErrorKind {
    #[error("unbound variable `{0}`")]
    UnboundVar(String),
    #[error("unbound label `{0}`")]
    UnboundLabel(String),
    #[error("linear resource `{0}` is used more than once")]
    LinearityViolation(String),
    #[error("linear variables {0:?} are never used")]
    UnusedLinear(Vec<String>),
    #[error("linear resources {0:?} are left over")]
    LeftoverLinear(Vec<String>),
    #[error("linear resource `{0}` used under `lift`")]
    NonParameterUnderLift(String),
    #[error("`lift` body has effect tree {0}, expected a leaf")]
    EffectfulLift(String),
    #[error("expected {expected}, found {found}")]
    Mismatch { expected: String, found: String },
    #[error("ill-formed type: {0}")]
    IllFormedType(String),
    #[error("continuation has tree {found}, the bound computation has tree {expected}")]
    BranchArityMismatch { expected: String, found: String },
    #[error("branches of the continuation consume different resources")]
    BranchResourceMismatch,
    #[error("flattening the continuation trees fails: {0}")]
    FlattenClash(String),
    #[error("circuit has {expected} lifted variables but apply names {found}")]
    ApplyArity { expected: usize, found: usize },
    #[error("lifted variables supplied to apply are not distinct")]
    LiftedVarNotFresh,
    #[error("boxed circuit is ill-formed: {0}")]
    BadCircuit(String),
    #[error("value is not an M-value")]
    NotAnMValue,
}

/// A rejection, citing the typing rule that failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub rule: &'static str,
    pub span: Option<Span>,
    /// Branch of a lifted judgment under which the failure occurred.
    pub path: Option<Assignment>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.kind)?;
        if let Some(p) = &self.path {
            write!(f, " on branch {}", p)?;
        }
        Ok(())
    }
}

impl TypeError {
    pub fn new(kind: TypeErrorKind, rule: &'static str) -> Self {
        TypeError { kind, rule, span: None, path: None }
    }

    fn at(mut self, span: Span) -> Self {
        self.span.get_or_insert(span);
        self
    }

    fn under(mut self, a: &Assignment) -> Self {
        self.path = Some(match self.path.take() {
            None => a.clone(),
            Some(p) => a.union(&p).unwrap_or(p),
        });
        self
    }

    /// The message with a `line:col` prefix when the span is known.
    pub fn render(&self, src: &str) -> String {
        match self.span {
            Some(sp) => {
                let (l, c) = sp.line_col(src);
                format!("type error at {}:{}: {}", l, c, self)
            }
            None => format!("type error: {}", self),
        }
    }
}

fn mismatch(expected: impl fmt::Display, found: impl fmt::Display, rule: &'static str) -> TypeError {
    TypeError::new(TypeErrorKind::Mismatch { expected: expected.to_string(), found: found.to_string() }, rule)
}

fn value_span(v: &Value) -> Option<Span> {
    match v {
        Value::Var(x) => Some(x.span),
        Value::Label(_, sp) => Some(*sp),
        Value::Lam(x, _, _) => Some(x.span),
        Value::Pair(a, _) => value_span(a),
        _ => None,
    }
}

fn with_value_span(e: TypeError, v: &Value) -> TypeError {
    match value_span(v) {
        Some(sp) => e.at(sp),
        None => e,
    }
}

/// `Γ; Q ⊢v V : A`, returning `A` and the left-over context.
pub fn type_value(ctx: &TypingContext, v: &Value, gates: &GateSet) -> Result<(Type, TypingContext), TypeError> {
    let mut ctx = ctx.clone();
    let a = Checker { gates }.value(&mut ctx, v)?;
    Ok((a, ctx))
}

/// `Γ; Q ⊢c_t M : α`, returning `(t, α)` and the left-over context.
pub fn type_term(
    ctx: &TypingContext,
    m: &Term,
    gates: &GateSet,
) -> Result<(ComputationTyping, TypingContext), TypeError> {
    let mut ctx = ctx.clone();
    let c = Checker { gates }.term(&mut ctx, m)?;
    Ok((c, ctx))
}

/// Types `m` under no variables and the label context `labels`, requiring
/// every label to be consumed.
pub fn type_closed(m: &Term, labels: &LabelContext, gates: &GateSet) -> Result<ComputationTyping, TypeError> {
    let (c, left) = type_term(&TypingContext::with_labels(labels.clone()), m, gates)?;
    let mut rest = left.leftover_linear();
    rest.extend(left.labels.labels().map(|l| format!("@{}", l)));
    if !rest.is_empty() {
        return Err(TypeError::new(TypeErrorKind::LeftoverLinear(rest), "top"));
    }
    Ok(c)
}

pub fn check_program(p: &Program, gates: &GateSet) -> Result<ComputationTyping, TypeError> {
    type_closed(&p.term, &p.labels, gates)
}

/// `∅; Q ⊢v V : A` with `Q` consumed exactly.
pub fn type_closed_value(v: &Value, labels: &LabelContext, gates: &GateSet) -> Result<Type, TypeError> {
    let (a, left) = type_value(&TypingContext::with_labels(labels.clone()), v, gates)?;
    if !left.labels.is_empty() {
        return Err(TypeError::new(
            TypeErrorKind::LeftoverLinear(left.labels.labels().map(|l| format!("@{}", l)).collect()),
            "top",
        ));
    }
    Ok(a)
}

/// `∅; Δ ⊩v_t φ : α`: branchwise value typing, each branch consuming its
/// label context exactly.
pub fn type_lifted_value(
    deltas: &LiftedObject<LabelContext>,
    phi: &LiftedObject<Value>,
    gates: &GateSet,
) -> Result<LiftedObject<Type>, TypeError> {
    if deltas.tree() != phi.tree() {
        return Err(TypeError::new(
            TypeErrorKind::BranchArityMismatch { expected: deltas.tree().to_string(), found: phi.tree().to_string() },
            "lifted",
        ));
    }
    phi.try_map_paths(|p, v| {
        let q = deltas.lookup(p).expect("same tree");
        type_closed_value(v, q, gates).map_err(|e| e.under(p))
    })
}

/// The M-judgment behind a closed value: `V` must be an M-value, typed in `q`
/// with every label used once.
pub fn mjudgment_bridge(q: &LabelContext, v: &Value) -> Result<MType, TypeError> {
    let mv = v.to_mvalue().ok_or_else(|| TypeError::new(TypeErrorKind::NotAnMValue, "mvalue"))?;
    crl::type_mvalue(q, &mv).map_err(|e| crl_error(e, "mvalue"))
}

fn crl_error(e: CrlError, rule: &'static str) -> TypeError {
    let kind = match e {
        CrlError::UnboundLabel { label, .. } => TypeErrorKind::UnboundLabel(label.to_string()),
        CrlError::DuplicateLabel(l) => TypeErrorKind::LinearityViolation(format!("@{}", l)),
        CrlError::LeftoverLabel(ls) => TypeErrorKind::LeftoverLinear(ls.iter().map(|l| format!("@{}", l)).collect()),
        other => TypeErrorKind::BadCircuit(other.to_string()),
    };
    TypeError::new(kind, rule)
}

struct Checker<'g> {
    gates: &'g GateSet,
}

impl Checker<'_> {
    fn use_var(&self, ctx: &mut TypingContext, x: &Ident) -> Result<Type, TypeError> {
        let err = |k| TypeError::new(k, "var").at(x.span);
        let pos = ctx
            .vars
            .iter()
            .rposition(|b| b.name == x.name)
            .ok_or_else(|| err(TypeErrorKind::UnboundVar(x.name.clone())))?;
        let b = &mut ctx.vars[pos];
        if b.ty.is_parameter() {
            return Ok(b.ty.clone());
        }
        if b.used {
            return Err(err(TypeErrorKind::LinearityViolation(x.name.clone())));
        }
        if ctx.barrier.is_some_and(|bar| pos < bar) {
            return Err(TypeError::new(TypeErrorKind::NonParameterUnderLift(x.name.clone()), "lift").at(x.span));
        }
        b.used = true;
        Ok(b.ty.clone())
    }

    fn use_label(&self, ctx: &mut TypingContext, l: &Label, sp: Span) -> Result<Type, TypeError> {
        if ctx.barrier.is_some() {
            return Err(TypeError::new(TypeErrorKind::NonParameterUnderLift(format!("@{}", l)), "lift").at(sp));
        }
        match ctx.labels.remove(l) {
            Some(w) => {
                ctx.spent.insert(l.clone());
                Ok(Type::Wire(w))
            }
            None if ctx.spent.contains(l) => {
                Err(TypeError::new(TypeErrorKind::LinearityViolation(format!("@{}", l)), "label").at(sp))
            }
            None => Err(TypeError::new(TypeErrorKind::UnboundLabel(l.to_string()), "label").at(sp)),
        }
    }

    fn value(&self, ctx: &mut TypingContext, v: &Value) -> Result<Type, TypeError> {
        match v {
            Value::Unit => Ok(Type::Unit),
            Value::Var(x) => self.use_var(ctx, x),
            Value::Label(l, sp) => self.use_label(ctx, l, *sp),
            Value::Lam(x, a, m) => {
                a.check_well_formed().map_err(|e| TypeError::new(TypeErrorKind::IllFormedType(e), "abs").at(x.span))?;
                let id = ctx.bind(&x.name, a.clone());
                let c = self.term(ctx, m)?;
                ctx.unbind(id, x, "abs")?;
                Ok(Type::Arrow(Box::new(a.clone()), Box::new(c.ty)))
            }
            Value::Lift(m) => {
                let saved = ctx.barrier;
                ctx.barrier = Some(ctx.vars.len());
                let r = self.term(ctx, m);
                ctx.barrier = saved;
                let c = r?;
                match c.ty.as_leaf() {
                    Some(_) => Ok(Type::Bang(Box::new(c.ty))),
                    None => Err(TypeError::new(TypeErrorKind::EffectfulLift(c.tree().to_string()), "lift")),
                }
            }
            Value::Boxed(b) => {
                let sig = crl::check_signature(&b.circuit, self.gates).map_err(|e| crl_error(e, "circ"))?;
                if sig.tree != b.tree() {
                    return Err(mismatch(
                        format!("output tuples over {}", sig.tree),
                        format!("output tuples over {}", b.tree()),
                        "circ",
                    ));
                }
                let t = crl::type_mvalue(&sig.input, &b.in_tuple).map_err(|e| crl_error(e, "circ"))?;
                let theta = b.out_tuples.try_map_paths(|p, lam| {
                    let delta = sig.outputs.lookup(p).expect("same tree");
                    crl::type_mvalue(delta, lam).map_err(|e| crl_error(e, "circ").under(p))
                })?;
                Ok(Type::Circ(t, theta))
            }
            Value::Pair(a, b) => {
                let ta = self.value(ctx, a)?;
                let tb = self.value(ctx, b)?;
                Ok(Type::tensor(ta, tb))
            }
        }
    }

    fn term(&self, ctx: &mut TypingContext, m: &Term) -> Result<ComputationTyping, TypeError> {
        match m {
            Term::Return(v) => Ok(ComputationTyping::leaf(self.value(ctx, v)?)),
            Term::App(v, w) => {
                let f = self.value(ctx, v)?;
                let Type::Arrow(a, beta) = f else {
                    return Err(with_value_span(mismatch("a function", f, "app"), v));
                };
                let b = self.value(ctx, w)?;
                if !types_alpha_equiv(&a, &b) {
                    return Err(with_value_span(mismatch(a, b, "app"), w));
                }
                Ok(ComputationTyping { ty: *beta })
            }
            Term::LetPair(x, y, v, body) => {
                let t = self.value(ctx, v)?;
                let Type::Tensor(a, b) = t else {
                    return Err(with_value_span(mismatch("a tensor", t, "dest"), v));
                };
                let ix = ctx.bind(&x.name, *a);
                let iy = ctx.bind(&y.name, *b);
                let c = self.term(ctx, body)?;
                ctx.unbind(iy, y, "dest")?;
                ctx.unbind(ix, x, "dest")?;
                Ok(c)
            }
            Term::Force(v) => {
                let t = self.value(ctx, v)?;
                let Type::Bang(alpha) = t else {
                    return Err(with_value_span(mismatch("a lifted computation `!α`", t, "force"), v));
                };
                Ok(ComputationTyping { ty: *alpha })
            }
            Term::Box(tin, _, v) => {
                let t = self.value(ctx, v)?;
                let bad = |t: &Type| with_value_span(mismatch(format!("!({} -o θ)", tin), t, "box"), v);
                let Type::Bang(alpha) = &t else { return Err(bad(&t)) };
                let Some(Type::Arrow(dom, theta)) = alpha.as_leaf() else { return Err(bad(&t)) };
                if **dom != Type::from_mtype(tin) {
                    return Err(bad(&t));
                }
                let theta = theta.try_map(|b| b.to_mtype().ok_or(())).map_err(|_| bad(&t))?;
                Ok(ComputationTyping::leaf(Type::Circ(tin.clone(), theta)))
            }
            Term::Apply(us, v, w) => {
                let tc = self.value(ctx, v)?;
                let Type::Circ(tin, theta) = tc else {
                    return Err(with_value_span(mismatch("a circuit", tc, "apply"), v));
                };
                let tw = self.value(ctx, w)?;
                if tw != Type::from_mtype(&tin) {
                    return Err(with_value_span(mismatch(&tin, tw, "apply"), w));
                }
                let binders = theta.tree().binders();
                if binders.len() != us.len() {
                    return Err(TypeError::new(
                        TypeErrorKind::ApplyArity { expected: binders.len(), found: us.len() },
                        "apply",
                    ));
                }
                let pi = Perm::from_pairs(binders.into_iter().zip(us.iter().cloned()))
                    .ok_or_else(|| TypeError::new(TypeErrorKind::LiftedVarNotFresh, "apply"))?;
                Ok(ComputationTyping { ty: theta.rename_lifted(&pi).map(Type::from_mtype) })
            }
            Term::Let(x, m, mu) => {
                let c = self.term(ctx, m)?;
                let (types, left) = self.lifted_term(ctx, x, &c.ty, mu)?;
                *ctx = left;
                let nested = types.map(|ct| Nested::Lifted(ct.ty.clone()));
                let ty = flatten(nested)
                    .map_err(|e| TypeError::new(TypeErrorKind::FlattenClash(e.to_string()), "let").at(x.span))?;
                Ok(ComputationTyping { ty })
            }
        }
    }

    /// `Φ, Γ, x:α; Q ⊩c μ : θ` with `Γ` and `Q` shared by every branch.
    fn lifted_term(
        &self,
        ctx: &TypingContext,
        x: &Ident,
        alpha: &LiftedObject<Type>,
        mu: &LiftedObject<Term>,
    ) -> Result<(LiftedObject<ComputationTyping>, TypingContext), TypeError> {
        if alpha.tree() != mu.tree() {
            return Err(TypeError::new(
                TypeErrorKind::BranchArityMismatch { expected: alpha.tree().to_string(), found: mu.tree().to_string() },
                "let",
            )
            .at(x.span));
        }
        let mut first: Option<TypingContext> = None;
        let out = mu.try_map_paths(|p, n| {
            let a = alpha.lookup(p).expect("same tree");
            let mut branch = ctx.clone();
            let id = branch.bind(&x.name, a.clone());
            let c = self.term(&mut branch, n).map_err(|e| e.under(p))?;
            branch.unbind(id, x, "let").map_err(|e| e.under(p))?;
            match &first {
                None => first = Some(branch),
                Some(f) if f.resources() == branch.resources() => {}
                Some(_) => {
                    return Err(TypeError::new(TypeErrorKind::BranchResourceMismatch, "let").at(x.span).under(p));
                }
            }
            Ok(c)
        })?;
        Ok((out, first.expect("at least one branch")))
    }
}

/// Components of a well-typed left configuration `⟨C, a, M⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeftConfigTyping {
    pub input: LabelContext,
    pub past: LiftingTree,
    pub typing: ComputationTyping,
    /// Outputs of `C` with the labels consumed by `M` removed on branch `a`.
    pub outputs: LiftedObject<LabelContext>,
}

/// Which conjunct of configuration well-typedness failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("branch {0} is not a path of the circuit")]
    NotAPath(Assignment),
    #[error("lifted variables {0:?} are both in scope and produced by the term")]
    VarClash(Vec<LiftedVar>),
    #[error("circuit signature: {0}")]
    Signature(CrlError),
    #[error("circuit tree is {found}, expected {expected}")]
    TreeMismatch { expected: LiftingTree, found: LiftingTree },
    #[error("outputs on branch {path} are {found}, expected {expected}")]
    OutputsMismatch { path: Assignment, expected: String, found: String },
    #[error("typing: {0}")]
    Typing(TypeError),
    #[error("type {found} does not match expected {expected}")]
    TypeMismatch { expected: String, found: String },
    #[error(transparent)]
    Lift(#[from] LiftError),
}

/// `Q ⊢_t^r ⟨C, a, M⟩ : α; Δ`. The term's label context `Q'` is the set of
/// its free labels, which must be outputs of `C` on branch `a`.
pub fn typecheck_left_config(
    c: &Circuit,
    a: &Assignment,
    m: &Term,
    gates: &GateSet,
) -> Result<LeftConfigTyping, ConfigError> {
    let sig = crl::check_signature(c, gates).map_err(ConfigError::Signature)?;
    if !sig.tree.is_path(a) {
        return Err(ConfigError::NotAPath(a.clone()));
    }
    let here = sig.outputs.lookup(a).expect("path");
    let used = crate::syntax::free_labels_term(m);
    let mut q_term = LabelContext::new();
    for l in &used {
        match here.get(l) {
            Some(w) => {
                q_term.insert(l.clone(), w);
            }
            None => {
                return Err(ConfigError::Signature(CrlError::UnboundLabel { label: l.clone(), path: Some(a.clone()) }))
            }
        }
    }
    let typing = type_closed(m, &q_term, gates).map_err(ConfigError::Typing)?;
    let clash: Vec<LiftedVar> = sig.tree.var_set(a).intersection(&typing.tree().vars()).cloned().collect();
    if !clash.is_empty() {
        return Err(ConfigError::VarClash(clash));
    }
    let mut outputs = sig.outputs.clone();
    let slot = outputs.lookup_mut(a).expect("path");
    *slot = slot.extract(&q_term).map_err(ConfigError::Signature)?;
    Ok(LeftConfigTyping { input: sig.input, past: sig.tree, typing, outputs })
}

/// `Q ⊢_t^r,a ⟨D, φ⟩ : α; Δ` against the left configuration it came from:
/// the circuit tree is the past tree grafted with `φ`'s tree at `a`, paths
/// away from `a` keep their outputs, and on each new path the outputs are
/// the untouched labels plus a context `Λ` typing `φ` exactly.
pub fn typecheck_right_config(
    d: &Circuit,
    phi: &LiftedObject<Value>,
    a: &Assignment,
    before: &LeftConfigTyping,
    gates: &GateSet,
) -> Result<(), ConfigError> {
    let sig = crl::check_signature(d, gates).map_err(ConfigError::Signature)?;
    if sig.input != before.input {
        return Err(ConfigError::OutputsMismatch {
            path: Assignment::empty(),
            expected: format!("input {}", before.input),
            found: format!("input {}", sig.input),
        });
    }
    let r = phi.tree();
    if r != before.typing.tree() {
        return Err(ConfigError::TreeMismatch { expected: before.typing.tree(), found: r });
    }
    let expected_tree = before.past.graft(a, &r)?;
    if sig.tree != expected_tree {
        return Err(ConfigError::TreeMismatch { expected: expected_tree, found: sig.tree });
    }
    let untouched = before.outputs.lookup(a).expect("path");
    for (p, out) in sig.outputs.entries() {
        if a.is_sub_of(&p) {
            let b = a.domain().iter().fold(p.clone(), |acc, u| acc.without(u));
            let lambda_b = out.extract(untouched).map_err(|_| ConfigError::OutputsMismatch {
                path: p.clone(),
                expected: format!("a superset of {}", untouched),
                found: out.to_string(),
            })?;
            let v = phi.lookup(&b).expect("path of r");
            let ty = type_closed_value(v, &lambda_b, gates).map_err(|e| ConfigError::Typing(e.under(&b)))?;
            let want = before.typing.ty.lookup(&b).expect("path of r");
            if !types_alpha_equiv(&ty, want) {
                return Err(ConfigError::TypeMismatch { expected: want.to_string(), found: ty.to_string() });
            }
        } else {
            let want = before.outputs.lookup(&p).expect("untouched path");
            if out != want {
                return Err(ConfigError::OutputsMismatch {
                    path: p.clone(),
                    expected: want.to_string(),
                    found: out.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Subject reduction for a closed run: `⟨input(∅), ∅, M⟩ ⇓ ⟨D, φ⟩` with
/// `⊢ M : (t, α)` must give `D ▷ t; ∅ → Λ` and `∅; Λ ⊩v_t φ : α`.
pub fn check_closed_result(
    d: &Circuit,
    phi: &LiftedObject<Value>,
    expected: &ComputationTyping,
    gates: &GateSet,
) -> Result<(), ConfigError> {
    let before = LeftConfigTyping {
        input: LabelContext::new(),
        past: LiftingTree::Leaf,
        typing: expected.clone(),
        outputs: LiftedObject::leaf(LabelContext::new()),
    };
    typecheck_right_config(d, phi, &Assignment::empty(), &before, gates)
}

/// `∅; ∅ ⊢v V : A` for a closed value.
pub fn type_of_closed_value(v: &Value, gates: &GateSet) -> Result<Type, TypeError> {
    type_closed_value(v, &LabelContext::new(), gates)
}

/// Bound lifted variables that an `apply` of a value of this type
/// instantiates.
pub fn circ_binders(t: &Type) -> Option<Vec<LiftedVar>> {
    match t {
        Type::Circ(_, theta) => Some(theta.tree().binders()),
        _ => None,
    }
}

/// `Q ⊨ ℓ⃗ : T` lifted to values: builds the value of an M-value.
pub fn mvalue_value(v: &MValue) -> Value {
    Value::from_mvalue(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, parse_term, parse_type};

    fn gs() -> GateSet {
        GateSet::default()
    }

    const ML: &str =
        "circuit ML = crl (l) { input(l:Qubit); Meas(l) -> m; lift(m) => u; } => case u { 0 => * | 1 => * };\n";

    fn check(src: &str) -> Result<ComputationTyping, TypeError> {
        let p = parse_program(src, &gs()).unwrap();
        check_program(&p, &gs())
    }

    #[test]
    fn one_way_golden() {
        let src = format!(
            "{}return fun (q : Qubit) -> return fun (a : Qubit) -> \
             let q = apply(H, q) in let _ = apply[u](ML, q) in case u {{ 0 => return a | 1 => apply(Meas, a) }}",
            ML
        );
        let c = check(&src).unwrap();
        let want = parse_type("Qubit -o Qubit -o[<u ? _ | _>] <u ? Qubit | Bit>").unwrap();
        assert_eq!(c.tree(), LiftingTree::Leaf);
        assert!(types_alpha_equiv(c.ty.as_leaf().unwrap(), &want), "{}", c);
    }

    #[test]
    fn let_example() {
        let src = format!("labels (l:Qubit, k:Qubit);\n{}let _ = apply[u](ML, @l) in when u = 1 do apply(H, @k)", ML);
        let c = check(&src).unwrap();
        assert_eq!(c.tree(), LiftingTree::single("u"));
        assert_eq!(c.ty, LiftedObject::node("u", LiftedObject::leaf(Type::qubit()), LiftedObject::leaf(Type::qubit())));
    }

    #[test]
    fn value_rules() {
        let ctx = TypingContext::new().with_var("x", Type::qubit());
        let (t, left) = type_value(&ctx, &Value::var("x"), &gs()).unwrap();
        assert_eq!(t, Type::qubit());
        assert!(left.leftover_linear().is_empty());
        let ctx = TypingContext::with_labels(LabelContext::from_pairs([("l", crl::WireType::Qubit)]).unwrap());
        let (t, left) = type_value(&ctx, &Value::label("l"), &gs()).unwrap();
        assert_eq!(t, Type::qubit());
        assert!(left.labels().is_empty());
        let (t, _) = type_value(&TypingContext::new(), &Value::lift(Term::Return(Value::Unit)), &gs()).unwrap();
        assert_eq!(t, Type::bang(Type::Unit));
    }

    #[test]
    fn return_unit() {
        let c = type_closed(&Term::Return(Value::Unit), &LabelContext::new(), &gs()).unwrap();
        assert_eq!(c, ComputationTyping::leaf(Type::Unit));
    }

    #[test]
    fn duplicated_label_is_rejected() {
        let e = check("labels (q:Qubit); return (@q, @q)").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::LinearityViolation("@q".into()));
        assert_eq!(e.span.unwrap().start, 30);
    }

    #[test]
    fn linear_variable_twice_and_unused() {
        let e = check("return fun (x : Qubit) -> return (x, x)").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::LinearityViolation("x".into()));
        let e = check("return fun (x : Qubit) -> return *").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::UnusedLinear(vec!["x".into()]));
        assert!(check("return fun (x : Unit) -> return (x, x)").is_ok());
    }

    #[test]
    fn lift_rejects_linear_capture() {
        let e = check("return fun (x : Qubit) -> return lift return x").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::NonParameterUnderLift("x".into()));
        let e = check("labels (q:Qubit); return lift return @q").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::NonParameterUnderLift("@q".into()));
    }

    #[test]
    fn branch_shape_and_resources() {
        let src = format!("labels (l:Qubit, k:Qubit);\n{}let _ = apply[u](ML, @l) in return @k", ML);
        let e = check(&src).unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::BranchArityMismatch { .. }));
        let src = format!(
            "labels (l:Qubit, k:Qubit);\n{}let _ = apply[u](ML, @l) in case u {{ 0 => return * | 1 => return @k }}",
            ML
        );
        let e = check(&src).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::BranchResourceMismatch);
        assert!(e.path.is_some());
    }

    #[test]
    fn flatten_clash_on_reused_variable() {
        let inner = "let _ = apply[u](ML, @k) in case u { 0 => return * | 1 => return * }";
        let src = format!(
            "labels (l:Qubit, k:Qubit);\n{}let _ = apply[u](ML, @l) in case u {{ 0 => {} | 1 => {} }}",
            ML, inner, inner
        );
        let e = check(&src).unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::FlattenClash(_)), "{}", e);
    }

    #[test]
    fn apply_renames_binders() {
        let src = format!("labels (l:Qubit);\n{}apply[s](ML, @l)", ML);
        let c = check(&src).unwrap();
        assert_eq!(c.tree(), LiftingTree::single("s"));
        let src = format!("labels (l:Qubit);\n{}apply(ML, @l)", ML);
        assert!(matches!(check(&src).unwrap_err().kind, TypeErrorKind::ApplyArity { expected: 1, found: 0 }));
    }

    #[test]
    fn box_and_force() {
        let c = check("box[Qubit] lift return fun (q : Qubit) -> apply(H, q)").unwrap();
        assert_eq!(c.ty.as_leaf().unwrap(), &parse_type("Circ(Qubit, Qubit)").unwrap());
        let e = check("force *").unwrap_err();
        assert_eq!(e.rule, "force");
    }

    #[test]
    fn mjudgment_bridge_cases() {
        assert_eq!(mjudgment_bridge(&LabelContext::new(), &Value::Unit).unwrap(), MType::Unit);
        let q = LabelContext::from_pairs([("l", crl::WireType::Bit)]).unwrap();
        assert_eq!(mjudgment_bridge(&q, &Value::label("l")).unwrap(), MType::bit());
        let lam = Value::lam("x", Type::Unit, Term::Return(Value::var("x")));
        assert_eq!(mjudgment_bridge(&LabelContext::new(), &lam).unwrap_err().kind, TypeErrorKind::NotAnMValue);
    }

    #[test]
    fn parameter_weakening() {
        let m = parse_term("return fun (x : Qubit) -> return x").unwrap();
        let base = type_term(&TypingContext::new(), &m, &gs()).unwrap().0;
        let weak = TypingContext::new().with_var("p", Type::bang(Type::Unit));
        assert_eq!(type_term(&weak, &m, &gs()).unwrap().0, base);
    }

    #[test]
    fn left_config_trivial_and_stale_branch() {
        let c = Circuit::input(LabelContext::new());
        let lt = typecheck_left_config(&c, &Assignment::empty(), &Term::Return(Value::Unit), &gs()).unwrap();
        assert_eq!(lt.past, LiftingTree::Leaf);
        assert_eq!(lt.typing, ComputationTyping::leaf(Type::Unit));
        let stale = Assignment::singleton(LiftedVar::new("u"), true);
        assert!(matches!(
            typecheck_left_config(&c, &stale, &Term::Return(Value::Unit), &gs()),
            Err(ConfigError::NotAPath(_))
        ));
    }
}
