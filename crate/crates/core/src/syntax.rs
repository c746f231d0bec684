//! Abstract syntax of Proto-Quipper-K, its surface syntax, α-equivalence and
//! capture-avoiding substitution.
//!
//! Surface grammar, with `λ` written `fun` and lifted terms written as nested
//! `case` blocks:
//!
//! ```text
//! program ::= { labels (l:Qubit, …); | circuit NAME = crl (…) { … } => …; } term
//! term    ::= let x = term in lterm | let (x, y) = value in term
//!           | force value | box[T] value | apply[u, …](value, value)
//!           | return value | atom atom
//! lterm   ::= case u { 0 => lterm | 1 => lterm } | when u = 0|1 do term | term
//! value   ::= fun (x : type) -> term | lift term | atom
//! atom    ::= * | x | @label | (value, …) | crl (mvalue) { circuit } => lmvalue
//! type    ::= Unit | Bit | Qubit | type * type | type -o[tree] ltype | !ltype
//!           | Circ[tree](mtype, lmtype)
//! ltype   ::= <u ? ltype | ltype> | type        tree ::= _ | <u ? tree | tree>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::crl::{self, BoxedCircuit, Circuit, GateSet, Label, LabelContext, MType, MValue, RenameLabels, WireType};
use crate::lifting_tree::{LiftedObject, LiftedVar, LiftingTree, Perm, RenameLifted};
use crate::text::{Cursor, Span, SyntaxError, Tok};

/// A term variable with the span of its occurrence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident { name: name.into(), span: Span::default() }
    }

    pub fn at(name: impl Into<String>, span: Span) -> Self {
        Ident { name: name.into(), span }
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Unit,
    Wire(WireType),
    /// `A ⊸_t β`; `t` is the tree of `β`.
    Arrow(Box<Type>, Box<LiftedObject<Type>>),
    Bang(Box<LiftedObject<Type>>),
    /// `Circ_t(T, θ)`; `t` is the tree of `θ` and its variables are bound.
    Circ(MType, LiftedObject<MType>),
    Tensor(Box<Type>, Box<Type>),
}

impl Type {
    pub fn qubit() -> Self {
        Type::Wire(WireType::Qubit)
    }

    pub fn bit() -> Self {
        Type::Wire(WireType::Bit)
    }

    pub fn arrow(a: Type, beta: LiftedObject<Type>) -> Self {
        Type::Arrow(Box::new(a), Box::new(beta))
    }

    pub fn tensor(a: Type, b: Type) -> Self {
        Type::Tensor(Box::new(a), Box::new(b))
    }

    pub fn bang(a: Type) -> Self {
        Type::Bang(Box::new(LiftedObject::leaf(a)))
    }

    pub fn from_mtype(t: &MType) -> Self {
        match t {
            MType::Unit => Type::Unit,
            MType::Wire(w) => Type::Wire(*w),
            MType::Tensor(a, b) => Type::tensor(Type::from_mtype(a), Type::from_mtype(b)),
        }
    }

    pub fn to_mtype(&self) -> Option<MType> {
        match self {
            Type::Unit => Some(MType::Unit),
            Type::Wire(w) => Some(MType::Wire(*w)),
            Type::Tensor(a, b) => Some(MType::tensor(a.to_mtype()?, b.to_mtype()?)),
            _ => None,
        }
    }

    /// Parameter types (`𝟙`, `!α`, circuit types and their tensors) may be
    /// duplicated and discarded.
    pub fn is_parameter(&self) -> bool {
        match self {
            Type::Unit | Type::Bang(_) | Type::Circ(..) => true,
            Type::Tensor(a, b) => a.is_parameter() && b.is_parameter(),
            Type::Wire(_) | Type::Arrow(..) => false,
        }
    }

    /// Representative with the bound variables of circuit types renamed to
    /// `$0, $1, …` in binder order.
    pub fn canonical(&self) -> Type {
        match self {
            Type::Unit | Type::Wire(_) => self.clone(),
            Type::Arrow(a, beta) => Type::Arrow(Box::new(a.canonical()), Box::new(beta.map(Type::canonical))),
            Type::Bang(alpha) => Type::Bang(Box::new(alpha.map(Type::canonical))),
            Type::Tensor(a, b) => Type::tensor(a.canonical(), b.canonical()),
            Type::Circ(t, theta) => Type::Circ(t.clone(), canonical_binders(theta)),
        }
    }

    /// Lifted variables occurring free (those of arrow annotations).
    pub fn free_lifted_vars(&self) -> BTreeSet<LiftedVar> {
        let mut out = BTreeSet::new();
        self.collect_free_lifted(&mut out);
        out
    }

    fn collect_free_lifted(&self, out: &mut BTreeSet<LiftedVar>) {
        match self {
            Type::Unit | Type::Wire(_) | Type::Circ(..) => {}
            Type::Arrow(a, beta) => {
                a.collect_free_lifted(out);
                out.extend(beta.tree().vars());
                for b in beta.leaves() {
                    b.collect_free_lifted(out);
                }
            }
            Type::Bang(alpha) => {
                out.extend(alpha.tree().vars());
                for b in alpha.leaves() {
                    b.collect_free_lifted(out);
                }
            }
            Type::Tensor(a, b) => {
                a.collect_free_lifted(out);
                b.collect_free_lifted(out);
            }
        }
    }

    /// Well-formedness of annotations: trees are well formed and `!` is only
    /// applied to effect-free (single-leaf) lifted types.
    pub fn check_well_formed(&self) -> Result<(), String> {
        match self {
            Type::Unit | Type::Wire(_) => Ok(()),
            Type::Arrow(a, beta) => {
                a.check_well_formed()?;
                beta.tree().check_well_formed().map_err(|e| e.to_string())?;
                beta.leaves().into_iter().try_for_each(Type::check_well_formed)
            }
            Type::Bang(alpha) => match alpha.as_leaf() {
                Some(a) => a.check_well_formed(),
                None => Err(format!("`!` applied to the branching type {}", LiftedType(alpha))),
            },
            Type::Circ(_, theta) => theta.tree().check_well_formed().map_err(|e| e.to_string()),
            Type::Tensor(a, b) => {
                a.check_well_formed()?;
                b.check_well_formed()
            }
        }
    }
}

/// Equality of types up to renaming of circuit-type binders.
pub fn types_alpha_equiv(a: &Type, b: &Type) -> bool {
    a.canonical() == b.canonical()
}

pub fn lifted_types_alpha_equiv(a: &LiftedObject<Type>, b: &LiftedObject<Type>) -> bool {
    a.map(Type::canonical) == b.map(Type::canonical)
}

fn canonical_binders<X: RenameLifted>(o: &LiftedObject<X>) -> LiftedObject<X> {
    let pi = Perm::from_pairs(
        o.tree().binders().into_iter().enumerate().map(|(i, u)| (u, LiftedVar::new(format!("${}", i)))),
    )
    .expect("distinct binders");
    o.rename_lifted(&pi)
}

impl RenameLifted for Type {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            Type::Unit | Type::Wire(_) => self.clone(),
            Type::Arrow(a, beta) => Type::Arrow(Box::new(a.rename_lifted(pi)), Box::new(beta.rename_lifted(pi))),
            Type::Bang(alpha) => Type::Bang(Box::new(alpha.rename_lifted(pi))),
            Type::Circ(t, theta) => Type::Circ(t.clone(), theta.rename_lifted(pi)),
            Type::Tensor(a, b) => Type::tensor(a.rename_lifted(pi), b.rename_lifted(pi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    App(Value, Value),
    /// `let x = M in μ`; the continuation carries one term per path of the
    /// effect tree of `M`.
    Let(Ident, Box<Term>, Box<LiftedObject<Term>>),
    LetPair(Ident, Ident, Value, Box<Term>),
    Force(Value),
    /// `box_T^𝒱 V`; the variable list `𝒱` is kept verbatim and otherwise ignored.
    Box(MType, Vec<LiftedVar>, Value),
    Apply(Vec<LiftedVar>, Value, Value),
    Return(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Unit,
    Var(Ident),
    Label(Label, Span),
    Lam(Ident, Type, Box<Term>),
    Lift(Box<Term>),
    Boxed(Box<BoxedCircuit>),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn var(x: &str) -> Self {
        Value::Var(Ident::new(x))
    }

    pub fn label(l: &str) -> Self {
        Value::Label(Label::new(l), Span::default())
    }

    pub fn pair(a: Value, b: Value) -> Self {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn lam(x: &str, ty: Type, body: Term) -> Self {
        Value::Lam(Ident::new(x), ty, Box::new(body))
    }

    pub fn lift(m: Term) -> Self {
        Value::Lift(Box::new(m))
    }

    pub fn boxed(b: BoxedCircuit) -> Self {
        Value::Boxed(Box::new(b))
    }

    pub fn from_mvalue(v: &MValue) -> Self {
        match v {
            MValue::Unit => Value::Unit,
            MValue::Label(l) => Value::Label(l.clone(), Span::default()),
            MValue::Pair(a, b) => Value::pair(Value::from_mvalue(a), Value::from_mvalue(b)),
        }
    }

    /// The M-value this value denotes, if it is built from `*`, labels and
    /// pairs only.
    pub fn to_mvalue(&self) -> Option<MValue> {
        match self {
            Value::Unit => Some(MValue::Unit),
            Value::Label(l, _) => Some(MValue::Label(l.clone())),
            Value::Pair(a, b) => Some(MValue::pair(a.to_mvalue()?, b.to_mvalue()?)),
            _ => None,
        }
    }

    /// Right-nested tuple; `*` when empty.
    pub fn tuple(mut items: Vec<Value>) -> Self {
        let last = items.pop().unwrap_or(Value::Unit);
        items.into_iter().rev().fold(last, |acc, v| Value::pair(v, acc))
    }
}

impl Term {
    pub fn ret(v: Value) -> Self {
        Term::Return(v)
    }

    pub fn let_in(x: &str, m: Term, mu: LiftedObject<Term>) -> Self {
        Term::Let(Ident::new(x), Box::new(m), Box::new(mu))
    }

    pub fn let_pair(x: &str, y: &str, v: Value, m: Term) -> Self {
        Term::LetPair(Ident::new(x), Ident::new(y), v, Box::new(m))
    }

    pub fn apply(vars: &[&str], c: Value, w: Value) -> Self {
        Term::Apply(vars.iter().map(|u| LiftedVar::new(*u)).collect(), c, w)
    }

    /// Number of nested term/value constructors on the longest path.
    pub fn depth(&self) -> usize {
        1 + match self {
            Term::App(v, w) => v.depth().max(w.depth()),
            Term::Let(_, m, mu) => m.depth().max(mu.leaves().iter().map(|t| t.depth()).max().unwrap_or(0)),
            Term::LetPair(_, _, v, m) => v.depth().max(m.depth()),
            Term::Force(v) | Term::Box(_, _, v) | Term::Return(v) => v.depth(),
            Term::Apply(_, v, w) => v.depth().max(w.depth()),
        }
    }

    /// Number of constructors.
    pub fn size(&self) -> usize {
        1 + match self {
            Term::App(v, w) | Term::Apply(_, v, w) => v.size() + w.size(),
            Term::Let(_, m, mu) => m.size() + mu.leaves().iter().map(|t| t.size()).sum::<usize>(),
            Term::LetPair(_, _, v, m) => v.size() + m.size(),
            Term::Force(v) | Term::Box(_, _, v) | Term::Return(v) => v.size(),
        }
    }
}

impl Value {
    pub fn depth(&self) -> usize {
        match self {
            Value::Unit | Value::Var(_) | Value::Label(..) | Value::Boxed(_) => 1,
            Value::Lam(_, _, m) | Value::Lift(m) => 1 + m.depth(),
            Value::Pair(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Value::Unit | Value::Var(_) | Value::Label(..) | Value::Boxed(_) => 1,
            Value::Lam(_, _, m) | Value::Lift(m) => 1 + m.size(),
            Value::Pair(a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// A parsed `.pqk` file: the ambient label context and the main term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub labels: LabelContext,
    pub term: Term,
}

// ---------------------------------------------------------------------------
// Free names

/// A free occurrence: a term variable or a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreeName {
    Var(Ident),
    Label(Label, Span),
}

/// Free variables and labels in order of first occurrence.
pub fn free_occurrences_term(m: &Term) -> Vec<FreeName> {
    let mut out = Vec::new();
    occ_term(m, &mut Vec::new(), &mut out);
    out
}

fn push_occ(out: &mut Vec<FreeName>, n: FreeName) {
    let dup = out.iter().any(|o| match (o, &n) {
        (FreeName::Var(a), FreeName::Var(b)) => a.name == b.name,
        (FreeName::Label(a, _), FreeName::Label(b, _)) => a == b,
        _ => false,
    });
    if !dup {
        out.push(n);
    }
}

fn occ_term(m: &Term, bound: &mut Vec<String>, out: &mut Vec<FreeName>) {
    match m {
        Term::App(v, w) | Term::Apply(_, v, w) => {
            occ_value(v, bound, out);
            occ_value(w, bound, out);
        }
        Term::Let(x, m, mu) => {
            occ_term(m, bound, out);
            bound.push(x.name.clone());
            for t in mu.leaves() {
                occ_term(t, bound, out);
            }
            bound.pop();
        }
        Term::LetPair(x, y, v, m) => {
            occ_value(v, bound, out);
            bound.push(x.name.clone());
            bound.push(y.name.clone());
            occ_term(m, bound, out);
            bound.pop();
            bound.pop();
        }
        Term::Force(v) | Term::Box(_, _, v) | Term::Return(v) => occ_value(v, bound, out),
    }
}

fn occ_value(v: &Value, bound: &mut Vec<String>, out: &mut Vec<FreeName>) {
    match v {
        Value::Unit | Value::Boxed(_) => {}
        Value::Var(x) => {
            if !bound.contains(&x.name) {
                push_occ(out, FreeName::Var(x.clone()));
            }
        }
        Value::Label(l, sp) => push_occ(out, FreeName::Label(l.clone(), *sp)),
        Value::Lam(x, _, m) => {
            bound.push(x.name.clone());
            occ_term(m, bound, out);
            bound.pop();
        }
        Value::Lift(m) => occ_term(m, bound, out),
        Value::Pair(a, b) => {
            occ_value(a, bound, out);
            occ_value(b, bound, out);
        }
    }
}

pub fn free_vars_term(m: &Term) -> BTreeSet<String> {
    free_occurrences_term(m)
        .into_iter()
        .filter_map(|o| match o {
            FreeName::Var(x) => Some(x.name),
            FreeName::Label(..) => None,
        })
        .collect()
}

pub fn free_vars_value(v: &Value) -> BTreeSet<String> {
    let mut out = Vec::new();
    occ_value(v, &mut Vec::new(), &mut out);
    out.into_iter()
        .filter_map(|o| match o {
            FreeName::Var(x) => Some(x.name),
            FreeName::Label(..) => None,
        })
        .collect()
}

pub fn free_labels_term(m: &Term) -> BTreeSet<Label> {
    free_occurrences_term(m)
        .into_iter()
        .filter_map(|o| match o {
            FreeName::Label(l, _) => Some(l),
            FreeName::Var(_) => None,
        })
        .collect()
}

pub fn free_labels_value(v: &Value) -> BTreeSet<Label> {
    let mut out = Vec::new();
    occ_value(v, &mut Vec::new(), &mut out);
    out.into_iter()
        .filter_map(|o| match o {
            FreeName::Label(l, _) => Some(l),
            FreeName::Var(_) => None,
        })
        .collect()
}

/// Lifted variables of apply instructions, let continuations and type
/// annotations; those bound by boxed circuits and circuit types are excluded.
pub fn free_lifted_vars_term(m: &Term) -> BTreeSet<LiftedVar> {
    let mut out = BTreeSet::new();
    lifted_term(m, &mut out);
    out
}

pub fn free_lifted_vars_value(v: &Value) -> BTreeSet<LiftedVar> {
    let mut out = BTreeSet::new();
    lifted_value(v, &mut out);
    out
}

fn lifted_term(m: &Term, out: &mut BTreeSet<LiftedVar>) {
    match m {
        Term::App(v, w) => {
            lifted_value(v, out);
            lifted_value(w, out);
        }
        Term::Apply(us, v, w) => {
            out.extend(us.iter().cloned());
            lifted_value(v, out);
            lifted_value(w, out);
        }
        Term::Let(_, m, mu) => {
            lifted_term(m, out);
            out.extend(mu.tree().vars());
            for t in mu.leaves() {
                lifted_term(t, out);
            }
        }
        Term::LetPair(_, _, v, m) => {
            lifted_value(v, out);
            lifted_term(m, out);
        }
        Term::Box(_, us, v) => {
            out.extend(us.iter().cloned());
            lifted_value(v, out);
        }
        Term::Force(v) | Term::Return(v) => lifted_value(v, out),
    }
}

fn lifted_value(v: &Value, out: &mut BTreeSet<LiftedVar>) {
    match v {
        Value::Unit | Value::Var(_) | Value::Label(..) | Value::Boxed(_) => {}
        Value::Lam(_, ty, m) => {
            out.extend(ty.free_lifted_vars());
            lifted_term(m, out);
        }
        Value::Lift(m) => lifted_term(m, out),
        Value::Pair(a, b) => {
            lifted_value(a, out);
            lifted_value(b, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution

fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut n = 1;
    loop {
        let cand = format!("{}_{}", base, n);
        if !avoid.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// Renames binder `y` to a name outside `avoid` when it would capture.
fn freshen(y: &Ident, body_fv: &BTreeSet<String>, v_fv: &BTreeSet<String>, x: &str) -> Option<Ident> {
    if !v_fv.contains(&y.name) {
        return None;
    }
    let mut avoid = body_fv.clone();
    avoid.extend(v_fv.iter().cloned());
    avoid.insert(x.to_string());
    Some(Ident::at(fresh_name(&y.name, &avoid), y.span))
}

/// `M[V/x]`.
pub fn substitute_term(m: &Term, v: &Value, x: &str) -> Term {
    let fv = free_vars_value(v);
    subst_term(m, v, x, &fv)
}

/// `W[V/x]`.
pub fn substitute_value(w: &Value, v: &Value, x: &str) -> Value {
    let fv = free_vars_value(v);
    subst_value(w, v, x, &fv)
}

fn rename_var_term(m: &Term, from: &str, to: &Ident) -> Term {
    subst_term(m, &Value::Var(to.clone()), from, &BTreeSet::from([to.name.clone()]))
}

fn subst_term(m: &Term, v: &Value, x: &str, fv: &BTreeSet<String>) -> Term {
    match m {
        Term::App(a, b) => Term::App(subst_value(a, v, x, fv), subst_value(b, v, x, fv)),
        Term::Let(y, n, mu) => {
            let n = Box::new(subst_term(n, v, x, fv));
            if y.name == x {
                return Term::Let(y.clone(), n, mu.clone());
            }
            let body_fv: BTreeSet<String> = mu.leaves().iter().flat_map(|t| free_vars_term(t)).collect();
            match freshen(y, &body_fv, fv, x) {
                Some(y2) => {
                    let mu = mu.map(|t| subst_term(&rename_var_term(t, &y.name, &y2), v, x, fv));
                    Term::Let(y2, n, Box::new(mu))
                }
                None => Term::Let(y.clone(), n, Box::new(mu.map(|t| subst_term(t, v, x, fv)))),
            }
        }
        Term::LetPair(y, z, w, n) => {
            let w = subst_value(w, v, x, fv);
            if y.name == x || z.name == x {
                return Term::LetPair(y.clone(), z.clone(), w, n.clone());
            }
            let mut body = (**n).clone();
            let mut binders = [y.clone(), z.clone()];
            for b in binders.iter_mut() {
                let body_fv = free_vars_term(&body);
                if let Some(b2) = freshen(b, &body_fv, fv, x) {
                    let mut avoid = body_fv;
                    avoid.insert(y.name.clone());
                    avoid.insert(z.name.clone());
                    avoid.extend(fv.iter().cloned());
                    let b2 = Ident::at(fresh_name(&b.name, &avoid), b2.span);
                    body = rename_var_term(&body, &b.name, &b2);
                    *b = b2;
                }
            }
            let [y2, z2] = binders;
            Term::LetPair(y2, z2, w, Box::new(subst_term(&body, v, x, fv)))
        }
        Term::Force(w) => Term::Force(subst_value(w, v, x, fv)),
        Term::Box(t, us, w) => Term::Box(t.clone(), us.clone(), subst_value(w, v, x, fv)),
        Term::Apply(us, a, b) => Term::Apply(us.clone(), subst_value(a, v, x, fv), subst_value(b, v, x, fv)),
        Term::Return(w) => Term::Return(subst_value(w, v, x, fv)),
    }
}

fn subst_value(w: &Value, v: &Value, x: &str, fv: &BTreeSet<String>) -> Value {
    match w {
        Value::Unit | Value::Label(..) | Value::Boxed(_) => w.clone(),
        Value::Var(y) => {
            if y.name == x {
                v.clone()
            } else {
                w.clone()
            }
        }
        Value::Lam(y, ty, m) => {
            if y.name == x {
                return w.clone();
            }
            match freshen(y, &free_vars_term(m), fv, x) {
                Some(y2) => {
                    let m = rename_var_term(m, &y.name, &y2);
                    Value::Lam(y2, ty.clone(), Box::new(subst_term(&m, v, x, fv)))
                }
                None => Value::Lam(y.clone(), ty.clone(), Box::new(subst_term(m, v, x, fv))),
            }
        }
        Value::Lift(m) => Value::Lift(Box::new(subst_term(m, v, x, fv))),
        Value::Pair(a, b) => Value::pair(subst_value(a, v, x, fv), subst_value(b, v, x, fv)),
    }
}

// ---------------------------------------------------------------------------
// α-equivalence

type Env = Vec<(String, String)>;

fn var_eq(env: &Env, a: &str, b: &str) -> bool {
    for (x, y) in env.iter().rev() {
        if x == a || y == b {
            return x == a && y == b;
        }
    }
    a == b
}

pub fn alpha_equiv_term(a: &Term, b: &Term) -> bool {
    aeq_term(a, b, &mut Vec::new())
}

pub fn alpha_equiv_value(a: &Value, b: &Value) -> bool {
    aeq_value(a, b, &mut Vec::new())
}

fn aeq_term(a: &Term, b: &Term, env: &mut Env) -> bool {
    match (a, b) {
        (Term::App(v1, w1), Term::App(v2, w2)) => aeq_value(v1, v2, env) && aeq_value(w1, w2, env),
        (Term::Let(x1, m1, mu1), Term::Let(x2, m2, mu2)) => {
            if !aeq_term(m1, m2, env) || mu1.tree() != mu2.tree() {
                return false;
            }
            env.push((x1.name.clone(), x2.name.clone()));
            let ok = mu1.leaves().iter().zip(mu2.leaves()).all(|(s, t)| aeq_term(s, t, env));
            env.pop();
            ok
        }
        (Term::LetPair(x1, y1, v1, m1), Term::LetPair(x2, y2, v2, m2)) => {
            if !aeq_value(v1, v2, env) {
                return false;
            }
            env.push((x1.name.clone(), x2.name.clone()));
            env.push((y1.name.clone(), y2.name.clone()));
            let ok = aeq_term(m1, m2, env);
            env.truncate(env.len() - 2);
            ok
        }
        (Term::Force(v1), Term::Force(v2)) | (Term::Return(v1), Term::Return(v2)) => aeq_value(v1, v2, env),
        (Term::Box(t1, u1, v1), Term::Box(t2, u2, v2)) => t1 == t2 && u1 == u2 && aeq_value(v1, v2, env),
        (Term::Apply(u1, v1, w1), Term::Apply(u2, v2, w2)) => {
            u1 == u2 && aeq_value(v1, v2, env) && aeq_value(w1, w2, env)
        }
        _ => false,
    }
}

fn aeq_value(a: &Value, b: &Value, env: &mut Env) -> bool {
    match (a, b) {
        (Value::Unit, Value::Unit) => true,
        (Value::Var(x), Value::Var(y)) => var_eq(env, &x.name, &y.name),
        (Value::Label(l, _), Value::Label(k, _)) => l == k,
        (Value::Lam(x, t1, m1), Value::Lam(y, t2, m2)) => {
            if !types_alpha_equiv(t1, t2) {
                return false;
            }
            env.push((x.name.clone(), y.name.clone()));
            let ok = aeq_term(m1, m2, env);
            env.pop();
            ok
        }
        (Value::Lift(m1), Value::Lift(m2)) => aeq_term(m1, m2, env),
        (Value::Boxed(b1), Value::Boxed(b2)) => b1.canonical() == b2.canonical(),
        (Value::Pair(a1, b1), Value::Pair(a2, b2)) => aeq_value(a1, a2, env) && aeq_value(b1, b2, env),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Renaming

impl RenameLifted for Term {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            Term::App(v, w) => Term::App(v.rename_lifted(pi), w.rename_lifted(pi)),
            Term::Let(x, m, mu) => Term::Let(x.clone(), Box::new(m.rename_lifted(pi)), Box::new(mu.rename_lifted(pi))),
            Term::LetPair(x, y, v, m) => {
                Term::LetPair(x.clone(), y.clone(), v.rename_lifted(pi), Box::new(m.rename_lifted(pi)))
            }
            Term::Force(v) => Term::Force(v.rename_lifted(pi)),
            Term::Box(t, us, v) => Term::Box(t.clone(), us.iter().map(|u| pi.apply(u)).collect(), v.rename_lifted(pi)),
            Term::Apply(us, v, w) => {
                Term::Apply(us.iter().map(|u| pi.apply(u)).collect(), v.rename_lifted(pi), w.rename_lifted(pi))
            }
            Term::Return(v) => Term::Return(v.rename_lifted(pi)),
        }
    }
}

impl RenameLifted for Value {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            Value::Unit | Value::Var(_) | Value::Label(..) => self.clone(),
            Value::Lam(x, ty, m) => Value::Lam(x.clone(), ty.rename_lifted(pi), Box::new(m.rename_lifted(pi))),
            Value::Lift(m) => Value::Lift(Box::new(m.rename_lifted(pi))),
            Value::Boxed(b) => Value::Boxed(Box::new(b.rename_lifted(pi))),
            Value::Pair(a, b) => Value::pair(a.rename_lifted(pi), b.rename_lifted(pi)),
        }
    }
}

impl RenameLabels for Value {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        match self {
            Value::Unit | Value::Var(_) | Value::Boxed(_) => self.clone(),
            Value::Label(l, sp) => Value::Label(rho.apply(l), *sp),
            Value::Lam(x, ty, m) => Value::Lam(x.clone(), ty.clone(), Box::new(m.rename_labels(rho))),
            Value::Lift(m) => Value::Lift(Box::new(m.rename_labels(rho))),
            Value::Pair(a, b) => Value::pair(a.rename_labels(rho), b.rename_labels(rho)),
        }
    }
}

impl RenameLabels for Term {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        match self {
            Term::App(v, w) => Term::App(v.rename_labels(rho), w.rename_labels(rho)),
            Term::Let(x, m, mu) => {
                Term::Let(x.clone(), Box::new(m.rename_labels(rho)), Box::new(mu.rename_labels(rho)))
            }
            Term::LetPair(x, y, v, m) => {
                Term::LetPair(x.clone(), y.clone(), v.rename_labels(rho), Box::new(m.rename_labels(rho)))
            }
            Term::Force(v) => Term::Force(v.rename_labels(rho)),
            Term::Box(t, us, v) => Term::Box(t.clone(), us.clone(), v.rename_labels(rho)),
            Term::Apply(us, v, w) => Term::Apply(us.clone(), v.rename_labels(rho), w.rename_labels(rho)),
            Term::Return(v) => Term::Return(v.rename_labels(rho)),
        }
    }
}

// ---------------------------------------------------------------------------
// Printing

/// Display adapter for lifted types, `<u ? A | B>`.
pub struct LiftedType<'a>(pub &'a LiftedObject<Type>);

impl fmt::Display for LiftedType<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_lifted(f, self.0, &|f, t| write!(f, "{}", t))
    }
}

/// Display adapter for lifted terms, `case u { 0 => M | 1 => N }`.
pub struct LiftedTerm<'a>(pub &'a LiftedObject<Term>);

impl fmt::Display for LiftedTerm<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_case(f, self.0, &|f, t| write!(f, "{}", t))
    }
}

/// Display adapter for lifted values.
pub struct LiftedValue<'a>(pub &'a LiftedObject<Value>);

impl fmt::Display for LiftedValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_case(f, self.0, &|f, v| write!(f, "{}", v))
    }
}

fn fmt_lifted<X>(
    f: &mut fmt::Formatter<'_>,
    o: &LiftedObject<X>,
    leaf: &dyn Fn(&mut fmt::Formatter<'_>, &X) -> fmt::Result,
) -> fmt::Result {
    match o {
        LiftedObject::Leaf(x) => leaf(f, x),
        LiftedObject::Node(u, a, b) => {
            write!(f, "<{} ? ", u)?;
            fmt_lifted(f, a, leaf)?;
            f.write_str(" | ")?;
            fmt_lifted(f, b, leaf)?;
            f.write_str(">")
        }
    }
}

fn fmt_case<X>(
    f: &mut fmt::Formatter<'_>,
    o: &LiftedObject<X>,
    leaf: &dyn Fn(&mut fmt::Formatter<'_>, &X) -> fmt::Result,
) -> fmt::Result {
    match o {
        LiftedObject::Leaf(x) => leaf(f, x),
        LiftedObject::Node(u, a, b) => {
            write!(f, "case {} {{ 0 => ", u)?;
            fmt_case(f, a, leaf)?;
            f.write_str(" | 1 => ")?;
            fmt_case(f, b, leaf)?;
            f.write_str(" }")
        }
    }
}

fn fmt_tree_annot(f: &mut fmt::Formatter<'_>, t: &LiftingTree) -> fmt::Result {
    if t.is_leaf() {
        Ok(())
    } else {
        write!(f, "[{}]", t)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unit => f.write_str("Unit"),
            Type::Wire(w) => write!(f, "{}", w),
            Type::Arrow(a, beta) => {
                if matches!(**a, Type::Arrow(..)) {
                    write!(f, "({})", a)?;
                } else {
                    write!(f, "{}", a)?;
                }
                f.write_str(" -o")?;
                fmt_tree_annot(f, &beta.tree())?;
                write!(f, " {}", LiftedType(beta))
            }
            Type::Bang(alpha) => match &**alpha {
                LiftedObject::Leaf(a) if matches!(a, Type::Arrow(..) | Type::Tensor(..)) => write!(f, "!({})", a),
                _ => write!(f, "!{}", LiftedType(alpha)),
            },
            Type::Circ(t, theta) => {
                f.write_str("Circ")?;
                fmt_tree_annot(f, &theta.tree())?;
                write!(f, "({}, ", t)?;
                fmt_lifted(f, theta, &|f, m| write!(f, "{}", m))?;
                f.write_str(")")
            }
            Type::Tensor(a, b) => {
                if matches!(**a, Type::Arrow(..) | Type::Tensor(..)) {
                    write!(f, "({})", a)?;
                } else {
                    write!(f, "{}", a)?;
                }
                f.write_str(" * ")?;
                if matches!(**b, Type::Arrow(..)) {
                    write!(f, "({})", b)
                } else {
                    write!(f, "{}", b)
                }
            }
        }
    }
}

fn fmt_vars(f: &mut fmt::Formatter<'_>, us: &[LiftedVar]) -> fmt::Result {
    for (i, u) in us.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}", u)?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::App(v, w) => write!(f, "{} {}", Atom(v), Atom(w)),
            Term::Let(x, m, mu) => write!(f, "let {} = {} in {}", x, m, LiftedTerm(mu)),
            Term::LetPair(x, y, v, m) => write!(f, "let ({}, {}) = {} in {}", x, y, v, m),
            Term::Force(v) => write!(f, "force {}", v),
            Term::Box(t, us, v) => {
                write!(f, "box[{}]", t)?;
                if !us.is_empty() {
                    f.write_str("{")?;
                    fmt_vars(f, us)?;
                    f.write_str("}")?;
                }
                write!(f, " {}", v)
            }
            Term::Apply(us, v, w) => {
                f.write_str("apply")?;
                if !us.is_empty() {
                    f.write_str("[")?;
                    fmt_vars(f, us)?;
                    f.write_str("]")?;
                }
                write!(f, "({}, {})", v, w)
            }
            Term::Return(v) => write!(f, "return {}", v),
        }
    }
}

struct Atom<'a>(&'a Value);

impl fmt::Display for Atom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Value::Lam(..) | Value::Lift(_) | Value::Boxed(_) => write!(f, "({})", self.0),
            v => write!(f, "{}", v),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("*"),
            Value::Var(x) => write!(f, "{}", x),
            Value::Label(l, _) => write!(f, "@{}", l),
            Value::Lam(x, ty, m) => write!(f, "fun ({} : {}) -> {}", x, ty, m),
            Value::Lift(m) => write!(f, "lift {}", m),
            Value::Boxed(b) => {
                write!(f, "crl {} {{ {} }} => ", paren_mvalue(&b.in_tuple), b.circuit.to_string().replace('\n', " "))?;
                fmt_case(f, &b.out_tuples, &|f, v| write!(f, "{}", v))
            }
            Value::Pair(a, b) => {
                write!(f, "({}", a)?;
                let mut rest = &**b;
                while let Value::Pair(x, y) = rest {
                    write!(f, ", {}", x)?;
                    rest = y;
                }
                write!(f, ", {})", rest)
            }
        }
    }
}

fn paren_mvalue(v: &MValue) -> String {
    match v {
        MValue::Pair(..) => v.to_string(),
        other => format!("({})", other),
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.labels.is_empty() {
            writeln!(f, "labels ({});", self.labels)?;
        }
        write!(f, "{}", self.term)
    }
}

// ---------------------------------------------------------------------------
// Parsing

const KEYWORDS: &[&str] = &["let", "in", "fun", "lift", "force", "box", "apply", "return", "case", "when", "do", "crl"];

/// Parses a `.pqk` program. Free identifiers naming a `circuit` constant or a
/// gate of `gates` denote the corresponding boxed circuit.
pub fn parse_program(src: &str, gates: &GateSet) -> Result<Program, SyntaxError> {
    let mut p = Parser { cur: Cursor::new(src)?, scope: Vec::new(), constants: BTreeMap::new(), gates: Some(gates) };
    let mut labels = LabelContext::new();
    loop {
        if p.cur.is_kw("labels") && matches!(p.cur.peek_at(1), Tok::Sym("(")) {
            p.cur.bump();
            p.cur.expect_sym("(")?;
            if !p.cur.is_sym(")") {
                loop {
                    let (l, sp) = p.cur.expect_ident()?;
                    p.cur.expect_sym(":")?;
                    let (w, wsp) = p.cur.expect_ident()?;
                    let w = match w.as_str() {
                        "Qubit" => WireType::Qubit,
                        "Bit" => WireType::Bit,
                        _ => return Err(SyntaxError::new(wsp.start, "label types must be Bit or Qubit")),
                    };
                    if labels.insert(Label::new(l.clone()), w).is_some() {
                        return Err(SyntaxError::new(sp.start, format!("label `{}` declared twice", l)));
                    }
                    if !p.cur.eat_sym(",") {
                        break;
                    }
                }
            }
            p.cur.expect_sym(")")?;
            p.cur.expect_sym(";")?;
        } else if p.cur.is_kw("circuit") && matches!(p.cur.peek_at(2), Tok::Sym("=")) {
            p.cur.bump();
            let (name, _) = p.cur.expect_ident()?;
            p.cur.expect_sym("=")?;
            p.cur.expect_kw("crl")?;
            let b = p.boxed_literal()?;
            p.cur.expect_sym(";")?;
            p.constants.insert(name, b);
        } else {
            break;
        }
    }
    let term = p.term()?;
    p.cur.expect_eof()?;
    Ok(Program { labels, term })
}

/// Parses a single term with no constants in scope.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser { cur: Cursor::new(src)?, scope: Vec::new(), constants: BTreeMap::new(), gates: None };
    let t = p.term()?;
    p.cur.expect_eof()?;
    Ok(t)
}

pub fn parse_type(src: &str) -> Result<Type, SyntaxError> {
    let mut p = Parser { cur: Cursor::new(src)?, scope: Vec::new(), constants: BTreeMap::new(), gates: None };
    let t = p.ty()?;
    p.cur.expect_eof()?;
    Ok(t)
}

struct Parser<'g> {
    cur: Cursor,
    scope: Vec<String>,
    constants: BTreeMap<String, BoxedCircuit>,
    gates: Option<&'g GateSet>,
}

impl Parser<'_> {
    fn binder(&mut self) -> Result<Ident, SyntaxError> {
        let (name, sp) = self.cur.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(SyntaxError::new(sp.start, format!("`{}` is a keyword", name)));
        }
        Ok(Ident::at(name, sp))
    }

    fn lifted_var(&mut self) -> Result<LiftedVar, SyntaxError> {
        let (name, sp) = self.cur.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) || name == "_" {
            return Err(SyntaxError::new(sp.start, format!("`{}` cannot name a lifted variable", name)));
        }
        Ok(LiftedVar::new(name))
    }

    fn var_list(&mut self, close: &str) -> Result<Vec<LiftedVar>, SyntaxError> {
        let mut out = Vec::new();
        if !self.cur.is_sym(close) {
            loop {
                out.push(self.lifted_var()?);
                if !self.cur.eat_sym(",") {
                    break;
                }
            }
        }
        self.cur.expect_sym(close)?;
        Ok(out)
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        if self.cur.eat_kw("let") {
            if self.cur.eat_sym("(") {
                let x = self.binder()?;
                self.cur.expect_sym(",")?;
                let y = self.binder()?;
                if x.name == y.name {
                    return Err(SyntaxError::new(y.span.start, format!("`{}` bound twice in the same pattern", y)));
                }
                self.cur.expect_sym(")")?;
                self.cur.expect_sym("=")?;
                let v = self.value()?;
                self.cur.expect_kw("in")?;
                self.scope.push(x.name.clone());
                self.scope.push(y.name.clone());
                let m = self.term();
                self.scope.truncate(self.scope.len() - 2);
                return Ok(Term::LetPair(x, y, v, Box::new(m?)));
            }
            let x = self.binder()?;
            self.cur.expect_sym("=")?;
            let m = self.term()?;
            self.cur.expect_kw("in")?;
            self.scope.push(x.name.clone());
            let mu = self.lterm();
            self.scope.pop();
            return Ok(Term::Let(x, Box::new(m), Box::new(mu?)));
        }
        if self.cur.eat_kw("force") {
            return Ok(Term::Force(self.value()?));
        }
        if self.cur.eat_kw("box") {
            self.cur.expect_sym("[")?;
            let t = crl::parse_mtype(&mut self.cur)?;
            self.cur.expect_sym("]")?;
            let us = if self.cur.eat_sym("{") { self.var_list("}")? } else { Vec::new() };
            return Ok(Term::Box(t, us, self.value()?));
        }
        if self.cur.eat_kw("apply") {
            let us = if self.cur.eat_sym("[") { self.var_list("]")? } else { Vec::new() };
            self.cur.expect_sym("(")?;
            let v = self.value()?;
            self.cur.expect_sym(",")?;
            let w = self.value()?;
            self.cur.expect_sym(")")?;
            return Ok(Term::Apply(us, v, w));
        }
        if self.cur.eat_kw("return") {
            return Ok(Term::Return(self.value()?));
        }
        if self.cur.is_kw("case") || self.cur.is_kw("when") {
            return Err(self.cur.error("a branching continuation is only allowed after `let … in`"));
        }
        let f = self.atom()?;
        if self.starts_atom() {
            let a = self.atom()?;
            Ok(Term::App(f, a))
        } else {
            Err(self.cur.error(format!("expected a term, found a value followed by {}", self.cur.peek())))
        }
    }

    fn lterm(&mut self) -> Result<LiftedObject<Term>, SyntaxError> {
        if self.cur.eat_kw("case") {
            let u = self.lifted_var()?;
            self.cur.expect_sym("{")?;
            self.expect_branch(false)?;
            let zero = self.lterm()?;
            self.cur.expect_sym("|")?;
            self.expect_branch(true)?;
            let one = self.lterm()?;
            self.cur.expect_sym("}")?;
            return Ok(LiftedObject::node(u, zero, one));
        }
        if self.cur.is_kw("when") {
            let sp = self.cur.bump().1;
            let u = self.lifted_var()?;
            self.cur.expect_sym("=")?;
            let bit = self.cur.expect_bit()?;
            self.cur.expect_kw("do")?;
            let m = self.term()?;
            let other = Term::Return(untouched_tuple(&m, sp));
            let (zero, one) = if bit { (other, m) } else { (m, other) };
            return Ok(LiftedObject::node(u, LiftedObject::leaf(zero), LiftedObject::leaf(one)));
        }
        Ok(LiftedObject::leaf(self.term()?))
    }

    fn expect_branch(&mut self, bit: bool) -> Result<(), SyntaxError> {
        let sp = self.cur.span();
        if self.cur.expect_bit()? != bit {
            return Err(SyntaxError::new(sp.start, format!("expected branch {}", u8::from(bit))));
        }
        self.cur.expect_sym("=>")?;
        Ok(())
    }

    fn starts_atom(&self) -> bool {
        match self.cur.peek() {
            Tok::Sym(s) => matches!(*s, "*" | "@" | "("),
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()) || s == "crl",
            _ => false,
        }
    }

    fn value(&mut self) -> Result<Value, SyntaxError> {
        if self.cur.eat_kw("fun") {
            self.cur.expect_sym("(")?;
            let x = self.binder()?;
            self.cur.expect_sym(":")?;
            let ty = self.ty()?;
            self.cur.expect_sym(")")?;
            self.cur.expect_sym("->")?;
            self.scope.push(x.name.clone());
            let m = self.term();
            self.scope.pop();
            return Ok(Value::Lam(x, ty, Box::new(m?)));
        }
        if self.cur.eat_kw("lift") {
            return Ok(Value::Lift(Box::new(self.term()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Value, SyntaxError> {
        if self.cur.eat_sym("*") {
            return Ok(Value::Unit);
        }
        if self.cur.is_sym("@") {
            let at = self.cur.bump().1;
            let (l, sp) = self.cur.expect_ident()?;
            return Ok(Value::Label(Label::new(l), Span::new(at.start, sp.end)));
        }
        if self.cur.eat_sym("(") {
            let mut items = vec![self.value()?];
            while self.cur.eat_sym(",") {
                items.push(self.value()?);
            }
            self.cur.expect_sym(")")?;
            return Ok(Value::tuple(items));
        }
        if self.cur.eat_kw("crl") {
            return Ok(Value::boxed(self.boxed_literal()?));
        }
        let (name, sp) = self.cur.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(SyntaxError::new(sp.start, format!("unexpected keyword `{}`", name)));
        }
        if !self.scope.contains(&name) {
            if let Some(b) = self.constants.get(&name) {
                return Ok(Value::boxed(b.clone()));
            }
            if let Some(b) = self.gates.and_then(|g| g.boxed_gate(&name)) {
                return Ok(Value::boxed(b));
            }
        }
        Ok(Value::Var(Ident::at(name, sp)))
    }

    /// `(in) { circuit } => outputs`, after the `crl` keyword.
    fn boxed_literal(&mut self) -> Result<BoxedCircuit, SyntaxError> {
        let in_tuple = crl::parse_mvalue(&mut self.cur)?;
        self.cur.expect_sym("{")?;
        let circuit: Circuit = crl::parse_circuit(&mut self.cur)?;
        self.cur.expect_sym("}")?;
        self.cur.expect_sym("=>")?;
        let out_tuples = self.lifted_mvalue()?;
        Ok(BoxedCircuit { in_tuple, circuit, out_tuples })
    }

    fn lifted_mvalue(&mut self) -> Result<LiftedObject<MValue>, SyntaxError> {
        if self.cur.eat_kw("case") {
            let u = self.lifted_var()?;
            self.cur.expect_sym("{")?;
            self.expect_branch(false)?;
            let zero = self.lifted_mvalue()?;
            self.cur.expect_sym("|")?;
            self.expect_branch(true)?;
            let one = self.lifted_mvalue()?;
            self.cur.expect_sym("}")?;
            return Ok(LiftedObject::node(u, zero, one));
        }
        Ok(LiftedObject::leaf(crl::parse_mvalue(&mut self.cur)?))
    }

    fn tree(&mut self) -> Result<LiftingTree, SyntaxError> {
        if self.cur.eat_sym("<") {
            let u = self.lifted_var()?;
            self.cur.expect_sym("?")?;
            let a = self.tree()?;
            self.cur.expect_sym("|")?;
            let b = self.tree()?;
            self.cur.expect_sym(">")?;
            return Ok(LiftingTree::node(u, a, b));
        }
        let sp = self.cur.span();
        let (name, _) = self.cur.expect_ident()?;
        if name != "_" {
            return Err(SyntaxError::new(sp.start, "expected a lifting tree (`_` or `<u ? … | …>`)"));
        }
        Ok(LiftingTree::Leaf)
    }

    fn tree_annot(&mut self) -> Result<Option<(LiftingTree, usize)>, SyntaxError> {
        if self.cur.is_sym("[") {
            let pos = self.cur.bump().1.start;
            let t = self.tree()?;
            self.cur.expect_sym("]")?;
            Ok(Some((t, pos)))
        } else {
            Ok(None)
        }
    }

    fn ty(&mut self) -> Result<Type, SyntaxError> {
        let a = self.tensor()?;
        if self.cur.eat_sym("-o") {
            let annot = self.tree_annot()?;
            let beta = self.lifted_type()?;
            if let Some((t, pos)) = annot {
                if t != beta.tree() {
                    return Err(SyntaxError::new(
                        pos,
                        format!("arrow tree {} does not match codomain tree {}", t, beta.tree()),
                    ));
                }
            }
            return Ok(Type::Arrow(Box::new(a), Box::new(beta)));
        }
        Ok(a)
    }

    fn tensor(&mut self) -> Result<Type, SyntaxError> {
        let a = self.prefix()?;
        if self.cur.eat_sym("*") {
            return Ok(Type::tensor(a, self.tensor()?));
        }
        Ok(a)
    }

    fn prefix(&mut self) -> Result<Type, SyntaxError> {
        if self.cur.eat_sym("!") {
            if self.cur.is_sym("<") {
                return Ok(Type::Bang(Box::new(self.lifted_type()?)));
            }
            return Ok(Type::bang(self.prefix()?));
        }
        if self.cur.eat_sym("(") {
            let t = self.ty()?;
            self.cur.expect_sym(")")?;
            return Ok(t);
        }
        let (name, sp) = self.cur.expect_ident()?;
        match name.as_str() {
            "Unit" => Ok(Type::Unit),
            "Bit" => Ok(Type::bit()),
            "Qubit" => Ok(Type::qubit()),
            "Circ" => {
                let annot = self.tree_annot()?;
                self.cur.expect_sym("(")?;
                let t = crl::parse_mtype(&mut self.cur)?;
                self.cur.expect_sym(",")?;
                let theta = self.lifted_mtype()?;
                self.cur.expect_sym(")")?;
                if let Some((tree, pos)) = annot {
                    if tree != theta.tree() {
                        return Err(SyntaxError::new(pos, "circuit tree does not match its output type"));
                    }
                }
                Ok(Type::Circ(t, theta))
            }
            _ => Err(SyntaxError::new(sp.start, format!("expected a type, found `{}`", name))),
        }
    }

    fn lifted_type(&mut self) -> Result<LiftedObject<Type>, SyntaxError> {
        if self.cur.eat_sym("<") {
            let u = self.lifted_var()?;
            self.cur.expect_sym("?")?;
            let a = self.lifted_type()?;
            self.cur.expect_sym("|")?;
            let b = self.lifted_type()?;
            self.cur.expect_sym(">")?;
            return Ok(LiftedObject::node(u, a, b));
        }
        Ok(LiftedObject::leaf(self.ty()?))
    }

    fn lifted_mtype(&mut self) -> Result<LiftedObject<MType>, SyntaxError> {
        if self.cur.eat_sym("<") {
            let u = self.lifted_var()?;
            self.cur.expect_sym("?")?;
            let a = self.lifted_mtype()?;
            self.cur.expect_sym("|")?;
            let b = self.lifted_mtype()?;
            self.cur.expect_sym(">")?;
            return Ok(LiftedObject::node(u, a, b));
        }
        Ok(LiftedObject::leaf(crl::parse_mtype(&mut self.cur)?))
    }
}

/// The omitted branch of `when u = b do M`: returns the free variables and
/// labels of `M` untouched, as a tuple in order of first occurrence.
fn untouched_tuple(m: &Term, sp: Span) -> Value {
    let items = free_occurrences_term(m)
        .into_iter()
        .map(|o| match o {
            FreeName::Var(x) => Value::Var(Ident::at(x.name, sp)),
            FreeName::Label(l, _) => Value::Label(l, sp),
        })
        .collect();
    Value::tuple(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Value {
        Value::var(x)
    }

    #[test]
    fn parse_return_unit() {
        assert_eq!(parse_term("return *").unwrap(), Term::Return(Value::Unit));
    }

    #[test]
    fn parse_one_way() {
        let src = "fun (q : Qubit) -> return fun (a : Qubit) -> \
                   let q = apply(H, q) in let _ = apply[u](ML, q) in case u { 0 => return a | 1 => apply(Meas, a) }";
        let t = parse_term(&format!("return {}", src.replacen("fun", "(fun", 1) + ")")).unwrap();
        let Term::Return(Value::Lam(q, ty, body)) = t else { panic!("not a lambda") };
        assert_eq!(q.name, "q");
        assert_eq!(ty, Type::qubit());
        let Term::Return(Value::Lam(a, _, inner)) = *body else { panic!() };
        assert_eq!(a.name, "a");
        let Term::Let(_, _, mu) = *inner else { panic!() };
        let Term::Let(_, _, mu) = mu.as_leaf().unwrap() else { panic!() };
        assert_eq!(mu.tree(), LiftingTree::single("u"));
    }

    #[test]
    fn print_parse_round_trip() {
        let srcs = [
            "let x = return * in case u { 0 => return x | 1 => case s { 0 => force x | 1 => return (x, x) } }",
            "let (x, y) = (@l, *) in (fun (z : Qubit -o[<u ? _ | _>] <u ? Qubit | Bit>) -> return z) x",
            "box[Qubit * Qubit]{u} lift return fun (p : Qubit * Qubit) -> return p",
            "apply[u, s](crl (a, b) { input(a:Bit, b:Bit); lift(a) => u; lift(b) => s; } => case u { 0 => * | 1 => * }, (@x, @y))",
            "return fun (f : !(Qubit -o Qubit)) -> return (f, fun (c : Circ[<u ? _ | _>](Qubit, <u ? Unit | Bit>)) -> return c)",
            "return fun (p : (Qubit * Bit) * (Unit -o Unit)) -> return p",
        ];
        for src in srcs {
            let t = parse_term(src).unwrap();
            let printed = t.to_string();
            assert_eq!(parse_term(&printed).unwrap(), t, "{}", printed);
        }
    }

    #[test]
    fn type_syntax() {
        let t = parse_type("Qubit -o Qubit -o[<u ? _ | _>] <u ? Qubit | Bit>").unwrap();
        let inner = Type::arrow(
            Type::qubit(),
            LiftedObject::node("u", LiftedObject::leaf(Type::qubit()), LiftedObject::leaf(Type::bit())),
        );
        assert_eq!(t, Type::arrow(Type::qubit(), LiftedObject::leaf(inner)));
        assert_eq!(parse_type(&t.to_string()).unwrap(), t);
        assert!(parse_type("Qubit -o[_] <u ? Qubit | Bit>").is_err());
        assert!(Type::bang(Type::Unit).is_parameter());
        assert!(!Type::tensor(Type::Unit, Type::qubit()).is_parameter());
    }

    #[test]
    fn when_sugar() {
        let t = parse_term("let _ = return * in when u = 1 do apply(h, @k)").unwrap();
        let expected = parse_term("let _ = return * in case u { 0 => return (h, @k) | 1 => apply(h, @k) }").unwrap();
        assert_eq!(t, expected);
    }

    #[test]
    fn constants_resolve_unless_bound() {
        let gs = GateSet::default();
        let p = parse_program("labels (q:Qubit); apply(H, @q)", &gs).unwrap();
        let Term::Apply(_, Value::Boxed(b), _) = &p.term else { panic!() };
        assert_eq!(**b, gs.boxed_gate("H").unwrap());
        let p = parse_program("return fun (H : Unit) -> return H", &gs).unwrap();
        let Term::Return(Value::Lam(_, _, body)) = p.term else { panic!() };
        assert_eq!(*body, Term::Return(v("H")));
        let p = parse_program(
            "circuit ML = crl (l) { input(l:Qubit); Meas(l) -> m; lift(m) => u; } => case u { 0 => * | 1 => * };\nreturn ML",
            &gs,
        )
        .unwrap();
        let Term::Return(Value::Boxed(b)) = p.term else { panic!() };
        assert_eq!(b.tree(), LiftingTree::single("u"));
    }

    #[test]
    fn substitution_clauses() {
        let w = Value::Unit;
        assert_eq!(substitute_value(&v("x"), &w, "x"), w);
        let lam = Value::lam("x", Type::Unit, Term::Return(v("x")));
        assert_eq!(substitute_value(&lam, &w, "x"), lam);
        let gs = GateSet::default();
        let boxed = Value::boxed(gs.boxed_gate("H").unwrap());
        assert_eq!(substitute_value(&boxed, &w, "x"), boxed);
    }

    #[test]
    fn substitution_avoids_capture() {
        let m = parse_term("return fun (y : Unit) -> return (x, y)").unwrap();
        let out = substitute_term(&m, &v("y"), "x");
        let Term::Return(Value::Lam(b, _, body)) = &out else { panic!() };
        assert_ne!(b.name, "y");
        assert_eq!(**body, Term::Return(Value::pair(v("y"), Value::Var(b.clone()))));
        let m = parse_term("let (y, z) = (x, x) in return (y, z, x)").unwrap();
        let out = substitute_term(&m, &v("y"), "x");
        assert!(alpha_equiv_term(&out, &parse_term("let (a, z) = (y, y) in return (a, z, y)").unwrap()));
        let m = parse_term("let y = return x in case u { 0 => return y | 1 => return x }").unwrap();
        let out = substitute_term(&m, &v("y"), "x");
        assert!(alpha_equiv_term(
            &out,
            &parse_term("let a = return y in case u { 0 => return a | 1 => return y }").unwrap()
        ));
        let shadow = parse_term("let x = return x in return x").unwrap();
        assert_eq!(substitute_term(&shadow, &Value::Unit, "x"), parse_term("let x = return * in return x").unwrap());
    }

    #[test]
    fn alpha_equivalence() {
        let a = parse_term("return fun (x : Unit) -> return x").unwrap();
        let b = parse_term("return fun (y : Unit) -> return y").unwrap();
        assert!(alpha_equiv_term(&a, &b));
        let c = parse_term("return fun (y : Unit) -> return x").unwrap();
        assert!(!alpha_equiv_term(&a, &c));
        let t1 = parse_type("Circ[<u ? _ | _>](Qubit, <u ? Unit | Bit>)").unwrap();
        let t2 = parse_type("Circ[<s ? _ | _>](Qubit, <s ? Unit | Bit>)").unwrap();
        assert!(types_alpha_equiv(&t1, &t2));
        let f1 = parse_type("Qubit -o <u ? Qubit | Bit>").unwrap();
        let f2 = parse_type("Qubit -o <s ? Qubit | Bit>").unwrap();
        assert!(!types_alpha_equiv(&f1, &f2));
    }

    #[test]
    fn free_names() {
        let t = parse_term("let x = return @l in apply[v1](c, (x, y))").unwrap();
        assert_eq!(free_vars_term(&t), BTreeSet::from(["c".to_string(), "y".to_string()]));
        assert_eq!(free_labels_term(&t), BTreeSet::from([Label::new("l")]));
        assert!(free_lifted_vars_term(&t).contains(&LiftedVar::new("v1")));
        let gs = GateSet::default();
        assert!(free_labels_value(&Value::boxed(gs.boxed_gate("H").unwrap())).is_empty());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_term("let x = return * in").unwrap_err();
        assert_eq!(e.pos, 19);
        assert!(parse_term("return").is_err());
        assert!(parse_term("x").is_err());
    }
}
