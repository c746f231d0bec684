//! The circuit representation language.
//!
//! A circuit is an input header followed by conditional gate applications and
//! conditional lifts over labelled wires. Its signature records the lifting
//! tree it produces and the wires alive at each leaf.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lifting_tree::{Assignment, LiftError, LiftedObject, LiftedVar, LiftingTree, Perm, RenameLifted};
use crate::text::{Cursor, SyntaxError, Tok};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WireType {
    Bit,
    Qubit,
}

impl fmt::Display for WireType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WireType::Bit => "Bit",
            WireType::Qubit => "Qubit",
        })
    }
}

/// Finite map from labels to wire types.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelContext(BTreeMap<Label, WireType>);

impl LabelContext {
    pub fn new() -> Self {
        LabelContext(BTreeMap::new())
    }

    pub fn from_pairs<L: Into<Label>>(pairs: impl IntoIterator<Item = (L, WireType)>) -> Result<Self, CrlError> {
        let mut m = BTreeMap::new();
        for (l, w) in pairs {
            let l = l.into();
            if m.insert(l.clone(), w).is_some() {
                return Err(CrlError::DuplicateLabel(l));
            }
        }
        Ok(LabelContext(m))
    }

    pub fn get(&self, l: &Label) -> Option<WireType> {
        self.0.get(l).copied()
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.0.contains_key(l)
    }

    pub fn insert(&mut self, l: Label, w: WireType) -> Option<WireType> {
        self.0.insert(l, w)
    }

    pub fn remove(&mut self, l: &Label) -> Option<WireType> {
        self.0.remove(l)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, WireType)> {
        self.0.iter().map(|(l, w)| (l, *w))
    }

    /// `Q, L`: defined only on disjoint domains.
    pub fn disjoint_union(&self, other: &LabelContext) -> Result<LabelContext, CrlError> {
        let mut m = self.0.clone();
        for (l, w) in &other.0 {
            if m.insert(l.clone(), *w).is_some() {
                return Err(CrlError::DuplicateLabel(l.clone()));
            }
        }
        Ok(LabelContext(m))
    }

    /// Removes the sub-context `sub`, returning the rest.
    pub fn extract(&self, sub: &LabelContext) -> Result<LabelContext, CrlError> {
        let mut m = self.0.clone();
        for (l, w) in &sub.0 {
            match m.remove(l) {
                None => return Err(CrlError::UnboundLabel { label: l.clone(), path: None }),
                Some(found) if found != *w => {
                    return Err(CrlError::WrongWireType { label: l.clone(), expected: *w, found })
                }
                Some(_) => {}
            }
        }
        Ok(LabelContext(m))
    }
}

impl fmt::Display for LabelContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, w)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", l, w)?;
        }
        Ok(())
    }
}

impl fmt::Debug for LabelContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MType {
    Unit,
    Wire(WireType),
    Tensor(Box<MType>, Box<MType>),
}

impl MType {
    pub fn qubit() -> Self {
        MType::Wire(WireType::Qubit)
    }

    pub fn bit() -> Self {
        MType::Wire(WireType::Bit)
    }

    pub fn tensor(a: MType, b: MType) -> Self {
        MType::Tensor(Box::new(a), Box::new(b))
    }

    pub fn parse(src: &str) -> Result<MType, SyntaxError> {
        let mut cur = Cursor::new(src)?;
        let t = parse_mtype(&mut cur)?;
        cur.expect_eof()?;
        Ok(t)
    }
}

impl fmt::Display for MType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MType::Unit => f.write_str("Unit"),
            MType::Wire(w) => write!(f, "{}", w),
            MType::Tensor(a, b) => {
                if matches!(**a, MType::Tensor(..)) {
                    write!(f, "({}) * {}", a, b)
                } else {
                    write!(f, "{} * {}", a, b)
                }
            }
        }
    }
}

impl Serialize for MType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MType::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Tuple of labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MValue {
    Unit,
    Label(Label),
    Pair(Box<MValue>, Box<MValue>),
}

impl MValue {
    pub fn label(l: impl Into<Label>) -> Self {
        MValue::Label(l.into())
    }

    pub fn pair(a: MValue, b: MValue) -> Self {
        MValue::Pair(Box::new(a), Box::new(b))
    }

    /// Right-nested tuple of the given labels; `*` when empty.
    pub fn tuple(labels: &[&str]) -> Self {
        match labels {
            [] => MValue::Unit,
            [l] => MValue::label(*l),
            [l, rest @ ..] => MValue::pair(MValue::label(*l), MValue::tuple(rest)),
        }
    }

    /// Labels in left-to-right order, with repetitions.
    pub fn labels(&self) -> Vec<Label> {
        fn go(v: &MValue, out: &mut Vec<Label>) {
            match v {
                MValue::Unit => {}
                MValue::Label(l) => out.push(l.clone()),
                MValue::Pair(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn parse(src: &str) -> Result<MValue, SyntaxError> {
        let mut cur = Cursor::new(src)?;
        let v = parse_mvalue(&mut cur)?;
        cur.expect_eof()?;
        Ok(v)
    }
}

fn fmt_spine<T>(
    f: &mut fmt::Formatter<'_>,
    first: &T,
    mut rest: &T,
    split: impl Fn(&T) -> Option<(&T, &T)>,
) -> fmt::Result
where
    T: fmt::Display,
{
    write!(f, "({}", first)?;
    while let Some((a, b)) = split(rest) {
        write!(f, ", {}", a)?;
        rest = b;
    }
    write!(f, ", {})", rest)
}

impl fmt::Display for MValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MValue::Unit => f.write_str("*"),
            MValue::Label(l) => write!(f, "{}", l),
            MValue::Pair(a, b) => fmt_spine(f, &**a, &**b, |v| match v {
                MValue::Pair(x, y) => Some((&**x, &**y)),
                _ => None,
            }),
        }
    }
}

impl Serialize for MValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MValue::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrlError {
    #[error("condition {0} is not a branch of the circuit built so far")]
    InvalidBranch(Assignment),
    #[error("label {label} is not available{}", path.as_ref().map(|p| format!(" on branch {}", p)).unwrap_or_default())]
    UnboundLabel { label: Label, path: Option<Assignment> },
    #[error("label {label} has type {found}, expected {expected}")]
    WrongWireType { label: Label, expected: WireType, found: WireType },
    #[error("label {0} occurs more than once")]
    DuplicateLabel(Label),
    #[error("labels {0:?} are left unused")]
    LeftoverLabel(Vec<Label>),
    #[error("lifted variable {var} is already in scope under condition {cond}")]
    StaleLiftedVar { var: LiftedVar, cond: Assignment },
    #[error("output label {0} is not fresh")]
    NonFreshOutput(Label),
    #[error("unknown gate {0}")]
    UnknownGate(String),
    #[error("gate {gate}: {detail}")]
    GateArityMismatch { gate: String, detail: String },
    #[error("M-value {value} does not have type {ty}")]
    ShapeMismatch { value: MValue, ty: MType },
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error("append precondition violated: {0}")]
    PreconditionViolated(String),
}

/// `Q ⊨ v : T`: every label of `q` is used exactly once by `v`.
pub fn type_mvalue(q: &LabelContext, v: &MValue) -> Result<MType, CrlError> {
    fn go(q: &LabelContext, v: &MValue, used: &mut BTreeSet<Label>) -> Result<MType, CrlError> {
        match v {
            MValue::Unit => Ok(MType::Unit),
            MValue::Label(l) => {
                if !used.insert(l.clone()) {
                    return Err(CrlError::DuplicateLabel(l.clone()));
                }
                q.get(l).map(MType::Wire).ok_or_else(|| CrlError::UnboundLabel { label: l.clone(), path: None })
            }
            MValue::Pair(a, b) => Ok(MType::tensor(go(q, a, used)?, go(q, b, used)?)),
        }
    }
    let mut used = BTreeSet::new();
    let t = go(q, v, &mut used)?;
    let left: Vec<Label> = q.labels().filter(|l| !used.contains(*l)).cloned().collect();
    if !left.is_empty() {
        return Err(CrlError::LeftoverLabel(left));
    }
    Ok(t)
}

/// The context `Q` with `Q ⊨ v : t`, if `v` has the shape of `t`.
pub fn context_of(v: &MValue, t: &MType) -> Result<LabelContext, CrlError> {
    fn go(v: &MValue, t: &MType, out: &mut LabelContext) -> Result<(), CrlError> {
        match (v, t) {
            (MValue::Unit, MType::Unit) => Ok(()),
            (MValue::Label(l), MType::Wire(w)) => {
                if out.insert(l.clone(), *w).is_some() {
                    return Err(CrlError::DuplicateLabel(l.clone()));
                }
                Ok(())
            }
            (MValue::Pair(a, b), MType::Tensor(ta, tb)) => {
                go(a, ta, out)?;
                go(b, tb, out)
            }
            _ => Err(CrlError::ShapeMismatch { value: v.clone(), ty: t.clone() }),
        }
    }
    let mut out = LabelContext::new();
    go(v, t, &mut out)?;
    Ok(out)
}

/// A primitive gate with its input and output M-types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    #[serde(rename = "in")]
    pub in_type: MType,
    #[serde(rename = "out")]
    pub out_type: MType,
}

impl Gate {
    pub fn new(name: &str, in_type: MType, out_type: MType) -> Self {
        Gate { name: name.to_string(), in_type, out_type }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateSet {
    gates: BTreeMap<String, Gate>,
}

impl GateSet {
    pub fn new(gates: impl IntoIterator<Item = Gate>) -> Self {
        GateSet { gates: gates.into_iter().map(|g| (g.name.clone(), g)).collect() }
    }

    /// H, X, Z, CNOT, Meas and Meas2, plus the extensions Init0, Init1 and
    /// Discard.
    pub fn default_set() -> Self {
        let q = MType::qubit;
        let b = MType::bit;
        GateSet::new([
            Gate::new("H", q(), q()),
            Gate::new("X", q(), q()),
            Gate::new("Z", q(), q()),
            Gate::new("CNOT", MType::tensor(q(), q()), MType::tensor(q(), q())),
            Gate::new("Meas", q(), b()),
            Gate::new("Meas2", MType::tensor(q(), q()), MType::tensor(b(), b())),
            Gate::new("Init0", MType::Unit, q()),
            Gate::new("Init1", MType::Unit, q()),
            Gate::new("Discard", b(), MType::Unit),
        ])
    }

    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        let gates: Vec<Gate> = serde_json::from_str(src)?;
        Ok(GateSet::new(gates))
    }

    pub fn get(&self, name: &str) -> Option<&Gate> {
        self.gates.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gate> {
        self.gates.values()
    }

    /// The boxed circuit applying `name` once: `(i, input(i); g(i) -> o, leaf o)`.
    pub fn boxed_gate(&self, name: &str) -> Option<BoxedCircuit> {
        let g = self.get(name)?;
        let inp = numbered_mvalue(&g.in_type, "i", &mut 0);
        let out = numbered_mvalue(&g.out_type, "o", &mut 0);
        let input = context_of(&inp, &g.in_type).ok()?;
        let circuit = Circuit {
            input,
            instructions: vec![Instruction::Gate {
                cond: Assignment::empty(),
                gate: g.name.clone(),
                input: inp.clone(),
                output: out.clone(),
            }],
        };
        Some(BoxedCircuit { in_tuple: inp, circuit, out_tuples: LiftedObject::leaf(out) })
    }
}

impl Default for GateSet {
    fn default() -> Self {
        GateSet::default_set()
    }
}

fn numbered_mvalue(t: &MType, prefix: &str, next: &mut usize) -> MValue {
    match t {
        MType::Unit => MValue::Unit,
        MType::Wire(_) => {
            let l = MValue::label(format!("{}{}", prefix, next).as_str());
            *next += 1;
            l
        }
        MType::Tensor(a, b) => {
            let a = numbered_mvalue(a, prefix, next);
            MValue::pair(a, numbered_mvalue(b, prefix, next))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instruction {
    Gate {
        cond: Assignment,
        gate: String,
        #[serde(rename = "in")]
        input: MValue,
        #[serde(rename = "out")]
        output: MValue,
    },
    Lift {
        cond: Assignment,
        wire: Label,
        var: LiftedVar,
    },
}

impl Instruction {
    pub fn cond(&self) -> &Assignment {
        match self {
            Instruction::Gate { cond, .. } | Instruction::Lift { cond, .. } => cond,
        }
    }

    fn with_cond(&self, cond: Assignment) -> Instruction {
        match self {
            Instruction::Gate { gate, input, output, .. } => {
                Instruction::Gate { cond, gate: gate.clone(), input: input.clone(), output: output.clone() }
            }
            Instruction::Lift { wire, var, .. } => Instruction::Lift { cond, wire: wire.clone(), var: var.clone() },
        }
    }

    fn labels(&self) -> Vec<Label> {
        match self {
            Instruction::Gate { input, output, .. } => {
                let mut v = input.labels();
                v.extend(output.labels());
                v
            }
            Instruction::Lift { wire, .. } => vec![wire.clone()],
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.cond().is_empty() {
            write!(f, "{} ? ", self.cond())?;
        }
        match self {
            Instruction::Gate { gate, input, output, .. } => {
                let args = match input {
                    MValue::Pair(..) => {
                        let s = input.to_string();
                        s[1..s.len() - 1].to_string()
                    }
                    other => other.to_string(),
                };
                write!(f, "{}({}) -> {}", gate, args, output)
            }
            Instruction::Lift { wire, var, .. } => write!(f, "lift({}) => {}", wire, var),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Circuit {
    pub input: LabelContext,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn input(q: LabelContext) -> Self {
        Circuit { input: q, instructions: Vec::new() }
    }

    /// Every label mentioned anywhere in the circuit.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut s: BTreeSet<Label> = self.input.labels().cloned().collect();
        for ins in &self.instructions {
            s.extend(ins.labels());
        }
        s
    }

    /// Lifted variables introduced by lift instructions, in order.
    pub fn lifted_vars(&self) -> Vec<LiftedVar> {
        let mut out: Vec<LiftedVar> = Vec::new();
        for ins in &self.instructions {
            if let Instruction::Lift { var, .. } = ins {
                if !out.contains(var) {
                    out.push(var.clone());
                }
            }
        }
        out
    }

    pub fn parse(src: &str) -> Result<Circuit, SyntaxError> {
        let mut cur = Cursor::new(src)?;
        let c = parse_circuit(&mut cur)?;
        cur.expect_eof()?;
        Ok(c)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input({});", self.input)?;
        for ins in &self.instructions {
            write!(f, "\n{};", ins)?;
        }
        Ok(())
    }
}

/// `C ▷ t; Q → Δ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSignature {
    pub tree: LiftingTree,
    pub input: LabelContext,
    pub outputs: LiftedObject<LabelContext>,
}

/// Derives the signature of `c` by processing its instructions in order.
pub fn check_signature(c: &Circuit, gates: &GateSet) -> Result<CircuitSignature, CrlError> {
    let mut outputs = LiftedObject::leaf(c.input.clone());
    let mut seen: BTreeSet<Label> = c.input.labels().cloned().collect();
    for ins in &c.instructions {
        let tree = outputs.tree();
        let cond = ins.cond();
        if !tree.admits(cond) {
            return Err(CrlError::InvalidBranch(cond.clone()));
        }
        match ins {
            Instruction::Gate { gate, input, output, .. } => {
                let g = gates.get(gate).ok_or_else(|| CrlError::UnknownGate(gate.clone()))?;
                let q_in = context_of(input, &g.in_type).map_err(|e| arity(gate, "input", e))?;
                let l_out = context_of(output, &g.out_type).map_err(|e| arity(gate, "output", e))?;
                for l in l_out.labels() {
                    if !seen.insert(l.clone()) {
                        return Err(CrlError::NonFreshOutput(l.clone()));
                    }
                }
                outputs = outputs.try_map_paths(|p, ctx| {
                    if !cond.is_sub_of(p) {
                        return Ok(ctx.clone());
                    }
                    let rest = ctx.extract(&q_in).map_err(|e| at_path(e, p))?;
                    rest.disjoint_union(&l_out)
                })?;
            }
            Instruction::Lift { wire, var, .. } => {
                if tree.var_set(cond).contains(var) {
                    return Err(CrlError::StaleLiftedVar { var: var.clone(), cond: cond.clone() });
                }
                let bit = LabelContext::from_pairs([(wire.clone(), WireType::Bit)])?;
                let mut failure = None;
                let grafted = outputs.graft_with(cond, |p, ctx| match ctx.extract(&bit) {
                    Ok(rest) => {
                        Ok(LiftedObject::node(var.clone(), LiftedObject::leaf(rest.clone()), LiftedObject::leaf(rest)))
                    }
                    Err(e) => {
                        failure.get_or_insert(at_path(e, p));
                        Ok(LiftedObject::leaf(ctx.clone()))
                    }
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                outputs = grafted?;
            }
        }
    }
    Ok(CircuitSignature { tree: outputs.tree(), input: c.input.clone(), outputs })
}

fn arity(gate: &str, side: &str, e: CrlError) -> CrlError {
    CrlError::GateArityMismatch { gate: gate.to_string(), detail: format!("{} {}", side, e) }
}

fn at_path(e: CrlError, p: &Assignment) -> CrlError {
    match e {
        CrlError::UnboundLabel { label, .. } => CrlError::UnboundLabel { label, path: Some(p.clone()) },
        other => other,
    }
}

/// Objects whose labels can be renamed.
pub trait RenameLabels {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self;
}

impl RenameLabels for Label {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        rho.apply(self)
    }
}

impl RenameLabels for MValue {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        match self {
            MValue::Unit => MValue::Unit,
            MValue::Label(l) => MValue::Label(rho.apply(l)),
            MValue::Pair(a, b) => MValue::pair(a.rename_labels(rho), b.rename_labels(rho)),
        }
    }
}

impl RenameLabels for LabelContext {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        LabelContext(self.0.iter().map(|(l, w)| (rho.apply(l), *w)).collect())
    }
}

impl RenameLabels for Instruction {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        match self {
            Instruction::Gate { cond, gate, input, output } => Instruction::Gate {
                cond: cond.clone(),
                gate: gate.clone(),
                input: input.rename_labels(rho),
                output: output.rename_labels(rho),
            },
            Instruction::Lift { cond, wire, var } => {
                Instruction::Lift { cond: cond.clone(), wire: rho.apply(wire), var: var.clone() }
            }
        }
    }
}

impl RenameLabels for Circuit {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        Circuit {
            input: self.input.rename_labels(rho),
            instructions: self.instructions.iter().map(|i| i.rename_labels(rho)).collect(),
        }
    }
}

impl<X: RenameLabels> RenameLabels for LiftedObject<X> {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        self.map(|x| x.rename_labels(rho))
    }
}

impl RenameLabels for CircuitSignature {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        CircuitSignature {
            tree: self.tree.clone(),
            input: self.input.rename_labels(rho),
            outputs: self.outputs.rename_labels(rho),
        }
    }
}

impl RenameLifted for LabelContext {
    fn rename_lifted(&self, _: &Perm<LiftedVar>) -> Self {
        self.clone()
    }
}

impl RenameLifted for MValue {
    fn rename_lifted(&self, _: &Perm<LiftedVar>) -> Self {
        self.clone()
    }
}

impl RenameLifted for MType {
    fn rename_lifted(&self, _: &Perm<LiftedVar>) -> Self {
        self.clone()
    }
}

impl RenameLifted for Instruction {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            Instruction::Gate { cond, gate, input, output } => Instruction::Gate {
                cond: cond.rename_lifted(pi),
                gate: gate.clone(),
                input: input.clone(),
                output: output.clone(),
            },
            Instruction::Lift { cond, wire, var } => {
                Instruction::Lift { cond: cond.rename_lifted(pi), wire: wire.clone(), var: pi.apply(var) }
            }
        }
    }
}

impl RenameLifted for Circuit {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        Circuit {
            input: self.input.clone(),
            instructions: self.instructions.iter().map(|i| i.rename_lifted(pi)).collect(),
        }
    }
}

impl RenameLifted for CircuitSignature {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        CircuitSignature {
            tree: self.tree.rename_lifted(pi),
            input: self.input.clone(),
            outputs: self.outputs.rename_lifted(pi),
        }
    }
}

/// The value `(ℓ⃗, C, λ)_t`; the tree `t` is the shape of `out_tuples` and its
/// variables are bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxedCircuit {
    pub in_tuple: MValue,
    pub circuit: Circuit,
    pub out_tuples: LiftedObject<MValue>,
}

impl BoxedCircuit {
    pub fn tree(&self) -> LiftingTree {
        self.out_tuples.tree()
    }

    /// Bound lifted variables in binder order (pre-order of the tree).
    pub fn binders(&self) -> Vec<LiftedVar> {
        self.tree().binders()
    }

    /// Labels in order of first occurrence: input tuple, instructions,
    /// output tuples, then any remaining input labels.
    fn label_order(&self) -> Vec<Label> {
        let mut order: Vec<Label> = Vec::new();
        let push = |l: Label, order: &mut Vec<Label>| {
            if !order.contains(&l) {
                order.push(l);
            }
        };
        for l in self.in_tuple.labels() {
            push(l, &mut order);
        }
        for ins in &self.circuit.instructions {
            for l in ins.labels() {
                push(l, &mut order);
            }
        }
        for v in self.out_tuples.leaves() {
            for l in v.labels() {
                push(l, &mut order);
            }
        }
        for l in self.circuit.input.labels() {
            push(l.clone(), &mut order);
        }
        order
    }

    /// Representative of the equivalence class with labels `$0, $1, …` and
    /// lifted variables `$0, $1, …` assigned in order of first occurrence.
    pub fn canonical(&self) -> BoxedCircuit {
        let rho = Perm::from_pairs(
            self.label_order().into_iter().enumerate().map(|(i, l)| (l, Label::new(format!("${}", i)))),
        )
        .expect("distinct labels");
        let mut vars = self.binders();
        for u in self.circuit.lifted_vars() {
            if !vars.contains(&u) {
                vars.push(u);
            }
        }
        for ins in &self.circuit.instructions {
            for (u, _) in ins.cond().iter() {
                if !vars.contains(u) {
                    vars.push(u.clone());
                }
            }
        }
        let pi = Perm::from_pairs(vars.into_iter().enumerate().map(|(i, u)| (u, LiftedVar::new(format!("${}", i)))))
            .expect("distinct variables");
        self.rename_labels(&rho).rename_lifted(&pi)
    }
}

impl RenameLabels for BoxedCircuit {
    fn rename_labels(&self, rho: &Perm<Label>) -> Self {
        BoxedCircuit {
            in_tuple: self.in_tuple.rename_labels(rho),
            circuit: self.circuit.rename_labels(rho),
            out_tuples: self.out_tuples.rename_labels(rho),
        }
    }
}

impl RenameLifted for BoxedCircuit {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        BoxedCircuit {
            in_tuple: self.in_tuple.clone(),
            circuit: self.circuit.rename_lifted(pi),
            out_tuples: self.out_tuples.rename_lifted(pi),
        }
    }
}

/// `b1 ≅ b2`: equal up to a renaming of labels (and of the bound lifted
/// variables).
pub fn boxed_equiv(b1: &BoxedCircuit, b2: &BoxedCircuit) -> bool {
    b1.canonical() == b2.canonical()
}

/// Source of labels `%0, %1, …`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSupply {
    next: u64,
}

impl LabelSupply {
    pub fn new() -> Self {
        LabelSupply { next: 0 }
    }

    pub fn counter(&self) -> u64 {
        self.next
    }

    /// Next counter label not contained in `avoid`.
    pub fn fresh(&mut self, avoid: &BTreeSet<Label>) -> Label {
        loop {
            let l = Label::new(format!("%{}", self.next));
            self.next += 1;
            if !avoid.contains(&l) {
                return l;
            }
        }
    }
}

/// `C ::_a D`: appends the instructions of `d` under the extra condition `a`.
pub fn insert(c: &Circuit, a: &Assignment, d: &Circuit) -> Result<Circuit, CrlError> {
    let mut out = c.clone();
    for ins in &d.instructions {
        let cond = a.union(ins.cond())?;
        out.instructions.push(ins.with_cond(cond));
    }
    Ok(out)
}

/// Unboxes `boxed` onto the wires `target` of `c` on branch `a`, naming its
/// lifted variables `fresh_vars` in binder order.
pub fn append(
    c: &Circuit,
    a: &Assignment,
    target: &MValue,
    boxed: &BoxedCircuit,
    fresh_vars: &[LiftedVar],
    gates: &GateSet,
    supply: &mut LabelSupply,
) -> Result<(Circuit, LiftedObject<MValue>), CrlError> {
    let pre = |m: String| CrlError::PreconditionViolated(m);
    let sig = check_signature(c, gates)?;
    if !sig.tree.is_path(a) {
        return Err(pre(format!("{} is not a path of the circuit", a)));
    }
    let avail = sig.outputs.lookup(a).expect("path lookup");
    for l in target.labels() {
        if !avail.contains(&l) {
            return Err(pre(format!("label {} is not an output on branch {}", l, a)));
        }
    }
    let binders = boxed.binders();
    if binders.len() != fresh_vars.len() {
        return Err(pre(format!("expected {} lifted variables, got {}", binders.len(), fresh_vars.len())));
    }
    let distinct: BTreeSet<&LiftedVar> = fresh_vars.iter().collect();
    if distinct.len() != fresh_vars.len() {
        return Err(pre("lifted variables are not pairwise distinct".into()));
    }
    let in_scope = sig.tree.var_set(a);
    if let Some(u) = fresh_vars.iter().find(|u| in_scope.contains(*u)) {
        return Err(pre(format!("lifted variable {} is already in scope on branch {}", u, a)));
    }

    let mut pairs: Vec<(Label, Label)> = Vec::new();
    pair_tuples(&boxed.in_tuple, target, &mut pairs)
        .map_err(|_| pre(format!("target {} does not match input tuple {}", target, boxed.in_tuple)))?;
    let avoid = c.labels();
    for l in boxed.label_order() {
        if !pairs.iter().any(|(src, _)| *src == l) {
            pairs.push((l, supply.fresh(&avoid)));
        }
    }
    let rho = Perm::from_pairs(pairs).ok_or_else(|| pre("label renaming is not injective".into()))?;
    let pi = Perm::from_pairs(binders.into_iter().zip(fresh_vars.iter().cloned()))
        .ok_or_else(|| pre("lifted renaming is not injective".into()))?;
    let renamed = boxed.rename_labels(&rho).rename_lifted(&pi);
    let out = insert(c, a, &renamed.circuit)?;
    Ok((out, renamed.out_tuples))
}

fn pair_tuples(src: &MValue, dst: &MValue, out: &mut Vec<(Label, Label)>) -> Result<(), ()> {
    match (src, dst) {
        (MValue::Unit, MValue::Unit) => Ok(()),
        (MValue::Label(a), MValue::Label(b)) => {
            out.push((a.clone(), b.clone()));
            Ok(())
        }
        (MValue::Pair(a1, b1), MValue::Pair(a2, b2)) => {
            pair_tuples(a1, a2, out)?;
            pair_tuples(b1, b2, out)
        }
        _ => Err(()),
    }
}

pub(crate) fn parse_mtype(cur: &mut Cursor) -> Result<MType, SyntaxError> {
    let a = parse_mtype_atom(cur)?;
    if cur.eat_sym("*") {
        Ok(MType::tensor(a, parse_mtype(cur)?))
    } else {
        Ok(a)
    }
}

fn parse_mtype_atom(cur: &mut Cursor) -> Result<MType, SyntaxError> {
    if cur.eat_sym("(") {
        let t = parse_mtype(cur)?;
        cur.expect_sym(")")?;
        return Ok(t);
    }
    let (name, sp) = cur.expect_ident()?;
    match name.as_str() {
        "Unit" => Ok(MType::Unit),
        "Bit" => Ok(MType::bit()),
        "Qubit" => Ok(MType::qubit()),
        _ => Err(SyntaxError::new(sp.start, format!("expected an M-type, found `{}`", name))),
    }
}

pub(crate) fn parse_mvalue(cur: &mut Cursor) -> Result<MValue, SyntaxError> {
    if cur.eat_sym("*") {
        return Ok(MValue::Unit);
    }
    if cur.eat_sym("(") {
        let items = parse_mvalue_list(cur)?;
        cur.expect_sym(")")?;
        return Ok(right_nest(items));
    }
    let (name, _) = cur.expect_ident()?;
    Ok(MValue::Label(Label::new(name)))
}

fn parse_mvalue_list(cur: &mut Cursor) -> Result<Vec<MValue>, SyntaxError> {
    let mut items = vec![parse_mvalue(cur)?];
    while cur.eat_sym(",") {
        items.push(parse_mvalue(cur)?);
    }
    Ok(items)
}

fn right_nest(mut items: Vec<MValue>) -> MValue {
    let last = items.pop().unwrap_or(MValue::Unit);
    items.into_iter().rev().fold(last, |acc, v| MValue::pair(v, acc))
}

pub(crate) fn parse_assignment(cur: &mut Cursor) -> Result<Assignment, SyntaxError> {
    let start = cur.span().start;
    cur.expect_sym("(")?;
    let mut pairs = Vec::new();
    if !cur.is_sym(")") {
        loop {
            let (u, _) = cur.expect_ident()?;
            cur.expect_sym("=")?;
            pairs.push((LiftedVar::new(u), cur.expect_bit()?));
            if !(cur.eat_sym(",") || cur.eat_sym(";")) {
                break;
            }
        }
    }
    cur.expect_sym(")")?;
    Assignment::from_pairs(pairs).map_err(|e| SyntaxError::new(start, e.to_string()))
}

/// Parses `input(...); instr; instr; ...`, stopping before `}` or end of input.
pub(crate) fn parse_circuit(cur: &mut Cursor) -> Result<Circuit, SyntaxError> {
    cur.expect_kw("input")?;
    cur.expect_sym("(")?;
    let mut pairs = Vec::new();
    if !cur.is_sym(")") {
        loop {
            let (l, sp) = cur.expect_ident()?;
            cur.expect_sym(":")?;
            let w = match parse_mtype_atom(cur)? {
                MType::Wire(w) => w,
                _ => return Err(SyntaxError::new(sp.start, "input wires must be Bit or Qubit")),
            };
            pairs.push((Label::new(l), w));
            if !cur.eat_sym(",") {
                break;
            }
        }
    }
    let close = cur.expect_sym(")")?;
    let input = LabelContext::from_pairs(pairs).map_err(|e| SyntaxError::new(close.start, e.to_string()))?;
    let mut instructions = Vec::new();
    while cur.eat_sym(";") {
        if cur.is_sym("}") || matches!(cur.peek(), Tok::Eof) {
            break;
        }
        instructions.push(parse_instruction(cur)?);
    }
    Ok(Circuit { input, instructions })
}

fn parse_instruction(cur: &mut Cursor) -> Result<Instruction, SyntaxError> {
    let cond = if cur.is_sym("(") {
        let a = parse_assignment(cur)?;
        cur.expect_sym("?")?;
        a
    } else {
        Assignment::empty()
    };
    if cur.is_kw("lift") && matches!(cur.peek_at(1), Tok::Sym("(")) {
        cur.bump();
        cur.expect_sym("(")?;
        let (wire, _) = cur.expect_ident()?;
        cur.expect_sym(")")?;
        cur.expect_sym("=>")?;
        let (var, _) = cur.expect_ident()?;
        return Ok(Instruction::Lift { cond, wire: Label::new(wire), var: LiftedVar::new(var) });
    }
    let (gate, _) = cur.expect_ident()?;
    cur.expect_sym("(")?;
    let input = if cur.is_sym(")") { MValue::Unit } else { right_nest(parse_mvalue_list(cur)?) };
    cur.expect_sym(")")?;
    cur.expect_sym("->")?;
    let output = parse_mvalue(cur)?;
    Ok(Instruction::Gate { cond, gate, input, output })
}

/// Graphviz rendering: one horizontal track per wire, one node per
/// instruction, conditional instructions clustered by their condition.
pub fn to_dot(c: &Circuit) -> String {
    let mut out = String::from("digraph circuit {\n  rankdir=LR;\n  node [fontname=\"monospace\"];\n");
    let mut producer: BTreeMap<Label, String> = BTreeMap::new();
    for (i, (l, w)) in c.input.iter().enumerate() {
        let id = format!("in{}", i);
        out.push_str(&format!("  {} [shape=plaintext, label=\"{}:{}\"];\n", id, l, w));
        producer.insert(l.clone(), id);
    }
    let mut clusters: BTreeMap<Assignment, Vec<String>> = BTreeMap::new();
    let mut edges = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        let id = format!("g{}", i);
        let (label, shape, consumed, produced) = match ins {
            Instruction::Gate { gate, input, output, .. } => (gate.clone(), "box", input.labels(), output.labels()),
            Instruction::Lift { wire, var, .. } => {
                (format!("lift &#8657; {}", var), "cds", vec![wire.clone()], Vec::new())
            }
        };
        clusters.entry(ins.cond().clone()).or_default().push(format!("{} [shape={}, label=\"{}\"];", id, shape, label));
        for l in consumed {
            if let Some(src) = producer.get(&l) {
                edges.push(format!("  {} -> {} [label=\"{}\"];\n", src, id, l));
            }
        }
        for l in produced {
            producer.insert(l, id.clone());
        }
    }
    for (k, (cond, nodes)) in clusters.iter().enumerate() {
        if cond.is_empty() {
            for n in nodes {
                out.push_str(&format!("  {}\n", n));
            }
        } else {
            out.push_str(&format!("  subgraph cluster_{} {{\n    label=\"{}\";\n    style=dashed;\n", k, cond));
            for n in nodes {
                out.push_str(&format!("    {}\n", n));
            }
            out.push_str("  }\n");
        }
    }
    for e in edges {
        out.push_str(&e);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALICE: &str = "input(q0:Qubit, a0:Qubit); CNOT(q0,a0) -> (q1,a1); H(q1) -> q2; Meas2(q2,a1) -> (x,y);";
    const TELEPORT: &str = "input(b0:Qubit, q0:Qubit, a0:Qubit); CNOT(q0,a0) -> (q1,a1); H(q1) -> q2; \
        Meas2(q2,a1) -> (x,y); lift(x) => u; lift(y) => s; (s=1) ? X(b0) -> b1; \
        (u=1; s=0) ? Z(b0) -> b2; (u=1; s=1) ? Z(b1) -> b3;";

    fn ctx(pairs: &[(&str, WireType)]) -> LabelContext {
        LabelContext::from_pairs(pairs.iter().map(|(l, w)| (*l, *w))).unwrap()
    }

    fn asg(pairs: &[(&str, u8)]) -> Assignment {
        Assignment::from_pairs(pairs.iter().map(|(u, b)| (LiftedVar::new(*u), *b == 1))).unwrap()
    }

    use WireType::{Bit, Qubit};

    #[test]
    fn mvalue_typing() {
        assert_eq!(type_mvalue(&LabelContext::new(), &MValue::Unit), Ok(MType::Unit));
        assert_eq!(type_mvalue(&ctx(&[("l", Qubit)]), &MValue::label("l")), Ok(MType::qubit()));
        assert_eq!(
            type_mvalue(&ctx(&[("l", Qubit), ("k", Bit)]), &MValue::tuple(&["l", "k"])),
            Ok(MType::tensor(MType::qubit(), MType::bit()))
        );
        assert!(matches!(
            type_mvalue(&ctx(&[("l", Qubit)]), &MValue::tuple(&["l", "l"])),
            Err(CrlError::DuplicateLabel(_))
        ));
        assert!(matches!(type_mvalue(&ctx(&[("l", Qubit)]), &MValue::Unit), Err(CrlError::LeftoverLabel(_))));
        assert!(matches!(type_mvalue(&LabelContext::new(), &MValue::label("l")), Err(CrlError::UnboundLabel { .. })));
    }

    #[test]
    fn identity_signature() {
        let q = ctx(&[("q", Qubit)]);
        let sig = check_signature(&Circuit::input(q.clone()), &GateSet::default()).unwrap();
        assert_eq!(sig.tree, LiftingTree::Leaf);
        assert_eq!(sig.outputs, LiftedObject::leaf(q));
    }

    #[test]
    fn teleportation_signature() {
        let c = Circuit::parse(TELEPORT).unwrap();
        let sig = check_signature(&c, &GateSet::default()).unwrap();
        let leaf = |l: &str| LiftedObject::leaf(ctx(&[(l, Qubit)]));
        let expected = LiftedObject::node(
            "u",
            LiftedObject::node("s", leaf("b0"), leaf("b1")),
            LiftedObject::node("s", leaf("b2"), leaf("b3")),
        );
        assert_eq!(sig.outputs, expected);
        assert_eq!(sig.tree, expected.tree());
    }

    #[test]
    fn condition_before_lift_is_rejected() {
        let c = Circuit::parse("input(q:Qubit); (u=1) ? H(q) -> q1;").unwrap();
        assert_eq!(check_signature(&c, &GateSet::default()), Err(CrlError::InvalidBranch(asg(&[("u", 1)]))));
    }

    #[test]
    fn signature_errors() {
        let gs = GateSet::default();
        let stale = Circuit::parse("input(a:Bit, b:Bit); lift(a) => u; lift(b) => u;").unwrap();
        assert!(matches!(check_signature(&stale, &gs), Err(CrlError::StaleLiftedVar { .. })));
        let reuse = Circuit::parse("input(q:Qubit); H(q) -> q;").unwrap();
        assert!(matches!(check_signature(&reuse, &gs), Err(CrlError::NonFreshOutput(_))));
        let unknown = Circuit::parse("input(q:Qubit); T(q) -> r;").unwrap();
        assert!(matches!(check_signature(&unknown, &gs), Err(CrlError::UnknownGate(_))));
        let arity = Circuit::parse("input(q:Qubit); CNOT(q) -> r;").unwrap();
        assert!(matches!(check_signature(&arity, &gs), Err(CrlError::GateArityMismatch { .. })));
        let wrong = Circuit::parse("input(q:Qubit); lift(q) => u;").unwrap();
        assert!(matches!(check_signature(&wrong, &gs), Err(CrlError::WrongWireType { .. })));
        let gone = Circuit::parse("input(q:Qubit); Meas(q) -> b; lift(b) => u; (u=1) ? H(q) -> r;").unwrap();
        assert!(matches!(check_signature(&gone, &gs), Err(CrlError::UnboundLabel { .. })));
    }

    #[test]
    fn same_variable_lifted_in_sibling_branches() {
        let c = Circuit::parse("input(a:Bit, b:Bit, c:Bit); lift(a) => x; (x=0) ? lift(b) => u; (x=1) ? lift(c) => u;")
            .unwrap();
        let sig = check_signature(&c, &GateSet::default()).unwrap();
        assert_eq!(sig.tree, LiftingTree::node("x", LiftingTree::single("u"), LiftingTree::single("u")));
    }

    #[test]
    fn text_round_trip() {
        for src in [ALICE, TELEPORT, "input(); Init0() -> q; Meas(q) -> b; Discard(b) -> *;"] {
            let c = Circuit::parse(src).unwrap();
            assert_eq!(Circuit::parse(&c.to_string()).unwrap(), c);
        }
        let nested = Circuit::parse("input(a:Qubit, b:Qubit, c:Qubit); G((a, b), c) -> (x, (y, z));").unwrap();
        assert_eq!(Circuit::parse(&nested.to_string()).unwrap(), nested);
    }

    #[test]
    fn rename_labels_context() {
        let rho = Perm::from_pairs([(Label::new("l"), Label::new("k"))]).unwrap();
        assert_eq!(ctx(&[("l", Qubit)]).rename_labels(&rho), ctx(&[("k", Qubit)]));
        assert_eq!(ctx(&[("l", Qubit)]).rename_labels(&Perm::identity()), ctx(&[("l", Qubit)]));
    }

    fn wire(l: &str) -> BoxedCircuit {
        BoxedCircuit {
            in_tuple: MValue::label(l),
            circuit: Circuit::input(ctx(&[(l, Qubit)])),
            out_tuples: LiftedObject::leaf(MValue::label(l)),
        }
    }

    #[test]
    fn equivalence() {
        assert!(boxed_equiv(&wire("l"), &wire("l")));
        assert!(boxed_equiv(&wire("l"), &wire("k")));
        let hz = BoxedCircuit {
            in_tuple: MValue::label("a"),
            circuit: Circuit::parse("input(a:Qubit); H(a) -> b; Z(b) -> c;").unwrap(),
            out_tuples: LiftedObject::leaf(MValue::label("c")),
        };
        let zh =
            BoxedCircuit { circuit: Circuit::parse("input(a:Qubit); Z(a) -> b; H(b) -> c;").unwrap(), ..hz.clone() };
        assert!(!boxed_equiv(&hz, &zh));
        assert_eq!(hz.canonical().canonical(), hz.canonical());
    }

    #[test]
    fn insertion() {
        let c = Circuit::parse(ALICE).unwrap();
        assert_eq!(insert(&c, &asg(&[("u", 0)]), &Circuit::input(ctx(&[("z", Qubit)]))).unwrap(), c);
        let d = Circuit::parse("input(q:Qubit); (s=1) ? H(q) -> r;").unwrap();
        let out = insert(&Circuit::input(LabelContext::new()), &asg(&[("u", 0)]), &d).unwrap();
        assert_eq!(out.instructions[0].cond(), &asg(&[("u", 0), ("s", 1)]));
        assert!(insert(&c, &asg(&[("s", 0)]), &d).is_err());
    }

    #[test]
    fn append_identity_box_is_noop() {
        let c = Circuit::input(ctx(&[("k", Qubit)]));
        let (c2, out) = append(
            &c,
            &Assignment::empty(),
            &MValue::label("k"),
            &wire("l"),
            &[],
            &GateSet::default(),
            &mut LabelSupply::new(),
        )
        .unwrap();
        assert_eq!(c2, c);
        assert_eq!(out, LiftedObject::leaf(MValue::label("k")));
    }

    #[test]
    fn append_measure_and_lift() {
        let ml = BoxedCircuit {
            in_tuple: MValue::label("l"),
            circuit: Circuit::parse("input(l:Qubit); Meas(l) -> l1; lift(l1) => u;").unwrap(),
            out_tuples: LiftedObject::node("u", LiftedObject::leaf(MValue::Unit), LiftedObject::leaf(MValue::Unit)),
        };
        let c = Circuit::input(ctx(&[("q", Qubit), ("k", Qubit)]));
        let gs = GateSet::default();
        let (c2, out) = append(
            &c,
            &Assignment::empty(),
            &MValue::label("q"),
            &ml,
            &[LiftedVar::new("w")],
            &gs,
            &mut LabelSupply::new(),
        )
        .unwrap();
        assert_eq!(c2.to_string(), "input(k:Qubit, q:Qubit);\nMeas(q) -> %0;\nlift(%0) => w;");
        assert_eq!(out.tree(), LiftingTree::single("w"));
        let sig = check_signature(&c2, &gs).unwrap();
        assert_eq!(sig.tree, LiftingTree::single("w"));
        let err = append(
            &c2,
            &asg(&[("w", 1)]),
            &MValue::label("k"),
            &ml,
            &[LiftedVar::new("w")],
            &gs,
            &mut LabelSupply::new(),
        );
        assert!(matches!(err, Err(CrlError::PreconditionViolated(_))));
    }

    #[test]
    fn boxed_gate_shape() {
        let gs = GateSet::default();
        let cnot = gs.boxed_gate("CNOT").unwrap();
        assert_eq!(cnot.circuit.to_string(), "input(i0:Qubit, i1:Qubit);\nCNOT(i0, i1) -> (o0, o1);");
        let init = gs.boxed_gate("Init0").unwrap();
        assert_eq!(init.in_tuple, MValue::Unit);
    }

    #[test]
    fn json_round_trip() {
        let c = Circuit::parse(TELEPORT).unwrap();
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Circuit>(&j).unwrap(), c);
        let sig = check_signature(&c, &GateSet::default()).unwrap();
        let j = serde_json::to_string(&sig).unwrap();
        assert_eq!(serde_json::from_str::<CircuitSignature>(&j).unwrap(), sig);
    }

    #[test]
    fn dot_mentions_every_instruction() {
        let dot = to_dot(&Circuit::parse(TELEPORT).unwrap());
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("shape=box").count(), 6);
        assert_eq!(dot.matches("shape=cds").count(), 2);
        assert!(dot.contains("cluster_"));
    }
}
