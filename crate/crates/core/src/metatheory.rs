//! Executable metatheory: a typing-directed generator of closed well-typed
//! terms, subject reduction and progress checks against the evaluator, and a
//! structural shrinker for counterexamples.

use std::fmt;

pub mod oracle;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crl::{
    check_signature, BoxedCircuit, Circuit, GateSet, Instruction, Label, LabelContext, MType, MValue, WireType,
};
use crate::eval::{run_closed, EvalEnv, EvalOutcome, Mutation, DEFAULT_FUEL};
use crate::lifting_tree::{Assignment, LiftedObject, LiftedVar, Perm, RenameLifted};
use crate::syntax::{free_vars_term, parse_term, substitute_term, types_alpha_equiv, LiftedType, Term, Type, Value};
use crate::typing::{check_closed_result, type_closed, type_of_closed_value, ComputationTyping};

/// Relative weights of the generator's productions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// End the block by returning the live linear variables.
    pub finish: u32,
    /// Allocate a qubit.
    pub init: u32,
    /// Apply a circuit that binds no lifted variables.
    pub gate: u32,
    /// Apply a circuit that binds lifted variables.
    pub lifting: u32,
    pub let_pair: u32,
    pub fun: u32,
    pub call: u32,
    pub thunk: u32,
    pub force: u32,
    pub boxing: u32,
    /// End a block with its last effectful step instead of a `let`.
    pub tail: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            finish: 2,
            init: 3,
            gate: 4,
            lifting: 5,
            let_pair: 3,
            fun: 2,
            call: 4,
            thunk: 1,
            force: 3,
            boxing: 2,
            tail: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Bound on `Term::depth` of generated programs.
    pub max_depth: usize,
    /// Bound on the number of lifted variables along any branch.
    pub max_lift_depth: usize,
    pub gates: GateSet,
    pub weights: Weights,
    /// Attempts per program before giving up.
    pub retries: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_depth: 6,
            max_lift_depth: 3,
            gates: GateSet::default(),
            weights: Weights::default(),
            retries: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("no well-typed program found in {0} attempts")]
    GenerationBudgetExceeded(u32),
}

/// Which theorem a finding contradicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    SubjectReduction,
    Progress,
    /// The input was not well typed, so neither theorem applies.
    WellTyped,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::SubjectReduction => "subject reduction",
            Property::Progress => "progress",
            Property::WellTyped => "well-typedness",
        })
    }
}

/// A minimized counterexample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    /// Source text of the shrunk program, accepted by `parse_term`.
    pub program: String,
    pub property: Property,
    pub diagnostic: String,
    /// Evaluator fault active when the finding was produced.
    pub mutation: Option<Mutation>,
    pub original_size: usize,
    pub size: usize,
}

impl Finding {
    /// Re-parses the program and checks the property again.
    pub fn replays(&self, gates: &GateSet) -> bool {
        let Ok(m) = parse_term(&self.program) else { return false };
        let h = Harness { gates: gates.clone(), fuel: DEFAULT_FUEL, mutation: self.mutation };
        h.violation(self.property, &m).is_some()
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated: {}\n  program: {}", self.property, self.diagnostic, self.program)
    }
}

/// How programs are executed when checking them.
#[derive(Debug, Clone)]
pub struct Harness {
    pub gates: GateSet,
    pub fuel: u64,
    pub mutation: Option<Mutation>,
}

impl Default for Harness {
    fn default() -> Self {
        Harness { gates: GateSet::default(), fuel: DEFAULT_FUEL, mutation: None }
    }
}

/// Non-violating outcome of a progress check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Done,
    FuelExhausted,
}

impl Harness {
    fn env(&self) -> EvalEnv {
        let env = EvalEnv::new(self.gates.clone()).with_fuel(self.fuel);
        match self.mutation {
            Some(m) => env.with_mutation(m),
            None => env,
        }
    }

    fn sr_violation(&self, m: &Term) -> Option<String> {
        let typing = match type_closed(m, &LabelContext::new(), &self.gates) {
            Ok(t) => t,
            Err(e) => return Some(format!("ill-typed input: {}", e)),
        };
        let mut env = self.env();
        let EvalOutcome::Done(r) = run_closed(m, &mut env) else { return None };
        if let Err(e) = check_closed_result(&r.circuit, &r.value, &typing, &self.gates) {
            return Some(format!("result at {} rejected: {}", typing, e));
        }
        env.findings.first().cloned()
    }

    fn progress_violation(&self, m: &Term) -> Option<String> {
        if let Err(e) = type_closed(m, &LabelContext::new(), &self.gates) {
            return Some(format!("ill-typed input: {}", e));
        }
        match run_closed(m, &mut self.env()) {
            out @ EvalOutcome::Stuck(..) => Some(out.to_string()),
            _ => None,
        }
    }

    /// Diagnostic if `m` is well typed and violates `p`.
    pub fn violation(&self, p: Property, m: &Term) -> Option<String> {
        let well_typed = type_closed(m, &LabelContext::new(), &self.gates).is_ok();
        match p {
            Property::WellTyped => (!well_typed).then(|| "ill-typed".to_string()),
            _ if !well_typed => None,
            Property::SubjectReduction => self.sr_violation(m),
            Property::Progress => self.progress_violation(m),
        }
    }

    fn finding(&self, p: Property, m: &Term, diagnostic: String) -> Finding {
        let small = if p == Property::WellTyped { m.clone() } else { shrink(m, |t| self.violation(p, t).is_some()) };
        let diagnostic = self.violation(p, &small).unwrap_or(diagnostic);
        Finding {
            program: small.to_string(),
            property: p,
            diagnostic,
            mutation: self.mutation,
            original_size: m.size(),
            size: small.size(),
        }
    }

    /// Runs `m` and re-types the result at the statically computed `(t, α)`.
    pub fn check_sr(&self, m: &Term) -> Result<(), Finding> {
        if let Err(e) = type_closed(m, &LabelContext::new(), &self.gates) {
            return Err(self.finding(Property::WellTyped, m, e.to_string()));
        }
        match self.sr_violation(m) {
            None => Ok(()),
            Some(d) => Err(self.finding(Property::SubjectReduction, m, d)),
        }
    }

    /// Runs `m`; a stuck configuration is a finding, running out of fuel is not.
    pub fn check_progress(&self, m: &Term) -> Result<Verdict, Finding> {
        if let Err(e) = type_closed(m, &LabelContext::new(), &self.gates) {
            return Err(self.finding(Property::WellTyped, m, e.to_string()));
        }
        match run_closed(m, &mut self.env()) {
            EvalOutcome::Done(_) => Ok(Verdict::Done),
            EvalOutcome::FuelExhausted => Ok(Verdict::FuelExhausted),
            out @ EvalOutcome::Stuck(..) => Err(self.finding(Property::Progress, m, out.to_string())),
        }
    }
}

/// Subject reduction check with the default harness.
pub fn check_sr(m: &Term) -> Result<(), Finding> {
    Harness::default().check_sr(m)
}

/// Progress check with the default harness and the given fuel.
pub fn check_progress(m: &Term, fuel: u64) -> Result<Verdict, Finding> {
    Harness { fuel, ..Harness::default() }.check_progress(m)
}

// ---------------------------------------------------------------------------
// Generation

/// Boxed circuits available to every generated program.
pub fn seed_circuits(gates: &GateSet) -> Vec<(String, BoxedCircuit)> {
    let mut out: Vec<(String, BoxedCircuit)> =
        gates.iter().filter_map(|g| Some((g.name.clone(), gates.boxed_gate(&g.name)?))).collect();
    let literals = [
        ("Id", "crl (q) { input(q:Qubit); } => q"),
        ("MeasLift", "crl (l) { input(l:Qubit); Meas(l) -> m; lift(m) => u; } => case u { 0 => * | 1 => * }"),
        ("LiftBit", "crl (b) { input(b:Bit); lift(b) => u; } => case u { 0 => * | 1 => * }"),
        (
            "MeasLiftX",
            "crl (l, k) { input(l:Qubit, k:Qubit); Meas(l) -> m; lift(m) => u; (u=1) ? X(k) -> k1; } => case u { 0 => k | 1 => k1 }",
        ),
    ];
    for (name, src) in literals {
        if let Ok(Term::Return(Value::Boxed(b))) = parse_term(&format!("return {}", src)) {
            if type_of_closed_value(&Value::Boxed(b.clone()), gates).is_ok() {
                out.push((name.to_string(), *b));
            }
        }
    }
    out
}

struct Source {
    value: Value,
    input: MType,
    theta: LiftedObject<MType>,
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    ty: Type,
    live: bool,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    slots: Vec<Slot>,
    lift_depth: usize,
    /// Under `lift`: the block's type must be a single branch.
    no_lift: bool,
    /// Body of a boxed computation: only wire-typed linear values.
    m_only: bool,
}

impl Scope {
    fn live_linear(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&i| self.slots[i].live && !self.slots[i].ty.is_parameter()).collect()
    }

    fn usable(&self) -> impl Iterator<Item = (usize, &Slot)> {
        self.slots.iter().enumerate().filter(|(_, s)| s.live)
    }

    fn params(&self) -> Scope {
        Scope {
            slots: self.slots.iter().filter(|s| s.live && s.ty.is_parameter()).cloned().collect(),
            lift_depth: self.lift_depth,
            no_lift: false,
            m_only: false,
        }
    }

    fn take(&mut self, i: usize) -> Value {
        let s = &mut self.slots[i];
        if !s.ty.is_parameter() {
            s.live = false;
        }
        Value::var(&s.name)
    }

    fn push(&mut self, name: &str, ty: Type) {
        self.slots.push(Slot { name: name.to_string(), ty, live: true });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prod {
    Finish,
    LetPair,
    Init,
    Gate,
    Lifting,
    Call,
    Force,
    Fun,
    Thunk,
    Boxing,
}

struct Gen<'c> {
    rng: ChaCha8Rng,
    cfg: &'c GenConfig,
    seeds: Vec<Source>,
    names: usize,
    lifted: usize,
}

fn circ_source(value: Value, ty: &Type) -> Option<Source> {
    match ty {
        Type::Circ(input, theta) => Some(Source { value, input: input.clone(), theta: theta.clone() }),
        _ => None,
    }
}

fn simple_type(rng: &mut impl Rng) -> Type {
    match rng.gen_range(0..4) {
        0 => Type::qubit(),
        1 => Type::bit(),
        2 => Type::Unit,
        _ => Type::tensor(Type::qubit(), Type::qubit()),
    }
}

impl<'c> Gen<'c> {
    fn new(cfg: &'c GenConfig, rng: ChaCha8Rng) -> Self {
        let seeds = seed_circuits(&cfg.gates)
            .into_iter()
            .filter_map(|(_, b)| {
                let v = Value::Boxed(Box::new(b));
                let ty = type_of_closed_value(&v, &cfg.gates).ok()?;
                circ_source(v, &ty)
            })
            .collect();
        Gen { rng, cfg, seeds, names: 0, lifted: 0 }
    }

    fn fresh(&mut self) -> String {
        self.names += 1;
        format!("x{}", self.names)
    }

    fn fresh_lifted(&mut self) -> LiftedVar {
        self.lifted += 1;
        LiftedVar::new(format!("u{}", self.lifted))
    }

    fn weight(&self, p: Prod) -> u32 {
        let w = &self.cfg.weights;
        match p {
            Prod::Finish => w.finish,
            Prod::LetPair => w.let_pair,
            Prod::Init => w.init,
            Prod::Gate => w.gate,
            Prod::Lifting => w.lifting,
            Prod::Call => w.call,
            Prod::Force => w.force,
            Prod::Fun => w.fun,
            Prod::Thunk => w.thunk,
            Prod::Boxing => w.boxing,
        }
    }

    fn program(&mut self) -> Option<Term> {
        if self.cfg.max_depth <= 1 {
            return Some(if self.rng.gen_bool(0.5) {
                Term::Return(Value::Unit)
            } else {
                let a = simple_type(&mut self.rng);
                Term::Return(Value::lam("x", a, Term::Return(Value::var("x"))))
            });
        }
        self.block(Scope::default(), self.cfg.max_depth)
    }

    /// A term of depth at most `d` consuming every live linear slot of `sc`.
    fn block(&mut self, sc: Scope, d: usize) -> Option<Term> {
        let mut prods = vec![Prod::Finish, Prod::LetPair, Prod::Init, Prod::Gate, Prod::Lifting];
        if !sc.m_only {
            prods.extend([Prod::Call, Prod::Force, Prod::Fun, Prod::Thunk, Prod::Boxing]);
        }
        prods.retain(|&p| self.weight(p) > 0);
        while !prods.is_empty() {
            let weights: Vec<u32> = prods
                .iter()
                .map(|&p| match p {
                    // Finishing early mostly yields `return *`.
                    Prod::Finish if d > 3 => self.weight(p).min(1),
                    _ => self.weight(p),
                })
                .collect();
            let i = WeightedIndex::new(&weights).ok()?.sample(&mut self.rng);
            let p = prods.swap_remove(i);
            let attempt = match p {
                Prod::Finish => self.finish(&sc, d),
                Prod::LetPair => self.let_pair(&sc, d),
                _ => self.let_step(&sc, p, d),
            };
            if attempt.is_some() {
                return attempt;
            }
        }
        None
    }

    fn finish(&mut self, sc: &Scope, d: usize) -> Option<Term> {
        let live = sc.live_linear();
        if 1 + live.len().max(1) > d {
            return None;
        }
        Some(Term::Return(Value::tuple(live.iter().map(|&i| Value::var(&sc.slots[i].name)).collect())))
    }

    fn let_pair(&mut self, sc: &Scope, d: usize) -> Option<Term> {
        if d < 3 {
            return None;
        }
        let pairs: Vec<usize> = sc.usable().filter(|(_, s)| matches!(s.ty, Type::Tensor(..))).map(|(i, _)| i).collect();
        let &i = pairs.choose(&mut self.rng)?;
        let mut sc = sc.clone();
        let Type::Tensor(a, b) = sc.slots[i].ty.clone() else { unreachable!() };
        let v = sc.take(i);
        let (x, y) = (self.fresh(), self.fresh());
        sc.push(&x, *a);
        sc.push(&y, *b);
        let body = self.block(sc, d - 1)?;
        Some(Term::let_pair(&x, &y, v, body))
    }

    fn let_step(&mut self, sc: &Scope, p: Prod, d: usize) -> Option<Term> {
        if d < 3 {
            return None;
        }
        let mut trial = sc.clone();
        let (n, alpha) = self.step(&mut trial, p, d - 1)?;
        let consumed = trial.live_linear().len() < sc.live_linear().len();
        if consumed
            && trial.live_linear().is_empty()
            && self.rng.gen_ratio(self.cfg.weights.tail, self.cfg.weights.tail + 2)
        {
            return Some(n);
        }
        let y = self.fresh();
        let mu = LiftedObject::from_fn(&alpha.tree(), |path| {
            let mut branch = trial.clone();
            branch.push(&y, alpha.lookup(path).expect("same tree").clone());
            branch.lift_depth += path.len();
            self.block(branch, d - 1).ok_or(())
        })
        .ok()?;
        Some(Term::let_in(&y, n, mu))
    }

    fn sources(&self, sc: &Scope) -> Vec<Source> {
        let mut out: Vec<Source> = self
            .seeds
            .iter()
            .map(|s| Source { value: s.value.clone(), input: s.input.clone(), theta: s.theta.clone() })
            .collect();
        for (_, s) in sc.usable() {
            if let Some(src) = circ_source(Value::var(&s.name), &s.ty) {
                out.push(src);
            }
        }
        out
    }

    /// Builds an argument of M-type `t` from live slots.
    fn arg(&mut self, sc: &mut Scope, t: &MType) -> Option<Value> {
        if *t == MType::Unit {
            return Some(Value::Unit);
        }
        let want = Type::from_mtype(t);
        let exact: Vec<usize> = sc.live_linear().into_iter().filter(|&i| sc.slots[i].ty == want).collect();
        if !exact.is_empty() && (matches!(t, MType::Wire(_)) || self.rng.gen_bool(0.5)) {
            let &i = exact.choose(&mut self.rng)?;
            return Some(sc.take(i));
        }
        match t {
            MType::Tensor(a, b) => {
                let va = self.arg(sc, a)?;
                let vb = self.arg(sc, b)?;
                Some(Value::pair(va, vb))
            }
            _ => None,
        }
    }

    /// One computation of depth at most `b`, consuming slots of `sc`.
    fn step(&mut self, sc: &mut Scope, p: Prod, b: usize) -> Option<(Term, LiftedObject<Type>)> {
        match p {
            Prod::Init | Prod::Gate | Prod::Lifting => {
                if p == Prod::Lifting && sc.no_lift {
                    return None;
                }
                let max_lift = self.cfg.max_lift_depth;
                let mut cands: Vec<Source> = self
                    .sources(sc)
                    .into_iter()
                    .filter(|s| match p {
                        Prod::Init => s.input == MType::Unit && s.theta.tree().is_leaf(),
                        Prod::Gate => s.input != MType::Unit && s.theta.tree().is_leaf(),
                        _ => !s.theta.tree().is_leaf() && sc.lift_depth + s.theta.tree().depth() <= max_lift,
                    })
                    .collect();
                cands.shuffle(&mut self.rng);
                for s in cands {
                    let mut trial = sc.clone();
                    let Some(w) = self.arg(&mut trial, &s.input) else { continue };
                    let binders = s.theta.tree().binders();
                    let us: Vec<LiftedVar> = binders.iter().map(|_| self.fresh_lifted()).collect();
                    let pi = Perm::from_pairs(binders.into_iter().zip(us.iter().cloned()))?;
                    let ty = s.theta.rename_lifted(&pi).map(Type::from_mtype);
                    let t = Term::Apply(us, s.value, w);
                    if t.depth() <= b {
                        *sc = trial;
                        return Some((t, ty));
                    }
                }
                None
            }
            Prod::Call => {
                let fs: Vec<usize> =
                    sc.live_linear().into_iter().filter(|&i| matches!(sc.slots[i].ty, Type::Arrow(..))).collect();
                let &fi = fs.choose(&mut self.rng)?;
                let Type::Arrow(a, beta) = sc.slots[fi].ty.clone() else { unreachable!() };
                let tree = beta.tree();
                if (sc.no_lift && !tree.is_leaf()) || sc.lift_depth + tree.depth() > self.cfg.max_lift_depth {
                    return None;
                }
                let args: Vec<usize> =
                    sc.usable().filter(|&(i, s)| i != fi && types_alpha_equiv(&s.ty, &a)).map(|(i, _)| i).collect();
                let w = match args.choose(&mut self.rng) {
                    Some(&i) => sc.take(i),
                    None if *a == Type::Unit => Value::Unit,
                    None => return None,
                };
                let f = sc.take(fi);
                Some((Term::App(f, w), *beta))
            }
            Prod::Force => {
                let ts: Vec<usize> =
                    sc.usable().filter(|(_, s)| matches!(s.ty, Type::Bang(_))).map(|(i, _)| i).collect();
                let &i = ts.choose(&mut self.rng)?;
                let Type::Bang(alpha) = sc.slots[i].ty.clone() else { unreachable!() };
                Some((Term::Force(sc.take(i)), *alpha))
            }
            Prod::Fun => {
                if b < 4 {
                    return None;
                }
                let a = match sc.live_linear().choose(&mut self.rng) {
                    Some(&i) if self.rng.gen_bool(0.6) => sc.slots[i].ty.clone(),
                    _ => simple_type(&mut self.rng),
                };
                let x = self.fresh();
                let mut body_sc = sc.params();
                body_sc.push(&x, a.clone());
                let body = self.block(body_sc.clone(), b - 2)?;
                let (ty, _) = self.type_in(&body_sc, &body)?;
                Some((Term::Return(Value::lam(&x, a.clone(), body)), LiftedObject::leaf(Type::arrow(a, ty.ty))))
            }
            Prod::Thunk => {
                if b < 4 {
                    return None;
                }
                let mut body_sc = sc.params();
                body_sc.no_lift = true;
                let body = self.block(body_sc.clone(), b - 2)?;
                let (ty, _) = self.type_in(&body_sc, &body)?;
                ty.ty.as_leaf()?;
                Some((Term::Return(Value::lift(body)), LiftedObject::leaf(Type::bang(ty.ty.as_leaf()?.clone()))))
            }
            Prod::Boxing => {
                if b < 6 {
                    return None;
                }
                let t = match simple_type(&mut self.rng).to_mtype() {
                    Some(t) => t,
                    None => MType::qubit(),
                };
                let x = self.fresh();
                let mut body_sc = sc.params();
                body_sc.lift_depth = 0;
                body_sc.m_only = true;
                body_sc.push(&x, Type::from_mtype(&t));
                let body = self.block(body_sc.clone(), b - 4)?;
                let (ty, _) = self.type_in(&body_sc, &body)?;
                let theta = ty.ty.try_map(|a| a.to_mtype().ok_or(())).ok()?;
                let boxed = Term::Box(
                    t.clone(),
                    Vec::new(),
                    Value::lift(Term::Return(Value::lam(&x, Type::from_mtype(&t), body))),
                );
                Some((boxed, LiftedObject::leaf(Type::Circ(t, theta))))
            }
            Prod::Finish | Prod::LetPair => None,
        }
    }

    /// Types a generated block in its scope; only used to annotate values.
    fn type_in(&self, sc: &Scope, m: &Term) -> Option<(ComputationTyping, ())> {
        let mut ctx = crate::typing::TypingContext::new();
        for s in &sc.slots {
            if s.live {
                ctx = ctx.with_var(&s.name, s.ty.clone());
            }
        }
        let (c, _) = crate::typing::type_term(&ctx, m, &self.cfg.gates).ok()?;
        Some((c, ()))
    }
}

fn generate(cfg: &GenConfig, rng: ChaCha8Rng) -> Result<(Term, ComputationTyping), GenError> {
    let mut g = Gen::new(cfg, rng);
    for _ in 0..cfg.retries {
        g.names = 0;
        g.lifted = 0;
        let Some(m) = g.program() else { continue };
        if cfg.max_depth > 1 && m.depth() > cfg.max_depth {
            continue;
        }
        if let Ok(t) = type_closed(&m, &LabelContext::new(), &cfg.gates) {
            return Ok((m, t));
        }
    }
    Err(GenError::GenerationBudgetExceeded(cfg.retries))
}

/// A closed well-typed term drawn from the generator seeded by `cfg.seed`.
pub fn gen_well_typed(cfg: &GenConfig) -> Result<Term, GenError> {
    generate(cfg, ChaCha8Rng::seed_from_u64(cfg.seed)).map(|(m, _)| m)
}

/// Item `i` of the corpus seeded by `cfg.seed`, with its type.
pub fn corpus_item(cfg: &GenConfig, i: u64) -> Result<(Term, ComputationTyping), GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i);
    generate(cfg, rng)
}

/// Whether `m` applies a circuit with at least one lifted binder.
pub fn has_lifting_apply(m: &Term) -> bool {
    fn val(v: &Value) -> bool {
        match v {
            Value::Lam(_, _, m) | Value::Lift(m) => has_lifting_apply(m),
            Value::Pair(a, b) => val(a) || val(b),
            _ => false,
        }
    }
    match m {
        Term::Apply(us, v, w) => !us.is_empty() || val(v) || val(w),
        Term::App(v, w) => val(v) || val(w),
        Term::Let(_, n, mu) => has_lifting_apply(n) || mu.leaves().into_iter().any(has_lifting_apply),
        Term::LetPair(_, _, v, n) => val(v) || has_lifting_apply(n),
        Term::Force(v) | Term::Box(_, _, v) | Term::Return(v) => val(v),
    }
}

// ---------------------------------------------------------------------------
// Shrinking

fn fillers() -> Vec<Term> {
    let init = Term::apply(&[], Value::var("Init0"), Value::Unit);
    vec![Term::Return(Value::Unit), init]
}

/// Fillers resolved against a gate set (gate names become boxed circuits).
fn resolved_fillers(gates: &GateSet) -> Vec<Term> {
    fillers()
        .into_iter()
        .filter_map(|t| match t {
            Term::Apply(us, Value::Var(g), w) => gates.boxed_gate(&g.name).map(|b| Term::Apply(us, Value::boxed(b), w)),
            t => Some(t),
        })
        .collect()
}

fn value_candidates(v: &Value, fill: &[Term]) -> Vec<Value> {
    let mut out = Vec::new();
    if *v != Value::Unit {
        out.push(Value::Unit);
    }
    match v {
        Value::Lam(x, a, m) => {
            out.extend(term_candidates(m, fill).into_iter().map(|m| Value::Lam(x.clone(), a.clone(), Box::new(m))))
        }
        Value::Lift(m) => out.extend(term_candidates(m, fill).into_iter().map(Value::lift)),
        Value::Pair(a, b) => {
            out.extend(value_candidates(a, fill).into_iter().map(|a| Value::Pair(Box::new(a), b.clone())));
            out.extend(value_candidates(b, fill).into_iter().map(|b| Value::Pair(a.clone(), Box::new(b))));
        }
        _ => {}
    }
    out
}

fn term_candidates(m: &Term, fill: &[Term]) -> Vec<Term> {
    let mut out: Vec<Term> = fill.iter().filter(|f| f.size() < m.size()).cloned().collect();
    match m {
        Term::Return(v) => out.extend(value_candidates(v, fill).into_iter().map(Term::Return)),
        Term::Force(v) => out.extend(value_candidates(v, fill).into_iter().map(Term::Force)),
        Term::Box(t, us, v) => {
            out.extend(value_candidates(v, fill).into_iter().map(|v| Term::Box(t.clone(), us.clone(), v)))
        }
        Term::App(v, w) => {
            out.extend(value_candidates(v, fill).into_iter().map(|v| Term::App(v, w.clone())));
            out.extend(value_candidates(w, fill).into_iter().map(|w| Term::App(v.clone(), w)));
        }
        Term::Apply(us, v, w) => {
            out.extend(value_candidates(w, fill).into_iter().map(|w| Term::Apply(us.clone(), v.clone(), w)))
        }
        Term::LetPair(x, y, v, n) => {
            if !free_vars_term(n).contains(&x.name) && !free_vars_term(n).contains(&y.name) {
                out.push((**n).clone());
            }
            out.extend(
                term_candidates(n, fill)
                    .into_iter()
                    .map(|n| Term::LetPair(x.clone(), y.clone(), v.clone(), Box::new(n))),
            );
        }
        Term::Let(x, n, mu) => {
            out.push((**n).clone());
            for leaf in mu.leaves() {
                if !free_vars_term(leaf).contains(&x.name) {
                    out.push(leaf.clone());
                }
                // Skip the bound computation, passing one of its inputs on.
                for y in free_vars_term(n) {
                    out.push(substitute_term(leaf, &Value::var(&y), &x.name));
                }
            }
            out.extend(term_candidates(n, fill).into_iter().map(|n| Term::Let(x.clone(), Box::new(n), mu.clone())));
            for (p, leaf) in mu.entries() {
                for c in term_candidates(leaf, fill) {
                    let mut mu2 = (**mu).clone();
                    *mu2.lookup_mut(&p).expect("entry") = c;
                    out.push(Term::Let(x.clone(), n.clone(), Box::new(mu2)));
                }
            }
        }
    }
    out
}

/// Greedy structural shrinking: repeatedly replaces a subterm by a smaller
/// one (a filler, a child, or a shrunk child) while `fails` still holds.
pub fn shrink(m: &Term, fails: impl Fn(&Term) -> bool) -> Term {
    shrink_with(m, &GateSet::default(), fails)
}

pub fn shrink_with(m: &Term, gates: &GateSet, fails: impl Fn(&Term) -> bool) -> Term {
    let fill = resolved_fillers(gates);
    let mut cur = m.clone();
    let mut budget = 4000usize;
    'outer: loop {
        let mut cands = term_candidates(&cur, &fill);
        cands.retain(|c| c.size() < cur.size());
        cands.sort_by_key(|c| c.size());
        for c in cands {
            if budget == 0 {
                break 'outer;
            }
            budget -= 1;
            if fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

// ---------------------------------------------------------------------------
// Corpus runs

/// Summary of checking a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub count: usize,
    pub max_depth: usize,
    pub fuel: u64,
    pub mutation: Option<Mutation>,
    pub done: usize,
    pub fuel_exhausted: usize,
    pub stuck: usize,
    /// Programs containing an `apply` that binds lifted variables.
    pub lifting_apply: usize,
    pub sr_violations: usize,
    /// Shrunk findings, at most `MAX_REPORTED` per property.
    pub findings: Vec<Finding>,
}

impl CorpusReport {
    pub fn is_clean(&self) -> bool {
        self.sr_violations == 0 && self.stuck == 0
    }
}

/// Findings shrunk and reported per property.
pub const MAX_REPORTED: usize = 5;

struct ItemResult {
    lifting: bool,
    verdict: Option<Verdict>,
    stuck: Option<String>,
    sr: Option<String>,
    term: Term,
}

fn check_item(cfg: &GenConfig, h: &Harness, i: u64) -> Result<ItemResult, GenError> {
    let (term, typing) = corpus_item(cfg, i)?;
    let mut env = h.env();
    let out = run_closed(&term, &mut env);
    let (verdict, stuck, sr) = match out {
        EvalOutcome::Done(r) => {
            let sr = check_closed_result(&r.circuit, &r.value, &typing, &h.gates)
                .err()
                .map(|e| format!("result at {} rejected: {}", typing, e))
                .or_else(|| env.findings.first().cloned());
            (Some(Verdict::Done), None, sr)
        }
        EvalOutcome::FuelExhausted => (Some(Verdict::FuelExhausted), None, None),
        out @ EvalOutcome::Stuck(..) => (None, Some(out.to_string()), None),
    };
    Ok(ItemResult { lifting: has_lifting_apply(&term), verdict, stuck, sr, term })
}

/// Generates `count` programs (item `i` from stream `i` of `cfg.seed`) and
/// checks subject reduction and progress on each. Items run on all cores;
/// the report does not depend on scheduling.
pub fn run_corpus(cfg: &GenConfig, count: usize, h: &Harness) -> Result<CorpusReport, GenError> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(count.max(1));
    let mut results: Vec<Option<Result<ItemResult, GenError>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..count).step_by(workers).map(|i| (i, check_item(cfg, h, i as u64))).collect::<Vec<_>>()
                })
            })
            .collect();
        for hd in handles {
            for (i, r) in hd.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut report = CorpusReport {
        seed: cfg.seed,
        count,
        max_depth: cfg.max_depth,
        fuel: h.fuel,
        mutation: h.mutation,
        done: 0,
        fuel_exhausted: 0,
        stuck: 0,
        lifting_apply: 0,
        sr_violations: 0,
        findings: Vec::new(),
    };
    let (mut sr_reported, mut pr_reported) = (0, 0);
    for r in results.into_iter().map(|r| r.expect("every item ran")) {
        let r = r?;
        report.lifting_apply += usize::from(r.lifting);
        match r.verdict {
            Some(Verdict::Done) => report.done += 1,
            Some(Verdict::FuelExhausted) => report.fuel_exhausted += 1,
            None => report.stuck += 1,
        }
        if let Some(d) = r.stuck {
            if pr_reported < MAX_REPORTED {
                pr_reported += 1;
                report.findings.push(h.finding(Property::Progress, &r.term, d));
            }
        }
        if let Some(d) = r.sr {
            report.sr_violations += 1;
            if sr_reported < MAX_REPORTED {
                sr_reported += 1;
                report.findings.push(h.finding(Property::SubjectReduction, &r.term, d));
            }
        }
    }
    Ok(report)
}

impl fmt::Display for CorpusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} programs (seed {}, depth <= {}): {} done, {} out of fuel, {} stuck",
            self.count, self.seed, self.max_depth, self.done, self.fuel_exhausted, self.stuck
        )?;
        writeln!(f, "lifting applies in {} programs", self.lifting_apply)?;
        write!(f, "subject reduction violations: {}", self.sr_violations)?;
        for x in &self.findings {
            write!(f, "\n{}", x)?;
        }
        Ok(())
    }
}

/// Display of a computation typing for reports.
pub fn show_typing(t: &ComputationTyping) -> String {
    format!("{}", LiftedType(&t.ty))
}

/// Random well-formed circuit over the default gate names, with up to
/// `steps` instructions. Instructions may be conditioned on any assignment
/// admitted by the current tree, and measured bits are lifted at random.
pub fn random_circuit(rng: &mut impl Rng, steps: usize, gates: &GateSet) -> Circuit {
    let mut input = LabelContext::new();
    for i in 0..rng.gen_range(1..=3) {
        input.insert(Label::new(format!("q{i}")), WireType::Qubit);
    }
    if rng.gen_bool(0.3) {
        input.insert(Label::new("b0"), WireType::Bit);
    }
    extend_random(rng, Circuit::input(input), steps, gates, "w")
}

/// Appends up to `steps` random instructions to `c`. New labels are named
/// `{prefix}1, {prefix}2, …` and new lifted variables `{prefix}v1, …`, so
/// distinct prefixes keep extensions apart.
pub fn extend_random(rng: &mut impl Rng, mut c: Circuit, steps: usize, gates: &GateSet, prefix: &str) -> Circuit {
    let (mut next_label, mut next_var) = (0usize, 0usize);
    let var_prefix = format!("{prefix}v");
    let fresh = |prefix: &str, n: &mut usize| {
        *n += 1;
        format!("{prefix}{n}")
    };
    for _ in 0..steps {
        let Ok(sig) = check_signature(&c, gates) else { break };
        let paths = sig.tree.path_set();
        let Some(p) = paths.choose(rng) else { break };
        let mut cond = p.clone();
        for v in p.domain() {
            if rng.gen_bool(0.4) {
                cond = cond.without(&v);
            }
        }
        let reach: Vec<&Assignment> = paths.iter().filter(|q| cond.is_sub_of(q)).collect();
        let live = |w: WireType| -> Vec<Label> {
            let first = sig.outputs.lookup(reach[0]).expect("path");
            first
                .iter()
                .filter(|(l, t)| {
                    *t == w && reach.iter().all(|q| sig.outputs.lookup(q).and_then(|o| o.get(l)) == Some(w))
                })
                .map(|(l, _)| l.clone())
                .collect()
        };
        let qubits = live(WireType::Qubit);
        let bits = live(WireType::Bit);
        let label = |l: &Label| MValue::Label(l.clone());
        let pair = |a: MValue, b: MValue| MValue::Pair(Box::new(a), Box::new(b));
        let new = |n: &mut usize| Label::new(fresh(prefix, n));
        let ins = match rng.gen_range(0..7) {
            0 | 1 if !qubits.is_empty() => {
                let q = qubits.choose(rng).unwrap();
                let g = ["H", "X", "Z"].choose(rng).unwrap();
                Instruction::Gate { cond, gate: g.to_string(), input: label(q), output: label(&new(&mut next_label)) }
            }
            2 if qubits.len() >= 2 => {
                let ab: Vec<&Label> = qubits.choose_multiple(rng, 2).collect();
                let out = pair(label(&new(&mut next_label)), label(&new(&mut next_label)));
                let g = if rng.gen_bool(0.7) { "CNOT" } else { "Meas2" };
                Instruction::Gate { cond, gate: g.into(), input: pair(label(ab[0]), label(ab[1])), output: out }
            }
            3 if !qubits.is_empty() => {
                let q = qubits.choose(rng).unwrap();
                Instruction::Gate { cond, gate: "Meas".into(), input: label(q), output: label(&new(&mut next_label)) }
            }
            4 | 5 if !bits.is_empty() => {
                let b = bits.choose(rng).unwrap().clone();
                if rng.gen_bool(0.8) {
                    Instruction::Lift { cond, wire: b, var: LiftedVar::new(fresh(&var_prefix, &mut next_var)) }
                } else {
                    Instruction::Gate { cond, gate: "Discard".into(), input: label(&b), output: MValue::Unit }
                }
            }
            _ => {
                let g = if rng.gen_bool(0.5) { "Init0" } else { "Init1" };
                Instruction::Gate { cond, gate: g.into(), input: MValue::Unit, output: label(&new(&mut next_label)) }
            }
        };
        c.instructions.push(ins);
        if check_signature(&c, gates).is_err() {
            c.instructions.pop();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Mutation;

    #[test]
    fn depth_one_is_trivial() {
        for seed in 0..20 {
            let cfg = GenConfig { seed, max_depth: 1, ..GenConfig::default() };
            let m = gen_well_typed(&cfg).unwrap();
            match &m {
                Term::Return(Value::Unit) => {}
                Term::Return(Value::Lam(x, _, body)) => assert_eq!(**body, Term::Return(Value::Var(x.clone()))),
                other => panic!("unexpected {}", other),
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = GenConfig { seed: 11, ..GenConfig::default() };
        assert_eq!(gen_well_typed(&cfg).unwrap(), gen_well_typed(&cfg).unwrap());
        let a = corpus_item(&cfg, 3).unwrap().0;
        let b = corpus_item(&cfg, 3).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_typecheck() {
        let names: Vec<String> = seed_circuits(&GateSet::default()).into_iter().map(|(n, _)| n).collect();
        for n in ["H", "Meas", "Id", "MeasLift", "LiftBit", "MeasLiftX"] {
            assert!(names.iter().any(|m| m == n), "{}", n);
        }
    }

    #[test]
    fn trivial_checks() {
        let m = Term::Return(Value::Unit);
        assert!(check_sr(&m).is_ok());
        assert_eq!(check_progress(&m, 10), Ok(Verdict::Done));
        assert_eq!(check_progress(&m, 0), Ok(Verdict::FuelExhausted));
        let bad = parse_term("force *").unwrap();
        assert_eq!(check_progress(&bad, 10).unwrap_err().property, Property::WellTyped);
    }

    #[test]
    fn mutation_is_caught_and_shrunk() {
        let gs = GateSet::default();
        let src = "let q = apply(crl (*) { input(); Init0(*) -> o; } => o, *) in \
                   let x = apply[u](crl (l) { input(l:Qubit); Meas(l) -> m; lift(m) => u; } => case u { 0 => * | 1 => * }, q) in \
                   case u { 0 => return x | 1 => return * }";
        let m = parse_term(src).unwrap();
        let h = Harness { mutation: Some(Mutation::SkipLetFlatten), ..Harness::default() };
        assert!(Harness::default().check_sr(&m).is_ok());
        let f = h.check_sr(&m).unwrap_err();
        assert_eq!(f.property, Property::SubjectReduction);
        assert!(f.size <= f.original_size);
        assert!(f.replays(&gs));
        let small = parse_term(&f.program).unwrap();
        assert!(type_closed(&small, &LabelContext::new(), &gs).is_ok());
    }

    #[test]
    fn small_corpus_is_clean() {
        let cfg = GenConfig { seed: 5, max_depth: 8, ..GenConfig::default() };
        let r = run_corpus(&cfg, 60, &Harness::default()).unwrap();
        assert!(r.is_clean(), "{}", r);
        assert!(r.lifting_apply > 0);
    }
}
