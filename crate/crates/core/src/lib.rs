//! Proto-Quipper-K: lifting trees, CRL circuits, a linear type-and-effect
//! checker, a big-step evaluator that builds circuits, a state-vector
//! simulator and a metatheory fuzzer.

pub mod crl;
pub mod eval;
pub mod lifting_tree;
pub mod metatheory;
pub mod simulator;
pub mod syntax;
pub mod text;
pub mod typing;

pub use crl::{
    append, boxed_equiv, check_signature, insert, BoxedCircuit, Circuit, CircuitSignature, CrlError, Gate, GateSet,
    Instruction, Label, LabelContext, MType, MValue, RenameLabels, WireType,
};
pub use eval::{run_closed, run_with_input, EvalEnv, EvalOutcome, Mutation, RightConfig, DEFAULT_FUEL};
pub use lifting_tree::{
    flatten, Assignment, LiftError, LiftedObject, LiftedVar, LiftingTree, Nested, Perm, RenameLifted,
};
pub use metatheory::{
    extend_random, gen_well_typed, random_circuit, run_corpus, CorpusReport, Finding, GenConfig, Harness,
};
pub use simulator::{branch_distribution, parse_init, simulate, QuantumState, RunTrace, SimError};
pub use syntax::{parse_program, parse_term, parse_type, Program, Term, Type, Value};
pub use text::{Span, SyntaxError};
pub use typing::{check_program, type_closed, ComputationTyping, TypeError, TypeErrorKind};
