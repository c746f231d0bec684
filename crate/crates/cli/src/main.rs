//! `pqk`: check, run, simulate, render and fuzz Proto-Quipper-K programs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value as Json};

use pqk_core::crl::to_dot;
use pqk_core::eval::{run_with_input, EvalEnv, EvalOutcome, Mutation, RightConfig, DEFAULT_FUEL};
use pqk_core::metatheory::{run_corpus, GenConfig, Harness};
use pqk_core::simulator::{branch_distribution, parse_init, simulate};
use pqk_core::syntax::{parse_program, LiftedValue, Program};
use pqk_core::typing::{check_program, ComputationTyping};
use pqk_core::{check_signature, Circuit, GateSet, LiftedObject};

#[derive(Parser)]
#[command(name = "pqk", version, about = "Proto-Quipper-K type checker, evaluator and simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check a program and print its computation typing `(t, α)`.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a program, printing the lifted value and the built circuit.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long)]
        json: bool,
        /// Write the circuit as CRL text, or as DOT if the name ends in `.dot`.
        #[arg(long, value_name = "FILE")]
        emit_circuit: Option<PathBuf>,
    },
    /// Evaluate a program and sample its circuit on a state-vector simulator.
    Sim {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial values of input wires, e.g. `q=0,a=+`.
        #[arg(long, default_value = "")]
        init: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a program and print the circuit it describes.
    Circuit {
        file: PathBuf,
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Check subject reduction and progress on generated programs.
    Fuzz {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Run against an evaluator whose `let` skips flattening.
        #[arg(long)]
        mutate: bool,
    },
}

/// `println!` that ignores a closed stdout (e.g. piping into `head`).
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

enum Failure {
    /// Bad input: syntax, types, files, flags.
    User(String),
    /// A broken invariant of the implementation.
    Internal(String),
}

type Res<T> = Result<T, Failure>;

fn user(e: impl std::fmt::Display) -> Failure {
    Failure::User(e.to_string())
}

fn gates() -> Res<GateSet> {
    match std::env::var_os("PQK_GATESET") {
        None => Ok(GateSet::default()),
        Some(p) => {
            let src = std::fs::read_to_string(&p)
                .map_err(|e| Failure::User(format!("PQK_GATESET {}: {}", Path::new(&p).display(), e)))?;
            GateSet::from_json(&src).map_err(|e| Failure::User(format!("PQK_GATESET: {}", e)))
        }
    }
}

struct Loaded {
    program: Program,
    typing: ComputationTyping,
    gates: GateSet,
}

fn load(file: &Path) -> Res<Loaded> {
    let gates = gates()?;
    let src = std::fs::read_to_string(file).map_err(|e| Failure::User(format!("{}: {}", file.display(), e)))?;
    let program = parse_program(&src, &gates).map_err(|e| Failure::User(e.render(&src)))?;
    let typing = check_program(&program, &gates).map_err(|e| Failure::User(e.render(&src)))?;
    Ok(Loaded { program, typing, gates })
}

fn evaluate(l: &Loaded, fuel: u64) -> Res<RightConfig> {
    let mut env = EvalEnv::new(l.gates.clone()).with_fuel(fuel);
    match run_with_input(&l.program.term, l.program.labels.clone(), &mut env) {
        EvalOutcome::Done(r) => Ok(r),
        EvalOutcome::FuelExhausted => Err(Failure::User(format!("no result within {} steps", fuel))),
        out @ EvalOutcome::Stuck(..) => Err(Failure::Internal(format!("well-typed program got {}", out))),
    }
}

fn strings(o: &LiftedObject<impl std::fmt::Display>) -> LiftedObject<String> {
    o.map(|x| x.to_string())
}

fn typing_json(t: &ComputationTyping) -> Json {
    json!({ "typing": t.to_string(), "tree": t.tree(), "type": strings(&t.ty) })
}

fn circuit_json(c: &Circuit, gates: &GateSet) -> Res<Json> {
    let sig = check_signature(c, gates).map_err(|e| Failure::Internal(format!("built circuit is invalid: {}", e)))?;
    Ok(json!({ "text": c.to_string(), "circuit": c, "signature": sig }))
}

fn write_file(path: &Path, contents: &str) -> Res<()> {
    std::fs::write(path, contents).map_err(|e| Failure::User(format!("{}: {}", path.display(), e)))
}

fn print_json(v: &Json) {
    outln!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_check(file: &Path, as_json: bool) -> Res<()> {
    let gates = gates()?;
    let src = std::fs::read_to_string(file).map_err(|e| Failure::User(format!("{}: {}", file.display(), e)))?;
    let program = parse_program(&src, &gates).map_err(|e| Failure::User(e.render(&src)))?;
    match check_program(&program, &gates) {
        Ok(t) if as_json => print_json(&typing_json(&t)),
        Ok(t) => outln!("{}", t),
        Err(e) => {
            if as_json {
                let (line, col) = e.span.map(|s| s.line_col(&src)).unwrap_or((0, 0));
                print_json(&json!({ "error": {
                    "kind": e.kind, "rule": e.rule, "span": e.span, "line": line, "column": col,
                    "path": e.path, "message": e.to_string(),
                }}));
            }
            return Err(Failure::User(e.render(&src)));
        }
    }
    Ok(())
}

fn cmd_run(file: &Path, fuel: u64, as_json: bool, emit: Option<&Path>) -> Res<()> {
    let l = load(file)?;
    let r = evaluate(&l, fuel)?;
    if let Some(path) = emit {
        let c = r.described_circuit();
        let text = if path.extension().is_some_and(|e| e == "dot") { to_dot(c) } else { format!("{}\n", c) };
        write_file(path, &text)?;
    }
    if as_json {
        let paths: Vec<Json> =
            r.value.entries().into_iter().map(|(p, v)| json!({ "path": p, "value": v.to_string() })).collect();
        print_json(&json!({
            "typing": typing_json(&l.typing),
            "value": strings(&r.value),
            "paths": paths,
            "circuit": circuit_json(&r.circuit, &l.gates)?,
        }));
    } else {
        outln!("type: {}", l.typing);
        outln!("value: {}", LiftedValue(&r.value));
        outln!("circuit:\n{}", r.circuit);
    }
    Ok(())
}

fn cmd_circuit(file: &Path, dot: Option<&Path>, as_json: bool, fuel: u64) -> Res<()> {
    let l = load(file)?;
    let r = evaluate(&l, fuel)?;
    let c = r.described_circuit();
    if let Some(path) = dot {
        write_file(path, &to_dot(c))?;
    }
    if as_json {
        print_json(&circuit_json(c, &l.gates)?);
    } else {
        outln!("{}", c);
    }
    Ok(())
}

fn cmd_sim(file: &Path, shots: u64, seed: u64, init: &str, fuel: u64, as_json: bool) -> Res<()> {
    let l = load(file)?;
    let r = evaluate(&l, fuel)?;
    let c = r.described_circuit();
    let state = parse_init(init, &c.input).map_err(user)?;
    let first = simulate(c, &state, seed, &l.gates).map_err(user)?;
    let dist = branch_distribution(c, &state, shots, seed, &l.gates).map_err(user)?;
    if as_json {
        let rows: Vec<Json> = dist
            .iter()
            .map(|(p, n)| json!({ "path": p, "count": n, "frequency": *n as f64 / shots.max(1) as f64 }))
            .collect();
        print_json(&json!({
            "inputs": c.input, "shots": shots, "seed": seed, "distribution": rows, "first_shot": first.to_json(),
        }));
    } else {
        outln!("inputs: {}", c.input);
        outln!("first shot: path {}, outputs {}", first.path, first.outputs);
        for (l, b) in &first.state.bits {
            outln!("  {} = {}", l, u8::from(*b));
        }
        for (i, a) in first.state.amplitudes().iter().enumerate() {
            if a.norm_sqr() > 1e-12 {
                let wires = first.state.wires();
                let ket: String = (0..wires.len()).rev().map(|k| if i >> k & 1 == 1 { '1' } else { '0' }).collect();
                outln!("  {:+.6}{:+.6}i |{}>", a.re, a.im, ket);
            }
        }
        let names: Vec<String> = first.state.wires().iter().rev().map(|w| w.to_string()).collect();
        if !names.is_empty() {
            outln!("  (qubits {})", names.join(" "));
        }
        outln!("distribution over {} shots:", shots);
        for (p, n) in &dist {
            outln!("  {} {} ({:.4})", p, n, *n as f64 / shots.max(1) as f64);
        }
    }
    Ok(())
}

fn cmd_fuzz(count: usize, seed: u64, depth: usize, fuel: u64, report: Option<&Path>, mutate: bool) -> Res<()> {
    let gates = gates()?;
    let cfg = GenConfig { seed, max_depth: depth, gates: gates.clone(), ..GenConfig::default() };
    let h = Harness { gates, fuel, mutation: mutate.then_some(Mutation::SkipLetFlatten) };
    let r = run_corpus(&cfg, count, &h).map_err(user)?;
    outln!("{}", r);
    if let Some(path) = report {
        write_file(path, &format!("{}\n", serde_json::to_string_pretty(&r).expect("serializable")))?;
    }
    if r.is_clean() {
        Ok(())
    } else {
        Err(Failure::Internal(format!("{} subject reduction violations, {} stuck programs", r.sr_violations, r.stuck)))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.cmd {
        Cmd::Check { file, json } => cmd_check(file, *json),
        Cmd::Run { file, fuel, json, emit_circuit } => cmd_run(file, *fuel, *json, emit_circuit.as_deref()),
        Cmd::Sim { file, shots, seed, init, fuel, json } => cmd_sim(file, *shots, *seed, init, *fuel, *json),
        Cmd::Circuit { file, dot, json, fuel } => cmd_circuit(file, dot.as_deref(), *json, *fuel),
        Cmd::Fuzz { count, seed, depth, fuel, report, mutate } => {
            cmd_fuzz(*count, *seed, *depth, *fuel, report.as_deref(), *mutate)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(m)) => {
            eprintln!("{}", m);
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {}", m);
            ExitCode::from(2)
        }
    }
}
