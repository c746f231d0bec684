//! Dense state-vector execution of CRL circuits with sampled measurements.
//!
//! Qubit slot `k` of the state is bit `k` of the amplitude index.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crl::{check_signature, Circuit, CrlError, GateSet, Instruction, Label, LabelContext, WireType};
use crate::lifting_tree::{Assignment, LiftedVar};

/// Default qubit limit.
pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Signature(#[from] CrlError),
    #[error("no semantics for gate {0}")]
    UnsupportedGate(String),
    #[error("initial state lacks input wire {0}")]
    MissingInput(Label),
    #[error("state would exceed {0} qubits")]
    TooManyQubits(usize),
    #[error("bad init spec: {0}")]
    BadInit(String),
    #[error("internal: {0}")]
    Internal(String),
}

/// Pure state of the live qubit wires plus the values of live bit wires.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: Vec<Complex64>,
    wires: Vec<Label>,
    pub bits: BTreeMap<Label, bool>,
    max_qubits: usize,
}

impl Default for QuantumState {
    fn default() -> Self {
        QuantumState::new()
    }
}

pub fn ket0() -> [Complex64; 2] {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
}

pub fn ket1() -> [Complex64; 2] {
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
}

pub fn ket_plus() -> [Complex64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(s, 0.0), Complex64::new(s, 0.0)]
}

pub fn ket_minus() -> [Complex64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]
}

impl QuantumState {
    /// The zero-qubit state with amplitude 1.
    pub fn new() -> Self {
        QuantumState {
            amps: vec![Complex64::new(1.0, 0.0)],
            wires: Vec::new(),
            bits: BTreeMap::new(),
            max_qubits: MAX_QUBITS,
        }
    }

    pub fn with_max_qubits(mut self, n: usize) -> Self {
        self.max_qubits = n;
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.wires.len()
    }

    pub fn wires(&self) -> &[Label] {
        &self.wires
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn slot(&self, l: &Label) -> Result<usize, SimError> {
        self.wires.iter().position(|w| w == l).ok_or_else(|| SimError::Internal(format!("no qubit wire {}", l)))
    }

    /// Tensors a fresh qubit in state `psi` (normalized here) onto the state.
    pub fn add_qubit(&mut self, l: Label, psi: [Complex64; 2]) -> Result<(), SimError> {
        if self.wires.len() >= self.max_qubits {
            return Err(SimError::TooManyQubits(self.max_qubits));
        }
        let n = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        let psi = [psi[0] / n, psi[1] / n];
        let old = std::mem::take(&mut self.amps);
        let half = old.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); half * 2];
        for (i, a) in old.iter().enumerate() {
            amps[i] = a * psi[0];
            amps[i + half] = a * psi[1];
        }
        self.amps = amps;
        self.wires.push(l);
        Ok(())
    }

    pub fn add_bit(&mut self, l: Label, b: bool) {
        self.bits.insert(l, b);
    }

    fn apply_1q(&mut self, k: usize, m: [[Complex64; 2]; 2]) {
        let mask = 1usize << k;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_cnot(&mut self, ctl: usize, tgt: usize) {
        let (cm, tm) = (1usize << ctl, 1usize << tgt);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    /// Probability of reading 1 on slot `k`.
    fn prob_one(&self, k: usize) -> f64 {
        let mask = 1usize << k;
        self.amps.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Measures slot `k` in the computational basis and removes it.
    fn measure(&mut self, k: usize, rng: &mut impl Rng) -> bool {
        let p1 = self.prob_one(k);
        let outcome = rng.gen::<f64>() < p1;
        let mask = 1usize << k;
        let low = mask - 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() / 2];
        for (i, a) in self.amps.iter().enumerate() {
            if (i & mask != 0) == outcome {
                amps[(i & low) | ((i >> (k + 1)) << k)] = *a;
            }
        }
        let n = if outcome { p1 } else { 1.0 - p1 }.sqrt();
        for a in amps.iter_mut() {
            *a /= n;
        }
        self.amps = amps;
        self.wires.remove(k);
        outcome
    }

    /// Renames a wire in place (gate outputs take new labels).
    fn relabel(&mut self, from: &Label, to: &Label) -> Result<(), SimError> {
        let k = self.slot(from)?;
        self.wires[k] = to.clone();
        Ok(())
    }

    /// Reduced density matrix of one qubit wire.
    pub fn reduced(&self, l: &Label) -> Result<[[Complex64; 2]; 2], SimError> {
        let k = self.slot(l)?;
        let mask = 1usize << k;
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                rho[0][0] += a0 * a0.conj();
                rho[0][1] += a0 * a1.conj();
                rho[1][0] += a1 * a0.conj();
                rho[1][1] += a1 * a1.conj();
            }
        }
        Ok(rho)
    }

    /// `⟨ψ|ρ|ψ⟩` for the reduced state of wire `l`; global phase is irrelevant.
    pub fn fidelity(&self, l: &Label, psi: [Complex64; 2]) -> Result<f64, SimError> {
        let rho = self.reduced(l)?;
        let n = psi[0].norm_sqr() + psi[1].norm_sqr();
        let mut f = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                f += psi[i].conj() * rho[i][j] * psi[j];
            }
        }
        Ok(f.re / n)
    }
}

/// Builds the initial state of a circuit's inputs from a spec such as
/// `q=0,a=+`: qubits take `0`, `1`, `+` or `-`, bits `0` or `1`; inputs not
/// mentioned start at 0.
pub fn parse_init(spec: &str, inputs: &LabelContext) -> Result<QuantumState, SimError> {
    let mut given: BTreeMap<Label, &str> = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (l, v) = part.split_once('=').ok_or_else(|| SimError::BadInit(format!("`{}` is not label=value", part)))?;
        let l = Label::new(l.trim());
        if !inputs.contains(&l) {
            return Err(SimError::BadInit(format!("{} is not an input wire", l)));
        }
        given.insert(l, v.trim());
    }
    let mut s = QuantumState::new();
    for (l, w) in inputs.iter() {
        let v = given.get(l).copied().unwrap_or("0");
        match (w, v) {
            (WireType::Qubit, "0") => s.add_qubit(l.clone(), ket0())?,
            (WireType::Qubit, "1") => s.add_qubit(l.clone(), ket1())?,
            (WireType::Qubit, "+") => s.add_qubit(l.clone(), ket_plus())?,
            (WireType::Qubit, "-") => s.add_qubit(l.clone(), ket_minus())?,
            (WireType::Bit, "0") => s.add_bit(l.clone(), false),
            (WireType::Bit, "1") => s.add_bit(l.clone(), true),
            _ => return Err(SimError::BadInit(format!("`{}` is not a valid {} value for {}", v, w, l))),
        }
    }
    Ok(s)
}

/// Outcome of one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub path: Assignment,
    /// Lifted variables in the order they were bound, with their bits.
    pub lifts: Vec<(LiftedVar, bool)>,
    /// Surviving wires.
    pub outputs: LabelContext,
    pub state: QuantumState,
    /// Conditional instructions skipped because the path contradicts them.
    pub skipped: usize,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    path: &'a Assignment,
    lifts: BTreeMap<String, u8>,
    outputs: &'a LabelContext,
    bits: BTreeMap<String, u8>,
    qubits: Vec<String>,
    amplitudes: Vec<[f64; 2]>,
}

impl RunTrace {
    pub fn to_json(&self) -> serde_json::Value {
        let t = TraceJson {
            path: &self.path,
            lifts: self.lifts.iter().map(|(u, b)| (u.to_string(), u8::from(*b))).collect(),
            outputs: &self.outputs,
            bits: self.state.bits.iter().map(|(l, b)| (l.to_string(), u8::from(*b))).collect(),
            qubits: self.state.wires.iter().map(|l| l.to_string()).collect(),
            amplitudes: self.state.amps.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_value(t).expect("serializable")
    }
}

fn h() -> [[Complex64; 2]; 2] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[s, s], [s, -s]]
}

fn x() -> [[Complex64; 2]; 2] {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    [[z, o], [o, z]]
}

fn zgate() -> [[Complex64; 2]; 2] {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    [[o, z], [z, -o]]
}

/// Runs one shot with a generator seeded by `seed`.
pub fn simulate(c: &Circuit, init: &QuantumState, seed: u64, gates: &GateSet) -> Result<RunTrace, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(c, init, &mut rng, gates)
}

/// Runs one shot drawing measurement outcomes from `rng`.
pub fn simulate_with(
    c: &Circuit,
    init: &QuantumState,
    rng: &mut impl Rng,
    gates: &GateSet,
) -> Result<RunTrace, SimError> {
    let sig = check_signature(c, gates)?;
    for (l, w) in c.input.iter() {
        let present = match w {
            WireType::Qubit => init.wires.contains(l),
            WireType::Bit => init.bits.contains_key(l),
        };
        if !present {
            return Err(SimError::MissingInput(l.clone()));
        }
    }
    let mut s = init.clone();
    let mut path = Assignment::empty();
    let mut lifts = Vec::new();
    let mut skipped = 0;
    for ins in &c.instructions {
        let fires = ins.cond().iter().all(|(u, b)| path.get(u) == Some(b));
        if !fires {
            if !ins.cond().compatible(&path) || ins.cond().iter().any(|(u, _)| path.get(u).is_none()) {
                skipped += 1;
                continue;
            }
        }
        match ins {
            Instruction::Lift { wire, var, .. } => {
                let b = s.bits.remove(wire).ok_or_else(|| SimError::Internal(format!("no bit wire {}", wire)))?;
                path = path.with(var.clone(), b);
                lifts.push((var.clone(), b));
            }
            Instruction::Gate { gate, input, output, .. } => {
                let ins_l = input.labels();
                let outs = output.labels();
                match (gate.as_str(), ins_l.as_slice(), outs.as_slice()) {
                    ("H" | "X" | "Z", [i], [o]) => {
                        let m = match gate.as_str() {
                            "H" => h(),
                            "X" => x(),
                            _ => zgate(),
                        };
                        let k = s.slot(i)?;
                        s.apply_1q(k, m);
                        s.relabel(i, o)?;
                    }
                    ("CNOT", [ci, ti], [co, to]) => {
                        let (kc, kt) = (s.slot(ci)?, s.slot(ti)?);
                        s.apply_cnot(kc, kt);
                        s.relabel(ci, co)?;
                        s.relabel(ti, to)?;
                    }
                    ("Meas", [i], [o]) => {
                        let k = s.slot(i)?;
                        let b = s.measure(k, rng);
                        s.bits.insert(o.clone(), b);
                    }
                    ("Meas2", [i1, i2], [o1, o2]) => {
                        let k = s.slot(i1)?;
                        let b1 = s.measure(k, rng);
                        let k = s.slot(i2)?;
                        let b2 = s.measure(k, rng);
                        s.bits.insert(o1.clone(), b1);
                        s.bits.insert(o2.clone(), b2);
                    }
                    ("Init0", [], [o]) => s.add_qubit(o.clone(), ket0())?,
                    ("Init1", [], [o]) => s.add_qubit(o.clone(), ket1())?,
                    ("Discard", [i], []) => {
                        s.bits.remove(i).ok_or_else(|| SimError::Internal(format!("no bit wire {}", i)))?;
                    }
                    _ => return Err(SimError::UnsupportedGate(gate.clone())),
                }
            }
        }
    }
    if !sig.tree.is_path(&path) {
        return Err(SimError::Internal(format!("sampled {} is not a path of {}", path, sig.tree)));
    }
    let outputs = sig.outputs.lookup(&path).expect("path").clone();
    Ok(RunTrace { path, lifts, outputs, state: s, skipped })
}

/// Empirical distribution of sampled paths over `shots` runs. Shot `i` uses
/// stream `i` of the generator seeded by `seed`.
pub fn branch_distribution(
    c: &Circuit,
    init: &QuantumState,
    shots: u64,
    seed: u64,
    gates: &GateSet,
) -> Result<BTreeMap<Assignment, u64>, SimError> {
    let mut out = BTreeMap::new();
    for shot in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let t = simulate_with(c, init, &mut rng, gates)?;
        *out.entry(t.path).or_insert(0) += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circuit(src: &str) -> Circuit {
        Circuit::parse(src).unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let c = circuit("input(q:Qubit); H(q) -> r;");
        let init = parse_init("", &c.input).unwrap();
        let t = simulate(&c, &init, 1, &GateSet::default()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(t.state.wires(), &[Label::new("r")]);
        for a in t.state.amplitudes() {
            assert!((a.re - s).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn meas2_on_basis_state() {
        let c = circuit("input(q:Qubit, a:Qubit); Meas2(q, a) -> (x, y);");
        let init = parse_init("q=0,a=0", &c.input).unwrap();
        for seed in 0..20 {
            let t = simulate(&c, &init, seed, &GateSet::default()).unwrap();
            assert_eq!(t.state.bits.get(&Label::new("x")), Some(&false));
            assert_eq!(t.state.bits.get(&Label::new("y")), Some(&false));
        }
    }

    #[test]
    fn no_lift_puts_mass_on_empty_path() {
        let c = circuit("input(q:Qubit); X(q) -> r;");
        let init = parse_init("", &c.input).unwrap();
        let d = branch_distribution(&c, &init, 50, 7, &GateSet::default()).unwrap();
        assert_eq!(d, BTreeMap::from([(Assignment::empty(), 50)]));
    }

    #[test]
    fn conditional_skipping_and_norm() {
        let c = circuit(
            "input(q:Qubit, p:Qubit); H(q) -> q1; Meas(q1) -> m; lift(m) => u; (u=1) ? X(p) -> p1; (u=0) ? Z(p) -> p2;",
        );
        let init = parse_init("", &c.input).unwrap();
        for seed in 0..10 {
            let t = simulate(&c, &init, seed, &GateSet::default()).unwrap();
            assert_eq!(t.skipped, 1);
            assert!((t.state.norm() - 1.0).abs() < 1e-12);
            let (wire, want) =
                if t.path.get(&LiftedVar::new("u")) == Some(true) { ("p1", ket1()) } else { ("p2", ket0()) };
            assert!((t.state.fidelity(&Label::new(wire), want).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let c = circuit("input(q:Qubit); H(q) -> q1; Meas(q1) -> m; lift(m) => u;");
        let init = parse_init("", &c.input).unwrap();
        let a = simulate(&c, &init, 42, &GateSet::default()).unwrap();
        let b = simulate(&c, &init, 42, &GateSet::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_specs() {
        let c = circuit("input(q:Qubit, b:Bit);");
        assert!(parse_init("q=2", &c.input).is_err());
        assert!(parse_init("b=+", &c.input).is_err());
        assert!(parse_init("z=0", &c.input).is_err());
        let s = parse_init("b=1,q=-", &c.input).unwrap();
        assert_eq!(s.bits[&Label::new("b")], true);
        assert!(matches!(
            simulate(&circuit("input(q:Qubit); Y(q) -> r;"), &QuantumState::new(), 0, &GateSet::default()),
            Err(SimError::Signature(_))
        ));
    }
}
