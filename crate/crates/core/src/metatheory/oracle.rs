//! Path-map reference semantics for lifted objects.
//!
//! A lifted object is modelled as a finite map from complete paths to
//! values. The operations below are written against that map form only and
//! serve as an oracle for the tree implementation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::lifting_tree::{flatten, Assignment, LiftError, LiftedObject, LiftedVar, LiftingTree, Nested};

pub type PathMap<X> = BTreeMap<Assignment, X>;

/// Reads an object as its path map. Walks the tree directly rather than
/// going through `entries`.
pub fn to_map<X: Clone>(o: &LiftedObject<X>) -> PathMap<X> {
    fn go<X: Clone>(o: &LiftedObject<X>, p: Assignment, out: &mut PathMap<X>) {
        match o {
            LiftedObject::Leaf(x) => {
                out.insert(p, x.clone());
            }
            LiftedObject::Node(u, o0, o1) => {
                go(o0, p.with(u.clone(), false), out);
                go(o1, p.with(u.clone(), true), out);
            }
        }
    }
    let mut out = BTreeMap::new();
    go(o, Assignment::empty(), &mut out);
    out
}

fn domain_vars<X>(m: &PathMap<X>) -> BTreeSet<LiftedVar> {
    m.keys().flat_map(|p| p.domain()).collect()
}

/// `a` belongs to the assignment set iff it is contained in some path.
pub fn admits<X>(m: &PathMap<X>, a: &Assignment) -> bool {
    m.keys().any(|p| a.is_sub_of(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleError {
    NotAPath,
    NotAdmitted,
    Clash,
}

pub fn compose<X: Clone>(m: &PathMap<X>, family: &PathMap<X>) -> Result<PathMap<X>, OracleError> {
    if family.keys().any(|k| !m.contains_key(k)) {
        return Err(OracleError::NotAPath);
    }
    Ok(m.iter().map(|(p, x)| (p.clone(), family.get(p).unwrap_or(x).clone())).collect())
}

pub fn flatten_map<X: Clone>(m: &PathMap<Nested<X>>) -> Result<PathMap<X>, OracleError> {
    let mut out = BTreeMap::new();
    for (p, n) in m {
        match n {
            Nested::Plain(x) => {
                out.insert(p.clone(), x.clone());
            }
            Nested::Lifted(y) => {
                let inner = to_map(y);
                if domain_vars(&inner).iter().any(|v| p.get(v).is_some()) {
                    return Err(OracleError::Clash);
                }
                for (q, x) in inner {
                    out.insert(p.union(&q).map_err(|_| OracleError::Clash)?, x);
                }
            }
        }
    }
    Ok(out)
}

pub fn graft_map<X: Clone>(m: &PathMap<X>, a: &Assignment, r: &PathMap<X>) -> Result<PathMap<X>, OracleError> {
    if !admits(m, a) {
        return Err(OracleError::NotAdmitted);
    }
    let r_vars = domain_vars(r);
    let mut out = BTreeMap::new();
    for (p, x) in m {
        if !a.is_sub_of(p) {
            out.insert(p.clone(), x.clone());
            continue;
        }
        if r_vars.iter().any(|v| p.get(v).is_some()) {
            return Err(OracleError::Clash);
        }
        for (q, y) in r {
            out.insert(p.union(q).map_err(|_| OracleError::Clash)?, y.clone());
        }
    }
    Ok(out)
}

fn classify(e: &LiftError) -> OracleError {
    match e {
        LiftError::VariableClash { .. } | LiftError::AssignmentClash(_) | LiftError::IllFormedTree(_) => {
            OracleError::Clash
        }
        LiftError::InvalidBranch(_) | LiftError::MissingBranch(_) => OracleError::NotAPath,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub instances: usize,
    pub errors: usize,
    pub discrepancies: Vec<String>,
}

impl Tally {
    fn record<X: Clone + PartialEq + fmt::Debug>(
        &mut self,
        what: &str,
        tree: Result<LiftedObject<X>, LiftError>,
        map: Result<PathMap<X>, OracleError>,
        not_admitted_as: OracleError,
    ) {
        self.instances += 1;
        let ok = match (&tree, &map) {
            (Ok(o), Ok(m)) => o.tree().check_well_formed().is_ok() && &to_map(o) == m,
            (Err(e), Err(k)) => {
                self.errors += 1;
                let k = if *k == OracleError::NotAdmitted { not_admitted_as } else { *k };
                classify(e) == k
            }
            _ => false,
        };
        if !ok {
            self.discrepancies.push(format!("{what}: tree {tree:?}, map {map:?}"));
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub compose: Tally,
    pub flatten: Tally,
    pub graft: Tally,
}

impl OracleReport {
    pub fn discrepancies(&self) -> usize {
        self.compose.discrepancies.len() + self.flatten.discrepancies.len() + self.graft.discrepancies.len()
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, t) in [("compose", &self.compose), ("flatten", &self.flatten), ("graft", &self.graft)] {
            writeln!(
                f,
                "{name}: {} instances, {} agreed errors, {} discrepancies",
                t.instances,
                t.errors,
                t.discrepancies.len()
            )?;
        }
        Ok(())
    }
}

const POOL: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// Random well-formed tree of depth at most `depth`, never reusing a
/// variable along a path.
pub fn random_tree(rng: &mut impl Rng, depth: usize, used: &mut Vec<LiftedVar>) -> LiftingTree {
    if depth == 0 || rng.gen_bool(0.3) {
        return LiftingTree::Leaf;
    }
    let free: Vec<&str> = POOL.iter().copied().filter(|v| !used.iter().any(|u| u.name() == *v)).collect();
    let Some(v) = free.choose(rng) else {
        return LiftingTree::Leaf;
    };
    let v = LiftedVar::new(*v);
    used.push(v.clone());
    let t0 = random_tree(rng, depth - 1, used);
    let t1 = random_tree(rng, depth - 1, used);
    used.pop();
    LiftingTree::Node(v, Box::new(t0), Box::new(t1))
}

fn random_object(rng: &mut impl Rng, depth: usize) -> LiftedObject<u32> {
    let t = random_tree(rng, depth, &mut Vec::new());
    LiftedObject::from_tree(&t, ()).map(|_| rng.gen_range(0..100))
}

fn random_assignment(rng: &mut impl Rng) -> Assignment {
    let mut a = Assignment::empty();
    for v in POOL.iter().take(rng.gen_range(0..=3)) {
        a = a.with(LiftedVar::new(*v), rng.gen());
    }
    a
}

/// Runs tree form against map form on `instances` random cases of each
/// operation. Trees have depth at most 4 (so at most 16 paths).
pub fn run_lifting_oracle(seed: u64, instances: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();

    for _ in 0..instances {
        let o = random_object(&mut rng, 4);
        let m = to_map(&o);
        let mut family: PathMap<u32> = BTreeMap::new();
        for p in m.keys() {
            if rng.gen_bool(0.4) {
                family.insert(p.clone(), rng.gen_range(100..200));
            }
        }
        if rng.gen_bool(0.2) {
            family.insert(random_assignment(&mut rng), 999);
        }
        report.compose.record("compose", o.compose(&family), compose(&m, &family), OracleError::NotAPath);
    }

    for _ in 0..instances {
        let shape = random_tree(&mut rng, 2, &mut Vec::new());
        let nested = LiftedObject::from_tree(&shape, ()).map(|_| {
            if rng.gen_bool(0.5) {
                Nested::Plain(rng.gen_range(0..100u32))
            } else {
                Nested::Lifted(random_object(&mut rng, 2))
            }
        });
        let m = to_map(&nested);
        report.flatten.record("flatten", flatten(nested), flatten_map(&m), OracleError::Clash);
    }

    for _ in 0..instances {
        let o = random_object(&mut rng, 2);
        let m = to_map(&o);
        let a = match m.keys().choose(&mut rng) {
            Some(p) if rng.gen_bool(0.8) => {
                let mut a = p.clone();
                for v in p.domain() {
                    if rng.gen_bool(0.4) {
                        a = a.without(&v);
                    }
                }
                a
            }
            _ => random_assignment(&mut rng),
        };
        let r = random_object(&mut rng, 2);
        let rm = to_map(&r);
        let tree = o.graft_with(&a, |_, _| Ok(r.clone()));
        report.graft.record("graft", tree, graft_map(&m, &a, &rm), OracleError::NotAPath);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_admits_matches_tree_assignment_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = random_tree(&mut rng, 4, &mut Vec::new());
            let m = to_map(&LiftedObject::from_tree(&t, ()));
            for a in t.assignment_set() {
                assert!(admits(&m, &a));
            }
            let a = random_assignment(&mut rng);
            assert_eq!(admits(&m, &a), t.admits(&a), "{t} {a}");
        }
    }

    #[test]
    fn small_run_is_clean() {
        let r = run_lifting_oracle(1, 200);
        assert_eq!(r.discrepancies(), 0, "{r}\n{:?}", r.graft.discrepancies);
        assert!(r.compose.errors > 0 && r.flatten.errors > 0 && r.graft.errors > 0, "{r}");
    }
}
