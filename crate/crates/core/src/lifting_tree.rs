//! Lifting trees, assignments and lifted objects.
//!
//! A lifting tree records the branching produced by dynamic lifting. A lifted
//! object decorates every leaf of such a tree with a value, so it can also be
//! read as a map from root-to-leaf paths to values.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Name of a lifted variable.
///
/// Names are ordered by their alphabetic stem first and their trailing
/// numeric suffix second, so `u2 < u10`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LiftedVar(String);

impl LiftedVar {
    pub fn new(name: impl Into<String>) -> Self {
        LiftedVar(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, Option<u128>) {
        let s = self.0.as_str();
        let stem_len = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (stem, digits) = s.split_at(stem_len);
        (stem, digits.parse().ok())
    }
}

impl Ord for LiftedVar {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, na) = self.split();
        let (sb, nb) = other.split();
        sa.cmp(sb).then(na.cmp(&nb)).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for LiftedVar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LiftedVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for LiftedVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LiftedVar {
    fn from(s: &str) -> Self {
        LiftedVar::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("assignment {0} is not consistent with the lifting tree")]
    InvalidBranch(Assignment),
    #[error("lifted variable {var} already occurs on branch {path}")]
    VariableClash { var: LiftedVar, path: Assignment },
    #[error("assignments clash on variable {0}")]
    AssignmentClash(LiftedVar),
    #[error("lifted variable {0} occurs twice on a path")]
    IllFormedTree(LiftedVar),
    #[error("no value supplied for branch {0}")]
    MissingBranch(Assignment),
}

/// Finite partial map from lifted variables to bits, kept sorted so that
/// equality and ordering are syntactic.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(BTreeMap<LiftedVar, bool>);

impl Assignment {
    pub fn empty() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn singleton(u: LiftedVar, bit: bool) -> Self {
        let mut m = BTreeMap::new();
        m.insert(u, bit);
        Assignment(m)
    }

    /// Builds an assignment from pairs, failing on a repeated variable.
    pub fn from_pairs<I, V>(pairs: I) -> Result<Self, LiftError>
    where
        I: IntoIterator<Item = (V, bool)>,
        V: Into<LiftedVar>,
    {
        let mut m = BTreeMap::new();
        for (u, b) in pairs {
            let u = u.into();
            if m.insert(u.clone(), b).is_some() {
                return Err(LiftError::AssignmentClash(u));
            }
        }
        Ok(Assignment(m))
    }

    pub fn get(&self, u: &LiftedVar) -> Option<bool> {
        self.0.get(u).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<LiftedVar> {
        self.0.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LiftedVar, bool)> {
        self.0.iter().map(|(u, b)| (u, *b))
    }

    pub fn with(&self, u: LiftedVar, bit: bool) -> Self {
        let mut m = self.0.clone();
        m.insert(u, bit);
        Assignment(m)
    }

    pub fn without(&self, u: &LiftedVar) -> Self {
        let mut m = self.0.clone();
        m.remove(u);
        Assignment(m)
    }

    /// Union of assignments with disjoint domains.
    pub fn union(&self, other: &Assignment) -> Result<Assignment, LiftError> {
        let mut m = self.0.clone();
        for (u, b) in &other.0 {
            if m.insert(u.clone(), *b).is_some() {
                return Err(LiftError::AssignmentClash(u.clone()));
            }
        }
        Ok(Assignment(m))
    }

    /// True when the two assignments agree on their common domain.
    pub fn compatible(&self, other: &Assignment) -> bool {
        self.0.iter().all(|(u, b)| other.0.get(u).is_none_or(|c| c == b))
    }

    /// True when `other` binds every variable of `self` to the same bit.
    pub fn is_sub_of(&self, other: &Assignment) -> bool {
        self.0.iter().all(|(u, b)| other.0.get(u) == Some(b))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (u, b)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}={}", u, u8::from(*b))?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<&str, u8> = self.0.iter().map(|(u, b)| (u.name(), u8::from(*b))).collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m: BTreeMap<String, u8> = BTreeMap::deserialize(d)?;
        Ok(Assignment(m.into_iter().map(|(u, b)| (LiftedVar(u), b != 0)).collect()))
    }
}

/// A finite-support bijection, used for renaming lifted variables and labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perm<K: Ord> {
    fwd: BTreeMap<K, K>,
}

impl<K: Ord + Clone> Perm<K> {
    pub fn identity() -> Self {
        Perm { fwd: BTreeMap::new() }
    }

    /// Extends the injective map `pairs` (source, target) to a bijection.
    ///
    /// Targets that are not themselves sources are sent back to the sources
    /// that are not targets, in sorted order. Returns `None` if `pairs` is not
    /// injective.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (K, K)>) -> Option<Self> {
        let mut fwd = BTreeMap::new();
        let mut image = BTreeSet::new();
        for (a, b) in pairs {
            if let Some(prev) = fwd.get(&a) {
                if *prev != b {
                    return None;
                }
                continue;
            }
            if !image.insert(b.clone()) {
                return None;
            }
            fwd.insert(a, b);
        }
        let sources_only: Vec<K> = fwd.keys().filter(|k| !image.contains(*k)).cloned().collect();
        let targets_only: Vec<K> = image.iter().filter(|k| !fwd.contains_key(*k)).cloned().collect();
        for (t, s) in targets_only.into_iter().zip(sources_only) {
            fwd.insert(t, s);
        }
        fwd.retain(|a, b| a != b);
        Some(Perm { fwd })
    }

    pub fn apply(&self, k: &K) -> K {
        self.fwd.get(k).cloned().unwrap_or_else(|| k.clone())
    }

    pub fn inverse(&self) -> Self {
        Perm { fwd: self.fwd.iter().map(|(a, b)| (b.clone(), a.clone())).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.fwd.keys()
    }
}

/// Objects whose lifted variables can be renamed.
pub trait RenameLifted {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self;
}

impl RenameLifted for LiftedVar {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        pi.apply(self)
    }
}

impl RenameLifted for Assignment {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        Assignment(self.0.iter().map(|(u, b)| (pi.apply(u), *b)).collect())
    }
}

/// Binary tree over lifted variables; `Leaf` is the empty tree.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LiftingTree {
    Leaf,
    Node(LiftedVar, Box<LiftingTree>, Box<LiftingTree>),
}

impl LiftingTree {
    pub fn node(u: impl Into<LiftedVar>, zero: LiftingTree, one: LiftingTree) -> Self {
        LiftingTree::Node(u.into(), Box::new(zero), Box::new(one))
    }

    /// The tree `<u; ε, ε>`.
    pub fn single(u: impl Into<LiftedVar>) -> Self {
        LiftingTree::node(u, LiftingTree::Leaf, LiftingTree::Leaf)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, LiftingTree::Leaf)
    }

    /// Checks that no node variable occurs in its own subtrees.
    pub fn check_well_formed(&self) -> Result<(), LiftError> {
        match self {
            LiftingTree::Leaf => Ok(()),
            LiftingTree::Node(u, t0, t1) => {
                t0.check_well_formed()?;
                t1.check_well_formed()?;
                if t0.contains_var(u) || t1.contains_var(u) {
                    return Err(LiftError::IllFormedTree(u.clone()));
                }
                Ok(())
            }
        }
    }

    pub fn contains_var(&self, v: &LiftedVar) -> bool {
        match self {
            LiftingTree::Leaf => false,
            LiftingTree::Node(u, t0, t1) => u == v || t0.contains_var(v) || t1.contains_var(v),
        }
    }

    /// All variables of the tree, `V(t)`.
    pub fn vars(&self) -> BTreeSet<LiftedVar> {
        self.var_set(&Assignment::empty())
    }

    /// The variables on the branches selected by `a`, `V_a(t)`.
    pub fn var_set(&self, a: &Assignment) -> BTreeSet<LiftedVar> {
        let mut out = BTreeSet::new();
        self.collect_vars(a, &mut out);
        out
    }

    fn collect_vars(&self, a: &Assignment, out: &mut BTreeSet<LiftedVar>) {
        if let LiftingTree::Node(u, t0, t1) = self {
            out.insert(u.clone());
            match a.get(u) {
                Some(false) => t0.collect_vars(a, out),
                Some(true) => t1.collect_vars(a, out),
                None => {
                    t0.collect_vars(a, out);
                    t1.collect_vars(a, out);
                }
            }
        }
    }

    /// Variables in pre-order (root, zero subtree, one subtree), each once.
    pub fn binders(&self) -> Vec<LiftedVar> {
        fn go(t: &LiftingTree, out: &mut Vec<LiftedVar>) {
            if let LiftingTree::Node(u, t0, t1) = t {
                if !out.contains(u) {
                    out.push(u.clone());
                }
                go(t0, out);
                go(t1, out);
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            LiftingTree::Leaf => 1,
            LiftingTree::Node(_, t0, t1) => t0.leaf_count() + t1.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            LiftingTree::Leaf => 0,
            LiftingTree::Node(_, t0, t1) => 1 + t0.depth().max(t1.depth()),
        }
    }

    /// The assignment set `A_t`.
    pub fn assignment_set(&self) -> BTreeSet<Assignment> {
        match self {
            LiftingTree::Leaf => BTreeSet::from([Assignment::empty()]),
            LiftingTree::Node(u, t0, t1) => {
                let a0 = t0.assignment_set();
                let a1 = t1.assignment_set();
                let mut out = BTreeSet::new();
                for a in &a0 {
                    out.insert(a.clone());
                    out.insert(a.with(u.clone(), false));
                }
                for b in &a1 {
                    out.insert(b.clone());
                    out.insert(b.with(u.clone(), true));
                }
                out
            }
        }
    }

    /// Membership in `A_t` without enumerating the set.
    pub fn admits(&self, a: &Assignment) -> bool {
        match self {
            LiftingTree::Leaf => a.is_empty(),
            LiftingTree::Node(u, t0, t1) => match a.get(u) {
                Some(false) => t0.admits(&a.without(u)),
                Some(true) => t1.admits(&a.without(u)),
                None => t0.admits(a) || t1.admits(a),
            },
        }
    }

    /// The path set `P_t`, in ascending order of the canonical assignments.
    pub fn path_set(&self) -> Vec<Assignment> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect_paths(Assignment::empty(), &mut out);
        out.sort();
        out
    }

    /// Paths in leaf (pre-order) position.
    fn collect_paths(&self, prefix: Assignment, out: &mut Vec<Assignment>) {
        match self {
            LiftingTree::Leaf => out.push(prefix),
            LiftingTree::Node(u, t0, t1) => {
                t0.collect_paths(prefix.with(u.clone(), false), out);
                t1.collect_paths(prefix.with(u.clone(), true), out);
            }
        }
    }

    /// Paths in leaf position order.
    pub fn leaf_paths(&self) -> Vec<Assignment> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect_paths(Assignment::empty(), &mut out);
        out
    }

    /// The paths `P_t^a` extending `a`.
    pub fn extending_paths(&self, a: &Assignment) -> Result<Vec<Assignment>, LiftError> {
        if !self.admits(a) {
            return Err(LiftError::InvalidBranch(a.clone()));
        }
        Ok(self.path_set().into_iter().filter(|p| a.is_sub_of(p)).collect())
    }

    pub fn is_path(&self, a: &Assignment) -> bool {
        match self {
            LiftingTree::Leaf => a.is_empty(),
            LiftingTree::Node(u, t0, t1) => match a.get(u) {
                Some(false) => t0.is_path(&a.without(u)),
                Some(true) => t1.is_path(&a.without(u)),
                None => false,
            },
        }
    }

    /// The subtree reached by following `a` from the root, as far as `a` is
    /// defined on the node variables.
    pub fn subtree_at(&self, a: &Assignment) -> &LiftingTree {
        match self {
            LiftingTree::Leaf => self,
            LiftingTree::Node(u, t0, t1) => match a.get(u) {
                Some(false) => t0.subtree_at(a),
                Some(true) => t1.subtree_at(a),
                None => self,
            },
        }
    }

    /// `t ⋉_a r`: grafts a copy of `r` at every path extending `a`.
    pub fn graft(&self, a: &Assignment, r: &LiftingTree) -> Result<LiftingTree, LiftError> {
        let shape = LiftedObject::from_tree(self, ());
        Ok(shape.graft_with(a, |_, _| Ok(LiftedObject::from_tree(r, ())))?.tree())
    }
}

impl fmt::Display for LiftingTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftingTree::Leaf => f.write_str("_"),
            LiftingTree::Node(u, t0, t1) => write!(f, "<{} ? {} | {}>", u, t0, t1),
        }
    }
}

impl fmt::Debug for LiftingTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl RenameLifted for LiftingTree {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            LiftingTree::Leaf => LiftingTree::Leaf,
            LiftingTree::Node(u, t0, t1) => {
                LiftingTree::Node(pi.apply(u), Box::new(t0.rename_lifted(pi)), Box::new(t1.rename_lifted(pi)))
            }
        }
    }
}

impl Serialize for LiftingTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LiftedObject::from_tree(self, ()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LiftingTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(LiftedObject::<()>::deserialize(d)?.tree())
    }
}

/// An element of `K_t(X)`: the tree `t` with one `X` at each leaf.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LiftedObject<X> {
    Leaf(X),
    Node(LiftedVar, Box<LiftedObject<X>>, Box<LiftedObject<X>>),
}

/// Leaf of an object awaiting flattening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Nested<X> {
    Plain(X),
    Lifted(LiftedObject<X>),
}

impl<X> LiftedObject<X> {
    pub fn leaf(x: X) -> Self {
        LiftedObject::Leaf(x)
    }

    pub fn node(u: impl Into<LiftedVar>, zero: Self, one: Self) -> Self {
        LiftedObject::Node(u.into(), Box::new(zero), Box::new(one))
    }

    /// Copies the shape of `t`, putting `x` at every leaf.
    pub fn from_tree(t: &LiftingTree, x: X) -> Self
    where
        X: Clone,
    {
        match t {
            LiftingTree::Leaf => LiftedObject::Leaf(x),
            LiftingTree::Node(u, t0, t1) => LiftedObject::Node(
                u.clone(),
                Box::new(Self::from_tree(t0, x.clone())),
                Box::new(Self::from_tree(t1, x)),
            ),
        }
    }

    /// Builds an object over `t` by calling `f` on each path.
    pub fn from_fn<E>(t: &LiftingTree, mut f: impl FnMut(&Assignment) -> Result<X, E>) -> Result<Self, E> {
        fn go<X, E>(
            t: &LiftingTree,
            prefix: Assignment,
            f: &mut impl FnMut(&Assignment) -> Result<X, E>,
        ) -> Result<LiftedObject<X>, E> {
            match t {
                LiftingTree::Leaf => Ok(LiftedObject::Leaf(f(&prefix)?)),
                LiftingTree::Node(u, t0, t1) => Ok(LiftedObject::Node(
                    u.clone(),
                    Box::new(go(t0, prefix.with(u.clone(), false), f)?),
                    Box::new(go(t1, prefix.with(u.clone(), true), f)?),
                )),
            }
        }
        go(t, Assignment::empty(), &mut f)
    }

    pub fn tree(&self) -> LiftingTree {
        match self {
            LiftedObject::Leaf(_) => LiftingTree::Leaf,
            LiftedObject::Node(u, o0, o1) => LiftingTree::Node(u.clone(), Box::new(o0.tree()), Box::new(o1.tree())),
        }
    }

    pub fn as_leaf(&self) -> Option<&X> {
        match self {
            LiftedObject::Leaf(x) => Some(x),
            LiftedObject::Node(..) => None,
        }
    }

    /// Value at path `a`; `a` may bind extra variables.
    pub fn lookup(&self, a: &Assignment) -> Option<&X> {
        match self {
            LiftedObject::Leaf(x) => Some(x),
            LiftedObject::Node(u, o0, o1) => match a.get(u)? {
                false => o0.lookup(a),
                true => o1.lookup(a),
            },
        }
    }

    pub fn lookup_mut(&mut self, a: &Assignment) -> Option<&mut X> {
        match self {
            LiftedObject::Leaf(x) => Some(x),
            LiftedObject::Node(u, o0, o1) => match a.get(u)? {
                false => o0.lookup_mut(a),
                true => o1.lookup_mut(a),
            },
        }
    }

    /// Sub-object reached by following `a` as far as it is defined.
    pub fn subobject_at(&self, a: &Assignment) -> &LiftedObject<X> {
        match self {
            LiftedObject::Leaf(_) => self,
            LiftedObject::Node(u, o0, o1) => match a.get(u) {
                Some(false) => o0.subobject_at(a),
                Some(true) => o1.subobject_at(a),
                None => self,
            },
        }
    }

    /// Leaves paired with their paths, in leaf order.
    pub fn entries(&self) -> Vec<(Assignment, &X)> {
        fn go<'a, X>(o: &'a LiftedObject<X>, prefix: Assignment, out: &mut Vec<(Assignment, &'a X)>) {
            match o {
                LiftedObject::Leaf(x) => out.push((prefix, x)),
                LiftedObject::Node(u, o0, o1) => {
                    go(o0, prefix.with(u.clone(), false), out);
                    go(o1, prefix.with(u.clone(), true), out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, Assignment::empty(), &mut out);
        out
    }

    pub fn leaves(&self) -> Vec<&X> {
        self.entries().into_iter().map(|(_, x)| x).collect()
    }

    pub fn into_leaves(self) -> Vec<X> {
        fn go<X>(o: LiftedObject<X>, out: &mut Vec<X>) {
            match o {
                LiftedObject::Leaf(x) => out.push(x),
                LiftedObject::Node(_, o0, o1) => {
                    go(*o0, out);
                    go(*o1, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn map<Y>(&self, mut f: impl FnMut(&X) -> Y) -> LiftedObject<Y> {
        fn go<X, Y>(o: &LiftedObject<X>, f: &mut impl FnMut(&X) -> Y) -> LiftedObject<Y> {
            match o {
                LiftedObject::Leaf(x) => LiftedObject::Leaf(f(x)),
                LiftedObject::Node(u, o0, o1) => {
                    LiftedObject::Node(u.clone(), Box::new(go(o0, f)), Box::new(go(o1, f)))
                }
            }
        }
        go(self, &mut f)
    }

    /// Maps every leaf together with its path, stopping at the first error.
    pub fn try_map_paths<Y, E>(
        &self,
        mut f: impl FnMut(&Assignment, &X) -> Result<Y, E>,
    ) -> Result<LiftedObject<Y>, E> {
        fn go<X, Y, E>(
            o: &LiftedObject<X>,
            prefix: Assignment,
            f: &mut impl FnMut(&Assignment, &X) -> Result<Y, E>,
        ) -> Result<LiftedObject<Y>, E> {
            match o {
                LiftedObject::Leaf(x) => Ok(LiftedObject::Leaf(f(&prefix, x)?)),
                LiftedObject::Node(u, o0, o1) => Ok(LiftedObject::Node(
                    u.clone(),
                    Box::new(go(o0, prefix.with(u.clone(), false), f)?),
                    Box::new(go(o1, prefix.with(u.clone(), true), f)?),
                )),
            }
        }
        go(self, Assignment::empty(), &mut f)
    }

    pub fn try_map<Y, E>(&self, mut f: impl FnMut(&X) -> Result<Y, E>) -> Result<LiftedObject<Y>, E> {
        self.try_map_paths(|_, x| f(x))
    }

    /// `ξ ⊲ {x_a}`: overwrites the leaves at the paths in `family`.
    pub fn compose(&self, family: &BTreeMap<Assignment, X>) -> Result<LiftedObject<X>, LiftError>
    where
        X: Clone,
    {
        let t = self.tree();
        if let Some(bad) = family.keys().find(|a| !t.is_path(a)) {
            return Err(LiftError::InvalidBranch(bad.clone()));
        }
        self.try_map_paths(|p, x| Ok(family.get(p).cloned().unwrap_or_else(|| x.clone())))
    }

    /// `ξ ⋉_a r`: replaces each leaf at a path extending `a` by the lifted
    /// object `f(path, leaf)` and flattens.
    pub fn graft_with(
        &self,
        a: &Assignment,
        mut f: impl FnMut(&Assignment, &X) -> Result<LiftedObject<X>, LiftError>,
    ) -> Result<LiftedObject<X>, LiftError>
    where
        X: Clone,
    {
        let t = self.tree();
        if !t.admits(a) {
            return Err(LiftError::InvalidBranch(a.clone()));
        }
        let nested = self.try_map_paths(|p, x| {
            if a.is_sub_of(p) {
                Ok(Nested::Lifted(f(p, x)?))
            } else {
                Ok(Nested::Plain(x.clone()))
            }
        })?;
        flatten(nested)
    }
}

impl<X: Clone> LiftedObject<X> {
    /// Leaf values in ascending path order, matching [`LiftingTree::path_set`].
    pub fn path_values(&self) -> Vec<(Assignment, X)> {
        let mut v: Vec<(Assignment, X)> = self.entries().into_iter().map(|(a, x)| (a, x.clone())).collect();
        v.sort_by(|l, r| l.0.cmp(&r.0));
        v
    }
}

/// `⌊ξ⌋`: unfolds lifted-object leaves into subtrees.
///
/// Implements the accumulator form `⌊·⌋^V` with `V` the variables seen on the
/// way down; a nested object must not reuse any of them.
pub fn flatten<X>(xi: LiftedObject<Nested<X>>) -> Result<LiftedObject<X>, LiftError> {
    fn go<X>(
        o: LiftedObject<Nested<X>>,
        seen: &mut Vec<LiftedVar>,
        path: &Assignment,
    ) -> Result<LiftedObject<X>, LiftError> {
        match o {
            LiftedObject::Leaf(Nested::Plain(x)) => Ok(LiftedObject::Leaf(x)),
            LiftedObject::Leaf(Nested::Lifted(y)) => {
                if let Some(v) = y.tree().vars().into_iter().find(|v| seen.contains(v)) {
                    return Err(LiftError::VariableClash { var: v, path: path.clone() });
                }
                Ok(y)
            }
            LiftedObject::Node(u, o0, o1) => {
                seen.push(u.clone());
                let r0 = go(*o0, seen, &path.with(u.clone(), false));
                let r1 = r0.and_then(|r0| Ok((r0, go(*o1, seen, &path.with(u.clone(), true))?)));
                seen.pop();
                let (r0, r1) = r1?;
                Ok(LiftedObject::Node(u, Box::new(r0), Box::new(r1)))
            }
        }
    }
    go(xi, &mut Vec::new(), &Assignment::empty())
}

impl<X: RenameLifted> RenameLifted for LiftedObject<X> {
    fn rename_lifted(&self, pi: &Perm<LiftedVar>) -> Self {
        match self {
            LiftedObject::Leaf(x) => LiftedObject::Leaf(x.rename_lifted(pi)),
            LiftedObject::Node(u, o0, o1) => {
                LiftedObject::Node(pi.apply(u), Box::new(o0.rename_lifted(pi)), Box::new(o1.rename_lifted(pi)))
            }
        }
    }
}

impl RenameLifted for () {
    fn rename_lifted(&self, _: &Perm<LiftedVar>) -> Self {}
}

impl<X: fmt::Debug> fmt::Debug for LiftedObject<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftedObject::Leaf(x) => write!(f, "leaf({:?})", x),
            LiftedObject::Node(u, o0, o1) => write!(f, "<{}; {:?}, {:?}>", u, o0, o1),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ObjectRepr<X> {
    Leaf { leaf: X },
    Node { var: LiftedVar, zero: Box<ObjectRepr<X>>, one: Box<ObjectRepr<X>> },
}

impl<X: Clone> ObjectRepr<X> {
    fn from_object(o: &LiftedObject<X>) -> Self {
        match o {
            LiftedObject::Leaf(x) => ObjectRepr::Leaf { leaf: x.clone() },
            LiftedObject::Node(u, o0, o1) => ObjectRepr::Node {
                var: u.clone(),
                zero: Box::new(Self::from_object(o0)),
                one: Box::new(Self::from_object(o1)),
            },
        }
    }
}

impl<X> ObjectRepr<X> {
    fn into_object(self) -> LiftedObject<X> {
        match self {
            ObjectRepr::Leaf { leaf } => LiftedObject::Leaf(leaf),
            ObjectRepr::Node { var, zero, one } => {
                LiftedObject::Node(var, Box::new(zero.into_object()), Box::new(one.into_object()))
            }
        }
    }
}

impl<X: Serialize + Clone> Serialize for LiftedObject<X> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObjectRepr::from_object(self).serialize(s)
    }
}

impl<'de, X: Deserialize<'de>> Deserialize<'de> for LiftedObject<X> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(ObjectRepr::deserialize(d)?.into_object())
    }
}
