//! Staged nominal sets: finitely supported elements presented stage by
//! stage.
//!
//! Elements are concrete values carrying a structural permutation action;
//! the atoms occurring in a value over-approximate its support, and the
//! least support is computed by a swap test against a fresh atom. A staged
//! set lists, for every finite set of atoms `A`, the elements supported by
//! `A`. That single table serves two purposes: it is the evident
//! set-of-elements view, and reading it along the stages `{a0..a(n-1)}`
//! with injective renamings between them presents the same data as a
//! presheaf on the injections category. The bridges in this module move
//! between that presentation, its species of exact-support elements over
//! bijections, and the colimit that rebuilds a staged set from an
//! arbitrary presheaf of injections.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::atoms::{atom, Atom, AtomSet, Perm, Renaming};
use crate::finset::{IndexCat, Mor};
use crate::lambda::{enumerate_terms, LamTerm};
use crate::presheaf::{extend_by_subsets, NatTrans, Stability, TruncPresheaf};

/// Errors raised by the staged-set bridges.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum NomError {
    /// A truncated colimit could not be read out consistently within the
    /// stage bound.
    #[error("truncated enumeration is unstable: {0}")]
    TruncationUnstable(String),
    /// A map required to preserve least supports failed to do so.
    #[error("map is not support-preserving: {0}")]
    NotSupportPreserving(String),
}

// ---------------------------------------------------------------------------
// Values and their action

/// A concrete element of a staged nominal set.
///
/// The permutation action is structural: it renames every atom occurring in
/// the value and leaves discrete payloads alone.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    /// An element of a discrete set; the action is trivial.
    Disc(usize),
    /// An atom.
    At(Atom),
    /// An ordered tuple.
    Tuple(Vec<Value>),
    /// A finite set of values.
    Set(BTreeSet<Value>),
    /// A λ-term; the action renames its free atoms.
    Term(LamTerm),
    /// A tagged value, for coproducts.
    Tag(u8, Box<Value>),
    /// A substitution class `x[γ]`, stored canonically: the support of the
    /// head is re-indexed to the initial atoms in the least possible way.
    /// The atoms of the head are bound by the class and do not contribute
    /// to its support.
    Cls(Box<ClsData>),
}

/// The canonical representative of a substitution class: a head value and
/// the substituted values listed by support atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClsData {
    pub x: Value,
    pub gamma: Vec<(Atom, Value)>,
}

/// Elements of staged nominal sets are plain values.
pub type NomElement = Value;

impl Value {
    /// Applies a permutation structurally.
    pub fn perm(&self, p: &Perm) -> Value {
        self.rename(&|a| p.apply(a))
    }

    /// Applies an atom map structurally. Callers must pass maps that are
    /// injective on the atoms of the value, so that set cardinalities and
    /// distinctness are preserved.
    pub fn rename(&self, f: &dyn Fn(Atom) -> Atom) -> Value {
        match self {
            Value::Disc(k) => Value::Disc(*k),
            Value::At(a) => Value::At(f(*a)),
            Value::Tuple(vs) => Value::Tuple(vs.iter().map(|v| v.rename(f)).collect()),
            Value::Set(s) => {
                let out: BTreeSet<Value> = s.iter().map(|v| v.rename(f)).collect();
                debug_assert_eq!(out.len(), s.len(), "renaming collapsed a set value");
                Value::Set(out)
            }
            Value::Term(t) => {
                let pairs: Vec<(Atom, Atom)> = t.free_atoms().iter().map(|a| (a, f(a))).collect();
                Value::Term(t.ren_act(&Renaming::from_pairs(&pairs)))
            }
            Value::Tag(k, v) => Value::Tag(*k, Box::new(v.rename(f))),
            Value::Cls(c) => {
                let x = c.x.rename(f);
                let gamma = c.gamma.iter().map(|(a, v)| (f(*a), v.rename(f))).collect();
                cls_value(x, gamma)
            }
        }
    }

    /// All atoms occurring in the value: an over-approximation of its
    /// support.
    pub fn atoms(&self) -> AtomSet {
        match self {
            Value::Disc(_) => AtomSet::new(),
            Value::At(a) => [*a].into_iter().collect(),
            Value::Tuple(vs) => vs.iter().fold(AtomSet::new(), |acc, v| acc.union(&v.atoms())),
            Value::Set(s) => s.iter().fold(AtomSet::new(), |acc, v| acc.union(&v.atoms())),
            Value::Term(t) => t.free_atoms(),
            Value::Tag(_, v) => v.atoms(),
            Value::Cls(c) => c
                .gamma
                .iter()
                .fold(c.x.atoms(), |acc, (a, v)| acc.union(&v.atoms()).union(&[*a].into_iter().collect())),
        }
    }
}

/// Builds a substitution-class value in canonical form.
///
/// The keys of `gamma` must be exactly the support of `x`. The class is
/// invariant under re-indexing the head's support, so the canonical form
/// renames that support onto the initial atoms, choosing the least result
/// among all such re-indexings.
pub fn cls_value(x: Value, gamma: Vec<(Atom, Value)>) -> Value {
    let supp = least_support(&x);
    let keys: AtomSet = gamma.iter().map(|(a, _)| *a).collect();
    assert_eq!(keys, supp, "class map must be indexed by the head's support");
    let srcs: Vec<Atom> = supp.iter().collect();
    let k = srcs.len();
    let by_src: BTreeMap<Atom, Value> = gamma.into_iter().collect();
    let mut best: Option<ClsData> = None;
    for p in Perm::enumerate(&AtomSet::stage(k as u32)) {
        let map: BTreeMap<Atom, Atom> = srcs
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, p.apply(atom(i as u32))))
            .collect();
        let x2 = x.rename(&|a| *map.get(&a).unwrap_or(&a));
        let g2: BTreeMap<Atom, Value> = by_src.iter().map(|(s, v)| (map[s], v.clone())).collect();
        let cand = ClsData {
            x: x2,
            gamma: g2.into_iter().collect(),
        };
        if best.as_ref().map(|b| cand < *b).unwrap_or(true) {
            best = Some(cand);
        }
    }
    Value::Cls(Box::new(best.expect("at least the identity re-indexing")))
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Disc(k) => write!(f, "#{k}"),
            Value::At(a) => write!(f, "{a}"),
            Value::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Value::Set(s) => {
                write!(f, "{{")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
            Value::Term(t) => write!(f, "{t}"),
            Value::Tag(k, v) => match k {
                0 => write!(f, "inl {v}"),
                1 => write!(f, "inr {v}"),
                _ => write!(f, "in{k} {v}"),
            },
            Value::Cls(c) => {
                write!(f, "{}[", c.x)?;
                for (i, (a, v)) in c.gamma.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}↦{v}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// The value representing a finite set of atoms.
pub fn set_value(a: &AtomSet) -> Value {
    Value::Set(a.iter().map(Value::At).collect())
}

/// The atom set named by a set-of-atoms value.
pub fn value_set(v: &Value) -> AtomSet {
    match v {
        Value::Set(s) => s
            .iter()
            .map(|e| match e {
                Value::At(a) => *a,
                other => panic!("not a set of atoms: {other}"),
            })
            .collect(),
        other => panic!("not a set value: {other}"),
    }
}

/// A pair value.
pub fn pair_value(x: Value, y: Value) -> Value {
    Value::Tuple(vec![x, y])
}

fn first_fresh(avoid: &AtomSet) -> Atom {
    (0..).map(atom).find(|a| !avoid.contains(*a)).unwrap()
}

/// The least support of a value, by the swap test: an atom `a` occurring
/// in the value belongs to the support exactly when swapping `a` with a
/// fresh atom changes the value.
pub fn least_support(v: &Value) -> AtomSet {
    let over = v.atoms();
    let b = first_fresh(&over);
    let mut out = AtomSet::new();
    for a in over.iter() {
        if v.perm(&Perm::swap(a, b)) != *v {
            out.insert(a);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Staged sets

/// A staged nominal set: for every finite atom set, the finite list of
/// elements it supports.
///
/// Each constructor describes a set whose enumeration is monotone in the
/// stage and compatible with intersections, so the staged table is a
/// faithful presentation of the whole set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StagedNomSet {
    /// A discrete finite set with the trivial action.
    Disc(usize),
    /// The set of atoms.
    Atoms,
    /// Tuples of `k` pairwise distinct atoms.
    InjTuples(usize),
    /// All `k`-tuples of atoms.
    Tuples(usize),
    /// Finite sets of atoms of size at most the cap.
    FinSets(usize),
    /// λ-terms of depth at most the bound, up to α-equivalence.
    Lambda(usize),
    /// Pairs, with the componentwise action.
    Product(Box<StagedNomSet>, Box<StagedNomSet>),
    /// A tagged disjoint union.
    Coproduct(Box<StagedNomSet>, Box<StagedNomSet>),
    /// Pairs whose components have disjoint least supports.
    FreshProduct(Box<StagedNomSet>, Box<StagedNomSet>),
    /// Pairs whose components have equal least supports.
    EqProduct(Box<StagedNomSet>, Box<StagedNomSet>),
    /// Pairs `(x, A)` where the declared atom set `A` supports `x`.
    Writer(Box<StagedNomSet>),
    /// The substitution tensor: classes `x[γ]` with `γ` defined on the
    /// support of `x` and taking pairwise fresh values.
    Subst(Box<StagedNomSet>, Box<StagedNomSet>),
    /// The capture-permitting variant: no freshness constraint on `γ`.
    Captureful(Box<StagedNomSet>, Box<StagedNomSet>),
    /// The uniform tensor: substitution classes whose values lie in a
    /// single orbit.
    Uniform(Box<StagedNomSet>, Box<StagedNomSet>),
}

/// The separated product of two staged sets.
pub fn fresh_product(x: &StagedNomSet, y: &StagedNomSet) -> StagedNomSet {
    StagedNomSet::FreshProduct(Box::new(x.clone()), Box::new(y.clone()))
}

impl StagedNomSet {
    /// All elements supported by the given atom set, in a deterministic
    /// order.
    pub fn enumerate(&self, stage: &AtomSet) -> Vec<Value> {
        match self {
            StagedNomSet::Disc(n) => (0..*n).map(Value::Disc).collect(),
            StagedNomSet::Atoms => stage.iter().map(Value::At).collect(),
            StagedNomSet::InjTuples(k) => atom_tuples(stage, *k, true),
            StagedNomSet::Tuples(k) => atom_tuples(stage, *k, false),
            StagedNomSet::FinSets(cap) => stage
                .subsets()
                .into_iter()
                .filter(|s| s.len() <= *cap)
                .map(|s| set_value(&s))
                .collect(),
            StagedNomSet::Lambda(depth) => {
                enumerate_terms(*depth, stage).into_iter().map(Value::Term).collect()
            }
            StagedNomSet::Product(x, y) => {
                let ys = y.enumerate(stage);
                x.enumerate(stage)
                    .into_iter()
                    .flat_map(|v| ys.iter().map(move |w| pair_value(v.clone(), w.clone())))
                    .collect()
            }
            StagedNomSet::Coproduct(x, y) => x
                .enumerate(stage)
                .into_iter()
                .map(|v| Value::Tag(0, Box::new(v)))
                .chain(y.enumerate(stage).into_iter().map(|v| Value::Tag(1, Box::new(v))))
                .collect(),
            StagedNomSet::FreshProduct(x, y) => {
                let ys: Vec<(Value, AtomSet)> =
                    y.enumerate(stage).into_iter().map(|v| (v.clone(), least_support(&v))).collect();
                let mut out = Vec::new();
                for v in x.enumerate(stage) {
                    let sv = least_support(&v);
                    for (w, sw) in &ys {
                        if sv.is_disjoint(sw) {
                            out.push(pair_value(v.clone(), w.clone()));
                        }
                    }
                }
                out
            }
            StagedNomSet::EqProduct(x, y) => {
                let ys: Vec<(Value, AtomSet)> =
                    y.enumerate(stage).into_iter().map(|v| (v.clone(), least_support(&v))).collect();
                let mut out = Vec::new();
                for v in x.enumerate(stage) {
                    let sv = least_support(&v);
                    for (w, sw) in &ys {
                        if sv == *sw {
                            out.push(pair_value(v.clone(), w.clone()));
                        }
                    }
                }
                out
            }
            StagedNomSet::Writer(x) => {
                let mut out = Vec::new();
                for b in stage.subsets() {
                    for v in x.enumerate(&b) {
                        out.push(pair_value(v, set_value(&b)));
                    }
                }
                out
            }
            StagedNomSet::Subst(x, y) => {
                crate::subst::enumerate_tensor(x, y, crate::subst::TensorKind::Fresh, stage)
            }
            StagedNomSet::Captureful(x, y) => {
                crate::subst::enumerate_tensor(x, y, crate::subst::TensorKind::Captureful, stage)
            }
            StagedNomSet::Uniform(x, y) => {
                crate::subst::enumerate_tensor(x, y, crate::subst::TensorKind::Uniform, stage)
            }
        }
    }

    /// An upper bound on the size of element supports, when one exists.
    pub fn supp_bound(&self) -> Option<usize> {
        match self {
            StagedNomSet::Disc(_) => Some(0),
            StagedNomSet::Atoms => Some(1),
            StagedNomSet::InjTuples(k) | StagedNomSet::Tuples(k) => Some(*k),
            StagedNomSet::FinSets(cap) => Some(*cap),
            StagedNomSet::Lambda(d) => Some(1 << d),
            StagedNomSet::Product(x, y) | StagedNomSet::FreshProduct(x, y) => {
                Some(x.supp_bound()? + y.supp_bound()?)
            }
            StagedNomSet::Coproduct(x, y) => Some(x.supp_bound()?.max(y.supp_bound()?)),
            StagedNomSet::EqProduct(x, y) => Some(x.supp_bound()?.min(y.supp_bound()?)),
            StagedNomSet::Writer(_) => None,
            StagedNomSet::Subst(x, y)
            | StagedNomSet::Captureful(x, y)
            | StagedNomSet::Uniform(x, y) => Some(x.supp_bound()? * y.supp_bound()?),
        }
    }

    /// The presentation of the staged set as a presheaf on the injections
    /// category, tabulated up to the stage bound.
    pub fn to_presheaf(&self, bound: usize) -> TruncPresheaf {
        let elems: Vec<Vec<Value>> =
            (0..=bound).map(|n| self.enumerate(&AtomSet::stage(n as u32))).collect();
        let pos: Vec<BTreeMap<Value, usize>> = elems
            .iter()
            .map(|es| es.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
            .collect();
        let labels: Vec<Vec<String>> =
            elems.iter().map(|es| es.iter().map(|v| v.to_string()).collect()).collect();
        TruncPresheaf::from_fn(IndexCat::I, bound, labels, |f: &Mor, x: usize| {
            let moved = elems[f.dom][x].rename(&|a: Atom| atom(f.table[a.0 as usize] as u32));
            *pos[f.cod]
                .get(&moved)
                .unwrap_or_else(|| panic!("renamed element left the staged set: {moved}"))
        })
    }

    /// The registry name of the set, accepted back by `by_name` for the
    /// flat members.
    pub fn name(&self) -> String {
        match self {
            StagedNomSet::Disc(n) => format!("{n}"),
            StagedNomSet::Atoms => "A".to_string(),
            StagedNomSet::InjTuples(k) => format!("A*{k}"),
            StagedNomSet::Tuples(k) => format!("A^{k}"),
            StagedNomSet::FinSets(cap) => format!("PfA@{cap}"),
            StagedNomSet::Lambda(d) => format!("Lam@depth{d}"),
            StagedNomSet::Product(x, y) => format!("({}×{})", x.name(), y.name()),
            StagedNomSet::Coproduct(x, y) => format!("({}+{})", x.name(), y.name()),
            StagedNomSet::FreshProduct(x, y) => format!("({}*{})", x.name(), y.name()),
            StagedNomSet::EqProduct(x, y) => format!("({}×={})", x.name(), y.name()),
            StagedNomSet::Writer(x) => format!("R({})", x.name()),
            StagedNomSet::Subst(x, y) => format!("({}◇{})", x.name(), y.name()),
            StagedNomSet::Captureful(x, y) => format!("({}◇^{})", x.name(), y.name()),
            StagedNomSet::Uniform(x, y) => format!("({}⊗{})", x.name(), y.name()),
        }
    }

    /// Looks up a flat registry name such as `A`, `A*2`, `A^2`, `PfA@3`,
    /// `Lam@depth2`, or a number for a discrete set.
    pub fn by_name(name: &str) -> Option<StagedNomSet> {
        if name == "A" {
            return Some(StagedNomSet::Atoms);
        }
        if let Some(k) = name.strip_prefix("A*").and_then(|s| s.parse().ok()) {
            return Some(StagedNomSet::InjTuples(k));
        }
        if let Some(k) = name.strip_prefix("A^").and_then(|s| s.parse().ok()) {
            return Some(StagedNomSet::Tuples(k));
        }
        if let Some(c) = name.strip_prefix("PfA@").and_then(|s| s.parse().ok()) {
            return Some(StagedNomSet::FinSets(c));
        }
        if let Some(d) = name.strip_prefix("Lam@depth").and_then(|s| s.parse().ok()) {
            return Some(StagedNomSet::Lambda(d));
        }
        name.parse().ok().map(StagedNomSet::Disc)
    }

    /// The standard corpus the law suites quantify over.
    pub fn corpus() -> Vec<StagedNomSet> {
        let a = || Box::new(StagedNomSet::Atoms);
        vec![
            StagedNomSet::Disc(2),
            StagedNomSet::Atoms,
            StagedNomSet::InjTuples(2),
            StagedNomSet::Tuples(2),
            StagedNomSet::FinSets(2),
            StagedNomSet::Lambda(2),
            StagedNomSet::Product(a(), Box::new(StagedNomSet::Disc(2))),
            StagedNomSet::Coproduct(Box::new(StagedNomSet::Disc(1)), a()),
            StagedNomSet::FreshProduct(a(), a()),
            StagedNomSet::EqProduct(a(), a()),
            StagedNomSet::Writer(a()),
        ]
    }
}

fn atom_tuples(stage: &AtomSet, k: usize, distinct: bool) -> Vec<Value> {
    let atoms: Vec<Atom> = stage.iter().collect();
    let mut out: Vec<Vec<Atom>> = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                atoms
                    .iter()
                    .filter(|a| !distinct || !t.contains(a))
                    .map(|a| {
                        let mut t2 = t.clone();
                        t2.push(*a);
                        t2
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out.into_iter().map(|t| Value::Tuple(t.into_iter().map(Value::At).collect())).collect()
}

/// Representatives of the orbits of the permutations of a stage on the
/// elements it supports, paired with the orbit sizes. Each representative
/// is the least value of its orbit.
pub fn orbit_reps(x: &StagedNomSet, stage: &AtomSet) -> Vec<(Value, usize)> {
    let perms = Perm::enumerate(stage);
    let mut elems = x.enumerate(stage);
    elems.sort();
    let mut seen: BTreeSet<Value> = BTreeSet::new();
    let mut out = Vec::new();
    for v in elems {
        if seen.contains(&v) {
            continue;
        }
        let orbit: BTreeSet<Value> = perms.iter().map(|p| v.perm(p)).collect();
        out.push((v, orbit.len()));
        seen.extend(orbit);
    }
    out
}

// ---------------------------------------------------------------------------
// Maps

/// A map between staged sets, given by a rule on values.
#[derive(Clone)]
pub struct EquivariantMap {
    pub dom: StagedNomSet,
    pub cod: StagedNomSet,
    map: Rc<dyn Fn(&Value) -> Value>,
}

impl EquivariantMap {
    pub fn new(
        dom: StagedNomSet,
        cod: StagedNomSet,
        map: impl Fn(&Value) -> Value + 'static,
    ) -> EquivariantMap {
        EquivariantMap { dom, cod, map: Rc::new(map) }
    }

    pub fn apply(&self, v: &Value) -> Value {
        (self.map)(v)
    }

    /// Exhaustively checks equivariance over the permutations of a stage;
    /// returns a description of the first failure.
    pub fn check_equivariance(&self, stage: &AtomSet) -> Option<String> {
        let perms = Perm::enumerate(stage);
        for v in self.dom.enumerate(stage) {
            for p in &perms {
                let one = self.apply(&v.perm(p));
                let two = self.apply(&v).perm(p);
                if one != two {
                    return Some(format!("at {v} under {p}: {one} ≠ {two}"));
                }
            }
        }
        None
    }

    /// Whether the map preserves least supports on every element of a
    /// stage.
    pub fn is_support_preserving(&self, stage: &AtomSet) -> bool {
        self.dom
            .enumerate(stage)
            .iter()
            .all(|v| least_support(&self.apply(v)) == least_support(v))
    }
}

// ---------------------------------------------------------------------------
// Supported sets

/// An element of a supported set: a value with an explicitly declared
/// support, which must contain the least support but may be larger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuppSetElem {
    pub value: Value,
    pub support: AtomSet,
}

impl SuppSetElem {
    pub fn new(value: Value, support: AtomSet) -> SuppSetElem {
        SuppSetElem { value, support }
    }

    /// Whether the declared support really supports the value.
    pub fn well_formed(&self) -> bool {
        least_support(&self.value).is_subset(&self.support)
    }
}

/// The morphism condition for supported sets: declared supports may only
/// shrink along the map.
pub fn check_supported_morphism(
    elems: &[SuppSetElem],
    f: &dyn Fn(&SuppSetElem) -> SuppSetElem,
) -> bool {
    elems.iter().all(|e| f(e).support.is_subset(&e.support))
}

// ---------------------------------------------------------------------------
// The injections bridge

/// The presheaf presentation of a staged set, stage by stage.
pub fn i_star(x: &StagedNomSet, bound: usize) -> TruncPresheaf {
    x.to_presheaf(bound)
}

/// The least support of an element of a presheaf of injections, by the
/// swap test one stage up: the i-th atom is in the support exactly when
/// routing it to a fresh atom disagrees with the plain stage inclusion.
/// Requires headroom, `n < bound`.
pub fn psh_support(f: &TruncPresheaf, n: usize, x: usize) -> AtomSet {
    assert_eq!(f.cat, IndexCat::I, "support tests live over injections");
    assert!(n < f.bound, "support tests need one fresh stage of headroom");
    let pushed = f.act(&Mor::new(n, n + 1, (0..n).collect()), x);
    let mut out = AtomSet::new();
    for i in 0..n {
        let mut table: Vec<usize> = (0..n).collect();
        table[i] = n;
        if f.act(&Mor::new(n, n + 1, table), x) != pushed {
            out.insert(atom(i as u32));
        }
    }
    out
}

/// The result of rebuilding a staged set from a presheaf of injections.
pub struct Nominalized {
    /// The rebuilt staged set, read back out as a presheaf on injections:
    /// stage `n` lists the colimit classes supported by the first `n`
    /// atoms. The top stage lists every class once, in class order.
    pub presheaf: TruncPresheaf,
    /// Whether the class counts agree with the same computation one stage
    /// bound lower.
    pub stability: Stability,
    /// The least support of each class, indexed like the top stage.
    pub supports: Vec<AtomSet>,
}

struct NomTab {
    presheaf: TruncPresheaf,
    supports: Vec<AtomSet>,
}

fn span(a: &AtomSet) -> usize {
    a.iter().last().map_or(0, |m| m.0 as usize + 1)
}

/// The morphism of skeletal stages induced by an atom map defined on the
/// carrier `a` with image `b`: positions in `a` go to positions in `b`.
fn carrier_mor(a: &AtomSet, b: &AtomSet, f: &dyn Fn(Atom) -> Atom) -> Mor {
    let bs: Vec<Atom> = b.iter().collect();
    let table = a
        .iter()
        .map(|x| bs.iter().position(|y| *y == f(x)).expect("image atom outside target carrier"))
        .collect();
    Mor::new(a.len(), b.len(), table)
}

fn i_upper_tab(f: &TruncPresheaf) -> Result<NomTab, NomError> {
    assert_eq!(f.cat, IndexCat::I, "nominalization starts from a presheaf of injections");
    let bound = f.bound;
    let universe = AtomSet::stage(bound as u32);
    let subs = universe.subsets();
    let mut offset: BTreeMap<AtomSet, usize> = BTreeMap::new();
    let mut total = 0usize;
    for s in &subs {
        offset.insert(s.clone(), total);
        total += f.size(s.len());
    }
    let node = |a: &AtomSet, x: usize| offset[a] + x;

    // Glue each carrier into each one-atom extension.
    let mut uf = crate::presheaf::UnionFind::new(total);
    for b in &subs {
        for c in b.iter() {
            let mut a = b.clone();
            a.remove(c);
            let inc = carrier_mor(&a, b, &|x| x);
            for x in 0..f.size(a.len()) {
                uf.union(node(&a, x), node(b, f.act(&inc, x)));
            }
        }
    }

    // Classes in order of first occurrence; `subs` is sorted by size then
    // lexicographically, so each class's first node is its minimal
    // representative.
    let mut class_of = vec![usize::MAX; total];
    let mut reps: Vec<(AtomSet, usize)> = Vec::new();
    let mut nodes_of: Vec<Vec<(AtomSet, usize)>> = Vec::new();
    let mut root_to_class: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &subs {
        for x in 0..f.size(s.len()) {
            let root = uf.find(node(s, x));
            let c = *root_to_class.entry(root).or_insert_with(|| {
                reps.push((s.clone(), x));
                nodes_of.push(Vec::new());
                reps.len() - 1
            });
            class_of[node(s, x)] = c;
            nodes_of[c].push((s.clone(), x));
        }
    }

    // Least support per class, by the swap test on the minimal
    // representative when a fresh atom is available in the universe.
    let mut supports = Vec::with_capacity(reps.len());
    for (c, (a, x)) in reps.iter().enumerate() {
        if a.len() == bound {
            supports.push(a.clone());
            continue;
        }
        let fresh = first_fresh(a);
        debug_assert!(universe.contains(fresh));
        let mut supp = AtomSet::new();
        for at in a.iter() {
            let p = Perm::swap(at, fresh);
            let image: AtomSet = a.iter().map(|y| p.apply(y)).collect();
            let w = carrier_mor(a, &image, &|y| p.apply(y));
            if class_of[node(&image, f.act(&w, *x))] != c {
                supp.insert(at);
            }
        }
        supports.push(supp);
    }

    // The stage read-out lists a class once its support fits the stage,
    // and transports it along injections through a node inside the stage.
    // A class whose support fits a stage holding none of its nodes cannot
    // be transported there; that only happens when the source fails the
    // intersection property, and is reported rather than approximated.
    let node_span: Vec<usize> =
        nodes_of.iter().map(|ns| ns.iter().map(|(a, _)| span(a)).min().unwrap()).collect();
    for (c, supp) in supports.iter().enumerate() {
        if span(supp) < node_span[c] {
            let (a, x) = &reps[c];
            return Err(NomError::TruncationUnstable(format!(
                "class [{}·{}] has support {} but no presentation below stage {}",
                a,
                f.label(a.len(), *x),
                supp,
                node_span[c],
            )));
        }
    }

    let stage_classes: Vec<Vec<usize>> = (0..=bound)
        .map(|n| (0..reps.len()).filter(|&c| node_span[c] <= n).collect())
        .collect();
    let stage_pos: Vec<BTreeMap<usize, usize>> = stage_classes
        .iter()
        .map(|cs| cs.iter().enumerate().map(|(i, &c)| (c, i)).collect())
        .collect();
    let labels: Vec<Vec<String>> = stage_classes
        .iter()
        .map(|cs| {
            cs.iter()
                .map(|&c| {
                    let (a, x) = &reps[c];
                    format!("[{}·{}]", a, f.label(a.len(), *x))
                })
                .collect()
        })
        .collect();
    let presheaf = TruncPresheaf::from_fn(IndexCat::I, bound, labels, |u: &Mor, p: usize| {
        let c = stage_classes[u.dom][p];
        let (a, x) = nodes_of[c]
            .iter()
            .find(|(a, _)| span(a) <= u.dom)
            .expect("read-out listed a class without a node in the stage");
        let rename = |at: Atom| atom(u.table[at.0 as usize] as u32);
        let image: AtomSet = a.iter().map(rename).collect();
        let w = carrier_mor(a, &image, &rename);
        stage_pos[u.cod][&class_of[node(&image, f.act(&w, *x))]]
    });
    Ok(NomTab { presheaf, supports })
}

/// Rebuilds a staged set from a presheaf of injections: the colimit of the
/// presheaf over all carriers inside the truncation universe, with classes
/// read back out stage by stage.
pub fn i_upper(f: &TruncPresheaf) -> Result<Nominalized, NomError> {
    let tab = i_upper_tab(f)?;
    let stability = if f.bound == 0 {
        Stability::Stable
    } else {
        match i_upper_tab(&f.restrict(f.bound - 1)) {
            Err(_) => Stability::TruncationUnstable {
                stage: 0,
                inner: f.bound,
                classes: tab.presheaf.size(0),
                classes_smaller: 0,
            },
            Ok(smaller) => {
                match (0..f.bound).find(|&n| tab.presheaf.size(n) != smaller.presheaf.size(n)) {
                    None => Stability::Stable,
                    Some(n) => Stability::TruncationUnstable {
                        stage: n,
                        inner: f.bound,
                        classes: tab.presheaf.size(n),
                        classes_smaller: smaller.presheaf.size(n),
                    },
                }
            }
        }
    };
    Ok(Nominalized { presheaf: tab.presheaf, stability, supports: tab.supports })
}

// ---------------------------------------------------------------------------
// The species bridge

/// The species of a staged set: stage `n` holds the elements whose least
/// support is exactly the first `n` atoms, with bijections acting by
/// renaming.
pub fn species(x: &StagedNomSet, bound: usize) -> TruncPresheaf {
    let elems: Vec<Vec<Value>> = (0..=bound)
        .map(|n| {
            let stage = AtomSet::stage(n as u32);
            x.enumerate(&stage).into_iter().filter(|v| least_support(v) == stage).collect()
        })
        .collect();
    let pos: Vec<BTreeMap<Value, usize>> = elems
        .iter()
        .map(|es| es.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
        .collect();
    let labels: Vec<Vec<String>> =
        elems.iter().map(|es| es.iter().map(|v| v.to_string()).collect()).collect();
    TruncPresheaf::from_fn(IndexCat::B, bound, labels, |f: &Mor, x: usize| {
        let moved = elems[f.dom][x].rename(&|a: Atom| atom(f.table[a.0 as usize] as u32));
        *pos[f.cod]
            .get(&moved)
            .unwrap_or_else(|| panic!("bijection moved an element out of its species stage"))
    })
}

/// The action of the species construction on a map, defined only when the
/// map preserves least supports.
pub fn species_map(f: &EquivariantMap, bound: usize) -> Result<NatTrans, NomError> {
    let cod = species(&f.cod, bound);
    let mut components = Vec::with_capacity(bound + 1);
    for n in 0..=bound {
        let stage = AtomSet::stage(n as u32);
        let mut comp = Vec::new();
        for v in f.dom.enumerate(&stage) {
            if least_support(&v) != stage {
                continue;
            }
            let w = f.apply(&v);
            let sw = least_support(&w);
            if sw != stage {
                return Err(NomError::NotSupportPreserving(format!(
                    "{v} has support {stage} but its image {w} has support {sw}"
                )));
            }
            let p = (0..cod.size(n))
                .find(|&i| cod.label(n, i) == w.to_string())
                .expect("image element missing from the species of the codomain");
            comp.push(p);
        }
        components.push(comp);
    }
    Ok(NatTrans { components })
}

/// The species of exact-support elements of a presheaf of injections, one
/// stage of headroom below its bound.
pub fn species_of_presheaf(f: &TruncPresheaf) -> TruncPresheaf {
    assert_eq!(f.cat, IndexCat::I);
    assert!(f.bound >= 1);
    let bound = f.bound - 1;
    let members: Vec<Vec<usize>> = (0..=bound)
        .map(|n| {
            let stage = AtomSet::stage(n as u32);
            (0..f.size(n)).filter(|&x| psh_support(f, n, x) == stage).collect()
        })
        .collect();
    let pos: Vec<BTreeMap<usize, usize>> = members
        .iter()
        .map(|ms| ms.iter().enumerate().map(|(i, &x)| (x, i)).collect())
        .collect();
    let labels: Vec<Vec<String>> = members
        .iter()
        .enumerate()
        .map(|(n, ms)| ms.iter().map(|&x| f.label(n, x).to_string()).collect())
        .collect();
    TruncPresheaf::from_fn(IndexCat::B, bound, labels, |u: &Mor, x: usize| {
        pos[u.cod][&f.act(u, members[u.dom][x])]
    })
}

/// The staged set collecting one summand per carrier of a presheaf of
/// bijections, presented over injections: at stage `n`, a pair of a
/// sub-carrier and an element over it.
pub fn coprod(f: &TruncPresheaf) -> TruncPresheaf {
    assert_eq!(f.cat, IndexCat::B);
    extend_by_subsets(f, IndexCat::I)
}

// ---------------------------------------------------------------------------
// The writer bridge

/// The unit of the declared-support monad: pairs a value with its least
/// support.
pub fn writer_unit(x: &Value) -> Value {
    pair_value(x.clone(), set_value(&least_support(x)))
}

/// The multiplication of the declared-support monad: flattens a nested
/// declaration to the outer one.
pub fn writer_mult(e: &Value) -> Value {
    match e {
        Value::Tuple(vs) if vs.len() == 2 => match &vs[0] {
            Value::Tuple(inner) if inner.len() == 2 => pair_value(inner[0].clone(), vs[1].clone()),
            other => panic!("not a nested declared pair: {other}"),
        },
        other => panic!("not a declared pair: {other}"),
    }
}

/// The isomorphism from declared pairs to separated pairs: split the
/// declaration into its spare part and the value.
pub fn writer_iso(e: &Value) -> Value {
    match e {
        Value::Tuple(vs) if vs.len() == 2 => {
            let spare = value_set(&vs[1]).difference(&least_support(&vs[0]));
            pair_value(set_value(&spare), vs[0].clone())
        }
        other => panic!("not a declared pair: {other}"),
    }
}

/// The inverse isomorphism: rejoin a spare atom set with the support of
/// the value.
pub fn writer_iso_inv(e: &Value) -> Value {
    match e {
        Value::Tuple(vs) if vs.len() == 2 => {
            let decl = value_set(&vs[0]).union(&least_support(&vs[1]));
            pair_value(vs[1].clone(), set_value(&decl))
        }
        other => panic!("not a separated pair: {other}"),
    }
}

/// The transpose of a map along the declared-support adjunction: records
/// the support of the argument next to the image. The transpose always
/// preserves least supports.
pub fn kleisli_transpose(f: &EquivariantMap) -> EquivariantMap {
    let g = f.clone();
    EquivariantMap::new(
        f.dom.clone(),
        StagedNomSet::Writer(Box::new(f.cod.clone())),
        move |v| pair_value(g.apply(v), set_value(&least_support(v))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::parse;
    use crate::presheaf::{day, nat_iso_search, random_presheaf, DayKind};

    fn at(k: u32) -> Value {
        Value::At(atom(k))
    }

    fn ns(name: &str) -> StagedNomSet {
        StagedNomSet::by_name(name).expect("unknown registry name")
    }

    #[test]
    fn least_support_of_concrete_values() {
        let pair = pair_value(at(0), at(1));
        assert_eq!(least_support(&pair), AtomSet::stage(2));

        let t = Value::Term(parse("λa0. a0 a1").unwrap());
        assert_eq!(least_support(&t), [atom(1)].into_iter().collect());

        assert_eq!(least_support(&Value::Disc(7)), AtomSet::new());
        assert_eq!(
            least_support(&set_value(&AtomSet::stage(3))),
            AtomSet::stage(3)
        );

        let declared = pair_value(at(0), set_value(&AtomSet::stage(2)));
        assert_eq!(least_support(&declared), AtomSet::stage(2));
    }

    #[test]
    fn least_support_is_minimal_and_really_supports() {
        let stage = AtomSet::stage(4);
        // One atom beyond the stage, so that a swap witnessing minimality
        // always has a fresh partner available.
        let perms = Perm::enumerate(&AtomSet::stage(5));
        for x in StagedNomSet::corpus() {
            for v in x.enumerate(&stage) {
                let supp = least_support(&v);
                for p in &perms {
                    if supp.iter().all(|a| p.apply(a) == a) {
                        assert_eq!(v.perm(p), v, "{supp} does not support {v} in {}", x.name());
                    }
                }
                for a in supp.iter() {
                    let rest = {
                        let mut s = supp.clone();
                        s.remove(a);
                        s
                    };
                    assert!(
                        perms
                            .iter()
                            .any(|p| rest.iter().all(|b| p.apply(b) == b) && v.perm(p) != v),
                        "support of {v} in {} is not minimal at {a}",
                        x.name()
                    );
                }
            }
        }
    }

    #[test]
    fn enumerations_are_monotone_and_respect_intersections() {
        let subsets = AtomSet::stage(3).subsets();
        for x in StagedNomSet::corpus() {
            let tables: Vec<BTreeSet<Value>> =
                subsets.iter().map(|a| x.enumerate(a).into_iter().collect()).collect();
            for (i, a) in subsets.iter().enumerate() {
                for (j, b) in subsets.iter().enumerate() {
                    if a.is_subset(b) {
                        assert!(
                            tables[i].is_subset(&tables[j]),
                            "{} is not monotone between {a} and {b}",
                            x.name()
                        );
                    }
                    let meet = a.intersection(b);
                    let k = subsets.iter().position(|s| *s == meet).unwrap();
                    let both: BTreeSet<Value> =
                        tables[i].intersection(&tables[j]).cloned().collect();
                    assert_eq!(
                        both,
                        tables[k],
                        "{} fails the intersection property at {a} and {b}",
                        x.name()
                    );
                }
            }
        }
    }

    #[test]
    fn orbit_representatives_match_hand_counts() {
        let two = AtomSet::stage(2);
        assert_eq!(orbit_reps(&StagedNomSet::Atoms, &two), vec![(at(0), 2)]);

        let sets = orbit_reps(&StagedNomSet::FinSets(2), &two);
        assert_eq!(
            sets,
            vec![
                (set_value(&AtomSet::new()), 1),
                (set_value(&[atom(0)].into_iter().collect()), 2),
                (set_value(&two), 1),
            ]
        );

        let pairs = orbit_reps(&StagedNomSet::InjTuples(2), &AtomSet::stage(3));
        assert_eq!(pairs, vec![(pair_value(at(0), at(1)), 6)]);
    }

    #[test]
    fn staged_sets_present_as_presheaves_of_injections() {
        let atoms = i_star(&StagedNomSet::Atoms, 4);
        let y1 = TruncPresheaf::representable(IndexCat::I, 1, 4);
        assert_eq!(atoms.sizes(), y1.sizes());
        assert!(nat_iso_search(&atoms, &y1).is_some());

        let pairs = i_star(&StagedNomSet::InjTuples(2), 4);
        let y2 = TruncPresheaf::representable(IndexCat::I, 2, 4);
        assert!(nat_iso_search(&pairs, &y2).is_some());

        for (n, x) in [(2usize, 0usize), (3, 1), (3, 4)] {
            let label = pairs.label(n, x).to_string();
            let v = StagedNomSet::InjTuples(2)
                .enumerate(&AtomSet::stage(n as u32))
                .into_iter()
                .find(|v| v.to_string() == label)
                .unwrap();
            assert_eq!(psh_support(&pairs, n, x), least_support(&v));
        }
    }

    #[test]
    fn separated_atom_pairs_count_n_times_n_minus_one() {
        let aa = fresh_product(&StagedNomSet::Atoms, &StagedNomSet::Atoms);
        for n in 0..=4u32 {
            let count = aa.enumerate(&AtomSet::stage(n)).len();
            assert_eq!(count, (n * n.saturating_sub(1)) as usize);
        }

        for x in [StagedNomSet::Atoms, StagedNomSet::FinSets(2)] {
            let unit = fresh_product(&StagedNomSet::Disc(1), &x);
            let lhs = i_star(&unit, 3);
            let rhs = i_star(&x, 3);
            assert_eq!(lhs.sizes(), rhs.sizes());
            assert!(nat_iso_search(&lhs, &rhs).is_some(), "1 * {} is not {}", x.name(), x.name());
        }
    }

    #[test]
    fn separated_products_are_sum_convolutions_of_injections() {
        let cases = [
            (StagedNomSet::Atoms, StagedNomSet::Atoms),
            (StagedNomSet::Atoms, StagedNomSet::FinSets(1)),
            (StagedNomSet::Disc(2), StagedNomSet::InjTuples(2)),
        ];
        for (x, y) in cases {
            let bound = 4;
            let star = i_star(&fresh_product(&x, &y), bound);
            let conv = day(DayKind::Sum, &i_star(&x, bound), &i_star(&y, bound), bound);
            assert_eq!(star.sizes(), conv.presheaf.sizes(), "{} * {}", x.name(), y.name());
            assert!(
                nat_iso_search(&conv.presheaf, &star).is_some(),
                "{} * {} is not the sum convolution",
                x.name(),
                y.name()
            );
        }
    }

    #[test]
    fn nominalization_inverts_the_staged_presentation() {
        for x in [
            StagedNomSet::Atoms,
            StagedNomSet::FinSets(2),
            fresh_product(&StagedNomSet::Atoms, &StagedNomSet::Atoms),
            StagedNomSet::Product(Box::new(StagedNomSet::Atoms), Box::new(StagedNomSet::Disc(2))),
        ] {
            let star = i_star(&x, 4);
            let back = i_upper(&star).expect("nominalization failed");
            assert_eq!(back.stability, Stability::Stable, "{} is unstable", x.name());
            assert_eq!(back.presheaf.sizes(), star.sizes(), "{} sizes changed", x.name());
            assert!(
                nat_iso_search(&back.presheaf, &star).is_some(),
                "round trip is not the identity on {}",
                x.name()
            );
        }
    }

    #[test]
    fn nominalization_of_a_representable_is_injective_tuples() {
        let y2 = TruncPresheaf::representable(IndexCat::I, 2, 4);
        let back = i_upper(&y2).expect("nominalization failed");
        assert_eq!(back.stability, Stability::Stable);
        assert!(back.supports.iter().all(|s| s.len() == 2));
        let pairs = i_star(&StagedNomSet::InjTuples(2), 4);
        assert!(nat_iso_search(&back.presheaf, &pairs).is_some());
    }

    #[test]
    fn collapsing_quotient_is_reported_unstable() {
        let y1 = TruncPresheaf::representable(IndexCat::I, 1, 3);
        let (collapsed, _) = y1.quotient(&[(2, 0, 1)]);
        assert!((1..=3).all(|n| collapsed.size(n) == 1));
        match i_upper(&collapsed) {
            Err(NomError::TruncationUnstable(_)) => {}
            other => panic!("expected a truncation error, got {:?}", other.map(|n| n.presheaf.sizes())),
        }
    }

    #[test]
    fn species_stages_hold_exact_support_elements() {
        assert_eq!(species(&StagedNomSet::Atoms, 3).sizes(), vec![0, 1, 0, 0]);
        assert_eq!(species(&StagedNomSet::InjTuples(2), 3).sizes(), vec![0, 0, 2, 0]);
        assert_eq!(species(&StagedNomSet::FinSets(2), 3).sizes(), vec![1, 1, 1, 0]);
    }

    #[test]
    fn species_and_carrier_sums_are_mutually_inverse() {
        for x in [StagedNomSet::InjTuples(2), StagedNomSet::FinSets(2)] {
            let summed = coprod(&species(&x, 4));
            let star = i_star(&x, 4);
            assert_eq!(summed.sizes(), star.sizes(), "{}", x.name());
            assert!(nat_iso_search(&summed, &star).is_some(), "sum of species of {}", x.name());
        }

        for seed in [1u64, 2, 5] {
            let f = random_presheaf(IndexCat::B, 3, seed);
            let back = species_of_presheaf(&coprod(&f));
            let cut = f.restrict(2);
            assert_eq!(back.sizes(), cut.sizes(), "seed {seed}");
            assert!(nat_iso_search(&back, &cut).is_some(), "species of sum, seed {seed}");
        }
    }

    #[test]
    fn summands_carry_their_carrier_as_support() {
        let f = random_presheaf(IndexCat::B, 3, 9);
        let ext = coprod(&f);
        for n in 0..3usize {
            for a in AtomSet::stage(n as u32).subsets() {
                let count = (0..ext.size(n)).filter(|&x| psh_support(&ext, n, x) == a).count();
                assert_eq!(count, f.size(a.len()), "carrier {a} at stage {n}");
            }
        }
    }

    #[test]
    fn support_preservation_gates_the_species_bridge() {
        let ident =
            EquivariantMap::new(StagedNomSet::Atoms, StagedNomSet::Atoms, |v| v.clone());
        assert!(ident.check_equivariance(&AtomSet::stage(3)).is_none());
        let nat = species_map(&ident, 3).expect("identity should pass");
        let s = species(&StagedNomSet::Atoms, 3);
        assert!(nat.check_naturality(&s, &s).is_none());

        let terminal =
            EquivariantMap::new(StagedNomSet::Atoms, StagedNomSet::Disc(1), |_| Value::Disc(0));
        assert!(terminal.check_equivariance(&AtomSet::stage(3)).is_none());
        assert!(!terminal.is_support_preserving(&AtomSet::stage(1)));
        assert!(matches!(species_map(&terminal, 3), Err(NomError::NotSupportPreserving(_))));

        let pairs = StagedNomSet::Product(
            Box::new(StagedNomSet::Atoms),
            Box::new(StagedNomSet::Atoms),
        );
        let first = EquivariantMap::new(pairs, StagedNomSet::Atoms, |v| match v {
            Value::Tuple(vs) => vs[0].clone(),
            _ => unreachable!(),
        });
        assert!(matches!(species_map(&first, 3), Err(NomError::NotSupportPreserving(_))));
    }

    #[test]
    fn kleisli_transpose_restores_support() {
        let terminal =
            EquivariantMap::new(StagedNomSet::Atoms, StagedNomSet::Disc(1), |_| Value::Disc(0));
        let transposed = kleisli_transpose(&terminal);
        for n in 0..=3u32 {
            let stage = AtomSet::stage(n);
            assert!(transposed.is_support_preserving(&stage));
            assert!(transposed.check_equivariance(&stage).is_none());
            for v in StagedNomSet::Atoms.enumerate(&stage) {
                // Back across the adjunction: the first component restores
                // the original map, and re-transposing restores the pair.
                let w = transposed.apply(&v);
                match &w {
                    Value::Tuple(vs) => {
                        assert_eq!(vs[0], terminal.apply(&v));
                        assert_eq!(value_set(&vs[1]), least_support(&v));
                    }
                    _ => unreachable!(),
                }
                assert_eq!(writer_unit(&terminal.apply(&v)).to_string(), "(#0, {})");
                assert_eq!(w, pair_value(terminal.apply(&v), set_value(&least_support(&v))));
            }
        }

        let r1 = i_star(&StagedNomSet::Writer(Box::new(StagedNomSet::Disc(1))), 4);
        let pf = i_star(&StagedNomSet::FinSets(4), 4);
        assert_eq!(r1.sizes(), pf.sizes());
        assert!(nat_iso_search(&r1, &pf).is_some(), "declared points are not finite atom sets");
    }

    #[test]
    fn declared_support_monad_laws_and_writer_iso() {
        let x = StagedNomSet::Atoms;
        let tx = StagedNomSet::Writer(Box::new(x.clone()));
        let ttx = StagedNomSet::Writer(Box::new(tx.clone()));
        let tttx = StagedNomSet::Writer(Box::new(ttx.clone()));
        let sep = fresh_product(&StagedNomSet::FinSets(3), &x);
        let stage = AtomSet::stage(3);

        for e in tx.enumerate(&stage) {
            assert_eq!(writer_mult(&pair_value(e.clone(), writer_decl(&e))), e);
            let (val, decl) = split_pair(&e);
            assert_eq!(writer_mult(&pair_value(writer_unit(&val), decl.clone())), e);
        }
        for e in tttx.enumerate(&stage) {
            // Flattening the outer two declarations first or the inner two
            // first must agree.
            let (w, c) = split_pair(&e);
            let one = writer_mult(&writer_mult(&e));
            let two = writer_mult(&pair_value(writer_mult(&w), c));
            assert_eq!(one, two);
        }

        let perms = Perm::enumerate(&stage);
        let mut image = BTreeSet::new();
        for e in tx.enumerate(&stage) {
            let w = writer_iso(&e);
            assert_eq!(writer_iso_inv(&w), e, "iso does not invert on {e}");
            for p in &perms {
                assert_eq!(writer_iso(&e.perm(p)), w.perm(p), "iso is not equivariant at {e}");
            }
            // Unit compatibility: least declarations become empty spares.
            let (val, _) = split_pair(&e);
            assert_eq!(writer_iso(&writer_unit(&val)), pair_value(set_value(&AtomSet::new()), val));
            // Multiplication compatibility: flattening declarations matches
            // uniting spare parts.
            let nested = pair_value(e.clone(), set_value(&AtomSet::stage(3)));
            let direct = writer_iso(&writer_mult(&nested));
            let (spare_outer, _) = split_pair(&writer_iso(&nested));
            let (spare_inner, val2) = split_pair(&w);
            let united = pair_value(
                set_value(&value_set(&spare_outer).union(&value_set(&spare_inner))),
                val2,
            );
            assert_eq!(direct, united);
            image.insert(w);
        }
        let separated: BTreeSet<Value> = sep.enumerate(&stage).into_iter().collect();
        assert_eq!(image, separated, "iso is not onto the separated pairs");
    }

    fn split_pair(e: &Value) -> (Value, Value) {
        match e {
            Value::Tuple(vs) if vs.len() == 2 => (vs[0].clone(), vs[1].clone()),
            other => panic!("not a pair: {other}"),
        }
    }

    fn writer_decl(e: &Value) -> Value {
        split_pair(e).1
    }

    #[test]
    fn equal_support_pairs_form_the_equal_support_product() {
        let diag = StagedNomSet::EqProduct(
            Box::new(StagedNomSet::Atoms),
            Box::new(StagedNomSet::Atoms),
        );
        for n in 0..=3u32 {
            let got = diag.enumerate(&AtomSet::stage(n));
            let want: Vec<Value> =
                AtomSet::stage(n).iter().map(|a| pair_value(Value::At(a), Value::At(a))).collect();
            assert_eq!(got, want, "only the diagonal has equal supports");
        }

        let stage = AtomSet::stage(3);
        for e in diag.enumerate(&stage) {
            let (l, r) = split_pair(&e);
            assert_eq!(least_support(&l), least_support(&e));
            assert_eq!(least_support(&r), least_support(&e));
        }

        // The finite atom sets are terminal for support-preserving maps:
        // the support itself is the only candidate image of an element.
        for x in [StagedNomSet::Atoms, StagedNomSet::InjTuples(2), StagedNomSet::Lambda(1)] {
            let to_sets = EquivariantMap::new(x.clone(), StagedNomSet::FinSets(3), |v| {
                set_value(&least_support(v))
            });
            assert!(to_sets.is_support_preserving(&stage));
            assert!(to_sets.check_equivariance(&stage).is_none());
            for v in x.enumerate(&stage) {
                let s = least_support(&v);
                let candidates: Vec<Value> = StagedNomSet::FinSets(3)
                    .enumerate(&stage)
                    .into_iter()
                    .filter(|w| least_support(w) == s)
                    .collect();
                assert_eq!(candidates, vec![set_value(&s)], "two candidate images for {v}");
            }
        }
    }

    #[test]
    fn supported_set_morphisms_shrink_declared_supports() {
        let elems: Vec<SuppSetElem> = StagedNomSet::Atoms
            .enumerate(&AtomSet::stage(3))
            .into_iter()
            .map(|v| SuppSetElem::new(v, AtomSet::stage(3)))
            .collect();
        assert!(elems.iter().all(SuppSetElem::well_formed));
        assert!(!SuppSetElem::new(at(2), AtomSet::stage(1)).well_formed());

        let tighten = |e: &SuppSetElem| SuppSetElem::new(e.value.clone(), least_support(&e.value));
        assert!(check_supported_morphism(&elems, &tighten));
        let widen = |e: &SuppSetElem| SuppSetElem::new(e.value.clone(), AtomSet::stage(4));
        assert!(!check_supported_morphism(&elems, &widen));
    }

    #[test]
    fn registry_names_round_trip() {
        for x in StagedNomSet::corpus() {
            if let Some(back) = StagedNomSet::by_name(&x.name()) {
                assert_eq!(back, x);
            }
        }
        for name in ["A", "A*2", "A^3", "PfA@3", "Lam@depth2", "2"] {
            assert_eq!(ns(name).name(), name);
        }
        assert_eq!(StagedNomSet::by_name("bogus"), None);
    }
}
