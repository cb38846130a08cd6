//! The substitution tensor and its relatives on staged nominal sets.
//!
//! A class `x[γ]` pairs a head `x` with a map `γ` from the support of `x`
//! to values, taken modulo re-indexing the head's support: `(π·x)[γ]` and
//! `x[γ∘π]` name the same class. Three variants share this shape:
//!
//! * the fresh tensor requires the values of `γ` to have pairwise
//!   disjoint supports, which makes atom-headed classes collapse to a
//!   single value and atom-valued classes collapse to a renamed head;
//! * the captureful variant drops the freshness requirement, keeping more
//!   classes and losing the right unit;
//! * the uniform variant keeps only fresh classes whose values lie in a
//!   single orbit, and is symmetric by transposing the matrix of value
//!   supports.
//!
//! Classes are stored canonically inside [`Value::Cls`], so equality of
//! classes is equality of values and the permutation action is the
//! structural one followed by re-canonicalization. [`class_eq`] decides
//! the same relation by a direct search over head re-indexings and is
//! validated against a brute-force closure in the test suite.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use thiserror::Error;

use crate::atoms::{atom, fresh_atoms, Atom, AtomSet, Perm};
use crate::finset::Mor;
use crate::nominal::{
    cls_value, i_star, i_upper, least_support, ClsData, NomError, Nominalized, StagedNomSet, Value,
};
use crate::presheaf::{day, DayKind, DayResult, Stability};

/// Errors from class constructors, reducible maps, and transposition.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SubstError {
    /// Two different support atoms received values sharing an atom.
    #[error("substituted values are not pairwise fresh: {0}")]
    FreshnessViolation(String),
    /// A class map is not indexed by the support of its head, or a value
    /// does not have the shape the operation requires.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    /// A tuple handed to a reducible map misses a position the map reads.
    #[error("tuple does not cover the reduction support: {0}")]
    InsufficientTuple(String),
    /// A rule failed the pointwise-equivariance spot check.
    #[error("map is not equivariant: {0}")]
    NonEquivariant(String),
}

/// Which variant of the tensor an enumeration builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    /// Pairwise fresh values.
    Fresh,
    /// Unconstrained values.
    Captureful,
    /// Pairwise fresh values in a single orbit.
    Uniform,
}

// ---------------------------------------------------------------------------
// Classes

/// The class data behind a class value.
pub fn cls_data(v: &Value) -> Result<&ClsData, SubstError> {
    match v {
        Value::Cls(c) => Ok(c),
        other => Err(SubstError::DomainMismatch(format!(
            "{other} is not a substitution class"
        ))),
    }
}

/// Builds a fresh-tensor class, validating the domain and freshness.
pub fn subst_class(x: &Value, gamma: &BTreeMap<Atom, Value>) -> Result<Value, SubstError> {
    check_domain(x, gamma)?;
    let supports: Vec<(Atom, AtomSet)> =
        gamma.iter().map(|(a, v)| (*a, least_support(v))).collect();
    for (i, (a, sa)) in supports.iter().enumerate() {
        for (b, sb) in supports.iter().skip(i + 1) {
            if !sa.is_disjoint(sb) {
                return Err(SubstError::FreshnessViolation(format!(
                    "values at {a} and {b} share the atoms {}",
                    sa.intersection(sb)
                )));
            }
        }
    }
    Ok(cls_value(x.clone(), gamma.clone().into_iter().collect()))
}

/// Builds a captureful class: the same shape without the freshness
/// requirement.
pub fn captureful_class(x: &Value, gamma: &BTreeMap<Atom, Value>) -> Result<Value, SubstError> {
    check_domain(x, gamma)?;
    Ok(cls_value(x.clone(), gamma.clone().into_iter().collect()))
}

fn check_domain(x: &Value, gamma: &BTreeMap<Atom, Value>) -> Result<(), SubstError> {
    let supp = least_support(x);
    let dom: AtomSet = gamma.keys().copied().collect();
    if dom != supp {
        return Err(SubstError::DomainMismatch(format!(
            "map is indexed by {dom} but the head {x} has support {supp}"
        )));
    }
    Ok(())
}

/// The support of a class: the union of the supports of its values. The
/// head's own atoms are bound by the class and do not appear.
pub fn class_support(c: &Value) -> Result<AtomSet, SubstError> {
    Ok(cls_data(c)?
        .gamma
        .iter()
        .fold(AtomSet::new(), |acc, (_, v)| acc.union(&least_support(v))))
}

/// Decides whether two raw head/map pairs name the same class by
/// searching for a single re-indexing of the heads, without relying on
/// canonical storage.
pub fn class_eq(
    x1: &Value,
    g1: &BTreeMap<Atom, Value>,
    x2: &Value,
    g2: &BTreeMap<Atom, Value>,
) -> bool {
    let s1 = least_support(x1);
    let s2 = least_support(x2);
    if s1.len() != s2.len() {
        return false;
    }
    let src: Vec<Atom> = s1.iter().collect();
    let tgt: Vec<Atom> = s2.iter().collect();
    'outer: for p in Perm::enumerate(&AtomSet::stage(src.len() as u32)) {
        let map: BTreeMap<Atom, Atom> = src
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, tgt[p.apply(atom(i as u32)).0 as usize]))
            .collect();
        if x1.rename(&|a| *map.get(&a).unwrap_or(&a)) != *x2 {
            continue;
        }
        for (a, v) in g1 {
            if g2.get(&map[a]) != Some(v) {
                continue 'outer;
            }
        }
        return true;
    }
    false
}

/// The canonical representative of a value's orbit: the least renaming of
/// its support onto the initial atoms.
pub fn orbit_key(v: &Value) -> Value {
    let srcs: Vec<Atom> = least_support(v).iter().collect();
    let mut best: Option<Value> = None;
    for p in Perm::enumerate(&AtomSet::stage(srcs.len() as u32)) {
        let map: BTreeMap<Atom, Atom> = srcs
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, p.apply(atom(i as u32))))
            .collect();
        let cand = v.rename(&|a| *map.get(&a).unwrap_or(&a));
        if best.as_ref().map(|b| cand < *b).unwrap_or(true) {
            best = Some(cand);
        }
    }
    best.unwrap_or_else(|| v.clone())
}

/// Whether the class's values all lie in a single orbit.
pub fn is_uniform(c: &Value) -> bool {
    match cls_data(c) {
        Ok(d) => {
            let keys: BTreeSet<Value> = d.gamma.iter().map(|(_, v)| orbit_key(v)).collect();
            keys.len() <= 1
        }
        Err(_) => false,
    }
}

/// A support bijection pushing the canonical representative `from` onto
/// `to`, when the two lie in the same orbit.
pub fn find_transport(from: &Value, to: &Value) -> Option<BTreeMap<Atom, Atom>> {
    let src: Vec<Atom> = least_support(from).iter().collect();
    let tgt: Vec<Atom> = least_support(to).iter().collect();
    if src.len() != tgt.len() {
        return None;
    }
    for p in Perm::enumerate(&AtomSet::stage(src.len() as u32)) {
        let map: BTreeMap<Atom, Atom> = src
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, tgt[p.apply(atom(i as u32)).0 as usize]))
            .collect();
        if from.rename(&|a| *map.get(&a).unwrap_or(&a)) == *to {
            return Some(map);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Enumeration

/// Tuples over `dom` with values drawn from the listed elements; when
/// `fresh` is set, the chosen supports must be pairwise disjoint.
fn assignments(
    dom: &[Atom],
    ys: &[(Value, AtomSet)],
    fresh: bool,
) -> Vec<BTreeMap<Atom, Value>> {
    let mut out: Vec<(BTreeMap<Atom, Value>, AtomSet)> = vec![(BTreeMap::new(), AtomSet::new())];
    for a in dom {
        let mut next = Vec::new();
        for (m, used) in &out {
            for (v, sv) in ys {
                if fresh && !used.is_disjoint(sv) {
                    continue;
                }
                let mut m2 = m.clone();
                m2.insert(*a, v.clone());
                next.push((m2, used.union(sv)));
            }
        }
        out = next;
    }
    out.into_iter().map(|(m, _)| m).collect()
}

/// All pairwise-fresh tuples over `dom` with values of `y` supported by
/// the probe stage.
pub fn fresh_tuples(dom: &[Atom], y: &StagedNomSet, probe: &AtomSet) -> Vec<BTreeMap<Atom, Value>> {
    let ys: Vec<(Value, AtomSet)> = y
        .enumerate(probe)
        .into_iter()
        .map(|v| {
            let s = least_support(&v);
            (v, s)
        })
        .collect();
    assignments(dom, &ys, true)
}

/// Enumerates the classes of the chosen tensor that are supported by the
/// stage, in canonical order.
pub fn enumerate_tensor(
    x: &StagedNomSet,
    y: &StagedNomSet,
    kind: TensorKind,
    stage: &AtomSet,
) -> Vec<Value> {
    let bx = x
        .supp_bound()
        .unwrap_or_else(|| panic!("tensor heads from {} need a support bound", x.name()));
    let ys: Vec<(Value, AtomSet)> = y
        .enumerate(stage)
        .into_iter()
        .map(|v| {
            let s = least_support(&v);
            (v, s)
        })
        .collect();
    let mut out: BTreeSet<Value> = BTreeSet::new();
    for k in 0..=bx {
        let base = AtomSet::stage(k as u32);
        let heads: Vec<Value> = x
            .enumerate(&base)
            .into_iter()
            .filter(|v| least_support(v) == base)
            .collect();
        if heads.is_empty() {
            continue;
        }
        let dom: Vec<Atom> = base.iter().collect();
        let maps = assignments(&dom, &ys, kind != TensorKind::Captureful);
        for h in &heads {
            for m in &maps {
                let c = cls_value(h.clone(), m.iter().map(|(a, v)| (*a, v.clone())).collect());
                if kind == TensorKind::Uniform && !is_uniform(&c) {
                    continue;
                }
                out.insert(c);
            }
        }
    }
    out.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Unit and associativity maps

/// The left unit: a class headed by a bare atom holds exactly one value.
pub fn left_unitor(c: &Value) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    match (&d.x, d.gamma.as_slice()) {
        (Value::At(a), [(k, v)]) if k == a => Ok(v.clone()),
        _ => Err(SubstError::DomainMismatch(format!(
            "{c} is not headed by a bare atom"
        ))),
    }
}

/// Inverse of the left unit.
pub fn left_unitor_inv(v: &Value) -> Value {
    cls_value(Value::At(atom(0)), vec![(atom(0), v.clone())])
}

/// The right unit: when every value is a bare atom, the class renames its
/// head along them.
pub fn right_unitor(c: &Value) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let mut map = BTreeMap::new();
    for (a, v) in &d.gamma {
        match v {
            Value::At(b) => {
                map.insert(*a, *b);
            }
            other => {
                return Err(SubstError::DomainMismatch(format!(
                    "value {other} at {a} is not an atom"
                )))
            }
        }
    }
    Ok(d.x.rename(&|a| *map.get(&a).unwrap_or(&a)))
}

/// Inverse of the right unit: substitute each support atom by itself.
pub fn right_unitor_inv(v: &Value) -> Value {
    let gamma = least_support(v).iter().map(|a| (a, Value::At(a))).collect();
    cls_value(v.clone(), gamma)
}

/// Reassociates `(x[γ])[δ]` into `x[a ↦ γ(a)[δ]]`, cutting `δ` to each
/// value's support.
pub fn assoc_forward(c: &Value) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let w = cls_data(&d.x)?;
    let delta: BTreeMap<Atom, Value> = d.gamma.iter().cloned().collect();
    let mut gamma2 = Vec::new();
    for (a, ya) in &w.gamma {
        let cut: Vec<(Atom, Value)> = least_support(ya)
            .iter()
            .map(|b| (b, delta[&b].clone()))
            .collect();
        gamma2.push((*a, cls_value(ya.clone(), cut)));
    }
    Ok(cls_value(w.x.clone(), gamma2))
}

/// Reassociates `x[a ↦ γ(a)[δₐ]]` into `(x[γ'])[δ']`, renaming the inner
/// heads onto pairwise disjoint fresh blocks so the inner maps merge.
pub fn assoc_backward(c: &Value) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let mut used: AtomSet = c.atoms();
    let mut mid = Vec::new();
    let mut delta = Vec::new();
    for (a, v) in &d.gamma {
        let inner = cls_data(v)?;
        let block = fresh_atoms(&used, inner.gamma.len());
        for f in &block {
            used.insert(*f);
        }
        let map: BTreeMap<Atom, Atom> = inner
            .gamma
            .iter()
            .map(|(b, _)| *b)
            .zip(block.iter().copied())
            .collect();
        mid.push((*a, inner.x.rename(&|q| *map.get(&q).unwrap_or(&q))));
        for ((_, z), nb) in inner.gamma.iter().zip(&block) {
            delta.push((*nb, z.clone()));
        }
    }
    let w = cls_value(d.x.clone(), mid);
    Ok(cls_value(w, delta))
}

// ---------------------------------------------------------------------------
// Reducible maps

/// A finitely reducible map into values: it reads a tuple only at the
/// positions in its reduction support, and is acted on by permuting which
/// positions it reads.
#[derive(Clone)]
pub struct ReducibleMap {
    a: AtomSet,
    rule: Rc<dyn Fn(&BTreeMap<Atom, Value>) -> Value>,
}

impl ReducibleMap {
    /// Wraps a rule that reads exactly the positions in `a`.
    pub fn new(a: &AtomSet, rule: Rc<dyn Fn(&BTreeMap<Atom, Value>) -> Value>) -> ReducibleMap {
        ReducibleMap { a: a.clone(), rule }
    }

    /// The constant map, which reads nothing.
    pub fn constant(z: &Value) -> ReducibleMap {
        let z = z.clone();
        ReducibleMap::new(&AtomSet::new(), Rc::new(move |_| z.clone()))
    }

    /// The positions the map reads.
    pub fn reduction_support(&self) -> &AtomSet {
        &self.a
    }

    /// Applies the map to a tuple covering the reduction support.
    pub fn eval(&self, g: &BTreeMap<Atom, Value>) -> Result<Value, SubstError> {
        let mut cut = BTreeMap::new();
        for a in self.a.iter() {
            match g.get(&a) {
                Some(v) => {
                    cut.insert(a, v.clone());
                }
                None => {
                    return Err(SubstError::InsufficientTuple(format!(
                        "missing value at position {a}"
                    )))
                }
            }
        }
        Ok((self.rule)(&cut))
    }

    /// The action on maps: the moved map reads its tuple through the
    /// permutation.
    pub fn precompose(&self, p: &Perm) -> ReducibleMap {
        let rule = self.rule.clone();
        let old = self.a.clone();
        let p = p.clone();
        ReducibleMap::new(
            &p.apply_set(&self.a),
            Rc::new(move |g| {
                let cut: BTreeMap<Atom, Value> =
                    old.iter().map(|a| (a, g[&p.apply(a)].clone())).collect();
                (rule)(&cut)
            }),
        )
    }

    /// The support of the map under the position-permuting action: a
    /// position is in the support when re-reading it from a fresh position
    /// changes some value over the probe stage.
    pub fn support(&self, y: &StagedNomSet, probe: &AtomSet) -> AtomSet {
        let mut out = AtomSet::new();
        let mut beyond = probe.union(&self.a);
        let b = fresh_atoms(&beyond, 1)[0];
        beyond.insert(b);
        for a in self.a.iter() {
            let swapped = self.precompose(&Perm::swap(a, b));
            let mut dom: Vec<Atom> = self.a.iter().collect();
            dom.push(b);
            let moved = fresh_tuples(&dom, y, probe)
                .into_iter()
                .any(|g| self.eval(&g) != swapped.eval(&g));
            if moved {
                out.insert(a);
            }
        }
        out
    }

    /// Whether the map's value is determined by the tuple's restriction
    /// to `b`, over the probe stage.
    pub fn factors_through(&self, b: &AtomSet, y: &StagedNomSet, probe: &AtomSet) -> bool {
        let keep = self.a.intersection(b);
        let dom: Vec<Atom> = self.a.iter().collect();
        let mut buckets: BTreeMap<Vec<(Atom, Value)>, Value> = BTreeMap::new();
        for g in fresh_tuples(&dom, y, probe) {
            let key: Vec<(Atom, Value)> = keep.iter().map(|a| (a, g[&a].clone())).collect();
            let v = self.eval(&g).expect("tuple covers the reduction support");
            match buckets.get(&key) {
                Some(prev) if *prev != v => return false,
                Some(_) => {}
                None => {
                    buckets.insert(key, v);
                }
            }
        }
        true
    }

    /// Spot-checks that the rule commutes with permutations acting on the
    /// values (not the positions) over the probe stage.
    pub fn check_pointwise(&self, y: &StagedNomSet, probe: &AtomSet) -> Result<(), SubstError> {
        let dom: Vec<Atom> = self.a.iter().collect();
        for g in fresh_tuples(&dom, y, probe) {
            for p in Perm::enumerate(probe) {
                let moved: BTreeMap<Atom, Value> =
                    g.iter().map(|(a, v)| (*a, v.perm(&p))).collect();
                if self.eval(&moved)? != self.eval(&g)?.perm(&p) {
                    return Err(SubstError::NonEquivariant(format!(
                        "value at a moved tuple differs from the moved value (permutation {p})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The value table over fresh probe tuples: a finite certificate used
    /// to compare maps.
    pub fn table(&self, y: &StagedNomSet, probe: &AtomSet) -> BTreeMap<Vec<(Atom, Value)>, Value> {
        let dom: Vec<Atom> = self.a.iter().collect();
        fresh_tuples(&dom, y, probe)
            .into_iter()
            .map(|g| {
                let v = self.eval(&g).expect("tuple covers the reduction support");
                (g.into_iter().collect(), v)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Transposition

/// Transposes a class map into a family of reducible maps: the member at
/// `x` reads the support of `x` and applies the map to the class formed
/// from its tuple.
pub fn curry(f: Rc<dyn Fn(&Value) -> Value>, x: &Value) -> ReducibleMap {
    let a = least_support(x);
    let x = x.clone();
    ReducibleMap::new(
        &a,
        Rc::new(move |g| f(&cls_value(x.clone(), g.iter().map(|(k, v)| (*k, v.clone())).collect()))),
    )
}

/// Spot-checks that a class map commutes with the permutation action.
pub fn check_class_equivariance(
    f: &dyn Fn(&Value) -> Value,
    classes: &[Value],
    stage: &AtomSet,
) -> Result<(), SubstError> {
    for c in classes {
        for p in Perm::enumerate(stage) {
            if f(&c.perm(&p)) != f(c).perm(&p) {
                return Err(SubstError::NonEquivariant(format!(
                    "class map does not commute with {p} at {c}"
                )));
            }
        }
    }
    Ok(())
}

/// A deterministic element of `y` supported entirely by atoms outside
/// `avoid`.
fn fresh_value(y: &StagedNomSet, avoid: &AtomSet) -> Value {
    let width = y.supp_bound().expect("bounded supports required").max(1);
    let start = avoid.iter().last().map(|a| a.0 + 1).unwrap_or(0);
    let block: AtomSet = (start..start + width as u32).map(atom).collect();
    y.enumerate(&block)
        .into_iter()
        .next()
        .expect("staged set has an element at every fresh block")
}

/// The other transposition direction: evaluate the family member at the
/// class head on the class map, minting fresh values of `y` for any
/// positions the member reads beyond the recorded ones.
pub fn uncurry(
    g: &dyn Fn(&Value) -> ReducibleMap,
    c: &Value,
    y: &StagedNomSet,
) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let h = g(&d.x);
    let mut gm: BTreeMap<Atom, Value> = d.gamma.iter().cloned().collect();
    let recorded: AtomSet = gm.keys().copied().collect();
    let mut avoid = gm.values().fold(c.atoms(), |acc, v| acc.union(&v.atoms()));
    for a in h.reduction_support().difference(&recorded).iter() {
        let v = fresh_value(y, &avoid);
        avoid = avoid.union(&least_support(&v));
        gm.insert(a, v);
    }
    h.eval(&gm)
}

/// Like [`uncurry`], but missing values are minted inside the orbit of
/// the recorded ones so the extended tuple stays uniform.
pub fn uncurry_uniform(
    g: &dyn Fn(&Value) -> ReducibleMap,
    c: &Value,
    y: &StagedNomSet,
) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let h = g(&d.x);
    let mut gm: BTreeMap<Atom, Value> = d.gamma.iter().cloned().collect();
    let recorded: AtomSet = gm.keys().copied().collect();
    let mut avoid = gm.values().fold(c.atoms(), |acc, v| acc.union(&v.atoms()));
    let template = d.gamma.first().map(|(_, v)| orbit_key(v));
    for a in h.reduction_support().difference(&recorded).iter() {
        let v = match &template {
            Some(t) => {
                let supp = least_support(t);
                let block = fresh_atoms(&avoid, supp.len());
                let map: BTreeMap<Atom, Atom> =
                    supp.iter().zip(block.iter().copied()).collect();
                t.rename(&|q| *map.get(&q).unwrap_or(&q))
            }
            None => fresh_value(y, &avoid),
        };
        avoid = avoid.union(&least_support(&v));
        gm.insert(a, v);
    }
    h.eval(&gm)
}

/// Simultaneous substitution packaged as a map on classes of terms.
pub fn bind_class(c: &Value) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    let t = match &d.x {
        Value::Term(t) => t.clone(),
        other => {
            return Err(SubstError::DomainMismatch(format!(
                "head {other} is not a term"
            )))
        }
    };
    let mut m = BTreeMap::new();
    for (a, v) in &d.gamma {
        match v {
            Value::Term(s) => {
                m.insert(*a, s.clone());
            }
            other => {
                return Err(SubstError::DomainMismatch(format!(
                    "value {other} at {a} is not a term"
                )))
            }
        }
    }
    Ok(Value::Term(t.subst_sim(&m)))
}

// ---------------------------------------------------------------------------
// The uniform tensor

/// The transpose of a uniform class: heads and values swap roles through
/// the matrix of value supports. When the class records no values (the
/// head has empty support), the transpose heads over to the partner's
/// canonical orbit representative; that case is canonical only when the
/// partner has a single orbit.
pub fn uniform_symmetry(c: &Value, y: &StagedNomSet) -> Result<Value, SubstError> {
    let d = cls_data(c)?;
    if !is_uniform(c) {
        return Err(SubstError::DomainMismatch(format!(
            "{c} is not a uniform class"
        )));
    }
    if d.gamma.is_empty() {
        let cap = y
            .supp_bound()
            .ok_or_else(|| SubstError::DomainMismatch("partner set is unbounded".to_string()))?;
        let mut keys: BTreeSet<Value> = y
            .enumerate(&AtomSet::stage(cap as u32))
            .iter()
            .map(orbit_key)
            .collect();
        if keys.len() != 1 {
            return Err(SubstError::DomainMismatch(format!(
                "partner {} has {} orbits, so the value-free class {c} has no canonical transpose",
                y.name(),
                keys.len()
            )));
        }
        let y0 = keys.pop_first().expect("one orbit");
        let gamma = least_support(&y0).iter().map(|b| (b, d.x.clone())).collect();
        return Ok(cls_value(y0, gamma));
    }
    let y0 = orbit_key(&d.gamma[0].1);
    let cols: Vec<Atom> = least_support(&y0).iter().collect();
    let mut rows = Vec::new();
    for (a, v) in &d.gamma {
        let map = find_transport(&y0, v).ok_or_else(|| {
            SubstError::DomainMismatch(format!("value at {a} leaves the common orbit"))
        })?;
        rows.push((*a, map));
    }
    let mut gamma2 = Vec::new();
    for b in &cols {
        let col: BTreeMap<Atom, Atom> = rows.iter().map(|(a, m)| (*a, m[b])).collect();
        gamma2.push((*b, d.x.rename(&|q| *col.get(&q).unwrap_or(&q))));
    }
    Ok(cls_value(y0, gamma2))
}

/// The uniform tensor computed through the presheaf engine: convolve the
/// staged presentations over the product structure of stages, then read
/// the convolution back as a table of classes with supports.
pub fn uniform_from_presheaf(
    x: &StagedNomSet,
    y: &StagedNomSet,
    bound: usize,
) -> Result<(DayResult, Nominalized), NomError> {
    let fx = i_star(x, bound);
    let fy = i_star(y, bound);
    let d = day(DayKind::Product, &fx, &fy, bound);
    if let Stability::TruncationUnstable {
        stage,
        inner,
        classes,
        classes_smaller,
    } = d.stability
    {
        return Err(NomError::TruncationUnstable(format!(
            "convolution unstable at stage {stage}: {classes} classes at inner bound {inner} against {classes_smaller} below"
        )));
    }
    let nom = i_upper(&d.presheaf)?;
    Ok((d, nom))
}

/// Locates a uniform class inside the convolution at stage `n`: the class
/// of the span built from the head, the value-orbit representative, and
/// the matrix of value supports. Classes that record no values pick the
/// least populated partner stage, which is canonical only when the
/// partner has a single orbit there.
pub fn uniform_day_class(
    c: &Value,
    x: &StagedNomSet,
    y: &StagedNomSet,
    d: &DayResult,
    n: usize,
) -> Option<usize> {
    let data = cls_data(c).ok()?;
    if data.gamma.is_empty() {
        let xa = position(&x.enumerate(&AtomSet::new()), &data.x)?;
        for b in 0..=d.inner_bound {
            if !y.enumerate(&AtomSet::stage(b as u32)).is_empty() {
                let mor = Mor::new(0, n, Vec::new());
                return d.class_of_parts(n, 0, b, &mor, xa, 0);
            }
        }
        return None;
    }
    let a = data.gamma.len();
    let xa = position(&x.enumerate(&AtomSet::stage(a as u32)), &data.x)?;
    let y0 = orbit_key(&data.gamma[0].1);
    let cols: Vec<Atom> = least_support(&y0).iter().collect();
    let b = cols.len();
    let yb = position(&y.enumerate(&AtomSet::stage(b as u32)), &y0)?;
    let mut table = vec![0usize; a * b];
    for (i, (_, v)) in data.gamma.iter().enumerate() {
        let map = find_transport(&y0, v)?;
        for (j, col) in cols.iter().enumerate() {
            table[i * b + j] = map[col].0 as usize;
        }
    }
    let mor = Mor::new(a * b, n, table);
    d.class_of_parts(n, a, b, &mor, xa, yb)
}

fn position(values: &[Value], v: &Value) -> Option<usize> {
    values.iter().position(|w| w == v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::{enumerate_terms, parse, LamTerm};
    use crate::nominal::{pair_value, set_value};
    use crate::presheaf::{nat_iso_search, UnionFind};

    fn st(n: u32) -> AtomSet {
        AtomSet::stage(n)
    }

    fn a(k: u32) -> Atom {
        atom(k)
    }

    fn at(k: u32) -> Value {
        Value::At(atom(k))
    }

    fn pair(i: u32, j: u32) -> Value {
        Value::Tuple(vec![at(i), at(j)])
    }

    fn set(ks: &[u32]) -> Value {
        set_value(&ks.iter().map(|k| atom(*k)).collect())
    }

    fn gmap(entries: &[(u32, Value)]) -> BTreeMap<Atom, Value> {
        entries.iter().map(|(k, v)| (atom(*k), v.clone())).collect()
    }

    #[test]
    fn constructors_validate_domains_and_freshness() {
        let head = set(&[0, 1]);
        let wrong_dom = gmap(&[(0, at(2))]);
        assert!(matches!(
            subst_class(&head, &wrong_dom),
            Err(SubstError::DomainMismatch(_))
        ));
        let clash = gmap(&[(0, at(2)), (1, at(2))]);
        assert!(matches!(
            subst_class(&head, &clash),
            Err(SubstError::FreshnessViolation(_))
        ));
        assert!(captureful_class(&head, &clash).is_ok());
        let ok = subst_class(&head, &gmap(&[(0, at(2)), (1, at(3))])).unwrap();
        assert_eq!(ok.to_string(), "{a0, a1}[a0↦a2, a1↦a3]");
        assert_eq!(class_support(&ok).unwrap(), [a(2), a(3)].into_iter().collect());
    }

    #[test]
    fn class_identities_ignore_head_re_indexings() {
        let v1 = pair(2, 3);
        let v2 = pair(4, 5);
        let c1 = subst_class(&set(&[0, 1]), &gmap(&[(0, v1.clone()), (1, v2.clone())])).unwrap();
        let c2 = subst_class(&set(&[6, 7]), &gmap(&[(6, v1.clone()), (7, v2.clone())])).unwrap();
        let c3 = subst_class(&set(&[0, 1]), &gmap(&[(1, v1.clone()), (0, v2.clone())])).unwrap();
        assert_eq!(c1, c2, "the head atoms are bound by the class");
        assert_eq!(c1, c3, "an unordered head cannot tell its atoms apart");

        let tup = Value::Tuple(vec![at(0), at(1)]);
        let d1 = subst_class(&tup, &gmap(&[(0, v1.clone()), (1, v2.clone())])).unwrap();
        let d2 = subst_class(&tup, &gmap(&[(0, v2.clone()), (1, v1.clone())])).unwrap();
        assert_ne!(d1, d2, "an ordered head distinguishes its positions");

        assert!(class_eq(
            &set(&[0, 1]),
            &gmap(&[(0, v1.clone()), (1, v2.clone())]),
            &set(&[6, 7]),
            &gmap(&[(6, v1.clone()), (7, v2.clone())])
        ));
        assert!(!class_eq(
            &tup,
            &gmap(&[(0, v1.clone()), (1, v2.clone())]),
            &tup,
            &gmap(&[(0, v2), (1, v1)])
        ));
    }

    #[test]
    fn canonical_equality_matches_the_closure_oracle() {
        // Nodes: raw head/map pairs with heads anywhere in a widened stage
        // and values in the target stage. Edges: every permutation of the
        // widened stage, acting on the head and precomposing the map. The
        // resulting connected components are the ground truth for class
        // equality.
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::Atoms;
        let wide = st(5);
        let stage = st(3);
        let ys: Vec<(Value, AtomSet)> = y
            .enumerate(&stage)
            .into_iter()
            .map(|v| {
                let s = least_support(&v);
                (v, s)
            })
            .collect();
        let mut nodes: Vec<(Value, BTreeMap<Atom, Value>)> = Vec::new();
        for h in x.enumerate(&wide) {
            let dom: Vec<Atom> = least_support(&h).iter().collect();
            for m in assignments(&dom, &ys, true) {
                nodes.push((h.clone(), m));
            }
        }
        let index: BTreeMap<(Value, Vec<(Atom, Value)>), usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, (h, m))| ((h.clone(), m.iter().map(|(k, v)| (*k, v.clone())).collect()), i))
            .collect();
        let mut uf = UnionFind::new(nodes.len());
        for p in Perm::enumerate(&wide) {
            for (i, (h, m)) in nodes.iter().enumerate() {
                let h2 = h.perm(&p);
                let moved: BTreeMap<Atom, Value> =
                    m.iter().map(|(k, v)| (p.apply(*k), v.clone())).collect();
                let m2: Vec<(Atom, Value)> = moved.into_iter().collect();
                let j = index[&(h2, m2)];
                uf.union(i, j);
            }
        }
        let mut roots = BTreeSet::new();
        for i in 0..nodes.len() {
            roots.insert(uf.find(i));
        }
        let listed = enumerate_tensor(&x, &y, TensorKind::Fresh, &stage);
        assert_eq!(roots.len(), listed.len(), "one canonical class per component");

        for (i, (h1, m1)) in nodes.iter().enumerate() {
            for (j, (h2, m2)) in nodes.iter().enumerate().skip(i) {
                let same = uf.find(i) == uf.find(j);
                assert_eq!(
                    class_eq(h1, m1, h2, m2),
                    same,
                    "search disagrees with closure on nodes {i}, {j}"
                );
                assert_eq!(
                    subst_class(h1, m1).unwrap() == subst_class(h2, m2).unwrap(),
                    same,
                    "canonical forms disagree with closure on nodes {i}, {j}"
                );
            }
        }
    }

    #[test]
    fn action_and_support_laws_hold_on_every_class() {
        let pairs = [
            (StagedNomSet::FinSets(2), StagedNomSet::Atoms),
            (StagedNomSet::Atoms, StagedNomSet::InjTuples(2)),
            (StagedNomSet::InjTuples(2), StagedNomSet::FinSets(1)),
        ];
        let stage = st(4);
        let perms = Perm::enumerate(&stage);
        let mut seen = 0;
        for (x, y) in &pairs {
            for c in enumerate_tensor(x, y, TensorKind::Fresh, &stage) {
                seen += 1;
                let d = cls_data(&c).unwrap();
                assert_eq!(
                    class_support(&c).unwrap(),
                    least_support(&c),
                    "the value-union formula is the least support of {c}"
                );
                for p in &perms {
                    let via_values = cls_value(
                        d.x.clone(),
                        d.gamma.iter().map(|(k, v)| (*k, v.perm(p))).collect(),
                    );
                    assert_eq!(c.perm(p), via_values, "the action moves only the values");
                }
            }
        }
        assert!(seen >= 40, "only {seen} classes exercised");

        let c = subst_class(&set(&[0]), &gmap(&[(0, pair(1, 2))])).unwrap();
        assert_eq!(class_support(&c).unwrap(), [a(1), a(2)].into_iter().collect());
    }

    #[test]
    fn tensor_enumerations_are_monotone_and_respect_intersections() {
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::Atoms;
        let subsets = st(3).subsets();
        for s in &subsets {
            for t in &subsets {
                let es: BTreeSet<Value> =
                    enumerate_tensor(&x, &y, TensorKind::Fresh, s).into_iter().collect();
                let et: BTreeSet<Value> =
                    enumerate_tensor(&x, &y, TensorKind::Fresh, t).into_iter().collect();
                let ei: BTreeSet<Value> =
                    enumerate_tensor(&x, &y, TensorKind::Fresh, &s.intersection(t))
                        .into_iter()
                        .collect();
                let both: BTreeSet<Value> = es.intersection(&et).cloned().collect();
                assert_eq!(both, ei);
            }
        }
    }

    #[test]
    fn atom_heads_give_the_left_unit() {
        let stage = st(3);
        for y in [
            StagedNomSet::Atoms,
            StagedNomSet::InjTuples(2),
            StagedNomSet::Lambda(1),
        ] {
            let classes =
                enumerate_tensor(&StagedNomSet::Atoms, &y, TensorKind::Fresh, &stage);
            let values = y.enumerate(&stage);
            let mut images = BTreeSet::new();
            for c in &classes {
                let v = left_unitor(c).unwrap();
                assert!(values.contains(&v));
                assert!(images.insert(v.clone()), "left unit repeats {v}");
                assert_eq!(left_unitor_inv(&v), *c, "round trip through the unit");
                for p in Perm::enumerate(&stage) {
                    assert_eq!(left_unitor(&c.perm(&p)).unwrap(), v.perm(&p));
                }
            }
            assert_eq!(images.len(), values.len(), "left unit is onto {}", y.name());
        }
    }

    #[test]
    fn atom_values_give_the_right_unit() {
        let stage = st(3);
        for x in [
            StagedNomSet::FinSets(2),
            StagedNomSet::InjTuples(2),
            StagedNomSet::Lambda(1),
        ] {
            let classes =
                enumerate_tensor(&x, &StagedNomSet::Atoms, TensorKind::Fresh, &stage);
            let values = x.enumerate(&stage);
            let mut images = BTreeSet::new();
            for c in &classes {
                let v = right_unitor(c).unwrap();
                assert!(values.contains(&v));
                assert!(images.insert(v.clone()), "right unit repeats {v}");
                assert_eq!(right_unitor_inv(&v), *c, "round trip through the unit");
            }
            assert_eq!(images.len(), values.len(), "right unit is onto {}", x.name());
        }
    }

    #[test]
    fn nested_tensors_reassociate() {
        let triples = [
            (
                StagedNomSet::FinSets(2),
                StagedNomSet::Atoms,
                StagedNomSet::Atoms,
            ),
            (
                StagedNomSet::Atoms,
                StagedNomSet::InjTuples(2),
                StagedNomSet::Atoms,
            ),
        ];
        let stage = st(3);
        for (x, y, z) in &triples {
            let left = StagedNomSet::Subst(
                Box::new(StagedNomSet::Subst(Box::new(x.clone()), Box::new(y.clone()))),
                Box::new(z.clone()),
            );
            let right = StagedNomSet::Subst(
                Box::new(x.clone()),
                Box::new(StagedNomSet::Subst(Box::new(y.clone()), Box::new(z.clone()))),
            );
            let ls = left.enumerate(&stage);
            let rs: BTreeSet<Value> = right.enumerate(&stage).into_iter().collect();
            assert_eq!(ls.len(), rs.len());
            let mut images = BTreeSet::new();
            for c in &ls {
                let f = assoc_forward(c).unwrap();
                assert!(rs.contains(&f), "{f} missing from the right bracketing");
                assert!(images.insert(f.clone()));
                assert_eq!(assoc_backward(&f).unwrap(), *c, "round trip");
            }
            assert_eq!(images.len(), rs.len(), "reassociation is onto");
        }
    }

    #[test]
    fn unit_and_associativity_maps_commute() {
        // Heads in X ◇ A ◇ Y: collapsing the middle atom either first or
        // after reassociation gives the same class.
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::InjTuples(2);
        let mid = StagedNomSet::Subst(Box::new(x.clone()), Box::new(StagedNomSet::Atoms));
        let left = StagedNomSet::Subst(Box::new(mid), Box::new(y.clone()));
        for c in left.enumerate(&st(4)) {
            // right unit on the head, directly
            let d = cls_data(&c).unwrap();
            let head = right_unitor(&d.x).unwrap();
            let direct = cls_value(head, d.gamma.clone());
            // through the associator: values become atom-headed classes
            let f = assoc_forward(&c).unwrap();
            let fd = cls_data(&f).unwrap();
            let collapsed = cls_value(
                fd.x.clone(),
                fd.gamma
                    .iter()
                    .map(|(k, v)| (*k, left_unitor(v).unwrap()))
                    .collect(),
            );
            assert_eq!(direct, collapsed, "triangle at {c}");
        }
    }

    #[test]
    fn reducible_maps_read_only_their_support() {
        // The equality test on a discrete value set reads both positions.
        let dom = st(2);
        let eq_rule: Rc<dyn Fn(&BTreeMap<Atom, Value>) -> Value> =
            Rc::new(|g| Value::Disc(usize::from(g[&atom(0)] == g[&atom(1)])));
        let f = ReducibleMap::new(&dom, eq_rule);
        let y = StagedNomSet::Disc(2);
        let probe = st(3);
        f.check_pointwise(&y, &probe).unwrap();
        assert_eq!(f.support(&y, &probe), dom);
        assert!(f.factors_through(&dom, &y, &probe));
        assert!(!f.factors_through(&st(1), &y, &probe));
        assert!(matches!(
            f.eval(&gmap(&[(0, Value::Disc(0))])),
            Err(SubstError::InsufficientTuple(_))
        ));
        for s in dom.subsets() {
            assert_eq!(
                f.factors_through(&s, &y, &probe),
                f.support(&y, &probe).is_subset(&s),
                "factorizations match the support at {s}"
            );
        }

        let k = ReducibleMap::constant(&pair(0, 1));
        assert_eq!(k.support(&StagedNomSet::Atoms, &probe), AtomSet::new());
        assert_eq!(k.eval(&BTreeMap::new()).unwrap(), pair(0, 1));

        // A rule reading concrete atom identities is not equivariant.
        let bad = ReducibleMap::new(
            &st(1),
            Rc::new(|g| Value::Disc(usize::from(g[&atom(0)] == Value::At(atom(1))))),
        );
        assert!(matches!(
            bad.check_pointwise(&StagedNomSet::Atoms, &probe),
            Err(SubstError::NonEquivariant(_))
        ));
    }

    #[test]
    fn precomposition_is_the_action_on_maps() {
        let dom = st(2);
        let f = ReducibleMap::new(
            &dom,
            Rc::new(|g| Value::Tuple(vec![g[&atom(0)].clone(), g[&atom(1)].clone()])),
        );
        let y = StagedNomSet::Atoms;
        let probe = st(4);
        for p in Perm::enumerate(&st(3)) {
            let moved = f.precompose(&p);
            assert_eq!(moved.reduction_support(), &p.apply_set(&dom));
            let dom2: Vec<Atom> = moved.reduction_support().union(&dom).iter().collect();
            for g in fresh_tuples(&dom2, &y, &probe) {
                // (p·f)(γ) = f(γ∘p): position q of the composite reads γ at p(q)
                let expected = f.eval(
                    &dom.iter().map(|q| (q, g[&p.apply(q)].clone())).collect(),
                );
                assert_eq!(moved.eval(&g), expected);
            }
        }
    }

    #[test]
    fn transposition_round_trips_on_set_heads() {
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::Atoms;
        let stage = st(3);
        // The map gathering the substituted values into a set: equivariant
        // and genuinely reading every position.
        let gather: Rc<dyn Fn(&Value) -> Value> = Rc::new(|c| {
            let d = cls_data(c).unwrap();
            Value::Set(d.gamma.iter().map(|(_, v)| v.clone()).collect())
        });
        let classes = enumerate_tensor(&x, &y, TensorKind::Fresh, &stage);
        check_class_equivariance(&*gather, &classes, &stage).unwrap();
        for c in &classes {
            let back = uncurry(&|h| curry(gather.clone(), h), c, &y).unwrap();
            assert_eq!(back, gather(c), "transposing twice returns the map at {c}");
        }
        // The member at each head reads exactly the head's support.
        for h in x.enumerate(&stage) {
            let member = curry(gather.clone(), &h);
            assert_eq!(member.reduction_support(), &least_support(&h));
            assert_eq!(member.support(&y, &stage), least_support(&h));
            member.check_pointwise(&y, &stage).unwrap();
        }
        // Naturality: transposing at a moved head is moving the member, since
        // (p·x)[γ] and x[γ∘p] name the same class.
        for h in x.enumerate(&stage) {
            for p in Perm::enumerate(&stage) {
                let lhs = curry(gather.clone(), &h.perm(&p));
                let rhs = curry(gather.clone(), &h).precompose(&p);
                assert_eq!(lhs.table(&y, &st(4)), rhs.table(&y, &st(4)));
            }
        }
        // A head-inspecting rule is rejected.
        let bad = |c: &Value| {
            let d = cls_data(c).unwrap();
            Value::Disc(usize::from(d.gamma.iter().any(|(_, v)| *v == at(0))))
        };
        assert!(matches!(
            check_class_equivariance(&bad, &classes, &stage),
            Err(SubstError::NonEquivariant(_))
        ));
    }

    #[test]
    fn variable_binding_transposes_to_evaluation() {
        let x = StagedNomSet::Lambda(2);
        let y = StagedNomSet::Lambda(1);
        let stage = st(2);
        let bind = |c: &Value| bind_class(c).unwrap();

        // At a bare variable the transposed member is evaluation.
        let var = Value::Term(parse("a0").unwrap());
        let member = curry(Rc::new(bind), &var);
        let t = Value::Term(parse("λa1. a1 a0").unwrap());
        assert_eq!(
            member.eval(&gmap(&[(0, t.clone())])).unwrap(),
            t,
            "binding at a variable evaluates the substitution"
        );

        // Transposing back recovers simultaneous substitution everywhere.
        for c in enumerate_tensor(&x, &y, TensorKind::Fresh, &stage) {
            let back = uncurry(&|h| curry(Rc::new(bind), h), &c, &y).unwrap();
            assert_eq!(back, bind(&c), "round trip at {c}");
        }

        // Deeper heads, sampled: depth-three terms over two atoms.
        let deep: Vec<LamTerm> = enumerate_terms(3, &stage);
        let values = y.enumerate(&stage);
        let mut checked = 0;
        for t in deep.iter().step_by(97) {
            let head = Value::Term(t.clone());
            let dom: Vec<Atom> = least_support(&head).iter().collect();
            let ys: Vec<(Value, AtomSet)> = values
                .iter()
                .map(|v| (v.clone(), least_support(v)))
                .collect();
            for m in assignments(&dom, &ys, true).into_iter().take(5) {
                let c = subst_class(&head, &m).unwrap();
                let back = uncurry(&|h| curry(Rc::new(bind), h), &c, &y).unwrap();
                assert_eq!(back, bind(&c));
                checked += 1;
            }
        }
        assert!(checked >= 50, "only {checked} deep classes sampled");
    }

    #[test]
    fn captureful_pairs_of_atoms_are_plain_tuples() {
        let x = StagedNomSet::InjTuples(2);
        let y = StagedNomSet::Atoms;
        for n in 0..=4u32 {
            let stage = st(n);
            let classes = enumerate_tensor(&x, &y, TensorKind::Captureful, &stage);
            assert_eq!(classes.len(), (n * n) as usize, "n² classes at stage {n}");
            let tuples: BTreeSet<Value> =
                StagedNomSet::Tuples(2).enumerate(&stage).into_iter().collect();
            let mut images = BTreeSet::new();
            for c in &classes {
                let d = cls_data(c).unwrap();
                let (first, second) = match &d.x {
                    Value::Tuple(vs) => match (&vs[0], &vs[1]) {
                        (Value::At(p), Value::At(q)) => (*p, *q),
                        _ => unreachable!(),
                    },
                    _ => unreachable!(),
                };
                let g: BTreeMap<Atom, Value> = d.gamma.iter().cloned().collect();
                let img = Value::Tuple(vec![g[&first].clone(), g[&second].clone()]);
                assert!(tuples.contains(&img));
                assert!(images.insert(img));
            }
            assert_eq!(images.len(), tuples.len(), "captureful classes are all tuples");
        }

        // The fresh tensor keeps the right unit; the captureful one loses it.
        let fresh = enumerate_tensor(&x, &y, TensorKind::Fresh, &st(3));
        assert_eq!(fresh.len(), 6, "injective pairs over three atoms");
        let captureful = enumerate_tensor(&x, &y, TensorKind::Captureful, &st(3));
        assert_eq!(captureful.len(), 9, "all pairs over three atoms");
    }

    #[test]
    fn uniform_classes_are_the_single_orbit_part() {
        let x = StagedNomSet::InjTuples(2);
        let y = StagedNomSet::Coproduct(
            Box::new(StagedNomSet::Atoms),
            Box::new(StagedNomSet::Disc(1)),
        );
        let stage = st(3);
        let all: BTreeSet<Value> =
            enumerate_tensor(&x, &y, TensorKind::Fresh, &stage).into_iter().collect();
        let uni = enumerate_tensor(&x, &y, TensorKind::Uniform, &stage);
        assert!(uni.len() < all.len(), "mixed-orbit classes exist and are dropped");
        for c in &uni {
            assert!(all.contains(c), "uniform classes are fresh classes");
            assert!(is_uniform(c));
            for p in Perm::enumerate(&stage) {
                assert!(is_uniform(&c.perm(&p)), "uniformity is stable under the action");
            }
        }
        let mixed = subst_class(
            &pair(0, 1),
            &gmap(&[(0, Value::Tag(0, Box::new(at(2)))), (1, Value::Tag(1, Box::new(Value::Disc(0))))]),
        )
        .unwrap();
        assert!(all.contains(&mixed) && !uni.contains(&mixed));
    }

    #[test]
    fn uniform_transposition_is_a_bijection() {
        // Corpora on which every class is a rigid matrix: either at most one
        // row meets each value orbit, or the orbit representative has no
        // symmetries. There the row/column transpose is a genuine bijection.
        let pairs = [
            (StagedNomSet::Atoms, StagedNomSet::Atoms),
            (StagedNomSet::Atoms, StagedNomSet::InjTuples(2)),
            (StagedNomSet::InjTuples(2), StagedNomSet::Atoms),
            (StagedNomSet::InjTuples(2), StagedNomSet::InjTuples(2)),
            (StagedNomSet::FinSets(2), StagedNomSet::Atoms),
            (StagedNomSet::Atoms, StagedNomSet::FinSets(2)),
        ];
        let stage = st(4);
        for (x, y) in &pairs {
            let fwd = enumerate_tensor(x, y, TensorKind::Uniform, &stage);
            let bwd: BTreeSet<Value> =
                enumerate_tensor(y, x, TensorKind::Uniform, &stage).into_iter().collect();
            let mut images = BTreeSet::new();
            for c in &fwd {
                let t = uniform_symmetry(c, y).unwrap();
                assert!(bwd.contains(&t), "transpose {t} of {c} lands in the swapped tensor");
                assert!(images.insert(t.clone()), "transpose repeats {t}");
                assert_eq!(
                    uniform_symmetry(&t, x).unwrap(),
                    *c,
                    "transposing twice is the identity at {c}"
                );
            }
            assert_eq!(images.len(), bwd.len(), "transposition is onto");
            // Equivariance of the transpose on a sample of permutations.
            for c in fwd.iter().step_by(3) {
                for p in Perm::enumerate(&stage).into_iter().take(6) {
                    assert_eq!(
                        uniform_symmetry(&c.perm(&p), y).unwrap(),
                        uniform_symmetry(c, y).unwrap().perm(&p)
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_transposition_loses_row_alignment_on_set_values() {
        // When the transposed side stores its columns as sets, the transpose
        // forgets which column entries shared a row, so the single-orbit
        // tensor built directly on classes is not symmetric: sets-of-pairs
        // has strictly more classes than pairs-of-sets. The convolved
        // presentation keeps the alignment (its stage-four block is one class
        // per injective matrix modulo row and column symmetries, twelve of
        // them) and only the sets-of-pairs direction agrees with it.
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::InjTuples(2);
        let stage = st(4);
        let fwd = enumerate_tensor(&x, &y, TensorKind::Uniform, &stage);
        let bwd: BTreeSet<Value> =
            enumerate_tensor(&y, &x, TensorKind::Uniform, &stage).into_iter().collect();
        assert_eq!(fwd.len(), 25, "empty head, one-row, and two-row blocks: 1 + 12 + 12");
        assert_eq!(bwd.len(), 19, "the two-row block collapses to ordered splits: 1 + 12 + 6");

        // The transpose is still well defined, equivariant, and onto; it is
        // two-to-one exactly on the two-row block.
        let mut images = BTreeSet::new();
        let mut collisions = 0;
        for c in &fwd {
            let t = uniform_symmetry(c, &y).unwrap();
            assert!(bwd.contains(&t), "transpose {t} of {c} lands in the swapped tensor");
            if !images.insert(t.clone()) {
                collisions += 1;
            }
        }
        assert_eq!(images.len(), bwd.len(), "transposition is onto");
        assert_eq!(collisions, 6, "each ordered split absorbs two row pairings");

        // An explicit collapsed pair: the same column sets {a0,a3} and
        // {a1,a2}, with a0 sharing a row with a1 in one class and with a2 in
        // the other.
        let row = |u: u32, v: u32| Value::Tuple(vec![at(u), at(v)]);
        let b = subst_class(&set(&[0, 1]), &gmap(&[(0, row(0, 1)), (1, row(3, 2))])).unwrap();
        let g = subst_class(&set(&[0, 1]), &gmap(&[(0, row(0, 2)), (1, row(3, 1))])).unwrap();
        assert_ne!(b, g, "the two row pairings are distinct classes");
        assert_eq!(
            uniform_symmetry(&b, &y).unwrap(),
            uniform_symmetry(&g, &y).unwrap(),
            "their transposes coincide once the rows become sets"
        );
    }

    #[test]
    fn uniform_matches_the_convolved_presentation() {
        let pairs = [
            (StagedNomSet::Atoms, StagedNomSet::Atoms),
            (StagedNomSet::Atoms, StagedNomSet::InjTuples(2)),
            (StagedNomSet::InjTuples(2), StagedNomSet::Atoms),
            (StagedNomSet::FinSets(2), StagedNomSet::InjTuples(2)),
        ];
        let bound = 3;
        for (x, y) in &pairs {
            let (d, nom) = uniform_from_presheaf(x, y, bound).unwrap();
            let staged = StagedNomSet::Uniform(Box::new(x.clone()), Box::new(y.clone()));
            let direct = staged.to_presheaf(bound);
            assert_eq!(direct.sizes(), nom.presheaf.sizes(), "sizes for {}", staged.name());
            assert!(
                nat_iso_search(&direct, &nom.presheaf).is_some(),
                "no isomorphism for {}",
                staged.name()
            );
            // The explicit comparison: each stage-n class maps to a distinct
            // convolution class, covering them all, equivariantly.
            for n in 0..=bound {
                let stage = st(n as u32);
                let classes = staged.enumerate(&stage);
                let mut ids = BTreeSet::new();
                for c in &classes {
                    let id = uniform_day_class(c, x, y, &d, n)
                        .unwrap_or_else(|| panic!("class {c} not located at stage {n}"));
                    assert!(ids.insert(id), "classes collide at stage {n}");
                }
                assert_eq!(ids.len(), d.presheaf.size(n), "coverage at stage {n}");
                for c in classes.iter().step_by(2) {
                    for p in Perm::enumerate(&stage).into_iter().take(4) {
                        let mor = perm_mor(&p, n);
                        let lhs = uniform_day_class(&c.perm(&p), x, y, &d, n).unwrap();
                        let rhs = d
                            .presheaf
                            .act(&mor, uniform_day_class(c, x, y, &d, n).unwrap());
                        assert_eq!(lhs, rhs, "comparison commutes with {p}");
                    }
                }
            }
        }
    }

    fn perm_mor(p: &Perm, n: usize) -> Mor {
        Mor::new(n, n, (0..n).map(|i| p.apply(atom(i as u32)).0 as usize).collect())
    }

    #[test]
    fn value_free_classes_pin_the_fixed_point_corner() {
        // A head with empty support records no partner value, so the staged
        // tensor holds one class per fixed point while the convolution keeps
        // one per partner orbit. The counts document that corner honestly.
        let x = StagedNomSet::Coproduct(
            Box::new(StagedNomSet::Atoms),
            Box::new(StagedNomSet::Disc(1)),
        );
        let y = StagedNomSet::Disc(2);
        let staged = StagedNomSet::Uniform(Box::new(x.clone()), Box::new(y.clone()));
        assert_eq!(staged.enumerate(&st(0)).len(), 3);
        let (d, _) = uniform_from_presheaf(&x, &y, 2).unwrap();
        assert_eq!(d.presheaf.size(0), 4, "the convolution remembers the orbit");
    }

    #[test]
    fn uniform_transposition_of_maps_round_trips() {
        let x = StagedNomSet::FinSets(2);
        let y = StagedNomSet::InjTuples(2);
        let stage = st(4);
        let gather: Rc<dyn Fn(&Value) -> Value> = Rc::new(|c| {
            let d = cls_data(c).unwrap();
            Value::Set(d.gamma.iter().map(|(_, v)| v.clone()).collect())
        });
        for c in enumerate_tensor(&x, &y, TensorKind::Uniform, &stage) {
            let back = uncurry_uniform(&|h| curry(gather.clone(), h), &c, &y).unwrap();
            assert_eq!(back, gather(&c), "uniform transposition round trip at {c}");
        }
    }

    #[test]
    fn tensor_names_are_registered() {
        let t = StagedNomSet::Subst(
            Box::new(StagedNomSet::FinSets(2)),
            Box::new(StagedNomSet::Atoms),
        );
        assert_eq!(t.name(), "(PfA@2◇A)");
        assert_eq!(
            StagedNomSet::Captureful(
                Box::new(StagedNomSet::InjTuples(2)),
                Box::new(StagedNomSet::Atoms)
            )
            .name(),
            "(A*2◇^A)"
        );
        assert_eq!(
            StagedNomSet::Uniform(Box::new(StagedNomSet::Atoms), Box::new(StagedNomSet::Atoms))
                .name(),
            "(A⊗A)"
        );
        assert_eq!(t.supp_bound(), Some(2));
        assert_eq!(
            StagedNomSet::Writer(Box::new(StagedNomSet::Atoms)).supp_bound(),
            None
        );
    }

    #[test]
    fn degenerate_heads_form_value_free_classes() {
        let c = subst_class(&Value::Disc(7), &BTreeMap::new()).unwrap();
        assert_eq!(c.to_string(), "#7[]");
        assert_eq!(class_support(&c).unwrap(), AtomSet::new());
        assert_eq!(least_support(&c), AtomSet::new());
        let one = enumerate_tensor(
            &StagedNomSet::Disc(1),
            &StagedNomSet::Atoms,
            TensorKind::Fresh,
            &st(3),
        );
        assert_eq!(one.len(), 1, "a single fixed point yields a single class");

        let nested = pair_value(c.clone(), at(0));
        assert_eq!(least_support(&nested), st(1), "classes nest inside values");
    }
}
