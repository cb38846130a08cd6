//! Atoms, finite permutations, and renamings.
//!
//! Atoms form a countable alphabet `a0, a1, a2, ..`; a *stage* is the finite
//! initial segment `{a0, .., a(n-1)}`. Permutations and renamings are stored
//! sparsely (identity off a finite carrier), so they act on the whole
//! alphabet while only a finite part is explicit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A name from the countable atom alphabet. Prints as `a0`, `a1`, ..
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Atom(pub u32);

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Convenience constructor for the `k`-th atom.
pub fn atom(k: u32) -> Atom {
    Atom(k)
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AtomError {
    #[error("map is not injective: {0} and {1} share the image {2}")]
    NotInjective(Atom, Atom, Atom),
    #[error("map is not a permutation: domain and image differ at {0}")]
    NotBijective(Atom),
}

/// A finite, sorted, deduplicated set of atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize)]
pub struct AtomSet(BTreeSet<Atom>);

impl AtomSet {
    pub fn new() -> Self {
        AtomSet(BTreeSet::new())
    }

    /// The stage `{a0, .., a(n-1)}`.
    pub fn stage(n: u32) -> Self {
        (0..n).map(Atom).collect()
    }

    pub fn insert(&mut self, a: Atom) {
        self.0.insert(a);
    }

    pub fn remove(&mut self, a: Atom) {
        self.0.remove(&a);
    }

    pub fn contains(&self, a: Atom) -> bool {
        self.0.contains(&a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Atom> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.difference(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &AtomSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// All subsets, in a deterministic order (by size, then lexicographic).
    pub fn subsets(&self) -> Vec<AtomSet> {
        let items: Vec<Atom> = self.iter().collect();
        let mut out: Vec<AtomSet> = Vec::with_capacity(1 << items.len());
        for mask in 0u32..(1 << items.len()) {
            let mut s = AtomSet::new();
            for (i, a) in items.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s.insert(*a);
                }
            }
            out.push(s);
        }
        out.sort_by_key(|s| (s.len(), s.iter().collect::<Vec<_>>()));
        out
    }
}

impl FromIterator<Atom> for AtomSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        AtomSet(iter.into_iter().collect())
    }
}

impl fmt::Display for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// A finitely supported permutation of the atom alphabet.
///
/// Stored as the graph of its non-fixed points; the map is required to be a
/// bijection from that carrier onto itself.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Perm(BTreeMap<Atom, Atom>);

impl Perm {
    pub fn identity() -> Self {
        Perm(BTreeMap::new())
    }

    /// The transposition `(a b)`; the identity when `a == b`.
    pub fn swap(a: Atom, b: Atom) -> Self {
        let mut m = BTreeMap::new();
        if a != b {
            m.insert(a, b);
            m.insert(b, a);
        }
        Perm(m)
    }

    /// Builds a permutation from an explicit graph, pruning fixed points.
    pub fn from_map(map: BTreeMap<Atom, Atom>) -> Result<Self, AtomError> {
        let pruned: BTreeMap<Atom, Atom> = map.into_iter().filter(|(a, b)| a != b).collect();
        let mut seen: BTreeMap<Atom, Atom> = BTreeMap::new();
        for (&a, &b) in &pruned {
            if let Some(&prev) = seen.get(&b) {
                return Err(AtomError::NotInjective(prev, a, b));
            }
            seen.insert(b, a);
        }
        for &b in pruned.values() {
            if !pruned.contains_key(&b) {
                return Err(AtomError::NotBijective(b));
            }
        }
        Ok(Perm(pruned))
    }

    /// Builds the permutation given by a cycle `(c0 c1 .. ck)`.
    pub fn cycle(cy: &[Atom]) -> Result<Self, AtomError> {
        let mut m = BTreeMap::new();
        for (i, &a) in cy.iter().enumerate() {
            m.insert(a, cy[(i + 1) % cy.len()]);
        }
        Perm::from_map(m)
    }

    pub fn apply(&self, a: Atom) -> Atom {
        *self.0.get(&a).unwrap_or(&a)
    }

    /// The set of atoms moved by the permutation.
    pub fn carrier(&self) -> AtomSet {
        self.0.keys().copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        let mut m = BTreeMap::new();
        for a in other.carrier().union(&self.carrier()).iter() {
            let b = self.apply(other.apply(a));
            if b != a {
                m.insert(a, b);
            }
        }
        Perm(m)
    }

    pub fn inverse(&self) -> Perm {
        Perm(self.0.iter().map(|(&a, &b)| (b, a)).collect())
    }

    pub fn apply_set(&self, s: &AtomSet) -> AtomSet {
        s.iter().map(|a| self.apply(a)).collect()
    }

    /// The cycle decomposition, each cycle starting at its least atom,
    /// cycles sorted by starting atom.
    pub fn cycles(&self) -> Vec<Vec<Atom>> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for a in self.0.keys().copied() {
            if seen.contains(&a) {
                continue;
            }
            let mut cy = vec![a];
            seen.insert(a);
            let mut b = self.apply(a);
            while b != a {
                cy.push(b);
                seen.insert(b);
                b = self.apply(b);
            }
            out.push(cy);
        }
        out
    }

    /// All permutations of the given atom set (identity outside it).
    pub fn enumerate(carrier: &AtomSet) -> Vec<Perm> {
        let items: Vec<Atom> = carrier.iter().collect();
        let mut out = Vec::new();
        for perm in permutations(items.len()) {
            let mut m = BTreeMap::new();
            for (i, &p) in perm.iter().enumerate() {
                if items[i] != items[p] {
                    m.insert(items[i], items[p]);
                }
            }
            out.push(Perm(m));
        }
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "id");
        }
        for cy in self.cycles() {
            write!(f, "(")?;
            for (i, a) in cy.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A finitely supported endo-map of the atom alphabet (possibly collapsing).
///
/// Stored as the graph of its non-fixed points. Prints as `[a0↦a2, a1↦a2]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Renaming(BTreeMap<Atom, Atom>);

impl Renaming {
    pub fn identity() -> Self {
        Renaming(BTreeMap::new())
    }

    pub fn from_pairs(pairs: &[(Atom, Atom)]) -> Self {
        Renaming(pairs.iter().copied().filter(|(a, b)| a != b).collect())
    }

    pub fn from_perm(p: &Perm) -> Self {
        Renaming(p.0.clone())
    }

    pub fn apply(&self, a: Atom) -> Atom {
        *self.0.get(&a).unwrap_or(&a)
    }

    /// Atoms on which the map differs from the identity.
    pub fn carrier(&self) -> AtomSet {
        self.0.keys().copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Renaming) -> Renaming {
        let mut m = BTreeMap::new();
        for a in other.carrier().union(&self.carrier()).iter() {
            let b = self.apply(other.apply(a));
            if b != a {
                m.insert(a, b);
            }
        }
        Renaming(m)
    }

    pub fn image_of(&self, s: &AtomSet) -> AtomSet {
        s.iter().map(|a| self.apply(a)).collect()
    }

    pub fn is_injective_on(&self, s: &AtomSet) -> bool {
        self.image_of(s).len() == s.len()
    }

    /// All renamings sending the carrier into `codomain` and fixing
    /// everything else; includes maps that are the identity on part of the
    /// carrier.
    pub fn enumerate(carrier: &AtomSet, codomain: &AtomSet) -> Vec<Renaming> {
        let dom: Vec<Atom> = carrier.iter().collect();
        let cod: Vec<Atom> = codomain.iter().collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; dom.len()];
        loop {
            let pairs: Vec<(Atom, Atom)> = dom.iter().enumerate().map(|(i, &a)| (a, cod[idx[i]])).collect();
            out.push(Renaming::from_pairs(&pairs));
            let mut i = 0;
            loop {
                if i == dom.len() {
                    out.sort();
                    out.dedup();
                    return out;
                }
                idx[i] += 1;
                if idx[i] < cod.len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if dom.is_empty() {
                out.sort();
                out.dedup();
                return out;
            }
        }
    }
}

impl fmt::Display for Renaming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (a, b)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}↦{b}")?;
        }
        write!(f, "]")
    }
}

/// The `k` least atoms not in `avoid`.
pub fn fresh_atoms(avoid: &AtomSet, k: usize) -> Vec<Atom> {
    let mut out = Vec::with_capacity(k);
    let mut n = 0u32;
    while out.len() < k {
        if !avoid.contains(Atom(n)) {
            out.push(Atom(n));
        }
        n += 1;
    }
    out
}

/// The least atom not in `avoid`.
pub fn fresh_atom(avoid: &AtomSet) -> Atom {
    fresh_atoms(avoid, 1)[0]
}

/// Extends an injective partial map on atoms to a finite permutation.
///
/// The completion is canonical: the unmatched part of `dom ∪ im` is mapped
/// in sorted order onto the unmatched part of the image side.
pub fn extend_bijection(pairs: &[(Atom, Atom)]) -> Result<Perm, AtomError> {
    let mut map: BTreeMap<Atom, Atom> = BTreeMap::new();
    let mut inv: BTreeMap<Atom, Atom> = BTreeMap::new();
    for &(a, b) in pairs {
        if let Some(&b0) = map.get(&a) {
            if b0 != b {
                return Err(AtomError::NotBijective(a));
            }
            continue;
        }
        if let Some(&a0) = inv.get(&b) {
            if a0 != a {
                return Err(AtomError::NotInjective(a0, a, b));
            }
        }
        map.insert(a, b);
        inv.insert(b, a);
    }
    let universe: AtomSet = map.keys().chain(inv.keys()).copied().collect();
    let missing_dom: Vec<Atom> = universe.iter().filter(|a| !map.contains_key(a)).collect();
    let missing_im: Vec<Atom> = universe.iter().filter(|b| !inv.contains_key(b)).collect();
    for (a, b) in missing_dom.into_iter().zip(missing_im) {
        map.insert(a, b);
    }
    Perm::from_map(map)
}

/// All length-`n` permutations of `0..n` as index vectors, in lexicographic
/// order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, &mut cur, &mut used, &mut out);
    out
}

/// All bijections between two equal-sized atom sets, as pair lists.
pub fn bijections(from: &AtomSet, to: &AtomSet) -> Vec<Vec<(Atom, Atom)>> {
    if from.len() != to.len() {
        return Vec::new();
    }
    let src: Vec<Atom> = from.iter().collect();
    let dst: Vec<Atom> = to.iter().collect();
    permutations(src.len())
        .into_iter()
        .map(|p| src.iter().enumerate().map(|(i, &a)| (a, dst[p[i]])).collect())
        .collect()
}
