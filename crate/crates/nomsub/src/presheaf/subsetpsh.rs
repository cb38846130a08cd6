//! Presheaves on the poset of finite atom sets under inclusion, tabulated
//! on the subsets of a fixed finite universe.
//!
//! Two coverages live on this poset: the singleton inclusion covers, and
//! the intersection coverage whose covers of `A` are finite families of
//! supersets meeting exactly in `A`. A presheaf preserves intersections
//! exactly when it is a sheaf for the intersection coverage and separated
//! for the inclusion coverage. All three checks are exact here: every
//! stage they quantify over is a subset of the universe, so nothing is
//! truncated away.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atoms::AtomSet;
use crate::finset::covers_intersection;
use crate::presheaf::{StructureVerdict, UnionFind};

/// A presheaf on the inclusion poset of subsets of `universe`.
#[derive(Clone, Debug)]
pub struct SubsetPresheaf {
    pub universe: AtomSet,
    labels: BTreeMap<AtomSet, Vec<String>>,
    act: BTreeMap<(AtomSet, AtomSet), Vec<usize>>,
}

impl SubsetPresheaf {
    /// Tabulates a presheaf from element labels and an action function on
    /// inclusion pairs `a ⊆ b`.
    pub fn from_fn(
        universe: AtomSet,
        labels: BTreeMap<AtomSet, Vec<String>>,
        action: impl Fn(&AtomSet, &AtomSet, usize) -> usize,
    ) -> SubsetPresheaf {
        let stages = universe.subsets();
        assert_eq!(labels.len(), stages.len());
        let mut act = BTreeMap::new();
        for a in &stages {
            for b in &stages {
                if !a.is_subset(b) {
                    continue;
                }
                let table: Vec<usize> = (0..labels[a].len()).map(|x| action(a, b, x)).collect();
                assert!(table.iter().all(|&y| y < labels[b].len()));
                act.insert((a.clone(), b.clone()), table);
            }
        }
        SubsetPresheaf { universe, labels, act }
    }

    pub fn size(&self, a: &AtomSet) -> usize {
        self.labels[a].len()
    }

    pub fn label(&self, a: &AtomSet, x: usize) -> &str {
        &self.labels[a][x]
    }

    pub fn act(&self, a: &AtomSet, b: &AtomSet, x: usize) -> usize {
        self.act[&(a.clone(), b.clone())][x]
    }

    fn table(&self, a: &AtomSet, b: &AtomSet) -> &[usize] {
        &self.act[&(a.clone(), b.clone())]
    }

    /// Verifies identities and composition over all chains `a ⊆ b ⊆ c`.
    pub fn check_functoriality(&self) -> Option<String> {
        let stages = self.universe.subsets();
        for a in &stages {
            for (x, y) in self.table(a, a).iter().enumerate() {
                if x != *y {
                    return Some(format!("identity at {a} moves element {x}"));
                }
            }
        }
        for a in &stages {
            for b in stages.iter().filter(|b| a.is_subset(b)) {
                for c in stages.iter().filter(|c| b.is_subset(c)) {
                    let ab = self.table(a, b);
                    let bc = self.table(b, c);
                    let ac = self.table(a, c);
                    for x in 0..self.size(a) {
                        if ac[x] != bc[ab[x]] {
                            return Some(format!("composition fails at {a} ⊆ {b} ⊆ {c} on {x}"));
                        }
                    }
                }
            }
        }
        None
    }

    /// The representable presheaf of a subset `c`: one element at every
    /// stage containing `c`, none elsewhere.
    pub fn representable(universe: AtomSet, c: &AtomSet) -> SubsetPresheaf {
        assert!(c.is_subset(&universe));
        let labels: BTreeMap<AtomSet, Vec<String>> = universe
            .subsets()
            .into_iter()
            .map(|a| {
                let l = if c.is_subset(&a) { vec![format!("⟨{c}⟩")] } else { vec![] };
                (a, l)
            })
            .collect();
        SubsetPresheaf::from_fn(universe, labels, |_, _, x| x)
    }

    /// The disjoint union of finitely many presheaves on the same universe.
    pub fn sum(parts: &[SubsetPresheaf]) -> SubsetPresheaf {
        assert!(!parts.is_empty());
        let universe = parts[0].universe.clone();
        assert!(parts.iter().all(|p| p.universe == universe));
        let stages = universe.subsets();
        let mut labels: BTreeMap<AtomSet, Vec<String>> = BTreeMap::new();
        let mut offsets: BTreeMap<AtomSet, Vec<usize>> = BTreeMap::new();
        for a in &stages {
            let mut ls = Vec::new();
            let mut off = Vec::new();
            for (k, p) in parts.iter().enumerate() {
                off.push(ls.len());
                for x in 0..p.size(a) {
                    ls.push(format!("{k}.{}", p.label(a, x)));
                }
            }
            labels.insert(a.clone(), ls);
            offsets.insert(a.clone(), off);
        }
        SubsetPresheaf::from_fn(universe, labels, |a, b, x| {
            let off = &offsets[a];
            let k = off.partition_point(|&o| o <= x) - 1;
            offsets[b][k] + parts[k].act(a, b, x - off[k])
        })
    }

    /// Quotients by the congruence generated by the given element pairs,
    /// closed upward along inclusions.
    pub fn quotient(&self, gens: &[(AtomSet, usize, usize)]) -> SubsetPresheaf {
        let stages = self.universe.subsets();
        let offsets: BTreeMap<AtomSet, usize> = {
            let mut off = BTreeMap::new();
            let mut total = 0;
            for a in &stages {
                off.insert(a.clone(), total);
                total += self.size(a);
            }
            off
        };
        let total: usize = stages.iter().map(|a| self.size(a)).sum();
        let mut uf = UnionFind::new(total);
        for (a, x, y) in gens {
            uf.union(offsets[a] + x, offsets[a] + y);
        }
        loop {
            let mut changed = false;
            for ((a, b), table) in &self.act {
                let mut anchor: BTreeMap<usize, usize> = BTreeMap::new();
                for x in 0..self.size(a) {
                    let root = uf.find(offsets[a] + x);
                    let img = offsets[b] + table[x];
                    match anchor.entry(root) {
                        Entry::Vacant(slot) => {
                            slot.insert(img);
                        }
                        Entry::Occupied(first) => changed |= uf.union(*first.get(), img),
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut class_ids: BTreeMap<AtomSet, Vec<usize>> = BTreeMap::new();
        let mut labels: BTreeMap<AtomSet, Vec<String>> = BTreeMap::new();
        for a in &stages {
            let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
            let mut ids = Vec::with_capacity(self.size(a));
            let mut ls = Vec::new();
            for x in 0..self.size(a) {
                let root = uf.find(offsets[a] + x);
                let next = roots.len();
                let id = *roots.entry(root).or_insert(next);
                if id == ls.len() {
                    ls.push(format!("[{}]", self.label(a, x)));
                }
                ids.push(id);
            }
            class_ids.insert(a.clone(), ids);
            labels.insert(a.clone(), ls);
        }
        let q = SubsetPresheaf::from_fn(self.universe.clone(), labels, |a, b, x| {
            let rep = class_ids[a].iter().position(|&c| c == x).expect("class has a member");
            class_ids[b][self.act(a, b, rep)]
        });
        debug_assert!(q.check_functoriality().is_none());
        q
    }
}

/// Checks that `F` preserves intersections: for all `b1, b2` and every
/// common superset `c` inside the universe, `F(b1 ∩ b2)` maps bijectively
/// onto the pairs agreeing in `F(c)`.
pub fn subset_preserves_intersections(f: &SubsetPresheaf) -> StructureVerdict {
    let stages = f.universe.subsets();
    for b1 in &stages {
        for b2 in &stages {
            let d = b1.intersection(b2);
            let join = b1.union(b2);
            for c in stages.iter().filter(|c| join.is_subset(c)) {
                let to1 = f.table(&d, b1);
                let to2 = f.table(&d, b2);
                let push1 = f.table(b1, c);
                let push2 = f.table(b2, c);
                let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                for w in 0..f.size(&d) {
                    if seen.insert((to1[w], to2[w]), w).is_some() {
                        return StructureVerdict::Fails {
                            witness: format!(
                                "{b1} ∩ {b2} in {c}: two elements of F({d}) share a restriction pair",
                            ),
                        };
                    }
                }
                for s in 0..f.size(b1) {
                    for t in 0..f.size(b2) {
                        if push1[s] == push2[t] && !seen.contains_key(&(s, t)) {
                            return StructureVerdict::Fails {
                                witness: format!(
                                    "{b1} ∩ {b2} in {c}: pair ({}, {}) has no preimage in F({d})",
                                    f.label(b1, s),
                                    f.label(b2, t),
                                ),
                            };
                        }
                    }
                }
            }
        }
    }
    StructureVerdict::Holds
}

/// Separatedness for the inclusion coverage on the poset: every action map
/// along `a ⊆ b` is injective. (In a poset all parallel cospans coincide,
/// so every element is a matching family, and injectivity is exactly
/// at-most-one amalgamation.)
pub fn subset_is_separated(f: &SubsetPresheaf) -> StructureVerdict {
    let stages = f.universe.subsets();
    for a in &stages {
        for b in stages.iter().filter(|b| a.is_subset(b)) {
            let table = f.table(a, b);
            let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
            for (x, &y) in table.iter().enumerate() {
                if let Some(&x0) = seen.get(&y) {
                    return StructureVerdict::Fails {
                        witness: format!(
                            "{a} ⊆ {b}: {} and {} restrict from the same element",
                            f.label(a, x0),
                            f.label(a, x),
                        ),
                    };
                }
                seen.insert(y, x);
            }
        }
    }
    StructureVerdict::Holds
}

/// The sheaf condition for the intersection coverage: for every cover
/// `{a ⊆ b_i}` with `⋂ b_i = a`, every matching family `(x_i)` — elements
/// agreeing in `F(b_i ∪ b_j)` for all `i, j` — has exactly one
/// amalgamation in `F(a)`.
pub fn subset_is_o_sheaf(f: &SubsetPresheaf) -> StructureVerdict {
    let stages = f.universe.subsets();
    for a in &stages {
        for family in covers_intersection(a, &f.universe) {
            if let Some(witness) = check_family(f, a, &family) {
                return StructureVerdict::Fails { witness };
            }
        }
    }
    StructureVerdict::Holds
}

fn check_family(f: &SubsetPresheaf, a: &AtomSet, family: &[AtomSet]) -> Option<String> {
    let mut tuple = vec![0usize; family.len()];
    let mut level = 0usize;
    // backtracking enumeration of matching families, pruned pairwise
    loop {
        if level == family.len() {
            if let Some(witness) = check_amalgamations(f, a, family, &tuple) {
                return Some(witness);
            }
            level -= 1;
            tuple[level] += 1;
        }
        if tuple[level] >= f.size(&family[level]) {
            if level == 0 {
                return None;
            }
            tuple[level] = 0;
            level -= 1;
            tuple[level] += 1;
            continue;
        }
        let ok = (0..level).all(|j| {
            let join = family[j].union(&family[level]);
            f.act(&family[j], &join, tuple[j]) == f.act(&family[level], &join, tuple[level])
        });
        if ok {
            level += 1;
        } else {
            tuple[level] += 1;
        }
    }
}

fn check_amalgamations(
    f: &SubsetPresheaf,
    a: &AtomSet,
    family: &[AtomSet],
    tuple: &[usize],
) -> Option<String> {
    let count = (0..f.size(a))
        .filter(|&x| {
            family
                .iter()
                .zip(tuple)
                .all(|(b, &xb)| f.act(a, b, x) == xb)
        })
        .count();
    if count == 1 {
        return None;
    }
    let members: Vec<String> = family
        .iter()
        .zip(tuple)
        .map(|(b, &xb)| format!("{} ∈ F({b})", f.label(b, xb)))
        .collect();
    Some(format!(
        "cover of {a} by {}: matching family ({}) has {count} amalgamations",
        family.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", "),
        members.join(", "),
    ))
}

/// A seeded random presheaf on the subsets of `universe`: a sum of
/// representables at random subsets, quotiented by random relations.
pub fn random_subset_presheaf(universe: &AtomSet, seed: u64) -> SubsetPresheaf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stages = universe.subsets();
    let parts: Vec<SubsetPresheaf> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let c = &stages[rng.gen_range(0..stages.len())];
            SubsetPresheaf::representable(universe.clone(), c)
        })
        .collect();
    let sum = SubsetPresheaf::sum(&parts);
    let gens: Vec<(AtomSet, usize, usize)> = (0..rng.gen_range(0..=2))
        .filter_map(|_| {
            let a = &stages[rng.gen_range(0..stages.len())];
            let sz = sum.size(a);
            if sz < 2 {
                return None;
            }
            Some((a.clone(), rng.gen_range(0..sz), rng.gen_range(0..sz)))
        })
        .collect();
    sum.quotient(&gens)
}
