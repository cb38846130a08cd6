//! Presheaves on the index categories, tabulated up to a stage bound.
//!
//! A truncated presheaf stores its element lists for every stage `0..=N`
//! and an action table for every morphism of its index category between
//! those stages. Constructions that are genuinely finitary (representables,
//! sums, quotients) are exact; colimit-style constructions (coends, Day
//! convolution, substitution tensors) are truncated at the bound and carry
//! a stabilization diagnostic comparing against the next-smaller bound.

mod coend;
mod day;
mod extension;
mod hom;
mod monoid;
mod structure;
mod subsetpsh;
mod subst;

pub use coend::{coend_quotient, BifunctorTable, CoendResult, UnionFind};
pub use day::{day, DayElem, DayKind, DayResult, Stability};
pub use extension::{extend_by_coend, extend_by_subsets};
pub use hom::{hom_adjunction, internal_hom, AdjunctionWitness, InternalHom};
pub use monoid::{
    commutativity_square, monad_monoid_laws, psh_monoid, psh_monoid_laws, FinMonad, MonadKind,
    MonadTab, MonoidReport, PshMonoid,
};
pub use structure::{
    free_group_presheaf, is_separated, is_sheaf, matching_families, preserves_intersections,
    preserves_preimages, random_presheaf, StructureVerdict,
};
pub use subsetpsh::{
    random_subset_presheaf, subset_is_o_sheaf, subset_is_separated,
    subset_preserves_intersections, SubsetPresheaf,
};
pub use subst::{
    assoc, distributivity, left_assoc_class, left_unitor, phi, right_assoc_class, right_unitor,
    sub_presheaf, sub_reindex, subst_tensor, unfold_triple, RawTriple, SubElem, SubPresheaf,
    SubstTensor, TensorElem,
};

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::finset::{IndexCat, Mor};

/// A presheaf on an index category, tabulated for stages `0..=bound`.
#[derive(Clone, Debug)]
pub struct TruncPresheaf {
    pub cat: IndexCat,
    pub bound: usize,
    labels: Vec<Vec<String>>,
    act: BTreeMap<Mor, Vec<usize>>,
}

impl TruncPresheaf {
    /// Tabulates a presheaf from element labels and an action function.
    pub fn from_fn(
        cat: IndexCat,
        bound: usize,
        labels: Vec<Vec<String>>,
        action: impl Fn(&Mor, usize) -> usize,
    ) -> TruncPresheaf {
        assert_eq!(labels.len(), bound + 1);
        let mut act = BTreeMap::new();
        for f in cat.all_homs(bound) {
            let table: Vec<usize> = (0..labels[f.dom].len()).map(|x| action(&f, x)).collect();
            assert!(table.iter().all(|&y| y < labels[f.cod].len()));
            act.insert(f, table);
        }
        TruncPresheaf { cat, bound, labels, act }
    }

    pub fn size(&self, n: usize) -> usize {
        self.labels[n].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.labels.iter().map(|l| l.len()).sum()
    }

    pub fn label(&self, n: usize, x: usize) -> &str {
        &self.labels[n][x]
    }

    pub fn act(&self, f: &Mor, x: usize) -> usize {
        self.act.get(f).expect("morphism outside the tabulated category")[x]
    }

    /// The full action table of `f`, indexed by elements of the domain stage.
    pub fn act_table(&self, f: &Mor) -> &[usize] {
        self.act.get(f).expect("morphism outside the tabulated category")
    }

    /// The same presheaf truncated to a smaller stage bound.
    pub fn restrict(&self, bound: usize) -> TruncPresheaf {
        assert!(bound <= self.bound);
        TruncPresheaf {
            cat: self.cat,
            bound,
            labels: self.labels[..=bound].to_vec(),
            act: self
                .act
                .iter()
                .filter(|(f, _)| f.dom <= bound && f.cod <= bound)
                .map(|(f, t)| (f.clone(), t.clone()))
                .collect(),
        }
    }

    /// The representable presheaf of an object `a`.
    pub fn representable(cat: IndexCat, a: usize, bound: usize) -> TruncPresheaf {
        let homs: Vec<Vec<Mor>> = (0..=bound).map(|n| cat.hom(a, n)).collect();
        let pos: Vec<BTreeMap<&Mor, usize>> = homs
            .iter()
            .map(|h| h.iter().enumerate().map(|(i, m)| (m, i)).collect())
            .collect();
        let labels: Vec<Vec<String>> = homs.iter().map(|h| h.iter().map(|f| f.to_string()).collect()).collect();
        let mut act = BTreeMap::new();
        for f in cat.all_homs(bound) {
            let table: Vec<usize> = homs[f.dom]
                .iter()
                .map(|g| *pos[f.cod].get(&g.then(&f)).expect("category not closed"))
                .collect();
            act.insert(f, table);
        }
        TruncPresheaf { cat, bound, labels, act }
    }

    /// The disjoint union of finitely many presheaves on the same category.
    pub fn sum(parts: &[TruncPresheaf]) -> TruncPresheaf {
        assert!(!parts.is_empty());
        let cat = parts[0].cat;
        let bound = parts[0].bound;
        assert!(parts.iter().all(|p| p.cat == cat && p.bound == bound));
        let mut labels = vec![Vec::new(); bound + 1];
        let mut offsets: Vec<Vec<usize>> = vec![Vec::new(); bound + 1];
        for n in 0..=bound {
            for (k, p) in parts.iter().enumerate() {
                offsets[n].push(labels[n].len());
                for x in 0..p.size(n) {
                    labels[n].push(format!("{k}.{}", p.label(n, x)));
                }
            }
        }
        let mut act = BTreeMap::new();
        for f in cat.all_homs(bound) {
            let mut table = Vec::with_capacity(labels[f.dom].len());
            for (k, p) in parts.iter().enumerate() {
                for x in 0..p.size(f.dom) {
                    table.push(offsets[f.cod][k] + p.act(&f, x));
                }
            }
            act.insert(f, table);
        }
        TruncPresheaf { cat, bound, labels, act }
    }

    /// Quotients by the congruence generated by the given element pairs
    /// (each within a single stage). Returns the quotient and the
    /// projection.
    pub fn quotient(&self, gens: &[(usize, usize, usize)]) -> (TruncPresheaf, NatTrans) {
        let sizes = self.sizes();
        let mut uf = UnionFind::new(sizes.iter().sum());
        let flat = |n: usize, x: usize| sizes[..n].iter().sum::<usize>() + x;
        for &(n, x, y) in gens {
            uf.union(flat(n, x), flat(n, y));
        }
        // close under the action until stable: identified elements must
        // keep identified images, so union each element's image with the
        // image of the first element seen in its class
        loop {
            let mut changed = false;
            for (f, table) in &self.act {
                let mut anchor: BTreeMap<usize, usize> = BTreeMap::new();
                for x in 0..sizes[f.dom] {
                    let root = uf.find(flat(f.dom, x));
                    let img = flat(f.cod, table[x]);
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
        let mut class_ids: Vec<Vec<usize>> = Vec::with_capacity(self.bound + 1);
        let mut labels: Vec<Vec<String>> = Vec::with_capacity(self.bound + 1);
        for n in 0..=self.bound {
            let mut ids = Vec::with_capacity(sizes[n]);
            let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
            let mut ls = Vec::new();
            for x in 0..sizes[n] {
                let root = uf.find(flat(n, x));
                let next = roots.len();
                let id = *roots.entry(root).or_insert(next);
                if id == ls.len() {
                    ls.push(format!("[{}]", self.label(n, x)));
                }
                ids.push(id);
            }
            class_ids.push(ids);
            labels.push(ls);
        }
        let mut act = BTreeMap::new();
        for (f, table) in &self.act {
            let mut new_table = vec![0usize; labels[f.dom].len()];
            for x in 0..sizes[f.dom] {
                new_table[class_ids[f.dom][x]] = class_ids[f.cod][table[x]];
            }
            act.insert(f.clone(), new_table);
        }
        let q = TruncPresheaf {
            cat: self.cat,
            bound: self.bound,
            labels,
            act,
        };
        let proj = NatTrans {
            components: class_ids,
        };
        debug_assert!(q.check_functoriality().is_none());
        debug_assert!(proj.check_naturality(self, &q).is_none());
        (q, proj)
    }

    /// Verifies identity and composition laws of the tabulated action;
    /// returns a description of the first failure, if any.
    pub fn check_functoriality(&self) -> Option<String> {
        for n in 0..=self.bound {
            let id = Mor::identity(n);
            if self.cat.contains(&id) {
                for x in 0..self.size(n) {
                    if self.act(&id, x) != x {
                        return Some(format!("identity at stage {n} moves element {x}"));
                    }
                }
            }
        }
        // composition with a generator suffices: every tabulated morphism
        // factors into generators without leaving the stage bound, and the
        // general law follows by induction on the factorization
        let gens = self.cat.generators(self.bound);
        for (f, table) in &self.act {
            for g in gens.iter().filter(|g| g.dom == f.cod) {
                let gt = self.act_table(g);
                let fgt = self.act_table(&f.then(g));
                for x in 0..self.size(f.dom) {
                    if fgt[x] != gt[table[x]] {
                        return Some(format!("composition fails at {f};{g} on element {x}"));
                    }
                }
            }
        }
        None
    }

    /// JSON dump: stages with element labels and the full action table.
    pub fn dump(&self) -> serde_json::Value {
        let stages: Vec<serde_json::Value> = (0..=self.bound)
            .map(|n| {
                serde_json::json!({
                    "n": n,
                    "elems": self.labels[n],
                })
            })
            .collect();
        let action: Vec<serde_json::Value> = self
            .act
            .iter()
            .map(|(f, table)| serde_json::json!({ "mor": f, "map": table }))
            .collect();
        serde_json::json!({
            "cat": self.cat.name(),
            "bound": self.bound,
            "stages": stages,
            "action": action,
        })
    }
}

/// A stage-indexed family of maps between two presheaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NatTrans {
    pub components: Vec<Vec<usize>>,
}

impl NatTrans {
    pub fn identity(x: &TruncPresheaf) -> NatTrans {
        NatTrans {
            components: x.sizes().iter().map(|&s| (0..s).collect()).collect(),
        }
    }

    pub fn apply(&self, n: usize, x: usize) -> usize {
        self.components[n][x]
    }

    /// Diagrammatic composition.
    pub fn then(&self, other: &NatTrans) -> NatTrans {
        NatTrans {
            components: self
                .components
                .iter()
                .enumerate()
                .map(|(n, c)| c.iter().map(|&x| other.components[n][x]).collect())
                .collect(),
        }
    }

    pub fn is_bijective(&self, source: &TruncPresheaf, target: &TruncPresheaf) -> bool {
        self.components.iter().enumerate().all(|(n, c)| {
            c.len() == source.size(n) && {
                let mut seen = vec![false; target.size(n)];
                c.iter().all(|&y| {
                    if y < seen.len() && !seen[y] {
                        seen[y] = true;
                        true
                    } else {
                        false
                    }
                }) && seen.iter().all(|&b| b)
            }
        })
    }

    /// Returns a description of the first naturality failure, if any.
    pub fn check_naturality(&self, source: &TruncPresheaf, target: &TruncPresheaf) -> Option<String> {
        for f in source.cat.all_homs(source.bound) {
            let st = source.act_table(&f);
            let tt = target.act_table(&f);
            for x in 0..source.size(f.dom) {
                let lhs = self.apply(f.cod, st[x]);
                let rhs = tt[self.apply(f.dom, x)];
                if lhs != rhs {
                    return Some(format!("naturality fails at {f} on element {x}"));
                }
            }
        }
        None
    }
}

/// Enumerates all natural transformations `source → target` by backtracking
/// over components in stage order, pruning with the generator morphisms.
pub fn nat_enumerate(source: &TruncPresheaf, target: &TruncPresheaf) -> Vec<NatTrans> {
    search_nats(source, target, false, None)
}

/// Finds a natural isomorphism if one exists.
pub fn nat_iso_search(source: &TruncPresheaf, target: &TruncPresheaf) -> Option<NatTrans> {
    if source.sizes() != target.sizes() {
        return None;
    }
    search_nats(source, target, true, Some(1)).into_iter().next()
}

fn search_nats(
    source: &TruncPresheaf,
    target: &TruncPresheaf,
    bijective: bool,
    limit: Option<usize>,
) -> Vec<NatTrans> {
    assert_eq!(source.cat, target.cat);
    assert_eq!(source.bound, target.bound);
    let sizes = source.sizes();
    let total: usize = sizes.iter().sum();
    let flat = |n: usize, x: usize| sizes[..n].iter().sum::<usize>() + x;
    let unflat: Vec<(usize, usize)> = (0..=source.bound)
        .flat_map(|n| (0..sizes[n]).map(move |x| (n, x)))
        .collect();

    // Naturality constraints from generators: assignment at `at` must equal
    // the target action applied to the assignment at `from`.
    struct Constraint {
        from: usize,
        at: usize,
        f: Mor,
    }
    let mut by_trigger: Vec<Vec<Constraint>> = (0..total).map(|_| Vec::new()).collect();
    for f in source.cat.generators(source.bound) {
        for x in 0..sizes[f.dom] {
            let from = flat(f.dom, x);
            let at = flat(f.cod, source.act(&f, x));
            let trigger = from.max(at);
            by_trigger[trigger].push(Constraint { from, at, f: f.clone() });
        }
    }

    let mut out = Vec::new();
    let mut assign: Vec<usize> = vec![usize::MAX; total];
    let mut used: Vec<Vec<bool>> = target.sizes().iter().map(|&s| vec![false; s]).collect();

    fn rec(
        k: usize,
        total: usize,
        unflat: &[(usize, usize)],
        target: &TruncPresheaf,
        by_trigger: &[Vec<Constraint>],
        assign: &mut Vec<usize>,
        used: &mut Vec<Vec<bool>>,
        bijective: bool,
        limit: Option<usize>,
        out: &mut Vec<NatTrans>,
        sizes: &[usize],
    ) {
        if limit.is_some_and(|l| out.len() >= l) {
            return;
        }
        if k == total {
            let mut components: Vec<Vec<usize>> = Vec::with_capacity(sizes.len());
            let mut idx = 0;
            for &s in sizes {
                components.push(assign[idx..idx + s].to_vec());
                idx += s;
            }
            out.push(NatTrans { components });
            return;
        }
        let (n, _) = unflat[k];
        for y in 0..target.size(n) {
            if bijective && used[n][y] {
                continue;
            }
            assign[k] = y;
            let ok = by_trigger[k].iter().all(|c| {
                let a_from = assign[c.from];
                let a_at = assign[c.at];
                a_from == usize::MAX || a_at == usize::MAX || target.act(&c.f, a_from) == a_at
            });
            if ok {
                if bijective {
                    used[n][y] = true;
                }
                rec(k + 1, total, unflat, target, by_trigger, assign, used, bijective, limit, out, sizes);
                if bijective {
                    used[n][y] = false;
                }
            }
            assign[k] = usize::MAX;
        }
    }
    rec(
        0,
        total,
        &unflat,
        target,
        &by_trigger,
        &mut assign,
        &mut used,
        bijective,
        limit,
        &mut out,
        &sizes,
    );
    // generator pruning is partial during search; filter by the full check
    out.retain(|t| t.check_naturality(source, target).is_none());
    out
}
