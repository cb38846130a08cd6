//! Extension of presheaves along inclusions of index categories.
//!
//! Restricting a presheaf to a subcategory of its index category is just a
//! matter of forgetting action tables; extending in the other direction is
//! a left Kan extension and needs actual computation. Two regimes appear:
//!
//! * Along `B ↪ I` and `S ↪ F`, every morphism of the larger category
//!   factors through its image as a morphism of the smaller category
//!   followed by a subset inclusion. The extension then has the closed
//!   form `E(n) = ∐_{S ⊆ {0, …, n−1}} F(|S|)`, which is exact — no
//!   inner-stage truncation enters. See [`extend_by_subsets`].
//!
//! * Along `I ↪ F` (and other hom-embedding pairs) no such factorization
//!   exists, and the extension is the coend `∐_a hom(a, n) × F(a) / ∼`
//!   with the relation `(h ∘ g, x) ∼ (h, g·x)` for `g` in the smaller
//!   category. Inner stages are truncated at a bound and the result
//!   carries the usual stability diagnostic. See [`extend_by_coend`].

use std::collections::BTreeMap;

use crate::finset::{IndexCat, Mor};
use crate::presheaf::subst::compare_counts;
use crate::presheaf::{Stability, TruncPresheaf, UnionFind};

/// Whether every morphism of `sub` is a morphism of `sup`.
fn embeds(sub: IndexCat, sup: IndexCat) -> bool {
    use IndexCat::*;
    sub == sup
        || matches!(
            (sub, sup),
            (J, _) | (ISub, I | F) | (B, I | S | F) | (I, F) | (S, F)
        )
}

/// Whether the category has any morphism `a → n`.
fn hom_nonempty(cat: IndexCat, a: usize, n: usize) -> bool {
    use IndexCat::*;
    match cat {
        J | B => a == n,
        ISub | I => a <= n,
        S => a >= n && (n >= 1 || a == 0),
        F => n >= 1 || a == 0,
    }
}

/// All subsets of `{0, …, n−1}` ordered by size, then lexicographically.
fn subsets_of(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    out.sort_by(|s, t| s.len().cmp(&t.len()).then_with(|| s.cmp(t)));
    out
}

fn set_label(s: &[usize]) -> String {
    let body: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", body.join(" "))
}

struct SubsetStage {
    /// Per subset in `subsets_of(n)` order: the subset and its element offset.
    blocks: Vec<(Vec<usize>, usize)>,
    pos: BTreeMap<Vec<usize>, usize>,
}

impl SubsetStage {
    fn new(n: usize, sizes: &[usize]) -> SubsetStage {
        let mut blocks = Vec::new();
        let mut pos = BTreeMap::new();
        let mut offset = 0;
        for s in subsets_of(n) {
            pos.insert(s.clone(), blocks.len());
            let k = s.len();
            blocks.push((s, offset));
            offset += sizes[k];
        }
        SubsetStage { blocks, pos }
    }

    fn decode(&self, e: usize) -> (&[usize], usize) {
        let b = self.blocks.partition_point(|(_, off)| *off <= e) - 1;
        let (s, off) = &self.blocks[b];
        (s, e - off)
    }
}

/// Extends a presheaf over `B` to one over `I`, or over `S` to one over
/// `F`, by the exact subset formula `E(n) = ∐_{S ⊆ {0, …, n−1}} F(|S|)`.
///
/// A morphism `u : n → m` of the larger category sends `(S, x)` to
/// `(u[S], w·x)` where `w : |S| → |u[S]|` reads `u` through the order
/// isomorphisms of `S` and its image. For injective `u` the induced `w`
/// is a bijection; for arbitrary `u` it is a surjection — in both cases a
/// morphism of the smaller category, so the formula closes up.
pub fn extend_by_subsets(f: &TruncPresheaf, target: IndexCat) -> TruncPresheaf {
    use IndexCat::*;
    assert!(
        matches!((f.cat, target), (B, I) | (S, F)),
        "subset extension needs image factorizations: {} does not factor through {}",
        target.name(),
        f.cat.name()
    );
    let sizes: Vec<usize> = (0..=f.bound).map(|k| f.size(k)).collect();
    let stages: Vec<SubsetStage> = (0..=f.bound).map(|n| SubsetStage::new(n, &sizes)).collect();
    let labels: Vec<Vec<String>> = stages
        .iter()
        .map(|st| {
            st.blocks
                .iter()
                .flat_map(|(s, _)| {
                    let k = s.len();
                    (0..sizes[k]).map(move |x| format!("{}·{}", set_label(s), f.label(k, x)))
                })
                .collect()
        })
        .collect();
    TruncPresheaf::from_fn(target, f.bound, labels, |u, e| {
        let (s, x) = stages[u.dom].decode(e);
        let mut image: Vec<usize> = s.iter().map(|&i| u.table[i]).collect();
        let raw = image.clone();
        image.sort_unstable();
        image.dedup();
        let w = Mor::new(
            s.len(),
            image.len(),
            raw.iter().map(|v| image.binary_search(v).unwrap()).collect(),
        );
        debug_assert!(f.cat.contains(&w), "induced map left the index category");
        let st = &stages[u.cod];
        let (_, offset) = st.blocks[st.pos[&image]];
        offset + f.act(&w, x)
    })
}

struct CoendStage {
    /// Per inner stage `a`: element offset, the homs `a → n`, and the
    /// position of each hom table within them.
    blocks: Vec<(usize, Vec<Mor>, BTreeMap<Vec<usize>, usize>)>,
    class_of: Vec<usize>,
    /// Per class: its first spanning node `(a, h, x)` in flat order.
    reps: Vec<(usize, Mor, usize)>,
}

fn coend_stage(f: &TruncPresheaf, target: IndexCat, inner: usize, n: usize) -> CoendStage {
    let mut blocks = Vec::with_capacity(inner + 1);
    let mut offset = 0;
    for a in 0..=inner {
        let homs = target.hom(a, n);
        let pos: BTreeMap<Vec<usize>, usize> =
            homs.iter().enumerate().map(|(i, h)| (h.table.clone(), i)).collect();
        let count = homs.len() * f.size(a);
        blocks.push((offset, homs, pos));
        offset += count;
    }
    let node = |blocks: &[(usize, Vec<Mor>, BTreeMap<Vec<usize>, usize>)], a: usize, hidx: usize, x: usize| {
        blocks[a].0 + hidx * f.size(a) + x
    };

    let mut uf = UnionFind::new(offset);
    for g in f.cat.generators(inner) {
        for h in &target.hom(g.cod, n) {
            let hidx = blocks[g.cod].2[&h.table];
            let ghidx = blocks[g.dom].2[&g.then(h).table];
            for x in 0..f.size(g.dom) {
                uf.union(
                    node(&blocks, g.dom, ghidx, x),
                    node(&blocks, g.cod, hidx, f.act(&g, x)),
                );
            }
        }
    }

    let mut class_of = vec![usize::MAX; offset];
    let mut reps = Vec::new();
    for a in 0..=inner {
        for hidx in 0..blocks[a].1.len() {
            for x in 0..f.size(a) {
                let i = node(&blocks, a, hidx, x);
                let root = uf.find(i);
                let root_class = class_of[root];
                if root_class == usize::MAX {
                    class_of[root] = reps.len();
                    class_of[i] = reps.len();
                    reps.push((a, blocks[a].1[hidx].clone(), x));
                } else {
                    class_of[i] = root_class;
                }
            }
        }
    }
    CoendStage { blocks, class_of, reps }
}

fn coend_core(f: &TruncPresheaf, target: IndexCat, inner: usize) -> (Vec<CoendStage>, TruncPresheaf) {
    let stages: Vec<CoendStage> =
        (0..=f.bound).map(|n| coend_stage(f, target, inner, n)).collect();
    let labels: Vec<Vec<String>> = stages
        .iter()
        .map(|st| {
            st.reps
                .iter()
                .map(|(a, h, x)| format!("[{}·{}]", h, f.label(*a, *x)))
                .collect()
        })
        .collect();
    let presheaf = TruncPresheaf::from_fn(target, f.bound, labels, |v, c| {
        let (a, h, x) = &stages[v.dom].reps[c];
        let st = &stages[v.cod];
        let (offset, _, pos) = &st.blocks[*a];
        st.class_of[offset + pos[&h.then(v).table] * f.size(*a) + x]
    });
    (stages, presheaf)
}

/// Extends a presheaf along an inclusion of index categories as a
/// truncated coend: at stage `n` the spanning elements are triples
/// `(a ≤ inner_bound, h : a → n, x ∈ F(a))` modulo the relation
/// `(h ∘ g, x) ∼ (h, g·x)` for generators `g` of the smaller category.
///
/// The diagnostic recomputes with inner bound one smaller and reports the
/// first stage whose class count changes.
pub fn extend_by_coend(
    f: &TruncPresheaf,
    target: IndexCat,
    inner_bound: usize,
) -> (TruncPresheaf, Stability) {
    assert!(
        embeds(f.cat, target),
        "{} is not a subcategory of {}",
        f.cat.name(),
        target.name()
    );
    assert!(inner_bound <= f.bound, "inner stages are only tabulated up to the bound");
    let (stages, presheaf) = coend_core(f, target, inner_bound);
    // When no stage beyond the inner bound admits a morphism into any
    // tabulated stage (as for injective targets, where hom(a, n) is empty
    // for a > n), the coend's support is complete and the computation is
    // exact rather than merely one-step stable.
    let support_complete = (0..=f.bound).all(|n| !hom_nonempty(target, inner_bound + 1, n));
    let stability = if inner_bound == 0 || support_complete {
        Stability::Stable
    } else {
        let (smaller, _) = coend_core(f, target, inner_bound - 1);
        compare_counts(
            &stages.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            &smaller.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            inner_bound,
        )
    };
    (presheaf, stability)
}
