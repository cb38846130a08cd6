//! The substitution presheaf `A ◁ X` and the substitution tensor `X ◇ Y`.
//!
//! Both are bundle coends. A spanning element of `(A ◁ X)(n)` is a bundle
//! over `A` — a multiplicity vector `m : A → ℕ`, a gluing morphism
//! `f : Σm → n`, and a tuple `t` with `t_a ∈ X(m_a)` — where `Σm` is the
//! concatenation of blocks of sizes `m_0, .., m_{A-1}`. The coend identifies
//! blockwise maps applied to `f` with their action on the tuple. The tensor
//! `(X ◇ Y)(n)` adds an outer coend over the stage `A` itself, pairing
//! bundles with elements `x ∈ X(A)` and identifying reindexed bundles along
//! morphisms of `A` with the action on `x`.
//!
//! Truncation: the stage `A` and every multiplicity `m_a` range over
//! `0..=inner_bound`; each construction recomputes at the next-smaller
//! bound and reports a [`Stability`] diagnostic.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::finset::{IndexCat, Mor};
use crate::presheaf::{Stability, TruncPresheaf, UnionFind};
use crate::presheaf::{DayKind, DayResult, NatTrans};

fn assert_contextual(cat: IndexCat) {
    assert!(
        matches!(cat, IndexCat::B | IndexCat::I | IndexCat::S | IndexCat::F),
        "substitution structure needs a contextual index category, got {}",
        cat.name()
    );
}

/// All multiplicity vectors of length `len` with entries `0..=max`, in
/// lexicographic order.
fn mult_vectors(len: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; len]];
    loop {
        let cur = out.last().unwrap();
        let mut next = cur.clone();
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if next[i] < max {
                next[i] += 1;
                for v in next[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
        }
        out.push(next);
    }
}

/// The block inclusion of the `i`-th fiber into the total stage of `m`.
pub(crate) fn block_inclusion(m: &[usize], i: usize) -> Mor {
    let offset: usize = m[..i].iter().sum();
    let total: usize = m.iter().sum();
    Mor::new(m[i], total, (offset..offset + m[i]).collect())
}

/// `id ⊕ .. ⊕ u ⊕ .. ⊕ id` acting on the `i`-th fiber of `m`, where `m` is
/// the codomain-side vector (`m[i] == u.cod`).
fn expand_at(m: &[usize], i: usize, u: &Mor) -> Mor {
    assert_eq!(m[i], u.cod);
    let mut table = Vec::new();
    let mut offset = 0;
    for (j, &mj) in m.iter().enumerate() {
        if j == i {
            table.extend(u.table.iter().map(|&v| offset + v));
        } else {
            table.extend(offset..offset + mj);
        }
        offset += mj;
    }
    let dom: usize = table.len();
    Mor::new(dom, offset, table)
}

/// The canonical pullback leg `Σ(m ∘ u) → Σm` for `u : A′ → A` and a
/// multiplicity vector `m` over `A`: the block over `a′` maps identically
/// onto the block over `u(a′)`.
fn pullback_leg(m: &[usize], u: &Mor) -> Mor {
    assert_eq!(m.len(), u.cod);
    let offsets: Vec<usize> = m
        .iter()
        .scan(0, |acc, &v| {
            let o = *acc;
            *acc += v;
            Some(o)
        })
        .collect();
    let mut table = Vec::new();
    for &a in &u.table {
        table.extend(offsets[a]..offsets[a] + m[a]);
    }
    Mor::new(table.len(), m.iter().sum(), table)
}

fn radix_encode(t: &[usize], sizes: &[usize]) -> usize {
    let mut code = 0;
    let mut scale = 1;
    for (v, s) in t.iter().zip(sizes) {
        code += v * scale;
        scale *= s;
    }
    code
}

fn radix_decode(mut code: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len());
    for &s in sizes {
        out.push(code % s);
        code /= s;
    }
    out
}

struct HomSet {
    homs: Vec<Mor>,
    pos: BTreeMap<Vec<usize>, usize>,
}

type HomCache = BTreeMap<(usize, usize), Arc<HomSet>>;

fn hom_set(cache: &mut HomCache, cat: IndexCat, dom: usize, cod: usize) -> Arc<HomSet> {
    cache
        .entry((dom, cod))
        .or_insert_with(|| {
            let homs = cat.hom(dom, cod);
            let pos = homs.iter().enumerate().map(|(i, h)| (h.table.clone(), i)).collect();
            Arc::new(HomSet { homs, pos })
        })
        .clone()
}

// ---------------------------------------------------------------------------
// A ◁ X
// ---------------------------------------------------------------------------

/// One spanning element of `(A ◁ X)(n)`: the multiplicities, an index into
/// `hom(Σm, n)`, and per-fiber element indices `t_a ∈ X(m_a)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubElem {
    pub m: Vec<usize>,
    pub fidx: usize,
    pub t: Vec<usize>,
}

struct SubBlock {
    m: Vec<usize>,
    offset: usize,
    homs: Arc<HomSet>,
    tsizes: Vec<usize>,
    tprod: usize,
}

impl SubBlock {
    fn len(&self) -> usize {
        self.homs.homs.len() * self.tprod
    }
}

struct SubStage {
    blocks: Vec<SubBlock>,
    index: BTreeMap<Vec<usize>, usize>,
    total: usize,
    class_of: Vec<usize>,
    reps: Vec<usize>,
}

/// The substitution presheaf `A ◁ X`, with its spanning data.
pub struct SubPresheaf {
    pub a: usize,
    pub inner_bound: usize,
    pub presheaf: TruncPresheaf,
    pub stability: Stability,
    stages: Vec<SubStage>,
}

impl SubPresheaf {
    pub fn span_count(&self, n: usize) -> usize {
        self.stages[n].total
    }

    pub fn span(&self, n: usize, flat: usize) -> SubElem {
        let st = &self.stages[n];
        let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
        let blk = &st.blocks[b];
        let local = flat - blk.offset;
        SubElem {
            m: blk.m.clone(),
            fidx: local / blk.tprod,
            t: radix_decode(local % blk.tprod, &blk.tsizes),
        }
    }

    pub fn class_of_flat(&self, n: usize, flat: usize) -> usize {
        self.stages[n].class_of[flat]
    }

    pub fn rep(&self, n: usize, class: usize) -> SubElem {
        self.span(n, self.stages[n].reps[class])
    }

    pub fn span_mor(&self, n: usize, e: &SubElem) -> Mor {
        let st = &self.stages[n];
        st.blocks[st.index[&e.m]].homs.homs[e.fidx].clone()
    }

    pub fn class_of_span(&self, n: usize, e: &SubElem) -> usize {
        let st = &self.stages[n];
        let blk = &st.blocks[st.index[&e.m]];
        st.class_of[blk.offset + e.fidx * blk.tprod + radix_encode(&e.t, &blk.tsizes)]
    }

    /// The class of explicit spanning parts, or `None` if out of range.
    pub fn class_of_parts(&self, n: usize, m: &[usize], f: &Mor, t: &[usize]) -> Option<usize> {
        let st = &self.stages[n];
        let blk = &st.blocks[*st.index.get(m)?];
        let fidx = *blk.homs.pos.get(&f.table)?;
        if t.len() != blk.tsizes.len() || t.iter().zip(&blk.tsizes).any(|(&v, &s)| v >= s) {
            return None;
        }
        Some(st.class_of[blk.offset + fidx * blk.tprod + radix_encode(t, &blk.tsizes)])
    }
}

fn sub_core(a: usize, x: &TruncPresheaf, inner: usize, cache: &mut HomCache) -> (Vec<SubStage>, TruncPresheaf) {
    let cat = x.cat;
    let bound = x.bound;
    let mults = mult_vectors(a, inner);
    let gens = cat.generators(inner);

    let mut stages: Vec<SubStage> = Vec::with_capacity(bound + 1);
    for n in 0..=bound {
        let mut blocks = Vec::new();
        let mut index = BTreeMap::new();
        let mut offset = 0;
        for m in &mults {
            let homs = hom_set(cache, cat, m.iter().sum(), n);
            let tsizes: Vec<usize> = m.iter().map(|&k| x.size(k)).collect();
            let tprod: usize = tsizes.iter().product();
            index.insert(m.clone(), blocks.len());
            blocks.push(SubBlock { m: m.clone(), offset, homs, tsizes, tprod });
            offset += blocks.last().unwrap().len();
        }
        let total = offset;

        let mut uf = UnionFind::new(total);
        bundle_edges(&blocks, &index, &gens, x, &mut uf, 1);

        let (class_of, reps) = assign_classes(&mut uf, total);
        stages.push(SubStage { blocks, index, total, class_of, reps });
    }

    let labels: Vec<Vec<String>> = stages
        .iter()
        .map(|st| {
            st.reps
                .iter()
                .map(|&flat| {
                    let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
                    let blk = &st.blocks[b];
                    let local = flat - blk.offset;
                    let f = &blk.homs.homs[local / blk.tprod];
                    let t = radix_decode(local % blk.tprod, &blk.tsizes);
                    let parts: Vec<&str> = t.iter().zip(&blk.m).map(|(&v, &k)| x.label(k, v)).collect();
                    format!("⟨m={:?}; {f}; ({})⟩", blk.m, parts.join(", "))
                })
                .collect()
        })
        .collect();
    let presheaf = TruncPresheaf::from_fn(cat, bound, labels, |h, c| {
        let st = &stages[h.dom];
        let flat = st.reps[c];
        let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
        let blk = &st.blocks[b];
        let local = flat - blk.offset;
        let composed = blk.homs.homs[local / blk.tprod].then(h);
        let tgt = &stages[h.cod];
        let tblk = &tgt.blocks[tgt.index[&blk.m]];
        let fidx = tblk.homs.pos[&composed.table];
        tgt.class_of[tblk.offset + fidx * tblk.tprod + (local % blk.tprod)]
    });
    debug_assert!(presheaf.check_functoriality().is_none());
    (stages, presheaf)
}

/// Adds the blockwise-map identifications to `uf`. Spans are laid out as
/// `offset + (fidx * x_stride + xi) * tprod + tcode`; the substitution
/// presheaf has no `x` coordinate, so it passes `x_stride = 1`.
fn bundle_edges(
    blocks: &[SubBlock],
    index: &BTreeMap<Vec<usize>, usize>,
    gens: &[Mor],
    x: &TruncPresheaf,
    uf: &mut UnionFind,
    x_stride: usize,
) {
    for blk in blocks {
        if blk.len() == 0 {
            continue;
        }
        for i in 0..blk.m.len() {
            for u in gens.iter().filter(|u| u.cod == blk.m[i]) {
                let mut m_from = blk.m.clone();
                m_from[i] = u.dom;
                let from = &blocks[index[&m_from]];
                if from.tprod == 0 || from.homs.homs.is_empty() {
                    continue;
                }
                let expand = expand_at(&blk.m, i, u);
                let uact: Vec<usize> = (0..x.size(u.dom)).map(|v| x.act(u, v)).collect();
                // radix split around coordinate i
                let lo: usize = from.tsizes[..i].iter().product();
                let s_from = from.tsizes[i];
                let s_to = blk.tsizes[i];
                let hi: usize = from.tsizes[i + 1..].iter().product();
                for (fidx, h) in blk.homs.homs.iter().enumerate() {
                    let composed = expand.then(h);
                    let cidx = from.homs.pos[&composed.table];
                    for xi in 0..x_stride {
                        let from_base = from.offset + (cidx * x_stride + xi) * from.tprod;
                        let to_base = blk.offset + (fidx * x_stride + xi) * blk.tprod;
                        for h_part in 0..hi {
                            for ti in 0..s_from {
                                let to_ti = uact[ti];
                                for l_part in 0..lo {
                                    uf.union(
                                        from_base + (h_part * s_from + ti) * lo + l_part,
                                        to_base + (h_part * s_to + to_ti) * lo + l_part,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn assign_classes(uf: &mut UnionFind, total: usize) -> (Vec<usize>, Vec<usize>) {
    let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(total);
    let mut reps = Vec::new();
    for i in 0..total {
        let root = uf.find(i);
        let next = roots.len();
        let id = *roots.entry(root).or_insert(next);
        if id == reps.len() {
            reps.push(i);
        }
        class_of.push(id);
    }
    (class_of, reps)
}

/// Computes `A ◁ X` with multiplicities truncated at `inner_bound`.
pub fn sub_presheaf(a: usize, x: &TruncPresheaf, inner_bound: usize) -> SubPresheaf {
    assert_contextual(x.cat);
    let mut cache = HomCache::new();
    let (stages, presheaf) = sub_core(a, x, inner_bound, &mut cache);
    let stability = if inner_bound == 0 {
        Stability::Stable
    } else {
        let (smaller, _) = sub_core(a, x, inner_bound - 1, &mut cache);
        compare_counts(
            &stages.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            &smaller.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            inner_bound,
        )
    };
    SubPresheaf { a, inner_bound, presheaf, stability, stages }
}

pub(crate) fn compare_counts(full: &[usize], smaller: &[usize], inner: usize) -> Stability {
    match full.iter().zip(smaller).position(|(a, b)| a != b) {
        None => Stability::Stable,
        Some(n) => Stability::TruncationUnstable {
            stage: n,
            inner,
            classes: full[n],
            classes_smaller: smaller[n],
        },
    }
}

/// The reindexing `(A ◁ X) → (A′ ◁ X)` along `u : A′ → A`, computed via the
/// canonical bundle pullback: `(m, f, t) ↦ (m ∘ u, p_u ; f, t ∘ u)`.
pub fn sub_reindex(u: &Mor, from: &SubPresheaf, to: &SubPresheaf) -> NatTrans {
    assert_eq!(from.a, u.cod);
    assert_eq!(to.a, u.dom);
    let components = (0..from.presheaf.bound + 1)
        .map(|n| {
            (0..from.presheaf.size(n))
                .map(|c| {
                    let e = from.rep(n, c);
                    let f = from.span_mor(n, &e);
                    let m2: Vec<usize> = u.table.iter().map(|&a| e.m[a]).collect();
                    let f2 = pullback_leg(&e.m, u).then(&f);
                    let t2: Vec<usize> = u.table.iter().map(|&a| e.t[a]).collect();
                    to.class_of_parts(n, &m2, &f2, &t2)
                        .expect("reindexed bundle escapes the truncation")
                })
                .collect()
        })
        .collect();
    let nt = NatTrans { components };
    debug_assert!(nt.check_naturality(&from.presheaf, &to.presheaf).is_none());
    nt
}

// ---------------------------------------------------------------------------
// X ◇ Y
// ---------------------------------------------------------------------------

/// One spanning element of `(X ◇ Y)(n)`: an outer stage `a`, an element
/// `x ∈ X(a)`, and a bundle `(m, fidx, t)` over `a` with `t_i ∈ Y(m_i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorElem {
    pub a: usize,
    pub x: usize,
    pub m: Vec<usize>,
    pub fidx: usize,
    pub t: Vec<usize>,
}

struct TBlock {
    a: usize,
    m: Vec<usize>,
    offset: usize,
    homs: Arc<HomSet>,
    xsize: usize,
    tsizes: Vec<usize>,
    tprod: usize,
}

impl TBlock {
    fn len(&self) -> usize {
        self.homs.homs.len() * self.xsize * self.tprod
    }
}

struct TStage {
    blocks: Vec<TBlock>,
    index: BTreeMap<(usize, Vec<usize>), usize>,
    total: usize,
    class_of: Vec<usize>,
    reps: Vec<usize>,
}

/// The substitution tensor `X ◇ Y`, with its spanning data.
pub struct SubstTensor {
    pub inner_bound: usize,
    pub presheaf: TruncPresheaf,
    pub stability: Stability,
    stages: Vec<TStage>,
}

impl SubstTensor {
    pub fn span_count(&self, n: usize) -> usize {
        self.stages[n].total
    }

    pub fn span(&self, n: usize, flat: usize) -> TensorElem {
        let st = &self.stages[n];
        let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
        let blk = &st.blocks[b];
        let local = flat - blk.offset;
        let tcode = local % blk.tprod;
        let rest = local / blk.tprod;
        TensorElem {
            a: blk.a,
            x: rest % blk.xsize,
            m: blk.m.clone(),
            fidx: rest / blk.xsize,
            t: radix_decode(tcode, &blk.tsizes),
        }
    }

    pub fn class_of_flat(&self, n: usize, flat: usize) -> usize {
        self.stages[n].class_of[flat]
    }

    pub fn rep(&self, n: usize, class: usize) -> TensorElem {
        self.span(n, self.stages[n].reps[class])
    }

    pub fn span_mor(&self, n: usize, e: &TensorElem) -> Mor {
        let st = &self.stages[n];
        st.blocks[st.index[&(e.a, e.m.clone())]].homs.homs[e.fidx].clone()
    }

    pub fn class_of_span(&self, n: usize, e: &TensorElem) -> usize {
        let st = &self.stages[n];
        let blk = &st.blocks[st.index[&(e.a, e.m.clone())]];
        st.class_of[blk.offset + (e.fidx * blk.xsize + e.x) * blk.tprod + radix_encode(&e.t, &blk.tsizes)]
    }

    /// The class of explicit spanning parts, or `None` if out of range.
    pub fn class_of_parts(
        &self,
        n: usize,
        a: usize,
        m: &[usize],
        f: &Mor,
        x: usize,
        t: &[usize],
    ) -> Option<usize> {
        let st = self.stages.get(n)?;
        let blk = &st.blocks[*st.index.get(&(a, m.to_vec()))?];
        let fidx = *blk.homs.pos.get(&f.table)?;
        if x >= blk.xsize || t.len() != blk.tsizes.len() || t.iter().zip(&blk.tsizes).any(|(&v, &s)| v >= s) {
            return None;
        }
        Some(st.class_of[blk.offset + (fidx * blk.xsize + x) * blk.tprod + radix_encode(t, &blk.tsizes)])
    }
}

fn tensor_core(
    x: &TruncPresheaf,
    y: &TruncPresheaf,
    inner: usize,
    cache: &mut HomCache,
) -> (Vec<TStage>, TruncPresheaf) {
    let cat = x.cat;
    let bound = x.bound;
    let gens = cat.generators(inner);

    let mut stages: Vec<TStage> = Vec::with_capacity(bound + 1);
    for n in 0..=bound {
        let mut blocks = Vec::new();
        let mut index = BTreeMap::new();
        let mut offset = 0;
        for a in 0..=inner {
            for m in mult_vectors(a, inner) {
                let homs = hom_set(cache, cat, m.iter().sum(), n);
                let tsizes: Vec<usize> = m.iter().map(|&k| y.size(k)).collect();
                let tprod: usize = tsizes.iter().product();
                index.insert((a, m.clone()), blocks.len());
                blocks.push(TBlock { a, m, offset, homs, xsize: x.size(a), tsizes, tprod });
                offset += blocks.last().unwrap().len();
            }
        }
        let total = offset;
        let mut uf = UnionFind::new(total);

        // bundle identifications, per outer stage and fiber coordinate
        for blk in &blocks {
            if blk.len() == 0 {
                continue;
            }
            for i in 0..blk.m.len() {
                for u in gens.iter().filter(|u| u.cod == blk.m[i]) {
                    let mut m_from = blk.m.clone();
                    m_from[i] = u.dom;
                    let from = &blocks[index[&(blk.a, m_from)]];
                    if from.len() == 0 {
                        continue;
                    }
                    let expand = expand_at(&blk.m, i, u);
                    let uact: Vec<usize> = (0..y.size(u.dom)).map(|v| y.act(u, v)).collect();
                    let lo: usize = from.tsizes[..i].iter().product();
                    let s_from = from.tsizes[i];
                    let s_to = blk.tsizes[i];
                    let hi: usize = from.tsizes[i + 1..].iter().product();
                    for (fidx, h) in blk.homs.homs.iter().enumerate() {
                        let composed = expand.then(h);
                        let cidx = from.homs.pos[&composed.table];
                        for xi in 0..blk.xsize {
                            let from_base = from.offset + (cidx * from.xsize + xi) * from.tprod;
                            let to_base = blk.offset + (fidx * blk.xsize + xi) * blk.tprod;
                            for h_part in 0..hi {
                                for ti in 0..s_from {
                                    let to_ti = uact[ti];
                                    for l_part in 0..lo {
                                        uf.union(
                                            from_base + (h_part * s_from + ti) * lo + l_part,
                                            to_base + (h_part * s_to + to_ti) * lo + l_part,
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        // outer identifications along generators u : A → A′:
        // (A, x, m′∘u, p_u;f, t′∘u) ~ (A′, u·x, m′, f, t′)
        for u in &gens {
            let xact: Vec<usize> = (0..x.size(u.dom)).map(|v| x.act(u, v)).collect();
            for m2 in mult_vectors(u.cod, inner) {
                let to = &blocks[index[&(u.cod, m2.clone())]];
                if to.homs.homs.is_empty() || to.tprod == 0 {
                    continue;
                }
                let m_from: Vec<usize> = u.table.iter().map(|&a| m2[a]).collect();
                let from = &blocks[index[&(u.dom, m_from)]];
                if from.xsize == 0 || from.tprod == 0 {
                    continue;
                }
                let leg = pullback_leg(&m2, u);
                for (fidx, h) in to.homs.homs.iter().enumerate() {
                    let composed = leg.then(h);
                    let cidx = from.homs.pos[&composed.table];
                    for tcode in 0..to.tprod {
                        let t2 = radix_decode(tcode, &to.tsizes);
                        let t_from: Vec<usize> = u.table.iter().map(|&a| t2[a]).collect();
                        let fcode = radix_encode(&t_from, &from.tsizes);
                        for (xi, &uxi) in xact.iter().enumerate() {
                            uf.union(
                                from.offset + (cidx * from.xsize + xi) * from.tprod + fcode,
                                to.offset + (fidx * to.xsize + uxi) * to.tprod + tcode,
                            );
                        }
                    }
                }
            }
        }

        let (class_of, reps) = assign_classes(&mut uf, total);
        stages.push(TStage { blocks, index, total, class_of, reps });
    }

    let labels: Vec<Vec<String>> = stages
        .iter()
        .map(|st| {
            st.reps
                .iter()
                .map(|&flat| {
                    let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
                    let blk = &st.blocks[b];
                    let local = flat - blk.offset;
                    let tcode = local % blk.tprod;
                    let rest = local / blk.tprod;
                    let f = &blk.homs.homs[rest / blk.xsize];
                    let t = radix_decode(tcode, &blk.tsizes);
                    let parts: Vec<&str> = t.iter().zip(&blk.m).map(|(&v, &k)| y.label(k, v)).collect();
                    format!(
                        "⟨{}; m={:?}; {f}; ({})⟩",
                        x.label(blk.a, rest % blk.xsize),
                        blk.m,
                        parts.join(", ")
                    )
                })
                .collect()
        })
        .collect();
    let presheaf = TruncPresheaf::from_fn(cat, bound, labels, |h, c| {
        let st = &stages[h.dom];
        let flat = st.reps[c];
        let b = st.blocks.partition_point(|blk| blk.offset <= flat) - 1;
        let blk = &st.blocks[b];
        let local = flat - blk.offset;
        let composed = blk.homs.homs[(local / blk.tprod) / blk.xsize].then(h);
        let tgt = &stages[h.cod];
        let tblk = &tgt.blocks[tgt.index[&(blk.a, blk.m.clone())]];
        let fidx = tblk.homs.pos[&composed.table];
        let xi = (local / blk.tprod) % blk.xsize;
        tgt.class_of[tblk.offset + (fidx * tblk.xsize + xi) * tblk.tprod + local % blk.tprod]
    });
    debug_assert!(presheaf.check_functoriality().is_none());
    (stages, presheaf)
}

/// Computes `X ◇ Y` with outer stages and multiplicities truncated at
/// `inner_bound`.
pub fn subst_tensor(x: &TruncPresheaf, y: &TruncPresheaf, inner_bound: usize) -> SubstTensor {
    assert_contextual(x.cat);
    assert_eq!(x.cat, y.cat);
    assert_eq!(x.bound, y.bound);
    let mut cache = HomCache::new();
    let (stages, presheaf) = tensor_core(x, y, inner_bound, &mut cache);
    let stability = if inner_bound == 0 {
        Stability::Stable
    } else {
        let (smaller, _) = tensor_core(x, y, inner_bound - 1, &mut cache);
        compare_counts(
            &stages.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            &smaller.iter().map(|s| s.reps.len()).collect::<Vec<_>>(),
            inner_bound,
        )
    };
    SubstTensor { inner_bound, presheaf, stability, stages }
}

// ---------------------------------------------------------------------------
// Structural morphisms
// ---------------------------------------------------------------------------

/// The left unitor `V ◇ Y ≅ Y` for `V` the representable of stage 1: a
/// spanning element reindexes along its variable `x : 1 → a` to a bundle
/// with a single fiber, which evaluates in `Y` by its gluing morphism.
pub fn left_unitor(vy: &SubstTensor, y: &TruncPresheaf) -> NatTrans {
    let cat = y.cat;
    let var_homs: Vec<Vec<Mor>> = (0..=y.bound).map(|a| cat.hom(1, a)).collect();
    let components = (0..=y.bound)
        .map(|n| {
            (0..vy.presheaf.size(n))
                .map(|c| {
                    let e = vy.rep(n, c);
                    let f = vy.span_mor(n, &e);
                    let i = var_homs[e.a][e.x].table[0];
                    let evaluate = block_inclusion(&e.m, i).then(&f);
                    assert!(cat.contains(&evaluate), "unitor left the index category");
                    y.act(&evaluate, e.t[i])
                })
                .collect()
        })
        .collect();
    let nt = NatTrans { components };
    debug_assert!(nt.check_naturality(&vy.presheaf, y).is_none());
    nt
}

/// The right unitor `X ◇ V ≅ X`: each fiber of the bundle carries a single
/// variable, so the tuple assembles a morphism `a → Σm` which composes with
/// the gluing morphism and acts on `x`.
pub fn right_unitor(xv: &SubstTensor, x: &TruncPresheaf) -> NatTrans {
    let cat = x.cat;
    let var_homs: Vec<Vec<Mor>> = (0..=x.bound).map(|k| cat.hom(1, k)).collect();
    let components = (0..=x.bound)
        .map(|n| {
            (0..xv.presheaf.size(n))
                .map(|c| {
                    let e = xv.rep(n, c);
                    let f = xv.span_mor(n, &e);
                    let offsets: Vec<usize> = e.m.iter().scan(0, |acc, &v| {
                        let o = *acc;
                        *acc += v;
                        Some(o)
                    }).collect();
                    let table: Vec<usize> = e
                        .t
                        .iter()
                        .enumerate()
                        .map(|(i, &ti)| offsets[i] + var_homs[e.m[i]][ti].table[0])
                        .collect();
                    let g = Mor::new(e.a, e.m.iter().sum(), table);
                    let composed = g.then(&f);
                    assert!(cat.contains(&composed), "unitor left the index category");
                    x.act(&composed, e.x)
                })
                .collect()
        })
        .collect();
    let nt = NatTrans { components };
    debug_assert!(nt.check_naturality(&xv.presheaf, x).is_none());
    nt
}

/// Fully unfolded spanning data of `((X ◇ Y) ◇ Z)(n)`: the outer stage `b`
/// with `x ∈ X(b)`, the middle bundle `(m', f', t')` over `b` with
/// `t'_j ∈ Y(m'_j)`, and the inner bundle `(m, f, t)` over the middle
/// codomain stage with `t_a ∈ Z(m_a)`.
#[derive(Clone, Debug)]
pub struct RawTriple {
    pub b: usize,
    pub x: usize,
    pub mp: Vec<usize>,
    pub fp: Mor,
    pub tp: Vec<usize>,
    pub m: Vec<usize>,
    pub f: Mor,
    pub t: Vec<usize>,
}

/// Evaluates a raw triple as a class of `(X ◇ Y) ◇ Z` at stage `n`.
pub fn left_assoc_class(n: usize, raw: &RawTriple, xy: &SubstTensor, xy_z: &SubstTensor) -> Option<usize> {
    let a = raw.fp.cod;
    let mid = xy.class_of_parts(a, raw.b, &raw.mp, &raw.fp, raw.x, &raw.tp)?;
    xy_z.class_of_parts(n, a, &raw.m, &raw.f, mid, &raw.t)
}

/// Evaluates a raw triple as a class of `X ◇ (Y ◇ Z)` at stage `n`: each
/// middle fiber collects the inner fibers of the variables it mentions,
/// giving a composite bundle over the outer stage.
pub fn right_assoc_class(n: usize, raw: &RawTriple, yz: &SubstTensor, x_yz: &SubstTensor) -> Option<usize> {
    let mut offp = 0;
    let mut big_m = Vec::with_capacity(raw.b);
    let mut big_t = Vec::with_capacity(raw.b);
    for (j, &mpj) in raw.mp.iter().enumerate() {
        // fibers of the composite bundle over this middle fiber's variables
        let vars: Vec<usize> = raw.fp.table[offp..offp + mpj].to_vec();
        offp += mpj;
        let mu: Vec<usize> = vars.iter().map(|&aa| raw.m[aa]).collect();
        let total: usize = mu.iter().sum();
        let zparts: Vec<usize> = vars.iter().map(|&aa| raw.t[aa]).collect();
        let class = yz.class_of_parts(total, mpj, &mu, &Mor::identity(total), raw.tp[j], &zparts)?;
        big_m.push(total);
        big_t.push(class);
    }
    let fbig = pullback_leg(&raw.m, &raw.fp).then(&raw.f);
    x_yz.class_of_parts(n, raw.b, &big_m, &fbig, raw.x, &big_t)
}

/// Unfolds a spanning element of `(X ◇ Y) ◇ Z` by replacing its middle
/// class with that class's representative span.
pub fn unfold_triple(n: usize, e: &TensorElem, xy: &SubstTensor, xy_z: &SubstTensor) -> RawTriple {
    let mid = xy.rep(e.a, e.x);
    RawTriple {
        b: mid.a,
        x: mid.x,
        mp: mid.m.clone(),
        fp: xy.span_mor(e.a, &mid),
        tp: mid.t,
        m: e.m.clone(),
        f: xy_z.span_mor(n, e),
        t: e.t.clone(),
    }
}

/// The associator `(X ◇ Y) ◇ Z → X ◇ (Y ◇ Z)` on classes.
pub fn assoc(xy_z: &SubstTensor, xy: &SubstTensor, yz: &SubstTensor, x_yz: &SubstTensor) -> NatTrans {
    let bound = xy_z.presheaf.bound;
    let components = (0..=bound)
        .map(|n| {
            (0..xy_z.presheaf.size(n))
                .map(|c| {
                    let e = xy_z.rep(n, c);
                    let raw = unfold_triple(n, &e, xy, xy_z);
                    right_assoc_class(n, &raw, yz, x_yz)
                        .expect("associator image escapes the truncation")
                })
                .collect()
        })
        .collect();
    let nt = NatTrans { components };
    debug_assert!(nt.check_naturality(&xy_z.presheaf, &x_yz.presheaf).is_none());
    nt
}

/// The comparison `X ⊗ Y → X ◇ Y` from the uniform tensor: a spanning
/// element `(j : a × b → n, x, y)` becomes the bundle with `a` fibers of
/// size `b`, glued by `j` under the pair encoding, with `y` in every fiber.
pub fn phi(d: &DayResult, t: &SubstTensor) -> NatTrans {
    assert_eq!(d.kind, DayKind::Product);
    let bound = d.presheaf.bound;
    let components = (0..=bound)
        .map(|n| {
            (0..d.presheaf.size(n))
                .map(|c| {
                    let e = d.rep(n, c);
                    let f = d.span_mor(n, &e).clone();
                    let m = vec![e.b; e.a];
                    let tt = vec![e.y; e.a];
                    t.class_of_parts(n, e.a, &m, &f, e.x, &tt)
                        .expect("comparison image escapes the truncation")
                })
                .collect()
        })
        .collect();
    let nt = NatTrans { components };
    debug_assert!(nt.check_naturality(&d.presheaf, &t.presheaf).is_none());
    nt
}

/// The distributivity comparison `(X ⊕ Y) ◇ Z → (X ◇ Z) ⊕ (Y ◇ Z)`: the
/// outer element decides the summand. The target is the presheaf sum of the
/// two tensors.
pub fn distributivity(
    sum_z: &SubstTensor,
    x: &TruncPresheaf,
    xz: &SubstTensor,
    yz: &SubstTensor,
) -> NatTrans {
    let bound = sum_z.presheaf.bound;
    let components = (0..=bound)
        .map(|n| {
            let offset = xz.presheaf.size(n);
            (0..sum_z.presheaf.size(n))
                .map(|c| {
                    let e = sum_z.rep(n, c);
                    let f = sum_z.span_mor(n, &e);
                    if e.x < x.size(e.a) {
                        xz.class_of_parts(n, e.a, &e.m, &f, e.x, &e.t)
                            .expect("distributivity image escapes the truncation")
                    } else {
                        offset
                            + yz.class_of_parts(n, e.a, &e.m, &f, e.x - x.size(e.a), &e.t)
                                .expect("distributivity image escapes the truncation")
                    }
                })
                .collect()
        })
        .collect();
    NatTrans { components }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presheaf::{day, nat_iso_search};

    fn y(cat: IndexCat, a: usize, bound: usize) -> TruncPresheaf {
        TruncPresheaf::representable(cat, a, bound)
    }

    #[test]
    fn empty_sub_is_the_stage_zero_representable() {
        for cat in [IndexCat::I, IndexCat::F] {
            let x = TruncPresheaf::sum(&[y(cat, 1, 3), y(cat, 0, 3)]);
            let s = sub_presheaf(0, &x, 3);
            assert_eq!(s.stability, Stability::Stable);
            assert!(nat_iso_search(&s.presheaf, &y(cat, 0, 3)).is_some(), "{}", cat.name());
        }
    }

    #[test]
    fn singleton_sub_is_the_identity() {
        for cat in [IndexCat::I, IndexCat::F] {
            let x = TruncPresheaf::sum(&[y(cat, 1, 3), y(cat, 0, 3)]);
            let s = sub_presheaf(1, &x, 3);
            assert!(nat_iso_search(&s.presheaf, &x).is_some(), "{}", cat.name());
        }
    }

    #[test]
    fn sub_of_variables_is_representable() {
        for cat in [IndexCat::I, IndexCat::F] {
            for a in 0..=3 {
                let s = sub_presheaf(a, &y(cat, 1, 3), 3);
                assert!(
                    nat_iso_search(&s.presheaf, &y(cat, a, 3)).is_some(),
                    "{} at {a}",
                    cat.name()
                );
            }
        }
    }

    #[test]
    fn sub_matches_the_day_power() {
        for cat in [IndexCat::I, IndexCat::F] {
            let x = TruncPresheaf::sum(&[y(cat, 1, 3), y(cat, 0, 3)]);
            let s = sub_presheaf(2, &x, 3);
            let d = day(DayKind::Sum, &x, &x, 3);
            assert!(nat_iso_search(&s.presheaf, &d.presheaf).is_some(), "{}", cat.name());
        }
    }

    #[test]
    fn reindexing_is_functorial_and_respects_identity() {
        let cat = IndexCat::I;
        let x = y(cat, 1, 3);
        let s3 = sub_presheaf(3, &x, 3);
        let s2 = sub_presheaf(2, &x, 3);
        let s1 = sub_presheaf(1, &x, 3);
        let id = sub_reindex(&Mor::identity(3), &s3, &s3);
        assert_eq!(id, NatTrans::identity(&s3.presheaf));
        let u = Mor::new(1, 2, vec![1]);
        let v = Mor::new(2, 3, vec![0, 2]);
        let via = sub_reindex(&v, &s3, &s2).then(&sub_reindex(&u, &s2, &s1));
        let direct = sub_reindex(&u.then(&v), &s3, &s1);
        assert_eq!(via, direct);
    }

    #[test]
    fn reindexing_is_well_defined_on_all_spans() {
        let cat = IndexCat::I;
        let x = TruncPresheaf::sum(&[y(cat, 1, 3), y(cat, 0, 3)]);
        let s2 = sub_presheaf(2, &x, 3);
        let s1 = sub_presheaf(1, &x, 3);
        let u = Mor::new(1, 2, vec![0]);
        let nt = sub_reindex(&u, &s2, &s1);
        for n in 0..=3 {
            for flat in 0..s2.span_count(n) {
                let e = s2.span(n, flat);
                let f = s2.span_mor(n, &e);
                let m2: Vec<usize> = u.table.iter().map(|&a| e.m[a]).collect();
                let f2 = pullback_leg(&e.m, &u).then(&f);
                let t2: Vec<usize> = u.table.iter().map(|&a| e.t[a]).collect();
                assert_eq!(
                    s1.class_of_parts(n, &m2, &f2, &t2).unwrap(),
                    nt.apply(n, s2.class_of_flat(n, flat)),
                );
            }
        }
    }

    #[test]
    fn unit_laws_of_the_tensor() {
        for cat in [IndexCat::B, IndexCat::I, IndexCat::S] {
            let v = y(cat, 1, 3);
            let x = TruncPresheaf::sum(&[v.clone(), y(cat, if cat == IndexCat::S { 3 } else { 2 }, 3)]);
            let vx = subst_tensor(&v, &x, 3);
            let lam = left_unitor(&vx, &x);
            assert!(lam.is_bijective(&vx.presheaf, &x), "left unitor over {}", cat.name());
            let xv = subst_tensor(&x, &v, 3);
            let rho = right_unitor(&xv, &x);
            assert!(rho.is_bijective(&xv.presheaf, &x), "right unitor over {}", cat.name());
        }
    }

    #[test]
    fn unit_laws_over_all_functions_at_a_small_bound() {
        let cat = IndexCat::F;
        let v = y(cat, 1, 2);
        let x = TruncPresheaf::sum(&[v.clone(), y(cat, 0, 2)]);
        let vx = subst_tensor(&v, &x, 2);
        assert!(left_unitor(&vx, &x).is_bijective(&vx.presheaf, &x));
        let xv = subst_tensor(&x, &v, 2);
        assert!(right_unitor(&xv, &x).is_bijective(&xv.presheaf, &x));
        assert_eq!(vx.stability, Stability::Stable);
    }

    #[test]
    fn tensor_by_variables_fixes_representables() {
        // y_a ◇ V ≅ y_a: the bundle is forced to pick one variable per slot
        let cat = IndexCat::I;
        for a in 0..=2 {
            let x = y(cat, a, 3);
            let v = y(cat, 1, 3);
            let t = subst_tensor(&x, &v, 3);
            assert!(right_unitor(&t, &x).is_bijective(&t.presheaf, &x), "stage {a}");
        }
    }

    #[test]
    fn distributivity_is_a_natural_bijection() {
        let cat = IndexCat::I;
        let x = y(cat, 1, 3);
        let yy = TruncPresheaf::sum(&[y(cat, 0, 3), y(cat, 2, 3)]);
        let z = TruncPresheaf::sum(&[y(cat, 1, 3), y(cat, 0, 3)]);
        let xy = TruncPresheaf::sum(&[x.clone(), yy.clone()]);
        let sum_z = subst_tensor(&xy, &z, 3);
        let xz = subst_tensor(&x, &z, 3);
        let yz = subst_tensor(&yy, &z, 3);
        let target = TruncPresheaf::sum(&[xz.presheaf.clone(), yz.presheaf.clone()]);
        let nt = distributivity(&sum_z, &x, &xz, &yz);
        assert!(nt.check_naturality(&sum_z.presheaf, &target).is_none());
        assert!(nt.is_bijective(&sum_z.presheaf, &target));
    }

    #[test]
    fn comparison_from_the_uniform_tensor_is_well_defined() {
        for cat in [IndexCat::I, IndexCat::F] {
            let bound = if cat == IndexCat::F { 2 } else { 3 };
            let v = y(cat, 1, bound);
            let d = day(DayKind::Product, &v, &v, bound);
            let t = subst_tensor(&v, &v, bound);
            let nt = phi(&d, &t);
            // well-definedness on every spanning element, not just reps
            for n in 0..=bound {
                for e in d.spans(n) {
                    let f = d.span_mor(n, e).clone();
                    let m = vec![e.b; e.a];
                    let tt = vec![e.y; e.a];
                    let target = t.class_of_parts(n, e.a, &m, &f, e.x, &tt).unwrap();
                    assert_eq!(target, nt.apply(n, d.class_of_span(n, e)), "{}", cat.name());
                }
            }
        }
    }

    #[test]
    fn associator_is_a_natural_bijection_on_variables() {
        for cat in [IndexCat::B, IndexCat::I] {
            let v = y(cat, 1, 3);
            let w = if cat == IndexCat::B {
                v.clone()
            } else {
                TruncPresheaf::sum(&[v.clone(), y(cat, 0, 3)])
            };
            let xy = subst_tensor(&v, &w, 3);
            let yz = subst_tensor(&w, &v, 3);
            let xy_z = subst_tensor(&xy.presheaf, &v, 3);
            let x_yz = subst_tensor(&v, &yz.presheaf, 3);
            let al = assoc(&xy_z, &xy, &yz, &x_yz);
            assert!(al.is_bijective(&xy_z.presheaf, &x_yz.presheaf), "{}", cat.name());
            // well-definedness: every unfolding of every span agrees
            for n in 0..=3 {
                for flat in 0..xy_z.span_count(n) {
                    let e = xy_z.span(n, flat);
                    let raw = unfold_triple(n, &e, &xy, &xy_z);
                    let lhs = left_assoc_class(n, &raw, &xy, &xy_z).unwrap();
                    assert_eq!(lhs, xy_z.class_of_flat(n, flat));
                    let rhs = right_assoc_class(n, &raw, &yz, &x_yz).unwrap();
                    assert_eq!(rhs, al.apply(n, lhs), "{}", cat.name());
                }
            }
        }
    }

    #[test]
    fn truncation_instability_is_reported_over_surjections() {
        // over surjections a stage-3 element only enters the tensor once the
        // inner bound reaches its stage
        let cat = IndexCat::S;
        let x = y(cat, 3, 3);
        let v = y(cat, 1, 3);
        let t = subst_tensor(&x, &v, 3);
        match t.stability {
            Stability::TruncationUnstable { .. } => {}
            Stability::Stable => panic!("expected instability for a high-stage representable"),
        }
    }
}
