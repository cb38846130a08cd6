//! Day convolution of truncated presheaves.
//!
//! For a monoidal structure `⊗` on stages (sum or product of finite sets),
//! the convolution of `F` and `G` has, at stage `n`, the coend over inner
//! stages `a, b` of `hom(a ⊗ b, n) × F(a) × G(b)`. Inner stages are
//! truncated at a bound; the result carries a stability diagnostic that
//! recomputes with the next-smaller inner bound and compares class counts.

use std::collections::BTreeMap;

use crate::finset::Mor;
use crate::presheaf::{TruncPresheaf, UnionFind};

/// Which monoidal structure on stages the convolution uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DayKind {
    /// Stage sum; the unit is the representable of stage 0.
    Sum,
    /// Stage product with pairs `(x, y)` encoded as `x * |B| + y`; the unit
    /// is the representable of stage 1.
    Product,
}

impl DayKind {
    pub fn obj(self, a: usize, b: usize) -> usize {
        match self {
            DayKind::Sum => a + b,
            DayKind::Product => a * b,
        }
    }

    pub fn tensor(self, u: &Mor, v: &Mor) -> Mor {
        match self {
            DayKind::Sum => u.sum(v),
            DayKind::Product => u.product(v),
        }
    }

    pub fn unit_object(self) -> usize {
        match self {
            DayKind::Sum => 0,
            DayKind::Product => 1,
        }
    }
}

/// One spanning element of the convolution at an output stage: inner stages
/// `a, b`, an index `fidx` into the hom list `hom(a ⊗ b, n)`, and element
/// indices `x ∈ F(a)`, `y ∈ G(b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DayElem {
    pub a: usize,
    pub b: usize,
    pub fidx: usize,
    pub x: usize,
    pub y: usize,
}

/// Whether the truncated computation agreed with the next-smaller inner
/// bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    TruncationUnstable {
        stage: usize,
        inner: usize,
        classes: usize,
        classes_smaller: usize,
    },
}

struct HomBlock {
    offset: usize,
    homs: Vec<Mor>,
    pos: BTreeMap<Vec<usize>, usize>,
}

struct StageData {
    blocks: BTreeMap<(usize, usize), HomBlock>,
    spans: Vec<DayElem>,
    class_of: Vec<usize>,
    reps: Vec<usize>,
}

/// The computed convolution: its presheaf together with the spanning data
/// the quotient was taken over.
pub struct DayResult {
    pub kind: DayKind,
    pub inner_bound: usize,
    pub presheaf: TruncPresheaf,
    pub stability: Stability,
    stages: Vec<StageData>,
    fsizes: Vec<usize>,
    gsizes: Vec<usize>,
}

impl DayResult {
    /// All spanning elements at a stage, in flat enumeration order.
    pub fn spans(&self, n: usize) -> &[DayElem] {
        &self.stages[n].spans
    }

    /// The class of a spanning element at a stage.
    pub fn class_of_span(&self, n: usize, e: &DayElem) -> usize {
        self.stages[n].class_of[self.flat(n, e)]
    }

    /// The representative spanning element of a class at a stage.
    pub fn rep(&self, n: usize, class: usize) -> DayElem {
        self.stages[n].spans[self.stages[n].reps[class]]
    }

    /// The morphism `a ⊗ b → n` of a spanning element.
    pub fn span_mor(&self, n: usize, e: &DayElem) -> &Mor {
        &self.stages[n].blocks[&(e.a, e.b)].homs[e.fidx]
    }

    /// The class of the spanning element with the given explicit morphism,
    /// or `None` when the inner stages or morphism are out of range.
    pub fn class_of_parts(&self, n: usize, a: usize, b: usize, f: &Mor, x: usize, y: usize) -> Option<usize> {
        if a >= self.fsizes.len() || b >= self.gsizes.len() || a > self.inner_bound || b > self.inner_bound {
            return None;
        }
        let block = self.stages.get(n)?.blocks.get(&(a, b))?;
        let fidx = *block.pos.get(&f.table)?;
        Some(self.stages[n].class_of[self.flat(n, &DayElem { a, b, fidx, x, y })])
    }

    fn flat(&self, n: usize, e: &DayElem) -> usize {
        let block = &self.stages[n].blocks[&(e.a, e.b)];
        block.offset + (e.fidx * self.fsizes[e.a] + e.x) * self.gsizes[e.b] + e.y
    }
}

fn day_core(kind: DayKind, f: &TruncPresheaf, g: &TruncPresheaf, inner: usize) -> (Vec<StageData>, TruncPresheaf) {
    let cat = f.cat;
    let bound = f.bound;
    let fsizes: Vec<usize> = (0..=inner).map(|a| f.size(a)).collect();
    let gsizes: Vec<usize> = (0..=inner).map(|b| g.size(b)).collect();

    let mut stages: Vec<StageData> = Vec::with_capacity(bound + 1);
    for n in 0..=bound {
        let mut blocks = BTreeMap::new();
        let mut spans = Vec::new();
        let mut offset = 0;
        for a in 0..=inner {
            for b in 0..=inner {
                let homs = cat.hom(kind.obj(a, b), n);
                let pos: BTreeMap<Vec<usize>, usize> =
                    homs.iter().enumerate().map(|(i, h)| (h.table.clone(), i)).collect();
                for fidx in 0..homs.len() {
                    for x in 0..fsizes[a] {
                        for y in 0..gsizes[b] {
                            spans.push(DayElem { a, b, fidx, x, y });
                        }
                    }
                }
                let size = homs.len() * fsizes[a] * gsizes[b];
                blocks.insert((a, b), HomBlock { offset, homs, pos });
                offset += size;
            }
        }
        let flat = |blocks: &BTreeMap<(usize, usize), HomBlock>, e: &DayElem| {
            blocks[&(e.a, e.b)].offset + (e.fidx * fsizes[e.a] + e.x) * gsizes[e.b] + e.y
        };

        let mut uf = UnionFind::new(spans.len());
        // Generator edges suffice: the identification for a composite
        // morphism follows by transitivity through its factors, and acting
        // on one side at a time composes to the general simultaneous case.
        for u in cat.generators(inner) {
            // left factor: (α, b, (u ⊗ id);f, x, y) ~ (α', b, f, u·x, y)
            for b in 0..=inner {
                let from_block = &blocks[&(u.dom, b)];
                let to_block = &blocks[&(u.cod, b)];
                let tensored = kind.tensor(&u, &Mor::identity(b));
                for (fidx, h) in to_block.homs.iter().enumerate() {
                    let composed = tensored.then(h);
                    let cidx = from_block.pos[&composed.table];
                    for x in 0..fsizes[u.dom] {
                        let ux = f.act(&u, x);
                        for y in 0..gsizes[b] {
                            uf.union(
                                flat(&blocks, &DayElem { a: u.dom, b, fidx: cidx, x, y }),
                                flat(&blocks, &DayElem { a: u.cod, b, fidx, x: ux, y }),
                            );
                        }
                    }
                }
            }
            // right factor: (a, β, (id ⊗ u);f, x, y) ~ (a, β', f, x, u·y)
            for a in 0..=inner {
                let from_block = &blocks[&(a, u.dom)];
                let to_block = &blocks[&(a, u.cod)];
                let tensored = kind.tensor(&Mor::identity(a), &u);
                for (fidx, h) in to_block.homs.iter().enumerate() {
                    let composed = tensored.then(h);
                    let cidx = from_block.pos[&composed.table];
                    for x in 0..fsizes[a] {
                        for y in 0..gsizes[u.dom] {
                            let uy = g.act(&u, y);
                            uf.union(
                                flat(&blocks, &DayElem { a, b: u.dom, fidx: cidx, x, y }),
                                flat(&blocks, &DayElem { a, b: u.cod, fidx, x, y: uy }),
                            );
                        }
                    }
                }
            }
        }

        let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
        let mut class_of = Vec::with_capacity(spans.len());
        let mut reps = Vec::new();
        for i in 0..spans.len() {
            let root = uf.find(i);
            let next = roots.len();
            let id = *roots.entry(root).or_insert(next);
            if id == reps.len() {
                reps.push(i);
            }
            class_of.push(id);
        }
        stages.push(StageData { blocks, spans, class_of, reps });
    }

    // assemble the quotient presheaf: labels from representatives, action by
    // postcomposition on the morphism leg
    let labels: Vec<Vec<String>> = stages
        .iter()
        .map(|st| {
            st.reps
                .iter()
                .map(|&i| {
                    let e = &st.spans[i];
                    let h = &st.blocks[&(e.a, e.b)].homs[e.fidx];
                    format!("⟨{h}; {}; {}⟩", f.label(e.a, e.x), g.label(e.b, e.y))
                })
                .collect()
        })
        .collect();
    let presheaf = TruncPresheaf::from_fn(cat, bound, labels, |h, c| {
        let st = &stages[h.dom];
        let e = &st.spans[st.reps[c]];
        let composed = st.blocks[&(e.a, e.b)].homs[e.fidx].then(h);
        let tgt = &stages[h.cod];
        let block = &tgt.blocks[&(e.a, e.b)];
        let fidx = block.pos[&composed.table];
        let flat = block.offset + (fidx * fsizes[e.a] + e.x) * gsizes[e.b] + e.y;
        tgt.class_of[flat]
    });
    debug_assert!(presheaf.check_functoriality().is_none());
    (stages, presheaf)
}

/// Computes the Day convolution of `f` and `g` with inner stages truncated
/// at `inner_bound`.
pub fn day(kind: DayKind, f: &TruncPresheaf, g: &TruncPresheaf, inner_bound: usize) -> DayResult {
    assert_eq!(f.cat, g.cat);
    assert_eq!(f.bound, g.bound);
    assert!(inner_bound <= f.bound && inner_bound <= g.bound);
    let (stages, presheaf) = day_core(kind, f, g, inner_bound);
    let stability = if inner_bound == 0 {
        Stability::Stable
    } else {
        let (smaller, _) = day_core(kind, f, g, inner_bound - 1);
        match stages
            .iter()
            .zip(&smaller)
            .position(|(full, red)| full.reps.len() != red.reps.len())
        {
            None => Stability::Stable,
            Some(n) => Stability::TruncationUnstable {
                stage: n,
                inner: inner_bound,
                classes: stages[n].reps.len(),
                classes_smaller: smaller[n].reps.len(),
            },
        }
    };
    DayResult {
        kind,
        inner_bound,
        presheaf,
        stability,
        stages,
        fsizes: (0..=inner_bound).map(|a| f.size(a)).collect(),
        gsizes: (0..=inner_bound).map(|b| g.size(b)).collect(),
    }
}
