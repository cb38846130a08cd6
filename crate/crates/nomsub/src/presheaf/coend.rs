//! Coends of tabulated bifunctors, computed by union-find.
//!
//! A bifunctor `H` is contravariant in its first argument and covariant in
//! its second; its coend identifies `x·f` with `f·x` for every morphism
//! `f : i → j` and every `x` in `H(j, i)`. Classes get canonical
//! representatives: the least `(stage, index)` pair of each class.

use std::collections::BTreeMap;

use crate::finset::{IndexCat, Mor};

/// Disjoint-set forest with union by size and path compression.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when the two sets were distinct.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (mut rx, mut ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        if self.size[rx] < self.size[ry] {
            std::mem::swap(&mut rx, &mut ry);
        }
        self.parent[ry] = rx;
        self.size[rx] += self.size[ry];
        true
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

/// A bifunctor on an index category, tabulated for stages `0..=bound`.
///
/// `sizes[i][j]` is the cardinality of `H(i, j)`; `left` tabulates the
/// contravariant action `H(f, k) : H(j, k) → H(i, k)` for `f : i → j` under
/// key `(f, k)`, and `right` the covariant action `H(k, f)` under `(k, f)`.
#[derive(Clone, Debug)]
pub struct BifunctorTable {
    pub cat: IndexCat,
    pub bound: usize,
    pub sizes: Vec<Vec<usize>>,
    pub left: BTreeMap<(Mor, usize), Vec<usize>>,
    pub right: BTreeMap<(usize, Mor), Vec<usize>>,
}

impl BifunctorTable {
    /// Tabulates from action functions; `size(i, j) = |H(i, j)|`.
    pub fn from_fns(
        cat: IndexCat,
        bound: usize,
        size: impl Fn(usize, usize) -> usize,
        left: impl Fn(&Mor, usize, usize) -> usize,
        right: impl Fn(usize, &Mor, usize) -> usize,
    ) -> BifunctorTable {
        let sizes: Vec<Vec<usize>> = (0..=bound).map(|i| (0..=bound).map(|j| size(i, j)).collect()).collect();
        let mut lt = BTreeMap::new();
        let mut rt = BTreeMap::new();
        for f in cat.all_homs(bound) {
            for k in 0..=bound {
                let table: Vec<usize> = (0..sizes[f.cod][k]).map(|x| left(&f, k, x)).collect();
                assert!(table.iter().all(|&y| y < sizes[f.dom][k]));
                lt.insert((f.clone(), k), table);
                let table: Vec<usize> = (0..sizes[k][f.dom]).map(|x| right(k, &f, x)).collect();
                assert!(table.iter().all(|&y| y < sizes[k][f.cod]));
                rt.insert((k, f.clone()), table);
            }
        }
        BifunctorTable {
            cat,
            bound,
            sizes,
            left: lt,
            right: rt,
        }
    }

    pub fn act_left(&self, f: &Mor, k: usize, x: usize) -> usize {
        self.left[&(f.clone(), k)][x]
    }

    pub fn act_right(&self, k: usize, f: &Mor, x: usize) -> usize {
        self.right[&(k, f.clone())][x]
    }
}

/// The coend of a tabulated bifunctor.
#[derive(Clone, Debug)]
pub struct CoendResult {
    /// Diagonal carrier sizes, `|H(i, i)|` per stage.
    pub diag_sizes: Vec<usize>,
    /// Class index of each diagonal element, keyed by `(stage, index)`.
    pub class_of: BTreeMap<(usize, usize), usize>,
    /// Canonical representative of each class: its least `(stage, index)`.
    pub reps: Vec<(usize, usize)>,
}

impl CoendResult {
    pub fn class_count(&self) -> usize {
        self.reps.len()
    }
}

/// Computes the coend of `h` over stages `0..=h.bound` by identifying
/// `x·f` with `f·x` for every morphism and every element of `H(cod f, dom f)`.
pub fn coend_quotient(h: &BifunctorTable) -> CoendResult {
    let diag_sizes: Vec<usize> = (0..=h.bound).map(|i| h.sizes[i][i]).collect();
    let offsets: Vec<usize> = diag_sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let total: usize = diag_sizes.iter().sum();
    let mut uf = UnionFind::new(total);
    for f in h.cat.all_homs(h.bound) {
        let (i, j) = (f.dom, f.cod);
        for x in 0..h.sizes[j][i] {
            let lhs = h.act_left(&f, i, x);
            let rhs = h.act_right(j, &f, x);
            uf.union(offsets[i] + lhs, offsets[j] + rhs);
        }
    }
    let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
    let mut class_of = BTreeMap::new();
    let mut reps = Vec::new();
    for i in 0..=h.bound {
        for x in 0..diag_sizes[i] {
            let root = uf.find(offsets[i] + x);
            let next = roots.len();
            let id = *roots.entry(root).or_insert(next);
            if id == reps.len() {
                reps.push((i, x));
            }
            class_of.insert((i, x), id);
        }
    }
    CoendResult {
        diag_sizes,
        class_of,
        reps,
    }
}
