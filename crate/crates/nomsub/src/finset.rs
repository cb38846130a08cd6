//! Skeletal categories of finite sets.
//!
//! Objects are stages `n = {0, .., n-1}`; a morphism is a function given by
//! its table. Six wide subcategories of the category of all functions are
//! tagged: identities only (`J`), initial-segment inclusions (`ISub`),
//! bijections (`B`), injections (`I`), surjections (`S`), and all functions
//! (`F`). The module also provides canonical pullbacks, preimages, a
//! contextuality checker (stability of reindexing legs under pullback and
//! closure under sums, together with the product/primality criterion), and
//! the two coverages used by the sheaf checks.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::atoms::AtomSet;

/// A function between stages, tabulated. Serializes as `[dom, cod, table]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mor {
    pub dom: usize,
    pub cod: usize,
    pub table: Vec<usize>,
}

impl Mor {
    pub fn new(dom: usize, cod: usize, table: Vec<usize>) -> Mor {
        assert_eq!(table.len(), dom, "table length must equal the domain");
        assert!(table.iter().all(|&y| y < cod), "table entry out of codomain");
        Mor { dom, cod, table }
    }

    pub fn identity(n: usize) -> Mor {
        Mor::new(n, n, (0..n).collect())
    }

    /// The initial-segment inclusion `a ↪ b` (requires `a <= b`).
    pub fn inclusion(a: usize, b: usize) -> Mor {
        assert!(a <= b);
        Mor::new(a, b, (0..a).collect())
    }

    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    /// Diagrammatic composition: `self` then `g`.
    pub fn then(&self, g: &Mor) -> Mor {
        assert_eq!(self.cod, g.dom, "composition mismatch");
        Mor::new(self.dom, g.cod, self.table.iter().map(|&x| g.apply(x)).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.dom == self.cod && self.table.iter().enumerate().all(|(i, &y)| i == y)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.cod];
        for &y in &self.table {
            if seen[y] {
                return false;
            }
            seen[y] = true;
        }
        true
    }

    pub fn is_surjective(&self) -> bool {
        let mut seen = vec![false; self.cod];
        for &y in &self.table {
            seen[y] = true;
        }
        seen.into_iter().all(|b| b)
    }

    pub fn is_bijective(&self) -> bool {
        self.dom == self.cod && self.is_injective()
    }

    pub fn is_inclusion(&self) -> bool {
        self.dom <= self.cod && self.table.iter().enumerate().all(|(i, &y)| i == y)
    }

    /// `self + g`, acting on the left summand via `self` and the shifted
    /// right summand via `g`.
    pub fn sum(&self, g: &Mor) -> Mor {
        let mut table: Vec<usize> = self.table.clone();
        table.extend(g.table.iter().map(|&y| y + self.cod));
        Mor::new(self.dom + g.dom, self.cod + g.cod, table)
    }

    /// `self × g` on pair stages, with `(x, y)` encoded as `x * |B| + y`.
    pub fn product(&self, g: &Mor) -> Mor {
        let mut table = Vec::with_capacity(self.dom * g.dom);
        for x in 0..self.dom {
            for y in 0..g.dom {
                table.push(self.apply(x) * g.cod + g.apply(y));
            }
        }
        Mor::new(self.dom * g.dom, self.cod * g.cod, table)
    }

    /// The preimage of a subset of the codomain, sorted.
    pub fn preimage(&self, subset: &BTreeSet<usize>) -> Vec<usize> {
        (0..self.dom).filter(|&x| subset.contains(&self.table[x])).collect()
    }
}

impl fmt::Display for Mor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}→{}[", self.dom, self.cod)?;
        for (i, y) in self.table.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{y}")?;
        }
        write!(f, "]")
    }
}

impl Serialize for Mor {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        (&self.dom, &self.cod, &self.table).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Mor, D::Error> {
        let (dom, cod, table): (usize, usize, Vec<usize>) = Deserialize::deserialize(d)?;
        if table.len() != dom || table.iter().any(|&y| y >= cod) {
            return Err(D::Error::custom("invalid morphism table"));
        }
        Ok(Mor { dom, cod, table })
    }
}

/// A tagged wide subcategory of the category of finite stages.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum IndexCat {
    /// Identities only.
    J,
    /// Initial-segment inclusions.
    ISub,
    /// Bijections.
    B,
    /// Injections.
    I,
    /// Surjections.
    S,
    /// All functions.
    F,
}

impl IndexCat {
    pub fn name(&self) -> &'static str {
        match self {
            IndexCat::J => "J",
            IndexCat::ISub => "Isub",
            IndexCat::B => "B",
            IndexCat::I => "I",
            IndexCat::S => "S",
            IndexCat::F => "F",
        }
    }

    pub fn from_name(s: &str) -> Option<IndexCat> {
        match s {
            "J" => Some(IndexCat::J),
            "Isub" => Some(IndexCat::ISub),
            "B" => Some(IndexCat::B),
            "I" => Some(IndexCat::I),
            "S" => Some(IndexCat::S),
            "F" => Some(IndexCat::F),
            _ => None,
        }
    }

    pub fn contains(&self, f: &Mor) -> bool {
        match self {
            IndexCat::J => f.is_identity(),
            IndexCat::ISub => f.is_inclusion(),
            IndexCat::B => f.is_bijective(),
            IndexCat::I => f.is_injective(),
            IndexCat::S => f.is_surjective(),
            IndexCat::F => true,
        }
    }

    pub fn contains_all_isos(&self) -> bool {
        matches!(self, IndexCat::B | IndexCat::I | IndexCat::S | IndexCat::F)
    }

    /// All morphisms `a → b`, ordered lexicographically by table.
    pub fn hom(&self, a: usize, b: usize) -> Vec<Mor> {
        let mut out = Vec::new();
        if a == 0 {
            let f = Mor::new(0, b, vec![]);
            if self.contains(&f) {
                out.push(f);
            }
            return out;
        }
        if b == 0 {
            return out;
        }
        let mut table = vec![0usize; a];
        loop {
            let f = Mor {
                dom: a,
                cod: b,
                table: table.clone(),
            };
            if self.contains(&f) {
                out.push(f);
            }
            let mut i = a;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                table[i] += 1;
                if table[i] < b {
                    break;
                }
                table[i] = 0;
            }
        }
    }

    /// All morphisms with domain and codomain at most `bound`.
    pub fn all_homs(&self, bound: usize) -> Vec<Mor> {
        let mut out = Vec::new();
        for a in 0..=bound {
            for b in 0..=bound {
                out.extend(self.hom(a, b));
            }
        }
        out
    }

    /// A generating set for all homs with stages at most `bound`:
    /// adjacent transpositions, successive inclusions, and last-point folds,
    /// as appropriate for the tag. Generation is verified in tests.
    pub fn generators(&self, bound: usize) -> Vec<Mor> {
        let mut out = Vec::new();
        let transpositions = |out: &mut Vec<Mor>| {
            for n in 2..=bound {
                for i in 0..n - 1 {
                    let mut t: Vec<usize> = (0..n).collect();
                    t.swap(i, i + 1);
                    out.push(Mor::new(n, n, t));
                }
            }
        };
        let inclusions = |out: &mut Vec<Mor>| {
            for n in 0..bound {
                out.push(Mor::inclusion(n, n + 1));
            }
        };
        let folds = |out: &mut Vec<Mor>| {
            for n in 1..bound {
                let mut t: Vec<usize> = (0..n).collect();
                t.push(n - 1);
                out.push(Mor::new(n + 1, n, t));
            }
        };
        match self {
            IndexCat::J => {}
            IndexCat::ISub => inclusions(&mut out),
            IndexCat::B => transpositions(&mut out),
            IndexCat::I => {
                transpositions(&mut out);
                inclusions(&mut out);
            }
            IndexCat::S => {
                transpositions(&mut out);
                folds(&mut out);
            }
            IndexCat::F => {
                transpositions(&mut out);
                inclusions(&mut out);
                folds(&mut out);
            }
        }
        out
    }
}

/// A canonical pullback of `f : X → Y` along `b : B → Y`.
///
/// The carrier is the set of pairs `(x, β)` with `f(x) = b(β)` in
/// lexicographic order; `to_x` and `to_b` are the two projections, `to_b`
/// being the reindexing leg.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pullback {
    pub pairs: Vec<(usize, usize)>,
    pub to_x: Mor,
    pub to_b: Mor,
}

pub fn pullback(f: &Mor, b: &Mor) -> Pullback {
    assert_eq!(f.cod, b.cod, "pullback legs must share a codomain");
    let mut pairs = Vec::new();
    for x in 0..f.dom {
        for beta in 0..b.dom {
            if f.apply(x) == b.apply(beta) {
                pairs.push((x, beta));
            }
        }
    }
    let to_x = Mor::new(pairs.len(), f.dom, pairs.iter().map(|&(x, _)| x).collect());
    let to_b = Mor::new(pairs.len(), b.dom, pairs.iter().map(|&(_, beta)| beta).collect());
    Pullback { pairs, to_x, to_b }
}

/// The mediating morphism into a canonical pullback for a commuting span,
/// if the span actually commutes.
pub fn pullback_mediator(pb: &Pullback, f: &Mor, b: &Mor, p: &Mor, q: &Mor) -> Option<Mor> {
    if p.cod != f.dom || q.cod != b.dom || p.dom != q.dom {
        return None;
    }
    let mut table = Vec::with_capacity(p.dom);
    for w in 0..p.dom {
        if f.apply(p.apply(w)) != b.apply(q.apply(w)) {
            return None;
        }
        let idx = pb.pairs.iter().position(|&(x, beta)| x == p.apply(w) && beta == q.apply(w))?;
        table.push(idx);
    }
    Some(Mor::new(p.dom, pb.pairs.len(), table))
}

/// Result of the contextuality analysis of an index category at a bound.
#[derive(Clone, Debug, Serialize)]
pub struct ContextualityReport {
    pub cat: String,
    pub bound: usize,
    pub closed_under_sums: bool,
    pub pullback_stable: bool,
    /// Definition-style verdict: sums and pullback stability.
    pub contextual: bool,
    pub closed_under_products: bool,
    pub prime: bool,
    /// Criterion-style verdict: products and primality.
    pub criterion: bool,
    pub contains_all_isos: bool,
    pub witness: Option<String>,
}

/// Checks contextuality of `cat` over stages up to `bound`, both by the
/// definition (closure under sums, stability of reindexing legs in all
/// pullback squares including their isomorphic variants) and by the
/// product/primality criterion. The two verdicts coincide whenever the
/// category contains all bijections.
pub fn contextuality_check(cat: IndexCat, bound: usize) -> ContextualityReport {
    let homs = cat.all_homs(bound);
    let all = IndexCat::F.all_homs(bound);
    let mut witness = None;

    let mut closed_under_sums = true;
    'sums: for f in &homs {
        for g in &homs {
            if !cat.contains(&f.sum(g)) {
                closed_under_sums = false;
                witness.get_or_insert(format!("sum {f} + {g} leaves the category"));
                break 'sums;
            }
        }
    }

    // An isomorphic variant of the canonical square replaces the reindexing
    // leg r by r∘u for a bijection u. Membership of r∘u in B, I, S, or F does
    // not depend on u, and for the identity and inclusion tags a failure at
    // some u forces a failure at the identity or at a transposition, so it
    // suffices to range u over those.
    let mut pullback_stable = true;
    'stab: for f in &homs {
        for b in &all {
            if b.cod != f.cod {
                continue;
            }
            let pb = pullback(f, b);
            let n = pb.pairs.len();
            let mut variants = vec![Mor::identity(n)];
            for i in 0..n.saturating_sub(1) {
                let mut t: Vec<usize> = (0..n).collect();
                t.swap(i, i + 1);
                variants.push(Mor::new(n, n, t));
            }
            for u in variants {
                let r = u.then(&pb.to_b);
                if !cat.contains(&r) {
                    pullback_stable = false;
                    witness.get_or_insert(format!(
                        "pullback of {f} along {b}: reindexing leg variant {r} leaves the category"
                    ));
                    break 'stab;
                }
            }
        }
    }

    let mut closed_under_products = true;
    'prods: for f in &homs {
        for g in &homs {
            if !cat.contains(&f.product(g)) {
                closed_under_products = false;
                witness.get_or_insert(format!("product {f} × {g} leaves the category"));
                break 'prods;
            }
        }
    }

    let mut prime = true;
    'prime: for f in &all {
        for g in &all {
            if cat.contains(&f.sum(g)) && !(cat.contains(f) && cat.contains(g)) {
                prime = false;
                witness.get_or_insert(format!("sum {f} + {g} is in the category but a summand is not"));
                break 'prime;
            }
        }
    }

    ContextualityReport {
        cat: cat.name().to_string(),
        bound,
        closed_under_sums,
        pullback_stable,
        contextual: closed_under_sums && pullback_stable,
        closed_under_products,
        prime,
        criterion: closed_under_products && prime,
        contains_all_isos: cat.contains_all_isos(),
        witness,
    }
}

/// A coverage tag: singleton inclusions, or finite intersection families on
/// the poset of atom subsets.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Coverage {
    ICtx,
    O,
}

/// Covers of stage `a` for the singleton-inclusion coverage, with ambient
/// stages up to `bound`: one cover `{a ↪ b}` per `b` in `a..=bound`.
pub fn covers_inclusion(a: usize, bound: usize) -> Vec<Mor> {
    (a..=bound).map(|b| Mor::inclusion(a, b)).collect()
}

/// Covers of the atom set `a` for the intersection coverage inside the
/// subset poset of `universe`: nonempty families of supersets of `a` whose
/// intersection is exactly `a`, in a deterministic order.
pub fn covers_intersection(a: &AtomSet, universe: &AtomSet) -> Vec<Vec<AtomSet>> {
    assert!(a.is_subset(universe));
    let rest = universe.difference(a);
    let supersets: Vec<AtomSet> = rest.subsets().into_iter().map(|s| s.union(a)).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << supersets.len()) {
        let family: Vec<AtomSet> = supersets
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| s.clone())
            .collect();
        let mut meet = family[0].clone();
        for s in &family[1..] {
            meet = meet.intersection(s);
        }
        if meet == *a {
            out.push(family);
        }
    }
    out.sort_by_key(|fam| (fam.len(), fam.clone()));
    out
}

/// A coverage-stability witness: given the cover `a ↪ a + k` and a morphism
/// `g : a → d`, the cover `d ↪ d + k` pushes through via `g + id`.
#[derive(Clone, Debug)]
pub struct StabilityWitness {
    pub cover: Mor,
    pub transported_cover: Mor,
    pub mediating: Mor,
}

pub fn inclusion_cover_stability(a: usize, k: usize, g: &Mor) -> StabilityWitness {
    assert_eq!(g.dom, a);
    let d = g.cod;
    let cover = Mor::inclusion(a, a + k);
    let transported_cover = Mor::inclusion(d, d + k);
    let mediating = g.sum(&Mor::identity(k));
    debug_assert_eq!(cover.then(&mediating), g.then(&transported_cover));
    StabilityWitness {
        cover,
        transported_cover,
        mediating,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{atom, AtomSet};

    fn binom(n: usize, k: usize) -> i64 {
        if k > n {
            return 0;
        }
        let mut r: i64 = 1;
        for i in 0..k {
            r = r * (n - i) as i64 / (i + 1) as i64;
        }
        r
    }

    // Inclusion-exclusion count of surjections a -> b, used as an
    // independent oracle for hom enumeration.
    fn surjections(a: usize, b: usize) -> i64 {
        let mut total: i64 = 0;
        for k in 0..=b {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            total += sign * binom(b, k) * ((b - k) as i64).pow(a as u32);
        }
        total
    }

    fn falling(b: usize, a: usize) -> i64 {
        if a > b {
            return 0;
        }
        ((b - a + 1)..=b).product::<usize>() as i64
    }

    #[test]
    fn hom_counts_match_formulas() {
        for a in 0..=4 {
            for b in 0..=4 {
                assert_eq!(IndexCat::F.hom(a, b).len() as i64, (b as i64).pow(a as u32));
                assert_eq!(IndexCat::I.hom(a, b).len() as i64, falling(b, a));
                assert_eq!(IndexCat::S.hom(a, b).len() as i64, surjections(a, b).max(0));
                let bij = if a == b { falling(a, a).max(1) } else { 0 };
                assert_eq!(IndexCat::B.hom(a, b).len() as i64, bij);
                assert_eq!(IndexCat::J.hom(a, b).len(), usize::from(a == b));
                assert_eq!(IndexCat::ISub.hom(a, b).len(), usize::from(a <= b));
            }
        }
        assert_eq!(IndexCat::B.hom(3, 3).len(), 6);
        assert_eq!(IndexCat::I.hom(2, 3).len(), 6);
        assert_eq!(IndexCat::S.hom(3, 2).len(), 6);
    }

    #[test]
    fn hom_enumeration_is_lexicographic() {
        let homs = IndexCat::F.hom(2, 2);
        let tables: Vec<Vec<usize>> = homs.into_iter().map(|f| f.table).collect();
        assert_eq!(tables, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn category_laws_stage_3() {
        for cat in [IndexCat::B, IndexCat::I, IndexCat::S, IndexCat::F] {
            let homs = cat.all_homs(3);
            for f in &homs {
                assert!(cat.contains(&Mor::identity(f.dom)));
                assert_eq!(Mor::identity(f.dom).then(f), *f);
                assert_eq!(f.then(&Mor::identity(f.cod)), *f);
                for g in &homs {
                    if f.cod == g.dom {
                        assert!(cat.contains(&f.then(g)), "closure fails for {f};{g} in {}", cat.name());
                    }
                }
            }
        }
    }

    #[test]
    fn generators_generate_all_homs() {
        for cat in [IndexCat::J, IndexCat::ISub, IndexCat::B, IndexCat::I, IndexCat::S, IndexCat::F] {
            for bound in 0..=4 {
                let mut reached: BTreeSet<Mor> = (0..=bound).map(Mor::identity).collect();
                let gens = cat.generators(bound);
                loop {
                    let mut added = false;
                    let snapshot: Vec<Mor> = reached.iter().cloned().collect();
                    for f in &snapshot {
                        for g in &gens {
                            if f.cod == g.dom && reached.insert(f.then(g)) {
                                added = true;
                            }
                        }
                    }
                    if !added {
                        break;
                    }
                }
                let expected: BTreeSet<Mor> = cat.all_homs(bound).into_iter().collect();
                assert_eq!(reached, expected, "generators fail for {} at bound {bound}", cat.name());
            }
        }
    }

    #[test]
    fn pullback_universal_property_small_stages_exhaustive() {
        // Stages <= 2: enumerate every candidate mediator and count solutions.
        let all = IndexCat::F.all_homs(2);
        for f in &all {
            for b in all.iter().filter(|b| b.cod == f.cod) {
                let pb = pullback(f, b);
                let n = pb.pairs.len();
                for w in 0..=2 {
                    for p in IndexCat::F.hom(w, f.dom) {
                        for q in IndexCat::F.hom(w, b.dom) {
                            if p.then(f) != q.then(b) {
                                continue;
                            }
                            let sols: Vec<Mor> = IndexCat::F
                                .hom(w, n)
                                .into_iter()
                                .filter(|u| u.then(&pb.to_x) == p && u.then(&pb.to_b) == q)
                                .collect();
                            assert_eq!(sols.len(), 1, "mediator not unique for {f}, {b}, span {p}, {q}");
                            assert_eq!(Some(sols[0].clone()), pullback_mediator(&pb, f, b, &p, &q));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pullback_universal_property_stage_4_constructive() {
        // Larger stages: the canonical carrier has pairwise distinct pairs, so
        // a mediator is unique whenever it exists; check the constructed one.
        let all = IndexCat::F.all_homs(4);
        let mut hom_cache: Vec<Vec<Vec<Mor>>> = Vec::new();
        for w in 0..=4 {
            hom_cache.push((0..=4).map(|n| IndexCat::F.hom(w, n)).collect());
        }
        for f in all.iter().filter(|f| f.cod <= 3 && f.dom <= 4) {
            for b in all.iter().filter(|b| b.cod == f.cod && b.dom <= 3) {
                let pb = pullback(f, b);
                let mut sorted = pb.pairs.clone();
                sorted.dedup();
                assert_eq!(sorted.len(), pb.pairs.len());
                assert_eq!(pb.to_x.then(f), pb.to_b.then(b));
                for w in 0..=3 {
                    for p in &hom_cache[w][f.dom] {
                        for q in &hom_cache[w][b.dom] {
                            if p.then(f) != q.then(b) {
                                assert_eq!(pullback_mediator(&pb, f, b, p, q), None);
                                continue;
                            }
                            let u = pullback_mediator(&pb, f, b, p, q).expect("mediator must exist");
                            assert_eq!(&u.then(&pb.to_x), p);
                            assert_eq!(&u.then(&pb.to_b), q);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pullback_fibers_are_codomain_fibers() {
        // Pulling back along b restricted to a point recovers the fiber.
        let f = Mor::new(4, 2, vec![0, 1, 0, 1]);
        for y in 0..2 {
            let point = Mor::new(1, 2, vec![y]);
            let pb = pullback(&f, &point);
            let fiber: Vec<usize> = pb.pairs.iter().map(|&(x, _)| x).collect();
            let expected: Vec<usize> = (0..4).filter(|&x| f.apply(x) == y).collect();
            assert_eq!(fiber, expected);
        }
    }

    #[test]
    fn preimage_computation() {
        let f = Mor::new(4, 3, vec![0, 2, 2, 1]);
        let u: BTreeSet<usize> = [1, 2].into_iter().collect();
        assert_eq!(f.preimage(&u), vec![1, 2, 3]);
        assert_eq!(f.preimage(&BTreeSet::new()), Vec::<usize>::new());
    }

    #[test]
    fn contextuality_of_the_six_tags() {
        for (cat, expect) in [
            (IndexCat::J, false),
            (IndexCat::B, true),
            (IndexCat::I, true),
            (IndexCat::S, true),
            (IndexCat::F, true),
        ] {
            let report = contextuality_check(cat, 3);
            assert_eq!(report.contextual, expect, "{} contextual", cat.name());
            if report.contains_all_isos {
                assert_eq!(report.contextual, report.criterion, "{} verdicts agree", cat.name());
            }
        }
        let j = contextuality_check(IndexCat::J, 3);
        assert!(!j.pullback_stable);
        assert!(j.witness.unwrap().contains("reindexing leg"));
        // The skeletal inclusions are not closed under sums (summing two
        // inclusions shifts the right block), so the tag is not contextual.
        let isub = contextuality_check(IndexCat::ISub, 3);
        assert!(!isub.closed_under_sums);
    }

    #[test]
    fn mor_json_round_trip() {
        let f = Mor::new(2, 3, vec![2, 0]);
        let js = serde_json::to_string(&f).unwrap();
        assert_eq!(js, "[2,3,[2,0]]");
        let back: Mor = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Mor>("[2,3,[3,0]]").is_err());
    }

    #[test]
    fn intersection_covers_at_three_atoms() {
        let universe = AtomSet::stage(3);
        let a: AtomSet = [atom(0)].into_iter().collect();
        let covers = covers_intersection(&a, &universe);
        // {a0} itself is in every cover containing it; the family
        // {{a0,a1},{a0,a2}} meets exactly in {a0}.
        let ab: AtomSet = [atom(0), atom(1)].into_iter().collect();
        let ac: AtomSet = [atom(0), atom(2)].into_iter().collect();
        assert!(covers.contains(&vec![a.clone()]));
        assert!(covers.iter().any(|fam| fam.len() == 2 && fam.contains(&ab) && fam.contains(&ac)));
        for fam in &covers {
            let mut meet = fam[0].clone();
            for s in &fam[1..] {
                meet = meet.intersection(s);
            }
            assert_eq!(meet, a);
        }
    }

    #[test]
    fn inclusion_cover_stability_square_commutes() {
        for g in IndexCat::F.hom(2, 3) {
            let w = inclusion_cover_stability(2, 2, &g);
            assert_eq!(w.cover.then(&w.mediating), g.then(&w.transported_cover));
            assert!(w.transported_cover.is_inclusion());
        }
    }

    #[test]
    fn singleton_inclusion_covers() {
        let covers = covers_inclusion(2, 4);
        assert_eq!(covers.len(), 3);
        assert!(covers.iter().all(|c| c.is_inclusion() && c.dom == 2));
    }
}
