//! Truncated finitary monads as substitution monoids, and the
//! commutativity criterion for the induced uniform-substitution monoid.
//!
//! A finitary monad, restricted to finite stages, is a monoid for the
//! substitution tensor: the carrier presheaf `T` sends a stage to the
//! terms over that many variables, the unit picks out the variables, and
//! the multiplication flattens a term whose variables are bound to terms.
//! We tabulate three such monads — words (the free-monoid monad),
//! multisets (its commutative quotient), and the identity monad — with a
//! length cap standing in for their infinitely many terms.
//!
//! The uniform multiplication `m_⊗ = m ∘ φ` substitutes the *same* term
//! for every variable, up to an offset renaming; its commutative square
//! compares the two ways of multiplying out a pair of terms, one of them
//! transported along the symmetry of the stage product. Words fail the
//! square (concatenation order shows), multisets and the identity monad
//! pass it.
//!
//! Every check runs both directly on term data (total, any stage) and
//! through the class-level machinery (tensor, unitors, associator, Day
//! convolution with the comparison map), skipping elements whose images
//! outgrow the length cap; the two routes are asserted to agree where
//! both are defined.

use std::collections::BTreeMap;

use crate::finset::{IndexCat, Mor};
use crate::presheaf::subst::block_inclusion;
use crate::presheaf::{
    day, left_unitor, phi, right_assoc_class, right_unitor, subst_tensor, unfold_triple, DayKind,
    NatTrans, StructureVerdict, SubstTensor, TruncPresheaf,
};

/// Which truncated finitary monad.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonadKind {
    /// Words over the stage, with concatenating substitution.
    List,
    /// Multisets over the stage; substitution concatenates and reorders.
    Multiset,
    /// Bare variables; substitution is lookup.
    Identity,
}

/// A truncated finitary monad: terms are words over the stage's letters,
/// cut off at a length cap. Substitution that would overflow the cap is
/// reported as undefined rather than silently clipped.
#[derive(Clone, Copy, Debug)]
pub struct FinMonad {
    pub kind: MonadKind,
    pub cap: usize,
}

impl FinMonad {
    pub fn list(cap: usize) -> FinMonad {
        FinMonad { kind: MonadKind::List, cap }
    }

    pub fn multiset(cap: usize) -> FinMonad {
        FinMonad { kind: MonadKind::Multiset, cap }
    }

    pub fn identity() -> FinMonad {
        FinMonad { kind: MonadKind::Identity, cap: 1 }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MonadKind::List => "list",
            MonadKind::Multiset => "multiset",
            MonadKind::Identity => "identity",
        }
    }

    /// All terms over `n` letters, ordered by length then lexicographically.
    pub fn values(&self, n: usize) -> Vec<Vec<usize>> {
        if self.kind == MonadKind::Identity {
            return (0..n).map(|j| vec![j]).collect();
        }
        let nondecreasing = self.kind == MonadKind::Multiset;
        let mut out = vec![vec![]];
        let mut frontier: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..self.cap {
            let mut next = Vec::new();
            for w in &frontier {
                let start = if nondecreasing { w.last().copied().unwrap_or(0) } else { 0 };
                for j in start..n {
                    let mut v = w.clone();
                    v.push(j);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    fn normalize(&self, mut v: Vec<usize>) -> Vec<usize> {
        if self.kind == MonadKind::Multiset {
            v.sort_unstable();
        }
        v
    }

    pub fn label(&self, v: &[usize]) -> String {
        let body: Vec<String> = v.iter().map(|j| j.to_string()).collect();
        match self.kind {
            MonadKind::Multiset => format!("⦃{}⦄", body.join(" ")),
            _ if v.is_empty() => "ε".to_string(),
            _ => format!("⟨{}⟩", body.join(" ")),
        }
    }

    /// The unit: the variable `j` as a term.
    pub fn unit_value(&self, j: usize) -> Vec<usize> {
        vec![j]
    }

    /// Renames the letters of a term along `f`.
    pub fn rename(&self, v: &[usize], f: &Mor) -> Vec<usize> {
        self.normalize(v.iter().map(|&j| f.apply(j)).collect())
    }

    /// Substitutes a term for every letter, or `None` when the flattened
    /// term outgrows the cap.
    pub fn subst(&self, v: &[usize], sigma: &[Vec<usize>]) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        for &j in v {
            out.extend_from_slice(&sigma[j]);
            if out.len() > self.cap {
                return None;
            }
        }
        Some(self.normalize(out))
    }

    /// Substituting a shifted copy of `y` for every letter of `x`: the
    /// uniform multiplication evaluated on a spanning pair, landing at
    /// stage `a * b`.
    pub fn uniform_mult(&self, a: usize, b: usize, x: &[usize], y: &[usize]) -> Option<Vec<usize>> {
        let sigma: Vec<Vec<usize>> =
            (0..a).map(|i| y.iter().map(|&j| i * b + j).collect()).collect();
        self.subst(x, &sigma)
    }

    /// Tabulates the terms as a presheaf over all functions up to a bound.
    pub fn tabulate(&self, bound: usize) -> MonadTab {
        let values: Vec<Vec<Vec<usize>>> = (0..=bound).map(|n| self.values(n)).collect();
        let pos: Vec<BTreeMap<Vec<usize>, usize>> = values
            .iter()
            .map(|vs| vs.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
            .collect();
        let labels: Vec<Vec<String>> =
            values.iter().map(|vs| vs.iter().map(|v| self.label(v)).collect()).collect();
        let monad = *self;
        let presheaf = TruncPresheaf::from_fn(IndexCat::F, bound, labels, |f, x| {
            pos[f.cod][&monad.rename(&values[f.dom][x], f)]
        });
        MonadTab { monad, presheaf, values, pos }
    }
}

/// A tabulated monad: its presheaf of terms plus indexed value lists.
pub struct MonadTab {
    pub monad: FinMonad,
    pub presheaf: TruncPresheaf,
    values: Vec<Vec<Vec<usize>>>,
    pos: Vec<BTreeMap<Vec<usize>, usize>>,
}

impl MonadTab {
    pub fn value(&self, n: usize, x: usize) -> &[usize] {
        &self.values[n][x]
    }

    pub fn position(&self, n: usize, v: &[usize]) -> usize {
        self.pos[n][v]
    }
}

/// The verdicts of the monoid laws and the commutative square, with the
/// number of elements skipped because a path overflowed the length cap.
#[derive(Debug)]
pub struct MonoidReport {
    pub left_unit: StructureVerdict,
    pub right_unit: StructureVerdict,
    pub associativity: StructureVerdict,
    pub commutativity: StructureVerdict,
    pub skipped: usize,
}

impl MonoidReport {
    pub fn laws_hold(&self) -> bool {
        self.left_unit.holds() && self.right_unit.holds() && self.associativity.holds()
    }
}

fn assignments(n: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (0..count).map(move |j| {
                    let mut s = t.clone();
                    s.push(j);
                    s
                })
            })
            .collect();
    }
    out
}

/// The symmetry `a * b → b * a` of the stage product, on pair codes.
fn product_symmetry(a: usize, b: usize) -> Mor {
    let mut table = vec![0; a * b];
    for i in 0..a {
        for j in 0..b {
            table[i * b + j] = j * a + i;
        }
    }
    Mor::new(a * b, b * a, table)
}

/// Checks the monoid laws directly on term data: units by substitution
/// against variables, associativity by comparing the two flattening
/// orders, at all stages up to `law_cap`.
pub fn monad_monoid_laws(m: &FinMonad, law_cap: usize, square_cap: usize) -> MonoidReport {
    let mut skipped = 0;
    let values: Vec<Vec<Vec<usize>>> = (0..=law_cap).map(|n| m.values(n)).collect();

    let mut left_unit = StructureVerdict::Holds;
    'left: for n in 0..=law_cap {
        for k in 0..=law_cap {
            for sigma_ix in assignments(n, values[k].len()) {
                let sigma: Vec<Vec<usize>> =
                    sigma_ix.iter().map(|&i| values[k][i].clone()).collect();
                for j in 0..n {
                    match m.subst(&m.unit_value(j), &sigma) {
                        None => skipped += 1,
                        Some(v) if v == sigma[j] => {}
                        Some(v) => {
                            left_unit = StructureVerdict::Fails {
                                witness: format!(
                                    "unit ∘ σ at letter {j}: {} ≠ {}",
                                    m.label(&v),
                                    m.label(&sigma[j])
                                ),
                            };
                            break 'left;
                        }
                    }
                }
            }
        }
    }

    let mut right_unit = StructureVerdict::Holds;
    'right: for n in 0..=law_cap {
        let unit: Vec<Vec<usize>> = (0..n).map(|j| m.unit_value(j)).collect();
        for v in &values[n] {
            match m.subst(v, &unit) {
                None => skipped += 1,
                Some(w) if &w == v => {}
                Some(w) => {
                    right_unit = StructureVerdict::Fails {
                        witness: format!("{} · unit = {}", m.label(v), m.label(&w)),
                    };
                    break 'right;
                }
            }
        }
    }

    let mut associativity = StructureVerdict::Holds;
    'assoc: for n in 0..=law_cap {
        for k in 0..=law_cap {
            for mm in 0..=law_cap {
                let sigmas: Vec<Vec<Vec<usize>>> = assignments(n, values[k].len())
                    .iter()
                    .map(|ix| ix.iter().map(|&i| values[k][i].clone()).collect())
                    .collect();
                let rhos: Vec<Vec<Vec<usize>>> = assignments(k, values[mm].len())
                    .iter()
                    .map(|ix| ix.iter().map(|&i| values[mm][i].clone()).collect())
                    .collect();
                for sigma in &sigmas {
                    let firsts: Vec<Option<Vec<usize>>> =
                        values[n].iter().map(|v| m.subst(v, sigma)).collect();
                    for rho in &rhos {
                        let composed: Option<Vec<Vec<usize>>> =
                            sigma.iter().map(|s| m.subst(s, rho)).collect();
                        for (v, first) in values[n].iter().zip(&firsts) {
                            let lhs = first.as_ref().and_then(|w| m.subst(w, rho));
                            let rhs = composed.as_ref().and_then(|c| m.subst(v, c));
                            match (lhs, rhs) {
                                (Some(l), Some(r)) if l != r => {
                                    associativity = StructureVerdict::Fails {
                                        witness: format!(
                                            "{} at stages ({n}, {k}, {mm}): {} ≠ {}",
                                            m.label(v),
                                            m.label(&l),
                                            m.label(&r)
                                        ),
                                    };
                                    break 'assoc;
                                }
                                (Some(_), Some(_)) => {}
                                _ => skipped += 1,
                            }
                        }
                    }
                }
            }
        }
    }

    let (commutativity, comm_skipped) = commutativity_square(m, square_cap);
    MonoidReport {
        left_unit,
        right_unit,
        associativity,
        commutativity,
        skipped: skipped + comm_skipped,
    }
}

/// Evaluates the commutative square for the uniform multiplication on all
/// term pairs at stages up to `square_cap`: multiplying out `x` and `y`
/// and transporting along the stage-product symmetry must agree with
/// multiplying out `y` and `x`.
pub fn commutativity_square(m: &FinMonad, square_cap: usize) -> (StructureVerdict, usize) {
    let mut skipped = 0;
    for a in 0..=square_cap {
        for b in 0..=square_cap {
            let tau = product_symmetry(a, b);
            for x in &m.values(a) {
                for y in &m.values(b) {
                    let one = m.uniform_mult(a, b, x, y).map(|v| m.rename(&v, &tau));
                    let two = m.uniform_mult(b, a, y, x);
                    match (one, two) {
                        (Some(l), Some(r)) if l != r => {
                            return (
                                StructureVerdict::Fails {
                                    witness: format!(
                                        "x = {} at stage {a}, y = {} at stage {b}: {} ≠ {}",
                                        m.label(x),
                                        m.label(y),
                                        m.label(&l),
                                        m.label(&r)
                                    ),
                                },
                                skipped,
                            );
                        }
                        (Some(_), Some(_)) => {}
                        _ => skipped += 1,
                    }
                }
            }
        }
    }
    (StructureVerdict::Holds, skipped)
}

/// The monoid structure carried by a tabulated monad at the class level:
/// its substitution tensor, the unit transformation, and the partial
/// multiplication on tensor classes (`None` where flattening overflows
/// the length cap).
pub struct PshMonoid {
    pub carrier: TruncPresheaf,
    pub tensor: SubstTensor,
    pub unit: NatTrans,
    pub mult: Vec<Vec<Option<usize>>>,
    inner: usize,
}

impl PshMonoid {
    /// Evaluates the multiplication on explicit spanning parts.
    fn eval_parts(&self, tab: &MonadTab, n: usize, a: usize, mv: &[usize], f: &Mor, x: usize, t: &[usize]) -> Option<usize> {
        let m = tab.monad;
        let sigma: Vec<Vec<usize>> = mv
            .iter()
            .zip(t)
            .enumerate()
            .map(|(i, (&mi, &ti))| m.rename(tab.value(mi, ti), &block_inclusion(mv, i).then(f)))
            .collect();
        m.subst(tab.value(a, x), &sigma).map(|v| tab.position(n, &v))
    }
}

/// Assembles the class-level monoid of a tabulated monad.
pub fn psh_monoid(tab: &MonadTab, inner: usize) -> PshMonoid {
    let carrier = tab.presheaf.clone();
    let tensor = subst_tensor(&carrier, &carrier, inner);
    let var = TruncPresheaf::representable(IndexCat::F, 1, carrier.bound);
    let var_homs: Vec<Vec<Mor>> = (0..=carrier.bound).map(|n| IndexCat::F.hom(1, n)).collect();
    let unit = NatTrans {
        components: (0..=carrier.bound)
            .map(|n| {
                (0..var.size(n))
                    .map(|x| tab.position(n, &tab.monad.unit_value(var_homs[n][x].table[0])))
                    .collect()
            })
            .collect(),
    };
    debug_assert!(unit.check_naturality(&var, &carrier).is_none());
    let mut pm = PshMonoid { carrier, tensor, unit, mult: Vec::new(), inner };
    pm.mult = (0..=pm.carrier.bound)
        .map(|n| {
            (0..pm.tensor.presheaf.size(n))
                .map(|c| {
                    let e = pm.tensor.rep(n, c);
                    let f = pm.tensor.span_mor(n, &e);
                    pm.eval_parts(tab, n, e.a, &e.m, &f, e.x, &e.t)
                })
                .collect()
        })
        .collect();
    pm
}

/// Checks the monoid laws through the class-level machinery: the unit
/// composites against the unitors, associativity through the associator,
/// and the commutative square through the Day convolution and the
/// comparison map into the substitution tensor.
pub fn psh_monoid_laws(pm: &PshMonoid) -> MonoidReport {
    let bound = pm.carrier.bound;
    let mut skipped = 0;
    let var = TruncPresheaf::representable(IndexCat::F, 1, bound);

    // Left unit: multiplying a variable bundle equals the left unitor.
    let vy = subst_tensor(&var, &pm.carrier, pm.inner);
    let lambda = left_unitor(&vy, &pm.carrier);
    let mut left_unit = StructureVerdict::Holds;
    'left: for n in 0..=bound {
        for c in 0..vy.presheaf.size(n) {
            let e = vy.rep(n, c);
            let f = vy.span_mor(n, &e);
            let lifted = pm
                .tensor
                .class_of_parts(n, e.a, &e.m, &f, pm.unit.apply(e.a, e.x), &e.t)
                .expect("unit image stays within the tensor's spanning range");
            match pm.mult[n][lifted] {
                None => skipped += 1,
                Some(v) if v == lambda.apply(n, c) => {}
                Some(v) => {
                    left_unit = StructureVerdict::Fails {
                        witness: format!(
                            "at stage {n}: {} ≠ {}",
                            pm.carrier.label(n, v),
                            pm.carrier.label(n, lambda.apply(n, c))
                        ),
                    };
                    break 'left;
                }
            }
        }
    }

    // Right unit: binding every fiber to a variable equals the right
    // unitor.
    let mv = subst_tensor(&pm.carrier, &var, pm.inner);
    let rho = right_unitor(&mv, &pm.carrier);
    let mut right_unit = StructureVerdict::Holds;
    'right: for n in 0..=bound {
        for c in 0..mv.presheaf.size(n) {
            let e = mv.rep(n, c);
            let f = mv.span_mor(n, &e);
            let t: Vec<usize> = e.m.iter().zip(&e.t).map(|(&mi, &ti)| pm.unit.apply(mi, ti)).collect();
            let lifted = pm
                .tensor
                .class_of_parts(n, e.a, &e.m, &f, e.x, &t)
                .expect("unit image stays within the tensor's spanning range");
            match pm.mult[n][lifted] {
                None => skipped += 1,
                Some(v) if v == rho.apply(n, c) => {}
                Some(v) => {
                    right_unit = StructureVerdict::Fails {
                        witness: format!(
                            "at stage {n}: {} ≠ {}",
                            pm.carrier.label(n, v),
                            pm.carrier.label(n, rho.apply(n, c))
                        ),
                    };
                    break 'right;
                }
            }
        }
    }

    // Associativity: flatten-then-flatten along both bracketings, the
    // right one reached by rebracketing the raw triple. Rebracketing can
    // push the middle stage above the bound, in which case the element is
    // skipped rather than compared.
    let mm_m = subst_tensor(&pm.tensor.presheaf, &pm.carrier, pm.inner);
    let m_mm = subst_tensor(&pm.carrier, &pm.tensor.presheaf, pm.inner);
    let mut associativity = StructureVerdict::Holds;
    'assoc: for n in 0..=bound {
        for c in 0..mm_m.presheaf.size(n) {
            let e = mm_m.rep(n, c);
            let f = mm_m.span_mor(n, &e);
            let lhs = pm.mult[e.a][e.x]
                .and_then(|x| pm.tensor.class_of_parts(n, e.a, &e.m, &f, x, &e.t))
                .and_then(|c| pm.mult[n][c]);

            let raw = unfold_triple(n, &e, &pm.tensor, &mm_m);
            let rhs = right_assoc_class(n, &raw, &pm.tensor, &m_mm).and_then(|c2| {
                let e2 = m_mm.rep(n, c2);
                let f2 = m_mm.span_mor(n, &e2);
                let t2: Option<Vec<usize>> =
                    e2.m.iter().zip(&e2.t).map(|(&mi, &ti)| pm.mult[mi][ti]).collect();
                t2.and_then(|t| pm.tensor.class_of_parts(n, e2.a, &e2.m, &f2, e2.x, &t))
                    .and_then(|c| pm.mult[n][c])
            });

            match (lhs, rhs) {
                (Some(l), Some(r)) if l != r => {
                    associativity = StructureVerdict::Fails {
                        witness: format!(
                            "at stage {n}: {} ≠ {}",
                            pm.carrier.label(n, l),
                            pm.carrier.label(n, r)
                        ),
                    };
                    break 'assoc;
                }
                (Some(_), Some(_)) => {}
                _ => skipped += 1,
            }
        }
    }

    // Commutativity: the square for the uniform multiplication, evaluated
    // on classes through the Day convolution and the comparison map.
    let d = day(DayKind::Product, &pm.carrier, &pm.carrier, pm.inner);
    let comparison = phi(&d, &pm.tensor);
    let mut commutativity = StructureVerdict::Holds;
    'comm: for a in 0..=pm.inner {
        for b in 0..=pm.inner {
            if a * b > bound {
                continue;
            }
            let id = Mor::new(a * b, a * b, (0..a * b).collect());
            let tau = product_symmetry(a, b);
            for x in 0..pm.carrier.size(a) {
                for y in 0..pm.carrier.size(b) {
                    let lax = |a: usize, b: usize, x: usize, y: usize, f: &Mor| {
                        let c = d
                            .class_of_parts(a * b, a, b, f, x, y)
                            .expect("spanning pair is within the inner bound");
                        pm.mult[a * b][comparison.apply(a * b, c)]
                    };
                    let one = lax(a, b, x, y, &id).map(|v| pm.carrier.act(&tau, v));
                    let two = lax(b, a, y, x, &Mor::new(b * a, b * a, (0..b * a).collect()));
                    match (one, two) {
                        (Some(l), Some(r)) if l != r => {
                            commutativity = StructureVerdict::Fails {
                                witness: format!(
                                    "x = {} at stage {a}, y = {} at stage {b}: {} ≠ {}",
                                    pm.carrier.label(a, x),
                                    pm.carrier.label(b, y),
                                    pm.carrier.label(a * b, l),
                                    pm.carrier.label(b * a, r)
                                ),
                            };
                            break 'comm;
                        }
                        (Some(_), Some(_)) => {}
                        _ => skipped += 1,
                    }
                }
            }
        }
    }

    MonoidReport { left_unit, right_unit, associativity, commutativity, skipped }
}
