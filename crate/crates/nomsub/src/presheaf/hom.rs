//! The internal hom of the substitution tensor.
//!
//! `(Y ⊸ Z)(A) = Nat(A ◁ Y, Z)`: an element is a natural transformation
//! out of the substitution presheaf, i.e. a rule turning substitutions of
//! `Y`-terms for `A` variables into `Z`-terms. The action along `u : A → A′`
//! precomposes with the bundle reindexing. Currying against the tensor
//! realizes the adjunction `Nat(X ◇ Y, Z) ≅ Nat(X, Y ⊸ Z)` as an explicit
//! pair of mutually inverse maps.

use crate::finset::Mor;
use crate::presheaf::{
    nat_enumerate, sub_presheaf, sub_reindex, NatTrans, SubPresheaf, SubstTensor, TruncPresheaf,
};

/// The internal hom `Y ⊸ Z`, tabulated: stage `A` holds all natural
/// transformations `A ◁ Y → Z`.
pub struct InternalHom {
    pub presheaf: TruncPresheaf,
    pub subs: Vec<SubPresheaf>,
    elems: Vec<Vec<NatTrans>>,
}

impl InternalHom {
    /// The transformation `A ◁ Y → Z` behind element `idx` at stage `a`.
    pub fn transformation(&self, a: usize, idx: usize) -> &NatTrans {
        &self.elems[a][idx]
    }

    fn position(&self, a: usize, nt: &NatTrans) -> usize {
        self.elems[a]
            .iter()
            .position(|e| e == nt)
            .expect("transformation is natural, hence enumerated")
    }

    /// Currying: turns `α : X ◇ Y → Z` into `X → (Y ⊸ Z)`.
    pub fn curry(&self, x: &TruncPresheaf, tensor: &SubstTensor, alpha: &NatTrans) -> NatTrans {
        let bound = x.bound;
        let components = (0..=bound)
            .map(|a| {
                (0..x.size(a))
                    .map(|xe| {
                        let sub = &self.subs[a];
                        let cand = NatTrans {
                            components: (0..=bound)
                                .map(|n| {
                                    (0..sub.presheaf.size(n))
                                        .map(|c| {
                                            let e = sub.rep(n, c);
                                            let f = sub.span_mor(n, &e);
                                            let tc = tensor
                                                .class_of_parts(n, a, &e.m, &f, xe, &e.t)
                                                .expect("bundle fits the tensor truncation");
                                            alpha.apply(n, tc)
                                        })
                                        .collect()
                                })
                                .collect(),
                        };
                        self.position(a, &cand)
                    })
                    .collect()
            })
            .collect();
        let nt = NatTrans { components };
        debug_assert!(nt.check_naturality(x, &self.presheaf).is_none());
        nt
    }

    /// Uncurrying: turns `β : X → (Y ⊸ Z)` into `X ◇ Y → Z`.
    pub fn uncurry(&self, tensor: &SubstTensor, beta: &NatTrans) -> NatTrans {
        let bound = self.presheaf.bound;
        let components = (0..=bound)
            .map(|n| {
                (0..tensor.presheaf.size(n))
                    .map(|c| {
                        let e = tensor.rep(n, c);
                        let f = tensor.span_mor(n, &e);
                        let psi = &self.elems[e.a][beta.apply(e.a, e.x)];
                        let bc = self.subs[e.a]
                            .class_of_parts(n, &e.m, &f, &e.t)
                            .expect("bundle fits the hom truncation");
                        psi.apply(n, bc)
                    })
                    .collect()
            })
            .collect();
        NatTrans { components }
    }
}

/// Tabulates `Y ⊸ Z` with bundles truncated at `inner_bound`.
pub fn internal_hom(y: &TruncPresheaf, z: &TruncPresheaf, inner_bound: usize) -> InternalHom {
    assert_eq!(y.cat, z.cat);
    assert_eq!(y.bound, z.bound);
    let cat = y.cat;
    let bound = y.bound;
    let subs: Vec<SubPresheaf> = (0..=bound).map(|a| sub_presheaf(a, y, inner_bound)).collect();
    let elems: Vec<Vec<NatTrans>> = subs.iter().map(|s| nat_enumerate(&s.presheaf, z)).collect();
    let labels: Vec<Vec<String>> = elems
        .iter()
        .map(|es| (0..es.len()).map(|i| format!("ψ{i}")).collect())
        .collect();
    let presheaf = TruncPresheaf::from_fn(cat, bound, labels, |u: &Mor, idx| {
        let re = sub_reindex(u, &subs[u.cod], &subs[u.dom]);
        let composed = re.then(&elems[u.dom][idx]);
        elems[u.cod]
            .iter()
            .position(|e| *e == composed)
            .expect("reindexed transformation is natural, hence enumerated")
    });
    debug_assert!(presheaf.check_functoriality().is_none());
    InternalHom { presheaf, subs, elems }
}

/// Outcome of checking the adjunction on a triple `X, Y, Z`: the two
/// hom-set sizes and whether both round-trips were identities on every
/// enumerated transformation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjunctionWitness {
    pub tensor_side: usize,
    pub hom_side: usize,
    pub round_trips_ok: bool,
}

impl AdjunctionWitness {
    pub fn is_bijective(&self) -> bool {
        self.tensor_side == self.hom_side && self.round_trips_ok
    }
}

/// Enumerates both `Nat(X ◇ Y, Z)` and `Nat(X, Y ⊸ Z)` and round-trips
/// every element through the explicit curry/uncurry pair.
pub fn hom_adjunction(
    x: &TruncPresheaf,
    z: &TruncPresheaf,
    tensor: &SubstTensor,
    hom: &InternalHom,
) -> AdjunctionWitness {
    let tensor_nats = nat_enumerate(&tensor.presheaf, z);
    let hom_nats = nat_enumerate(x, &hom.presheaf);
    let mut ok = true;
    for alpha in &tensor_nats {
        let beta = hom.curry(x, tensor, alpha);
        ok &= hom.uncurry(tensor, &beta) == *alpha;
    }
    for beta in &hom_nats {
        let alpha = hom.uncurry(tensor, beta);
        ok &= hom.curry(x, tensor, &alpha) == *beta;
    }
    AdjunctionWitness {
        tensor_side: tensor_nats.len(),
        hom_side: hom_nats.len(),
        round_trips_ok: ok,
    }
}
