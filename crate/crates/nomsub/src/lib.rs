//! Finite-stage computational kernel for substitution structures on nominal
//! sets, renaming sets, and presheaves over categories of finite contexts.
//!
//! The library works with explicit finite data throughout: atoms are drawn
//! from finite stages `{a0, .., a(n-1)}`, presheaves are tabulated up to a
//! stage bound, and every categorical construction (coends, Day convolution,
//! substitution tensors, internal homs) is computed as a finite quotient with
//! canonical representatives. Law suites check the expected algebraic
//! structure (monoidality, adjunctions, equivalences of categories, sheaf
//! conditions) exhaustively at these finite stages and report witnesses for
//! any failure.

pub mod atoms;
pub mod finset;
pub mod lambda;
pub mod nominal;
pub mod presheaf;
pub mod renaming;
pub mod report;
pub mod subst;
