//! Exact computation with local (n+1)-webs of codimension 1.
//!
//! A web here is given by the coordinate foliations `x_1, ..., x_n`
//! together with one extra first integral `f`. This crate computes, in
//! exact rational arithmetic at jet level:
//!
//! * the Lie algebra of infinitesimal isomorphisms of the web (vector
//!   fields whose flow preserves every foliation),
//! * its decomposition into a direct product of sl(2) factors, factors
//!   isomorphic to the non-commutative 2-dimensional algebra, and an
//!   abelian part, with the dimension bounds that constrain them,
//! * the formal normal form of `f` under coordinate changes
//!   `x_i -> g_i(x_i)` and reparametrizations `f -> theta(f)`,
//! * parallelizability of the web,
//!
//! and ships a catalogue ([`atlas`]) of example webs whose claimed
//! symmetry algebras are re-verified mechanically.
//!
//! All arithmetic is over arbitrary-precision rationals; there is no
//! floating point anywhere. Results at jet order `W` have upper-bound
//! semantics for the symmetry dimension, upgraded to exact certificates
//! for rational integrals once degree bounds are cleared.

pub mod atlas;
pub mod classify;
pub mod expr;
pub mod jets;
pub mod linalg;
pub mod linefields;
pub mod normalform;
pub mod rat;
pub mod report;
pub mod symmetry;

// re-exports land as modules fill in
pub use jets::{JetError, Mono, MultiJet, UniJet};
pub use rat::Q;


/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
