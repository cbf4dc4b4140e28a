//! Sum-membership indexing over preprocessed lists.
//!
//! Given `k-1` lists of `n` elements each from the universe `Z_p`
//! (`p = 2^61 - 1`), [`preprocess`] builds a structure that answers
//! "is `c` a sum of one element per list?" using far fewer stored words
//! than the table of all `n^(k-1)` sums, at the price of a sublinear
//! number of function evaluations per query.
//!
//! The construction composes the sum map `g` over index tuples with a
//! pairwise independent hash into a self-map `f` of the code domain
//! `[n^(k-1)]`, then inverts `f` at query time with precomputed
//! Hellman-style chain tables ([`inverter`]). Several independent
//! hash/inverter pairs are built and the whole structure is verified
//! against the true sumset before it is returned, so query answers are
//! exact in both directions.

pub mod bench;
pub mod hashing;
pub mod index;
pub mod inverter;
mod seeds;
pub mod sumfn;
pub mod universe;
pub mod wire;

pub use hashing::{collision_rate, PairwiseHash};
pub use index::{preprocess, BuildStats, KSumIndex, QueryOutcome};
pub use inverter::{derive_params, InversionParams, Inverter, Mode, STEP_CAP_FACTOR};
pub use sumfn::{decode, encode, IndexTuple, Instance, Sumset, SumsetEntry};
pub use universe::{Element, MODULUS};
pub use wire::WireError;
