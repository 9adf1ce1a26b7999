//! Exact, stage-indexed algorithmic information theory on a toy machine.
//!
//! The crate enumerates a small prefix-free bit VM to obtain lower bounds
//! `m_t`, `M_t` on the universal discrete and continuous (semi)measures,
//! evaluates randomness tests and deficiencies against computable measures
//! and enumerable semimeasures, and measures mutual information and its
//! conservation. All masses are exact dyadic rationals.

pub mod dyadic;
pub mod elemfn;
pub mod enumerator;
pub mod error;
pub mod information;
pub mod machine;
pub mod operator;
pub mod prefix;
pub mod randomness;
pub mod semimeasure;
pub mod snapshot;

pub use dyadic::{lognorm, Dyadic, ExtInt};
pub use elemfn::{ElemFn, Lattice};
pub use error::{Error, Result};
pub use prefix::Prefix;
pub use semimeasure::{SemimeasureTable, PairTable};
