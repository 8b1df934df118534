//! Filtered homological algebra over the discrete valuation ring `K[[u]]`.
//!
//! The base field `K` is either the exact rationals or a truncated graded
//! Novikov field over them. On top of that sit: power/Laurent series
//! arithmetic with explicit precision tracking (`useries`), Smith normal
//! forms over `K[[u]]` (`smith`), homology of equivariant complexes in the
//! three models `W^-`, `W^inf`, `W^+` (`homology`), induced filtrations and
//! their slice series / Young diagrams (`filtration`), direct limits of
//! directed systems (`limits`), and the worked Floer-theoretic model systems
//! (`floerlab`).
//!
//! The crate is `no_std` + `alloc`; all arithmetic is exact or carries an
//! explicit `O(u^N)` precision. Nothing here ever rounds silently.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coeff;
pub mod error;
pub mod filtration;
pub mod floerlab;
pub mod homology;
pub(crate) mod kmat;
pub mod limits;
pub mod parse;
pub mod samples;
pub mod smith;
pub mod useries;

pub use error::{Error, Result};
