//! Ridge-function decompositions of polynomials on the unit ball, and shallow
//! networks built from them. See `book/` for a guided tour.

pub mod error;
pub mod polycore;

pub use error::{Error, Result};
pub mod quadrature;
pub mod orthobasis;
pub mod quasiproj;
pub mod ridge_real;
pub mod ridge_complex;
pub mod testfuncs;
pub mod networks;
pub mod pipeline;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/polynomials.md")]
    mod polynomials {}
    #[doc = include_str!("../../../book/src/quasiproj.md")]
    mod quasiproj {}
    #[doc = include_str!("../../../book/src/ridge.md")]
    mod ridge {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
