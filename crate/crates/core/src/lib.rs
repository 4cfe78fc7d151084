//! Exact and numeric evaluation of neutral-BKP tau functions: partition sums
//! weighted by projective Schur Q-functions, their free-fermion
//! representations, Hirota bilinear certificates, and Pfaffian-ensemble
//! integrals.

pub mod partitions;
pub mod pfaffian;
pub mod polyring;
pub mod qfunctions;
pub mod ring;
pub mod fermionic;
pub mod tausums;
pub mod special;
pub mod integrals;

pub use partitions::StrictPartition;
pub use polyring::{Family, GradedPoly, Monomial, Var};
pub use ring::Rational;
