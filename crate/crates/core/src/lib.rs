//! Desk-scale constructions around topological full groups of minimal
//! substitution subshifts: the wobbling group of `Z`, the embedding of the
//! full group into it, the almost-invariant density family and measures, and
//! finite-order certificates for stabilisers.

pub mod catalog;
pub mod density;
pub mod fullgroup;
pub mod meanlab;
pub mod scalar;
pub mod stabilizer;
pub mod subshift;
pub mod wobbling;

pub use scalar::Real;

pub type TruncatedValue = density::TruncatedValue<f64>;
pub type ProductMeasure = meanlab::ProductMeasure<f64>;
pub type ExplicitMeasure = meanlab::ExplicitMeasure<f64>;
pub type ConfigurationTable = meanlab::ConfigurationTable<f64>;
pub type DisplacementConstants = density::DisplacementConstants<f64>;
