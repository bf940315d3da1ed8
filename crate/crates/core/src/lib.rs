pub mod cascade;
pub mod cli;
pub mod error;
pub mod finite_oracle;
pub mod functionals;
pub mod identity_checks;
pub mod mc_engine;
pub mod measure;
pub mod numeric;
pub mod pd_core;
pub mod real;
pub mod structural_checks;
pub mod suite;

pub use error::{Error, Result};
pub use real::Real;

pub type CascadeSpecF64 = cascade::CascadeSpec<f64>;
pub type CascadeSpecF32 = cascade::CascadeSpec<f32>;
pub type CascadeMeasureF64 = cascade::CascadeMeasure<f64>;
pub type CascadeMeasureF32 = cascade::CascadeMeasure<f32>;
pub type FiniteMeasureF64 = finite_oracle::FiniteMeasure<f64>;
pub type FiniteMeasureF32 = finite_oracle::FiniteMeasure<f32>;
pub type WeightVectorF64 = pd_core::WeightVector<f64>;
pub type WeightVectorF32 = pd_core::WeightVector<f32>;
pub type OverlapFnF64 = functionals::OverlapFn<f64>;
pub type OverlapFnF32 = functionals::OverlapFn<f32>;
pub type FunctionFamilyF64 = functionals::FunctionFamily<f64>;
pub type FunctionFamilyF32 = functionals::FunctionFamily<f32>;
pub type PairProductF64 = functionals::PairProduct<f64>;
pub type PairProductF32 = functionals::PairProduct<f32>;
pub type IntervalSetF64 = functionals::IntervalSet<f64>;
pub type IntervalSetF32 = functionals::IntervalSet<f32>;
