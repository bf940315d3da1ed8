//! Functions of overlaps used by the identities: step functions, the
//! perturbations `F`, `F_l`, `F̄`, group densities `Z^p`, partition weights
//! and the weight maps.

mod family;
mod partition;
mod step;

pub use family::{eval_z_p, log_z_p, log_z_product, FunctionFamily, Groups, PairProduct};
pub use partition::{
    apply_t, delta_t, from_four_sets, gamma_t, membership_family, t_alpha, to_four_sets, transform_t,
    PartitionSpec, Transformed, WeightFn, FOUR_SETS,
};
pub use step::{Interval, IntervalSet, OverlapFn, StepFunction};
