//! Paired Monte Carlo estimation of both sides of the invariance identities.
//!
//! Every outer sample builds one realization of the target measure, draws a
//! replica tuple from it and evaluates both sides on that same tuple. Inner
//! averages over a fresh replica are exact sums over atoms.

mod gg;
mod main_check;
mod pd;
mod weights;

pub use gg::{check_gg, check_gg_exact, gg_values, GgValues};
pub use main_check::{
    check_iterated, check_iterated_pd_example, check_main, check_main_exact, check_main_fd,
    iterated_pd_closed_form, iterated_values, main_values,
};
pub use pd::{check_pd_identity, check_zeta, pd_identity_values};
pub use weights::{
    check_prop1, check_th2a, check_weight_invariance, th2a_values, weight_values, PairEvent, Th2aInputs,
};

use crate::cascade::{CascadeMeasure, CascadeSpec};
use crate::error::Result;
use crate::finite_oracle::FiniteMeasure;
use crate::mc_engine::{run_samples, EstimatorConfig, PairedEstimate, Stream};
use crate::measure::{DiscreteLaw, GibbsMeasure};
use serde::{Serialize, Serializer};
use std::time::Instant;

/// The random measure a check runs on.
#[derive(Debug, Clone)]
pub enum Target {
    /// A fresh cascade per outer sample.
    Cascade(CascadeSpec<f64>),
    /// A fixed measure; only the replicas are random.
    Finite(FiniteMeasure<f64>),
    /// A cascade whose two heaviest leaves are moved onto one branch whenever
    /// the heaviest carries at least `threshold` of the mass.
    HeavyPairShareBranch { spec: CascadeSpec<f64>, threshold: f64 },
}

impl Target {
    /// Overlap law used for `∫ f dμ`: closed form for cascades, exact for
    /// finite measures.
    pub fn mu(&self) -> DiscreteLaw<f64> {
        match self {
            Target::Cascade(s) | Target::HeavyPairShareBranch { spec: s, .. } => s.exact_mu(),
            Target::Finite(m) => m.exact_mu(),
        }
    }

    pub fn realize(&self, stream: &mut Stream) -> Result<Realized<'_>> {
        Ok(match self {
            Target::Cascade(s) => Realized::Cascade(s.build(stream)?),
            Target::Finite(m) => Realized::Finite(m),
            Target::HeavyPairShareBranch { spec, threshold } => {
                let mut m = spec.build(stream)?;
                m.force_heavy_pair_share_branch(*threshold);
                Realized::Cascade(m)
            }
        })
    }

    pub fn cascade_spec(&self) -> Option<&CascadeSpec<f64>> {
        match self {
            Target::Cascade(s) | Target::HeavyPairShareBranch { spec: s, .. } => Some(s),
            Target::Finite(_) => None,
        }
    }
}

/// One realization of a [`Target`].
#[derive(Debug)]
pub enum Realized<'a> {
    Cascade(CascadeMeasure<f64>),
    Finite(&'a FiniteMeasure<f64>),
}

impl GibbsMeasure<f64> for Realized<'_> {
    fn weights(&self) -> &[f64] {
        match self {
            Realized::Cascade(m) => m.weights(),
            Realized::Finite(m) => m.weights(),
        }
    }

    fn cumulative(&self) -> &[f64] {
        match self {
            Realized::Cascade(m) => m.cumulative(),
            Realized::Finite(m) => m.cumulative(),
        }
    }

    fn is_diffuse(&self, atom: usize) -> bool {
        match self {
            Realized::Cascade(m) => m.is_diffuse(atom),
            Realized::Finite(_) => false,
        }
    }

    #[inline]
    fn self_overlap(&self, atom: usize) -> f64 {
        match self {
            Realized::Cascade(m) => m.self_overlap(atom),
            Realized::Finite(m) => m.self_overlap(atom),
        }
    }

    #[inline]
    fn cross_overlap(&self, a: usize, b: usize) -> f64 {
        match self {
            Realized::Cascade(m) => m.cross_overlap(a, b),
            Realized::Finite(m) => m.cross_overlap(a, b),
        }
    }
}

fn null_if_not_finite<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: String,
    #[serde(serialize_with = "null_if_not_finite")]
    pub lhs: f64,
    #[serde(serialize_with = "null_if_not_finite")]
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub se_diff: f64,
    /// `(lhs − rhs) / se_diff`; infinite when the sides are exact and differ.
    #[serde(serialize_with = "null_if_not_finite")]
    pub z: f64,
    pub n_outer: usize,
    pub seed: u64,
    pub pass: bool,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

/// Relative tolerance under which two exact sides count as equal.
pub const EXACT_TOL: f64 = 1e-12;

pub fn z_score(lhs: f64, rhs: f64, se_diff: f64) -> f64 {
    let d = lhs - rhs;
    if se_diff > 0.0 {
        d / se_diff
    } else if d.abs() <= EXACT_TOL * (1.0 + lhs.abs().max(rhs.abs())) {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

impl IdentityReport {
    pub fn from_estimate(name: impl Into<String>, est: &PairedEstimate, config: &EstimatorConfig) -> Self {
        let z = z_score(est.mean_lhs, est.mean_rhs, est.se_diff);
        Self {
            name: name.into(),
            lhs: est.mean_lhs,
            rhs: est.mean_rhs,
            se_lhs: est.se_lhs,
            se_rhs: est.se_rhs,
            se_diff: est.se_diff,
            z,
            n_outer: est.n,
            seed: config.seed,
            pass: z.abs() <= config.z_max,
            wall_time_s: 0.0,
            details: None,
        }
    }

    /// Report for two exactly computed sides.
    pub fn exact(name: impl Into<String>, lhs: f64, rhs: f64, n: usize, config: &EstimatorConfig) -> Self {
        let est = PairedEstimate {
            mean_lhs: lhs,
            mean_rhs: rhs,
            se_lhs: 0.0,
            se_rhs: 0.0,
            se_diff: 0.0,
            n,
        };
        Self::from_estimate(name, &est, config)
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = Some(details);
        self
    }

    /// Marks the report failed unless `ok`.
    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }

    pub(crate) fn timed(mut self, start: Instant, config: &EstimatorConfig) -> Self {
        if config.timing {
            self.wall_time_s = start.elapsed().as_secs_f64();
        }
        self
    }
}

/// Runs a fallible per-sample procedure over all outer samples.
pub(crate) fn run_records<R, F>(config: &EstimatorConfig, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&mut Stream) -> Result<R> + Sync,
{
    run_samples(config, |_, s| f(s))?.into_iter().collect()
}

/// Runs a per-sample `(lhs, rhs)` procedure and summarizes it.
pub(crate) fn run_pairs<F>(config: &EstimatorConfig, f: F) -> Result<PairedEstimate>
where
    F: Fn(&mut Stream) -> Result<(f64, f64)> + Sync,
{
    let recs = run_records(config, f)?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    Ok(PairedEstimate::from_values(&lhs, &rhs, config.n_batches))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_score_cases() {
        assert_eq!(z_score(1.0, 0.5, 0.25), 2.0);
        assert_eq!(z_score(1.0, 1.0 + 1e-15, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.5, 0.0), f64::INFINITY);
        assert_eq!(z_score(0.5, 1.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn report_json_shape() {
        let cfg = EstimatorConfig::default();
        let r = IdentityReport::exact("x", 1.0, 0.0, 4, &cfg);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"name":"x","lhs":1.0,"rhs":0.0,"se_lhs":0.0,"se_rhs":0.0,"se_diff":0.0,"z":null,"n_outer":4,"seed":0,"pass":false,"wall_time_s":0.0}"#
        );
    }
}
