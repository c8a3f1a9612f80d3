//! Random problem instances: true item values plus the controller's priors.

use alloc::vec::Vec;

use crate::belief::{Beliefs, ChainBelief, GaussianBelief};
use crate::error::{invalid, Result};
use crate::rng::{StreamKey, TAG_INSTANCE};
use crate::utility::UtilityFn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownItem {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dependency {
    None,
    /// `x_0 ~ N(prior)`, `x_i = x_{i-1} + w`, `w ~ N(0, drift_variance)`.
    RandomWalk {
        drift_variance: f64,
    },
    /// Every item keeps its own `N(prior)` factor and neighbours are tied
    /// together by `N(x_i - x_{i-1}; 0, drift_variance)` factors.
    Coupled {
        drift_variance: f64,
    },
}

impl Dependency {
    pub fn drift_variance(&self) -> Option<f64> {
        match *self {
            Dependency::None => None,
            Dependency::RandomWalk { drift_variance } | Dependency::Coupled { drift_variance } => {
                Some(drift_variance)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub known_item: Option<KnownItem>,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub dependency: Dependency,
    pub utility: UtilityFn,
}

impl InstanceSpec {
    /// `n` items; item 0 known exactly at the step threshold, the rest `N(0, 1)`.
    pub fn anchored(n: usize) -> Self {
        Self {
            n,
            known_item: Some(KnownItem {
                index: 0,
                value: 1.0,
            }),
            prior_mean: 0.0,
            prior_variance: 1.0,
            dependency: Dependency::None,
            utility: UtilityFn::unit_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("instance needs at least one item"));
        }
        if !(self.prior_variance > 0.0) || !self.prior_variance.is_finite() {
            return Err(invalid("prior_variance must be finite and > 0"));
        }
        if !self.prior_mean.is_finite() {
            return Err(invalid("prior_mean must be finite"));
        }
        if let Some(k) = self.known_item {
            if k.index >= self.n {
                return Err(invalid("known item index out of range"));
            }
            if !k.value.is_finite() {
                return Err(invalid("known item value must be finite"));
            }
            if self.dependency != Dependency::None {
                return Err(invalid(
                    "chain dependencies do not support an exactly known item",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub true_values: Vec<f64>,
    pub beliefs: Beliefs,
}

/// Draws the true values for `spec` from its prior, addressed by `key`.
pub fn generate_instance(spec: &InstanceSpec, key: StreamKey) -> Result<Instance> {
    spec.validate()?;
    let key = key.child(TAG_INSTANCE);
    let z: Vec<f64> = (0..spec.n)
        .map(|i| key.child(i as u64).standard_normal())
        .collect();
    let prior = GaussianBelief::new(spec.prior_mean, spec.prior_variance)?;
    match spec.dependency {
        Dependency::None => {
            let sd = libm::sqrt(spec.prior_variance);
            let mut beliefs = Vec::with_capacity(spec.n);
            let mut truth = Vec::with_capacity(spec.n);
            for (i, zi) in z.iter().enumerate() {
                match spec.known_item {
                    Some(k) if k.index == i => {
                        beliefs.push(GaussianBelief::known(k.value));
                        truth.push(k.value);
                    }
                    _ => {
                        beliefs.push(prior);
                        truth.push(spec.prior_mean + sd * zi);
                    }
                }
            }
            Ok(Instance {
                true_values: truth,
                beliefs: Beliefs::Independent(beliefs),
            })
        }
        Dependency::RandomWalk { drift_variance } => {
            let chain = ChainBelief::random_walk(prior, spec.n, drift_variance)?;
            let truth = chain.sample_from_normals(&z)?;
            Ok(Instance {
                true_values: truth,
                beliefs: Beliefs::Chain(chain),
            })
        }
        Dependency::Coupled { drift_variance } => {
            let chain = ChainBelief::coupled(&alloc::vec![prior; spec.n], drift_variance)?;
            let truth = chain.sample_from_normals(&z)?;
            Ok(Instance {
                true_values: truth,
                beliefs: Beliefs::Chain(chain),
            })
        }
    }
}
