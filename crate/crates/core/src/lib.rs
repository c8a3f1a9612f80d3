//! Semi-myopic value-of-information estimators for the selection problem.
//!
//! Items carry Gaussian beliefs about their value, measurements are i.i.d.
//! Gaussian and cost a fixed amount each, and a utility function maps item
//! values to payoff. The crate provides exact belief updating (independent
//! items and 1-D Gaussian Markov chains), expected utility, batch VOI under
//! the myopic / blinkered / omni-myopic / exhaustive constraint families, the
//! greedy measure-or-stop controller, and brute-force oracles used to check
//! all of the above.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod belief;
pub mod error;
pub mod instance;
pub mod oracle;
pub mod policy;
pub mod quad;
pub mod rng;
pub mod special;
pub mod utility;
pub mod voi;

pub use belief::{Beliefs, ChainBelief, GaussianBelief, MeasurementModel, PreposteriorSummary};
pub use error::{Error, Result};
pub use instance::{generate_instance, Dependency, Instance, InstanceSpec, KnownItem};
pub use policy::{
    decide, deliberate, run_episode, select_item, Action, ControllerState, EpisodeResult,
    ExecutionMode, TraceStep,
};
pub use rng::StreamKey;
pub use utility::UtilityFn;
pub use voi::{
    batch_count, best_batch, bvi, enumerate_batches, intrinsic_batch_value, mvi_k, Batch,
    ConstraintFamily, EstimatorSettings, VoiEstimate,
};
