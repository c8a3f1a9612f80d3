//! The greedy measure-or-stop controller.
//!
//! At every step the controller values the best batch admitted by its
//! constraint family. If that batch has positive net value and budget
//! remains it measures (one measurement, or the whole batch), updates its
//! beliefs and deliberates again; otherwise it selects the item with the
//! highest expected utility.

use alloc::vec::Vec;
use core::fmt;

use crate::belief::{Beliefs, MeasurementModel};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{StreamKey, TAG_ESTIMATOR};
use crate::utility::UtilityFn;
use crate::voi::{best_batch, ConstraintFamily, EstimatorSettings, VoiEstimate};

/// Net VOI must exceed this to justify a measurement.
pub const POSITIVE_VOI: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    /// Perform the best single measurement of the chosen batch, then re-deliberate.
    SingleStep,
    /// Perform every measurement of the chosen batch before re-deliberating.
    WholeBatch,
}

impl ExecutionMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecutionMode::SingleStep => "single_step",
            ExecutionMode::WholeBatch => "whole_batch",
        }
    }
}

impl core::str::FromStr for ExecutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "single_step" | "single" => Ok(ExecutionMode::SingleStep),
            "whole_batch" | "batch" => Ok(ExecutionMode::WholeBatch),
            _ => Err(crate::error::invalid(alloc::format!(
                "unknown execution mode `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Measure { item: usize },
    Select { item: usize },
}

/// One performed measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub item: usize,
    pub observation: f64,
    /// Net value of the batch that motivated the measurement.
    pub net_voi: f64,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.step, self.item, self.observation, self.net_voi
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub beliefs: Beliefs,
    pub remaining_budget: u32,
    pub spent_cost: f64,
    pub trace: Vec<TraceStep>,
}

impl ControllerState {
    pub fn new(beliefs: Beliefs, budget: u32) -> Self {
        Self {
            beliefs,
            remaining_budget: budget,
            spent_cost: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn measurements_taken(&self) -> usize {
        self.trace.len()
    }
}

/// Item with the highest expected utility; ties go to the lowest index.
pub fn select_item(beliefs: &Beliefs, utility: &UtilityFn) -> Result<usize> {
    let marginals = beliefs.marginals()?;
    let mut best = 0;
    let mut best_eu = f64::NEG_INFINITY;
    for (i, b) in marginals.iter().enumerate() {
        let eu = utility.expected_utility(b);
        if eu > best_eu {
            best = i;
            best_eu = eu;
        }
    }
    Ok(best)
}

/// Next action and the batch estimate behind it.
///
/// For a `Select` the estimate is the best batch found (net ≤ threshold) or
/// the empty estimate when the budget is exhausted.
pub fn deliberate(
    state: &ControllerState,
    family: ConstraintFamily,
    model: &MeasurementModel,
    utility: &UtilityFn,
    settings: &EstimatorSettings,
) -> Result<(Action, VoiEstimate)> {
    let n = state.beliefs.len();
    if state.remaining_budget == 0 {
        let item = select_item(&state.beliefs, utility)?;
        return Ok((Action::Select { item }, VoiEstimate::nothing(n)));
    }
    let best = best_batch(
        &state.beliefs,
        model,
        utility,
        family,
        state.remaining_budget,
        settings,
    )?;
    if !(best.net > POSITIVE_VOI) {
        let item = select_item(&state.beliefs, utility)?;
        return Ok((Action::Select { item }, best));
    }
    let members: Vec<(usize, u32)> = best.batch.members().collect();
    let item = if let [(only, _)] = members.as_slice() {
        *only
    } else {
        // largest single-measurement value inside the batch, lowest index on ties
        let mut pick = members[0].0;
        let mut pick_value = f64::NEG_INFINITY;
        for &(i, _) in &members {
            let v = crate::voi::mvi_k(&state.beliefs, model, utility, i, 1, settings)?.intrinsic;
            if v > pick_value {
                pick = i;
                pick_value = v;
            }
        }
        pick
    };
    Ok((Action::Measure { item }, best))
}

/// The controller's next action. In whole-batch mode the returned
/// measurement is the first of the batch; [`run_episode`] performs the rest
/// before deliberating again.
pub fn decide(
    state: &ControllerState,
    family: ConstraintFamily,
    model: &MeasurementModel,
    utility: &UtilityFn,
    mode: ExecutionMode,
    settings: &EstimatorSettings,
) -> Result<Action> {
    let (action, estimate) = deliberate(state, family, model, utility, settings)?;
    Ok(match (action, mode) {
        (Action::Measure { .. }, ExecutionMode::WholeBatch) => Action::Measure {
            item: estimate.batch.members().next().map_or(0, |m| m.0),
        },
        _ => action,
    })
}

/// Outcome of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub selected: usize,
    /// Item of highest true utility (lowest index on ties).
    pub best: usize,
    /// Utility of the selected item minus the total measurement cost.
    pub net_utility: f64,
    /// Best true utility minus the net utility.
    pub regret: f64,
    pub measurements: usize,
    pub spent_cost: f64,
    pub seed: u64,
    pub trace: Vec<TraceStep>,
}

/// Runs the controller on `instance` until it selects.
///
/// Observations of `item` are `x_item + σ_o · ε`, with `ε` addressed by
/// `(stream, item, per-item measurement index)` so that different schemes
/// see identical noise for identical measurements.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    instance: &Instance,
    family: ConstraintFamily,
    model: &MeasurementModel,
    utility: &UtilityFn,
    mode: ExecutionMode,
    budget: u32,
    stream: StreamKey,
    settings: &EstimatorSettings,
) -> Result<EpisodeResult> {
    let n = instance.beliefs.len();
    let mut state = ControllerState::new(instance.beliefs.clone(), budget);
    let mut per_item = alloc::vec![0u32; n];
    let noise_sd = libm::sqrt(model.noise_variance);
    let estimator_key = stream.child(TAG_ESTIMATOR);

    let mut deliberations = 0usize;
    let selected = loop {
        deliberations += 1;
        debug_assert!(deliberations <= budget as usize + 1);
        let step_settings = settings.with_seed(estimator_key.child(deliberations as u64).value());
        let (action, estimate) = deliberate(&state, family, model, utility, &step_settings)?;
        let queue: Vec<usize> = match (action, mode) {
            (Action::Select { item }, _) => break item,
            (Action::Measure { item }, ExecutionMode::SingleStep) => alloc::vec![item],
            (Action::Measure { .. }, ExecutionMode::WholeBatch) => estimate
                .batch
                .members()
                .flat_map(|(i, k)| core::iter::repeat_n(i, k as usize))
                .take(state.remaining_budget as usize)
                .collect(),
        };
        for item in queue {
            let eps = stream.observation_noise(item, per_item[item]);
            per_item[item] += 1;
            let y = instance.true_values[item] + noise_sd * eps;
            state.beliefs = state.beliefs.observe(model, item, 1, y)?;
            state.remaining_budget -= 1;
            state.spent_cost = (state.trace.len() + 1) as f64 * model.cost;
            state.trace.push(TraceStep {
                step: state.trace.len(),
                item,
                observation: y,
                net_voi: estimate.net,
            });
        }
    };

    let true_utils: Vec<f64> = instance
        .true_values
        .iter()
        .map(|&x| utility.evaluate(x))
        .collect();
    let mut best = 0;
    for (i, &v) in true_utils.iter().enumerate() {
        if v > true_utils[best] {
            best = i;
        }
    }
    let net_utility = true_utils[selected] - state.spent_cost;
    Ok(EpisodeResult {
        selected,
        best,
        net_utility,
        regret: true_utils[best] - net_utility,
        measurements: state.trace.len(),
        spent_cost: state.spent_cost,
        seed: stream.value(),
        trace: state.trace,
    })
}
