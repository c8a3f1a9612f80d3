//! Brute-force verification machinery.
//!
//! Everything here is deliberately slow and simple: exact backward induction
//! over a discretized observation tree, plain Monte Carlo over true values
//! and observations, and exhaustive enumeration for the additive synthetic
//! instances used by the approximation-ratio checks. None of it shares code
//! paths with the estimators in [`crate::voi`] beyond belief updating and
//! expected utility.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::belief::{Beliefs, GaussianBelief, MeasurementModel};
use crate::error::{invalid, Error, Result};
use crate::instance::Instance;
use crate::policy::{run_episode, ExecutionMode};
use crate::quad::HermiteRule;
use crate::rng::StreamKey;
use crate::utility::UtilityFn;
use crate::voi::{Batch, ConstraintFamily, EstimatorSettings};

/// Largest instance [`optimal_plan_value`] accepts.
pub const MAX_PLAN_ITEMS: usize = 3;
pub const MAX_PLAN_BUDGET: u32 = 4;

/// Discretization of one observation: Gauss–Hermite nodes of the
/// predictive distribution, expressed in standard-normal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ObsGrid {
    /// An odd `count ≥ 3` keeps a node at the predictive mean.
    pub fn new(count: usize) -> Result<Self> {
        if count < 3 || count.is_multiple_of(2) {
            return Err(invalid("observation grid needs an odd node count >= 3"));
        }
        let rule = HermiteRule::new(count);
        let norm = 1.0 / libm::sqrt(core::f64::consts::PI);
        Ok(Self {
            nodes: rule
                .nodes
                .iter()
                .map(|x| core::f64::consts::SQRT_2 * x)
                .collect(),
            weights: rule.weights.iter().map(|w| w * norm).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Predictive standard deviations covered by the outermost node.
    pub fn span(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }
}

impl Default for ObsGrid {
    fn default() -> Self {
        Self::new(9).expect("9 is a valid node count")
    }
}

fn max_expected(beliefs: &[GaussianBelief], utility: &UtilityFn) -> f64 {
    beliefs
        .iter()
        .map(|b| utility.expected_utility(b))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_plan_size(beliefs: &[GaussianBelief], budget: u32) -> Result<()> {
    if beliefs.is_empty() {
        return Err(invalid("planning needs at least one item"));
    }
    if beliefs.len() > MAX_PLAN_ITEMS || budget > MAX_PLAN_BUDGET {
        return Err(Error::Intractable(format!(
            "exact planning is limited to {MAX_PLAN_ITEMS} items and budget {MAX_PLAN_BUDGET} \
             (got {} items, budget {budget})",
            beliefs.len()
        )));
    }
    Ok(())
}

/// Value of measuring `item` once and then acting optimally.
fn continue_value(
    beliefs: &[GaussianBelief],
    item: usize,
    model: &MeasurementModel,
    utility: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
) -> Result<f64> {
    let b = beliefs[item];
    let spread = libm::sqrt(b.variance + model.noise_variance);
    let mut next = beliefs.to_vec();
    let mut acc = 0.0;
    for (&z, &w) in grid.nodes.iter().zip(&grid.weights) {
        next[item] = b.posterior_update(model, 1, b.mean + spread * z)?;
        acc += w * plan_value(&next, model, utility, budget - 1, grid)?;
    }
    Ok(acc - model.cost)
}

fn plan_value(
    beliefs: &[GaussianBelief],
    model: &MeasurementModel,
    utility: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
) -> Result<f64> {
    let mut best = max_expected(beliefs, utility);
    if budget == 0 {
        return Ok(best);
    }
    for item in 0..beliefs.len() {
        if beliefs[item].is_known() {
            continue;
        }
        best = best.max(continue_value(beliefs, item, model, utility, budget, grid)?);
    }
    Ok(best)
}

/// Expected net value (selected item's utility minus measurement cost) of
/// the optimal adaptive policy on independent beliefs, by backward
/// induction over `grid`.
pub fn optimal_plan_value(
    beliefs: &[GaussianBelief],
    model: &MeasurementModel,
    utility: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
) -> Result<f64> {
    check_plan_size(beliefs, budget)?;
    plan_value(beliefs, model, utility, budget, grid)
}

/// First action of the optimal policy: `Some(item)` to measure, `None` to
/// select now. Selecting wins ties, then lower indices.
pub fn optimal_first_measurement(
    beliefs: &[GaussianBelief],
    model: &MeasurementModel,
    utility: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
) -> Result<Option<usize>> {
    check_plan_size(beliefs, budget)?;
    if budget == 0 {
        return Ok(None);
    }
    let mut best = max_expected(beliefs, utility);
    let mut choice = None;
    for item in 0..beliefs.len() {
        if beliefs[item].is_known() {
            continue;
        }
        let v = continue_value(beliefs, item, model, utility, budget, grid)?;
        if v > best {
            best = v;
            choice = Some(item);
        }
    }
    Ok(choice)
}

/// One blinkered termination state checked against the optimal plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationCheck {
    pub path: usize,
    pub remaining_budget: u32,
    /// Optimal plan value minus the value of selecting immediately.
    pub optimal_voi: f64,
    /// `remaining_budget · C − optimal_voi`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingBoundReport {
    pub checks: Vec<TerminationCheck>,
}

impl StoppingBoundReport {
    pub const TOLERANCE: f64 = 1e-6;

    pub fn min_margin(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self) -> bool {
        self.min_margin() >= -Self::TOLERANCE
    }
}

/// Runs the blinkered controller on `paths` sampled (truth, observation)
/// paths and checks, at each termination state with `m_b` budget left, that
/// the optimal remaining VOI is at most `m_b · C`.
pub fn check_stopping_bound(
    beliefs: &[GaussianBelief],
    model: &MeasurementModel,
    utility: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
    paths: usize,
    seed: u64,
) -> Result<StoppingBoundReport> {
    if beliefs.len() != 2 || beliefs.iter().filter(|b| b.is_known()).count() != 1 {
        return Err(invalid(
            "the stopping bound is defined for two items with exactly one known",
        ));
    }
    check_plan_size(beliefs, budget)?;
    let root = StreamKey::new(seed);
    let settings = EstimatorSettings::default();
    let mut checks = Vec::with_capacity(paths);
    for path in 0..paths {
        let key = root.child(path as u64);
        let truth: Vec<f64> = beliefs
            .iter()
            .enumerate()
            .map(|(i, b)| b.mean + b.sd() * key.child(0x7a11).child(i as u64).standard_normal())
            .collect();
        let instance = Instance {
            true_values: truth,
            beliefs: Beliefs::Independent(beliefs.to_vec()),
        };
        let episode = run_episode(
            &instance,
            ConstraintFamily::Blinkered,
            model,
            utility,
            ExecutionMode::SingleStep,
            budget,
            key,
            &settings,
        )?;
        let mut state = beliefs.to_vec();
        for step in &episode.trace {
            state[step.item] = state[step.item].posterior_update(model, 1, step.observation)?;
        }
        let remaining = budget - episode.measurements as u32;
        let optimal_voi =
            plan_value(&state, model, utility, remaining, grid)? - max_expected(&state, utility);
        checks.push(TerminationCheck {
            path,
            remaining_budget: remaining,
            optimal_voi,
            margin: remaining as f64 * model.cost - optimal_voi,
        });
    }
    Ok(StoppingBoundReport { checks })
}

/// Additive synthetic problem: measuring item `j` exactly `i` times is worth
/// `values[j][i]`, and allocations add up across items.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVoiInstance {
    values: Vec<Vec<f64>>,
}

impl SyntheticVoiInstance {
    /// `values[j]` tabulates `v_j(0..=m)`; every table must have the same
    /// length, start at 0 and be non-decreasing.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let len = values.first().map_or(0, Vec::len);
        if values.is_empty() || len == 0 {
            return Err(invalid(
                "synthetic instance needs at least one item and v(0)",
            ));
        }
        for (item, v) in values.iter().enumerate() {
            if v.len() != len {
                return Err(invalid("every value table must cover 0..=m"));
            }
            if v[0] != 0.0 {
                return Err(invalid(format!("v_{item}(0) must be 0")));
            }
            if v.windows(2).any(|w| !(w[1] >= w[0])) {
                return Err(Error::NonMonotone { item });
            }
        }
        Ok(Self { values })
    }

    /// The approximation-ratio construction: item 0 has `v(i) = (i/m)^(1/k)`,
    /// every other item is worth `(1/n)^(1/k)` from `m/n` measurements on.
    pub fn tightness(n: usize, m: usize, k: u32) -> Result<Self> {
        if n < 2 || m < n || !m.is_multiple_of(n) || k == 0 {
            return Err(invalid(
                "tightness construction needs n >= 2, n | m and k >= 1",
            ));
        }
        let root = 1.0 / k as f64;
        let plateau = libm::pow(1.0 / n as f64, root);
        let mut values = Vec::with_capacity(n);
        values.push(
            (0..=m)
                .map(|i| libm::pow(i as f64 / m as f64, root))
                .collect(),
        );
        for _ in 1..n {
            values.push(
                (0..=m)
                    .map(|i| if i < m / n { 0.0 } else { plateau })
                    .collect(),
            );
        }
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn budget(&self) -> usize {
        self.values[0].len() - 1
    }

    pub fn item_value(&self, item: usize, count: usize) -> f64 {
        self.values[item][count]
    }

    pub fn value(&self, allocation: &[usize]) -> f64 {
        allocation
            .iter()
            .enumerate()
            .map(|(j, &k)| self.values[j][k])
            .sum()
    }

    /// Best value over every allocation of at most `m` measurements.
    pub fn optimal_value(&self) -> f64 {
        fn go(
            inst: &SyntheticVoiInstance,
            item: usize,
            left: usize,
            alloc: &mut Vec<usize>,
        ) -> f64 {
            if item == inst.n() {
                return inst.value(alloc);
            }
            let mut best = f64::NEG_INFINITY;
            for k in 0..=left {
                alloc[item] = k;
                best = best.max(go(inst, item + 1, left - k, alloc));
            }
            alloc[item] = 0;
            best
        }
        go(self, 0, self.budget(), &mut vec![0; self.n()])
    }

    /// Allocation reached by repeatedly measuring the item whose value at
    /// the full remaining budget is largest (lowest index on ties).
    pub fn blinkered_allocation(&self) -> Vec<usize> {
        let mut alloc = vec![0; self.n()];
        for remaining in (1..=self.budget()).rev() {
            let mut pick = 0;
            for j in 1..self.n() {
                if self.values[j][remaining] > self.values[pick][remaining] {
                    pick = j;
                }
            }
            alloc[pick] += 1;
        }
        alloc
    }

    pub fn blinkered_value(&self) -> f64 {
        self.value(&self.blinkered_allocation())
    }

    /// Mutual submodularity of every item pair: the union of two
    /// single-item measurement sets is worth at most the sum of the parts.
    pub fn mutually_submodular(&self) -> bool {
        let m = self.budget();
        let n = self.n();
        for a in 0..n {
            for b in a + 1..n {
                for ka in 0..=m {
                    for kb in 0..=m - ka {
                        let mut alloc = vec![0; n];
                        alloc[a] = ka;
                        alloc[b] = kb;
                        let union = self.value(&alloc);
                        if union > self.values[a][ka] + self.values[b][kb] + 1e-12 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationReport {
    pub v_optimal: f64,
    pub v_blinkered: f64,
    /// `v_optimal / v_blinkered` (infinite when blinkered gains nothing).
    pub ratio: f64,
    pub mutually_submodular: bool,
    /// `v_blinkered ≥ v_optimal / n − 1e−9`, vacuously true without mutual
    /// submodularity.
    pub bound_holds: bool,
}

pub fn check_approximation_bound(synth: &SyntheticVoiInstance) -> ApproximationReport {
    let v_optimal = synth.optimal_value();
    let v_blinkered = synth.blinkered_value();
    let mutually_submodular = synth.mutually_submodular();
    let ratio = if v_blinkered > 0.0 {
        v_optimal / v_blinkered
    } else if v_optimal > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let bound = v_blinkered >= v_optimal / synth.n() as f64 - 1e-9;
    ApproximationReport {
        v_optimal,
        v_blinkered,
        ratio,
        mutually_submodular,
        bound_holds: !mutually_submodular || bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Plain Monte-Carlo estimate of a batch's intrinsic value: draw the true
/// values from the current belief, draw the batch's observations, update
/// exactly, and average `max_i E'[u_i] − E'[u_α]` where `α` is the current
/// best item.
pub fn mc_batch_voi(
    beliefs: &Beliefs,
    model: &MeasurementModel,
    utility: &UtilityFn,
    batch: &Batch,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(invalid(
            "Monte-Carlo cross-check needs at least 1000 samples",
        ));
    }
    let n = beliefs.len();
    if batch.allocation.len() != n {
        return Err(invalid("batch length must equal the item count"));
    }
    let members: Vec<(usize, u32)> = batch.members().collect();
    for &(item, _) in &members {
        if beliefs.is_known(item) {
            return Err(Error::KnownItemMeasurement { item });
        }
    }
    let marginals = beliefs.marginals()?;
    let current: Vec<f64> = marginals
        .iter()
        .map(|b| utility.expected_utility(b))
        .collect();
    let mut alpha = 0;
    for (i, &v) in current.iter().enumerate() {
        if v > current[alpha] {
            alpha = i;
        }
    }
    let noise_sd = libm::sqrt(model.noise_variance);
    let root = StreamKey::new(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut z = vec![0.0; n];
    for s in 0..samples {
        let mut rng = root.child(s as u64).rng();
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let gain = match beliefs {
            Beliefs::Independent(v) => {
                let mut post = v.clone();
                for &(item, k) in &members {
                    let x = v[item].mean + v[item].sd() * z[item];
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let ybar = x + noise_sd / libm::sqrt(k as f64) * e;
                    post[item] = v[item].posterior_update(model, k, ybar)?;
                }
                gain_of(&post, utility, alpha)
            }
            Beliefs::Chain(chain) => {
                let truth = chain.sample_from_normals(&z)?;
                let mut post = beliefs.clone();
                for &(item, k) in &members {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let ybar = truth[item] + noise_sd / libm::sqrt(k as f64) * e;
                    post = post.observe(model, item, k, ybar)?;
                }
                gain_of(&post.marginals()?, utility, alpha)
            }
        };
        sum += gain;
        sum_sq += gain * gain;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: libm::sqrt(var / nf),
    })
}

fn gain_of(post: &[GaussianBelief], utility: &UtilityFn, alpha: usize) -> f64 {
    max_expected(post, utility) - utility.expected_utility(&post[alpha])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voi::intrinsic_batch_value;

    fn pathological() -> (Vec<GaussianBelief>, UtilityFn) {
        let b = vec![
            GaussianBelief::known(1.0),
            GaussianBelief::new(0.0, 1.0).unwrap(),
        ];
        (b, UtilityFn::unit_step())
    }

    #[test]
    fn grid_invariants() {
        for n in [3, 9, 17] {
            let g = ObsGrid::new(n).unwrap();
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(g.nodes[n / 2], 0.0);
        }
        assert!(ObsGrid::new(8).is_err());
        assert!(ObsGrid::new(1).is_err());
    }

    #[test]
    fn plan_value_trivial_cases() {
        let (b, u) = pathological();
        let model = MeasurementModel::new(5.0, 0.00144).unwrap();
        let g = ObsGrid::default();
        assert_eq!(optimal_plan_value(&b, &model, &u, 0, &g).unwrap(), 0.5);
        let v2 = optimal_plan_value(&b, &model, &u, 2, &g).unwrap();
        assert!(v2 >= 0.5);
        let mut prev = 0.0;
        for m in 0..=4 {
            let v = optimal_plan_value(&b, &model, &u, m, &g).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        let big = vec![GaussianBelief::new(0.0, 1.0).unwrap(); 4];
        assert!(matches!(
            optimal_plan_value(&big, &model, &u, 1, &g),
            Err(Error::Intractable(_))
        ));
    }

    #[test]
    fn plan_value_grid_convergence() {
        let u = UtilityFn::unit_step();
        let model = MeasurementModel::new(2.0, 0.001).unwrap();
        let b = vec![
            GaussianBelief::known(0.8),
            GaussianBelief::new(0.3, 1.5).unwrap(),
        ];
        let coarse = optimal_plan_value(&b, &model, &u, 3, &ObsGrid::new(9).unwrap()).unwrap();
        let fine = optimal_plan_value(&b, &model, &u, 3, &ObsGrid::new(17).unwrap()).unwrap();
        assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn tightness_construction() {
        let r = check_approximation_bound(&SyntheticVoiInstance::tightness(4, 8, 2).unwrap());
        assert!((r.v_optimal - 2.0).abs() < 1e-12);
        assert!((r.v_blinkered - 1.0).abs() < 1e-12);
        assert!((r.ratio - 2.0).abs() < 1e-12);
        let r = check_approximation_bound(&SyntheticVoiInstance::tightness(4, 8, 64).unwrap());
        assert!((r.ratio - 4.0).abs() < 0.4);
        let linear: Vec<f64> = (0..=6).map(|i| i as f64).collect();
        let r =
            check_approximation_bound(&SyntheticVoiInstance::new(vec![linear.clone(); 3]).unwrap());
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn synthetic_validation() {
        assert!(matches!(
            SyntheticVoiInstance::new(vec![vec![0.0, 1.0], vec![0.0, 2.0, 1.0]]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            SyntheticVoiInstance::new(vec![vec![0.0, 1.0, 0.5]]),
            Err(Error::NonMonotone { item: 0 })
        ));
        assert!(SyntheticVoiInstance::new(vec![vec![0.1, 1.0]]).is_err());
    }

    #[test]
    fn mc_matches_quadrature_on_pathological_batch() {
        let (b, u) = pathological();
        let beliefs = Beliefs::Independent(b);
        let model = MeasurementModel::new(5.0, 0.0).unwrap();
        let batch = Batch::single(2, 1, 2);
        let mc = mc_batch_voi(&beliefs, &model, &u, &batch, 200_000, 11).unwrap();
        let q = intrinsic_batch_value(&beliefs, &model, &u, &batch, &EstimatorSettings::default())
            .unwrap();
        assert!(
            (mc.estimate - q).abs() < 3.0 * mc.std_error + 1e-12,
            "{mc:?} vs {q}"
        );
        assert!(mc_batch_voi(&beliefs, &model, &u, &batch, 10, 0).is_err());
    }

    #[test]
    fn stopping_bound_pathological() {
        let (b, u) = pathological();
        let model = MeasurementModel::new(5.0, 0.00144).unwrap();
        let r = check_stopping_bound(&b, &model, &u, 3, &ObsGrid::default(), 20, 5).unwrap();
        assert_eq!(r.checks.len(), 20);
        assert!(r.holds(), "min margin {}", r.min_margin());
    }
}
