//! Semi-myopic value-of-information estimates.
//!
//! A batch assigns a measurement count to each item. Its intrinsic value is
//! the expected gain in the best expected utility once all of the batch's
//! observations are in, relative to selecting now; its net value subtracts
//! the measurement cost. Constraint families restrict which batches are
//! considered:
//!
//! | family      | allowed allocations                     |
//! |-------------|-----------------------------------------|
//! | myopic      | a single measurement                    |
//! | blinkered   | any number of measurements of one item  |
//! | omni-myopic | at most one measurement per item        |
//! | exhaustive  | anything within the remaining budget    |
//!
//! Estimation strategy by batch shape:
//! - one item, independent beliefs: 1-D quadrature of the benefit split at
//!   the point where the posterior expected utility crosses the reference;
//! - one item, chain beliefs: 1-D quadrature over the single innovation;
//! - several items, independent beliefs, step utility: exact order-statistic
//!   integral of the distribution of the maximum;
//! - otherwise: Monte-Carlo with common random numbers.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::belief::{Beliefs, GaussianBelief, MeasurementModel};
use crate::error::{invalid, Error, Result};
use crate::quad::integrate_pieces;
use crate::rng::{StreamKey, TAG_ESTIMATOR};
use crate::special::norm_cdf;
use crate::utility::UtilityFn;

/// Innovation window (standard deviations) for 1-D preposterior integrals.
const Z_SPAN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    Myopic,
    Blinkered,
    OmniMyopic,
    Exhaustive,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 4] = [
        ConstraintFamily::Myopic,
        ConstraintFamily::Blinkered,
        ConstraintFamily::OmniMyopic,
        ConstraintFamily::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::Myopic => "myopic",
            ConstraintFamily::Blinkered => "blinkered",
            ConstraintFamily::OmniMyopic => "omni_myopic",
            ConstraintFamily::Exhaustive => "exhaustive",
        }
    }

    /// Whether `batch` satisfies this family's constraint.
    pub fn admits(self, batch: &Batch) -> bool {
        let total = batch.total();
        match self {
            ConstraintFamily::Myopic => total == 1,
            ConstraintFamily::Blinkered => batch.allocation.iter().filter(|&&k| k > 0).count() == 1,
            ConstraintFamily::OmniMyopic => total >= 1 && batch.allocation.iter().all(|&k| k <= 1),
            ConstraintFamily::Exhaustive => total >= 1,
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "myopic" => Ok(ConstraintFamily::Myopic),
            "blinkered" => Ok(ConstraintFamily::Blinkered),
            "omni_myopic" | "omnimyopic" | "omni" => Ok(ConstraintFamily::OmniMyopic),
            "exhaustive" => Ok(ConstraintFamily::Exhaustive),
            _ => Err(invalid(alloc::format!("unknown constraint family `{s}`"))),
        }
    }
}

/// Measurement counts per item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Batch {
    pub allocation: Vec<u32>,
}

impl Batch {
    pub fn new(allocation: Vec<u32>) -> Self {
        Self { allocation }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            allocation: vec![0; n],
        }
    }

    /// `k` measurements of `item` and nothing else.
    pub fn single(n: usize, item: usize, k: u32) -> Self {
        let mut allocation = vec![0; n];
        allocation[item] = k;
        Self { allocation }
    }

    pub fn total(&self) -> u32 {
        self.allocation.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// `(item, count)` for every measured item, ascending by item.
    pub fn members(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.allocation
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, k)| k > 0)
    }

    /// Preference order among equally valued batches: fewer measurements
    /// first, then the batch whose measurements favour lower item indices.
    pub fn canonical_cmp(&self, other: &Batch) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| other.allocation.cmp(&self.allocation))
    }
}

/// Value of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiEstimate {
    pub intrinsic: f64,
    pub cost: f64,
    pub net: f64,
    pub batch: Batch,
}

impl VoiEstimate {
    fn new(intrinsic: f64, model: &MeasurementModel, batch: Batch) -> Self {
        let cost = batch.total() as f64 * model.cost;
        Self {
            intrinsic,
            cost,
            net: intrinsic - cost,
            batch,
        }
    }

    /// The "measure nothing" estimate.
    pub fn nothing(n: usize) -> Self {
        Self {
            intrinsic: 0.0,
            cost: 0.0,
            net: 0.0,
            batch: Batch::empty(n),
        }
    }

    /// Higher net wins; equal nets fall back to [`Batch::canonical_cmp`].
    fn better_than(&self, other: &VoiEstimate) -> bool {
        match self.net.partial_cmp(&other.net) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => self.batch.canonical_cmp(&other.batch) == Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    /// Relative tolerance of the adaptive quadratures.
    pub quadrature_tolerance: f64,
    /// Sample count of the Monte-Carlo estimator.
    pub mc_samples: usize,
    /// Seed of the Monte-Carlo estimator; shared by every batch valued in
    /// one decision (common random numbers).
    pub seed: u64,
    /// Locate the blinkered maximum by bisection instead of a full scan.
    pub bisection: bool,
    /// Refuse to enumerate more candidate batches than this.
    pub enumeration_limit: u64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            quadrature_tolerance: 1e-8,
            mc_samples: 10_000,
            seed: 0,
            bisection: false,
            enumeration_limit: 2_000_000,
        }
    }
}

impl EstimatorSettings {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Current-state quantities shared by every batch valued in one decision.
struct Evaluator<'a> {
    beliefs: &'a Beliefs,
    model: &'a MeasurementModel,
    utility: &'a UtilityFn,
    settings: &'a EstimatorSettings,
    marginals: Vec<GaussianBelief>,
    current: Vec<f64>,
    best: usize,
    /// Dense covariance, chain beliefs only.
    covariance: Option<DMatrix<f64>>,
}

/// Posterior means are `means + loadings * z`, `z ~ N(0, I)`.
struct Preposterior {
    loadings: DMatrix<f64>,
    posterior_variance: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(
        beliefs: &'a Beliefs,
        model: &'a MeasurementModel,
        utility: &'a UtilityFn,
        settings: &'a EstimatorSettings,
    ) -> Result<Self> {
        let marginals = beliefs.marginals()?;
        let current: Vec<f64> = marginals
            .iter()
            .map(|b| utility.expected_utility(b))
            .collect();
        let best = argmax_first(&current);
        let covariance = match beliefs {
            Beliefs::Independent(_) => None,
            Beliefs::Chain(chain) => {
                let n = chain.len();
                let mut cov = DMatrix::zeros(n, n);
                for j in 0..n {
                    let col = chain.covariance_column(j)?;
                    cov.set_column(j, &DVector::from_vec(col));
                }
                Some(cov)
            }
        };
        Ok(Self {
            beliefs,
            model,
            utility,
            settings,
            marginals,
            current,
            best,
            covariance,
        })
    }

    fn n(&self) -> usize {
        self.marginals.len()
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.allocation.len() != self.n() {
            return Err(invalid("batch length must equal the item count"));
        }
        if batch.total() == 0 {
            return Err(invalid("batch must contain at least one measurement"));
        }
        for (item, _) in batch.members() {
            if self.beliefs.is_known(item) {
                return Err(Error::KnownItemMeasurement { item });
            }
        }
        Ok(())
    }

    fn intrinsic(&self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        if self.n() < 2 {
            return Ok(0.0);
        }
        let members: Vec<(usize, u32)> = batch.members().collect();
        let raw = match (&self.covariance, members.as_slice()) {
            (None, &[(item, k)]) => self.single_item(item, k)?,
            (None, _) if matches!(self.utility, UtilityFn::Step { .. }) => {
                self.order_statistic(&members)?
            }
            (cov, _) => {
                let pre = self.preposterior(&members, cov.as_ref())?;
                if members.len() == 1 {
                    self.rank_one(&pre)
                } else {
                    self.monte_carlo(&pre)
                }
            }
        };
        debug_assert!(
            raw > -1e-9,
            "intrinsic value estimate {raw} is materially negative"
        );
        Ok(raw.max(0.0))
    }

    fn preposterior(
        &self,
        members: &[(usize, u32)],
        covariance: Option<&DMatrix<f64>>,
    ) -> Result<Preposterior> {
        let n = self.n();
        let r = members.len();
        match covariance {
            None => {
                let mut loadings = DMatrix::zeros(n, r);
                let mut posterior_variance: Vec<f64> =
                    self.marginals.iter().map(|b| b.variance).collect();
                for (f, &(item, k)) in members.iter().enumerate() {
                    let p = self.marginals[item].preposterior(self.model, k)?;
                    loadings[(item, f)] = libm::sqrt(p.mean_spread);
                    posterior_variance[item] = p.posterior_variance;
                }
                Ok(Preposterior {
                    loadings,
                    posterior_variance,
                })
            }
            Some(cov) => {
                // S = Σ_MM + diag(σ_o² / k);  loadings = Σ_{:,M} chol(S)^{-T}
                let idx: Vec<usize> = members.iter().map(|m| m.0).collect();
                let mut s = cov.select_rows(&idx).select_columns(&idx);
                for (f, &(_, k)) in members.iter().enumerate() {
                    s[(f, f)] += self.model.noise_variance / k as f64;
                }
                let chol = s.cholesky().ok_or(Error::NotPositiveDefinite {
                    pivot: 0,
                    value: f64::NAN,
                })?;
                let cross_t = cov.select_columns(&idx).transpose();
                let solved = chol.l().solve_lower_triangular(&cross_t).ok_or(
                    Error::NotPositiveDefinite {
                        pivot: 0,
                        value: f64::NAN,
                    },
                )?;
                let loadings = solved.transpose();
                let posterior_variance = (0..n)
                    .map(|j| {
                        let explained: f64 = loadings.row(j).iter().map(|l| l * l).sum();
                        (cov[(j, j)] - explained).max(0.0)
                    })
                    .collect();
                Ok(Preposterior {
                    loadings,
                    posterior_variance,
                })
            }
        }
    }

    /// Independent beliefs, `k` measurements of one item.
    ///
    /// If the item is not the current best, the benefit is how far its
    /// posterior expected utility rises above the best; if it is the best,
    /// how far it falls below the runner-up. The integrand's kink is where
    /// the posterior expected utility equals that reference.
    fn single_item(&self, item: usize, k: u32) -> Result<f64> {
        let belief = self.marginals[item];
        let pre = belief.preposterior(self.model, k)?;
        let tau = libm::sqrt(pre.mean_spread);
        if tau == 0.0 {
            return Ok(0.0);
        }
        let is_best = item == self.best;
        let reference = if is_best {
            self.current
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != item)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            self.current[self.best]
        };
        let u = self.utility;
        let pv = pre.posterior_variance;
        let benefit = |z: f64| {
            let eu = u.expected_at(belief.mean + tau * z, pv);
            let gain = if is_best {
                reference - eu
            } else {
                eu - reference
            };
            gain.max(0.0) * crate::special::norm_pdf(z)
        };
        let (lo, hi) = u.bounds();
        let points: Vec<f64> = if u.is_monotone() {
            match u.mean_for_expected(pv, reference) {
                Some(m) => {
                    let z_kink = ((m - belief.mean) / tau).clamp(-Z_SPAN, Z_SPAN);
                    if is_best {
                        vec![-Z_SPAN, z_kink]
                    } else {
                        vec![z_kink, Z_SPAN]
                    }
                }
                // reference at or beyond the attainable range
                None if (reference >= hi) != is_best => return Ok(0.0),
                None => vec![-Z_SPAN, Z_SPAN],
            }
        } else {
            vec![-Z_SPAN, Z_SPAN]
        };
        Ok(self.quadrature(benefit, &points, hi - lo))
    }

    fn quadrature<F: FnMut(f64) -> f64>(&self, f: F, points: &[f64], range: f64) -> f64 {
        let floor = (range.abs() * 1e-6).max(f64::MIN_POSITIVE);
        integrate_pieces(f, points, self.settings.quadrature_tolerance, floor)
    }

    /// `E[max_j Y_j - Y_best]` where only one innovation moves the means.
    fn rank_one(&self, pre: &Preposterior) -> f64 {
        let n = self.n();
        let loads: Vec<f64> = (0..n).map(|j| pre.loadings[(j, 0)]).collect();
        let u = self.utility;
        let best = self.best;
        let integrand = |z: f64| {
            let mut top = f64::NEG_INFINITY;
            let mut anchor = 0.0;
            for (j, load) in loads.iter().enumerate() {
                let y = u.expected_at(self.marginals[j].mean + load * z, pre.posterior_variance[j]);
                if j == best {
                    anchor = y;
                }
                top = top.max(y);
            }
            (top - anchor) * crate::special::norm_pdf(z)
        };
        let (lo, hi) = u.bounds();
        self.quadrature(integrand, &[-Z_SPAN, 0.0, Z_SPAN], hi - lo)
    }

    /// Independent beliefs, step utility, several measured items.
    ///
    /// With `c` the best unmeasured expected utility,
    /// `E[max] = c + ∫_c^hi (1 - Π_j P(Y_j ≤ t)) dt`, and each `P(Y_j ≤ t)`
    /// is a normal CDF of the mean that would produce expected utility `t`.
    fn order_statistic(&self, members: &[(usize, u32)]) -> Result<f64> {
        let u = self.utility;
        let (lo, hi) = u.bounds();
        let mut measured = Vec::with_capacity(members.len());
        for &(item, k) in members {
            let b = self.marginals[item];
            let p = b.preposterior(self.model, k)?;
            measured.push((
                b.mean,
                libm::sqrt(p.mean_spread),
                p.posterior_variance,
                item,
            ));
        }
        let c = self
            .current
            .iter()
            .enumerate()
            .filter(|(j, _)| !members.iter().any(|m| m.0 == *j))
            .map(|(_, &v)| v)
            .fold(lo, f64::max);
        if c >= hi {
            return Ok(0.0);
        }
        let cdf = |t: f64| -> f64 {
            measured
                .iter()
                .map(|&(mean, tau, pv, _)| match u.mean_for_expected(pv, t) {
                    Some(m) if tau > 0.0 => norm_cdf((m - mean) / tau),
                    Some(m) => f64::from(u8::from(mean <= m)),
                    None if t >= hi => 1.0,
                    None => 0.0,
                })
                .product()
        };
        let mut points = vec![c, hi];
        for &(_, _, _, item) in &measured {
            let v = self.current[item];
            if v > c && v < hi {
                points.push(v);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let tail = self.quadrature(|t| 1.0 - cdf(t), &points, hi - lo);
        Ok(c + tail - self.current[self.best])
    }

    /// Monte-Carlo `E[max_j Y_j - Y_best]` with the decision's shared seed.
    fn monte_carlo(&self, pre: &Preposterior) -> f64 {
        let n = self.n();
        let r = pre.loadings.ncols();
        let samples = self.settings.mc_samples.max(1);
        let mut rng = StreamKey::new(self.settings.seed)
            .child(TAG_ESTIMATOR)
            .rng();
        let mut z = vec![0.0; r];
        let mut acc = 0.0;
        for _ in 0..samples {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let mut top = f64::NEG_INFINITY;
            let mut anchor = 0.0;
            for j in 0..n {
                let shift: f64 = (0..r).map(|f| pre.loadings[(j, f)] * z[f]).sum();
                let y = self
                    .utility
                    .expected_at(self.marginals[j].mean + shift, pre.posterior_variance[j]);
                if j == self.best {
                    anchor = y;
                }
                top = top.max(y);
            }
            acc += top - anchor;
        }
        acc / samples as f64
    }

    fn mvi_k(&self, item: usize, k: u32) -> Result<VoiEstimate> {
        let batch = Batch::single(self.n(), item, k);
        Ok(VoiEstimate::new(self.intrinsic(&batch)?, self.model, batch))
    }

    fn bvi(&self, item: usize, budget: u32) -> Result<VoiEstimate> {
        if item >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: item,
                len: self.n(),
            });
        }
        if budget == 0 {
            return Ok(VoiEstimate::nothing(self.n()));
        }
        if self.settings.bisection {
            // first k with net(k + 1) <= net(k); the maximum if net is unimodal
            let (mut lo, mut hi) = (1u32, budget);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                let here = self.mvi_k(item, mid)?;
                let next = self.mvi_k(item, mid + 1)?;
                if next.net > here.net {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            return self.mvi_k(item, lo);
        }
        let mut best = self.mvi_k(item, 1)?;
        for k in 2..=budget {
            let cand = self.mvi_k(item, k)?;
            if cand.better_than(&best) {
                best = cand;
            }
        }
        Ok(best)
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Intrinsic (cost-free) value of performing every measurement in `batch`
/// before selecting. Never negative.
pub fn intrinsic_batch_value(
    beliefs: &Beliefs,
    model: &MeasurementModel,
    utility: &UtilityFn,
    batch: &Batch,
    settings: &EstimatorSettings,
) -> Result<f64> {
    Evaluator::new(beliefs, model, utility, settings)?.intrinsic(batch)
}

/// Value of `k` measurements of `item`.
pub fn mvi_k(
    beliefs: &Beliefs,
    model: &MeasurementModel,
    utility: &UtilityFn,
    item: usize,
    k: u32,
    settings: &EstimatorSettings,
) -> Result<VoiEstimate> {
    if item >= beliefs.len() {
        return Err(Error::IndexOutOfRange {
            index: item,
            len: beliefs.len(),
        });
    }
    if k == 0 {
        return Err(invalid("measurement count k must be >= 1"));
    }
    Evaluator::new(beliefs, model, utility, settings)?.mvi_k(item, k)
}

/// Blinkered value of `item`: the best `k`-measurement estimate for
/// `k = 1..=budget`. A zero budget yields the empty estimate.
pub fn bvi(
    beliefs: &Beliefs,
    model: &MeasurementModel,
    utility: &UtilityFn,
    item: usize,
    budget: u32,
    settings: &EstimatorSettings,
) -> Result<VoiEstimate> {
    Evaluator::new(beliefs, model, utility, settings)?.bvi(item, budget)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of batches [`enumerate_batches`] would return for `unknown`
/// measurable items.
pub fn batch_count(family: ConstraintFamily, unknown: usize, budget: u32) -> u128 {
    let u = unknown as u128;
    let m = budget as u128;
    if u == 0 || m == 0 {
        return 0;
    }
    match family {
        ConstraintFamily::Myopic => u,
        ConstraintFamily::Blinkered => u * m,
        ConstraintFamily::OmniMyopic => (1..=u.min(m)).map(|s| binomial(u, s)).sum(),
        ConstraintFamily::Exhaustive => binomial(u + m, m) - 1,
    }
}

/// Every non-empty batch the family admits within `budget`, skipping known
/// items, in [`Batch::canonical_cmp`] order.
pub fn enumerate_batches(
    family: ConstraintFamily,
    n: usize,
    budget: u32,
    known_mask: &[bool],
) -> Vec<Batch> {
    let unknown: Vec<usize> = (0..n)
        .filter(|&i| !known_mask.get(i).copied().unwrap_or(false))
        .collect();
    let mut out = Vec::new();
    if unknown.is_empty() || budget == 0 {
        return out;
    }
    match family {
        ConstraintFamily::Myopic => {
            out.extend(unknown.iter().map(|&i| Batch::single(n, i, 1)));
        }
        ConstraintFamily::Blinkered => {
            for k in 1..=budget {
                out.extend(unknown.iter().map(|&i| Batch::single(n, i, k)));
            }
        }
        ConstraintFamily::OmniMyopic | ConstraintFamily::Exhaustive => {
            let cap = if family == ConstraintFamily::OmniMyopic {
                1
            } else {
                budget
            };
            for total in 1..=budget {
                let mut alloc = vec![0u32; n];
                compositions(&unknown, 0, total, cap, &mut alloc, &mut out);
            }
        }
    }
    out
}

/// Appends allocations of exactly `left` measurements over `items[pos..]`,
/// each count at most `cap`, larger counts on earlier items first.
fn compositions(
    items: &[usize],
    pos: usize,
    left: u32,
    cap: u32,
    alloc: &mut Vec<u32>,
    out: &mut Vec<Batch>,
) {
    if left == 0 {
        out.push(Batch::new(alloc.clone()));
        return;
    }
    if pos == items.len() {
        return;
    }
    let slots_after = (items.len() - pos - 1) as u64;
    for k in (0..=left.min(cap)).rev() {
        if (left - k) as u64 > slots_after * cap as u64 {
            continue;
        }
        alloc[items[pos]] = k;
        compositions(items, pos + 1, left - k, cap, alloc, out);
        alloc[items[pos]] = 0;
    }
}

/// The batch with the highest net value under `family` within `budget`.
///
/// Returns [`VoiEstimate::nothing`] when no batch is legal.
pub fn best_batch(
    beliefs: &Beliefs,
    model: &MeasurementModel,
    utility: &UtilityFn,
    family: ConstraintFamily,
    budget: u32,
    settings: &EstimatorSettings,
) -> Result<VoiEstimate> {
    let n = beliefs.len();
    let mask = beliefs.known_mask();
    let unknown: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    if unknown.is_empty() || budget == 0 {
        return Ok(VoiEstimate::nothing(n));
    }
    let count = batch_count(family, unknown.len(), budget);
    if count > settings.enumeration_limit as u128 {
        return Err(Error::EnumerationLimit {
            count,
            limit: settings.enumeration_limit,
        });
    }
    let eval = Evaluator::new(beliefs, model, utility, settings)?;
    let mut best: Option<VoiEstimate> = None;
    let mut consider = |cand: VoiEstimate| {
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    };
    if family == ConstraintFamily::Blinkered {
        for &item in &unknown {
            consider(eval.bvi(item, budget)?);
        }
    } else {
        for batch in enumerate_batches(family, n, budget, &mask) {
            let intrinsic = eval.intrinsic(&batch)?;
            consider(VoiEstimate::new(intrinsic, model, batch));
        }
    }
    Ok(best.unwrap_or_else(|| VoiEstimate::nothing(n)))
}
