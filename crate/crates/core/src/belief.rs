//! Gaussian beliefs over item values and exact belief updating.
//!
//! Two belief layouts are supported: independent per-item Gaussians and a
//! 1-D Gaussian Markov chain stored through its tridiagonal precision
//! matrix. A batch of `k` i.i.d. measurements of one item is summarised by
//! `(k, sample mean)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Normal belief `N(mean, variance)` about one item's value.
///
/// `variance == 0` marks an item whose value is known exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

/// i.i.d. Gaussian observation noise and a per-measurement cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    pub noise_variance: f64,
    pub cost: f64,
}

/// Pre-observation view of a `k`-measurement batch on one item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreposteriorSummary {
    /// Variance of the item's belief once the `k` observations are in.
    pub posterior_variance: f64,
    /// Variance of the posterior mean, seen before observing.
    pub mean_spread: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(invalid(
                "belief mean must be finite and variance finite and >= 0",
            ));
        }
        Ok(Self { mean, variance })
    }

    /// An item whose value is known exactly.
    pub fn known(value: f64) -> Self {
        Self {
            mean: value,
            variance: 0.0,
        }
    }

    pub fn is_known(&self) -> bool {
        self.variance == 0.0
    }

    pub fn sd(&self) -> f64 {
        libm::sqrt(self.variance)
    }

    /// Conjugate update after `k` observations whose average is `sample_mean`.
    pub fn posterior_update(
        &self,
        model: &MeasurementModel,
        k: u32,
        sample_mean: f64,
    ) -> Result<Self> {
        if self.is_known() {
            return Err(Error::KnownItemMeasurement { item: 0 });
        }
        if k == 0 {
            return Err(invalid("measurement count k must be >= 1"));
        }
        let prior_precision = 1.0 / self.variance;
        let data_precision = k as f64 / model.noise_variance;
        let precision = prior_precision + data_precision;
        let mean = (prior_precision * self.mean + data_precision * sample_mean) / precision;
        Ok(Self {
            mean,
            variance: 1.0 / precision,
        })
    }

    /// Posterior variance and spread of the posterior mean for `k` observations.
    pub fn preposterior(&self, model: &MeasurementModel, k: u32) -> Result<PreposteriorSummary> {
        if self.is_known() {
            return Err(Error::KnownItemMeasurement { item: 0 });
        }
        let s2 = self.variance;
        let posterior_variance = s2 * model.noise_variance / (model.noise_variance + k as f64 * s2);
        Ok(PreposteriorSummary {
            posterior_variance,
            mean_spread: s2 - posterior_variance,
        })
    }
}

impl MeasurementModel {
    pub fn new(noise_variance: f64, cost: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(invalid("noise_variance must be finite and > 0"));
        }
        if !(cost >= 0.0) || !cost.is_finite() {
            return Err(invalid("measurement cost must be finite and >= 0"));
        }
        Ok(Self {
            noise_variance,
            cost,
        })
    }
}

/// Jointly Gaussian item values coupled along a chain.
///
/// The precision matrix is symmetric tridiagonal: `diag[i]` on the diagonal
/// and `off[i]` linking items `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBelief {
    means: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    drift_variance: f64,
}

impl ChainBelief {
    /// Random-walk prior: `x_0 ~ first`, `x_i = x_{i-1} + w`, `w ~ N(0, drift_variance)`.
    pub fn random_walk(first: GaussianBelief, n: usize, drift_variance: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("chain needs at least one item"));
        }
        if first.is_known() {
            return Err(invalid("chain anchor must have positive variance"));
        }
        check_drift(drift_variance)?;
        let c = 1.0 / drift_variance;
        let mut diag = vec![0.0; n];
        diag[0] = 1.0 / first.variance;
        for i in 0..n - 1 {
            diag[i] += c;
            diag[i + 1] += c;
        }
        Self::from_parts(vec![first.mean; n], diag, vec![-c; n - 1], drift_variance)
    }

    /// Independent per-item priors multiplied by pairwise random-walk
    /// couplings `exp(-(x_i - x_{i-1})² / 2σ_w²)`.
    ///
    /// As `drift_variance` grows the couplings vanish and the items revert to
    /// `priors`.
    pub fn coupled(priors: &[GaussianBelief], drift_variance: f64) -> Result<Self> {
        if priors.is_empty() {
            return Err(invalid("chain needs at least one item"));
        }
        if priors.iter().any(GaussianBelief::is_known) {
            return Err(invalid("chain items must have positive prior variance"));
        }
        check_drift(drift_variance)?;
        let n = priors.len();
        let c = 1.0 / drift_variance;
        let mut diag: Vec<f64> = priors.iter().map(|p| 1.0 / p.variance).collect();
        for i in 0..n - 1 {
            diag[i] += c;
            diag[i + 1] += c;
        }
        let off = vec![-c; n - 1];
        let rhs: Vec<f64> = priors.iter().map(|p| p.mean / p.variance).collect();
        let pivots = ldl_pivots(&diag, &off)?;
        let means = ldl_solve(&pivots, &off, &rhs);
        Self::from_parts(means, diag, off, drift_variance)
    }

    pub fn from_parts(
        means: Vec<f64>,
        diag: Vec<f64>,
        off: Vec<f64>,
        drift_variance: f64,
    ) -> Result<Self> {
        let n = means.len();
        if n == 0 || diag.len() != n || off.len() + 1 != n {
            return Err(invalid("chain dimensions disagree"));
        }
        if means
            .iter()
            .chain(&diag)
            .chain(&off)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("chain entries must be finite"));
        }
        ldl_pivots(&diag, &off)?;
        Ok(Self {
            means,
            diag,
            off,
            drift_variance,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn precision_diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn precision_off(&self) -> &[f64] {
        &self.off
    }

    pub fn drift_variance(&self) -> f64 {
        self.drift_variance
    }

    /// Per-item marginals in O(n) from forward and backward LDL pivots.
    pub fn marginals(&self) -> Result<Vec<GaussianBelief>> {
        let n = self.len();
        let fwd = ldl_pivots(&self.diag, &self.off)?;
        let mut bwd = vec![0.0; n];
        bwd[n - 1] = self.diag[n - 1];
        for i in (0..n - 1).rev() {
            bwd[i] = self.diag[i] - self.off[i] * self.off[i] / bwd[i + 1];
        }
        (0..n)
            .map(|i| {
                let inv = fwd[i] + bwd[i] - self.diag[i];
                if !(inv > 0.0) || !inv.is_finite() {
                    return Err(Error::NotPositiveDefinite {
                        pivot: i,
                        value: inv,
                    });
                }
                Ok(GaussianBelief {
                    mean: self.means[i],
                    variance: 1.0 / inv,
                })
            })
            .collect()
    }

    /// Column `j` of the covariance matrix.
    pub fn covariance_column(&self, j: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        let pivots = ldl_pivots(&self.diag, &self.off)?;
        let mut rhs = vec![0.0; n];
        rhs[j] = 1.0;
        Ok(ldl_solve(&pivots, &self.off, &rhs))
    }

    /// Exact conditional after `k` observations of `item` averaging `sample_mean`.
    ///
    /// The precision only gains `k / σ_o²` on the item's diagonal entry.
    pub fn condition(
        &self,
        model: &MeasurementModel,
        item: usize,
        k: u32,
        sample_mean: f64,
    ) -> Result<Self> {
        let n = self.len();
        if item >= n {
            return Err(Error::IndexOutOfRange {
                index: item,
                len: n,
            });
        }
        if k == 0 {
            return Err(invalid("measurement count k must be >= 1"));
        }
        let col = self.covariance_column(item)?;
        let obs_var = model.noise_variance / k as f64;
        let gain = (sample_mean - self.means[item]) / (col[item] + obs_var);
        let means = self
            .means
            .iter()
            .zip(&col)
            .map(|(m, c)| m + c * gain)
            .collect();
        let mut diag = self.diag.clone();
        diag[item] += 1.0 / obs_var;
        Self::from_parts(means, diag, self.off.clone(), self.drift_variance)
    }

    /// Maps i.i.d. standard normals `z` to a draw from this joint Gaussian.
    pub fn sample_from_normals(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if z.len() != n {
            return Err(invalid("normal vector length must match the chain"));
        }
        let pivots = ldl_pivots(&self.diag, &self.off)?;
        // Q = L D Lᵀ  ⇒  x = m + L⁻ᵀ D^{-1/2} z
        let mut v: Vec<f64> = z
            .iter()
            .zip(&pivots)
            .map(|(zi, d)| zi / libm::sqrt(*d))
            .collect();
        for i in (0..n - 1).rev() {
            let l = self.off[i] / pivots[i];
            v[i] -= l * v[i + 1];
        }
        Ok(self.means.iter().zip(&v).map(|(m, d)| m + d).collect())
    }
}

fn check_drift(drift_variance: f64) -> Result<()> {
    if !(drift_variance > 0.0) || !drift_variance.is_finite() {
        return Err(invalid("drift_variance must be finite and > 0"));
    }
    Ok(())
}

/// Pivots `d_i` of `Q = L D Lᵀ` for a symmetric tridiagonal `Q`.
fn ldl_pivots(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let mut d = Vec::with_capacity(diag.len());
    for (i, &a) in diag.iter().enumerate() {
        let p = if i == 0 {
            a
        } else {
            a - off[i - 1] * off[i - 1] / d[i - 1]
        };
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: i, value: p });
        }
        d.push(p);
    }
    Ok(d)
}

/// Solves `Q x = rhs` given the LDL pivots of `Q`.
fn ldl_solve(pivots: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = pivots.len();
    let mut y = rhs.to_vec();
    for i in 1..n {
        y[i] -= off[i - 1] / pivots[i - 1] * y[i - 1];
    }
    for (yi, d) in y.iter_mut().zip(pivots) {
        *yi /= d;
    }
    for i in (0..n - 1).rev() {
        let l = off[i] / pivots[i];
        y[i] -= l * y[i + 1];
    }
    y
}

/// Beliefs over all items of a selection problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Beliefs {
    Independent(Vec<GaussianBelief>),
    Chain(ChainBelief),
}

impl Beliefs {
    pub fn len(&self) -> usize {
        match self {
            Beliefs::Independent(v) => v.len(),
            Beliefs::Chain(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn marginals(&self) -> Result<Vec<GaussianBelief>> {
        match self {
            Beliefs::Independent(v) => Ok(v.clone()),
            Beliefs::Chain(c) => c.marginals(),
        }
    }

    pub fn is_known(&self, item: usize) -> bool {
        match self {
            Beliefs::Independent(v) => v.get(item).is_some_and(GaussianBelief::is_known),
            Beliefs::Chain(_) => false,
        }
    }

    pub fn known_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_known(i)).collect()
    }

    /// Belief after `k` observations of `item` averaging `sample_mean`.
    pub fn observe(
        &self,
        model: &MeasurementModel,
        item: usize,
        k: u32,
        sample_mean: f64,
    ) -> Result<Self> {
        let n = self.len();
        if item >= n {
            return Err(Error::IndexOutOfRange {
                index: item,
                len: n,
            });
        }
        match self {
            Beliefs::Independent(v) => {
                let updated =
                    v[item]
                        .posterior_update(model, k, sample_mean)
                        .map_err(|e| match e {
                            Error::KnownItemMeasurement { .. } => {
                                Error::KnownItemMeasurement { item }
                            }
                            other => other,
                        })?;
                let mut next = v.clone();
                next[item] = updated;
                Ok(Beliefs::Independent(next))
            }
            Beliefs::Chain(c) => Ok(Beliefs::Chain(c.condition(model, item, k, sample_mean)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn model(noise_variance: f64) -> MeasurementModel {
        MeasurementModel::new(noise_variance, 0.0).unwrap()
    }

    fn dense_covariance(chain: &ChainBelief) -> DMatrix<f64> {
        let n = chain.len();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = chain.precision_diag()[i];
            if i + 1 < n {
                q[(i, i + 1)] = chain.precision_off()[i];
                q[(i + 1, i)] = chain.precision_off()[i];
            }
        }
        q.try_inverse().unwrap()
    }

    /// Conditions the dense joint Gaussian on `k` observations of `item`.
    fn dense_condition(
        means: &[f64],
        cov: &DMatrix<f64>,
        item: usize,
        obs_var: f64,
        y: f64,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let col = cov.column(item).into_owned();
        let s = cov[(item, item)] + obs_var;
        let m = DVector::from_column_slice(means) + &col * ((y - means[item]) / s);
        let c = cov - &col * col.transpose() / s;
        (m, c)
    }

    #[test]
    fn posterior_update_examples() {
        let prior = GaussianBelief::new(0.0, 1.0).unwrap();
        let m = model(5.0);
        let two = prior.posterior_update(&m, 2, 0.3).unwrap();
        assert_abs_diff_eq!(two.variance, 5.0 / 7.0, epsilon = 1e-15);
        let once = prior.posterior_update(&m, 1, 0.1).unwrap();
        let twice = once.posterior_update(&m, 1, 0.5).unwrap();
        assert_abs_diff_eq!(twice.variance, two.variance, epsilon = 1e-15);
        assert_abs_diff_eq!(twice.mean, two.mean, epsilon = 1e-15);

        let sym = prior.posterior_update(&m, 1, 0.0).unwrap();
        assert_eq!(sym.mean, 0.0);
        assert_abs_diff_eq!(sym.variance, 5.0 / 6.0, epsilon = 1e-15);

        let vague = prior.posterior_update(&model(1e15), 1, 100.0).unwrap();
        assert_abs_diff_eq!(vague.variance, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vague.mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn posterior_update_errors() {
        let m = model(5.0);
        assert!(matches!(
            GaussianBelief::known(1.0).posterior_update(&m, 1, 0.0),
            Err(Error::KnownItemMeasurement { .. })
        ));
        assert!(matches!(
            GaussianBelief::new(0.0, 1.0)
                .unwrap()
                .posterior_update(&m, 0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(GaussianBelief::new(0.0, -1.0).is_err());
        assert!(GaussianBelief::new(f64::NAN, 1.0).is_err());
        assert!(MeasurementModel::new(0.0, 0.0).is_err());
        assert!(MeasurementModel::new(1.0, -0.1).is_err());
    }

    #[test]
    fn preposterior_examples() {
        let prior = GaussianBelief::new(0.0, 1.0).unwrap();
        let m = model(5.0);
        let p = prior.preposterior(&m, 2).unwrap();
        assert_abs_diff_eq!(p.posterior_variance, 5.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mean_spread, 2.0 / 7.0, epsilon = 1e-15);
        // agrees with the composed update
        let upd = prior.posterior_update(&m, 2, 0.0).unwrap();
        assert_abs_diff_eq!(p.posterior_variance, upd.variance, epsilon = 1e-15);

        let zero = prior.preposterior(&m, 0).unwrap();
        assert_eq!(zero.posterior_variance, 1.0);
        assert_eq!(zero.mean_spread, 0.0);

        let big = prior.preposterior(&m, 1_000_000_000).unwrap();
        assert!(big.posterior_variance < 1e-8);
        assert!((big.mean_spread - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chain_two_item_example() {
        let chain =
            ChainBelief::random_walk(GaussianBelief::new(0.0, 1.0).unwrap(), 2, 1.0).unwrap();
        let prior = chain.marginals().unwrap();
        assert_abs_diff_eq!(prior[0].variance, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prior[1].variance, 2.0, epsilon = 1e-12);

        let post = chain.condition(&model(5.0), 1, 1, 7.0).unwrap();
        let marg = post.marginals().unwrap();
        assert_abs_diff_eq!(marg[0].mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(marg[1].mean, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(marg[0].variance, 6.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(marg[1].variance, 10.0 / 7.0, epsilon = 1e-12);
        // only the diagonal changes
        assert_eq!(post.precision_off(), chain.precision_off());
    }

    #[test]
    fn chain_uninformative_and_independence_limits() {
        let priors: Vec<_> = [(0.0, 1.0), (0.5, 2.0), (-1.0, 0.5)]
            .iter()
            .map(|&(m, v)| GaussianBelief::new(m, v).unwrap())
            .collect();
        let chain = ChainBelief::coupled(&priors, 1.0).unwrap();
        let same = chain.condition(&model(1e15), 1, 1, 50.0).unwrap();
        let (a, b) = (chain.marginals().unwrap(), same.marginals().unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x.mean, y.mean, epsilon = 1e-12);
            assert_abs_diff_eq!(x.variance, y.variance, epsilon = 1e-12);
        }

        let loose = ChainBelief::coupled(&priors, 1e12).unwrap();
        let m = model(5.0);
        let post = loose.condition(&m, 1, 2, 3.0).unwrap().marginals().unwrap();
        let indep = priors[1].posterior_update(&m, 2, 3.0).unwrap();
        assert_abs_diff_eq!(post[1].mean, indep.mean, epsilon = 1e-6);
        assert_abs_diff_eq!(post[1].variance, indep.variance, epsilon = 1e-6);
        for i in [0usize, 2] {
            assert_abs_diff_eq!(post[i].mean, priors[i].mean, epsilon = 1e-6);
            assert_abs_diff_eq!(post[i].variance, priors[i].variance, epsilon = 1e-6);
        }
    }

    #[test]
    fn chain_errors() {
        let chain =
            ChainBelief::random_walk(GaussianBelief::new(0.0, 1.0).unwrap(), 3, 1.0).unwrap();
        assert!(matches!(
            chain.condition(&model(1.0), 3, 1, 0.0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
        assert!(matches!(
            ChainBelief::from_parts(vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0], 1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let single =
            ChainBelief::random_walk(GaussianBelief::new(0.3, 2.0).unwrap(), 1, 1.0).unwrap();
        assert_eq!(
            single.marginals().unwrap(),
            vec![GaussianBelief::new(0.3, 2.0).unwrap()]
        );
    }

    #[test]
    fn independent_known_item_is_detected() {
        let b = Beliefs::Independent(vec![
            GaussianBelief::known(1.0),
            GaussianBelief::new(0.0, 1.0).unwrap(),
        ]);
        assert_eq!(b.known_mask(), vec![true, false]);
        assert!(matches!(
            b.observe(&model(5.0), 0, 1, 1.0),
            Err(Error::KnownItemMeasurement { item: 0 })
        ));
    }

    fn random_chain() -> impl Strategy<Value = (ChainBelief, usize, f64, f64)> {
        (1usize..=20)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec((-2.0f64..2.0, 0.2f64..3.0), n),
                    0.05f64..10.0,
                    0..n,
                    0.1f64..10.0,
                    -5.0f64..5.0,
                    any::<bool>(),
                )
            })
            .prop_map(|(p, drift, item, noise, y, walk)| {
                let priors: Vec<_> = p
                    .iter()
                    .map(|&(m, v)| GaussianBelief::new(m, v).unwrap())
                    .collect();
                let chain = if walk {
                    ChainBelief::random_walk(priors[0], priors.len(), drift).unwrap()
                } else {
                    ChainBelief::coupled(&priors, drift).unwrap()
                };
                (chain, item, noise, y)
            })
    }

    proptest! {
        #[test]
        fn variance_decomposition(s2 in 1e-3f64..100.0, so2 in 1e-3f64..100.0, k in 0u32..200) {
            let b = GaussianBelief::new(0.0, s2).unwrap();
            let p = b.preposterior(&model(so2), k).unwrap();
            prop_assert!((p.posterior_variance + p.mean_spread - s2).abs() <= 1e-12 * s2.max(1.0));
            if k >= 1 {
                let q = b.preposterior(&model(so2), k + 1).unwrap();
                prop_assert!(q.posterior_variance < p.posterior_variance);
                prop_assert!(q.mean_spread > p.mean_spread);
                prop_assert!(p.posterior_variance > 0.0 && p.posterior_variance <= s2);
            }
        }

        #[test]
        fn update_composition(
            mean in -3.0f64..3.0, s2 in 0.01f64..10.0, so2 in 0.1f64..10.0,
            ys in proptest::collection::vec(-5.0f64..5.0, 1..12)
        ) {
            let m = model(so2);
            let prior = GaussianBelief::new(mean, s2).unwrap();
            let mut seq = prior;
            for &y in &ys {
                seq = seq.posterior_update(&m, 1, y).unwrap();
            }
            let avg = ys.iter().sum::<f64>() / ys.len() as f64;
            let batch = prior.posterior_update(&m, ys.len() as u32, avg).unwrap();
            prop_assert!((seq.mean - batch.mean).abs() < 1e-9);
            prop_assert!((seq.variance - batch.variance).abs() < 1e-9);
        }

        #[test]
        fn chain_matches_dense_conditioning((chain, item, noise, y) in random_chain(), k in 1u32..4) {
            let cov = dense_covariance(&chain);
            let prior = chain.marginals().unwrap();
            for i in 0..chain.len() {
                prop_assert!((prior[i].variance - cov[(i, i)]).abs() < 1e-9 * cov[(i, i)].max(1.0));
            }
            let m = model(noise);
            let post = chain.condition(&m, item, k, y).unwrap().marginals().unwrap();
            let (dm, dc) = dense_condition(chain.means(), &cov, item, noise / k as f64, y);
            for i in 0..chain.len() {
                prop_assert!((post[i].mean - dm[i]).abs() < 1e-9 * dm[i].abs().max(1.0));
                prop_assert!((post[i].variance - dc[(i, i)]).abs() < 1e-9 * dc[(i, i)].max(1.0));
            }
        }
    }
}
