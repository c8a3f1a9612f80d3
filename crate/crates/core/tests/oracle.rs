use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semimyopic_core::oracle::{
    check_approximation_bound, check_stopping_bound, mc_batch_voi, optimal_first_measurement,
    optimal_plan_value, ObsGrid, SyntheticVoiInstance,
};
use semimyopic_core::{
    intrinsic_batch_value, Batch, Beliefs, ChainBelief, EstimatorSettings, GaussianBelief,
    MeasurementModel, UtilityFn,
};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Rolls out the grid-optimal policy with continuous observations.
fn rollout_value(
    prior: &[GaussianBelief],
    model: &MeasurementModel,
    u: &UtilityFn,
    budget: u32,
    grid: &ObsGrid,
    episodes: usize,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let truth: Vec<f64> = prior
            .iter()
            .map(|b| b.mean + b.sd() * normal(&mut rng))
            .collect();
        let mut state = prior.to_vec();
        let mut left = budget;
        let mut spent = 0.0;
        while let Some(item) = optimal_first_measurement(&state, model, u, left, grid).unwrap() {
            let y = truth[item] + model.noise_variance.sqrt() * normal(&mut rng);
            state[item] = state[item].posterior_update(model, 1, y).unwrap();
            spent += model.cost;
            left -= 1;
        }
        let pick = (0..state.len()).fold(0, |a, i| {
            if u.expected_utility(&state[i]) > u.expected_utility(&state[a]) {
                i
            } else {
                a
            }
        });
        let v = u.evaluate(truth[pick]) - spent;
        sum += v;
        sq += v * v;
    }
    let n = episodes as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) / n).sqrt())
}

#[test]
fn plan_value_matches_policy_rollout() {
    let u = UtilityFn::step(0.8, 0.0, 0.5, 1.0).unwrap();
    let model = MeasurementModel::new(1.5, 0.002).unwrap();
    let prior = [
        GaussianBelief::known(0.3),
        GaussianBelief::new(0.2, 1.2).unwrap(),
    ];
    let grid = ObsGrid::new(21).unwrap();
    let planned = optimal_plan_value(&prior, &model, &u, 2, &grid).unwrap();
    let (mean, se) = rollout_value(&prior, &model, &u, 2, &grid, 40_000);
    assert!(
        (planned - mean).abs() <= 3.0 * se,
        "{planned} vs {mean} ± {se}"
    );
}

#[test]
fn plan_value_dominates_selecting_now() {
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(5.0, 0.00144).unwrap();
    let prior = [
        GaussianBelief::known(1.0),
        GaussianBelief::new(0.0, 1.0).unwrap(),
    ];
    let grid = ObsGrid::default();
    let now = optimal_plan_value(&prior, &model, &u, 0, &grid).unwrap();
    assert_eq!(now, 0.5);
    let mut prev = now;
    for budget in 1..=4 {
        let v = optimal_plan_value(&prior, &model, &u, budget, &grid).unwrap();
        assert!(v >= prev - 1e-15);
        prev = v;
    }
    assert!(prev > now);
}

/// Dense two-item reference: joint covariance of a random walk, exact
/// Gaussian conditioning, closed-form step expectations.
#[test]
fn chain_value_matches_dense_sampler() {
    let (m0, v0, d) = (0.2, 1.0, 0.6);
    let model = MeasurementModel::new(2.0, 0.0).unwrap();
    let u = UtilityFn::unit_step();
    let chain = ChainBelief::random_walk(GaussianBelief::new(m0, v0).unwrap(), 2, d).unwrap();
    let beliefs = Beliefs::Chain(chain);
    let k = 3;
    let cov = [[v0, v0], [v0, v0 + d]];
    let noise = model.noise_variance / k as f64;
    let s = cov[1][1] + noise;
    let post_var = [
        cov[0][0] - cov[0][1] * cov[0][1] / s,
        cov[1][1] - cov[1][1] * cov[1][1] / s,
    ];
    let step_eu = |mean: f64, var: f64| 1.0 - normal_cdf((1.0 - mean) / var.sqrt());
    let prior_best = step_eu(m0, cov[0][0]).max(step_eu(m0, cov[1][1]));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = 400_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let y = m0 + s.sqrt() * normal(&mut rng);
        let innov = (y - m0) / s;
        let a = step_eu(m0 + cov[0][1] * innov, post_var[0]);
        let b = step_eu(m0 + cov[1][1] * innov, post_var[1]);
        let g = a.max(b) - prior_best;
        sum += g;
        sq += g * g;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean) / n).sqrt();
    let batch = Batch::single(2, 1, k);
    let q =
        intrinsic_batch_value(&beliefs, &model, &u, &batch, &EstimatorSettings::default()).unwrap();
    assert!((q - mean).abs() <= 3.0 * se + 1e-9, "{q} vs {mean} ± {se}");
    let mc = mc_batch_voi(&beliefs, &model, &u, &batch, 200_000, 9).unwrap();
    assert!(
        (mc.estimate - mean).abs() <= 3.0 * (mc.std_error + se),
        "{mc:?} vs {mean}"
    );
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[test]
fn uninformative_batch_is_worthless() {
    let u = UtilityFn::unit_step();
    let blind = MeasurementModel::new(1e10, 0.0).unwrap();
    let b = Beliefs::Independent(vec![
        GaussianBelief::known(1.0),
        GaussianBelief::new(0.0, 1.0).unwrap(),
    ]);
    let mc = mc_batch_voi(&b, &blind, &u, &Batch::single(2, 1, 2), 20_000, 1).unwrap();
    assert!(mc.estimate.abs() < 1e-4, "{mc:?}");
}

#[test]
fn expensive_measurements_leave_whole_budget() {
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(5.0, 10.0).unwrap();
    let prior = [
        GaussianBelief::known(1.0),
        GaussianBelief::new(0.0, 1.0).unwrap(),
    ];
    let report = check_stopping_bound(&prior, &model, &u, 4, &ObsGrid::default(), 20, 3).unwrap();
    assert!(report.checks.iter().all(|c| c.remaining_budget == 4));
    assert!(report.holds());
}

#[test]
fn pathological_termination_bound() {
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(5.0, 0.00144).unwrap();
    let prior = [
        GaussianBelief::known(1.0),
        GaussianBelief::new(0.0, 1.0).unwrap(),
    ];
    let report = check_stopping_bound(&prior, &model, &u, 3, &ObsGrid::default(), 40, 8).unwrap();
    assert_eq!(report.checks.len(), 40);
    assert!(report.holds(), "min margin {}", report.min_margin());
}

#[test]
fn tightness_ratios() {
    let two = check_approximation_bound(&SyntheticVoiInstance::tightness(4, 8, 2).unwrap());
    assert!(two.mutually_submodular);
    assert!((two.ratio - 2.0).abs() < 1e-12, "{}", two.ratio);
    let four = check_approximation_bound(&SyntheticVoiInstance::tightness(4, 8, 64).unwrap());
    assert!((four.ratio - 4.0).abs() <= 0.4, "{}", four.ratio);
}
