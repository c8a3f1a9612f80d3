use proptest::prelude::*;
use semimyopic_core::{
    best_batch, decide, generate_instance, run_episode, Action, Beliefs, ConstraintFamily,
    ControllerState, Dependency, EstimatorSettings, ExecutionMode, GaussianBelief, Instance,
    InstanceSpec, MeasurementModel, StreamKey, UtilityFn,
};

fn pathological() -> Instance {
    generate_instance(&InstanceSpec::anchored(2), StreamKey::new(7)).unwrap()
}

fn settings() -> EstimatorSettings {
    EstimatorSettings::default()
}

#[test]
fn myopic_selects_known_item_immediately() {
    let inst = pathological();
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(5.0, 0.00144).unwrap();
    let state = ControllerState::new(inst.beliefs.clone(), 5);
    let action = decide(
        &state,
        ConstraintFamily::Myopic,
        &model,
        &u,
        ExecutionMode::SingleStep,
        &settings(),
    )
    .unwrap();
    assert_eq!(action, Action::Select { item: 0 });
    let ep = run_episode(
        &inst,
        ConstraintFamily::Myopic,
        &model,
        &u,
        ExecutionMode::SingleStep,
        5,
        StreamKey::new(1),
        &settings(),
    )
    .unwrap();
    assert_eq!(ep.measurements, 0);
    assert_eq!(ep.selected, 0);
    assert_eq!(ep.net_utility, 0.5);
}

#[test]
fn blinkered_measures_unknown_item() {
    let inst = pathological();
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(5.0, 0.00144).unwrap();
    let state = ControllerState::new(inst.beliefs.clone(), 5);
    for mode in [ExecutionMode::SingleStep, ExecutionMode::WholeBatch] {
        let action = decide(
            &state,
            ConstraintFamily::Blinkered,
            &model,
            &u,
            mode,
            &settings(),
        )
        .unwrap();
        assert_eq!(action, Action::Measure { item: 1 });
    }
    let ep = run_episode(
        &inst,
        ConstraintFamily::Blinkered,
        &model,
        &u,
        ExecutionMode::SingleStep,
        5,
        StreamKey::new(1),
        &settings(),
    )
    .unwrap();
    assert!(ep.measurements >= 1);
    assert!(ep.trace.iter().all(|s| s.item == 1));
}

#[test]
fn zero_budget_selects_best_prior() {
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(1.0, 0.0).unwrap();
    let inst = Instance {
        true_values: vec![2.0, 0.0, 1.5],
        beliefs: Beliefs::Independent(vec![
            GaussianBelief::new(0.0, 1.0).unwrap(),
            GaussianBelief::new(0.9, 1.0).unwrap(),
            GaussianBelief::new(0.9, 1.0).unwrap(),
        ]),
    };
    for family in ConstraintFamily::ALL {
        let ep = run_episode(
            &inst,
            family,
            &model,
            &u,
            ExecutionMode::SingleStep,
            0,
            StreamKey::new(0),
            &settings(),
        )
        .unwrap();
        assert_eq!(ep.selected, 1, "ties go to the lowest index");
        assert_eq!(ep.net_utility, 0.0);
        assert_eq!(ep.regret, 1.0);
        assert_eq!(ep.measurements, 0);
    }
}

#[test]
fn whole_batch_respects_budget() {
    let spec = InstanceSpec {
        known_item: None,
        ..InstanceSpec::anchored(3)
    };
    let u = UtilityFn::unit_step();
    let model = MeasurementModel::new(1.0, 0.0).unwrap();
    for r in 0..10 {
        let inst = generate_instance(&spec, StreamKey::new(r)).unwrap();
        let ep = run_episode(
            &inst,
            ConstraintFamily::Exhaustive,
            &model,
            &u,
            ExecutionMode::WholeBatch,
            3,
            StreamKey::new(r),
            &settings(),
        )
        .unwrap();
        assert!(ep.measurements <= 3);
    }
}

#[test]
fn free_measurements_are_used_up() {
    // With C = 0 and a close race, every step has positive value.
    let u = UtilityFn::tanh(1.0, 0.0).unwrap();
    let model = MeasurementModel::new(1.0, 0.0).unwrap();
    let spec = InstanceSpec {
        known_item: None,
        utility: u.clone(),
        ..InstanceSpec::anchored(3)
    };
    for r in 0..5 {
        let inst = generate_instance(&spec, StreamKey::new(r)).unwrap();
        let ep = run_episode(
            &inst,
            ConstraintFamily::Myopic,
            &model,
            &u,
            ExecutionMode::SingleStep,
            4,
            StreamKey::new(r),
            &settings(),
        )
        .unwrap();
        let mut beliefs = inst.beliefs.clone();
        for s in &ep.trace {
            beliefs = beliefs.observe(&model, s.item, 1, s.observation).unwrap();
        }
        if ep.measurements < 4 {
            let rest = best_batch(
                &beliefs,
                &model,
                &u,
                ConstraintFamily::Myopic,
                1,
                &settings(),
            )
            .unwrap();
            assert!(rest.intrinsic <= 1e-12);
        }
    }
}

#[test]
fn chain_episode_runs() {
    let spec = InstanceSpec {
        known_item: None,
        dependency: Dependency::Coupled {
            drift_variance: 0.5,
        },
        ..InstanceSpec::anchored(4)
    };
    let inst = generate_instance(&spec, StreamKey::new(3)).unwrap();
    let model = MeasurementModel::new(2.0, 0.002).unwrap();
    for family in [ConstraintFamily::Blinkered, ConstraintFamily::OmniMyopic] {
        let ep = run_episode(
            &inst,
            family,
            &model,
            &spec.utility,
            ExecutionMode::SingleStep,
            6,
            StreamKey::new(3),
            &settings(),
        )
        .unwrap();
        assert!(ep.regret >= 0.0);
        assert!(ep.measurements <= 6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn accounting_determinism_and_budget_one(
        seed in 0u64..10_000,
        n in 2usize..=3,
        noise in 0.5f64..6.0,
        cost in 0.0f64..0.004,
        budget in 0u32..=4,
    ) {
        let spec = InstanceSpec::anchored(n);
        let inst = generate_instance(&spec, StreamKey::new(seed)).unwrap();
        let model = MeasurementModel::new(noise, cost).unwrap();
        let key = StreamKey::new(seed).child(1);
        let run = |family, budget| {
            run_episode(&inst, family, &model, &spec.utility, ExecutionMode::SingleStep, budget, key, &settings())
                .unwrap()
        };
        for family in [ConstraintFamily::Myopic, ConstraintFamily::Blinkered, ConstraintFamily::OmniMyopic] {
            let ep = run(family, budget);
            prop_assert!(ep.measurements <= budget as usize);
            prop_assert_eq!(ep.measurements, ep.trace.len());
            prop_assert_eq!(ep.spent_cost, ep.measurements as f64 * cost);
            let utils: Vec<f64> = inst.true_values.iter().map(|&x| spec.utility.evaluate(x)).collect();
            let best = utils.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(ep.net_utility, utils[ep.selected] - ep.spent_cost);
            prop_assert_eq!(ep.regret, best - ep.net_utility);
            prop_assert!(ep.regret >= 0.0);
            prop_assert_eq!(run(family, budget), ep);
        }
        let m = run(ConstraintFamily::Myopic, 1);
        let b = run(ConstraintFamily::Blinkered, 1);
        prop_assert_eq!(m, b);
    }
}
