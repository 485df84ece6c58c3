use aeos_core::rng::rng_from_seed;
use aeos_core::scengen::{generate_asset_pool, generate_scenario, Scenario, ScenarioShape};
use aeos_core::schedulers::{annotate_scenario, AnnotateConfig};
use aeos_core::sim::{rollout, SimConfig};
use aeos_matcher::features::{FeatureLayout, NormStats};
use aeos_matcher::loss::LossWeights;
use aeos_matcher::model::{Matcher, ModelConfig};
use aeos_matcher::optim::OptimConfig;
use aeos_matcher::train::{
    gradient_check, trajectory_samples, Dataset, TrainConfig, Trainer, TrajectorySamples,
};

fn small_config() -> ModelConfig {
    ModelConfig {
        width: 8,
        depth: 1,
        heads: 2,
        time_dim: 4,
        ffn_mult: 2,
        constraint_hidden: 8,
        time_unit_s: 3600.0,
    }
}

fn scenario(seed: u64, n_sats: usize, n_tasks: usize, horizon: usize) -> Scenario {
    let mut rng = rng_from_seed(seed);
    let pool = generate_asset_pool(&mut rng, 8, "t", &Default::default()).unwrap();
    let shape = ScenarioShape {
        n_sats,
        n_tasks,
        horizon,
        dt: 1.0,
    };
    generate_scenario(&mut rng, &pool.assets, shape, format!("t{seed}"), seed, Default::default()).unwrap()
}

fn annotated_samples(seed: u64, stride: usize) -> (Scenario, TrajectorySamples) {
    let s = scenario(seed, 3, 12, 1200);
    let ann = annotate_scenario(&s, SimConfig::default(), &AnnotateConfig::default(), seed).unwrap();
    let samples = trajectory_samples(&ann.log, &s, SimConfig::default(), &FeatureLayout::default(), stride, 5).unwrap();
    (s, samples)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let (_, samples) = annotated_samples(3, 100);
    let dataset = Dataset {
        trajectories: vec![samples],
    };
    let layout = FeatureLayout::default();
    let norm = NormStats::fit(dataset.features(), &layout);
    let mut model = Matcher::new(small_config(), layout, 9).unwrap();
    // Nonzero mask scalars so the mask path carries gradient.
    model.set_mask_scalars(0.3, -0.2);
    // A sample with at least one positive label exercises every loss term.
    let sample = dataset.trajectories[0]
        .samples
        .iter()
        .find(|s| s.labels.s_tilde.sum() > 0.0 && s.assignment.0.iter().any(|&a| a > 0))
        .unwrap_or(&dataset.trajectories[0].samples[0]);
    let weights = LossWeights {
        w_s: 1.0,
        w_t: 1.0,
        w_a: 1.0,
    };
    let report = gradient_check(&model, &norm, sample, &weights, 1e-4, 1e-4).unwrap();
    assert!(report.entries_checked == model.param_count());
    assert!(
        report.max_rel_error <= 1e-4,
        "max relative error {} at {}",
        report.max_rel_error,
        report.worst_param
    );
}

#[test]
fn overfits_a_single_batch() {
    let (_, samples) = annotated_samples(5, 150);
    let dataset = Dataset {
        trajectories: vec![samples],
    };
    let config = TrainConfig {
        model: small_config(),
        batch_size: 4,
        optim: OptimConfig {
            lr: 3e-3,
            warmup_steps: 10,
            ..OptimConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, FeatureLayout::default(), &dataset).unwrap();
    let batch: Vec<_> = dataset.trajectories[0].samples.iter().take(4).collect();
    let mut losses = Vec::new();
    for _ in 0..100 {
        losses.push(trainer.step_on(&batch).unwrap());
    }
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(
        losses[99] < 0.5 * losses[0],
        "loss went from {} to {}",
        losses[0],
        losses[99]
    );
}

#[test]
fn trained_scheduler_rolls_out_valid_assignments() {
    let (s, samples) = annotated_samples(7, 60);
    let dataset = Dataset {
        trajectories: vec![samples],
    };
    let config = TrainConfig {
        model: small_config(),
        batch_size: 2,
        iterations: 5,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, FeatureLayout::default(), &dataset).unwrap();
    trainer.train(&dataset, 5).unwrap();
    assert_eq!(trainer.history.len(), 5);
    let mut sched = trainer.scheduler();
    let log = rollout(&s, SimConfig::default(), &mut sched, 1, 30).unwrap();
    assert_eq!(log.steps.len(), s.horizon);
    for r in &log.steps {
        r.assignment.validate(s.n_sats(), s.n_tasks()).unwrap();
    }
}

#[test]
fn empty_dataset_is_refused() {
    let err = Trainer::new(TrainConfig::default(), FeatureLayout::default(), &Dataset::default());
    assert!(err.is_err());
}
