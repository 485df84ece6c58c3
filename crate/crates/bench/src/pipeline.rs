//! Annotation and training workflows shared by the CLI and tests.

use std::collections::BTreeMap;

use rayon::prelude::*;

use aeos_core::scengen::{SatelliteAsset, Scenario};
use aeos_core::schedulers::{annotate_scenario, AnnotateConfig, Annotation};
use aeos_core::sim::{SimConfig, TrajectoryLog};
use aeos_matcher::error::MatcherError;
use aeos_matcher::features::FeatureLayout;
use aeos_matcher::train::{
    iterative_learning, trajectory_samples, Dataset, ExploreConfig, StageReport, TrainConfig, Trainer,
};

/// Annotates every scenario on `workers` threads, in input order.
pub fn annotate_all(
    scenarios: &[Scenario],
    sim_config: SimConfig,
    ac: &AnnotateConfig,
    base_seed: u64,
    workers: usize,
) -> anyhow::Result<Vec<Annotation>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let out: Result<Vec<_>, _> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| annotate_scenario(s, sim_config, ac, aeos_core::rng::scenario_seed(base_seed, &s.scenario_id)))
            .collect()
    });
    Ok(out?)
}

/// Training samples from annotated `(scenario, log)` pairs.
pub fn build_dataset(
    pairs: &[(Scenario, TrajectoryLog)],
    sim_config: SimConfig,
    layout: &FeatureLayout,
    config: &TrainConfig,
) -> Result<Dataset, MatcherError> {
    let trajectories = pairs
        .iter()
        .map(|(s, log)| trajectory_samples(log, s, sim_config, layout, config.snapshot_stride, config.n))
        .collect::<Result<_, _>>()?;
    Ok(Dataset { trajectories })
}

/// Distinct satellites of the given scenarios, ordered by asset id.
pub fn asset_pool(scenarios: &[Scenario]) -> Vec<SatelliteAsset> {
    let mut by_id = BTreeMap::new();
    for s in scenarios {
        for a in &s.satellites {
            by_id.entry(a.asset_id.clone()).or_insert_with(|| a.clone());
        }
    }
    by_id.into_values().collect()
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub trainer: Trainer,
    pub dataset: Dataset,
    pub pretrain_losses: Vec<f64>,
    pub stages: Vec<StageReport>,
}

/// Supervised pretraining on the annotated pairs followed by
/// `config.stages` rounds of exploration on scenarios drawn from their
/// satellites.
pub fn train_matcher(
    pairs: &[(Scenario, TrajectoryLog)],
    sim_config: SimConfig,
    config: TrainConfig,
    explore: &ExploreConfig,
) -> Result<TrainingRun, MatcherError> {
    let layout = FeatureLayout::default();
    let mut dataset = build_dataset(pairs, sim_config, &layout, &config)?;
    let mut trainer = Trainer::new(config, layout, &dataset)?;
    let pretrain_losses = trainer.train(&dataset, config.iterations)?;
    let scenarios: Vec<Scenario> = pairs.iter().map(|(s, _)| s.clone()).collect();
    let pool = asset_pool(&scenarios);
    let stages = iterative_learning(&mut trainer, &mut dataset, &pool, explore, sim_config)?;
    Ok(TrainingRun {
        trainer,
        dataset,
        pretrain_losses,
        stages,
    })
}
