//! Supervised training, gradient checking and simulation-driven
//! iterative learning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use aeos_core::metrics::{score, CsWeights};
use aeos_core::rng::{child_seed, rng_from_seed, SimRng};
use aeos_core::scengen::{generate_scenario, SatelliteAsset, Scenario, ScenarioShape};
use aeos_core::sim::{replay_matches, replay_snapshots, rollout, AssignmentVector, SimConfig, TrajectoryLog};

use crate::error::MatcherError;
use crate::features::{raw_features, FeatureLayout, FeatureMatrices, NormStats};
use crate::labels::{ApproxLabels, ContributionRuns};
use crate::loss::{loss_assignment, loss_feasibility, loss_time, total_loss, LossWeights};
use crate::model::{Matcher, ModelConfig};
use crate::optim::{AdamW, OptimConfig};
use crate::scheduler::MatcherScheduler;
use crate::tape::{Mat, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub optim: OptimConfig,
    /// Feasibility threshold used at inference.
    pub tau_s: f64,
    /// CS threshold for merging explored trajectories.
    pub tau_e: f64,
    /// Minimum contribution run (steps) for a positive label.
    pub n: usize,
    /// Timesteps per batch, all drawn from one trajectory.
    pub batch_size: usize,
    /// Optimizer steps per supervised stage.
    pub iterations: usize,
    pub stages: usize,
    /// Steps between cached training snapshots.
    pub snapshot_stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::toy(),
            loss: LossWeights::default(),
            optim: OptimConfig::default(),
            tau_s: 0.5,
            tau_e: 6.0,
            n: 5,
            batch_size: 48,
            iterations: 200,
            stages: 3,
            snapshot_stride: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MatcherError> {
        self.model.validate()?;
        let fail = |m: &str| Err(MatcherError::Config(m.into()));
        if !(self.tau_s > 0.0 && self.tau_s < 1.0) {
            return fail("tau_s must lie in (0, 1)");
        }
        let w = self.loss;
        if !(w.w_s >= 0.0 && w.w_t >= 0.0 && w.w_a >= 0.0) {
            return fail("loss weights must be non-negative");
        }
        if self.batch_size == 0 || self.snapshot_stride == 0 || self.n == 0 {
            return fail("batch_size, snapshot_stride and n must be positive");
        }
        Ok(())
    }
}

/// One supervised timestep: raw features, mined labels and the expert action.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub features: FeatureMatrices,
    pub labels: ApproxLabels,
    pub assignment: AssignmentVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySamples {
    pub scenario_id: String,
    pub samples: Vec<TrainingSample>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<TrajectorySamples>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn sample_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.samples.len()).sum()
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureMatrices> + Clone {
        self.trajectories
            .iter()
            .flat_map(|t| t.samples.iter().map(|s| &s.features))
    }
}

/// Replays `log` and caches a sample every `stride` steps.
pub fn trajectory_samples(
    log: &TrajectoryLog,
    scenario: &Scenario,
    sim_config: SimConfig,
    layout: &FeatureLayout,
    stride: usize,
    n: usize,
) -> Result<TrajectorySamples, MatcherError> {
    let runs = ContributionRuns::from_log(log);
    let steps: Vec<usize> = (0..log.steps.len()).step_by(stride.max(1)).collect();
    let captured = replay_snapshots(log, scenario, sim_config, &steps, |sim| raw_features(sim, layout))?;
    let samples = steps
        .iter()
        .zip(captured)
        .map(|(&k, features)| {
            Ok(TrainingSample {
                features: features?,
                labels: runs.labels(k, n),
                assignment: log.steps[k].assignment.clone(),
            })
        })
        .collect::<Result<_, MatcherError>>()?;
    Ok(TrajectorySamples {
        scenario_id: log.header.scenario_id.clone(),
        samples,
    })
}

/// Loss components `(total, L_s, L_t, L_a)` and parameter gradients for one sample.
fn sample_loss(
    model: &Matcher,
    norm: &NormStats,
    sample: &TrainingSample,
    weights: &LossWeights,
    with_grads: bool,
) -> Result<([f64; 4], Option<Vec<Mat>>), MatcherError> {
    let f = norm.normalize(&sample.features)?;
    let mut tape = Tape::new();
    let v = model.forward_on(&mut tape, &f, true)?;
    let unit = model.config.time_unit_s;
    let l_s = loss_feasibility(&mut tape, v.s_hat, &sample.labels.s_tilde)?;
    let l_t = loss_time(&mut tape, v.t_hat, &(&sample.labels.t_tilde / unit), &sample.labels.s_tilde)?;
    let l_a = loss_assignment(&mut tape, v.a, &sample.assignment)?;
    let total = total_loss(&mut tape, l_s, l_t, l_a, weights);
    let values = [tape.scalar(total), tape.scalar(l_s), tape.scalar(l_t), tape.scalar(l_a)];
    let grads = with_grads.then(|| {
        let mut g = tape.backward(total);
        v.params
            .iter()
            .zip(model.params())
            .map(|(p, m)| g[p.index()].take().unwrap_or_else(|| Mat::zeros(m.nrows(), m.ncols())))
            .collect()
    });
    Ok((values, grads))
}

/// Mean loss and mean gradients over a batch.
pub fn batch_loss_and_grads(
    model: &Matcher,
    norm: &NormStats,
    batch: &[&TrainingSample],
    weights: &LossWeights,
) -> Result<(f64, Vec<Mat>), MatcherError> {
    let mut grads: Vec<Mat> = model.params().iter().map(|m| Mat::zeros(m.nrows(), m.ncols())).collect();
    let mut loss = 0.0;
    for s in batch {
        let (v, g) = sample_loss(model, norm, s, weights, true)?;
        loss += v[0];
        for (acc, g) in grads.iter_mut().zip(g.expect("gradients requested")) {
            *acc += g;
        }
    }
    let n = batch.len().max(1) as f64;
    for g in &mut grads {
        *g /= n;
    }
    Ok((loss / n, grads))
}

pub fn batch_loss(
    model: &Matcher,
    norm: &NormStats,
    batch: &[&TrainingSample],
    weights: &LossWeights,
) -> Result<f64, MatcherError> {
    let mut loss = 0.0;
    for s in batch {
        loss += sample_loss(model, norm, s, weights, false)?.0[0];
    }
    Ok(loss / batch.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub entries_checked: usize,
}

/// Compares analytic gradients of the total loss against central
/// differences for every parameter entry. The relative error uses
/// `max(|analytic|, |numeric|, floor)` as its denominator.
pub fn gradient_check(
    model: &Matcher,
    norm: &NormStats,
    sample: &TrainingSample,
    weights: &LossWeights,
    eps: f64,
    floor: f64,
) -> Result<GradCheckReport, MatcherError> {
    let (_, grads) = sample_loss(model, norm, sample, weights, true)?;
    let grads = grads.expect("gradients requested");
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        entries_checked: 0,
    };
    for (k, g) in grads.iter().enumerate() {
        for e in 0..g.len() {
            let orig = probe.params()[k][e];
            probe.params_mut()[k][e] = orig + eps;
            let plus = sample_loss(&probe, norm, sample, weights, false)?.0[0];
            probe.params_mut()[k][e] = orig - eps;
            let minus = sample_loss(&probe, norm, sample, weights, false)?.0[0];
            probe.params_mut()[k][e] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = (numeric - g[e]).abs() / numeric.abs().max(g[e].abs()).max(floor);
            report.entries_checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = model.param_names()[k].clone();
            }
        }
    }
    Ok(report)
}

/// Model, frozen normalization statistics and optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Matcher,
    pub norm: NormStats,
    pub config: TrainConfig,
    optimizer: AdamW,
    rng: SimRng,
    /// Mean batch loss after every optimizer step.
    pub history: Vec<f64>,
    /// Number of supervised phases run so far.
    pub phases: usize,
}

impl Trainer {
    /// Fits normalization statistics on `dataset` and initializes the model.
    pub fn new(config: TrainConfig, layout: FeatureLayout, dataset: &Dataset) -> Result<Self, MatcherError> {
        config.validate()?;
        if dataset.sample_count() == 0 {
            return Err(MatcherError::EmptyDataset);
        }
        let norm = NormStats::fit(dataset.features(), &layout);
        let model = Matcher::new(config.model, layout, child_seed(config.seed, 0))?;
        let optimizer = AdamW::new(config.optim, model.params());
        Ok(Self {
            model,
            norm,
            config,
            optimizer,
            rng: rng_from_seed(child_seed(config.seed, 1)),
            history: Vec::new(),
            phases: 0,
        })
    }

    pub fn from_parts(model: Matcher, norm: NormStats, config: TrainConfig) -> Self {
        let optimizer = AdamW::new(config.optim, model.params());
        Self {
            model,
            norm,
            config,
            optimizer,
            rng: rng_from_seed(child_seed(config.seed, 1)),
            history: Vec::new(),
            phases: 0,
        }
    }

    /// `batch_size` snapshots drawn uniformly from one uniformly chosen trajectory.
    pub fn sample_batch<'d>(&mut self, dataset: &'d Dataset) -> Vec<&'d TrainingSample> {
        let nonempty: Vec<&TrajectorySamples> =
            dataset.trajectories.iter().filter(|t| !t.samples.is_empty()).collect();
        let traj = nonempty[self.rng.random_range(0..nonempty.len())];
        (0..self.config.batch_size)
            .map(|_| &traj.samples[self.rng.random_range(0..traj.samples.len())])
            .collect()
    }

    pub fn step_on(&mut self, batch: &[&TrainingSample]) -> Result<f64, MatcherError> {
        let (loss, grads) = batch_loss_and_grads(&self.model, &self.norm, batch, &self.config.loss)?;
        if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(MatcherError::Divergence {
                iteration: self.optimizer.steps_taken(),
                loss,
            });
        }
        self.optimizer.step(self.model.params_mut(), &grads);
        self.history.push(loss);
        Ok(loss)
    }

    /// One supervised phase of `iterations` optimizer steps.
    pub fn train(&mut self, dataset: &Dataset, iterations: usize) -> Result<Vec<f64>, MatcherError> {
        if dataset.sample_count() == 0 {
            return Err(MatcherError::EmptyDataset);
        }
        let mut losses = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let batch = self.sample_batch(dataset);
            losses.push(self.step_on(&batch)?);
        }
        self.phases += 1;
        Ok(losses)
    }

    pub fn scheduler(&self) -> MatcherScheduler {
        MatcherScheduler::new(self.model.clone(), self.norm.clone(), self.config.tau_s)
    }
}

/// Initializes a trainer on `dataset` and runs one supervised phase.
pub fn train_supervised(
    dataset: &Dataset,
    config: TrainConfig,
    layout: FeatureLayout,
) -> Result<Trainer, MatcherError> {
    let mut trainer = Trainer::new(config, layout, dataset)?;
    trainer.train(dataset, config.iterations)?;
    Ok(trainer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreConfig {
    pub scenarios_per_stage: usize,
    pub sats_range: (usize, usize),
    pub tasks_range: (usize, usize),
    pub horizon: usize,
    pub dt: f64,
    pub decision_interval: usize,
    pub seed: u64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            scenarios_per_stage: 4,
            sats_range: (1, 5),
            tasks_range: (10, 30),
            horizon: 3600,
            dt: 1.0,
            decision_interval: 1,
            seed: 0,
        }
    }
}

/// An explored trajectory that cleared the threshold.
#[derive(Debug, Clone)]
pub struct MergedTrajectory {
    pub scenario: Scenario,
    pub log: TrajectoryLog,
    pub cs: f64,
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: usize,
    pub explored: usize,
    pub merged: Vec<MergedTrajectory>,
    pub dataset_before: usize,
    pub dataset_after: usize,
    pub losses: Vec<f64>,
}

/// Explore, filter by `CS <= tau_e`, merge and retrain, for
/// `trainer.config.stages` stages. Normalization statistics stay frozen.
pub fn iterative_learning(
    trainer: &mut Trainer,
    dataset: &mut Dataset,
    pool: &[SatelliteAsset],
    explore: &ExploreConfig,
    sim_config: SimConfig,
) -> Result<Vec<StageReport>, MatcherError> {
    let weights = CsWeights::STANDARD;
    let cfg = trainer.config;
    let mut reports = Vec::with_capacity(cfg.stages);
    for stage in 0..cfg.stages {
        let dataset_before = dataset.len();
        let mut merged = Vec::new();
        for k in 0..explore.scenarios_per_stage {
            let seed = child_seed(explore.seed, (stage * explore.scenarios_per_stage + k) as u64);
            let mut rng = rng_from_seed(seed);
            let shape = ScenarioShape {
                n_sats: rng.random_range(explore.sats_range.0..=explore.sats_range.1).min(pool.len()),
                n_tasks: rng.random_range(explore.tasks_range.0..=explore.tasks_range.1),
                horizon: explore.horizon,
                dt: explore.dt,
            };
            let scenario = generate_scenario(
                &mut rng,
                pool,
                shape,
                format!("explore-{stage}-{k:03}"),
                seed,
                Default::default(),
            )
            .map_err(|e| MatcherError::Config(e.to_string()))?;
            let mut sched = trainer.scheduler();
            let log = rollout(&scenario, sim_config, &mut sched, seed, explore.decision_interval)?;
            let cs = score(&log, &scenario, &weights)
                .map_err(|e| MatcherError::Config(e.to_string()))?
                .cs
                .unwrap_or(f64::INFINITY);
            if cs <= cfg.tau_e && replay_matches(&log, &scenario, sim_config)? {
                let samples = trajectory_samples(
                    &log,
                    &scenario,
                    sim_config,
                    &trainer.model.layout,
                    cfg.snapshot_stride,
                    cfg.n,
                )?;
                dataset.trajectories.push(samples);
                merged.push(MergedTrajectory { scenario, log, cs });
            }
        }
        let losses = trainer.train(dataset, cfg.iterations)?;
        reports.push(StageReport {
            stage,
            explored: explore.scenarios_per_stage,
            merged,
            dataset_before,
            dataset_after: dataset.len(),
            losses,
        });
    }
    Ok(reports)
}
