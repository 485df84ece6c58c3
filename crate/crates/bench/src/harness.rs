//! Parallel evaluation of one scheduler over a set of scenarios.

use std::time::Instant;

use rayon::prelude::*;

use aeos_core::metrics::{score, CsWeights};
use aeos_core::rng::scenario_seed;
use aeos_core::scengen::Scenario;
use aeos_core::schedulers::{GreedyScheduler, HillClimbConfig, HillClimbScheduler, RandomScheduler};
use aeos_core::sim::{rollout, Scheduler, SimConfig};
use aeos_matcher::scheduler::MatcherScheduler;

use crate::report::ReportRow;

#[derive(Debug, Clone)]
pub enum SchedulerSpec {
    Random { decision_interval: usize },
    Greedy,
    HillClimb(HillClimbConfig),
    Matcher { scheduler: Box<MatcherScheduler>, decision_interval: usize },
}

impl SchedulerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerSpec::Random { .. } => "random",
            SchedulerSpec::Greedy => "greedy",
            SchedulerSpec::HillClimb(_) => "hillclimb",
            SchedulerSpec::Matcher { .. } => "matcher",
        }
    }

    /// A fresh scheduler and its decision interval.
    pub fn instantiate(&self, sim_config: SimConfig) -> (Box<dyn Scheduler>, usize) {
        match self {
            SchedulerSpec::Random { decision_interval } => (Box::new(RandomScheduler::new(0)), *decision_interval),
            SchedulerSpec::Greedy => (Box::new(GreedyScheduler::new()), 1),
            SchedulerSpec::HillClimb(hc) => (Box::new(HillClimbScheduler::new(*hc, sim_config)), hc.epoch_len),
            SchedulerSpec::Matcher {
                scheduler,
                decision_interval,
            } => (Box::new((**scheduler).clone()), *decision_interval),
        }
    }
}

/// A scenario to evaluate, or the reason it could not be loaded.
#[derive(Debug, Clone)]
pub struct EvalJob {
    pub split: String,
    pub scenario_id: String,
    pub scenario: Result<Scenario, String>,
}

impl EvalJob {
    pub fn new(split: &str, scenario: Scenario) -> Self {
        Self {
            split: split.into(),
            scenario_id: scenario.scenario_id.clone(),
            scenario: Ok(scenario),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub workers: usize,
    pub base_seed: u64,
    pub sim_config: SimConfig,
    pub weights: CsWeights,
    /// Record wall-clock time per scenario. Off by default so that reports
    /// are byte-reproducible.
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            base_seed: 0,
            sim_config: SimConfig::default(),
            weights: CsWeights::STANDARD,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    /// One row per job, sorted by scenario id.
    pub rows: Vec<ReportRow>,
    pub failures: usize,
}

fn evaluate_one(job: &EvalJob, spec: &SchedulerSpec, opts: &EvalOptions) -> ReportRow {
    let seed = scenario_seed(opts.base_seed, &job.scenario_id);
    let name = spec.name();
    let scenario = match &job.scenario {
        Ok(s) => s,
        Err(e) => return ReportRow::error(&job.split, &job.scenario_id, name, seed, e),
    };
    let start = Instant::now();
    let (mut sched, interval) = spec.instantiate(opts.sim_config);
    let result = rollout(scenario, opts.sim_config, sched.as_mut(), seed, interval)
        .map_err(|e| e.to_string())
        .and_then(|log| score(&log, scenario, &opts.weights).map_err(|e| e.to_string()));
    let wall = if opts.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    match result {
        Ok(m) => ReportRow::ok(&job.split, &job.scenario_id, name, &m, wall, seed),
        Err(e) => ReportRow::error(&job.split, &job.scenario_id, name, seed, &e),
    }
}

/// Runs every job on a pool of `opts.workers` threads. Each scenario is
/// seeded by `H(base_seed, scenario_id)`, so the output does not depend on
/// the worker count. Failures become error rows.
pub fn evaluate_parallel(
    jobs: &[EvalJob],
    spec: &SchedulerSpec,
    opts: &EvalOptions,
) -> Result<EvalOutput, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()?;
    let mut rows: Vec<ReportRow> = pool.install(|| jobs.par_iter().map(|j| evaluate_one(j, spec, opts)).collect());
    rows.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id).then_with(|| a.split.cmp(&b.split)));
    let failures = rows.iter().filter(|r| !r.is_ok()).count();
    Ok(EvalOutput { rows, failures })
}
