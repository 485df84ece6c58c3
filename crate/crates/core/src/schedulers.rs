//! Baseline schedulers and ground-truth annotation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::astro::{target_position_eci, visibility_check};
use crate::error::SimError;
use crate::metrics::{score, CsWeights, MetricsReport};
use crate::rng::{rng_from_seed, SimRng};
use crate::scengen::Scenario;
use crate::sim::{
    rollout, AssignmentVector, Scheduler, SchedulerFailure, SimConfig, Simulation, TrajectoryLog,
};

/// Tag attached to accepted annotation logs.
pub const GROUND_TRUTH_TAG: &str = "ground_truth";

/// Uniform random assignments.
#[derive(Debug, Clone)]
pub struct RandomScheduler {
    rng: SimRng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng_from_seed(seed),
        }
    }
}

pub fn random_assignment(n_sats: usize, n_tasks: usize, rng: &mut SimRng) -> AssignmentVector {
    AssignmentVector((0..n_sats).map(|_| rng.random_range(0..=n_tasks)).collect())
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> String {
        "random".into()
    }

    fn reset(&mut self, _scenario: &Scenario, seed: u64) -> Result<(), SchedulerFailure> {
        self.rng = rng_from_seed(seed);
        Ok(())
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        let s = sim.scenario();
        Ok(random_assignment(s.n_sats(), s.n_tasks(), &mut self.rng))
    }
}

/// Nearest visible open task per satellite, skipping blacklisted pairs.
pub fn greedy_assignment(sim: &Simulation<'_>, blacklist: &BTreeSet<(usize, usize)>) -> AssignmentVector {
    let scenario = sim.scenario();
    let t = sim.time();
    let targets: Vec<_> = (0..scenario.n_tasks())
        .map(|j| {
            sim.task_is_active(j)
                .then(|| target_position_eci(&scenario.tasks[j].target, t, &scenario.earth))
        })
        .collect();
    AssignmentVector(
        sim.satellites()
            .iter()
            .enumerate()
            .map(|(i, sat)| {
                let mut best: Option<(f64, usize)> = None;
                for (j, target) in targets.iter().enumerate() {
                    let Some(target) = target else { continue };
                    if blacklist.contains(&(i, j))
                        || !visibility_check(&sat.orbit.position, target, &scenario.earth)
                    {
                        continue;
                    }
                    let range = (sat.orbit.position - target).norm();
                    if best.is_none_or(|(r, _)| range < r) {
                        best = Some((range, j));
                    }
                }
                best.map_or(0, |(_, j)| j + 1)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Default)]
pub struct GreedyScheduler {
    pub blacklist: BTreeSet<(usize, usize)>,
}

impl GreedyScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_blacklist(blacklist: BTreeSet<(usize, usize)>) -> Self {
        Self { blacklist }
    }
}

impl Scheduler for GreedyScheduler {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        Ok(greedy_assignment(sim, &self.blacklist))
    }
}

/// Piecewise-constant plan: one assignment per epoch of `epoch_len` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanTable {
    pub epoch_len: usize,
    pub epochs: Vec<AssignmentVector>,
}

impl PlanTable {
    pub fn null(scenario: &Scenario, epoch_len: usize) -> Self {
        let n = scenario.horizon.div_ceil(epoch_len.max(1));
        Self {
            epoch_len: epoch_len.max(1),
            epochs: vec![AssignmentVector::null(scenario.n_sats()); n],
        }
    }

    pub fn at_step(&self, step: usize) -> &AssignmentVector {
        &self.epochs[(step / self.epoch_len).min(self.epochs.len() - 1)]
    }

    /// Task values that may be useful for `epoch`: null plus every task whose
    /// window overlaps the epoch's time span.
    pub fn feasible_values(&self, scenario: &Scenario, epoch: usize) -> Vec<usize> {
        let start = (epoch * self.epoch_len) as f64 * scenario.dt;
        let end = ((epoch + 1) * self.epoch_len) as f64 * scenario.dt;
        std::iter::once(0)
            .chain(
                scenario
                    .tasks
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.release <= end && t.due >= start)
                    .map(|(j, _)| j + 1),
            )
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct PlanScheduler {
    pub plan: PlanTable,
}

impl Scheduler for PlanScheduler {
    fn name(&self) -> String {
        "plan".into()
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        Ok(self.plan.at_step(sim.current_step()).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HillClimbConfig {
    /// Maximum number of candidate evaluations.
    pub budget: usize,
    pub epoch_len: usize,
    pub weights: CsWeights,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        Self {
            budget: 60,
            epoch_len: 120,
            weights: CsWeights::STANDARD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HillClimbResult {
    pub plan: PlanTable,
    pub cs: f64,
    pub initial_cs: f64,
    /// CS after each accepted move, starting with the initial plan.
    pub history: Vec<f64>,
    pub evaluations: usize,
    /// True when every single-entry neighbor of the final plan was tried
    /// without improvement.
    pub converged: bool,
}

pub fn evaluate_plan(
    scenario: &Scenario,
    config: SimConfig,
    plan: &PlanTable,
    weights: &CsWeights,
) -> Result<(f64, MetricsReport), SimError> {
    let mut sched = PlanScheduler { plan: plan.clone() };
    let log = rollout(scenario, config, &mut sched, 0, plan.epoch_len)?;
    let report = score(&log, scenario, weights).map_err(|e| SimError::Scheduler {
        name: "hillclimb".into(),
        step: scenario.horizon,
        reason: e.to_string(),
    })?;
    Ok((report.cs.unwrap_or(f64::INFINITY), report))
}

/// Greedy plan sampled at epoch boundaries.
pub fn greedy_plan(scenario: &Scenario, config: SimConfig, epoch_len: usize) -> Result<PlanTable, SimError> {
    let mut plan = PlanTable::null(scenario, epoch_len);
    let log = rollout(scenario, config, &mut GreedyScheduler::new(), 0, plan.epoch_len)?;
    for (e, entry) in plan.epochs.iter_mut().enumerate() {
        *entry = log.steps[e * plan.epoch_len].assignment.clone();
    }
    Ok(plan)
}

/// Stochastic first-improvement hill climbing over single plan entries.
///
/// Candidates are visited in a shuffled order that is regenerated after
/// every accepted move, so an exhausted list certifies a local optimum.
pub fn hillclimb(
    scenario: &Scenario,
    config: SimConfig,
    hc: &HillClimbConfig,
    seed: u64,
) -> Result<HillClimbResult, SimError> {
    let mut rng = rng_from_seed(seed);
    let mut plan = greedy_plan(scenario, config, hc.epoch_len)?;
    let (initial_cs, _) = evaluate_plan(scenario, config, &plan, &hc.weights)?;
    let mut cs = initial_cs;
    let mut history = vec![cs];
    let mut evaluations = 0;
    let feasible: Vec<Vec<usize>> = (0..plan.epochs.len())
        .map(|e| plan.feasible_values(scenario, e))
        .collect();

    let neighbors = |plan: &PlanTable, rng: &mut SimRng| {
        let mut out = Vec::new();
        for (e, values) in feasible.iter().enumerate() {
            for sat in 0..scenario.n_sats() {
                for &v in values {
                    if plan.epochs[e].0[sat] != v {
                        out.push((e, sat, v));
                    }
                }
            }
        }
        out.shuffle(rng);
        out
    };

    let mut queue = neighbors(&plan, &mut rng);
    let mut converged = false;
    while evaluations < hc.budget {
        let Some((e, sat, v)) = queue.pop() else {
            converged = true;
            break;
        };
        let mut candidate = plan.clone();
        candidate.epochs[e].0[sat] = v;
        let (c, _) = evaluate_plan(scenario, config, &candidate, &hc.weights)?;
        evaluations += 1;
        if c <= cs {
            plan = candidate;
            cs = c;
            history.push(cs);
            queue = neighbors(&plan, &mut rng);
        }
    }
    if queue.is_empty() {
        converged = true;
    }
    Ok(HillClimbResult {
        plan,
        cs,
        initial_cs,
        history,
        evaluations,
        converged,
    })
}

/// Runs the hill-climb search on reset and then serves the resulting plan.
#[derive(Debug, Clone)]
pub struct HillClimbScheduler {
    pub config: HillClimbConfig,
    pub sim_config: SimConfig,
    plan: Option<PlanTable>,
}

impl HillClimbScheduler {
    pub fn new(config: HillClimbConfig, sim_config: SimConfig) -> Self {
        Self {
            config,
            sim_config,
            plan: None,
        }
    }
}

impl Scheduler for HillClimbScheduler {
    fn name(&self) -> String {
        "hillclimb".into()
    }

    fn reset(&mut self, scenario: &Scenario, seed: u64) -> Result<(), SchedulerFailure> {
        let result = hillclimb(scenario, self.sim_config, &self.config, seed)
            .map_err(|e| SchedulerFailure(e.to_string()))?;
        self.plan = Some(result.plan);
        Ok(())
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        self.plan
            .as_ref()
            .map(|p| p.at_step(sim.current_step()).clone())
            .ok_or_else(|| SchedulerFailure("observe called before reset".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotateConfig {
    /// Steps an assignment may go without any valid observation.
    pub grace: usize,
    pub rounds: usize,
    pub tau_a: f64,
    pub weights: CsWeights,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self {
            grace: 30,
            rounds: 5,
            tau_a: 8.0,
            weights: CsWeights::STANDARD,
        }
    }
}

/// Pairs that were held for at least `grace` steps without a single valid
/// observation in that window.
pub fn failed_pairs(log: &TrajectoryLog, grace: usize) -> BTreeSet<(usize, usize)> {
    let mut failures = BTreeSet::new();
    let n_sats = log.header.n_sats;
    for sat in 0..n_sats {
        let mut start = 0;
        while start < log.steps.len() {
            let value = log.steps[start].assignment.0[sat];
            let mut end = start;
            while end < log.steps.len() && log.steps[end].assignment.0[sat] == value {
                end += 1;
            }
            if value > 0 && end - start >= grace {
                let task = value - 1;
                let observed = log.steps[start..start + grace]
                    .iter()
                    .any(|s| s.observations.contains(&(sat, task)));
                if !observed {
                    failures.insert((sat, task));
                }
            }
            start = end;
        }
    }
    failures
}

#[derive(Debug, Clone)]
pub struct Annotation {
    pub log: TrajectoryLog,
    pub report: MetricsReport,
    pub blacklist: BTreeSet<(usize, usize)>,
    pub rounds: usize,
    pub accepted: bool,
}

/// Greedy rollout with an iterative filter that blacklists pairs failing
/// within the grace window, then a CS threshold. Rejections are returned
/// with `accepted == false`.
pub fn annotate_scenario(
    scenario: &Scenario,
    config: SimConfig,
    ac: &AnnotateConfig,
    seed: u64,
) -> Result<Annotation, SimError> {
    let mut blacklist = BTreeSet::new();
    let mut rounds = 0;
    let mut log;
    loop {
        let mut sched = GreedyScheduler::with_blacklist(blacklist.clone());
        log = rollout(scenario, config, &mut sched, seed, 1)?;
        rounds += 1;
        let fresh: Vec<_> = failed_pairs(&log, ac.grace)
            .difference(&blacklist)
            .copied()
            .collect();
        if fresh.is_empty() || rounds >= ac.rounds {
            break;
        }
        blacklist.extend(fresh);
    }
    let report = score(&log, scenario, &ac.weights).map_err(|e| SimError::Scheduler {
        name: "annotate".into(),
        step: scenario.horizon,
        reason: e.to_string(),
    })?;
    let accepted = report.cs.is_some_and(|cs| cs <= ac.tau_a);
    log.header.scheduler = "annotate".into();
    if accepted {
        log.header.tags.push(GROUND_TRUTH_TAG.into());
    }
    Ok(Annotation {
        log,
        report,
        blacklist,
        rounds,
        accepted,
    })
}
