//! Scenario state machine.
//!
//! One [`Simulation`] owns the runtime state of a single scenario and advances
//! it one timestep per call to [`Simulation::step`]. Each step runs, in order:
//! orbit propagation, action translation, attitude integration, power update,
//! constraint checks, task bookkeeping and event logging. Assignments that
//! violate a constraint make no progress; they never abort the run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::astro::{
    eclipse_check, propagate_orbit, target_position_eci, target_velocity_eci, visibility_check,
    EarthModel, StateVectorECI, Vec3,
};
use crate::attitude::{
    boresight_body, pointing_reference, step_attitude, AttitudeState, GuidanceCommand,
    MrpAttitude,
};
use crate::error::SimError;
use crate::scengen::{SatelliteAsset, Scenario, TaskSpec};

/// Physics and bookkeeping constants that are not part of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Converts battery capacity from mAh to Wh.
    pub bus_voltage: f64,
    pub panel_efficiency: f64,
    pub attitude_substeps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            bus_voltage: 28.0,
            panel_efficiency: 0.2,
            attitude_substeps: 10,
        }
    }
}

impl SimConfig {
    /// Short stable digest of the configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// High-level action: `0` powers the sensor down, `j > 0` services task `j - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentVector(pub Vec<usize>);

impl AssignmentVector {
    pub fn null(n_sats: usize) -> Self {
        Self(vec![0; n_sats])
    }

    pub fn validate(&self, n_sats: usize, n_tasks: usize) -> Result<(), SimError> {
        if self.0.len() != n_sats {
            return Err(SimError::AssignmentLength {
                got: self.0.len(),
                expected: n_sats,
            });
        }
        for (sat, &value) in self.0.iter().enumerate() {
            if value > n_tasks {
                return Err(SimError::AssignmentOutOfRange {
                    sat,
                    value,
                    n_tasks,
                });
            }
        }
        Ok(())
    }

    /// Task index serviced by satellite `sat`, if any.
    pub fn task_of(&self, sat: usize) -> Option<usize> {
        self.0[sat].checked_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteRuntimeState {
    pub orbit: StateVectorECI,
    pub attitude: AttitudeState,
    /// Stored energy (Wh).
    pub battery_energy: f64,
    pub sensor_on: bool,
    pub current_assignment: Option<usize>,
    /// Wheel saturation during the most recent step.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Released,
    Completed,
    Expired,
}

impl TaskStatus {
    pub fn index(&self) -> usize {
        match self {
            TaskStatus::Pending => 0,
            TaskStatus::Released => 1,
            TaskStatus::Completed => 2,
            TaskStatus::Expired => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRuntimeState {
    pub status: TaskStatus,
    /// Length of the current unbroken observation chain (s).
    pub consecutive_observed: f64,
    pub max_consecutive: f64,
    pub completion_time: Option<f64>,
    /// First contribution run per satellite: (start step, run length in steps).
    pub first_contribution: BTreeMap<usize, (usize, usize)>,
}

impl TaskRuntimeState {
    pub fn new() -> Self {
        Self {
            status: TaskStatus::Pending,
            consecutive_observed: 0.0,
            max_consecutive: 0.0,
            completion_time: None,
            first_contribution: BTreeMap::new(),
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self.status, TaskStatus::Pending | TaskStatus::Released)
    }
}

impl Default for TaskRuntimeState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub dynamics_ok: bool,
    pub energy_ok: bool,
    pub fov_ok: bool,
    pub window_ok: bool,
    pub los_ok: bool,
}

impl ConstraintReport {
    pub fn imaging_valid(&self) -> bool {
        self.dynamics_ok && self.energy_ok && self.fov_ok && self.window_ok && self.los_ok
    }

    /// Compact code listing failed constraints, e.g. `"FW"`.
    pub fn failure_code(&self) -> String {
        let mut s = String::new();
        for (ok, c) in [
            (self.dynamics_ok, 'D'),
            (self.energy_ok, 'E'),
            (self.fov_ok, 'F'),
            (self.window_ok, 'W'),
            (self.los_ok, 'L'),
        ] {
            if !ok {
                s.push(c);
            }
        }
        s
    }
}

/// Low-level command for one satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatCommand {
    pub sensor_on: bool,
    pub guidance: GuidanceCommand,
}

/// Converts an assignment into sensor and pointing commands at time `t`.
pub fn translate_action(
    assignment: &AssignmentVector,
    scenario: &Scenario,
    t: f64,
) -> Result<Vec<SatCommand>, SimError> {
    assignment.validate(scenario.n_sats(), scenario.n_tasks())?;
    Ok((0..scenario.n_sats())
        .map(|i| match assignment.task_of(i) {
            None => SatCommand {
                sensor_on: false,
                guidance: GuidanceCommand::Hold,
            },
            Some(j) => {
                let pos = target_position_eci(&scenario.tasks[j].target, t, &scenario.earth);
                SatCommand {
                    sensor_on: true,
                    guidance: GuidanceCommand::PointAtTarget {
                        target_pos_eci: pos,
                        target_vel_eci: target_velocity_eci(&pos, &scenario.earth),
                    },
                }
            }
        })
        .collect())
}

/// Evaluates the instantaneous constraints for a satellite imaging `task`.
pub fn check_constraints(
    sat: &SatelliteRuntimeState,
    asset: &SatelliteAsset,
    task: &TaskSpec,
    task_state: &TaskRuntimeState,
    t: f64,
    dt: f64,
    earth: &EarthModel,
) -> ConstraintReport {
    let target = target_position_eci(&task.target, t, earth);
    let los = target - sat.orbit.position;
    let boresight = sat.attitude.boresight_inertial();
    let cos = boresight.dot(&los) / los.norm();
    let angle = cos.clamp(-1.0, 1.0).acos();
    ConstraintReport {
        dynamics_ok: !sat.saturated,
        energy_ok: sat.battery_energy >= asset.sensor_power * dt / 3600.0,
        fov_ok: angle <= asset.half_fov,
        window_ok: task.release <= t && t <= task.due && task_state.status == TaskStatus::Released,
        los_ok: visibility_check(&sat.orbit.position, &target, earth),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerInputs {
    pub battery_energy: f64,
    pub capacity_wh: f64,
    pub wheel_power: f64,
    pub sensor_on: bool,
    pub sensor_power: f64,
    pub dt: f64,
    pub in_sun: bool,
    pub sun_dir: Vec3,
    pub panel_normal_inertial: Vec3,
    pub panel_area: f64,
    pub panel_efficiency: f64,
    pub solar_flux: f64,
}

/// Solar charging power (W).
pub fn charge_power(p: &PowerInputs) -> f64 {
    if !p.in_sun {
        return 0.0;
    }
    let cos_incidence = p.panel_normal_inertial.dot(&p.sun_dir).max(0.0);
    p.solar_flux * p.panel_area * p.panel_efficiency * cos_incidence
}

/// Battery energy after `dt`, clamped to `[0, capacity]`.
pub fn update_power(p: &PowerInputs) -> f64 {
    let load = p.wheel_power + if p.sensor_on { p.sensor_power } else { 0.0 };
    let next = p.battery_energy + (charge_power(p) - load) * p.dt / 3600.0;
    next.clamp(0.0, p.capacity_wh)
}

/// Task lifecycle events of one step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskEvents {
    pub released: Vec<usize>,
    pub completed: Vec<usize>,
    pub expired: Vec<usize>,
}

/// Releases tasks whose window opened and expires open tasks past due.
pub fn advance_task_windows(
    specs: &[TaskSpec],
    states: &mut [TaskRuntimeState],
    t: f64,
    events: &mut TaskEvents,
) {
    for (j, (spec, st)) in specs.iter().zip(states.iter_mut()).enumerate() {
        if st.status == TaskStatus::Pending && spec.release <= t && t <= spec.due {
            st.status = TaskStatus::Released;
            events.released.push(j);
        }
        if st.is_open() && t > spec.due {
            st.max_consecutive = st.max_consecutive.max(st.consecutive_observed);
            st.consecutive_observed = 0.0;
            st.status = TaskStatus::Expired;
            events.expired.push(j);
        }
    }
}

/// Advances observation chains given each task's set of valid observers.
///
/// Any valid observer sustains a task's chain; a step without observers
/// resets it. `observers[j]` lists satellite indices.
pub fn update_tasks(
    specs: &[TaskSpec],
    states: &mut [TaskRuntimeState],
    observers: &[Vec<usize>],
    step: usize,
    t: f64,
    dt: f64,
    events: &mut TaskEvents,
) {
    for (j, (spec, st)) in specs.iter().zip(states.iter_mut()).enumerate() {
        if observers[j].is_empty() {
            st.max_consecutive = st.max_consecutive.max(st.consecutive_observed);
            st.consecutive_observed = 0.0;
            continue;
        }
        if st.status != TaskStatus::Released {
            continue;
        }
        for &sat in &observers[j] {
            match st.first_contribution.get_mut(&sat) {
                None => {
                    st.first_contribution.insert(sat, (step, 1));
                }
                Some((start, len)) if *start + *len == step => *len += 1,
                Some(_) => {}
            }
        }
        st.consecutive_observed += dt;
        st.max_consecutive = st.max_consecutive.max(st.consecutive_observed);
        if st.consecutive_observed >= spec.required_duration - 1e-9 && t <= spec.due {
            st.status = TaskStatus::Completed;
            st.completion_time = Some(t);
            events.completed.push(j);
        }
    }
}

/// A constraint failure for an assigned pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub sat: usize,
    pub task: usize,
    /// Failed constraint letters: D(ynamics) E(nergy) F(OV) W(indow) L(ine of sight).
    pub failed: String,
}

/// Everything that happened during one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub assignment: AssignmentVector,
    /// Valid (satellite, task) observations.
    pub observations: Vec<(usize, usize)>,
    pub violations: Vec<Violation>,
    pub events: TaskEvents,
    /// Battery energy per satellite after the step (Wh).
    pub battery_wh: Vec<f64>,
    pub saturated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub scenario_id: String,
    pub seed: u64,
    pub config_hash: String,
    pub scheduler: String,
    pub decision_interval: usize,
    pub n_sats: usize,
    pub n_tasks: usize,
    pub horizon: usize,
    pub dt: f64,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub status: TaskStatus,
    pub max_consecutive: f64,
    pub completion_time: Option<f64>,
}

/// Raw inputs for the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFooter {
    pub tasks: Vec<TaskOutcome>,
    pub sensor_on_seconds: Vec<f64>,
    pub sensor_power: Vec<f64>,
    pub release: Vec<f64>,
    pub required_duration: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
    pub footer: TrajectoryFooter,
}

impl TrajectoryLog {
    pub fn assignments(&self) -> impl Iterator<Item = &AssignmentVector> {
        self.steps.iter().map(|s| &s.assignment)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.header.tags.iter().any(|t| t == tag)
    }
}

/// Live simulator instance for one scenario.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    config: SimConfig,
    step: usize,
    sats: Vec<SatelliteRuntimeState>,
    tasks: Vec<TaskRuntimeState>,
    capacity_wh: Vec<f64>,
    sensor_on_steps: Vec<usize>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, config: SimConfig) -> Result<Self, SimError> {
        let mut sats = Vec::with_capacity(scenario.n_sats());
        let mut capacity_wh = Vec::with_capacity(scenario.n_sats());
        for (i, asset) in scenario.satellites.iter().enumerate() {
            asset.elements.validate(&scenario.earth)?;
            let orbit = propagate_orbit(&asset.elements, 0.0, &scenario.earth)?;
            let nadir = pointing_reference(&orbit, &Vec3::zeros(), &boresight_body());
            let capacity = asset.battery_capacity_wh(config.bus_voltage);
            let fraction = scenario
                .initial_battery_fraction
                .get(i)
                .copied()
                .unwrap_or(1.0)
                .clamp(0.0, 1.0);
            capacity_wh.push(capacity);
            sats.push(SatelliteRuntimeState {
                orbit,
                attitude: AttitudeState {
                    attitude: nadir.canonical(),
                    rates: Vec3::zeros(),
                    wheels: asset.reaction_wheels(),
                    integral: Vec3::zeros(),
                },
                battery_energy: capacity * fraction,
                sensor_on: false,
                current_assignment: None,
                saturated: false,
            });
        }
        Ok(Self {
            scenario,
            config,
            step: 0,
            sats,
            tasks: vec![TaskRuntimeState::new(); scenario.n_tasks()],
            capacity_wh,
            sensor_on_steps: vec![0; scenario.n_sats()],
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Index of the next step to simulate.
    pub fn current_step(&self) -> usize {
        self.step
    }

    /// Simulation time of the current state (s).
    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.scenario.horizon
    }

    pub fn satellites(&self) -> &[SatelliteRuntimeState] {
        &self.sats
    }

    pub fn tasks(&self) -> &[TaskRuntimeState] {
        &self.tasks
    }

    pub fn capacity_wh(&self, sat: usize) -> f64 {
        self.capacity_wh[sat]
    }

    /// True when a task can still make progress at the current time.
    pub fn task_is_active(&self, j: usize) -> bool {
        let spec = &self.scenario.tasks[j];
        let t = self.time();
        self.tasks[j].is_open() && spec.release <= t && t <= spec.due
    }

    pub fn step(&mut self, assignment: &AssignmentVector) -> Result<StepRecord, SimError> {
        if self.is_done() {
            return Err(SimError::HorizonReached(self.scenario.horizon));
        }
        let scenario = self.scenario;
        let earth = &scenario.earth;
        let dt = scenario.dt;
        let k = self.step;
        let t = (k + 1) as f64 * dt;

        // (1) orbits
        let mut orbits = Vec::with_capacity(self.sats.len());
        for asset in &scenario.satellites {
            orbits.push(propagate_orbit(&asset.elements, t, earth)?);
        }
        // (2) commands
        let commands = translate_action(assignment, scenario, t)?;

        // (3) attitude and (4) power
        let sun = earth.sun_dir();
        for (i, asset) in scenario.satellites.iter().enumerate() {
            let cmd = &commands[i];
            let sat = &mut self.sats[i];
            sat.orbit = orbits[i];
            let att = step_attitude(
                &sat.attitude,
                asset.inertia_scale,
                &sat.orbit,
                &cmd.guidance,
                &asset.gains,
                dt,
                self.config.attitude_substeps,
            )
            .map_err(|source| SimError::Attitude { sat: i, source })?;
            sat.attitude = att.state;
            sat.saturated = att.saturated;
            sat.sensor_on = cmd.sensor_on;
            sat.current_assignment = assignment.task_of(i);
            if cmd.sensor_on {
                self.sensor_on_steps[i] += 1;
            }
            let power = PowerInputs {
                battery_energy: sat.battery_energy,
                capacity_wh: self.capacity_wh[i],
                wheel_power: att.wheel_power,
                sensor_on: cmd.sensor_on,
                sensor_power: asset.sensor_power,
                dt,
                in_sun: !eclipse_check(&sat.orbit.position, t, earth),
                sun_dir: sun,
                panel_normal_inertial: sat.attitude.attitude.body_to_inertial(&asset.panel_normal_body()),
                panel_area: asset.panel_area,
                panel_efficiency: self.config.panel_efficiency,
                solar_flux: earth.solar_flux,
            };
            sat.battery_energy = update_power(&power);
        }

        // (5) constraints
        let mut events = TaskEvents::default();
        advance_task_windows(&scenario.tasks, &mut self.tasks, t, &mut events);
        let mut observers = vec![Vec::new(); scenario.n_tasks()];
        let mut observations = Vec::new();
        let mut violations = Vec::new();
        for (i, asset) in scenario.satellites.iter().enumerate() {
            let Some(j) = assignment.task_of(i) else { continue };
            let report = check_constraints(
                &self.sats[i],
                asset,
                &scenario.tasks[j],
                &self.tasks[j],
                t,
                dt,
                earth,
            );
            if report.imaging_valid() {
                observers[j].push(i);
                observations.push((i, j));
            } else {
                violations.push(Violation {
                    sat: i,
                    task: j,
                    failed: report.failure_code(),
                });
            }
        }

        // (6) tasks
        update_tasks(&scenario.tasks, &mut self.tasks, &observers, k, t, dt, &mut events);

        // (7) log
        self.step += 1;
        Ok(StepRecord {
            step: k,
            assignment: assignment.clone(),
            observations,
            violations,
            events,
            battery_wh: self.sats.iter().map(|s| s.battery_energy).collect(),
            saturated: self
                .sats
                .iter()
                .enumerate()
                .filter(|(_, s)| s.saturated)
                .map(|(i, _)| i)
                .collect(),
        })
    }

    pub fn footer(&self) -> TrajectoryFooter {
        let dt = self.scenario.dt;
        TrajectoryFooter {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskOutcome {
                    status: t.status,
                    max_consecutive: t.max_consecutive.max(t.consecutive_observed),
                    completion_time: t.completion_time,
                })
                .collect(),
            sensor_on_seconds: self.sensor_on_steps.iter().map(|&n| n as f64 * dt).collect(),
            sensor_power: self.scenario.satellites.iter().map(|a| a.sensor_power).collect(),
            release: self.scenario.tasks.iter().map(|t| t.release).collect(),
            required_duration: self.scenario.tasks.iter().map(|t| t.required_duration).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SchedulerFailure(pub String);

/// A policy that maps the live simulator state to an assignment.
pub trait Scheduler {
    fn name(&self) -> String;

    /// Called once before a rollout. Seeded schedulers reseed here.
    fn reset(&mut self, _scenario: &Scenario, _seed: u64) -> Result<(), SchedulerFailure> {
        Ok(())
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure>;
}

/// Runs a scheduler over the full horizon, querying it every
/// `decision_interval` steps and holding its assignment in between.
pub fn rollout(
    scenario: &Scenario,
    config: SimConfig,
    scheduler: &mut dyn Scheduler,
    seed: u64,
    decision_interval: usize,
) -> Result<TrajectoryLog, SimError> {
    if decision_interval == 0 {
        return Err(SimError::ZeroDecisionInterval);
    }
    let name = scheduler.name();
    scheduler
        .reset(scenario, seed)
        .map_err(|e| SimError::Scheduler {
            name: name.clone(),
            step: 0,
            reason: e.0,
        })?;
    let mut sim = Simulation::new(scenario, config)?;
    let mut steps = Vec::with_capacity(scenario.horizon);
    let mut current = AssignmentVector::null(scenario.n_sats());
    while !sim.is_done() {
        let k = sim.current_step();
        if k % decision_interval == 0 {
            current = scheduler.observe(&sim).map_err(|e| SimError::Scheduler {
                name: name.clone(),
                step: k,
                reason: e.0,
            })?;
            current.validate(scenario.n_sats(), scenario.n_tasks())?;
        }
        steps.push(sim.step(&current)?);
    }
    Ok(TrajectoryLog {
        header: TrajectoryHeader {
            scenario_id: scenario.scenario_id.clone(),
            seed,
            config_hash: config.config_hash(),
            scheduler: name,
            decision_interval,
            n_sats: scenario.n_sats(),
            n_tasks: scenario.n_tasks(),
            horizon: scenario.horizon,
            dt: scenario.dt,
            tags: Vec::new(),
        },
        steps,
        footer: sim.footer(),
    })
}

/// Feeds a fixed sequence of assignments, one per step.
#[derive(Debug, Clone)]
pub struct ReplayScheduler {
    assignments: Vec<AssignmentVector>,
}

impl ReplayScheduler {
    pub fn new(assignments: Vec<AssignmentVector>) -> Self {
        Self { assignments }
    }

    pub fn from_log(log: &TrajectoryLog) -> Self {
        Self::new(log.assignments().cloned().collect())
    }
}

impl Scheduler for ReplayScheduler {
    fn name(&self) -> String {
        "replay".into()
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        self.assignments
            .get(sim.current_step())
            .cloned()
            .ok_or_else(|| SchedulerFailure(format!("log has no step {}", sim.current_step())))
    }
}

/// Re-simulates a log's assignments. The result keeps the original header.
pub fn replay(
    log: &TrajectoryLog,
    scenario: &Scenario,
    config: SimConfig,
) -> Result<TrajectoryLog, SimError> {
    let mut sched = ReplayScheduler::from_log(log);
    let mut out = rollout(scenario, config, &mut sched, log.header.seed, 1)?;
    out.header = log.header.clone();
    Ok(out)
}

/// Replays `log` and checks that it reproduces the recorded steps and footer.
pub fn replay_matches(
    log: &TrajectoryLog,
    scenario: &Scenario,
    config: SimConfig,
) -> Result<bool, SimError> {
    let again = replay(log, scenario, config)?;
    Ok(again.steps == log.steps && again.footer == log.footer)
}

/// Captures the simulator state at selected steps while replaying a log.
pub fn replay_snapshots<'a, F, T>(
    log: &TrajectoryLog,
    scenario: &'a Scenario,
    config: SimConfig,
    steps: &[usize],
    mut capture: F,
) -> Result<Vec<T>, SimError>
where
    F: FnMut(&Simulation<'a>) -> T,
{
    let mut wanted: Vec<usize> = steps.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut out = Vec::with_capacity(wanted.len());
    let mut sim = Simulation::new(scenario, config)?;
    let mut next = wanted.iter().peekable();
    for record in &log.steps {
        while next.peek().is_some_and(|&&s| s == sim.current_step()) {
            out.push(capture(&sim));
            next.next();
        }
        if next.peek().is_none() {
            break;
        }
        sim.step(&record.assignment)?;
    }
    Ok(out)
}

/// Attitude reference for nadir pointing, used for initial states.
pub fn nadir_attitude(orbit: &StateVectorECI) -> MrpAttitude {
    pointing_reference(orbit, &Vec3::zeros(), &boresight_body()).canonical()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::GeodeticTarget;
    use crate::rng::rng_from_seed;
    use crate::scengen::sample_asset;
    use nalgebra::{Rotation3, Unit};

    fn asset() -> SatelliteAsset {
        sample_asset(&mut rng_from_seed(4), "a".into())
    }

    fn task(release: f64, due: f64, required: f64, lat: f64, lon: f64) -> TaskSpec {
        TaskSpec {
            task_id: 0,
            required_duration: required,
            release,
            due,
            target: GeodeticTarget {
                latitude: lat,
                longitude: lon,
            },
        }
    }

    fn released() -> TaskRuntimeState {
        TaskRuntimeState {
            status: TaskStatus::Released,
            ..TaskRuntimeState::new()
        }
    }

    /// Satellite with identity attitude placed so that the line of sight to
    /// `target` makes angle `alpha` with the boresight.
    fn sat_at_angle(asset: &SatelliteAsset, target: &Vec3, alpha: f64) -> SatelliteRuntimeState {
        let b = boresight_body();
        let u = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::x()), alpha) * b;
        SatelliteRuntimeState {
            orbit: StateVectorECI {
                position: target - 600.0 * u,
                velocity: Vec3::zeros(),
            },
            attitude: AttitudeState {
                attitude: MrpAttitude::identity(),
                rates: Vec3::zeros(),
                wheels: asset.reaction_wheels(),
                integral: Vec3::zeros(),
            },
            battery_energy: 100.0,
            sensor_on: true,
            current_assignment: Some(0),
            saturated: false,
        }
    }

    #[test]
    fn fov_boundary_follows_geometric_angle() {
        let earth = EarthModel::default();
        let mut a = asset();
        a.half_fov = 0.7;
        let spec = task(0.0, 100.0, 10.0, -80.0, 0.0);
        let target = target_position_eci(&spec.target, 5.0, &earth);
        let check = |alpha: f64| {
            let sat = sat_at_angle(&a, &target, alpha);
            check_constraints(&sat, &a, &spec, &released(), 5.0, 1.0, &earth)
        };
        assert!(check(0.0).imaging_valid());
        assert!(check(0.7 - 1e-7).imaging_valid());
        let outside = check(0.7 + 1e-7);
        assert!(!outside.fov_ok && outside.los_ok);
        assert_eq!(check(1.4).failure_code(), "F");
    }

    #[test]
    fn energy_window_dynamics_and_codes() {
        let earth = EarthModel::default();
        let a = asset();
        let spec = task(10.0, 50.0, 5.0, -80.0, 0.0);
        let target = target_position_eci(&spec.target, 20.0, &earth);
        let mut sat = sat_at_angle(&a, &target, 0.0);
        let need = a.sensor_power * 1.0 / 3600.0;
        sat.battery_energy = need;
        assert!(check_constraints(&sat, &a, &spec, &released(), 20.0, 1.0, &earth).energy_ok);
        sat.battery_energy = need * (1.0 - 1e-9);
        assert_eq!(
            check_constraints(&sat, &a, &spec, &released(), 20.0, 1.0, &earth).failure_code(),
            "E"
        );
        sat.battery_energy = 10.0;
        sat.saturated = true;
        assert_eq!(
            check_constraints(&sat, &a, &spec, &released(), 20.0, 1.0, &earth).failure_code(),
            "D"
        );
        sat.saturated = false;
        let pending = TaskRuntimeState::new();
        assert_eq!(
            check_constraints(&sat, &a, &spec, &pending, 20.0, 1.0, &earth).failure_code(),
            "W"
        );
        assert!(!check_constraints(&sat, &a, &spec, &released(), 50.5, 1.0, &earth).window_ok);
        // Satellite below the horizon: behind the Earth.
        sat.orbit.position = -2.0 * target;
        let r = check_constraints(&sat, &a, &spec, &released(), 20.0, 1.0, &earth);
        assert!(!r.los_ok);
        let all = ConstraintReport {
            dynamics_ok: false,
            energy_ok: false,
            fov_ok: false,
            window_ok: false,
            los_ok: false,
        };
        assert_eq!(all.failure_code(), "DEFWL");
    }

    fn power(battery: f64, in_sun: bool, normal: Vec3, sensor_on: bool) -> PowerInputs {
        PowerInputs {
            battery_energy: battery,
            capacity_wh: 50.0,
            wheel_power: 3.0,
            sensor_on,
            sensor_power: 9.0,
            dt: 10.0,
            in_sun,
            sun_dir: Vec3::x(),
            panel_normal_inertial: normal,
            panel_area: 0.5,
            panel_efficiency: 0.2,
            solar_flux: 1361.0,
        }
    }

    #[test]
    fn power_balance_cases() {
        let lit = power(20.0, true, Vec3::x(), true);
        assert!((charge_power(&lit) - 136.1).abs() < 1e-12);
        let expected = 20.0 + (136.1 - 12.0) * 10.0 / 3600.0;
        assert!((update_power(&lit) - expected).abs() < 1e-12);
        // 60 degrees incidence halves the input.
        let tilted = power(20.0, true, Vec3::new(0.5, 0.75f64.sqrt(), 0.0), false);
        assert!((charge_power(&tilted) - 68.05).abs() < 1e-9);
        assert_eq!(charge_power(&power(20.0, true, -Vec3::x(), false)), 0.0);
        let dark = power(20.0, false, Vec3::x(), true);
        assert!((update_power(&dark) - (20.0 - 12.0 * 10.0 / 3600.0)).abs() < 1e-12);
        assert_eq!(update_power(&power(49.99, true, Vec3::x(), false)), 50.0);
        assert_eq!(update_power(&power(0.001, false, Vec3::x(), true)), 0.0);
    }

    #[test]
    fn windows_release_inclusive_and_expire_after_due() {
        let specs = vec![task(10.0, 20.0, 5.0, 0.0, 0.0), task(0.0, 5.0, 5.0, 0.0, 0.0)];
        let mut st = vec![TaskRuntimeState::new(); 2];
        st[1].status = TaskStatus::Completed;
        let mut ev = TaskEvents::default();
        advance_task_windows(&specs, &mut st, 9.0, &mut ev);
        assert_eq!(st[0].status, TaskStatus::Pending);
        advance_task_windows(&specs, &mut st, 10.0, &mut ev);
        assert_eq!(st[0].status, TaskStatus::Released);
        advance_task_windows(&specs, &mut st, 20.0, &mut ev);
        assert_eq!(st[0].status, TaskStatus::Released);
        advance_task_windows(&specs, &mut st, 21.0, &mut ev);
        assert_eq!(st[0].status, TaskStatus::Expired);
        assert_eq!(st[1].status, TaskStatus::Completed);
        assert_eq!(ev.released, vec![0]);
        assert_eq!(ev.expired, vec![0]);
    }

    #[test]
    fn chains_reset_and_complete() {
        let specs = vec![task(0.0, 100.0, 3.0, 0.0, 0.0)];
        let mut st = vec![released()];
        let mut ev = TaskEvents::default();
        let on = vec![vec![0, 1]];
        let off = vec![vec![]];
        update_tasks(&specs, &mut st, &on, 0, 1.0, 1.0, &mut ev);
        update_tasks(&specs, &mut st, &on, 1, 2.0, 1.0, &mut ev);
        update_tasks(&specs, &mut st, &off, 2, 3.0, 1.0, &mut ev);
        assert_eq!(st[0].consecutive_observed, 0.0);
        assert_eq!(st[0].max_consecutive, 2.0);
        for k in 3..6 {
            update_tasks(&specs, &mut st, &on, k, k as f64 + 1.0, 1.0, &mut ev);
        }
        assert_eq!(st[0].status, TaskStatus::Completed);
        assert_eq!(st[0].completion_time, Some(6.0));
        assert_eq!(ev.completed, vec![0]);
        assert_eq!(st[0].first_contribution[&1], (0, 2));
        // Completed tasks stop accumulating.
        update_tasks(&specs, &mut st, &on, 6, 7.0, 1.0, &mut ev);
        assert_eq!(st[0].max_consecutive, 3.0);
    }

    #[test]
    fn assignment_validation() {
        let v = AssignmentVector(vec![0, 3, 1]);
        assert!(v.validate(3, 3).is_ok());
        assert_eq!(v.task_of(0), None);
        assert_eq!(v.task_of(1), Some(2));
        assert!(matches!(
            v.validate(3, 2),
            Err(SimError::AssignmentOutOfRange { sat: 1, value: 3, n_tasks: 2 })
        ));
        assert!(matches!(
            v.validate(2, 3),
            Err(SimError::AssignmentLength { got: 3, expected: 2 })
        ));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = SimConfig::default();
        let b = SimConfig {
            attitude_substeps: 11,
            ..a
        };
        assert_eq!(a.config_hash(), SimConfig::default().config_hash());
        assert_eq!(a.config_hash().len(), 16);
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
