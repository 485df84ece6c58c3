use std::cell::Cell;

use aeos_core::astro::{propagate_orbit, EarthModel, GeodeticTarget};
use aeos_core::error::SimError;
use aeos_core::metrics::{score, CsWeights};
use aeos_core::rng::rng_from_seed;
use aeos_core::scengen::{generate_asset_pool, generate_scenario, Scenario, ScenarioShape, TaskSpec};
use aeos_core::schedulers::{GreedyScheduler, RandomScheduler};
use aeos_core::sim::{
    replay, replay_matches, rollout, AssignmentVector, Scheduler, SchedulerFailure, SimConfig,
    Simulation, TaskStatus,
};

fn scenario(seed: u64, n_sats: usize, n_tasks: usize, horizon: usize) -> Scenario {
    let mut rng = rng_from_seed(seed);
    let pool = generate_asset_pool(&mut rng, 10, "p", &Default::default()).unwrap();
    let shape = ScenarioShape {
        n_sats,
        n_tasks,
        horizon,
        dt: 1.0,
    };
    generate_scenario(&mut rng, &pool.assets, shape, format!("s{seed}"), seed, EarthModel::default()).unwrap()
}

fn rank(s: TaskStatus) -> u8 {
    match s {
        TaskStatus::Pending => 0,
        TaskStatus::Released => 1,
        TaskStatus::Completed | TaskStatus::Expired => 2,
    }
}

#[test]
fn long_random_rollout_keeps_invariants() {
    let s = scenario(11, 3, 40, 10_000);
    let cfg = SimConfig::default();
    let mut sim = Simulation::new(&s, cfg).unwrap();
    let mut rng = rng_from_seed(5);
    let mut sched = RandomScheduler::new(5);
    sched.reset(&s, 5).unwrap();
    let mut prev: Vec<TaskStatus> = sim.tasks().iter().map(|t| t.status).collect();
    let mut current = AssignmentVector::null(3);
    let mut sensor_steps = [0usize; 3];
    while !sim.is_done() {
        let k = sim.current_step();
        if k % 20 == 0 {
            current = aeos_core::schedulers::random_assignment(3, 40, &mut rng);
        }
        for (i, v) in current.0.iter().enumerate() {
            sensor_steps[i] += usize::from(*v > 0);
        }
        let rec = sim.step(&current).unwrap();
        let t = sim.time();
        for (i, sat) in sim.satellites().iter().enumerate() {
            assert!(sat.battery_energy >= 0.0 && sat.battery_energy <= sim.capacity_wh(i) + 1e-12);
            assert!(sat.attitude.attitude.sigma.norm() <= 1.0 + 1e-12);
            assert!(sat.attitude.rates.iter().all(|r| r.is_finite()));
            assert!(sat.orbit.position.norm() > s.earth.radius);
        }
        for (j, task) in sim.tasks().iter().enumerate() {
            assert!(rank(task.status) >= rank(prev[j]), "task {j} went backwards at step {k}");
            if rank(prev[j]) == 2 {
                assert_eq!(task.status, prev[j]);
            }
            let spec = &s.tasks[j];
            if let Some(c) = task.completion_time {
                assert_eq!(task.status, TaskStatus::Completed);
                assert!(c <= spec.due && c >= spec.release + spec.required_duration - 1e-9);
            }
            assert!(task.consecutive_observed <= task.max_consecutive + 1e-12);
        }
        for &(i, j) in &rec.observations {
            assert_eq!(current.task_of(i), Some(j));
            assert!(s.tasks[j].release <= t && t <= s.tasks[j].due);
        }
        assert_eq!(
            rec.observations.len() + rec.violations.len(),
            current.0.iter().filter(|&&v| v > 0).count()
        );
        prev = sim.tasks().iter().map(|t| t.status).collect();
    }
    let footer = sim.footer();
    for i in 0..3 {
        assert_eq!(footer.sensor_on_seconds[i], sensor_steps[i] as f64);
    }
    assert!(sim.step(&current).is_err());
    assert!(footer.tasks.iter().all(|t| t.status != TaskStatus::Released));
}

#[test]
fn rollouts_are_deterministic_and_replayable() {
    let s = scenario(12, 4, 25, 1500);
    let cfg = SimConfig::default();
    let a = rollout(&s, cfg, &mut GreedyScheduler::new(), 1, 1).unwrap();
    let b = rollout(&s, cfg, &mut GreedyScheduler::new(), 1, 1).unwrap();
    assert_eq!(a, b);
    assert!(replay_matches(&a, &s, cfg).unwrap());
    let r = rollout(&s, cfg, &mut RandomScheduler::new(0), 4, 60).unwrap();
    let again = replay(&r, &s, cfg).unwrap();
    assert_eq!(again, r);
    let w = CsWeights::STANDARD;
    assert_eq!(score(&again, &s, &w).unwrap(), score(&r, &s, &w).unwrap());
}

/// Counts how often it is queried.
struct Counting<'c>(&'c Cell<usize>);

impl Scheduler for Counting<'_> {
    fn name(&self) -> String {
        "counting".into()
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        self.0.set(self.0.get() + 1);
        Ok(AssignmentVector::null(sim.scenario().n_sats()))
    }
}

struct Bad(AssignmentVector);

impl Scheduler for Bad {
    fn name(&self) -> String {
        "bad".into()
    }

    fn observe(&mut self, _sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        Ok(self.0.clone())
    }
}

#[test]
fn decision_interval_controls_queries() {
    let s = scenario(13, 2, 5, 300);
    let cfg = SimConfig::default();
    for (interval, expected) in [(300, 1), (1000, 1), (1, 300), (7, 43)] {
        let n = Cell::new(0);
        let log = rollout(&s, cfg, &mut Counting(&n), 0, interval).unwrap();
        assert_eq!(n.get(), expected, "interval {interval}");
        assert_eq!(log.steps.len(), 300);
    }
    let n = Cell::new(0);
    assert!(matches!(
        rollout(&s, cfg, &mut Counting(&n), 0, 0),
        Err(SimError::ZeroDecisionInterval)
    ));
}

#[test]
fn invalid_assignments_are_rejected() {
    let s = scenario(14, 2, 5, 30);
    let cfg = SimConfig::default();
    assert!(matches!(
        rollout(&s, cfg, &mut Bad(AssignmentVector(vec![0, 6])), 0, 1),
        Err(SimError::AssignmentOutOfRange { sat: 1, value: 6, .. })
    ));
    assert!(matches!(
        rollout(&s, cfg, &mut Bad(AssignmentVector(vec![0])), 0, 1),
        Err(SimError::AssignmentLength { got: 1, expected: 2 })
    ));
}

#[test]
fn task_under_the_ground_track_is_completed() {
    let mut s = scenario(15, 1, 1, 900);
    let t_mid = 450.0;
    let p = propagate_orbit(&s.satellites[0].elements, t_mid, &s.earth).unwrap().position;
    let lon = p.y.atan2(p.x) - s.earth.rotation_angle(t_mid);
    s.tasks = vec![TaskSpec {
        task_id: 0,
        required_duration: 20.0,
        release: t_mid - 100.0,
        due: t_mid + 100.0,
        target: GeodeticTarget {
            latitude: (p.z / p.norm()).asin().to_degrees(),
            longitude: lon.to_degrees(),
        },
    }];
    s.initial_battery_fraction = vec![1.0];
    let log = rollout(&s, SimConfig::default(), &mut GreedyScheduler::new(), 0, 1).unwrap();
    let outcome = &log.footer.tasks[0];
    assert_eq!(outcome.status, TaskStatus::Completed, "violations: {:?}", log.steps.iter().flat_map(|r| r.violations.clone()).take(5).collect::<Vec<_>>());
    let c = outcome.completion_time.unwrap();
    assert!(c >= s.tasks[0].release + 20.0 - 1e-9 && c <= s.tasks[0].due);
    let report = score(&log, &s, &CsWeights::STANDARD).unwrap();
    assert_eq!(report.cr, 1.0);
}
