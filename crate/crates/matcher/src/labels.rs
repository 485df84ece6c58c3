//! Approximate feasibility and timing labels mined from trajectories.

use serde::{Deserialize, Serialize};

use aeos_core::sim::{TaskStatus, TrajectoryLog};

use crate::tape::Mat;

/// `s_tilde[i, j] = 1` when satellite `i` contributes to completed task `j`
/// for at least `n` consecutive steps at or after the query step;
/// `t_tilde[i, j]` is the delay until that contribution starts (s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxLabels {
    pub s_tilde: Mat,
    pub t_tilde: Mat,
    pub n: usize,
}

/// Maximal runs of consecutive valid observations per (satellite, task).
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRuns {
    n_sats: usize,
    n_tasks: usize,
    dt: f64,
    /// `(start_step, length)` per pair, in time order, row-major by satellite.
    runs: Vec<Vec<(usize, usize)>>,
    completed: Vec<bool>,
}

impl ContributionRuns {
    pub fn from_log(log: &TrajectoryLog) -> Self {
        let (n_sats, n_tasks) = (log.header.n_sats, log.header.n_tasks);
        let mut runs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_sats * n_tasks];
        for record in &log.steps {
            for &(i, j) in &record.observations {
                let pair = &mut runs[i * n_tasks + j];
                match pair.last_mut() {
                    Some((start, len)) if *start + *len == record.step => *len += 1,
                    _ => pair.push((record.step, 1)),
                }
            }
        }
        let completed = log
            .footer
            .tasks
            .iter()
            .map(|t| t.status == TaskStatus::Completed)
            .collect();
        Self {
            n_sats,
            n_tasks,
            dt: log.header.dt,
            runs,
            completed,
        }
    }

    pub fn runs(&self, sat: usize, task: usize) -> &[(usize, usize)] {
        &self.runs[sat * self.n_tasks + task]
    }

    pub fn labels(&self, step: usize, n: usize) -> ApproxLabels {
        let mut s_tilde = Mat::zeros(self.n_sats, self.n_tasks);
        let mut t_tilde = Mat::zeros(self.n_sats, self.n_tasks);
        for i in 0..self.n_sats {
            for j in 0..self.n_tasks {
                if !self.completed[j] {
                    continue;
                }
                let first = self.runs(i, j).iter().find_map(|&(start, len)| {
                    let from = start.max(step);
                    (start + len >= from + n).then_some(from)
                });
                if let Some(from) = first {
                    s_tilde[(i, j)] = 1.0;
                    t_tilde[(i, j)] = (from - step) as f64 * self.dt;
                }
            }
        }
        ApproxLabels { s_tilde, t_tilde, n }
    }
}

pub fn derive_approx_labels(log: &TrajectoryLog, step: usize, n: usize) -> ApproxLabels {
    ContributionRuns::from_log(log).labels(step, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use aeos_core::sim::{
        AssignmentVector, StepRecord, TaskEvents, TaskOutcome, TrajectoryFooter, TrajectoryHeader,
    };

    /// Log with 2 satellites and 3 tasks; `obs[k]` lists observations at step k.
    fn log(obs: &[Vec<(usize, usize)>], completed: [bool; 3]) -> TrajectoryLog {
        TrajectoryLog {
            header: TrajectoryHeader {
                scenario_id: "l".into(),
                seed: 0,
                config_hash: String::new(),
                scheduler: "hand".into(),
                decision_interval: 1,
                n_sats: 2,
                n_tasks: 3,
                horizon: obs.len(),
                dt: 1.0,
                tags: vec![],
            },
            steps: obs
                .iter()
                .enumerate()
                .map(|(k, o)| StepRecord {
                    step: k,
                    assignment: AssignmentVector::null(2),
                    observations: o.clone(),
                    violations: vec![],
                    events: TaskEvents::default(),
                    battery_wh: vec![1.0, 1.0],
                    saturated: vec![],
                })
                .collect(),
            footer: TrajectoryFooter {
                tasks: completed
                    .iter()
                    .map(|&c| TaskOutcome {
                        status: if c { TaskStatus::Completed } else { TaskStatus::Expired },
                        max_consecutive: 0.0,
                        completion_time: c.then_some(1.0),
                    })
                    .collect(),
                sensor_on_seconds: vec![0.0, 0.0],
                sensor_power: vec![1.0, 1.0],
                release: vec![0.0; 3],
                required_duration: vec![1.0; 3],
            },
        }
    }

    fn run_oracle(obs: &[Vec<(usize, usize)>], i: usize, j: usize, t: usize, n: usize) -> Option<usize> {
        // Scan forward from t for the first index starting n consecutive hits.
        let hit = |k: usize| obs.get(k).is_some_and(|o| o.contains(&(i, j)));
        (t..obs.len()).find(|&k| (k..k + n).all(hit)).map(|k| k - t)
    }

    #[test]
    fn hand_built_run() {
        let mut obs = vec![Vec::new(); 30];
        for o in obs.iter_mut().take(17).skip(10) {
            o.push((0, 2));
        }
        let l = derive_approx_labels(&log(&obs, [false, false, true]), 4, 5);
        assert_eq!(l.s_tilde[(0, 2)], 1.0);
        assert_eq!(l.t_tilde[(0, 2)], 6.0);
        assert_eq!(l.s_tilde.sum(), 1.0);
        // Query inside the run: only 3 steps remain from step 14.
        let l = derive_approx_labels(&log(&obs, [false, false, true]), 14, 5);
        assert_eq!(l.s_tilde[(0, 2)], 0.0);
    }

    #[test]
    fn incomplete_task_has_empty_column() {
        let obs: Vec<_> = (0..20).map(|_| vec![(0, 1), (1, 1)]).collect();
        let l = derive_approx_labels(&log(&obs, [true, false, true]), 0, 1);
        assert_eq!(l.s_tilde.column(1).sum(), 0.0);
    }

    #[test]
    fn unit_threshold_marks_every_contributor() {
        let mut obs = vec![Vec::new(); 12];
        obs[3].push((0, 0));
        obs[7].push((1, 2));
        obs[9].push((1, 0));
        let l = derive_approx_labels(&log(&obs, [true, true, true]), 0, 1);
        assert_eq!(l.s_tilde[(0, 0)], 1.0);
        assert_eq!(l.s_tilde[(1, 2)], 1.0);
        assert_eq!(l.s_tilde[(1, 0)], 1.0);
        assert_eq!(l.s_tilde.sum(), 3.0);
        assert_eq!(l.t_tilde[(1, 2)], 7.0);
    }

    #[test]
    fn matches_scan_oracle_on_random_logs() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 33) as usize
        };
        for _ in 0..200 {
            let obs: Vec<Vec<(usize, usize)>> = (0..40)
                .map(|_| {
                    let mut o = Vec::new();
                    for i in 0..2 {
                        let v = next() % 5;
                        if v < 3 {
                            o.push((i, v));
                        }
                    }
                    o
                })
                .collect();
            let t = next() % 40;
            let n = 1 + next() % 4;
            let lg = log(&obs, [true, true, true]);
            let l = derive_approx_labels(&lg, t, n);
            for i in 0..2 {
                for j in 0..3 {
                    match run_oracle(&obs, i, j, t, n) {
                        Some(d) => {
                            assert_eq!(l.s_tilde[(i, j)], 1.0);
                            assert_eq!(l.t_tilde[(i, j)], d as f64);
                        }
                        None => assert_eq!(l.s_tilde[(i, j)], 0.0),
                    }
                }
            }
        }
    }
}
