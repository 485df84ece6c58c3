//! Evaluation metrics and the composite score.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::scengen::Scenario;
use crate::sim::{TaskStatus, TrajectoryLog};

/// Per-trajectory (or aggregated) metrics. Rates are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cr: f64,
    pub pcr: f64,
    pub wcr: f64,
    /// Mean turn-around time of completed tasks (hours).
    pub tat: f64,
    /// Total sensor energy (Wh).
    pub pc: f64,
    /// Composite score, lower is better. `None` until scored.
    pub cs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsWeights {
    pub w_cr: f64,
    pub w_pcr: f64,
    pub w_wcr: f64,
    pub w_tat: f64,
    pub w_pc: f64,
    pub denom_floor: f64,
}

impl CsWeights {
    pub const STANDARD: CsWeights = CsWeights {
        w_cr: 0.6,
        w_pcr: 0.2,
        w_wcr: 0.2,
        w_tat: 1.0 / 7.0,
        w_pc: 1.0 / 100.0,
        denom_floor: 1e-4,
    };
}

impl Default for CsWeights {
    fn default() -> Self {
        Self::STANDARD
    }
}

pub fn compute_cs(report: &MetricsReport, w: &CsWeights) -> f64 {
    let denom = (w.w_cr * report.cr + w.w_pcr * report.pcr + w.w_wcr * report.wcr).max(w.denom_floor);
    1.0 / denom + w.w_tat * report.tat + w.w_pc * report.pc
}

/// Metrics from a finished trajectory. `cs` is left unset.
pub fn compute_metrics(log: &TrajectoryLog, scenario: &Scenario) -> Result<MetricsReport, MetricsError> {
    let f = &log.footer;
    let n_tasks = scenario.n_tasks();
    if f.tasks.len() != n_tasks {
        return Err(MetricsError::Malformed(format!(
            "footer lists {} tasks, scenario has {n_tasks}",
            f.tasks.len()
        )));
    }
    if f.sensor_on_seconds.len() != scenario.n_sats() {
        return Err(MetricsError::Malformed(format!(
            "footer lists {} satellites, scenario has {}",
            f.sensor_on_seconds.len(),
            scenario.n_sats()
        )));
    }
    if n_tasks == 0 {
        return Err(MetricsError::Malformed("scenario has no tasks".into()));
    }

    let mut completed = 0usize;
    let mut pcr_sum = 0.0;
    let mut done_duration = 0.0;
    let mut total_duration = 0.0;
    let mut tat_sum = 0.0;
    for (outcome, spec) in f.tasks.iter().zip(&scenario.tasks) {
        total_duration += spec.required_duration;
        pcr_sum += (outcome.max_consecutive / spec.required_duration).min(1.0);
        if outcome.status == TaskStatus::Completed {
            let Some(done_at) = outcome.completion_time else {
                return Err(MetricsError::Malformed(format!(
                    "task {} completed without a completion time",
                    spec.task_id
                )));
            };
            completed += 1;
            done_duration += spec.required_duration;
            tat_sum += (done_at - spec.release) / 3600.0;
        }
    }
    let pc = scenario
        .satellites
        .iter()
        .zip(&f.sensor_on_seconds)
        .map(|(a, &secs)| a.sensor_power * secs / 3600.0)
        .sum();
    Ok(MetricsReport {
        cr: completed as f64 / n_tasks as f64,
        pcr: pcr_sum / n_tasks as f64,
        wcr: done_duration / total_duration,
        tat: if completed > 0 { tat_sum / completed as f64 } else { 0.0 },
        pc,
        cs: None,
    })
}

/// Metrics with the composite score filled in.
pub fn score(log: &TrajectoryLog, scenario: &Scenario, w: &CsWeights) -> Result<MetricsReport, MetricsError> {
    let mut r = compute_metrics(log, scenario)?;
    r.cs = Some(compute_cs(&r, w));
    Ok(r)
}

/// Arithmetic mean of every metric. CS is averaged, not recomputed; it is
/// left unset if any input lacks it.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let cs = reports
        .iter()
        .map(|r| r.cs)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    Ok(MetricsReport {
        cr: mean(|r| r.cr),
        pcr: mean(|r| r.pcr),
        wcr: mean(|r| r.wcr),
        tat: mean(|r| r.tat),
        pc: mean(|r| r.pc),
        cs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::EarthModel;
    use crate::scengen::{generate_asset_pool, TaskSpec};
    use crate::sim::{TaskOutcome, TrajectoryFooter, TrajectoryHeader};
    use proptest::prelude::*;

    fn report(cr: f64, pcr: f64, wcr: f64, tat: f64, pc: f64) -> MetricsReport {
        MetricsReport { cr, pcr, wcr, tat, pc, cs: None }
    }

    fn two_task_fixture(sensor_on: f64) -> (Scenario, TrajectoryLog) {
        let mut rng = crate::rng::rng_from_seed(1);
        let pool = generate_asset_pool(&mut rng, 1, "m", &Default::default()).unwrap();
        let mut sat = pool.assets[0].clone();
        sat.sensor_power = 8.0;
        let task = |id, dur, rel| TaskSpec {
            task_id: id,
            required_duration: dur,
            release: rel,
            due: 3600.0,
            target: crate::astro::GeodeticTarget { latitude: 0.0, longitude: 0.0 },
        };
        let scenario = Scenario {
            scenario_id: "fixture".into(),
            seed: 0,
            horizon: 10,
            dt: 1.0,
            satellites: vec![sat],
            initial_battery_fraction: vec![1.0],
            tasks: vec![task(0, 20.0, 40.0), task(1, 60.0, 0.0)],
            earth: EarthModel::default(),
        };
        let log = TrajectoryLog {
            header: TrajectoryHeader {
                scenario_id: "fixture".into(),
                seed: 0,
                config_hash: String::new(),
                scheduler: "none".into(),
                decision_interval: 1,
                n_sats: 1,
                n_tasks: 2,
                horizon: 10,
                dt: 1.0,
                tags: vec![],
            },
            steps: vec![],
            footer: TrajectoryFooter {
                tasks: vec![
                    TaskOutcome {
                        status: TaskStatus::Completed,
                        max_consecutive: 20.0,
                        completion_time: Some(100.0),
                    },
                    TaskOutcome {
                        status: TaskStatus::Expired,
                        max_consecutive: 30.0,
                        completion_time: None,
                    },
                ],
                sensor_on_seconds: vec![sensor_on],
                sensor_power: vec![8.0],
                release: vec![40.0, 0.0],
                required_duration: vec![20.0, 60.0],
            },
        };
        (scenario, log)
    }

    #[test]
    fn hand_computed_two_task_log() {
        let (scenario, log) = two_task_fixture(900.0);
        let r = compute_metrics(&log, &scenario).unwrap();
        assert!((r.cr - 0.5).abs() < 1e-12);
        assert!((r.pcr - 0.75).abs() < 1e-12);
        assert!((r.wcr - 0.25).abs() < 1e-12);
        assert!((r.tat - 60.0 / 3600.0).abs() < 1e-12);
        assert!((r.pc - 2.0).abs() < 1e-12);
        assert!(r.cs.is_none());
    }

    #[test]
    fn unobserved_log_is_all_zero_except_power() {
        let (scenario, mut log) = two_task_fixture(450.0);
        for t in &mut log.footer.tasks {
            *t = TaskOutcome {
                status: TaskStatus::Expired,
                max_consecutive: 0.0,
                completion_time: None,
            };
        }
        let r = compute_metrics(&log, &scenario).unwrap();
        assert_eq!((r.cr, r.pcr, r.wcr, r.tat), (0.0, 0.0, 0.0, 0.0));
        assert!((r.pc - 1.0).abs() < 1e-12);
        let cs = compute_cs(&r, &CsWeights::STANDARD);
        assert!((cs - (1e4 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn malformed_footer_is_rejected() {
        let (scenario, mut log) = two_task_fixture(0.0);
        log.footer.tasks.pop();
        assert!(matches!(compute_metrics(&log, &scenario), Err(MetricsError::Malformed(_))));
        let (scenario, mut log) = two_task_fixture(0.0);
        log.footer.tasks[0].completion_time = None;
        assert!(compute_metrics(&log, &scenario).is_err());
    }

    #[test]
    fn table_rows_reconstruct() {
        let w = CsWeights::STANDARD;
        let rows = [
            ((28.77, 32.93, 28.23, 7.75, 135.93), 5.85),
            ((30.47, 33.68, 30.05, 7.50, 71.27), 5.00),
        ];
        for ((cr, pcr, wcr, tat, pc), expected) in rows {
            let r = report(cr / 100.0, pcr / 100.0, wcr / 100.0, tat, pc);
            assert!((compute_cs(&r, &w) - expected).abs() <= 0.05);
        }
    }

    #[test]
    fn perfect_report_scores_one() {
        let cs = compute_cs(&report(1.0, 1.0, 1.0, 0.0, 0.0), &CsWeights::STANDARD);
        assert!((cs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_means_and_errors() {
        assert_eq!(aggregate(&[]), Err(MetricsError::Empty));
        let mut a = report(0.2, 0.4, 0.1, 1.0, 10.0);
        a.cs = Some(3.0);
        assert_eq!(aggregate(&[a]).unwrap(), a);
        let mut b = report(0.4, 0.6, 0.3, 3.0, 30.0);
        b.cs = Some(5.0);
        let m = aggregate(&[a, b]).unwrap();
        assert!((m.cr - 0.3).abs() < 1e-12 && (m.pc - 20.0).abs() < 1e-12);
        assert_eq!(m.cs, Some(4.0));
        assert_eq!(aggregate(&[a, report(0.0, 0.0, 0.0, 0.0, 0.0)]).unwrap().cs, None);
    }

    proptest! {
        #[test]
        fn cs_monotone(cr in 0.01f64..0.99, pcr in 0.01f64..0.99, wcr in 0.01f64..0.99,
                       tat in 0.0f64..10.0, pc in 0.0f64..500.0, d in 1e-3f64..0.01) {
            let w = CsWeights::STANDARD;
            let base = compute_cs(&report(cr, pcr, wcr, tat, pc), &w);
            prop_assert!(compute_cs(&report(cr + d, pcr, wcr, tat, pc), &w) < base);
            prop_assert!(compute_cs(&report(cr, pcr + d, wcr, tat, pc), &w) < base);
            prop_assert!(compute_cs(&report(cr, pcr, wcr + d, tat, pc), &w) < base);
            prop_assert!(compute_cs(&report(cr, pcr, wcr, tat + d, pc), &w) > base);
            prop_assert!(compute_cs(&report(cr, pcr, wcr, tat, pc + d), &w) > base);
        }
    }
}
