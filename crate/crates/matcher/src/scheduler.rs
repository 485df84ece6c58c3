//! The trained matcher as a simulator scheduler.

use aeos_core::sim::{AssignmentVector, Scheduler, SchedulerFailure, Simulation};

use crate::features::{build_features, NormStats};
use crate::model::{infer_assignment, Matcher};

#[derive(Debug, Clone)]
pub struct MatcherScheduler {
    pub model: Matcher,
    pub norm: NormStats,
    pub tau_s: f64,
}

impl MatcherScheduler {
    pub fn new(model: Matcher, norm: NormStats, tau_s: f64) -> Self {
        Self { model, norm, tau_s }
    }
}

impl Scheduler for MatcherScheduler {
    fn name(&self) -> String {
        "matcher".into()
    }

    fn observe(&mut self, sim: &Simulation<'_>) -> Result<AssignmentVector, SchedulerFailure> {
        let fail = |e: crate::error::MatcherError| SchedulerFailure(e.to_string());
        let f = build_features(sim, &self.model.layout, &self.norm).map_err(fail)?;
        let out = self.model.forward(&f).map_err(fail)?;
        Ok(infer_assignment(&out.a, &out.constraint.s_hat, self.tau_s))
    }
}
