//! Training objectives on recorded forward passes.

use serde::{Deserialize, Serialize};

use aeos_core::sim::AssignmentVector;

use crate::error::MatcherError;
use crate::tape::{Mat, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_s: f64,
    pub w_t: f64,
    pub w_a: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_s: 1.0,
            w_t: 1.0,
            w_a: 1.0,
        }
    }
}

fn same_shape(tape: &Tape, v: Var, m: &Mat, what: &str) -> Result<(), MatcherError> {
    if tape.value(v).shape() != m.shape() {
        return Err(MatcherError::Shape(format!(
            "{what}: prediction {:?} vs label {:?}",
            tape.value(v).shape(),
            m.shape()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over all pairs.
pub fn loss_feasibility(tape: &mut Tape, s_hat: Var, s_tilde: &Mat) -> Result<Var, MatcherError> {
    same_shape(tape, s_hat, s_tilde, "feasibility")?;
    Ok(tape.bce_mean(s_hat, s_tilde))
}

/// Squared timing error averaged over positive pairs; zero without positives.
pub fn loss_time(tape: &mut Tape, t_hat: Var, t_tilde: &Mat, s_tilde: &Mat) -> Result<Var, MatcherError> {
    same_shape(tape, t_hat, t_tilde, "timing")?;
    same_shape(tape, t_hat, s_tilde, "timing mask")?;
    Ok(tape.masked_mse(t_hat, t_tilde, s_tilde))
}

/// Mean over satellites of the cross-entropy against column `a_i`
/// (column 0 is the null assignment).
pub fn loss_assignment(tape: &mut Tape, a: Var, target: &AssignmentVector) -> Result<Var, MatcherError> {
    let (rows, classes) = tape.value(a).shape();
    if target.0.len() != rows {
        return Err(MatcherError::Shape(format!(
            "{} assignment entries for {rows} satellites",
            target.0.len()
        )));
    }
    if let Some(&bad) = target.0.iter().find(|&&c| c >= classes) {
        return Err(MatcherError::TargetOutOfRange { target: bad, classes });
    }
    Ok(tape.cross_entropy_rows(a, &target.0))
}

pub fn total_loss(tape: &mut Tape, l_s: Var, l_t: Var, l_a: Var, w: &LossWeights) -> Var {
    tape.weighted_sum(&[(l_s, w.w_s), (l_t, w.w_t), (l_a, w.w_a)])
}
