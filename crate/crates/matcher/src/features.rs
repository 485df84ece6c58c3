//! Per-timestep satellite and task feature matrices.

use serde::{Deserialize, Serialize};

use aeos_core::astro::target_position_eci;
use aeos_core::sim::{Simulation, TaskStatus};

use crate::error::MatcherError;
use crate::tape::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Continuous,
    /// One-hot encoded; looked up in an embedding table by the model.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Number of columns (vector length or class count).
    pub width: usize,
    pub dynamic: bool,
}

fn field(name: &str, kind: FieldKind, width: usize, dynamic: bool) -> FieldSpec {
    FieldSpec {
        name: name.into(),
        kind,
        width,
        dynamic,
    }
}

/// Column order of both feature matrices: static fields, then dynamic ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub satellite: Vec<FieldSpec>,
    pub task: Vec<FieldSpec>,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        use FieldKind::*;
        let satellite = vec![
            field("inertia", Continuous, 1, false),
            field("mass", Continuous, 1, false),
            field("panel_direction_deg", Continuous, 3, false),
            field("panel_area", Continuous, 1, false),
            field("half_fov", Continuous, 1, false),
            field("sensor_power", Continuous, 1, false),
            field("battery_capacity_mah", Continuous, 1, false),
            field("rw_max_momentum", Continuous, 1, false),
            field("rw_direction_deg", Continuous, 3, false),
            field("rw_power_rating", Continuous, 1, false),
            field("rw_efficiency", Continuous, 1, false),
            field("gains_k_ki_p_limit", Continuous, 4, false),
            field("orbital_elements", Continuous, 6, false),
            field("battery_fraction", Continuous, 1, true),
            field("sensor_status", Categorical, 2, true),
            field("mrp", Continuous, 3, true),
            field("body_rates", Continuous, 3, true),
            field("wheel_speed_fraction", Continuous, 3, true),
            field("position_eci", Continuous, 3, true),
            field("velocity_eci", Continuous, 3, true),
        ];
        let task = vec![
            field("required_duration", Continuous, 1, false),
            field("target_ecef_unit", Continuous, 3, false),
            field("release_offset", Continuous, 1, true),
            field("due_offset", Continuous, 1, true),
            field("progress_fraction", Continuous, 1, true),
            field("status", Categorical, 4, true),
            field("target_eci_unit", Continuous, 3, true),
        ];
        Self { satellite, task }
    }
}

fn width(fields: &[FieldSpec], pred: impl Fn(&FieldSpec) -> bool) -> usize {
    fields.iter().filter(|f| pred(f)).map(|f| f.width).sum()
}

fn columns(fields: &[FieldSpec], kind: FieldKind) -> Vec<usize> {
    let mut out = Vec::new();
    let mut c = 0;
    for f in fields {
        if f.kind == kind {
            out.extend(c..c + f.width);
        }
        c += f.width;
    }
    out
}

impl FeatureLayout {
    pub fn d_s_static(&self) -> usize {
        width(&self.satellite, |f| !f.dynamic)
    }
    pub fn d_s_dynamic(&self) -> usize {
        width(&self.satellite, |f| f.dynamic)
    }
    pub fn d_t_static(&self) -> usize {
        width(&self.task, |f| !f.dynamic)
    }
    pub fn d_t_dynamic(&self) -> usize {
        width(&self.task, |f| f.dynamic)
    }
    pub fn d_s(&self) -> usize {
        width(&self.satellite, |_| true)
    }
    pub fn d_t(&self) -> usize {
        width(&self.task, |_| true)
    }

    pub fn continuous_columns(&self, satellite: bool) -> Vec<usize> {
        columns(self.fields(satellite), FieldKind::Continuous)
    }

    pub fn categorical_columns(&self, satellite: bool) -> Vec<usize> {
        columns(self.fields(satellite), FieldKind::Categorical)
    }

    fn fields(&self, satellite: bool) -> &[FieldSpec] {
        if satellite {
            &self.satellite
        } else {
            &self.task
        }
    }

    /// Fields must be ordered static-first.
    pub fn validate(&self) -> Result<(), MatcherError> {
        for fields in [&self.satellite, &self.task] {
            if fields.windows(2).any(|w| w[0].dynamic && !w[1].dynamic) {
                return Err(MatcherError::Layout("static field after a dynamic one".into()));
            }
        }
        Ok(())
    }
}

/// Satellite matrix `s` (N_S x d_S), task matrix `t` (N_T x d_T) and the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrices {
    pub s: Mat,
    pub t: Mat,
    pub step: usize,
}

/// Unnormalized features of the live simulator state.
pub fn raw_features(sim: &Simulation<'_>, layout: &FeatureLayout) -> Result<FeatureMatrices, MatcherError> {
    let scenario = sim.scenario();
    let time = sim.time();
    let radius = scenario.earth.radius;
    let mut s = Mat::zeros(scenario.n_sats(), layout.d_s());
    for (i, (asset, st)) in scenario.satellites.iter().zip(sim.satellites()).enumerate() {
        let e = &asset.elements;
        let g = &asset.gains;
        let att = &st.attitude;
        let wheel_frac: Vec<f64> = att.wheels.speeds.iter().map(|w| w / att.wheels.max_speed).collect();
        let row: Vec<f64> = [
            &[asset.inertia_scale, asset.mass][..],
            &asset.panel_direction,
            &[asset.panel_area, asset.half_fov, asset.sensor_power, asset.battery_capacity, asset.rw_max_momentum],
            &asset.rw_direction,
            &[asset.rw_power_rating, asset.rw_efficiency, g.k, g.ki, g.p, g.integral_limit],
            &[e.semi_major_axis, e.eccentricity, e.inclination, e.raan, e.arg_perigee, e.true_anomaly_at_epoch],
            &[st.battery_energy / sim.capacity_wh(i).max(f64::MIN_POSITIVE)],
            &if st.sensor_on { [0.0, 1.0] } else { [1.0, 0.0] },
            att.attitude.sigma.as_slice(),
            att.rates.as_slice(),
            &wheel_frac,
            (st.orbit.position / radius).as_slice(),
            st.orbit.velocity.as_slice(),
        ]
        .concat();
        if row.len() != layout.d_s() {
            return Err(MatcherError::Layout(format!(
                "satellite row has {} values, layout expects {}",
                row.len(),
                layout.d_s()
            )));
        }
        s.row_mut(i).copy_from_slice(&row);
    }

    let mut t = Mat::zeros(scenario.n_tasks(), layout.d_t());
    for (j, (spec, st)) in scenario.tasks.iter().zip(sim.tasks()).enumerate() {
        let ecef = spec.target.ecef_unit();
        let eci = target_position_eci(&spec.target, time, &scenario.earth) / radius;
        let mut status = [0.0; 4];
        status[st.status.index()] = 1.0;
        let progress = if st.status == TaskStatus::Completed {
            1.0
        } else {
            (st.consecutive_observed / spec.required_duration).min(1.0)
        };
        let row: Vec<f64> = [
            &[spec.required_duration][..],
            ecef.as_slice(),
            &[spec.release - time, spec.due - time, progress],
            &status,
            eci.as_slice(),
        ]
        .concat();
        if row.len() != layout.d_t() {
            return Err(MatcherError::Layout(format!(
                "task row has {} values, layout expects {}",
                row.len(),
                layout.d_t()
            )));
        }
        t.row_mut(j).copy_from_slice(&row);
    }
    Ok(FeatureMatrices {
        s,
        t,
        step: sim.current_step(),
    })
}

/// Per-column mean and standard deviation. Categorical columns pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub s_mean: Vec<f64>,
    pub s_std: Vec<f64>,
    pub t_mean: Vec<f64>,
    pub t_std: Vec<f64>,
}

fn column_stats<'a>(rows: impl Iterator<Item = &'a Mat>, d: usize, categorical: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for m in rows {
        for r in m.row_iter() {
            n += 1;
            for c in 0..d {
                sum[c] += r[c];
                sq[c] += r[c] * r[c];
            }
        }
    }
    let mut mean = vec![0.0; d];
    let mut std = vec![1.0; d];
    if n > 0 {
        for c in 0..d {
            if categorical.contains(&c) {
                continue;
            }
            mean[c] = sum[c] / n as f64;
            std[c] = (sq[c] / n as f64 - mean[c] * mean[c]).max(0.0).sqrt();
        }
    }
    (mean, std)
}

impl NormStats {
    pub fn identity(layout: &FeatureLayout) -> Self {
        Self {
            s_mean: vec![0.0; layout.d_s()],
            s_std: vec![1.0; layout.d_s()],
            t_mean: vec![0.0; layout.d_t()],
            t_std: vec![1.0; layout.d_t()],
        }
    }

    pub fn fit<'a>(samples: impl Iterator<Item = &'a FeatureMatrices> + Clone, layout: &FeatureLayout) -> Self {
        let (s_mean, s_std) = column_stats(
            samples.clone().map(|f| &f.s),
            layout.d_s(),
            &layout.categorical_columns(true),
        );
        let (t_mean, t_std) =
            column_stats(samples.map(|f| &f.t), layout.d_t(), &layout.categorical_columns(false));
        Self {
            s_mean,
            s_std,
            t_mean,
            t_std,
        }
    }

    fn apply(m: &mut Mat, mean: &[f64], std: &[f64]) {
        for mut r in m.row_iter_mut() {
            for c in 0..mean.len() {
                r[c] = if std[c] > 1e-12 { (r[c] - mean[c]) / std[c] } else { 0.0 };
            }
        }
    }

    pub fn normalize(&self, f: &FeatureMatrices) -> Result<FeatureMatrices, MatcherError> {
        if f.s.ncols() != self.s_mean.len() || f.t.ncols() != self.t_mean.len() {
            return Err(MatcherError::Layout(format!(
                "feature widths ({}, {}) do not match normalization stats ({}, {})",
                f.s.ncols(),
                f.t.ncols(),
                self.s_mean.len(),
                self.t_mean.len()
            )));
        }
        let mut out = f.clone();
        Self::apply(&mut out.s, &self.s_mean, &self.s_std);
        Self::apply(&mut out.t, &self.t_mean, &self.t_std);
        if out.s.iter().chain(out.t.iter()).any(|v| !v.is_finite()) {
            return Err(MatcherError::NonFinite("normalized features".into()));
        }
        Ok(out)
    }
}

/// Normalized features of the live simulator state.
pub fn build_features(
    sim: &Simulation<'_>,
    layout: &FeatureLayout,
    norm: &NormStats,
) -> Result<FeatureMatrices, MatcherError> {
    norm.normalize(&raw_features(sim, layout)?)
}

/// Interleaved sinusoidal embedding: `[sin(t w_0), cos(t w_0), sin(t w_1), ...]`
/// with `w_k = 10000^(-2k / dim)`.
pub fn time_embedding(t: f64, dim: usize) -> Result<Vec<f64>, MatcherError> {
    if dim % 2 != 0 {
        return Err(MatcherError::OddDimension(dim));
    }
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let w = 10000f64.powf(-((2 * k) as f64) / dim as f64);
        out.push((t * w).sin());
        out.push((t * w).cos());
    }
    Ok(out)
}
