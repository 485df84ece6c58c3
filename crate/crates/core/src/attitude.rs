//! Rigid-body attitude dynamics with a reaction-wheel triad.
//!
//! Attitude is an MRP set `sigma_BN` mapping inertial components into body
//! components. Control runs once per call to [`step_attitude`] (zero-order
//! hold over `dt`); the coupled body/wheel dynamics are integrated with RK4
//! over `substeps` sub-intervals.

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::astro::{StateVectorECI, Vec3};
use crate::error::AttitudeError;
use crate::scengen::SatelliteAsset;

pub const RPM_TO_RAD_S: f64 = std::f64::consts::PI / 30.0;
/// Wheel speed limit (rpm).
pub const MAX_WHEEL_SPEED_RPM: f64 = 6000.0;

/// Sensor boresight in the body frame.
pub fn boresight_body() -> Vec3 {
    Vec3::z()
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Modified Rodrigues Parameters of the body frame relative to inertial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrpAttitude {
    pub sigma: Vec3,
}

impl MrpAttitude {
    pub fn identity() -> Self {
        Self { sigma: Vec3::zeros() }
    }

    pub fn new(sigma: Vec3) -> Self {
        Self { sigma }
    }

    /// MRP for a rotation of `angle` rad about the unit `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self {
            sigma: axis.normalize() * (angle / 4.0).tan(),
        }
    }

    /// Principal rotation angle in [0, 2*pi).
    pub fn angle(&self) -> f64 {
        4.0 * self.sigma.norm().atan()
    }

    pub fn shadow(&self) -> Self {
        let s2 = self.sigma.norm_squared();
        Self {
            sigma: -self.sigma / s2,
        }
    }

    /// Switches to the shadow set when |sigma| > 1.
    pub fn canonical(&self) -> Self {
        if self.sigma.norm_squared() > 1.0 {
            self.shadow()
        } else {
            *self
        }
    }

    /// Direction cosine matrix `[BN]`: `v_B = dcm * v_N`.
    pub fn dcm(&self) -> Matrix3<f64> {
        let s2 = self.sigma.norm_squared();
        let sk = skew(&self.sigma);
        Matrix3::identity() + (8.0 * sk * sk - 4.0 * (1.0 - s2) * sk) / (1.0 + s2).powi(2)
    }

    /// Inertial direction of a body-fixed vector.
    pub fn body_to_inertial(&self, v_body: &Vec3) -> Vec3 {
        self.dcm().transpose() * v_body
    }
}

/// `dsigma/dt = 1/4 [(1 - s^2) I + 2 [s x] + 2 s s^T] omega`.
pub fn mrp_kinematics(sigma: &MrpAttitude, omega: &Vec3) -> Vec3 {
    let s = &sigma.sigma;
    let s2 = s.norm_squared();
    let b = Matrix3::identity() * (1.0 - s2) + 2.0 * skew(s) + 2.0 * s * s.transpose();
    0.25 * b * omega
}

/// Minimal rotation taking `boresight` onto `los`, both expressed in the same
/// frame. The rotation axis is `boresight x los`; when the two are exactly
/// anti-parallel the body +x axis (or +y if +x is the boresight) is used.
pub fn minimal_rotation(boresight: &Vec3, los: &Vec3) -> MrpAttitude {
    let b = boresight.normalize();
    let l = los.normalize();
    let cos = b.dot(&l).clamp(-1.0, 1.0);
    let cross = b.cross(&l);
    let sin = cross.norm();
    if sin == 0.0 {
        if cos > 0.0 {
            return MrpAttitude::identity();
        }
        let fallback = if b.cross(&Vec3::x()).norm() > 1e-9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        // Project out any boresight component so the axis is perpendicular.
        let axis = (fallback - fallback.dot(&b) * b).normalize();
        return MrpAttitude::from_axis_angle(&axis, std::f64::consts::PI);
    }
    MrpAttitude::from_axis_angle(&(cross / sin), sin.atan2(cos))
}

/// Reference attitude pointing `boresight_body` at the target from the
/// satellite position, with roll fixed by the minimal-rotation convention.
pub fn pointing_reference(
    sat_state: &StateVectorECI,
    target_pos: &Vec3,
    boresight_body: &Vec3,
) -> MrpAttitude {
    minimal_rotation(boresight_body, &(target_pos - sat_state.position))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub k: f64,
    pub ki: f64,
    pub p: f64,
    pub integral_limit: f64,
}

/// `torque = -k sigma_err - p omega_err - ki z`, with `z` updated and clamped
/// component-wise before use.
pub fn mrp_feedback_torque(
    sigma_err: &Vec3,
    omega_err: &Vec3,
    gains: &ControlGains,
    integral_state: &Vec3,
    dt: f64,
) -> (Vec3, Vec3) {
    let lim = gains.integral_limit.abs();
    let z = (integral_state + sigma_err * dt).map(|c| c.clamp(-lim, lim));
    let torque = -gains.k * sigma_err - gains.p * omega_err - gains.ki * z;
    (torque, z)
}

/// Three orthogonal reaction wheels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionWheelSet {
    /// Unit spin axes in the body frame, one per wheel.
    pub spin_axes: [[f64; 3]; 3],
    /// Wheel speeds relative to the body (rpm).
    pub speeds: [f64; 3],
    /// Momentum capacity per wheel (kg m^2/s).
    pub max_momentum: f64,
    pub max_speed: f64,
    /// Spin inertia (kg m^2), chosen so `max_speed` carries `max_momentum`.
    pub wheel_inertia: f64,
    pub power_rating: f64,
    pub efficiency: f64,
}

impl ReactionWheelSet {
    /// Orthogonal triad oriented by yaw/pitch/roll angles in degrees.
    pub fn from_direction(
        angles_deg: [f64; 3],
        max_momentum: f64,
        power_rating: f64,
        efficiency: f64,
    ) -> Self {
        let rot = Rotation3::from_euler_angles(
            angles_deg[2].to_radians(),
            angles_deg[1].to_radians(),
            angles_deg[0].to_radians(),
        );
        let m = rot.matrix();
        let axis = |c: usize| [m[(0, c)], m[(1, c)], m[(2, c)]];
        Self {
            spin_axes: [axis(0), axis(1), axis(2)],
            speeds: [0.0; 3],
            max_momentum,
            max_speed: MAX_WHEEL_SPEED_RPM,
            wheel_inertia: max_momentum / (MAX_WHEEL_SPEED_RPM * RPM_TO_RAD_S),
            power_rating,
            efficiency,
        }
    }

    fn axes_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[
            Vec3::from(self.spin_axes[0]),
            Vec3::from(self.spin_axes[1]),
            Vec3::from(self.spin_axes[2]),
        ])
    }

    /// Per-wheel spin momentum (kg m^2/s).
    pub fn momenta(&self) -> Vec3 {
        Vec3::from(self.speeds) * (self.wheel_inertia * RPM_TO_RAD_S)
    }

    /// Total wheel momentum expressed in the body frame.
    pub fn body_momentum(&self) -> Vec3 {
        self.axes_matrix() * self.momenta()
    }

    fn set_momenta(&mut self, h: &Vec3) {
        let scale = self.wheel_inertia * RPM_TO_RAD_S;
        for w in 0..3 {
            self.speeds[w] = if scale > 0.0 { h[w] / scale } else { 0.0 };
        }
    }
}

/// High-level pointing directive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GuidanceCommand {
    /// Null the body rates and keep the current attitude.
    Hold,
    /// Track an inertial point moving with `target_vel`.
    PointAtTarget { target_pos_eci: Vec3, target_vel_eci: Vec3 },
}

/// Attitude part of a satellite's runtime state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeState {
    pub attitude: MrpAttitude,
    pub rates: Vec3,
    pub wheels: ReactionWheelSet,
    pub integral: Vec3,
}

impl AttitudeState {
    /// Total angular momentum in the inertial frame (kg m^2/s).
    pub fn inertial_momentum(&self, inertia: f64) -> Vec3 {
        self.attitude
            .body_to_inertial(&(inertia * self.rates + self.wheels.body_momentum()))
    }

    pub fn boresight_inertial(&self) -> Vec3 {
        self.attitude.body_to_inertial(&boresight_body())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeStep {
    pub state: AttitudeState,
    /// Mean electrical wheel power over the step (W).
    pub wheel_power: f64,
    pub saturated: bool,
    /// Boresight-to-line-of-sight angle before the step (rad); 0 when holding.
    pub pointing_error: f64,
}

/// Attitude and rate errors for a guidance command.
///
/// For target tracking the error attitude is the minimal body-frame rotation
/// of the boresight onto the line of sight, and the reference rate is the
/// line-of-sight angular velocity.
pub fn tracking_errors(
    state: &AttitudeState,
    sat: &StateVectorECI,
    guidance: &GuidanceCommand,
) -> (Vec3, Vec3, f64) {
    match guidance {
        GuidanceCommand::Hold => (Vec3::zeros(), state.rates, 0.0),
        GuidanceCommand::PointAtTarget {
            target_pos_eci,
            target_vel_eci,
        } => {
            let rel = target_pos_eci - sat.position;
            let range = rel.norm();
            let u = rel / range;
            let rel_vel = target_vel_eci - sat.velocity;
            let u_dot = (rel_vel - u * u.dot(&rel_vel)) / range;
            let dcm = state.attitude.dcm();
            let los_body = dcm * u;
            let ref_to_body = minimal_rotation(&boresight_body(), &los_body);
            let sigma_err = -ref_to_body.sigma;
            let omega_ref = dcm * u.cross(&u_dot);
            (sigma_err, state.rates - omega_ref, ref_to_body.angle())
        }
    }
}

fn derivative(
    sigma: &Vec3,
    omega: &Vec3,
    h: &Vec3,
    u: &Vec3,
    axes: &Matrix3<f64>,
    inertia: f64,
) -> (Vec3, Vec3, Vec3) {
    let sigma_dot = mrp_kinematics(&MrpAttitude::new(*sigma), omega);
    let total = inertia * omega + axes * h;
    let omega_dot = (-omega.cross(&total) - axes * u) / inertia;
    (sigma_dot, omega_dot, *u)
}

/// Advances the attitude by `dt` under MRP feedback with wheel actuation.
#[allow(clippy::too_many_arguments)]
pub fn step_attitude(
    state: &AttitudeState,
    inertia: f64,
    sat: &StateVectorECI,
    guidance: &GuidanceCommand,
    gains: &ControlGains,
    dt: f64,
    substeps: usize,
) -> Result<AttitudeStep, AttitudeError> {
    if !(dt > 0.0) || substeps == 0 || !(inertia > 0.0) {
        return Err(AttitudeError::InvalidStep(format!(
            "dt = {dt}, substeps = {substeps}, inertia = {inertia}"
        )));
    }
    let (sigma_err, omega_err, pointing_error) = tracking_errors(state, sat, guidance);
    let (torque, integral) =
        mrp_feedback_torque(&sigma_err, &omega_err, gains, &state.integral, dt);

    let wheels = state.wheels;
    let axes = wheels.axes_matrix();
    // Body torque is -axes * u, so u = -axes^T * torque for an orthonormal triad.
    let commanded = -(axes.transpose() * torque);
    let h_max = wheels.max_momentum;
    let spin_scale = wheels.wheel_inertia * RPM_TO_RAD_S;

    let mut sigma = state.attitude.sigma;
    let mut omega = state.rates;
    let mut h = wheels.momenta();
    let mut saturated = false;
    let mut energy = 0.0;
    let hdt = dt / substeps as f64;

    for _ in 0..substeps {
        let mut u = commanded;
        for w in 0..3 {
            if h[w].abs() >= h_max && u[w] * h[w] > 0.0 {
                u[w] = 0.0;
                saturated = true;
            }
        }
        if wheels.wheel_inertia > 0.0 && wheels.efficiency > 0.0 {
            let mech: f64 = (0..3)
                .map(|w| (u[w] * h[w] / wheels.wheel_inertia).abs())
                .sum();
            energy += mech / wheels.efficiency * hdt;
        }

        let (k1s, k1w, k1h) = derivative(&sigma, &omega, &h, &u, &axes, inertia);
        let (k2s, k2w, k2h) = derivative(
            &(sigma + 0.5 * hdt * k1s),
            &(omega + 0.5 * hdt * k1w),
            &(h + 0.5 * hdt * k1h),
            &u,
            &axes,
            inertia,
        );
        let (k3s, k3w, k3h) = derivative(
            &(sigma + 0.5 * hdt * k2s),
            &(omega + 0.5 * hdt * k2w),
            &(h + 0.5 * hdt * k2h),
            &u,
            &axes,
            inertia,
        );
        let (k4s, k4w, k4h) = derivative(
            &(sigma + hdt * k3s),
            &(omega + hdt * k3w),
            &(h + hdt * k3h),
            &u,
            &axes,
            inertia,
        );
        sigma += hdt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        omega += hdt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        h += hdt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);

        for w in 0..3 {
            if h[w].abs() > h_max {
                h[w] = h_max.copysign(h[w]);
                saturated = true;
            }
        }
        sigma = MrpAttitude::new(sigma).canonical().sigma;

        if !sigma.iter().all(|v| v.is_finite()) {
            return Err(AttitudeError::NonFinite("attitude"));
        }
        if !omega.iter().all(|v| v.is_finite()) {
            return Err(AttitudeError::NonFinite("body rates"));
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(AttitudeError::NonFinite("wheel momentum"));
        }
    }

    let mut new_wheels = wheels;
    if spin_scale > 0.0 {
        new_wheels.set_momenta(&h);
    }
    Ok(AttitudeStep {
        state: AttitudeState {
            attitude: MrpAttitude::new(sigma),
            rates: omega,
            wheels: new_wheels,
            integral,
        },
        wheel_power: energy / dt,
        saturated,
        pointing_error,
    })
}

/// Canonical rest-to-rest slew used to accept or reject generated assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlewTestSpec {
    pub slew_angle_deg: f64,
    /// Pointing error must stay below tolerance from this time on (s).
    pub settle_deadline_s: f64,
    /// Extra observation time after the deadline (s).
    pub hold_s: f64,
    pub tolerance_deg: f64,
    pub rate_tolerance: f64,
    pub dt: f64,
    pub substeps: usize,
}

impl Default for SlewTestSpec {
    fn default() -> Self {
        Self {
            slew_angle_deg: 60.0,
            settle_deadline_s: 120.0,
            hold_s: 30.0,
            tolerance_deg: 0.5,
            rate_tolerance: 0.01,
            dt: 1.0,
            substeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlewDiagnostics {
    pub passed: bool,
    /// Time after which the pointing error stayed below tolerance, if it did.
    pub settle_time_s: Option<f64>,
    pub final_error_deg: f64,
    pub final_rate: f64,
    pub saturated: bool,
    pub non_finite: bool,
    pub peak_wheel_momentum: f64,
}

/// Runs the slew test on a fresh attitude state built from the asset.
pub fn validate_asset(asset: &SatelliteAsset, test: &SlewTestSpec) -> SlewDiagnostics {
    let wheels = asset.reaction_wheels();
    let state = AttitudeState {
        attitude: MrpAttitude::identity(),
        rates: Vec3::zeros(),
        wheels,
        integral: Vec3::zeros(),
    };
    run_slew_test(&state, asset.inertia_scale, &asset.gains, test)
}

pub fn run_slew_test(
    initial: &AttitudeState,
    inertia: f64,
    gains: &ControlGains,
    test: &SlewTestSpec,
) -> SlewDiagnostics {
    let angle = test.slew_angle_deg.to_radians();
    let sat = StateVectorECI {
        position: Vec3::new(7000.0, 0.0, 0.0),
        velocity: Vec3::zeros(),
    };
    let start_dir = initial.boresight_inertial();
    let axis = {
        let c = start_dir.cross(&Vec3::new(0.6, 0.8, 0.0));
        if c.norm() > 1e-9 {
            c.normalize()
        } else {
            start_dir.cross(&Vec3::x()).normalize()
        }
    };
    let dir = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle) * start_dir;
    let guidance = GuidanceCommand::PointAtTarget {
        target_pos_eci: sat.position + 1000.0 * dir,
        target_vel_eci: Vec3::zeros(),
    };

    let tol = test.tolerance_deg.to_radians();
    let steps = ((test.settle_deadline_s + test.hold_s) / test.dt).round() as usize;
    let mut state = *initial;
    let mut saturated = false;
    let mut last_violation: Option<f64> = None;
    let mut peak = 0.0f64;
    let pointing = |s: &AttitudeState| {
        let b = s.boresight_inertial();
        b.dot(&dir).clamp(-1.0, 1.0).acos()
    };

    for k in 0..steps {
        match step_attitude(&state, inertia, &sat, &guidance, gains, test.dt, test.substeps) {
            Ok(step) => {
                saturated |= step.saturated;
                state = step.state;
            }
            Err(_) => {
                return SlewDiagnostics {
                    passed: false,
                    settle_time_s: None,
                    final_error_deg: f64::NAN,
                    final_rate: f64::NAN,
                    saturated,
                    non_finite: true,
                    peak_wheel_momentum: peak,
                }
            }
        }
        peak = peak.max(state.wheels.momenta().amax());
        let t = (k + 1) as f64 * test.dt;
        if pointing(&state) >= tol {
            last_violation = Some(t);
        }
    }

    let final_error = pointing(&state);
    let final_rate = state.rates.norm();
    let settle_time_s = match last_violation {
        None => Some(0.0),
        Some(t) if t < steps as f64 * test.dt => Some(t),
        Some(_) => None,
    };
    let settled = settle_time_s.is_some_and(|t| t <= test.settle_deadline_s);
    SlewDiagnostics {
        passed: settled && !saturated && final_rate < test.rate_tolerance,
        settle_time_s,
        final_error_deg: final_error.to_degrees(),
        final_rate,
        saturated,
        non_finite: false,
        peak_wheel_momentum: peak,
    }
}
