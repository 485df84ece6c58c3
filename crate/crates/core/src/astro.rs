//! Two-body orbit propagation and spherical-Earth geometry.
//!
//! Everything here is a pure function of its arguments. Orbital states live
//! in an Earth-centred inertial frame; ground targets rotate with the Earth
//! about the inertial +z axis.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::AstroError;

pub type Vec3 = Vector3<f64>;

/// Kepler solver tolerance on the eccentric anomaly (rad).
pub const KEPLER_TOL: f64 = 1e-12;
const KEPLER_MAX_NEWTON: usize = 50;
const KEPLER_MAX_BISECT: usize = 200;

/// Physical constants of the planetary environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    /// Gravitational parameter (km^3/s^2).
    pub mu: f64,
    /// Mean spherical radius (km).
    pub radius: f64,
    /// Sidereal rotation rate (rad/s).
    pub rotation_rate: f64,
    /// Greenwich sidereal angle at scenario epoch (rad).
    pub gmst_at_epoch: f64,
    /// Solar flux at 1 AU (W/m^2).
    pub solar_flux: f64,
    /// Inertial unit vector pointing at the Sun, fixed over a scenario.
    pub sun_direction: [f64; 3],
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            mu: 398_600.4418,
            radius: 6371.0,
            rotation_rate: 7.292_115_9e-5,
            gmst_at_epoch: 0.0,
            solar_flux: 1361.0,
            sun_direction: [1.0, 0.0, 0.0],
        }
    }
}

impl EarthModel {
    pub fn sun_dir(&self) -> Vec3 {
        Vec3::from(self.sun_direction).normalize()
    }

    /// Earth rotation angle at `t` seconds past epoch.
    pub fn rotation_angle(&self, t: f64) -> f64 {
        self.gmst_at_epoch + self.rotation_rate * t
    }
}

/// Classical Keplerian elements. Angles are stored in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub true_anomaly_at_epoch: f64,
}

impl OrbitalElements {
    pub fn validate(&self, earth: &EarthModel) -> Result<(), AstroError> {
        let finite = [
            self.semi_major_axis,
            self.eccentricity,
            self.inclination,
            self.raan,
            self.arg_perigee,
            self.true_anomaly_at_epoch,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(AstroError::InvalidElements("non-finite element".into()));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(AstroError::InvalidElements(format!(
                "eccentricity {} outside [0, 1)",
                self.eccentricity
            )));
        }
        let perigee = self.semi_major_axis * (1.0 - self.eccentricity);
        if perigee <= earth.radius {
            return Err(AstroError::InvalidElements(format!(
                "perigee radius {perigee:.3} km below Earth surface"
            )));
        }
        Ok(())
    }

    /// Orbital period in seconds.
    pub fn period(&self, earth: &EarthModel) -> f64 {
        2.0 * std::f64::consts::PI * (self.semi_major_axis.powi(3) / earth.mu).sqrt()
    }

    pub fn mean_motion(&self, earth: &EarthModel) -> f64 {
        (earth.mu / self.semi_major_axis.powi(3)).sqrt()
    }

    /// Mean anomaly at epoch (rad) derived from the stored true anomaly.
    pub fn mean_anomaly_at_epoch(&self) -> f64 {
        let e = self.eccentricity;
        let nu = self.true_anomaly_at_epoch.to_radians();
        let ecc_anom = ((1.0 - e * e).sqrt() * nu.sin()).atan2(e + nu.cos());
        ecc_anom - e * ecc_anom.sin()
    }

    /// Perifocal-to-inertial rotation `R3(raan) * R1(i) * R3(argp)`.
    pub fn perifocal_to_eci(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.raan.to_radians())
            * Rotation3::from_axis_angle(&Vec3::x_axis(), self.inclination.to_radians())
            * Rotation3::from_axis_angle(&Vec3::z_axis(), self.arg_perigee.to_radians())
    }
}

/// Position (km) and velocity (km/s) in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVectorECI {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl StateVectorECI {
    /// Specific orbital energy (km^2/s^2).
    pub fn specific_energy(&self, earth: &EarthModel) -> f64 {
        0.5 * self.velocity.norm_squared() - earth.mu / self.position.norm()
    }
}

/// Geodetic coordinates of a ground target, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticTarget {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeodeticTarget {
    /// Unit vector of the target in the Earth-fixed frame.
    pub fn ecef_unit(&self) -> Vec3 {
        let (lat, lon) = (self.latitude.to_radians(), self.longitude.to_radians());
        Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }
}

/// Solves `M = E - e sin E` for `E`. Newton first, bisection if Newton stalls.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64, AstroError> {
    if !(0.0..1.0).contains(&e) || !mean_anomaly.is_finite() {
        return Err(AstroError::KeplerNonConvergence {
            mean_anomaly,
            eccentricity: e,
        });
    }
    let m = mean_anomaly.rem_euclid(2.0 * std::f64::consts::PI);
    let mut ecc = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..KEPLER_MAX_NEWTON {
        let f = ecc - e * ecc.sin() - m;
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() < KEPLER_TOL {
            return Ok(ecc);
        }
    }

    // E - M = e sin E, so the root is bracketed by [M - e, M + e].
    let (mut lo, mut hi) = (m - e, m + e);
    for _ in 0..KEPLER_MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if mid - e * mid.sin() - m > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < KEPLER_TOL {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(AstroError::KeplerNonConvergence {
        mean_anomaly,
        eccentricity: e,
    })
}

/// Closed-form two-body propagation to `t` seconds past epoch.
pub fn propagate_orbit(
    elements: &OrbitalElements,
    t: f64,
    earth: &EarthModel,
) -> Result<StateVectorECI, AstroError> {
    let a = elements.semi_major_axis;
    let e = elements.eccentricity;
    let n = elements.mean_motion(earth);
    let mean = elements.mean_anomaly_at_epoch() + n * t;
    let ecc = solve_kepler(mean, e)?;
    let (sin_e, cos_e) = ecc.sin_cos();
    let root = (1.0 - e * e).sqrt();
    let denom = 1.0 - e * cos_e;

    let r_pf = Vec3::new(a * (cos_e - e), a * root * sin_e, 0.0);
    let v_pf = Vec3::new(-a * n * sin_e / denom, a * n * root * cos_e / denom, 0.0);
    let rot = elements.perifocal_to_eci();
    Ok(StateVectorECI {
        position: rot * r_pf,
        velocity: rot * v_pf,
    })
}

/// Inertial position of a ground target (km) at `t` seconds past epoch.
pub fn target_position_eci(target: &GeodeticTarget, t: f64, earth: &EarthModel) -> Vec3 {
    let lat = target.latitude.to_radians();
    let lon = target.longitude.to_radians() + earth.rotation_angle(t);
    earth.radius * Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

/// Inertial velocity of a ground target (km/s).
pub fn target_velocity_eci(target_pos: &Vec3, earth: &EarthModel) -> Vec3 {
    Vec3::new(0.0, 0.0, earth.rotation_rate).cross(target_pos)
}

/// True when the satellite is on or above the target's local horizon.
pub fn visibility_check(sat_pos: &Vec3, target_pos: &Vec3, _earth: &EarthModel) -> bool {
    (sat_pos - target_pos).dot(target_pos) >= 0.0
}

/// Cylindrical umbra test.
pub fn eclipse_check(sat_pos: &Vec3, _t: f64, earth: &EarthModel) -> bool {
    let sun = earth.sun_dir();
    let along = sat_pos.dot(&sun);
    if along >= 0.0 {
        return false;
    }
    let lateral = sat_pos - along * sun;
    lateral.norm() < earth.radius
}
