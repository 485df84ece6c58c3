//! Satellite asset sampling, validated asset pools, scenario generation and
//! split construction.

use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::astro::{EarthModel, GeodeticTarget, OrbitalElements, Vec3};
use crate::attitude::{validate_asset, ControlGains, ReactionWheelSet, SlewTestSpec};
use crate::error::GenError;
use crate::rng::{child_seed, rng_from_seed, SimRng};

/// Uniform sampling ranges for satellite assets.
pub mod ranges {
    pub const INERTIA: (f64, f64) = (50.0, 200.0);
    pub const MASS: (f64, f64) = (50.0, 200.0);
    pub const PANEL_DIRECTION: [(f64, f64); 3] = [(-180.0, 180.0), (-90.0, 90.0), (-180.0, 180.0)];
    pub const PANEL_AREA: (f64, f64) = (5.0, 10.0);
    pub const HALF_FOV: (f64, f64) = (0.5, 1.5);
    pub const SENSOR_POWER: (f64, f64) = (2.0, 8.0);
    pub const BATTERY_MAH: (f64, f64) = (8000.0, 30000.0);
    pub const RW_MAX_MOMENTUM: (f64, f64) = (10.0, 100.0);
    pub const RW_DIRECTION: [(f64, f64); 3] = PANEL_DIRECTION;
    pub const RW_POWER: (f64, f64) = (0.0, 22.0);
    pub const RW_EFFICIENCY: (f64, f64) = (0.1, 0.5);
    pub const GAIN_K: (f64, f64) = (2.0, 5.0);
    pub const GAIN_KI: (f64, f64) = (0.0, 0.1);
    pub const GAIN_P: (f64, f64) = (6.0, 12.0);
    pub const INTEGRAL_LIMIT: (f64, f64) = (0.0, 0.5);
    pub const TRUE_ANOMALY: (f64, f64) = (0.0, 360.0);
    pub const ECCENTRICITY: (f64, f64) = (0.0, 0.005);
    pub const SEMI_MAJOR_AXIS: (f64, f64) = (6800.0, 8000.0);
    pub const INCLINATION: (f64, f64) = (0.0, 180.0);
    pub const RAAN: (f64, f64) = (0.0, 360.0);
    pub const ARG_PERIGEE: (f64, f64) = (0.0, 360.0);

    /// Task ranges.
    pub const REQUIRED_DURATION: (f64, f64) = (15.0, 60.0);
    pub const LATITUDE: (f64, f64) = (-90.0, 90.0);
    pub const LONGITUDE: (f64, f64) = (-180.0, 180.0);
}

fn uniform(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteAsset {
    pub asset_id: String,
    /// Diagonal inertia `inertia_scale * I3` (kg m^2).
    pub inertia_scale: f64,
    pub mass: f64,
    /// Panel normal as (azimuth, elevation, roll) in degrees, body frame.
    pub panel_direction: [f64; 3],
    pub panel_area: f64,
    /// Sensor half field of view (rad).
    pub half_fov: f64,
    pub sensor_power: f64,
    pub battery_capacity: f64,
    pub rw_max_momentum: f64,
    /// Wheel triad orientation (yaw, pitch, roll) in degrees.
    pub rw_direction: [f64; 3],
    pub rw_power_rating: f64,
    pub rw_efficiency: f64,
    pub gains: ControlGains,
    pub elements: OrbitalElements,
}

impl SatelliteAsset {
    pub fn reaction_wheels(&self) -> ReactionWheelSet {
        ReactionWheelSet::from_direction(
            self.rw_direction,
            self.rw_max_momentum,
            self.rw_power_rating,
            self.rw_efficiency,
        )
    }

    /// Battery capacity in Wh at the given bus voltage.
    pub fn battery_capacity_wh(&self, bus_voltage: f64) -> f64 {
        self.battery_capacity * bus_voltage / 1000.0
    }

    /// Unit panel normal in the body frame (roll is irrelevant for a flat panel).
    pub fn panel_normal_body(&self) -> Vec3 {
        let az = self.panel_direction[0].to_radians();
        let el = self.panel_direction[1].to_radians();
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

/// Derivative gain from the proportional gain: critical-damping heuristic
/// `2 sqrt(k I)` clipped to the admissible range.
pub fn empirical_rate_gain(k: f64, inertia: f64) -> f64 {
    (2.0 * (k * inertia).sqrt()).clamp(ranges::GAIN_P.0, ranges::GAIN_P.1)
}

/// Draws one candidate asset. The caller is responsible for validation.
pub fn sample_asset(rng: &mut SimRng, asset_id: String) -> SatelliteAsset {
    let inertia_scale = uniform(rng, ranges::INERTIA);
    let mass = uniform(rng, ranges::MASS);
    let panel_direction = ranges::PANEL_DIRECTION.map(|r| uniform(rng, r));
    let panel_area = uniform(rng, ranges::PANEL_AREA);
    let half_fov = uniform(rng, ranges::HALF_FOV);
    let sensor_power = uniform(rng, ranges::SENSOR_POWER);
    let battery_capacity = uniform(rng, ranges::BATTERY_MAH);
    let rw_max_momentum = uniform(rng, ranges::RW_MAX_MOMENTUM);
    let rw_direction = ranges::RW_DIRECTION.map(|r| uniform(rng, r));
    let rw_power_rating = uniform(rng, ranges::RW_POWER);
    let rw_efficiency = uniform(rng, ranges::RW_EFFICIENCY);
    let k = uniform(rng, ranges::GAIN_K);
    let gains = ControlGains {
        k,
        ki: uniform(rng, ranges::GAIN_KI),
        p: empirical_rate_gain(k, inertia_scale),
        integral_limit: uniform(rng, ranges::INTEGRAL_LIMIT),
    };
    let elements = OrbitalElements {
        semi_major_axis: uniform(rng, ranges::SEMI_MAJOR_AXIS),
        eccentricity: uniform(rng, ranges::ECCENTRICITY),
        inclination: uniform(rng, ranges::INCLINATION),
        raan: uniform(rng, ranges::RAAN),
        arg_perigee: uniform(rng, ranges::ARG_PERIGEE),
        true_anomaly_at_epoch: uniform(rng, ranges::TRUE_ANOMALY),
    };
    SatelliteAsset {
        asset_id,
        inertia_scale,
        mass,
        panel_direction,
        panel_area,
        half_fov,
        sensor_power,
        battery_capacity,
        rw_max_momentum,
        rw_direction,
        rw_power_rating,
        rw_efficiency,
        gains,
        elements,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetPool {
    pub assets: Vec<SatelliteAsset>,
    pub attempts: usize,
    pub rejected: usize,
}

impl AssetPool {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempts as f64
        }
    }
}

/// Sample/validate loop until `count` assets pass the slew test.
pub fn generate_asset_pool(
    rng: &mut SimRng,
    count: usize,
    id_prefix: &str,
    test: &SlewTestSpec,
) -> Result<AssetPool, GenError> {
    let max_attempts = 50 * count + 100;
    let mut assets = Vec::with_capacity(count);
    let mut attempts = 0;
    while assets.len() < count {
        if attempts >= max_attempts {
            return Err(GenError::IterationCap {
                attempts,
                accepted: assets.len(),
            });
        }
        attempts += 1;
        let candidate = sample_asset(rng, format!("{id_prefix}-{:05}", assets.len()));
        if validate_asset(&candidate, test).passed {
            assets.push(candidate);
        }
    }
    Ok(AssetPool {
        rejected: attempts - assets.len(),
        assets,
        attempts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: usize,
    /// Minimum consecutive observation time (s).
    pub required_duration: f64,
    pub release: f64,
    pub due: f64,
    pub target: GeodeticTarget,
}

/// One scheduling instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub seed: u64,
    /// Number of timesteps.
    pub horizon: usize,
    /// Timestep length (s).
    pub dt: f64,
    pub satellites: Vec<SatelliteAsset>,
    /// Initial state of charge per satellite, in [0, 1].
    pub initial_battery_fraction: Vec<f64>,
    pub tasks: Vec<TaskSpec>,
    pub earth: EarthModel,
}

impl Scenario {
    pub fn n_sats(&self) -> usize {
        self.satellites.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn duration(&self) -> f64 {
        self.horizon as f64 * self.dt
    }
}

/// Samples a task with integer-second times and a feasible window.
///
/// `due` is resampled until `release + required_duration <= due`; `release`
/// is resampled first if no due time inside the horizon could satisfy it.
pub fn sample_task(rng: &mut SimRng, task_id: usize, horizon_s: f64) -> TaskSpec {
    let span = horizon_s.floor() as u64;
    let required_duration = rng
        .random_range(ranges::REQUIRED_DURATION.0 as u64..=ranges::REQUIRED_DURATION.1 as u64)
        as f64;
    let required_duration = required_duration.min(horizon_s.floor());
    let mut release = rng.random_range(0..=span) as f64;
    while release + required_duration > horizon_s {
        release = rng.random_range(0..=span) as f64;
    }
    let mut due = rng.random_range(0..=span) as f64;
    while release + required_duration > due {
        due = rng.random_range(0..=span) as f64;
    }
    let target = GeodeticTarget {
        latitude: uniform(rng, ranges::LATITUDE),
        longitude: uniform(rng, ranges::LONGITUDE),
    };
    TaskSpec {
        task_id,
        required_duration,
        release,
        due,
        target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioShape {
    pub n_sats: usize,
    pub n_tasks: usize,
    pub horizon: usize,
    pub dt: f64,
}

pub fn generate_scenario(
    rng: &mut SimRng,
    pool: &[SatelliteAsset],
    shape: ScenarioShape,
    scenario_id: String,
    seed: u64,
    earth: EarthModel,
) -> Result<Scenario, GenError> {
    if shape.n_sats > pool.len() {
        return Err(GenError::PoolTooSmall {
            available: pool.len(),
            requested: shape.n_sats,
        });
    }
    let mut picks = sample_indices(rng, pool.len(), shape.n_sats).into_vec();
    picks.sort_unstable();
    let satellites: Vec<_> = picks.iter().map(|&i| pool[i].clone()).collect();
    let initial_battery_fraction = (0..shape.n_sats).map(|_| rng.random_range(0.0..=1.0)).collect();
    let horizon_s = shape.horizon as f64 * shape.dt;
    let tasks = (0..shape.n_tasks)
        .map(|j| sample_task(rng, j, horizon_s))
        .collect();
    Ok(Scenario {
        scenario_id,
        seed,
        horizon: shape.horizon,
        dt: shape.dt,
        satellites,
        initial_battery_fraction,
        tasks,
        earth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitName {
    Train,
    ValSeen,
    ValUnseen,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [
        SplitName::Train,
        SplitName::ValSeen,
        SplitName::ValUnseen,
        SplitName::Test,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::ValSeen => "val-seen",
            SplitName::ValUnseen => "val-unseen",
            SplitName::Test => "test",
        }
    }
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_assets: usize,
    pub unseen_assets: usize,
    pub test_assets: usize,
    pub train_scenarios: usize,
    pub val_seen_scenarios: usize,
    pub val_unseen_scenarios: usize,
    pub test_scenarios: usize,
    pub sats_range: (usize, usize),
    pub tasks_range: (usize, usize),
    pub horizon: usize,
    pub dt: f64,
}

impl SplitSpec {
    pub fn desk() -> Self {
        Self {
            train_assets: 200,
            unseen_assets: 50,
            test_assets: 50,
            train_scenarios: 64,
            val_seen_scenarios: 8,
            val_unseen_scenarios: 8,
            test_scenarios: 8,
            sats_range: (1, 5),
            tasks_range: (10, 30),
            horizon: 3600,
            dt: 1.0,
        }
    }

    /// Full-scale split sizes.
    pub fn full() -> Self {
        Self {
            train_assets: 2907,
            unseen_assets: 500,
            test_assets: 500,
            train_scenarios: 16_218,
            val_seen_scenarios: 64,
            val_unseen_scenarios: 64,
            test_scenarios: 64,
            sats_range: (1, 50),
            tasks_range: (50, 300),
            horizon: 3600,
            dt: 1.0,
        }
    }

    pub fn total_assets(&self) -> usize {
        self.train_assets + self.unseen_assets + self.test_assets
    }

    pub fn scenario_count(&self, split: SplitName) -> usize {
        match split {
            SplitName::Train => self.train_scenarios,
            SplitName::ValSeen => self.val_seen_scenarios,
            SplitName::ValUnseen => self.val_unseen_scenarios,
            SplitName::Test => self.test_scenarios,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.sats_range.0 == 0 || self.sats_range.0 > self.sats_range.1 {
            return Err(GenError::InconsistentSplit(format!(
                "satellite range {:?}",
                self.sats_range
            )));
        }
        if self.tasks_range.0 > self.tasks_range.1 {
            return Err(GenError::InconsistentSplit(format!(
                "task range {:?}",
                self.tasks_range
            )));
        }
        let min_pool = self.train_assets.min(self.unseen_assets).min(self.test_assets);
        if min_pool < self.sats_range.1 {
            return Err(GenError::InconsistentSplit(format!(
                "smallest asset pool ({min_pool}) cannot host {} satellites",
                self.sats_range.1
            )));
        }
        if self.horizon == 0 || !(self.dt > 0.0) {
            return Err(GenError::InconsistentSplit("empty horizon".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: SplitName,
    pub asset_ids: Vec<String>,
    pub scenario_ids: Vec<String>,
    /// Seed from which each scenario's stream is derived (`child_seed`).
    pub base_seed: u64,
}

/// Partitions `asset_ids` into train / unseen / test pools and names the
/// scenarios of every split. val-seen reuses the train pool.
pub fn build_splits(
    rng: &mut SimRng,
    asset_ids: &[String],
    spec: &SplitSpec,
) -> Result<Vec<SplitManifest>, GenError> {
    spec.validate()?;
    if asset_ids.len() != spec.total_assets() {
        return Err(GenError::InconsistentSplit(format!(
            "{} assets supplied, split needs {}",
            asset_ids.len(),
            spec.total_assets()
        )));
    }
    let unique: BTreeSet<_> = asset_ids.iter().collect();
    if unique.len() != asset_ids.len() {
        return Err(GenError::InconsistentSplit("duplicate asset ids".into()));
    }
    let mut ids = asset_ids.to_vec();
    ids.shuffle(rng);
    let (train, rest) = ids.split_at(spec.train_assets);
    let (unseen, test) = rest.split_at(spec.unseen_assets);
    let pools = [train.to_vec(), train.to_vec(), unseen.to_vec(), test.to_vec()];
    Ok(SplitName::ALL
        .iter()
        .zip(pools)
        .map(|(&split, mut pool)| {
            pool.sort();
            let n = spec.scenario_count(split);
            SplitManifest {
                split,
                asset_ids: pool,
                scenario_ids: (0..n).map(|k| format!("{}-{k:05}", split.as_str())).collect(),
                base_seed: rng.random(),
            }
        })
        .collect())
}

/// Materializes the scenarios listed in a manifest. Scenario `k` uses the
/// stream `child_seed(manifest.base_seed, k)`, so any subset can be rebuilt
/// independently.
pub fn generate_split_scenarios(
    manifest: &SplitManifest,
    assets: &[SatelliteAsset],
    spec: &SplitSpec,
    earth: EarthModel,
) -> Result<Vec<Scenario>, GenError> {
    let pool: Vec<SatelliteAsset> = manifest
        .asset_ids
        .iter()
        .map(|id| {
            assets
                .iter()
                .find(|a| &a.asset_id == id)
                .cloned()
                .ok_or_else(|| GenError::InconsistentSplit(format!("unknown asset {id}")))
        })
        .collect::<Result<_, _>>()?;
    manifest
        .scenario_ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let seed = child_seed(manifest.base_seed, k as u64);
            let mut rng = rng_from_seed(seed);
            let shape = ScenarioShape {
                n_sats: rng.random_range(spec.sats_range.0..=spec.sats_range.1),
                n_tasks: rng.random_range(spec.tasks_range.0..=spec.tasks_range.1),
                horizon: spec.horizon,
                dt: spec.dt,
            };
            generate_scenario(&mut rng, &pool, shape, id.clone(), seed, earth)
        })
        .collect()
}
