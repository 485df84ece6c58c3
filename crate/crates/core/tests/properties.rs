use proptest::prelude::*;

use aeos_core::astro::{propagate_orbit, solve_kepler, EarthModel, OrbitalElements, Vec3};
use aeos_core::attitude::MrpAttitude;
use aeos_core::sim::{update_power, AssignmentVector, PowerInputs};

fn elements() -> impl Strategy<Value = OrbitalElements> {
    (6900.0f64..8000.0, 0.0f64..0.05, 0.0f64..180.0, 0.0f64..360.0, 0.0f64..360.0, 0.0f64..360.0).prop_map(
        |(a, e, i, raan, argp, nu)| OrbitalElements {
            semi_major_axis: a,
            eccentricity: e,
            inclination: i,
            raan,
            arg_perigee: argp,
            true_anomaly_at_epoch: nu,
        },
    )
}

proptest! {
    #[test]
    fn kepler_residual_is_tiny(m in -20.0f64..20.0, e in 0.0f64..0.95) {
        let ecc = solve_kepler(m, e).unwrap();
        let r = ecc - e * ecc.sin() - m;
        // E comes back reduced to one revolution.
        prop_assert!(r.sin().abs() < 1e-10 && r.cos() > 0.0);
    }

    #[test]
    fn propagation_conserves_energy_and_momentum(el in elements(), t in 0.0f64..20_000.0) {
        let earth = EarthModel::default();
        let s0 = propagate_orbit(&el, 0.0, &earth).unwrap();
        let s1 = propagate_orbit(&el, t, &earth).unwrap();
        let e0 = s0.specific_energy(&earth);
        prop_assert!((s1.specific_energy(&earth) - e0).abs() <= 1e-10 * e0.abs());
        let h0 = s0.position.cross(&s0.velocity);
        let h1 = s1.position.cross(&s1.velocity);
        prop_assert!((h1 - h0).norm() <= 1e-9 * h0.norm());
        let r = s1.position.norm();
        prop_assert!(r >= el.semi_major_axis * (1.0 - el.eccentricity) - 1e-6);
        prop_assert!(r <= el.semi_major_axis * (1.0 + el.eccentricity) + 1e-6);
    }

    #[test]
    fn mrp_dcm_is_a_rotation(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let m = MrpAttitude::new(Vec3::new(x, y, z));
        let c = m.dcm();
        prop_assert!((c.transpose() * c).is_identity(1e-10));
        prop_assert!((c.determinant() - 1.0).abs() < 1e-10);
        prop_assert!((m.shadow().dcm() - c).norm() < 1e-10);
        prop_assert!(m.canonical().sigma.norm() <= 1.0 + 1e-12);
        prop_assert!((m.canonical().dcm() - c).norm() < 1e-10);
    }

    #[test]
    fn battery_stays_in_range(
        energy in 0.0f64..100.0,
        cap in 1.0f64..100.0,
        wheel in 0.0f64..50.0,
        sensor_on: bool,
        sensor in 0.0f64..30.0,
        in_sun: bool,
        nx in -1.0f64..1.0,
        ny in -1.0f64..1.0,
    ) {
        let normal = Vec3::new(nx, ny, 0.5).normalize();
        let p = PowerInputs {
            battery_energy: energy.min(cap),
            capacity_wh: cap,
            wheel_power: wheel,
            sensor_on,
            sensor_power: sensor,
            dt: 1.0,
            in_sun,
            sun_dir: Vec3::x(),
            panel_normal_inertial: normal,
            panel_area: 1.0,
            panel_efficiency: 0.3,
            solar_flux: 1361.0,
        };
        let next = update_power(&p);
        prop_assert!((0.0..=cap).contains(&next));
        if !in_sun && (wheel > 0.0 || (sensor_on && sensor > 0.0)) {
            prop_assert!(next <= p.battery_energy);
        }
    }

    #[test]
    fn assignment_validation(v in proptest::collection::vec(0usize..8, 1..6), n_tasks in 0usize..7) {
        let a = AssignmentVector(v.clone());
        let ok = a.validate(v.len(), n_tasks).is_ok();
        prop_assert_eq!(ok, v.iter().all(|&x| x <= n_tasks));
        prop_assert!(a.validate(v.len() + 1, n_tasks).is_err());
        for (i, &x) in v.iter().enumerate() {
            prop_assert_eq!(a.task_of(i), x.checked_sub(1));
        }
    }
}
