//! Property suites over the acoustic and thermal invariants.

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

use sonotherm::acoustics::{
    focus_phases, pressure_at, DriveVector, GridSpec, MediumParams,
};
use sonotherm::acoustics::intensity_grid;
use sonotherm::geometry::{default_unit, ArrayAssembly, ArrayUnit};
use sonotherm::modulation::Envelope;
use sonotherm::thermal::{
    simulate_with_intensity, SkinModel, SolverOptions, ThermalGridSpec,
};

fn small_assembly() -> ArrayAssembly {
    // two 3×3 units, cheap enough for proptest
    let mk = |x: f64| ArrayUnit {
        origin: Vector3::new(x, -0.02, 0.0),
        orientation: UnitQuaternion::identity(),
        rows: 3,
        cols: 3,
        pitch: 0.01,
        omitted_cells: vec![],
        radius: 4.5e-3,
        source_strength: 1.0,
    };
    ArrayAssembly::new(vec![mk(-0.05), mk(0.02)], MediumParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Adding a common constant to every phase leaves |p| unchanged.
    #[test]
    fn phase_shift_invariance(
        offset in 0.0..(2.0 * std::f64::consts::PI),
        px in -0.05f64..0.05,
        py in -0.05f64..0.05,
        pz in 0.1f64..0.5,
    ) {
        let asm = small_assembly();
        let medium = *asm.medium();
        let point = Vector3::new(px, py, pz);
        let drive = focus_phases(&asm, &medium, &Vector3::new(0.0, 0.0, 0.3)).unwrap();
        let shifted = DriveVector::new(
            drive.amplitudes().to_vec(),
            drive.phases().iter().map(|p| p + offset).collect(),
        ).unwrap();
        let a = pressure_at(&asm, &medium, &drive, &point).unwrap().norm();
        let b = pressure_at(&asm, &medium, &shifted, &point).unwrap().norm();
        let denom = a.max(1e-300);
        prop_assert!(((a - b) / denom).abs() < 1e-12, "|p| changed: {a} vs {b}");
    }

    /// Coherent focusing is optimal: no random phase vector beats it at the
    /// focal point.
    #[test]
    fn focus_phases_maximize_pressure(
        seed_phases in proptest::collection::vec(0.0..(2.0 * std::f64::consts::PI), 18)
    ) {
        let asm = small_assembly();
        let medium = *asm.medium();
        let focus = Vector3::new(0.01, -0.005, 0.25);
        let best = focus_phases(&asm, &medium, &focus).unwrap();
        let p_best = pressure_at(&asm, &medium, &best, &focus).unwrap().norm();
        let random = DriveVector::new(vec![1.0; 18], seed_phases).unwrap();
        let p_rand = pressure_at(&asm, &medium, &random, &focus).unwrap().norm();
        prop_assert!(p_rand <= p_best * (1.0 + 1e-12));
    }

    /// Pressure of a union of disjoint enabled subsets is the complex sum
    /// of the parts.
    #[test]
    fn superposition_of_disjoint_subsets(
        px in -0.05f64..0.05,
        py in -0.05f64..0.05,
        pz in 0.15f64..0.5,
    ) {
        let asm = small_assembly();
        let medium = *asm.medium();
        let focus = Vector3::new(0.0, 0.0, 0.3);
        let point = Vector3::new(px, py, pz);

        let full_drive = focus_phases(&asm, &medium, &focus).unwrap();
        let p_full = pressure_at(&asm, &medium, &full_drive, &point).unwrap();

        let sub_a = asm.enable_subset(&[0]).unwrap();
        let sub_b = asm.enable_subset(&[1]).unwrap();
        let da = focus_phases(&sub_a, &medium, &focus).unwrap();
        let db = focus_phases(&sub_b, &medium, &focus).unwrap();
        let pa = pressure_at(&sub_a, &medium, &da, &point).unwrap();
        let pb = pressure_at(&sub_b, &medium, &db, &point).unwrap();

        let err = (p_full - (pa + pb)).norm();
        prop_assert!(
            err <= 1e-12 * p_full.norm().max(1e-12),
            "superposition violated: {err}"
        );
    }

    /// Translating every unit origin translates every transducer position.
    #[test]
    fn rigid_translation_covariance(
        vx in -1.0f64..1.0,
        vy in -1.0f64..1.0,
        vz in -1.0f64..1.0,
    ) {
        let v = Vector3::new(vx, vy, vz);
        let unit = default_unit(Vector3::new(0.01, -0.03, 0.002), UnitQuaternion::identity());
        let mut moved = unit.clone();
        moved.origin += v;
        for (a, b) in unit.transducers().iter().zip(moved.transducers().iter()) {
            let err = (b.position - (a.position + v)).norm();
            prop_assert!(err < 1e-12, "covariance error {err}");
        }
    }

    /// Square envelopes are {0,1}-valued and periodic; duty 1 matches
    /// static everywhere.
    #[test]
    fn envelope_periodicity(t in 0.0f64..100.0, freq in 1.0f64..500.0, duty in 0.0f64..1.0) {
        let env = Envelope::Square { freq_hz: freq, duty };
        let v = env.value(t);
        prop_assert!(v == 0.0 || v == 1.0);

        // avoid sampling within float-rounding reach of the on/off edges
        let period = 1.0 / freq;
        let phase = (t * freq).fract();
        let near_edge = (phase - duty).abs() < 1e-9 || !(1e-9..=1.0 - 1e-9).contains(&phase);
        if !near_edge {
            prop_assert_eq!(v, env.value(t + period), "periodicity at t={}", t);
        }

        let full = Envelope::Square { freq_hz: freq, duty: 1.0 };
        prop_assert_eq!(full.value(t), Envelope::Static.value(t));
    }
}

/// Monotone heating: constant positive flux with ambient = core gives a
/// strictly increasing probe ΔT.
#[test]
fn monotone_heating_under_constant_flux() {
    let spec = ThermalGridSpec {
        nx: 9,
        ny: 9,
        nz: 40,
        dx: 2e-3,
        dy: 2e-3,
        dz: 0.1e-3,
        center: Vector3::zeros(),
    };
    let skin = SkinModel {
        ambient_t_c: 33.0,
        slab_thickness: 4e-3,
        ..SkinModel::default()
    };
    let mut values = vec![0.0; spec.nx * spec.ny];
    for (i, v) in values.iter_mut().enumerate() {
        let (ix, iy) = (i % spec.nx, i / spec.nx);
        let r2 = (ix as f64 - 4.0).powi(2) + (iy as f64 - 4.0).powi(2);
        *v = 2000.0 * (-r2 / 8.0).exp();
    }
    let intensity = sonotherm::acoustics::Grid2D {
        spec: spec.surface_spec(),
        values,
    };
    let run = simulate_with_intensity(
        &intensity,
        &Envelope::Static,
        &skin,
        &spec,
        &SolverOptions::default(),
        10.0,
        (0.0, 0.0),
        &[],
        0,
    )
    .unwrap();
    for w in run.probe_delta_t.windows(2) {
        assert!(
            w[1] > w[0],
            "probe ΔT must strictly increase: {} then {}",
            w[0],
            w[1]
        );
    }
}

/// Threshold times respect the mean-intensity ordering: an AM run can
/// never cross the warm threshold before the static run.
#[test]
fn threshold_time_monotone_in_mean_factor() {
    use sonotherm::analysis::{time_to_threshold, PerceptionModel};

    let spec = ThermalGridSpec {
        nx: 9,
        ny: 9,
        nz: 40,
        dx: 2e-3,
        dy: 2e-3,
        dz: 0.1e-3,
        center: Vector3::zeros(),
    };
    let skin = SkinModel {
        slab_thickness: 4e-3,
        absorbed_fraction: 0.4,
        ambient_t_c: 33.0,
        ..SkinModel::default()
    };
    let intensity = sonotherm::acoustics::Grid2D {
        spec: spec.surface_spec(),
        values: vec![1500.0; spec.nx * spec.ny],
    };
    let mut t_last = 0.0;
    for duty in [1.0, 0.7, 0.4, 0.2] {
        let env = if duty == 1.0 {
            Envelope::Static
        } else {
            Envelope::Square {
                freq_hz: 50.0,
                duty,
            }
        };
        let run = simulate_with_intensity(
            &intensity,
            &env,
            &skin,
            &spec,
            &SolverOptions::default(),
            10.0,
            (0.0, 0.0),
            &[],
            0,
        )
        .unwrap();
        let t = time_to_threshold(&run, &PerceptionModel::default())
            .expect("all duties heat past 0.2 °C within 10 s here");
        assert!(
            t >= t_last,
            "duty {duty}: threshold at {t} s crossed before the higher-duty run ({t_last} s)"
        );
        t_last = t;
    }
}

/// Disabled units contribute nothing: intensity fields match an assembly
/// with those units deleted, bitwise.
#[test]
fn disabled_units_match_deleted_units_bitwise_in_fields() {
    let asm = small_assembly();
    let medium = *asm.medium();
    let focus = Vector3::new(0.0, 0.0, 0.3);
    let sub = asm.enable_subset(&[1]).unwrap();

    let only = ArrayAssembly::new(vec![asm.unit(1).clone()], medium).unwrap();
    let drive_sub = focus_phases(&sub, &medium, &focus).unwrap();
    let drive_only = focus_phases(&only, &medium, &focus).unwrap();
    assert_eq!(drive_sub.phases(), drive_only.phases());

    let spec = GridSpec::plane_xy(focus, 11, 11, 2e-3, 2e-3);
    let a = intensity_grid(&sub, &medium, &drive_sub, &spec).unwrap();
    let b = intensity_grid(&only, &medium, &drive_only, &spec).unwrap();
    assert_eq!(a.values, b.values, "fields must be bitwise identical");
}
