//! Cross-module numeric oracles: independent computations (quadrature,
//! brute force, dense search) frozen against the implementation path.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sonotherm::acoustics::{
    directivity, focal_metrics, focus_phases, intensity_at, intensity_grid, pressure_at,
    DriveVector, GridSpec, MediumParams,
};
use sonotherm::config::Scenario;
use sonotherm::geometry::{default_unit, ArrayAssembly, ArrayUnit};

fn ref_path(name: &str) -> String {
    format!("{}/../../ref/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// J₁ via the integral representation J₁(x) = (1/π)∫₀^π cos(τ − x·sinτ) dτ,
/// Simpson quadrature. Independent of libm.
fn j1_quadrature(x: f64) -> f64 {
    let n = 2000; // even
    let h = std::f64::consts::PI / n as f64;
    let f = |tau: f64| (tau - x * tau.sin()).cos();
    let mut sum = f(0.0) + f(std::f64::consts::PI);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0 / std::f64::consts::PI
}

#[test]
fn directivity_zero_at_independently_found_bessel_root() {
    // bracket the first positive root of J₁ and bisect the quadrature
    let (mut lo, mut hi) = (3.0f64, 4.5f64);
    assert!(j1_quadrature(lo) > 0.0 && j1_quadrature(hi) < 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if j1_quadrature(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!(
        (root - 3.8317).abs() < 1e-3,
        "independent J₁ root {root} should sit near 3.8317"
    );

    // directivity at ka·sinθ = root must vanish
    let ka = 2.0 * root; // any ka > root works; pick sinθ = root/ka = 0.5
    let theta = (root / ka).asin();
    assert!(directivity(ka, theta).abs() < 1e-9);

    // and at the tabulated root value 3.8317
    let theta_q = (3.8317f64 / ka).asin();
    assert!(directivity(ka, theta_q).abs() < 1e-4);
}

#[test]
fn single_element_reciprocity_over_distance() {
    // |p| = s·e^{−αd}/d for an on-axis single element, α = 0 here
    let unit = ArrayUnit {
        origin: Vector3::zeros(),
        orientation: UnitQuaternion::identity(),
        rows: 1,
        cols: 1,
        pitch: 0.01,
        omitted_cells: vec![],
        radius: 4.5e-3,
        source_strength: 1.0,
    };
    let medium = MediumParams {
        attenuation: 0.0,
        ..MediumParams::default()
    };
    let asm = ArrayAssembly::new(vec![unit], medium).unwrap();
    let drive = DriveVector::new(vec![1.0], vec![0.0]).unwrap();
    let mut d = 0.05;
    while d <= 1.0 {
        let p = pressure_at(&asm, &medium, &drive, &Vector3::new(0.0, 0.0, d)).unwrap();
        let rel = (p.norm() - 1.0 / d).abs() / (1.0 / d);
        assert!(rel < 1e-12, "d = {d}: relative error {rel}");
        d += 0.01;
    }
}

#[test]
fn coherent_focus_beats_1000_random_phase_vectors() {
    let s = Scenario::load(ref_path("sec24.json")).unwrap();
    let focus = s.focus;
    let n = s.assembly.enabled_transducer_count();

    let drive = focus_phases(&s.assembly, &s.medium, &focus).unwrap();
    let focused = pressure_at(&s.assembly, &s.medium, &drive, &focus)
        .unwrap()
        .norm();

    // independent direct magnitude-sum oracle, no complex arithmetic
    let k = s.medium.wavenumber();
    let mut direct = 0.0;
    for t in s.assembly.enabled_transducers() {
        let diff = focus - t.position;
        let d = diff.norm();
        let theta = (t.normal.dot(&diff) / d).clamp(-1.0, 1.0).acos();
        direct +=
            t.source_strength * directivity(k * t.radius, theta) * (-s.medium.attenuation * d).exp() / d;
    }
    let rel = (focused - direct).abs() / direct;
    assert!(
        rel < 1e-9,
        "focused |p| {focused} vs direct sum {direct}: rel {rel}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..1000 {
        let phases: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        let random = DriveVector::new(vec![1.0; n], phases).unwrap();
        let p = pressure_at(&s.assembly, &s.medium, &random, &focus)
            .unwrap()
            .norm();
        assert!(
            p <= focused,
            "trial {trial}: random phases gave |p| = {p} > focused {focused}"
        );
    }
}

#[test]
fn grid_cells_match_independent_spot_checks() {
    // full 12-unit assembly on a 201×201 grid; five random cells recomputed
    // through the scalar path must agree exactly
    let s = Scenario::load(ref_path("fig1.json")).unwrap();
    assert_eq!(s.assembly.enabled_transducer_count(), 2988);
    let drive = focus_phases(&s.assembly, &s.medium, &s.focus).unwrap();
    let spec = GridSpec::plane_xy(s.focus, 201, 201, 0.5e-3, 0.5e-3);
    let grid = intensity_grid(&s.assembly, &s.medium, &drive, &spec).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let ix = rng.random_range(0..201);
        let iy = rng.random_range(0..201);
        let point = spec.cell_center(ix, iy);
        let direct = intensity_at(&s.assembly, &s.medium, &drive, &point).unwrap();
        assert_eq!(
            grid.get(ix, iy),
            direct,
            "cell ({ix}, {iy}) must equal the per-point computation"
        );
    }
}

#[test]
fn focal_peak_confirmed_by_dense_local_search() {
    let s = Scenario::load(ref_path("sec24.json")).unwrap();
    let drive = focus_phases(&s.assembly, &s.medium, &s.focus).unwrap();

    // coarse grid peak
    let spec = GridSpec::plane_xy(s.focus, 81, 81, 0.5e-3, 0.5e-3);
    let grid = intensity_grid(&s.assembly, &s.medium, &drive, &spec).unwrap();
    let metrics = focal_metrics(&grid, &s.focus).unwrap();

    // dense 0.05 mm search around the coarse peak
    let mut best = (f64::NEG_INFINITY, Vector3::zeros());
    let n = 41;
    for iy in 0..n {
        for ix in 0..n {
            let p = metrics.peak_location
                + Vector3::new(
                    (ix as f64 - (n as f64 - 1.0) / 2.0) * 0.05e-3,
                    (iy as f64 - (n as f64 - 1.0) / 2.0) * 0.05e-3,
                    0.0,
                );
            let i = intensity_at(&s.assembly, &s.medium, &drive, &p).unwrap();
            if i > best.0 {
                best = (i, p);
            }
        }
    }
    let lambda = s.medium.wavelength();
    let coarse_to_focus = (metrics.peak_location - s.focus).norm();
    let dense_to_focus = (best.1 - s.focus).norm();
    assert!(
        coarse_to_focus <= lambda / 2.0,
        "grid peak {coarse_to_focus} m from focus exceeds λ/2"
    );
    assert!(
        dense_to_focus <= lambda / 2.0,
        "dense-search peak {dense_to_focus} m from focus exceeds λ/2"
    );
    assert!(best.0 >= metrics.peak, "dense search can only improve the peak");
}

#[test]
fn default_units_offset_by_device_pitch_never_overlap() {
    let a = default_unit(Vector3::zeros(), UnitQuaternion::identity());
    let b = default_unit(Vector3::new(0.192, 0.0, 0.0), UnitQuaternion::identity());
    let ta = a.transducers();
    let tb = b.transducers();
    let mut min_d = f64::INFINITY;
    for x in &ta {
        for y in &tb {
            min_d = min_d.min((x.position - y.position).norm());
        }
    }
    // 18 rows × 10.16 mm = 182.9 mm footprint < 192 mm offset
    assert!(min_d > 0.008, "closest cross-unit elements at {min_d} m");
}
