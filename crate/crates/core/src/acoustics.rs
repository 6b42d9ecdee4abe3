//! Acoustic field synthesis and evaluation.
//!
//! Each transducer is modelled as a far-field baffled piston: its complex
//! pressure contribution at a point r is
//!
//! ```text
//! p_i(r) = a_i · s_i · D(θ_i) · exp(−α·d_i) · exp(j(k·d_i + φ_i)) / d_i
//! ```
//!
//! with drive amplitude `a_i ∈ [0,1]`, source strength `s_i` (Pa·m), piston
//! directivity `D(θ) = 2·J₁(ka·sinθ)/(ka·sinθ)`, amplitude attenuation `α`
//! (Np/m) and wavenumber `k = 2πf/c`. The total field is the complex sum
//! over all enabled transducers, in ascending transducer order (that order
//! is part of the reproducibility contract).
//!
//! Time-averaged intensity uses the plane-wave relation `I = |p|²/(2ρc)`,
//! a good approximation near a focus.

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ArrayAssembly;

/// Propagation medium (ambient air by default).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MediumParams {
    /// Speed of sound (m/s).
    pub sound_speed: f64,
    /// Density (kg/m³).
    pub density: f64,
    /// Amplitude attenuation at the carrier frequency (Np/m).
    pub attenuation: f64,
    /// Carrier frequency (Hz).
    pub frequency: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        MediumParams {
            sound_speed: 343.0,
            density: 1.204,
            attenuation: 0.12,
            frequency: 40e3,
        }
    }
}

impl MediumParams {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency / self.sound_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.frequency
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v, positive) in [
            ("medium.sound_speed", self.sound_speed, true),
            ("medium.density", self.density, true),
            ("medium.frequency", self.frequency, true),
            ("medium.attenuation", self.attenuation, false),
        ] {
            if !v.is_finite() || (positive && v <= 0.0) || (!positive && v < 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be {} and finite, got {v}", if positive { "> 0" } else { ">= 0" }),
                ));
            }
        }
        Ok(())
    }
}

/// Per-transducer drive: amplitude scale in [0,1] and phase in [0, 2π).
/// Entries are aligned with [`ArrayAssembly::enabled_transducers`].
#[derive(Debug, Clone, PartialEq)]
pub struct DriveVector {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl DriveVector {
    pub fn new(amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != phases.len() {
            return Err(Error::Acoustics(format!(
                "amplitude/phase length mismatch: {} vs {}",
                amplitudes.len(),
                phases.len()
            )));
        }
        for (i, &a) in amplitudes.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Acoustics(format!(
                    "amplitude[{i}] = {a} outside [0, 1]"
                )));
            }
        }
        let phases = phases
            .into_iter()
            .map(|p| p.rem_euclid(2.0 * std::f64::consts::PI))
            .collect();
        Ok(DriveVector { amplitudes, phases })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Same phases with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.amplitudes.iter().map(|a| a * factor).collect(),
            self.phases.clone(),
        )
    }
}

/// Piston directivity `D = 2·J₁(x)/x` with `x = ka·sinθ`, continuously
/// extended to `D = 1` at `x = 0`.
pub fn directivity(ka: f64, theta: f64) -> f64 {
    debug_assert!(ka > 0.0, "ka must be positive");
    let x = ka * theta.sin();
    two_j1_over_x(x)
}

fn two_j1_over_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-8 {
        // J₁(x) = x/2 − x³/16 + O(x⁵) ⇒ 2J₁(x)/x = 1 − x²/8 + O(x⁴)
        return 1.0 - x * x / 8.0;
    }
    2.0 * libm::j1(ax) / ax
}

/// Single-focus phase synthesis: `φ_i = (−k·d_i) mod 2π` so that every
/// enabled element arrives in phase at `focal_point`; all amplitudes 1.
pub fn focus_phases(
    assembly: &ArrayAssembly,
    medium: &MediumParams,
    focal_point: &Vector3<f64>,
) -> Result<DriveVector> {
    let k = medium.wavenumber();
    let n = assembly.enabled_transducer_count();
    let mut phases = Vec::with_capacity(n);
    for (i, t) in assembly.enabled_transducers().enumerate() {
        let d = (focal_point - t.position).norm();
        if d < t.radius {
            return Err(Error::Acoustics(format!(
                "focal point is inside element {i} (distance {d:.3e} m < radius {:.3e} m)",
                t.radius
            )));
        }
        phases.push((-k * d).rem_euclid(2.0 * std::f64::consts::PI));
    }
    DriveVector::new(vec![1.0; n], phases)
}

/// Complex pressure (Pa) at `point`; superposition over enabled transducers
/// in ascending order.
pub fn pressure_at(
    assembly: &ArrayAssembly,
    medium: &MediumParams,
    drive: &DriveVector,
    point: &Vector3<f64>,
) -> Result<Complex64> {
    check_drive_len(assembly, drive)?;
    let k = medium.wavenumber();
    let alpha = medium.attenuation;
    let mut sum = Complex64::new(0.0, 0.0);
    for ((t, &a), &phi) in assembly
        .enabled_transducers()
        .zip(drive.amplitudes())
        .zip(drive.phases())
    {
        if a == 0.0 {
            continue;
        }
        let diff = point - t.position;
        let d = diff.norm();
        if d < 1e-12 {
            return Err(Error::Acoustics(
                "evaluation point coincides with a transducer position".into(),
            ));
        }
        let ka = k * t.radius;
        let cos_theta = (t.normal.dot(&diff) / d).clamp(-1.0, 1.0);
        let theta = cos_theta.acos();
        let magnitude = a * t.source_strength * directivity(ka, theta) * (-alpha * d).exp() / d;
        sum += Complex64::from_polar(magnitude, k * d + phi);
    }
    Ok(sum)
}

/// Time-averaged intensity magnitude (W/m²): `I = |p|² / (2ρc)`.
pub fn intensity_at(
    assembly: &ArrayAssembly,
    medium: &MediumParams,
    drive: &DriveVector,
    point: &Vector3<f64>,
) -> Result<f64> {
    let p = pressure_at(assembly, medium, drive, point)?;
    Ok(p.norm_sqr() / (2.0 * medium.density * medium.sound_speed))
}

fn check_drive_len(assembly: &ArrayAssembly, drive: &DriveVector) -> Result<()> {
    let n = assembly.enabled_transducer_count();
    if drive.len() != n {
        return Err(Error::Acoustics(format!(
            "drive vector length {} != enabled transducer count {n}",
            drive.len()
        )));
    }
    Ok(())
}

/// Planar sampling grid. Cell `(ix, iy)` center is
/// `origin + (ix − (nx−1)/2)·dx·u + (iy − (ny−1)/2)·dy·v`,
/// i.e. the grid is centered on `origin`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GridSpec {
    pub origin: Vector3<f64>,
    pub axis_u: Vector3<f64>,
    pub axis_v: Vector3<f64>,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl GridSpec {
    /// Axis-aligned grid in the z = `origin.z` plane.
    pub fn plane_xy(origin: Vector3<f64>, nx: usize, ny: usize, dx: f64, dy: f64) -> Self {
        GridSpec {
            origin,
            axis_u: Vector3::x(),
            axis_v: Vector3::y(),
            nx,
            ny,
            dx,
            dy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 1 || self.ny < 1 {
            return Err(Error::Acoustics("grid counts must be >= 1".into()));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return Err(Error::Acoustics("grid spacings must be > 0".into()));
        }
        if (self.axis_u.norm() - 1.0).abs() > 1e-9
            || (self.axis_v.norm() - 1.0).abs() > 1e-9
            || self.axis_u.dot(&self.axis_v).abs() > 1e-9
        {
            return Err(Error::Acoustics("grid axes must be orthonormal".into()));
        }
        Ok(())
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vector3<f64> {
        let ox = (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.dx;
        let oy = (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.dy;
        self.origin + ox * self.axis_u + oy * self.axis_v
    }

    /// In-plane offsets of a cell center relative to the grid origin.
    pub fn cell_offsets(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.dx,
            (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.dy,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when two specs describe the same sampling within `tol` (m).
    pub fn matches(&self, other: &GridSpec, tol: f64) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.dx - other.dx).abs() <= tol
            && (self.dy - other.dy).abs() <= tol
            && (self.origin - other.origin).norm() <= tol
            && (self.axis_u - other.axis_u).norm() <= tol
            && (self.axis_v - other.axis_v).norm() <= tol
    }
}

/// Values sampled on a [`GridSpec`], row-major (`iy·nx + ix`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    pub spec: GridSpec,
    pub values: Vec<T>,
}

impl<T: Copy> Grid2D<T> {
    pub fn get(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.spec.nx + ix]
    }
}

pub type PressureGrid = Grid2D<Complex64>;
pub type ScalarGrid = Grid2D<f64>;

/// Complex pressure evaluated independently at every cell center.
pub fn pressure_grid(
    assembly: &ArrayAssembly,
    medium: &MediumParams,
    drive: &DriveVector,
    spec: &GridSpec,
) -> Result<PressureGrid> {
    spec.validate()?;
    check_drive_len(assembly, drive)?;
    let values = par_eval(spec, |point| pressure_at(assembly, medium, drive, &point))?;
    Ok(Grid2D {
        spec: spec.clone(),
        values,
    })
}

/// Intensity evaluated independently at every cell center.
pub fn intensity_grid(
    assembly: &ArrayAssembly,
    medium: &MediumParams,
    drive: &DriveVector,
    spec: &GridSpec,
) -> Result<ScalarGrid> {
    spec.validate()?;
    check_drive_len(assembly, drive)?;
    let values = par_eval(spec, |point| intensity_at(assembly, medium, drive, &point))?;
    Ok(Grid2D {
        spec: spec.clone(),
        values,
    })
}

fn par_eval<T: Send>(
    spec: &GridSpec,
    f: impl Fn(Vector3<f64>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % spec.nx, i / spec.nx);
            f(spec.cell_center(ix, iy)).map_err(|e| match e {
                Error::Acoustics(msg) => Error::Acoustics(format!("cell ({ix}, {iy}): {msg}")),
                other => other,
            })
        })
        .collect()
}

/// Focus quality metrics from an intensity grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FocalMetrics {
    /// Peak cell intensity (W/m²).
    pub peak: f64,
    /// Peak cell index.
    pub peak_cell: (usize, usize),
    /// World position of the peak cell center (m).
    pub peak_location: Vector3<f64>,
    /// Mean of the u- and v-axis extents of the contiguous region around
    /// the peak with `I ≥ peak/4` (−6 dB in pressure), in meters.
    pub width_6db: f64,
}

/// Compute [`FocalMetrics`] for a grid whose plane contains `focus`.
pub fn focal_metrics(grid: &ScalarGrid, focus: &Vector3<f64>) -> Result<FocalMetrics> {
    let spec = &grid.spec;
    spec.validate()?;
    let plane_normal = spec.axis_u.cross(&spec.axis_v);
    let off_plane = (focus - spec.origin).dot(&plane_normal).abs();
    if off_plane > 1e-6 {
        return Err(Error::GridMismatch(format!(
            "focus is {off_plane:.3e} m off the grid plane"
        )));
    }

    let (imax, &peak) = grid
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("intensity values are finite"))
        .ok_or_else(|| Error::Acoustics("empty grid".into()))?;
    let peak_cell = (imax % spec.nx, imax / spec.nx);
    if peak_cell.0 == 0
        || peak_cell.0 == spec.nx - 1
        || peak_cell.1 == 0
        || peak_cell.1 == spec.ny - 1
    {
        return Err(Error::Acoustics(format!(
            "peak on grid boundary at cell {peak_cell:?}: grid too small for focal metrics"
        )));
    }

    let wu = contour_extent_u(grid, peak_cell, 0.25 * peak)? as f64 * spec.dx;
    let wv = contour_extent_v(grid, peak_cell, 0.25 * peak)? as f64 * spec.dy;
    Ok(FocalMetrics {
        peak,
        peak_cell,
        peak_location: spec.cell_center(peak_cell.0, peak_cell.1),
        width_6db: 0.5 * (wu + wv),
    })
}

/// Number of contiguous cells with `value ≥ threshold` through `cell` along
/// the u axis (the cell itself included). Errors if the run reaches the
/// grid boundary, since the true extent would be clipped.
pub fn contour_extent_u(grid: &ScalarGrid, cell: (usize, usize), threshold: f64) -> Result<usize> {
    contour_extent(grid.spec.nx, cell.0, |i| grid.get(i, cell.1), threshold)
}

/// Same as [`contour_extent_u`] along the v axis.
pub fn contour_extent_v(grid: &ScalarGrid, cell: (usize, usize), threshold: f64) -> Result<usize> {
    contour_extent(grid.spec.ny, cell.1, |i| grid.get(cell.0, i), threshold)
}

fn contour_extent(
    n: usize,
    start: usize,
    value: impl Fn(usize) -> f64,
    threshold: f64,
) -> Result<usize> {
    if value(start) < threshold {
        return Err(Error::Acoustics(
            "contour start cell is below the threshold".into(),
        ));
    }
    let mut lo = start;
    while lo > 0 && value(lo - 1) >= threshold {
        lo -= 1;
    }
    let mut hi = start;
    while hi + 1 < n && value(hi + 1) >= threshold {
        hi += 1;
    }
    if lo == 0 || hi == n - 1 {
        return Err(Error::Acoustics(
            "contour region touches the grid boundary: grid too small".into(),
        ));
    }
    Ok(hi - lo + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_unit, ArrayUnit};
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use std::f64::consts::PI;

    fn single_element_assembly(alpha: f64) -> ArrayAssembly {
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
            attenuation: alpha,
            ..MediumParams::default()
        };
        ArrayAssembly::new(vec![unit], medium).unwrap()
    }

    #[test]
    fn directivity_limits_and_symmetry() {
        assert_eq!(directivity(3.0, 0.0), 1.0);
        for &theta in &[0.1, 0.4, 1.0, 1.5] {
            assert_relative_eq!(
                directivity(3.0, theta),
                directivity(3.0, -theta),
                epsilon = 1e-15
            );
        }
        // smooth across the series/ratio switch point
        let d_lo = two_j1_over_x(0.99e-8);
        let d_hi = two_j1_over_x(1.01e-8);
        assert!((d_lo - d_hi).abs() < 1e-12);
    }

    #[test]
    fn on_axis_single_element_magnitude() {
        // |p| = s/d for a = 1, α = 0, D(0) = 1
        let asm = single_element_assembly(0.0);
        let drive = DriveVector::new(vec![1.0], vec![0.0]).unwrap();
        let p = pressure_at(
            &asm,
            asm.medium(),
            &drive,
            &Vector3::new(0.0, 0.0, 0.296),
        )
        .unwrap();
        assert_relative_eq!(p.norm(), 1.0 / 0.296, max_relative = 1e-12);
    }

    #[test]
    fn intensity_from_known_pressure() {
        // |p| = 1/0.296 Pa in default air ⇒ I ≈ 0.01382 W/m²
        let asm = single_element_assembly(0.0);
        let drive = DriveVector::new(vec![1.0], vec![0.0]).unwrap();
        let i = intensity_at(
            &asm,
            asm.medium(),
            &drive,
            &Vector3::new(0.0, 0.0, 0.296),
        )
        .unwrap();
        let expect = (1.0f64 / 0.296).powi(2) / (2.0 * 1.204 * 343.0);
        assert_relative_eq!(i, expect, max_relative = 1e-12);
        assert_relative_eq!(i, 0.01382, max_relative = 1e-3);
    }

    #[test]
    fn zero_drive_gives_zero_pressure() {
        let asm = single_element_assembly(0.12);
        let drive = DriveVector::new(vec![0.0], vec![1.0]).unwrap();
        let p = pressure_at(&asm, asm.medium(), &drive, &Vector3::new(0.0, 0.0, 0.3)).unwrap();
        assert_eq!(p, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn quadratic_intensity_scaling() {
        let asm = single_element_assembly(0.12);
        let point = Vector3::new(0.01, -0.02, 0.25);
        let full = DriveVector::new(vec![1.0], vec![0.3]).unwrap();
        let half = full.scaled(0.5).unwrap();
        let i_full = intensity_at(&asm, asm.medium(), &full, &point).unwrap();
        let i_half = intensity_at(&asm, asm.medium(), &half, &point).unwrap();
        assert_relative_eq!(i_half, i_full / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn attenuation_strictly_decreases_pressure() {
        let point = Vector3::new(0.0, 0.0, 0.296);
        let drive = DriveVector::new(vec![1.0], vec![0.0]).unwrap();
        let mut last = f64::INFINITY;
        for &alpha in &[0.0, 0.06, 0.12, 0.5, 2.0] {
            let asm = single_element_assembly(alpha);
            let p = pressure_at(&asm, asm.medium(), &drive, &point).unwrap();
            assert!(p.norm() < last, "alpha={alpha}: |p| must strictly decrease");
            last = p.norm();
        }
    }

    #[test]
    fn focus_phase_of_integer_wavelength_distance_is_zero() {
        let medium = MediumParams::default();
        let lambda = medium.wavelength();
        let unit = ArrayUnit {
            origin: Vector3::new(0.0, 0.0, 0.0),
            orientation: UnitQuaternion::identity(),
            rows: 1,
            cols: 1,
            pitch: 0.01,
            omitted_cells: vec![],
            radius: 4.5e-3,
            source_strength: 1.0,
        };
        let asm = ArrayAssembly::new(vec![unit], medium).unwrap();
        let focus = Vector3::new(0.0, 0.0, 20.0 * lambda);
        let drive = focus_phases(&asm, &medium, &focus).unwrap();
        let phi = drive.phases()[0];
        let wrapped = phi.min(2.0 * PI - phi);
        assert!(wrapped < 1e-9, "phase must be ≡ 0 mod 2π, got {phi}");
    }

    #[test]
    fn equidistant_elements_get_identical_phases() {
        let mk = |y: f64| ArrayUnit {
            origin: Vector3::new(0.0, y, 0.0),
            orientation: UnitQuaternion::identity(),
            rows: 1,
            cols: 1,
            pitch: 0.01,
            omitted_cells: vec![],
            radius: 4.5e-3,
            source_strength: 1.0,
        };
        let medium = MediumParams::default();
        let asm = ArrayAssembly::new(vec![mk(-0.05), mk(0.05)], medium).unwrap();
        let drive = focus_phases(&asm, &medium, &Vector3::new(0.0, 0.0, 0.3)).unwrap();
        assert_eq!(drive.phases()[0], drive.phases()[1]);
    }

    #[test]
    fn focus_inside_element_is_an_error() {
        let asm = single_element_assembly(0.0);
        let err = focus_phases(&asm, asm.medium(), &Vector3::new(0.0, 0.0, 1e-3)).unwrap_err();
        assert!(err.to_string().contains("inside element"), "{err}");
    }

    #[test]
    fn grid_is_consistent_with_point_evaluation() {
        let asm = single_element_assembly(0.12);
        let drive = DriveVector::new(vec![1.0], vec![0.7]).unwrap();
        let spec = GridSpec::plane_xy(Vector3::new(0.003, -0.001, 0.25), 1, 1, 1e-3, 1e-3);
        let grid = pressure_grid(&asm, asm.medium(), &drive, &spec).unwrap();
        let p = pressure_at(&asm, asm.medium(), &drive, &spec.cell_center(0, 0)).unwrap();
        assert_eq!(grid.values[0], p, "1x1 grid must equal the point call");
    }

    #[test]
    fn field_symmetry_for_a_symmetric_unit() {
        // full 18x14 grid (no omissions), centered at the origin, focus on axis
        let pitch = DEFAULT_PITCH_FOR_TEST;
        let unit = ArrayUnit {
            origin: Vector3::new(-8.5 * pitch, -6.5 * pitch, 0.0),
            orientation: UnitQuaternion::identity(),
            rows: 18,
            cols: 14,
            pitch,
            omitted_cells: vec![],
            radius: 4.5e-3,
            source_strength: 1.0,
        };
        let medium = MediumParams::default();
        let asm = ArrayAssembly::new(vec![unit], medium).unwrap();
        let drive = focus_phases(&asm, &medium, &Vector3::new(0.0, 0.0, 0.296)).unwrap();
        let spec = GridSpec::plane_xy(Vector3::new(0.0, 0.0, 0.296), 21, 21, 2e-3, 2e-3);
        let grid = pressure_grid(&asm, &medium, &drive, &spec).unwrap();
        for iy in 0..21 {
            for ix in 0..21 {
                let a = grid.get(ix, iy).norm();
                let b = grid.get(20 - ix, 20 - iy).norm();
                let denom = a.abs().max(1e-300);
                assert!(
                    ((a - b) / denom).abs() < 1e-10,
                    "field must be symmetric under 180° rotation: {a} vs {b}"
                );
            }
        }
    }

    const DEFAULT_PITCH_FOR_TEST: f64 = 10.16e-3;

    #[test]
    fn focal_metrics_single_hot_cell() {
        let spec = GridSpec::plane_xy(Vector3::zeros(), 11, 11, 1e-3, 1e-3);
        let mut values = vec![0.0; spec.len()];
        values[5 * 11 + 5] = 42.0;
        let grid = Grid2D { spec, values };
        let m = focal_metrics(&grid, &Vector3::zeros()).unwrap();
        assert_eq!(m.peak, 42.0);
        assert_eq!(m.peak_cell, (5, 5));
        assert_relative_eq!(m.width_6db, 1e-3, max_relative = 1e-12);
        assert_relative_eq!(m.peak_location.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn focal_metrics_rejects_boundary_peak() {
        let spec = GridSpec::plane_xy(Vector3::zeros(), 5, 5, 1e-3, 1e-3);
        let mut values = vec![0.0; spec.len()];
        values[0] = 1.0;
        let grid = Grid2D { spec, values };
        assert!(focal_metrics(&grid, &Vector3::zeros()).is_err());
    }

    #[test]
    fn focal_metrics_width_is_amplitude_invariant() {
        let unit = default_unit(
            Vector3::new(-8.5 * DEFAULT_PITCH_FOR_TEST, -6.5 * DEFAULT_PITCH_FOR_TEST, 0.0),
            UnitQuaternion::identity(),
        );
        let medium = MediumParams::default();
        let asm = ArrayAssembly::new(vec![unit], medium).unwrap();
        let focus = Vector3::new(0.0, 0.0, 0.296);
        let drive = focus_phases(&asm, &medium, &focus).unwrap();
        let spec = GridSpec::plane_xy(focus, 81, 81, 1e-3, 1e-3);

        let full = intensity_grid(&asm, &medium, &drive, &spec).unwrap();
        let m_full = focal_metrics(&full, &focus).unwrap();

        let half = intensity_grid(&asm, &medium, &drive.scaled(0.5).unwrap(), &spec).unwrap();
        let m_half = focal_metrics(&half, &focus).unwrap();

        assert_relative_eq!(m_half.peak, m_full.peak / 4.0, max_relative = 1e-12);
        assert_eq!(m_half.width_6db, m_full.width_6db, "shape is scale-free");
    }
}
