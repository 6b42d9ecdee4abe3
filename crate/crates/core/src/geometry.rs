//! Transducer and array-unit geometry.
//!
//! An assembly is a set of rectangular array units, each a `rows × cols`
//! grid of circular piston elements with a fixed pitch and an optional list
//! of omitted grid cells (mounting holes). Units carry a rigid pose
//! (origin + orientation); transducer world positions and normals are
//! instantiated once at construction and are immutable afterwards.
//!
//! Transducer ordering is deterministic: unit index major, then row-major
//! within the unit (row outer, column inner), omitted cells skipped.

use nalgebra::{UnitQuaternion, Vector3};

use crate::acoustics::MediumParams;
use crate::error::{Error, Result};

/// Default unit layout: 18 × 14 grid at 10.16 mm pitch with three grid
/// cells omitted for mounting holes, i.e. 249 elements per unit.
pub const DEFAULT_UNIT_ROWS: usize = 18;
pub const DEFAULT_UNIT_COLS: usize = 14;
pub const DEFAULT_UNIT_PITCH: f64 = 10.16e-3;
pub const DEFAULT_UNIT_OMITTED: [(usize, usize); 3] = [(1, 1), (2, 1), (16, 1)];

/// Effective piston radius of one element (m).
pub const DEFAULT_ELEMENT_RADIUS: f64 = 4.5e-3;

/// Pressure amplitude one element produces at 1 m on axis at full drive
/// (Pa·m). The absolute scale is absorbed by thermal calibration.
pub const DEFAULT_SOURCE_STRENGTH: f64 = 1.0;

/// A single circular piston element in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Transducer {
    /// Center position (m).
    pub position: Vector3<f64>,
    /// Unit radiation axis.
    pub normal: Vector3<f64>,
    /// Effective piston radius (m).
    pub radius: f64,
    /// Pressure amplitude at 1 m on axis at full drive (Pa·m).
    pub source_strength: f64,
}

impl Transducer {
    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry(format!(
                "transducer normal is not unit length: |n| = {}",
                self.normal.norm()
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Geometry(format!(
                "transducer radius must be > 0, got {}",
                self.radius
            )));
        }
        if !(self.source_strength >= 0.0) {
            return Err(Error::Geometry(format!(
                "source_strength must be >= 0, got {}",
                self.source_strength
            )));
        }
        Ok(())
    }
}

/// One rectangular array unit: a grid of identical elements with a rigid pose.
///
/// Grid cell (row, col) sits at `(row·pitch, col·pitch, 0)` in the unit
/// frame; the unit normal is +z in the unit frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayUnit {
    pub origin: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    /// Grid cells with no transducer.
    pub omitted_cells: Vec<(usize, usize)>,
    pub radius: f64,
    pub source_strength: f64,
}

impl ArrayUnit {
    /// Number of transducers generated by this unit.
    pub fn transducer_count(&self) -> usize {
        self.rows * self.cols - self.omitted_cells.len()
    }

    /// Validate invariants. `path` is a config key prefix used in error
    /// messages, e.g. `units[3]`.
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.pitch > 0.0) {
            return Err(Error::config(
                format!("{path}.pitch"),
                format!("pitch must be > 0, got {}", self.pitch),
            ));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config(
                format!("{path}.rows"),
                "rows and cols must be >= 1",
            ));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config(
                format!("{path}.radius"),
                format!("radius must be > 0, got {}", self.radius),
            ));
        }
        if !(self.source_strength >= 0.0) {
            return Err(Error::config(
                format!("{path}.source_strength"),
                format!("source_strength must be >= 0, got {}", self.source_strength),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, &(r, c)) in self.omitted_cells.iter().enumerate() {
            if r >= self.rows || c >= self.cols {
                return Err(Error::config(
                    format!("{path}.omitted[{i}]"),
                    format!("cell ({r}, {c}) outside {}x{} grid", self.rows, self.cols),
                ));
            }
            if !seen.insert((r, c)) {
                return Err(Error::config(
                    format!("{path}.omitted[{i}]"),
                    format!("duplicate omitted cell ({r}, {c})"),
                ));
            }
        }
        if self.transducer_count() == 0 {
            return Err(Error::config(
                format!("{path}.omitted"),
                "unit has no transducers left",
            ));
        }
        Ok(())
    }

    /// Instantiate the unit's transducers in world coordinates, row-major.
    pub fn transducers(&self) -> Vec<Transducer> {
        let normal = self.orientation * Vector3::z();
        let mut out = Vec::with_capacity(self.transducer_count());
        for row in 0..self.rows {
            for col in 0..self.cols {
                if self.omitted_cells.contains(&(row, col)) {
                    continue;
                }
                let local = Vector3::new(row as f64 * self.pitch, col as f64 * self.pitch, 0.0);
                out.push(Transducer {
                    position: self.origin + self.orientation * local,
                    normal,
                    radius: self.radius,
                    source_strength: self.source_strength,
                });
            }
        }
        out
    }
}

/// Unit with the default layout at the given pose.
pub fn default_unit(origin: Vector3<f64>, orientation: UnitQuaternion<f64>) -> ArrayUnit {
    ArrayUnit {
        origin,
        orientation,
        rows: DEFAULT_UNIT_ROWS,
        cols: DEFAULT_UNIT_COLS,
        pitch: DEFAULT_UNIT_PITCH,
        omitted_cells: DEFAULT_UNIT_OMITTED.to_vec(),
        radius: DEFAULT_ELEMENT_RADIUS,
        source_strength: DEFAULT_SOURCE_STRENGTH,
    }
}

/// A collection of array units with an enabled mask and the medium the
/// assembly radiates into. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ArrayAssembly {
    units: Vec<ArrayUnit>,
    enabled: Vec<bool>,
    medium: MediumParams,
    /// World-frame transducers, one Vec per unit, instantiated once.
    transducers: Vec<Vec<Transducer>>,
}

impl ArrayAssembly {
    pub fn new(units: Vec<ArrayUnit>, medium: MediumParams) -> Result<Self> {
        let enabled = vec![true; units.len()];
        Self::with_enabled(units, enabled, medium)
    }

    pub fn with_enabled(
        units: Vec<ArrayUnit>,
        enabled: Vec<bool>,
        medium: MediumParams,
    ) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::config("units", "at least one unit is required"));
        }
        if enabled.len() != units.len() {
            return Err(Error::Geometry(format!(
                "enabled mask length {} != unit count {}",
                enabled.len(),
                units.len()
            )));
        }
        if !enabled.iter().any(|&e| e) {
            return Err(Error::config("enabled", "no enabled units"));
        }
        medium.validate()?;
        for (i, unit) in units.iter().enumerate() {
            unit.validate(&format!("units[{i}]"))?;
        }
        let transducers = units.iter().map(|u| u.transducers()).collect();
        Ok(Self {
            units,
            enabled,
            medium,
            transducers,
        })
    }

    /// Same geometry with a new enabled mask built from `unit_indices`.
    pub fn enable_subset(&self, unit_indices: &[usize]) -> Result<Self> {
        let mut enabled = vec![false; self.units.len()];
        for (j, &i) in unit_indices.iter().enumerate() {
            if i >= self.units.len() {
                return Err(Error::config(
                    format!("enabled[{j}]"),
                    format!("unit index {i} out of range (0..{})", self.units.len()),
                ));
            }
            if enabled[i] {
                return Err(Error::config(
                    format!("enabled[{j}]"),
                    format!("duplicate unit index {i}"),
                ));
            }
            enabled[i] = true;
        }
        if unit_indices.is_empty() {
            return Err(Error::config("enabled", "no enabled units"));
        }
        Ok(Self {
            units: self.units.clone(),
            enabled,
            medium: self.medium,
            transducers: self.transducers.clone(),
        })
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, i: usize) -> &ArrayUnit {
        &self.units[i]
    }

    pub fn units(&self) -> &[ArrayUnit] {
        &self.units
    }

    pub fn is_enabled(&self, i: usize) -> bool {
        self.enabled[i]
    }

    pub fn enabled_indices(&self) -> Vec<usize> {
        (0..self.units.len()).filter(|&i| self.enabled[i]).collect()
    }

    /// Medium the assembly was configured with.
    pub fn medium(&self) -> &MediumParams {
        &self.medium
    }

    /// Total transducer count, enabled or not.
    pub fn total_transducer_count(&self) -> usize {
        self.transducers.iter().map(Vec::len).sum()
    }

    pub fn enabled_transducer_count(&self) -> usize {
        self.transducers
            .iter()
            .zip(&self.enabled)
            .filter(|(_, &e)| e)
            .map(|(t, _)| t.len())
            .sum()
    }

    /// Enabled transducers in deterministic order (unit index ascending,
    /// row-major within the unit). Drive vectors are aligned with this
    /// enumeration.
    pub fn enabled_transducers(&self) -> impl Iterator<Item = &Transducer> + Clone {
        self.transducers
            .iter()
            .zip(&self.enabled)
            .filter(|(_, &e)| e)
            .flat_map(|(t, _)| t.iter())
    }

    /// FNV-1a hash over the enabled geometry and medium; stable across runs
    /// and platforms. Recorded in run metadata.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        for (unit, &enabled) in self.transducers.iter().zip(&self.enabled) {
            h.write_u64(enabled as u64);
            if !enabled {
                continue;
            }
            for t in unit {
                for v in [
                    t.position.x,
                    t.position.y,
                    t.position.z,
                    t.normal.x,
                    t.normal.y,
                    t.normal.z,
                    t.radius,
                    t.source_strength,
                ] {
                    h.write_f64(v);
                }
            }
        }
        for v in [
            self.medium.sound_speed,
            self.medium.density,
            self.medium.attenuation,
            self.medium.frequency,
        ] {
            h.write_f64(v);
        }
        h.finish()
    }
}

/// Minimal FNV-1a 64-bit hasher; dependency-free and stable forever.
pub(crate) struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Load an assembly (units + enabled mask + medium) from a JSON
/// configuration file. See [`crate::config`] for the schema.
pub fn load_assembly(path: impl AsRef<std::path::Path>) -> Result<ArrayAssembly> {
    crate::config::Scenario::load(path).map(|s| s.assembly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn default_unit_has_249_elements_all_in_plane() {
        let unit = default_unit(Vector3::zeros(), UnitQuaternion::identity());
        let trs = unit.transducers();
        // independent count: enumerate the grid minus omissions
        let mut expect = 0;
        for r in 0..18 {
            for c in 0..14 {
                if !DEFAULT_UNIT_OMITTED.contains(&(r, c)) {
                    expect += 1;
                }
            }
        }
        assert_eq!(expect, 249);
        assert_eq!(trs.len(), 249);
        for t in &trs {
            assert_eq!(t.position.z, 0.0, "unit-frame z must be 0");
            assert_eq!(t.normal, Vector3::z());
        }
    }

    #[test]
    fn neighbouring_units_do_not_overlap() {
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
        assert!(min_d > 0.0, "brute-force min pairwise distance = {min_d}");
    }

    #[test]
    fn flipped_unit_has_negative_normals() {
        let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
        let unit = default_unit(Vector3::zeros(), rot);
        for t in unit.transducers() {
            assert_relative_eq!(t.normal.x, 0.0, epsilon = 1e-15);
            assert_relative_eq!(t.normal.y, 0.0, epsilon = 1e-15);
            assert_relative_eq!(t.normal.z, -1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_cell_unit_sits_at_origin() {
        let unit = ArrayUnit {
            origin: Vector3::new(0.1, 0.2, 0.3),
            orientation: UnitQuaternion::identity(),
            rows: 1,
            cols: 1,
            pitch: 0.01,
            omitted_cells: vec![],
            radius: 4.5e-3,
            source_strength: 1.0,
        };
        let trs = unit.transducers();
        assert_eq!(trs.len(), 1);
        assert_eq!(trs[0].position, Vector3::new(0.1, 0.2, 0.3));
    }

    #[test]
    fn twelve_default_units_give_2988_transducers() {
        let units: Vec<_> = (0..12)
            .map(|i| {
                default_unit(
                    Vector3::new(0.2 * i as f64, 0.0, 0.0),
                    UnitQuaternion::identity(),
                )
            })
            .collect();
        let asm = ArrayAssembly::new(units, MediumParams::default()).unwrap();
        assert_eq!(asm.total_transducer_count(), 12 * 249);
        assert_eq!(asm.total_transducer_count(), 2988);
    }

    #[test]
    fn enable_subset_counts_and_errors() {
        let units: Vec<_> = (0..12)
            .map(|i| {
                default_unit(
                    Vector3::new(0.2 * i as f64, 0.0, 0.0),
                    UnitQuaternion::identity(),
                )
            })
            .collect();
        let asm = ArrayAssembly::new(units, MediumParams::default()).unwrap();

        let six = asm.enable_subset(&[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(six.enabled_transducer_count(), 6 * 249);
        assert_eq!(six.enabled_transducer_count(), 1494);

        assert!(asm.enable_subset(&[]).is_err(), "empty subset must fail");
        assert!(asm.enable_subset(&[12]).is_err(), "out of range must fail");
        assert!(asm.enable_subset(&[1, 1]).is_err(), "duplicates must fail");

        // enabling everything is the identity
        let all = asm.enable_subset(&(0..12).collect::<Vec<_>>()).unwrap();
        assert_eq!(all.fingerprint(), asm.fingerprint());
    }

    #[test]
    fn disabled_units_match_deleted_units_bitwise() {
        let units: Vec<_> = (0..4)
            .map(|i| {
                default_unit(
                    Vector3::new(0.2 * i as f64, 0.0, 0.0),
                    UnitQuaternion::identity(),
                )
            })
            .collect();
        let full = ArrayAssembly::new(units.clone(), MediumParams::default()).unwrap();
        let subset = full.enable_subset(&[1, 3]).unwrap();
        let deleted = ArrayAssembly::new(
            vec![units[1].clone(), units[3].clone()],
            MediumParams::default(),
        )
        .unwrap();

        let a: Vec<_> = subset.enabled_transducers().collect();
        let b: Vec<_> = deleted.enabled_transducers().collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position, y.position, "positions must be bit-identical");
            assert_eq!(x.normal, y.normal);
        }
    }

    #[test]
    fn translation_covariance() {
        let v = Vector3::new(0.125, -0.25, 0.5); // exactly representable
        let unit = default_unit(Vector3::new(0.01, 0.02, 0.03), UnitQuaternion::identity());
        let mut moved = unit.clone();
        moved.origin += v;
        for (a, b) in unit.transducers().iter().zip(moved.transducers().iter()) {
            let err = (b.position - (a.position + v)).norm();
            assert!(err < 1e-12, "translation covariance violated: {err}");
        }
    }

    #[test]
    fn validation_rejects_bad_units() {
        let mut unit = default_unit(Vector3::zeros(), UnitQuaternion::identity());
        unit.pitch = 0.0;
        let err = unit.validate("units[0]").unwrap_err();
        assert!(err.to_string().contains("units[0].pitch"), "{err}");

        let mut unit = default_unit(Vector3::zeros(), UnitQuaternion::identity());
        unit.omitted_cells.push((1, 1));
        assert!(unit.validate("units[0]").is_err(), "duplicate omission");

        let mut unit = default_unit(Vector3::zeros(), UnitQuaternion::identity());
        unit.omitted_cells.push((99, 0));
        assert!(unit.validate("units[0]").is_err(), "out-of-grid omission");
    }
}
