//! JSON configuration schema, loading, validation and `--set` overrides.
//!
//! Top-level keys: `medium`, `units` (required), `enabled`, `focus`,
//! `envelope`, `skin`, `thermal_grid`, `solver`, `probe`. Everything except
//! `units` has documented defaults. Unknown keys anywhere are an error so
//! typos cannot silently fall back to defaults. Validation errors carry the
//! dotted path of the offending key.

use std::path::Path;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acoustics::MediumParams;
use crate::error::{Error, Result};
use crate::geometry::{
    ArrayAssembly, ArrayUnit, Fnv1a, DEFAULT_ELEMENT_RADIUS, DEFAULT_SOURCE_STRENGTH,
    DEFAULT_UNIT_COLS, DEFAULT_UNIT_PITCH, DEFAULT_UNIT_ROWS,
};
use crate::modulation::Envelope;
use crate::thermal::{SkinModel, SolverOptions, ThermalGridSpec};

/// Raw configuration file contents (resolved defaults included when
/// re-serialized).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub medium: MediumConfig,
    pub units: Vec<UnitConfig>,
    /// Enabled unit indices; all units when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<Vec<usize>>,
    /// Focal point (m). The skin surface patch is centered here.
    #[serde(default = "default_focus")]
    pub focus: [f64; 3],
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub skin: SkinModel,
    #[serde(default)]
    pub thermal_grid: ThermalGridConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Surface probe point (world x, y in m); the focus projection when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<[f64; 2]>,
}

fn default_focus() -> [f64; 3] {
    [0.0, 0.0, 0.296]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub sound_speed: f64,
    pub density: f64,
    pub attenuation: f64,
    pub frequency: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        let m = MediumParams::default();
        MediumConfig {
            sound_speed: m.sound_speed,
            density: m.density,
            attenuation: m.attenuation,
            frequency: m.frequency,
        }
    }
}

impl From<MediumConfig> for MediumParams {
    fn from(c: MediumConfig) -> Self {
        MediumParams {
            sound_speed: c.sound_speed,
            density: c.density,
            attenuation: c.attenuation,
            frequency: c.frequency,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub origin: [f64; 3],
    #[serde(default)]
    pub rotation: RotationConfig,
    #[serde(default = "d_rows")]
    pub rows: usize,
    #[serde(default = "d_cols")]
    pub cols: usize,
    #[serde(default = "d_pitch")]
    pub pitch: f64,
    /// Grid cells with no transducer; empty when omitted.
    #[serde(default)]
    pub omitted: Vec<[usize; 2]>,
    #[serde(default = "d_radius")]
    pub radius: f64,
    #[serde(default = "d_strength")]
    pub source_strength: f64,
}

fn d_rows() -> usize {
    DEFAULT_UNIT_ROWS
}
fn d_cols() -> usize {
    DEFAULT_UNIT_COLS
}
fn d_pitch() -> f64 {
    DEFAULT_UNIT_PITCH
}
fn d_radius() -> f64 {
    DEFAULT_ELEMENT_RADIUS
}
fn d_strength() -> f64 {
    DEFAULT_SOURCE_STRENGTH
}

/// Unit pose rotation: either a `[w, x, y, z]` quaternion or an
/// axis–angle object (angle in radians).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationConfig {
    Quaternion([f64; 4]),
    AxisAngle(AxisAngle),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig::Quaternion([1.0, 0.0, 0.0, 0.0])
    }
}

impl RotationConfig {
    fn to_unit_quaternion(&self, path: &str) -> Result<UnitQuaternion<f64>> {
        match self {
            RotationConfig::Quaternion([w, x, y, z]) => {
                let q = Quaternion::new(*w, *x, *y, *z);
                if q.norm() < 1e-12 {
                    return Err(Error::config(
                        format!("{path}.rotation"),
                        "quaternion has zero norm",
                    ));
                }
                Ok(UnitQuaternion::from_quaternion(q))
            }
            RotationConfig::AxisAngle(aa) => {
                let axis = Vector3::new(aa.axis[0], aa.axis[1], aa.axis[2]);
                if axis.norm() < 1e-12 {
                    return Err(Error::config(
                        format!("{path}.rotation.axis"),
                        "axis has zero norm",
                    ));
                }
                Ok(UnitQuaternion::from_axis_angle(
                    &Unit::new_normalize(axis),
                    aa.angle,
                ))
            }
        }
    }
}

impl UnitConfig {
    fn to_unit(&self, path: &str) -> Result<ArrayUnit> {
        let unit = ArrayUnit {
            origin: Vector3::new(self.origin[0], self.origin[1], self.origin[2]),
            orientation: self.rotation.to_unit_quaternion(path)?,
            rows: self.rows,
            cols: self.cols,
            pitch: self.pitch,
            omitted_cells: self.omitted.iter().map(|&[r, c]| (r, c)).collect(),
            radius: self.radius,
            source_strength: self.source_strength,
        };
        unit.validate(path)?;
        Ok(unit)
    }
}

/// Envelope as written in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            kind: "static".into(),
            freq_hz: None,
            duty: None,
        }
    }
}

/// Square-wave defaults used when the config gives only `"kind":"square"`.
pub const DEFAULT_SQUARE_FREQ_HZ: f64 = 50.0;
pub const DEFAULT_SQUARE_DUTY: f64 = 0.9;

impl EnvelopeConfig {
    pub fn to_envelope(&self) -> Result<Envelope> {
        match self.kind.as_str() {
            "static" => {
                if self.freq_hz.is_some() || self.duty.is_some() {
                    return Err(Error::config(
                        "envelope.kind",
                        "static envelope takes no freq_hz/duty",
                    ));
                }
                Ok(Envelope::Static)
            }
            "square" => {
                let env = Envelope::Square {
                    freq_hz: self.freq_hz.unwrap_or(DEFAULT_SQUARE_FREQ_HZ),
                    duty: self.duty.unwrap_or(DEFAULT_SQUARE_DUTY),
                };
                env.validate()?;
                Ok(env)
            }
            other => Err(Error::config(
                "envelope.kind",
                format!("unknown envelope kind `{other}` (expected `static` or `square`)"),
            )),
        }
    }

    pub fn from_envelope(env: &Envelope) -> Self {
        match *env {
            Envelope::Static => EnvelopeConfig::default(),
            Envelope::Square { freq_hz, duty } => EnvelopeConfig {
                kind: "square".into(),
                freq_hz: Some(freq_hz),
                duty: Some(duty),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalGridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Default for ThermalGridConfig {
    fn default() -> Self {
        ThermalGridConfig {
            nx: 51,
            ny: 51,
            nz: 100,
            dx: 1.6e-3,
            dy: 1.6e-3,
            dz: 0.1e-3,
        }
    }
}

/// Fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub assembly: ArrayAssembly,
    pub medium: MediumParams,
    pub focus: Vector3<f64>,
    pub envelope: Envelope,
    pub skin: SkinModel,
    pub grid: ThermalGridSpec,
    pub solver: SolverOptions,
    pub probe: (f64, f64),
    /// Resolved raw config (re-serializable).
    pub config: ConfigFile,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Load a config file and apply `--set key=value` overrides before
    /// validation.
    pub fn load_with_overrides(path: impl AsRef<Path>, sets: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| {
            Error::config(
                path.display().to_string(),
                format!("cannot read config file: {source}"),
            )
        })?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
        for (key, raw) in sets {
            apply_override(&mut value, key, raw)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let de = serde_path_to_error::deserialize::<_, ConfigFile>(value);
        let config = de.map_err(|e| {
            let path = e.path().to_string();
            let path = if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(path, e.inner().to_string())
        })?;
        Self::from_config(config)
    }

    pub fn from_config(config: ConfigFile) -> Result<Self> {
        let medium: MediumParams = config.medium.into();
        medium.validate()?;

        if config.units.is_empty() {
            return Err(Error::config("units", "at least one unit is required"));
        }
        let units = config
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| u.to_unit(&format!("units[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let assembly = match &config.enabled {
            None => ArrayAssembly::new(units, medium)?,
            Some(indices) => ArrayAssembly::new(units, medium)?.enable_subset(indices)?,
        };

        let envelope = config.envelope.to_envelope()?;
        config.skin.validate()?;
        config.solver.validate()?;

        let focus = Vector3::new(config.focus[0], config.focus[1], config.focus[2]);
        let g = config.thermal_grid;
        let grid = ThermalGridSpec {
            nx: g.nx,
            ny: g.ny,
            nz: g.nz,
            dx: g.dx,
            dy: g.dy,
            dz: g.dz,
            center: focus,
        };
        grid.validate()?;
        let depth_err = (grid.depth() - config.skin.slab_thickness).abs();
        if depth_err > grid.dz / 2.0 + 1e-12 {
            return Err(Error::config(
                "thermal_grid.nz",
                format!(
                    "grid depth nz·dz = {:.4e} m does not match skin.slab_thickness = {:.4e} m",
                    grid.depth(),
                    config.skin.slab_thickness
                ),
            ));
        }

        let probe = config
            .probe
            .map(|[x, y]| (x, y))
            .unwrap_or((focus.x, focus.y));
        grid.probe_cell(probe)?;

        Ok(Scenario {
            assembly,
            medium,
            focus,
            envelope,
            skin: config.skin,
            grid,
            solver: config.solver,
            probe,
            config,
        })
    }

    /// Compact canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serialization cannot fail")
    }

    /// Stable hash of the resolved config.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(self.canonical_json().as_bytes());
        h.finish()
    }

    /// Copy of the raw config with the calibrated absorbed fraction.
    pub fn config_with_eta(&self, eta: f64) -> ConfigFile {
        let mut c = self.config.clone();
        c.skin.absorbed_fraction = eta;
        c
    }
}

/// Parse one `--set key=value` argument.
pub fn parse_set_arg(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(Error::config(
            "--set",
            format!("expected `key=value`, got `{s}`"),
        )),
    }
}

/// Apply one dotted-path override to a JSON value. Array elements are
/// addressed by numeric path segments (`units.3.pitch`). Missing
/// intermediate objects are created; the final typed deserialization still
/// rejects unknown keys, so typos cannot slip through.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(path, "empty path segment"));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let prefix = parts[..=i].join(".");
        if let Ok(idx) = part.parse::<usize>() {
            let arr = cur.as_array_mut().ok_or_else(|| {
                Error::config(prefix.clone(), "parent is not an array")
            })?;
            if idx >= arr.len() {
                return Err(Error::config(
                    prefix,
                    format!("index {idx} out of range (len {})", arr.len()),
                ));
            }
            if last {
                arr[idx] = new;
                return Ok(());
            }
            cur = &mut arr[idx];
        } else {
            let obj = cur.as_object_mut().ok_or_else(|| {
                Error::config(prefix.clone(), "parent is not an object")
            })?;
            if last {
                obj.insert((*part).to_string(), new);
                return Ok(());
            }
            cur = obj
                .entry((*part).to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}
