//! Perception checks, run comparison and file export.
//!
//! Exports are plain CSV/PGM/JSON files with stable formatting (floats in
//! scientific notation with six fractional digits), so identical runs
//! export byte-identically and reports stay text-diffable.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::acoustics::{Grid2D, ScalarGrid};
use crate::error::{Error, Result};
use crate::thermal::SimulationRun;

/// Reference measurements shipped with the tool, for self-documenting
/// reports: rises at the palm 296 mm from the six central units.
pub mod reference {
    /// Static-drive ΔT after 5 s (°C).
    pub const STATIC_DELTA_T_5S: f64 = 5.4;
    /// 50 Hz duty-0.9 square-wave ΔT after 5 s (°C).
    pub const AM_DELTA_T_5S: f64 = 4.5;
    /// Static-drive ΔT after 30 s (°C).
    pub const STATIC_DELTA_T_30S: f64 = 8.6;
    /// Square-wave ΔT after 30 s (°C).
    pub const AM_DELTA_T_30S: f64 = 5.4;
    /// Warm-perception threshold at 33 °C palm acclimation (°C).
    pub const WARM_THRESHOLD_C: f64 = 0.2;
    pub const ACCLIMATION_T_C: f64 = 33.0;
}

/// Warm-perception model: a rise is perceivable once it reaches
/// `warm_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PerceptionModel {
    pub warm_threshold: f64,
    pub acclimation_t_c: f64,
}

impl Default for PerceptionModel {
    fn default() -> Self {
        PerceptionModel {
            warm_threshold: reference::WARM_THRESHOLD_C,
            acclimation_t_c: reference::ACCLIMATION_T_C,
        }
    }
}

/// First time the probe ΔT reaches the threshold, linearly interpolated
/// between output samples; `None` when the series never crosses.
pub fn time_to_threshold(run: &SimulationRun, model: &PerceptionModel) -> Option<f64> {
    let thr = model.warm_threshold;
    let (times, vals) = (&run.times, &run.probe_delta_t);
    if vals.is_empty() {
        return None;
    }
    if vals[0] >= thr {
        return Some(times[0]);
    }
    for i in 1..vals.len() {
        if vals[i] >= thr {
            let (t0, t1) = (times[i - 1], times[i]);
            let (v0, v1) = (vals[i - 1], vals[i]);
            return Some(t0 + (thr - v0) * (t1 - t0) / (v1 - v0));
        }
    }
    None
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioRow {
    pub time_s: f64,
    pub delta_t_a: f64,
    pub delta_t_b: f64,
    /// b/a; omitted when |ΔT_a| < 1e-6.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
}

/// ΔT of both runs and the ratio b/a at each requested time. The runs must
/// share probe cell and output-time grid.
pub fn compare_runs(a: &SimulationRun, b: &SimulationRun, at_times: &[f64]) -> Result<RatioReport> {
    if a.meta.probe_cell != b.meta.probe_cell {
        return Err(Error::Solver(format!(
            "runs probe different cells: {:?} vs {:?}",
            a.meta.probe_cell, b.meta.probe_cell
        )));
    }
    if a.times != b.times {
        return Err(Error::Solver(
            "runs have different output-time grids".into(),
        ));
    }
    let mut rows = Vec::with_capacity(at_times.len());
    for &t in at_times {
        let da = a
            .delta_t_at(t)
            .ok_or_else(|| Error::Solver(format!("time {t} s outside run a")))?;
        let db = b
            .delta_t_at(t)
            .ok_or_else(|| Error::Solver(format!("time {t} s outside run b")))?;
        let ratio = (da.abs() >= 1e-6).then(|| db / da);
        rows.push(RatioRow {
            time_s: t,
            delta_t_a: da,
            delta_t_b: db,
            ratio,
        });
    }
    Ok(RatioReport { rows })
}

/// Stable float formatting used in all CSV output (7 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.6e}")
}

/// File label for a snapshot time: `30.0`, `2.5`, `0.25`.
pub fn time_label(t: f64) -> String {
    if t == t.trunc() {
        format!("{t:.1}")
    } else {
        format!("{t}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// `time_s,delta_T_C` rows, one per output step.
pub fn write_timeseries_csv(run: &SimulationRun, path: &Path) -> Result<()> {
    let mut s = String::from("time_s,delta_T_C\n");
    for (t, v) in run.times.iter().zip(&run.probe_delta_t) {
        let _ = writeln!(s, "{},{}", fmt_float(*t), fmt_float(*v));
    }
    write_file(path, &s)
}

/// Parse a file written by [`write_timeseries_csv`].
pub fn read_timeseries_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            Error::Solver(format!("{}: malformed CSV line {}", path.display(), i + 1))
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                Error::Solver(format!("{}: line {}: {e}", path.display(), i + 1))
            })
        };
        out.push((parse(a)?, parse(b)?));
    }
    Ok(out)
}

/// `x_m,y_m,<label>` rows; coordinates are in-plane offsets from the grid
/// origin.
pub fn write_scalar_grid_csv(grid: &ScalarGrid, label: &str, path: &Path) -> Result<()> {
    let spec = &grid.spec;
    let mut s = format!("x_m,y_m,{label}\n");
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let (x, y) = spec.cell_offsets(ix, iy);
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_float(x),
                fmt_float(y),
                fmt_float(grid.get(ix, iy))
            );
        }
    }
    write_file(path, &s)
}

/// `x_m,y_m,re_Pa,im_Pa` rows for a complex pressure grid.
pub fn write_pressure_grid_csv(grid: &Grid2D<Complex64>, path: &Path) -> Result<()> {
    let spec = &grid.spec;
    let mut s = String::from("x_m,y_m,re_Pa,im_Pa\n");
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let (x, y) = spec.cell_offsets(ix, iy);
            let p = grid.get(ix, iy);
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_float(x),
                fmt_float(y),
                fmt_float(p.re),
                fmt_float(p.im)
            );
        }
    }
    write_file(path, &s)
}

/// 16-bit ASCII PGM (P2), values linearly scaled to 0–65535. The scale is
/// recorded in a `<file>.txt` sidecar so absolute values can be recovered.
pub fn write_grid_pgm(grid: &ScalarGrid, label: &str, path: &Path) -> Result<()> {
    let spec = &grid.spec;
    let min = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;

    let mut s = String::new();
    let _ = writeln!(s, "P2");
    let _ = writeln!(
        s,
        "# {label}: value = {} + pixel * {} / 65535",
        fmt_float(min),
        fmt_float(span)
    );
    let _ = writeln!(s, "{} {}", spec.nx, spec.ny);
    let _ = writeln!(s, "65535");
    for iy in 0..spec.ny {
        let mut row = String::new();
        for ix in 0..spec.nx {
            let v = grid.get(ix, iy);
            let px = if span > 0.0 {
                ((v - min) / span * 65535.0).round().clamp(0.0, 65535.0) as u32
            } else {
                0
            };
            if ix > 0 {
                row.push(' ');
            }
            let _ = write!(row, "{px}");
        }
        let _ = writeln!(s, "{row}");
    }
    write_file(path, &s)?;

    let mut sidecar = String::new();
    let _ = writeln!(sidecar, "quantity = {label}");
    let _ = writeln!(sidecar, "nx = {}", spec.nx);
    let _ = writeln!(sidecar, "ny = {}", spec.ny);
    let _ = writeln!(sidecar, "dx_m = {}", fmt_float(spec.dx));
    let _ = writeln!(sidecar, "dy_m = {}", fmt_float(spec.dy));
    let _ = writeln!(
        sidecar,
        "origin_m = [{}, {}, {}]",
        fmt_float(spec.origin.x),
        fmt_float(spec.origin.y),
        fmt_float(spec.origin.z)
    );
    let _ = writeln!(sidecar, "min = {}", fmt_float(min));
    let _ = writeln!(sidecar, "max = {}", fmt_float(max));
    let _ = writeln!(sidecar, "value = min + pixel * (max - min) / 65535");
    write_file(&path.with_extension("pgm.txt"), &sidecar)
}

/// Export a run into `out_dir`: `timeseries.csv`, per-snapshot
/// `map_<t>s.csv` + `map_<t>s.pgm` (+ scale sidecar), and `meta.json`.
/// Deterministic: identical runs export byte-identically.
pub fn export_run(run: &SimulationRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let ts = out_dir.join("timeseries.csv");
    write_timeseries_csv(run, &ts)?;
    written.push(ts);

    for snap in &run.snapshots {
        let label = time_label(snap.time);
        let csv = out_dir.join(format!("map_{label}s.csv"));
        write_scalar_grid_csv(&snap.map, "delta_T_C", &csv)?;
        written.push(csv);
        let pgm = out_dir.join(format!("map_{label}s.pgm"));
        write_grid_pgm(&snap.map, "delta_T_C", &pgm)?;
        written.push(pgm.with_extension("pgm.txt"));
        written.push(pgm);
    }

    let meta = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "run": run.meta,
        "reference_measurements_c": {
            "static_delta_t_5s": reference::STATIC_DELTA_T_5S,
            "am_delta_t_5s": reference::AM_DELTA_T_5S,
            "static_delta_t_30s": reference::STATIC_DELTA_T_30S,
            "am_delta_t_30s": reference::AM_DELTA_T_30S,
            "warm_threshold": reference::WARM_THRESHOLD_C,
            "acclimation_t": reference::ACCLIMATION_T_C,
        },
    });
    let meta_path = out_dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serialization cannot fail");
    write_file(&meta_path, &text)?;
    written.push(meta_path);

    Ok(written)
}
