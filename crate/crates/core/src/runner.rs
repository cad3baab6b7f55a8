//! Executes one configured study and writes its tables, summary and manifest.
//!
//! Everything is computed in memory first and written only on success, so a
//! failed run leaves no partial tables behind.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, StudyConfig};
use crate::dynamics::{evolve, EvolveOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::CatalystSpec;
use crate::mwis::MwisInstance;
use crate::perturbation::{driver_pt_energies, ext_set_overlaps, first_order_catalyst_shift};
use crate::spectrum::{
    csv_err, find_gap_minima, fmt12, locate_sign_change, scan_spectrum, split_features, uniform_grid, FeatureKind,
    SpectrumScan,
};
use crate::sweeps::{
    calibrate_jzz, catalyst_sweep, closing_candidates, intermediate_regime_study, log_gap_fit, optimize_jxx,
    reference_crossing, scaling_study, sweep_point, write_intermediate_csv, write_scaling_csv, write_sweep_csv,
    Calibration, ScalingSpec, SweepSettings,
};
use crate::system::{AnnealSystem, SpaceMode};

pub const TOOL_NAME: &str = "anneal-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Results of a run held in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Value,
    pub derived: Value,
    /// File name and contents, in write order.
    pub files: Vec<(String, Vec<u8>)>,
}

/// Builds the instance, calibrating the edge penalty when asked to.
pub fn resolve_instance(cfg: &RunConfig, settings: &SweepSettings) -> Result<(MwisInstance, Option<Calibration>)> {
    let inst = &cfg.instance;
    match (inst.jzz_raw, inst.calibrate_sx) {
        (Some(j), _) => Ok((inst.build(j)?, None)),
        (None, Some(sx)) => {
            let cal = calibrate_jzz(&inst.sizes, inst.delta_w, inst.e_scale, sx, settings)?;
            Ok((inst.build(cal.jzz_raw)?, Some(cal)))
        }
        (None, None) => Err(Error::Config("instance needs jzz_raw or calibrate_sx".into())),
    }
}

/// Sweep settings with the configured level count applied to every scan.
pub fn effective_settings(cfg: &RunConfig) -> SweepSettings {
    let mut s = cfg.numerics.sweep;
    s.scan.levels = cfg.numerics.levels;
    s
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn scan_summary(scan: &SpectrumScan, settings: &SweepSettings, reference: Option<f64>) -> Value {
    let features = find_gap_minima(scan, settings.refine_tol, reference);
    let (primary, secondary) = split_features(&features);
    json!({
        "min_gap": scan.min_gap(settings.refine_tol),
        "features": features,
        "primary": primary,
        "secondary": secondary,
        "sign_change": locate_sign_change(scan, settings.sign_tol),
        "unreliable_points": scan.unreliable.iter().filter(|u| **u).count(),
    })
}

/// Runs the study without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let settings = effective_settings(cfg);
    let mode = cfg.numerics.space;
    let (instance, calibration) = resolve_instance(cfg, &settings)?;
    let encoding = instance.encode();
    let catalyst = if cfg.needs_pair() {
        cfg.catalyst.spec(&instance)?
    } else {
        CatalystSpec::none()
    };
    let system = AnnealSystem::new(&encoding, &catalyst, mode)?;
    let grid = uniform_grid(settings.grid_points);

    let mut files: Vec<(String, Vec<u8>)> = vec![("encoding.json".into(), json_bytes(&instance.encode().to_json())?)];
    let summary = match &cfg.study {
        StudyConfig::Spectrum => {
            let free = system.with_jxx(0.0)?;
            let free_scan = scan_spectrum(&free, &grid, &settings.scan)?;
            let free_summary = scan_summary(&free_scan, &settings, None);
            let reference = split_features(&find_gap_minima(&free_scan, settings.refine_tol, None))
                .0
                .map(|f| f.location);
            let mut out = json!({ "catalyst_free": free_summary });
            if catalyst.is_active() {
                let scan = scan_spectrum(&system, &grid, &settings.scan)?;
                out["catalyst"] = scan_summary(&scan, &settings, reference);
                files.push(("spectrum.csv".into(), csv_bytes(|b| scan.write_csv(b))?));
                files.push(("spectrum_free.csv".into(), csv_bytes(|b| free_scan.write_csv(b))?));
            } else {
                files.push(("spectrum.csv".into(), csv_bytes(|b| free_scan.write_csv(b))?));
            }
            out
        }
        StudyConfig::Sweep { optimize, closings } => {
            let base = system.with_jxx(0.0)?;
            let free_scan = scan_spectrum(&base, &grid, &settings.scan)?;
            files.push(("spectrum.csv".into(), csv_bytes(|b| free_scan.write_csv(b))?));
            let mut out = json!({ "catalyst_free": scan_summary(&free_scan, &settings, None) });

            let optimum = if *optimize { Some(optimize_jxx(&base, &settings)?) } else { None };
            let records = match (&cfg.catalyst.jxx_grid, &optimum) {
                (Some(g), _) => catalyst_sweep(&base, g, &settings)?,
                (None, Some(o)) => o.coarse.clone(),
                (None, None) => catalyst_sweep(&base, &settings.jxx_grid(), &settings)?,
            };
            files.push(("sweep.csv".into(), csv_bytes(|b| write_sweep_csv(&records, b))?));
            if let Some(o) = &optimum {
                out["jxx_opt"] = json!({
                    "jxx": o.jxx,
                    "gap_at_sx": o.gap,
                    "sx": o.sx,
                    "at_boundary": o.at_boundary,
                    "gap_at_zero": o.coarse.first().map(|r| r.gap_at_sx),
                });
            }
            if *closings {
                let mut found = serde_json::Map::new();
                let mut all = Vec::new();
                for (key, kind) in [
                    ("primary_crossing", FeatureKind::PrimaryCrossing),
                    ("secondary_minimum", FeatureKind::SecondaryMinimum),
                ] {
                    let candidates = closing_candidates(&base, kind, &settings)?;
                    let first = candidates
                        .iter()
                        .filter(|c| c.closing)
                        .min_by(|a, b| a.jxx.total_cmp(&b.jxx))
                        .copied();
                    let entry = match first {
                        Some(c) => {
                            let at = sweep_point(&base, c.jxx, &settings)?;
                            json!({
                                "jxx": c.jxx,
                                "s": c.s,
                                "gap": c.gap,
                                "s_minus": at.s_minus,
                                "crossed_component": at.crossed_component,
                            })
                        }
                        None => Value::Null,
                    };
                    found.insert(key.into(), entry);
                    all.extend(candidates);
                }
                out["closings"] = Value::Object(found);
                out["closing_candidates"] = json!(all);
                out["closing_threshold"] =
                    json!(settings.closing_factor * encoding.n() as f64 * encoding.e_scale());
            }
            out
        }
        StudyConfig::Scaling {
            setting,
            n_list,
            policies,
            jxx,
        } => {
            let mut out = serde_json::Map::new();
            for &policy in policies {
                let spec = ScalingSpec {
                    jxx: *jxx,
                    delta_w: cfg.instance.delta_w,
                    jzz_raw: instance.jzz_raw(),
                    e_scale: cfg.instance.e_scale,
                    mode: match mode {
                        SpaceMode::Auto => SpaceMode::Sector,
                        m => m,
                    },
                    ..ScalingSpec::new(*setting, policy)
                };
                let records = scaling_study(&spec, n_list, &settings)?;
                let name = serde_json::to_value(policy).map_err(|e| Error::Config(e.to_string()))?;
                let name = name.as_str().unwrap_or("policy").to_string();
                files.push((format!("scaling_{name}.csv"), csv_bytes(|b| write_scaling_csv(&records, b))?));
                out.insert(
                    name,
                    json!({ "records": records, "log_gap_fit": (records.len() >= 2).then(|| log_gap_fit(&records)) }),
                );
            }
            Value::Object(out)
        }
        StudyConfig::Intermediate { delta_w_list, target_sx } => {
            let rows = intermediate_regime_study(delta_w_list, cfg.instance.e_scale, *target_sx, &settings)?;
            files.push(("intermediate.csv".into(), csv_bytes(|b| write_intermediate_csv(&rows, b))?));
            json!({ "rows": rows })
        }
        StudyConfig::Dynamics {
            total_time,
            tolerance,
            checkpoints,
        } => {
            let options = EvolveOptions {
                total_time: *total_time,
                tolerance: *tolerance,
                checkpoints: *checkpoints,
                levels: cfg.numerics.levels,
                ..Default::default()
            };
            let trace = evolve(&system, &options)?;
            files.push(("dynamics.csv".into(), csv_bytes(|b| trace.write_csv(b))?));
            json!({
                "final_populations": trace.final_populations(),
                "final_ground_population": trace.final_populations().first(),
                "max_norm_drift": trace.max_norm_drift(),
                "initial_energy": trace.energy.first(),
                "tolerance_used": trace.tolerance,
                "steps": trace.steps,
                "rejected_steps": trace.rejected_steps,
            })
        }
        StudyConfig::Perturbation {
            lambda_grid,
            window,
            window_points,
        } => {
            let pt = driver_pt_energies(&encoding, lambda_grid)?;
            files.push(("pt_energies.csv".into(), csv_bytes(|b| pt.write_csv(b))?));
            let sx = reference_crossing(&system, &settings)?;
            let centre = sx.unwrap_or(0.5);
            let lo = (centre - window).max(0.0);
            let hi = (centre + window).min(1.0);
            let s_window: Vec<f64> = (0..*window_points)
                .map(|i| lo + (hi - lo) * i as f64 / (*window_points - 1) as f64)
                .collect();
            let pair = cfg.catalyst.spec(&instance)?;
            let mut out = json!({
                "neighbourhood_sums": pt.sums,
                "crossing_lambda": pt.crossing_lambda,
                "catalyst_free_sx": sx,
            });
            if encoding.k() == 2 {
                let ext = ext_set_overlaps(&encoding, &pair, &s_window, mode)?;
                files.push(("ext_sets.csv".into(), csv_bytes(|b| ext.write_csv(b))?));
            }
            let mut shifts = csv::Writer::from_writer(Vec::new());
            shifts
                .write_record(["s", "shift_E0", "spacing_E0", "shift_E1", "spacing_E1"])
                .map_err(csv_err)?;
            let mut flagged = 0usize;
            for &s in &s_window {
                let a = first_order_catalyst_shift(&encoding, &pair, s, 0, mode)?;
                let b = first_order_catalyst_shift(&encoding, &pair, s, 1, mode)?;
                flagged += usize::from(a.near_degenerate) + usize::from(b.near_degenerate);
                shifts
                    .write_record([s, a.shift, a.level_spacing, b.shift, b.level_spacing].map(fmt12))
                    .map_err(csv_err)?;
            }
            let bytes = shifts.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            files.push(("catalyst_shift.csv".into(), bytes));
            out["near_degenerate_points"] = json!(flagged);
            out
        }
    };

    let derived = json!({
        "n": encoding.n(),
        "sizes": instance.sub_graph_sizes(),
        "normalization_k": encoding.normalization_k(),
        "jzz_raw": instance.jzz_raw(),
        "e_scale": encoding.e_scale(),
        "calibration": calibration.as_ref().map(|c| json!({ "jzz_raw": c.jzz_raw, "sx": c.sx })),
        "space": if system.is_sector() { "sector" } else { "full" },
        "dim": system.dim(),
        "catalyst_pairs": catalyst.pairs,
    });
    files.push(("summary.json".into(), json_bytes(&summary)?));
    Ok(RunOutput { summary, derived, files })
}

/// Manifest recording the config as given, the tool version, derived
/// quantities and the produced files. Feeding it back to `run` reproduces the
/// same outputs.
pub fn manifest(cfg: &RunConfig, output: &RunOutput) -> Value {
    let mut names: Vec<&str> = output.files.iter().map(|(n, _)| n.as_str()).collect();
    names.push("manifest.json");
    json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "study": cfg.study_name(),
        "config": cfg,
        "derived": output.derived,
        "summary": output.summary,
        "outputs": names,
    })
}

/// Runs the study and writes every output into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let output = execute(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(output.files.len() + 1);
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, json_bytes(&manifest(cfg, &output))?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    #[test]
    fn spectrum_run_has_interior_minimum() {
        let mut cfg = preset("no-ac").unwrap();
        cfg.catalyst.jxx = 0.0;
        cfg.instance.sizes = vec![2, 3];
        let out = execute(&cfg).unwrap();
        let primary = &out.summary["catalyst_free"]["primary"];
        assert!((primary["location"].as_f64().unwrap() - 0.9).abs() < 0.01);
        assert!(out.files.iter().any(|(n, _)| n == "spectrum.csv"));
    }

    #[test]
    fn invalid_config_fails_before_numerics() {
        let mut cfg = preset("no-ac").unwrap();
        cfg.numerics.levels = 1;
        assert!(execute(&cfg).unwrap_err().is_config());
    }

    #[test]
    fn run_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset("no-ac").unwrap();
        cfg.numerics.sweep.grid_points = 21;
        let written = run(&cfg, dir.path()).unwrap();
        assert!(written.iter().any(|p| p.ends_with("manifest.json")));
        let m: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["study"], "spectrum");
        assert_eq!(RunConfig::from_json(&m.to_string()).unwrap(), cfg);
    }
}
