//! Run configuration (TOML or JSON) and the built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::EvolveOptions;
use crate::error::{Error, Result};
use crate::hamiltonian::CatalystSpec;
use crate::mwis::{MwisInstance, DEFAULT_E_SCALE};
use crate::sweeps::{JxxPolicy, ScalingSetting, SweepSettings};
use crate::system::SpaceMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub sizes: Vec<usize>,
    #[serde(default = "default_delta_w")]
    pub delta_w: f64,
    /// Fixed edge penalty. Exactly one of this and `calibrate_sx` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jzz_raw: Option<f64>,
    /// Calibrate the edge penalty so the catalyst-free crossing sits here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_sx: Option<f64>,
    #[serde(default = "default_e_scale")]
    pub e_scale: f64,
    /// Explicit per-sub-graph raw weights, overriding `delta_w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn default_delta_w() -> f64 {
    0.01
}

fn default_e_scale() -> f64 {
    DEFAULT_E_SCALE
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.jzz_raw, self.calibrate_sx) {
            (Some(_), Some(_)) => Err(Error::Config("give either jzz_raw or calibrate_sx, not both".into())),
            (None, None) => Err(Error::Config("instance needs jzz_raw or calibrate_sx".into())),
            (None, Some(sx)) if !(sx > 0.0 && sx < 1.0) => {
                Err(Error::Config(format!("calibrate_sx must lie in (0, 1), got {sx}")))
            }
            (None, Some(_)) if self.sizes.len() != 2 || self.weights.is_some() => Err(Error::Config(
                "calibration is defined for bipartite instances with delta_w weights".into(),
            )),
            (Some(j), None) => self.build(j).map(|_| ()),
            (None, Some(_)) => {
                if self.sizes.is_empty() || self.sizes.contains(&0) {
                    return Err(Error::Config("sizes must be nonempty and positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, jzz_raw: f64) -> Result<MwisInstance> {
        match &self.weights {
            Some(w) => MwisInstance::with_weights(&self.sizes, w, jzz_raw, self.e_scale),
            None => MwisInstance::new(&self.sizes, self.delta_w, jzz_raw, self.e_scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalystConfig {
    /// Sub-graph hosting the pair (its first two qubits).
    #[serde(default = "default_host")]
    pub sub_graph: usize,
    #[serde(default)]
    pub jxx: f64,
    /// Strengths for sweep studies; defaults to the numerics coarse grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jxx_grid: Option<Vec<f64>>,
}

fn default_host() -> usize {
    1
}

impl Default for CatalystConfig {
    fn default() -> Self {
        Self {
            sub_graph: 1,
            jxx: 0.0,
            jxx_grid: None,
        }
    }
}

impl CatalystConfig {
    pub fn spec(&self, instance: &MwisInstance) -> Result<CatalystSpec> {
        if self.jxx < 0.0 {
            return Err(Error::InvalidCatalyst(format!("J_xx must be nonnegative, got {}", self.jxx)));
        }
        CatalystSpec::in_sub_graph(instance, self.sub_graph, self.jxx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StudyConfig {
    /// Gap curve, overlaps, features and sign change at one catalyst strength.
    Spectrum,
    /// Catalyst sweep plus gap optimum and closing strengths.
    Sweep {
        #[serde(default = "yes")]
        optimize: bool,
        #[serde(default = "yes")]
        closings: bool,
    },
    Scaling {
        setting: ScalingSetting,
        n_list: Vec<usize>,
        #[serde(default = "default_policies")]
        policies: Vec<JxxPolicy>,
        /// Strength for the fixed policy.
        #[serde(default)]
        jxx: f64,
    },
    Intermediate {
        delta_w_list: Vec<f64>,
        #[serde(default = "default_target")]
        target_sx: f64,
    },
    Dynamics {
        #[serde(default = "default_time")]
        total_time: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_checkpoints")]
        checkpoints: usize,
    },
    Perturbation {
        #[serde(default = "default_lambda")]
        lambda_grid: Vec<f64>,
        /// Half-width of the `s` window around the catalyst-free crossing.
        #[serde(default = "default_half_width")]
        window: f64,
        #[serde(default = "default_window_points")]
        window_points: usize,
    },
}

fn yes() -> bool {
    true
}
fn default_policies() -> Vec<JxxPolicy> {
    vec![JxxPolicy::None]
}
fn default_target() -> f64 {
    0.9
}
fn default_time() -> f64 {
    1000.0
}
fn default_tolerance() -> f64 {
    EvolveOptions::default().tolerance
}
fn default_checkpoints() -> usize {
    500
}
fn default_lambda() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.025).collect()
}
fn default_half_width() -> f64 {
    0.05
}
fn default_window_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default)]
    pub space: SpaceMode,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub sweep: SweepSettings,
}

fn default_levels() -> usize {
    4
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            space: SpaceMode::Auto,
            levels: 4,
            sweep: SweepSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub catalyst: CatalystConfig,
    pub study: StudyConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Accepts either a bare config or a run manifest carrying one under `config`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let inner = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        let cfg: Self = serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// Checks everything that can be checked without running numerics.
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if let Some(j) = self.instance.jzz_raw {
            let inst = self.instance.build(j)?;
            if self.needs_pair() {
                self.catalyst.spec(&inst)?;
            }
        }
        if let Some(grid) = &self.catalyst.jxx_grid {
            if grid.is_empty() || grid.iter().any(|j| !(*j >= 0.0)) {
                return Err(Error::Config("jxx_grid must be nonempty and nonnegative".into()));
            }
        }
        if self.numerics.levels < 2 {
            return Err(Error::Config("numerics.levels must be at least 2".into()));
        }
        let sweep = &self.numerics.sweep;
        if sweep.grid_points < 3 {
            return Err(Error::Config("numerics.sweep.grid_points must be at least 3".into()));
        }
        if !(sweep.jxx_step > 0.0 && sweep.jxx_max >= 0.0) {
            return Err(Error::Config("numerics.sweep J_xx grid must have positive step".into()));
        }
        match &self.study {
            StudyConfig::Scaling { n_list, .. } => {
                if n_list.is_empty() || n_list.iter().any(|&n| n < 3 || n % 2 == 0) {
                    return Err(Error::Config("scaling n_list must hold odd sizes of at least 3".into()));
                }
            }
            StudyConfig::Intermediate { delta_w_list, target_sx } => {
                if delta_w_list.is_empty() || delta_w_list.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::Config("delta_w_list must be nonempty and positive".into()));
                }
                if !(*target_sx > 0.0 && *target_sx < 1.0) {
                    return Err(Error::Config("target_sx must lie in (0, 1)".into()));
                }
            }
            StudyConfig::Dynamics {
                total_time,
                tolerance,
                checkpoints,
            } => {
                if !(*total_time > 0.0) || !(*tolerance > 0.0) || *checkpoints == 0 {
                    return Err(Error::Config(
                        "dynamics needs positive total_time, tolerance and checkpoints".into(),
                    ));
                }
            }
            StudyConfig::Perturbation { window, window_points, .. } => {
                if !(*window > 0.0) || *window_points < 2 {
                    return Err(Error::Config("perturbation window must be positive with at least 2 points".into()));
                }
            }
            StudyConfig::Spectrum | StudyConfig::Sweep { .. } => {}
        }
        Ok(())
    }

    /// Whether the study places a catalyst pair, even at zero strength.
    pub fn needs_pair(&self) -> bool {
        self.catalyst.jxx > 0.0
            || self.catalyst.jxx_grid.is_some()
            || matches!(self.study, StudyConfig::Sweep { .. } | StudyConfig::Intermediate { .. })
    }

    pub fn study_name(&self) -> &'static str {
        match self.study {
            StudyConfig::Spectrum => "spectrum",
            StudyConfig::Sweep { .. } => "sweep",
            StudyConfig::Scaling { .. } => "scaling",
            StudyConfig::Intermediate { .. } => "intermediate",
            StudyConfig::Dynamics { .. } => "dynamics",
            StudyConfig::Perturbation { .. } => "perturbation",
        }
    }
}

pub const PRESET_NAMES: [&str; 7] = [
    "sgs5",
    "wgs5",
    "sgs-scaling",
    "wgs-scaling",
    "no-ac",
    "tripartite-243",
    "diabatic-1000",
];

fn bipartite(sizes: [usize; 2], delta_w: f64, jzz: Option<f64>, calibrate: Option<f64>) -> InstanceConfig {
    InstanceConfig {
        sizes: sizes.to_vec(),
        delta_w,
        jzz_raw: jzz,
        calibrate_sx: calibrate,
        e_scale: DEFAULT_E_SCALE,
        weights: None,
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let sweep = StudyConfig::Sweep {
        optimize: true,
        closings: true,
    };
    let cfg = match name {
        "sgs5" => RunConfig {
            instance: bipartite([2, 3], 0.01, None, Some(0.9)),
            catalyst: CatalystConfig::default(),
            study: sweep,
            numerics: NumericsConfig {
                space: SpaceMode::Sector,
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        "wgs5" => RunConfig {
            instance: bipartite([2, 3], 0.37, None, Some(0.9)),
            catalyst: CatalystConfig::default(),
            study: sweep,
            numerics: NumericsConfig {
                space: SpaceMode::Sector,
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        "sgs-scaling" | "wgs-scaling" => {
            let (setting, dw, j, policies) = if name == "sgs-scaling" {
                (ScalingSetting::Sgs, 0.01, 5.33, vec![JxxPolicy::None])
            } else {
                (ScalingSetting::Wgs, 0.37, 37.5, vec![JxxPolicy::None, JxxPolicy::Optimized])
            };
            RunConfig {
                instance: bipartite([2, 3], dw, Some(j), None),
                catalyst: CatalystConfig::default(),
                study: StudyConfig::Scaling {
                    setting,
                    n_list: vec![5, 7, 9, 11, 13],
                    policies,
                    jxx: 0.0,
                },
                numerics: NumericsConfig {
                    space: SpaceMode::Sector,
                    ..Default::default()
                },
                output: OutputConfig::default(),
            }
        }
        "no-ac" => RunConfig {
            instance: bipartite([3, 2], 0.01, Some(5.33), None),
            catalyst: CatalystConfig {
                sub_graph: 0,
                jxx: 2.0,
                jxx_grid: None,
            },
            study: StudyConfig::Spectrum,
            numerics: NumericsConfig::default(),
            output: OutputConfig::default(),
        },
        "tripartite-243" => RunConfig {
            instance: InstanceConfig {
                sizes: vec![2, 4, 3],
                delta_w: 0.01,
                jzz_raw: Some(5.33),
                calibrate_sx: None,
                e_scale: DEFAULT_E_SCALE,
                weights: None,
            },
            catalyst: CatalystConfig {
                sub_graph: 1,
                jxx: 1.0,
                jxx_grid: None,
            },
            study: StudyConfig::Spectrum,
            numerics: NumericsConfig::default(),
            output: OutputConfig::default(),
        },
        "diabatic-1000" => RunConfig {
            instance: bipartite([2, 3], 0.01, Some(5.33), None),
            catalyst: CatalystConfig {
                sub_graph: 1,
                jxx: 1.92,
                jxx_grid: None,
            },
            study: StudyConfig::Dynamics {
                total_time: 1000.0,
                tolerance: default_tolerance(),
                checkpoints: 500,
            },
            numerics: NumericsConfig::default(),
            output: OutputConfig::default(),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn tripartite_sizes() {
        assert_eq!(preset("tripartite-243").unwrap().instance.sizes, vec![2, 4, 3]);
    }

    #[test]
    fn diabatic_settings() {
        let cfg = preset("diabatic-1000").unwrap();
        assert_eq!(cfg.catalyst.jxx, 1.92);
        assert!(matches!(cfg.study, StudyConfig::Dynamics { total_time, .. } if total_time == 1000.0));
    }

    #[test]
    fn toml_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn minimal_toml() {
        let cfg = RunConfig::from_toml(
            r#"
            [instance]
            sizes = [2, 3]
            jzz_raw = 5.33

            [study]
            kind = "spectrum"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.instance.delta_w, 0.01);
        assert_eq!(cfg.numerics.sweep.grid_points, 201);
    }

    #[test]
    fn missing_sizes_is_config_error() {
        let err = RunConfig::from_toml("[instance]\njzz_raw = 5.33\n[study]\nkind = \"spectrum\"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rejects_both_penalty_sources() {
        let mut cfg = preset("sgs5").unwrap();
        cfg.instance.jzz_raw = Some(5.33);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn manifest_wrapper_is_accepted() {
        let cfg = preset("no-ac").unwrap();
        let manifest = serde_json::json!({ "tool": "x", "config": cfg });
        assert_eq!(RunConfig::from_json(&manifest.to_string()).unwrap(), cfg);
    }
}
