use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "CONE_FORGE_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Config {
    pub step: f64,
    pub forms: usize,
    pub residual_tol: f64,
    pub order_tol: f64,
}

impl Default for G2Config {
    fn default() -> Self {
        G2Config { step: 1e-4, forms: 100, residual_tol: 1e-6, order_tol: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesselConfig {
    pub wronskian_tol: f64,
    pub derivative_tol: f64,
}

impl Default for BesselConfig {
    fn default() -> Self {
        BesselConfig { wronskian_tol: 1e-9, derivative_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StenzelConfig {
    pub w_max: f64,
    pub steps: usize,
    pub profile_tol: f64,
    pub closed_form_tol: f64,
    pub ma_step: f64,
    pub cone_tol: f64,
    pub smoothing_tol: f64,
    /// the flat control must exceed this
    pub control_min: f64,
    pub min_chart: f64,
    pub max_w: f64,
}

impl Default for StenzelConfig {
    fn default() -> Self {
        StenzelConfig {
            w_max: 22.0,
            steps: 4400,
            profile_tol: 1e-3,
            closed_form_tol: 1e-8,
            ma_step: 1e-3,
            cone_tol: 1e-4,
            smoothing_tol: 1e-3,
            control_min: 0.1,
            min_chart: 0.3,
            max_w: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    pub r_min: f64,
    pub points: usize,
    pub residual_tol: f64,
    pub kernel_tol: f64,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig { r_min: 1e-8, points: 2048, residual_tol: 1e-6, kernel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub bound: u64,
    pub avoid_bound: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { bound: 1000, avoid_bound: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format: OutputFormat,
    pub g2: G2Config,
    pub bessel: BesselConfig,
    pub stenzel: StenzelConfig,
    pub edge: EdgeConfig,
    pub lattice: LatticeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            format: OutputFormat::Csv,
            g2: G2Config::default(),
            bessel: BesselConfig::default(),
            stenzel: StenzelConfig::default(),
            edge: EdgeConfig::default(),
            lattice: LatticeConfig::default(),
        }
    }
}

impl RunConfig {
    /// `--config` first, then $CONE_FORGE_CONFIG, then defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, String> {
        let path: Option<PathBuf> = explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| format!("config {}: {e}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let tols = [
            ("g2.step", self.g2.step),
            ("g2.residual_tol", self.g2.residual_tol),
            ("g2.order_tol", self.g2.order_tol),
            ("bessel.wronskian_tol", self.bessel.wronskian_tol),
            ("bessel.derivative_tol", self.bessel.derivative_tol),
            ("stenzel.w_max", self.stenzel.w_max),
            ("stenzel.profile_tol", self.stenzel.profile_tol),
            ("stenzel.closed_form_tol", self.stenzel.closed_form_tol),
            ("stenzel.ma_step", self.stenzel.ma_step),
            ("stenzel.cone_tol", self.stenzel.cone_tol),
            ("stenzel.smoothing_tol", self.stenzel.smoothing_tol),
            ("stenzel.control_min", self.stenzel.control_min),
            ("stenzel.min_chart", self.stenzel.min_chart),
            ("stenzel.max_w", self.stenzel.max_w),
            ("edge.r_min", self.edge.r_min),
            ("edge.residual_tol", self.edge.residual_tol),
            ("edge.kernel_tol", self.edge.kernel_tol),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("config {name} = {v} must be positive and finite"));
            }
        }
        if self.g2.forms == 0 || self.lattice.bound == 0 {
            return Err("config g2.forms and lattice.bound must be at least 1".into());
        }
        if self.edge.r_min >= 1.0 {
            return Err("config edge.r_min must lie below 1".into());
        }
        Ok(())
    }
}
