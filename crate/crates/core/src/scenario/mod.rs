//! Reproducible scenarios: the scalar contraction table and a 2-D tracking
//! run with nominal and stressed variants.

mod compare;
mod scalar;
mod track;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::espf::SmolyakLevel;
use crate::width::SwitchThresholds;

pub use compare::{compare_report, compare_runs, ComparisonReport, ComparisonRow};
pub use scalar::{format_scalar_table, scalar_demo, scalar_row, write_scalar_csv, ScalarRow, SCALAR_STAGES};
pub use track::{
    run_filter, simulate, track2d_run, write_run, FailureInfo, RunOutput, RunSummary, StepRow, TrackModel,
    TruthStream,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ScalarDemo,
    Track2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Nominal,
    Stress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    #[default]
    Ukf,
    Espf,
    Adaptive,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Self::Nominal),
            "stress" => Ok(Self::Stress),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ukf" => Ok(Self::Ukf),
            "espf" => Ok(Self::Espf),
            "adaptive" => Ok(Self::Adaptive),
            _ => Err(Error::Config(format!("unknown filter {s:?}"))),
        }
    }
}

/// Sensor and process noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// White-acceleration spectral density, m²/s³.
    pub process_psd: f64,
    pub range_sigma: f64,
    pub range_rate_sigma: f64,
    /// Radians.
    pub azimuth_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            process_psd: 1e-4,
            range_sigma: 1.0,
            range_rate_sigma: 0.01,
            azimuth_sigma: 1e-3,
        }
    }
}

/// True initial state and the filters' initial uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub position_sigma: f64,
    pub velocity_sigma: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            position: [10_000.0, 0.0],
            velocity: [0.0, 5.0],
            position_sigma: 10.0,
            velocity_sigma: 0.5,
        }
    }
}

/// Support-point filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EspfSettings {
    pub smolyak_level: SmolyakLevel,
    /// Gate radius `r²`; the `χ²` 99% quantile when absent.
    pub gate_r2: Option<f64>,
    pub soft_scale: Option<f64>,
    pub hull_share: f64,
    pub mvee_tol: f64,
    /// Half-width of the process-noise box in standard deviations.
    pub noise_sigma: f64,
}

impl Default for EspfSettings {
    fn default() -> Self {
        Self {
            smolyak_level: SmolyakLevel::Three,
            gate_r2: None,
            soft_scale: Some(1.0),
            hull_share: crate::espf::DEFAULT_HULL_SHARE,
            mvee_tol: 1e-3,
            noise_sigma: 3.0,
        }
    }
}

/// One scenario run, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub variant: Variant,
    pub filter: FilterKind,
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub stress_onset_step: usize,
    /// Acceleration applied during the maneuver, m/s².
    pub maneuver_accel: [f64; 2],
    pub maneuver_steps: usize,
    /// Constant range offset from the onset on, m.
    pub sensor_bias: f64,
    /// Steps after the maneuver ends before the run counts as recovered.
    pub recovery_delay: usize,
    /// Length of the pre-stress and post-recovery comparison windows.
    pub comparison_window: usize,
    pub station: [f64; 2],
    pub noise: NoiseConfig,
    pub initial: InitialConfig,
    pub thresholds: SwitchThresholds,
    pub window_len: usize,
    pub saturation_threshold: f64,
    pub espf: EspfSettings,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Track2d,
            variant: Variant::Nominal,
            filter: FilterKind::Ukf,
            seed: 7,
            steps: 300,
            dt: 1.0,
            stress_onset_step: 150,
            maneuver_accel: [2.0, 0.0],
            maneuver_steps: 5,
            sensor_bias: 20.0,
            recovery_delay: 30,
            comparison_window: 20,
            station: [0.0, 0.0],
            noise: NoiseConfig::default(),
            initial: InitialConfig::default(),
            thresholds: SwitchThresholds {
                w_crit: 0.2,
                hysteresis: 0.1,
                kappa_w: 0.2,
            },
            window_len: crate::width::DEFAULT_WINDOW,
            saturation_threshold: 0.99,
            espf: EspfSettings::default(),
            output_dir: PathBuf::from("runs/track"),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        let n = &self.noise;
        if !(n.process_psd >= 0.0 && n.range_sigma > 0.0 && n.range_rate_sigma > 0.0 && n.azimuth_sigma > 0.0) {
            return bad("noise levels must be positive");
        }
        if !(self.initial.position_sigma > 0.0 && self.initial.velocity_sigma > 0.0) {
            return bad("initial sigmas must be positive");
        }
        if self.window_len == 0 || self.comparison_window == 0 {
            return bad("window lengths must be positive");
        }
        if !(self.saturation_threshold > 0.0 && self.saturation_threshold <= 1.0) {
            return bad("saturation_threshold outside (0, 1]");
        }
        if !(self.espf.noise_sigma > 0.0) {
            return bad("espf.noise_sigma must be positive");
        }
        if let Some(r2) = self.espf.gate_r2 {
            if !(r2 > 0.0) {
                return bad("espf.gate_r2 must be positive");
            }
        }
        if self.variant == Variant::Stress && self.stress_onset_step >= self.steps {
            return bad("stress_onset_step must fall inside the run");
        }
        self.thresholds.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// First step counted as recovered from the stress injection.
    pub fn recovery_step(&self) -> usize {
        self.stress_onset_step + self.maneuver_steps + self.recovery_delay
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = ScenarioConfig::from_json(r#"{"filter": "espf", "variant": "stress", "seed": 3}"#).unwrap();
        assert_eq!(cfg.filter, FilterKind::Espf);
        assert_eq!(cfg.variant, Variant::Stress);
        assert_eq!(cfg.steps, 300);
        let cfg = ScenarioConfig::from_json(r#"{"espf": {"smolyak_level": 2}}"#).unwrap();
        assert_eq!(cfg.espf.smolyak_level, SmolyakLevel::Two);
    }

    #[test]
    fn config_errors() {
        for bad in [
            r#"{"steps": 0}"#,
            r#"{"dt": -1}"#,
            r#"{"unknown": 1}"#,
            r#"{"espf": {"smolyak_level": 5}}"#,
            r#"{"variant": "stress", "steps": 10, "stress_onset_step": 10}"#,
            r#"{"thresholds": {"w_crit": 0.95, "hysteresis": 0.1, "kappa_w": 0.5}}"#,
            "not json",
        ] {
            assert!(matches!(ScenarioConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
