//! Regime switching between the unscented filter and the support-point filter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::espf::{belief_support, cloud_belief, smolyak_grid, Espf, EspfConfig, EspfStep};
use crate::gaussian::{ukf_predict, ukf_update, GaussianBelief, SystemModel, UkfConfig};
use crate::possibility::SupportCloud;
use crate::width::{aggregate_width_cloud, w_hat, NeesWindow, SwitchThresholds, WidthReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Probabilistic,
    Possibilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToPossibilistic,
    ToProbabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchDecision {
    Switch(Direction),
    Hold,
}

/// Hysteretic rule: leave the probabilistic regime above `w_crit + Δ`, leave
/// the possibilistic regime below `w_crit − Δ`.
pub fn switch_decision(mode: Mode, signal: f64, thresholds: &SwitchThresholds) -> SwitchDecision {
    match mode {
        Mode::Probabilistic if signal > thresholds.upper() => SwitchDecision::Switch(Direction::ToPossibilistic),
        Mode::Possibilistic if signal < thresholds.lower() => SwitchDecision::Switch(Direction::ToProbabilistic),
        _ => SwitchDecision::Hold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub step: usize,
    pub direction: Direction,
    pub signal: f64,
}

/// Mode plus switch log, driven by one width signal per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchController {
    mode: Mode,
    thresholds: SwitchThresholds,
    log: Vec<SwitchEvent>,
}

impl SwitchController {
    pub fn new(mode: Mode, thresholds: SwitchThresholds) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            mode,
            thresholds,
            log: Vec::new(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn log(&self) -> &[SwitchEvent] {
        &self.log
    }

    pub fn thresholds(&self) -> &SwitchThresholds {
        &self.thresholds
    }

    /// Applies the rule and records a switch if one fires.
    pub fn observe(&mut self, step: usize, signal: f64) -> Result<Option<Direction>> {
        if !(0.0..=1.0).contains(&signal) {
            return Err(Error::InvalidArgument(format!("width signal {signal} outside [0, 1]")));
        }
        if let Some(last) = self.log.last() {
            if step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "step {step} not after last switch at {}",
                    last.step
                )));
            }
        }
        match switch_decision(self.mode, signal, &self.thresholds) {
            SwitchDecision::Hold => Ok(None),
            SwitchDecision::Switch(direction) => {
                self.mode = match direction {
                    Direction::ToPossibilistic => Mode::Possibilistic,
                    Direction::ToProbabilistic => Mode::Probabilistic,
                };
                self.log.push(SwitchEvent { step, direction, signal });
                Ok(Some(direction))
            }
        }
    }
}

/// Seeds a sparse grid on the `3σ · inflation` shell of the belief. The flag
/// reports a covariance that needed jitter.
pub fn ukf_to_espf_handoff(
    belief: &GaussianBelief,
    cfg: &EspfConfig,
    inflation: f64,
) -> Result<(SupportCloud, bool)> {
    let support = belief_support(belief, inflation)?;
    let cloud = smolyak_grid(&support, cfg.smolyak_level)?;
    Ok((cloud, support.degenerate))
}

/// Gaussian equivalent of a cloud, undoing the shell and grid scaling used by
/// [`ukf_to_espf_handoff`]. The flag reports a single-point cloud.
pub fn espf_to_ukf_handoff(
    cloud: &SupportCloud,
    cfg: &EspfConfig,
    inflation: f64,
) -> Result<(GaussianBelief, bool)> {
    cloud_belief(cloud, cfg.smolyak_level, inflation)
}

/// Settings for the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub ukf: UkfConfig,
    pub espf: EspfConfig,
    pub thresholds: SwitchThresholds,
    pub window_len: usize,
    pub inflation: f64,
}

/// Active filter state.
#[derive(Debug, Clone)]
pub enum ActiveFilter {
    Gaussian(GaussianBelief),
    Support(Box<Espf>),
}

/// Regime state owned by one adaptive loop.
#[derive(Debug, Clone)]
pub struct FilterRegime {
    filter: ActiveFilter,
    controller: SwitchController,
    window: NeesWindow,
    /// Width of the most recent possibilistic posterior.
    last_w_bar: Option<f64>,
    step: usize,
}

/// Diagnostics of one adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRecord {
    pub step: usize,
    pub mode: Mode,
    pub switched: Option<Direction>,
    /// Signal the switch rule saw, if any.
    pub signal: Option<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub nis: Option<f64>,
    pub w_hat: Option<f64>,
    pub report: Option<WidthReport>,
    pub espf: Option<EspfStep>,
}

impl FilterRegime {
    /// Starts in the probabilistic regime.
    pub fn probabilistic(belief: GaussianBelief, meas_dim: usize, cfg: &AdaptiveConfig) -> Result<Self> {
        Ok(Self {
            filter: ActiveFilter::Gaussian(belief),
            controller: SwitchController::new(Mode::Probabilistic, cfg.thresholds)?,
            window: NeesWindow::new(cfg.window_len, meas_dim)?,
            last_w_bar: None,
            step: 0,
        })
    }

    pub fn mode(&self) -> Mode {
        self.controller.mode()
    }

    pub fn switches(&self) -> &[SwitchEvent] {
        self.controller.log()
    }

    pub fn filter(&self) -> &ActiveFilter {
        &self.filter
    }

    pub fn window(&self) -> &NeesWindow {
        &self.window
    }

    fn signal(&self, cfg: &AdaptiveConfig) -> Option<f64> {
        match self.filter {
            ActiveFilter::Gaussian(_) => w_hat(&self.window, &cfg.thresholds).ok(),
            ActiveFilter::Support(_) => self.last_w_bar,
        }
    }

    fn hand_off(&mut self, direction: Direction, cfg: &AdaptiveConfig) -> Result<()> {
        self.filter = match (&self.filter, direction) {
            (ActiveFilter::Gaussian(b), Direction::ToPossibilistic) => {
                let espf = Espf::from_belief(b, cfg.espf.clone(), cfg.inflation)?;
                self.last_w_bar = Some(aggregate_width_cloud(espf.cloud()));
                ActiveFilter::Support(Box::new(espf))
            }
            (ActiveFilter::Support(e), Direction::ToProbabilistic) => {
                self.window.clear();
                self.last_w_bar = None;
                ActiveFilter::Gaussian(espf_to_ukf_handoff(e.cloud(), &cfg.espf, 1.0)?.0)
            }
            _ => return Ok(()),
        };
        Ok(())
    }

    /// Switch decision, handoff if needed, then one predict and update.
    pub fn step<M: SystemModel + ?Sized>(
        &mut self,
        model: &M,
        y: &DVector<f64>,
        cfg: &AdaptiveConfig,
    ) -> Result<AdaptiveRecord> {
        let step = self.step;
        let signal = self.signal(cfg);
        let switched = match signal {
            Some(s) => self.controller.observe(step, s.clamp(0.0, 1.0))?,
            None => None,
        };
        if let Some(direction) = switched {
            self.hand_off(direction, cfg)?;
        }
        let record = match &mut self.filter {
            ActiveFilter::Gaussian(belief) => {
                let predicted = ukf_predict(belief, model, &cfg.ukf)?;
                let update = ukf_update(&predicted, model, &cfg.ukf, y)?;
                self.window.push(update.nis)?;
                *belief = update.belief.clone();
                AdaptiveRecord {
                    step,
                    mode: Mode::Probabilistic,
                    switched,
                    signal,
                    mean: update.belief.mean,
                    cov: update.belief.cov,
                    nis: Some(update.nis),
                    w_hat: w_hat(&self.window, &cfg.thresholds).ok(),
                    report: None,
                    espf: None,
                }
            }
            ActiveFilter::Support(espf) => {
                let out = espf.step(model, y)?;
                self.last_w_bar = Some(out.report.w_bar);
                AdaptiveRecord {
                    step,
                    mode: Mode::Possibilistic,
                    switched,
                    signal,
                    mean: out.extract.mean.clone(),
                    cov: espf.belief()?.cov,
                    nis: None,
                    w_hat: None,
                    report: Some(out.report),
                    espf: Some(out),
                }
            }
        };
        self.step += 1;
        Ok(record)
    }
}
