//! Planar nearly-constant-velocity target seen from a fixed station in range,
//! range rate and azimuth.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::scalar::csv_error;
use super::{FilterKind, ScenarioConfig, Variant};
use crate::adaptive::{AdaptiveConfig, FilterRegime, Mode, SwitchEvent};
use crate::error::{Error, Result};
use crate::espf::{box_noise_vertices, default_gate_r2, Espf, EspfConfig};
use crate::gaussian::{log_det_cov, nees, ukf_predict, ukf_update, GaussianBelief, SystemModel, UkfConfig};
use crate::linalg::cholesky_jittered;

const STATE_DIM: usize = 4;
const MEAS_DIM: usize = 3;

/// State `[x, y, vx, vy]`, measurement `[range, range rate, azimuth]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackModel {
    f: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    station: [f64; 2],
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl TrackModel {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let dt = cfg.dt;
        let mut f = DMatrix::identity(STATE_DIM, STATE_DIM);
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let qp = cfg.noise.process_psd;
        let mut q = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for axis in 0..2 {
            q[(axis, axis)] = qp * dt.powi(3) / 3.0;
            q[(axis, axis + 2)] = qp * dt * dt / 2.0;
            q[(axis + 2, axis)] = qp * dt * dt / 2.0;
            q[(axis + 2, axis + 2)] = qp * dt;
        }
        let n = &cfg.noise;
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
            n.range_sigma.powi(2),
            n.range_rate_sigma.powi(2),
            n.azimuth_sigma.powi(2),
        ]));
        Self {
            f,
            q,
            r,
            station: cfg.station,
        }
    }
}

impl SystemModel for TrackModel {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn meas_dim(&self) -> usize {
        MEAS_DIM
    }

    fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.f * x
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        let dx = x[0] - self.station[0];
        let dy = x[1] - self.station[1];
        let range = dx.hypot(dy);
        let rate = if range > 0.0 { (dx * x[2] + dy * x[3]) / range } else { 0.0 };
        DVector::from_vec(vec![range, rate, dy.atan2(dx)])
    }

    fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn measurement_noise(&self) -> &DMatrix<f64> {
        &self.r
    }

    fn residual(&self, y: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        let mut d = y - predicted;
        d[2] = wrap_angle(d[2]);
        d
    }
}

/// Truth, measurements and the filters' shared initial belief.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthStream {
    pub truth: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub initial: GaussianBelief,
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

/// Simulates the target. Nominal and stressed variants draw the same random
/// numbers, so they differ only by the injected maneuver and range bias.
pub fn simulate(cfg: &ScenarioConfig) -> Result<TruthStream> {
    cfg.validate()?;
    let model = TrackModel::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = &cfg.initial;
    let mut x = DVector::from_vec(vec![init.position[0], init.position[1], init.velocity[0], init.velocity[1]]);
    let sig = DVector::from_vec(vec![
        init.position_sigma,
        init.position_sigma,
        init.velocity_sigma,
        init.velocity_sigma,
    ]);
    let p0 = DMatrix::from_diagonal(&sig.map(|s| s * s));
    let m0 = &x + sig.component_mul(&standard_normals(&mut rng, STATE_DIM));
    let initial = GaussianBelief::new(m0, p0)?;
    let lq = cholesky_jittered(&model.q)?.l();
    let rs = DVector::from_vec(vec![
        cfg.noise.range_sigma,
        cfg.noise.range_rate_sigma,
        cfg.noise.azimuth_sigma,
    ]);
    let stressed = cfg.variant == Variant::Stress;
    let onset = cfg.stress_onset_step;
    let (mut truth, mut measurements) = (Vec::with_capacity(cfg.steps), Vec::with_capacity(cfg.steps));
    for k in 0..cfg.steps {
        let w = &lq * standard_normals(&mut rng, STATE_DIM);
        let v = rs.component_mul(&standard_normals(&mut rng, MEAS_DIM));
        x = model.transition(&x) + w;
        if stressed && k >= onset && k < onset + cfg.maneuver_steps {
            for axis in 0..2 {
                let a = cfg.maneuver_accel[axis];
                x[axis] += 0.5 * a * cfg.dt * cfg.dt;
                x[axis + 2] += a * cfg.dt;
            }
        }
        let mut y = model.measure(&x) + v;
        if stressed && k >= onset {
            y[0] += cfg.sensor_bias;
        }
        y[2] = wrap_angle(y[2]);
        truth.push(x.clone());
        measurements.push(y);
    }
    Ok(TruthStream {
        truth,
        measurements,
        initial,
    })
}

/// One line of `steps.csv`. The column set is the same for every filter;
/// diagnostics a filter does not produce are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub time: f64,
    pub truth_x: f64,
    pub truth_y: f64,
    pub truth_vx: f64,
    pub truth_vy: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_vx: f64,
    pub est_vy: f64,
    pub pos_error: f64,
    pub regime: Mode,
    pub log_det_cov: Option<f64>,
    pub nis: Option<f64>,
    pub nees: Option<f64>,
    pub w_hat: Option<f64>,
    pub w_bar: Option<f64>,
    pub log_det_mvee: Option<f64>,
    pub prune_count: Option<usize>,
    pub necessity_saturation: Option<f64>,
    pub surprisal: Option<f64>,
    pub alpha_c: Option<f64>,
    pub cloud_size: Option<usize>,
    pub h_pi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub step: usize,
    pub message: String,
}

/// Run-level statistics written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub filter: FilterKind,
    pub seed: u64,
    pub steps: usize,
    pub steps_completed: usize,
    pub failure: Option<FailureInfo>,
    pub final_position_error: Option<f64>,
    pub mean_position_error: Option<f64>,
    pub mean_nis_per_dim: Option<f64>,
    pub mean_nees_per_dim: Option<f64>,
    pub nis_bound_95: f64,
    pub stress_onset_step: usize,
    pub recovery_step: usize,
    pub first_nis_exceedance_step: Option<usize>,
    pub first_saturation_step: Option<usize>,
    pub max_surprisal: Option<f64>,
    pub mean_prune_count: Option<f64>,
    pub pre_stress_log_det: Option<f64>,
    pub post_recovery_log_det: Option<f64>,
    pub log_det_relative_change: Option<f64>,
    pub w_crit: f64,
    /// Longest run of consecutive post-recovery steps with `W̄ > w_crit`.
    pub post_recovery_w_bar_run: Option<usize>,
    pub post_recovery_nis_exceedances: Option<usize>,
    pub switch_count: usize,
    pub switches: Vec<SwitchEvent>,
}

/// Rows, summary and switch log of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<StepRow>,
    pub summary: RunSummary,
}

fn espf_config(cfg: &ScenarioConfig, model: &TrackModel) -> EspfConfig {
    EspfConfig {
        smolyak_level: cfg.espf.smolyak_level,
        gate_r2: cfg.espf.gate_r2.unwrap_or_else(|| default_gate_r2(MEAS_DIM)),
        sensor_spread: model.r.clone(),
        noise_vertices: box_noise_vertices(&model.q, cfg.espf.noise_sigma),
        mvee_tol: cfg.espf.mvee_tol,
        soft_scale: cfg.espf.soft_scale,
        hull_share: cfg.espf.hull_share,
    }
}

fn base_row(k: usize, cfg: &ScenarioConfig, truth: &DVector<f64>, mean: &DVector<f64>, regime: Mode) -> StepRow {
    StepRow {
        step: k,
        time: (k + 1) as f64 * cfg.dt,
        truth_x: truth[0],
        truth_y: truth[1],
        truth_vx: truth[2],
        truth_vy: truth[3],
        est_x: mean[0],
        est_y: mean[1],
        est_vx: mean[2],
        est_vy: mean[3],
        pos_error: (mean[0] - truth[0]).hypot(mean[1] - truth[1]),
        regime,
        log_det_cov: None,
        nis: None,
        nees: None,
        w_hat: None,
        w_bar: None,
        log_det_mvee: None,
        prune_count: None,
        necessity_saturation: None,
        surprisal: None,
        alpha_c: None,
        cloud_size: None,
        h_pi: None,
    }
}

fn fill_gaussian(row: &mut StepRow, belief: &GaussianBelief, truth: &DVector<f64>) {
    let ld = log_det_cov(belief);
    row.log_det_cov = (!ld.degenerate).then_some(ld.value);
    row.nees = nees(belief, truth).ok();
}

enum Runner {
    Ukf(GaussianBelief),
    Espf(Box<Espf>),
    Adaptive(Box<FilterRegime>, Box<AdaptiveConfig>),
}

/// Runs the configured filter over a stream. A filter error stops the run and
/// is recorded in the summary.
pub fn run_filter(cfg: &ScenarioConfig, stream: &TruthStream) -> Result<RunOutput> {
    let model = TrackModel::new(cfg);
    let ukf_cfg = UkfConfig::default();
    let espf_cfg = espf_config(cfg, &model);
    let mut runner = match cfg.filter {
        FilterKind::Ukf => Runner::Ukf(stream.initial.clone()),
        FilterKind::Espf => Runner::Espf(Box::new(Espf::from_belief(&stream.initial, espf_cfg, 1.0)?)),
        FilterKind::Adaptive => {
            let acfg = AdaptiveConfig {
                ukf: ukf_cfg,
                espf: espf_cfg,
                thresholds: cfg.thresholds,
                window_len: cfg.window_len,
                inflation: 1.0,
            };
            let regime = FilterRegime::probabilistic(stream.initial.clone(), MEAS_DIM, &acfg)?;
            Runner::Adaptive(Box::new(regime), Box::new(acfg))
        }
    };
    let mut rows = Vec::with_capacity(cfg.steps);
    let mut failure = None;
    for (k, (truth, y)) in stream.truth.iter().zip(&stream.measurements).enumerate() {
        let row = match &mut runner {
            Runner::Ukf(belief) => ukf_predict(belief, &model, &ukf_cfg)
                .and_then(|p| ukf_update(&p, &model, &ukf_cfg, y))
                .map(|u| {
                    *belief = u.belief;
                    let mut row = base_row(k, cfg, truth, &belief.mean, Mode::Probabilistic);
                    fill_gaussian(&mut row, belief, truth);
                    row.nis = Some(u.nis);
                    row
                }),
            Runner::Espf(espf) => espf.step(&model, y).and_then(|s| {
                let mut row = base_row(k, cfg, truth, &s.extract.mean, Mode::Possibilistic);
                fill_gaussian(&mut row, &espf.belief()?, truth);
                fill_espf(&mut row, &s);
                Ok(row)
            }),
            Runner::Adaptive(regime, acfg) => regime.step(&model, y, acfg).and_then(|r| {
                let mut row = base_row(k, cfg, truth, &r.mean, r.mode);
                fill_gaussian(&mut row, &GaussianBelief::new(r.mean.clone(), r.cov.clone())?, truth);
                row.nis = r.nis;
                row.w_hat = r.w_hat;
                if let Some(s) = &r.espf {
                    fill_espf(&mut row, s);
                }
                Ok(row)
            }),
        };
        match row {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(FailureInfo {
                    step: k,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    let switches = match &runner {
        Runner::Adaptive(regime, _) => regime.switches().to_vec(),
        _ => Vec::new(),
    };
    let summary = summarize(cfg, &rows, failure, switches);
    Ok(RunOutput { rows, summary })
}

fn fill_espf(row: &mut StepRow, s: &crate::espf::EspfStep) {
    row.w_bar = Some(s.report.w_bar);
    row.log_det_mvee = Some(s.log_det_mvee);
    row.prune_count = Some(s.prune_count);
    row.necessity_saturation = Some(s.report.necessity_saturation);
    row.surprisal = Some(s.report.surprisal);
    row.alpha_c = Some(s.report.alpha_c);
    row.cloud_size = Some(s.cloud_size);
    row.h_pi = Some(s.extract.h_pi);
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn longest_run(flags: impl Iterator<Item = bool>) -> usize {
    let (mut best, mut current) = (0, 0);
    for f in flags {
        current = if f { current + 1 } else { 0 };
        best = best.max(current);
    }
    best
}

fn summarize(cfg: &ScenarioConfig, rows: &[StepRow], failure: Option<FailureInfo>, switches: Vec<SwitchEvent>) -> RunSummary {
    let nis_bound = ChiSquared::new(MEAS_DIM as f64).expect("positive dof").inverse_cdf(0.95);
    let onset = cfg.stress_onset_step;
    let recovery = cfg.recovery_step();
    let win = cfg.comparison_window;
    let after = |from: usize| rows.iter().filter(move |r| r.step >= from);
    let window_mean = |from: usize, to: usize| {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.step >= from && r.step < to)
            .filter_map(|r| r.log_det_cov)
            .collect();
        (vals.len() == to - from).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let pre = window_mean(onset.saturating_sub(win), onset);
    let post = window_mean(recovery, recovery + win);
    let has_espf = rows.iter().any(|r| r.w_bar.is_some());
    let has_nis = rows.iter().any(|r| r.nis.is_some());
    RunSummary {
        variant: cfg.variant,
        filter: cfg.filter,
        seed: cfg.seed,
        steps: cfg.steps,
        steps_completed: rows.len(),
        failure,
        final_position_error: rows.last().map(|r| r.pos_error),
        mean_position_error: mean(rows.iter().map(|r| r.pos_error)),
        mean_nis_per_dim: mean(rows.iter().filter_map(|r| r.nis)).map(|m| m / MEAS_DIM as f64),
        mean_nees_per_dim: mean(rows.iter().filter_map(|r| r.nees)).map(|m| m / STATE_DIM as f64),
        nis_bound_95: nis_bound,
        stress_onset_step: onset,
        recovery_step: recovery,
        first_nis_exceedance_step: after(onset).find(|r| r.nis.is_some_and(|v| v > nis_bound)).map(|r| r.step),
        first_saturation_step: after(onset)
            .find(|r| r.necessity_saturation.is_some_and(|v| v >= cfg.saturation_threshold))
            .map(|r| r.step),
        max_surprisal: rows.iter().filter_map(|r| r.surprisal).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
        mean_prune_count: mean(rows.iter().filter_map(|r| r.prune_count.map(|p| p as f64))),
        pre_stress_log_det: pre,
        post_recovery_log_det: post,
        log_det_relative_change: pre.zip(post).map(|(a, b)| ((b - a) / a).abs()),
        w_crit: cfg.thresholds.w_crit,
        post_recovery_w_bar_run: has_espf
            .then(|| longest_run(after(recovery).map(|r| r.w_bar.is_some_and(|w| w > cfg.thresholds.w_crit)))),
        post_recovery_nis_exceedances: has_nis
            .then(|| after(recovery).filter(|r| r.nis.is_some_and(|v| v > nis_bound)).count()),
        switch_count: switches.len(),
        switches,
    }
}

/// Writes `steps.csv`, `summary.json` and `switches.csv` into `dir`.
pub fn write_run(dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("steps.csv")).map_err(csv_error)?;
    for row in &output.rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    let mut s = csv::Writer::from_path(dir.join("switches.csv")).map_err(csv_error)?;
    s.write_record(["step", "direction", "signal"]).map_err(csv_error)?;
    for e in &output.summary.switches {
        let direction = serde_json::to_value(e.direction)?;
        s.write_record([e.step.to_string(), direction.as_str().unwrap_or_default().to_string(), e.signal.to_string()])
            .map_err(csv_error)?;
    }
    s.flush()?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&output.summary)?)?;
    Ok(())
}

/// Simulates, filters and writes the logs to the configured output directory.
pub fn track2d_run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let stream = simulate(cfg)?;
    let output = run_filter(cfg, &stream)?;
    write_run(&cfg.output_dir, &output)?;
    Ok(output)
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn variants_share_random_draws() {
        let nominal = ScenarioConfig {
            steps: 40,
            stress_onset_step: 20,
            ..Default::default()
        };
        let stress = ScenarioConfig {
            variant: Variant::Stress,
            ..nominal.clone()
        };
        let a = simulate(&nominal).unwrap();
        let b = simulate(&stress).unwrap();
        assert_eq!(a.initial, b.initial);
        assert_eq!(a.truth[..20], b.truth[..20]);
        assert_eq!(a.measurements[..20], b.measurements[..20]);
        assert!((b.measurements[25][0] - a.measurements[25][0]) > 15.0);
    }

    #[test]
    fn longest_run_counts() {
        assert_eq!(longest_run([true, true, false, true].into_iter()), 2);
        assert_eq!(longest_run(std::iter::empty()), 0);
    }
}
