//! Monte-Carlo sweeps over one scene parameter.
//!
//! Each `(axis point, trial)` pair is an independent work unit whose random
//! draws come only from `(master_seed, trial_index)`; the same trial index
//! reuses its seeds at every axis point. Results are collected in
//! `(point, trial, estimator)` order whatever the thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::{estimate_anm, AnmConfig, AnmSettings};
use crate::crb::{crb_report, identity_covariance};
use crate::error::{Error, Result};
use crate::music::{estimate_music, MusicConfig, MusicSettings};
use crate::rng::TrialSeeds;
use crate::scene::{
    build_measurement, synthesize_echo, MeasurementKind, MeasurementSpec, SceneConfig, SceneFile,
};
use crate::spectrum::{DoaEstimate, Method};

/// Target directions for the `n_targets` axis, taken in this order.
pub const TARGET_ANGLE_ORDER_DEG: [f64; 9] = [-60.0, 60.0, -45.0, 45.0, -30.0, 30.0, -15.0, 15.0, 0.0];

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TxPowerDbm,
    NTargets,
    /// `M` with `N = T − M` for a fixed element budget `T`.
    NSesTradeoff,
    NSlots,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::TxPowerDbm => "tx_power_dbm",
            SweepAxis::NTargets => "n_targets",
            SweepAxis::NSesTradeoff => "n_ses_tradeoff",
            SweepAxis::NSlots => "n_slots",
        }
    }
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_estimators() -> Vec<Method> {
    vec![Method::Anm, Method::Music]
}

/// On-disk sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Method>,
    /// Desk-scale scene when absent.
    #[serde(default)]
    pub base_scene: Option<SceneFile>,
    /// Overrides the base scene's measurement schedule.
    #[serde(default)]
    pub measurement: Option<MeasurementSpec>,
    /// Element budget `T = M + N`, required by the `n_ses_tradeoff` axis.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub anm: AnmSettings,
    #[serde(default)]
    pub music: MusicSettings,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        crate::config::read_json(path)
    }

    pub fn to_spec(&self) -> Result<SweepSpec> {
        let (base_scene, scene_measurement) = match &self.base_scene {
            Some(file) => (file.to_scene()?, file.measurement),
            None => (SceneConfig::desk_scale(), MeasurementSpec::default()),
        };
        let spec = SweepSpec {
            axis: self.axis,
            points: self.points.clone(),
            trials: self.trials,
            master_seed: self.master_seed,
            estimators: self.estimators.clone(),
            base_scene,
            measurement: self.measurement.unwrap_or(scene_measurement),
            budget: self.budget,
            noiseless: self.noiseless,
            anm: self.anm,
            music: self.music.resolve()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<Method>,
    pub base_scene: SceneConfig,
    pub measurement: MeasurementSpec,
    pub budget: Option<usize>,
    pub noiseless: bool,
    /// Resolved per point, since the default `β` depends on `N`.
    pub anm: AnmSettings,
    pub music: MusicConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.points.is_empty() {
            return Err(Error::Config("sweep needs at least one point".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("sweep needs at least one estimator".into()));
        }
        self.music.validate()?;
        for &p in &self.points {
            let scene = self.scene_at(p)?;
            self.anm.resolve(scene.n_res)?;
        }
        Ok(())
    }

    /// Base scene with the axis parameter set to `point`.
    pub fn scene_at(&self, point: f64) -> Result<SceneConfig> {
        let mut scene = self.base_scene.clone();
        match self.axis {
            SweepAxis::TxPowerDbm => {
                if !point.is_finite() {
                    return Err(Error::Config(format!("invalid transmit power {point} dBm")));
                }
                scene = scene.with_tx_power_dbm(point);
            }
            SweepAxis::NTargets => {
                let k = count(point, "n_targets")?;
                if k > TARGET_ANGLE_ORDER_DEG.len() {
                    return Err(Error::Config(format!(
                        "n_targets axis supports at most {} targets, got {k}",
                        TARGET_ANGLE_ORDER_DEG.len()
                    )));
                }
                scene = scene.with_target_angles_deg(&TARGET_ANGLE_ORDER_DEG[..k]);
            }
            SweepAxis::NSesTradeoff => {
                let budget = self
                    .budget
                    .ok_or_else(|| Error::Config("n_ses_tradeoff axis needs a budget".into()))?;
                let m = count(point, "n_ses")?;
                if m >= budget {
                    return Err(Error::Config(format!(
                        "n_ses = {m} leaves no REs within budget {budget}"
                    )));
                }
                scene.n_ses = m;
                scene.n_res = budget - m;
                // keep D·Dᴴ invertible
                scene.n_slots = scene.n_slots.max(scene.n_res);
            }
            SweepAxis::NSlots => {
                scene.n_slots = count(point, "n_slots")?;
            }
        }
        scene.validate()?;
        Ok(scene)
    }
}

fn count(point: f64, what: &str) -> Result<usize> {
    if point >= 1.0 && point.fract() == 0.0 && point <= 1e6 {
        Ok(point as usize)
    } else {
        Err(Error::Config(format!("{what} must be a positive integer, got {point}")))
    }
}

/// One estimator's result on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub axis_value: f64,
    pub trial: usize,
    pub estimator: Method,
    pub true_angles_deg: Vec<f64>,
    /// Ascending; empty when `failed`.
    pub est_angles_deg: Vec<f64>,
    pub sq_err_sum_deg2: Option<f64>,
    pub solver_iters: Option<usize>,
    pub degraded: bool,
    pub failed: bool,
}

/// Sum of squared differences after sorting both lists ascending.
pub fn matched_squared_error(truth: &[f64], estimate: &[f64]) -> f64 {
    let mut t = truth.to_vec();
    let mut e = estimate.to_vec();
    t.sort_by(f64::total_cmp);
    e.sort_by(f64::total_cmp);
    t.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum()
}

/// `√(Σ‖θ − θ̂‖² / (K·trials))` over the non-failed records, in degrees.
pub fn rmse<'a, I>(records: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let (mut total, mut weight) = (0.0, 0usize);
    for r in records {
        if let (false, Some(sq)) = (r.failed, r.sq_err_sum_deg2) {
            total += sq;
            weight += r.true_angles_deg.len();
        }
    }
    if weight == 0 {
        return Err(Error::EmptyResult);
    }
    Ok((total / weight as f64).sqrt())
}

/// Everything needed to run trials at one axis point.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub axis_value: f64,
    pub scene: SceneConfig,
    pub measurement: MeasurementSpec,
    pub estimators: Vec<Method>,
    pub anm: AnmConfig,
    pub music: MusicConfig,
    pub noiseless: bool,
}

impl TrialSetup {
    /// Random-phase schedules are redrawn every trial, DFT is fixed.
    pub fn run_trial(&self, master_seed: u64, trial: usize) -> Vec<TrialRecord> {
        let seeds = TrialSeeds::derive(master_seed, trial as u64);
        let scene = &self.scene;
        let d_seed = match self.measurement.kind {
            MeasurementKind::Dft => self.measurement.seed,
            MeasurementKind::RandomPhase => seeds.measurement,
        };
        let d = build_measurement(self.measurement.kind, scene.n_res, scene.n_slots, d_seed);
        let echo = synthesize_echo(scene, &d, seeds.noise, self.noiseless);
        let k = scene.n_targets();
        let truth: Vec<f64> = scene.target_angles().iter().map(|a| a.to_degrees()).collect();

        self.estimators
            .iter()
            .map(|&method| {
                let outcome: Result<DoaEstimate> = echo.as_ref().map_err(clone_err).and_then(|echo| match method {
                    Method::Anm => estimate_anm(echo, &d, scene.irs_arrival_angle, k, &self.anm),
                    Method::Music => estimate_music(echo, k, &self.music),
                });
                let mut record = TrialRecord {
                    axis_value: self.axis_value,
                    trial,
                    estimator: method,
                    true_angles_deg: truth.clone(),
                    est_angles_deg: Vec::new(),
                    sq_err_sum_deg2: None,
                    solver_iters: None,
                    degraded: false,
                    failed: true,
                };
                if let Ok(est) = outcome {
                    let angles: Vec<f64> = est.angles.iter().map(|a| a.to_degrees()).collect();
                    record.sq_err_sum_deg2 = Some(matched_squared_error(&truth, &angles));
                    record.est_angles_deg = angles;
                    record.solver_iters = est.solver_iterations;
                    record.degraded = est.degraded;
                    record.failed = false;
                }
                record
            })
            .collect()
    }
}

// Error holds non-Clone sources; only its message survives here.
fn clone_err(e: &Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(what),
        Error::Singular { eigenvalue } => Error::Singular { eigenvalue: *eigenvalue },
        other => Error::Config(other.to_string()),
    }
}

/// Covariance assumed for the RCRB column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcrbBasis {
    /// `D·Dᴴ` of the fixed DFT schedule.
    Actual,
    /// `L·I`, the expectation of `D·Dᴴ` under random phases.
    Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub estimator: Method,
    /// `None` when every trial failed.
    pub rmse_deg: Option<f64>,
    /// `None` when the Fisher matrix is singular.
    pub rcrb_deg: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub summary: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
    pub rcrb_basis: RcrbBasis,
}

/// RCRB in degrees for `scene` under the sweep's measurement schedule.
pub fn rcrb_deg(scene: &SceneConfig, measurement: &MeasurementSpec) -> Result<(f64, RcrbBasis)> {
    let (r_d, basis) = match measurement.kind {
        MeasurementKind::Dft => (
            measurement.build(scene.n_res, scene.n_slots).covariance(),
            RcrbBasis::Actual,
        ),
        MeasurementKind::RandomPhase => (identity_covariance(scene.n_res, scene.n_slots), RcrbBasis::Expected),
    };
    let report = crb_report(scene, &r_d)?;
    Ok((report.rcrb.to_degrees(), basis))
}

/// Runs every trial of every point. `jobs = None` uses all cores.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let setups = spec
        .points
        .iter()
        .map(|&p| {
            let scene = spec.scene_at(p)?;
            Ok(TrialSetup {
                axis_value: p,
                anm: spec.anm.resolve(scene.n_res)?,
                scene,
                measurement: spec.measurement,
                estimators: spec.estimators.clone(),
                music: spec.music,
                noiseless: spec.noiseless,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let units: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let records: Vec<TrialRecord> = pool.install(|| {
        units
            .par_iter()
            .map(|&(p, t)| setups[p].run_trial(spec.master_seed, t))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });

    let rcrb_basis = match spec.measurement.kind {
        MeasurementKind::Dft => RcrbBasis::Actual,
        MeasurementKind::RandomPhase => RcrbBasis::Expected,
    };
    let mut summary = Vec::new();
    for setup in &setups {
        let rcrb = rcrb_deg(&setup.scene, &spec.measurement).ok().map(|r| r.0);
        for &method in &spec.estimators {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.axis_value == setup.axis_value && r.estimator == method)
                .collect();
            summary.push(SummaryRow {
                axis: spec.axis,
                axis_value: setup.axis_value,
                estimator: method,
                rmse_deg: rmse(rows.iter().copied()).ok(),
                rcrb_deg: rcrb,
                trials: rows.len(),
                failures: rows.iter().filter(|r| r.failed).count(),
            });
        }
    }
    Ok(SweepResult {
        summary,
        records,
        rcrb_basis,
    })
}

pub const SUMMARY_HEADER: [&str; 7] = ["axis", "axis_value", "estimator", "rmse_deg", "rcrb_deg", "trials", "failures"];

pub const DETAIL_HEADER: [&str; 9] = [
    "axis_value",
    "trial",
    "estimator",
    "true_angles_deg",
    "est_angles_deg",
    "sq_err_sum_deg2",
    "solver_iters",
    "degraded",
    "failed",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn angle_list(angles: &[f64]) -> String {
    angles.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a header and string rows to `path`.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Missing RMSE or RCRB values are written as empty cells.
pub fn export_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_csv(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.axis.label().to_string(),
                r.axis_value.to_string(),
                r.estimator.label().to_string(),
                opt(r.rmse_deg),
                opt(r.rcrb_deg),
                r.trials.to_string(),
                r.failures.to_string(),
            ]
        }),
    )
}

pub fn export_detail_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    write_csv(
        path,
        &DETAIL_HEADER,
        records.iter().map(|r| {
            vec![
                r.axis_value.to_string(),
                r.trial.to_string(),
                r.estimator.label().to_string(),
                angle_list(&r.true_angles_deg),
                angle_list(&r.est_angles_deg),
                opt(r.sq_err_sum_deg2),
                opt(r.solver_iters),
                r.degraded.to_string(),
                r.failed.to_string(),
            ]
        }),
    )
}
