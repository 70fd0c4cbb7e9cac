//! Monte Carlo ensembles, empirical steady-state metrics and the comparison
//! against the closed-form predictions of [`crate::analysis`].
//!
//! Runs are grouped in fixed chunks of [`RUN_CHUNK`]; chunks execute on the
//! rayon pool and are reduced in index order, so results are bit-identical
//! for any thread count.

pub mod config;

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, AveragedSystem, Metrics, SteadyStateMethod, SteadyStateReport};
use crate::estimators::{
    AdmomNetwork, CentralizedRls, DrlsNetwork, DrlsParams, EstimatorError, LocalRls, NetworkEstimator,
};
use crate::numkit::{self, Vector};
use crate::signalgen::{
    self, GaussianLinkNoise, IdealLinks, IidSpec, LinkNoise, SensorEnsembleModel, SeedTree, SignalError,
    SnapshotStream,
};
use crate::topology::{Topology, TopologyError};

pub use config::{Algorithm, ConfigError, ConfigFileError, ExperimentConfig, ScenarioSpec, TopologySpec};

/// Runs per parallel work item.
pub const RUN_CHUNK: usize = 4;
/// Attempts allowed when drawing a connected geometric graph.
pub const GEOMETRIC_ATTEMPTS: usize = 1000;
/// Default theory-vs-simulation tolerance.
pub const DEFAULT_TOLERANCE_DB: f64 = 1.0;
/// Chebyshev level used by the WSB check.
pub const WSB_LEVEL: f64 = 0.01;
/// Linear metric values at or below this count as zero when both sides of a
/// comparison are, so noiseless setups report an exact match.
pub const ZERO_FLOOR: f64 = 1e-20;

pub const SERIES_CSV_HEADER: &str = "t,msd_lin,msd_db,emse_lin,emse_db,mse_lin,mse_db";
pub const PER_SENSOR_CSV_HEADER: &str = "t,sensor_id,msd_lin,msd_db,emse_lin,emse_db,mse_lin,mse_db";
pub const COMPARISON_CSV_HEADER: &str = "metric,scope,predicted_db,empirical_db,delta_db,pass";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    ConfigFile(#[from] ConfigFileError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("scenario: {0}")]
    Signal(#[from] SignalError),
    #[error("estimator setup: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("run {run} failed at step {step}: {msg}")]
    RunFailed { run: usize, step: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code: 1 for usage and configuration problems, 2 for
    /// numerical or stability refusals, 3 for a failed run.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Analysis(_) => 2,
            HarnessError::Estimator(EstimatorError::Numerical(_) | EstimatorError::Diverged { .. }) => 2,
            HarnessError::Topology(TopologyError::GenerationFailed { .. }) => 2,
            HarnessError::RunFailed { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    Ok(match spec {
        TopologySpec::Geometric { sensors, range, seed } => {
            Topology::random_geometric(*sensors, *range, *seed, GEOMETRIC_ATTEMPTS)?
        }
        TopologySpec::EdgeList(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Io(format!("cannot read edge list {}: {e}", path.display())))?;
            Topology::parse_edge_list(&text)?
        }
        TopologySpec::Complete(j) => Topology::complete(*j)?,
        TopologySpec::Ring(j) => Topology::ring(*j)?,
        TopologySpec::Path(j) => Topology::path(*j)?,
    })
}

pub fn build_model(spec: &ScenarioSpec, sensors: usize, link_noise: bool) -> Result<SensorEnsembleModel> {
    let model = match spec {
        ScenarioSpec::Reference { seed } => signalgen::paper_scenario(sensors, *seed),
        ScenarioSpec::Iid { p, regressor, sensing_noise, sigma2_eta, seed } => {
            let spec = IidSpec {
                regressor_cov: regressor.clone(),
                sensing_noise: sensing_noise.clone(),
                link_noise_var: *sigma2_eta,
                s0: None,
            };
            signalgen::iid_scenario(sensors, *p, &spec, *seed)?
        }
    };
    model.validate()?;
    Ok(if link_noise { model } else { model.with_ideal_links() })
}

/// A configuration together with its realised topology and sensor model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub topology: Topology,
    pub model: SensorEnsembleModel,
}

/// Ensemble-averaged metrics for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub sensors: usize,
    pub horizon: usize,
    /// Row-major `[t−1][j]`.
    pub per_sensor: Vec<Metrics>,
    pub global: Vec<Metrics>,
}

impl MetricSeries {
    pub fn sensor(&self, t: usize, j: usize) -> &Metrics {
        &self.per_sensor[(t - 1) * self.sensors + j]
    }

    /// Global metrics at time `t ≥ 1`.
    pub fn at(&self, t: usize) -> &Metrics {
        &self.global[t - 1]
    }

    pub fn global_csv(&self) -> String {
        let mut out = String::from(SERIES_CSV_HEADER);
        out.push('\n');
        for (i, m) in self.global.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, metric_fields(m));
        }
        out
    }

    pub fn per_sensor_csv(&self) -> String {
        let mut out = String::from(PER_SENSOR_CSV_HEADER);
        out.push('\n');
        for t in 1..=self.horizon {
            for j in 0..self.sensors {
                let _ = writeln!(out, "{t},{j},{}", metric_fields(self.sensor(t, j)));
            }
        }
        out
    }
}

fn metric_fields(m: &Metrics) -> String {
    format!("{:e},{:.6},{:e},{:.6},{:e},{:.6}", m.msd, m.msd_db(), m.emse, m.emse_db(), m.mse, m.mse_db())
}

/// Everything an ensemble produces.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub series: MetricSeries,
    /// Ensemble mean of `s_j(T)`.
    pub mean_final: Vec<Vector>,
    /// Per run, `Σ_j ‖s_j(t) − s₀‖²` for `t = 1..=T`.
    pub error_traces: Vec<Vec<f64>>,
    /// Per run and sensor, the tail mean of `e_j²(t) − (h_jᵀβ₁,j(t−1))²`
    /// over the last `window` steps.
    pub noise_floor: Vec<Vec<f64>>,
    pub runs: usize,
}

struct RunOutput {
    samples: Vec<[f64; 3]>,
    last: Vec<Vector>,
    trace: Vec<f64>,
    floor: Vec<f64>,
}

struct ChunkSum {
    samples: Vec<[f64; 3]>,
    last: Vec<Vector>,
    traces: Vec<Vec<f64>>,
    floors: Vec<Vec<f64>>,
}

/// Per-sensor tail means plus a flatness diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSteadyState {
    pub window: usize,
    pub per_sensor: Vec<Metrics>,
    pub global: Metrics,
    /// Standard deviation of the global curves over the window, in dB.
    pub global_std_db: Metrics,
}

/// Mean of the last `window` samples and the standard deviation of their dB
/// values.
pub fn tail_stats(values: &[f64], window: usize) -> Result<(f64, f64)> {
    if window == 0 || window > values.len() {
        return Err(HarnessError::InvalidParameter(format!(
            "window {window} outside 1..={}",
            values.len()
        )));
    }
    let tail = &values[values.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let db: Vec<f64> = tail.iter().map(|&v| numkit::to_db(v)).collect();
    let std = if db.iter().all(|v| v.is_finite()) {
        let m = db.iter().sum::<f64>() / window as f64;
        (db.iter().map(|v| (v - m).powi(2)).sum::<f64>() / window as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, std))
}

/// Steady-state read-off: arithmetic means over the last `window` samples.
/// The window may not reach into the first `burn_in` steps.
pub fn steady_state_empirical(series: &MetricSeries, burn_in: usize, window: usize) -> Result<EmpiricalSteadyState> {
    if burn_in >= series.horizon || window == 0 || window > series.horizon - burn_in {
        return Err(HarnessError::InvalidParameter(format!(
            "window {window} must lie in 1..={} (horizon {} − burn-in {burn_in})",
            series.horizon.saturating_sub(burn_in),
            series.horizon
        )));
    }
    let column = |f: &dyn Fn(&Metrics) -> f64, pick: &dyn Fn(usize) -> Metrics| -> Result<(f64, f64)> {
        let v: Vec<f64> = (1..=series.horizon).map(|t| f(&pick(t))).collect();
        tail_stats(&v, window)
    };
    let summarize = |pick: &dyn Fn(usize) -> Metrics| -> Result<(Metrics, Metrics)> {
        let (msd, msd_s) = column(&|m| m.msd, pick)?;
        let (emse, emse_s) = column(&|m| m.emse, pick)?;
        let (mse, mse_s) = column(&|m| m.mse, pick)?;
        Ok((Metrics { msd, emse, mse }, Metrics { msd: msd_s, emse: emse_s, mse: mse_s }))
    };
    let (global, global_std_db) = summarize(&|t| *series.at(t))?;
    let per_sensor = (0..series.sensors)
        .map(|j| summarize(&|t| *series.sensor(t, j)).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalSteadyState { window, per_sensor, global, global_std_db })
}

/// One line of the theory-vs-simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    /// `global` or the sensor id.
    pub scope: String,
    pub predicted_db: f64,
    pub empirical_db: f64,
    pub delta_db: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub tolerance_db: f64,
    pub rows: Vec<ComparisonRow>,
    pub predicted: SteadyStateReport,
    pub empirical: EmpiricalSteadyState,
    pub mean_stability_bound: f64,
    pub rho_psi: f64,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn row(&self, metric: &str, scope: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric && r.scope == scope)
    }

    /// Global EMSE and MSD both within tolerance.
    pub fn global_pass(&self) -> bool {
        ["emse", "msd"].iter().all(|m| self.row(m, "global").is_some_and(|r| r.pass))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{}",
                r.metric, r.scope, r.predicted_db, r.empirical_db, r.delta_db, r.pass
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rho(Psi) = {:.6}, mean-stability bound c < {:.6}", self.rho_psi, self.mean_stability_bound);
        for m in ["msd", "emse", "mse"] {
            if let Some(r) = self.row(m, "global") {
                let _ = writeln!(
                    out,
                    "global {m:<4}  predicted {:>9.3} dB  empirical {:>9.3} dB  delta {:>+7.3} dB  {}",
                    r.predicted_db,
                    r.empirical_db,
                    r.delta_db,
                    if r.pass { "ok" } else { "MISMATCH" }
                );
            }
        }
        let failed = self.rows.iter().filter(|r| r.scope != "global" && !r.pass).count();
        let _ = writeln!(
            out,
            "per-sensor rows outside ±{} dB: {failed} of {}",
            self.tolerance_db,
            self.rows.iter().filter(|r| r.scope != "global").count()
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn compare_row(metric: &'static str, scope: String, predicted: f64, empirical: f64, tol: f64) -> ComparisonRow {
    let (p_db, e_db) = (numkit::to_db(predicted), numkit::to_db(empirical));
    let delta = if predicted <= ZERO_FLOOR && empirical <= ZERO_FLOOR { 0.0 } else { e_db - p_db };
    ComparisonRow { metric, scope, predicted_db: p_db, empirical_db: e_db, delta_db: delta, pass: delta.abs() <= tol }
}

/// Outcome of the weak-stochastic-boundedness check.
#[derive(Debug, Clone, PartialEq)]
pub struct WsbCheck {
    /// `10·sqrt(max_t tr R_y1(t))`.
    pub zeta: f64,
    pub max_trace: f64,
    pub samples: usize,
    pub exceed: usize,
    pub fraction: f64,
    /// `1/100 + 3·sqrt(f(1−f)/N)` with `f = 1/100`.
    pub allowed: f64,
    pub pass: bool,
}

/// Tail check of `e² − (hᵀβ)² → σ²_ε` for one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFloorCheck {
    pub sensor: usize,
    pub mean: f64,
    pub std_error: f64,
    pub sigma2_eps: f64,
    pub pass: bool,
}

/// Mean and MSE stability of the averaged system.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub c: f64,
    pub mean_stability_bound: f64,
    pub mean: analysis::MeanStability,
    pub mse: analysis::MseStability,
}

impl StabilityReport {
    pub fn summary(&self) -> String {
        format!(
            "c = {}\nmean-stability bound: c < {:.6}\nunit eigenvalues of Omega: {}\nlargest other |eigenvalue|: {:.9}\n\
             mean stable: {}\nrho(Psi) = {:.9}\nmse stable: {}\n",
            self.c,
            self.mean_stability_bound,
            self.mean.unit_eigen_count,
            self.mean.max_other_modulus,
            self.mean.is_stable,
            self.mse.rho_psi,
            self.mse.is_stable
        )
    }
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let topology = build_topology(&cfg.topology)?;
        let model = build_model(&cfg.scenario, topology.sensor_count(), cfg.link_noise)?;
        Self::new(cfg.clone(), topology, model)
    }

    pub fn new(cfg: ExperimentConfig, topology: Topology, model: SensorEnsembleModel) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if topology.sensor_count() != model.sensor_count() {
            return Err(HarnessError::InvalidParameter(format!(
                "topology has {} sensors, model has {}",
                topology.sensor_count(),
                model.sensor_count()
            )));
        }
        Ok(Self { cfg, topology, model })
    }

    pub fn sensors(&self) -> usize {
        self.topology.sensor_count()
    }

    pub fn estimator(&self) -> Result<Box<dyn NetworkEstimator>> {
        let (j, p) = (self.sensors(), self.model.p);
        let params = DrlsParams { lambda: self.cfg.lambda, c: self.cfg.c, delta: self.cfg.delta };
        Ok(match self.cfg.algorithm {
            Algorithm::DrlsAma => Box::new(DrlsNetwork::new(&self.topology, p, params)?),
            Algorithm::DrlsAdmom => Box::new(AdmomNetwork::new(&self.topology, p, params)?),
            Algorithm::LocalRls => Box::new(LocalRls::new(j, p, self.cfg.lambda, self.cfg.delta)?),
            Algorithm::Centralized => Box::new(CentralizedRls::new(j, p, self.cfg.lambda, self.cfg.delta)?),
        })
    }

    fn uses_links(&self) -> bool {
        matches!(self.cfg.algorithm, Algorithm::DrlsAma | Algorithm::DrlsAdmom)
    }

    fn run_one(&self, seeds: &SeedTree, run: usize) -> Result<RunOutput> {
        let (jn, t_max) = (self.sensors(), self.cfg.horizon);
        let window = self.cfg.window;
        let s0 = &self.model.s0;
        let fail = |step: usize, msg: String| HarnessError::RunFailed { run, step, msg };
        let mut est = self.estimator()?;
        let mut stream = SnapshotStream::new(&self.model, seeds, run as u64).map_err(|e| fail(0, e.to_string()))?;
        let mut links: Box<dyn LinkNoise> = if self.uses_links() && self.model.has_link_noise() {
            Box::new(
                GaussianLinkNoise::new(&self.model, &self.topology, seeds, run as u64)
                    .map_err(|e| fail(0, e.to_string()))?,
            )
        } else {
            Box::new(IdealLinks)
        };
        let mut samples = vec![[0.0; 3]; t_max * jn];
        let mut trace = Vec::with_capacity(t_max);
        let mut floor = vec![0.0; jn];
        let mut err = Vector::zeros(self.model.p);
        for t in 0..t_max {
            let snap = stream.next_snapshot(t as u64).map_err(|e| fail(t + 1, e.to_string()))?;
            let row = &mut samples[t * jn..(t + 1) * jn];
            for j in 0..jn {
                let s = est.estimate(j);
                err.copy_from(s);
                err -= s0;
                let a = snap.h[j].dot(&err);
                let e = snap.x[j] - snap.h[j].dot(s);
                row[j][1] = a * a;
                row[j][2] = e * e;
                if t + window >= t_max {
                    floor[j] += e * e - a * a;
                }
            }
            est.step(&snap, links.as_mut()).map_err(|e| fail(t + 1, e.to_string()))?;
            let mut total = 0.0;
            for (j, cell) in row.iter_mut().enumerate() {
                let d = (est.estimate(j) - s0).norm_squared();
                cell[0] = d;
                total += d;
            }
            if !total.is_finite() || row.iter().any(|c| !c[2].is_finite()) {
                return Err(fail(t + 1, "non-finite estimator state".into()));
            }
            trace.push(total);
        }
        for f in &mut floor {
            *f /= window as f64;
        }
        let last = (0..jn).map(|j| est.estimate(j).clone()).collect();
        Ok(RunOutput { samples, last, trace, floor })
    }

    fn run_chunk(&self, seeds: &SeedTree, chunk: usize) -> Result<ChunkSum> {
        let (jn, p) = (self.sensors(), self.model.p);
        let mut sum = ChunkSum {
            samples: vec![[0.0; 3]; self.cfg.horizon * jn],
            last: vec![Vector::zeros(p); jn],
            traces: Vec::new(),
            floors: Vec::new(),
        };
        let start = chunk * RUN_CHUNK;
        for run in start..(start + RUN_CHUNK).min(self.cfg.runs) {
            let out = self.run_one(seeds, run)?;
            for (acc, s) in sum.samples.iter_mut().zip(&out.samples) {
                for k in 0..3 {
                    acc[k] += s[k];
                }
            }
            for (acc, s) in sum.last.iter_mut().zip(&out.last) {
                *acc += s;
            }
            sum.traces.push(out.trace);
            sum.floors.push(out.floor);
        }
        Ok(sum)
    }

    /// Runs `cfg.runs` independent simulations on the current rayon pool.
    pub fn run_ensemble(&self) -> Result<EnsembleOutput> {
        let (jn, p, t_max, runs) = (self.sensors(), self.model.p, self.cfg.horizon, self.cfg.runs);
        let seeds = SeedTree::new(self.cfg.master_seed);
        let chunks = runs.div_ceil(RUN_CHUNK);
        let parts: Vec<Result<ChunkSum>> = (0..chunks).into_par_iter().map(|c| self.run_chunk(&seeds, c)).collect();
        let mut samples = vec![[0.0; 3]; t_max * jn];
        let mut last = vec![Vector::zeros(p); jn];
        let mut error_traces = Vec::with_capacity(runs);
        let mut noise_floor = Vec::with_capacity(runs);
        for part in parts {
            let part = part?;
            for (acc, s) in samples.iter_mut().zip(&part.samples) {
                for k in 0..3 {
                    acc[k] += s[k];
                }
            }
            for (acc, s) in last.iter_mut().zip(&part.last) {
                *acc += s;
            }
            error_traces.extend(part.traces);
            noise_floor.extend(part.floors);
        }
        let n = runs as f64;
        let per_sensor: Vec<Metrics> =
            samples.iter().map(|s| Metrics { msd: s[0] / n, emse: s[1] / n, mse: s[2] / n }).collect();
        let global = per_sensor.chunks(jn).map(Metrics::mean).collect();
        for v in &mut last {
            *v /= n;
        }
        Ok(EnsembleOutput {
            series: MetricSeries { sensors: jn, horizon: t_max, per_sensor, global },
            mean_final: last,
            error_traces,
            noise_floor,
            runs,
        })
    }

    pub fn averaged_system(&self) -> Result<AveragedSystem> {
        Ok(analysis::build_averaged_system(&self.topology, &self.model, self.cfg.c, self.cfg.lambda)?)
    }

    pub fn predict(&self) -> Result<SteadyStateReport> {
        Ok(self.averaged_system()?.steady_state(&self.model, SteadyStateMethod::Auto)?)
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        let sys = self.averaged_system()?;
        Ok(StabilityReport {
            c: self.cfg.c,
            mean_stability_bound: sys.mean_stability_bound()?,
            mean: sys.check_mean_stability()?,
            mse: sys.check_mse_stability()?,
        })
    }

    /// Predicted versus simulated steady state on identical parameters.
    pub fn compare_theory(&self, tolerance_db: f64) -> Result<(ComparisonReport, EnsembleOutput)> {
        if self.cfg.algorithm != Algorithm::DrlsAma {
            return Err(HarnessError::InvalidParameter(format!(
                "theory covers drls_ama, not {}",
                self.cfg.algorithm.name()
            )));
        }
        let sys = self.averaged_system()?;
        let mse = sys.check_mse_stability()?;
        if !mse.is_stable {
            return Err(AnalysisError::Unstable { rho: mse.rho_psi }.into());
        }
        let bound = sys.mean_stability_bound()?;
        let mut warnings = Vec::new();
        if self.cfg.c >= bound {
            warnings.push(format!("c = {} violates the mean-stability bound {bound:.6}", self.cfg.c));
        }
        let predicted = sys.steady_state(&self.model, SteadyStateMethod::Auto)?;
        let ensemble = self.run_ensemble()?;
        let empirical = steady_state_empirical(&ensemble.series, self.cfg.burn_in, self.cfg.window)?;
        let mut rows = Vec::new();
        let mut push = |scope: String, p: &Metrics, e: &Metrics| {
            rows.push(compare_row("msd", scope.clone(), p.msd, e.msd, tolerance_db));
            rows.push(compare_row("emse", scope.clone(), p.emse, e.emse, tolerance_db));
            rows.push(compare_row("mse", scope, p.mse, e.mse, tolerance_db));
        };
        push("global".into(), &predicted.global, &empirical.global);
        for (j, (p, e)) in predicted.per_sensor.iter().zip(&empirical.per_sensor).enumerate() {
            push(j.to_string(), p, e);
        }
        let report = ComparisonReport {
            tolerance_db,
            rows,
            predicted,
            empirical,
            mean_stability_bound: bound,
            rho_psi: mse.rho_psi,
            warnings,
        };
        Ok((report, ensemble))
    }

    /// Fraction of samples `t ≥ burn_in` across runs with
    /// `‖β₁(t)‖ ≥ 10·sqrt(max_t tr R_y1(t))`.
    pub fn wsb_check(&self, ensemble: &EnsembleOutput) -> Result<WsbCheck> {
        let sys = self.averaged_system()?;
        let traj = sys.covariance_recursion_iterate(&self.model, self.cfg.horizon, Some(1))?;
        let jn = self.sensors() as f64;
        let max_trace = traj.global.iter().map(|m| m.msd * jn).fold(0.0, f64::max);
        let zeta = 10.0 * max_trace.sqrt();
        let mut samples = 0;
        let mut exceed = 0;
        for trace in &ensemble.error_traces {
            for &sq in &trace[self.cfg.burn_in.min(trace.len())..] {
                samples += 1;
                if sq.sqrt() >= zeta {
                    exceed += 1;
                }
            }
        }
        let fraction = if samples == 0 { 0.0 } else { exceed as f64 / samples as f64 };
        let allowed = WSB_LEVEL + 3.0 * (WSB_LEVEL * (1.0 - WSB_LEVEL) / samples.max(1) as f64).sqrt();
        Ok(WsbCheck { zeta, max_trace, samples, exceed, fraction, allowed, pass: fraction <= allowed })
    }

    /// `MSE_j − EMSE_j` tail means against `σ²_εj`, within three standard
    /// errors across runs.
    pub fn noise_floor_check(&self, ensemble: &EnsembleOutput) -> Vec<NoiseFloorCheck> {
        let n = ensemble.noise_floor.len() as f64;
        (0..self.sensors())
            .map(|j| {
                let vals: Vec<f64> = ensemble.noise_floor.iter().map(|r| r[j]).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let var = if n > 1.0 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
                let std_error = (var / n).sqrt();
                let sigma2_eps = self.model.sensors[j].sigma2_eps;
                let pass = (mean - sigma2_eps).abs() <= 3.0 * std_error + 1e-15;
                NoiseFloorCheck { sensor: j, mean, std_error, sigma2_eps, pass }
            })
            .collect()
    }
}

/// Builds the experiment and runs its ensemble.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleOutput> {
    Experiment::from_config(cfg)?.run_ensemble()
}

/// Builds the experiment and compares prediction with simulation.
pub fn compare_theory(cfg: &ExperimentConfig, tolerance_db: f64) -> Result<ComparisonReport> {
    Ok(Experiment::from_config(cfg)?.compare_theory(tolerance_db)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{CovarianceSpec, VarianceProfile};

    fn iid_cfg(topology: TopologySpec, p: usize, horizon: usize, runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            topology,
            scenario: ScenarioSpec::Iid {
                p,
                regressor: CovarianceSpec::Identity,
                sensing_noise: VarianceProfile::Constant(1e-3),
                sigma2_eta: 0.1,
                seed: 3,
            },
            horizon,
            runs,
            burn_in: horizon / 2,
            window: horizon / 10,
            ..ExperimentConfig::default()
        }
    }

    fn series_of(values: &[f64]) -> MetricSeries {
        let global: Vec<Metrics> = values.iter().map(|&v| Metrics { msd: v, emse: v, mse: v }).collect();
        MetricSeries { sensors: 1, horizon: values.len(), per_sensor: global.clone(), global }
    }

    #[test]
    fn tail_of_constant_and_ramp() {
        let ss = steady_state_empirical(&series_of(&[3.0; 50]), 10, 20).unwrap();
        assert_eq!(ss.global.msd, 3.0);
        assert!(ss.global_std_db.msd < 1e-12);
        let ramp: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        let ss = steady_state_empirical(&series_of(&ramp), 50, 11).unwrap();
        assert!((ss.global.emse - 95.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let s = series_of(&[1.0; 100]);
        assert!(matches!(steady_state_empirical(&s, 50, 51), Err(HarnessError::InvalidParameter(_))));
        assert!(matches!(steady_state_empirical(&s, 50, 0), Err(HarnessError::InvalidParameter(_))));
        assert!(steady_state_empirical(&s, 50, 50).is_ok());
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let cfg = iid_cfg(TopologySpec::Ring(4), 2, 60, 9);
        let exp = Experiment::from_config(&cfg).unwrap();
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let a = pool(1).install(|| exp.run_ensemble().unwrap());
        let b = pool(3).install(|| exp.run_ensemble().unwrap());
        assert_eq!(a.series.global_csv(), b.series.global_csv());
        assert_eq!(a.series.per_sensor_csv(), b.series.per_sensor_csv());
        assert_eq!(a.error_traces, b.error_traces);
    }

    #[test]
    fn noiseless_centralized_recovers_s0() {
        let mut cfg = iid_cfg(TopologySpec::Complete(3), 2, 20, 2);
        cfg.algorithm = Algorithm::Centralized;
        cfg.lambda = 1.0;
        cfg.delta = 1e8;
        cfg.link_noise = false;
        let mut exp = Experiment::from_config(&cfg).unwrap();
        for s in &mut exp.model.sensors {
            s.sigma2_eps = 0.0;
        }
        let out = exp.run_ensemble().unwrap();
        // Regularization bias J/δ and inverse-lemma roundoff δ·eps trade off;
        // their balance sits near 1e-16.
        for t in 2..=20 {
            assert!(out.series.at(t).msd < 1e-15, "t = {t}: {}", out.series.at(t).msd);
        }
    }

    #[test]
    fn noiseless_single_sensor_converges_monotonically() {
        let mut cfg = iid_cfg(TopologySpec::Complete(1), 3, 200, 1);
        cfg.algorithm = Algorithm::LocalRls;
        cfg.lambda = 1.0;
        let mut exp = Experiment::from_config(&cfg).unwrap();
        exp.model.sensors[0].sigma2_eps = 0.0;
        let out = exp.run_ensemble().unwrap();
        let msd: Vec<f64> = out.series.global.iter().map(|m| m.msd).collect();
        // The residual bias Φ(t)⁻¹Φ₀s₀ shrinks in trend, not step by step.
        let start = msd[cfg.burn_in - 1];
        assert!(msd[cfg.burn_in..].iter().all(|&m| m <= start));
        let quarter = (cfg.horizon - cfg.burn_in) / 4;
        let means: Vec<f64> = msd[cfg.burn_in..].chunks(quarter).map(|c| c.iter().sum::<f64>()).collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn comparison_csv_and_zero_noise_match() {
        let mut cfg = iid_cfg(TopologySpec::Complete(2), 1, 4000, 1);
        cfg.link_noise = false;
        let mut exp = Experiment::from_config(&cfg).unwrap();
        for s in &mut exp.model.sensors {
            s.sigma2_eps = 0.0;
        }
        let (report, _) = exp.compare_theory(DEFAULT_TOLERANCE_DB).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with(COMPARISON_CSV_HEADER));
        for r in &report.rows {
            assert_eq!(r.predicted_db, f64::NEG_INFINITY);
            assert_eq!(r.delta_db, 0.0, "{r:?}");
            assert!(r.pass);
        }
    }

    #[test]
    fn comparison_refuses_non_ama_and_unstable() {
        let mut cfg = iid_cfg(TopologySpec::Ring(4), 2, 40, 1);
        cfg.algorithm = Algorithm::LocalRls;
        assert!(matches!(compare_theory(&cfg, 1.0), Err(HarnessError::InvalidParameter(_))));
        cfg.algorithm = Algorithm::DrlsAma;
        cfg.c = 1e4;
        let err = compare_theory(&cfg, 1.0).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn series_csv_layout() {
        let cfg = iid_cfg(TopologySpec::Path(3), 2, 10, 2);
        let out = run_ensemble(&cfg).unwrap();
        let g = out.series.global_csv();
        assert_eq!(g.lines().count(), 11);
        assert!(g.starts_with(SERIES_CSV_HEADER));
        let per = out.series.per_sensor_csv();
        assert_eq!(per.lines().count(), 31);
        assert!(per.lines().nth(1).unwrap().starts_with("1,0,"));
    }
}
