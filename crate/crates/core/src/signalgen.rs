//! Stochastic environment for the simulations: linear-model observations,
//! white or AR(1) shift-structured regressors, and per-link communication
//! noise.
//!
//! Every random quantity comes from its own ChaCha stream keyed by
//! `(master seed, run, kind, a, b)`, so switching one noise source off never
//! perturbs the draws of the others and runs can execute in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numkit::{self, Matrix, Vector};
use crate::topology::Topology;

/// Steps an AR regressor is run before `t = 0`.
pub const AR_WARMUP_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("snapshot requested for t={requested} but the stream clock is at t={clock}")]
    OutOfOrder { requested: u64, clock: u64 },
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Identifies what a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    Scenario = 1,
    Regressor = 2,
    SensingNoise = 3,
    EstimateLink = 4,
    MultiplierLink = 5,
}

/// Counter-based seed derivation. Each `(run, kind, a, b)` tuple maps to an
/// independent ChaCha stream under the same master key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, run: u64, kind: StreamKind, a: usize, b: usize) -> ChaCha8Rng {
        assert!(a < 1 << 28 && b < 1 << 28, "stream indices out of range");
        let mut key = [0u8; 32];
        let mut state = splitmix64(self.master) ^ splitmix64(run.wrapping_add(0x5851_F42D_4C95_7F2D));
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((kind as u64) << 56) | ((a as u64) << 28) | b as u64);
        rng
    }
}

/// Regressor generation mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorKind {
    /// `h_j(t) ~ N(0, R_hj)`, white in space and time.
    IidGaussian,
    /// Shift-register regressors `[h(t) … h(t−p+1)]` driven by the scalar
    /// process `h(t) = (1−ρ)β_j h(t−1) + √ρ ω_j(t)`, with `ω_j` uniform of
    /// variance `σ²_ωj`.
    Ar1Shift { rho: f64, beta: Vec<f64>, sigma2_omega: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorProfile {
    /// Regressor covariance `R_hj`.
    pub r_h: Matrix,
    /// Sensing-noise variance `σ²_εj`.
    pub sigma2_eps: f64,
    /// Covariance of the link noise received at this sensor, `R_ηj`.
    pub r_eta: Matrix,
}

/// Statistical profile of every sensor plus the true parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEnsembleModel {
    pub p: usize,
    pub s0: Vector,
    pub sensors: Vec<SensorProfile>,
    pub regressors: RegressorKind,
}

/// Stationary covariance of the shift-register AR(1) regressor.
pub fn ar1_shift_covariance(p: usize, rho: f64, beta: f64, sigma2_omega: f64) -> Matrix {
    let a = (1.0 - rho) * beta;
    let var = rho * sigma2_omega / (1.0 - a * a);
    Matrix::from_fn(p, p, |r, c| var * a.powi((r as i32 - c as i32).abs()))
}

/// The reference experiment: `p = 4`, `s0 = 1`, AR(1) shift regressors
/// with `ρ = 0.5`, `σ²_εj = 10⁻³ α_j`, `σ²_ωj = 2γ_j`, and link noise
/// `0.1 I` at every receiver. `α, β, γ` are drawn i.i.d. uniform on [0, 1].
pub fn paper_scenario(sensors: usize, seed: u64) -> SensorEnsembleModel {
    const P: usize = 4;
    const RHO: f64 = 0.5;
    const LINK_VAR: f64 = 0.1;
    let mut rng = SeedTree::new(seed).stream(0, StreamKind::Scenario, 0, 0);
    let mut beta = Vec::with_capacity(sensors);
    let mut sigma2_omega = Vec::with_capacity(sensors);
    let mut profiles = Vec::with_capacity(sensors);
    for _ in 0..sensors {
        let alpha: f64 = rng.random();
        let b: f64 = rng.random();
        let gamma: f64 = rng.random();
        let s2w = 2.0 * gamma;
        profiles.push(SensorProfile {
            r_h: ar1_shift_covariance(P, RHO, b, s2w),
            sigma2_eps: 1e-3 * alpha,
            r_eta: Matrix::identity(P, P) * LINK_VAR,
        });
        beta.push(b);
        sigma2_omega.push(s2w);
    }
    SensorEnsembleModel {
        p: P,
        s0: Vector::from_element(P, 1.0),
        sensors: profiles,
        regressors: RegressorKind::Ar1Shift { rho: RHO, beta, sigma2_omega },
    }
}

/// How the per-sensor regressor covariances of an i.i.d. scenario are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    Identity,
    Scaled(f64),
    /// Diagonal with entries drawn uniformly from `[min, max]`.
    RandomDiagonal { min: f64, max: f64 },
    Explicit(Vec<Matrix>),
}

/// Per-sensor variance profile.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceProfile {
    Constant(f64),
    /// `scale · α_j` with `α_j ~ U[0, 1]`.
    ScaledUniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IidSpec {
    pub regressor_cov: CovarianceSpec,
    pub sensing_noise: VarianceProfile,
    /// Link-noise variance; every receiver gets `σ²_η I_p`.
    pub link_noise_var: f64,
    /// Defaults to the all-ones vector.
    pub s0: Option<Vector>,
}

/// Spatio-temporally white Gaussian regressors. Randomised profile entries
/// are drawn from `seed`.
pub fn iid_scenario(sensors: usize, p: usize, spec: &IidSpec, seed: u64) -> Result<SensorEnsembleModel> {
    if sensors == 0 || p == 0 {
        return Err(SignalError::InvalidModel("need at least one sensor and p >= 1".into()));
    }
    let mut rng = SeedTree::new(seed).stream(0, StreamKind::Scenario, 1, 0);
    let mut profiles = Vec::with_capacity(sensors);
    for j in 0..sensors {
        let r_h = match &spec.regressor_cov {
            CovarianceSpec::Identity => Matrix::identity(p, p),
            CovarianceSpec::Scaled(s) => Matrix::identity(p, p) * *s,
            CovarianceSpec::RandomDiagonal { min, max } => {
                if !(min > &0.0 && max >= min) {
                    return Err(SignalError::InvalidModel(format!("bad diagonal range [{min}, {max}]")));
                }
                Matrix::from_diagonal(&Vector::from_fn(p, |_, _| rng.random_range(*min..=*max)))
            }
            CovarianceSpec::Explicit(list) => list
                .get(j)
                .cloned()
                .ok_or_else(|| SignalError::InvalidModel(format!("no regressor covariance for sensor {j}")))?,
        };
        let sigma2_eps = match spec.sensing_noise {
            VarianceProfile::Constant(v) => v,
            VarianceProfile::ScaledUniform(s) => s * rng.random::<f64>(),
        };
        profiles.push(SensorProfile { r_h, sigma2_eps, r_eta: Matrix::identity(p, p) * spec.link_noise_var });
    }
    let model = SensorEnsembleModel {
        p,
        s0: spec.s0.clone().unwrap_or_else(|| Vector::from_element(p, 1.0)),
        sensors: profiles,
        regressors: RegressorKind::IidGaussian,
    };
    model.validate()?;
    Ok(model)
}

impl SensorEnsembleModel {
    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if self.s0.len() != p {
            return Err(SignalError::InvalidModel(format!("s0 has length {} but p = {p}", self.s0.len())));
        }
        for (j, s) in self.sensors.iter().enumerate() {
            if s.r_h.shape() != (p, p) || s.r_eta.shape() != (p, p) {
                return Err(SignalError::InvalidModel(format!("sensor {j}: covariance shape mismatch")));
            }
            if (&s.r_h - s.r_h.transpose()).norm() > 1e-12 * s.r_h.norm().max(1.0) || s.r_h.clone().cholesky().is_none()
            {
                return Err(SignalError::InvalidModel(format!("sensor {j}: R_h is not symmetric positive definite")));
            }
            if numkit::psd_factor(&s.r_eta).is_err() {
                return Err(SignalError::InvalidModel(format!("sensor {j}: R_eta is not positive semidefinite")));
            }
            if !(s.sigma2_eps >= 0.0) || !s.sigma2_eps.is_finite() {
                return Err(SignalError::InvalidModel(format!("sensor {j}: negative sensing-noise variance")));
            }
        }
        if let RegressorKind::Ar1Shift { rho, beta, sigma2_omega } = &self.regressors {
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(SignalError::InvalidModel(format!("AR parameter rho = {rho} outside (0, 1)")));
            }
            if beta.len() != self.sensor_count() || sigma2_omega.len() != self.sensor_count() {
                return Err(SignalError::InvalidModel("AR parameter lists do not match J".into()));
            }
            if beta.iter().any(|b| !(0.0..=1.0).contains(b)) || sigma2_omega.iter().any(|s| !(*s > 0.0)) {
                return Err(SignalError::InvalidModel("AR parameters out of range".into()));
            }
        }
        Ok(())
    }

    /// Same model with ideal (noise-free) links.
    pub fn with_ideal_links(&self) -> Self {
        let mut m = self.clone();
        for s in &mut m.sensors {
            s.r_eta = Matrix::zeros(self.p, self.p);
        }
        m
    }

    pub fn has_link_noise(&self) -> bool {
        self.sensors.iter().any(|s| s.r_eta.iter().any(|&x| x != 0.0))
    }
}

/// One time step of data across the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u64,
    pub h: Vec<Vector>,
    pub x: Vec<f64>,
    /// The sensing-noise draws, kept so that `x = hᵀ s0 + ε` can be checked.
    pub eps: Vec<f64>,
}

enum RegressorState {
    Iid { factor: Matrix },
    Ar { coef: f64, drive_half_width: f64, drive_gain: f64, history: Vec<f64> },
}

struct SensorStream {
    regressor_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    sigma_eps: f64,
    state: RegressorState,
}

/// Sequential, seeded source of snapshots for one Monte Carlo run.
pub struct SnapshotStream {
    s0: Vector,
    p: usize,
    clock: u64,
    sensors: Vec<SensorStream>,
}

impl SnapshotStream {
    pub fn new(model: &SensorEnsembleModel, seeds: &SeedTree, run: u64) -> Result<Self> {
        model.validate()?;
        let p = model.p;
        let mut sensors = Vec::with_capacity(model.sensor_count());
        for (j, prof) in model.sensors.iter().enumerate() {
            let mut regressor_rng = seeds.stream(run, StreamKind::Regressor, j, 0);
            let state = match &model.regressors {
                RegressorKind::IidGaussian => RegressorState::Iid {
                    factor: prof.r_h.clone().cholesky().expect("validated SPD").l(),
                },
                RegressorKind::Ar1Shift { rho, beta, sigma2_omega } => {
                    let coef = (1.0 - rho) * beta[j];
                    let half = (3.0 * sigma2_omega[j]).sqrt();
                    let gain = rho.sqrt();
                    // history[0] is the newest scalar sample
                    let mut history = vec![0.0; p];
                    for _ in 0..AR_WARMUP_STEPS + p {
                        let w: f64 = regressor_rng.random_range(-half..=half);
                        let next = coef * history[0] + gain * w;
                        history.rotate_right(1);
                        history[0] = next;
                    }
                    RegressorState::Ar { coef, drive_half_width: half, drive_gain: gain, history }
                }
            };
            sensors.push(SensorStream {
                regressor_rng,
                noise_rng: seeds.stream(run, StreamKind::SensingNoise, j, 0),
                sigma_eps: prof.sigma2_eps.sqrt(),
                state,
            });
        }
        Ok(Self { s0: model.s0.clone(), p, clock: 0, sensors })
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn next_snapshot(&mut self, t: u64) -> Result<Snapshot> {
        if t != self.clock {
            return Err(SignalError::OutOfOrder { requested: t, clock: self.clock });
        }
        let p = self.p;
        let j_count = self.sensors.len();
        let mut snap = Snapshot {
            t,
            h: Vec::with_capacity(j_count),
            x: Vec::with_capacity(j_count),
            eps: Vec::with_capacity(j_count),
        };
        for s in &mut self.sensors {
            let h = match &mut s.state {
                RegressorState::Iid { factor } => {
                    let z = Vector::from_fn(p, |_, _| s.regressor_rng.sample::<f64, _>(StandardNormal));
                    &*factor * z
                }
                RegressorState::Ar { coef, drive_half_width, drive_gain, history } => {
                    let w: f64 = s.regressor_rng.random_range(-*drive_half_width..=*drive_half_width);
                    let next = *coef * history[0] + *drive_gain * w;
                    history.rotate_right(1);
                    history[0] = next;
                    Vector::from_column_slice(history)
                }
            };
            let eps = if s.sigma_eps > 0.0 {
                s.sigma_eps * s.noise_rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            snap.x.push(h.dot(&self.s0) + eps);
            snap.eps.push(eps);
            snap.h.push(h);
        }
        self.clock += 1;
        Ok(snap)
    }
}

/// Source of the additive noise on every directed link. `slot` indexes the
/// transmitter inside the receiver's sorted neighborhood.
pub trait LinkNoise {
    /// Noise on the local estimate `receiver` hears from its `slot`-th neighbor.
    fn estimate_noise(&mut self, receiver: usize, slot: usize, out: &mut Vector);
    /// Noise on the multiplier `receiver` hears from its `slot`-th neighbor.
    fn multiplier_noise(&mut self, receiver: usize, slot: usize, out: &mut Vector);
}

/// Error-free links.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealLinks;

impl LinkNoise for IdealLinks {
    fn estimate_noise(&mut self, _: usize, _: usize, out: &mut Vector) {
        out.fill(0.0);
    }
    fn multiplier_noise(&mut self, _: usize, _: usize, out: &mut Vector) {
        out.fill(0.0);
    }
}

struct LinkStreams {
    estimate: ChaCha8Rng,
    multiplier: ChaCha8Rng,
}

/// Zero-mean Gaussian link noise with covariance `R_ηj` at receiver `j`, on
/// both the estimate and the multiplier exchanges.
pub struct GaussianLinkNoise {
    factors: Vec<Option<Matrix>>,
    links: Vec<Vec<LinkStreams>>,
    scratch: Vector,
}

impl GaussianLinkNoise {
    pub fn new(model: &SensorEnsembleModel, topology: &Topology, seeds: &SeedTree, run: u64) -> Result<Self> {
        if topology.sensor_count() != model.sensor_count() {
            return Err(SignalError::InvalidModel(format!(
                "topology has {} sensors but the model has {}",
                topology.sensor_count(),
                model.sensor_count()
            )));
        }
        let factors = model
            .sensors
            .iter()
            .map(|s| {
                if s.r_eta.iter().all(|&x| x == 0.0) {
                    Ok(None)
                } else {
                    numkit::psd_factor(&s.r_eta).map(Some).map_err(|e| SignalError::InvalidModel(e.to_string()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let links = (0..topology.sensor_count())
            .map(|j| {
                topology
                    .neighbors(j)
                    .iter()
                    .map(|&from| LinkStreams {
                        estimate: seeds.stream(run, StreamKind::EstimateLink, j, from),
                        multiplier: seeds.stream(run, StreamKind::MultiplierLink, j, from),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { factors, links, scratch: Vector::zeros(model.p) })
    }

    fn draw(factor: &Option<Matrix>, rng: &mut ChaCha8Rng, scratch: &mut Vector, out: &mut Vector) {
        match factor {
            None => out.fill(0.0),
            Some(f) => {
                for z in scratch.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                out.gemv(1.0, f, scratch, 0.0);
            }
        }
    }
}

impl LinkNoise for GaussianLinkNoise {
    fn estimate_noise(&mut self, receiver: usize, slot: usize, out: &mut Vector) {
        let rng = &mut self.links[receiver][slot].estimate;
        Self::draw(&self.factors[receiver], rng, &mut self.scratch, out);
    }
    fn multiplier_noise(&mut self, receiver: usize, slot: usize, out: &mut Vector) {
        let rng = &mut self.links[receiver][slot].multiplier;
        Self::draw(&self.factors[receiver], rng, &mut self.scratch, out);
    }
}
