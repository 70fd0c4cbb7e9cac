//! Estimation algorithms: centralized EWLSE, local RLS, batch AMA, the
//! single-time-scale AMA D-RLS recursion and its AD-MoM counterpart.
//!
//! Time convention: a network at clock `t` holds `s_j(t)`, `Φ_j(t)` and
//! `ψ_j(t)`, with `Φ_j(0) = δ⁻¹ I_p`. The snapshot drawn at stream tick `t`
//! carries the data `h_j(t+1), x_j(t+1)` consumed by the transition
//! `t → t+1`. Seen from the centralized EWLSE the datum at `τ = 0` is
//! therefore zero; [`network_history`] builds that padded history.

use thiserror::Error;

use crate::numkit::{self, Matrix, Vector};
use crate::signalgen::{LinkNoise, Snapshot};
use crate::topology::Topology;

/// Disagreement growth factor that trips the batch-AMA watchdog.
pub const WATCHDOG_GROWTH: f64 = 10.0;
/// Window (in inner iterations) over which the watchdog compares.
pub const WATCHDOG_WINDOW: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("snapshot for t={got} fed to a network at clock t={expected}")]
    ClockMismatch { expected: u64, got: u64 },
    #[error("batch AMA diverged at inner iteration {iteration} (disagreement {disagreement:e})")]
    Diverged { iteration: usize, disagreement: f64 },
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

fn check_params(lambda: f64, delta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(EstimatorError::InvalidParameter(format!("forgetting factor {lambda} outside (0, 1]")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(EstimatorError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn check_snapshot(snap: &Snapshot, clock: u64, sensors: usize, p: usize) -> Result<()> {
    if snap.t != clock {
        return Err(EstimatorError::ClockMismatch { expected: clock, got: snap.t });
    }
    if snap.h.len() != sensors || snap.x.len() != sensors || snap.h.iter().any(|h| h.len() != p) {
        return Err(EstimatorError::InvalidParameter("snapshot dimensions do not match the network".into()));
    }
    Ok(())
}

/// Recursive inverse of the exponentially weighted correlation matrix and
/// the matching cross-correlation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsKernel {
    pinv: Matrix,
    psi: Vector,
    lambda: f64,
    delta: f64,
    gain: Vector,
}

impl RlsKernel {
    pub fn new(p: usize, lambda: f64, delta: f64) -> Result<Self> {
        check_params(lambda, delta)?;
        if p == 0 {
            return Err(EstimatorError::InvalidParameter("p must be at least 1".into()));
        }
        Ok(Self {
            pinv: Matrix::identity(p, p) * delta,
            psi: Vector::zeros(p),
            lambda,
            delta,
            gain: Vector::zeros(p),
        })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pinv(&self) -> &Matrix {
        &self.pinv
    }

    pub fn psi(&self) -> &Vector {
        &self.psi
    }

    /// Floating-point operations of one [`RlsKernel::step`].
    pub fn step_flops(p: usize) -> u64 {
        let p = p as u64;
        // gemv 2p², dot 2p, rank-one 2p², scale p², symmetrize 2p², psi 3p
        7 * p * p + 5 * p + 2
    }

    /// `Pinv ← λ⁻¹[Pinv − Pinv h hᵀ Pinv / (λ + hᵀ Pinv h)]`, `ψ ← λψ + h x`.
    pub fn step(&mut self, h: &Vector, x: f64) -> Result<()> {
        self.step_with(h, x, self.lambda)
    }

    fn step_with(&mut self, h: &Vector, x: f64, lambda: f64) -> Result<()> {
        self.gain.gemv(1.0, &self.pinv, h, 0.0);
        let denom = lambda + h.dot(&self.gain);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(EstimatorError::Numerical(format!("RLS denominator {denom} is not positive")));
        }
        self.pinv.ger(-1.0 / denom, &self.gain, &self.gain, 1.0);
        if lambda != 1.0 {
            self.pinv /= lambda;
        }
        let p = self.dim();
        for r in 0..p {
            for c in r + 1..p {
                let m = 0.5 * (self.pinv[(r, c)] + self.pinv[(c, r)]);
                self.pinv[(r, c)] = m;
                self.pinv[(c, r)] = m;
            }
        }
        self.psi.axpy(x, h, lambda);
        Ok(())
    }

    /// `Pinv ψ`.
    pub fn local_solution(&self) -> Vector {
        &self.pinv * &self.psi
    }
}

/// Data history indexed by `τ`, as consumed by [`ewlse_centralized`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub h: Vec<Vec<Vector>>,
    pub x: Vec<Vec<f64>>,
}

impl History {
    pub fn push(&mut self, h: Vec<Vector>, x: Vec<f64>) {
        self.h.push(h);
        self.x.push(x);
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// History seen by a network that consumed `snapshots`: a zero datum at
/// `τ = 0` followed by the snapshots in order.
pub fn network_history(snapshots: &[Snapshot], sensors: usize, p: usize) -> History {
    let mut hist = History::default();
    hist.push(vec![Vector::zeros(p); sensors], vec![0.0; sensors]);
    for s in snapshots {
        hist.push(s.h.clone(), s.x.clone());
    }
    hist
}

/// The regularizer `Φ₀ = (J/δ) I_p` under which the network's initial
/// `Φ_j⁻¹(0) = δ I_p` matches the centralized problem.
pub fn network_phi0(sensors: usize, p: usize, delta: f64) -> Matrix {
    Matrix::identity(p, p) * (sensors as f64 / delta)
}

/// Minimizer of `Σ_τ Σ_j λ^{t−τ}(x_j(τ) − h_j(τ)ᵀs)² + λᵗ sᵀΦ₀s` using the
/// data `τ = 0..=t` of `history`.
pub fn ewlse_centralized(history: &History, lambda: f64, phi0: &Matrix, t: usize) -> Result<Vector> {
    if t >= history.len() {
        return Err(EstimatorError::InvalidParameter(format!(
            "t = {t} but the history only has {} entries",
            history.len()
        )));
    }
    let p = phi0.nrows();
    if phi0.clone().cholesky().is_none() {
        return Err(EstimatorError::InvalidParameter("Phi0 must be positive definite".into()));
    }
    let mut phi = phi0 * lambda.powi(t as i32);
    let mut rhs = Vector::zeros(p);
    for tau in 0..=t {
        let w = lambda.powi((t - tau) as i32);
        for (h, &x) in history.h[tau].iter().zip(&history.x[tau]) {
            phi.ger(w, h, h, 1.0);
            rhs.axpy(w * x, h, 1.0);
        }
    }
    let chol = phi
        .cholesky()
        .ok_or_else(|| EstimatorError::Numerical("centralized normal matrix is singular".into()))?;
    Ok(chol.solve(&rhs))
}

/// Common driver interface for the networked estimators.
pub trait NetworkEstimator: Send {
    fn sensor_count(&self) -> usize;
    fn clock(&self) -> u64;
    fn estimate(&self, sensor: usize) -> &Vector;
    fn step(&mut self, snap: &Snapshot, noise: &mut dyn LinkNoise) -> Result<()>;
    /// Floating-point operations performed so far.
    fn flops(&self) -> u64;

    /// Average flop count per sensor per step.
    fn flops_per_sensor_step(&self) -> f64 {
        if self.clock() == 0 {
            return 0.0;
        }
        self.flops() as f64 / (self.clock() as f64 * self.sensor_count() as f64)
    }
}

/// Non-cooperative RLS at every sensor.
#[derive(Debug, Clone)]
pub struct LocalRls {
    kernels: Vec<RlsKernel>,
    estimates: Vec<Vector>,
    clock: u64,
    flops: u64,
}

impl LocalRls {
    pub fn new(sensors: usize, p: usize, lambda: f64, delta: f64) -> Result<Self> {
        Ok(Self {
            kernels: vec![RlsKernel::new(p, lambda, delta)?; sensors],
            estimates: vec![Vector::zeros(p); sensors],
            clock: 0,
            flops: 0,
        })
    }

    pub fn kernel(&self, sensor: usize) -> &RlsKernel {
        &self.kernels[sensor]
    }
}

impl NetworkEstimator for LocalRls {
    fn sensor_count(&self) -> usize {
        self.kernels.len()
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn estimate(&self, sensor: usize) -> &Vector {
        &self.estimates[sensor]
    }

    fn step(&mut self, snap: &Snapshot, _noise: &mut dyn LinkNoise) -> Result<()> {
        let p = self.estimates[0].len();
        check_snapshot(snap, self.clock, self.kernels.len(), p)?;
        for (j, k) in self.kernels.iter_mut().enumerate() {
            k.step(&snap.h[j], snap.x[j])?;
            self.estimates[j].gemv(1.0, &k.pinv, &k.psi, 0.0);
        }
        let p = p as u64;
        self.flops += self.kernels.len() as u64 * (RlsKernel::step_flops(p as usize) + 2 * p * p);
        self.clock += 1;
        Ok(())
    }

    fn flops(&self) -> u64 {
        self.flops
    }
}

/// Fusion-center RLS over the data of every sensor, with the regularizer
/// `Φ₀ = (J/δ) I_p` of [`network_phi0`]. All sensors report the same estimate.
#[derive(Debug, Clone)]
pub struct CentralizedRls {
    kernel: RlsKernel,
    estimate: Vector,
    sensors: usize,
    clock: u64,
    flops: u64,
}

impl CentralizedRls {
    pub fn new(sensors: usize, p: usize, lambda: f64, delta: f64) -> Result<Self> {
        if sensors == 0 {
            return Err(EstimatorError::InvalidParameter("empty network".into()));
        }
        Ok(Self {
            kernel: RlsKernel::new(p, lambda, delta / sensors as f64)?,
            estimate: Vector::zeros(p),
            sensors,
            clock: 0,
            flops: 0,
        })
    }
}

impl NetworkEstimator for CentralizedRls {
    fn sensor_count(&self) -> usize {
        self.sensors
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn estimate(&self, _sensor: usize) -> &Vector {
        &self.estimate
    }

    fn step(&mut self, snap: &Snapshot, _noise: &mut dyn LinkNoise) -> Result<()> {
        let p = self.estimate.len();
        check_snapshot(snap, self.clock, self.sensors, p)?;
        // Φ(t+1) = λΦ(t) + Σ_j h_j hᵀ_j as J rank-one updates, forgetting once
        let lambda = self.kernel.lambda;
        for j in 0..self.sensors {
            let forget = if j == 0 { lambda } else { 1.0 };
            self.kernel.step_with(&snap.h[j], snap.x[j], forget)?;
        }
        self.estimate.gemv(1.0, &self.kernel.pinv, &self.kernel.psi, 0.0);
        let p = p as u64;
        self.flops += self.sensors as u64 * RlsKernel::step_flops(p as usize) + 2 * p * p;
        self.clock += 1;
        Ok(())
    }

    fn flops(&self) -> u64 {
        self.flops
    }
}

/// Messages held at the receivers between the two exchange phases.
#[derive(Debug, Clone)]
struct Inboxes {
    estimates: Vec<Vec<Option<Vector>>>,
    multipliers: Vec<Vec<Option<Vector>>>,
    scratch: Vector,
}

impl Inboxes {
    fn new(topo: &Topology) -> Self {
        let empty = |j: usize| vec![None; topo.degree(j)];
        let j = topo.sensor_count();
        Self {
            estimates: (0..j).map(empty).collect(),
            multipliers: (0..j).map(empty).collect(),
            scratch: Vector::zeros(0),
        }
    }

    /// Every sensor transmits `values[j]`; receiver `r` stores the noisy copy
    /// from its `k`-th neighbor.
    fn broadcast_estimates(&mut self, topo: &Topology, values: &[Vector], noise: &mut dyn LinkNoise) {
        for r in 0..topo.sensor_count() {
            for (k, &from) in topo.neighbors(r).iter().enumerate() {
                let mut msg = values[from].clone();
                self.scratch.resize_vertically_mut(msg.len(), 0.0);
                noise.estimate_noise(r, k, &mut self.scratch);
                msg += &self.scratch;
                self.estimates[r][k] = Some(msg);
            }
        }
    }

    /// Every sensor `j` transmits `v_j^{r}` to each neighbor `r`.
    fn broadcast_multipliers(&mut self, topo: &Topology, v: &[Vec<Vector>], noise: &mut dyn LinkNoise) {
        for r in 0..topo.sensor_count() {
            for (k, &from) in topo.neighbors(r).iter().enumerate() {
                let mut msg = v[from][topo.reverse_slot(r, k)].clone();
                self.scratch.resize_vertically_mut(msg.len(), 0.0);
                noise.multiplier_noise(r, k, &mut self.scratch);
                msg += &self.scratch;
                self.multipliers[r][k] = Some(msg);
            }
        }
    }

    fn take_estimate(&mut self, r: usize, k: usize) -> Result<Vector> {
        self.estimates[r][k]
            .take()
            .ok_or_else(|| EstimatorError::Protocol(format!("sensor {r} has no estimate from neighbor slot {k}")))
    }

    fn take_multiplier(&mut self, r: usize, k: usize) -> Result<Vector> {
        self.multipliers[r][k]
            .take()
            .ok_or_else(|| EstimatorError::Protocol(format!("sensor {r} has no multiplier from neighbor slot {k}")))
    }
}

fn check_topology(topo: &Topology, c: f64) -> Result<()> {
    if topo.sensor_count() == 0 {
        return Err(EstimatorError::InvalidParameter("empty network".into()));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(EstimatorError::InvalidParameter(format!("penalty coefficient must be >= 0, got {c}")));
    }
    Ok(())
}

/// `Σ_r Σ_{j∈N_r}(v_r^j − v_j^r)` for slot-indexed multipliers.
fn imbalance(topo: &Topology, v: &[Vec<Vector>], p: usize) -> Vector {
    let mut acc = Vector::zeros(p);
    for r in 0..topo.sensor_count() {
        for (k, &j) in topo.neighbors(r).iter().enumerate() {
            acc += &v[r][k];
            acc -= &v[j][topo.reverse_slot(r, k)];
        }
    }
    acc
}

/// Parameters shared by every sensor of a D-RLS network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrlsParams {
    pub lambda: f64,
    pub c: f64,
    pub delta: f64,
}

/// Single-time-scale AMA D-RLS: one multiplier exchange per acquired sample.
#[derive(Debug, Clone)]
pub struct DrlsNetwork {
    topo: Topology,
    params: DrlsParams,
    p: usize,
    clock: u64,
    s: Vec<Vector>,
    /// `v[j][k]` is `v_j^{N_j[k]}`.
    v: Vec<Vec<Vector>>,
    kernels: Vec<RlsKernel>,
    inbox: Inboxes,
    flops: u64,
}

impl DrlsNetwork {
    pub fn new(topo: &Topology, p: usize, params: DrlsParams) -> Result<Self> {
        check_topology(topo, params.c)?;
        let j = topo.sensor_count();
        let kernel = RlsKernel::new(p, params.lambda, params.delta)?;
        Ok(Self {
            topo: topo.clone(),
            params,
            p,
            clock: 0,
            s: vec![Vector::zeros(p); j],
            v: (0..j).map(|r| vec![Vector::zeros(p); topo.degree(r)]).collect(),
            kernels: vec![kernel; j],
            inbox: Inboxes::new(topo),
            flops: 0,
        })
    }

    pub fn params(&self) -> DrlsParams {
        self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn kernel(&self, sensor: usize) -> &RlsKernel {
        &self.kernels[sensor]
    }

    /// `v_sensor^{neighbor}`, if `neighbor ∈ N_sensor`.
    pub fn multiplier(&self, sensor: usize, neighbor: usize) -> Option<&Vector> {
        let slot = self.topo.neighbors(sensor).binary_search(&neighbor).ok()?;
        Some(&self.v[sensor][slot])
    }

    /// `Σ_j Σ_{j'∈N_j}(v_j^{j'} − v_{j'}^j)`; identically zero under ideal
    /// links with zero initial multipliers.
    pub fn multiplier_imbalance(&self) -> Vector {
        imbalance(&self.topo, &self.v, self.p)
    }

    /// Freezes the current `Φ_j(t)`, `ψ_j(t)` into a batch AMA problem.
    pub fn freeze(&self) -> BatchAma {
        BatchAma::from_kernels(&self.topo, &self.kernels, self.params.c)
    }
}

impl NetworkEstimator for DrlsNetwork {
    fn sensor_count(&self) -> usize {
        self.s.len()
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn estimate(&self, sensor: usize) -> &Vector {
        &self.s[sensor]
    }

    fn step(&mut self, snap: &Snapshot, noise: &mut dyn LinkNoise) -> Result<()> {
        let jn = self.s.len();
        let p = self.p;
        check_snapshot(snap, self.clock, jn, p)?;
        let half_c = 0.5 * self.params.c;
        let mut flops = 0u64;

        self.inbox.broadcast_estimates(&self.topo, &self.s, noise);
        for r in 0..jn {
            for k in 0..self.topo.degree(r) {
                let heard = self.inbox.take_estimate(r, k)?;
                // v += c/2 (s_r − heard)
                let v = &mut self.v[r][k];
                v.axpy(half_c, &self.s[r], 1.0);
                v.axpy(-half_c, &heard, 1.0);
                flops += 4 * p as u64;
            }
        }

        self.inbox.broadcast_multipliers(&self.topo, &self.v, noise);
        let mut acc = Vector::zeros(p);
        for r in 0..jn {
            self.kernels[r].step(&snap.h[r], snap.x[r])?;
            acc.copy_from(&self.kernels[r].psi);
            for k in 0..self.topo.degree(r) {
                let heard = self.inbox.take_multiplier(r, k)?;
                // acc −= ½ (v_r^k − heard)
                acc.axpy(-0.5, &self.v[r][k], 1.0);
                acc.axpy(0.5, &heard, 1.0);
                flops += 4 * p as u64;
            }
            self.s[r].gemv(1.0, &self.kernels[r].pinv, &acc, 0.0);
            flops += RlsKernel::step_flops(p) + 2 * (p * p) as u64;
        }
        self.flops += flops;
        self.clock += 1;
        Ok(())
    }

    fn flops(&self) -> u64 {
        self.flops
    }
}

/// D-RLS solved by AD-MoM: the estimate step minimizes the augmented
/// Lagrangian, so `Φ̄_j = Φ_j + c|N_j| I` must be inverted at every step.
#[derive(Debug, Clone)]
pub struct AdmomNetwork {
    topo: Topology,
    params: DrlsParams,
    p: usize,
    clock: u64,
    s: Vec<Vector>,
    v: Vec<Vec<Vector>>,
    psi: Vec<Vector>,
    bar_phi: Vec<Matrix>,
    inbox: Inboxes,
    flops: u64,
}

impl AdmomNetwork {
    pub fn new(topo: &Topology, p: usize, params: DrlsParams) -> Result<Self> {
        check_topology(topo, params.c)?;
        check_params(params.lambda, params.delta)?;
        if p == 0 {
            return Err(EstimatorError::InvalidParameter("p must be at least 1".into()));
        }
        let j = topo.sensor_count();
        let bar_phi = (0..j)
            .map(|r| Matrix::identity(p, p) * (1.0 / params.delta + params.c * topo.degree(r) as f64))
            .collect();
        Ok(Self {
            topo: topo.clone(),
            params,
            p,
            clock: 0,
            s: vec![Vector::zeros(p); j],
            v: (0..j).map(|r| vec![Vector::zeros(p); topo.degree(r)]).collect(),
            psi: vec![Vector::zeros(p); j],
            bar_phi,
            inbox: Inboxes::new(topo),
            flops: 0,
        })
    }

    /// `Φ̄_j(t)`.
    pub fn bar_phi(&self, sensor: usize) -> &Matrix {
        &self.bar_phi[sensor]
    }

    pub fn multiplier_imbalance(&self) -> Vector {
        imbalance(&self.topo, &self.v, self.p)
    }

    /// Flops of one explicit `p×p` SPD inversion (Cholesky, triangular
    /// inverse, product).
    pub fn inversion_flops(p: usize) -> u64 {
        let p = p as u64;
        p * p * p + p * p
    }
}

impl NetworkEstimator for AdmomNetwork {
    fn sensor_count(&self) -> usize {
        self.s.len()
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn estimate(&self, sensor: usize) -> &Vector {
        &self.s[sensor]
    }

    fn step(&mut self, snap: &Snapshot, noise: &mut dyn LinkNoise) -> Result<()> {
        let jn = self.s.len();
        let p = self.p;
        check_snapshot(snap, self.clock, jn, p)?;
        let DrlsParams { lambda, c, .. } = self.params;
        let half_c = 0.5 * c;
        let mut flops = 0u64;

        self.inbox.broadcast_estimates(&self.topo, &self.s, noise);
        // the estimate step needs the same noisy copies the multipliers used
        let mut heard_s = vec![Vector::zeros(p); jn];
        for r in 0..jn {
            for k in 0..self.topo.degree(r) {
                let heard = self.inbox.take_estimate(r, k)?;
                let v = &mut self.v[r][k];
                v.axpy(half_c, &self.s[r], 1.0);
                v.axpy(-half_c, &heard, 1.0);
                heard_s[r] += &heard;
                flops += 5 * p as u64;
            }
        }

        self.inbox.broadcast_multipliers(&self.topo, &self.v, noise);
        let mut rhs = Vector::zeros(p);
        for r in 0..jn {
            let deg = self.topo.degree(r) as f64;
            let reg = c * deg;
            let phi = &mut self.bar_phi[r];
            for d in 0..p {
                phi[(d, d)] -= reg;
            }
            *phi *= lambda;
            phi.ger(1.0, &snap.h[r], &snap.h[r], 1.0);
            for d in 0..p {
                phi[(d, d)] += reg;
            }
            self.psi[r].axpy(snap.x[r], &snap.h[r], lambda);

            // rhs = ψ + c/2 Σ (s_r + heard) − ½ Σ (v_r^k − heard_v)
            rhs.copy_from(&self.psi[r]);
            rhs.axpy(half_c * deg, &self.s[r], 1.0);
            rhs.axpy(half_c, &heard_s[r], 1.0);
            for k in 0..self.topo.degree(r) {
                let heard = self.inbox.take_multiplier(r, k)?;
                rhs.axpy(-0.5, &self.v[r][k], 1.0);
                rhs.axpy(0.5, &heard, 1.0);
                flops += 4 * p as u64;
            }
            let inv = numkit::spd_inverse(phi).map_err(|e| EstimatorError::Numerical(e.to_string()))?;
            self.s[r].gemv(1.0, &inv, &rhs, 0.0);
            flops += (3 * p * p + 2 * p + 7 * p) as u64 + Self::inversion_flops(p) + 2 * (p * p) as u64;
        }
        self.flops += flops;
        self.clock += 1;
        Ok(())
    }

    fn flops(&self) -> u64 {
        self.flops
    }
}

/// Outcome of a batch AMA run.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub estimates: Vec<Vector>,
    /// `max_{j,j'} ‖s_j(k) − s_{j'}(k)‖` for `k = 0..=K`.
    pub disagreement: Vec<f64>,
}

/// Inner consensus iterations with `Φ_j(t)` and `ψ_j(t)` frozen.
#[derive(Debug, Clone)]
pub struct BatchAma {
    topo: Topology,
    c: f64,
    pinv: Vec<Matrix>,
    psi: Vec<Vector>,
}

fn disagreement(s: &[Vector]) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            worst = worst.max((&s[a] - &s[b]).norm());
        }
    }
    worst
}

impl BatchAma {
    pub fn from_kernels(topo: &Topology, kernels: &[RlsKernel], c: f64) -> Self {
        Self {
            topo: topo.clone(),
            c,
            pinv: kernels.iter().map(|k| k.pinv.clone()).collect(),
            psi: kernels.iter().map(|k| k.psi.clone()).collect(),
        }
    }

    /// Runs every sensor's RLS kernel over `history[1..=t]` and freezes the
    /// result. `history[0]` is the zero datum of the network convention.
    pub fn from_history(topo: &Topology, history: &History, t: usize, lambda: f64, delta: f64, c: f64) -> Result<Self> {
        check_topology(topo, c)?;
        if t >= history.len() || history.h.first().is_none_or(|row| row.len() != topo.sensor_count()) {
            return Err(EstimatorError::InvalidParameter("history does not cover the requested time".into()));
        }
        let p = history.h[0][0].len();
        let mut kernels = vec![RlsKernel::new(p, lambda, delta)?; topo.sensor_count()];
        for tau in 1..=t {
            for (j, k) in kernels.iter_mut().enumerate() {
                k.step(&history.h[tau][j], history.x[tau][j])?;
            }
        }
        Ok(Self::from_kernels(topo, &kernels, c))
    }

    /// Local solutions `Φ_j⁻¹ψ_j`, the iterates at `k = 0`.
    pub fn initial_estimates(&self) -> Vec<Vector> {
        self.pinv.iter().zip(&self.psi).map(|(p, s)| p * s).collect()
    }

    /// `K` iterations of `v_j^{j'} += c/2 (s_j − s_{j'})`,
    /// `s_j = Φ_j⁻¹[ψ_j − ½ Σ (v_j^{j'} − v_{j'}^j)]`.
    pub fn run(&self, iterations: usize) -> Result<BatchTrace> {
        let jn = self.topo.sensor_count();
        let p = self.psi.first().map_or(0, |v| v.len());
        let half_c = 0.5 * self.c;
        let mut s = self.initial_estimates();
        let mut v: Vec<Vec<Vector>> = (0..jn).map(|r| vec![Vector::zeros(p); self.topo.degree(r)]).collect();
        let mut trace = vec![disagreement(&s)];
        let scale = s.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let floor = 1e-9 * scale;
        let mut acc = Vector::zeros(p);
        for k in 1..=iterations {
            for r in 0..jn {
                for (slot, &nb) in self.topo.neighbors(r).iter().enumerate() {
                    let d = &s[r] - &s[nb];
                    v[r][slot].axpy(half_c, &d, 1.0);
                }
            }
            for r in 0..jn {
                acc.copy_from(&self.psi[r]);
                for (slot, &nb) in self.topo.neighbors(r).iter().enumerate() {
                    acc.axpy(-0.5, &v[r][slot], 1.0);
                    acc.axpy(0.5, &v[nb][self.topo.reverse_slot(r, slot)], 1.0);
                }
                s[r].gemv(1.0, &self.pinv[r], &acc, 0.0);
            }
            let d = disagreement(&s);
            if !d.is_finite() {
                return Err(EstimatorError::Diverged { iteration: k, disagreement: d });
            }
            if k >= WATCHDOG_WINDOW {
                let past = trace[k - WATCHDOG_WINDOW].max(floor);
                if d > WATCHDOG_GROWTH * past {
                    return Err(EstimatorError::Diverged { iteration: k, disagreement: d });
                }
            }
            trace.push(d);
        }
        Ok(BatchTrace { estimates: s, disagreement: trace })
    }
}
