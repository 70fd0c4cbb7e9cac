//! Closed-form mean and mean-square behaviour of single-time-scale D-RLS.
//!
//! The error dynamics are studied through the averaged system in which
//! `Φ_j⁻¹(t)` is replaced by `(1−λ)R_hj⁻¹`. The global state stacks the local
//! errors `β₁,j = s_j − s₀` and the multiplier aggregates
//! `β₂,j = ½ Σ_{j'∈N_j}(v_j^{j'} − v_{j'}^j)`. An inner state `z` driven by
//! `Ψ` carries the same information and yields the steady-state covariance of
//! `β₁` through a Lyapunov-type fixed point.
//!
//! Link noise is stacked transmitter-major: block `(r, k)` of `η` is the
//! noise on `s_r` as received by `N_r[k]`. It is distributed with that
//! receiver's covariance.

use thiserror::Error;

use crate::numkit::{self, Matrix, NumError, Vector, DEFAULT_PINV_TOL};
use crate::signalgen::SensorEnsembleModel;
use crate::topology::Topology;

/// Distance from 1 under which an eigenvalue of `Ω` counts as unit.
pub const UNIT_EIGEN_TOL: f64 = 1e-8;
/// Largest `J·p` for which the Kronecker vec-solve is used automatically.
pub const KRONECKER_MAX_JP: usize = 24;
/// Residual above which the `C` matrix or the projector is rejected.
pub const ASSEMBLY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("assembly check failed: {0}")]
    Assembly(String),
    #[error("transition matrix is not stable (spectral radius {rho})")]
    Unstable { rho: f64 },
    #[error("ill-conditioned fixed-point system: {0}")]
    IllConditioned(String),
    #[error("covariance recursion diverged at step {step} (norm {norm:e})")]
    Diverged { step: usize, norm: f64 },
    #[error(transparent)]
    Numerical(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// One directed link: noise on the estimate of `transmitter` heard at `receiver`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedLink {
    pub transmitter: usize,
    pub receiver: usize,
}

/// Matrices of the averaged error system.
#[derive(Debug, Clone)]
pub struct AveragedSystem {
    pub sensors: usize,
    pub p: usize,
    pub c: f64,
    pub lambda: f64,
    /// `(c/2) L ⊗ I_p`.
    pub l_c: Matrix,
    pub l_c_pinv: Matrix,
    /// `bdiag(R_h1, …, R_hJ)`.
    pub r_h: Matrix,
    /// `(1−λ) R_h⁻¹`.
    pub r_h_lambda_inv: Matrix,
    pub upsilon: Matrix,
    pub omega: Matrix,
    pub psi: Matrix,
    /// Orthogonal projector `L_c L_c†` onto the range of `L_c`.
    pub projector: Matrix,
    pub p_alpha: Matrix,
    pub p_beta: Matrix,
    /// Solution of `L_c C = P_β − P_α`.
    pub c_matrix: Matrix,
    /// Order of the link-noise blocks.
    pub links: Vec<DirectedLink>,
    /// `L ⊗ I_p`, the unscaled coupling used by the mean-stability bound.
    unscaled: Matrix,
    sensing: Vec<f64>,
    r_h_blocks: Vec<Matrix>,
}

/// Outcome of the mean-stability eigen-analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStability {
    pub unit_eigen_count: usize,
    pub max_other_modulus: f64,
    pub is_stable: bool,
    pub left_unit_vectors: usize,
    /// Largest norm of the upper block of a unit-normalised left eigenvector.
    pub left_upper_norm: f64,
    /// Largest `‖L_c q‖` over the lower blocks `q`.
    pub left_lower_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseStability {
    pub rho_psi: f64,
    pub is_stable: bool,
}

/// Covariances of the noise processes entering the averaged system.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariances {
    /// `R_ε(t)`, or its limit when no time was requested.
    pub r_eps: Matrix,
    pub r_bar_eta: Matrix,
    pub r_eta: Matrix,
    pub r_bar_eta_lambda: Matrix,
    pub r_eta_lambda: Matrix,
}

/// MSD, EMSE and MSE for one sensor or the whole network (linear scale).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub msd: f64,
    pub emse: f64,
    pub mse: f64,
}

impl Metrics {
    pub fn msd_db(&self) -> f64 {
        numkit::to_db(self.msd)
    }
    pub fn emse_db(&self) -> f64 {
        numkit::to_db(self.emse)
    }
    pub fn mse_db(&self) -> f64 {
        numkit::to_db(self.mse)
    }

    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        Metrics {
            msd: items.iter().map(|m| m.msd).sum::<f64>() / n,
            emse: items.iter().map(|m| m.emse).sum::<f64>() / n,
            mse: items.iter().map(|m| m.mse).sum::<f64>() / n,
        }
    }
}

pub const METRICS_CSV_HEADER: &str = "sensor_id,msd_lin,msd_db,emse_lin,emse_db,mse_lin,mse_db";

/// Writes one CSV row per sensor followed by a `global` row.
pub fn metrics_csv(per_sensor: &[Metrics], global: &Metrics) -> String {
    let row = |id: &str, m: &Metrics| {
        format!(
            "{id},{:e},{:.6},{:e},{:.6},{:e},{:.6}\n",
            m.msd,
            m.msd_db(),
            m.emse,
            m.emse_db(),
            m.mse,
            m.mse_db()
        )
    };
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for (j, m) in per_sensor.iter().enumerate() {
        out.push_str(&row(&j.to_string(), m));
    }
    out.push_str(&row("global", global));
    out
}

/// Predicted steady state.
#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub r_z: Matrix,
    pub r_zeps: Matrix,
    pub r_y1: Matrix,
    pub per_sensor: Vec<Metrics>,
    pub global: Metrics,
    pub method: SteadyStateMethod,
}

impl SteadyStateReport {
    pub fn to_csv(&self) -> String {
        metrics_csv(&self.per_sensor, &self.global)
    }
}

/// How the fixed point `R_z = Ψ R_z Ψᵀ + R_ν` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    /// Kronecker solve for `J·p ≤ 24`, doubling otherwise.
    Auto,
    /// Dense solve of `(I − Ψ⊗Ψ) vec(R_z) = vec(R_ν)`.
    Kronecker,
    /// Squared series `X ← X + A X Aᵀ`, `A ← A²`.
    Doubling,
}

/// Predicted transient, sampled every `record_every` steps.
#[derive(Debug, Clone)]
pub struct CovarianceTrajectory {
    pub r_z: Matrix,
    pub r_zeps: Matrix,
    pub r_y1: Matrix,
    pub times: Vec<usize>,
    pub global: Vec<Metrics>,
    pub per_sensor: Vec<Vec<Metrics>>,
}

fn block_of(m: &Matrix, i: usize, j: usize, p: usize) -> Matrix {
    m.view((i * p, j * p), (p, p)).clone_owned()
}

pub fn build_averaged_system(topo: &Topology, model: &SensorEnsembleModel, c: f64, lambda: f64) -> Result<AveragedSystem> {
    let jn = topo.sensor_count();
    let p = model.p;
    if model.sensor_count() != jn {
        return Err(AnalysisError::InvalidInput(format!(
            "topology has {jn} sensors but the model has {}",
            model.sensor_count()
        )));
    }
    model.validate().map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(AnalysisError::InvalidInput(format!("forgetting factor {lambda} outside (0, 1)")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(AnalysisError::InvalidInput(format!("penalty coefficient must be positive, got {c}")));
    }
    if !topo.is_connected() {
        return Err(AnalysisError::InvalidInput("topology is not connected".into()));
    }
    let n = jn * p;
    let eye = Matrix::identity(n, n);
    let unscaled = numkit::kron(&topo.laplacian(), &Matrix::identity(p, p));
    let l_c = &unscaled * (0.5 * c);
    let l_c_pinv = numkit::pinv(&l_c, DEFAULT_PINV_TOL)?;
    let projector = &l_c * &l_c_pinv;
    let idem = (&projector * &projector - &projector).norm();
    if idem > ASSEMBLY_TOL {
        return Err(AnalysisError::Assembly(format!("L_c L_c† is not idempotent (residual {idem:e})")));
    }

    let r_h_blocks: Vec<Matrix> = model.sensors.iter().map(|s| s.r_h.clone()).collect();
    let r_h = numkit::block_diag(&r_h_blocks);
    let inv_blocks = r_h_blocks.iter().map(numkit::spd_inverse).collect::<std::result::Result<Vec<_>, _>>()?;
    let r_h_lambda_inv = numkit::block_diag(&inv_blocks) * (1.0 - lambda);

    let upsilon = numkit::block2(&-&l_c, &-&eye, &l_c, &eye);
    let scale = numkit::block_diag(&[r_h_lambda_inv.clone(), eye.clone()]);
    let omega = &scale * &upsilon;
    let rl_lc = -(&r_h_lambda_inv * &l_c);
    let psi = numkit::block2(&rl_lc, &rl_lc, &projector, &projector);

    let mut links = Vec::with_capacity(topo.directed_link_count());
    for r in 0..jn {
        for &receiver in topo.neighbors(r) {
            links.push(DirectedLink { transmitter: r, receiver });
        }
    }
    let m = links.len() * p;
    let mut p_alpha = Matrix::zeros(n, m);
    let mut p_beta = Matrix::zeros(n, m);
    let quarter = Matrix::identity(p, p) * (c / 4.0);
    for (idx, link) in links.iter().enumerate() {
        p_alpha.view_mut((link.receiver * p, idx * p), (p, p)).copy_from(&quarter);
        p_beta.view_mut((link.transmitter * p, idx * p), (p, p)).copy_from(&quarter);
    }
    let diff = &p_beta - &p_alpha;
    let c_matrix = &l_c_pinv * &diff;
    let residual = (&l_c * &c_matrix - &diff).norm();
    if residual > ASSEMBLY_TOL {
        return Err(AnalysisError::Assembly(format!("L_c C = P_beta − P_alpha has residual {residual:e}")));
    }
    Ok(AveragedSystem {
        sensors: jn,
        p,
        c,
        lambda,
        l_c,
        l_c_pinv,
        r_h,
        r_h_lambda_inv,
        upsilon,
        omega,
        psi,
        projector,
        p_alpha,
        p_beta,
        c_matrix,
        links,
        unscaled,
        sensing: model.sensors.iter().map(|s| s.sigma2_eps).collect(),
        r_h_blocks,
    })
}

impl AveragedSystem {
    fn dim(&self) -> usize {
        self.sensors * self.p
    }

    /// `[R_{h,λ}⁻¹; 0]`, the input matrix of sensing and multiplier noise.
    pub fn input_matrix(&self) -> Matrix {
        numkit::vstack(&self.r_h_lambda_inv, &Matrix::zeros(self.dim(), self.dim()))
    }

    /// `[R_{h,λ}⁻¹(P_α − P_β); C]`, the input matrix of estimate-link noise.
    pub fn link_input_matrix(&self) -> Matrix {
        numkit::vstack(&(&self.r_h_lambda_inv * (&self.p_alpha - &self.p_beta)), &self.c_matrix)
    }

    /// Largest `c` for which the mean recursion is stable:
    /// `4 / ((1−λ) λ_max(R_h⁻¹ (L ⊗ I_p)))`.
    pub fn mean_stability_bound(&self) -> Result<f64> {
        // R_h⁻¹ M is similar to the symmetric F⁻¹ M F⁻ᵀ with R_h = F Fᵀ.
        let mut f_inv_blocks = Vec::with_capacity(self.sensors);
        for b in &self.r_h_blocks {
            let l = b
                .clone()
                .cholesky()
                .ok_or_else(|| AnalysisError::InvalidInput("R_h is not positive definite".into()))?
                .l();
            let inv = l
                .try_inverse()
                .ok_or_else(|| AnalysisError::InvalidInput("singular Cholesky factor".into()))?;
            f_inv_blocks.push(inv);
        }
        let f_inv = numkit::block_diag(&f_inv_blocks);
        let sym = numkit::symmetrize(&(&f_inv * &self.unscaled * f_inv.transpose()));
        let top = numkit::symmetric_eigenvalues(&sym)?.last().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(4.0 / ((1.0 - self.lambda) * top))
    }

    pub fn check_mean_stability(&self) -> Result<MeanStability> {
        let eig = numkit::eigenvalues(&self.omega)?;
        let mut unit = 0;
        let mut other = 0.0f64;
        for z in &eig {
            if (z - 1.0).norm() <= UNIT_EIGEN_TOL {
                unit += 1;
            } else {
                other = other.max(z.norm());
            }
        }
        let n = self.dim();
        let shifted = self.omega.transpose() - Matrix::identity(2 * n, 2 * n);
        let left = numkit::null_space(&shifted, 1e-10)?;
        let mut upper = 0.0f64;
        let mut lower = 0.0f64;
        for k in 0..left.ncols() {
            let v = left.column(k);
            let norm = v.norm();
            let top = v.rows(0, n).norm() / norm;
            let q: Vector = v.rows(n, n).clone_owned() / norm;
            upper = upper.max(top);
            lower = lower.max((&self.l_c * q).norm());
        }
        Ok(MeanStability {
            unit_eigen_count: unit,
            max_other_modulus: other,
            is_stable: unit == self.p && other < 1.0,
            left_unit_vectors: left.ncols(),
            left_upper_norm: upper,
            left_lower_residual: lower,
        })
    }

    pub fn check_mse_stability(&self) -> Result<MseStability> {
        let rho = numkit::spectral_radius(&self.psi)?;
        Ok(MseStability { rho_psi: rho, is_stable: rho < 1.0 - 1e-10 })
    }

    fn sensing_block(&self) -> Matrix {
        let blocks: Vec<Matrix> =
            self.r_h_blocks.iter().zip(&self.sensing).map(|(r, &s)| r * s).collect();
        numkit::block_diag(&blocks)
    }

    /// `R_ε(t) = (1−λ^{2(t+1)})/(1−λ²) bdiag(R_hj σ²_εj)`.
    pub fn r_eps(&self, t: Option<usize>) -> Matrix {
        let l2 = self.lambda * self.lambda;
        let factor = match t {
            Some(t) => (1.0 - l2.powi(t as i32 + 1)) / (1.0 - l2),
            None => 1.0 / (1.0 - l2),
        };
        self.sensing_block() * factor
    }

    pub fn noise_covariances(&self, model: &SensorEnsembleModel, t: Option<usize>) -> Result<NoiseCovariances> {
        if model.sensor_count() != self.sensors || model.p != self.p {
            return Err(AnalysisError::InvalidInput("model does not match the averaged system".into()));
        }
        // η̄_j = ½ Σ_{j'∈N_j} η̄_j^{j'}, each reception with the receiver's covariance
        let mut degree = vec![0usize; self.sensors];
        for l in &self.links {
            degree[l.receiver] += 1;
        }
        let bar_blocks: Vec<Matrix> = model
            .sensors
            .iter()
            .zip(&degree)
            .map(|(s, &d)| &s.r_eta * (0.25 * d as f64))
            .collect();
        let r_bar_eta = numkit::block_diag(&bar_blocks);
        let link_blocks: Vec<Matrix> = self.links.iter().map(|l| model.sensors[l.receiver].r_eta.clone()).collect();
        let r_eta = if link_blocks.is_empty() { Matrix::zeros(0, 0) } else { numkit::block_diag(&link_blocks) };
        let g = self.input_matrix();
        let h = self.link_input_matrix();
        Ok(NoiseCovariances {
            r_eps: self.r_eps(t),
            r_bar_eta_lambda: &g * &r_bar_eta * g.transpose(),
            r_eta_lambda: &h * &r_eta * h.transpose(),
            r_bar_eta,
            r_eta,
        })
    }

    /// Forcing term `R_ν` of the `R_z` recursion.
    fn forcing(&self, noise: &NoiseCovariances, r_eps: &Matrix, r_zeps: &Matrix, g: &Matrix) -> Matrix {
        let psi = &self.psi;
        let comm = &noise.r_bar_eta_lambda + &noise.r_eta_lambda;
        let cross = psi * r_zeps * g.transpose();
        let total = psi * comm * psi.transpose() + g * r_eps * g.transpose() + &cross + cross.transpose();
        numkit::symmetrize(&total)
    }

    /// `R_y1 = R_z1 + R_{h,λ}⁻¹[R_η̄ + (P_α−P_β) R_η (P_α−P_β)ᵀ]R_{h,λ}⁻¹`.
    fn output_covariance(&self, r_z: &Matrix, noise: &NoiseCovariances) -> Matrix {
        let n = self.dim();
        let d = &self.p_alpha - &self.p_beta;
        let inner = &noise.r_bar_eta + &d * &noise.r_eta * d.transpose();
        let offset = &self.r_h_lambda_inv * inner * &self.r_h_lambda_inv;
        numkit::symmetrize(&(r_z.view((0, 0), (n, n)).clone_owned() + offset))
    }

    /// Per-sensor and global metrics from a covariance of `β₁`.
    pub fn metrics(&self, r_y1: &Matrix) -> (Vec<Metrics>, Metrics) {
        let per: Vec<Metrics> = (0..self.sensors)
            .map(|j| {
                let b = block_of(r_y1, j, j, self.p);
                let emse = (&self.r_h_blocks[j] * &b).trace();
                Metrics { msd: b.trace(), emse, mse: emse + self.sensing[j] }
            })
            .collect();
        let global = Metrics::mean(&per);
        (per, global)
    }

    /// `R_zε(∞) = (I − λΨ)⁻¹ [λ R_{h,λ}⁻¹; 0] R_ε(∞)`.
    pub fn cross_covariance_limit(&self, r_eps_inf: &Matrix) -> Result<Matrix> {
        let m = 2 * self.dim();
        let a = Matrix::identity(m, m) - &self.psi * self.lambda;
        let rhs = self.input_matrix() * r_eps_inf * self.lambda;
        Ok(numkit::solve(&a, &rhs)?)
    }

    pub fn steady_state(&self, model: &SensorEnsembleModel, method: SteadyStateMethod) -> Result<SteadyStateReport> {
        let stab = self.check_mse_stability()?;
        if !stab.is_stable {
            return Err(AnalysisError::Unstable { rho: stab.rho_psi });
        }
        let noise = self.noise_covariances(model, None)?;
        let g = self.input_matrix();
        let r_zeps = self.cross_covariance_limit(&noise.r_eps)?;
        let r_nu = self.forcing(&noise, &noise.r_eps, &r_zeps, &g);
        let method = match method {
            SteadyStateMethod::Auto if self.dim() <= KRONECKER_MAX_JP => SteadyStateMethod::Kronecker,
            SteadyStateMethod::Auto => SteadyStateMethod::Doubling,
            m => m,
        };
        let r_z = match method {
            SteadyStateMethod::Kronecker => kronecker_fixed_point(&self.psi, &r_nu, stab.rho_psi)?,
            _ => doubling_fixed_point(&self.psi, &r_nu)?,
        };
        let r_y1 = self.output_covariance(&r_z, &noise);
        let (per_sensor, global) = self.metrics(&r_y1);
        Ok(SteadyStateReport { r_z, r_zeps, r_y1, per_sensor, global, method })
    }

    /// Iterates the exact time recursions of `R_zε(t)` and `R_z(t)` from zero
    /// for `steps` steps. Metrics are recorded at `t = 0, k, 2k, …` and at the
    /// final step when `record_every = Some(k)`.
    pub fn covariance_recursion_iterate(
        &self,
        model: &SensorEnsembleModel,
        steps: usize,
        record_every: Option<usize>,
    ) -> Result<CovarianceTrajectory> {
        let noise = self.noise_covariances(model, None)?;
        let g = self.input_matrix();
        let m = 2 * self.dim();
        let base = self.sensing_block();
        let l2 = self.lambda * self.lambda;
        let mut r_z = Matrix::zeros(m, m);
        let mut r_zeps = Matrix::zeros(m, self.dim());
        let mut traj = CovarianceTrajectory {
            r_z: r_z.clone(),
            r_zeps: r_zeps.clone(),
            r_y1: Matrix::zeros(self.dim(), self.dim()),
            times: Vec::new(),
            global: Vec::new(),
            per_sensor: Vec::new(),
        };
        let record = |t: usize, r_y1: &Matrix, traj: &mut CovarianceTrajectory| {
            let (per, global) = self.metrics(r_y1);
            traj.times.push(t);
            traj.global.push(global);
            traj.per_sensor.push(per);
        };
        if record_every.is_some() {
            let zero = Matrix::zeros(self.dim(), self.dim());
            record(0, &zero, &mut traj);
        }
        let mut norms = Vec::with_capacity(steps + 1);
        norms.push(0.0);
        // R_ε(t−1) at t = 1
        let mut eps_factor_prev = 1.0;
        for t in 1..=steps {
            let eps_factor = (1.0 - l2.powi(t as i32 + 1)) / (1.0 - l2);
            let r_eps_prev = &base * eps_factor_prev;
            r_zeps = &self.psi * &r_zeps * self.lambda + &g * r_eps_prev * self.lambda;
            let r_eps = &base * eps_factor;
            let r_nu = self.forcing(&noise, &r_eps, &r_zeps, &g);
            r_z = &self.psi * &r_z * self.psi.transpose() + r_nu;
            eps_factor_prev = eps_factor;

            let norm = r_z.norm();
            if !norm.is_finite() {
                return Err(AnalysisError::Diverged { step: t, norm });
            }
            if t >= 200 && norm > 10.0 * norms[t - 100] && norms[t - 100] > 0.0 {
                return Err(AnalysisError::Diverged { step: t, norm });
            }
            norms.push(norm);
            if let Some(k) = record_every {
                if t % k.max(1) == 0 || t == steps {
                    let r_y1 = self.output_covariance(&r_z, &noise);
                    record(t, &r_y1, &mut traj);
                }
            }
        }
        traj.r_y1 = if steps == 0 { Matrix::zeros(self.dim(), self.dim()) } else { self.output_covariance(&r_z, &noise) };
        traj.r_z = r_z;
        traj.r_zeps = r_zeps;
        Ok(traj)
    }
}

/// Solves `X = A X Aᵀ + Q` through `(I − A⊗A) vec X = vec Q`.
pub fn kronecker_fixed_point(a: &Matrix, q: &Matrix, rho: f64) -> Result<Matrix> {
    let n = a.nrows();
    if 1.0 - rho * rho < 1e-12 {
        return Err(AnalysisError::IllConditioned(format!("spectral radius {rho} too close to one")));
    }
    let big = Matrix::identity(n * n, n * n) - numkit::kron(a, a);
    let rhs = numkit::vec(q);
    let sol = numkit::solve(&big, &Matrix::from_column_slice(n * n, 1, rhs.as_slice())).map_err(|e| match e {
        NumError::Singular(msg) => AnalysisError::IllConditioned(msg),
        other => other.into(),
    })?;
    let x = numkit::unvec(&Vector::from_column_slice(sol.as_slice()), n, n)?;
    Ok(numkit::symmetrize(&x))
}

/// Sums `Σ_k A^k Q (A^k)ᵀ` by repeated squaring.
pub fn doubling_fixed_point(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let mut x = q.clone();
    let mut pow = a.clone();
    for _ in 0..64 {
        let add = &pow * &x * pow.transpose();
        let done = add.norm() <= 1e-16 * x.norm();
        x += &add;
        if done {
            return Ok(numkit::symmetrize(&x));
        }
        pow = &pow * &pow;
        if !pow.iter().all(|v| v.is_finite()) {
            return Err(AnalysisError::IllConditioned("matrix powers overflowed".into()));
        }
    }
    Err(AnalysisError::IllConditioned("doubling iteration did not converge".into()))
}
