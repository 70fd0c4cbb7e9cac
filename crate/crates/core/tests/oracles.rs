//! Independent simulations of the averaged error model, checked against the
//! closed-form machinery in `analysis`.

use drls::analysis::{build_averaged_system, AveragedSystem, SteadyStateMethod};
use drls::numkit::{Matrix, Vector};
use drls::signalgen::{iid_scenario, CovarianceSpec, IidSpec, SensorEnsembleModel, VarianceProfile};
use drls::topology::Topology;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn setup(lambda: f64, c: f64) -> (AveragedSystem, SensorEnsembleModel) {
    let topo = Topology::ring(4).unwrap();
    let spec = IidSpec {
        regressor_cov: CovarianceSpec::RandomDiagonal { min: 0.5, max: 2.0 },
        sensing_noise: VarianceProfile::ScaledUniform(0.05),
        link_noise_var: 0.02,
        s0: None,
    };
    let model = iid_scenario(4, 2, &spec, 5).unwrap();
    let sys = build_averaged_system(&topo, &model, c, lambda).unwrap();
    (sys, model)
}

/// Draws for one step of the averaged model.
struct Draws {
    /// `ε(t+1)`, the λ-weighted sensing-noise sum.
    eps: Vector,
    /// `η̄(t)`, half the sum of multiplier noises received at each sensor.
    bar_eta: Vector,
    /// `η(t)`, stacked per directed link.
    eta: Vector,
}

struct NoiseSource {
    rng: ChaCha8Rng,
    eps: Vector,
    h_scale: Vec<Vector>,
    sigma_eps: Vec<f64>,
    sigma_eta: Vec<f64>,
    lambda: f64,
}

impl NoiseSource {
    fn new(sys: &AveragedSystem, model: &SensorEnsembleModel, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            eps: Vector::zeros(sys.sensors * sys.p),
            h_scale: model.sensors.iter().map(|s| s.r_h.diagonal().map(f64::sqrt)).collect(),
            sigma_eps: model.sensors.iter().map(|s| s.sigma2_eps.sqrt()).collect(),
            sigma_eta: model.sensors.iter().map(|s| s.r_eta[(0, 0)].sqrt()).collect(),
            lambda: sys.lambda,
        }
    }

    fn next(&mut self, sys: &AveragedSystem) -> Draws {
        let p = sys.p;
        for j in 0..sys.sensors {
            let h = gaussian(&mut self.rng, p).component_mul(&self.h_scale[j]);
            let e: f64 = StandardNormal.sample(&mut self.rng);
            let mut block = self.eps.rows_mut(j * p, p);
            block *= self.lambda;
            block += h * (e * self.sigma_eps[j]);
        }
        let mut bar_eta = Vector::zeros(sys.sensors * p);
        let mut eta = Vector::zeros(sys.links.len() * p);
        for (k, link) in sys.links.iter().enumerate() {
            let s = self.sigma_eta[link.receiver];
            let m = gaussian(&mut self.rng, p) * s;
            let mut b = bar_eta.rows_mut(link.receiver * p, p);
            b += m * 0.5;
            eta.rows_mut(k * p, p).copy_from(&(gaussian(&mut self.rng, p) * s));
        }
        Draws { eps: self.eps.clone(), bar_eta, eta }
    }
}

/// One step of the averaged recursion for the stacked state `β`.
fn beta_step(sys: &AveragedSystem, beta: &Vector, d: &Draws) -> Vector {
    let n = sys.sensors * sys.p;
    let link = (&sys.p_alpha - &sys.p_beta) * &d.eta;
    let mut inner = &sys.upsilon * beta;
    let top = &d.eps + &d.bar_eta + &link;
    {
        let mut upper = inner.rows_mut(0, n);
        upper += &top;
    }
    {
        let mut lower = inner.rows_mut(n, n);
        lower -= &link;
    }
    let mut out = inner;
    let upper = &sys.r_h_lambda_inv * out.rows(0, n);
    out.rows_mut(0, n).copy_from(&upper);
    out
}

fn embed(sys: &AveragedSystem, z: &Vector) -> Vector {
    let n = sys.sensors * sys.p;
    let mut out = z.clone();
    let lower = &sys.l_c * z.rows(n, n);
    out.rows_mut(n, n).copy_from(&lower);
    out
}

#[test]
fn inner_state_reproduces_beta_pathwise() {
    let (sys, model) = setup(0.9, 0.5);
    let n = sys.sensors * sys.p;
    let g = sys.input_matrix();
    let h = sys.link_input_matrix();
    let d_mat = &sys.p_alpha - &sys.p_beta;
    let out_link = {
        let top = &sys.r_h_lambda_inv * &d_mat;
        drls::numkit::vstack(&top, &(-&d_mat))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut z = gaussian(&mut rng, 2 * n);
    let mut beta = embed(&sys, &z);
    let mut prev: Option<Draws> = None;
    let mut src = NoiseSource::new(&sys, &model, 8);
    let mut worst = 0.0f64;
    for _ in 0..400 {
        let d = src.next(&sys);
        beta = beta_step(&sys, &beta, &d);
        let mut z_next = &sys.psi * &z + &g * &d.eps;
        if let Some(p) = &prev {
            z_next += &sys.psi * (&h * &p.eta + &g * &p.bar_eta);
        }
        z = z_next;
        let rebuilt = embed(&sys, &z) + &g * &d.bar_eta + &out_link * &d.eta;
        worst = worst.max((&rebuilt - &beta).norm() / beta.norm().max(1e-12));
        prev = Some(d);
    }
    assert!(worst < 1e-9, "relative mismatch {worst:e}");
}

#[test]
fn simulated_error_covariance_matches_steady_state() {
    let (sys, model) = setup(0.9, 0.5);
    let n = sys.sensors * sys.p;
    let rho = sys.check_mse_stability().unwrap().rho_psi;
    assert!(rho < 0.999, "rho(Psi) = {rho}");
    let report = sys.steady_state(&model, SteadyStateMethod::Kronecker).unwrap();
    let iterated = sys.covariance_recursion_iterate(&model, 20_000, None).unwrap();
    assert!((&iterated.r_y1 - &report.r_y1).norm() < 1e-9 * report.r_y1.norm());

    let mut src = NoiseSource::new(&sys, &model, 21);
    let mut beta = Vector::zeros(2 * n);
    let burn = 5_000;
    let samples = 400_000;
    let mut acc = Matrix::zeros(n, n);
    for t in 0..burn + samples {
        let d = src.next(&sys);
        beta = beta_step(&sys, &beta, &d);
        if t >= burn {
            let b1 = beta.rows(0, n);
            acc += &b1 * b1.transpose();
        }
    }
    let empirical = acc / samples as f64;
    let (_, emp) = sys.metrics(&empirical);
    let pred = report.global;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(emp.msd, pred.msd) < 0.05, "MSD {} vs {}", emp.msd, pred.msd);
    assert!(rel(emp.emse, pred.emse) < 0.05, "EMSE {} vs {}", emp.emse, pred.emse);
    for j in 0..sys.sensors {
        let e = empirical.view((j * sys.p, j * sys.p), (sys.p, sys.p)).trace();
        let p = report.per_sensor[j].msd;
        assert!(rel(e, p) < 0.08, "sensor {j}: {e} vs {p}");
    }
}

#[test]
fn mean_recursion_decays_to_consensus() {
    let (sys, _) = setup(0.95, 0.2);
    let n = sys.sensors * sys.p;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = gaussian(&mut rng, 2 * n);
    let mut mean = embed(&sys, &z);
    for _ in 0..3_000 {
        mean = &sys.omega * &mean;
    }
    assert!(mean.rows(0, n).norm() < 1e-8, "{}", mean.rows(0, n).norm());
}
