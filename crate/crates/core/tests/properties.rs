use std::path::Path;

use drls::estimators::{DrlsNetwork, DrlsParams, NetworkEstimator};
use drls::harness::{Algorithm, ExperimentConfig, ScenarioSpec, TopologySpec};
use drls::numkit::Matrix;
use drls::signalgen::{
    iid_scenario, CovarianceSpec, GaussianLinkNoise, IdealLinks, IidSpec, SeedTree, SnapshotStream, VarianceProfile,
};
use drls::topology::Topology;
use proptest::prelude::*;

fn topology() -> impl Strategy<Value = Topology> {
    (0usize..4, 2usize..8, any::<u64>()).prop_map(|(kind, n, seed)| match kind {
        0 => Topology::ring(n.max(3)).unwrap(),
        1 => Topology::path(n).unwrap(),
        2 => Topology::complete(n).unwrap(),
        _ => Topology::random_geometric(n, 0.7, seed, 1000).unwrap(),
    })
}

fn model(sensors: usize, p: usize, seed: u64) -> drls::signalgen::SensorEnsembleModel {
    let spec = IidSpec {
        regressor_cov: CovarianceSpec::RandomDiagonal { min: 0.5, max: 2.0 },
        sensing_noise: VarianceProfile::ScaledUniform(1e-2),
        link_noise_var: 1e-2,
        s0: None,
    };
    iid_scenario(sensors, p, &spec, seed).unwrap()
}

fn is_spd(m: &Matrix) -> bool {
    let asym = (m - m.transpose()).norm();
    asym <= 1e-9 * m.norm() && m.clone().cholesky().is_some()
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    let topo = prop_oneof![
        (2usize..30, 0.05f64..1.5, any::<u64>())
            .prop_map(|(sensors, range, seed)| TopologySpec::Geometric { sensors, range, seed }),
        (2usize..20).prop_map(TopologySpec::Complete),
        (3usize..20).prop_map(TopologySpec::Ring),
        (2usize..20).prop_map(TopologySpec::Path),
    ];
    let regressor = prop_oneof![
        Just(CovarianceSpec::Identity),
        (0.01f64..10.0).prop_map(CovarianceSpec::Scaled),
        (0.01f64..1.0, 1.0f64..5.0).prop_map(|(min, max)| CovarianceSpec::RandomDiagonal { min, max }),
    ];
    let noise = prop_oneof![
        (0.0f64..1.0).prop_map(VarianceProfile::Constant),
        (0.0f64..1.0).prop_map(VarianceProfile::ScaledUniform),
    ];
    let scenario = prop_oneof![
        any::<u64>().prop_map(|seed| ScenarioSpec::Reference { seed }),
        (1usize..9, regressor, noise, 0.0f64..1.0, any::<u64>()).prop_map(|(p, regressor, sensing_noise, sigma2_eta, seed)| {
            ScenarioSpec::Iid { p, regressor, sensing_noise, sigma2_eta, seed }
        }),
    ];
    let algorithm = prop_oneof![
        Just(Algorithm::DrlsAma),
        Just(Algorithm::DrlsAdmom),
        Just(Algorithm::LocalRls),
        Just(Algorithm::Centralized),
    ];
    (
        topo,
        scenario,
        algorithm,
        (0.5f64..1.0, 0.001f64..10.0, 0.01f64..1e4),
        (10usize..5000, 1usize..500, any::<bool>(), any::<u64>()),
        (0.0f64..1.0, 0.0f64..1.0),
    )
        .prop_map(|(topology, scenario, algorithm, (lambda, c, delta), (horizon, runs, link_noise, master_seed), (b, w))| {
            let burn_in = ((horizon - 1) as f64 * b) as usize;
            let window = 1 + ((horizon - burn_in - 1) as f64 * w) as usize;
            ExperimentConfig {
                topology,
                scenario,
                algorithm,
                lambda,
                c,
                delta,
                horizon,
                runs,
                burn_in,
                window,
                link_noise,
                master_seed,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ideal_links_conserve_multipliers(topo in topology(), p in 1usize..4, seed in any::<u64>(), steps in 1usize..40) {
        let m = model(topo.sensor_count(), p, seed);
        let params = DrlsParams { lambda: 0.95, c: 0.5, delta: 10.0 };
        let mut net = DrlsNetwork::new(&topo, p, params).unwrap();
        let mut stream = SnapshotStream::new(&m, &SeedTree::new(seed), 0).unwrap();
        for t in 0..steps as u64 {
            let snap = stream.next_snapshot(t).unwrap();
            net.step(&snap, &mut IdealLinks).unwrap();
        }
        prop_assert!(net.multiplier_imbalance().norm() < 1e-8);
    }

    #[test]
    fn inverse_correlation_stays_spd(topo in topology(), p in 1usize..5, seed in any::<u64>(), steps in 1usize..60) {
        let m = model(topo.sensor_count(), p, seed);
        let params = DrlsParams { lambda: 0.9, c: 0.2, delta: 100.0 };
        let seeds = SeedTree::new(seed);
        let mut net = DrlsNetwork::new(&topo, p, params).unwrap();
        let mut stream = SnapshotStream::new(&m, &seeds, 0).unwrap();
        let mut links = GaussianLinkNoise::new(&m, &topo, &seeds, 0).unwrap();
        for t in 0..steps as u64 {
            let snap = stream.next_snapshot(t).unwrap();
            net.step(&snap, &mut links).unwrap();
        }
        for j in 0..topo.sensor_count() {
            prop_assert!(is_spd(net.kernel(j).pinv()));
        }
    }

    #[test]
    fn seeded_streams_are_reproducible(seed in any::<u64>(), run in 0u64..1000, p in 1usize..5) {
        let topo = Topology::ring(4).unwrap();
        let m = model(4, p, seed);
        let seeds = SeedTree::new(seed);
        let trace = |run: u64| {
            let params = DrlsParams { lambda: 0.95, c: 0.1, delta: 100.0 };
            let mut net = DrlsNetwork::new(&topo, p, params).unwrap();
            let mut stream = SnapshotStream::new(&m, &seeds, run).unwrap();
            let mut links = GaussianLinkNoise::new(&m, &topo, &seeds, run).unwrap();
            let mut out = Vec::new();
            for t in 0..20 {
                let snap = stream.next_snapshot(t).unwrap();
                net.step(&snap, &mut links).unwrap();
                out.extend(net.estimate(0).iter().copied());
            }
            out
        };
        let a = trace(run);
        prop_assert_eq!(&a, &trace(run));
        prop_assert_ne!(a, trace(run + 1));
    }

    #[test]
    fn config_text_round_trips(cfg in config()) {
        let back = ExperimentConfig::parse(&cfg.to_text(), Path::new(".")).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn edge_list_round_trips(topo in topology()) {
        let back = Topology::parse_edge_list(&topo.to_edge_list()).unwrap();
        prop_assert_eq!(back.edges(), topo.edges());
        prop_assert_eq!(back.sensor_count(), topo.sensor_count());
    }
}
