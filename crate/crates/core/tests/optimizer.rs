use mimo_precoding::harness::channels::{generate_channels, ChannelModel};
use mimo_precoding::harness::scenario::{run_scenario, Algorithm, ScenarioConfig};
use mimo_precoding::model::noise_from_susinr;
use mimo_precoding::optimizer::{lbfgs_maximize, start_precoder, ObjectiveKind, ObjectiveSpec, OptimizerConfig, StartPoint};
use mimo_precoding::{SystemDims, SystemParams};

#[test]
fn cd_improves_on_arzf_start() {
    let dims = SystemDims::uniform(8, 2, 2, 1).unwrap();
    let cfg = OptimizerConfig::default();
    let mut strict = 0;
    for seed in 0..100 {
        let set = generate_channels(&dims, seed, ChannelModel::IidGaussian).unwrap();
        let noise = noise_from_susinr(&set, 1.0, 10.0).unwrap();
        let spec = ObjectiveSpec::new(ObjectiveKind::Cd, &set, SystemParams::new(1.0, noise, 2).unwrap());
        let start = spec.value_at(&start_precoder(&spec, &StartPoint::Arzf).unwrap()).unwrap();
        let (w, trace) = lbfgs_maximize(&spec, &cfg).unwrap();
        let end = spec.value_at(&w.w).unwrap();
        assert!(end >= start, "seed {seed}: {end} < {start}");
        assert!(trace.is_monotone());
        strict += (end > start) as usize;
    }
    assert!(strict >= 95, "strict improvement on {strict}/100 seeds");
}

#[test]
fn mean_se_non_decreasing_in_susinr() {
    let cfg = ScenarioConfig {
        dims: SystemDims::uniform(16, 4, 2, 1).unwrap(),
        seeds: (0..6).collect(),
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&cfg).unwrap();
    assert_eq!(report.rows.len(), 6 * 12 * 8);
    assert_eq!(report.failures().count(), 0);
    for algorithm in Algorithm::STANDARD {
        let curve: Vec<f64> = cfg.susinr_grid_db.iter().map(|&s| report.mean(s, algorithm).unwrap()).collect();
        assert!(curve.windows(2).all(|w| w[1] >= w[0]), "{algorithm}: {curve:?}");
    }
}
