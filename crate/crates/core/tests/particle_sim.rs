use vicsek_core::particle_sim::{equilibrium_gof, run_homogeneous, run_spatial, SimConfig};
use vicsek_core::{c1, DensityLaw, KernelSpec, ModelParams, QuadSpec};

fn unit_model(dim: usize, kappa: f64) -> ModelParams {
    ModelParams::new(dim, DensityLaw::Constant { value: kappa }, DensityLaw::Constant { value: 1.0 })
}

fn seed_means(dt: f64, seeds: std::ops::Range<u64>) -> Vec<f64> {
    seeds
        .map(|s| {
            let cfg = SimConfig::homogeneous(2, 1024, unit_model(2, 2.0), dt, 30.0, s);
            run_homogeneous(&cfg).unwrap().series.time_average(10.0)
        })
        .collect()
}

#[test]
fn halving_the_step_stays_within_seed_spread() {
    let a = seed_means(0.02, 0..4);
    let b = seed_means(0.01, 10..14);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let range = |v: &[f64]| {
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    let spread = range(&a).max(range(&b));
    assert!((mean(&a) - mean(&b)).abs() < spread, "{a:?} {b:?}");
}

#[test]
fn order_rises_to_equilibrium_and_matches_marginal() {
    let kappa = 3.0;
    let cfg = SimConfig::homogeneous(2, 4096, unit_model(2, kappa), 0.01, 20.0, 5);
    let run = run_homogeneous(&cfg).unwrap();
    let target = c1(kappa, 2, &QuadSpec::default()).unwrap();
    assert!(run.series.values[0] < 0.1);
    let late = run.series.time_average(8.0);
    assert!((late - target).abs() < 0.03, "{late} vs {target}");
    let gof = equilibrium_gof(&run.final_state, kappa, 2);
    assert!(gof.passed, "{gof:?}");
    assert!(run.final_state.max_norm_defect() <= 1e-12);
}

#[test]
fn spatial_runs_are_reproducible() {
    let mut cfg = SimConfig::homogeneous(2, 600, unit_model(2, 4.0), 0.01, 0.5, 99);
    cfg.homogeneous = false;
    cfg.box_l = 2.0;
    cfg.kernel_k = KernelSpec::forward_ball(0.2);
    cfg.kernel_ktilde = KernelSpec::ball(0.2);
    let a = run_spatial(&cfg).unwrap();
    let b = run_spatial(&cfg).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.positions, y.positions);
        assert_eq!(x.orientations, y.orientations);
    }
    assert_eq!(a.series.values, b.series.values);
    cfg.n_particles = 0;
    assert!(run_spatial(&cfg).unwrap().snapshots.is_empty());
}
