//! Acceptance criteria 1–11, one line each. Run with
//! `cargo test -p vicsek-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vicsek_core::asymptotics::poly::q;
use vicsek_core::asymptotics::{compute_g, compute_h, PolyBasis1mX};
use vicsek_core::coefficients::{tilde_moments, CoefficientOptions, DEFAULT_GRID};
use vicsek_core::gci::TurningProfile;
use vicsek_core::hyperbolicity::{FullVerdict, ReducedVerdict, ScanRange};
use vicsek_core::macro_solver::{measure_wave_speed, solve_1d_with_table, CoefficientTable, MacroConfig, MacroState1D, Wave};
use vicsek_core::particle_sim::{equilibrium_gof, run_homogeneous, SimConfig};
use vicsek_core::{
    c1, classify, eigenvalues, gci_2d_closed, kernel_moments, moment_identities, region_map,
    solve_gci, turning_coefficients_2d, vmf_average, CoefficientSet, DensityLaw, KernelSpec, ModelParams, QuadSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `I₁(κ)/I₀(κ)` from the power series of both Bessel functions.
fn bessel_ratio(kappa: f64) -> f64 {
    let x = kappa * kappa / 4.0;
    let (mut t0, mut t1) = (1.0, kappa / 2.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    for k in 0..2000 {
        s0 += t0;
        s1 += t1;
        let k = k as f64;
        t0 *= x / ((k + 1.0) * (k + 1.0));
        t1 *= x / ((k + 1.0) * (k + 2.0));
        if t0 < 1e-18 * s0 && k > kappa {
            break;
        }
    }
    s1 / s0
}

fn langevin(kappa: f64) -> f64 {
    1.0 / kappa.tanh() - 1.0 / kappa
}

fn criterion_1() -> Outcome {
    let quad = QuadSpec::default();
    let mut worst: f64 = 0.0;
    for kappa in [0.01, 0.1, 1.0, 10.0, 50.0] {
        worst = worst.max((c1(kappa, 3, &quad).unwrap() - langevin(kappa)).abs());
        worst = worst.max((c1(kappa, 2, &quad).unwrap() - bessel_ratio(kappa)).abs());
    }
    outcome(worst < 1e-10, format!("max |c1 - oracle| = {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let quad = QuadSpec::default();
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for kappa in geomspace(0.1, 100.0, 10) {
            let id = moment_identities(kappa, n, &quad).unwrap();
            let direct = [
                vmf_average(&|c: f64| 1.0 - c * c, kappa, n, &quad).unwrap(),
                vmf_average(&|c: f64| c * (1.0 - c * c), kappa, n, &quad).unwrap(),
                vmf_average(&|c: f64| c * c * (1.0 - c * c), kappa, n, &quad).unwrap(),
            ];
            for (d, i) in direct.iter().zip([id.sin2, id.cos_sin2, id.cos2_sin2]) {
                worst = worst.max((d - i).abs() / d.abs());
            }
        }
    }
    outcome(worst < 1e-9, format!("max relative error = {worst:.2e}"))
}

fn gci_sup_error(kappa: f64, grid: usize) -> f64 {
    let sol = solve_gci(kappa, 2, grid).unwrap();
    sol.theta()
        .iter()
        .zip(sol.g())
        .map(|(t, g)| (g - gci_2d_closed(kappa, *t).unwrap()).abs())
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut orders = Vec::new();
    for kappa in [0.5, 1.0, 5.0, 20.0] {
        worst_err = worst_err.max(gci_sup_error(kappa, 2048));
        let grids = [128.0, 256.0, 512.0, 1024.0];
        let errs: Vec<f64> = grids.iter().map(|g| gci_sup_error(kappa, *g as usize)).collect();
        orders.push(-loglog_slope(&grids, &errs));
    }
    let orders_ok = orders.iter().all(|p| (1.8..=2.2).contains(p));
    outcome(
        worst_err <= 5e-6 && orders_ok,
        format!("sup error at 2048 = {worst_err:.2e}, orders = {orders:.3?}"),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    for n in 2..=4i64 {
        let h = compute_h(1, n as usize);
        let g = compute_g(2, n as usize);
        let pins = [
            ("H0", &h[0], PolyBasis1mX::from_monomial(&[q(1, n - 1)])),
            ("H1", &h[1], PolyBasis1mX::from_monomial(&[q(0, 1), q(-1, 2 * n * (n - 1))])),
            ("G1^2", &g[0], PolyBasis1mX::from_monomial(&[q(4, 3), q(-1, 3)])),
            ("G2^2", &g[1], PolyBasis1mX::from_monomial(&[q(2 * (n - 2), 3)])),
        ];
        for (name, got, want) in pins {
            if *got != want {
                failures.push(format!("{name}(n={n}) = {:?}", got.to_monomial().iter().map(|c| c.to_string()).collect::<Vec<_>>()));
            }
        }
    }
    let detail = if failures.is_empty() {
        "all pins exact".to_string()
    } else {
        format!("mismatches: {}", failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_5() -> Outcome {
    let quad = QuadSpec::default();
    let small = geomspace(0.01, 0.1, 6);
    let large = geomspace(30.0, 300.0, 6);
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |label: String, x: &[f64], r: Vec<f64>, expect: f64| {
        let s = loglog_slope(x, &r);
        let ok = (s - expect).abs() <= 0.3;
        pass &= ok;
        lines.push(format!("{label} {s:.2} (want {expect}){}", if ok { "" } else { " FAIL" }));
    };
    for n in [2usize, 3, 4] {
        let nf = n as f64;
        let r: Vec<f64> = small
            .iter()
            .map(|&k| c1(k, n, &quad).unwrap() - (k / nf - k.powi(3) / (nf * nf * (nf + 2.0))))
            .collect();
        check(format!("c1 small n={n}"), &small, r, 5.0);
    }
    // n = 3: the large-κ remainder of coth κ - 1/κ is exponentially small
    for n in [2usize, 4] {
        let nf = n as f64;
        let r: Vec<f64> = large
            .iter()
            .map(|&k| {
                c1(k, n, &quad).unwrap() - (1.0 - (nf - 1.0) / (2.0 * k) + (nf - 1.0) * (nf - 3.0) / (8.0 * k * k))
            })
            .collect();
        check(format!("c1 large n={n}"), &large, r, -3.0);
    }
    for n in [2usize, 3, 4] {
        let nf = n as f64;
        let r: Vec<f64> = small
            .iter()
            .map(|&k| tilde_moments(k, n, DEFAULT_GRID).unwrap().0 - (2.0 * nf - 1.0) * k / (2.0 * nf * (nf + 2.0)))
            .collect();
        check(format!("c1~ small n={n}"), &small, r, 2.0);
        let r: Vec<f64> = large
            .iter()
            .map(|&k| {
                tilde_moments(k, n, DEFAULT_GRID).unwrap().0
                    - (1.0 - (nf + 1.0) / (2.0 * k) + (nf + 1.0) * (3.0 * nf - 7.0) / (24.0 * k * k))
            })
            .collect();
        check(format!("c1~ large n={n}"), &large, r, -3.0);
    }
    outcome(pass, format!("slopes: {}", lines.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut worst_small: f64 = 0.0;
    let mut worst_large: f64 = 0.0;
    for n in [2usize, 3, 4] {
        let nf = n as f64;
        let s = 1.0 - tilde_moments(0.01, n, DEFAULT_GRID).unwrap().1;
        worst_small = worst_small.max((s / ((nf + 1.0) / (nf + 2.0)) - 1.0).abs());
        let l = 1.0 - tilde_moments(100.0, n, DEFAULT_GRID).unwrap().1;
        worst_large = worst_large.max((l / ((nf + 1.0) / 100.0) - 1.0).abs());
    }
    outcome(
        worst_small < 0.02 && worst_large < 0.05,
        format!("relative deviation {worst_small:.2e} at kappa=0.01, {worst_large:.2e} at kappa=100"),
    )
}

fn random_set(rng: &mut ChaCha8Rng) -> CoefficientSet {
    let lambda = match rng.random_range(0..4) {
        0 => rng.random_range(-1e-9..1e-9),
        _ => rng.random_range(-2.0..2.0),
    };
    CoefficientSet {
        rho: 1.0,
        kappa: 1.0,
        kappa_dot: 0.0,
        c1: rng.random_range(0.0..1.0),
        c1_tilde: 0.0,
        cos2_tilde: 0.0,
        c2: rng.random_range(-1.0..2.0),
        c3: rng.random_range(-1.0..2.0),
        lambda,
    }
}

fn criterion_7() -> Outcome {
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0usize;
    let mut window_checked = 0usize;
    for _ in 0..100_000 {
        let cs = random_set(&mut rng);
        let theta = rng.random_range(0.0..PI);
        let v = classify(&cs, theta, tol);
        if (v.full_system == FullVerdict::Hyperbolic) != (cs.lambda > tol) {
            violations += 1;
        }
        if cs.lambda < -tol {
            let edge = (cs.c2 - cs.c3).abs() / (2.0 * (-cs.lambda * cs.c1).sqrt());
            let t = theta.tan().abs();
            if (t - edge).abs() > 1e-8 * edge.max(1.0) {
                window_checked += 1;
                if v.reduced_1d.is_hyperbolic() != (t < edge) {
                    violations += 1;
                }
                if v.reduced_1d.is_hyperbolic() != eigenvalues(&cs, theta).is_real() {
                    violations += 1;
                }
            }
        } else if cs.lambda > tol && v.reduced_1d != ReducedVerdict::Hyperbolic {
            violations += 1;
        }
    }
    let model = ModelParams::new(
        3,
        DensityLaw::Power { coef: 1.0, exponent: 2.0 },
        DensityLaw::Constant { value: 1.0 },
    );
    let map = region_map(&model, ScanRange::new(1.0, 10.0, 37), ScanRange::new(0.0, PI / 2.0, 9), tol).unwrap();
    let trace = map.lambda_trace();
    let sign_change = trace.iter().any(|(_, l)| *l > 0.0) && trace.iter().any(|(_, l)| *l < 0.0);
    let mut worst: f64 = 0.0;
    for (rho, l) in trace.iter().filter(|(r, _)| r * r >= 50.0) {
        let lead = -rho.powi(-2);
        worst = worst.max((l - lead).abs() / lead.abs());
    }
    outcome(
        violations == 0 && sign_change && worst <= 0.1 && map.invalid_rows() == 0,
        format!(
            "{violations} violations in 1e5 cases ({window_checked} window checks); lambda sign change: {sign_change}; \
             max rel. deviation from (1-beta)rho^-beta where kappa>=50: {worst:.3}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let quad = QuadSpec::default();
    let disk = kernel_moments(&KernelSpec::forward_ball(1.0), 2, &quad).unwrap().alpha;
    let ball = kernel_moments(&KernelSpec::forward_ball(1.0), 3, &quad).unwrap().alpha;
    let iso2 = kernel_moments(&KernelSpec::ball(1.0), 2, &quad).unwrap().alpha;
    let iso3 = kernel_moments(&KernelSpec::ball(1.0), 3, &quad).unwrap().alpha;
    let e_disk = (disk - 4.0 / (3.0 * PI)).abs();
    let e_ball = (ball - 3.0 / 8.0).abs();
    outcome(
        e_disk < 1e-10 && e_ball < 1e-10 && iso2 == 0.0 && iso3 == 0.0,
        format!("half-disk error {e_disk:.1e}, half-ball error {e_ball:.1e}, isotropic alpha = ({iso2}, {iso3})"),
    )
}

/// Coefficients `(a₁, a₂)` of `f(d) = f₀ + a₁d + a₂d² + a₃d³` through three samples.
fn fit_anchored(f0: f64, d: &[f64; 3], f: &[f64; 3]) -> (f64, f64) {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i] = [d[i], d[i] * d[i], d[i].powi(3), f[i] - f0];
    }
    for c in 0..3 {
        let p = (c..3).max_by(|a, b| m[*a][c].abs().total_cmp(&m[*b][c].abs())).unwrap();
        m.swap(c, p);
        for r in 0..3 {
            if r != c {
                let k = m[r][c] / m[c][c];
                for j in c..4 {
                    m[r][j] -= k * m[c][j];
                }
            }
        }
    }
    (m[0][3] / m[0][0], m[1][3] / m[1][1])
}

fn criterion_9() -> Outcome {
    let quad = QuadSpec::default();
    let alpha = 0.3;
    let ds = [0.02, 0.04, 0.08];
    let mut pass = true;
    let mut lines = Vec::new();
    for gamma in [0.0, 0.5] {
        let mut c1v = [0.0; 3];
        let mut c2v = [0.0; 3];
        let mut lv = [0.0; 3];
        for (i, &d) in ds.iter().enumerate() {
            let t = turning_coefficients_2d(&TurningProfile::affine(gamma, d), alpha, &quad).unwrap();
            c1v[i] = t.c1;
            c2v[i] = t.c2;
            lv[i] = t.lambda;
        }
        let checks = [
            ("c1 linear", fit_anchored(1.0, &ds, &c1v).0, -0.5),
            ("c2 linear", fit_anchored(1.0 - alpha, &ds, &c2v).0, (1.0 + 1.5 * gamma) * alpha - 1.5),
            ("lambda linear", fit_anchored(0.0, &ds, &lv).0, 1.0),
            ("lambda quadratic", fit_anchored(0.0, &ds, &lv).1, 1.5 * gamma),
        ];
        for (name, got, want) in checks {
            let ok = (got - want).abs() <= 0.1 * want.abs() + 1e-6;
            pass &= ok;
            lines.push(format!("gamma={gamma} {name} {got:.4} vs {want}{}", if ok { "" } else { " FAIL" }));
        }
    }
    outcome(pass, lines.join(", "))
}

fn criterion_10() -> Outcome {
    let model = ModelParams::new(3, DensityLaw::Constant { value: 1.0 }, DensityLaw::Constant { value: 1.0 });
    let target = langevin(1.0);
    let mut means = Vec::new();
    let mut gof = Vec::new();
    for seed in 0..8u64 {
        let cfg = SimConfig::homogeneous(3, 4096, model.clone(), 0.01, 50.0, seed);
        let run = run_homogeneous(&cfg).unwrap();
        means.push(run.series.time_average(10.0));
        gof.push(equilibrium_gof(&run.final_state, 1.0, 3));
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let all_gof = gof.iter().all(|g| g.passed);
    let worst_ks = gof.iter().map(|g| g.statistic / g.threshold).fold(0.0, f64::max);
    outcome(
        (mean - target).abs() <= 0.02 && all_gof,
        format!("mean order {mean:.4} vs c1(1) = {target:.4}; KS statistic / threshold max {worst_ks:.2} over 8 seeds"),
    )
}

fn criterion_11() -> Outcome {
    let model = ModelParams::new(
        2,
        DensityLaw::Affine {
            intercept: 1.0,
            slope: 0.5,
        },
        DensityLaw::Constant { value: 1.0 },
    );
    let table = CoefficientTable::build(&model, 0.4, 2.5, &CoefficientOptions::default()).unwrap();
    let m = 2048;
    let mut state = MacroState1D::from_fn(m, 1.0, |z| {
        (1.0 + 0.2 * (2.0 * PI * z).sin(), 0.7 + 0.2 * (4.0 * PI * z).cos())
    })
    .unwrap();
    let m0 = state.mass();
    let mut steps = 0;
    let mut drift: f64 = 0.0;
    while steps < 10_000 {
        let cfg = MacroConfig {
            t_end: state.time + 0.5,
            snapshot_every: usize::MAX,
            ..MacroConfig::default()
        };
        let run = solve_1d_with_table(&table, state, &cfg).unwrap();
        steps += run.steps;
        drift = run.mass.iter().map(|x| (x - m0).abs() / m0).fold(drift, f64::max);
        state = run.final_state;
    }
    let mut speeds = Vec::new();
    let mut speed_ok = true;
    for w in [Wave::Minus, Wave::Plus] {
        let s = measure_wave_speed(&table, 1.0, w, m, 1e-3, 0.5).unwrap();
        let rel = (s.measured - s.predicted).abs() / s.predicted.abs();
        speed_ok &= rel < 0.05;
        speeds.push(format!("{w:?} {:.5} vs {:.5}", s.measured, s.predicted));
    }
    outcome(
        drift < 1e-12 && speed_ok,
        format!("mass drift {drift:.1e} over {steps} steps; speeds {}", speeds.join(", ")),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome, Duration); 11] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(5)),
        (3, criterion_3, Duration::from_secs(10)),
        (4, criterion_4, Duration::MAX),
        (5, criterion_5, Duration::from_secs(30)),
        (6, criterion_6, Duration::from_secs(10)),
        (7, criterion_7, Duration::from_secs(30)),
        (8, criterion_8, Duration::from_secs(1)),
        (9, criterion_9, Duration::from_secs(60)),
        (10, criterion_10, Duration::from_secs(300)),
        (11, criterion_11, Duration::from_secs(120)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (id, f, budget) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let dt = t0.elapsed();
        let in_time = dt <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed.push(id);
        }
        println!(
            "criterion {id:2}: {} [{:.2} s{}] {}",
            if pass { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            if in_time { "" } else { ", over budget" },
            o.detail
        );
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
