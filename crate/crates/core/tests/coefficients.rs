use proptest::prelude::*;
use vicsek_core::coefficients::{coefficient_set_with, CoefficientOptions};
use vicsek_core::gci::TurningProfile;
use vicsek_core::{coefficient_set, turning_coefficients_2d, vmf_average, DensityLaw, ModelParams, QuadSpec};

fn collinear(x: [f64; 3], y: [f64; 3]) -> f64 {
    let s1 = (y[1] - y[0]) / (x[1] - x[0]);
    let s2 = (y[2] - y[1]) / (x[2] - x[1]);
    (s1 - s2).abs()
}

#[test]
fn c2_is_affine_in_alpha() {
    let alphas = [-0.5, 0.0, 0.7];
    let base = ModelParams::new(3, DensityLaw::Power { coef: 2.0, exponent: 1.0 }, DensityLaw::Constant { value: 1.0 });
    let c2 = alphas.map(|a| coefficient_set(&base.clone().with_alpha(a, 0.0), 1.3).unwrap().c2);
    assert!(collinear(alphas, c2) < 1e-12, "{c2:?}");
}

#[test]
fn lambda_is_affine_in_alpha_tilde() {
    let at = [-0.4, 0.1, 0.9];
    let base = ModelParams::new(
        2,
        DensityLaw::Constant { value: 1.5 },
        DensityLaw::Affine {
            intercept: 1.0,
            slope: 0.3,
        },
    );
    let l = at.map(|a| coefficient_set(&base.clone().with_alpha(0.0, a), 0.8).unwrap().lambda);
    assert!(collinear(at, l) < 1e-12, "{l:?}");
    assert!((l[2] - l[0]).abs() > 1e-3);
}

#[test]
fn c3_matches_moment_identity_pathway() {
    // κ = ρ, κ̇ = 1: c₃ - c₁ = ρ(⟨cos²⟩ - c₁²) with ⟨cos²⟩ = 1 - (n-1)c₁/κ
    for n in [2usize, 3, 4] {
        let m = ModelParams::new(n, DensityLaw::Power { coef: 1.0, exponent: 1.0 }, DensityLaw::Constant { value: 1.0 });
        for rho in [0.3, 2.0, 9.0] {
            let cs = coefficient_set(&m, rho).unwrap();
            let cos2 = 1.0 - (n as f64 - 1.0) * cs.c1 / rho;
            assert!((cs.c3 - cs.c1 - rho * (cos2 - cs.c1 * cs.c1)).abs() < 1e-10);
            let direct = vmf_average(&|c: f64| c * c, rho, n, &QuadSpec::default()).unwrap();
            assert!((direct - cos2).abs() < 1e-10);
        }
    }
}

#[test]
fn turning_path_with_unit_rate_matches_plain_path() {
    let q = QuadSpec::default();
    for d in [0.1, 0.5, 2.0] {
        for alpha in [0.0, 0.4] {
            let t = turning_coefficients_2d(&TurningProfile::constant(1.0, d), alpha, &q).unwrap();
            let m = ModelParams::constant(2, 1.0, d).with_alpha(alpha, 0.0);
            let cs = coefficient_set(&m, 1.0).unwrap();
            assert!((t.c1 - cs.c1).abs() < 1e-8);
            assert!((t.c2 - cs.c2).abs() < 1e-8, "d={d} alpha={alpha}: {} vs {}", t.c2, cs.c2);
            assert!((t.lambda - cs.lambda).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_laws_reduce(nu in 0.2f64..5.0, d in 0.2f64..5.0, r1 in 0.1f64..10.0, r2 in 0.1f64..10.0, n in 2usize..=4) {
        let m = ModelParams::constant(n, nu, d).with_alpha(0.2, 0.3);
        let opts = CoefficientOptions { grid: 512, ..CoefficientOptions::default() };
        let a = coefficient_set_with(&m, r1, &opts).unwrap();
        let b = coefficient_set_with(&m, r2, &opts).unwrap();
        prop_assert!((a.lambda * a.kappa - 1.0).abs() < 1e-10);
        for (x, y) in [(a.c1, b.c1), (a.c2, b.c2), (a.c3, b.c3), (a.lambda, b.lambda), (a.c1_tilde, b.c1_tilde)] {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!(a.lambda > 0.0);
    }
}
