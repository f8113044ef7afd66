use vicsek_core::asymptotics::poly::qi;
use vicsek_core::asymptotics::{compute_g, compute_h, op_d, op_l, series_c1, PolyBasis1mX, Regime};
use vicsek_core::gci::h_from_g;
use vicsek_core::{c1, solve_gci, QuadSpec};

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

#[test]
fn h_recursion_closes_exactly() {
    for n in 2..=4 {
        let h = compute_h(7, n);
        assert_eq!(op_l(&h[0], n), PolyBasis1mX::constant(qi(1)));
        for p in 0..=6 {
            assert!((&op_l(&h[p + 1], n) + &op_d(&h[p])).is_zero(), "n={n} p={p}");
        }
    }
}

#[test]
fn h_parity() {
    for n in 2..=4 {
        for (p, hp) in compute_h(7, n).iter().enumerate() {
            let want = if p % 2 == 0 { hp.clone() } else { -hp };
            assert_eq!(hp.reflect(), want, "n={n} p={p}");
        }
    }
}

#[test]
fn g_defect_has_claimed_order() {
    for n in 2..=4 {
        for big_n in 1..=6 {
            let g = compute_g(big_n, n);
            let base = &op_d(&g[0]) - &PolyBasis1mX::constant(qi(1));
            for k in 0..big_n {
                assert!(base.coeff(k) == qi(0), "n={n} N={big_n}");
            }
            for p in 1..big_n {
                let defect = &op_d(&g[p]) + &op_l(&g[p - 1], n);
                for k in 0..big_n - p {
                    assert!(defect.coeff(k) == qi(0), "n={n} N={big_n} p={p} k={k}");
                }
            }
        }
    }
}

#[test]
fn c1_series_remainder_constants_are_stable() {
    let q = QuadSpec::default();
    for n in [2usize, 3, 4] {
        let s = series_c1(n, Regime::KappaToZero).unwrap();
        let c: Vec<f64> = [0.02, 0.05, 0.1]
            .iter()
            .map(|&k| (c1(k, n, &q).unwrap() - s.eval(k)).abs() / k.powi(5))
            .collect();
        assert!(spread(&c) < 1.1, "n={n} small: {c:?}");
    }
    for n in [2usize, 4] {
        let s = series_c1(n, Regime::KappaToInfinity).unwrap();
        let c: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&k: &f64| (c1(k, n, &q).unwrap() - s.eval(k)).abs() * k.powi(3))
            .collect();
        assert!(spread(&c) < 1.1, "n={n} large: {c:?}");
    }
}

fn sup_on(mus: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    mus.iter().map(|&m| f(m).abs()).fold(0.0, f64::max)
}

#[test]
fn h_partial_sums_small_concentration() {
    let mus: Vec<f64> = (-18..=18).map(|i| i as f64 / 20.0).collect();
    for n in 2..=4 {
        let h = compute_h(1, n);
        let c: Vec<f64> = [0.05, 0.025]
            .iter()
            .map(|&k| {
                let num = h_from_g(&solve_gci(k, n, 4096).unwrap());
                sup_on(&mus, |m| num.eval(m).unwrap() - (h[0].eval(m) + k * h[1].eval(m))) / (k * k)
            })
            .collect();
        assert!(spread(&c) < 1.2, "n={n}: {c:?}");
    }
}

/// Weighted RMS `⟨R² sin²θ⟩^{1/2}` under the equilibrium, on the solver grid.
fn weighted_rms(kappa: f64, n: usize, r: impl Fn(f64, f64) -> f64) -> f64 {
    let sol = solve_gci(kappa, n, 16384).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (t, g) in sol.theta().iter().zip(sol.g()) {
        let (s, c) = t.sin_cos();
        let w = (kappa * (c - 1.0)).exp() * s.powi(n as i32 - 2);
        num += w * (r(g / s, c) * s).powi(2);
        den += w;
    }
    (num / den).sqrt()
}

#[test]
fn h_partial_sums_large_concentration() {
    for n in 2..=4 {
        let g = compute_g(2, n);
        let ks = [50.0, 100.0, 200.0];
        let rms: Vec<f64> = ks
            .iter()
            .map(|&k: &f64| weighted_rms(k, n, |h, mu| h - (g[0].eval(mu) / k + g[1].eval(mu) / (k * k))))
            .collect();
        // at least κ⁻³ decay; the sin θ factor in the norm adds about half an order
        let slope = (rms[2] / rms[0]).ln() / 4f64.ln();
        assert!(slope < -2.9, "n={n}: {rms:?}, slope {slope}");
    }
}
