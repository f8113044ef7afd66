use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vicsek_core::asymptotics::{
    compute_g, compute_h, series_c1, series_c1_tilde, series_macro, series_sin2_tilde, AsymptoticSeries,
    PolyBasis1mX, Regime,
};
use vicsek_core::coefficients::coefficient_set_with;
use vicsek_core::hyperbolicity::{default_tol_sign, region_map_with, HyperbolicityMap};
use vicsek_core::macro_solver::{solve_1d, MacroConfig, MacroState1D};
use vicsek_core::particle_sim::{
    equilibrium_gof, run_homogeneous, run_spatial, write_frame, GofResult, ParticleState, SimConfig,
};
use vicsek_core::{
    c1, gci_2d_closed, kernel_moments, normalize_density_kernel, solve_gci, CoefficientSet, Error, KernelSpec,
    ModelParams,
};

use crate::config::{CommandKind, RunConfig};
use crate::output::{float, write_json, Table};

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Numeric(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Numeric(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.into())
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

type Outcome = Result<Report, Failure>;

pub fn run(kind: CommandKind, cfg: &RunConfig, dir: &Path) -> Outcome {
    match kind {
        CommandKind::Coeffs => coeffs(cfg, dir),
        CommandKind::Gci => gci(cfg, dir),
        CommandKind::Asymptotics => asymptotics(cfg, dir),
        CommandKind::HyperbolicityMap => hyperbolicity_map(cfg, dir),
        CommandKind::KernelAlpha => kernel_alpha(cfg, dir),
        CommandKind::SimulateParticles => simulate_particles(cfg, dir),
        CommandKind::SimulateMacro => simulate_macro(cfg, dir),
    }
}

#[derive(Serialize)]
struct CoeffRow {
    rho: f64,
    coefficients: Option<CoefficientSet>,
    error: Option<String>,
}

fn coeffs(cfg: &RunConfig, dir: &Path) -> Outcome {
    let model = cfg.model()?;
    cfg.coeffs.rho.validate("coeffs.rho")?;
    let opts = cfg.tolerances.coefficient_options();
    let rows: Vec<CoeffRow> = cfg
        .coeffs
        .rho
        .points()
        .into_par_iter()
        .map(|rho| match coefficient_set_with(&model, rho, &opts) {
            Ok(cs) => CoeffRow {
                rho,
                coefficients: Some(cs),
                error: None,
            },
            Err(e) => CoeffRow {
                rho,
                coefficients: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut report = Report::default();
    let mut t = Table::create(
        dir,
        "coeffs.csv",
        &[
            ("rho", "1"),
            ("kappa", "1"),
            ("c1", "speed"),
            ("c1_tilde", "1"),
            ("c2", "speed"),
            ("c3", "speed"),
            ("lambda", "speed"),
            ("error", "text"),
        ],
    )?;
    for r in &rows {
        match (&r.coefficients, &r.error) {
            (Some(c), _) => t.row(
                [c.rho, c.kappa, c.c1, c.c1_tilde, c.c2, c.c3, c.lambda]
                    .map(float)
                    .into_iter()
                    .chain([String::new()]),
            )?,
            (None, e) => {
                let msg = e.clone().unwrap_or_default();
                report.warnings.push(format!("rho = {}: {msg}", r.rho));
                t.row([float(r.rho)].into_iter().chain(std::iter::repeat_n(float(f64::NAN), 6)).chain([msg]))?
            }
        }
    }
    report.artifacts.push(t.finish()?);
    report.artifacts.push(write_json(dir, "coeffs.json", &rows)?);
    Ok(report)
}

fn gci(cfg: &RunConfig, dir: &Path) -> Outcome {
    let g = &cfg.gci;
    let dim = g.dim.unwrap_or(cfg.model.dim);
    let grid = g.grid.unwrap_or(cfg.tolerances.grid);
    let sol = solve_gci(g.kappa, dim, grid)?;
    let closed = dim == 2 && g.kappa > 0.0;
    let mut cols = vec![("theta", "rad"), ("g", "1")];
    if closed {
        cols.push(("g_closed", "1"));
    }
    let mut t = Table::create(dir, "gci.csv", &cols)?;
    for (th, v) in sol.theta().iter().zip(sol.g()) {
        let mut row = vec![float(*th), float(*v)];
        if closed {
            row.push(float(gci_2d_closed(g.kappa, *th)?));
        }
        t.row(row)?;
    }
    Ok(Report {
        artifacts: vec![t.finish()?],
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct RegimePair {
    kappa_to_zero: AsymptoticSeries,
    kappa_to_infinity: AsymptoticSeries,
}

#[derive(Serialize)]
struct MacroSeries {
    rho: f64,
    regime: Regime,
    c2: AsymptoticSeries,
    lambda: AsymptoticSeries,
}

#[derive(Serialize)]
struct AsymptoticsReport {
    dim: usize,
    h: Vec<PolyBasis1mX>,
    big_n: usize,
    g: Vec<PolyBasis1mX>,
    c1: RegimePair,
    c1_tilde: RegimePair,
    sin2_tilde: RegimePair,
    macro_series: Vec<MacroSeries>,
}

fn pair(f: fn(usize, Regime) -> vicsek_core::Result<AsymptoticSeries>, n: usize) -> Result<RegimePair, Error> {
    Ok(RegimePair {
        kappa_to_zero: f(n, Regime::KappaToZero)?,
        kappa_to_infinity: f(n, Regime::KappaToInfinity)?,
    })
}

fn asymptotics(cfg: &RunConfig, dir: &Path) -> Outcome {
    let model = cfg.model()?;
    let a = &cfg.asymptotics;
    let n = model.dim;
    if a.big_n == 0 {
        return Err(Error::Config("asymptotics.big_n must be at least 1".into()).into());
    }
    let mut macro_series = Vec::new();
    for &rho in &a.rho {
        for regime in [Regime::KappaToZero, Regime::KappaToInfinity] {
            let (c2, lambda) = series_macro(&model, rho, regime)?;
            macro_series.push(MacroSeries {
                rho,
                regime,
                c2,
                lambda,
            });
        }
    }
    let rep = AsymptoticsReport {
        dim: n,
        h: compute_h(a.p_max, n),
        big_n: a.big_n,
        g: compute_g(a.big_n, n),
        c1: pair(series_c1, n)?,
        c1_tilde: pair(series_c1_tilde, n)?,
        sin2_tilde: pair(series_sin2_tilde, n)?,
        macro_series,
    };
    Ok(Report {
        artifacts: vec![write_json(dir, "asymptotics.json", &rep)?],
        warnings: Vec::new(),
    })
}

fn build_map(cfg: &RunConfig, model: &ModelParams) -> Result<HyperbolicityMap, Error> {
    let m = &cfg.hyperbolicity_map;
    let opts = cfg.tolerances.coefficient_options();
    let first = region_map_with(model, m.rho, m.theta, cfg.tolerances.tol_sign.unwrap_or(1e-10), &opts)?;
    if cfg.tolerances.tol_sign.is_some() {
        return Ok(first);
    }
    let tol = default_tol_sign(first.lambda_trace().into_iter().map(|(_, l)| l));
    if tol == first.tol_sign {
        Ok(first)
    } else {
        region_map_with(model, m.rho, m.theta, tol, &opts)
    }
}

fn verdict_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|s| s.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn hyperbolicity_map(cfg: &RunConfig, dir: &Path) -> Outcome {
    let model = cfg.model()?;
    let map = build_map(cfg, &model)?;
    let mut report = Report::default();
    let mut t = Table::create(
        dir,
        "hyperbolicity_map.csv",
        &[
            ("rho", "1"),
            ("theta", "rad"),
            ("lambda", "speed"),
            ("c2", "speed"),
            ("c3", "speed"),
            ("gamma_minus_re", "speed"),
            ("gamma_minus_im", "speed"),
            ("gamma_plus_re", "speed"),
            ("gamma_plus_im", "speed"),
            ("full_verdict", "label"),
            ("reduced_verdict", "label"),
        ],
    )?;
    for row in &map.rows {
        if let Some(e) = &row.error {
            report.warnings.push(format!("rho = {}: {e}", row.rho));
            let nan = float(f64::NAN);
            t.row(
                [float(row.rho), nan.clone(), nan.clone(), nan.clone(), nan.clone()]
                    .into_iter()
                    .chain(std::iter::repeat_n(nan, 4))
                    .chain(["error".to_string(), "error".to_string()]),
            )?;
        }
        let Some(cs) = row.coefficients else { continue };
        for cell in &row.cells {
            let e = &cell.eigen;
            t.row(
                [
                    row.rho,
                    cell.theta,
                    cs.lambda,
                    cs.c2,
                    cs.c3,
                    e.gamma_minus.re,
                    e.gamma_minus.im,
                    e.gamma_plus.re,
                    e.gamma_plus.im,
                ]
                .map(float)
                .into_iter()
                .chain([verdict_name(&cell.verdict.full_system), verdict_name(&cell.verdict.reduced_1d)]),
            )?;
        }
    }
    report.artifacts.push(t.finish()?);
    report.artifacts.push(write_json(dir, "hyperbolicity_map.json", &map)?);
    Ok(report)
}

fn kernel_alpha(cfg: &RunConfig, dir: &Path) -> Outcome {
    let dim = cfg.kernel_alpha.dim.unwrap_or(cfg.model.dim);
    let quad = cfg.tolerances.quad();
    let mut kernels: Vec<(&str, KernelSpec)> = Vec::new();
    if let Some(k) = &cfg.kernel.orientation {
        kernels.push(("orientation", k.clone()));
    }
    if let Some(k) = &cfg.kernel.density {
        kernels.push(("density", normalize_density_kernel(k, dim)?));
    }
    if kernels.is_empty() {
        return Err(Error::Config("kernel-alpha needs kernel.orientation or kernel.density".into()).into());
    }
    let mut t = Table::create(
        dir,
        "kernel_alpha.csv",
        &[("kernel", "label"), ("dim", "1"), ("k0", "1"), ("k1", "length"), ("alpha", "length")],
    )?;
    for (name, k) in &kernels {
        let m = kernel_moments(k, dim, &quad)?;
        t.row([name.to_string(), dim.to_string(), float(m.k0), float(m.k1), float(m.alpha)])?;
    }
    Ok(Report {
        artifacts: vec![t.finish()?],
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct ParticleSummary {
    n_particles: usize,
    steps: usize,
    time_average: f64,
    burn_in: f64,
    /// `c₁(ν(1)/d(1))` for homogeneous runs.
    predicted_order: Option<f64>,
    goodness_of_fit: Option<GofResult>,
}

fn simulate_particles(cfg: &RunConfig, dir: &Path) -> Outcome {
    let model = cfg.model()?;
    let p = &cfg.simulate_particles;
    let mut sim = SimConfig::homogeneous(model.dim, p.n_particles, model.clone(), p.dt, p.t_end, cfg.seed);
    sim.box_l = p.box_l;
    sim.homogeneous = p.homogeneous;
    sim.record_every = p.record_every;
    sim.coarse_bins = p.coarse_bins;
    if let Some(k) = &cfg.kernel.orientation {
        sim.kernel_k = k.clone();
    }
    if let Some(k) = &cfg.kernel.density {
        sim.kernel_ktilde = normalize_density_kernel(k, model.dim)?;
    }
    sim.validate()?;
    let mut report = Report::default();
    let mut frames: Vec<ParticleState> = Vec::new();
    let (series, summary) = if p.homogeneous {
        let run = run_homogeneous(&sim)?;
        let pt = model.evaluate(1.0)?;
        let kappa = pt.nu / pt.d;
        let summary = ParticleSummary {
            n_particles: p.n_particles,
            steps: sim.steps(),
            time_average: run.series.time_average(p.burn_in),
            burn_in: p.burn_in,
            predicted_order: Some(c1(kappa, model.dim, &cfg.tolerances.quad())?),
            goodness_of_fit: (p.n_particles > 0).then(|| equilibrium_gof(&run.final_state, kappa, model.dim)),
        };
        frames.push(run.final_state);
        (run.series, summary)
    } else {
        let run = run_spatial(&sim)?;
        for (i, s) in run.snapshots.iter().enumerate() {
            frames.push(ParticleState {
                positions: s.positions.clone(),
                orientations: s.orientations.clone(),
                time: s.time,
                step: i * p.record_every,
            });
        }
        let summary = ParticleSummary {
            n_particles: p.n_particles,
            steps: sim.steps(),
            time_average: run.series.time_average(p.burn_in),
            burn_in: p.burn_in,
            predicted_order: None,
            goodness_of_fit: None,
        };
        (run.series, summary)
    };
    if let Some(g) = &summary.goodness_of_fit {
        if !g.passed {
            report.warnings.push(format!(
                "equilibrium goodness of fit failed: statistic {} above threshold {}",
                g.statistic, g.threshold
            ));
        }
    }
    let mut t = Table::create(dir, "order.csv", &[("t", "time"), ("R", "1")])?;
    for (time, r) in series.times.iter().zip(&series.values) {
        t.row([float(*time), float(*r)])?;
    }
    report.artifacts.push(t.finish()?);
    report.artifacts.push(write_json(dir, "particles_summary.json", &summary)?);
    if p.frame_log {
        let path = dir.join("frames.bin");
        let mut w = BufWriter::new(File::create(&path)?);
        for f in &frames {
            write_frame(&mut w, f, model.dim)?;
        }
        report.artifacts.push(path);
    }
    Ok(report)
}

#[derive(Serialize)]
struct MacroSummary {
    steps: usize,
    time: f64,
    mass_drift: f64,
    tv_growth: f64,
    flagged_steps: usize,
    halted: Option<vicsek_core::macro_solver::HaltDiagnostic>,
}

fn simulate_macro(cfg: &RunConfig, dir: &Path) -> Outcome {
    let model = cfg.model()?;
    let m = &cfg.simulate_macro;
    let ini = &m.initial;
    let k = 2.0 * PI * ini.wavenumber as f64 / m.length;
    let init = MacroState1D::from_fn(m.cells, m.length, |z| {
        (
            ini.rho0 + ini.rho_amplitude * (k * z).sin(),
            ini.theta0 + ini.theta_amplitude * (k * z).cos(),
        )
    })?;
    let mc = MacroConfig {
        t_end: m.t_end,
        cfl: m.cfl,
        policy: m.policy,
        snapshot_every: m.snapshot_every,
        tol_sign: cfg.tolerances.tol_sign.unwrap_or(1e-10),
        ..MacroConfig::default()
    };
    let run = solve_1d(&model, init, &mc, m.table_margin, &cfg.tolerances.coefficient_options())?;
    let mut report = Report::default();
    for snap in &run.snapshots {
        let s = &snap.state;
        let mut t = Table::create(
            dir,
            &format!("macro_{:07}.csv", snap.step),
            &[("z", "length"), ("rho", "1"), ("theta", "rad"), ("lambda", "speed"), ("verdict", "label")],
        )?;
        for i in 0..s.len() {
            t.row([
                float((i as f64 + 0.5) * s.dz),
                float(s.rho[i]),
                float(s.theta(i)),
                float(snap.lambda[i]),
                verdict_name(&snap.verdict[i]),
            ])?;
        }
        report.artifacts.push(t.finish()?);
    }
    let mut t = Table::create(
        dir,
        "macro_diagnostics.csv",
        &[("step", "1"), ("mass", "length"), ("total_variation", "1")],
    )?;
    for (i, (mass, tv)) in run.mass.iter().zip(&run.total_variation).enumerate() {
        t.row([i.to_string(), float(*mass), float(*tv)])?;
    }
    report.artifacts.push(t.finish()?);
    if let Some(h) = &run.halted {
        report.warnings.push(format!(
            "halted at step {} (t = {}): cell {} left the hyperbolic region (rho = {}, theta = {}, lambda = {})",
            h.step, h.time, h.cell, h.rho, h.theta, h.lambda
        ));
    } else if !run.flagged.is_empty() {
        report
            .warnings
            .push(format!("{} steps had non-hyperbolic cells", run.flagged.len()));
    }
    let summary = MacroSummary {
        steps: run.steps,
        time: run.final_state.time,
        mass_drift: run.mass_drift(),
        tv_growth: run.tv_growth(),
        flagged_steps: run.flagged.len(),
        halted: run.halted.clone(),
    };
    report.artifacts.push(write_json(dir, "macro_summary.json", &summary)?);
    Ok(report)
}
