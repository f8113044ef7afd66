//! First-order finite-volume solver for the one-dimensional reduction of the
//! macroscopic system in the variables `ρ` and `u = cos θ`:
//!
//! ```text
//! ∂t ρ + ∂z(ρ c₁(ρ) u) = 0
//! ∂t u + c₂(ρ) u ∂z u + (λ(ρ)/ρ)(1 - u²) ∂z ρ = 0
//! ```
//!
//! The density equation uses Rusanov fluxes; the orientation equation is
//! non-conservative, discretized centrally with the same local
//! Lax–Friedrichs dissipation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficient_set_with, CoefficientOptions, CoefficientSet};
use crate::error::{Error, Result};
use crate::hyperbolicity::{classify, eigenvalues, ReducedVerdict};
use crate::interp::Pchip;
use crate::model::ModelParams;
use crate::quad::neumaier_sum;

pub const TABLE_NODES: usize = 512;

/// Coefficients tabulated on log-spaced densities, interpolated with PCHIP in `ln ρ`.
pub struct CoefficientTable {
    lo: f64,
    hi: f64,
    fields: [Pchip; 8],
}

impl CoefficientTable {
    pub fn build(model: &ModelParams, rho_min: f64, rho_max: f64, opts: &CoefficientOptions) -> Result<Self> {
        if !(rho_min > 0.0) || !(rho_max > rho_min) || !rho_max.is_finite() {
            return Err(Error::Domain(format!(
                "table range needs 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        let (a, b) = (rho_min.ln(), rho_max.ln());
        let x: Vec<f64> = (0..TABLE_NODES)
            .map(|i| a + (b - a) * i as f64 / (TABLE_NODES - 1) as f64)
            .collect();
        let sets = x
            .par_iter()
            .map(|&l| coefficient_set_with(model, l.exp(), opts))
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&CoefficientSet) -> f64| Pchip::new(x.clone(), sets.iter().map(f).collect());
        Ok(CoefficientTable {
            lo: rho_min,
            hi: rho_max,
            fields: [
                col(|c| c.kappa),
                col(|c| c.kappa_dot),
                col(|c| c.c1),
                col(|c| c.c1_tilde),
                col(|c| c.cos2_tilde),
                col(|c| c.c2),
                col(|c| c.c3),
                col(|c| c.lambda),
            ],
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn lookup(&self, rho: f64) -> Result<CoefficientSet> {
        // small slack for the rounding of exp(ln ρ) at the end nodes
        if !(rho >= self.lo * (1.0 - 1e-12) && rho <= self.hi * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "density {rho} outside the coefficient table [{}, {}]",
                self.lo, self.hi
            )));
        }
        let l = rho.ln();
        let f = |i: usize| self.fields[i].eval(l);
        Ok(CoefficientSet {
            rho,
            kappa: f(0),
            kappa_dot: f(1),
            c1: f(2),
            c1_tilde: f(3),
            cos2_tilde: f(4),
            c2: f(5),
            c3: f(6),
            lambda: f(7),
        })
    }
}

/// Periodic 1D state: density, `cos θ`, and the sign of `sin θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroState1D {
    pub rho: Vec<f64>,
    pub cos_theta: Vec<f64>,
    /// `+1` or `-1`.
    pub sign: Vec<f64>,
    pub dz: f64,
    pub time: f64,
}

impl MacroState1D {
    pub fn new(rho: Vec<f64>, theta: &[f64], dz: f64) -> Result<Self> {
        if rho.len() != theta.len() {
            return Err(Error::Domain("rho and theta lengths differ".into()));
        }
        let s = MacroState1D {
            cos_theta: theta.iter().map(|t| t.cos()).collect(),
            sign: theta.iter().map(|t| if t.sin() < 0.0 { -1.0 } else { 1.0 }).collect(),
            rho,
            dz,
            time: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Cell-centre samples of `f(z) -> (ρ, θ)` on `[0, length)`.
    pub fn from_fn(cells: usize, length: f64, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let dz = length / cells as f64;
        let (rho, theta): (Vec<f64>, Vec<f64>) = (0..cells).map(|i| f((i as f64 + 0.5) * dz)).unzip();
        Self::new(rho, &theta, dz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.len() < 3 {
            return Err(Error::Domain("at least 3 cells required".into()));
        }
        if !(self.dz > 0.0) {
            return Err(Error::Domain(format!("dz must be positive, got {}", self.dz)));
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::Domain(format!("density must be positive, found {r}")));
        }
        if self.cos_theta.iter().any(|u| !(u.abs() <= 1.0)) {
            return Err(Error::Domain("cos theta outside [-1, 1]".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.sign[i] * self.cos_theta[i].clamp(-1.0, 1.0).acos()
    }

    pub fn mass(&self) -> f64 {
        neumaier_sum(self.rho.iter().map(|r| r * self.dz))
    }

    /// Total variation of `ρ` plus that of `cos θ`.
    pub fn total_variation(&self) -> f64 {
        let m = self.len();
        (0..m)
            .map(|i| {
                let j = (i + 1) % m;
                (self.rho[j] - self.rho[i]).abs() + (self.cos_theta[j] - self.cos_theta[i]).abs()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonHyperbolicPolicy {
    Halt,
    ContinueAndFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    pub t_end: f64,
    pub cfl: f64,
    pub policy: NonHyperbolicPolicy,
    /// Steps between snapshots; the initial and final states are always kept.
    pub snapshot_every: usize,
    pub tol_sign: f64,
    pub max_steps: usize,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            t_end: 1.0,
            cfl: 0.5,
            policy: NonHyperbolicPolicy::Halt,
            snapshot_every: 100,
            tol_sign: 1e-10,
            max_steps: 10_000_000,
        }
    }
}

impl MacroConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0) || self.snapshot_every == 0 || !(self.tol_sign > 0.0) {
            return Err(Error::Config("t_end >= 0, snapshot_every > 0, tol_sign > 0 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroSnapshot {
    pub step: usize,
    pub time: f64,
    pub state: MacroState1D,
    pub lambda: Vec<f64>,
    pub verdict: Vec<ReducedVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaltDiagnostic {
    pub step: usize,
    pub time: f64,
    pub cell: usize,
    pub rho: f64,
    pub theta: f64,
    pub lambda: f64,
    pub verdict: ReducedVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroRun {
    pub steps: usize,
    pub final_state: MacroState1D,
    pub snapshots: Vec<MacroSnapshot>,
    /// Mass after every step, starting with the initial mass.
    pub mass: Vec<f64>,
    /// Total variation after every step, starting with the initial value.
    pub total_variation: Vec<f64>,
    /// `(step, number of non-hyperbolic cells)` whenever non-zero.
    pub flagged: Vec<(usize, usize)>,
    pub halted: Option<HaltDiagnostic>,
}

impl MacroRun {
    /// `max_t |M(t) - M(0)| / M(0)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }

    /// `max_t TV(t) / TV(0)`; growth above 1 signals steepening.
    pub fn tv_growth(&self) -> f64 {
        let t0 = self.total_variation[0];
        if t0 == 0.0 {
            return if self.total_variation.iter().all(|t| *t == 0.0) { 1.0 } else { f64::INFINITY };
        }
        self.total_variation.iter().fold(0.0f64, |m, t| m.max(t / t0))
    }
}

struct CellData {
    cs: CoefficientSet,
    speed: f64,
    verdict: ReducedVerdict,
}

fn cell_data(state: &MacroState1D, table: &CoefficientTable, tol_sign: f64) -> Result<Vec<CellData>> {
    (0..state.len())
        .into_par_iter()
        .map(|i| {
            let cs = table.lookup(state.rho[i])?;
            let th = state.theta(i);
            let e = eigenvalues(&cs, th);
            Ok(CellData {
                cs,
                speed: e.spectral_radius(),
                verdict: classify(&cs, th, tol_sign).reduced_1d,
            })
        })
        .collect()
}

fn advance(state: &MacroState1D, data: &[CellData], dt: f64) -> MacroState1D {
    let m = state.len();
    let dz = state.dz;
    let rho = &state.rho;
    let u = &state.cos_theta;
    let flux: Vec<f64> = (0..m).map(|i| rho[i] * data[i].cs.c1 * u[i]).collect();
    // interface i+1/2 between cells i and i+1
    let a: Vec<f64> = (0..m).map(|i| data[i].speed.max(data[(i + 1) % m].speed)).collect();
    let num: Vec<f64> = (0..m)
        .map(|i| {
            let j = (i + 1) % m;
            0.5 * (flux[i] + flux[j]) - 0.5 * a[i] * (rho[j] - rho[i])
        })
        .collect();
    let (new_rho, new_u): (Vec<f64>, Vec<f64>) = (0..m)
        .into_par_iter()
        .map(|i| {
            let l = (i + m - 1) % m;
            let r = (i + 1) % m;
            let nr = rho[i] - dt / dz * (num[i] - num[l]);
            let cs = &data[i].cs;
            let transport = cs.c2 * u[i] * (u[r] - u[l]) / (2.0 * dz);
            let source = cs.lambda / rho[i] * (1.0 - u[i] * u[i]) * (rho[r] - rho[l]) / (2.0 * dz);
            let diss = (a[i] * (u[r] - u[i]) - a[l] * (u[i] - u[l])) / (2.0 * dz);
            let nu = u[i] - dt * (transport + source) + dt * diss;
            (nr, nu.clamp(-1.0, 1.0))
        })
        .unzip();
    MacroState1D {
        rho: new_rho,
        cos_theta: new_u,
        sign: state.sign.clone(),
        dz,
        time: state.time + dt,
    }
}

fn snapshot(step: usize, state: &MacroState1D, data: &[CellData]) -> MacroSnapshot {
    MacroSnapshot {
        step,
        time: state.time,
        state: state.clone(),
        lambda: data.iter().map(|d| d.cs.lambda).collect(),
        verdict: data.iter().map(|d| d.verdict).collect(),
    }
}

/// Builds a table spanning `[min ρ / margin, max ρ · margin]` of the initial data.
pub fn solve_1d(
    model: &ModelParams,
    init: MacroState1D,
    cfg: &MacroConfig,
    margin: f64,
    opts: &CoefficientOptions,
) -> Result<MacroRun> {
    init.validate()?;
    if !(margin > 1.0) {
        return Err(Error::Config(format!("table margin must exceed 1, got {margin}")));
    }
    let lo = init.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = init.rho.iter().cloned().fold(0.0, f64::max);
    let table = CoefficientTable::build(model, lo / margin, hi * margin, opts)?;
    solve_1d_with_table(&table, init, cfg)
}

pub fn solve_1d_with_table(table: &CoefficientTable, init: MacroState1D, cfg: &MacroConfig) -> Result<MacroRun> {
    cfg.validate()?;
    init.validate()?;
    let mut state = init;
    let mut run = MacroRun {
        steps: 0,
        final_state: state.clone(),
        snapshots: Vec::new(),
        mass: vec![state.mass()],
        total_variation: vec![state.total_variation()],
        flagged: Vec::new(),
        halted: None,
    };
    let mut step = 0;
    loop {
        let data = cell_data(&state, table, cfg.tol_sign)?;
        if step == 0 {
            run.snapshots.push(snapshot(0, &state, &data));
        }
        let bad: Vec<usize> = (0..data.len())
            .filter(|&i| !data[i].verdict.is_hyperbolic())
            .collect();
        if let Some(&cell) = bad.first() {
            run.flagged.push((step, bad.len()));
            if cfg.policy == NonHyperbolicPolicy::Halt {
                run.halted = Some(HaltDiagnostic {
                    step,
                    time: state.time,
                    cell,
                    rho: state.rho[cell],
                    theta: state.theta(cell),
                    lambda: data[cell].cs.lambda,
                    verdict: data[cell].verdict,
                });
                if run.snapshots.last().map(|s| s.step) != Some(step) {
                    run.snapshots.push(snapshot(step, &state, &data));
                }
                break;
            }
        }
        let remaining = cfg.t_end - state.time;
        if remaining <= 1e-14 * cfg.t_end.max(1.0) {
            if run.snapshots.last().map(|s| s.step) != Some(step) {
                run.snapshots.push(snapshot(step, &state, &data));
            }
            break;
        }
        if step >= cfg.max_steps {
            return Err(Error::Numeric(format!("step budget {} exhausted", cfg.max_steps)));
        }
        let amax = data.iter().map(|d| d.speed).fold(0.0, f64::max);
        let dt_cfl = if amax > 0.0 { cfg.cfl * state.dz / amax } else { remaining };
        let dt = dt_cfl.min(remaining);
        let mut next = advance(&state, &data, dt);
        if next.rho.iter().any(|r| *r <= 0.0) {
            next = advance(&state, &data, 0.5 * dt);
            if next.rho.iter().any(|r| *r <= 0.0) {
                return Err(Error::Positivity { step });
            }
        }
        if next.rho.iter().chain(&next.cos_theta).any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        state = next;
        step += 1;
        run.mass.push(state.mass());
        run.total_variation.push(state.total_variation());
        if step % cfg.snapshot_every == 0 {
            let data = cell_data(&state, table, cfg.tol_sign)?;
            run.snapshots.push(snapshot(step, &state, &data));
        }
    }
    run.steps = step;
    run.final_state = state;
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wave {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveSpeed {
    pub measured: f64,
    /// `γ±(ρ₀, 0)`.
    pub predicted: f64,
    /// `γ±` at the actual base state.
    pub predicted_at_base: f64,
}

/// Linearization of the system at `(ρ, u)`: `[[c₃u, ρc₁], [(λ/ρ)(1-u²), c₂u]]`.
fn jacobian(cs: &CoefficientSet, u: f64) -> [[f64; 2]; 2] {
    [
        [cs.c3 * u, cs.rho * cs.c1],
        [cs.lambda / cs.rho * (1.0 - u * u), cs.c2 * u],
    ]
}

fn real_eigs(a: &[[f64; 2]; 2]) -> Option<(f64, f64)> {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some((tr / 2.0 - r, tr / 2.0 + r))
}

/// Speed of a small sinusoidal wave of one characteristic family around
/// `(rho0, θ ≈ 0)`, from the drift of the first Fourier phase of the
/// characteristic variable on `m` cells of a unit periodic domain.
///
/// `θ = 0` sits on the boundary `u = 1`, so the base state uses
/// `u₀ = 1 - 2·amplitude·|r_u|` whenever the eigenvector moves `u`.
pub fn measure_wave_speed(
    table: &CoefficientTable,
    rho0: f64,
    which: Wave,
    m: usize,
    amplitude: f64,
    cfl: f64,
) -> Result<WaveSpeed> {
    let cs = table.lookup(rho0)?;
    let e0 = eigenvalues(&cs, 0.0);
    let predicted = match which {
        Wave::Minus => e0.gamma_minus.re,
        Wave::Plus => e0.gamma_plus.re,
    };
    let right = |u: f64| -> Result<(f64, [f64; 2], [f64; 2])> {
        let a = jacobian(&cs, u);
        let (gm, gp) = real_eigs(&a).ok_or_else(|| Error::Numeric("complex linearization".into()))?;
        let g = if which == Wave::Minus { gm } else { gp };
        // (A - γ) r = 0 from the first row; l (A - γ) = 0 from the second column
        let r = [a[0][1], g - a[0][0]];
        let l = [g - a[1][1], a[0][1]];
        Ok((g, r, l))
    };
    let (_, r1, _) = right(1.0)?;
    let scale = r1[0].abs().max(r1[1].abs());
    let r1 = [r1[0] / scale, r1[1] / scale];
    let u0 = if r1[1].abs() > 1e-14 { 1.0 - 2.0 * amplitude * r1[1].abs() } else { 1.0 };
    let (g_base, r, l) = right(u0)?;
    let scale = r[0].abs().max(r[1].abs());
    let r = [r[0] / scale, r[1] / scale];
    let dz = 1.0 / m as f64;
    let theta0 = u0.acos();
    let rho: Vec<f64> = (0..m)
        .map(|i| rho0 + amplitude * r[0] * (2.0 * PI * (i as f64 + 0.5) * dz).sin())
        .collect();
    let theta: Vec<f64> = (0..m)
        .map(|i| {
            let u = u0 + amplitude * r[1] * (2.0 * PI * (i as f64 + 0.5) * dz).sin();
            u.clamp(-1.0, 1.0).acos().max(theta0.min(1e-300))
        })
        .collect();
    let init = MacroState1D::new(rho, &theta, dz)?;
    let phase = |s: &MacroState1D| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..m {
            let w = l[0] * (s.rho[i] - rho0) + l[1] * (s.cos_theta[i] - u0);
            let z = (i as f64 + 0.5) * dz;
            re += w * (2.0 * PI * z).cos();
            im -= w * (2.0 * PI * z).sin();
        }
        im.atan2(re)
    };
    let t_end = 0.25 / g_base.abs().max(1e-3);
    let cfg = MacroConfig {
        t_end,
        cfl,
        policy: NonHyperbolicPolicy::ContinueAndFlag,
        snapshot_every: usize::MAX,
        ..MacroConfig::default()
    };
    let p0 = phase(&init);
    let run = solve_1d_with_table(table, init, &cfg)?;
    let mut dp = phase(&run.final_state) - p0;
    while dp > PI {
        dp -= 2.0 * PI;
    }
    while dp < -PI {
        dp += 2.0 * PI;
    }
    Ok(WaveSpeed {
        measured: -dp / (2.0 * PI * run.final_state.time),
        predicted,
        predicted_at_base: g_base,
    })
}
