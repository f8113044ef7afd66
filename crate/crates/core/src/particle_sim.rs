//! Individual-based model: self-propelled particles on a periodic box whose
//! orientations relax toward the local mean direction under Stratonovich
//! noise on the sphere.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::model::ModelParams;

pub type Vec3 = [f64; 3];

/// Distinct stream for the initial condition, far from any particle index.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_particles: usize,
    /// 2 or 3.
    pub dim: usize,
    pub box_l: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub model: ModelParams,
    pub kernel_k: KernelSpec,
    /// Expected to have unit mass.
    pub kernel_ktilde: KernelSpec,
    /// All-to-all alignment with `ρ̄ ≡ 1`; positions are still transported.
    pub homogeneous: bool,
    /// Steps between order-parameter samples and snapshots.
    pub record_every: usize,
    /// Coarse-graining bins per side for snapshot fields.
    pub coarse_bins: usize,
}

impl SimConfig {
    pub fn homogeneous(dim: usize, n_particles: usize, model: ModelParams, dt: f64, t_end: f64, seed: u64) -> Self {
        SimConfig {
            n_particles,
            dim,
            box_l: 1.0,
            dt,
            t_end,
            seed,
            model,
            kernel_k: KernelSpec::ball(0.1),
            kernel_ktilde: KernelSpec::ball(0.1),
            homogeneous: true,
            record_every: 10,
            coarse_bins: 8,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Upper bound of `ρ̄` over any configuration.
    fn max_rho_bar(&self) -> f64 {
        if self.homogeneous {
            return 1.0;
        }
        let k = &self.kernel_ktilde;
        let cut = k.cutoff_radius();
        let sup_r = (0..=256)
            .map(|i| k.radial.value(cut * i as f64 / 256.0))
            .fold(0.0f64, f64::max);
        let sup_a = (0..=256)
            .map(|i| k.angular.value(-1.0 + 2.0 * i as f64 / 256.0))
            .fold(0.0f64, f64::max);
        k.scale * sup_r * sup_a
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config(format!("particle dimension must be 2 or 3, got {}", self.dim)));
        }
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || !(self.box_l > 0.0) {
            return Err(Error::Config("dt, box_l must be positive and t_end non-negative".into()));
        }
        if self.record_every == 0 || self.coarse_bins == 0 {
            return Err(Error::Config("record_every and coarse_bins must be positive".into()));
        }
        if !self.homogeneous {
            self.kernel_k.validate()?;
            self.kernel_ktilde.validate()?;
            let cut = self.kernel_k.cutoff_radius().max(self.kernel_ktilde.cutoff_radius());
            if cut >= 0.5 * self.box_l {
                return Err(Error::Config(format!(
                    "kernel cutoff {cut} must be below half the box size {}",
                    0.5 * self.box_l
                )));
            }
        }
        // stability guard over the reachable densities
        let hi = self.max_rho_bar();
        let mut nu_max = 0.0f64;
        for i in 0..=64 {
            let r = hi * i as f64 / 64.0;
            let (nu, d) = (self.model.nu.value(r), self.model.d.value(r));
            if !(nu >= 0.0) || !(d >= 0.0) || !nu.is_finite() || !d.is_finite() {
                return Err(Error::Model(format!("nu = {nu}, d = {d} at rho = {r}; need finite, >= 0")));
            }
            nu_max = nu_max.max(nu);
        }
        if self.dt * nu_max >= 0.1 {
            return Err(Error::Config(format!(
                "dt * max nu = {} violates the stability bound 0.1",
                self.dt * nu_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub positions: Vec<Vec3>,
    pub orientations: Vec<Vec3>,
    pub time: f64,
    pub step: usize,
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normal_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec3 {
    let mut v = [0.0; 3];
    for x in v.iter_mut().take(dim) {
        *x = rng.sample(StandardNormal);
    }
    v
}

fn wrap(x: f64, l: f64) -> f64 {
    let y = x.rem_euclid(l);
    // rem_euclid can round up to l itself
    if y >= l {
        0.0
    } else {
        y
    }
}

impl ParticleState {
    /// Uniform positions and isotropic orientations.
    pub fn uniform(cfg: &SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let mut positions = Vec::with_capacity(cfg.n_particles);
        let mut orientations = Vec::with_capacity(cfg.n_particles);
        for _ in 0..cfg.n_particles {
            let mut p = [0.0; 3];
            for x in p.iter_mut().take(cfg.dim) {
                *x = rng.random::<f64>() * cfg.box_l;
            }
            positions.push(p);
            let mut w = normal_vec(&mut rng, cfg.dim);
            while norm(&w) < 1e-8 {
                w = normal_vec(&mut rng, cfg.dim);
            }
            let nw = norm(&w);
            orientations.push(w.map(|x| x / nw));
        }
        ParticleState {
            positions,
            orientations,
            time: 0.0,
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `|1/N Σ ω_k|`, zero for an empty system.
    pub fn order_parameter(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        norm(&self.mean_orientation())
    }

    pub fn mean_orientation(&self) -> Vec3 {
        let n = self.len().max(1) as f64;
        let mut s = [0.0; 3];
        for w in &self.orientations {
            for i in 0..3 {
                s[i] += w[i];
            }
        }
        s.map(|x| x / n)
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.orientations
            .iter()
            .map(|w| (norm(w) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Cell-list neighbour structure on the periodic box.
struct CellList {
    per_side: usize,
    cell_size: f64,
    /// Particle indices sorted by cell.
    order: Vec<usize>,
    /// `starts[c]..starts[c+1]` indexes `order` for cell `c`.
    starts: Vec<usize>,
}

impl CellList {
    fn build(pos: &[Vec3], dim: usize, l: f64, cutoff: f64) -> Option<Self> {
        let per_side = (l / cutoff).floor() as usize;
        if per_side < 3 {
            return None;
        }
        let cell_size = l / per_side as f64;
        let ncell = per_side.pow(dim as u32);
        let cell_of = |p: &Vec3| -> usize {
            let mut c = 0;
            for i in (0..dim).rev() {
                let k = ((p[i] / cell_size) as usize).min(per_side - 1);
                c = c * per_side + k;
            }
            c
        };
        let mut counts = vec![0usize; ncell + 1];
        let cells: Vec<usize> = pos.iter().map(cell_of).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; pos.len()];
        for (k, &c) in cells.iter().enumerate() {
            order[fill[c]] = k;
            fill[c] += 1;
        }
        Some(CellList {
            per_side,
            cell_size,
            order,
            starts: counts,
        })
    }

    fn for_neighbours(&self, p: &Vec3, dim: usize, mut f: impl FnMut(usize)) {
        let m = self.per_side as i64;
        let mut base = [0i64; 3];
        for i in 0..dim {
            base[i] = ((p[i] / self.cell_size) as i64).min(m - 1);
        }
        let span = |i: usize| if i < dim { -1..=1i64 } else { 0..=0 };
        for dz in span(2) {
            for dy in span(1) {
                for dx in span(0) {
                    let off = [dx, dy, dz];
                    let mut c = 0i64;
                    for i in (0..dim).rev() {
                        c = c * m + (base[i] + off[i]).rem_euclid(m);
                    }
                    let c = c as usize;
                    for &j in &self.order[self.starts[c]..self.starts[c + 1]] {
                        f(j);
                    }
                }
            }
        }
    }
}

fn min_image(a: &Vec3, b: &Vec3, dim: usize, l: f64) -> Vec3 {
    let mut d = [0.0; 3];
    for i in 0..dim {
        let mut x = b[i] - a[i];
        x -= l * (x / l).round();
        d[i] = x;
    }
    d
}

/// `(ρ̄_k, J̄_k)` for every particle.
fn local_averages(state: &ParticleState, cfg: &SimConfig) -> Vec<(f64, Vec3)> {
    let n = state.len();
    let inv_n = 1.0 / n.max(1) as f64;
    if cfg.homogeneous {
        let mut s = [0.0; 3];
        for w in &state.orientations {
            for i in 0..3 {
                s[i] += w[i];
            }
        }
        return state
            .orientations
            .iter()
            .map(|w| (1.0, [0, 1, 2].map(|i| (s[i] - w[i]) * inv_n)))
            .collect();
    }
    let dim = cfg.dim;
    let l = cfg.box_l;
    let cutoff = cfg.kernel_k.cutoff_radius().max(cfg.kernel_ktilde.cutoff_radius());
    let cells = CellList::build(&state.positions, dim, l, cutoff);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let xk = &state.positions[k];
            let wk = &state.orientations[k];
            let mut rho = 0.0;
            let mut j_bar = [0.0; 3];
            let mut visit = |j: usize| {
                if j == k {
                    return;
                }
                let d = min_image(xk, &state.positions[j], dim, l);
                let r = norm(&d);
                if r > cutoff {
                    return;
                }
                let g = if r > 0.0 { dot(&d, wk) / r } else { 1.0 };
                rho += cfg.kernel_ktilde.value(r, g);
                let kv = cfg.kernel_k.value(r, g);
                if kv != 0.0 {
                    let wj = &state.orientations[j];
                    for i in 0..3 {
                        j_bar[i] += kv * wj[i];
                    }
                }
            };
            match &cells {
                Some(c) => c.for_neighbours(xk, dim, &mut visit),
                None => (0..n).for_each(&mut visit),
            }
            (rho * inv_n, j_bar.map(|x| x * inv_n))
        })
        .collect()
}

/// Advances `state` by one step of length `cfg.dt`.
pub fn step(state: &ParticleState, cfg: &SimConfig) -> Result<ParticleState> {
    let dim = cfg.dim;
    let dt = cfg.dt;
    let avg = local_averages(state, cfg);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    // 256 words per particle and step, far more than three normals need
    let word_pos = (state.step as u128) << 8;
    let model = &cfg.model;
    let next: Vec<(Vec3, Vec3)> = (0..state.len())
        .into_par_iter()
        .map(|k| {
            let w = state.orientations[k];
            let (rho_bar, j_bar) = avg[k];
            let jn = norm(&j_bar);
            let w_bar = if jn < 1e-14 { w } else { j_bar.map(|x| x / jn) };
            let nu = model.nu.value(rho_bar);
            let d = model.d.value(rho_bar);
            let mut rng = base.clone();
            rng.set_stream(k as u64);
            rng.set_word_pos(word_pos);
            let xi = normal_vec(&mut rng, dim);
            let amp = (2.0 * d * dt).sqrt();
            let pw = dot(&w, &w_bar);
            let px = dot(&w, &xi);
            let mut nw = [0.0; 3];
            for i in 0..dim {
                nw[i] = w[i] + nu * dt * (w_bar[i] - pw * w[i]) + amp * (xi[i] - px * w[i]);
            }
            let m = norm(&nw);
            let nw = nw.map(|x| x / m);
            let x = state.positions[k];
            let mut nx = [0.0; 3];
            for i in 0..dim {
                nx[i] = wrap(x[i] + w[i] * dt, cfg.box_l);
            }
            (nx, nw)
        })
        .collect();
    let finite = next
        .iter()
        .all(|(x, w)| x.iter().chain(w.iter()).all(|v| v.is_finite()));
    if !finite {
        return Err(Error::BlowUp { step: state.step });
    }
    let (positions, orientations) = next.into_iter().unzip();
    Ok(ParticleState {
        positions,
        orientations,
        time: state.time + dt,
        step: state.step + 1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl OrderSeries {
    /// Mean over samples with `t ≥ burn_in`.
    pub fn time_average(&self, burn_in: f64) -> f64 {
        let v: Vec<f64> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= burn_in)
            .map(|(_, v)| *v)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct HomogeneousRun {
    pub series: OrderSeries,
    pub final_state: ParticleState,
}

/// All-to-all run from isotropic initial data; records `|mean ω|`.
pub fn run_homogeneous(cfg: &SimConfig) -> Result<HomogeneousRun> {
    if !cfg.homogeneous {
        return Err(Error::Config("run_homogeneous needs homogeneous mode".into()));
    }
    cfg.validate()?;
    let mut state = ParticleState::uniform(cfg);
    let mut series = OrderSeries {
        times: vec![0.0],
        values: vec![state.order_parameter()],
    };
    for s in 1..=cfg.steps() {
        state = step(&state, cfg)?;
        if s % cfg.record_every == 0 {
            series.times.push(state.time);
            series.values.push(state.order_parameter());
        }
    }
    Ok(HomogeneousRun {
        series,
        final_state: state,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<Vec3>,
    pub orientations: Vec<Vec3>,
    /// Particle count per coarse bin divided by `N · bin volume`, row-major with x fastest.
    pub density: Vec<f64>,
    /// Normalized mean orientation per bin (zero in empty bins).
    pub direction: Vec<Vec3>,
}

fn snapshot(state: &ParticleState, cfg: &SimConfig) -> Snapshot {
    let b = cfg.coarse_bins;
    let nb = b.pow(cfg.dim as u32);
    let h = cfg.box_l / b as f64;
    let mut count = vec![0usize; nb];
    let mut sum = vec![[0.0; 3]; nb];
    for (x, w) in state.positions.iter().zip(&state.orientations) {
        let mut c = 0;
        for i in (0..cfg.dim).rev() {
            c = c * b + ((x[i] / h) as usize).min(b - 1);
        }
        count[c] += 1;
        for i in 0..3 {
            sum[c][i] += w[i];
        }
    }
    let vol = h.powi(cfg.dim as i32);
    let n = state.len().max(1) as f64;
    Snapshot {
        time: state.time,
        positions: state.positions.clone(),
        orientations: state.orientations.clone(),
        density: count.iter().map(|&c| c as f64 / (n * vol)).collect(),
        direction: sum
            .iter()
            .map(|s| {
                let m = norm(s);
                if m > 0.0 {
                    s.map(|x| x / m)
                } else {
                    [0.0; 3]
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SpatialRun {
    pub snapshots: Vec<Snapshot>,
    pub series: OrderSeries,
}

/// Full spatial dynamics with snapshots every `record_every` steps.
pub fn run_spatial(cfg: &SimConfig) -> Result<SpatialRun> {
    cfg.validate()?;
    let mut run = SpatialRun {
        snapshots: Vec::new(),
        series: OrderSeries {
            times: Vec::new(),
            values: Vec::new(),
        },
    };
    if cfg.n_particles == 0 {
        return Ok(run);
    }
    let mut state = ParticleState::uniform(cfg);
    run.snapshots.push(snapshot(&state, cfg));
    run.series.times.push(0.0);
    run.series.values.push(state.order_parameter());
    for s in 1..=cfg.steps() {
        state = step(&state, cfg)?;
        if s % cfg.record_every == 0 {
            run.snapshots.push(snapshot(&state, cfg));
            run.series.times.push(state.time);
            run.series.values.push(state.order_parameter());
        }
    }
    Ok(run)
}

/// CDF of `μ = cos θ` under the equilibrium with concentration `kappa`,
/// tabulated in θ.
pub struct MarginalCdf {
    /// `cdf[i]` at `μ = cos(π - i·h)`, increasing in `μ`.
    cdf: Vec<f64>,
    h: f64,
}

impl MarginalCdf {
    pub fn new(kappa: f64, dim: usize) -> Self {
        let m = 1 << 14;
        let h = std::f64::consts::PI / m as f64;
        // φ = π - θ runs from 0 (μ = -1) to π (μ = 1)
        let w = |phi: f64| {
            let mu = -phi.cos();
            (kappa * (mu - 1.0)).exp() * phi.sin().powi(dim as i32 - 2)
        };
        let mut cdf = vec![0.0; m + 1];
        for i in 0..m {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            // Simpson on each cell
            cdf[i + 1] = cdf[i] + h / 6.0 * (w(a) + 4.0 * w(0.5 * (a + b)) + w(b));
        }
        let total = cdf[m];
        for c in &mut cdf {
            *c /= total;
        }
        MarginalCdf { cdf, h }
    }

    pub fn eval(&self, mu: f64) -> f64 {
        let phi = (-mu.clamp(-1.0, 1.0)).acos();
        let t = phi / self.h;
        let i = (t.floor() as usize).min(self.cdf.len() - 2);
        let f = t - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// One-sample Kolmogorov–Smirnov test of `ω·Ω̂` against the equilibrium
/// marginal, `Ω̂` the instantaneous mean direction; threshold `1.95/√N`.
pub fn equilibrium_gof(state: &ParticleState, kappa: f64, dim: usize) -> GofResult {
    let m = state.mean_orientation();
    let mn = norm(&m);
    let omega = if mn > 0.0 { m.map(|x| x / mn) } else { [1.0, 0.0, 0.0] };
    let mut mus: Vec<f64> = state.orientations.iter().map(|w| dot(w, &omega)).collect();
    mus.sort_by(f64::total_cmp);
    let cdf = MarginalCdf::new(kappa, dim);
    let n = mus.len() as f64;
    let mut stat = 0.0f64;
    for (i, &mu) in mus.iter().enumerate() {
        let f = cdf.eval(mu);
        stat = stat.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let threshold = 1.95 / n.sqrt();
    GofResult {
        statistic: stat,
        threshold,
        passed: stat < threshold,
    }
}

/// Appends one frame: `time: f64`, `N: u64`, then `N` records of `dim`
/// position and `dim` orientation components, all little-endian.
pub fn write_frame<W: Write>(w: &mut W, state: &ParticleState, dim: usize) -> io::Result<()> {
    w.write_all(&state.time.to_le_bytes())?;
    w.write_all(&(state.len() as u64).to_le_bytes())?;
    for (x, o) in state.positions.iter().zip(&state.orientations) {
        for v in x[..dim].iter().chain(&o[..dim]) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads frames written by [`write_frame`] until end of input.
pub fn read_frames<R: Read>(r: &mut R, dim: usize) -> io::Result<Vec<ParticleState>> {
    let mut out = Vec::new();
    let mut buf = [0u8; 8];
    fn read_f64<R: Read>(r: &mut R, buf: &mut [u8; 8]) -> io::Result<f64> {
        r.read_exact(buf)?;
        Ok(f64::from_le_bytes(*buf))
    }
    loop {
        let time = match r.read_exact(&mut buf) {
            Ok(()) => f64::from_le_bytes(buf),
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(out),
            Err(e) => return Err(e),
        };
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        let mut positions = Vec::with_capacity(n);
        let mut orientations = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = [0.0; 3];
            let mut o = [0.0; 3];
            for v in x.iter_mut().take(dim) {
                *v = read_f64(r, &mut buf)?;
            }
            for v in o.iter_mut().take(dim) {
                *v = read_f64(r, &mut buf)?;
            }
            positions.push(x);
            orientations.push(o);
        }
        out.push(ParticleState {
            positions,
            orientations,
            time,
            step: out.len(),
        });
    }
}
