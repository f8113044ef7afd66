//! Run configuration: a TOML document with one table per command plus
//! shared `model`, `kernel` and `tolerances` tables. Unknown keys anywhere
//! are rejected.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use vicsek_core::coefficients::CoefficientOptions;
use vicsek_core::hyperbolicity::ScanRange;
use vicsek_core::macro_solver::NonHyperbolicPolicy;
use vicsek_core::{kernel_moments, normalize_density_kernel, DensityLaw, KernelSpec, ModelParams, QuadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Coeffs,
    Gci,
    Asymptotics,
    HyperbolicityMap,
    KernelAlpha,
    SimulateParticles,
    SimulateMacro,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    /// Written into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub coeffs: CoeffsConfig,
    #[serde(default)]
    pub gci: GciConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub hyperbolicity_map: MapConfig,
    #[serde(default)]
    pub kernel_alpha: KernelAlphaConfig,
    #[serde(default)]
    pub simulate_particles: ParticlesConfig,
    #[serde(default)]
    pub simulate_macro: MacroRunConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Value::Table(Table::new())
            .try_into()
            .expect("every field has a default")
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub nu: DensityLaw,
    pub d: DensityLaw,
    /// Taken from `kernel.orientation` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Taken from the normalized `kernel.density` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_tilde: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 3,
            nu: DensityLaw::Constant { value: 1.0 },
            d: DensityLaw::Constant { value: 1.0 },
            alpha: None,
            alpha_tilde: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<KernelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub grid: usize,
    /// Defaults to `1e-10 · max(1, max |λ|)` over the scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_sign: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: 1e-12,
            grid: vicsek_core::coefficients::DEFAULT_GRID,
            tol_sign: None,
        }
    }
}

impl Tolerances {
    pub fn quad(&self) -> QuadSpec {
        QuadSpec::with_tol(self.rel_tol)
    }

    pub fn coefficient_options(&self) -> CoefficientOptions {
        CoefficientOptions {
            grid: self.grid,
            quad: self.quad(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoeffsConfig {
    pub rho: ScanRange,
}

impl Default for CoeffsConfig {
    fn default() -> Self {
        CoeffsConfig {
            rho: ScanRange::new(0.5, 2.0, 4),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GciConfig {
    pub kappa: f64,
    /// Defaults to `model.dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Defaults to `tolerances.grid`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl Default for GciConfig {
    fn default() -> Self {
        GciConfig {
            kappa: 1.0,
            dim: None,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsConfig {
    /// Highest `p` for the small-concentration polynomials `H_p`.
    pub p_max: usize,
    /// `N` of the large-concentration polynomials `G_p^N`.
    pub big_n: usize,
    /// Densities at which the macroscopic series are evaluated.
    pub rho: Vec<f64>,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            p_max: 4,
            big_n: 3,
            rho: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub rho: ScanRange,
    pub theta: ScanRange,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            rho: ScanRange::new(0.5, 10.0, 40),
            theta: ScanRange::new(0.0, std::f64::consts::PI, 73),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelAlphaConfig {
    /// Defaults to `model.dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesConfig {
    pub n_particles: usize,
    pub box_l: f64,
    pub dt: f64,
    pub t_end: f64,
    pub homogeneous: bool,
    pub record_every: usize,
    pub coarse_bins: usize,
    /// Burn-in time excluded from the reported time average.
    pub burn_in: f64,
    /// Write recorded frames to `frames.bin`.
    pub frame_log: bool,
}

impl Default for ParticlesConfig {
    fn default() -> Self {
        ParticlesConfig {
            n_particles: 1024,
            box_l: 1.0,
            dt: 0.01,
            t_end: 10.0,
            homogeneous: true,
            record_every: 10,
            coarse_bins: 8,
            burn_in: 2.0,
            frame_log: false,
        }
    }
}

/// Initial data `ρ₀ + a_ρ sin(2πkz/L)`, `θ₀ + a_θ cos(2πkz/L)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroInitial {
    pub rho0: f64,
    pub rho_amplitude: f64,
    pub theta0: f64,
    pub theta_amplitude: f64,
    pub wavenumber: u32,
}

impl Default for MacroInitial {
    fn default() -> Self {
        MacroInitial {
            rho0: 1.0,
            rho_amplitude: 0.1,
            theta0: 0.5,
            theta_amplitude: 0.0,
            wavenumber: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroRunConfig {
    pub cells: usize,
    pub length: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub policy: NonHyperbolicPolicy,
    pub snapshot_every: usize,
    /// The coefficient table spans the initial densities widened by this factor.
    pub table_margin: f64,
    pub initial: MacroInitial,
}

impl Default for MacroRunConfig {
    fn default() -> Self {
        MacroRunConfig {
            cells: 512,
            length: 1.0,
            t_end: 0.5,
            cfl: 0.5,
            policy: NonHyperbolicPolicy::Halt,
            snapshot_every: 100,
            table_margin: 2.0,
            initial: MacroInitial::default(),
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> vicsek_core::Result<ModelParams> {
        let m = &self.model;
        let quad = self.tolerances.quad();
        let alpha = match (m.alpha, &self.kernel.orientation) {
            (Some(a), _) => a,
            (None, Some(k)) => kernel_moments(k, m.dim, &quad)?.alpha,
            (None, None) => 0.0,
        };
        let alpha_tilde = match (m.alpha_tilde, &self.kernel.density) {
            (Some(a), _) => a,
            (None, Some(k)) => kernel_moments(&normalize_density_kernel(k, m.dim)?, m.dim, &quad)?.alpha,
            (None, None) => 0.0,
        };
        let model = ModelParams::new(m.dim, m.nu.clone(), m.d.clone()).with_alpha(alpha, alpha_tilde);
        model.validate()?;
        Ok(model)
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

/// Applies `section.key=value`, creating intermediate tables.
pub fn apply_override(doc: &mut Table, assignment: &str) -> anyhow::Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override `{assignment}` has an empty key");
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{assignment}`: `{k}` is not a table"))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Tag keys of internally tagged enums; a table whose tag changes is replaced
/// instead of merged so stale variant fields do not leak through.
const TAGS: [&str; 2] = ["law", "profile"];

fn merge(base: &mut Table, layer: Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(l)) => {
                let retagged = TAGS.iter().any(|t| l.contains_key(*t) && l.get(*t) != b.get(*t));
                if retagged {
                    *b = l;
                } else {
                    merge(b, l);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads `path` (if any), applies `overrides` in order and layers the result
/// over the defaults, so partial tables keep their unspecified defaults.
pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<Table>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let mut full = Table::try_from(RunConfig::default()).context("serializing defaults")?;
    merge(&mut full, doc);
    let cfg: RunConfig = Value::Table(full).try_into().context("invalid configuration")?;
    Ok(cfg)
}
