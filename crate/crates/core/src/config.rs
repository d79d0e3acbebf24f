//! Experiment configuration: `key.path = value` text files, `--set` overrides and presets.
//!
//! Resolution order: experiment preset, then `cartpole.preset` (if any), then every other key
//! in the order given. Later assignments of the same key win. Unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cartpole::{self, MAX_STEPS};
use crate::error::{Error, Result};
use crate::evolve::TraceLevel;
use crate::landscape::{Benchmark, DensityMap, LandscapeOptions, MaxTarget, Objective};
use crate::metrics::{EntropyGrid, DEFAULT_CELLS, DEFAULT_ELITES};
use crate::schedule::{Schedule, ScheduleFamily, DEFAULT_CLAMP_EPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Benchmark,
    TwoPeaks,
    Cartpole,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(Experiment::Benchmark),
            "two_peaks" | "two-peaks" => Ok(Experiment::TwoPeaks),
            "cartpole" => Ok(Experiment::Cartpole),
            _ => Err(config(format!("unknown experiment `{s}`"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Benchmark => "benchmark",
            Experiment::TwoPeaks => "two_peaks",
            Experiment::Cartpole => "cartpole",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CartpolePreset {
    SmallLatent,
    DeepLatent,
    SmallAmbient,
}

impl FromStr for CartpolePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-latent" => Ok(CartpolePreset::SmallLatent),
            "deep-latent" => Ok(CartpolePreset::DeepLatent),
            "small-ambient" => Ok(CartpolePreset::SmallAmbient),
            _ => Err(config(format!("unknown cartpole preset `{s}` (small-latent|deep-latent|small-ambient)"))),
        }
    }
}

impl fmt::Display for CartpolePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CartpolePreset::SmallLatent => "small-latent",
            CartpolePreset::DeepLatent => "deep-latent",
            CartpolePreset::SmallAmbient => "small-ambient",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub kind: ScheduleFamily,
    pub steps: usize,
    pub sigma_scale: f64,
    pub clamp_eps: f64,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<Schedule> {
        Schedule::from_family(self.kind, self.steps, self.sigma_scale, self.clamp_eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub population: usize,
    /// Must match the evaluator's dimension when set.
    pub dim: Option<usize>,
    /// When set, run `i` uses seed `seed + i` instead of a seed derived from `master_seed`.
    pub seed: Option<u64>,
    pub project_origin: bool,
    pub trace: TraceLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    /// Benchmarks to run, in order.
    pub names: Vec<Benchmark>,
    /// `None` uses each benchmark's default objective.
    pub objective: Option<Objective>,
    pub eps: f64,
    pub scale_override: Option<f64>,
    /// `None` uses each benchmark's preset radius.
    pub scale_radius: Option<f64>,
    pub bound: f64,
    pub max_target: MaxTarget,
}

impl LandscapeConfig {
    pub fn options(&self, benchmark: Benchmark) -> LandscapeOptions {
        LandscapeOptions {
            eps: self.eps,
            scale_override: self.scale_override,
            bound: self.bound,
            scale_radius: self.scale_radius.unwrap_or_else(|| benchmark.preset_scale_radius()),
            max_target: self.max_target,
            ..LandscapeOptions::default()
        }
    }

    pub fn objective_for(&self, benchmark: Benchmark) -> Objective {
        self.objective.unwrap_or_else(|| benchmark.default_objective())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub enabled: bool,
    pub dim: usize,
    pub norm_preserving: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartpoleConfig {
    pub preset: Option<CartpolePreset>,
    pub arch: Vec<usize>,
    pub episodes_per_eval: usize,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub elites: usize,
    pub cells: usize,
}

impl MetricsConfig {
    pub fn grid(&self, bound: f64) -> EntropyGrid {
        EntropyGrid { bound, cells_per_side: self.cells }
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub repeats: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub density: DensityMap,
    pub evolve: EvolveConfig,
    pub landscape: LandscapeConfig,
    pub latent: LatentConfig,
    pub cartpole: CartpoleConfig,
    pub metrics: MetricsConfig,
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "experiment",
    "repeats",
    "master_seed",
    "workers",
    "output_dir",
    "schedule.kind",
    "schedule.T",
    "schedule.sigma_scale",
    "schedule.clamp_eps",
    "density.g",
    "evolve.population",
    "evolve.dim",
    "evolve.seed",
    "evolve.project_origin",
    "evolve.trace",
    "landscape.name",
    "landscape.objective",
    "landscape.eps",
    "landscape.scale_override",
    "landscape.scale_radius",
    "landscape.bound",
    "landscape.max_target",
    "latent.enabled",
    "latent.dim",
    "latent.norm_preserving",
    "cartpole.preset",
    "cartpole.arch",
    "cartpole.episodes_per_eval",
    "cartpole.max_steps",
    "metrics.elites",
    "metrics.cells",
];

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn with_context<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => config(format!("`{key}`: {other}")),
    })
}

fn show_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl ExperimentConfig {
    /// Preset defaults for an experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            repeats: 100,
            master_seed: 0,
            workers: 0,
            output_dir: None,
            schedule: ScheduleConfig {
                kind: ScheduleFamily::Cosine,
                steps: 25,
                sigma_scale: 1.0,
                clamp_eps: DEFAULT_CLAMP_EPS,
            },
            density: DensityMap::Power { k: 8.0 },
            evolve: EvolveConfig {
                population: 512,
                dim: None,
                seed: None,
                project_origin: false,
                trace: TraceLevel::Stats,
            },
            landscape: LandscapeConfig {
                names: Benchmark::ALL.to_vec(),
                objective: None,
                eps: 1e-3,
                scale_override: None,
                scale_radius: None,
                bound: 4.0,
                max_target: MaxTarget::Corner,
            },
            latent: LatentConfig { enabled: false, dim: 2, norm_preserving: false },
            cartpole: CartpoleConfig {
                preset: None,
                arch: cartpole::SMALL_ARCH.to_vec(),
                episodes_per_eval: 1,
                max_steps: MAX_STEPS,
            },
            metrics: MetricsConfig { elites: DEFAULT_ELITES, cells: DEFAULT_CELLS },
        };
        match experiment {
            Experiment::Benchmark => {}
            Experiment::TwoPeaks => {
                c.repeats = 20;
                c.schedule.kind = ScheduleFamily::Linear;
                c.schedule.sigma_scale = 0.1;
                c.density = DensityMap::Identity;
                c.evolve.trace = TraceLevel::Full;
            }
            Experiment::Cartpole => {
                c.schedule.steps = 10;
                c.apply_cartpole_preset(CartpolePreset::SmallLatent);
            }
        }
        c
    }

    fn apply_cartpole_preset(&mut self, preset: CartpolePreset) {
        self.cartpole.preset = Some(preset);
        let (arch, latent) = match preset {
            CartpolePreset::SmallLatent => (cartpole::SMALL_ARCH.to_vec(), true),
            CartpolePreset::DeepLatent => (cartpole::DEEP_ARCH.to_vec(), true),
            CartpolePreset::SmallAmbient => (cartpole::SMALL_ARCH.to_vec(), false),
        };
        self.cartpole.arch = arch;
        self.latent.enabled = latent;
    }

    /// Resolves a configuration from ordered `(key, value)` assignments.
    ///
    /// `experiment` overrides any `experiment` key found in the assignments; a conflicting value
    /// is a configuration error.
    pub fn resolve(experiment: Option<Experiment>, assignments: &[(String, String)]) -> Result<Self> {
        for (key, _) in assignments {
            if !KEYS.contains(&key.as_str()) {
                return Err(config(format!("unknown key `{key}`")));
            }
        }
        let from_keys = assignments
            .iter()
            .rev()
            .find(|(k, _)| k == "experiment")
            .map(|(k, v)| parse::<Experiment>(k, v))
            .transpose()?;
        let experiment = match (experiment, from_keys) {
            (Some(a), Some(b)) if a != b => {
                return Err(config(format!("experiment `{b}` in config conflicts with command `{a}`")))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(config("no experiment selected")),
        };
        let mut c = Self::preset(experiment);
        if let Some((k, v)) = assignments.iter().rev().find(|(k, _)| k == "cartpole.preset") {
            c.set(k, v)?;
        }
        for (k, v) in assignments {
            if k != "experiment" && k != "cartpole.preset" {
                c.set(k, v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Assigns one key; presets are not re-applied.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "experiment" => self.experiment = parse(key, v)?,
            "repeats" => self.repeats = parse(key, v)?,
            "master_seed" => self.master_seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "output_dir" => self.output_dir = parse_opt(key, v)?,
            "schedule.kind" => self.schedule.kind = with_context(key, v.parse())?,
            "schedule.T" => self.schedule.steps = parse(key, v)?,
            "schedule.sigma_scale" => self.schedule.sigma_scale = parse(key, v)?,
            "schedule.clamp_eps" => self.schedule.clamp_eps = parse(key, v)?,
            "density.g" => self.density = with_context(key, v.parse())?,
            "evolve.population" => self.evolve.population = parse(key, v)?,
            "evolve.dim" => self.evolve.dim = parse_opt(key, v)?,
            "evolve.seed" => self.evolve.seed = parse_opt(key, v)?,
            "evolve.project_origin" => self.evolve.project_origin = parse_bool(key, v)?,
            "evolve.trace" => {
                self.evolve.trace = match v {
                    "stats" => TraceLevel::Stats,
                    "full" => TraceLevel::Full,
                    _ => return Err(config(format!("`{key}`: expected stats|full, got `{v}`"))),
                }
            }
            "landscape.name" => {
                self.landscape.names = if v == "all" {
                    Benchmark::ALL.to_vec()
                } else {
                    v.split(',')
                        .map(|s| with_context(key, s.trim().parse()))
                        .collect::<Result<Vec<_>>>()?
                }
            }
            "landscape.objective" => {
                self.landscape.objective =
                    if v == "default" { None } else { Some(with_context(key, v.parse())?) }
            }
            "landscape.eps" => self.landscape.eps = parse(key, v)?,
            "landscape.scale_override" => self.landscape.scale_override = parse_opt(key, v)?,
            "landscape.scale_radius" => self.landscape.scale_radius = parse_opt(key, v)?,
            "landscape.bound" => self.landscape.bound = parse(key, v)?,
            "landscape.max_target" => self.landscape.max_target = with_context(key, v.parse())?,
            "latent.enabled" => self.latent.enabled = parse_bool(key, v)?,
            "latent.dim" => self.latent.dim = parse(key, v)?,
            "latent.norm_preserving" => self.latent.norm_preserving = parse_bool(key, v)?,
            "cartpole.preset" => match parse_opt(key, v)? {
                Some(p) => self.apply_cartpole_preset(p),
                None => self.cartpole.preset = None,
            },
            "cartpole.arch" => self.cartpole.arch = with_context(key, cartpole::parse_arch(v))?,
            "cartpole.episodes_per_eval" => self.cartpole.episodes_per_eval = parse(key, v)?,
            "cartpole.max_steps" => self.cartpole.max_steps = parse(key, v)?,
            "metrics.elites" => self.metrics.elites = parse(key, v)?,
            "metrics.cells" => self.metrics.cells = parse(key, v)?,
            _ => return Err(config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks every value against its module's domain.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config(msg.to_string())) };
        check(self.repeats >= 1, "repeats must be >= 1")?;
        with_context("schedule", self.schedule.build().map(|_| ()))?;
        with_context("density.g", self.density.validate())?;
        check(self.evolve.population >= 1, "evolve.population must be >= 1")?;
        check(self.landscape.eps > 0.0, "landscape.eps must be positive")?;
        check(self.landscape.bound > 0.0, "landscape.bound must be positive")?;
        check(self.landscape.scale_override.map_or(true, |s| s > 0.0), "landscape.scale_override must be positive")?;
        check(self.landscape.scale_radius.map_or(true, |r| r > 0.0), "landscape.scale_radius must be positive")?;
        check(!self.landscape.names.is_empty(), "landscape.name selects no benchmark")?;
        check(self.latent.dim >= 1, "latent.dim must be >= 1")?;
        check(self.cartpole.episodes_per_eval >= 1, "cartpole.episodes_per_eval must be >= 1")?;
        check(
            (1..=MAX_STEPS).contains(&self.cartpole.max_steps),
            "cartpole.max_steps must lie in 1..=500",
        )?;
        check(self.metrics.elites >= 1, "metrics.elites must be >= 1")?;
        check(self.metrics.cells >= 1, "metrics.cells must be >= 1")?;
        let dim = self.problem_dim();
        if let Some(d) = self.evolve.dim {
            check(d == dim, &format!("evolve.dim = {d} but the {} problem has dimension {dim}", self.experiment))?;
        }
        if self.experiment == Experiment::Cartpole && self.latent.enabled {
            check(self.latent.dim <= dim, "latent.dim exceeds the genotype dimension")?;
        }
        check(
            self.metrics.elites <= self.evolve.population,
            "metrics.elites exceeds the population size",
        )?;
        Ok(())
    }

    /// Genotype dimension of the configured problem.
    pub fn problem_dim(&self) -> usize {
        match self.experiment {
            Experiment::Benchmark | Experiment::TwoPeaks => 2,
            Experiment::Cartpole => cartpole::param_count(&self.cartpole.arch),
        }
    }

    /// Seed of run `index` within the batch.
    pub fn run_seed(&self, index: usize) -> u64 {
        match self.evolve.seed {
            Some(base) => base.wrapping_add(index as u64),
            None => crate::rng::substream_seed(self.master_seed, crate::rng::Stream::Run { index }),
        }
    }

    /// Canonical `key = value` text listing every key; `from_text` reads it back unchanged.
    pub fn to_text(&self) -> String {
        let names = if self.landscape.names == Benchmark::ALL {
            "all".to_string()
        } else {
            join(&self.landscape.names, ",")
        };
        let values: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("repeats", self.repeats.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("workers", self.workers.to_string()),
            ("output_dir", self.output_dir.as_ref().map_or("none".into(), |p| p.display().to_string())),
            ("schedule.kind", self.schedule.kind.to_string()),
            ("schedule.T", self.schedule.steps.to_string()),
            ("schedule.sigma_scale", format!("{:?}", self.schedule.sigma_scale)),
            ("schedule.clamp_eps", format!("{:?}", self.schedule.clamp_eps)),
            ("density.g", self.density.to_string()),
            ("evolve.population", self.evolve.population.to_string()),
            ("evolve.dim", show_opt(&self.evolve.dim)),
            ("evolve.seed", show_opt(&self.evolve.seed)),
            ("evolve.project_origin", self.evolve.project_origin.to_string()),
            (
                "evolve.trace",
                match self.evolve.trace {
                    TraceLevel::Stats => "stats".into(),
                    TraceLevel::Full => "full".into(),
                },
            ),
            ("landscape.name", names),
            ("landscape.objective", show_opt(&self.landscape.objective).replace("none", "default")),
            ("landscape.eps", format!("{:?}", self.landscape.eps)),
            ("landscape.scale_override", self.landscape.scale_override.map_or("none".into(), |s| format!("{s:?}"))),
            ("landscape.scale_radius", self.landscape.scale_radius.map_or("none".into(), |s| format!("{s:?}"))),
            ("landscape.bound", format!("{:?}", self.landscape.bound)),
            ("landscape.max_target", self.landscape.max_target.to_string()),
            ("latent.enabled", self.latent.enabled.to_string()),
            ("latent.dim", self.latent.dim.to_string()),
            ("latent.norm_preserving", self.latent.norm_preserving.to_string()),
            ("cartpole.preset", show_opt(&self.cartpole.preset)),
            ("cartpole.arch", join(&self.cartpole.arch, "-")),
            ("cartpole.episodes_per_eval", self.cartpole.episodes_per_eval.to_string()),
            ("cartpole.max_steps", self.cartpole.max_steps.to_string()),
            ("metrics.elites", self.metrics.elites.to_string()),
            ("metrics.cells", self.metrics.cells.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::resolve(None, &parse_assignments(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_assignment(line).map_err(|e| config(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Parses a single `key=value` pair.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| config(format!("expected key = value, got `{s}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(config(format!("empty key in `{s}`")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}
