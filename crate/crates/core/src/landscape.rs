//! Fitness evaluators: the 2-D benchmark functions, the two-peaks Gaussian mixture,
//! the `(0, 1]` rescaling transform and the fitness-to-density maps.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{stream_rng, Stream};

/// One fitness evaluation of one individual.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Raw objective value.
    pub raw: f64,
    /// Fitness on the `[0, 1]` scale, higher is better.
    pub fitness: f64,
    /// Optional behaviour descriptor (e.g. terminal cart-pole state).
    pub descriptor: Option<Vec<f64>>,
}

/// Maps a parameter vector to fitness.
///
/// Implementations must be deterministic given `(x, episode_seed)`; deterministic landscapes
/// simply ignore the seed.
pub trait FitnessEvaluator: Sync {
    /// Parameter dimensionality D.
    fn dim(&self) -> usize;

    fn objective(&self) -> Objective;

    fn evaluate(&self, x: &[f64], episode_seed: u64) -> std::result::Result<Evaluation, String>;

    fn name(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Minimize,
    Maximize,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimize" | "min" => Ok(Objective::Minimize),
            "maximize" | "max" => Ok(Objective::Maximize),
            other => Err(param(format!("unknown objective `{other}`"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Minimize => "minimize",
            Objective::Maximize => "maximize",
        })
    }
}

pub fn rosenbrock([x, y]: [f64; 2]) -> f64 {
    100.0 * (y - x * x).powi(2) + (1.0 - x).powi(2)
}

pub fn beale([x, y]: [f64; 2]) -> f64 {
    (1.5 - x + x * y).powi(2) + (2.25 - x + x * y * y).powi(2) + (2.625 - x + x * y * y * y).powi(2)
}

pub fn himmelblau([x, y]: [f64; 2]) -> f64 {
    (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2)
}

pub fn ackley([x, y]: [f64; 2]) -> f64 {
    -20.0 * (-0.2 * ((x * x + y * y) / 2.0).sqrt()).exp()
        - (((2.0 * PI * x).cos() + (2.0 * PI * y).cos()) / 2.0).exp()
        + E
        + 20.0
}

/// Rastrigin with `A = 10`, `n = 2`.
pub fn rastrigin([x, y]: [f64; 2]) -> f64 {
    const A: f64 = 10.0;
    A * 2.0 + (x * x - A * (2.0 * PI * x).cos()) + (y * y - A * (2.0 * PI * y).cos())
}

pub const TWO_PEAKS_SIGMA: f64 = 0.1;
pub const TWO_PEAKS_CENTERS: [[f64; 2]; 2] = [[1.0, 1.0], [-1.0, -1.0]];

/// Equal mixture of two isotropic Gaussians centred at (1, 1) and (-1, -1), σ = 0.1.
pub fn two_peaks(p: [f64; 2]) -> f64 {
    let var = TWO_PEAKS_SIGMA * TWO_PEAKS_SIGMA;
    let norm = 1.0 / (2.0 * PI * var);
    let density = |mu: [f64; 2]| {
        let d2 = (p[0] - mu[0]).powi(2) + (p[1] - mu[1]).powi(2);
        norm * (-d2 / (2.0 * var)).exp()
    };
    (density(TWO_PEAKS_CENTERS[0]) + density(TWO_PEAKS_CENTERS[1])) / 2.0
}

/// Himmelblau minima at the printed two-decimal precision.
pub const HIMMELBLAU_ROOTS: [[f64; 2]; 4] =
    [[3.0, 2.0], [-2.81, 3.13], [-3.78, -3.28], [3.58, -1.85]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Rosenbrock,
    Beale,
    Himmelblau,
    Ackley,
    Rastrigin,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::Rosenbrock,
        Benchmark::Beale,
        Benchmark::Himmelblau,
        Benchmark::Ackley,
        Benchmark::Rastrigin,
    ];

    pub fn eval(self, p: [f64; 2]) -> f64 {
        match self {
            Benchmark::Rosenbrock => rosenbrock(p),
            Benchmark::Beale => beale(p),
            Benchmark::Himmelblau => himmelblau(p),
            Benchmark::Ackley => ackley(p),
            Benchmark::Rastrigin => rastrigin(p),
        }
    }

    /// Ackley and Rastrigin are maximized on the box so that they have four optima.
    pub fn default_objective(self) -> Objective {
        match self {
            Benchmark::Rosenbrock | Benchmark::Beale | Benchmark::Himmelblau => Objective::Minimize,
            Benchmark::Ackley | Benchmark::Rastrigin => Objective::Maximize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Rosenbrock => "rosenbrock",
            Benchmark::Beale => "beale",
            Benchmark::Himmelblau => "himmelblau",
            Benchmark::Ackley => "ackley",
            Benchmark::Rastrigin => "rastrigin",
        }
    }

    /// Sampling radius for the scale factor used by the benchmark preset.
    pub fn preset_scale_radius(self) -> f64 {
        match self {
            Benchmark::Beale => 2.0,
            Benchmark::Himmelblau => 4.0,
            Benchmark::Rosenbrock | Benchmark::Ackley | Benchmark::Rastrigin => 6.0,
        }
    }

    /// Optimum locations for the given objective on `[-bound, bound]²`.
    pub fn optima(self, objective: Objective, bound: f64) -> Vec<[f64; 2]> {
        self.optima_with(objective, bound, MaxTarget::default())
    }

    pub fn optima_with(self, objective: Objective, bound: f64, rule: MaxTarget) -> Vec<[f64; 2]> {
        if objective == Objective::Maximize && rule == MaxTarget::Corner {
            let best = target_value_with(self, objective, bound, rule);
            let tol = 1e-9 * best.abs().max(1.0);
            return corners(bound).into_iter().filter(|p| (self.eval(*p) - best).abs() <= tol).collect();
        }
        match objective {
            Objective::Minimize => match self {
                Benchmark::Rosenbrock => vec![[1.0, 1.0]],
                Benchmark::Beale => vec![[3.0, 0.5]],
                Benchmark::Himmelblau => HIMMELBLAU_ROOTS.to_vec(),
                Benchmark::Ackley | Benchmark::Rastrigin => vec![[0.0, 0.0]],
            },
            Objective::Maximize => box_maxima(|p| self.eval(p), bound),
        }
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| param(format!("unknown benchmark `{s}`")))
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How f* is fixed for maximization benchmarks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxTarget {
    /// Largest value over the four box corners `(±bound, ±bound)`.
    #[default]
    Corner,
    /// True maximum over the closed box, located numerically.
    BoxMax,
}

impl FromStr for MaxTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corner" => Ok(MaxTarget::Corner),
            "box_max" => Ok(MaxTarget::BoxMax),
            _ => Err(param(format!("unknown max target `{s}` (corner|box_max)"))),
        }
    }
}

impl fmt::Display for MaxTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaxTarget::Corner => "corner",
            MaxTarget::BoxMax => "box_max",
        })
    }
}

fn corners(bound: f64) -> [[f64; 2]; 4] {
    [[bound, bound], [-bound, bound], [-bound, -bound], [bound, -bound]]
}

/// Target value f* of `benchmark` under `objective` on `[-bound, bound]²`.
///
/// Minima are closed-form. For `BoxMax` the maximum is located by a 401×401 grid scan followed
/// by a compass-search refinement constrained to the box.
pub fn target_value(benchmark: Benchmark, objective: Objective, bound: f64) -> f64 {
    target_value_with(benchmark, objective, bound, MaxTarget::default())
}

pub fn target_value_with(benchmark: Benchmark, objective: Objective, bound: f64, rule: MaxTarget) -> f64 {
    match (objective, rule) {
        (Objective::Minimize, _) => 0.0,
        (Objective::Maximize, MaxTarget::Corner) => {
            corners(bound).into_iter().map(|p| benchmark.eval(p)).fold(f64::NEG_INFINITY, f64::max)
        }
        (Objective::Maximize, MaxTarget::BoxMax) => locate_box_max(|p| benchmark.eval(p), bound).1,
    }
}

fn locate_box_max(f: impl Fn([f64; 2]) -> f64, bound: f64) -> ([f64; 2], f64) {
    const GRID: usize = 401;
    let h = 2.0 * bound / (GRID - 1) as f64;
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            let p = [-bound + i as f64 * h, -bound + j as f64 * h];
            let v = f(p);
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    let (mut p, mut v) = best;
    let mut step = h;
    while step > 1e-13 {
        let mut improved = false;
        for (axis, dir) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            let mut q = p;
            q[axis] = (q[axis] + dir * step).clamp(-bound, bound);
            let w = f(q);
            if w > v {
                p = q;
                v = w;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (p, v)
}

/// All sign-mirror images of the box maximizer that attain the maximum.
fn box_maxima(f: impl Fn([f64; 2]) -> f64, bound: f64) -> Vec<[f64; 2]> {
    let (p, v) = locate_box_max(&f, bound);
    let tol = 1e-9 * v.abs().max(1.0);
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        let q = [sx * p[0], sy * p[1]];
        if (f(q) - v).abs() <= tol && !out.iter().any(|o| o == &q) {
            out.push(q);
        }
    }
    out
}

/// `ε / (ε + (raw - f*)² / s²)`, in `(0, 1]`.
pub fn rescale(raw: f64, f_star: f64, scale: f64, eps: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(param(format!("rescale needs s > 0, got {scale}")));
    }
    if !(eps > 0.0) {
        return Err(param(format!("rescale needs eps > 0, got {eps}")));
    }
    let r = (raw - f_star) / scale;
    Ok(eps / (eps + r * r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeOptions {
    pub eps: f64,
    pub scale_override: Option<f64>,
    pub bound: f64,
    /// Radius of the sampling ball around each optimum used to derive s.
    pub scale_radius: f64,
    pub scale_samples: usize,
    pub scale_seed: u64,
    pub max_target: MaxTarget,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        LandscapeOptions {
            eps: 1e-3,
            scale_override: None,
            bound: 4.0,
            scale_radius: 0.5,
            scale_samples: 10_000,
            scale_seed: 0,
            max_target: MaxTarget::Corner,
        }
    }
}

/// A benchmark function rescaled so that fitness 1 marks the target value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledLandscape {
    pub benchmark: Benchmark,
    pub objective: Objective,
    pub f_star: f64,
    pub scale: f64,
    pub eps: f64,
    pub bound: f64,
    pub optima: Vec<[f64; 2]>,
}

impl RescaledLandscape {
    pub fn new(benchmark: Benchmark, objective: Objective, opts: &LandscapeOptions) -> Result<Self> {
        if !(opts.bound > 0.0) {
            return Err(param(format!("landscape bound must be positive, got {}", opts.bound)));
        }
        if !(opts.eps > 0.0) {
            return Err(param(format!("landscape eps must be positive, got {}", opts.eps)));
        }
        let f_star = target_value_with(benchmark, objective, opts.bound, opts.max_target);
        let optima = benchmark.optima_with(objective, opts.bound, opts.max_target);
        let scale = match opts.scale_override {
            Some(s) if s > 0.0 => s,
            Some(s) => return Err(param(format!("scale_override must be positive, got {s}"))),
            None => local_scale(benchmark, &optima, opts)?,
        };
        Ok(RescaledLandscape {
            benchmark,
            objective,
            f_star,
            scale,
            eps: opts.eps,
            bound: opts.bound,
            optima,
        })
    }

    /// Landscape with the benchmark's default objective and default options.
    pub fn standard(benchmark: Benchmark) -> Result<Self> {
        Self::new(benchmark, benchmark.default_objective(), &LandscapeOptions::default())
    }

    pub fn raw(&self, p: [f64; 2]) -> f64 {
        self.benchmark.eval(p)
    }

    pub fn rescale(&self, raw: f64) -> f64 {
        let r = (raw - self.f_star) / self.scale;
        self.eps / (self.eps + r * r)
    }

    pub fn fitness(&self, p: [f64; 2]) -> f64 {
        self.rescale(self.raw(p))
    }
}

/// Standard deviation of raw f over uniform samples in balls around each optimum, averaged.
fn local_scale(benchmark: Benchmark, optima: &[[f64; 2]], opts: &LandscapeOptions) -> Result<f64> {
    if opts.scale_samples < 2 || !(opts.scale_radius > 0.0) {
        return Err(param("scale estimation needs >= 2 samples and a positive radius"));
    }
    let mut rng = stream_rng(opts.scale_seed, Stream::LandscapeScale);
    let mut total = 0.0;
    for c in optima {
        let values: Vec<f64> = (0..opts.scale_samples)
            .map(|_| {
                let r = opts.scale_radius * rng.gen::<f64>().sqrt();
                let phi = 2.0 * PI * rng.gen::<f64>();
                benchmark.eval([c[0] + r * phi.cos(), c[1] + r * phi.sin()])
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        total += var.sqrt();
    }
    let s = total / optima.len() as f64;
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(param(format!("estimated scale for {benchmark} is not positive")))
    }
}

impl FitnessEvaluator for RescaledLandscape {
    fn dim(&self) -> usize {
        2
    }

    fn objective(&self) -> Objective {
        self.objective
    }

    fn evaluate(&self, x: &[f64], _episode_seed: u64) -> std::result::Result<Evaluation, String> {
        let p = as_point(x)?;
        let raw = self.raw(p);
        Ok(Evaluation { raw, fitness: self.rescale(raw), descriptor: None })
    }

    fn name(&self) -> String {
        self.benchmark.name().to_string()
    }
}

/// The two-peaks mixture; fitness is the density divided by its value at a peak.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwoPeaks;

impl TwoPeaks {
    pub fn peak_value() -> f64 {
        two_peaks(TWO_PEAKS_CENTERS[0])
    }
}

impl FitnessEvaluator for TwoPeaks {
    fn dim(&self) -> usize {
        2
    }

    fn objective(&self) -> Objective {
        Objective::Maximize
    }

    fn evaluate(&self, x: &[f64], _episode_seed: u64) -> std::result::Result<Evaluation, String> {
        let raw = two_peaks(as_point(x)?);
        Ok(Evaluation { raw, fitness: (raw / Self::peak_value()).min(1.0), descriptor: None })
    }

    fn name(&self) -> String {
        "two_peaks".into()
    }
}

fn as_point(x: &[f64]) -> std::result::Result<[f64; 2], String> {
    match x {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected a 2-vector, got length {}", x.len())),
    }
}

/// Monotone map g from `[0, 1]` fitness to an unnormalized density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensityMap {
    Identity,
    Power { k: f64 },
    Exponential { temperature: f64 },
}

impl Default for DensityMap {
    fn default() -> Self {
        DensityMap::Identity
    }
}

impl DensityMap {
    pub fn apply(&self, fitness: f64) -> f64 {
        match *self {
            DensityMap::Identity => fitness,
            DensityMap::Power { k } => fitness.max(0.0).powf(k),
            DensityMap::Exponential { temperature } => (fitness / temperature).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DensityMap::Identity => Ok(()),
            DensityMap::Power { k } if k > 0.0 && k.is_finite() => Ok(()),
            DensityMap::Exponential { temperature } if temperature > 0.0 && temperature.is_finite() => {
                Ok(())
            }
            other => Err(param(format!("invalid density map {other}"))),
        }
    }
}

/// `g(F)`.
pub fn density(g: &DensityMap, fitness: f64) -> f64 {
    g.apply(fitness)
}

impl FromStr for DensityMap {
    type Err = Error;

    /// `identity`, `power:<k>` or `exp:<temperature>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || param(format!("unknown density map `{s}`"));
        let map = match s.split_once(':') {
            None if s == "identity" => DensityMap::Identity,
            Some(("power", k)) => DensityMap::Power { k: k.parse().map_err(|_| bad())? },
            Some(("exp", t)) => DensityMap::Exponential { temperature: t.parse().map_err(|_| bad())? },
            _ => return Err(bad()),
        };
        map.validate()?;
        Ok(map)
    }
}

impl fmt::Display for DensityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityMap::Identity => f.write_str("identity"),
            DensityMap::Power { k } => write!(f, "power:{k}"),
            DensityMap::Exponential { temperature } => write!(f, "exp:{temperature}"),
        }
    }
}
