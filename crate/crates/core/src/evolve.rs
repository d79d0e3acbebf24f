//! The Diffusion Evolution generation loop and its building blocks.
//!
//! For an individual `x_t` the origin estimate is the kernel-weighted average
//!
//! ```text
//! x̂₀ = Σ_j w_j x_j,   w_j ∝ Q_j · exp(-‖x_t - √α_t x_j‖² / (2 (1 - α_t)))
//! ```
//!
//! over the current population, where `Q_j = g(fitness_j)`. The isotropic Gaussian
//! normalizing constant is the same for every term and is omitted; the reported normalizer
//! is `Z = Σ_j Q_j exp(-‖x_t - √α_t x_j‖² / (2 (1 - α_t)))` under that convention.
//! Weights are evaluated in log space with max-subtraction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::landscape::{DensityMap, FitnessEvaluator};
use crate::latent::Projection;
use crate::rng::{stream_rng, substream_seed, Stream};
use crate::schedule::Schedule;

/// One generation of N individuals in D dimensions, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    step: usize,
    dim: usize,
    members: Vec<f64>,
    fitness: Option<Vec<f64>>,
}

impl Population {
    pub fn new(step: usize, dim: usize, members: Vec<f64>) -> Result<Self> {
        if dim == 0 || members.is_empty() || members.len() % dim != 0 {
            return Err(param(format!(
                "population needs N >= 1, D >= 1 and N*D entries (got {} entries for D = {dim})",
                members.len()
            )));
        }
        if let Some(pos) = members.iter().position(|v| !v.is_finite()) {
            return Err(param(format!("member {} has a non-finite entry", pos / dim)));
        }
        Ok(Population { step, dim, members, fitness: None })
    }

    /// Attaches the cached density weights `Q_i`.
    pub fn with_fitness(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: weights.len() });
        }
        if let Some(i) = weights.iter().position(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(param(format!("weight Q[{i}] = {} is not finite and non-negative", weights[i])));
        }
        self.fitness = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.members.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn member(&self, i: usize) -> &[f64] {
        &self.members[i * self.dim..(i + 1) * self.dim]
    }

    pub fn members(&self) -> &[f64] {
        &self.members
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.members.chunks_exact(self.dim)
    }

    pub fn fitness(&self) -> Option<&[f64]> {
        self.fitness.as_deref()
    }

    pub fn into_members(self) -> Vec<f64> {
        self.members
    }
}

/// Draws an N×D population of i.i.d. standard normals at diffusion step `step`.
pub fn init_population<R: Rng + ?Sized>(n: usize, dim: usize, step: usize, rng: &mut R) -> Result<Population> {
    if n == 0 || dim == 0 {
        return Err(param(format!("population needs N >= 1 and D >= 1, got {n}x{dim}")));
    }
    let members = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    Population::new(step, dim, members)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginEstimate {
    pub x0_hat: Vec<f64>,
    /// `ln Z` with the Gaussian constant omitted (see module docs).
    pub log_normalizer: f64,
    /// Shannon entropy (nats) of the normalized weights.
    pub weight_entropy: f64,
}

impl OriginEstimate {
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn log_weights(q: &[f64]) -> Vec<f64> {
    q.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// Normalized kernel weights of `query` against each row of `coords` (row width `k`).
///
/// Writes into `out` and returns `ln Z`, or `None` when every weight vanishes.
pub(crate) fn kernel_weights(
    query: &[f64],
    coords: &[f64],
    k: usize,
    log_q: &[f64],
    alpha: f64,
    out: &mut [f64],
) -> Option<f64> {
    let sqrt_alpha = alpha.sqrt();
    let inv_two_var = 1.0 / (2.0 * (1.0 - alpha));
    let mut max = f64::NEG_INFINITY;
    for ((row, lq), o) in coords.chunks_exact(k).zip(log_q).zip(out.iter_mut()) {
        let d2: f64 = query.iter().zip(row).map(|(a, b)| (a - sqrt_alpha * b).powi(2)).sum();
        let lw = lq - d2 * inv_two_var;
        *o = lw;
        if lw > max {
            max = lw;
        }
    }
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    Some(max + sum.ln())
}

fn weighted_origin(weights: &[f64], members: &[f64], dim: usize, log_z: f64) -> OriginEstimate {
    let mut x0 = vec![0.0; dim];
    let mut entropy = 0.0;
    for (w, row) in weights.iter().zip(members.chunks_exact(dim)) {
        if *w > 0.0 {
            entropy -= w * w.ln();
            for (acc, x) in x0.iter_mut().zip(row) {
                *acc += w * x;
            }
        }
    }
    OriginEstimate { x0_hat: x0, log_normalizer: log_z, weight_entropy: entropy }
}

/// Fitness-weighted estimate of the origin of `x_t` from the evaluated population.
///
/// Fails with [`Error::DegenerateWeights`] when every weight underflows; the evolution loop
/// handles that case by targeting the individual itself.
pub fn estimate_origin(x_t: &[f64], population: &Population, alpha_t: f64) -> Result<OriginEstimate> {
    check_alpha(alpha_t)?;
    let dim = population.dim();
    if x_t.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x_t.len() });
    }
    let q = population
        .fitness()
        .ok_or_else(|| param("population fitness has not been evaluated"))?;
    let mut w = vec![0.0; population.len()];
    let log_z = kernel_weights(x_t, population.members(), dim, &log_weights(q), alpha_t, &mut w)
        .ok_or(Error::DegenerateWeights)?;
    Ok(weighted_origin(&w, population.members(), dim, log_z))
}

/// Same estimate as [`estimate_origin`] but with kernel distances measured between
/// `query_coords` and the rows of `member_coords` (row width `k`), while the average is taken
/// over the full members.
pub(crate) fn estimate_origin_in(
    query_coords: &[f64],
    member_coords: &[f64],
    k: usize,
    population: &Population,
    alpha_t: f64,
) -> Result<OriginEstimate> {
    check_alpha(alpha_t)?;
    if query_coords.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: query_coords.len() });
    }
    if member_coords.len() != k * population.len() {
        return Err(Error::DimensionMismatch { expected: k * population.len(), got: member_coords.len() });
    }
    let q = population
        .fitness()
        .ok_or_else(|| param("population fitness has not been evaluated"))?;
    let mut w = vec![0.0; population.len()];
    let log_z = kernel_weights(query_coords, member_coords, k, &log_weights(q), alpha_t, &mut w)
        .ok_or(Error::DegenerateWeights)?;
    Ok(weighted_origin(&w, population.members(), population.dim(), log_z))
}

/// `ε̂ = (x_t - √α_t x̂₀) / √(1 - α_t)`.
pub fn estimate_noise(x_t: &[f64], x0_hat: &[f64], alpha_t: f64) -> Result<Vec<f64>> {
    check_alpha(alpha_t)?;
    if x0_hat.len() != x_t.len() {
        return Err(Error::DimensionMismatch { expected: x_t.len(), got: x0_hat.len() });
    }
    let sa = alpha_t.sqrt();
    let inv = 1.0 / (1.0 - alpha_t).sqrt();
    Ok(x_t.iter().zip(x0_hat).map(|(x, o)| (x - sa * o) * inv).collect())
}

/// `x_{t-1} = √α_{t-1} x̂₀ + √(1 - α_{t-1} - σ_t²) ε̂ + σ_t w`.
pub fn ddim_step(
    x_t: &[f64],
    x0_hat: &[f64],
    eps_hat: &[f64],
    alpha_prev: f64,
    sigma_t: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let d = x_t.len();
    for len in [x0_hat.len(), eps_hat.len(), noise.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, got: len });
        }
    }
    if !(sigma_t >= 0.0) || !(0.0..=1.0).contains(&alpha_prev) {
        return Err(Error::Domain(format!("need 0 <= alpha_prev <= 1 and sigma >= 0, got {alpha_prev}, {sigma_t}")));
    }
    let radicand = 1.0 - alpha_prev - sigma_t * sigma_t;
    if radicand < -1e-12 {
        return Err(Error::ScheduleViolation { radicand });
    }
    let c0 = alpha_prev.sqrt();
    let c1 = radicand.max(0.0).sqrt();
    Ok((0..d)
        .map(|j| c0 * x0_hat[j] + c1 * eps_hat[j] + sigma_t * noise[j])
        .collect())
}

/// Centre `x_t/√α_t` and radius `√((1-α_t)/α_t)` of the neighbourhood that dominates the
/// origin estimate of `x_t`. Diagnostic only.
pub fn neighbor_disc(x_t: &[f64], alpha_t: f64) -> Result<(Vec<f64>, f64)> {
    check_alpha(alpha_t)?;
    let sa = alpha_t.sqrt();
    Ok((x_t.iter().map(|x| x / sa).collect(), ((1.0 - alpha_t) / alpha_t).sqrt()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Fitness, descriptors and schedule values only.
    #[default]
    Stats,
    /// Additionally keeps every population, origin estimate and latent coordinate.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub population: usize,
    pub seed: u64,
    pub trace: TraceLevel,
    /// Also evaluate the final population and report its origin estimates.
    pub project_origin: bool,
    /// Evaluate the t = 1 population and append it to the trace as step 1.
    pub evaluate_final: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            population: 512,
            seed: 0,
            trace: TraceLevel::Stats,
            project_origin: false,
            evaluate_final: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub step: usize,
    pub alpha: f64,
    pub alpha_prev: f64,
    pub sigma: f64,
    pub raw_fitness: Vec<f64>,
    pub fitness: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub descriptors: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub population: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub origins: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latent: Option<Vec<f64>>,
    /// Individuals whose weights all vanished and that targeted themselves.
    pub degenerate: usize,
    pub mutation_stream: String,
    pub episode_stream: String,
}

impl GenerationRecord {
    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    pub fn best_raw(&self) -> f64 {
        self.raw_fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn median_raw(&self) -> f64 {
        median(&self.raw_fitness)
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub evaluator: String,
    pub seed: u64,
    pub population_size: usize,
    pub dim: usize,
    pub latent_dim: Option<usize>,
    pub schedule: String,
    pub steps: usize,
    pub generations: Vec<GenerationRecord>,
    /// Fitness evaluations made by the generation loop, always N·(T-1).
    pub evaluations: usize,
    /// Evaluations spent on the optional final origin projection.
    pub extra_evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    /// Population at t = 1.
    pub population: Population,
    pub trace: EvolutionTrace,
    /// Origin estimates of the t = 1 population, when requested.
    pub projected_origins: Option<Vec<f64>>,
}

/// Where kernel distances are measured.
#[derive(Clone, Copy)]
pub(crate) enum KernelSpace<'a> {
    Ambient,
    Latent(&'a Projection),
}

/// Runs Diffusion Evolution: t = T down to 2, returning the population at t = 1.
pub fn evolve(
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    schedule: &Schedule,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    run(evaluator, g, schedule, opts, KernelSpace::Ambient)
}

struct Evaluated {
    raw: Vec<f64>,
    fitness: Vec<f64>,
    weights: Vec<f64>,
    descriptors: Option<Vec<Vec<f64>>>,
}

fn evaluate_all(
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    members: &[f64],
    dim: usize,
    seed: u64,
    step: usize,
) -> Result<Evaluated> {
    let results: Vec<_> = members
        .par_chunks_exact(dim)
        .enumerate()
        .map(|(index, x)| {
            let episode = substream_seed(seed, Stream::Episode { step, index });
            evaluator
                .evaluate(x, episode)
                .map_err(|reason| Error::Evaluation { index, reason })
        })
        .collect();
    let n = results.len();
    let mut out = Evaluated {
        raw: Vec::with_capacity(n),
        fitness: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        descriptors: None,
    };
    let mut descriptors = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        let e = r?;
        let q = g.apply(e.fitness);
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::Evaluation { index, reason: format!("density weight {q} is invalid") });
        }
        out.raw.push(e.raw);
        out.fitness.push(e.fitness);
        out.weights.push(q);
        if let Some(d) = e.descriptor {
            descriptors.push(d);
        }
    }
    if descriptors.len() == n {
        out.descriptors = Some(descriptors);
    }
    Ok(out)
}

/// Origin estimates for every individual: `X̂₀ = W X` with row-normalized kernel weights W.
///
/// Rows whose weights all vanish become one-hot on the individual itself.
pub(crate) fn origins_for_all(
    coords: &[f64],
    k: usize,
    members: &[f64],
    dim: usize,
    q: &[f64],
    alpha: f64,
) -> (Vec<f64>, usize) {
    let n = q.len();
    let log_q = log_weights(q);
    let mut w = vec![0.0; n * n];
    let degenerate: usize = w
        .par_chunks_exact_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let query = &coords[i * k..(i + 1) * k];
            if kernel_weights(query, coords, k, &log_q, alpha, row).is_some() {
                0
            } else {
                row.fill(0.0);
                row[i] = 1.0;
                1
            }
        })
        .sum();
    let mut out = vec![0.0; n * dim];
    // SAFETY: all slices are row-major with the strides given, and sized n×n, n×dim, n×dim.
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            dim,
            1.0,
            w.as_ptr(),
            n as isize,
            1,
            members.as_ptr(),
            dim as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            dim as isize,
            1,
        );
    }
    (out, degenerate)
}

pub(crate) fn run(
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    schedule: &Schedule,
    opts: &EvolveOptions,
    space: KernelSpace<'_>,
) -> Result<EvolutionResult> {
    schedule.check_invariants()?;
    g.validate()?;
    let n = opts.population;
    let dim = evaluator.dim();
    if n == 0 || dim == 0 {
        return Err(param(format!("population needs N >= 1 and D >= 1, got {n}x{dim}")));
    }
    let latent_dim = match space {
        KernelSpace::Ambient => None,
        KernelSpace::Latent(p) => {
            if p.ambient_dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.ambient_dim() });
            }
            Some(p.latent_dim())
        }
    };
    let steps = schedule.steps();
    let seed = opts.seed;
    let mut rng = stream_rng(seed, Stream::Init);
    let mut members = init_population(n, dim, steps, &mut rng)?.into_members();

    let mut trace = EvolutionTrace {
        evaluator: evaluator.name(),
        seed,
        population_size: n,
        dim,
        latent_dim,
        schedule: schedule.kind().name().to_string(),
        steps,
        generations: Vec::with_capacity(steps - 1),
        evaluations: 0,
        extra_evaluations: 0,
    };

    for t in (2..=steps).rev() {
        let alpha = schedule.alpha(t);
        let alpha_prev = schedule.alpha(t - 1);
        let sigma = schedule.sigma(t);
        let evaluated = evaluate_all(evaluator, g, &members, dim, seed, t)?;
        trace.evaluations += n;

        let projected = match space {
            KernelSpace::Ambient => None,
            KernelSpace::Latent(p) => Some(p.project_all(&members)),
        };
        let (coords, k) = match &projected {
            None => (&members[..], dim),
            Some(z) => (&z[..], latent_dim.unwrap_or(dim)),
        };
        let (origins, degenerate) = origins_for_all(coords, k, &members, dim, &evaluated.weights, alpha);

        let sa = alpha.sqrt();
        let inv_noise = 1.0 / (1.0 - alpha).sqrt();
        let c0 = alpha_prev.sqrt();
        let radicand = 1.0 - alpha_prev - sigma * sigma;
        if radicand < -1e-12 {
            return Err(Error::ScheduleViolation { radicand });
        }
        let c1 = radicand.max(0.0).sqrt();
        let mut next = vec![0.0; n * dim];
        next.par_chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, out)| {
                let mut noise_rng = stream_rng(seed, Stream::Mutation { step: t, index: i });
                let x = &members[i * dim..(i + 1) * dim];
                let x0 = &origins[i * dim..(i + 1) * dim];
                for j in 0..dim {
                    let eps_hat = (x[j] - sa * x0[j]) * inv_noise;
                    let w: f64 = noise_rng.sample(StandardNormal);
                    out[j] = c0 * x0[j] + c1 * eps_hat + sigma * w;
                }
            });
        if let Some(pos) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("member {} became non-finite at step {t}", pos / dim)));
        }

        let full = opts.trace == TraceLevel::Full;
        trace.generations.push(GenerationRecord {
            step: t,
            alpha,
            alpha_prev,
            sigma,
            raw_fitness: evaluated.raw,
            fitness: evaluated.fitness,
            descriptors: evaluated.descriptors,
            population: full.then(|| members.clone()),
            origins: full.then_some(origins),
            latent: if full { projected } else { None },
            degenerate,
            mutation_stream: format!("mutation[{t}][0..{n}]"),
            episode_stream: format!("episodes[{t}][0..{n}]"),
        });
        members = next;
    }

    let mut projected_origins = None;
    if opts.project_origin || opts.evaluate_final {
        let evaluated = evaluate_all(evaluator, g, &members, dim, seed, 1)?;
        trace.extra_evaluations += n;
        let alpha = schedule.alpha(1);
        let projected = match space {
            KernelSpace::Ambient => None,
            KernelSpace::Latent(p) => Some(p.project_all(&members)),
        };
        let mut degenerate = 0;
        if opts.project_origin {
            let (coords, k) = match &projected {
                None => (&members[..], dim),
                Some(z) => (&z[..], latent_dim.unwrap_or(dim)),
            };
            let (origins, d) = origins_for_all(coords, k, &members, dim, &evaluated.weights, alpha);
            degenerate = d;
            projected_origins = Some(origins);
        }
        if opts.evaluate_final {
            let full = opts.trace == TraceLevel::Full;
            trace.generations.push(GenerationRecord {
                step: 1,
                alpha,
                alpha_prev: schedule.alpha(0),
                sigma: 0.0,
                raw_fitness: evaluated.raw,
                fitness: evaluated.fitness,
                descriptors: evaluated.descriptors,
                population: full.then(|| members.clone()),
                origins: if full { projected_origins.clone() } else { None },
                latent: if full { projected } else { None },
                degenerate,
                mutation_stream: String::new(),
                episode_stream: format!("episodes[1][0..{n}]"),
            });
        }
    }

    Ok(EvolutionResult { population: Population::new(1, dim, members)?, trace, projected_origins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{Evaluation, Objective, TwoPeaks};
    use crate::schedule::DEFAULT_CLAMP_EPS;

    fn pop(dim: usize, members: Vec<f64>, q: Vec<f64>) -> Population {
        Population::new(5, dim, members).unwrap().with_fitness(q).unwrap()
    }

    #[test]
    fn population_validation() {
        assert!(Population::new(0, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Population::new(0, 0, vec![]).is_err());
        assert!(Population::new(0, 1, vec![f64::NAN]).is_err());
        let p = Population::new(0, 2, vec![1.0, 2.0]).unwrap();
        assert!(p.clone().with_fitness(vec![-1.0]).is_err());
        assert!(p.with_fitness(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn init_shapes_and_determinism() {
        let one = init_population(1, 1, 10, &mut stream_rng(3, Stream::Init)).unwrap();
        assert_eq!((one.len(), one.dim()), (1, 1));
        let a = init_population(512, 2, 25, &mut stream_rng(9, Stream::Init)).unwrap();
        let b = init_population(512, 2, 25, &mut stream_rng(9, Stream::Init)).unwrap();
        assert_eq!(a, b);
        for j in 0..2 {
            let mean: f64 = a.rows().map(|r| r[j]).sum::<f64>() / 512.0;
            assert!(mean.abs() < 0.15, "coordinate {j} mean {mean}");
        }
        assert!(init_population(0, 2, 1, &mut stream_rng(0, Stream::Init)).is_err());
    }

    #[test]
    fn single_member_origin_is_itself() {
        let p = pop(2, vec![0.3, -1.2], vec![0.001]);
        let est = estimate_origin(&[5.0, 5.0], &p, 0.4).unwrap();
        assert_eq!(est.x0_hat, vec![0.3, -1.2]);
        assert_eq!(est.weight_entropy, 0.0);
    }

    #[test]
    fn equidistant_query_gives_midpoint() {
        let p = pop(2, vec![0.0, 0.0, 2.0, 0.0], vec![1.0, 1.0]);
        let est = estimate_origin(&[0.5f64.sqrt(), 0.0], &p, 0.5).unwrap();
        assert!((est.x0_hat[0] - 1.0).abs() < 1e-12);
        assert!(est.x0_hat[1].abs() < 1e-12);
    }

    #[test]
    fn two_member_hand_computation() {
        // distances² to √α x_j: 0 and (√0.5·2)² = 2; variance term 2(1-α) = 1 → weights {1, e⁻²}
        let p = pop(2, vec![0.0, 0.0, 2.0, 0.0], vec![1.0, 1.0]);
        let est = estimate_origin(&[0.0, 0.0], &p, 0.5).unwrap();
        let e2 = (-2.0f64).exp();
        let oracle = 2.0 * e2 / (1.0 + e2);
        assert!((est.x0_hat[0] - oracle).abs() < 1e-12);
        assert!((est.x0_hat[0] - 0.23840).abs() < 1e-5);
        assert!((est.normalizer() - (1.0 + e2)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_error() {
        let p = pop(1, vec![1.0, 2.0], vec![0.0, 0.0]);
        assert!(matches!(estimate_origin(&[0.0], &p, 0.5), Err(Error::DegenerateWeights)));
        let unevaluated = Population::new(0, 1, vec![1.0]).unwrap();
        assert!(estimate_origin(&[0.0], &unevaluated, 0.5).is_err());
        assert!(estimate_origin(&[0.0, 1.0], &pop(1, vec![1.0], vec![1.0]), 0.5).is_err());
        assert!(estimate_origin(&[0.0], &pop(1, vec![1.0], vec![1.0]), 1.0).is_err());
    }

    #[test]
    fn far_query_does_not_underflow() {
        // Without log-space evaluation both kernels would be exp(-huge) = 0.
        let p = pop(1, vec![0.0, 1.0], vec![1.0, 1.0]);
        let est = estimate_origin(&[1e4], &p, 0.999).unwrap();
        assert!((est.x0_hat[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_examples() {
        let a: f64 = 0.64;
        let x = [1.0, -2.0];
        let eps = estimate_noise(&x, &[x[0] / a.sqrt(), x[1] / a.sqrt()], a).unwrap();
        assert!(eps.iter().all(|e| e.abs() < 1e-15));
        let eps = estimate_noise(&x, &[0.0, 0.0], a).unwrap();
        assert!((eps[0] - 1.0 / 0.6).abs() < 1e-15 && (eps[1] + 2.0 / 0.6).abs() < 1e-15);
        let eps = estimate_noise(&[1.0, 0.0], &[1.0, 1.0], 0.75).unwrap();
        let s = 0.75f64.sqrt();
        assert!((eps[0] - (1.0 - s) / 0.5).abs() < 1e-15);
        assert!((eps[0] - 0.26795).abs() < 1e-5);
        assert!((eps[1] + 1.73205).abs() < 1e-5);
    }

    #[test]
    fn ddim_step_examples() {
        let x = [0.7, -0.2];
        let x0 = [1.5, 0.4];
        let a = 0.6;
        let eps = estimate_noise(&x, &x0, a).unwrap();
        let same = ddim_step(&x, &x0, &eps, a, 0.0, &[9.0, 9.0]).unwrap();
        assert!((same[0] - x[0]).abs() < 1e-12 && (same[1] - x[1]).abs() < 1e-12);

        let close = ddim_step(&x, &x0, &eps, 1.0 - DEFAULT_CLAMP_EPS, 0.0, &[0.0, 0.0]).unwrap();
        assert!((close[0] - x0[0]).abs() < 0.02 && (close[1] - x0[1]).abs() < 0.02);

        // chained oracle through the noise estimate and the update
        let s5 = 0.5f64.sqrt();
        let eps_hat = (1.0 - s5 * 0.5) / s5;
        let eps = estimate_noise(&[1.0, 0.0], &[0.5, 0.0], 0.5).unwrap();
        assert!((eps[0] - eps_hat).abs() < 1e-15);
        let next = ddim_step(&[1.0, 0.0], &[0.5, 0.0], &eps, 0.8, 0.2, &[1.0, 1.0]).unwrap();
        let expected0 = 0.8f64.sqrt() * 0.5 + 0.16f64.sqrt() * eps_hat + 0.2;
        assert!((next[0] - expected0).abs() < 1e-14);
        assert!((next[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn ddim_step_rejects_negative_radicand() {
        let r = ddim_step(&[1.0], &[1.0], &[0.0], 0.9, 0.5, &[0.0]);
        assert!(matches!(r, Err(Error::ScheduleViolation { .. })));
        assert!(ddim_step(&[1.0], &[1.0, 2.0], &[0.0], 0.5, 0.1, &[0.0]).is_err());
    }

    #[test]
    fn neighbor_disc_examples() {
        let (c, r) = neighbor_disc(&[1.0, 1.0], 0.5).unwrap();
        assert!((c[0] - 2f64.sqrt()).abs() < 1e-15 && (c[1] - 2f64.sqrt()).abs() < 1e-15);
        assert!((r - 1.0).abs() < 1e-15);
        assert!((neighbor_disc(&[0.0], 0.2).unwrap().1 - 2.0).abs() < 1e-15);
        let (c, r) = neighbor_disc(&[3.0], 1.0 - 1e-12).unwrap();
        assert!(r < 1e-5 && (c[0] - 3.0).abs() < 1e-9);
        assert!(neighbor_disc(&[0.0], 0.0).is_err());
    }

    #[test]
    fn batch_origins_match_single_estimates() {
        let members: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64 / 3.0 - 1.5).collect();
        let q: Vec<f64> = (0..10).map(|i| 0.1 + (i % 4) as f64).collect();
        let p = pop(2, members.clone(), q.clone());
        let (batch, degenerate) = origins_for_all(&members, 2, &members, 2, &q, 0.3);
        assert_eq!(degenerate, 0);
        for i in 0..10 {
            let single = estimate_origin(p.member(i), &p, 0.3).unwrap();
            for j in 0..2 {
                assert!((single.x0_hat[j] - batch[i * 2 + j]).abs() < 1e-12);
            }
        }
    }

    struct Counting;

    impl FitnessEvaluator for Counting {
        fn dim(&self) -> usize {
            3
        }
        fn objective(&self) -> Objective {
            Objective::Maximize
        }
        fn evaluate(&self, x: &[f64], _seed: u64) -> std::result::Result<Evaluation, String> {
            let f = (-x.iter().map(|v| v * v).sum::<f64>()).exp();
            Ok(Evaluation { raw: f, fitness: f, descriptor: None })
        }
        fn name(&self) -> String {
            "counting".into()
        }
    }

    #[test]
    fn evaluation_count_is_n_times_t_minus_one() {
        let schedule = Schedule::cosine(7, 1.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: 13, seed: 4, ..Default::default() };
        let res = evolve(&Counting, &DensityMap::Identity, &schedule, &opts).unwrap();
        assert_eq!(res.trace.evaluations, 13 * 6);
        assert_eq!(res.trace.generations.len(), 6);
        assert_eq!(res.population.step(), 1);
        assert_eq!(res.population.len(), 13);
    }

    #[test]
    fn failing_evaluator_reports_index() {
        struct Picky;
        impl FitnessEvaluator for Picky {
            fn dim(&self) -> usize {
                1
            }
            fn objective(&self) -> Objective {
                Objective::Maximize
            }
            fn evaluate(&self, x: &[f64], _: u64) -> std::result::Result<Evaluation, String> {
                if x[0] > 1.0 {
                    Err("too large".into())
                } else {
                    Ok(Evaluation { raw: 1.0, fitness: 1.0, descriptor: None })
                }
            }
            fn name(&self) -> String {
                "picky".into()
            }
        }
        let schedule = Schedule::cosine(5, 1.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: 64, seed: 1, ..Default::default() };
        let err = evolve(&Picky, &DensityMap::Identity, &schedule, &opts).unwrap_err();
        match err {
            Error::Evaluation { index, .. } => assert!(index < 64),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn single_member_closed_form_recursion() {
        // N = 1, σ = 0: x̂₀ = x_t, so x_{t-1} = (√α_{t-1} + √(1-α_{t-1}) (1-√α_t)/√(1-α_t)) x_t.
        let schedule = Schedule::cosine(10, 0.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: 1, seed: 21, trace: TraceLevel::Full, ..Default::default() };
        let res = evolve(&Counting, &DensityMap::Identity, &schedule, &opts).unwrap();
        let mut x = res.trace.generations[0].population.clone().unwrap();
        for t in (2..=10).rev() {
            let (a, ap) = (schedule.alpha(t), schedule.alpha(t - 1));
            let factor = ap.sqrt() + (1.0 - ap).sqrt() * (1.0 - a.sqrt()) / (1.0 - a).sqrt();
            x.iter_mut().for_each(|v| *v *= factor);
        }
        for (got, want) in res.population.members().iter().zip(&x) {
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn project_origin_reports_final_estimates() {
        let schedule = Schedule::cosine(6, 1.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: 32, seed: 2, project_origin: true, ..Default::default() };
        let res = evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &opts).unwrap();
        let origins = res.projected_origins.unwrap();
        assert_eq!(origins.len(), 64);
        assert_eq!(res.trace.evaluations, 32 * 5);
        assert_eq!(res.trace.extra_evaluations, 32);
        assert_eq!(res.trace.generations.len(), 5);
    }

    #[test]
    fn evaluate_final_appends_step_one() {
        let schedule = Schedule::cosine(6, 1.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: 16, seed: 2, evaluate_final: true, ..Default::default() };
        let res = evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &opts).unwrap();
        let last = res.trace.generations.last().unwrap();
        assert_eq!((res.trace.generations.len(), last.step), (6, 1));
        assert_eq!(res.trace.evaluations, 16 * 5);
        assert_eq!(res.trace.extra_evaluations, 16);
        for (x, f) in res.population.rows().zip(&last.fitness) {
            assert_eq!(TwoPeaks.evaluate(x, 0).unwrap().fitness, *f);
        }
        let plain = EvolveOptions { evaluate_final: false, ..opts };
        let other = evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &plain).unwrap();
        assert_eq!(other.population, res.population);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
