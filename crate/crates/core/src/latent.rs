//! Latent-space kernel distances for high-dimensional genotypes.
//!
//! A frozen random matrix `E` (d×D, entries `N(0, 1/D)`) maps each genotype to `z = E x`.
//! Only the kernel distances of the origin estimate use `z`; the weighted average and the
//! DDIM update stay in the full parameter space.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::evolve::{estimate_origin_in, run, EvolutionResult, EvolveOptions, KernelSpace, OriginEstimate, Population};
use crate::landscape::{DensityMap, FitnessEvaluator};
use crate::rng::{stream_rng, Stream};
use crate::schedule::Schedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    latent_dim: usize,
    ambient_dim: usize,
    /// Row-major d×D.
    matrix: Vec<f64>,
    norm_preserving: bool,
}

/// Draws a d×D projection with i.i.d. `N(0, 1/D)` entries.
pub fn make_projection<R: Rng + ?Sized>(ambient_dim: usize, latent_dim: usize, rng: &mut R) -> Result<Projection> {
    Projection::sample(ambient_dim, latent_dim, false, rng)
}

impl Projection {
    /// `norm_preserving` switches the entry variance from `1/D` to `1/d`.
    pub fn sample<R: Rng + ?Sized>(
        ambient_dim: usize,
        latent_dim: usize,
        norm_preserving: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if latent_dim == 0 || latent_dim > ambient_dim {
            return Err(param(format!(
                "latent dimension must satisfy 1 <= d <= D, got d = {latent_dim}, D = {ambient_dim}"
            )));
        }
        let variance = if norm_preserving { 1.0 / latent_dim as f64 } else { 1.0 / ambient_dim as f64 };
        let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| param(e.to_string()))?;
        let matrix = (0..latent_dim * ambient_dim).map(|_| normal.sample(rng)).collect();
        Ok(Projection { latent_dim, ambient_dim, matrix, norm_preserving })
    }

    /// The projection drawn from the `projection` substream of `seed`.
    pub fn seeded(ambient_dim: usize, latent_dim: usize, norm_preserving: bool, seed: u64) -> Result<Self> {
        Self::sample(ambient_dim, latent_dim, norm_preserving, &mut stream_rng(seed, Stream::Projection))
    }

    /// Identity map (d = D); latent evolution then coincides with ambient evolution.
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Projection { latent_dim: dim, ambient_dim: dim, matrix, norm_preserving: false }
    }

    pub fn from_matrix(latent_dim: usize, ambient_dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if latent_dim == 0 || latent_dim > ambient_dim {
            return Err(param(format!("need 1 <= d <= D, got d = {latent_dim}, D = {ambient_dim}")));
        }
        if matrix.len() != latent_dim * ambient_dim {
            return Err(Error::DimensionMismatch { expected: latent_dim * ambient_dim, got: matrix.len() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(param("projection entries must be finite"));
        }
        Ok(Projection { latent_dim, ambient_dim, matrix, norm_preserving: false })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn is_norm_preserving(&self) -> bool {
        self.norm_preserving
    }

    /// `z = E x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: x.len() });
        }
        Ok(self.project_unchecked(x))
    }

    fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.ambient_dim)
            .map(|row| row.iter().zip(x).map(|(e, v)| e * v).sum())
            .collect()
    }

    /// Projects every row of a row-major N×D matrix.
    pub fn project_all(&self, members: &[f64]) -> Vec<f64> {
        members
            .chunks_exact(self.ambient_dim)
            .flat_map(|x| self.project_unchecked(x))
            .collect()
    }
}

/// Origin estimate of `x_t` with kernel distances between `z_t` and the projected members.
///
/// `projected` holds the projected members row-major (N×d).
pub fn latent_estimate_origin(
    x_t: &[f64],
    z_t: &[f64],
    population: &Population,
    projected: &[f64],
    alpha_t: f64,
) -> Result<OriginEstimate> {
    if x_t.len() != population.dim() {
        return Err(Error::DimensionMismatch { expected: population.dim(), got: x_t.len() });
    }
    estimate_origin_in(z_t, projected, z_t.len(), population, alpha_t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentOptions {
    pub dim: usize,
    pub norm_preserving: bool,
}

impl Default for LatentOptions {
    fn default() -> Self {
        LatentOptions { dim: 2, norm_preserving: false }
    }
}

/// Latent Space Diffusion Evolution with a projection drawn once from the run seed.
pub fn latent_evolve(
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    schedule: &Schedule,
    opts: &EvolveOptions,
    latent: &LatentOptions,
) -> Result<EvolutionResult> {
    let projection = Projection::seeded(evaluator.dim(), latent.dim, latent.norm_preserving, opts.seed)?;
    latent_evolve_with(evaluator, g, schedule, opts, &projection)
}

/// Latent Space Diffusion Evolution with a caller-supplied projection.
pub fn latent_evolve_with(
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    schedule: &Schedule,
    opts: &EvolveOptions,
    projection: &Projection,
) -> Result<EvolutionResult> {
    run(evaluator, g, schedule, opts, KernelSpace::Latent(projection))
}
