//! Elite selection, grid entropy and per-run summaries.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::evolve::{EvolutionResult, Population};
use crate::landscape::RescaledLandscape;

pub const DEFAULT_ELITES: usize = 64;
pub const DEFAULT_CELLS: usize = 80;

/// Indices of the `k` highest-fitness members, best first; ties go to the lower index.
pub fn select_elites(fitness: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > fitness.len() {
        return Err(param(format!("cannot select {k} elites from {} individuals", fitness.len())));
    }
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Square occupancy grid over `[-bound, bound]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyGrid {
    pub bound: f64,
    pub cells_per_side: usize,
}

impl Default for EntropyGrid {
    fn default() -> Self {
        EntropyGrid { bound: 4.0, cells_per_side: DEFAULT_CELLS }
    }
}

impl EntropyGrid {
    /// Cell of `p`; points outside the box land in the nearest edge cell.
    pub fn cell(&self, p: [f64; 2]) -> (usize, usize) {
        let n = self.cells_per_side;
        let index = |v: f64| {
            let u = ((v + self.bound) / (2.0 * self.bound) * n as f64).floor();
            if u.is_nan() {
                0
            } else {
                u.clamp(0.0, (n - 1) as f64) as usize
            }
        };
        (index(p[0]), index(p[1]))
    }

    pub fn counts(&self, points: &[[f64; 2]]) -> Vec<u64> {
        let n = self.cells_per_side;
        let mut counts = vec![0u64; n * n];
        for p in points {
            let (i, j) = self.cell(*p);
            counts[i * n + j] += 1;
        }
        counts
    }
}

/// Shannon entropy in bits, `-Σ P_i log₂ P_i`, of the grid occupancy of `points`.
pub fn grid_entropy(points: &[[f64; 2]], grid: &EntropyGrid) -> Result<f64> {
    if points.is_empty() {
        return Err(param("grid entropy needs at least one point"));
    }
    if grid.cells_per_side == 0 || !(grid.bound > 0.0) {
        return Err(param("grid needs a positive bound and at least one cell"));
    }
    let total = points.len() as f64;
    let h = grid
        .counts(points)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Elite fitness and entropy of one benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub benchmark: String,
    pub seed: u64,
    pub mean_elite_fitness: f64,
    pub entropy_bits: f64,
    pub evaluations: usize,
    pub wall_ms: u64,
}

impl RunSummary {
    pub const COLUMNS: [&'static str; 6] =
        ["benchmark", "seed", "mean_elite_fitness", "entropy_bits", "evaluations", "wall_ms"];

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.benchmark, self.seed, self.mean_elite_fitness, self.entropy_bits, self.evaluations, self.wall_ms
        )
    }
}

/// Elite statistics of a 2-D population on a rescaled landscape.
///
/// Returns `(mean elite fitness, entropy bits, elite points)`.
pub fn elite_statistics(
    population: &Population,
    landscape: &RescaledLandscape,
    k: usize,
    grid: &EntropyGrid,
) -> Result<(f64, f64, Vec<[f64; 2]>)> {
    if population.dim() != 2 {
        return Err(param("elite statistics need a 2-D population"));
    }
    let points: Vec<[f64; 2]> = population.rows().map(|r| [r[0], r[1]]).collect();
    let fitness: Vec<f64> = points.iter().map(|p| landscape.fitness(*p)).collect();
    let elites = select_elites(&fitness, k)?;
    let mean = elites.iter().map(|&i| fitness[i]).sum::<f64>() / k.max(1) as f64;
    let elite_points: Vec<[f64; 2]> = elites.iter().map(|&i| points[i]).collect();
    let entropy = grid_entropy(&elite_points, grid)?;
    Ok((mean, entropy, elite_points))
}

/// Summarizes a finished benchmark run from its final (t = 1) population.
pub fn summarize_run(
    result: &EvolutionResult,
    landscape: &RescaledLandscape,
    k: usize,
    grid: &EntropyGrid,
    wall_ms: u64,
) -> Result<RunSummary> {
    let (mean, entropy, _) = elite_statistics(&result.population, landscape, k, grid)?;
    Ok(RunSummary {
        benchmark: landscape.benchmark.name().to_string(),
        seed: result.trace.seed,
        mean_elite_fitness: mean,
        entropy_bits: entropy,
        evaluations: result.trace.evaluations,
        wall_ms,
    })
}

/// Per-benchmark means over a batch of rows, in first-seen order.
pub fn aggregate(rows: &[RunSummary]) -> Vec<(String, f64, f64, usize)> {
    let mut out: Vec<(String, f64, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(b, ..)| *b == r.benchmark) {
            Some(entry) => {
                entry.1 += r.entropy_bits;
                entry.2 += r.mean_elite_fitness;
                entry.3 += 1;
            }
            None => out.push((r.benchmark.clone(), r.entropy_bits, r.mean_elite_fitness, 1)),
        }
    }
    for entry in &mut out {
        entry.1 /= entry.3 as f64;
        entry.2 /= entry.3 as f64;
    }
    out
}
