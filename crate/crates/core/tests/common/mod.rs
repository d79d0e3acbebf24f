//! Property checks shared by the property suite and the acceptance report.
//!
//! Each check returns `Err(description)` on the first violation.
#![allow(dead_code)]

use diffevo::cartpole::{param_count, DEEP_ARCH, SMALL_ARCH};
use diffevo::landscape::TWO_PEAKS_CENTERS;
use diffevo::latent::{latent_evolve_with, Projection};
use diffevo::metrics::{grid_entropy, EntropyGrid};
use diffevo::schedule::DEFAULT_CLAMP_EPS;
use diffevo::{
    ddim_step, estimate_noise, estimate_origin, evolve, Benchmark, DensityMap, EvolutionResult,
    EvolveOptions, Population, RescaledLandscape, Schedule, TraceLevel,
};
use diffevo::landscape::TwoPeaks;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn two_peaks_run(seed: u64, population: usize, steps: usize) -> EvolutionResult {
    let schedule = Schedule::linear(steps, 0.1, DEFAULT_CLAMP_EPS).unwrap();
    let opts = EvolveOptions { population, seed, trace: TraceLevel::Full, ..Default::default() };
    evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &opts).unwrap()
}

fn benchmark_run(benchmark: Benchmark, seed: u64) -> EvolutionResult {
    let landscape = RescaledLandscape::standard(benchmark).unwrap();
    let schedule = Schedule::cosine(25, 1.0, DEFAULT_CLAMP_EPS).unwrap();
    let opts = EvolveOptions { population: 128, seed, trace: TraceLevel::Full, ..Default::default() };
    evolve(&landscape, &DensityMap::Power { k: 8.0 }, &schedule, &opts).unwrap()
}

/// Every recorded origin lies inside the per-coordinate range of the evaluated population.
pub fn origins_in_hull(result: &EvolutionResult) -> Check {
    let d = result.trace.dim;
    for g in &result.trace.generations {
        let (Some(pop), Some(origins)) = (&g.population, &g.origins) else { continue };
        for j in 0..d {
            let col = pop.iter().skip(j).step_by(d);
            let lo = col.clone().copied().fold(f64::INFINITY, f64::min);
            let hi = col.copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            for (i, o) in origins.iter().skip(j).step_by(d).enumerate() {
                if *o < lo - slack || *o > hi + slack {
                    return Err(format!("step {} member {i} coord {j}: {o} outside [{lo}, {hi}]", g.step));
                }
            }
        }
    }
    Ok(())
}

pub fn convex_hull() -> Check {
    for seed in 0..3 {
        origins_in_hull(&two_peaks_run(seed, 256, 25))?;
        for b in Benchmark::ALL {
            origins_in_hull(&benchmark_run(b, seed))?;
        }
    }
    Ok(())
}

fn random_population(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Population {
    let members = (0..n * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let q = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    Population::new(2, d, members).unwrap().with_fitness(q).unwrap()
}

/// `√α x̂₀ + √(1-α) ε̂` returns `x_t` to 1e-10 relative error.
pub fn reconstruction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let d = rng.gen_range(1..6);
        let pop = random_population(&mut rng, 32, d);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let alpha = rng.gen_range(0.01..0.99);
        let est = estimate_origin(&x, &pop, alpha).map_err(|e| e.to_string())?;
        let eps = estimate_noise(&x, &est.x0_hat, alpha).map_err(|e| e.to_string())?;
        for j in 0..d {
            let back = alpha.sqrt() * est.x0_hat[j] + (1.0 - alpha).sqrt() * eps[j];
            let rel = (back - x[j]).abs() / x[j].abs().max(1.0);
            if rel > 1e-10 {
                return Err(format!("reconstruction error {rel:e} at alpha {alpha}"));
            }
        }
    }
    Ok(())
}

/// With α_{t-1} = α_t and σ = 0 the update returns `x_t` to 1e-12.
pub fn ddim_fixed_point() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let d = rng.gen_range(1..6);
        let pop = random_population(&mut rng, 32, d);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let alpha = rng.gen_range(0.01..0.99);
        let est = estimate_origin(&x, &pop, alpha).map_err(|e| e.to_string())?;
        let eps = estimate_noise(&x, &est.x0_hat, alpha).map_err(|e| e.to_string())?;
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let next = ddim_step(&x, &est.x0_hat, &eps, alpha, 0.0, &w).map_err(|e| e.to_string())?;
        for j in 0..d {
            if (next[j] - x[j]).abs() > 1e-12 {
                return Err(format!("fixed point moved by {:e}", (next[j] - x[j]).abs()));
            }
        }
    }
    Ok(())
}

/// Scaling every `Q_i` by a positive constant leaves x̂₀ unchanged to 1e-10.
pub fn q_scale_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let d = rng.gen_range(1..6);
        let pop = random_population(&mut rng, 32, d);
        let c = 10f64.powf(rng.gen_range(-6.0..6.0));
        let scaled_q = pop.fitness().unwrap().iter().map(|q| q * c).collect();
        let scaled = pop.clone().with_fitness(scaled_q).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let alpha = rng.gen_range(0.01..0.99);
        let a = estimate_origin(&x, &pop, alpha).map_err(|e| e.to_string())?;
        let b = estimate_origin(&x, &scaled, alpha).map_err(|e| e.to_string())?;
        for j in 0..d {
            let diff = (a.x0_hat[j] - b.x0_hat[j]).abs();
            if diff > 1e-10 * a.x0_hat[j].abs().max(1.0) {
                return Err(format!("x0_hat changed by {diff:e} under Q scale {c:e}"));
            }
        }
    }
    Ok(())
}

pub fn schedule_invariants() -> Check {
    for t in 2..=200 {
        for sigma_scale in [0.0, 0.1, 0.5, 1.0] {
            let built = [
                Schedule::linear(t, sigma_scale, DEFAULT_CLAMP_EPS),
                Schedule::cosine(t, sigma_scale, DEFAULT_CLAMP_EPS),
                Schedule::ddpm(t, diffevo::schedule::DEFAULT_DDPM_EPS, sigma_scale),
            ];
            for s in built {
                let s = s.map_err(|e| format!("T = {t}: {e}"))?;
                s.check_invariants().map_err(|e| format!("{} T = {t}: {e}", s.kind().name()))?;
                if s.alphas().len() != t + 1 || s.sigmas().len() != t {
                    return Err(format!("T = {t}: wrong sequence lengths"));
                }
            }
        }
    }
    Ok(())
}

/// d = D with E = I reproduces the ambient run bit for bit.
pub fn latent_reduction() -> Check {
    let schedule = Schedule::linear(25, 0.1, DEFAULT_CLAMP_EPS).unwrap();
    for seed in 0..3 {
        let opts = EvolveOptions { population: 256, seed, trace: TraceLevel::Full, ..Default::default() };
        let ambient = evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &opts).unwrap();
        let latent =
            latent_evolve_with(&TwoPeaks, &DensityMap::Identity, &schedule, &opts, &Projection::identity(2)).unwrap();
        if ambient.population != latent.population {
            return Err(format!("seed {seed}: final populations differ"));
        }
        for (a, l) in ambient.trace.generations.iter().zip(&latent.trace.generations) {
            if a.population != l.population || a.origins != l.origins || a.fitness != l.fitness {
                return Err(format!("seed {seed}: generation at step {} differs", a.step));
            }
        }
    }
    Ok(())
}

pub fn entropy_bounds() -> Check {
    let grid = EntropyGrid::default();
    let same = vec![[0.3, -0.2]; 64];
    let h0 = grid_entropy(&same, &grid).map_err(|e| e.to_string())?;
    if h0 != 0.0 {
        return Err(format!("identical points give {h0} bits"));
    }
    // 64 distinct cells, one point each.
    let spread: Vec<[f64; 2]> = (0..64).map(|i| [-3.95 + 0.1 * (i % 8) as f64, -3.95 + 0.1 * (i / 8) as f64]).collect();
    let h6 = grid_entropy(&spread, &grid).map_err(|e| e.to_string())?;
    if (h6 - 6.0).abs() > 1e-12 {
        return Err(format!("64 distinct cells give {h6} bits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let n = rng.gen_range(1..=64);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]).collect();
        let h = grid_entropy(&pts, &grid).map_err(|e| e.to_string())?;
        if !(0.0..=6.0 + 1e-12).contains(&h) {
            return Err(format!("{n} points give {h} bits"));
        }
    }
    Ok(())
}

pub fn parameter_counts() -> Check {
    let small = param_count(&SMALL_ARCH);
    let deep = param_count(&DEEP_ARCH);
    if small == 58 && deep == 17_410 {
        Ok(())
    } else {
        Err(format!("parameter counts {small} and {deep}"))
    }
}

pub fn evaluation_count() -> Check {
    for (n, t) in [(1, 2), (7, 3), (64, 10), (512, 25)] {
        let schedule = Schedule::cosine(t, 1.0, DEFAULT_CLAMP_EPS).unwrap();
        let opts = EvolveOptions { population: n, seed: 3, ..Default::default() };
        let r = evolve(&TwoPeaks, &DensityMap::Identity, &schedule, &opts).unwrap();
        if r.trace.evaluations != n * (t - 1) || r.trace.generations.len() != t - 1 {
            return Err(format!("N = {n}, T = {t}: {} evaluations", r.trace.evaluations));
        }
    }
    Ok(())
}

/// Mean distance from each origin estimate to its nearer peak, per generation.
pub fn origin_peak_distances(result: &EvolutionResult) -> Vec<f64> {
    result
        .trace
        .generations
        .iter()
        .filter_map(|g| g.origins.as_ref())
        .map(|o| {
            let n = o.len() / 2;
            o.chunks_exact(2)
                .map(|p| {
                    TWO_PEAKS_CENTERS
                        .iter()
                        .map(|c| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// The acceptance property suite, in report order.
pub fn suite() -> Vec<(&'static str, Check)> {
    vec![
        ("convex hull of x0_hat", convex_hull()),
        ("reconstruction identity", reconstruction()),
        ("DDIM fixed point", ddim_fixed_point()),
        ("Q-scale invariance", q_scale_invariance()),
        ("schedule invariants T in [2, 200]", schedule_invariants()),
        ("latent reduction d = D, E = I", latent_reduction()),
        ("entropy bounds", entropy_bounds()),
        ("parameter counts", parameter_counts()),
        ("evaluation count", evaluation_count()),
    ]
}
