//! Batch runner for the three experiments.
//!
//! Runs execute in parallel on a pool of `workers` threads and return their artifacts in memory;
//! one writer then persists them in run order. Every path written lies under the output
//! directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cartpole::{write_genotype, CartPoleEvaluator};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evolve::{evolve, neighbor_disc, EvolutionResult, EvolveOptions};
use crate::landscape::{Benchmark, DensityMap, FitnessEvaluator, RescaledLandscape, TwoPeaks};
use crate::latent::{latent_evolve, LatentOptions, Projection};
use crate::metrics::{elite_statistics, select_elites};
use crate::schedule::Schedule;

/// Elites within this distance of an optimum count toward covering it.
pub const BASIN_RADIUS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub benchmark: String,
    pub mean_elite_fitness: f64,
    pub entropy_bits: f64,
    pub evaluations: usize,
    /// Optima with at least one elite within `BASIN_RADIUS`.
    pub optima_covered: usize,
    pub optima: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartpoleRow {
    pub preset: String,
    pub dim: usize,
    /// Best raw reward per generation, the last entry being the t = 1 population.
    pub best: Vec<f64>,
    pub median: Vec<f64>,
    pub evaluations: usize,
}

impl CartpoleRow {
    pub fn final_best(&self) -> f64 {
        self.best.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPeaksRow {
    /// Fraction of elites within `BASIN_RADIUS` of (1, 1) and of (-1, -1).
    pub elite_share: [f64; 2],
    /// k-means (k = 2) centres of the final population, ordered by x + y descending.
    pub centers: [[f64; 2]; 2],
    pub mean_elite_fitness: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunRow {
    Benchmark(BenchmarkRow),
    Cartpole(CartpoleRow),
    TwoPeaks(TwoPeaksRow),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub class: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub label: String,
    pub seed: u64,
    pub wall_ms: u64,
    pub trace: Option<String>,
    pub row: Option<RunRow>,
    pub failure: Option<RunFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    /// The resolved configuration in `key = value` form.
    pub config_text: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.failure.is_some()).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&RunRecord, &RunRow)> {
        self.runs.iter().filter_map(|r| r.row.as_ref().map(|row| (r, row)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Human-readable summary: `H (F)` per benchmark, curve medians for cart-pole, peak shares
    /// for two-peaks.
    pub fn table(&self) -> String {
        let mut out = String::new();
        match self.experiment {
            Experiment::Benchmark => {
                out.push_str(&format!("{:<12} {:>16} {:>6}\n", "benchmark", "H bits (F)", "runs"));
                let mut names: Vec<&str> = Vec::new();
                for (_, row) in self.rows() {
                    if let RunRow::Benchmark(b) = row {
                        if !names.contains(&b.benchmark.as_str()) {
                            names.push(&b.benchmark);
                        }
                    }
                }
                for name in names {
                    let rows: Vec<&BenchmarkRow> = self
                        .rows()
                        .filter_map(|(_, r)| match r {
                            RunRow::Benchmark(b) if b.benchmark == name => Some(b),
                            _ => None,
                        })
                        .collect();
                    let n = rows.len() as f64;
                    let h = rows.iter().map(|r| r.entropy_bits).sum::<f64>() / n;
                    let f = rows.iter().map(|r| r.mean_elite_fitness).sum::<f64>() / n;
                    out.push_str(&format!("{:<12} {:>16} {:>6}\n", name, format!("{h:.2} ({f:.2})"), rows.len()));
                }
            }
            Experiment::Cartpole => {
                let rows: Vec<&CartpoleRow> = self
                    .rows()
                    .filter_map(|(_, r)| match r {
                        RunRow::Cartpole(c) => Some(c),
                        _ => None,
                    })
                    .collect();
                if let Some(first) = rows.first() {
                    out.push_str(&format!("{} (D = {}), {} runs\n", first.preset, first.dim, rows.len()));
                    out.push_str("generation  median best  q25 best  median of medians\n");
                    for g in 0..first.best.len() {
                        let best: Vec<f64> = rows.iter().map(|r| r.best[g]).collect();
                        let med: Vec<f64> = rows.iter().map(|r| r.median[g]).collect();
                        out.push_str(&format!(
                            "{:>10}  {:>11.1}  {:>8.1}  {:>17.1}\n",
                            g + 1,
                            quantile(&best, 0.5),
                            quantile(&best, 0.25),
                            quantile(&med, 0.5)
                        ));
                    }
                }
            }
            Experiment::TwoPeaks => {
                let rows: Vec<&TwoPeaksRow> = self
                    .rows()
                    .filter_map(|(_, r)| match r {
                        RunRow::TwoPeaks(t) => Some(t),
                        _ => None,
                    })
                    .collect();
                let both = rows.iter().filter(|r| r.elite_share.iter().all(|s| *s >= 0.2)).count();
                out.push_str(&format!(
                    "two peaks: {} runs, both peaks hold >= 20% of elites in {}\n",
                    rows.len(),
                    both
                ));
            }
        }
        if self.failures() > 0 {
            out.push_str(&format!("{} run(s) failed; see manifest.json\n", self.failures()));
        }
        out
    }
}

/// Linear-interpolated quantile; NaN for an empty slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Everything one run produced, held until the writer persists it.
struct RunOutput {
    record: RunRecord,
    trace_lines: Vec<String>,
    extra: Extra,
}

enum Extra {
    None,
    Cartpole {
        terminal: Vec<String>,
        latent: Vec<String>,
        champion: Vec<f64>,
        layers: Vec<usize>,
    },
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Runs the configured experiment and writes its artifacts under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    match config.experiment {
        Experiment::Benchmark => run_benchmark_suite(config, out_dir),
        Experiment::Cartpole => run_cartpole(config, out_dir),
        Experiment::TwoPeaks => run_two_peaks(config, out_dir),
    }
}

struct Job {
    index: usize,
    label: String,
    seed: u64,
    benchmark: Option<Benchmark>,
}

fn jobs(config: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    match config.experiment {
        Experiment::Benchmark => {
            for &b in &config.landscape.names {
                for r in 0..config.repeats {
                    out.push(Job { index: out.len(), label: b.name().to_string(), seed: config.run_seed(r), benchmark: Some(b) });
                }
            }
        }
        Experiment::Cartpole => {
            let label = config.cartpole.preset.map_or_else(|| "cartpole".to_string(), |p| p.to_string());
            for r in 0..config.repeats {
                out.push(Job { index: r, label: label.clone(), seed: config.run_seed(r), benchmark: None });
            }
        }
        Experiment::TwoPeaks => {
            for r in 0..config.repeats {
                out.push(Job { index: r, label: "two_peaks".into(), seed: config.run_seed(r), benchmark: None });
            }
        }
    }
    out
}

fn execute(
    config: &ExperimentConfig,
    out_dir: &Path,
    run_one: impl Fn(&Job) -> Result<(RunRow, Vec<String>, Extra)> + Sync,
) -> Result<RunManifest> {
    config.validate()?;
    let started = now_ms();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let jobs = jobs(config);
    let outputs: Vec<RunOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let clock = Instant::now();
                let result = run_one(job);
                let wall_ms = clock.elapsed().as_millis() as u64;
                let mut record = RunRecord {
                    index: job.index,
                    label: job.label.clone(),
                    seed: job.seed,
                    wall_ms,
                    trace: None,
                    row: None,
                    failure: None,
                };
                match result {
                    Ok((row, trace_lines, extra)) => {
                        record.row = Some(row);
                        RunOutput { record, trace_lines, extra }
                    }
                    Err(e) => {
                        record.failure = Some(RunFailure { class: e.class().to_string(), message: e.to_string() });
                        RunOutput { record, trace_lines: Vec::new(), extra: Extra::None }
                    }
                }
            })
            .collect()
    });
    let mut manifest = RunManifest {
        version: crate::VERSION.to_string(),
        experiment: config.experiment,
        config: config.clone(),
        config_text: config.to_text(),
        started_unix_ms: started,
        finished_unix_ms: 0,
        runs: Vec::with_capacity(outputs.len()),
    };
    write_outputs(config, out_dir, outputs, &mut manifest)?;
    manifest.finished_unix_ms = now_ms();
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    if !header.is_empty() {
        writeln!(w, "{header}")?;
    }
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// The single writer: persists traces, tables and per-experiment files in run order.
fn write_outputs(
    config: &ExperimentConfig,
    out_dir: &Path,
    outputs: Vec<RunOutput>,
    manifest: &mut RunManifest,
) -> Result<()> {
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces)?;
    fs::write(out_dir.join("config.txt"), config.to_text())?;
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut terminal = Vec::new();
    let mut latent = Vec::new();
    for mut out in outputs {
        let rec = &mut out.record;
        if !out.trace_lines.is_empty() {
            let name = format!("{}_run{:03}.jsonl", rec.label, rec.index);
            write_lines(&traces.join(&name), "", &out.trace_lines)?;
            rec.trace = Some(format!("traces/{name}"));
        }
        let status = if rec.failure.is_some() { "failed" } else { "ok" };
        match &rec.row {
            Some(RunRow::Benchmark(b)) => summary.push(format!(
                "{},{},{},{},{},{},{},{}",
                rec.index, b.benchmark, rec.seed, b.mean_elite_fitness, b.entropy_bits, b.evaluations, b.optima_covered, status
            )),
            Some(RunRow::Cartpole(c)) => {
                summary.push(format!(
                    "{},{},{},{},{},{},{}",
                    rec.index, c.preset, rec.seed, c.dim, c.final_best(), c.evaluations, status
                ));
                for (g, (b, m)) in c.best.iter().zip(&c.median).enumerate() {
                    curves.push(format!("{},{},{},{b},{m}", rec.index, rec.seed, g + 1));
                }
            }
            Some(RunRow::TwoPeaks(t)) => summary.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                rec.index,
                rec.seed,
                t.elite_share[0],
                t.elite_share[1],
                t.centers[0][0],
                t.centers[0][1],
                t.centers[1][0],
                t.centers[1][1],
                t.mean_elite_fitness,
                status
            )),
            None => summary.push(format!("{},{},{},failed", rec.index, rec.label, rec.seed)),
        }
        if let Extra::Cartpole { terminal: t, latent: l, champion, layers } = out.extra {
            terminal.extend(t);
            latent.extend(l);
            let genotypes = out_dir.join("genotypes");
            fs::create_dir_all(&genotypes)?;
            write_genotype(&genotypes.join(format!("run{:03}.bin", rec.index)), &layers, &champion)?;
        }
        manifest.runs.push(out.record);
    }
    let header = match config.experiment {
        Experiment::Benchmark => {
            "run,benchmark,seed,mean_elite_fitness,entropy_bits,evaluations,optima_covered,status"
        }
        Experiment::Cartpole => "run,preset,seed,dim,final_best,evaluations,status",
        Experiment::TwoPeaks => {
            "run,seed,share_pos,share_neg,center0_x,center0_y,center1_x,center1_y,mean_elite_fitness,status"
        }
    };
    write_lines(&out_dir.join("summary.csv"), header, &summary)?;
    if config.experiment == Experiment::Cartpole {
        write_lines(&out_dir.join("curves.csv"), "run,seed,generation,best,median", &curves)?;
        write_lines(&out_dir.join("terminal_states.csv"), "run,generation,individual,theta,x,steps", &terminal)?;
        write_lines(&out_dir.join("latent_final.csv"), "run,individual,z0,z1,reward", &latent)?;
    }
    Ok(())
}

fn header_line(config: &ExperimentConfig, job: &Job, result: &EvolutionResult) -> String {
    json!({
        "record": "header",
        "version": crate::VERSION,
        "experiment": config.experiment,
        "run": job.index,
        "label": job.label,
        "seed": job.seed,
        "evaluator": result.trace.evaluator,
        "population": result.trace.population_size,
        "dim": result.trace.dim,
        "latent_dim": result.trace.latent_dim,
        "schedule": result.trace.schedule,
        "steps": result.trace.steps,
        "columns": {
            "step": "diffusion step t (counts down)",
            "alpha": "alpha_t, dimensionless",
            "alpha_prev": "alpha_{t-1}, dimensionless",
            "sigma": "sigma_t, dimensionless",
            "best_fitness": "max rescaled fitness in [0, 1]",
            "mean_fitness": "mean rescaled fitness in [0, 1]",
            "best_raw": "max raw objective value",
            "median_raw": "median raw objective value",
            "degenerate": "individuals whose kernel weights all vanished",
            "neighbor_radius": "sqrt((1 - alpha_t) / alpha_t), parameter units",
            "population": "row-major N x D positions (full traces only)",
            "origins": "row-major N x D origin estimates (full traces only)",
            "latent": "row-major N x d latent coordinates (full traces only)"
        }
    })
    .to_string()
}

fn generation_lines(result: &EvolutionResult) -> Result<Vec<String>> {
    let mut lines = Vec::with_capacity(result.trace.generations.len());
    for g in &result.trace.generations {
        let radius = if g.step >= 2 { neighbor_disc(&[0.0], g.alpha)?.1 } else { 0.0 };
        let mut rec = json!({
            "record": "generation",
            "step": g.step,
            "alpha": g.alpha,
            "alpha_prev": g.alpha_prev,
            "sigma": g.sigma,
            "best_fitness": g.best_fitness(),
            "mean_fitness": g.mean_fitness(),
            "best_raw": g.best_raw(),
            "median_raw": g.median_raw(),
            "degenerate": g.degenerate,
            "neighbor_radius": radius,
            "mutation_stream": g.mutation_stream,
            "episode_stream": g.episode_stream,
        });
        let obj = rec.as_object_mut().expect("object literal");
        if let Some(p) = &g.population {
            obj.insert("population".into(), json!(p));
        }
        if let Some(o) = &g.origins {
            obj.insert("origins".into(), json!(o));
        }
        if let Some(z) = &g.latent {
            obj.insert("latent".into(), json!(z));
        }
        lines.push(rec.to_string());
    }
    Ok(lines)
}

fn options(config: &ExperimentConfig, seed: u64, evaluate_final: bool) -> EvolveOptions {
    EvolveOptions {
        population: config.evolve.population,
        seed,
        trace: config.evolve.trace,
        project_origin: config.evolve.project_origin,
        evaluate_final,
    }
}

fn run_with(
    config: &ExperimentConfig,
    evaluator: &dyn FitnessEvaluator,
    g: &DensityMap,
    schedule: &Schedule,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if config.latent.enabled {
        let latent = LatentOptions { dim: config.latent.dim, norm_preserving: config.latent.norm_preserving };
        latent_evolve(evaluator, g, schedule, opts, &latent)
    } else {
        evolve(evaluator, g, schedule, opts)
    }
}

/// Number of `optima` with at least one of `points` within `BASIN_RADIUS`.
pub fn optima_covered(points: &[[f64; 2]], optima: &[[f64; 2]]) -> usize {
    optima
        .iter()
        .filter(|o| points.iter().any(|p| (p[0] - o[0]).hypot(p[1] - o[1]) <= BASIN_RADIUS))
        .count()
}

/// Five benchmarks × repeats, elite fitness and entropy of the t = 1 population (or its origin
/// estimates when `evolve.project_origin` is set).
pub fn run_benchmark_suite(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let schedule = config.schedule.build()?;
    execute(config, out_dir, |job| {
        let b = job.benchmark.expect("benchmark job");
        let landscape = RescaledLandscape::new(b, config.landscape.objective_for(b), &config.landscape.options(b))?;
        let result = run_with(config, &landscape, &config.density, &schedule, &options(config, job.seed, false))?;
        let population = match &result.projected_origins {
            Some(origins) => crate::evolve::Population::new(1, 2, origins.clone())?,
            None => result.population.clone(),
        };
        let grid = config.metrics.grid(config.landscape.bound);
        let (mean, entropy, elites) = elite_statistics(&population, &landscape, config.metrics.elites, &grid)?;
        let row = BenchmarkRow {
            benchmark: b.name().to_string(),
            mean_elite_fitness: mean,
            entropy_bits: entropy,
            evaluations: result.trace.evaluations,
            optima_covered: optima_covered(&elites, &landscape.optima),
            optima: landscape.optima.len(),
        };
        let mut lines = vec![header_line(config, job, &result)];
        lines.extend(generation_lines(&result)?);
        Ok((RunRow::Benchmark(row), lines, Extra::None))
    })
}

/// Cart-pole evolution; the t = 1 population is evaluated once more as the last generation.
pub fn run_cartpole(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let schedule = config.schedule.build()?;
    let layers = config.cartpole.arch.clone();
    let evaluator = CartPoleEvaluator::new(layers.clone(), config.cartpole.episodes_per_eval, config.cartpole.max_steps)?;
    // one projection for every run so latent scatter plots are comparable
    let view = Projection::seeded(evaluator.dim(), 2.min(evaluator.dim()), false, config.master_seed)?;
    execute(config, out_dir, |job| {
        let result = run_with(config, &evaluator, &config.density, &schedule, &options(config, job.seed, true))?;
        let gens = &result.trace.generations;
        let row = CartpoleRow {
            preset: job.label.clone(),
            dim: evaluator.dim(),
            best: gens.iter().map(|g| g.best_raw()).collect(),
            median: gens.iter().map(|g| g.median_raw()).collect(),
            evaluations: result.trace.evaluations + result.trace.extra_evaluations,
        };
        let mut terminal = Vec::new();
        for (gi, g) in gens.iter().enumerate() {
            if let Some(ds) = &g.descriptors {
                for (i, d) in ds.iter().enumerate() {
                    terminal.push(format!("{},{},{},{},{},{}", job.index, gi + 1, i, d[0], d[1], d[2]));
                }
            }
        }
        let last = gens.last().expect("final generation is always recorded");
        let z = view.project_all(result.population.members());
        let k = view.latent_dim();
        let latent: Vec<String> = (0..result.population.len())
            .map(|i| {
                let y = if k > 1 { z[i * k + 1] } else { 0.0 };
                format!("{},{},{},{},{}", job.index, i, z[i * k], y, last.raw_fitness[i])
            })
            .collect();
        let champion = select_elites(&last.raw_fitness, 1)?[0];
        let mut lines = vec![header_line(config, job, &result)];
        lines.extend(generation_lines(&result)?);
        let extra = Extra::Cartpole {
            terminal,
            latent,
            champion: result.population.member(champion).to_vec(),
            layers: layers.clone(),
        };
        Ok((RunRow::Cartpole(row), lines, extra))
    })
}

/// Two-cluster Lloyd iteration seeded at the extreme points along x + y.
pub fn two_means(points: &[[f64; 2]]) -> [[f64; 2]; 2] {
    if points.is_empty() {
        return [[f64::NAN; 2]; 2];
    }
    let key = |p: &[f64; 2]| p[0] + p[1];
    let hi = points.iter().copied().max_by(|a, b| key(a).total_cmp(&key(b))).expect("non-empty");
    let lo = points.iter().copied().min_by(|a, b| key(a).total_cmp(&key(b))).expect("non-empty");
    let mut centers = [hi, lo];
    for _ in 0..100 {
        let mut sum = [[0.0; 2]; 2];
        let mut count = [0usize; 2];
        for p in points {
            let d = |c: [f64; 2]| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            let j = usize::from(d(centers[1]) < d(centers[0]));
            sum[j][0] += p[0];
            sum[j][1] += p[1];
            count[j] += 1;
        }
        let mut next = centers;
        for j in 0..2 {
            if count[j] > 0 {
                next[j] = [sum[j][0] / count[j] as f64, sum[j][1] / count[j] as f64];
            }
        }
        if next == centers {
            break;
        }
        centers = next;
    }
    if key(&centers[1]) > key(&centers[0]) {
        centers.swap(0, 1);
    }
    centers
}

/// Two-peaks runs with full traces (positions and origin estimates per generation).
pub fn run_two_peaks(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let schedule = config.schedule.build()?;
    execute(config, out_dir, |job| {
        let result = run_with(config, &TwoPeaks, &config.density, &schedule, &options(config, job.seed, true))?;
        let last = result.trace.generations.last().expect("final generation is always recorded");
        let k = config.metrics.elites;
        let elites = select_elites(&last.fitness, k)?;
        let mut near = [0usize; 2];
        for &i in &elites {
            let x = result.population.member(i);
            for (j, c) in [[1.0, 1.0], [-1.0, -1.0]].iter().enumerate() {
                if (x[0] - c[0]).hypot(x[1] - c[1]) <= BASIN_RADIUS {
                    near[j] += 1;
                }
            }
        }
        let points: Vec<[f64; 2]> = result.population.rows().map(|r| [r[0], r[1]]).collect();
        let row = TwoPeaksRow {
            elite_share: [near[0] as f64 / k as f64, near[1] as f64 / k as f64],
            centers: two_means(&points),
            mean_elite_fitness: elites.iter().map(|&i| last.fitness[i]).sum::<f64>() / k as f64,
            evaluations: result.trace.evaluations,
        };
        let mut lines = vec![header_line(config, job, &result)];
        lines.extend(generation_lines(&result)?);
        Ok((RunRow::TwoPeaks(row), lines, Extra::None))
    })
}

/// Output directory: explicit flag, then the config, then `DIFFEVO_OUT`, then `./runs`.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os("DIFFEVO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
