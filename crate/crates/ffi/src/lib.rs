//! C ABI for diffevo.
//!
//! Conventions: every fallible function returns a `DiffevoStatus`; results go through out
//! pointers, which are left untouched on failure. Handles are opaque, created by `*_new` and
//! released by the matching `*_free` (which accepts NULL). After a non-OK status,
//! `diffevo_last_error()` describes the failure on the calling thread.
//!
//! Array arguments are row-major `double` buffers whose lengths are stated by the accompanying
//! size arguments.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use diffevo::cartpole::{rollout, MlpPolicy, DEEP_ARCH, MAX_STEPS, SMALL_ARCH};
use diffevo::landscape::{Benchmark, DensityMap, RescaledLandscape};
use diffevo::metrics::{elite_statistics, EntropyGrid};
use diffevo::{estimate_origin, evolve, Error, EvolutionResult, EvolveOptions, Population, Schedule};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffevoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    DegenerateWeights = 4,
    Evaluation = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffevoScheduleKind {
    Linear = 0,
    Cosine = 1,
    Ddpm = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffevoBenchmark {
    Rosenbrock = 0,
    Beale = 1,
    Himmelblau = 2,
    Ackley = 3,
    Rastrigin = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffevoArch {
    /// 4-8-2, 58 parameters.
    Small = 0,
    /// 4-128-128-2, 17410 parameters.
    Deep = 1,
}

/// Opaque α/σ schedule.
pub struct DiffevoSchedule(Schedule);

/// Opaque rescaled benchmark landscape.
pub struct DiffevoLandscape(RescaledLandscape);

/// Opaque finished evolution run.
pub struct DiffevoRun(EvolutionResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DiffevoStatus {
    match e {
        Error::Parameter(_) | Error::DimensionMismatch { .. } | Error::Config(_) => DiffevoStatus::InvalidArgument,
        Error::Ordering { .. } | Error::Domain(_) | Error::ScheduleViolation { .. } | Error::Terminated => {
            DiffevoStatus::Domain
        }
        Error::DegenerateWeights => DiffevoStatus::DegenerateWeights,
        Error::Evaluation { .. } => DiffevoStatus::Evaluation,
        Error::Io(_) | Error::Json(_) => DiffevoStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DiffevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            DiffevoStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            DiffevoStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            DiffevoStatus::Panic
        }
    }
}

unsafe fn slice_in<'a>(ptr: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn slice_out<'a>(ptr: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or(Fail::Null(what))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or(Fail::Null(what))
}

fn invalid(msg: String) -> Fail {
    Fail::Lib(Error::Parameter(msg))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn diffevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the last failure on this thread; empty after a success. The pointer stays
/// valid until the next diffevo call on the same thread.
#[no_mangle]
pub extern "C" fn diffevo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn diffevo_schedule_new(
    kind: DiffevoScheduleKind,
    steps: usize,
    sigma_scale: f64,
    clamp_eps: f64,
    out_schedule: *mut *mut DiffevoSchedule,
) -> DiffevoStatus {
    guard(|| {
        let slot = out(out_schedule, "out_schedule")?;
        let s = match kind {
            DiffevoScheduleKind::Linear => Schedule::linear(steps, sigma_scale, clamp_eps)?,
            DiffevoScheduleKind::Cosine => Schedule::cosine(steps, sigma_scale, clamp_eps)?,
            DiffevoScheduleKind::Ddpm => Schedule::ddpm(steps, clamp_eps, sigma_scale)?,
        };
        *slot = Box::into_raw(Box::new(DiffevoSchedule(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn diffevo_schedule_free(schedule: *mut DiffevoSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// α_t for `t` in `0..=T`.
#[no_mangle]
pub unsafe extern "C" fn diffevo_schedule_alpha(
    schedule: *const DiffevoSchedule,
    t: usize,
    out_alpha: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let s = &handle(schedule, "schedule")?.0;
        let slot = out(out_alpha, "out_alpha")?;
        if t > s.steps() {
            return Err(invalid(format!("t = {t} exceeds T = {}", s.steps())));
        }
        *slot = s.alpha(t);
        Ok(())
    })
}

/// σ_t for `t` in `1..=T`.
#[no_mangle]
pub unsafe extern "C" fn diffevo_schedule_sigma(
    schedule: *const DiffevoSchedule,
    t: usize,
    out_sigma: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let s = &handle(schedule, "schedule")?.0;
        let slot = out(out_sigma, "out_sigma")?;
        if t == 0 || t > s.steps() {
            return Err(invalid(format!("t = {t} outside 1..={}", s.steps())));
        }
        *slot = s.sigma(t);
        Ok(())
    })
}

/// Step count T; 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn diffevo_schedule_steps(schedule: *const DiffevoSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.steps())
}

fn benchmark_of(b: DiffevoBenchmark) -> Benchmark {
    match b {
        DiffevoBenchmark::Rosenbrock => Benchmark::Rosenbrock,
        DiffevoBenchmark::Beale => Benchmark::Beale,
        DiffevoBenchmark::Himmelblau => Benchmark::Himmelblau,
        DiffevoBenchmark::Ackley => Benchmark::Ackley,
        DiffevoBenchmark::Rastrigin => Benchmark::Rastrigin,
    }
}

/// Benchmark with its default objective and default rescaling options.
#[no_mangle]
pub unsafe extern "C" fn diffevo_landscape_new(
    benchmark: DiffevoBenchmark,
    out_landscape: *mut *mut DiffevoLandscape,
) -> DiffevoStatus {
    guard(|| {
        let slot = out(out_landscape, "out_landscape")?;
        let l = RescaledLandscape::standard(benchmark_of(benchmark))?;
        *slot = Box::into_raw(Box::new(DiffevoLandscape(l)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn diffevo_landscape_free(landscape: *mut DiffevoLandscape) {
    if !landscape.is_null() {
        drop(Box::from_raw(landscape));
    }
}

/// Raw value and rescaled fitness at `(x, y)`; either out pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn diffevo_landscape_eval(
    landscape: *const DiffevoLandscape,
    x: f64,
    y: f64,
    out_raw: *mut f64,
    out_fitness: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let l = &handle(landscape, "landscape")?.0;
        let raw = l.raw([x, y]);
        if let Some(r) = out_raw.as_mut() {
            *r = raw;
        }
        if let Some(f) = out_fitness.as_mut() {
            *f = l.rescale(raw);
        }
        Ok(())
    })
}

/// Target value f* and scale s of the rescaling.
#[no_mangle]
pub unsafe extern "C" fn diffevo_landscape_scale(
    landscape: *const DiffevoLandscape,
    out_f_star: *mut f64,
    out_scale: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let l = &handle(landscape, "landscape")?.0;
        *out(out_f_star, "out_f_star")? = l.f_star;
        *out(out_scale, "out_scale")? = l.scale;
        Ok(())
    })
}

/// Origin estimate of `x_t` (length `dim`) from `n` members (`n × dim`) with density weights
/// `weights` (length `n`), written to `out_x0` (length `dim`).
#[no_mangle]
pub unsafe extern "C" fn diffevo_estimate_origin(
    x_t: *const f64,
    members: *const f64,
    weights: *const f64,
    n: usize,
    dim: usize,
    alpha_t: f64,
    out_x0: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let x = slice_in(x_t, dim, "x_t")?;
        let m = slice_in(members, n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows".into()))?, "members")?;
        let w = slice_in(weights, n, "weights")?;
        let dst = slice_out(out_x0, dim, "out_x0")?;
        let pop = Population::new(0, dim, m.to_vec())?.with_fitness(w.to_vec())?;
        let est = estimate_origin(x, &pop, alpha_t)?;
        dst.copy_from_slice(&est.x0_hat);
        Ok(())
    })
}

/// One cart-pole episode (500-step cap) of the MLP policy `params` (58 or 17410 values).
#[no_mangle]
pub unsafe extern "C" fn diffevo_cartpole_rollout(
    arch: DiffevoArch,
    params: *const f64,
    len: usize,
    episode_seed: u64,
    out_reward: *mut u32,
) -> DiffevoStatus {
    guard(|| {
        let slot = out(out_reward, "out_reward")?;
        let layers = match arch {
            DiffevoArch::Small => SMALL_ARCH.to_vec(),
            DiffevoArch::Deep => DEEP_ARCH.to_vec(),
        };
        let p = slice_in(params, len, "params")?;
        let policy = MlpPolicy::new(layers, p.to_vec())?;
        *slot = rollout(&policy, episode_seed, MAX_STEPS).reward as u32;
        Ok(())
    })
}

/// Diffusion Evolution on a benchmark landscape with density `F^power` (`power` = 1 is the
/// identity map).
#[no_mangle]
pub unsafe extern "C" fn diffevo_run_benchmark(
    landscape: *const DiffevoLandscape,
    schedule: *const DiffevoSchedule,
    population: usize,
    seed: u64,
    power: f64,
    out_run: *mut *mut DiffevoRun,
) -> DiffevoStatus {
    guard(|| {
        let l = &handle(landscape, "landscape")?.0;
        let s = &handle(schedule, "schedule")?.0;
        let slot = out(out_run, "out_run")?;
        let g = if power == 1.0 { DensityMap::Identity } else { DensityMap::Power { k: power } };
        let opts = EvolveOptions { population, seed, ..EvolveOptions::default() };
        let result = evolve(l, &g, s, &opts)?;
        *slot = Box::into_raw(Box::new(DiffevoRun(result)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn diffevo_run_free(run: *mut DiffevoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Population size N, dimension D and fitness evaluations spent.
#[no_mangle]
pub unsafe extern "C" fn diffevo_run_shape(
    run: *const DiffevoRun,
    out_n: *mut usize,
    out_dim: *mut usize,
    out_evaluations: *mut usize,
) -> DiffevoStatus {
    guard(|| {
        let r = &handle(run, "run")?.0;
        *out(out_n, "out_n")? = r.population.len();
        *out(out_dim, "out_dim")? = r.population.dim();
        *out(out_evaluations, "out_evaluations")? = r.trace.evaluations;
        Ok(())
    })
}

/// Copies the final population (`N × D`, row-major) into `buffer` of length `len`.
#[no_mangle]
pub unsafe extern "C" fn diffevo_run_population(run: *const DiffevoRun, buffer: *mut f64, len: usize) -> DiffevoStatus {
    guard(|| {
        let r = &handle(run, "run")?.0;
        let members = r.population.members();
        if len != members.len() {
            return Err(invalid(format!("buffer holds {len} values, population has {}", members.len())));
        }
        slice_out(buffer, len, "buffer")?.copy_from_slice(members);
        Ok(())
    })
}

/// Mean fitness of the top-`k` elites and their grid entropy (80×80 cells on (-4, 4)²).
#[no_mangle]
pub unsafe extern "C" fn diffevo_run_elite_stats(
    run: *const DiffevoRun,
    landscape: *const DiffevoLandscape,
    k: usize,
    out_mean_fitness: *mut f64,
    out_entropy_bits: *mut f64,
) -> DiffevoStatus {
    guard(|| {
        let r = &handle(run, "run")?.0;
        let l = &handle(landscape, "landscape")?.0;
        let mean_slot = out(out_mean_fitness, "out_mean_fitness")?;
        let h_slot = out(out_entropy_bits, "out_entropy_bits")?;
        let (mean, h, _) = elite_statistics(&r.population, l, k, &EntropyGrid::default())?;
        *mean_slot = mean;
        *h_slot = h;
        Ok(())
    })
}
