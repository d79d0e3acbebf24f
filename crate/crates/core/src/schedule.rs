//! α (signal fraction) and σ (denoising noise) schedules.
//!
//! `alphas[t]` holds α_t for t = 0..=T and decreases strictly from α₀ ≈ 1 to α_T ≈ 0.
//! `sigmas[t - 1]` holds σ_t for t = 1..=T. Schedules are computed once and never mutated.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-4;
pub const DEFAULT_DDPM_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
    /// `α_t = exp(-β₀ t - γ t² / T)`; the fitted coefficients are kept for reference.
    Ddpm { beta0: f64, gamma: f64, eps: f64 },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Ddpm { .. } => "ddpm",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Schedule family selector, as written in configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleFamily {
    Linear,
    Ddpm,
    Cosine,
}

impl FromStr for ScheduleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleFamily::Linear),
            "ddpm" => Ok(ScheduleFamily::Ddpm),
            "cosine" => Ok(ScheduleFamily::Cosine),
            other => Err(param(format!("unknown schedule kind `{other}`"))),
        }
    }
}

impl fmt::Display for ScheduleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleFamily::Linear => "linear",
            ScheduleFamily::Ddpm => "ddpm",
            ScheduleFamily::Cosine => "cosine",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    kind: ScheduleKind,
    alphas: Vec<f64>,
    sigmas: Vec<f64>,
    sigma_scale: f64,
    clamp_eps: f64,
}

/// Unclamped cosine value `cos(πt/T)/2 + 1/2`.
pub fn cosine_alpha(t: usize, steps: usize) -> f64 {
    (PI * t as f64 / steps as f64).cos() / 2.0 + 0.5
}

/// Unclamped linear value `1 - t/T`.
pub fn linear_alpha(t: usize, steps: usize) -> f64 {
    1.0 - t as f64 / steps as f64
}

/// Fits `ln α_t = -β₀ t - γ t²/T` through `α₁ = 1 - eps` and `α_T = eps`.
///
/// Returns `(β₀, γ)`.
pub fn ddpm_coefficients(steps: usize, eps: f64) -> Result<(f64, f64)> {
    if steps < 2 {
        return Err(param(format!("ddpm schedule needs T >= 2, got {steps}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(param(format!("ddpm eps must lie in (0, 0.5), got {eps}")));
    }
    let t = steps as f64;
    // rows: t = 1 and t = T of  β₀ t + γ t²/T = -ln α_t
    let (a11, a12, b1) = (1.0, 1.0 / t, -(1.0 - eps).ln());
    let (a21, a22, b2) = (t, t, -eps.ln());
    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-12 {
        return Err(param("ddpm boundary constraints are degenerate"));
    }
    let beta0 = (b1 * a22 - a12 * b2) / det;
    let gamma = (a11 * b2 - a21 * b1) / det;
    Ok((beta0, gamma))
}

/// DDIM noise magnitude `σ_m √((1-α_{t-1})/(1-α_t)) √(1 - α_t/α_{t-1})`.
pub fn ddim_sigma(alpha_t: f64, alpha_prev: f64, sigma_scale: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&sigma_scale) {
        return Err(param(format!("sigma_scale must lie in [0, 1], got {sigma_scale}")));
    }
    if alpha_t >= 1.0 {
        return Err(Error::Domain(format!("alpha_t = {alpha_t} leaves 1 - alpha_t non-positive")));
    }
    if alpha_t >= alpha_prev {
        return Err(Error::Ordering { alpha_t, alpha_prev });
    }
    if !(alpha_t > 0.0 && alpha_prev <= 1.0) {
        return Err(Error::Domain(format!(
            "alphas must satisfy 0 < alpha_t < alpha_prev <= 1, got {alpha_t}, {alpha_prev}"
        )));
    }
    let ratio = (1.0 - alpha_prev) / (1.0 - alpha_t);
    let shrink = 1.0 - alpha_t / alpha_prev;
    let sigma = sigma_scale * ratio.sqrt() * shrink.sqrt();
    // Rounding must never push σ past its analytic bound.
    Ok(sigma.min((1.0 - alpha_prev).sqrt()))
}

fn check_common(steps: usize, sigma_scale: f64, clamp_eps: f64) -> Result<()> {
    if steps < 2 {
        return Err(param(format!("schedule needs T >= 2, got {steps}")));
    }
    if !(0.0..=1.0).contains(&sigma_scale) {
        return Err(param(format!("sigma_scale must lie in [0, 1], got {sigma_scale}")));
    }
    if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
        return Err(param(format!("clamp_eps must lie in (0, 0.5), got {clamp_eps}")));
    }
    Ok(())
}

impl Schedule {
    /// Cosine schedule, squeezed affinely into `[clamp_eps, 1 - clamp_eps]`.
    pub fn cosine(steps: usize, sigma_scale: f64, clamp_eps: f64) -> Result<Self> {
        check_common(steps, sigma_scale, clamp_eps)?;
        let alphas = (0..=steps)
            .map(|t| squeeze(cosine_alpha(t, steps), clamp_eps))
            .collect();
        Self::finish(ScheduleKind::Cosine, alphas, sigma_scale, clamp_eps)
    }

    /// Linear schedule `1 - t/T`, squeezed affinely into `[clamp_eps, 1 - clamp_eps]`.
    pub fn linear(steps: usize, sigma_scale: f64, clamp_eps: f64) -> Result<Self> {
        check_common(steps, sigma_scale, clamp_eps)?;
        let alphas = (0..=steps)
            .map(|t| squeeze(linear_alpha(t, steps), clamp_eps))
            .collect();
        Self::finish(ScheduleKind::Linear, alphas, sigma_scale, clamp_eps)
    }

    /// DDPM-style exponential-quadratic schedule with `α₁ = 1 - eps` and `α_T = eps`.
    ///
    /// The formula pins α₀ to exactly 1; it is clipped to `1 - eps/2`, which is also the
    /// schedule's `clamp_eps`.
    pub fn ddpm(steps: usize, eps: f64, sigma_scale: f64) -> Result<Self> {
        let (beta0, gamma) = ddpm_coefficients(steps, eps)?;
        let clamp_eps = eps / 2.0;
        check_common(steps, sigma_scale, clamp_eps)?;
        let t_max = steps as f64;
        let mut alphas: Vec<f64> = (0..=steps)
            .map(|t| {
                let t = t as f64;
                (-beta0 * t - gamma * t * t / t_max).exp()
            })
            .collect();
        alphas[0] = alphas[0].min(1.0 - clamp_eps);
        // Pin the boundaries exactly; the fit reproduces them up to rounding.
        alphas[1] = 1.0 - eps;
        alphas[steps] = eps;
        Self::finish(ScheduleKind::Ddpm { beta0, gamma, eps }, alphas, sigma_scale, clamp_eps)
    }

    /// Builds a schedule by family name.
    pub fn from_family(
        family: ScheduleFamily,
        steps: usize,
        sigma_scale: f64,
        clamp_eps: f64,
    ) -> Result<Self> {
        match family {
            ScheduleFamily::Linear => Self::linear(steps, sigma_scale, clamp_eps),
            ScheduleFamily::Cosine => Self::cosine(steps, sigma_scale, clamp_eps),
            ScheduleFamily::Ddpm => Self::ddpm(steps, DEFAULT_DDPM_EPS, sigma_scale),
        }
    }

    fn finish(kind: ScheduleKind, alphas: Vec<f64>, sigma_scale: f64, clamp_eps: f64) -> Result<Self> {
        for w in alphas.windows(2) {
            if w[1] >= w[0] {
                return Err(param(format!(
                    "{kind} schedule is not strictly decreasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let sigmas = alphas
            .windows(2)
            .map(|w| ddim_sigma(w[1], w[0], sigma_scale))
            .collect::<Result<Vec<_>>>()?;
        let schedule = Schedule { kind, alphas, sigmas, sigma_scale, clamp_eps };
        schedule.check_invariants()?;
        Ok(schedule)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Number of diffusion steps T.
    pub fn steps(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    pub fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }

    /// α_t for `t` in `0..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    /// σ_t for `t` in `1..=T`.
    pub fn sigma(&self, t: usize) -> f64 {
        assert!(t >= 1, "sigma is defined for t >= 1");
        self.sigmas[t - 1]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Checks ordering, clamping range and the σ bound.
    pub fn check_invariants(&self) -> Result<()> {
        let a = &self.alphas;
        let t_max = a.len() - 1;
        let fail = |msg: String| Err(param(msg));
        if a.len() < 3 {
            return fail(format!("schedule needs T >= 2, got {t_max}"));
        }
        let lo = self.clamp_eps;
        let hi = 1.0 - self.clamp_eps;
        for (t, &alpha) in a.iter().enumerate() {
            if !(lo..=hi).contains(&alpha) {
                return fail(format!("alpha[{t}] = {alpha} outside [{lo}, {hi}]"));
            }
            if t > 0 && alpha >= a[t - 1] {
                return fail(format!("alpha[{t}] = {alpha} does not decrease"));
            }
        }
        for (i, &sigma) in self.sigmas.iter().enumerate() {
            let bound = (1.0 - a[i]).sqrt();
            if !(0.0..=bound).contains(&sigma) {
                return fail(format!("sigma[{}] = {sigma} outside [0, {bound}]", i + 1));
            }
        }
        Ok(())
    }
}

fn squeeze(alpha: f64, eps: f64) -> f64 {
    eps + (1.0 - 2.0 * eps) * alpha
}
