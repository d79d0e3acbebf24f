//! Cart-pole balancing: classic Euler-integrated dynamics, flat-vector MLP policies and the
//! episode rollout used as a fitness evaluator.
//!
//! Genotype layout: for each layer in forward order, the `n_out × n_in` weight matrix
//! (row-major, one row per output neuron) followed by the `n_out` biases.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::landscape::{Evaluation, FitnessEvaluator, Objective};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_POLE_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const X_LIMIT: f64 = 2.4;
pub const MAX_STEPS: usize = 500;
pub const INIT_RANGE: f64 = 0.05;

pub const SMALL_ARCH: [usize; 3] = [4, 8, 2];
pub const DEEP_ARCH: [usize; 4] = [4, 128, 128, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    fn force(self) -> f64 {
        match self {
            Action::Left => -FORCE_MAG,
            Action::Right => FORCE_MAG,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub step_count: usize,
}

impl CartPoleState {
    /// Within the angle and position limits.
    pub fn in_bounds(&self) -> bool {
        self.theta.abs() <= THETA_LIMIT && self.x.abs() <= X_LIMIT
    }

    pub fn is_alive(&self) -> bool {
        self.in_bounds() && self.step_count <= MAX_STEPS
    }

    /// `(x, x_dot, theta, theta_dot)`.
    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// Uniform initial state in `[-0.05, 0.05]⁴` determined by `episode_seed`.
    pub fn initial(episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut draw = || rng.gen_range(-INIT_RANGE..=INIT_RANGE);
        CartPoleState { x: draw(), x_dot: draw(), theta: draw(), theta_dot: draw(), step_count: 0 }
    }

    pub fn negated(&self) -> Self {
        CartPoleState {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
            step_count: self.step_count,
        }
    }
}

/// One explicit-Euler step under an arbitrary horizontal force; no liveness check.
pub fn step_with_force(s: &CartPoleState, force: f64) -> CartPoleState {
    let total_mass = CART_MASS + POLE_MASS;
    let pole_mass_length = POLE_MASS * HALF_POLE_LENGTH;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
    CartPoleState {
        x: s.x + TAU * s.x_dot,
        x_dot: s.x_dot + TAU * x_acc,
        theta: s.theta + TAU * s.theta_dot,
        theta_dot: s.theta_dot + TAU * theta_acc,
        step_count: s.step_count + 1,
    }
}

pub fn physics_step(state: &CartPoleState, action: Action) -> Result<CartPoleState> {
    if !state.is_alive() {
        return Err(Error::Terminated);
    }
    Ok(step_with_force(state, action.force()))
}

/// Parameter count of a fully connected net: `Σ (n_i n_{i+1} + n_{i+1})`.
pub fn param_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_arch(layers: &[usize]) -> Result<()> {
    if layers.len() < 2 || layers[0] != 4 || *layers.last().unwrap_or(&0) != 2 || layers.contains(&0) {
        return Err(param(format!("policy layers must run from 4 inputs to 2 outputs, got {layers:?}")));
    }
    Ok(())
}

/// Feed-forward ReLU policy over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpPolicy {
    layers: Vec<usize>,
    params: Vec<f64>,
}

impl MlpPolicy {
    pub fn new(layers: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        check_arch(&layers)?;
        let expected = param_count(&layers);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(MlpPolicy { layers, params })
    }

    pub fn zeros(layers: Vec<usize>) -> Result<Self> {
        let n = param_count(&layers);
        Self::new(layers, vec![0.0; n])
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn outputs(&self, observation: &[f64; 4]) -> Vec<f64> {
        let mut scratch = Scratch::new(&self.layers);
        forward(&self.layers, &self.params, observation, &mut scratch).to_vec()
    }

    /// Higher output wins; a tie picks `Left`.
    pub fn act(&self, observation: &[f64; 4]) -> Action {
        let out = self.outputs(observation);
        choose(&out)
    }
}

/// Alias matching the operation name used in docs.
pub fn policy_forward(policy: &MlpPolicy, observation: &[f64; 4]) -> Action {
    policy.act(observation)
}

fn choose(out: &[f64]) -> Action {
    if out[1] > out[0] {
        Action::Right
    } else {
        Action::Left
    }
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Scratch {
    fn new(layers: &[usize]) -> Self {
        let widest = layers.iter().copied().max().unwrap_or(0);
        Scratch { a: Vec::with_capacity(widest), b: Vec::with_capacity(widest) }
    }
}

fn forward<'s>(layers: &[usize], params: &[f64], obs: &[f64; 4], scratch: &'s mut Scratch) -> &'s [f64] {
    scratch.a.clear();
    scratch.a.extend_from_slice(obs);
    let mut offset = 0;
    let last = layers.len() - 2;
    for (l, w) in layers.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[offset..offset + n_in * n_out];
        let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        scratch.b.clear();
        for (row, bias) in weights.chunks_exact(n_in).zip(biases) {
            let v = row.iter().zip(&scratch.a).map(|(w, x)| w * x).sum::<f64>() + bias;
            scratch.b.push(if l < last { v.max(0.0) } else { v });
        }
        std::mem::swap(&mut scratch.a, &mut scratch.b);
    }
    &scratch.a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    /// Steps survived, in `[1, max_steps]`.
    pub reward: usize,
    pub terminal: CartPoleState,
}

fn rollout_raw(layers: &[usize], params: &[f64], episode_seed: u64, max_steps: usize) -> RolloutOutcome {
    let mut scratch = Scratch::new(layers);
    let mut state = CartPoleState::initial(episode_seed);
    while state.step_count < max_steps {
        let action = choose(forward(layers, params, &state.observation(), &mut scratch));
        state = step_with_force(&state, action.force());
        if !state.in_bounds() {
            break;
        }
    }
    RolloutOutcome { reward: state.step_count, terminal: state }
}

/// Runs one episode; the seed fixes the initial state.
pub fn rollout(policy: &MlpPolicy, episode_seed: u64, max_steps: usize) -> RolloutOutcome {
    rollout_raw(&policy.layers, &policy.params, episode_seed, max_steps.max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoleEvaluator {
    layers: Vec<usize>,
    episodes_per_eval: usize,
    max_steps: usize,
}

impl CartPoleEvaluator {
    pub fn new(layers: Vec<usize>, episodes_per_eval: usize, max_steps: usize) -> Result<Self> {
        check_arch(&layers)?;
        if episodes_per_eval == 0 || max_steps == 0 {
            return Err(param("cart-pole evaluator needs >= 1 episode and max_steps >= 1"));
        }
        Ok(CartPoleEvaluator { layers, episodes_per_eval, max_steps })
    }

    pub fn small() -> Self {
        CartPoleEvaluator { layers: SMALL_ARCH.to_vec(), episodes_per_eval: 1, max_steps: MAX_STEPS }
    }

    pub fn deep() -> Self {
        CartPoleEvaluator { layers: DEEP_ARCH.to_vec(), episodes_per_eval: 1, max_steps: MAX_STEPS }
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }
}

/// Binds a rollout into the evolution loop.
pub fn cartpole_evaluator(layers: &[usize], episodes_per_eval: usize) -> Result<CartPoleEvaluator> {
    CartPoleEvaluator::new(layers.to_vec(), episodes_per_eval, MAX_STEPS)
}

impl FitnessEvaluator for CartPoleEvaluator {
    fn dim(&self) -> usize {
        param_count(&self.layers)
    }

    fn objective(&self) -> Objective {
        Objective::Maximize
    }

    /// Raw fitness is the mean reward; the descriptor is the terminal `(theta, x, steps)` of the
    /// first episode.
    fn evaluate(&self, x: &[f64], episode_seed: u64) -> std::result::Result<Evaluation, String> {
        if x.len() != self.dim() {
            return Err(format!("expected {} parameters, got {}", self.dim(), x.len()));
        }
        let mut total = 0usize;
        let mut descriptor = None;
        for k in 0..self.episodes_per_eval {
            let seed = episode_seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let out = rollout_raw(&self.layers, x, seed, self.max_steps);
            total += out.reward;
            if descriptor.is_none() {
                descriptor = Some(vec![out.terminal.theta, out.terminal.x, out.reward as f64]);
            }
        }
        let raw = total as f64 / self.episodes_per_eval as f64;
        Ok(Evaluation { raw, fitness: raw / self.max_steps as f64, descriptor })
    }

    fn name(&self) -> String {
        let arch: Vec<String> = self.layers.iter().map(|n| n.to_string()).collect();
        format!("cartpole[{}]", arch.join("-"))
    }
}

/// `small` → `[4, 8, 2]`, `deep` → `[4, 128, 128, 2]`, or an explicit list such as `4-16-2`.
pub fn parse_arch(s: &str) -> Result<Vec<usize>> {
    let layers = match s {
        "small" => SMALL_ARCH.to_vec(),
        "deep" => DEEP_ARCH.to_vec(),
        other => other
            .split('-')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| param(format!("unknown cart-pole architecture `{other}`")))?,
    };
    check_arch(&layers)?;
    Ok(layers)
}

/// Metadata written next to a binary genotype.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenotypeMeta {
    pub format: String,
    pub layers: Vec<usize>,
    pub param_count: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `u64 LE length` followed by little-endian f64 values, plus a JSON sidecar.
pub fn write_genotype(path: &Path, layers: &[usize], params: &[f64]) -> Result<()> {
    let expected = param_count(layers);
    if params.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: params.len() });
    }
    let mut bytes = Vec::with_capacity(8 + 8 * params.len());
    bytes.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    let meta = GenotypeMeta { format: "f64le-u64len".into(), layers: layers.to_vec(), param_count: expected };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a genotype and, when present, its sidecar.
pub fn read_genotype(path: &Path) -> Result<(Vec<f64>, Option<GenotypeMeta>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(Error::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "missing length header")));
    }
    let (head, body) = bytes.split_at(8);
    let len = u64::from_le_bytes(head.try_into().expect("8-byte header")) as usize;
    if body.len() != len * 8 {
        return Err(Error::DimensionMismatch { expected: len * 8, got: body.len() });
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let sidecar = sidecar_path(path);
    let meta = if sidecar.exists() {
        Some(serde_json::from_str(&fs::read_to_string(sidecar)?)?)
    } else {
        None
    };
    Ok((params, meta))
}
