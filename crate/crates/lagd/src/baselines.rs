//! Conventional first-order baselines on the precoder: projected gradient
//! ascent and projected Adam, both driven by the analytic sum-rate gradient.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{project_power, wsr, wsr_gradient, ChannelSet, Precoder, SystemConfig};
use crate::run::RunResult;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Adam moments over one flat real parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            lr,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam step: updates the moments and returns the (positively signed)
/// step `lr * m_hat / (sqrt(v_hat) + eps)`. Callers add it to move along
/// the gradient direction.
#[allow(clippy::needless_range_loop)]
pub fn adam_step(state: &mut AdamState, grad: &[f64]) -> Result<Vec<f64>> {
    if grad.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "gradient length {} vs Adam state length {}",
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let mut step = Vec::with_capacity(grad.len());
    for i in 0..grad.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        step.push(state.lr * m_hat / (v_hat.sqrt() + state.eps));
    }
    Ok(step)
}

/// Projected gradient ascent with a fixed step size.
pub fn gd_solve(
    config: &SystemConfig,
    channels: &ChannelSet,
    v0: &Precoder,
    iters: usize,
    step_size: f64,
) -> Result<RunResult> {
    if !step_size.is_finite() || step_size <= 0.0 {
        return Err(Error::Config(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    let start = Instant::now();
    let mut precoder = v0.clone();
    let mut wsr_trace = vec![wsr(config, channels, &precoder)?];
    for _ in 0..iters {
        let grad = wsr_gradient(config, channels, &precoder)?;
        let stepped = precoder.matrix().add(&grad.matrix().scale(step_size));
        precoder = project_power(config, &Precoder::from_matrix(stepped));
        wsr_trace.push(wsr(config, channels, &precoder)?);
    }
    Ok(finish(precoder, wsr_trace, start))
}

/// Projected Adam on the real-stacked precoder.
pub fn adam_solve(
    config: &SystemConfig,
    channels: &ChannelSet,
    v0: &Precoder,
    iters: usize,
    lr: f64,
) -> Result<RunResult> {
    if !lr.is_finite() || lr <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let start = Instant::now();
    let (n, m) = (v0.num_users(), v0.num_antennas());
    let mut precoder = v0.clone();
    let mut adam = AdamState::new(2 * n * m, lr);
    let mut wsr_trace = vec![wsr(config, channels, &precoder)?];
    for _ in 0..iters {
        let grad = wsr_gradient(config, channels, &precoder)?.to_real_stacked();
        let step = adam_step(&mut adam, &grad)?;
        let mut x = precoder.matrix().to_real_stacked();
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += si;
        }
        precoder = project_power(
            config,
            &Precoder::from_matrix(CMatrix::from_real_stacked(n, m, &x)),
        );
        wsr_trace.push(wsr(config, channels, &precoder)?);
    }
    Ok(finish(precoder, wsr_trace, start))
}

fn finish(precoder: Precoder, wsr_trace: Vec<f64>, start: Instant) -> RunResult {
    let final_wsr = *wsr_trace.last().unwrap();
    let best_wsr = wsr_trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    RunResult {
        final_precoder: precoder,
        final_wsr,
        best_wsr,
        wsr_trace,
        objective_trace: None,
        wall_time: start.elapsed(),
        seed: 0,
    }
}
