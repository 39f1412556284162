//! Joint power control and user association for a weighted sum rate.
//!
//! Maximizes `Σ_i c_{z_i} log(1 + SINR_i)` over the served device `z_i` and
//! flat PSD `p_i` of every AP. The Lagrangian dual transform introduces the
//! auxiliary SINR `γ`, the quadratic transform the auxiliary `y`; each block
//! then has a closed-form maximizer and the cycle `γ → y → p → z` never
//! decreases the objective.
//!
//! The transform is carried out with natural logarithms; the reported
//! objective uses `log2`. The two differ by the constant `ln 2`, so the
//! iterates are identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::Network;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rates::PowerProfile;

/// Below this many APs the per-AP updates always run sequentially.
const PAR_MIN_APS: usize = 256;

/// How the power block is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// Closed-form optimal PSD, clipped to `[0, p_max]`.
    #[default]
    Continuous,
    /// PSDs restricted to `{0, p_max}`: the closed-form update is rounded to
    /// the nearer level, falling back to no PSD update when rounding lowers
    /// the objective.
    Binary,
    /// Every AP with candidates transmits at `p_max` and must serve one of
    /// them; only the association changes.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitRule {
    /// `z_i = argmax_j c_j g_ij` at `p_max`.
    #[default]
    Strongest,
    /// Uniform `z_i ∈ K_i ∪ {idle}` and `p_i ∈ [0, p_max]`.
    Random { seed: u64 },
}

/// Deliberate corruption of the power update, used to check that the
/// monotonicity guard fires.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    FlipPowerUpdate,
}

#[derive(Debug, Clone)]
pub struct AffineOptions {
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub max_iters: usize,
    pub power_mode: PowerMode,
    pub init: InitRule,
    pub exec: Execution,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for AffineOptions {
    fn default() -> Self {
        AffineOptions {
            tol: 1e-4,
            max_iters: 500,
            power_mode: PowerMode::Continuous,
            init: InitRule::Strongest,
            exec: Execution::Parallel,
            fault: None,
        }
    }
}

/// Iterate of the cyclic updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub served: Vec<Option<usize>>,
    pub psd: Vec<f64>,
    pub gamma: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SolverState {
    pub fn new(init: &PowerProfile, weights: &[f64]) -> Self {
        let n = init.n_aps();
        SolverState {
            served: init.served.clone(),
            psd: init.psd.clone(),
            gamma: vec![0.0; n],
            y: vec![0.0; n],
            weights: weights.to_vec(),
        }
    }

    pub fn profile(&self) -> PowerProfile {
        PowerProfile {
            served: self.served.clone(),
            psd: self.psd.clone(),
        }
        .canonical()
    }

    #[inline]
    fn radiated(&self, i: usize) -> f64 {
        if self.served[i].is_some() {
            self.psd[i]
        } else {
            0.0
        }
    }

    /// `n_j + Σ_{l ∈ N_j} p_l g_lj` for every device.
    fn received(&self, net: &Network) -> Vec<f64> {
        (0..net.n_devices())
            .map(|j| {
                net.nb.device_links(j).iter().fold(net.nb.residual_noise(j), |acc, &(l, g)| {
                    acc + self.radiated(l) * g
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AffineSolveReport {
    pub profile: PowerProfile,
    /// Objective (`Σ_i c_{z_i} log2(1 + SINR_i)`) of the starting point and
    /// after every cycle.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AffineSolveReport {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

fn exec_for(net: &Network, exec: Execution) -> Execution {
    if net.n_aps() >= PAR_MIN_APS {
        exec
    } else {
        Execution::Sequential
    }
}

/// Optimal `γ` for fixed `(z, p)`: the SINR of every serving link.
pub fn update_gamma(state: &SolverState, net: &Network) -> Vec<f64> {
    gamma_with(state, net, Execution::Sequential)
}

fn gamma_with(state: &SolverState, net: &Network, exec: Execution) -> Vec<f64> {
    par::map_range(exec, state.served.len(), |i| {
        let Some(j) = state.served[i] else { return 0.0 };
        let mut denom = net.nb.residual_noise(j);
        for &(l, g) in net.nb.device_links(j) {
            if l != i {
                denom += state.radiated(l) * g;
            }
        }
        state.psd[i] * net.gains.get(i, j) / denom
    })
}

/// Optimal `y` for fixed `(z, p, γ)`. The denominator is the total received
/// PSD at the served device, own signal included.
pub fn update_y(state: &SolverState, net: &Network) -> Vec<f64> {
    let received = state.received(net);
    y_with(state, net, &received, Execution::Sequential)
}

fn y_with(state: &SolverState, net: &Network, received: &[f64], exec: Execution) -> Vec<f64> {
    par::map_range(exec, state.served.len(), |i| {
        let Some(j) = state.served[i] else { return 0.0 };
        let signal = state.psd[i] * net.gains.get(i, j);
        (state.weights[j] * (1.0 + state.gamma[i]) * signal).sqrt() / received[j]
    })
}

/// Interference footprint `Σ_{l : i ∈ N_{z_l}} y_l^2 g_{i→z_l}` of every AP.
fn footprint(state: &SolverState, net: &Network) -> Vec<f64> {
    let mut d = vec![0.0; state.served.len()];
    for (l, z) in state.served.iter().enumerate() {
        let Some(j) = *z else { continue };
        let y2 = state.y[l] * state.y[l];
        if y2 == 0.0 {
            continue;
        }
        for &(i, g) in net.nb.device_links(j) {
            d[i] += y2 * g;
        }
    }
    d
}

/// Optimal PSD for fixed `(z, γ, y)`:
/// `p_i = min{p_max, c (1+γ_i) g_{i→z_i} y_i^2 / (Σ_{l : i ∈ N_{z_l}} y_l^2 g_{i→z_l})^2}`.
pub fn update_p(state: &SolverState, net: &Network) -> Vec<f64> {
    p_with(state, net, Execution::Sequential, None)
}

fn p_with(state: &SolverState, net: &Network, exec: Execution, fault: Option<Fault>) -> Vec<f64> {
    let d = footprint(state, net);
    par::map_range(exec, state.served.len(), |i| {
        let Some(j) = state.served[i] else { return 0.0 };
        let num = state.weights[j] * (1.0 + state.gamma[i]) * net.gains.get(i, j) * state.y[i] * state.y[i];
        let p = if num <= 0.0 {
            0.0
        } else if d[i] <= 0.0 {
            net.p_max
        } else {
            (num / (d[i] * d[i])).min(net.p_max)
        };
        match fault {
            Some(Fault::FlipPowerUpdate) => (net.p_max - p).clamp(0.0, net.p_max),
            None => p,
        }
    })
}

/// Association that maximizes each AP's share of the quadratic-transform
/// objective. Ties go to the lowest device index; an AP whose best value is
/// not positive goes idle.
pub fn update_z(state: &SolverState, net: &Network) -> Vec<Option<usize>> {
    let received = state.received(net);
    z_with(state, net, &received, PowerMode::Continuous, Execution::Sequential)
}

fn z_with(
    state: &SolverState,
    net: &Network,
    received: &[f64],
    mode: PowerMode,
    exec: Execution,
) -> Vec<Option<usize>> {
    par::map_range(exec, state.served.len(), |i| {
        let gamma = state.gamma[i];
        let y = state.y[i];
        let p = state.psd[i];
        let log_term = (1.0 + gamma).ln();
        let mut best: Option<(usize, f64)> = None;
        for &(j, g) in net.nb.ap_links(i) {
            let c = state.weights[j];
            let phi = c * log_term - c * gamma + 2.0 * y * (c * (1.0 + gamma) * p * g).sqrt()
                - y * y * received[j];
            if best.is_none_or(|(_, b)| phi > b) {
                best = Some((j, phi));
            }
        }
        match (best, mode) {
            (None, _) => None,
            (Some((j, _)), PowerMode::Frozen) => Some(j),
            (Some((j, phi)), _) if phi > 0.0 => Some(j),
            _ => None,
        }
    })
}

/// `Σ_i c_{z_i} log2(1 + SINR_i)` of a profile.
pub fn affine_objective(profile: &PowerProfile, weights: &[f64], net: &Network) -> f64 {
    let state = SolverState::new(profile, weights);
    let gamma = update_gamma(&state, net);
    objective_from(&state, &gamma)
}

fn objective_from(state: &SolverState, gamma: &[f64]) -> f64 {
    state
        .served
        .iter()
        .zip(gamma)
        .map(|(z, &g)| z.map_or(0.0, |j| state.weights[j] * (1.0 + g).log2()))
        .sum()
}

/// Starting profile for the given weights and power mode.
pub fn initial_profile(weights: &[f64], net: &Network, mode: PowerMode, rule: InitRule) -> PowerProfile {
    let n = net.n_aps();
    let mut profile = PowerProfile::idle(n);
    match rule {
        InitRule::Strongest => {
            for i in 0..n {
                let mut best: Option<(usize, f64)> = None;
                for &(j, g) in net.nb.ap_links(i) {
                    let score = weights[j] * g;
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some((j, score));
                    }
                }
                if let Some((j, _)) = best {
                    profile.served[i] = Some(j);
                    profile.psd[i] = net.p_max;
                }
            }
        }
        InitRule::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..n {
                let links = net.nb.ap_links(i);
                if links.is_empty() {
                    continue;
                }
                let pick = rng.random_range(0..=links.len());
                let level: f64 = rng.random();
                let choice = if pick == links.len() { None } else { Some(links[pick].0) };
                let (z, p) = match (mode, choice) {
                    (PowerMode::Frozen, None) => (Some(links[0].0), net.p_max),
                    (PowerMode::Frozen, Some(j)) | (PowerMode::Binary, Some(j)) => (Some(j), net.p_max),
                    (PowerMode::Continuous, Some(j)) => (Some(j), level * net.p_max),
                    (_, None) => (None, 0.0),
                };
                profile.served[i] = z;
                profile.psd[i] = p;
            }
        }
    }
    profile.canonical()
}

fn check_finite(values: &[f64], what: &str, iteration: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numerical {
            iteration,
            detail: format!("{what}[{i}] = {}", values[i]),
        }),
        None => Ok(()),
    }
}

/// Association update followed by the power levels it implies, then the
/// resulting SINRs and objective.
fn settle(state: &mut SolverState, net: &Network, mode: PowerMode, exec: Execution) -> (Vec<f64>, f64) {
    let received = state.received(net);
    state.served = z_with(state, net, &received, mode, exec);
    for i in 0..net.n_aps() {
        match (state.served[i], mode) {
            (None, _) => state.psd[i] = 0.0,
            (Some(_), PowerMode::Binary | PowerMode::Frozen) => state.psd[i] = net.p_max,
            (Some(_), PowerMode::Continuous) => {}
        }
    }
    let gamma = gamma_with(state, net, exec);
    let objective = objective_from(state, &gamma);
    (gamma, objective)
}

/// Cycles the block updates until the relative objective change drops
/// below `opts.tol` or `opts.max_iters` cycles have run.
///
/// Any decrease of the objective beyond rounding aborts with
/// [`Error::NotMonotone`].
pub fn solve_affine(
    weights: &[f64],
    net: &Network,
    init: Option<&PowerProfile>,
    opts: &AffineOptions,
) -> Result<AffineSolveReport> {
    if weights.len() != net.n_devices() {
        return Err(Error::Contract(format!(
            "{} weights for {} devices",
            weights.len(),
            net.n_devices()
        )));
    }
    if let Some(c) = weights.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Contract(format!("weight {c} is negative or non-finite")));
    }
    let start = match init {
        Some(p) => {
            p.validate(net)?;
            p.clone().canonical()
        }
        None => initial_profile(weights, net, opts.power_mode, opts.init),
    };
    let exec = exec_for(net, opts.exec);
    let mut state = SolverState::new(&start, weights);
    if opts.power_mode == PowerMode::Frozen {
        for i in 0..net.n_aps() {
            if let Some(&(j, _)) = net.nb.ap_links(i).first() {
                state.served[i].get_or_insert(j);
                state.psd[i] = net.p_max;
            }
        }
    }

    let mut gamma = gamma_with(&state, net, exec);
    let mut trace = vec![objective_from(&state, &gamma)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let it = iterations;

        state.gamma = gamma;
        check_finite(&state.gamma, "gamma", it)?;
        let received = state.received(net);
        state.y = y_with(&state, net, &received, exec);
        check_finite(&state.y, "y", it)?;

        let previous = *trace.last().unwrap();
        let before = (state.served.clone(), state.psd.clone());
        match opts.power_mode {
            PowerMode::Continuous => {
                state.psd = p_with(&state, net, exec, opts.fault);
                check_finite(&state.psd, "p", it)?;
            }
            PowerMode::Binary => {
                // nearest on/off level to the continuous update
                let p = p_with(&state, net, exec, opts.fault);
                check_finite(&p, "p", it)?;
                for (psd, p) in state.psd.iter_mut().zip(p) {
                    *psd = if p >= 0.5 * net.p_max { net.p_max } else { 0.0 };
                }
            }
            PowerMode::Frozen => {}
        }
        let mut objective;
        (gamma, objective) = settle(&mut state, net, opts.power_mode, exec);
        if opts.power_mode == PowerMode::Binary && objective < previous {
            // the rounded step lost ground; redo the cycle without it
            (state.served, state.psd) = before;
            (gamma, objective) = settle(&mut state, net, opts.power_mode, exec);
        }
        if !objective.is_finite() {
            return Err(Error::Numerical {
                iteration: it,
                detail: format!("objective {objective}"),
            });
        }
        trace.push(objective);
        if objective < previous - 1e-9 - 1e-12 * previous.abs() {
            return Err(Error::NotMonotone {
                iteration: it,
                previous,
                current: objective,
            });
        }
        if (objective - previous).abs() <= opts.tol * previous.abs() {
            converged = true;
            break;
        }
    }

    Ok(AffineSolveReport {
        profile: state.profile(),
        objective_trace: trace,
        iterations,
        converged,
    })
}
