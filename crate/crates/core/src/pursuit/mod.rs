//! Profile pursuit: Frank-Wolfe over power profiles.
//!
//! Each outer iteration linearizes the utility at the current rates, asks
//! the affine solver for the profile that maximizes the linearization, adds
//! it to the working set and re-optimizes all segment widths. Adding a
//! profile only enlarges the feasible set of widths, so the utility trace is
//! nondecreasing.

pub mod beta;
pub mod sparsity;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affine::{
    affine_objective, initial_profile, solve_affine, AffineOptions, AffineSolveReport, InitRule, PowerMode,
};
use crate::channel::Network;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rates::{profile_rates_sparse, AllocationPlan, PowerProfile};
use crate::utility::UtilitySpec;

pub use beta::{optimize_beta, optimize_beta_rates, profile_rate_vectors, BetaOptions, BetaSolution, SparseRates};

/// Random redraws attempted before giving up on a distinct profile.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone)]
pub struct PursuitOptions {
    pub affine: AffineOptions,
    pub beta: BetaOptions,
    /// Cap on `|P|`; `None` means `k + 1`.
    pub max_profiles: Option<usize>,
    /// Relative utility improvement counted as a stall.
    pub outer_tol: f64,
    /// Consecutive stalls that end the pursuit.
    pub stall_limit: usize,
    /// Seed of the random-profile generator.
    pub seed: u64,
    /// Also run the affine solver from the best existing profile and keep
    /// the better answer. Raises utility at the cost of more outer
    /// iterations and more zero-width profiles.
    pub warm_best_response: bool,
    pub exec: Execution,
}

impl Default for PursuitOptions {
    fn default() -> Self {
        PursuitOptions {
            affine: AffineOptions::default(),
            beta: BetaOptions::default(),
            max_profiles: None,
            outer_tol: 1e-5,
            stall_limit: 3,
            seed: 0,
            warm_best_response: false,
            exec: Execution::Parallel,
        }
    }
}

impl PursuitOptions {
    pub fn with_power_mode(mut self, mode: PowerMode) -> Self {
        self.affine.power_mode = mode;
        self
    }
}

/// One row of the pursuit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer_iter: usize,
    pub utility: f64,
    /// Rate shortfall `Σ (λ_j - r_j)^+` (bits/s) while infeasible.
    pub deficit: f64,
    pub profiles: usize,
    pub active_segments: usize,
    pub inner_iterations: usize,
    pub random_substitute: bool,
}

#[derive(Debug, Clone)]
pub struct PursuitState {
    pub profiles: Vec<PowerProfile>,
    pub beta: Vec<f64>,
    pub rates: Vec<f64>,
    pub trace: Vec<OuterRecord>,
}

impl PursuitState {
    pub fn utility(&self) -> f64 {
        self.trace.last().map_or(f64::NEG_INFINITY, |r| r.utility)
    }

    pub fn utility_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.utility).collect()
    }

    pub fn active_segments(&self) -> usize {
        self.trace.last().map_or(0, |r| r.active_segments)
    }

    /// Outer iterations performed (profiles added after the start).
    pub fn outer_iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn inner_iterations(&self) -> Vec<usize> {
        self.trace.iter().skip(1).map(|r| r.inner_iterations).collect()
    }

    /// Whether the utility never dropped by more than `rel_tol` (relative).
    /// A step out of `-inf` always counts as an increase.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.trace.windows(2).all(|w| {
            let (a, b) = (w[0].utility, w[1].utility);
            a == f64::NEG_INFINITY || b >= a - rel_tol * a.abs().max(1e-12)
        })
    }
}

/// Every AP at `p_max`, serving its strongest candidate device.
pub fn full_reuse_profile(net: &Network) -> PowerProfile {
    let ones = vec![1.0; net.n_devices()];
    initial_profile(&ones, net, PowerMode::Continuous, InitRule::Strongest)
}

fn active(beta: &[f64], bandwidth: f64) -> usize {
    beta.iter().filter(|&&b| b > crate::rates::BANDWIDTH_TOL * bandwidth).count()
}

fn improvement(old: &BetaSolution, new: &BetaSolution) -> f64 {
    match (old.feasible(), new.feasible()) {
        (true, true) => (new.utility - old.utility) / old.utility.abs().max(f64::MIN_POSITIVE),
        (false, true) => f64::INFINITY,
        (false, false) if old.deficit > 0.0 => (old.deficit - new.deficit) / old.deficit,
        _ => 0.0,
    }
}

/// Weights of the linearized objective at the current rates. While some
/// queue is unstable the utility is `-inf` everywhere nearby, so the
/// shortfall `Σ_j ((t_j - r_j)^+)^2` minimized by the feasibility phase is
/// linearized instead.
fn linearization(u: &UtilitySpec, sol: &BetaSolution, margin: f64) -> Vec<f64> {
    match u.loads() {
        Some(loads) if !sol.feasible() => loads
            .iter()
            .zip(&sol.rates)
            .map(|(l, r)| (l * (1.0 + margin) - r).max(0.0))
            .collect(),
        _ => u.gradient(&sol.rates),
    }
}

/// Runs the affine solver from its default start and, if enabled, from the
/// existing profile scoring best under `weights`, preferring a profile not
/// yet in the working set and then the higher objective.
fn best_response(
    weights: &[f64],
    net: &Network,
    profiles: &[PowerProfile],
    opts: &PursuitOptions,
) -> Result<AffineSolveReport> {
    let fresh = solve_affine(weights, net, None, &opts.affine)?;
    if !opts.warm_best_response {
        return Ok(fresh);
    }
    let incumbent = profiles
        .iter()
        .map(|p| (affine_objective(p, weights, net), p))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p);
    let Some(incumbent) = incumbent else {
        return Ok(fresh);
    };
    let warm = solve_affine(weights, net, Some(incumbent), &opts.affine)?;
    let key = |r: &AffineSolveReport| (!profiles.contains(&r.profile), r.objective());
    let (kf, kw) = (key(&fresh), key(&warm));
    Ok(if kw > kf { warm } else { fresh })
}

fn random_distinct(
    existing: &[PowerProfile],
    net: &Network,
    mode: PowerMode,
    rng: &mut ChaCha8Rng,
) -> Option<PowerProfile> {
    (0..MAX_REDRAWS).find_map(|_| {
        let p = initial_profile(&[], net, mode, InitRule::Random { seed: rng.next_u64() });
        (!existing.contains(&p)).then_some(p)
    })
}

/// Runs the pursuit from the full-reuse profile.
pub fn pursue(u: &UtilitySpec, net: &Network, opts: &PursuitOptions) -> Result<(AllocationPlan, PursuitState)> {
    pursue_from(u, net, None, opts)
}

/// Runs the pursuit starting from the profiles and widths of `warm`, or
/// from the full-reuse profile when `warm` is `None`.
pub fn pursue_from(
    u: &UtilitySpec,
    net: &Network,
    warm: Option<&AllocationPlan>,
    opts: &PursuitOptions,
) -> Result<(AllocationPlan, PursuitState)> {
    if u.n_devices() != net.n_devices() {
        return Err(Error::Contract("utility and network disagree on the device count".into()));
    }
    let max_profiles = opts.max_profiles.unwrap_or(net.n_devices() + 1);
    if max_profiles == 0 {
        return Err(Error::validation("max_profiles", "must be at least 1"));
    }
    let mode = opts.affine.power_mode;
    let (mut profiles, start_beta) = match warm {
        Some(plan) => {
            let mut seen: Vec<PowerProfile> = Vec::new();
            let mut widths: Vec<f64> = Vec::new();
            for (p, &b) in plan.profiles.iter().zip(&plan.beta) {
                let p = p.clone().canonical();
                match seen.iter().position(|q| *q == p) {
                    Some(m) => widths[m] += b,
                    None => {
                        seen.push(p);
                        widths.push(b);
                    }
                }
            }
            (seen, widths)
        }
        None => (vec![full_reuse_profile(net)], vec![net.bandwidth]),
    };
    let mut rho = profile_rate_vectors(&profiles, net, opts.exec);
    let mut sol = optimize_beta_rates(&rho, u, net.bandwidth, Some(&start_beta), &opts.beta)?;
    let mut trace = vec![OuterRecord {
        outer_iter: 0,
        utility: sol.utility,
        deficit: sol.deficit,
        profiles: profiles.len(),
        active_segments: active(&sol.beta, net.bandwidth),
        inner_iterations: 0,
        random_substitute: false,
    }];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stalls = 0;
    let mut outer = 0;
    while profiles.len() < max_profiles {
        outer += 1;
        let wrap = |e: Error| Error::Pursuit {
            outer,
            source: Box::new(e),
        };
        let mut weights = linearization(u, &sol, opts.beta.feasibility_margin);
        let top = weights.iter().cloned().fold(0.0, f64::max);
        if top > 0.0 && top.is_finite() {
            for c in &mut weights {
                *c /= top;
            }
        }
        let report = best_response(&weights, net, &profiles, opts).map_err(wrap)?;
        let mut candidate = report.profile;
        let duplicate = profiles.contains(&candidate);
        if duplicate {
            candidate = random_distinct(&profiles, net, mode, &mut rng)
                .ok_or_else(|| wrap(Error::Contract("no distinct profile left to add".into())))?;
        }
        rho.push(profile_rates_sparse(&candidate, net));
        profiles.push(candidate);
        let mut warm_beta = sol.beta.clone();
        warm_beta.push(0.0);
        let next = optimize_beta_rates(&rho, u, net.bandwidth, Some(&warm_beta), &opts.beta).map_err(wrap)?;
        let gain = improvement(&sol, &next);
        sol = next;
        trace.push(OuterRecord {
            outer_iter: outer,
            utility: sol.utility,
            deficit: sol.deficit,
            profiles: profiles.len(),
            active_segments: active(&sol.beta, net.bandwidth),
            inner_iterations: report.iterations,
            random_substitute: duplicate,
        });
        log::debug!(
            "outer {outer}: utility {:.6e} deficit {:.3e} |P| {} active {} inner {}",
            sol.utility,
            sol.deficit,
            profiles.len(),
            active(&sol.beta, net.bandwidth),
            report.iterations
        );
        if gain < opts.outer_tol {
            stalls += 1;
            if stalls >= opts.stall_limit {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    let full = AllocationPlan::new(profiles.clone(), sol.beta.clone(), net)?;
    let plan = full.pruned(net)?;
    Ok((
        plan,
        PursuitState {
            profiles,
            beta: sol.beta,
            rates: sol.rates,
            trace,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::plan_rates;
    use crate::rates::tests::unit_network;

    #[test]
    fn single_link_converges_fast() {
        let net = unit_network(1, 1, vec![1.0]);
        let u = UtilitySpec::delay(vec![0.5], 1.0);
        let (plan, state) = pursue(&u, &net, &PursuitOptions::default()).unwrap();
        assert!(state.outer_iterations() <= 2);
        assert_eq!(plan.profiles.len(), 1);
        assert_eq!(plan.profiles[0].served, vec![Some(0)]);
        assert_eq!(plan.profiles[0].psd, vec![1.0]);
        assert!((plan.beta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_profile_is_replaced() {
        // the affine solver returns the full-reuse profile again
        let net = unit_network(1, 1, vec![1.0]);
        let u = UtilitySpec::weighted_sum_rate(vec![1.0]);
        let opts = PursuitOptions {
            max_profiles: Some(2),
            ..Default::default()
        };
        let (_, state) = pursue(&u, &net, &opts).unwrap();
        assert_eq!(state.profiles.len(), 2);
        assert!(state.trace[1].random_substitute);
        assert_ne!(state.profiles[0], state.profiles[1]);
    }

    #[test]
    fn trace_is_monotone_and_widths_sum() {
        let net = unit_network(3, 3, vec![1.0, 0.6, 0.2, 0.6, 1.0, 0.6, 0.2, 0.6, 1.0]);
        let u = UtilitySpec::delay(vec![0.3, 0.3, 0.3], 1.0);
        let (plan, state) = pursue(&u, &net, &PursuitOptions::default()).unwrap();
        assert!(state.is_monotone(1e-9));
        assert!((plan.beta.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(plan.active_segments() <= 4);
    }

    #[test]
    fn strong_interference_prefers_orthogonal_split() {
        let net = unit_network(2, 2, vec![100.0, 90.0, 90.0, 100.0]);
        let u = UtilitySpec::delay(vec![0.5, 0.5], 1.0);
        let reuse = PowerProfile { served: vec![Some(0), Some(1)], psd: vec![1.0, 1.0] };
        let solo0 = PowerProfile { served: vec![Some(0), None], psd: vec![1.0, 0.0] };
        let solo1 = PowerProfile { served: vec![None, Some(1)], psd: vec![0.0, 1.0] };
        let value = |profiles: &[PowerProfile], beta: &[f64]| u.value(&plan_rates(profiles, beta, &net).unwrap());
        let oracle = value(&[reuse], &[1.0]).max(value(&[solo0, solo1], &[0.5, 0.5]));
        let opts = PursuitOptions { max_profiles: Some(12), ..Default::default() };
        let (plan, state) = pursue(&u, &net, &opts).unwrap();
        assert!(state.utility() >= oracle - 1e-9 * oracle.abs());
        assert!(plan.active_segments() >= 2);
        assert!(plan.profiles.iter().all(|p| p.active_count() == 1));
    }
}
