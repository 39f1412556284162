//! Bandwidth re-optimization over a fixed set of profiles.
//!
//! With the profiles fixed, rates are linear in the segment widths, so
//! maximizing a concave utility over `{beta >= 0, Σ beta = W}` is a convex
//! problem on a scaled simplex. It is solved with pairwise Frank-Wolfe:
//! the linear oracle picks the best vertex, the away vertex is the worst
//! active one, and mass moves between the two with a line search.

use crate::channel::Network;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rates::{profile_rates_sparse, PowerProfile};
use crate::utility::UtilitySpec;

/// Sparse per-device spectral efficiency of one profile.
pub type SparseRates = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct BetaOptions {
    /// Stop when the Frank-Wolfe gap drops below `gap_tol · |u|`.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Relative headroom over the offered load targeted by the feasibility
    /// phase.
    pub feasibility_margin: f64,
}

impl Default for BetaOptions {
    fn default() -> Self {
        BetaOptions {
            gap_tol: 1e-6,
            max_iters: 2000,
            feasibility_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BetaSolution {
    /// Segment widths (Hz).
    pub beta: Vec<f64>,
    /// Per-device rates (bits/s).
    pub rates: Vec<f64>,
    /// Utility at `rates`; `-inf` when no width assignment stabilizes every
    /// queue.
    pub utility: f64,
    /// `Σ_j (λ_j - r_j)^+` in bits/s; zero when feasible.
    pub deficit: f64,
    pub iterations: usize,
}

impl BetaSolution {
    pub fn feasible(&self) -> bool {
        self.utility > f64::NEG_INFINITY
    }
}

/// Separable concave objective maximized by the Frank-Wolfe loop.
enum Objective<'a> {
    Utility(&'a UtilitySpec),
    /// `-Σ_j ((target_j - r_j)^+)^2`
    Shortfall(&'a [f64]),
}

impl Objective<'_> {
    #[inline]
    fn term(&self, j: usize, r: f64) -> f64 {
        match self {
            Objective::Utility(u) => u.term(j, r),
            Objective::Shortfall(t) => {
                let s = (t[j] - r).max(0.0);
                -s * s
            }
        }
    }

    #[inline]
    fn derivative(&self, j: usize, r: f64) -> f64 {
        match self {
            Objective::Utility(u) => u.term_derivative(j, r),
            Objective::Shortfall(t) => 2.0 * (t[j] - r).max(0.0),
        }
    }

    fn value(&self, r: &[f64]) -> f64 {
        match self {
            Objective::Utility(u) => u.value(r),
            Objective::Shortfall(_) => (0..r.len()).map(|j| self.term(j, r[j])).sum(),
        }
    }
}

/// Spectral-efficiency vectors of every profile.
pub fn profile_rate_vectors(profiles: &[PowerProfile], net: &Network, exec: Execution) -> Vec<SparseRates> {
    par::map_slice(exec, profiles, |p| profile_rates_sparse(p, net))
}

fn dense_rates(rho: &[SparseRates], w: &[f64], bandwidth: f64, k: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    for (vec, &wm) in rho.iter().zip(w) {
        if wm == 0.0 {
            continue;
        }
        for &(j, s) in vec {
            r[j] += bandwidth * wm * s;
        }
    }
    r
}

/// `bandwidth · (ρ^a - ρ^b)` as a sparse vector.
fn difference(a: &SparseRates, b: &SparseRates, bandwidth: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() || y < b.len() {
        let ja = a.get(x).map_or(usize::MAX, |e| e.0);
        let jb = b.get(y).map_or(usize::MAX, |e| e.0);
        if ja == jb {
            out.push((ja, bandwidth * (a[x].1 - b[y].1)));
            x += 1;
            y += 1;
        } else if ja < jb {
            out.push((ja, bandwidth * a[x].1));
            x += 1;
        } else {
            out.push((jb, -bandwidth * b[y].1));
            y += 1;
        }
    }
    out.retain(|&(_, d)| d != 0.0);
    out
}

/// Largest `t ∈ [0, t_max]` maximizing the concave `φ(t) = f(r + tΔ)`
/// restricted to the support of `Δ`.
fn line_search(obj: &Objective, r: &[f64], delta: &[(usize, f64)], t_max: f64) -> f64 {
    let eval = |t: f64| -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for &(j, d) in delta {
            let x = r[j] + t * d;
            value += obj.term(j, x);
            slope += obj.derivative(j, x) * d;
        }
        (value, slope)
    };
    let (v0, _) = eval(0.0);
    let (v_max, s_max) = eval(t_max);
    if v_max > f64::NEG_INFINITY && s_max >= 0.0 {
        return if v_max >= v0 { t_max } else { 0.0 };
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let (v, s) = eval(mid);
        if v == f64::NEG_INFINITY || s.is_nan() || s < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * t_max {
            break;
        }
    }
    if eval(lo).0 >= v0 {
        lo
    } else {
        0.0
    }
}

struct FwOutcome {
    iterations: usize,
}

/// Pairwise Frank-Wolfe on the unit simplex, updating `w` and `r` in place.
/// Stops early once `stop(r)` holds.
fn frank_wolfe(
    obj: &Objective,
    rho: &[SparseRates],
    bandwidth: f64,
    w: &mut [f64],
    r: &mut [f64],
    gap_tol: f64,
    abs_tol: f64,
    max_iters: usize,
    stop: &dyn Fn(&[f64]) -> bool,
) -> FwOutcome {
    let k = r.len();
    let mut grad = vec![0.0; k];
    let mut iterations = 0;
    while iterations < max_iters {
        if stop(r) {
            break;
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g = obj.derivative(j, r[j]);
        }
        let scores: Vec<f64> = rho
            .iter()
            .map(|v| bandwidth * v.iter().map(|&(j, s)| grad[j] * s).sum::<f64>())
            .collect();
        let fw = (0..rho.len())
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
            .expect("at least one profile");
        let away = (0..rho.len())
            .filter(|&m| w[m] > 0.0)
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
            .expect("weights sum to one");
        let mean: f64 = scores.iter().zip(w.iter()).map(|(s, wm)| s * wm).sum();
        let gap = scores[fw] - mean;
        let value = obj.value(r);
        if !(gap > gap_tol * value.abs() && gap > abs_tol) || fw == away {
            break;
        }
        iterations += 1;
        let delta = difference(&rho[fw], &rho[away], bandwidth);
        let t_max = w[away];
        let t = line_search(obj, r, &delta, t_max);
        if t <= 0.0 {
            break;
        }
        if t >= t_max {
            w[fw] += w[away];
            w[away] = 0.0;
        } else {
            w[fw] += t;
            w[away] -= t;
        }
        for &(j, d) in &delta {
            r[j] += t * d;
        }
    }
    FwOutcome { iterations }
}

/// Optimal widths for precomputed profile rate vectors. `warm` supplies
/// starting widths (Hz, one per profile); otherwise the band starts evenly
/// split.
pub fn optimize_beta_rates(
    rho: &[SparseRates],
    u: &UtilitySpec,
    bandwidth: f64,
    warm: Option<&[f64]>,
    opts: &BetaOptions,
) -> Result<BetaSolution> {
    if rho.is_empty() {
        return Err(Error::Contract("bandwidth optimization needs at least one profile".into()));
    }
    let m = rho.len();
    let k = u.n_devices();
    let mut w: Vec<f64> = match warm {
        Some(b) if b.len() == m && b.iter().sum::<f64>() > 0.0 => {
            let total: f64 = b.iter().sum();
            b.iter().map(|x| x / total).collect()
        }
        Some(_) => return Err(Error::Contract("warm start must give one positive width per profile".into())),
        None => vec![1.0 / m as f64; m],
    };
    let mut r = dense_rates(rho, &w, bandwidth, k);
    let mut iterations = 0;

    if let Some(loads) = u.loads() {
        let infeasible = |r: &[f64]| r.iter().zip(&loads).any(|(x, l)| x <= l);
        if infeasible(&r) {
            let targets: Vec<f64> = loads.iter().map(|l| l * (1.0 + opts.feasibility_margin)).collect();
            let phase = Objective::Shortfall(&targets);
            let scale = targets.iter().map(|t| t * t).sum::<f64>();
            let out = frank_wolfe(
                &phase,
                rho,
                bandwidth,
                &mut w,
                &mut r,
                0.0,
                1e-12 * scale,
                opts.max_iters,
                &|r| !infeasible(r),
            );
            iterations += out.iterations;
            r = dense_rates(rho, &w, bandwidth, k);
            if infeasible(&r) {
                let deficit = r.iter().zip(&loads).map(|(x, l)| (l - x).max(0.0)).sum();
                return Ok(BetaSolution {
                    beta: w.iter().map(|x| x * bandwidth).collect(),
                    rates: r,
                    utility: f64::NEG_INFINITY,
                    deficit,
                    iterations,
                });
            }
        }
    }

    let obj = Objective::Utility(u);
    let out = frank_wolfe(
        &obj,
        rho,
        bandwidth,
        &mut w,
        &mut r,
        opts.gap_tol,
        0.0,
        opts.max_iters,
        &|_| false,
    );
    iterations += out.iterations;
    r = dense_rates(rho, &w, bandwidth, k);
    let mut utility = u.value(&r);
    if utility == f64::NEG_INFINITY {
        // rounding pushed a device onto its pole
        utility = obj.value(&r);
    }
    Ok(BetaSolution {
        beta: w.iter().map(|x| x * bandwidth).collect(),
        rates: r,
        utility,
        deficit: 0.0,
        iterations,
    })
}

/// Optimal widths for a list of profiles.
pub fn optimize_beta(
    profiles: &[PowerProfile],
    u: &UtilitySpec,
    net: &Network,
    opts: &BetaOptions,
) -> Result<BetaSolution> {
    let rho = profile_rate_vectors(profiles, net, Execution::Parallel);
    optimize_beta_rates(&rho, u, net.bandwidth, None, opts)
}
