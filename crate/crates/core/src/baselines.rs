//! Comparison schemes, all producing plans in the common format.
//!
//! [`compare_chain`] runs the schemes so that each one starts from the
//! previous scheme's plan: max-RSRP, then optimized association at full
//! power, then binary power, then continuous power. Every later scheme can
//! represent the earlier plan, so the utilities come out ordered.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affine::PowerMode;
use crate::channel::Network;
use crate::error::{Error, Result};
use crate::pursuit::{pursue_from, PursuitOptions, PursuitState};
use crate::rates::{AllocationPlan, PowerProfile};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Full reuse, every device on its strongest AP.
    MaxRsrp,
    /// Full reuse at peak power with optimized association and shares.
    OptAssoc,
    /// Segments and association optimized with on/off power.
    Pattern,
    /// Segments, association and continuous power optimized.
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::MaxRsrp, Scheme::OptAssoc, Scheme::Pattern, Scheme::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::MaxRsrp => "maxrsrp",
            Scheme::OptAssoc => "optassoc",
            Scheme::Pattern => "pattern",
            Scheme::Proposed => "proposed",
        }
    }

    /// Power mode of the affine solver inside the scheme's pursuit.
    pub fn power_mode(self) -> Option<PowerMode> {
        match self {
            Scheme::MaxRsrp => None,
            Scheme::OptAssoc => Some(PowerMode::Frozen),
            Scheme::Pattern => Some(PowerMode::Binary),
            Scheme::Proposed => Some(PowerMode::Continuous),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::validation("scheme", format!("unknown scheme {s:?}")))
    }
}

/// Strongest AP in each device's neighborhood (`None` if empty).
pub fn strongest_ap(net: &Network) -> Vec<Option<usize>> {
    (0..net.n_devices())
        .map(|j| {
            net.nb
                .device_links(j)
                .iter()
                .fold(None, |best: Option<(usize, f64)>, &(i, g)| match best {
                    Some((_, bg)) if bg >= g => best,
                    _ => Some((i, g)),
                })
                .map(|(i, _)| i)
        })
        .collect()
}

/// Full reuse at peak power with max-RSRP association. An AP claimed by
/// several devices serves them in turn on equal shares of the band, laid
/// out as consecutive sub-bands; an AP nobody claims serves its strongest
/// candidate so that every AP with candidates transmits everywhere.
pub fn full_reuse_maxrsrp(net: &Network) -> Result<AllocationPlan> {
    let n = net.n_aps();
    let mut claims: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, ap) in strongest_ap(net).into_iter().enumerate() {
        if let Some(i) = ap {
            claims[i].push(j);
        }
    }
    for (i, c) in claims.iter_mut().enumerate() {
        if c.is_empty() {
            let strongest = net
                .nb
                .ap_links(i)
                .iter()
                .fold(None, |best: Option<(usize, f64)>, &(j, g)| match best {
                    Some((_, bg)) if bg >= g => best,
                    _ => Some((j, g)),
                });
            c.extend(strongest.map(|(j, _)| j));
        }
    }

    // breakpoints q / |C_i| over all APs, as exact fractions
    let mut cuts: Vec<(usize, usize)> = vec![(0, 1), (1, 1)];
    for c in &claims {
        let d = c.len();
        cuts.extend((1..d).map(|q| (q, d)));
    }
    cuts.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    cuts.dedup_by(|a, b| a.0 * b.1 == b.0 * a.1);

    let mut profiles = Vec::with_capacity(cuts.len() - 1);
    let mut beta = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0].0 as f64 / w[0].1 as f64, w[1].0 as f64 / w[1].1 as f64);
        // AP i serves claims[i][q] on [q/d, (q+1)/d); (num, den) is the left edge
        let (num, den) = w[0];
        let mut p = PowerProfile::idle(n);
        for (i, c) in claims.iter().enumerate() {
            if !c.is_empty() {
                p.served[i] = Some(c[num * c.len() / den]);
                p.psd[i] = net.p_max;
            }
        }
        profiles.push(p);
        beta.push((hi - lo) * net.bandwidth);
    }
    AllocationPlan::new(profiles, beta, net)
}

fn run_pursuit(
    scheme: Scheme,
    u: &UtilitySpec,
    net: &Network,
    warm: Option<&AllocationPlan>,
    opts: &PursuitOptions,
) -> Result<(AllocationPlan, PursuitState)> {
    let mode = scheme.power_mode().expect("pursuit-based scheme");
    pursue_from(u, net, warm, &opts.clone().with_power_mode(mode))
        .map_err(|e| e.context(format!("scheme {scheme}")))
}

/// Full reuse at peak power with association and per-AP shares optimized
/// for `u`; starts from `warm` (typically the max-RSRP plan).
pub fn full_reuse_opt_assoc(
    u: &UtilitySpec,
    net: &Network,
    warm: Option<&AllocationPlan>,
    opts: &PursuitOptions,
) -> Result<(AllocationPlan, PursuitState)> {
    run_pursuit(Scheme::OptAssoc, u, net, warm, opts)
}

/// Segments and association optimized with on/off power.
pub fn pattern_pursuit_full_power(
    u: &UtilitySpec,
    net: &Network,
    warm: Option<&AllocationPlan>,
    opts: &PursuitOptions,
) -> Result<(AllocationPlan, PursuitState)> {
    run_pursuit(Scheme::Pattern, u, net, warm, opts)
}

/// Result of one scheme on one instance.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub plan: AllocationPlan,
    /// `None` for schemes without a pursuit loop.
    pub state: Option<PursuitState>,
    pub utility: f64,
    pub seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = std::time::Instant::now();
    let out = f()?;
    Ok((out, t.elapsed().as_secs_f64()))
}

/// Runs one scheme from scratch (pursuits start from full reuse).
pub fn run_scheme(scheme: Scheme, u: &UtilitySpec, net: &Network, opts: &PursuitOptions) -> Result<SchemeRun> {
    let ((plan, state), seconds) = timed(|| match scheme {
        Scheme::MaxRsrp => Ok((full_reuse_maxrsrp(net)?, None)),
        _ => run_pursuit(scheme, u, net, None, opts).map(|(p, s)| (p, Some(s))),
    })?;
    Ok(SchemeRun {
        scheme,
        utility: u.value(&plan.rates),
        plan,
        state,
        seconds,
    })
}

/// Runs all four schemes, each warm-started from the previous one's plan.
/// Returned in [`Scheme::ALL`] order.
pub fn compare_chain(u: &UtilitySpec, net: &Network, opts: &PursuitOptions) -> Result<Vec<SchemeRun>> {
    let mut runs: Vec<SchemeRun> = Vec::with_capacity(4);
    for scheme in Scheme::ALL {
        let ((plan, state), seconds) = timed(|| match scheme {
            Scheme::MaxRsrp => Ok((full_reuse_maxrsrp(net)?, None)),
            _ => {
                let warm = runs.last().map(|r| &r.plan);
                run_pursuit(scheme, u, net, warm, opts).map(|(p, s)| (p, Some(s)))
            }
        })?;
        runs.push(SchemeRun {
            scheme,
            utility: u.value(&plan.rates),
            plan,
            state,
            seconds,
        });
    }
    Ok(runs)
}
