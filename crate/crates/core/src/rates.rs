//! SINR, spectral efficiency and per-device rates of power profiles and
//! allocation plans, plus the plan data model and its file format.
//!
//! A [`PowerProfile`] is one flat spectrum segment: every AP serves at most
//! one device at a constant PSD. An [`AllocationPlan`] splits the band into
//! segments of width `beta[m]`, one profile each.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::Network;
use crate::error::{Error, Result};

/// Relative tolerance on `Σ beta = W`.
pub const BANDWIDTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    /// Device served by each AP; `None` is idle.
    pub served: Vec<Option<usize>>,
    /// PSD of each AP (W/Hz).
    pub psd: Vec<f64>,
}

impl PowerProfile {
    pub fn idle(n_aps: usize) -> Self {
        PowerProfile {
            served: vec![None; n_aps],
            psd: vec![0.0; n_aps],
        }
    }

    pub fn n_aps(&self) -> usize {
        self.served.len()
    }

    /// Power actually radiated by AP `i`; idle APs radiate nothing.
    #[inline]
    pub fn radiated(&self, i: usize) -> f64 {
        if self.served[i].is_some() {
            self.psd[i]
        } else {
            0.0
        }
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.served[i].is_some() && self.psd[i] > 0.0
    }

    pub fn active_count(&self) -> usize {
        (0..self.n_aps()).filter(|&i| self.is_active(i)).count()
    }

    /// Idle APs get zero PSD and zero-PSD APs become idle.
    pub fn canonicalize(&mut self) {
        for i in 0..self.n_aps() {
            if self.served[i].is_none() || self.psd[i] <= 0.0 {
                self.served[i] = None;
                self.psd[i] = 0.0;
            }
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Checks `z_i ∈ K_i ∪ {idle}` and `p_i ∈ [0, p_max]`.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.served.len() != net.n_aps() || self.psd.len() != net.n_aps() {
            return Err(Error::Contract(format!(
                "profile has {} APs, network has {}",
                self.served.len(),
                net.n_aps()
            )));
        }
        let slack = net.p_max * 1e-12;
        for i in 0..self.n_aps() {
            let p = self.psd[i];
            if !(p.is_finite() && p >= 0.0 && p <= net.p_max + slack) {
                return Err(Error::Contract(format!("AP {i}: PSD {p} outside [0, p_max]")));
            }
            if let Some(j) = self.served[i] {
                if j >= net.n_devices() || !net.nb.contains(i, j) {
                    return Err(Error::Contract(format!("AP {i} serves device {j} outside its candidate set")));
                }
            }
        }
        Ok(())
    }
}

/// Interference-plus-noise PSD at `device` from its neighborhood, excluding
/// AP `except`.
#[inline]
pub(crate) fn interference(profile: &PowerProfile, net: &Network, device: usize, except: usize) -> f64 {
    let mut total = net.nb.residual_noise(device);
    for &(l, g) in net.nb.device_links(device) {
        if l != except {
            total += profile.radiated(l) * g;
        }
    }
    total
}

/// SINR of link `ap -> device` under `profile`.
pub fn sinr(profile: &PowerProfile, ap: usize, device: usize, net: &Network) -> Result<f64> {
    if device >= net.n_devices() || !net.nb.contains(ap, device) {
        return Err(Error::Contract(format!("AP {ap} is not in the neighborhood of device {device}")));
    }
    let signal = profile.psd[ap] * net.gains.get(ap, device);
    Ok(signal / interference(profile, net, device, ap))
}

/// Shannon spectral efficiency in bits/s/Hz.
#[inline]
pub fn spectral_efficiency(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

/// Per-device spectral efficiency (bits/s/Hz) as sparse `(device, value)`
/// pairs, sorted by device, with zero entries omitted.
pub fn profile_rates_sparse(profile: &PowerProfile, net: &Network) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for i in 0..profile.n_aps() {
        let Some(j) = profile.served[i] else { continue };
        let p = profile.psd[i];
        if p <= 0.0 {
            continue;
        }
        let s = spectral_efficiency(p * net.gains.get(i, j) / interference(profile, net, j, i));
        out.push((j, s));
    }
    out.sort_by_key(|&(j, _)| j);
    out.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    out.retain(|&(_, s)| s > 0.0);
    out
}

/// Per-device spectral efficiency (bits/s/Hz): the sum over APs serving the
/// device.
pub fn profile_rates(profile: &PowerProfile, net: &Network) -> Vec<f64> {
    let mut r = vec![0.0; net.n_devices()];
    for (j, s) in profile_rates_sparse(profile, net) {
        r[j] = s;
    }
    r
}

fn check_bandwidth(beta: &[f64], bandwidth: f64) -> Result<()> {
    if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Contract(format!("segment width {b} is negative or non-finite")));
    }
    let total: f64 = beta.iter().sum();
    if (total - bandwidth).abs() > BANDWIDTH_TOL * bandwidth {
        return Err(Error::Contract(format!(
            "segment widths sum to {total}, expected {bandwidth}"
        )));
    }
    Ok(())
}

/// Per-device rates in bits/s: `r_j = Σ_m beta_m ρ^m_j`.
pub fn plan_rates(profiles: &[PowerProfile], beta: &[f64], net: &Network) -> Result<Vec<f64>> {
    if profiles.len() != beta.len() {
        return Err(Error::Contract("one width per profile required".into()));
    }
    check_bandwidth(beta, net.bandwidth)?;
    let mut r = vec![0.0; net.n_devices()];
    for (profile, &b) in profiles.iter().zip(beta) {
        if b == 0.0 {
            continue;
        }
        for (j, s) in profile_rates_sparse(profile, net) {
            r[j] += b * s;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub profiles: Vec<PowerProfile>,
    /// Segment widths in Hz.
    pub beta: Vec<f64>,
    /// Per-device rates in bits/s.
    pub rates: Vec<f64>,
}

impl AllocationPlan {
    /// Validates profiles and widths and computes the rates.
    pub fn new(profiles: Vec<PowerProfile>, beta: Vec<f64>, net: &Network) -> Result<Self> {
        for p in &profiles {
            p.validate(net)?;
        }
        let rates = plan_rates(&profiles, &beta, net)?;
        Ok(AllocationPlan { profiles, beta, rates })
    }

    /// Number of segments wider than `1e-9 W`.
    pub fn active_segments(&self) -> usize {
        let total: f64 = self.beta.iter().sum();
        self.beta.iter().filter(|&&b| b > BANDWIDTH_TOL * total).count()
    }

    /// Drops segments of width at most `1e-9 W` and renormalizes the rest so
    /// they still sum to the band.
    pub fn pruned(&self, net: &Network) -> Result<Self> {
        let total: f64 = self.beta.iter().sum();
        let keep: Vec<usize> = (0..self.beta.len())
            .filter(|&m| self.beta[m] > BANDWIDTH_TOL * total)
            .collect();
        let kept: f64 = keep.iter().map(|&m| self.beta[m]).sum();
        let scale = net.bandwidth / kept;
        let profiles = keep.iter().map(|&m| self.profiles[m].clone()).collect();
        let beta = keep.iter().map(|&m| self.beta[m] * scale).collect();
        AllocationPlan::new(profiles, beta, net)
    }

    pub fn bandwidth(&self) -> f64 {
        self.beta.iter().sum()
    }
}

/// Per-AP transmit power `P_i = Σ_m beta_m p_i^m` (W).
pub fn plan_power(plan: &AllocationPlan) -> Vec<f64> {
    let n = plan.profiles.first().map_or(0, PowerProfile::n_aps);
    let mut power = vec![0.0; n];
    for (profile, &b) in plan.profiles.iter().zip(&plan.beta) {
        for (i, pw) in power.iter_mut().enumerate() {
            *pw += b * profile.radiated(i);
        }
    }
    power
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRecord {
    /// Share of the band, `beta / W`.
    fraction: f64,
    /// `(ap, device, psd)` for every active AP.
    links: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scheme: Option<String>,
    n_aps: usize,
    n_devices: usize,
    bandwidth_hz: f64,
    segments: Vec<SegmentRecord>,
    rates: Vec<f64>,
}

impl AllocationPlan {
    pub fn to_json(&self, scheme: Option<&str>, n_devices: usize) -> String {
        let w = self.bandwidth();
        let segments = self
            .profiles
            .iter()
            .zip(&self.beta)
            .map(|(p, &b)| SegmentRecord {
                fraction: b / w,
                links: (0..p.n_aps())
                    .filter_map(|i| p.served[i].filter(|_| p.psd[i] > 0.0).map(|j| (i, j, p.psd[i])))
                    .collect(),
            })
            .collect();
        let file = PlanFile {
            scheme: scheme.map(str::to_owned),
            n_aps: self.profiles.first().map_or(0, PowerProfile::n_aps),
            n_devices,
            bandwidth_hz: w,
            segments,
            rates: self.rates.clone(),
        };
        serde_json::to_string_pretty(&file).expect("plan serializes")
    }

    /// Parses a plan and recomputes its rates against `net`.
    pub fn from_json(text: &str, net: &Network) -> Result<(Self, Option<String>)> {
        let file: PlanFile = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "allocation plan".into(),
            source,
        })?;
        if file.n_aps != net.n_aps() || file.n_devices != net.n_devices() {
            return Err(Error::validation("plan", "AP/device counts do not match the scenario"));
        }
        let mut profiles = Vec::with_capacity(file.segments.len());
        let mut fractions = Vec::with_capacity(file.segments.len());
        for seg in &file.segments {
            let mut p = PowerProfile::idle(file.n_aps);
            for &(i, j, psd) in &seg.links {
                if i >= file.n_aps {
                    return Err(Error::validation("plan", format!("AP index {i} out of range")));
                }
                p.served[i] = Some(j);
                p.psd[i] = psd;
            }
            profiles.push(p);
            fractions.push(seg.fraction);
        }
        let total: f64 = fractions.iter().sum();
        let beta = fractions.iter().map(|f| f / total * net.bandwidth).collect();
        Ok((AllocationPlan::new(profiles, beta, net)?, file.scheme))
    }

    pub fn save(&self, path: impl AsRef<Path>, scheme: Option<&str>, n_devices: usize) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json(scheme, n_devices)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, net: &Network) -> Result<(Self, Option<String>)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, net)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::channel::LinkGains;

    /// Unit-noise network with `p_max = 1`, threshold low enough that every
    /// AP is in every neighborhood.
    pub(crate) fn unit_network(n: usize, k: usize, g: Vec<f64>) -> Network {
        let gains = LinkGains::from_matrix(n, k, g).unwrap();
        Network::from_gains(gains, 1.0, 1.0, 1.0, 1e-9, 20)
    }

    fn profile(served: Vec<Option<usize>>, psd: Vec<f64>) -> PowerProfile {
        PowerProfile { served, psd }
    }

    #[test]
    fn single_link_sinr() {
        let net = unit_network(1, 1, vec![1.0]);
        let p = profile(vec![Some(0)], vec![1.0]);
        assert_eq!(sinr(&p, 0, 0, &net).unwrap(), 1.0);
        let off = profile(vec![Some(0)], vec![0.0]);
        assert_eq!(sinr(&off, 0, 0, &net).unwrap(), 0.0);
    }

    #[test]
    fn two_ap_sinr() {
        // AP rows: g(0->0)=1, g(1->0)=0.5
        let net = unit_network(2, 1, vec![1.0, 0.5]);
        let p = profile(vec![Some(0), Some(0)], vec![1.0, 1.0]);
        assert!((sinr(&p, 0, 0, &net).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // idle APs do not interfere
        let q = profile(vec![Some(0), None], vec![1.0, 1.0]);
        assert_eq!(sinr(&q, 0, 0, &net).unwrap(), 1.0);
    }

    #[test]
    fn sinr_outside_neighborhood_is_contract_error() {
        let gains = LinkGains::from_matrix(2, 1, vec![1.0, 1e-12]).unwrap();
        let net = Network::from_gains(gains, 1.0, 1.0, 1.0, 1.0, 20);
        let p = profile(vec![Some(0), None], vec![1.0, 0.0]);
        assert!(matches!(sinr(&p, 1, 0, &net), Err(Error::Contract(_))));
    }

    #[test]
    fn efficiency_values() {
        assert_eq!(spectral_efficiency(1.0), 1.0);
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert_eq!(spectral_efficiency(3.0), 2.0);
    }

    #[test]
    fn profile_rate_cases() {
        let net = unit_network(2, 2, vec![1.0, 0.25, 0.5, 2.0]);
        assert_eq!(profile_rates(&PowerProfile::idle(2), &net), vec![0.0, 0.0]);
        // both APs serve device 0: SINR 1/(1+0.5) and 0.5/(1+1)
        let both = profile(vec![Some(0), Some(0)], vec![1.0, 1.0]);
        let r = profile_rates(&both, &net);
        let expect = (1.0f64 + 2.0 / 3.0).log2() + (1.0f64 + 0.25).log2();
        assert!((r[0] - expect).abs() < 1e-14);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn plan_rates_hand_computed() {
        // g: AP0 -> (1, 0.25), AP1 -> (0.5, 2)
        let net = unit_network(2, 2, vec![1.0, 0.25, 0.5, 2.0]);
        let reuse = profile(vec![Some(0), Some(1)], vec![1.0, 1.0]);
        let solo = profile(vec![Some(0), None], vec![1.0, 0.0]);
        let plan = AllocationPlan::new(vec![reuse, solo], vec![0.25, 0.75], &net).unwrap();
        // reuse: dev0 SINR 1/(1+0.5)=2/3, dev1 SINR 2/(1+0.25)=1.6; solo: dev0 SINR 1
        let r0 = 0.25 * (5.0f64 / 3.0).log2() + 0.75 * 1.0;
        let r1 = 0.25 * 2.6f64.log2();
        assert!((plan.rates[0] - r0).abs() < 1e-14);
        assert!((plan.rates[1] - r1).abs() < 1e-14);
    }

    #[test]
    fn plan_linear_in_beta() {
        let net = unit_network(2, 2, vec![1.0, 0.25, 0.5, 2.0]);
        let p = profile(vec![Some(0), Some(1)], vec![1.0, 0.3]);
        let single = plan_rates(&[p.clone()], &[1.0], &net).unwrap();
        let split = plan_rates(&[p.clone(), p], &[0.37, 0.63], &net).unwrap();
        for (a, b) in single.iter().zip(&split) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bandwidth_violation() {
        let net = unit_network(1, 1, vec![1.0]);
        let p = profile(vec![Some(0)], vec![1.0]);
        assert!(matches!(plan_rates(&[p], &[0.5], &net), Err(Error::Contract(_))));
    }

    #[test]
    fn power_accounting() {
        let gains = LinkGains::from_matrix(2, 1, vec![1.0, 1.0]).unwrap();
        let net = Network::from_gains(gains, 2.0, 1.0, 10.0, 1e-9, 20);
        let idle = PowerProfile::idle(2);
        let full = profile(vec![Some(0), None], vec![2.0, 0.0]);
        let plan = AllocationPlan::new(vec![idle.clone(), full.clone()], vec![5.0, 5.0], &net).unwrap();
        assert_eq!(plan_power(&plan), vec![10.0, 0.0]);
        let one = AllocationPlan::new(vec![full], vec![10.0], &net).unwrap();
        assert_eq!(plan_power(&one), vec![20.0, 0.0]);
    }

    #[test]
    fn plan_file_round_trip() {
        let net = unit_network(2, 2, vec![1.0, 0.25, 0.5, 2.0]);
        let a = profile(vec![Some(0), Some(1)], vec![1.0, 0.5]);
        let b = profile(vec![None, Some(0)], vec![0.0, 1.0]);
        let plan = AllocationPlan::new(vec![a, b], vec![0.4, 0.6], &net).unwrap();
        let text = plan.to_json(Some("proposed"), 2);
        let (back, scheme) = AllocationPlan::from_json(&text, &net).unwrap();
        assert_eq!(scheme.as_deref(), Some("proposed"));
        assert_eq!(back.profiles, plan.profiles);
        for (x, y) in back.rates.iter().zip(&plan.rates) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn pruning_drops_empty_segments() {
        let net = unit_network(1, 1, vec![1.0]);
        let p = profile(vec![Some(0)], vec![1.0]);
        let plan = AllocationPlan::new(vec![p.clone(), p], vec![1.0, 0.0], &net).unwrap();
        assert_eq!(plan.active_segments(), 1);
        assert_eq!(plan.pruned(&net).unwrap().profiles.len(), 1);
    }
}
