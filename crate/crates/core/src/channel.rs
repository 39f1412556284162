//! Average link gains and pruned neighborhoods.
//!
//! Gains follow the LTE macro pathloss pair (LOS / NLOS) with log-normal
//! shadowing. Each device only "hears" the APs in its neighborhood; every
//! other AP is folded into a per-device residual noise floor at full power.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::scenario::{LosModel, NetworkScenario};

/// Pathloss in dB for a link of `distance_m` meters (clamped below at 1 m).
pub fn pathloss_db(distance_m: f64, los: bool) -> f64 {
    let r = distance_m.max(1.0);
    if los {
        30.18 + 26.7 * r.log10()
    } else {
        34.53 + 36.0 * r.log10()
    }
}

/// Dense `n x k` gain matrix, AP-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    n_aps: usize,
    n_devices: usize,
    g: Vec<f64>,
    los: Vec<bool>,
    shadowing_db: Vec<f64>,
}

impl LinkGains {
    /// Builds gains from an AP-major matrix of linear values.
    pub fn from_matrix(n_aps: usize, n_devices: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != n_aps * n_devices {
            return Err(Error::validation("gains", "matrix size does not match n_aps * n_devices"));
        }
        if let Some(bad) = g.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::validation("gains", format!("gain {bad} is not positive and finite")));
        }
        Ok(LinkGains {
            n_aps,
            n_devices,
            los: vec![true; g.len()],
            shadowing_db: vec![0.0; g.len()],
            g,
        })
    }

    #[inline]
    pub fn get(&self, ap: usize, device: usize) -> f64 {
        self.g[ap * self.n_devices + device]
    }

    pub fn is_los(&self, ap: usize, device: usize) -> bool {
        self.los[ap * self.n_devices + device]
    }

    pub fn shadowing_db(&self, ap: usize, device: usize) -> f64 {
        self.shadowing_db[ap * self.n_devices + device]
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn row(&self, ap: usize) -> &[f64] {
        &self.g[ap * self.n_devices..(ap + 1) * self.n_devices]
    }

    /// Writes the matrix as CSV: one row per AP, one column per device.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for i in 0..self.n_aps {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Base of the per-AP RNG streams; placement uses stream 0.
const GAIN_STREAM_BASE: u64 = 1 << 32;

/// Average gains for every AP-device pair.
///
/// Each AP row draws from its own ChaCha stream so rows can be built in
/// parallel without changing the result.
pub fn build_gains(s: &NetworkScenario) -> LinkGains {
    build_gains_with(s, Execution::Parallel)
}

pub fn build_gains_with(s: &NetworkScenario, exec: Execution) -> LinkGains {
    let n = s.n_aps();
    let k = s.n_devices();
    let p = &s.params;
    let rows: Vec<Vec<(f64, bool, f64)>> = par::map_range(exec, n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(GAIN_STREAM_BASE + i as u64);
        (0..k)
            .map(|j| {
                let d = s.distance(i, j);
                // Both draws are always consumed to keep streams aligned.
                let u: f64 = rng.random();
                let z: f64 = StandardNormal.sample(&mut rng);
                let los = match p.los_model {
                    LosModel::Random { scale_m } => u < (-d / scale_m).exp(),
                    LosModel::ForceLos => true,
                    LosModel::ForceNlos => false,
                };
                let sigma = if los { p.shadowing_los_db } else { p.shadowing_nlos_db };
                let x = if p.shadowing { sigma * z } else { 0.0 };
                let loss = pathloss_db(d, los) + x;
                (10f64.powf(-loss / 10.0), los, x)
            })
            .collect()
    });
    let mut g = Vec::with_capacity(n * k);
    let mut los = Vec::with_capacity(n * k);
    let mut shadowing_db = Vec::with_capacity(n * k);
    for row in rows {
        for (gv, l, x) in row {
            g.push(gv);
            los.push(l);
            shadowing_db.push(x);
        }
    }
    LinkGains {
        n_aps: n,
        n_devices: k,
        g,
        los,
        shadowing_db,
    }
}

/// Candidate sets `N_j` (APs heard by device j) and `K_i` (devices AP i may
/// serve), kept dual: `i ∈ N_j ⇔ j ∈ K_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    /// Per device: `(ap, gain)` sorted by AP index.
    aps_of_device: Vec<Vec<(usize, f64)>>,
    /// Per AP: `(device, gain)` sorted by device index.
    devices_of_ap: Vec<Vec<(usize, f64)>>,
    residual_noise: Vec<f64>,
    unserved: Vec<usize>,
}

impl Neighborhoods {
    pub fn n_of_device(&self, device: usize) -> impl Iterator<Item = usize> + '_ {
        self.aps_of_device[device].iter().map(|&(i, _)| i)
    }

    pub fn k_of_ap(&self, ap: usize) -> impl Iterator<Item = usize> + '_ {
        self.devices_of_ap[ap].iter().map(|&(j, _)| j)
    }

    /// `(ap, gain)` pairs of the neighborhood of `device`.
    #[inline]
    pub fn device_links(&self, device: usize) -> &[(usize, f64)] {
        &self.aps_of_device[device]
    }

    /// `(device, gain)` pairs AP `ap` may serve.
    #[inline]
    pub fn ap_links(&self, ap: usize) -> &[(usize, f64)] {
        &self.devices_of_ap[ap]
    }

    pub fn contains(&self, ap: usize, device: usize) -> bool {
        self.aps_of_device[device]
            .binary_search_by_key(&ap, |&(i, _)| i)
            .is_ok()
    }

    /// Residual noise PSD `n_j` (W/Hz).
    #[inline]
    pub fn residual_noise(&self, device: usize) -> f64 {
        self.residual_noise[device]
    }

    /// Devices with an empty neighborhood; they cannot be served.
    pub fn unserved(&self) -> &[usize] {
        &self.unserved
    }

    pub fn n_aps(&self) -> usize {
        self.devices_of_ap.len()
    }

    pub fn n_devices(&self) -> usize {
        self.aps_of_device.len()
    }

    pub fn max_device_degree(&self) -> usize {
        self.aps_of_device.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_ap_degree(&self) -> usize {
        self.devices_of_ap.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Thresholds, caps and dualizes the candidate sets.
///
/// `N_j = { i : p_max g_ij > xi n0 }`, truncated to the `cap` strongest links.
/// APs that end up with more than `cap` devices drop their weakest ones,
/// sparing devices for which they are the strongest AP, so both
/// `|N_j| <= cap` and `|K_i| <= cap` hold and capping alone rarely leaves a
/// device unserved. Ties break toward the lower index. `n_j` adds every AP outside `N_j` at full power.
pub fn build_neighborhoods(
    gains: &LinkGains,
    p_max: f64,
    noise_psd: f64,
    snr_threshold: f64,
    cap: usize,
) -> Neighborhoods {
    let n = gains.n_aps();
    let k = gains.n_devices();
    let floor = snr_threshold * noise_psd;

    let mut members: Vec<Vec<usize>> = (0..k)
        .map(|j| {
            let mut cand: Vec<usize> = (0..n).filter(|&i| p_max * gains.get(i, j) > floor).collect();
            cand.sort_by(|&a, &b| gains.get(b, j).total_cmp(&gains.get(a, j)).then(a.cmp(&b)));
            cand.truncate(cap);
            cand
        })
        .collect();

    let primary: Vec<Option<usize>> = members.iter().map(|m| m.first().copied()).collect();
    let mut devices_of_ap: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, m) in members.iter().enumerate() {
        for &i in m {
            devices_of_ap[i].push(j);
        }
    }
    for (i, devs) in devices_of_ap.iter_mut().enumerate() {
        if devs.len() > cap {
            // a device's strongest AP keeps it if at all possible
            devs.sort_by(|&a, &b| {
                let pa = primary[a] == Some(i);
                let pb = primary[b] == Some(i);
                pb.cmp(&pa)
                    .then(gains.get(i, b).total_cmp(&gains.get(i, a)))
                    .then(a.cmp(&b))
            });
            for &j in &devs[cap..] {
                members[j].retain(|&x| x != i);
            }
            devs.truncate(cap);
        }
        devs.sort_unstable();
    }

    let aps_of_device: Vec<Vec<(usize, f64)>> = members
        .into_iter()
        .enumerate()
        .map(|(j, mut m)| {
            m.sort_unstable();
            m.into_iter().map(|i| (i, gains.get(i, j))).collect()
        })
        .collect();
    let devices_of_ap = devices_of_ap
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.into_iter().map(|j| (j, gains.get(i, j))).collect())
        .collect();

    let residual_noise = (0..k)
        .map(|j| {
            let mut inside = aps_of_device[j].iter().map(|&(i, _)| i).peekable();
            let mut excluded = 0.0;
            for i in 0..n {
                if inside.peek() == Some(&i) {
                    inside.next();
                } else {
                    excluded += p_max * gains.get(i, j);
                }
            }
            noise_psd + excluded
        })
        .collect();
    let unserved = (0..k).filter(|&j| aps_of_device[j].is_empty()).collect();

    Neighborhoods {
        aps_of_device,
        devices_of_ap,
        residual_noise,
        unserved,
    }
}

/// Everything the optimizers need about the radio environment.
#[derive(Debug, Clone)]
pub struct Network {
    /// Peak PSD (W/Hz).
    pub p_max: f64,
    /// Thermal noise PSD (W/Hz).
    pub noise_psd: f64,
    pub bandwidth: f64,
    pub gains: LinkGains,
    pub nb: Neighborhoods,
}

impl Network {
    pub fn from_scenario(s: &NetworkScenario) -> Self {
        let gains = build_gains(s);
        let nb = build_neighborhoods(
            &gains,
            s.p_max(),
            s.noise_psd(),
            s.params.snr_threshold,
            s.params.neighborhood_cap,
        );
        Network {
            p_max: s.p_max(),
            noise_psd: s.noise_psd(),
            bandwidth: s.bandwidth(),
            gains,
            nb,
        }
    }

    /// Network from a hand-built gain matrix.
    pub fn from_gains(
        gains: LinkGains,
        p_max: f64,
        noise_psd: f64,
        bandwidth: f64,
        snr_threshold: f64,
        cap: usize,
    ) -> Self {
        let nb = build_neighborhoods(&gains, p_max, noise_psd, snr_threshold, cap);
        Network {
            p_max,
            noise_psd,
            bandwidth,
            gains,
            nb,
        }
    }

    pub fn n_aps(&self) -> usize {
        self.gains.n_aps()
    }

    pub fn n_devices(&self) -> usize {
        self.gains.n_devices()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioParams};

    #[test]
    fn ap_cap_spares_primary_links() {
        // device 2 only hears AP 0, where it is also the weakest device
        let gains = LinkGains::from_matrix(2, 3, vec![10.0, 9.0, 5.0, 20.0, 20.0, 0.5]).unwrap();
        let nb = build_neighborhoods(&gains, 1.0, 1.0, 1.0, 2);
        assert!(nb.unserved().is_empty());
        assert_eq!(nb.k_of_ap(0).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(nb.n_of_device(1).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn pathloss_table_values() {
        assert!((pathloss_db(100.0, true) - 83.58).abs() < 1e-9);
        assert!((pathloss_db(1.0, true) - 30.18).abs() < 1e-12);
        assert!((pathloss_db(100.0, false) - 106.53).abs() < 1e-9);
        assert_eq!(pathloss_db(0.2, true), pathloss_db(1.0, true));
    }

    #[test]
    fn unshadowed_one_meter_los_gain() {
        let mut p = ScenarioParams::new(1, 1, 10.0, 3);
        p.shadowing = false;
        p.los_model = LosModel::ForceLos;
        let mut s = generate_scenario(p).unwrap();
        s.ap_positions[0] = (5.0, 5.0);
        s.device_positions[0] = (5.5, 5.0);
        let g = build_gains(&s);
        assert!((g.get(0, 0) - 10f64.powf(-3.018)).abs() < 1e-15);
    }

    #[test]
    fn gain_decreases_with_distance() {
        let mut p = ScenarioParams::new(1, 2, 1000.0, 1);
        p.shadowing = false;
        p.los_model = LosModel::ForceNlos;
        let mut s = generate_scenario(p).unwrap();
        s.ap_positions[0] = (0.0, 0.0);
        s.device_positions = vec![(30.0, 40.0), (300.0, 400.0)];
        let g = build_gains(&s);
        assert!(g.get(0, 0) > g.get(0, 1));
    }

    #[test]
    fn gains_deterministic_and_mode_independent() {
        let s = generate_scenario(ScenarioParams::new(12, 30, 500.0, 5)).unwrap();
        let a = build_gains_with(&s, Execution::Sequential);
        let b = build_gains_with(&s, Execution::Parallel);
        assert_eq!(a, b);
        assert!(a.g.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    fn hand_network(g: Vec<f64>, n: usize, k: usize, cap: usize) -> Neighborhoods {
        let gains = LinkGains::from_matrix(n, k, g).unwrap();
        build_neighborhoods(&gains, 1.0, 1.0, 1.0, cap)
    }

    #[test]
    fn single_ap_neighborhood() {
        let nb = hand_network(vec![5.0], 1, 1, 20);
        assert_eq!(nb.n_of_device(0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(nb.residual_noise(0), 1.0);
    }

    #[test]
    fn threshold_is_strict() {
        // p_max g == xi n0 exactly
        let nb = hand_network(vec![1.0, 3.0], 2, 1, 20);
        assert_eq!(nb.n_of_device(0).collect::<Vec<_>>(), vec![1]);
        assert_eq!(nb.residual_noise(0), 2.0);
        assert_eq!(nb.k_of_ap(0).count(), 0);
    }

    #[test]
    fn truncation_keeps_strongest() {
        let nb = hand_network(vec![4.0, 8.0, 6.0], 3, 1, 2);
        assert_eq!(nb.n_of_device(0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(nb.residual_noise(0), 1.0 + 4.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let nb = hand_network(vec![4.0, 4.0, 4.0], 3, 1, 2);
        assert_eq!(nb.n_of_device(0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn ap_side_cap() {
        // one AP hears four devices; cap 2 keeps the two strongest
        let nb = hand_network(vec![2.0, 9.0, 5.0, 7.0], 1, 4, 2);
        assert_eq!(nb.k_of_ap(0).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(nb.n_of_device(0).count(), 0);
        assert_eq!(nb.residual_noise(0), 1.0 + 2.0);
        assert_eq!(nb.unserved(), &[0, 2]);
    }

    #[test]
    fn medium_scenario_duality_and_caps() {
        let s = generate_scenario(ScenarioParams::medium(1)).unwrap();
        let net = Network::from_scenario(&s);
        let nb = &net.nb;
        assert!(nb.max_ap_degree() <= 20 && nb.max_device_degree() <= 20);
        for j in 0..nb.n_devices() {
            assert!(nb.residual_noise(j) >= net.noise_psd);
            for i in nb.n_of_device(j) {
                assert!(nb.k_of_ap(i).any(|d| d == j));
            }
        }
        for i in 0..nb.n_aps() {
            for j in nb.k_of_ap(i) {
                assert!(nb.contains(i, j));
            }
        }
    }

    #[test]
    fn csv_dump() {
        let gains = LinkGains::from_matrix(2, 2, vec![1e-10, 2e-10, 3e-10, 4e-10]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        gains.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 4e-10);
    }
}
