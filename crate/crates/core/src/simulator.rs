//! Packet-level simulation of an allocation plan.
//!
//! Each device has one FIFO queue served at its aggregate instantaneous
//! rate over all segments and serving APs. On segment `m` an AP interferes
//! only while the device it serves there has a nonempty queue, so the
//! simulated rates are never below the planned ones. Rate changes apply to
//! the residual bits of the packet in service.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::channel::Network;
use crate::error::{Error, Result};
use crate::rates::AllocationPlan;

/// Offset separating the simulator's random streams from the scenario's.
const SIM_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Arrivals are generated over this many simulated seconds.
    Seconds(f64),
    /// This many packets are recorded after the warmup packets.
    Packets(u64),
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub net: &'a Network,
    pub plan: &'a AllocationPlan,
    /// Packet arrival rate per device (packets/s).
    pub arrivals: Vec<f64>,
    /// Mean packet length (bits).
    pub packet_bits: f64,
    pub horizon: Horizon,
    /// Leading fraction of the horizon (or of the packets) not recorded.
    pub warmup: f64,
    /// Simulated time allowed after the arrival window for recorded
    /// packets to leave, as a multiple of the window length.
    pub drain_factor: f64,
    pub seed: u64,
}

impl<'a> SimConfig<'a> {
    pub fn new(net: &'a Network, plan: &'a AllocationPlan, arrivals: Vec<f64>, packet_bits: f64) -> Self {
        SimConfig {
            net,
            plan,
            arrivals,
            packet_bits,
            horizon: Horizon::Packets(100_000),
            warmup: 0.1,
            drain_factor: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.net.n_aps(), self.net.n_devices());
        if self.arrivals.len() != k {
            return Err(Error::validation("arrivals", format!("{} rates for {k} devices", self.arrivals.len())));
        }
        if self.arrivals.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::validation("arrivals", "rates must be finite and nonnegative"));
        }
        if !(self.packet_bits.is_finite() && self.packet_bits > 0.0) {
            return Err(Error::validation("packet_bits", "must be positive"));
        }
        match self.horizon {
            Horizon::Seconds(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::validation("horizon", "must be positive"));
            }
            Horizon::Packets(0) => return Err(Error::validation("horizon", "must be positive")),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Error::validation("warmup", "must lie in [0, 1)"));
        }
        if !(self.drain_factor.is_finite() && self.drain_factor >= 0.0) {
            return Err(Error::validation("drain_factor", "must be nonnegative"));
        }
        if self.plan.profiles.len() != self.plan.beta.len() {
            return Err(Error::validation("plan", "one width per profile required"));
        }
        for p in &self.plan.profiles {
            if p.n_aps() != n {
                return Err(Error::validation("plan", format!("profile has {} APs, network {n}", p.n_aps())));
            }
            p.validate(self.net)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStats {
    /// Mean delay (s) of recorded packets; NaN without packets.
    pub mean_delay: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    /// Recorded packets that left the system.
    pub packets: u64,
    /// Set when recorded packets were still queued at the end of the run or
    /// the backlog at the end of the arrival window was excessive.
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub devices: Vec<DeviceStats>,
    /// Mean over all recorded packets (s).
    pub network_mean_delay: f64,
    pub arrivals: u64,
    pub departures: u64,
    pub in_system: u64,
    pub sim_time: f64,
}

impl SimOutcome {
    pub fn recorded_packets(&self) -> u64 {
        self.devices.iter().map(|d| d.packets).sum()
    }

    pub fn any_unstable(&self) -> bool {
        self.devices.iter().any(|d| d.unstable)
    }

    /// CSV with one row per device and a final `all` row.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(&mut w);
        out.write_record(["device", "mean_delay", "p50", "p95", "p99", "packets", "unstable"])?;
        for (j, d) in self.devices.iter().enumerate() {
            out.write_record([
                j.to_string(),
                d.mean_delay.to_string(),
                d.p50.to_string(),
                d.p95.to_string(),
                d.p99.to_string(),
                d.packets.to_string(),
                u8::from(d.unstable).to_string(),
            ])?;
        }
        out.write_record([
            "all".to_string(),
            self.network_mean_delay.to_string(),
            String::new(),
            String::new(),
            String::new(),
            self.recorded_packets().to_string(),
            u8::from(self.any_unstable()).to_string(),
        ])?;
        out.flush().map_err(|e| Error::io("csv", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// `d_j = 1 / (r_j / L - a_j)`, infinite when the queue is unstable.
pub fn analytic_delays(rates: &[f64], arrivals: &[f64], packet_bits: f64) -> Vec<f64> {
    rates
        .iter()
        .zip(arrivals)
        .map(|(&r, &a)| {
            let margin = r / packet_bits - a;
            if margin > 0.0 {
                1.0 / margin
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Arrival-weighted mean of per-device delays; the network-wide mean
/// packet delay. NaN when nothing arrives.
pub fn mean_delay(delays: &[f64], arrivals: &[f64]) -> f64 {
    let total: f64 = arrivals.iter().sum();
    let weighted: f64 = delays
        .iter()
        .zip(arrivals)
        .filter(|(_, &a)| a > 0.0)
        .map(|(d, a)| d * a)
        .sum();
    weighted / total
}

/// One AP-to-device link on one segment.
struct Link {
    device: usize,
    width: f64,
    signal: f64,
    noise: f64,
    interference: f64,
    busy_interferers: u32,
    efficiency: f64,
}

impl Link {
    fn refresh(&mut self) {
        if self.busy_interferers == 0 {
            self.interference = 0.0;
        }
        self.efficiency = (1.0 + self.signal / (self.noise + self.interference.max(0.0))).log2();
    }
}

/// Links of a plan with the interference they receive from each device's
/// serving APs.
struct LinkTable {
    links: Vec<Link>,
    by_device: Vec<Vec<usize>>,
    /// `(link, power)` pairs whose interference depends on the device
    /// being busy.
    coupling: Vec<Vec<(usize, f64)>>,
}

impl LinkTable {
    fn build(net: &Network, plan: &AllocationPlan) -> Self {
        let k = net.n_devices();
        let mut links = Vec::new();
        let mut by_device = vec![Vec::new(); k];
        let mut on_segment: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (m, (profile, &width)) in plan.profiles.iter().zip(&plan.beta).enumerate() {
            if width <= 0.0 {
                continue;
            }
            for (i, z) in profile.served.iter().enumerate() {
                let Some(j) = *z else { continue };
                let id = links.len();
                links.push(Link {
                    device: j,
                    width,
                    signal: profile.psd[i] * net.gains.get(i, j),
                    noise: net.nb.residual_noise(j),
                    interference: 0.0,
                    busy_interferers: 0,
                    efficiency: 0.0,
                });
                by_device[j].push(id);
                on_segment.entry((m, j)).or_default().push((i, id));
            }
        }
        let mut coupling = vec![Vec::new(); k];
        for (m, (profile, &width)) in plan.profiles.iter().zip(&plan.beta).enumerate() {
            if width <= 0.0 {
                continue;
            }
            for (l, z) in profile.served.iter().enumerate() {
                let Some(d) = *z else { continue };
                for &(j, g) in net.nb.ap_links(l) {
                    if let Some(victims) = on_segment.get(&(m, j)) {
                        for &(i, id) in victims {
                            if i != l {
                                coupling[d].push((id, profile.psd[l] * g));
                            }
                        }
                    }
                }
            }
        }
        let mut table = LinkTable {
            links,
            by_device,
            coupling,
        };
        for link in &mut table.links {
            link.refresh();
        }
        table
    }

    fn rate(&self, j: usize) -> f64 {
        self.by_device[j]
            .iter()
            .map(|&id| self.links[id].width * self.links[id].efficiency)
            .sum()
    }

    /// Applies device `d` turning busy or idle; returns the devices whose
    /// rate changed.
    fn toggle(&mut self, d: usize, busy: bool, touched: &mut Vec<usize>) {
        touched.clear();
        for &(id, power) in &self.coupling[d] {
            let link = &mut self.links[id];
            if busy {
                link.busy_interferers += 1;
                link.interference += power;
            } else {
                link.busy_interferers -= 1;
                link.interference -= power;
            }
            link.refresh();
            touched.push(link.device);
        }
        touched.sort_unstable();
        touched.dedup();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
    device: usize,
    version: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Packet {
    arrival: f64,
    bits: f64,
    recorded: bool,
}

struct DeviceState {
    queue: VecDeque<Packet>,
    rate: f64,
    since: f64,
    version: u64,
    rng: ChaCha8Rng,
}

impl DeviceState {
    /// Charges service since the last update to the head packet.
    fn advance(&mut self, now: f64) {
        if let Some(head) = self.queue.front_mut() {
            head.bits = (head.bits - self.rate * (now - self.since)).max(0.0);
        }
        self.since = now;
    }
}

struct Sim {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Sim {
    fn push(&mut self, time: f64, kind: Kind, device: usize, version: u64) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
            device,
            version,
        });
    }

    fn schedule_departure(&mut self, j: usize, dev: &mut DeviceState, now: f64) {
        dev.version += 1;
        if let Some(head) = dev.queue.front() {
            if dev.rate > 0.0 {
                self.push(now + head.bits / dev.rate, Kind::Departure, j, dev.version);
            }
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Runs the simulation.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let k = cfg.net.n_devices();
    let total_rate: f64 = cfg.arrivals.iter().sum();
    let mut devices_out = vec![
        DeviceStats {
            mean_delay: f64::NAN,
            p50: f64::NAN,
            p95: f64::NAN,
            p99: f64::NAN,
            packets: 0,
            unstable: false,
        };
        k
    ];
    if total_rate == 0.0 {
        return Ok(SimOutcome {
            devices: devices_out,
            network_mean_delay: f64::NAN,
            arrivals: 0,
            departures: 0,
            in_system: 0,
            sim_time: 0.0,
        });
    }

    // arrival window: recorded packets arrive in [warm_start, window_end)
    // or are packets warm_count .. warm_count + n by arrival order
    let (warm_time, window_end, warm_count, record_count) = match cfg.horizon {
        Horizon::Seconds(t) => (cfg.warmup * t, t, 0, u64::MAX),
        Horizon::Packets(n) => {
            let warm = ((n as f64) * cfg.warmup / (1.0 - cfg.warmup)).round() as u64;
            (0.0, f64::INFINITY, warm, n)
        }
    };

    let mut table = LinkTable::build(cfg.net, cfg.plan);
    let mut sim = Sim {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut devs: Vec<DeviceState> = (0..k)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(SIM_STREAM_BASE + j as u64);
            DeviceState {
                queue: VecDeque::new(),
                rate: table.rate(j),
                since: 0.0,
                version: 0,
                rng,
            }
        })
        .collect();
    let size = Exp::new(1.0 / cfg.packet_bits).map_err(|e| Error::validation("packet_bits", e.to_string()))?;
    let gaps: Vec<Option<Exp<f64>>> = cfg.arrivals.iter().map(|&a| (a > 0.0).then(|| Exp::new(a).unwrap())).collect();
    for j in 0..k {
        if let Some(gap) = &gaps[j] {
            let t = gap.sample(&mut devs[j].rng);
            sim.push(t, Kind::Arrival, j, 0);
        }
    }

    let mut delays: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut arrivals = 0u64;
    let mut departures = 0u64;
    let mut recorded_seen = 0u64;
    let mut outstanding = 0u64;
    let mut window_closed_at: Option<f64> = None;
    let mut backlog_at_close = vec![0usize; k];
    let mut touched = Vec::new();
    let mut now = 0.0;
    let mut deadline = f64::INFINITY;

    while let Some(ev) = sim.heap.pop() {
        if ev.time > deadline {
            break;
        }
        now = ev.time;
        if window_closed_at.is_none() && (now >= window_end || recorded_seen >= record_count) {
            window_closed_at = Some(now);
            deadline = now + cfg.drain_factor * now.max(f64::MIN_POSITIVE);
            for (j, d) in devs.iter().enumerate() {
                backlog_at_close[j] = d.queue.len();
            }
            if outstanding == 0 {
                break;
            }
        }
        let j = ev.device;
        match ev.kind {
            Kind::Arrival => {
                arrivals += 1;
                let recorded = match cfg.horizon {
                    Horizon::Seconds(_) => now >= warm_time && now < window_end,
                    Horizon::Packets(_) => arrivals > warm_count && recorded_seen < record_count,
                };
                if recorded {
                    recorded_seen += 1;
                    outstanding += 1;
                }
                let dev = &mut devs[j];
                let bits = size.sample(&mut dev.rng);
                let was_idle = dev.queue.is_empty();
                dev.advance(now);
                dev.queue.push_back(Packet {
                    arrival: now,
                    bits,
                    recorded,
                });
                if let Some(gap) = &gaps[j] {
                    let next = now + gap.sample(&mut dev.rng);
                    sim.push(next, Kind::Arrival, j, 0);
                }
                if was_idle {
                    sim.schedule_departure(j, &mut devs[j], now);
                    toggle(&mut table, &mut devs, &mut sim, j, true, now, &mut touched);
                }
            }
            Kind::Departure => {
                if ev.version != devs[j].version {
                    continue;
                }
                let dev = &mut devs[j];
                dev.advance(now);
                let p = dev.queue.pop_front().expect("departure from an empty queue");
                departures += 1;
                if p.recorded {
                    delays[j].push(now - p.arrival);
                    outstanding -= 1;
                }
                dev.since = now;
                sim.schedule_departure(j, &mut devs[j], now);
                if devs[j].queue.is_empty() {
                    toggle(&mut table, &mut devs, &mut sim, j, false, now, &mut touched);
                }
                if window_closed_at.is_some() && outstanding == 0 {
                    break;
                }
            }
        }
    }

    let mut all = Vec::new();
    for (j, d) in delays.iter_mut().enumerate() {
        d.sort_by(f64::total_cmp);
        let stats = &mut devices_out[j];
        stats.packets = d.len() as u64;
        if !d.is_empty() {
            stats.mean_delay = d.iter().sum::<f64>() / d.len() as f64;
            stats.p50 = percentile(d, 0.50);
            stats.p95 = percentile(d, 0.95);
            stats.p99 = percentile(d, 0.99);
        }
        let left_behind = devs[j].queue.iter().any(|p| p.recorded);
        let expected = cfg.arrivals[j] * window_closed_at.unwrap_or(now);
        stats.unstable = left_behind || backlog_at_close[j] as f64 > 50.0 + 0.1 * expected;
        all.extend_from_slice(d);
    }
    let network_mean_delay = if all.is_empty() {
        f64::NAN
    } else {
        all.iter().sum::<f64>() / all.len() as f64
    };
    let in_system = devs.iter().map(|d| d.queue.len() as u64).sum();
    Ok(SimOutcome {
        devices: devices_out,
        network_mean_delay,
        arrivals,
        departures,
        in_system,
        sim_time: now,
    })
}

#[allow(clippy::too_many_arguments)]
fn toggle(
    table: &mut LinkTable,
    devs: &mut [DeviceState],
    sim: &mut Sim,
    d: usize,
    busy: bool,
    now: f64,
    touched: &mut Vec<usize>,
) {
    table.toggle(d, busy, touched);
    for &j in touched.iter() {
        let rate = table.rate(j);
        let dev = &mut devs[j];
        if rate == dev.rate {
            continue;
        }
        dev.advance(now);
        dev.rate = rate;
        if !dev.queue.is_empty() {
            sim.schedule_departure(j, dev, now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::tests::unit_network;
    use crate::rates::PowerProfile;

    fn single_link_plan(net: &Network) -> AllocationPlan {
        let p = PowerProfile {
            served: vec![Some(0)],
            psd: vec![net.p_max],
        };
        AllocationPlan::new(vec![p], vec![net.bandwidth], net).unwrap()
    }

    #[test]
    fn analytic_values() {
        assert_eq!(analytic_delays(&[2.0], &[1.0], 1.0), vec![1.0]);
        assert_eq!(analytic_delays(&[1.0], &[1.0], 1.0), vec![f64::INFINITY]);
        let d = analytic_delays(&[2.0, 4.0], &[1.0, 1.0], 1.0);
        let u = crate::utility::delay_utility(&[2.0, 4.0], &[1.0, 1.0], 1.0);
        assert!((d[0] * 1.0 + d[1] * 1.0 + u).abs() < 1e-15);
        assert!((mean_delay(&d, &[1.0, 1.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_link_matches_mm1() {
        // rate 1 bit/s, L = 1 bit: mu = 1, a = 0.8, delay 5 s
        let net = unit_network(1, 1, vec![1.0]);
        let plan = single_link_plan(&net);
        let mut cfg = SimConfig::new(&net, &plan, vec![0.8], 1.0);
        cfg.horizon = Horizon::Packets(100_000);
        cfg.seed = 42;
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.devices[0].packets, 100_000);
        let d = out.devices[0].mean_delay;
        assert!((d - 5.0).abs() / 5.0 < 0.05, "{d}");
        assert!(!out.any_unstable());
        assert_eq!(out.arrivals, out.departures + out.in_system);
    }

    #[test]
    fn no_traffic_no_events() {
        let net = unit_network(1, 1, vec![1.0]);
        let plan = single_link_plan(&net);
        let out = simulate(&SimConfig::new(&net, &plan, vec![0.0], 1.0)).unwrap();
        assert_eq!(out.arrivals, 0);
        assert_eq!(out.recorded_packets(), 0);
        assert!(out.network_mean_delay.is_nan());
    }

    #[test]
    fn isolated_pairs_on_disjoint_segments() {
        // AP 0 -> device 0 on the first 60%, AP 1 -> device 1 on the rest;
        // cross gains are large but the segments never overlap
        let net = unit_network(2, 2, vec![3.0, 2.0, 2.0, 7.0]);
        let a = PowerProfile {
            served: vec![Some(0), None],
            psd: vec![1.0, 0.0],
        };
        let b = PowerProfile {
            served: vec![None, Some(1)],
            psd: vec![0.0, 1.0],
        };
        let plan = AllocationPlan::new(vec![a, b], vec![0.6, 0.4], &net).unwrap();
        let mu = [0.6 * 2.0, 0.4 * 3.0];
        let arrivals = vec![0.6 * mu[0], 0.7 * mu[1]];
        let mut cfg = SimConfig::new(&net, &plan, arrivals.clone(), 1.0);
        cfg.horizon = Horizon::Packets(200_000);
        cfg.seed = 7;
        let out = simulate(&cfg).unwrap();
        for j in 0..2 {
            let want = 1.0 / (mu[j] - arrivals[j]);
            let got = out.devices[j].mean_delay;
            assert!((got - want).abs() / want < 0.05, "device {j}: {got} vs {want}");
        }
    }

    #[test]
    fn shared_segment_is_never_slower_than_planned() {
        let net = unit_network(2, 2, vec![4.0, 1.0, 1.0, 4.0]);
        let p = PowerProfile {
            served: vec![Some(0), Some(1)],
            psd: vec![1.0, 1.0],
        };
        let plan = AllocationPlan::new(vec![p], vec![1.0], &net).unwrap();
        let arrivals = vec![0.5 * plan.rates[0], 0.5 * plan.rates[1]];
        let mut cfg = SimConfig::new(&net, &plan, arrivals.clone(), 1.0);
        cfg.horizon = Horizon::Packets(50_000);
        let out = simulate(&cfg).unwrap();
        let analytic = analytic_delays(&plan.rates, &arrivals, 1.0);
        for j in 0..2 {
            assert!(out.devices[j].mean_delay < analytic[j]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let net = unit_network(1, 1, vec![1.0]);
        let plan = single_link_plan(&net);
        let mut cfg = SimConfig::new(&net, &plan, vec![0.5], 1.0);
        cfg.horizon = Horizon::Seconds(2000.0);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 1;
        assert_ne!(simulate(&cfg).unwrap(), a);
    }

    #[test]
    fn overload_is_flagged() {
        let net = unit_network(1, 1, vec![1.0]);
        let plan = single_link_plan(&net);
        let mut cfg = SimConfig::new(&net, &plan, vec![1.5], 1.0);
        cfg.horizon = Horizon::Seconds(5000.0);
        let out = simulate(&cfg).unwrap();
        assert!(out.devices[0].unstable);
    }

    #[test]
    fn rejects_mismatched_plan() {
        let net = unit_network(1, 1, vec![1.0]);
        let other = unit_network(2, 1, vec![1.0, 1.0]);
        let plan = AllocationPlan::new(vec![PowerProfile::idle(2)], vec![1.0], &other).unwrap();
        assert!(matches!(simulate(&SimConfig::new(&net, &plan, vec![0.5], 1.0)), Err(Error::Validation { .. })));
    }

    #[test]
    fn csv_has_aggregate_row() {
        let net = unit_network(1, 1, vec![1.0]);
        let plan = single_link_plan(&net);
        let mut cfg = SimConfig::new(&net, &plan, vec![0.5], 1.0);
        cfg.horizon = Horizon::Packets(1000);
        let out = simulate(&cfg).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "device,mean_delay,p50,p95,p99,packets,unstable");
        assert!(lines[2].starts_with("all,"));
        assert!(lines[2].ends_with(",1000,0"));
    }
}
