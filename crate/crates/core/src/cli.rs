//! Command-line front end: scenario generation, optimization sweeps, scheme
//! comparison, simulation and the property suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{affine_objective, solve_affine, AffineOptions, Fault};
use crate::baselines::{compare_chain, run_scheme, Scheme, SchemeRun};
use crate::channel::Network;
use crate::error::{Error, Result};
use crate::par::{map_slice, with_jobs, Execution};
use crate::pursuit::sparsity::verify_sparsity;
use crate::pursuit::{pursue, PursuitOptions, PursuitState};
use crate::rates::{AllocationPlan, PowerProfile};
use crate::scenario::{generate_scenario, load_scenario, save_scenario, NetworkScenario, ScenarioParams};
use crate::simulator::{analytic_delays, mean_delay, simulate, Horizon, SimConfig, SimOutcome};
use crate::utility::{UtilitySpec, DELAY_CLAMP};

#[derive(Debug, Parser)]
#[command(name = "ranopt", version, about = "Spectrum, association and power allocation for dense wireless networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Optimize allocation plans over a traffic sweep.
    Optimize(RunArgs),
    /// Optimize, then simulate the plans packet by packet.
    Simulate(SimulateArgs),
    /// Analytic delay of every scheme over a traffic sweep.
    Compare(RunArgs),
    /// Run the property suite; exits nonzero on any failure.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 250)]
    pub k: usize,
    /// Side of the square area (m).
    #[arg(long, default_value_t = 1330.0)]
    pub side: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Packet arrival rate per device (packets/s).
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated schemes; defaults to `proposed` for optimize and to
    /// all schemes for compare and simulate.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<Scheme>,
    /// Comma-separated arrival rates (packets/s/device); defaults to the
    /// scenario's own rates.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sweep points run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Relative tolerance of the affine solver.
    #[arg(long)]
    pub tol_inner: Option<f64>,
    /// Relative utility improvement counted as a pursuit stall.
    #[arg(long)]
    pub tol_outer: Option<f64>,
    #[arg(long)]
    pub max_profiles: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Packets recorded per run after warmup.
    #[arg(long, default_value_t = 100_000)]
    pub packets: u64,
    #[arg(long, default_value_t = 0.1)]
    pub warmup: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Everything needed to reproduce a run's output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: PathBuf,
    pub schemes: Vec<Scheme>,
    /// `None` runs at the scenario's own arrival rates.
    pub sweep: Option<Vec<f64>>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub tol_inner: Option<f64>,
    pub tol_outer: Option<f64>,
    pub max_profiles: Option<usize>,
}

impl RunManifest {
    pub fn from_args(args: &RunArgs, default_schemes: &[Scheme]) -> Result<Self> {
        let m = RunManifest {
            scenario: args.scenario.clone(),
            schemes: if args.scheme.is_empty() {
                default_schemes.to_vec()
            } else {
                args.scheme.clone()
            },
            sweep: (!args.sweep.is_empty()).then(|| args.sweep.clone()),
            out: args.out.clone(),
            seed: args.seed,
            jobs: args.jobs,
            tol_inner: args.tol_inner,
            tol_outer: args.tol_outer,
            max_profiles: args.max_profiles,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sweep) = &self.sweep {
            if sweep.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::validation("sweep", "values must be positive"));
            }
            if sweep.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation("sweep", "values must be strictly increasing"));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::validation("scheme", "at least one scheme required"));
        }
        for (name, tol) in [("tol_inner", self.tol_inner), ("tol_outer", self.tol_outer)] {
            if tol.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        if self.max_profiles == Some(0) {
            return Err(Error::validation("max_profiles", "must be at least 1"));
        }
        Ok(())
    }

    pub fn pursuit_options(&self) -> PursuitOptions {
        let mut opts = PursuitOptions {
            seed: self.seed,
            max_profiles: self.max_profiles,
            exec: Execution::Sequential,
            ..Default::default()
        };
        opts.affine.exec = Execution::Sequential;
        if let Some(t) = self.tol_inner {
            opts.affine.tol = t;
        }
        if let Some(t) = self.tol_outer {
            opts.outer_tol = t;
        }
        opts
    }

    fn write(&self) -> Result<()> {
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// One sweep point of a loaded scenario.
pub struct SweepPoint {
    /// Label used in file names and CSV rows; the swept rate, or `scenario`.
    pub label: String,
    pub lambda: Option<f64>,
    pub scenario: NetworkScenario,
    pub utility: UtilitySpec,
}

fn sweep_points(base: &NetworkScenario, sweep: &Option<Vec<f64>>) -> Vec<SweepPoint> {
    let point = |label: String, lambda: Option<f64>, s: NetworkScenario| SweepPoint {
        utility: UtilitySpec::delay(s.lambda.clone(), s.packet_bits()),
        label,
        lambda,
        scenario: s,
    };
    match sweep {
        Some(values) => values
            .iter()
            .map(|&x| point(format!("{x}"), Some(x), base.with_uniform_lambda(x)))
            .collect(),
        None => vec![point("scenario".into(), None, base.clone())],
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_trace(path: &Path, state: &PursuitState) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["outer_iter", "utility", "deficit", "profiles", "active_segments", "inner_iterations", "random_substitute"])?;
    for r in &state.trace {
        w.write_record([
            r.outer_iter.to_string(),
            r.utility.to_string(),
            r.deficit.to_string(),
            r.profiles.to_string(),
            r.active_segments.to_string(),
            r.inner_iterations.to_string(),
            u8::from(r.random_substitute).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn analytic_mean_delay(point: &SweepPoint, plan: &AllocationPlan) -> f64 {
    let s = &point.scenario;
    mean_delay(&analytic_delays(&plan.rates, &s.lambda, s.packet_bits()), &s.lambda)
}

/// Summary row shared by optimize and compare.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub sweep: String,
    pub scheme: Scheme,
    pub utility: f64,
    pub mean_delay: f64,
    pub infeasible_devices: usize,
    pub active_segments: usize,
    pub profiles: usize,
    pub outer_iterations: usize,
    pub mean_inner_iterations: f64,
    pub seconds: f64,
}

fn record(point: &SweepPoint, run: &SchemeRun) -> RunRecord {
    let (profiles, outer, inner) = match &run.state {
        Some(s) => {
            let inner = s.inner_iterations();
            let mean = if inner.is_empty() {
                0.0
            } else {
                inner.iter().sum::<usize>() as f64 / inner.len() as f64
            };
            (s.profiles.len(), s.outer_iterations(), mean)
        }
        None => (run.plan.profiles.len(), 0, 0.0),
    };
    RunRecord {
        sweep: point.label.clone(),
        scheme: run.scheme,
        utility: run.utility,
        mean_delay: analytic_mean_delay(point, &run.plan),
        infeasible_devices: point.utility.infeasible_devices(&run.plan.rates).len(),
        active_segments: run.plan.active_segments(),
        profiles,
        outer_iterations: outer,
        mean_inner_iterations: inner,
        seconds: run.seconds,
    }
}

const RECORD_HEADER: [&str; 10] = [
    "sweep",
    "scheme",
    "utility",
    "mean_delay",
    "infeasible_devices",
    "active_segments",
    "profiles",
    "outer_iterations",
    "mean_inner_iterations",
    "seconds",
];

impl RunRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            self.sweep.clone(),
            self.scheme.name().to_string(),
            self.utility.to_string(),
            self.mean_delay.to_string(),
            self.infeasible_devices.to_string(),
            self.active_segments.to_string(),
            self.profiles.to_string(),
            self.outer_iterations.to_string(),
            self.mean_inner_iterations.to_string(),
            self.seconds.to_string(),
        ]
    }
}

fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn save_run(dir: &Path, point: &SweepPoint, run: &SchemeRun) -> Result<()> {
    let stem = format!("{}_{}", run.scheme, point.label);
    let k = point.scenario.n_devices();
    run.plan.save(dir.join(format!("plan_{stem}.json")), Some(run.scheme.name()), k)?;
    if let Some(state) = &run.state {
        write_trace(&dir.join(format!("trace_{stem}.csv")), state)?;
    }
    Ok(())
}

/// Runs `f` on every sweep point, `jobs` at a time.
fn over_sweep<T: Send>(
    points: &[SweepPoint],
    jobs: usize,
    f: impl Fn(&SweepPoint) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let exec = if jobs > 1 { Execution::Parallel } else { Execution::Sequential };
    with_jobs(jobs, || map_slice(exec, points, |p| f(p).map_err(|e| e.context(format!("sweep point {}", p.label)))))
        .into_iter()
        .collect()
}

fn load(manifest: &RunManifest) -> Result<NetworkScenario> {
    load_scenario(&manifest.scenario).map_err(|e| e.context(format!("loading {}", manifest.scenario.display())))
}

/// Runs each scheme independently at every sweep point; writes one plan
/// and trace per (scheme, point) plus `runs.csv`.
pub fn cmd_optimize(manifest: &RunManifest) -> Result<Vec<RunRecord>> {
    let base = load(manifest)?;
    prepare_out(&manifest.out)?;
    manifest.write()?;
    let points = sweep_points(&base, &manifest.sweep);
    let opts = manifest.pursuit_options();
    let per_point = over_sweep(&points, manifest.jobs, |p| {
        let net = Network::from_scenario(&p.scenario);
        manifest
            .schemes
            .iter()
            .map(|&scheme| {
                let run = run_scheme(scheme, &p.utility, &net, &opts)?;
                save_run(&manifest.out, p, &run)?;
                log::info!("{scheme} at {}: utility {:.6e} in {:.2}s", p.label, run.utility, run.seconds);
                Ok(record(p, &run))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<RunRecord> = per_point.into_iter().flatten().collect();
    write_records(&manifest.out.join("runs.csv"), &records)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: RunRecord,
    /// This scheme's utility is at least the previous scheme's in the chain.
    pub chain_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Largest swept rate with finite delay, per scheme in chain order.
    pub knees: Vec<(Scheme, Option<f64>)>,
}

/// Relative slack allowed in utility comparisons, covering the rescaling
/// applied when zero-width segments are pruned.
pub const CHAIN_TOL: f64 = 1e-9;

pub fn dominates(later: f64, earlier: f64) -> bool {
    later >= earlier - CHAIN_TOL * earlier.abs() || earlier == f64::NEG_INFINITY
}

/// Largest swept rate at which the utility is finite.
pub fn knee(points: &[(f64, f64)]) -> Option<f64> {
    points.iter().filter(|(_, u)| u.is_finite()).map(|(x, _)| *x).fold(None, |a, x| Some(a.map_or(x, |a: f64| a.max(x))))
}

/// Runs the warm-started scheme chain at every sweep point and writes
/// `compare.csv` and `knee.csv`.
pub fn cmd_compare(manifest: &RunManifest) -> Result<CompareReport> {
    let base = load(manifest)?;
    prepare_out(&manifest.out)?;
    manifest.write()?;
    let points = sweep_points(&base, &manifest.sweep);
    let opts = manifest.pursuit_options();
    let per_point = over_sweep(&points, manifest.jobs, |p| {
        let net = Network::from_scenario(&p.scenario);
        let runs = compare_chain(&p.utility, &net, &opts)?;
        let mut rows = Vec::new();
        let mut previous = f64::NEG_INFINITY;
        for run in &runs {
            if manifest.schemes.contains(&run.scheme) {
                save_run(&manifest.out, p, run)?;
                rows.push(CompareRow {
                    run: record(p, run),
                    chain_ok: dominates(run.utility, previous),
                });
            }
            previous = run.utility;
        }
        Ok(rows)
    })?;
    let rows: Vec<CompareRow> = per_point.into_iter().flatten().collect();
    let mut w = csv::Writer::from_path(manifest.out.join("compare.csv"))?;
    w.write_record(RECORD_HEADER.iter().chain(&["chain_ok"]))?;
    for r in &rows {
        let mut fields = r.run.fields();
        fields.push(u8::from(r.chain_ok).to_string());
        w.write_record(fields)?;
    }
    w.flush().map_err(|e| Error::io(&manifest.out, e))?;

    let knees: Vec<(Scheme, Option<f64>)> = Scheme::ALL
        .into_iter()
        .filter(|s| manifest.schemes.contains(s))
        .map(|s| {
            let curve: Vec<(f64, f64)> = points
                .iter()
                .zip(rows.iter().filter(|r| r.run.scheme == s))
                .filter_map(|(p, r)| p.lambda.map(|x| (x, r.run.utility)))
                .collect();
            (s, knee(&curve))
        })
        .collect();
    let mut w = csv::Writer::from_path(manifest.out.join("knee.csv"))?;
    w.write_record(["scheme", "knee"])?;
    for (s, k) in &knees {
        w.write_record([s.name().to_string(), k.map_or(String::new(), |x| x.to_string())])?;
    }
    w.flush().map_err(|e| Error::io(&manifest.out, e))?;
    Ok(CompareReport { rows, knees })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRecord {
    pub sweep: String,
    pub scheme: Scheme,
    pub analytic_mean_delay: f64,
    pub simulated_mean_delay: f64,
    pub packets: u64,
    pub unstable: bool,
}

/// Optimizes (via the scheme chain) and simulates every selected scheme at
/// every sweep point; writes one outcome CSV per run and `simulate.csv`.
pub fn cmd_simulate(manifest: &RunManifest, packets: u64, warmup: f64) -> Result<Vec<(SimRecord, SimOutcome)>> {
    let base = load(manifest)?;
    prepare_out(&manifest.out)?;
    manifest.write()?;
    let points = sweep_points(&base, &manifest.sweep);
    let opts = manifest.pursuit_options();
    let per_point = over_sweep(&points, manifest.jobs, |p| {
        let net = Network::from_scenario(&p.scenario);
        let runs = compare_chain(&p.utility, &net, &opts)?;
        let mut out = Vec::new();
        for run in runs.iter().filter(|r| manifest.schemes.contains(&r.scheme)) {
            let mut cfg = SimConfig::new(&net, &run.plan, p.scenario.lambda.clone(), p.scenario.packet_bits());
            cfg.horizon = Horizon::Packets(packets);
            cfg.warmup = warmup;
            cfg.seed = manifest.seed;
            let outcome = simulate(&cfg)?;
            outcome.save_csv(manifest.out.join(format!("sim_{}_{}.csv", run.scheme, p.label)))?;
            out.push((
                SimRecord {
                    sweep: p.label.clone(),
                    scheme: run.scheme,
                    analytic_mean_delay: analytic_mean_delay(p, &run.plan),
                    simulated_mean_delay: outcome.network_mean_delay,
                    packets: outcome.recorded_packets(),
                    unstable: outcome.any_unstable(),
                },
                outcome,
            ));
        }
        Ok(out)
    })?;
    let all: Vec<(SimRecord, SimOutcome)> = per_point.into_iter().flatten().collect();
    let mut w = csv::Writer::from_path(manifest.out.join("simulate.csv"))?;
    for (r, _) in &all {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&manifest.out, e))?;
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn random_weights(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k).map(|_| rng.random::<f64>()).collect()
}

fn random_network(n: usize, k: usize, side: f64, rng: &mut ChaCha8Rng) -> Result<Network> {
    let s = generate_scenario(ScenarioParams::new(n, k, side, rng.random()))?;
    Ok(Network::from_scenario(&s))
}

fn verify_monotone(seed: u64, fault: Option<Fault>) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = AffineOptions {
        fault,
        ..Default::default()
    };
    let mut failures = Vec::new();
    let count = 20;
    for t in 0..count {
        let n = rng.random_range(2..=20);
        let k = rng.random_range(2..=40);
        let side = 1330.0 * (n as f64 / 100.0).sqrt();
        let result = random_network(n, k, side, &mut rng).and_then(|net| {
            let c = random_weights(k, &mut rng);
            solve_affine(&c, &net, None, &opts)
        });
        if let Err(e) = result {
            failures.push(format!("instance {t}: {e}"));
        }
    }
    check(
        "affine_monotone",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{count} instances nondecreasing")
        } else {
            failures.join("; ")
        },
    )
}

/// Best affine objective on a 2-AP network with each PSD on a grid.
fn grid_affine_optimum(net: &Network, c: &[f64], levels: usize) -> f64 {
    let options = |i: usize| -> Vec<(Option<usize>, f64)> {
        let mut v = vec![(None, 0.0)];
        for j in net.nb.k_of_ap(i) {
            for q in 1..levels {
                v.push((Some(j), net.p_max * q as f64 / (levels - 1) as f64));
            }
        }
        v
    };
    let mut best = 0.0f64;
    for a in options(0) {
        for b in options(1) {
            let p = PowerProfile {
                served: vec![a.0, b.0],
                psd: vec![a.1, b.1],
            };
            best = best.max(affine_objective(&p, c, net));
        }
    }
    best
}

fn verify_affine_oracle(seed: u64, fault: Option<Fault>) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2a);
    let opts = AffineOptions {
        fault,
        ..Default::default()
    };
    let count = 20;
    let mut hits = 0;
    let mut errors = Vec::new();
    for t in 0..count {
        let outcome = random_network(2, 2, 200.0, &mut rng).and_then(|net| {
            let c = random_weights(2, &mut rng);
            let got = solve_affine(&c, &net, None, &opts)?.objective();
            Ok(got >= 0.999 * grid_affine_optimum(&net, &c, 50))
        });
        match outcome {
            Ok(true) => hits += 1,
            Ok(false) => {}
            Err(e) => errors.push(format!("instance {t}: {e}")),
        }
    }
    check(
        "affine_oracle_2x2",
        errors.is_empty() && hits * 100 >= 95 * count,
        format!("{hits}/{count} within 0.1% of the grid optimum{}", if errors.is_empty() { String::new() } else { format!("; {}", errors.join("; ")) }),
    )
}

fn verify_sparsity_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
    let mut details = Vec::new();
    let mut passed = true;
    for _ in 0..3 {
        let outcome = random_network(2, 2, 150.0, &mut rng).and_then(|net| {
            let loads = [net.bandwidth, net.bandwidth];
            let norm = net.bandwidth;
            let utilities = vec![
                ("delay".to_string(), UtilitySpec::delay(loads.iter().map(|l| l / norm).collect(), norm)),
                ("wsr".to_string(), UtilitySpec::weighted_sum_rate(random_weights(2, &mut rng).iter().map(|c| c / norm).collect())),
            ];
            let levels = [0.0, net.p_max / 2.0, net.p_max];
            verify_sparsity(&net, &levels, &utilities)
        });
        match outcome {
            Ok(rep) => {
                passed &= rep.holds();
                for u in &rep.utilities {
                    details.push(format!("{}: {:?}", u.label, u.best));
                }
            }
            Err(e) => {
                passed = false;
                details.push(e.to_string());
            }
        }
    }
    check("sparsity", passed, details.join("; "))
}

fn verify_gradient(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let packet_bits = rng.random_range(0.5..2.0);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
        let r: Vec<f64> = a.iter().map(|x| x * packet_bits * rng.random_range(1.2..4.0)).collect();
        let u = UtilitySpec::delay(a.clone(), packet_bits);
        let g = u.gradient(&r);
        for j in 0..k {
            let h = 1e-6 * r[j];
            let (mut up, mut dn) = (r.clone(), r.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (u.value(&up) - u.value(&dn)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs());
        }
    }
    check("gradient_fd", worst < 1e-4, format!("worst relative error {worst:.3e} (clamp {DELAY_CLAMP})"))
}

fn verify_pursuit(seed: u64, fault: Option<Fault>) -> CheckResult {
    let outcome = generate_scenario(ScenarioParams {
        lambda: 2.0,
        ..ScenarioParams::new(10, 20, 420.0, seed)
    })
    .and_then(|s| {
        let net = Network::from_scenario(&s);
        let u = UtilitySpec::delay(s.lambda.clone(), s.packet_bits());
        let mut opts = PursuitOptions::default();
        opts.affine.fault = fault;
        pursue(&u, &net, &opts)
    });
    match outcome {
        Ok((plan, state)) => {
            let monotone = state.is_monotone(1e-9);
            let bound = plan.active_segments() <= 21;
            check(
                "pursuit_monotone",
                monotone && bound,
                format!("{} outer iterations, {} active segments", state.outer_iterations(), plan.active_segments()),
            )
        }
        Err(e) => check("pursuit_monotone", false, e.to_string()),
    }
}

fn verify_simulator(seed: u64) -> CheckResult {
    let outcome = (|| -> Result<f64> {
        let gains = crate::channel::LinkGains::from_matrix(1, 1, vec![1.0])?;
        let net = Network::from_gains(gains, 1.0, 1.0, 1.0, 1e-9, 20);
        let plan = AllocationPlan::new(
            vec![PowerProfile {
                served: vec![Some(0)],
                psd: vec![1.0],
            }],
            vec![1.0],
            &net,
        )?;
        let mut cfg = SimConfig::new(&net, &plan, vec![0.8], 1.0);
        cfg.seed = seed;
        Ok(simulate(&cfg)?.devices[0].mean_delay)
    })();
    match outcome {
        Ok(d) => check("simulator_mm1", (d - 5.0).abs() / 5.0 < 0.05, format!("mean delay {d:.4} s vs 5 s")),
        Err(e) => check("simulator_mm1", false, e.to_string()),
    }
}

/// Runs the property suite and writes `verify_report.json`.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyReport> {
    prepare_out(&args.out)?;
    let fault = args.inject_fault.then_some(Fault::FlipPowerUpdate);
    let started = Instant::now();
    let checks = vec![
        verify_monotone(args.seed, fault),
        verify_affine_oracle(args.seed, fault),
        verify_sparsity_check(args.seed),
        verify_gradient(args.seed),
        verify_pursuit(args.seed, fault),
        verify_simulator(args.seed.wrapping_add(42)),
    ];
    let report = VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    log::info!("property suite finished in {:.1}s", started.elapsed().as_secs_f64());
    let path = args.out.join("verify_report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<NetworkScenario> {
    let params = ScenarioParams {
        lambda: args.lambda,
        ..ScenarioParams::new(args.n, args.k, args.side, args.seed)
    };
    let s = generate_scenario(params)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    save_scenario(&s, &args.out)?;
    Ok(s)
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(a) => {
            let s = cmd_generate(&a)?;
            println!("wrote {} ({} APs, {} devices)", a.out.display(), s.n_aps(), s.n_devices());
        }
        Command::Optimize(a) => {
            let m = RunManifest::from_args(&a, &[Scheme::Proposed])?;
            for r in cmd_optimize(&m)? {
                println!(
                    "{} {}: utility {:.6e}, mean delay {:.4e} s, {} segments, {:.2}s",
                    r.scheme, r.sweep, r.utility, r.mean_delay, r.active_segments, r.seconds
                );
            }
        }
        Command::Compare(a) => {
            let m = RunManifest::from_args(&a, &Scheme::ALL)?;
            let report = cmd_compare(&m)?;
            for (s, k) in &report.knees {
                println!("{s}: knee {}", k.map_or("none".to_string(), |x| x.to_string()));
            }
            if report.rows.iter().any(|r| !r.chain_ok) {
                eprintln!("utility ordering violated; see compare.csv");
                return Ok(1);
            }
        }
        Command::Simulate(a) => {
            let m = RunManifest::from_args(&a.run, &Scheme::ALL)?;
            for (r, _) in cmd_simulate(&m, a.packets, a.warmup)? {
                println!(
                    "{} {}: simulated {:.4e} s, analytic {:.4e} s{}",
                    r.scheme,
                    r.sweep,
                    r.simulated_mean_delay,
                    r.analytic_mean_delay,
                    if r.unstable { " (unstable)" } else { "" }
                );
            }
        }
        Command::Verify(a) => {
            let report = cmd_verify(&a)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed {
                return Ok(1);
            }
        }
    }
    Ok(0)
}
