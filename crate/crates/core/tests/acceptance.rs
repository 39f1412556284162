//! Acceptance suite. Runs every exit criterion, prints one PASS/FAIL line
//! per criterion and exits nonzero if any failed.
//!
//! Run with `cargo test --release -p ranopt --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use ranopt::affine::{solve_affine, AffineOptions};
use ranopt::baselines::{compare_chain, run_scheme, Scheme};
use ranopt::channel::Network;
use ranopt::pursuit::sparsity::verify_sparsity;
use ranopt::pursuit::PursuitOptions;
use ranopt::rates::PowerProfile;
use ranopt::scenario::{generate_scenario, NetworkScenario, ScenarioParams};
use ranopt::simulator::{simulate, Horizon, SimConfig};
use ranopt::utility::{delay_gradient, delay_utility, UtilitySpec, DELAY_CLAMP};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// oracles

/// Weighted sum of `log2(1 + SINR)` over active links, computed from the
/// raw gains and neighborhoods.
fn weighted_sum_rate(net: &Network, served: &[Option<usize>], psd: &[f64], c: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, z) in served.iter().enumerate() {
        let Some(j) = *z else { continue };
        if psd[i] <= 0.0 {
            continue;
        }
        let mut denom = net.nb.residual_noise(j);
        for &(l, g) in net.nb.device_links(j) {
            if l != i && served[l].is_some() {
                denom += psd[l] * g;
            }
        }
        total += c[j] * (1.0 + psd[i] * net.gains.get(i, j) / denom).log2();
    }
    total
}

/// Best weighted sum rate over every association and a uniform PSD grid
/// with `levels` points from 0 to `p_max`.
fn grid_optimum(net: &Network, c: &[f64], levels: usize) -> f64 {
    let n = net.n_aps();
    let choices: Vec<Vec<(Option<usize>, f64)>> = (0..n)
        .map(|i| {
            let mut v = vec![(None, 0.0)];
            for j in net.nb.k_of_ap(i) {
                for q in 1..levels {
                    v.push((Some(j), net.p_max * q as f64 / (levels - 1) as f64));
                }
            }
            v
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut best = 0.0f64;
    loop {
        let served: Vec<Option<usize>> = (0..n).map(|i| choices[i][idx[i]].0).collect();
        let psd: Vec<f64> = (0..n).map(|i| choices[i][idx[i]].1).collect();
        best = best.max(weighted_sum_rate(net, &served, &psd, c));
        let mut a = 0;
        loop {
            if a == n {
                return best;
            }
            idx[a] += 1;
            if idx[a] < choices[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

fn analytic_network_delay(rates: &[f64], arrivals: &[f64], bits: f64) -> f64 {
    let mut weighted = 0.0;
    for (r, a) in rates.iter().zip(arrivals) {
        if *a == 0.0 {
            continue;
        }
        let mu = r / bits;
        if mu <= *a {
            return f64::INFINITY;
        }
        weighted += a / (mu - a);
    }
    weighted / arrivals.iter().sum::<f64>()
}

fn random_weights(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..k).map(|_| rng.random::<f64>()).collect()
}

fn medium(seed: u64) -> NetworkScenario {
    generate_scenario(ScenarioParams::medium(seed)).expect("medium scenario")
}

fn nondecreasing(trace: &[f64], slack: impl Fn(f64) -> f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[0] == f64::NEG_INFINITY || w[1] >= w[0] - slack(w[0]))
}

// ---------------------------------------------------------------------------
// criteria

fn inner_monotone() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let total = 200;
    let (mut monotone, mut converged, mut consistent) = (0, 0, 0);
    let mut worst_iters = 0;
    let mut failures = Vec::new();
    for t in 0..total {
        let n = rng.random_range(2..=50);
        let k = rng.random_range(2..=100);
        let side = 133.0 * (n as f64).sqrt();
        let s = generate_scenario(ScenarioParams::new(n, k, side, rng.random())).expect("scenario");
        let net = Network::from_scenario(&s);
        let c = random_weights(k, &mut rng);
        match solve_affine(&c, &net, None, &AffineOptions::default()) {
            Ok(rep) => {
                if nondecreasing(&rep.objective_trace, |_| 1e-9) {
                    monotone += 1;
                }
                if rep.converged {
                    converged += 1;
                }
                worst_iters = worst_iters.max(rep.iterations);
                let direct = weighted_sum_rate(&net, &rep.profile.served, &rep.profile.psd, &c);
                if (direct - rep.objective()).abs() <= 1e-9 * direct.abs().max(1.0) {
                    consistent += 1;
                }
            }
            Err(e) => failures.push(format!("#{t}: {e}")),
        }
    }
    verdict(
        failures.is_empty() && monotone == total && consistent == total && converged * 100 >= 99 * total,
        format!(
            "{monotone}/{total} monotone, {converged}/{total} converged within 500 iterations (max {worst_iters}), \
             {consistent}/{total} objectives match direct evaluation{}",
            if failures.is_empty() { String::new() } else { format!("; errors: {}", failures.join(", ")) }
        ),
    )
}

fn small_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let total = 50;
    let start = Instant::now();
    let mut hits = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..total {
        let s = generate_scenario(ScenarioParams::new(2, 2, 200.0, rng.random())).expect("scenario");
        let net = Network::from_scenario(&s);
        let c = random_weights(2, &mut rng);
        let got = solve_affine(&c, &net, None, &AffineOptions::default()).map_or(f64::NEG_INFINITY, |r| r.objective());
        let best = grid_optimum(&net, &c, 50);
        let ratio = if best > 0.0 { got / best } else { 1.0 };
        worst = worst.min(ratio);
        if got >= 0.999 * best {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        hits * 100 >= 95 * total && secs < 1.0,
        format!("{hits}/{total} within 0.1% of the grid optimum (worst ratio {worst:.3}), {secs:.2}s"),
    )
}

fn sparsity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let total = 20;
    let start = Instant::now();
    let mut held = 0;
    let mut notes = Vec::new();
    for t in 0..total {
        let n = rng.random_range(1..=2);
        let k = rng.random_range(1..=2);
        let s = generate_scenario(ScenarioParams::new(n, k, 150.0, rng.random())).expect("scenario");
        let net = Network::from_scenario(&s);
        // loads at a fifth of what time sharing the strongest links could carry
        let bits = s.packet_bits();
        let arrivals: Vec<f64> = (0..k)
            .map(|j| {
                let best = net
                    .nb
                    .device_links(j)
                    .iter()
                    .map(|&(_, g)| g)
                    .fold(0.0, f64::max);
                let solo = net.bandwidth * (1.0 + net.p_max * best / net.nb.residual_noise(j)).log2();
                0.2 * solo / (k as f64 * bits)
            })
            .collect();
        let utilities = vec![
            ("delay".to_string(), UtilitySpec::delay(arrivals, bits)),
            ("wsr".to_string(), UtilitySpec::weighted_sum_rate(random_weights(k, &mut rng))),
        ];
        let levels = [0.0, 0.5 * net.p_max, net.p_max];
        match verify_sparsity(&net, &levels, &utilities) {
            Ok(rep) if rep.holds() => held += 1,
            Ok(rep) => notes.push(format!("#{t}: {:?}", rep.utilities)),
            Err(e) => notes.push(format!("#{t}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        held == total && secs < 300.0,
        format!("{held}/{total} instances with best(k) >= best(k+2) - 1e-4, {secs:.1}s{}", if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }),
    )
}

/// Sweep points (packets/s/device) at which the proposed scheme is feasible
/// on the seed-0 medium scenario.
const STABLE_SWEEP: [f64; 4] = [2.0, 4.0, 6.0, 8.0];

fn outer_loop() -> Verdict {
    let base = medium(0);
    let k = base.n_devices();
    let mut rows = Vec::new();
    let mut ok = true;
    let (mut outer, mut active, mut profiles) = (0.0, 0.0, 0.0);
    for lambda in STABLE_SWEEP {
        let s = base.with_uniform_lambda(lambda);
        let net = Network::from_scenario(&s);
        let u = UtilitySpec::delay(s.lambda.clone(), s.packet_bits());
        let run = run_scheme(Scheme::Proposed, &u, &net, &PursuitOptions::default()).expect("pursuit");
        let state = run.state.expect("pursuit state");
        let trace = state.utility_trace();
        let monotone = nondecreasing(&trace, |a| 1e-9 * a.abs());
        let segs = run.plan.active_segments();
        ok &= monotone && segs <= k + 1 && run.utility.is_finite();
        outer += state.outer_iterations() as f64;
        active += segs as f64;
        profiles += state.profiles.len() as f64;
        rows.push(format!(
            "lambda {lambda}: {} outer, |P| {}, {segs} active{}",
            state.outer_iterations(),
            state.profiles.len(),
            if monotone { "" } else { ", NOT monotone" }
        ));
    }
    let m = STABLE_SWEEP.len() as f64;
    let (outer, active, profiles) = (outer / m, active / m, profiles / m);
    let close = active >= 0.7 * profiles;
    verdict(
        ok && outer <= 60.0 && close,
        format!(
            "mean {outer:.1} outer iterations, mean {active:.1} active of {profiles:.1} profiles (ratio {:.2}); {}",
            active / profiles,
            rows.join("; ")
        ),
    )
}

const CHAIN_SWEEP: [f64; 8] = [0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0];

fn dominance() -> Verdict {
    let mut violations = Vec::new();
    let mut knees = Vec::new();
    for seed in 0..10 {
        let base = medium(seed);
        let mut knee = [None::<f64>; 4];
        for lambda in CHAIN_SWEEP {
            let s = base.with_uniform_lambda(lambda);
            let net = Network::from_scenario(&s);
            let u = UtilitySpec::delay(s.lambda.clone(), s.packet_bits());
            let runs = compare_chain(&u, &net, &PursuitOptions::default()).expect("compare");
            let value = |scheme: Scheme| {
                let r = runs.iter().find(|r| r.scheme == scheme).expect("scheme present");
                // independent of the scheme's own bookkeeping
                delay_utility(&r.plan.rates, &s.lambda, s.packet_bits())
            };
            let ordered = |hi: f64, lo: f64| hi >= lo - 1e-9 * lo.abs() || lo == f64::NEG_INFINITY;
            if !ordered(value(Scheme::Proposed), value(Scheme::Pattern)) {
                violations.push(format!("seed {seed} lambda {lambda}: proposed < pattern"));
            }
            if !ordered(value(Scheme::OptAssoc), value(Scheme::MaxRsrp)) {
                violations.push(format!("seed {seed} lambda {lambda}: optassoc < maxrsrp"));
            }
            for (slot, scheme) in Scheme::ALL.into_iter().enumerate() {
                if value(scheme).is_finite() {
                    knee[slot] = Some(lambda);
                }
            }
        }
        let proposed = knee[3].unwrap_or(0.0);
        if knee[..3].iter().any(|b| b.unwrap_or(0.0) > proposed) {
            violations.push(format!("seed {seed}: knee {knee:?}"));
        }
        knees.push(format!("{seed}:{}", knee.map(|k| k.map_or("-".to_string(), |v| v.to_string())).join("/")));
    }
    verdict(
        violations.is_empty(),
        format!(
            "knees maxrsrp/optassoc/pattern/proposed per seed [{}]{}",
            knees.join(" "),
            if violations.is_empty() { String::new() } else { format!("; violations: {}", violations.join(", ")) }
        ),
    )
}

fn simulator() -> Verdict {
    // single link at load 0.8
    let gains = ranopt::channel::LinkGains::from_matrix(1, 1, vec![1.0]).expect("gains");
    let net = Network::from_gains(gains, 1.0, 1.0, 1.0, 1e-9, 20);
    let plan = ranopt::rates::AllocationPlan::new(
        vec![PowerProfile { served: vec![Some(0)], psd: vec![1.0] }],
        vec![1.0],
        &net,
    )
    .expect("plan");
    let mu = plan.rates[0];
    let arrivals = vec![0.8 * mu];
    let mut cfg = SimConfig::new(&net, &plan, arrivals, 1.0);
    cfg.horizon = Horizon::Packets(100_000);
    cfg.seed = 42;
    let out = simulate(&cfg).expect("simulate");
    let expected = 1.0 / (mu - 0.8 * mu);
    let mm1_err = (out.network_mean_delay - expected).abs() / expected;
    let mm1_ok = mm1_err <= 0.05 && out.recorded_packets() >= 100_000;

    // medium scenario, proposed plan, five simulation seeds per point
    let base = medium(0);
    let t95 = StudentsT::new(0.0, 1.0, 4.0).expect("t").inverse_cdf(0.95);
    let mut rows = Vec::new();
    let mut conservative = true;
    let mut stable_points = 0;
    for lambda in STABLE_SWEEP {
        let s = base.with_uniform_lambda(lambda);
        let net = Network::from_scenario(&s);
        let u = UtilitySpec::delay(s.lambda.clone(), s.packet_bits());
        let run = run_scheme(Scheme::Proposed, &u, &net, &PursuitOptions::default()).expect("pursuit");
        let analytic = analytic_network_delay(&run.plan.rates, &s.lambda, s.packet_bits());
        if !analytic.is_finite() {
            rows.push(format!("lambda {lambda}: analytically unstable"));
            continue;
        }
        let mut samples = Vec::new();
        let mut unstable = false;
        for seed in 0..5 {
            let mut cfg = SimConfig::new(&net, &run.plan, s.lambda.clone(), s.packet_bits());
            cfg.horizon = Horizon::Packets(50_000);
            cfg.seed = seed;
            let out = simulate(&cfg).expect("simulate");
            unstable |= out.any_unstable();
            samples.push(out.network_mean_delay);
        }
        if unstable {
            rows.push(format!("lambda {lambda}: simulated queue unstable"));
            continue;
        }
        stable_points += 1;
        let mean = samples.iter().sum::<f64>() / 5.0;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        let upper = mean + t95 * sd / 5f64.sqrt();
        conservative &= upper <= analytic;
        rows.push(format!("lambda {lambda}: simulated {mean:.4e} (95% upper {upper:.4e}) vs analytic {analytic:.4e}"));
    }
    verdict(
        mm1_ok && conservative && stable_points > 0,
        format!(
            "M/M/1 mean {:.4} vs {expected:.4} ({:.2}% off); {}",
            out.network_mean_delay,
            100.0 * mm1_err,
            rows.join("; ")
        ),
    )
}

fn runtime() -> Verdict {
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for lambda in STABLE_SWEEP {
        let start = Instant::now();
        let mut params = ScenarioParams::medium(0);
        params.lambda = lambda;
        let s = generate_scenario(params).expect("scenario");
        let net = Network::from_scenario(&s);
        let u = UtilitySpec::delay(s.lambda.clone(), s.packet_bits());
        run_scheme(Scheme::Proposed, &u, &net, &PursuitOptions::default()).expect("pursuit");
        let secs = start.elapsed().as_secs_f64();
        worst = worst.max(secs);
        rows.push(format!("lambda {lambda}: {secs:.2}s"));
    }
    verdict(worst <= 60.0, format!("slowest end-to-end run {worst:.2}s ({})", rows.join(", ")))
}

fn gradient() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=10);
        let bits = rng.random_range(1e3..1e6);
        let arrivals: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..50.0)).collect();
        let rates: Vec<f64> = arrivals.iter().map(|a| a * bits * rng.random_range(1.1..5.0)).collect();
        let g = delay_gradient(&rates, &arrivals, bits, DELAY_CLAMP);
        for j in 0..k {
            let h = 1e-6 * rates[j];
            let (mut up, mut dn) = (rates.clone(), rates.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (delay_utility(&up, &arrivals, bits) - delay_utility(&dn, &arrivals, bits)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / fd.abs());
        }
    }
    verdict(worst <= 1e-4, format!("worst relative error {worst:.2e} over 100 points"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("1 inner solver monotone and convergent", inner_monotone),
        ("2 small-instance oracle", small_oracle),
        ("3 sparsity at desk scale", sparsity),
        ("4 outer loop monotone and segment bound", outer_loop),
        ("5 dominance chain and knees", dominance),
        ("6 simulator vs queueing formulas", simulator),
        ("7 medium runtime envelope", runtime),
        ("8 delay gradient vs finite differences", gradient),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name} [{:.1}s]: {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
