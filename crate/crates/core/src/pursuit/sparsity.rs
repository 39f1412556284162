//! Exhaustive check that few segments suffice on gridded toy instances.
//!
//! Enumerates every profile whose PSDs lie on a small grid, then for each
//! piece count `m` finds the best utility over convex mixtures of any `m`
//! profiles by grid search on the weight simplex. For a monotone utility
//! the best `k`-piece mixture should match the best `(k+2)`-piece mixture.

use crate::channel::Network;
use crate::error::{Error, Result};
use crate::rates::{profile_rates, PowerProfile};
use crate::utility::UtilitySpec;

/// Weight-simplex lattice resolution.
pub const RESOLUTION: usize = 1000;
/// Slack allowed between `best(k)` and `best(k + 2)`.
pub const SPARSITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct UtilitySparsity {
    pub label: String,
    /// `best[m - 1]` is the best utility with at most `m` pieces.
    pub best: Vec<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct SparsityReport {
    pub n_aps: usize,
    pub n_devices: usize,
    pub profiles: usize,
    pub utilities: Vec<UtilitySparsity>,
}

impl SparsityReport {
    pub fn holds(&self) -> bool {
        self.utilities.iter().all(|u| u.holds)
    }
}

/// All profiles with PSDs on `levels`, deduplicated after canonicalization.
pub fn enumerate_profiles(net: &Network, levels: &[f64]) -> Vec<PowerProfile> {
    let n = net.n_aps();
    let options: Vec<Vec<(Option<usize>, f64)>> = (0..n)
        .map(|i| {
            let mut opts = vec![(None, 0.0)];
            for j in net.nb.k_of_ap(i) {
                for &p in levels.iter().filter(|&&p| p > 0.0) {
                    opts.push((Some(j), p));
                }
            }
            opts
        })
        .collect();
    let mut out: Vec<PowerProfile> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let mut p = PowerProfile::idle(n);
        for i in 0..n {
            let (z, psd) = options[i][idx[i]];
            p.served[i] = z;
            p.psd[i] = psd;
        }
        let p = p.canonical();
        if !out.contains(&p) {
            out.push(p);
        }
        let mut carry = 0;
        loop {
            if carry == n {
                return out;
            }
            idx[carry] += 1;
            if idx[carry] < options[carry].len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
}

/// Removes rate vectors dominated (weakly, in every coordinate) by another
/// one. Valid only for monotone utilities.
fn pareto(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (a, p) in points.iter().enumerate() {
        let dominated = points.iter().enumerate().any(|(b, q)| {
            b != a && q.iter().zip(p).all(|(x, y)| x >= y) && (q != p || b < a)
        });
        if !dominated {
            out.push(p.clone());
        }
    }
    out
}

fn mix(points: &[&Vec<f64>], weights: &[f64], buf: &mut [f64]) {
    buf.iter_mut().for_each(|x| *x = 0.0);
    for (p, &w) in points.iter().zip(weights) {
        for (b, &x) in buf.iter_mut().zip(p.iter()) {
            *b += w * x;
        }
    }
}

/// Best utility over lattice points (multiples of `1/RESOLUTION`) of the
/// weight simplex spanned by `points`.
fn best_mixture(u: &UtilitySpec, points: &[&Vec<f64>]) -> f64 {
    let k = points[0].len();
    let mut buf = vec![0.0; k];
    let res = RESOLUTION;
    let h = 1.0 / res as f64;
    let mut eval = |w: &[f64]| {
        mix(points, w, &mut buf);
        u.value(&buf)
    };
    match points.len() {
        1 => eval(&[1.0]),
        2 => (0..=res)
            .map(|a| {
                let x = a as f64 * h;
                eval(&[x, 1.0 - x])
            })
            .fold(f64::NEG_INFINITY, f64::max),
        3 => {
            let mut best = f64::NEG_INFINITY;
            for a in 0..=res {
                for b in 0..=res - a {
                    let (x, y) = (a as f64 * h, b as f64 * h);
                    best = best.max(eval(&[x, y, 1.0 - x - y]));
                }
            }
            best
        }
        m => refine_lattice(m, res, &mut eval),
    }
}

/// Coarse-to-fine search on the simplex lattice for `m >= 4` weights: an
/// exhaustive pass at step `res / 50`, then local passes around the
/// incumbent at successively finer steps down to one lattice unit.
fn refine_lattice(m: usize, res: usize, eval: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let to_weights = |c: &[usize]| -> Vec<f64> { c.iter().map(|&x| x as f64 / res as f64).collect() };
    let mut step = res / 50;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_pt = vec![0usize; m];
    best_pt[0] = res;

    // exhaustive coarse pass over compositions of res/step into m parts
    let parts = res / step;
    let mut comp = vec![0usize; m];
    let mut visit = |comp: &[usize], best_val: &mut f64, best_pt: &mut Vec<usize>| {
        let c: Vec<usize> = comp.iter().map(|x| x * step).collect();
        let v = eval(&to_weights(&c));
        if v > *best_val {
            *best_val = v;
            *best_pt = c;
        }
    };
    compositions(parts, m, 0, &mut comp, &mut |c| visit(c, &mut best_val, &mut best_pt));

    while step > 1 {
        let fine = (step / 5).max(1);
        let radius = 2 * step / fine;
        let center = best_pt.clone();
        let mut local_best = (best_val, best_pt.clone());
        // offsets for the first m-1 coordinates; the last absorbs the rest
        let span = 2 * radius + 1;
        let total = span.pow((m - 1) as u32);
        for code in 0..total {
            let mut c = vec![0usize; m];
            let mut rem = code;
            let mut sum: isize = 0;
            let mut ok = true;
            for (d, slot) in c.iter_mut().take(m - 1).enumerate() {
                let off = (rem % span) as isize - radius as isize;
                rem /= span;
                let v = center[d] as isize + off * fine as isize;
                if v < 0 || v > res as isize {
                    ok = false;
                    break;
                }
                *slot = v as usize;
                sum += v;
            }
            if !ok || sum > res as isize {
                continue;
            }
            c[m - 1] = res - sum as usize;
            let v = eval(&to_weights(&c));
            if v > local_best.0 {
                local_best = (v, c);
            }
        }
        best_val = local_best.0;
        best_pt = local_best.1;
        step = fine;
    }
    best_val
}

fn compositions(total: usize, parts: usize, idx: usize, buf: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if idx == parts - 1 {
        buf[idx] = total;
        f(buf);
        return;
    }
    for x in 0..=total {
        buf[idx] = x;
        compositions(total - x, parts, idx + 1, buf, f);
    }
}

fn subsets(n: usize, m: usize, start: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if buf.len() == m {
        f(buf);
        return;
    }
    for i in start..n {
        buf.push(i);
        subsets(n, m, i + 1, buf, f);
        buf.pop();
    }
}

/// Best utility over mixtures of at most `m` points, for `m = 1..=max_m`.
fn best_by_pieces(u: &UtilitySpec, points: &[Vec<f64>], max_m: usize) -> Vec<f64> {
    let pts = if u.is_monotone() { pareto(points) } else { points.to_vec() };
    let mut best = Vec::with_capacity(max_m);
    let mut running = f64::NEG_INFINITY;
    for m in 1..=max_m {
        let size = m.min(pts.len());
        let mut local = f64::NEG_INFINITY;
        subsets(pts.len(), size, 0, &mut Vec::new(), &mut |s| {
            let chosen: Vec<&Vec<f64>> = s.iter().map(|&i| &pts[i]).collect();
            local = local.max(best_mixture(u, &chosen));
        });
        running = running.max(local);
        best.push(running);
    }
    best
}

/// Enumerates profiles on `levels` and reports the best utility per piece
/// count for each `(label, utility)` pair.
pub fn verify_sparsity(
    net: &Network,
    levels: &[f64],
    utilities: &[(String, UtilitySpec)],
) -> Result<SparsityReport> {
    let (n, k) = (net.n_aps(), net.n_devices());
    if n > 2 || k > 2 {
        return Err(Error::TooLarge(format!("{n} APs x {k} devices (limit 2 x 2)")));
    }
    if levels.len() > 5 {
        return Err(Error::TooLarge(format!("{} power levels (limit 5)", levels.len())));
    }
    if levels.iter().any(|&p| !(0.0..=net.p_max).contains(&p)) {
        return Err(Error::validation("levels", "power levels must lie in [0, p_max]"));
    }
    let profiles = enumerate_profiles(net, levels);
    let points: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| profile_rates(p, net).into_iter().map(|s| s * net.bandwidth).collect())
        .collect();
    let max_m = k + 2;
    let utilities = utilities
        .iter()
        .map(|(label, u)| {
            let best = best_by_pieces(u, &points, max_m);
            let holds = !u.is_monotone() || {
                let (bk, bk2) = (best[k - 1], best[max_m - 1]);
                bk == bk2 || bk >= bk2 - SPARSITY_TOL
            };
            UtilitySparsity {
                label: label.clone(),
                best,
                holds,
            }
        })
        .collect();
    Ok(SparsityReport {
        n_aps: n,
        n_devices: k,
        profiles: profiles.len(),
        utilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::tests::unit_network;

    #[test]
    fn profile_enumeration_counts() {
        let net = unit_network(2, 2, vec![1.0, 0.5, 0.5, 1.0]);
        // per AP: idle + 2 devices x 2 nonzero levels = 5 options
        assert_eq!(enumerate_profiles(&net, &[0.0, 0.5, 1.0]).len(), 25);
        assert_eq!(enumerate_profiles(&net, &[0.0]).len(), 1);
    }

    #[test]
    fn single_device_single_piece() {
        let net = unit_network(2, 1, vec![1.0, 0.7]);
        let u = vec![
            ("delay".to_string(), UtilitySpec::delay(vec![0.5], 1.0)),
            ("wsr".to_string(), UtilitySpec::weighted_sum_rate(vec![1.0])),
        ];
        let rep = verify_sparsity(&net, &[0.0, 0.5, 1.0], &u).unwrap();
        for s in &rep.utilities {
            assert_eq!(s.best.len(), 3);
            assert_eq!(s.best[0], s.best[2]);
        }
    }

    #[test]
    fn zero_grid_is_degenerate() {
        let net = unit_network(2, 2, vec![1.0, 0.5, 0.5, 1.0]);
        let u = vec![
            ("delay".to_string(), UtilitySpec::delay(vec![0.1, 0.1], 1.0)),
            ("wsr".to_string(), UtilitySpec::weighted_sum_rate(vec![1.0, 2.0])),
        ];
        let rep = verify_sparsity(&net, &[0.0], &u).unwrap();
        assert!(rep.utilities[0].best.iter().all(|&b| b == f64::NEG_INFINITY));
        assert!(rep.utilities[1].best.iter().all(|&b| b == 0.0));
        assert!(rep.holds());
    }

    #[test]
    fn refuses_large_instances() {
        let net = unit_network(3, 1, vec![1.0, 1.0, 1.0]);
        assert!(matches!(verify_sparsity(&net, &[0.0, 1.0], &[]), Err(Error::TooLarge(_))));
    }

    #[test]
    fn refinement_finds_interior_optimum() {
        // concave bowl peaked at weights (0.1, 0.2, 0.3, 0.4)
        let target = [0.1, 0.2, 0.3, 0.4];
        let mut f = |w: &[f64]| -w.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let v = refine_lattice(4, RESOLUTION, &mut f);
        assert!(v > -1e-12, "{v}");
    }
}
