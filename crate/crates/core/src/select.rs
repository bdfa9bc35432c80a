//! Choosing the bound order `k` for each variable.
//!
//! For a single variable, order `k + 1` beats order `k` exactly when
//! `t > Phi * sqrt(2 (log A_{k+1} - log A_k))`. For sums the objective
//! `sum log A_{k_i} - t^2 / (2 sum Phi_i^2 / k_i)` couples the orders through
//! the exponent, so the exact optimum is found by enumeration; a continuous
//! relaxation gives a cheap near-optimal assignment for larger problems.

use rayon::prelude::*;

use crate::bounds::multiplier_log;
use crate::error::{Error, Result};
use crate::support::{phi, BoundedSupport};
use crate::tail::{chernoff_log_bound, SumScenario};

/// Default upper limit on the order searched.
pub const DEFAULT_K_MAX: u32 = 8;

/// Largest number of assignments `optimize_exact` will enumerate.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Absolute precision of regime boundaries found by [`best_region_partition`].
pub const PARTITION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverTable {
    pub support: BoundedSupport,
    /// `(k, k + 1, t*)`: order `k + 1` is strictly tighter than `k` for `t > t*`.
    pub thresholds: Vec<(u32, u32, f64)>,
}

/// Per-variable order assignment and the one-sided log bound it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub ks: Vec<u32>,
    pub log_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSelection {
    /// Real-valued orders from the stationarity condition of the relaxed problem.
    pub fractional: Vec<f64>,
    /// The threshold at which the relaxed objective is stationary along every ray,
    /// `sum_i Phi_i sqrt(2 log(1 + r_i))`.
    pub balance_t: f64,
    /// Best integer assignment among the floor/ceil neighbours of `fractional`.
    pub selection: KSelection,
}

/// A maximal `t` interval over which one order vector stays optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub t_start: f64,
    pub t_end: f64,
    pub ks: Vec<u32>,
}

fn check_t(t: f64) -> Result<()> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::domain(format!(
            "t must be a positive finite number, got {t}"
        )));
    }
    Ok(())
}

fn check_k_max(k_max: u32) -> Result<()> {
    if k_max == 0 {
        return Err(Error::domain("k_max must be at least 1"));
    }
    Ok(())
}

/// `Phi * sqrt(2 (log A_{k+1} - log A_k))`.
pub fn crossover_threshold(support: &BoundedSupport, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("order k must be at least 1"));
    }
    let gap = multiplier_log(support, k + 1)? - multiplier_log(support, k)?;
    if gap < 0.0 {
        return Err(Error::Consistency(format!(
            "multiplier for order {} is smaller than for order {k}; order {} dominates for every t",
            k + 1,
            k + 1
        )));
    }
    Ok(phi(support) * (2.0 * gap).sqrt())
}

pub fn crossover_table(support: &BoundedSupport, k_max: u32) -> Result<CrossoverTable> {
    check_k_max(k_max)?;
    let thresholds = (1..k_max)
        .map(|k| crossover_threshold(support, k).map(|t| (k, k + 1, t)))
        .collect::<Result<_>>()?;
    Ok(CrossoverTable {
        support: *support,
        thresholds,
    })
}

/// Per-variable ingredients of the objective: `log A_k` and `Phi^2 / (2k)` for k = 1..=k_max.
struct OrderTable {
    log_mult: Vec<f64>,
    rate: Vec<f64>,
}

impl OrderTable {
    fn new(support: &BoundedSupport, k_max: u32) -> Result<Self> {
        let phi2 = phi(support).powi(2);
        let log_mult = (1..=k_max)
            .map(|k| multiplier_log(support, k))
            .collect::<Result<_>>()?;
        let rate = (1..=k_max).map(|k| phi2 / (2.0 * f64::from(k))).collect();
        Ok(Self { log_mult, rate })
    }
}

/// The one-sided log bound of the order-k family for every variable at `t`.
pub fn objective(variables: &[BoundedSupport], ks: &[u32], t: f64) -> Result<f64> {
    let scenario = SumScenario::with_orders(variables.to_vec(), ks)?;
    let (l, r) = scenario.totals();
    Ok(chernoff_log_bound(l, r, t))
}

/// Order in `1..=k_max` minimising the single-variable bound at `t`; ties go to the smaller order.
pub fn best_k_single(support: &BoundedSupport, t: f64, k_max: u32) -> Result<u32> {
    check_t(t)?;
    check_k_max(k_max)?;
    let table = OrderTable::new(support, k_max)?;
    let mut best = (1, f64::INFINITY);
    for k in 1..=k_max {
        let i = (k - 1) as usize;
        let v = chernoff_log_bound(table.log_mult[i], table.rate[i], t);
        if v < best.1 {
            best = (k, v);
        }
    }
    Ok(best.0)
}

fn guard(per_variable: u64, n: usize) -> Result<()> {
    let candidates = (per_variable as f64).powi(n as i32);
    if candidates > ENUMERATION_LIMIT as f64 {
        return Err(Error::SizeGuard {
            candidates,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Exact minimiser of the coupled objective over `{1..=k_max}^n`.
pub fn optimize_exact(variables: &[BoundedSupport], t: f64, k_max: u32) -> Result<KSelection> {
    optimize_exact_with_offset(variables, (0.0, 0.0), t, k_max)
}

/// As [`optimize_exact`], with a fixed `(log multiplier, rate)` contribution from
/// variables whose bounds are not being chosen.
pub fn optimize_exact_with_offset(
    variables: &[BoundedSupport],
    offset: (f64, f64),
    t: f64,
    k_max: u32,
) -> Result<KSelection> {
    check_t(t)?;
    check_k_max(k_max)?;
    if variables.is_empty() {
        return Err(Error::domain("no variables to optimise"));
    }
    guard(u64::from(k_max), variables.len())?;
    let tables = variables
        .iter()
        .map(|v| OrderTable::new(v, k_max))
        .collect::<Result<Vec<_>>>()?;
    let choices: Vec<Vec<u32>> = vec![(1..=k_max).collect(); variables.len()];
    Ok(search_lattice(&tables, &choices, offset, t))
}

/// Lexicographic scan of the product of `choices`; keeps the first strict minimum.
fn search_lattice(
    tables: &[OrderTable],
    choices: &[Vec<u32>],
    offset: (f64, f64),
    t: f64,
) -> KSelection {
    let n = tables.len();
    let mut idx = vec![0usize; n];
    let mut best_ks = Vec::new();
    let mut best = f64::INFINITY;
    loop {
        let (mut l, mut r) = offset;
        for (j, table) in tables.iter().enumerate() {
            let k = choices[j][idx[j]] as usize - 1;
            l += table.log_mult[k];
            r += table.rate[k];
        }
        let v = chernoff_log_bound(l, r, t);
        if v < best {
            best = v;
            best_ks = (0..n).map(|j| choices[j][idx[j]]).collect();
        }
        // odometer, last variable fastest
        let mut j = n;
        loop {
            if j == 0 {
                return KSelection {
                    ks: best_ks,
                    log_bound: best,
                };
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Continuous relaxation with `A_k ~ (1 + r)^k`.
///
/// Stationarity gives `k_j = c_j t / sum_i(Phi_i^2 / k_i)` with
/// `c_j = Phi_j / sqrt(2 log(1 + r_j))`. The right-hand side is proportional to
/// `c` whatever `k` is, so the direction is fixed and the relaxed objective is
/// linear along it; the scale is taken from the map applied at `k = 1`, giving
/// `k_j = c_j t / sum_i Phi_i^2`. The integer answer is the best floor/ceil
/// neighbour under the exact objective, restricted to `1..=k_max`.
pub fn optimize_relaxed(
    variables: &[BoundedSupport],
    t: f64,
    k_max: u32,
) -> Result<RelaxedSelection> {
    check_t(t)?;
    check_k_max(k_max)?;
    if variables.is_empty() {
        return Err(Error::domain("no variables to optimise"));
    }
    guard(2, variables.len())?;
    let phis: Vec<f64> = variables.iter().map(phi).collect();
    let slopes: Vec<f64> = variables
        .iter()
        .map(|v| (2.0 * v.spread_ratio().ln_1p()).sqrt())
        .collect();
    let phi2_sum: f64 = phis.iter().map(|p| p * p).sum();
    let fractional: Vec<f64> = phis
        .iter()
        .zip(&slopes)
        .map(|(p, w)| p / w * t / phi2_sum)
        .collect();
    let balance_t = phis.iter().zip(&slopes).map(|(p, w)| p * w).sum();

    let choices: Vec<Vec<u32>> = fractional
        .iter()
        .map(|&k| {
            let clamp = |x: f64| x.clamp(1.0, f64::from(k_max)) as u32;
            let (lo, hi) = (clamp(k.floor()), clamp(k.ceil()));
            if lo == hi {
                vec![lo]
            } else {
                vec![lo, hi]
            }
        })
        .collect();
    let tables = variables
        .iter()
        .map(|v| OrderTable::new(v, k_max))
        .collect::<Result<Vec<_>>>()?;
    let selection = search_lattice(&tables, &choices, (0.0, 0.0), t);
    Ok(RelaxedSelection {
        fractional,
        balance_t,
        selection,
    })
}

/// Split `[t_min, t_max]` into intervals on which the exact optimum is constant.
pub fn best_region_partition(
    variables: &[BoundedSupport],
    t_min: f64,
    t_max: f64,
    grid: usize,
    k_max: u32,
) -> Result<Vec<Regime>> {
    check_t(t_min)?;
    check_t(t_max)?;
    if t_min >= t_max {
        return Err(Error::domain(format!(
            "need t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if grid < 2 {
        return Err(Error::domain("the t grid needs at least 2 points"));
    }
    let ts = linspace(t_min, t_max, grid);
    let opt = |t: f64| optimize_exact(variables, t, k_max).map(|s| s.ks);
    let best: Vec<Vec<u32>> = ts.par_iter().map(|&t| opt(t)).collect::<Result<_>>()?;

    let mut regimes: Vec<Regime> = Vec::new();
    let mut start = t_min;
    for i in 1..grid {
        if best[i] == best[i - 1] {
            continue;
        }
        let (mut lo, mut hi) = (ts[i - 1], ts[i]);
        while hi - lo > PARTITION_TOL {
            let mid = 0.5 * (lo + hi);
            if opt(mid)? == best[i - 1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = 0.5 * (lo + hi);
        regimes.push(Regime {
            t_start: start,
            t_end: boundary,
            ks: best[i - 1].clone(),
        });
        start = boundary;
    }
    regimes.push(Regime {
        t_start: start,
        t_end: t_max,
        ks: best[grid - 1].clone(),
    });
    Ok(regimes)
}

/// `points` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        end
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Log bounds of several fixed groups over a `t` grid, and where the best group changes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSweep {
    pub ts: Vec<f64>,
    /// `log_bounds[i][g]` is group `g` at `ts[i]`.
    pub log_bounds: Vec<Vec<f64>>,
    pub crossovers: Vec<GroupCrossover>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupCrossover {
    pub t: f64,
    pub from: usize,
    pub to: usize,
}

/// Evaluate each group's one-sided bound on `ts` and locate, by bisection,
/// every abscissa where the tightest group changes.
pub fn sweep_groups(groups: &[SumScenario], ts: &[f64]) -> Result<GroupSweep> {
    if groups.is_empty() {
        return Err(Error::domain("at least one group is required"));
    }
    for &t in ts {
        check_t(t)?;
    }
    let totals: Vec<(f64, f64)> = groups.iter().map(SumScenario::totals).collect();
    let eval = |g: usize, t: f64| chernoff_log_bound(totals[g].0, totals[g].1, t);
    let log_bounds: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| (0..groups.len()).map(|g| eval(g, t)).collect())
        .collect();
    let argmin = |row: &[f64]| {
        row.iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (g, &v)| if v < acc.1 { (g, v) } else { acc },
            )
            .0
    };

    let mut crossovers = Vec::new();
    for i in 1..ts.len() {
        let (from, to) = (argmin(&log_bounds[i - 1]), argmin(&log_bounds[i]));
        if from == to {
            continue;
        }
        let diff = |t: f64| eval(to, t) - eval(from, t);
        let (mut lo, mut hi) = (ts[i - 1], ts[i]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if diff(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossovers.push(GroupCrossover {
            t: 0.5 * (lo + hi),
            from,
            to,
        });
    }
    Ok(GroupSweep {
        ts: ts.to_vec(),
        log_bounds,
        crossovers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: f64, b: f64) -> BoundedSupport {
        BoundedSupport::new(a, b).unwrap()
    }

    fn example5() -> Vec<BoundedSupport> {
        vec![
            s(-1.0, 1.0),
            s(-5.0, 5.0).with_m2(5.0).unwrap(),
            s(-1.0, 5.0),
            s(-5.0, 1.0),
        ]
    }

    #[test]
    fn thresholds_single_symmetric() {
        assert!(
            (crossover_threshold(&s(-1.0, 1.0), 1).unwrap() - 1.1774100225154747).abs() < 1e-12
        );
        assert!(
            (crossover_threshold(&s(-1.0, 1.0), 2).unwrap() - 1.3537287260556712).abs() < 1e-12
        );
        let ex4 = s(-5.0, 5.0).with_m2(5.0).unwrap();
        assert!((crossover_threshold(&ex4, 2).unwrap() - 8.447237286948159).abs() < 1e-12);
        assert!(crossover_threshold(&ex4, 0).is_err());
    }

    #[test]
    fn threshold_consistency_error() {
        let sup = s(-1.0, 1.0)
            .with_m2(0.01)
            .unwrap()
            .with_m4(0.0001)
            .unwrap()
            .with_odd_moments_zero(true);
        assert!(matches!(
            crossover_threshold(&sup, 3),
            Err(Error::Consistency(_))
        ));
        assert!(crossover_table(&sup, 8).is_err());
        assert_eq!(crossover_table(&sup, 3).unwrap().thresholds.len(), 2);
    }

    #[test]
    fn best_single_examples() {
        assert_eq!(best_k_single(&s(-1.0, 1.0), 0.5, 8).unwrap(), 1);
        assert_eq!(
            best_k_single(&s(-5.0, 5.0).with_m2(5.0).unwrap(), 4.0, 8).unwrap(),
            2
        );
        // the formula threshold for [-5, 1] is 1.3503, so t = 0.8 stays at order 1
        assert_eq!(best_k_single(&s(-5.0, 1.0), 0.8, 8).unwrap(), 1);
        assert!(best_k_single(&s(-1.0, 1.0), 0.0, 8).is_err());
        assert!(best_k_single(&s(-1.0, 1.0), 1.0, 0).is_err());
    }

    #[test]
    fn exact_example5() {
        let sel = optimize_exact(&example5(), 4.0, 3).unwrap();
        assert_eq!(sel.ks, vec![1, 1, 1, 1]);
        let sel = optimize_exact(&example5(), 8.0, 3).unwrap();
        assert_eq!(sel.ks, vec![1, 2, 1, 1]);
        let check = objective(&example5(), &sel.ks, 8.0).unwrap();
        assert!((check - sel.log_bound).abs() < 1e-14);
    }

    #[test]
    fn exact_size_guard() {
        let vars = vec![s(-1.0, 1.0); 8];
        assert!(matches!(
            optimize_exact(&vars, 1.0, 8),
            Err(Error::SizeGuard { .. })
        ));
        assert!(optimize_exact(&vars, 1.0, 7).is_ok());
    }

    #[test]
    fn exact_tie_prefers_smaller() {
        // at the crossover both orders give the same bound up to rounding; below it order 1 wins
        let t = crossover_threshold(&s(-1.0, 1.0), 1).unwrap();
        assert_eq!(
            optimize_exact(&[s(-1.0, 1.0)], t - 1e-9, 2).unwrap().ks,
            vec![1]
        );
        assert_eq!(
            optimize_exact(&[s(-1.0, 1.0)], t + 1e-9, 2).unwrap().ks,
            vec![2]
        );
    }

    #[test]
    fn relaxed_single_matches_closed_form() {
        for &t in &[0.5, 1.0, 2.5, 4.0] {
            let r = optimize_relaxed(&[s(-1.0, 1.0)], t, 8).unwrap();
            let expect = t / (2.0 * 2f64.ln()).sqrt();
            assert!((r.fractional[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn relaxed_symmetric_proportional() {
        let vars = [s(-1.0, 1.0), s(-3.0, 3.0), s(-0.5, 0.5)];
        let r = optimize_relaxed(&vars, 5.0, 8).unwrap();
        let ratio = r.fractional[0] / 1.0;
        for (v, k) in vars.iter().zip(&r.fractional) {
            assert!((k / -v.a() - ratio).abs() < 1e-12 * ratio);
        }
        let same = optimize_relaxed(&[s(-2.0, 7.0); 3], 5.0, 8).unwrap();
        assert!(same.fractional.windows(2).all(|w| w[0] == w[1]));
        assert!(same.selection.ks.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn relaxed_clamps_to_range() {
        let r = optimize_relaxed(&[s(-1.0, 1.0)], 0.01, 4).unwrap();
        assert!(r.fractional[0] < 1.0);
        assert_eq!(r.selection.ks, vec![1]);
        let r = optimize_relaxed(&[s(-1.0, 1.0)], 100.0, 4).unwrap();
        assert_eq!(r.selection.ks, vec![4]);
    }

    #[test]
    fn partition_single_symmetric() {
        let regimes = best_region_partition(&[s(-1.0, 1.0)], 0.01, 3.0, 300, 3).unwrap();
        let ks: Vec<_> = regimes.iter().map(|r| r.ks[0]).collect();
        assert_eq!(ks, vec![1, 2, 3]);
        assert!((regimes[0].t_end - 1.1774100225154747).abs() < 1e-4);
        assert!((regimes[1].t_end - 1.3537287260556712).abs() < 1e-4);
        assert!(best_region_partition(&[s(-1.0, 1.0)], 1.0, 1.0, 10, 3).is_err());
        assert!(best_region_partition(&[s(-1.0, 1.0)], 1.0, 2.0, 1, 3).is_err());
    }

    #[test]
    fn sweep_single_group_has_no_crossovers() {
        let g = SumScenario::with_orders(example5(), &[1, 1, 1, 1]).unwrap();
        let sweep = sweep_groups(&[g], &linspace(0.1, 12.0, 50)).unwrap();
        assert!(sweep.crossovers.is_empty());
        assert_eq!(sweep.log_bounds.len(), 50);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.1, 12.0, 1000);
        assert_eq!(v.len(), 1000);
        assert_eq!((v[0], v[999]), (0.1, 12.0));
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }
}
