//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use khoeffding::oracle::{declare_moments, mc_sum_tails, soundness_sweep};
use khoeffding::select::objective;
use khoeffding::{
    best_k_single, crossover_threshold, one_sided_tail, optimize_exact, optimize_relaxed, psi,
    psi_cap, random_mean_zero_pmf, BoundedSupport, Family, FinitePmf, SumScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn sup(a: f64, b: f64) -> BoundedSupport {
    BoundedSupport::new(a, b).unwrap()
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{name} = {got}, expected {want} +/- {tol}"))
    }
}

fn random_support(rng: &mut ChaCha8Rng) -> BoundedSupport {
    let a = -rng.random_range(0.1..10.0);
    let b = rng.random_range(0.1..10.0);
    sup(a, b)
}

fn c1_example1() -> Outcome {
    let s = sup(-1.0, 1.0);
    let (t1, t2) = (
        crossover_threshold(&s, 1).unwrap(),
        crossover_threshold(&s, 2).unwrap(),
    );
    close("t*(1->2)", t1, 1.1774, 1e-3)?;
    close("t*(2->3)", t2, 1.3537, 1e-3)?;
    Ok(format!("{t1:.6}, {t2:.6}"))
}

fn c2_example4() -> Outcome {
    let s = sup(-5.0, 5.0).with_m2(5.0).unwrap();
    let (t1, t2) = (
        crossover_threshold(&s, 1).unwrap(),
        crossover_threshold(&s, 2).unwrap(),
    );
    close("t*(1->2)", t1, 3.019, 1e-3)?;
    close("t*(2->3)", t2, 8.447, 1e-3)?;
    Ok(format!("{t1:.6}, {t2:.6}"))
}

fn c3_example2() -> Outcome {
    let s = sup(-1.0, 5.0);
    let t1 = crossover_threshold(&s, 1).unwrap();
    close("t*(1->2)", t1, 5.679, 1e-3)?;
    let t2 = crossover_threshold(&s, 2).unwrap();
    // A_3 = 6^3 - 15 = 201; a multiplier of 191 would give 7.892
    close(
        "t*(2->3)",
        t2,
        3.0 * (2.0 * (201.0f64 / 6.0).ln()).sqrt(),
        1e-12,
    )?;
    let printed_191 = 3.0 * (2.0 * (191.0f64 / 6.0).ln()).sqrt();
    Ok(format!(
        "{t1:.6}; second crossover {t2:.6} (a 191 multiplier would give {printed_191:.6}, not asserted)"
    ))
}

fn c4_example3() -> Outcome {
    let s = sup(-5.0, 1.0);
    let t1 = crossover_threshold(&s, 1).unwrap();
    let t2 = crossover_threshold(&s, 2).unwrap();
    close("t*(2->3)", t2, 3.778, 1e-3)?;
    close("t*(1->2)", t1, 1.350, 1e-3)?;
    Ok(format!(
        "{t1:.6}, {t2:.6} (half of the first, {:.6}, is not asserted)",
        t1 / 2.0
    ))
}

fn c5_group_sweep() -> Outcome {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example5.toml");
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_khoeffding"))
        .args(["sweep", fixture, "--t-range", "0.1:12:1000"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("sweep exited with {}", out.status));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let crossings: Vec<f64> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# crossover,"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    if crossings.len() != 2 {
        return Err(format!("expected 2 crossovers, found {crossings:?}"));
    }
    let ln12 = 1.2f64.ln();
    let closed = [
        (ln12 / (1.0 / 55.0 - 1.0 / 80.0)).sqrt(),
        (ln12 / (1.0 / 50.0 - 1.0 / 55.0)).sqrt(),
    ];
    for (i, (&got, want)) in crossings.iter().zip([5.6647, 10.0138]).enumerate() {
        close("crossover vs printed", got, want, 1e-3)?;
        close("crossover vs closed form", got, closed[i], 1e-9)?;
    }
    if elapsed > Duration::from_secs(1) {
        return Err(format!("sweep took {elapsed:?}"));
    }
    Ok(format!(
        "{:.6}, {:.6} in {elapsed:?}",
        crossings[0], crossings[1]
    ))
}

fn c6_soundness() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    for (i, (a, b)) in [(-1.0, 1.0), (-1.0, 5.0), (-5.0, 1.0), (-2.0, 3.0)]
        .into_iter()
        .enumerate()
    {
        let report = soundness_sweep(sup(a, b), 1000, 600 + i as u64, 8, 1.0).unwrap();
        if report.violations() > 0 {
            let worst = report
                .families
                .iter()
                .filter(|f| f.violations > 0)
                .map(|f| format!("{} gap {:e}", f.family, f.max_gap))
                .collect::<Vec<_>>();
            return Err(format!("[{a}, {b}]: {worst:?}"));
        }
        checks += report.checks();
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{checks} (pmf, family, s) checks, 0 violations in {elapsed:?}"
    ))
}

fn c7_extremal_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_support(&mut rng);
        let (a, b) = (s.a(), s.b());
        let pmf = FinitePmf::extremal(s);
        let cap2 = -a * b;
        let cap4 = -a * b * (a * a + a * b + b * b);
        let e2 = (pmf.moment(2) - cap2).abs() / cap2.max(1.0);
        let e4 = (pmf.moment(4) - cap4).abs() / cap4.max(1.0);
        worst = worst.max(e2).max(e4);
    }
    if worst > 1e-12 {
        return Err(format!("largest relative error {worst:e}"));
    }
    Ok(format!("100 supports, largest relative error {worst:e}"))
}

fn c8_psi_cap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let lambda = rng.random_range(1e-9..1.0);
        let u = 30.0 * (1.0 - rng.random::<f64>());
        let gap = psi(lambda, u).unwrap() - psi_cap(lambda, u);
        worst = worst.max(gap);
    }
    if worst > 1e-12 {
        return Err(format!("psi exceeds its cap by {worst:e}"));
    }
    Ok(format!("1000 pairs, max(psi - cap) = {worst:e}"))
}

fn c9_classic_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let vars: Vec<_> = (0..n).map(|_| random_support(&mut rng)).collect();
        let width2: f64 = vars.iter().map(|v| v.width().powi(2)).sum();
        let t = rng.random_range(0.01..1.0) * vars.iter().map(|v| v.b()).sum::<f64>();
        let sc = SumScenario::uniform(vars, Family::Classic).unwrap();
        let got = one_sided_tail(&sc, t).unwrap().bound();
        let want = (-2.0 * t * t / width2).exp();
        worst = worst.max((got - want).abs() / want);
    }
    if worst > 1e-12 {
        return Err(format!("largest relative error {worst:e}"));
    }
    Ok(format!("100 scenarios, largest relative error {worst:e}"))
}

fn c10_monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut rows = 0;
    let mut min_slack = f64::INFINITY;
    for case in 0..20u64 {
        let n = rng.random_range(1..=4);
        let vars: Vec<_> = (0..n).map(|_| random_support(&mut rng)).collect();
        let pmfs: Vec<_> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| random_mean_zero_pmf(*v, 2 + i % 4, 1000 * case + i as u64).unwrap())
            .collect();
        let declared: Vec<_> = vars
            .iter()
            .zip(&pmfs)
            .map(|(v, p)| declare_moments(*v, p).unwrap())
            .collect();
        let sd = declared.iter().map(|v| v.m2().unwrap()).sum::<f64>().sqrt();
        let ts: Vec<f64> = [0.5, 1.0, 2.0, 3.0].iter().map(|c| c * sd).collect();
        let mc = mc_sum_tails(&pmfs, &ts, 1_000_000, case).unwrap();

        let mut certificates = vec![
            SumScenario::uniform(vars.clone(), Family::Classic).unwrap(),
            SumScenario::uniform(vars.clone(), Family::Hertz).unwrap(),
            SumScenario::uniform(declared.clone(), Family::Order2Moment).unwrap(),
            SumScenario::uniform(vars.clone(), Family::OrderK(3)).unwrap(),
        ];
        for (j, &t) in ts.iter().enumerate() {
            for vs in [&vars, &declared] {
                let ks = optimize_exact(vs, t, 4).unwrap().ks;
                certificates.push(SumScenario::with_orders(vs.clone(), &ks).unwrap());
            }
            let (p, se) = mc[j];
            for sc in &certificates {
                let bound = one_sided_tail(sc, t).unwrap().bound();
                let slack = bound + 3.0 * se - p;
                if slack < 0.0 {
                    return Err(format!(
                        "case {case}, t = {t}: estimate {p} > bound {bound} + 3 * {se} ({:?})",
                        sc.choices()
                    ));
                }
                min_slack = min_slack.min(slack);
                rows += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{rows} comparisons, smallest slack {min_slack:.3e}, {elapsed:?}"
    ))
}

fn c11_optimizer() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n = rng.random_range(1..=4);
        let k_max = rng.random_range(1..=4);
        let vars: Vec<_> = (0..n)
            .map(|_| {
                let s = random_support(&mut rng);
                if rng.random_bool(0.3) {
                    s.with_m2(rng.random_range(0.05..1.0) * -s.a() * s.b())
                        .unwrap()
                } else {
                    s
                }
            })
            .collect();
        let t = rng.random_range(0.05..1.5) * vars.iter().map(|v| v.b()).sum::<f64>();
        let exact = optimize_exact(&vars, t, k_max).unwrap();
        let singles: Vec<u32> = vars
            .iter()
            .map(|v| best_k_single(v, t, k_max).unwrap())
            .collect();
        let single_obj = objective(&vars, &singles, t).unwrap();
        let relaxed = optimize_relaxed(&vars, t, k_max)
            .unwrap()
            .selection
            .log_bound;
        let tol = 1e-12 * exact.log_bound.abs().max(1.0);
        if exact.log_bound > single_obj + tol || exact.log_bound > relaxed + tol {
            return Err(format!(
                "case {case}: exact {} vs per-variable {single_obj} vs relaxed {relaxed}",
                exact.log_bound
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("200 instances in {elapsed:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 crossovers on [-1, 1]", c1_example1),
        ("2 crossovers on [-5, 5] with m2 = 5", c2_example4),
        ("3 crossovers on [-1, 5]", c3_example2),
        ("4 crossovers on [-5, 1]", c4_example3),
        ("5 group sweep crossovers", c5_group_sweep),
        ("6 MGF soundness sweep", c6_soundness),
        ("7 extremal two-point moments", c7_extremal_moments),
        ("8 psi quadratic cap", c8_psi_cap),
        ("9 classic Chernoff identity", c9_classic_identity),
        ("10 Monte Carlo soundness", c10_monte_carlo),
        ("11 optimizer coherence", c11_optimizer),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
