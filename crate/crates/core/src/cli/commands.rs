use std::fmt::Write;

use super::scenario::{Choice, Scenario, Side, TRange};
use super::{
    fmt_num, BoundArgs, Cli, CliError, Command, GlobalOpts, SelectArgs, SweepArgs, TailArgs,
    VerifyArgs,
};
use crate::bounds::{mgf_bound, Family};
use crate::error::Error;
use crate::oracle::{
    derive_seed, mc_sum_tails, random_pmf_matching, soundness_sweep, SoundnessReport,
};
use crate::select::{
    crossover_threshold, linspace, optimize_exact, optimize_exact_with_offset, optimize_relaxed,
    sweep_groups, DEFAULT_K_MAX,
};
use crate::support::BoundedSupport;
use crate::tail::{log_add_exp, one_sided_tail, SumScenario, TailCertificate};

type CmdResult = Result<(), CliError>;

const MC_SIGMAS: f64 = 3.0;

pub(super) fn run(cli: &Cli, out: &mut String) -> CmdResult {
    match &cli.command {
        Command::Bound(args) => cmd_bound(&cli.global, args, out),
        Command::Tail(args) => cmd_tail(&cli.global, args, out),
        Command::Select(args) => cmd_select(&cli.global, args, out),
        Command::Verify(args) => cmd_verify(&cli.global, args, out),
        Command::Sweep(args) => cmd_sweep(&cli.global, args, out),
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn k_max(global: &GlobalOpts, scenario: Option<&Scenario>) -> u32 {
    global
        .k_max
        .or_else(|| scenario.and_then(|s| s.query.k_max))
        .unwrap_or(DEFAULT_K_MAX)
}

fn seed(global: &GlobalOpts, scenario: Option<&Scenario>) -> u64 {
    global
        .seed
        .or_else(|| scenario.and_then(|s| s.query.seed))
        .unwrap_or(0)
}

fn samples(global: &GlobalOpts, scenario: Option<&Scenario>) -> usize {
    global
        .samples
        .or_else(|| scenario.and_then(|s| s.query.samples))
        .unwrap_or(1_000_000)
}

fn range_points(r: &TRange) -> Result<Vec<f64>, CliError> {
    if !(r.start > 0.0 && r.start < r.end) || !r.end.is_finite() || r.points < 2 {
        return Err(input(format!(
            "t range needs 0 < start < end and at least 2 points, got {}:{}:{}",
            r.start, r.end, r.points
        )));
    }
    Ok(linspace(r.start, r.end, r.points))
}

/// Thresholds from the command line, falling back to the scenario's query.
fn thresholds(
    flag_t: &[f64],
    flag_range: Option<&TRange>,
    sc: &Scenario,
) -> Result<Vec<f64>, CliError> {
    if !flag_t.is_empty() {
        return Ok(flag_t.to_vec());
    }
    if let Some(r) = flag_range {
        return range_points(r);
    }
    if let Some(ts) = &sc.query.t {
        return Ok(ts.clone());
    }
    if let Some(r) = &sc.query.t_range {
        return range_points(r);
    }
    Err(input(
        "no thresholds given: pass --t or --t-range, or set query.t / query.t_range",
    ))
}

fn family_label(f: &Family) -> String {
    match f {
        Family::OrderK(k) => k.to_string(),
        other => other.to_string(),
    }
}

fn k_vector(families: &[Family]) -> String {
    families
        .iter()
        .map(family_label)
        .collect::<Vec<_>>()
        .join(";")
}

fn cmd_bound(global: &GlobalOpts, args: &BoundArgs, out: &mut String) -> CmdResult {
    let mut sup = BoundedSupport::new(args.a, args.b)?;
    if let Some(m2) = args.m2 {
        sup = sup.with_m2(m2)?;
    }
    if let Some(m4) = args.m4 {
        sup = sup.with_m4(m4)?;
    }
    sup = sup.with_odd_moments_zero(args.odd_zero);
    if args.s <= 0.0 || !args.s.is_finite() {
        return Err(input(format!("s must be positive, got {}", args.s)));
    }

    let families = if args.compare {
        Family::applicable(&sup, k_max(global, None))
            .into_iter()
            .filter(|f| *f != Family::OrderK(1))
            .collect()
    } else {
        let family = if args.family.eq_ignore_ascii_case("order-k") {
            Family::OrderK(args.k.unwrap_or(1))
        } else {
            if args.k.is_some() {
                return Err(input("--k only applies to --family order-k"));
            }
            args.family.parse::<Family>()?
        };
        vec![family]
    };
    let mut rows = families
        .into_iter()
        .map(|f| {
            let bound = mgf_bound(&sup, f)?;
            let value = bound.eval_log(args.s)?;
            Ok((bound, value))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    rows.sort_by(|x, y| x.1.total_cmp(&y.1));

    writeln!(out, "family,log_multiplier,rate,log_mgf_bound").unwrap();
    for (bound, value) in rows {
        writeln!(
            out,
            "{},{},{},{}",
            bound.family,
            fmt_num(bound.log_multiplier),
            fmt_num(bound.rate),
            fmt_num(value)
        )
        .unwrap();
    }
    Ok(())
}

/// Resolve `auto` choices for one side and return the resulting certificate.
fn certify_side(
    variables: &[BoundedSupport],
    choices: &[Choice],
    t: f64,
    k_max: u32,
    relaxed: bool,
) -> Result<(TailCertificate, Vec<Family>), CliError> {
    let auto: Vec<usize> = (0..choices.len())
        .filter(|&i| choices[i] == Choice::Auto)
        .collect();
    let mut families: Vec<Family> = choices
        .iter()
        .map(|c| match c {
            Choice::Fixed(f) => *f,
            Choice::Auto => Family::OrderK(1),
        })
        .collect();
    if !auto.is_empty() {
        let ks = if relaxed {
            if auto.len() != choices.len() {
                return Err(input("--relaxed requires every choice to be auto"));
            }
            optimize_relaxed(variables, t, k_max)?.selection.ks
        } else {
            let mut offset = (0.0, 0.0);
            for (i, c) in choices.iter().enumerate() {
                if let Choice::Fixed(f) = c {
                    let b = mgf_bound(&variables[i], *f)?;
                    offset.0 += b.log_multiplier;
                    offset.1 += b.rate;
                }
            }
            let auto_vars: Vec<BoundedSupport> = auto.iter().map(|&i| variables[i]).collect();
            optimize_exact_with_offset(&auto_vars, offset, t, k_max)?.ks
        };
        for (&i, k) in auto.iter().zip(ks) {
            families[i] = Family::OrderK(k);
        }
    }
    let scenario = SumScenario::new(variables.to_vec(), families.clone())?;
    Ok((one_sided_tail(&scenario, t)?, families))
}

fn cmd_tail(global: &GlobalOpts, args: &TailArgs, out: &mut String) -> CmdResult {
    let sc = Scenario::load(&args.scenario)?;
    let ts = thresholds(&args.t, args.t_range.as_ref(), &sc)?;
    let side = args.side.or(sc.query.side).unwrap_or(Side::Upper);
    let k_max = k_max(global, Some(&sc));
    let mirrored: Vec<BoundedSupport> = sc.variables.iter().map(BoundedSupport::mirror).collect();

    writeln!(out, "t,log_bound,s_star,k").unwrap();
    for t in ts {
        if t <= 0.0 || !t.is_finite() {
            return Err(input(format!("t must be positive, got {t}")));
        }
        let upper = || certify_side(&sc.variables, &sc.choices, t, k_max, args.relaxed);
        let lower = || certify_side(&mirrored, &sc.lower_choices, t, k_max, args.relaxed);
        let (log_bound, s_star, ks) = match side {
            Side::Upper => {
                let (c, f) = upper()?;
                (c.log_bound, c.s_star, k_vector(&f))
            }
            Side::Lower => {
                let (c, f) = lower()?;
                (c.log_bound, c.s_star, k_vector(&f))
            }
            Side::TwoSided => {
                let (cu, fu) = upper()?;
                let (cl, fl) = lower()?;
                (
                    log_add_exp(cu.log_bound, cl.log_bound),
                    cu.s_star,
                    format!("{}/{}", k_vector(&fu), k_vector(&fl)),
                )
            }
        };
        writeln!(
            out,
            "{},{},{},{}",
            fmt_num(t),
            fmt_num(log_bound),
            fmt_num(s_star),
            ks
        )
        .unwrap();
    }
    Ok(())
}

fn cmd_select(global: &GlobalOpts, args: &SelectArgs, out: &mut String) -> CmdResult {
    let sc = Scenario::load(&args.scenario)?;
    let t = match args
        .t
        .or_else(|| sc.query.t.as_ref().and_then(|ts| ts.first().copied()))
    {
        Some(t) => t,
        None => return Err(input("no threshold given: pass --t or set query.t")),
    };
    let k_max = k_max(global, Some(&sc));

    writeln!(out, "t,k,log_bound,method").unwrap();
    if args.relaxed {
        let r = optimize_relaxed(&sc.variables, t, k_max)?;
        writeln!(
            out,
            "{},{},{},relaxed",
            fmt_num(t),
            r.selection
                .ks
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(";"),
            fmt_num(r.selection.log_bound)
        )
        .unwrap();
        let frac: Vec<String> = r.fractional.iter().map(|&k| fmt_num(k)).collect();
        writeln!(out, "# fractional,{}", frac.join(";")).unwrap();
    } else {
        let sel = optimize_exact(&sc.variables, t, k_max)?;
        writeln!(
            out,
            "{},{},{},exact",
            fmt_num(t),
            sel.ks
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(";"),
            fmt_num(sel.log_bound)
        )
        .unwrap();
    }

    writeln!(out).unwrap();
    writeln!(out, "variable,k,k_next,threshold").unwrap();
    for (i, v) in sc.variables.iter().enumerate() {
        for k in 1..k_max {
            let cell = match crossover_threshold(v, k) {
                Ok(t_star) => fmt_num(t_star),
                Err(Error::Consistency(_)) => "dominates".to_owned(),
                Err(e) => return Err(e.into()),
            };
            writeln!(out, "{i},{k},{},{cell}", k + 1).unwrap();
        }
    }
    Ok(())
}

fn write_soundness(out: &mut String, report: &SoundnessReport) {
    let sup = &report.support;
    for f in &report.families {
        writeln!(
            out,
            "{}:{},{},{},{},{}",
            sup.a(),
            sup.b(),
            f.family,
            f.checks,
            fmt_num(f.max_gap),
            f.violations
        )
        .unwrap();
    }
}

fn cmd_verify(global: &GlobalOpts, args: &VerifyArgs, out: &mut String) -> CmdResult {
    if args.poison_rate <= 0.0 || args.poison_rate.is_nan() {
        return Err(input("--poison-rate must be positive"));
    }
    let sc = match &args.scenario {
        Some(path) => Some(Scenario::load(path)?),
        None => None,
    };
    if sc.is_none() && args.random.is_none() {
        return Err(input("verify needs a scenario file or --random N"));
    }
    let k_max = k_max(global, sc.as_ref());
    let seed = seed(global, sc.as_ref());

    let mut reports = Vec::new();
    if let Some(count) = args.random {
        let sup = BoundedSupport::new(args.a, args.b)?;
        reports.push(soundness_sweep(sup, count, seed, k_max, args.poison_rate)?);
    }
    if let Some(sc) = &sc {
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for (i, v) in sc.variables.iter().enumerate() {
            if seen.contains(&(v.a(), v.b())) {
                continue;
            }
            seen.push((v.a(), v.b()));
            let bare = BoundedSupport::new(v.a(), v.b())?;
            reports.push(soundness_sweep(
                bare,
                args.pmfs,
                derive_seed(seed, i as u64),
                k_max,
                args.poison_rate,
            )?);
        }
    }

    writeln!(out, "support,family,checks,max_gap,violations").unwrap();
    let mut violations = 0;
    for report in &reports {
        write_soundness(out, report);
        violations += report.violations();
    }

    let mut mc_failures = 0;
    if let Some(sc) = &sc {
        mc_failures = verify_monte_carlo(global, args, sc, k_max, seed, out)?;
    }

    if violations > 0 || mc_failures > 0 {
        return Err(CliError::Verification(format!(
            "{violations} MGF bound violations, {mc_failures} Monte Carlo violations"
        )));
    }
    Ok(())
}

/// Instantiate every variable with a random pmf honouring its declared moments
/// and compare Monte Carlo tails with each certificate. Returns the failure count.
fn verify_monte_carlo(
    global: &GlobalOpts,
    args: &VerifyArgs,
    sc: &Scenario,
    k_max: u32,
    seed: u64,
    out: &mut String,
) -> Result<usize, CliError> {
    let pmfs = sc
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| random_pmf_matching(*v, 4, derive_seed(seed, 10_000 + i as u64)))
        .collect::<Result<Vec<_>, Error>>()?;
    let ts = if !args.t.is_empty() {
        args.t.clone()
    } else if let Some(ts) = &sc.query.t {
        ts.clone()
    } else {
        linspace(0.1 * sc.max_sum(), 0.9 * sc.max_sum(), 5)
    };

    let mut certificates: Vec<(String, Vec<f64>)> = Vec::new();
    let hertz = SumScenario::uniform(sc.variables.clone(), Family::Hertz)?;
    let classic = SumScenario::uniform(sc.variables.clone(), Family::Classic)?;
    for (name, scenario) in [("hertz", &hertz), ("classic", &classic)] {
        let lbs = ts
            .iter()
            .map(|&t| one_sided_tail(scenario, t).map(|c| c.log_bound))
            .collect::<Result<_, Error>>()?;
        certificates.push((name.to_owned(), lbs));
    }
    for (name, ks) in &sc.groups {
        let g = SumScenario::with_orders(sc.variables.clone(), ks)?;
        let lbs = ts
            .iter()
            .map(|&t| one_sided_tail(&g, t).map(|c| c.log_bound))
            .collect::<Result<_, Error>>()?;
        certificates.push((name.clone(), lbs));
    }
    let mut chosen = Vec::new();
    for &t in &ts {
        chosen.push(
            certify_side(&sc.variables, &sc.choices, t, k_max, false)?
                .0
                .log_bound,
        );
    }
    certificates.push(("scenario".to_owned(), chosen));

    let mc = mc_sum_tails(&pmfs, &ts, samples(global, Some(sc)), seed)?;
    let mut failures = 0;
    writeln!(out).unwrap();
    writeln!(out, "t,certificate,log_bound,mc_estimate,std_error,status").unwrap();
    for (j, &t) in ts.iter().enumerate() {
        let (p, se) = mc[j];
        for (name, lbs) in &certificates {
            let ok = p <= lbs[j].exp() + MC_SIGMAS * se;
            if !ok {
                failures += 1;
            }
            writeln!(
                out,
                "{},{name},{},{},{},{}",
                fmt_num(t),
                fmt_num(lbs[j]),
                fmt_num(p),
                fmt_num(se),
                if ok { "ok" } else { "VIOLATION" }
            )
            .unwrap();
        }
    }
    Ok(failures)
}

fn cmd_sweep(_global: &GlobalOpts, args: &SweepArgs, out: &mut String) -> CmdResult {
    let sc = Scenario::load(&args.scenario)?;
    let groups: Vec<(String, Vec<u32>)> = if args.groups.is_empty() {
        sc.groups.clone()
    } else {
        args.groups
            .iter()
            .enumerate()
            .map(|(g, spec)| {
                let ks = spec
                    .split(',')
                    .map(|k| k.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| input(format!("--group '{spec}': {e}")))?;
                Ok((format!("group{}", g + 1), ks))
            })
            .collect::<Result<_, CliError>>()?
    };
    if groups.is_empty() {
        return Err(input(
            "no groups: pass --group or list [[groups]] in the scenario",
        ));
    }
    let scenarios = groups
        .iter()
        .map(|(name, ks)| {
            if ks.len() != sc.variables.len() {
                return Err(input(format!(
                    "{name} lists {} orders for {} variables",
                    ks.len(),
                    sc.variables.len()
                )));
            }
            Ok(SumScenario::with_orders(sc.variables.clone(), ks)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let range = args.t_range.or(sc.query.t_range).unwrap_or(TRange {
        start: 0.1,
        end: sc.max_sum(),
        points: 1000,
    });
    let ts = range_points(&range)?;
    let sweep = sweep_groups(&scenarios, &ts)?;

    let names: Vec<&str> = groups.iter().map(|g| g.0.as_str()).collect();
    writeln!(out, "t,{}", names.join(",")).unwrap();
    for (t, row) in sweep.ts.iter().zip(&sweep.log_bounds) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        writeln!(out, "{},{}", fmt_num(*t), cells.join(",")).unwrap();
    }
    for c in &sweep.crossovers {
        writeln!(
            out,
            "# crossover,{},{},{}",
            fmt_num(c.t),
            names[c.from],
            names[c.to]
        )
        .unwrap();
    }
    Ok(())
}
