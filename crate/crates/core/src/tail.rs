//! Chernoff tail certificates for sums of independent bounded variables.
//!
//! Each variable contributes `(log A_i, rate_i)`; with `L = sum log A_i` and
//! `R = sum rate_i` the optimised Chernoff bound is
//! `log P(S_n >= t) <= L - t^2 / (4R)`, attained at `s* = t / (2R)`.

use crate::bounds::{mgf_bound, Family, MgfBound};
use crate::error::{Error, Result};
use crate::support::BoundedSupport;

/// Independent variables and the bound family chosen for each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SumScenario {
    variables: Vec<BoundedSupport>,
    choices: Vec<Family>,
    bounds: Vec<MgfBound>,
}

impl SumScenario {
    pub fn new(variables: Vec<BoundedSupport>, choices: Vec<Family>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::domain("a scenario needs at least one variable"));
        }
        if variables.len() != choices.len() {
            return Err(Error::domain(format!(
                "{} variables but {} bound choices",
                variables.len(),
                choices.len()
            )));
        }
        let bounds = variables
            .iter()
            .zip(&choices)
            .enumerate()
            .map(|(i, (v, &f))| {
                mgf_bound(v, f).map_err(|e| match e {
                    Error::Precondition(msg) => Error::Precondition(format!("variable {i}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variables,
            choices,
            bounds,
        })
    }

    /// Every variable bounded by the order-k family with its own `k`.
    pub fn with_orders(variables: Vec<BoundedSupport>, ks: &[u32]) -> Result<Self> {
        Self::new(variables, ks.iter().map(|&k| Family::OrderK(k)).collect())
    }

    /// Every variable bounded by the same family.
    pub fn uniform(variables: Vec<BoundedSupport>, family: Family) -> Result<Self> {
        let n = variables.len();
        Self::new(variables, vec![family; n])
    }

    pub fn variables(&self) -> &[BoundedSupport] {
        &self.variables
    }

    pub fn choices(&self) -> &[Family] {
        &self.choices
    }

    pub fn bounds(&self) -> &[MgfBound] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    /// `(sum log A_i, sum rate_i)`.
    pub fn totals(&self) -> (f64, f64) {
        self.bounds
            .iter()
            .fold((0.0, 0.0), |(l, r), b| (l + b.log_multiplier, r + b.rate))
    }

    /// Largest value `S_n` can take.
    pub fn max_sum(&self) -> f64 {
        self.variables.iter().map(BoundedSupport::b).sum()
    }

    /// The scenario for `-S_n`. Without explicit choices each variable keeps its family.
    pub fn mirrored(&self, choices: Option<&[Family]>) -> Result<Self> {
        let vars = self.variables.iter().map(BoundedSupport::mirror).collect();
        let choices = choices.map_or_else(|| self.choices.clone(), <[Family]>::to_vec);
        Self::new(vars, choices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    UpperOneSided,
    LowerOneSided,
    TwoSided,
}

/// A certified upper bound on a tail probability, kept as a natural log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCertificate {
    pub t: f64,
    pub log_bound: f64,
    /// Optimal Chernoff parameter; for two-sided certificates, that of the upper side.
    pub s_star: f64,
    /// Optimal Chernoff parameter of the lower side of a two-sided certificate.
    pub mirrored_s_star: Option<f64>,
    pub side: TailSide,
    /// `log_bound > 0`: valid but uninformative.
    pub vacuous: bool,
    /// The threshold exceeds every value the sum can reach, so the true probability is 0.
    pub beyond_support: bool,
}

impl TailCertificate {
    pub fn bound(&self) -> f64 {
        self.log_bound.exp()
    }
}

fn check_t(t: f64, name: &str) -> Result<()> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::domain(format!(
            "{name} must be a positive finite number, got {t}"
        )));
    }
    Ok(())
}

/// `L - t^2 / (4R)`, the Chernoff bound optimised over `s`.
pub fn chernoff_log_bound(log_multiplier: f64, rate: f64, t: f64) -> f64 {
    log_multiplier - t * t / (4.0 * rate)
}

fn one_sided(scenario: &SumScenario, t: f64, side: TailSide) -> TailCertificate {
    let (l, r) = scenario.totals();
    let log_bound = chernoff_log_bound(l, r, t);
    TailCertificate {
        t,
        log_bound,
        s_star: t / (2.0 * r),
        mirrored_s_star: None,
        side,
        vacuous: log_bound > 0.0,
        beyond_support: t > scenario.max_sum(),
    }
}

/// Bound on `P(S_n >= t)`.
pub fn one_sided_tail(scenario: &SumScenario, t: f64) -> Result<TailCertificate> {
    check_t(t, "t")?;
    Ok(one_sided(scenario, t, TailSide::UpperOneSided))
}

/// Bound on `P(S_n / n >= l)`, i.e. the upper tail at `t = n l`.
pub fn mean_tail(scenario: &SumScenario, l: f64) -> Result<TailCertificate> {
    check_t(l, "l")?;
    one_sided_tail(scenario, scenario.len() as f64 * l)
}

/// Bound on `P(S_n <= -t)`, using `mirrored_choices` on the negated supports.
pub fn lower_tail(
    scenario: &SumScenario,
    mirrored_choices: Option<&[Family]>,
    t: f64,
) -> Result<TailCertificate> {
    check_t(t, "t")?;
    let mirrored = scenario.mirrored(mirrored_choices)?;
    Ok(one_sided(&mirrored, t, TailSide::LowerOneSided))
}

/// Support of `-X`.
pub fn mirror(support: &BoundedSupport) -> BoundedSupport {
    support.mirror()
}

/// Bound on `P(|S_n| >= t)` as the sum of the upper and lower one-sided bounds.
pub fn two_sided_tail(
    scenario: &SumScenario,
    mirrored_choices: Option<&[Family]>,
    t: f64,
) -> Result<TailCertificate> {
    check_t(t, "t")?;
    let upper = one_sided(scenario, t, TailSide::UpperOneSided);
    let mirrored = scenario.mirrored(mirrored_choices)?;
    let lower = one_sided(&mirrored, t, TailSide::LowerOneSided);
    let log_bound = log_add_exp(upper.log_bound, lower.log_bound);
    Ok(TailCertificate {
        t,
        log_bound,
        s_star: upper.s_star,
        mirrored_s_star: Some(lower.s_star),
        side: TailSide::TwoSided,
        vacuous: log_bound > 0.0,
        beyond_support: upper.beyond_support && lower.beyond_support,
    })
}

/// `log(e^x + e^y)`.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
