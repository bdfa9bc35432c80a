//! Single-variable MGF bounds of the form `E[e^{sX}] <= A * exp(rate * s^2)`.
//!
//! Every family is kept in log-space as `(log A, rate)`. The order-k family
//! trades a larger multiplier `A_k` for a rate divided by `k`; the moment
//! families refine the multiplier when `E[X^2]` (and `E[X^4]`) are known.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::support::{phi, BoundedSupport};

/// Which inequality a bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Hoeffding's lemma, rate `(b - a)^2 / 8`.
    Classic,
    /// Interval-scale refinement, rate `Phi^2 / 2`.
    Hertz,
    /// Order-k bound with multiplier `A_k` and rate `Phi^2 / (2k)`.
    OrderK(u32),
    /// Order 2 with known `E[X^2]`.
    Order2Moment,
    /// Order 4 with known `E[X^2]`, `E[X^4]` and vanishing third moment.
    Order4Moment,
    /// Order 4 on a symmetric interval with vanishing third moment, multiplier 8.
    SymmetricOrder4,
}

impl Family {
    /// The integer order this family divides the rate by.
    pub fn order(&self) -> u32 {
        match self {
            Family::Classic | Family::Hertz => 1,
            Family::OrderK(k) => *k,
            Family::Order2Moment => 2,
            Family::Order4Moment | Family::SymmetricOrder4 => 4,
        }
    }

    /// Check the family can be applied to `support`.
    pub fn check(&self, support: &BoundedSupport) -> Result<()> {
        match self {
            Family::Classic | Family::Hertz => Ok(()),
            Family::OrderK(0) => Err(Error::precondition("order k must be at least 1")),
            Family::OrderK(_) => Ok(()),
            Family::Order2Moment => {
                if support.m2().is_none() {
                    return Err(Error::precondition("order2-moment requires a known m2"));
                }
                Ok(())
            }
            Family::Order4Moment => {
                if support.m2().is_none() || support.m4().is_none() {
                    return Err(Error::precondition(
                        "order4-moment requires known m2 and m4",
                    ));
                }
                if !support.odd_moments_zero() {
                    return Err(Error::precondition(
                        "order4-moment requires odd_moments_zero (E[X^3] = 0)",
                    ));
                }
                Ok(())
            }
            Family::SymmetricOrder4 => {
                if !support.is_symmetric() {
                    return Err(Error::precondition(format!(
                        "symmetric-order4 requires |a| = b, got [{}, {}]",
                        support.a(),
                        support.b()
                    )));
                }
                if !support.odd_moments_zero() {
                    return Err(Error::precondition(
                        "symmetric-order4 requires odd_moments_zero (E[X^3] = 0)",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Every family whose preconditions `support` satisfies, with order-k up to `k_max`.
    pub fn applicable(support: &BoundedSupport, k_max: u32) -> Vec<Family> {
        let mut out = vec![Family::Classic, Family::Hertz];
        out.extend((1..=k_max).map(Family::OrderK));
        out.extend(
            [
                Family::Order2Moment,
                Family::Order4Moment,
                Family::SymmetricOrder4,
            ]
            .into_iter()
            .filter(|f| f.check(support).is_ok()),
        );
        out
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Classic => f.write_str("classic"),
            Family::Hertz => f.write_str("hertz"),
            Family::OrderK(k) => write!(f, "order-k{k}"),
            Family::Order2Moment => f.write_str("order2-moment"),
            Family::Order4Moment => f.write_str("order4-moment"),
            Family::SymmetricOrder4 => f.write_str("symmetric-order4"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts the `Display` names; `order-k<k>` (or `k<k>`) for the order-k family.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "classic" => return Ok(Family::Classic),
            "hertz" => return Ok(Family::Hertz),
            "order2-moment" => return Ok(Family::Order2Moment),
            "order4-moment" => return Ok(Family::Order4Moment),
            "symmetric-order4" => return Ok(Family::SymmetricOrder4),
            _ => {}
        }
        let digits = lower
            .strip_prefix("order-k")
            .or_else(|| lower.strip_prefix('k'));
        match digits.map(str::parse::<u32>) {
            Some(Ok(k)) if k >= 1 => Ok(Family::OrderK(k)),
            _ => Err(Error::Scenario(format!("unknown bound family '{s}'"))),
        }
    }
}

/// `log E[e^{sX}] <= log_multiplier + rate * s^2` for every `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfBound {
    pub log_multiplier: f64,
    pub rate: f64,
    pub family: Family,
}

impl MgfBound {
    /// The certified upper bound on `log E[e^{sX}]`.
    pub fn eval_log(&self, s: f64) -> Result<f64> {
        eval_log_mgf_bound(self, s)
    }
}

/// `log Upsilon_k = log((1 + r)^k - k r)` with `r = max{|a|, b} / |a|`.
///
/// `(1 + r)^k` is never formed; the subtraction happens as
/// `k log(1 + r) + log(1 - k r (1 + r)^{-k})`.
pub fn upsilon_k(support: &BoundedSupport, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("order k must be at least 1"));
    }
    Ok(log_upsilon(support.spread_ratio(), k))
}

pub(crate) fn log_upsilon(r: f64, k: u32) -> f64 {
    if k == 1 {
        return 0.0;
    }
    let kf = f64::from(k);
    let log_pow = kf * r.ln_1p();
    let log_sub = (kf * r).ln() - log_pow;
    log_pow + (-log_sub.exp_m1()).ln()
}

/// `log A_k`, the multiplier used for order `k` on this support.
///
/// * `k = 1`: 0.
/// * `k = 2`: `log(1 + m2/a^2)` if `m2` is known, else `log(1 + b/|a|)`.
/// * `k >= 3`: `log Upsilon_k`, except at `k = 4` where the moment multiplier
///   `1 + 6 m2/a^2 + m4/a^4` is used instead if smaller (requires `m2`, `m4` and
///   a vanishing third moment).
pub fn multiplier_log(support: &BoundedSupport, k: u32) -> Result<f64> {
    match k {
        0 => Err(Error::domain("order k must be at least 1")),
        1 => Ok(0.0),
        2 => Ok(match support.m2() {
            Some(m2) => (m2 / (support.a() * support.a())).ln_1p(),
            None => (support.b() / -support.a()).ln_1p(),
        }),
        4 => {
            let ups = log_upsilon(support.spread_ratio(), 4);
            Ok(match order4_moment_log(support) {
                Some(m) => m.min(ups),
                None => ups,
            })
        }
        _ => Ok(log_upsilon(support.spread_ratio(), k)),
    }
}

fn order4_moment_log(support: &BoundedSupport) -> Option<f64> {
    match (support.m2(), support.m4(), support.odd_moments_zero()) {
        (Some(m2), Some(m4), true) => {
            let a2 = support.a() * support.a();
            Some((6.0 * m2 / a2 + m4 / (a2 * a2)).ln_1p())
        }
        _ => None,
    }
}

/// Build the `(log A, rate)` pair for `family` on `support`.
pub fn mgf_bound(support: &BoundedSupport, family: Family) -> Result<MgfBound> {
    family.check(support)?;
    let phi2 = phi(support).powi(2);
    let (log_multiplier, rate) = match family {
        Family::Classic => (0.0, support.width().powi(2) / 8.0),
        Family::Hertz => (0.0, phi2 / 2.0),
        Family::OrderK(k) => (multiplier_log(support, k)?, phi2 / (2.0 * f64::from(k))),
        Family::Order2Moment => {
            let m2 = support.m2().expect("checked");
            ((m2 / (support.a() * support.a())).ln_1p(), phi2 / 4.0)
        }
        Family::Order4Moment => (order4_moment_log(support).expect("checked"), phi2 / 8.0),
        Family::SymmetricOrder4 => (8f64.ln(), support.a() * support.a() / 8.0),
    };
    Ok(MgfBound {
        log_multiplier,
        rate,
        family,
    })
}

/// `log_multiplier + rate * s^2`, defined for `s > 0`.
pub fn eval_log_mgf_bound(bound: &MgfBound, s: f64) -> Result<f64> {
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::domain(format!(
            "s must be a positive finite number, got {s}"
        )));
    }
    Ok(bound.log_multiplier + bound.rate * s * s)
}

/// `psi(u) = -lambda u + log(1 - lambda + lambda e^u)`, the normalised log-MGF
/// of the extremal two-point variable.
pub fn psi(lambda: f64, u: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    if u < 0.0 || !u.is_finite() {
        return Err(Error::domain(format!(
            "u must be a nonnegative finite number, got {u}"
        )));
    }
    if u > 30.0 {
        Ok((1.0 - lambda) * u + (lambda + (1.0 - lambda) * (-u).exp()).ln())
    } else {
        Ok(-lambda * u + (lambda * u.exp_m1()).ln_1p())
    }
}

/// Quadratic cap on `psi`: `u^2/8` for `lambda <= 1/2`, `lambda (1 - lambda) u^2 / 2` above.
pub fn psi_cap(lambda: f64, u: f64) -> f64 {
    if lambda <= 0.5 {
        u * u / 8.0
    } else {
        lambda * (1.0 - lambda) * u * u / 2.0
    }
}
