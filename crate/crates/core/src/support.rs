//! Bounded supports of zero-mean random variables and their interval geometry.

use crate::error::{Error, Result};

/// Relative slack granted to user-supplied moments above their hard caps.
pub const MOMENT_SLACK: f64 = 1e-12;

/// The interval `[a, b]` (with `a < 0 < b`) a zero-mean variable lives on,
/// together with whatever even moments are known about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedSupport {
    a: f64,
    b: f64,
    m2: Option<f64>,
    m4: Option<f64>,
    odd_moments_zero: bool,
}

impl BoundedSupport {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!(
                "support endpoints must be finite, got [{a}, {b}]"
            )));
        }
        if a >= 0.0 || b <= 0.0 {
            return Err(Error::domain(format!(
                "support must satisfy a < 0 < b, got [{a}, {b}]"
            )));
        }
        Ok(Self {
            a,
            b,
            m2: None,
            m4: None,
            odd_moments_zero: false,
        })
    }

    /// Symmetric support `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    /// Attach a known second moment `E[X^2]`.
    pub fn with_m2(mut self, m2: f64) -> Result<Self> {
        let (cap2, _) = moment_caps(&self);
        self.m2 = Some(check_moment("m2", m2, cap2)?);
        self.check_jensen()?;
        Ok(self)
    }

    /// Attach a known fourth moment `E[X^4]`.
    pub fn with_m4(mut self, m4: f64) -> Result<Self> {
        let (_, cap4) = moment_caps(&self);
        self.m4 = Some(check_moment("m4", m4, cap4)?);
        self.check_jensen()?;
        Ok(self)
    }

    /// Declare that the third moment vanishes (the mean always does).
    pub fn with_odd_moments_zero(mut self, flag: bool) -> Self {
        self.odd_moments_zero = flag;
        self
    }

    fn check_jensen(&self) -> Result<()> {
        if let (Some(m2), Some(m4)) = (self.m2, self.m4) {
            if m4 < m2 * m2 * (1.0 - MOMENT_SLACK) {
                return Err(Error::domain(format!(
                    "m4 = {m4} is below m2^2 = {}, impossible for any distribution",
                    m2 * m2
                )));
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m2(&self) -> Option<f64> {
        self.m2
    }

    pub fn m4(&self) -> Option<f64> {
        self.m4
    }

    pub fn odd_moments_zero(&self) -> bool {
        self.odd_moments_zero
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn is_symmetric(&self) -> bool {
        -self.a == self.b
    }

    /// `max{|a|, b} / |a|`, the ratio driving the order-k multipliers.
    pub fn spread_ratio(&self) -> f64 {
        (-self.a).max(self.b) / -self.a
    }

    /// Support of `-X`: the interval `[-b, -a]` with the same moment knowledge.
    pub fn mirror(&self) -> Self {
        Self {
            a: -self.b,
            b: -self.a,
            ..*self
        }
    }

    /// Scale the interval by `c > 0`; known moments scale accordingly.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::domain(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        Ok(Self {
            a: self.a * c,
            b: self.b * c,
            m2: self.m2.map(|m| m * c * c),
            m4: self.m4.map(|m| m * c * c * c * c),
            odd_moments_zero: self.odd_moments_zero,
        })
    }
}

fn check_moment(name: &str, value: f64, cap: f64) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::domain(format!(
            "{name} must be a nonnegative finite number, got {value}"
        )));
    }
    if value > cap * (1.0 + MOMENT_SLACK) {
        return Err(Error::domain(format!(
            "{name} = {value} exceeds its cap {cap} for a zero-mean variable on this support"
        )));
    }
    Ok(value.min(cap))
}

/// Interval scale: `(|a| + b) / 2` when `b > |a|`, otherwise `sqrt(|a| b)`.
pub fn phi(support: &BoundedSupport) -> f64 {
    let (neg, pos) = (-support.a, support.b);
    if pos > neg {
        (neg + pos) / 2.0
    } else {
        (neg * pos).sqrt()
    }
}

/// Largest possible `E[X^2]` and `E[X^4]` for a zero-mean variable on the support:
/// `(|a| b, |a| b (a^2 + a b + b^2))`.
pub fn moment_caps(support: &BoundedSupport) -> (f64, f64) {
    let (a, b) = (support.a, support.b);
    let ab = -a * b;
    (ab, ab * (a * a + a * b + b * b))
}

/// Support of `-X`.
pub fn mirror(support: &BoundedSupport) -> BoundedSupport {
    support.mirror()
}
