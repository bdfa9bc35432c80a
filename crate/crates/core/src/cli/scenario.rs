//! Scenario files: a TOML document describing the variables of a sum, the
//! bound chosen for each, and the default query parameters.
//!
//! ```toml
//! format_version = 1
//!
//! [[variables]]
//! a = -5.0
//! b = 5.0
//! m2 = 5.0
//! choice = "auto"          # or a family name: hertz, classic, k2, order2-moment, ...
//! lower_choice = "k1"      # optional, used for the negated sum
//!
//! [query]
//! t = [4.0, 8.0]
//! t_range = { start = 0.1, end = 12.0, points = 1000 }
//! side = "upper"           # upper | lower | two-sided
//!
//! [[groups]]
//! name = "group1"
//! k = [1, 1, 1, 1]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::bounds::Family;
use crate::error::{Error, Result};
use crate::support::BoundedSupport;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub query: QuerySpec,
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub a: f64,
    pub b: f64,
    pub m2: Option<f64>,
    pub m4: Option<f64>,
    #[serde(default)]
    pub odd_moments_zero: bool,
    #[serde(default = "auto")]
    pub choice: String,
    pub lower_choice: Option<String>,
}

fn auto() -> String {
    "auto".to_owned()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub t: Option<Vec<f64>>,
    pub t_range: Option<TRange>,
    pub side: Option<Side>,
    pub k_max: Option<u32>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TRange {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl std::str::FromStr for TRange {
    type Err = String;

    /// `START:END:POINTS`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, points] = parts[..] else {
            return Err(format!("expected START:END:POINTS, got '{s}'"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        Ok(TRange {
            start: num(start)?,
            end: num(end)?,
            points: points
                .trim()
                .parse()
                .map_err(|e| format!("'{points}': {e}"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
    TwoSided,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: Option<String>,
    pub k: Vec<u32>,
}

/// A per-variable bound choice after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Auto,
    Fixed(Family),
}

impl Choice {
    fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            Ok(Choice::Auto)
        } else {
            s.parse().map(Choice::Fixed)
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub variables: Vec<BoundedSupport>,
    pub choices: Vec<Choice>,
    pub lower_choices: Vec<Choice>,
    pub query: QuerySpec,
    pub groups: Vec<(String, Vec<u32>)>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.variables.is_empty() {
            return Err(Error::Scenario("at least one variable is required".into()));
        }
        let n = file.variables.len();
        let mut variables = Vec::with_capacity(n);
        let mut choices = Vec::with_capacity(n);
        let mut lower_choices = Vec::with_capacity(n);
        for (i, v) in file.variables.iter().enumerate() {
            let ctx = |e: Error| Error::Scenario(format!("variable {i}: {e}"));
            let mut sup = BoundedSupport::new(v.a, v.b).map_err(ctx)?;
            if let Some(m2) = v.m2 {
                sup = sup.with_m2(m2).map_err(ctx)?;
            }
            if let Some(m4) = v.m4 {
                sup = sup.with_m4(m4).map_err(ctx)?;
            }
            sup = sup.with_odd_moments_zero(v.odd_moments_zero);
            let choice = Choice::parse(&v.choice).map_err(ctx)?;
            let lower = match &v.lower_choice {
                Some(c) => Choice::parse(c).map_err(ctx)?,
                None => choice,
            };
            for (c, s) in [(choice, sup), (lower, sup.mirror())] {
                if let Choice::Fixed(f) = c {
                    f.check(&s).map_err(ctx)?;
                }
            }
            variables.push(sup);
            choices.push(choice);
            lower_choices.push(lower);
        }
        let groups = file
            .groups
            .into_iter()
            .enumerate()
            .map(|(g, spec)| {
                if spec.k.len() != n || spec.k.contains(&0) {
                    return Err(Error::Scenario(format!(
                        "group {g} must list one order >= 1 per variable ({n})"
                    )));
                }
                Ok((
                    spec.name.unwrap_or_else(|| format!("group{}", g + 1)),
                    spec.k,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            variables,
            choices,
            lower_choices,
            query: file.query,
            groups,
        })
    }

    pub fn max_sum(&self) -> f64 {
        self.variables.iter().map(BoundedSupport::b).sum()
    }
}
