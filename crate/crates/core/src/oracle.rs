//! Ground truth for checking bounds: finite-support zero-mean distributions,
//! their exact MGFs and moments, seeded random generation, and Monte Carlo
//! estimates of tail probabilities for sums.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{mgf_bound, Family};
use crate::error::{Error, Result};
use crate::support::BoundedSupport;

/// Tolerance on total mass and on the mean of a [`FinitePmf`].
pub const PMF_TOL: f64 = 1e-12;

/// A violation of `exact log-MGF <= bound` larger than this is a failure.
pub const SOUNDNESS_TOL: f64 = 1e-9;

/// Monte Carlo samples are drawn in blocks of this size; block `i` uses
/// ChaCha8 stream `i` of the master seed, so results do not depend on the
/// number of worker threads.
pub const MC_BLOCK: usize = 1 << 16;

/// Derive an independent seed for sub-task `stream` of a run seeded with `master`
/// (one SplitMix64 step over `master + stream * golden_gamma`).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A zero-mean distribution with finitely many atoms inside a support.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    atoms: Vec<(f64, f64)>,
    support: BoundedSupport,
}

impl FinitePmf {
    /// Validate `(x, p)` atoms: probabilities nonnegative and summing to 1,
    /// atoms inside `[a, b]`, mean zero, all within [`PMF_TOL`].
    pub fn new(atoms: Vec<(f64, f64)>, support: BoundedSupport) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("a pmf needs at least one atom"));
        }
        let mut mass = 0.0;
        let mut mean = 0.0;
        for &(x, p) in &atoms {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::domain(format!("invalid probability {p}")));
            }
            if !(x >= support.a() && x <= support.b()) {
                return Err(Error::domain(format!(
                    "atom {x} outside [{}, {}]",
                    support.a(),
                    support.b()
                )));
            }
            mass += p;
            mean += p * x;
        }
        if (mass - 1.0).abs() > PMF_TOL {
            return Err(Error::domain(format!("probabilities sum to {mass}, not 1")));
        }
        if mean.abs() > PMF_TOL {
            return Err(Error::domain(format!("mean is {mean}, not 0")));
        }
        Ok(Self { atoms, support })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn support(&self) -> &BoundedSupport {
        &self.support
    }

    /// All mass at 0.
    pub fn point_mass_zero(support: BoundedSupport) -> Self {
        Self {
            atoms: vec![(0.0, 1.0)],
            support,
        }
    }

    /// The unique zero-mean distribution on `{neg, pos}` with `neg < 0 < pos`.
    pub fn two_point(support: BoundedSupport, neg: f64, pos: f64) -> Result<Self> {
        if !(neg < 0.0 && pos > 0.0) {
            return Err(Error::domain(format!(
                "need neg < 0 < pos, got {neg}, {pos}"
            )));
        }
        let p_neg = pos / (pos - neg);
        Self::new(vec![(neg, p_neg), (pos, -neg / (pos - neg))], support)
    }

    /// Mass `b/(b-a)` at `a` and `-a/(b-a)` at `b`; attains both moment caps.
    pub fn extremal(support: BoundedSupport) -> Self {
        Self::two_point(support, support.a(), support.b()).expect("a < 0 < b")
    }

    /// Convex combination of distributions on the same support.
    pub fn mixture(parts: &[(f64, &FinitePmf)]) -> Result<Self> {
        let support = parts
            .first()
            .ok_or_else(|| Error::domain("empty mixture"))?
            .1
            .support;
        let atoms = parts
            .iter()
            .flat_map(|&(w, pmf)| pmf.atoms.iter().map(move |&(x, p)| (x, w * p)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        Self::new(atoms, support)
    }

    pub fn moment(&self, order: u32) -> f64 {
        moments(self, order)
    }
}

/// `log E[e^{sX}]` via log-sum-exp.
pub fn exact_log_mgf(pmf: &FinitePmf, s: f64) -> f64 {
    let terms = pmf
        .atoms
        .iter()
        .filter(|&&(_, p)| p > 0.0)
        .map(|&(x, p)| p.ln() + s * x);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    max + terms.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `E[X^order]`.
pub fn moments(pmf: &FinitePmf, order: u32) -> f64 {
    pmf.atoms
        .iter()
        .map(|&(x, p)| p * x.powi(order as i32))
        .sum()
}

/// Random zero-mean pmf with `atom_count` atoms, deterministic in `seed`.
///
/// Half of the draws place atoms on both endpoints. Positive weights are
/// drawn, then the mass on positive and negative atoms is rescaled so the
/// mean vanishes.
pub fn random_mean_zero_pmf(
    support: BoundedSupport,
    atom_count: usize,
    seed: u64,
) -> Result<FinitePmf> {
    if atom_count < 2 {
        return Err(Error::domain("atom_count must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_pmf(support, atom_count, &mut rng))
}

fn draw_pmf(support: BoundedSupport, atom_count: usize, rng: &mut ChaCha8Rng) -> FinitePmf {
    let (a, b) = (support.a(), support.b());
    loop {
        let with_endpoints = rng.random_bool(0.5);
        let xs: Vec<f64> = (0..atom_count)
            .map(|i| match (with_endpoints, i) {
                (true, 0) => a,
                (true, 1) => b,
                _ => rng.random_range(a..=b),
            })
            .collect();
        let ws: Vec<f64> = (0..atom_count).map(|_| 1.0 - rng.random::<f64>()).collect();

        let pos: f64 = xs
            .iter()
            .zip(&ws)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, w)| x * w)
            .sum();
        let neg: f64 = xs
            .iter()
            .zip(&ws)
            .filter(|(x, _)| **x < 0.0)
            .map(|(x, w)| -x * w)
            .sum();
        if pos == 0.0 || neg == 0.0 {
            continue;
        }
        let mut ps: Vec<f64> = xs
            .iter()
            .zip(&ws)
            .map(|(&x, &w)| match x.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => w * neg,
                Some(std::cmp::Ordering::Less) => w * pos,
                _ => w * 0.5 * (pos + neg),
            })
            .collect();
        let total: f64 = ps.iter().sum();
        ps.iter_mut().for_each(|p| *p /= total);

        // absorb the rounding residual of the mean on the atom farthest from 0
        let mean: f64 = xs.iter().zip(&ps).map(|(x, p)| x * p).sum();
        let j = (0..atom_count)
            .max_by(|&i, &k| xs[i].abs().total_cmp(&xs[k].abs()))
            .expect("nonempty");
        if ps[j] - mean / xs[j] >= 0.0 {
            ps[j] -= mean / xs[j];
        }
        let atoms = xs.into_iter().zip(ps).collect();
        if let Ok(pmf) = FinitePmf::new(atoms, support) {
            return pmf;
        }
    }
}

/// Random pmf honouring whatever `support` declares: its `m2`, its `m4`, and
/// `E[X^3] = 0` when `odd_moments_zero` is set.
///
/// Built as a mixture of random zero-mean pmfs, the point mass at 0 and the
/// extremal two-point pmf; the mixture weights solve the moment equations and
/// draws with a negative weight are rejected.
pub fn random_pmf_matching(
    support: BoundedSupport,
    atom_count: usize,
    seed: u64,
) -> Result<FinitePmf> {
    if atom_count < 2 {
        return Err(Error::domain("atom_count must be at least 2"));
    }
    let mut targets: Vec<(u32, f64)> = Vec::new();
    if let Some(m2) = support.m2() {
        targets.push((2, m2));
    }
    if support.odd_moments_zero() {
        targets.push((3, 0.0));
    }
    if let Some(m4) = support.m4() {
        targets.push((4, m4));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if targets.is_empty() {
        return Ok(draw_pmf(support, atom_count, &mut rng));
    }
    let c = targets.len() + 1;
    for _ in 0..20_000 {
        let comps: Vec<FinitePmf> = (0..c)
            .map(|_| match rng.random_range(0..4u8) {
                0 => FinitePmf::point_mass_zero(support),
                1 => FinitePmf::extremal(support),
                _ => draw_pmf(support, atom_count, &mut rng),
            })
            .collect();
        let mut m = DMatrix::<f64>::zeros(c, c);
        let mut rhs = DVector::<f64>::zeros(c);
        for (j, comp) in comps.iter().enumerate() {
            m[(0, j)] = 1.0;
            for (r, &(order, _)) in targets.iter().enumerate() {
                m[(r + 1, j)] = moments(comp, order);
            }
        }
        rhs[0] = 1.0;
        for (r, &(_, value)) in targets.iter().enumerate() {
            rhs[r + 1] = value;
        }
        let Some(w) = m.lu().solve(&rhs) else {
            continue;
        };
        if w.iter().any(|&x| !x.is_finite() || x < -1e-13) {
            continue;
        }
        let w: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
        let parts: Vec<(f64, &FinitePmf)> = w.iter().copied().zip(comps.iter()).collect();
        let Ok(pmf) = FinitePmf::mixture(&parts) else {
            continue;
        };
        let matches = targets.iter().all(|&(order, value)| {
            let scale = support.a().abs().max(support.b()).powi(order as i32);
            (moments(&pmf, order) - value).abs() <= 1e-9 * scale
        });
        if matches {
            return Ok(pmf);
        }
    }
    Err(Error::domain(
        "could not construct a distribution with the declared moments",
    ))
}

/// `support` with the exact second and fourth moments of `pmf` declared.
pub fn declare_moments(support: BoundedSupport, pmf: &FinitePmf) -> Result<BoundedSupport> {
    support.with_m2(moments(pmf, 2))?.with_m4(moments(pmf, 4))
}

/// Monte Carlo estimate of `P(S_n >= t)` and its binomial standard error.
pub fn mc_sum_tail(pmfs: &[FinitePmf], t: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    Ok(mc_sum_tails(pmfs, &[t], samples, seed)?[0])
}

/// [`mc_sum_tail`] for several thresholds from one set of draws.
pub fn mc_sum_tails(
    pmfs: &[FinitePmf],
    ts: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if samples < 1000 {
        return Err(Error::domain(
            "at least 1000 Monte Carlo samples are required",
        ));
    }
    if pmfs.is_empty() {
        return Err(Error::domain("no variables to sample"));
    }
    let samplers = pmfs
        .iter()
        .map(|pmf| {
            let xs: Vec<f64> = pmf.atoms.iter().map(|a| a.0).collect();
            let idx = WeightedIndex::new(pmf.atoms.iter().map(|a| a.1))
                .map_err(|e| Error::domain(format!("cannot sample pmf: {e}")))?;
            Ok((xs, idx))
        })
        .collect::<Result<Vec<_>>>()?;

    let blocks = samples.div_ceil(MC_BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let len = MC_BLOCK.min(samples - block * MC_BLOCK);
            let mut hits = vec![0u64; ts.len()];
            for _ in 0..len {
                let sum: f64 = samplers
                    .iter()
                    .map(|(xs, idx)| xs[idx.sample(&mut rng)])
                    .sum();
                for (h, &t) in hits.iter_mut().zip(ts) {
                    if sum >= t {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .reduce(
            || vec![0u64; ts.len()],
            |mut acc, h| {
                acc.iter_mut().zip(h).for_each(|(a, b)| *a += b);
                acc
            },
        );
    let n = samples as f64;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            (p, (p * (1.0 - p) / n).sqrt())
        })
        .collect())
}

/// 40 log-spaced values of `s` in `[1e-3, 50]`.
pub fn verification_s_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 50f64.ln());
    (0..40)
        .map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp())
        .collect()
}

/// Largest observed `exact - bound` per family over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyGap {
    pub family: Family,
    pub checks: u64,
    pub max_gap: f64,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessReport {
    pub support: BoundedSupport,
    pub pmfs: usize,
    pub families: Vec<FamilyGap>,
}

impl SoundnessReport {
    pub fn violations(&self) -> u64 {
        self.families.iter().map(|f| f.violations).sum()
    }

    pub fn checks(&self) -> u64 {
        self.families.iter().map(|f| f.checks).sum()
    }
}

/// Compare exact log-MGFs of random pmfs against every applicable bound.
///
/// Each of the `count` pmfs is checked twice: against bounds built from the
/// bare support and against bounds built with its exact `m2`, `m4` declared.
/// Pmfs with odd index also have a vanishing third moment, which unlocks the
/// order-4 moment families. The extremal two-point pmf is always included.
/// `poison_rate` multiplies every rate (1.0 for a faithful check).
pub fn soundness_sweep(
    support: BoundedSupport,
    count: usize,
    seed: u64,
    k_max: u32,
    poison_rate: f64,
) -> Result<SoundnessReport> {
    let grid = verification_s_grid();
    let per_pmf = (0..=count)
        .into_par_iter()
        .map(|i| -> Result<Vec<(Family, f64)>> {
            let sub_seed = derive_seed(seed, i as u64);
            let odd = i % 2 == 1;
            let atom_count = 2 + (sub_seed % 7) as usize;
            let pmf = if i == count {
                FinitePmf::extremal(support)
            } else if odd {
                random_pmf_matching(support.with_odd_moments_zero(true), atom_count, sub_seed)?
            } else {
                random_mean_zero_pmf(support, atom_count, sub_seed)?
            };
            let symmetric_pmf = i == count && support.is_symmetric();
            let declared =
                declare_moments(support, &pmf)?.with_odd_moments_zero(odd || symmetric_pmf);
            let mut gaps = Vec::new();
            for sup in [support, declared] {
                for family in Family::applicable(&sup, k_max) {
                    let bound = mgf_bound(&sup, family)?;
                    let worst = grid
                        .iter()
                        .map(|&s| {
                            exact_log_mgf(&pmf, s)
                                - (bound.log_multiplier + poison_rate * bound.rate * s * s)
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                    gaps.push((family, worst));
                }
            }
            Ok(gaps)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut families: Vec<FamilyGap> = Vec::new();
    for (family, gap) in per_pmf.into_iter().flatten() {
        let entry = match families.iter_mut().position(|f| f.family == family) {
            Some(i) => &mut families[i],
            None => {
                families.push(FamilyGap {
                    family,
                    checks: 0,
                    max_gap: f64::NEG_INFINITY,
                    violations: 0,
                });
                families.last_mut().expect("just pushed")
            }
        };
        entry.checks += grid.len() as u64;
        entry.max_gap = entry.max_gap.max(gap);
        if gap > SOUNDNESS_TOL {
            entry.violations += 1;
        }
    }
    Ok(SoundnessReport {
        support,
        pmfs: count + 1,
        families,
    })
}
