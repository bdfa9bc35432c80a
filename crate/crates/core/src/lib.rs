//! Order-k Hoeffding-type bounds on the moment generating function of a
//! bounded zero-mean variable, the Chernoff tail certificates they give for
//! sums of independent variables, and selection of the order per variable.
//!
//! * [`support`]: intervals `[a, b]`, the interval scale `Phi` and moment caps.
//! * [`bounds`]: the single-variable MGF bound families.
//! * [`tail`]: one-sided, mean and two-sided tail certificates for sums.
//! * [`select`]: crossover thresholds and exact/relaxed order selection.
//! * [`oracle`]: finite-support distributions and Monte Carlo used to check all of the above.
//! * [`cli`]: the `khoeffding` command-line front end.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod select;
pub mod support;
pub mod tail;

pub use bounds::{
    eval_log_mgf_bound, mgf_bound, multiplier_log, psi, psi_cap, upsilon_k, Family, MgfBound,
};
pub use error::{Error, Result};
pub use oracle::{exact_log_mgf, mc_sum_tail, moments, random_mean_zero_pmf, FinitePmf};
pub use select::{
    best_k_single, best_region_partition, crossover_threshold, optimize_exact, optimize_relaxed,
    KSelection,
};
pub use support::{moment_caps, phi, BoundedSupport};
pub use tail::{mean_tail, one_sided_tail, two_sided_tail, SumScenario, TailCertificate, TailSide};
