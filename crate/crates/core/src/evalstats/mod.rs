//! Evaluation statistics.
//!
//! * [`partition`]: Move/Join distance (`mno`) and MoJoFM between partitions.
//! * [`hypothesis`]: Cohen's kappa, Mann-Whitney U, Cliff's delta,
//!   Benjamini-Hochberg adjustment.
//! * [`sampling`]: normal quantiles, margin of error, Likert standard
//!   deviation and power simulations, the atomicity scoring rule.

pub mod hypothesis;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod partition;
pub mod sampling;

pub use hypothesis::{
    benjamini_hochberg, cliffs_delta, cohens_kappa, compare_rating_groups, mann_whitney_u, CliffsDelta,
    EffectMagnitude, Kappa, MannWhitney, PValueMethod, RatingSample,
};
pub use partition::{max_mno, mno, mojo_fm, Partition};
pub use sampling::{
    atomicity_score, bimodal_std, margin_of_error, normal_cdf, normal_quantile, simulate_likert_std, simulate_power,
    LikertGenerator, PowerTest, StdSummary,
};

/// Whether the brute-force oracles are compiled in (`oracle` feature).
pub const ORACLES_AVAILABLE: bool = cfg!(feature = "oracle");

/// `mno` by exhaustive tag enumeration, when oracles are compiled in.
pub fn oracle_mno(a: &Partition, b: &Partition) -> Option<crate::Result<usize>> {
    #[cfg(feature = "oracle")]
    return Some(oracle::mno_by_tag_enumeration(a, b));
    #[cfg(not(feature = "oracle"))]
    {
        let _ = (a, b);
        None
    }
}

/// Exact Mann-Whitney p-value by listing labelings, when oracles are
/// compiled in and the pooled sample is small enough to list.
pub fn oracle_mann_whitney_p(x: &[f64], y: &[f64]) -> Option<f64> {
    #[cfg(feature = "oracle")]
    return (x.len() + y.len() <= hypothesis::EXACT_MANN_WHITNEY_LIMIT)
        .then(|| oracle::mann_whitney_p_by_enumeration(x, y));
    #[cfg(not(feature = "oracle"))]
    {
        let _ = (x, y);
        None
    }
}
