//! Agreement, rank tests, effect sizes and multiple-comparison correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Largest pooled sample size for which the exact Mann-Whitney p-value is used.
pub const EXACT_MANN_WHITNEY_LIMIT: usize = 20;

/// Cohen's kappa and whether chance agreement was 1 (kappa then set by convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub degenerate: bool,
}

pub fn cohens_kappa<T: Ord>(ratings1: &[T], ratings2: &[T]) -> Result<Kappa> {
    if ratings1.len() != ratings2.len() {
        return Err(Error::InvalidInput(format!(
            "rating sequences differ in length ({} vs {})",
            ratings1.len(),
            ratings2.len()
        )));
    }
    if ratings1.is_empty() {
        return Err(Error::InvalidInput("kappa needs at least one rating pair".into()));
    }
    let n = ratings1.len() as u64;
    let mut marginals: BTreeMap<&T, (u64, u64)> = BTreeMap::new();
    let mut agree = 0u64;
    for (a, b) in ratings1.iter().zip(ratings2) {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        agree += u64::from(a == b);
    }
    let chance: u64 = marginals.values().map(|(x, y)| x * y).sum();
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / (n * n) as f64;
    if chance == n * n {
        return Ok(Kappa {
            kappa: if agree == n { 1.0 } else { 0.0 },
            observed_agreement: p_o,
            expected_agreement: p_e,
            degenerate: true,
        });
    }
    Ok(Kappa { kappa: (p_o - p_e) / (1.0 - p_e), observed_agreement: p_o, expected_agreement: p_e, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs with `x > y`, ties counted as one half.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: PValueMethod,
}

/// Midranks (1-based) of `values`; returns the ranks and tie-group sizes.
fn midranks_with_ties(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        order[i..=j].iter().for_each(|&k| ranks[k] = rank);
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("both samples must be non-empty".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    Ok(())
}

/// `U = Σ [x > y] + ½ [x = y]` over all pairs.
pub fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut twice = 0u64;
    for a in x {
        for b in y {
            twice += match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    twice as f64 / 2.0
}

/// U via the rank sum of `x`: `R₁ - n₁(n₁+1)/2`. Midranks are multiples
/// of one half, so this equals [`u_statistic`] exactly.
pub fn u_from_ranks(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, _) = midranks_with_ties(&pooled);
    let n1 = x.len() as f64;
    ranks[..x.len()].iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0
}

/// Exact two-sided p-value: the share of all `C(n₁+n₂, n₁)` labelings of the
/// pooled midranks whose U is at least as far from `n₁n₂/2` as observed.
/// Counts labelings per (size, doubled rank sum) instead of listing them.
pub fn mann_whitney_exact_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, _) = midranks_with_ties(&pooled);
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let (n1, n2) = (x.len(), y.len());
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[k - 1][s - r];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    // 2U = 2R - n1(n1+1); compare |2U - n1 n2| on integers
    let offset = (n1 * (n1 + 1)) as i64;
    let centre = (n1 * n2) as i64;
    let observed: i64 = doubled[..n1].iter().sum::<usize>() as i64 - offset;
    let observed_dev = (observed - centre).abs();
    let (mut extreme, mut total) = (0.0, 0.0);
    for (s, &w) in ways[n1].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        total += w;
        if (s as i64 - offset - centre).abs() >= observed_dev {
            extreme += w;
        }
    }
    (extreme / total).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
pub fn mann_whitney_normal_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (_, ties) = midranks_with_ties(&pooled);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let n = n1 + n2;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let correction = if n > 1.0 { tie_term / (n * (n - 1.0)) } else { 0.0 };
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - correction);
    if variance <= 0.0 {
        return 1.0;
    }
    let deviation = (u_from_ranks(x, y) - n1 * n2 / 2.0).abs() - 0.5;
    if deviation <= 0.0 {
        return 1.0;
    }
    let z = deviation / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Mann-Whitney U test: exact p for pooled size up to
/// [`EXACT_MANN_WHITNEY_LIMIT`], normal approximation beyond.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    check_samples(x, y)?;
    let method = if x.len() + y.len() <= EXACT_MANN_WHITNEY_LIMIT {
        PValueMethod::Exact
    } else {
        PValueMethod::NormalApproximation
    };
    mann_whitney_u_with(x, y, method)
}

/// Mann-Whitney U test with an explicit p-value method.
pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<MannWhitney> {
    check_samples(x, y)?;
    let p_two_sided = match method {
        PValueMethod::Exact => mann_whitney_exact_p(x, y),
        PValueMethod::NormalApproximation => mann_whitney_normal_p(x, y),
    };
    Ok(MannWhitney { u: u_from_ranks(x, y), p_two_sided, method })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMagnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectMagnitude {
    pub fn of(delta: f64) -> Self {
        match delta.abs() {
            d if d < 0.147 => EffectMagnitude::Negligible,
            d if d < 0.33 => EffectMagnitude::Small,
            d if d < 0.474 => EffectMagnitude::Medium,
            _ => EffectMagnitude::Large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffsDelta {
    pub delta: f64,
    pub magnitude: EffectMagnitude,
}

pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<CliffsDelta> {
    check_samples(x, y)?;
    let mut balance = 0i64;
    for a in x {
        for b in y {
            balance += match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let delta = balance as f64 / (x.len() * y.len()) as f64;
    Ok(CliffsDelta { delta, magnitude: EffectMagnitude::of(delta) })
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        // m / rank >= 1, so only rounding could push this below the raw p
        adjusted[i] = running.max(p[i]);
    }
    Ok(adjusted)
}

/// Likert ratings, each in `1..=5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct RatingSample(Vec<u8>);

impl RatingSample {
    pub fn new(scores: Vec<u8>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !(1..=5).contains(*s)) {
            return Err(Error::InvalidInput(format!("rating {bad} outside 1..=5")));
        }
        Ok(RatingSample(scores))
    }

    pub fn scores(&self) -> &[u8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }
}

impl TryFrom<Vec<u8>> for RatingSample {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        RatingSample::new(v)
    }
}

impl From<RatingSample> for Vec<u8> {
    fn from(r: RatingSample) -> Self {
        r.0
    }
}

/// One pairwise comparison between rating groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub first: String,
    pub second: String,
    pub mann_whitney: MannWhitney,
    pub p_adjusted: f64,
    pub cliffs_delta: CliffsDelta,
}

/// Compares every pair of named rating groups (in the given order) with a
/// Mann-Whitney test, Benjamini-Hochberg adjusted across pairs, and Cliff's delta.
pub fn compare_rating_groups(groups: &[(String, RatingSample)]) -> Result<Vec<GroupComparison>> {
    let mut out = Vec::new();
    for (i, (a, ra)) in groups.iter().enumerate() {
        for (b, rb) in &groups[i + 1..] {
            let (x, y) = (ra.as_f64(), rb.as_f64());
            out.push(GroupComparison {
                first: a.clone(),
                second: b.clone(),
                mann_whitney: mann_whitney_u(&x, &y)?,
                p_adjusted: f64::NAN,
                cliffs_delta: cliffs_delta(&x, &y)?,
            });
        }
    }
    let raw: Vec<f64> = out.iter().map(|c| c.mann_whitney.p_two_sided).collect();
    for (c, p) in out.iter_mut().zip(benjamini_hochberg(&raw)?) {
        c.p_adjusted = p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_cases() {
        assert_eq!(cohens_kappa(&[1, 2, 1, 2], &[1, 2, 1, 2]).unwrap().kappa, 1.0);
        assert_eq!(cohens_kappa(&[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap().kappa, -1.0);
        let k = cohens_kappa(&[0, 1, 0, 1], &[0, 0, 0, 0]).unwrap();
        assert_eq!(k.kappa, 0.0);
        assert!(!k.degenerate);
        let d = cohens_kappa(&[3, 3], &[3, 3]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.kappa, 1.0);
        assert!(cohens_kappa(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn mann_whitney_cases() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_two_sided - 1.0 / 3.0).abs() < 1e-15);
        let same = mann_whitney_u(&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(same.u, 4.5);
        assert_eq!(same.p_two_sided, 1.0);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn exact_and_normal_agree_on_moderate_samples() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() + 0.3).collect();
            let exact = mann_whitney_u_with(&x, &y, PValueMethod::Exact).unwrap().p_two_sided;
            let approx = mann_whitney_u_with(&x, &y, PValueMethod::NormalApproximation).unwrap().p_two_sided;
            assert!((exact - approx).abs() < 0.02, "{exact} vs {approx}");
        }
    }

    #[test]
    fn rank_u_matches_pairwise() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..rng.gen_range(1..15)).map(|_| rng.gen_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..rng.gen_range(1..15)).map(|_| rng.gen_range(0..6) as f64).collect();
            assert_eq!(u_from_ranks(&x, &y), u_statistic(&x, &y));
        }
    }

    #[test]
    fn cliffs_cases() {
        let d = cliffs_delta(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((d.delta + 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(d.magnitude, EffectMagnitude::Large);
        assert_eq!(cliffs_delta(&[1.0], &[2.0]).unwrap().delta, -1.0);
        assert_eq!(cliffs_delta(&[2.0, 2.0], &[2.0]).unwrap().delta, 0.0);
        assert_eq!(EffectMagnitude::of(0.2), EffectMagnitude::Small);
        assert_eq!(EffectMagnitude::of(-0.4), EffectMagnitude::Medium);
        assert_eq!(EffectMagnitude::of(0.1), EffectMagnitude::Negligible);
    }

    #[test]
    fn bh_cases() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04]).unwrap(), vec![0.04; 4]);
        assert_eq!(benjamini_hochberg(&[0.3]).unwrap(), vec![0.3]);
        assert!(benjamini_hochberg(&[1.5]).is_err());
        let adj = benjamini_hochberg(&[0.04, 0.001, 0.9, 0.02]).unwrap();
        assert!(adj.iter().zip([0.04, 0.001, 0.9, 0.02]).all(|(a, p)| *a >= p && *a <= 1.0));
    }

    #[test]
    fn rating_bounds() {
        assert!(RatingSample::new(vec![1, 5]).is_ok());
        assert!(RatingSample::new(vec![0]).is_err());
        assert!(serde_json::from_str::<RatingSample>("[6]").is_err());
    }

    #[test]
    fn group_comparison_pairs() {
        let g = vec![
            ("a".to_string(), RatingSample::new(vec![1, 2, 2, 3]).unwrap()),
            ("b".to_string(), RatingSample::new(vec![4, 5, 4, 5]).unwrap()),
            ("c".to_string(), RatingSample::new(vec![3, 3, 4, 2]).unwrap()),
        ];
        let out = compare_rating_groups(&g).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].cliffs_delta.delta, -1.0);
        assert!(out.iter().all(|c| c.p_adjusted >= c.mann_whitney.p_two_sided));
    }
}
