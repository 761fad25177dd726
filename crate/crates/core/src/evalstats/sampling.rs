//! Sampling precision, Likert simulations, power simulations and the
//! annotation scoring rule.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use super::hypothesis::{mann_whitney_normal_p, mann_whitney_u};
use crate::rng::substream;
use crate::{Error, Result};

/// Simulations per deterministic work chunk.
const CHUNK: usize = 250;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF by the Abramowitz-Stegun 26.2.23 rational
/// approximation (absolute error below 4.5e-4).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("quantile probability {p} outside (0, 1)")));
    }
    let upper = |q: f64| {
        let t = (-2.0 * q.ln()).sqrt();
        t - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t)
    };
    Ok(if p < 0.5 { -upper(p) } else { upper(1.0 - p) })
}

/// Half-width of a two-sided proportion interval at the worst case p = 0.5,
/// assuming an infinite population: `z · sqrt(0.25 / n)`.
pub fn margin_of_error(n: u64, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidInput(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = normal_quantile(1.0 - (1.0 - confidence) / 2.0)?;
    Ok(z * (0.25 / n as f64).sqrt())
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// How simulated Likert scores are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertGenerator {
    /// Independent uniform integers in `1..=5`.
    Uniform,
    /// Every score equal to the given value.
    Constant(u8),
    /// Half the group scores 1, the rest 5.
    Bimodal,
}

impl LikertGenerator {
    fn draw(self, group_size: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            LikertGenerator::Uniform => (0..group_size).map(|_| f64::from(rng.gen_range(1u8..=5))).collect(),
            LikertGenerator::Constant(v) => vec![f64::from(v); group_size],
            LikertGenerator::Bimodal => (0..group_size).map(|i| if i < group_size / 2 { 1.0 } else { 5.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub n_sims: usize,
}

/// Sample standard deviations of `n_sims` simulated groups of Likert scores.
pub fn simulate_likert_std(
    n_sims: usize,
    group_size: usize,
    generator: LikertGenerator,
    seed: u64,
) -> Result<StdSummary> {
    if n_sims == 0 || group_size < 2 {
        return Err(Error::InvalidInput("need n_sims >= 1 and group_size >= 2".into()));
    }
    if let LikertGenerator::Constant(v) = generator {
        if !(1..=5).contains(&v) {
            return Err(Error::InvalidInput(format!("constant score {v} outside 1..=5")));
        }
    }
    let chunks: Vec<(f64, f64, f64)> = (0..n_sims.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let count = CHUNK.min(n_sims - c * CHUNK);
            let stds: Vec<f64> = (0..count).map(|_| sample_std(&generator.draw(group_size, &mut rng))).collect();
            let min = stds.iter().copied().fold(f64::INFINITY, f64::min);
            let max = stds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (min, max, stds.iter().sum::<f64>())
        })
        .collect();
    Ok(StdSummary {
        min: chunks.iter().map(|c| c.0).fold(f64::INFINITY, f64::min),
        max: chunks.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max),
        mean: chunks.iter().map(|c| c.2).sum::<f64>() / n_sims as f64,
        n_sims,
    })
}

/// Sample standard deviation of the worst-case bimodal group.
pub fn bimodal_std(group_size: usize) -> f64 {
    sample_std(&LikertGenerator::Bimodal.draw(group_size, &mut crate::rng::seeded(0)))
}

/// Two-sample test used inside the power simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerTest {
    /// Pooled-variance Student t-test.
    TTest,
    MannWhitney,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub rejections: usize,
    pub n_sims: usize,
    pub test: PowerTest,
}

fn pooled_t_p(x: &[f64], y: &[f64]) -> f64 {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(x), mean(y));
    let ss = x.iter().map(|v| (v - m1).powi(2)).sum::<f64>() + y.iter().map(|v| (v - m2).powi(2)).sum::<f64>();
    let df = n1 + n2 - 2.0;
    let se = (ss / df * (1.0 / n1 + 1.0 / n2)).sqrt();
    if se == 0.0 {
        return if m1 == m2 { 1.0 } else { 0.0 };
    }
    let t = (m1 - m2).abs() / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t))
}

/// Monte-Carlo power of a two-sided two-sample test for normal groups of
/// `group_size` whose means differ by `mean_shift`.
pub fn simulate_power(
    group_size: usize,
    mean_shift: f64,
    sd: f64,
    alpha: f64,
    n_sims: usize,
    seed: u64,
    test: PowerTest,
) -> Result<PowerEstimate> {
    if !(sd > 0.0) || !(alpha > 0.0 && alpha < 1.0) || group_size < 2 || n_sims == 0 {
        return Err(Error::InvalidInput(
            "need sd > 0, alpha in (0, 1), group_size >= 2 and n_sims >= 1".into(),
        ));
    }
    let control = Normal::new(0.0, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let treated = Normal::new(mean_shift, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let rejections: usize = (0..n_sims.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let count = CHUNK.min(n_sims - c * CHUNK);
            (0..count)
                .filter(|_| {
                    let x: Vec<f64> = (0..group_size).map(|_| control.sample(&mut rng)).collect();
                    let y: Vec<f64> = (0..group_size).map(|_| treated.sample(&mut rng)).collect();
                    let p = match test {
                        PowerTest::TTest => pooled_t_p(&x, &y),
                        PowerTest::MannWhitney => {
                            mann_whitney_u(&x, &y).map(|r| r.p_two_sided).unwrap_or_else(|_| mann_whitney_normal_p(&x, &y))
                        }
                    };
                    p < alpha
                })
                .count()
        })
        .sum();
    Ok(PowerEstimate { power: rejections as f64 / n_sims as f64, rejections, n_sims, test })
}

/// Annotation rule: 5 minus the number of additional standalone segments
/// found inside a segment, floored at 1.
pub fn atomicity_score(extra_segments: u32) -> u8 {
    5u32.saturating_sub(extra_segments).max(1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_accuracy() {
        assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 4.5e-4);
        assert!((normal_quantile(0.5).unwrap()).abs() < 4.5e-4);
        assert!((normal_quantile(0.05).unwrap() + 1.644854).abs() < 4.5e-4);
        for p in [0.001, 0.1, 0.3, 0.7, 0.99] {
            let z = normal_quantile(p).unwrap();
            assert!((normal_cdf(z) - p).abs() < 2e-4, "p={p}");
        }
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn margins() {
        let m = margin_of_error(1000, 0.95).unwrap();
        assert!((m - 0.031).abs() < 0.0005);
        assert!((margin_of_error(4000, 0.95).unwrap() - m / 2.0).abs() < 1e-15);
        assert!((margin_of_error(96, 0.95).unwrap() - 0.100).abs() < 0.001);
        assert!(margin_of_error(0, 0.95).is_err());
    }

    #[test]
    fn likert_simulation() {
        let a = simulate_likert_std(300, 200, LikertGenerator::Uniform, 3).unwrap();
        assert!((a.mean - 2f64.sqrt()).abs() < 0.02);
        assert!(a.min <= a.mean && a.mean <= a.max);
        assert_eq!(a, simulate_likert_std(300, 200, LikertGenerator::Uniform, 3).unwrap());
        let c = simulate_likert_std(10, 20, LikertGenerator::Constant(4), 3).unwrap();
        assert_eq!((c.min, c.max, c.mean), (0.0, 0.0, 0.0));
        assert!((bimodal_std(200) - (800.0f64 / 199.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn power_null_calibration() {
        let p = simulate_power(50, 0.0, 1.0, 0.05, 2000, 8, PowerTest::TTest).unwrap();
        assert!((p.power - 0.05).abs() < 0.02, "{}", p.power);
        assert_eq!(p, simulate_power(50, 0.0, 1.0, 0.05, 2000, 8, PowerTest::TTest).unwrap());
        assert!(simulate_power(50, 0.0, 0.0, 0.05, 10, 8, PowerTest::TTest).is_err());
    }

    #[test]
    fn atomicity_rule() {
        assert_eq!(atomicity_score(0), 5);
        assert_eq!(atomicity_score(2), 3);
        assert_eq!(atomicity_score(4), 1);
        assert_eq!(atomicity_score(7), 1);
    }
}
