//! Per-operator i.i.d. traffic intensities and the counter-based generator
//! that realizes them.

use crate::error::{Error, Result};

const PROBABILITY_SLACK: f64 = 1e-12;

/// Marginal distribution of one operator's traffic intensity.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelDistribution {
    /// `Λ = 1` with probability `p_high`, else `Λ = 0`.
    TwoLevel { p_high: f64 },
    /// `(level, probability)` pairs.
    FiniteLevels(Vec<(f64, f64)>),
}

impl LevelDistribution {
    pub fn two_level(p_high: f64) -> Result<Self> {
        let d = LevelDistribution::TwoLevel { p_high };
        d.validate()?;
        Ok(d)
    }

    pub fn finite(levels: Vec<(f64, f64)>) -> Result<Self> {
        let d = LevelDistribution::FiniteLevels(levels);
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevelDistribution::TwoLevel { p_high } => {
                if !(0.0..=1.0).contains(p_high) {
                    return Err(Error::Domain(format!("p_high must lie in [0, 1], got {p_high}")));
                }
            }
            LevelDistribution::FiniteLevels(levels) => {
                if levels.is_empty() {
                    return Err(Error::Domain("traffic distribution has no levels".into()));
                }
                let mut total = 0.0;
                for (i, &(level, p)) in levels.iter().enumerate() {
                    if !(level >= 0.0) {
                        return Err(Error::Domain(format!("negative traffic level {level}")));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
                    }
                    if levels[..i].iter().any(|&(l, _)| l == level) {
                        return Err(Error::Domain(format!("duplicate traffic level {level}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROBABILITY_SLACK {
                    return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// Support points with their probabilities.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match self {
            LevelDistribution::TwoLevel { p_high } => vec![(0.0, 1.0 - p_high), (1.0, *p_high)],
            LevelDistribution::FiniteLevels(levels) => levels.clone(),
        }
    }

    /// Levels with positive probability.
    pub fn reachable_levels(&self) -> Vec<f64> {
        self.support()
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn is_binary(&self) -> bool {
        match self {
            LevelDistribution::TwoLevel { .. } => true,
            LevelDistribution::FiniteLevels(levels) => {
                levels.iter().all(|&(l, p)| p == 0.0 || l == 0.0 || l == 1.0)
            }
        }
    }

    /// Probability of `Λ = 1`; only meaningful when [`is_binary`](Self::is_binary).
    pub fn p_high(&self) -> f64 {
        self.support()
            .into_iter()
            .filter(|&(l, _)| l == 1.0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn max_level(&self) -> f64 {
        self.reachable_levels().into_iter().fold(0.0, f64::max)
    }

    /// Maps a uniform draw in `[0, 1)` to a level by inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            LevelDistribution::TwoLevel { p_high } => {
                if u < *p_high {
                    1.0
                } else {
                    0.0
                }
            }
            LevelDistribution::FiniteLevels(levels) => {
                let mut acc = 0.0;
                for &(level, p) in levels {
                    acc += p;
                    if u < acc {
                        return level;
                    }
                }
                // rounding left a sliver above the last cumulative value
                levels
                    .iter()
                    .rev()
                    .find(|&&(_, p)| p > 0.0)
                    .map(|&(l, _)| l)
                    .unwrap_or(levels[levels.len() - 1].0)
            }
        }
    }
}

/// `Σ p(λ)·g(λ)` over the support.
pub fn expectation(dist: &LevelDistribution, g: impl Fn(f64) -> f64) -> f64 {
    dist.support().into_iter().map(|(l, p)| p * g(l)).sum()
}

/// Traffic distributions for all operators (independent across operators).
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficSpec {
    pub operators: Vec<LevelDistribution>,
}

impl TrafficSpec {
    pub fn new(operators: Vec<LevelDistribution>) -> Result<Self> {
        for d in &operators {
            d.validate()?;
        }
        Ok(TrafficSpec { operators })
    }

    pub fn two_level(p_high: &[f64]) -> Result<Self> {
        Self::new(
            p_high
                .iter()
                .map(|&p| LevelDistribution::two_level(p))
                .collect::<Result<_>>()?,
        )
    }

    pub fn uniform(n: usize, dist: LevelDistribution) -> Result<Self> {
        Self::new(vec![dist; n])
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn all_binary(&self) -> bool {
        self.operators.iter().all(LevelDistribution::is_binary)
    }
}

/// Counter-based generator: every `(seed, operator, slot)` maps to a fixed
/// 64-bit value with no sequential state.
pub mod counter_rng {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

    /// SplitMix64 finalizer.
    #[inline]
    pub fn mix64(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    #[inline]
    fn absorb(state: u64, word: u64) -> u64 {
        mix64(state.wrapping_add(GOLDEN) ^ mix64(word.wrapping_add(GOLDEN)))
    }

    /// Hash of the key `(seed, stream, index)`.
    #[inline]
    pub fn draw_u64(seed: u64, stream: u64, index: u64) -> u64 {
        absorb(absorb(mix64(seed ^ GOLDEN), stream), index)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn draw_unit(seed: u64, stream: u64, index: u64) -> f64 {
        (draw_u64(seed, stream, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Seed for replication `r` of a run keyed by `seed`.
    pub fn replication_seed(seed: u64, replication: u64) -> u64 {
        absorb(mix64(seed), replication ^ 0x5eed_5eed_5eed_5eed)
    }
}

/// Traffic level of `operator` at `slot` under `seed`.
pub fn sample(dist: &LevelDistribution, slot: u64, operator: usize, seed: u64) -> f64 {
    dist.quantile(counter_rng::draw_unit(seed, operator as u64, slot))
}

/// Levels of all operators at `slot`.
pub fn sample_all(spec: &TrafficSpec, slot: u64, seed: u64) -> Vec<f64> {
    spec.operators
        .iter()
        .enumerate()
        .map(|(i, d)| sample(d, slot, i, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_distributions() {
        let one = LevelDistribution::two_level(1.0).unwrap();
        let zero = LevelDistribution::two_level(0.0).unwrap();
        for slot in 0..10_000 {
            assert_eq!(sample(&one, slot, 0, 7), 1.0);
            assert_eq!(sample(&zero, slot, 3, 7), 0.0);
        }
    }

    #[test]
    fn empirical_mean_within_binomial_bound() {
        let d = LevelDistribution::two_level(0.25).unwrap();
        let n = 1_000_000u64;
        let hits: f64 = (0..n).map(|s| sample(&d, s, 1, 42)).sum();
        let mean = hits / n as f64;
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn draws_are_addressable_and_deterministic() {
        let d = LevelDistribution::two_level(0.5).unwrap();
        let forward: Vec<f64> = (0..100).map(|s| sample(&d, s, 2, 99)).collect();
        let backward: Vec<f64> = (0..100).rev().map(|s| sample(&d, s, 2, 99)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_eq!(counter_rng::draw_u64(1, 2, 3), counter_rng::draw_u64(1, 2, 3));
        assert_ne!(counter_rng::draw_u64(1, 2, 3), counter_rng::draw_u64(1, 3, 2));
    }

    #[test]
    fn operator_streams_are_uncorrelated() {
        let n = 1_000_000u64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for s in 0..n {
            let x = counter_rng::draw_unit(5, 0, s);
            let y = counter_rng::draw_unit(5, 1, s);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * sy / nf;
        let rho = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(rho.abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn expectation_examples() {
        let d = LevelDistribution::two_level(0.5).unwrap();
        assert_eq!(expectation(&d, |l| l), 0.5);
        let u = LevelDistribution::finite(vec![(0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)])
            .unwrap();
        assert!((expectation(&u, |l| l * l) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn finite_levels_validation() {
        assert!(LevelDistribution::finite(vec![(0.0, 0.5), (0.0, 0.5)]).is_err());
        assert!(LevelDistribution::finite(vec![(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(LevelDistribution::finite(vec![(-1.0, 1.0)]).is_err());
        assert!(LevelDistribution::two_level(1.5).is_err());
        let three = LevelDistribution::finite(vec![(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert!(!three.is_binary());
    }

    #[test]
    fn finite_levels_sampling_frequencies() {
        let d = LevelDistribution::finite(vec![(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]).unwrap();
        let n = 200_000u64;
        let mut counts = [0usize; 3];
        for s in 0..n {
            counts[sample(&d, s, 0, 11) as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip([0.2, 0.3, 0.5])
            .map(|(&c, p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 2 degrees of freedom, 99.9th percentile
        assert!(chi2 < 13.82, "chi2 {chi2}");
    }
}
