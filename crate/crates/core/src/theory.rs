//! Closed-form expectations for sampled-ranking demotions and the gain from
//! range-restricted sampling, with an exact Monte-Carlo check.
//!
//! Setup: a query has `n_above` entities that outrank its true answer under
//! a full ranking, all contained in the relation's range set (size
//! `range_size`) inside an entity universe of `n_entities`. Sampling `n_s`
//! candidates uniformly without replacement makes the number of sampled
//! demoters hypergeometric; sampling from the range set instead can only
//! demote more, i.e. land closer to the true rank.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

/// Population sizes describing one ranked query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankingScenario {
    pub n_entities: usize,
    pub n_above: usize,
    pub range_size: usize,
    pub n_s: usize,
}

impl RankingScenario {
    pub fn new(n_entities: usize, n_above: usize, range_size: usize, n_s: usize) -> Result<RankingScenario> {
        let s = RankingScenario {
            n_entities,
            n_above,
            range_size,
            n_s,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_above <= self.range_size && self.range_size <= self.n_entities) {
            return Err(Error::consistency(format!(
                "need n_above ≤ range_size ≤ n_entities, got {} / {} / {}",
                self.n_above, self.range_size, self.n_entities
            )));
        }
        if self.n_s == 0 || self.n_s > self.n_entities {
            return Err(Error::consistency(format!(
                "need 0 < n_s ≤ n_entities, got n_s {} with {} entities",
                self.n_s, self.n_entities
            )));
        }
        if self.range_size == 0 {
            return Err(Error::consistency("range_size must be positive"));
        }
        Ok(())
    }

    fn range_draws(&self) -> usize {
        self.n_s.min(self.range_size)
    }
}

/// Expected sampled demoters under uniform sampling:
/// `E[X_u] = n_s · n_above / |E|`.
pub fn expected_demotions_uniform(s: &RankingScenario) -> f64 {
    s.n_s as f64 * s.n_above as f64 / s.n_entities as f64
}

/// Expected sampled demoters when drawing from the range set (with
/// `min(n_s, range_size)` draws): `n_above · n_{s,r} / range_size`.
pub fn expected_demotions_range(s: &RankingScenario) -> f64 {
    s.n_above as f64 * s.range_draws() as f64 / s.range_size as f64
}

/// Expected rank-accuracy gain of range sampling over uniform sampling:
///
/// ```text
/// n_s <  range:  n_above · n_s · (|E| − range) / (range · |E|)
/// n_s >= range:  n_above · (|E| − n_s) / |E|
/// ```
///
/// Non-negative for every valid scenario.
pub fn expected_gain(s: &RankingScenario) -> Result<f64> {
    s.validate()?;
    let (n, a, m, k) = (s.n_entities as f64, s.n_above as f64, s.range_size as f64, s.n_s as f64);
    let gain = if s.n_s < s.range_size {
        a * k * (n - m) / (m * n)
    } else {
        a * (n - k) / n
    };
    Ok(gain)
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: f64,
    pub trials: u64,
}

/// Simulates both samplers by drawing index subsets (exact hypergeometric
/// draws, no approximation) and returns the mean observed gain.
/// Trials run in parallel over fixed-size blocks with per-block random
/// streams, so the result is deterministic for a given seed.
pub fn monte_carlo_gain(s: &RankingScenario, trials: u64, seed: u64) -> Result<MonteCarloEstimate> {
    s.validate()?;
    if trials == 0 {
        return Err(Error::consistency("trials must be ≥ 1"));
    }
    const BLOCK: u64 = 4096;
    let n_blocks = trials.div_ceil(BLOCK);
    let scenario = *s;

    let (sum, sum_sq) = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = stream(seed, StreamKind::MonteCarlo, block);
            let lo = block * BLOCK;
            let hi = ((block + 1) * BLOCK).min(trials);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in lo..hi {
                let x_uniform = hypergeometric_draw(
                    scenario.n_entities,
                    scenario.n_above,
                    scenario.n_s,
                    &mut rng,
                );
                let x_range = hypergeometric_draw(
                    scenario.range_size,
                    scenario.n_above,
                    scenario.range_draws(),
                    &mut rng,
                );
                let gain = x_range as f64 - x_uniform as f64;
                sum += gain;
                sum_sq += gain * gain;
            }
            (sum, sum_sq)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));

    let n = trials as f64;
    let mean = sum / n;
    let variance = if trials > 1 {
        ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        ci_halfwidth: 1.96 * (variance / n).sqrt(),
        trials,
    })
}

/// Draws a uniform `k`-subset of `0..population` and counts members below
/// `successes` — one exact hypergeometric sample.
fn hypergeometric_draw(population: usize, successes: usize, k: usize, rng: &mut impl Rng) -> usize {
    debug_assert!(k <= population);
    // Floyd's subset sampling.
    let mut chosen = std::collections::HashSet::with_capacity(k);
    let mut count = 0usize;
    for j in (population - k)..population {
        let t = rng.gen_range(0..=j);
        let picked = if chosen.insert(t) { t } else { chosen.insert(j); j };
        if picked < successes {
            count += 1;
        }
    }
    count
}
