//! Negative-candidate sampling, one draw per (relation, direction).
//!
//! Whatever the strategy, an evaluation pass performs exactly 2·|R| sampling
//! events rather than one per query; all queries of a relation/direction
//! share the same drawn pool. Each column draws from its own deterministic
//! random stream, so plans are reproducible and independent of evaluation
//! order or parallelism.

use std::collections::HashSet;

use crate::candidates::CandidateSets;
use crate::error::{Error, Result};
use crate::recommend::ScoreMatrix;
use crate::rng::{stream, StreamKind};
use crate::store::{Direction, EntityId, RelationId, Split, TripleStore};
use rand::Rng;

/// Requested sample size: an absolute count or a fraction of |E|
/// (resolved as ⌈f·|E|⌉).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    Count(usize),
    Fraction(f64),
}

impl SampleSize {
    pub fn resolve(self, n_entities: usize) -> usize {
        match self {
            SampleSize::Count(c) => c,
            SampleSize::Fraction(f) => (f * n_entities as f64).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Probabilistic,
    Static,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Probabilistic => "probabilistic",
            Strategy::Static => "static",
        }
    }
}

/// Sampled entity ids per (relation, direction); sorted, duplicate-free.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    samples: Vec<Vec<EntityId>>,
    n_relations: usize,
    requested: usize,
    strategy: Strategy,
    seed: u64,
}

impl SamplePlan {
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Requested per-column sample size (columns with smaller pools yield
    /// their whole pool).
    pub fn requested_size(&self) -> usize {
        self.requested
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    /// Number of sampling events, always 2·|R|.
    pub fn events(&self) -> usize {
        self.samples.len()
    }

    pub fn total_sampled_ids(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    pub fn sample(&self, relation: RelationId, direction: Direction) -> &[EntityId] {
        let col = match direction {
            Direction::Head => relation,
            Direction::Tail => relation + self.n_relations,
        };
        &self.samples[col]
    }
}

/// Uniform draw without replacement from each candidate set.
pub fn sample_static(sets: &CandidateSets, n_s: SampleSize, seed: u64) -> SamplePlan {
    let requested = n_s.resolve(sets.n_entities());
    let samples = (0..sets.columns().len())
        .map(|col| {
            let pool = &sets.columns()[col];
            if pool.is_empty() {
                log::warn!("static sampling: empty candidate set for column {col}");
                return Vec::new();
            }
            let mut rng = stream(seed, StreamKind::StaticSampling, col as u64);
            let mut picked: Vec<EntityId> = floyd_subset(pool.len(), requested.min(pool.len()), &mut rng)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    SamplePlan {
        samples,
        n_relations: sets.n_relations(),
        requested,
        strategy: Strategy::Static,
        seed,
    }
}

/// Score-weighted draw without replacement from each column of `x`.
/// Zero-score entities are never sampled.
///
/// Uses the exponential-race form of weighted reservoir sampling: each
/// candidate gets key `-ln(u) / w` and the `n_s` smallest keys win.
pub fn sample_probabilistic(x: &ScoreMatrix, n_s: SampleSize, seed: u64) -> SamplePlan {
    let requested = n_s.resolve(x.n_entities());
    let samples = (0..x.n_columns())
        .map(|col| {
            let entries = x.matrix().column(col).expect("column in range");
            if entries.is_empty() {
                log::warn!("probabilistic sampling: all-zero column {col}");
                return Vec::new();
            }
            let mut rng = stream(seed, StreamKind::ProbabilisticSampling, col as u64);
            let mut keyed: Vec<(f64, EntityId)> = entries
                .iter()
                .map(|&(e, w)| {
                    let u: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
                    (-u.ln() / w, e)
                })
                .collect();
            let k = requested.min(keyed.len());
            keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut picked: Vec<EntityId> = keyed[..k].iter().map(|&(_, e)| e).collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    SamplePlan {
        samples,
        n_relations: x.n_relations(),
        requested,
        strategy: Strategy::Probabilistic,
        seed,
    }
}

/// Uniform draw without replacement from the whole entity set, one draw per
/// (relation, direction).
pub fn sample_uniform(n_entities: usize, n_relations: usize, n_s: SampleSize, seed: u64) -> SamplePlan {
    let requested = n_s.resolve(n_entities);
    let samples = (0..2 * n_relations)
        .map(|col| {
            let mut rng = stream(seed, StreamKind::UniformSampling, col as u64);
            let mut picked = floyd_subset(n_entities, requested.min(n_entities), &mut rng);
            picked.sort_unstable();
            picked
        })
        .collect();
    SamplePlan {
        samples,
        n_relations,
        requested,
        strategy: Strategy::Random,
        seed,
    }
}

/// Floyd's algorithm: uniform `k`-subset of `0..n` in `O(k)` draws.
fn floyd_subset(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut chosen: HashSet<usize> = HashSet::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Sampling-cost accounting for an executed plan, against the hypothetical
/// cost of per-query sampling (one draw per distinct test pair).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SamplingLedger {
    pub sampling_events: usize,
    pub total_sampled_ids: usize,
    pub requested_per_event: usize,
    pub distinct_eval_pairs: usize,
    pub per_query_hypothetical_ids: u64,
    pub reduction_ratio: f64,
}

pub fn sampling_ledger(plan: &SamplePlan, store: &TripleStore) -> SamplingLedger {
    let distinct_eval_pairs = store.distinct_pairs(Split::Test);
    let per_query = distinct_eval_pairs as u64 * plan.requested_size() as u64;
    let total = plan.total_sampled_ids();
    SamplingLedger {
        sampling_events: plan.events(),
        total_sampled_ids: total,
        requested_per_event: plan.requested_size(),
        distinct_eval_pairs,
        per_query_hypothetical_ids: per_query,
        reduction_ratio: per_query as f64 / total.max(1) as f64,
    }
}

/// Head and tail pools, drawn separately for the validation and test passes.
const POOLS_PER_EVAL_RELATION: u64 = 4;

/// Pure shape arithmetic: per-query vs per-relation sampling cost for a
/// dataset described only by its counts.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ShapeLedger {
    pub per_query_samples: u64,
    pub relational_samples: u64,
    pub reduction_ratio: f64,
}

pub fn ledger_from_shape(
    n_entities: u64,
    n_eval_relations: u64,
    n_distinct_pairs: u64,
    sample_fraction: f64,
) -> Result<ShapeLedger> {
    if !(0.0..=1.0).contains(&sample_fraction) {
        return Err(Error::consistency(format!(
            "sample fraction {sample_fraction} outside [0, 1]"
        )));
    }
    let per_event = sample_fraction * n_entities as f64;
    let per_query = (per_event * n_distinct_pairs as f64).floor() as u64;
    let relational = (per_event * (POOLS_PER_EVAL_RELATION * n_eval_relations) as f64).floor() as u64;
    Ok(ShapeLedger {
        per_query_samples: per_query,
        relational_samples: relational,
        reduction_ratio: per_query as f64 / relational.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{materialize, EMPTY_SET_THRESHOLD};
    use crate::recommend::{lwd, pt, Method, ScoreMatrix};
    use crate::rng::split_seed;
    use crate::sparse::SparseMatrix;
    use crate::store::TripleStore;
    use proptest::prelude::*;

    fn toy_store() -> TripleStore {
        TripleStore::parse("e0\tr0\te2\ne1\tr0\te2\ne0\tr1\te1", "", "e3\tr0\te2").unwrap()
    }

    fn pt_sets(store: &TripleStore) -> CandidateSets {
        let x = pt(store);
        materialize(&x, &vec![1.0; 2 * store.n_relations()], store, false)
    }

    #[test]
    fn static_takes_whole_small_pool() {
        let store = toy_store();
        let sets = pt_sets(&store);
        let plan = sample_static(&sets, SampleSize::Count(5), 7);
        let r0 = store.relations().id("r0").unwrap();
        assert_eq!(plan.sample(r0, Direction::Head), sets.set(r0, Direction::Head));
    }

    #[test]
    fn static_is_deterministic() {
        let m = SparseMatrix::from_pairs(100, 2, (0..100).map(|e| (e, 0, 1.0))).unwrap();
        let x = ScoreMatrix::new(m, Method::Pt);
        let store = toy_store();
        let sets = materialize(&x, &[1.0, EMPTY_SET_THRESHOLD], &store, false);
        let a = sample_static(&sets, SampleSize::Count(10), 99);
        let b = sample_static(&sets, SampleSize::Count(10), 99);
        assert_eq!(a.sample(0, Direction::Head), b.sample(0, Direction::Head));
        assert_eq!(a.sample(0, Direction::Head).len(), 10);
        let c = sample_static(&sets, SampleSize::Count(10), 100);
        assert_ne!(a.sample(0, Direction::Head), c.sample(0, Direction::Head));
    }

    #[test]
    fn static_inclusion_frequency_matches_hypergeometric() {
        // 10-element set, 5-sample: every member appears with frequency 1/2.
        let m = SparseMatrix::from_pairs(10, 2, (0..10).map(|e| (e, 0, 1.0))).unwrap();
        let x = ScoreMatrix::new(m, Method::Pt);
        let store = toy_store();
        let sets = materialize(&x, &[1.0, EMPTY_SET_THRESHOLD], &store, false);
        let trials = 100_000;
        let mut hits = 0usize;
        for i in 0..trials {
            let plan = sample_static(&sets, SampleSize::Count(5), split_seed(4242, i));
            if plan.sample(0, Direction::Head).binary_search(&3).is_ok() {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn probabilistic_single_nonzero_always_sampled() {
        let m = SparseMatrix::from_pairs(5, 2, [(3, 0, 0.7)]).unwrap();
        let x = ScoreMatrix::new(m, Method::Lwd);
        for seed in 0..20 {
            let plan = sample_probabilistic(&x, SampleSize::Count(1), seed);
            assert_eq!(plan.sample(0, Direction::Head), &[3]);
        }
    }

    #[test]
    fn probabilistic_weight_ratio() {
        // Weights [3, 1], one draw: first entity with probability 3/4.
        let m = SparseMatrix::from_pairs(2, 2, [(0, 0, 3.0), (1, 0, 1.0)]).unwrap();
        let x = ScoreMatrix::new(m, Method::Lwd);
        let trials = 100_000;
        let mut first = 0usize;
        for i in 0..trials {
            let plan = sample_probabilistic(&x, SampleSize::Count(1), split_seed(7, i));
            if plan.sample(0, Direction::Head) == [0] {
                first += 1;
            }
        }
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.75).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn probabilistic_never_emits_zero_scores() {
        let store = toy_store();
        let x = lwd(&store, None).unwrap();
        let r1 = store.relations().id("r1").unwrap();
        let allowed: Vec<EntityId> = x.column(r1, Direction::Head).into_iter().map(|(e, _)| e).collect();
        for seed in 0..50 {
            let plan = sample_probabilistic(&x, SampleSize::Count(4), seed);
            for &e in plan.sample(r1, Direction::Head) {
                assert!(allowed.contains(&e));
            }
        }
    }

    #[test]
    fn uniform_exhaustive_and_deterministic() {
        let plan = sample_uniform(6, 2, SampleSize::Count(6), 1);
        for r in 0..2 {
            for d in Direction::BOTH {
                assert_eq!(plan.sample(r, d), &[0, 1, 2, 3, 4, 5]);
            }
        }
        let a = sample_uniform(50, 1, SampleSize::Count(10), 5);
        let b = sample_uniform(50, 1, SampleSize::Count(10), 5);
        assert_eq!(a.sample(0, Direction::Tail), b.sample(0, Direction::Tail));
    }

    #[test]
    fn uniform_inclusion_frequency() {
        let trials = 100_000;
        let mut hits = 0usize;
        for i in 0..trials {
            let plan = sample_uniform(20, 1, SampleSize::Count(5), split_seed(31, i));
            if plan.sample(0, Direction::Head).binary_search(&11).is_ok() {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn fraction_resolution_rounds_up() {
        assert_eq!(SampleSize::Fraction(0.1).resolve(205), 21);
        assert_eq!(SampleSize::Fraction(1.0).resolve(50), 50);
        assert_eq!(SampleSize::Count(7).resolve(50), 7);
    }

    #[test]
    fn ledger_counts_events() {
        let store = toy_store();
        let plan = sample_uniform(store.n_entities(), store.n_relations(), SampleSize::Count(2), 3);
        let ledger = sampling_ledger(&plan, &store);
        assert_eq!(ledger.sampling_events, 4);
        // Toy test split: pairs {(e3, r0)} and {(r0, e2)} → 2 distinct pairs.
        assert_eq!(ledger.distinct_eval_pairs, 2);
        assert_eq!(ledger.per_query_hypothetical_ids, 4);
    }

    #[test]
    fn ledger_reduction_at_least_one_when_pairs_exceed_events() {
        // 5 test triples over one relation → up to 10 distinct pairs > 2|R| = 2.
        let train = "a\tp\tb";
        let test = "c\tp\td\ne\tp\tf\ng\tp\th\ni\tp\tj\nk\tp\tl";
        let store = TripleStore::parse(train, "", test).unwrap();
        let plan = sample_uniform(store.n_entities(), store.n_relations(), SampleSize::Count(3), 0);
        let ledger = sampling_ledger(&plan, &store);
        assert!(store.distinct_pairs(Split::Test) > plan.events());
        assert!(ledger.reduction_ratio >= 1.0);
    }

    #[test]
    fn shape_ledger_matches_large_kg_arithmetic() {
        let ledger = ledger_from_shape(123_143, 34, 8_528, 0.025).unwrap();
        assert_eq!(ledger.per_query_samples, 26_254_087);
        assert_eq!(ledger.relational_samples, 418_686);
        assert!((ledger.reduction_ratio * 100.0).round() / 100.0 == 62.71);
    }

    #[test]
    fn static_over_full_entity_set_matches_uniform_distribution() {
        // Chi-square goodness-of-fit of static inclusion counts against the
        // uniform inclusion probability n_s/N, 10^4 draws.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let n = 20usize;
        let k = 5usize;
        let m = SparseMatrix::from_pairs(n, 2, (0..n).map(|e| (e, 0, 1.0))).unwrap();
        let x = ScoreMatrix::new(m, Method::Pt);
        let store = toy_store();
        let sets = materialize(&x, &[1.0, EMPTY_SET_THRESHOLD], &store, false);

        let draws = 10_000usize;
        let mut counts = vec![0f64; n];
        for i in 0..draws {
            let plan = sample_static(&sets, SampleSize::Count(k), split_seed(555, i as u64));
            for &e in plan.sample(0, Direction::Head) {
                counts[e] += 1.0;
            }
        }
        let expected = draws as f64 * k as f64 / n as f64;
        let stat: f64 = counts.iter().map(|&c| (c - expected).powi(2) / expected).sum();
        let chi = ChiSquared::new((n - 1) as f64).unwrap();
        let p = 1.0 - chi.cdf(stat);
        assert!(p > 0.01, "chi-square stat {stat}, p {p}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn all_strategies_yield_valid_plans(
            n_entities in 2usize..40,
            n_relations in 1usize..4,
            n_s in 1usize..20,
            seed in 0u64..1000,
        ) {
            let m = SparseMatrix::from_pairs(
                n_entities,
                2 * n_relations,
                (0..n_entities).filter(|e| e % 2 == 0).flat_map(|e| {
                    (0..2 * n_relations).map(move |c| (e, c, 1.0 + (e + c) as f64))
                }),
            )
            .unwrap();
            let x = ScoreMatrix::new(m, Method::Lwd);
            let store = toy_store();
            let sets = materialize(&x, &vec![1e-12; 2 * n_relations], &store, false);

            for plan in [
                sample_uniform(n_entities, n_relations, SampleSize::Count(n_s), seed),
                sample_static(&sets, SampleSize::Count(n_s), seed),
                sample_probabilistic(&x, SampleSize::Count(n_s), seed),
            ] {
                prop_assert_eq!(plan.events(), 2 * n_relations);
                for r in 0..n_relations {
                    for d in Direction::BOTH {
                        let s = plan.sample(r, d);
                        // Sorted (hence duplicate-free) and within range.
                        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
                        prop_assert!(s.iter().all(|&e| e < n_entities));
                        prop_assert!(s.len() <= n_s);
                    }
                }
            }
        }
    }
}
