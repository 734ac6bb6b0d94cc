//! Filtered ranking — the exact oracle and its sampled estimators — plus
//! metric aggregation, estimator-vs-truth comparison and the multi-strategy
//! evaluation suite.
//!
//! Every test triple yields two queries (predict tail, predict head). The
//! candidate pool excludes known positives for the query (across the
//! configured splits) but always retains the true answer; ranks are
//! tie-averaged so a constant scorer lands at chance.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::candidates::CandidateSets;
use crate::error::{Error, Result};
use crate::recommend::ScoreMatrix;
use crate::rng::split_seed;
use crate::sampling::{
    sample_probabilistic, sample_static, sample_uniform, SamplePlan, SampleSize, Strategy,
};
use crate::scorer::Scorer;
use crate::store::{Direction, EntityId, RelationId, Split, SplitMask, TripleStore};

/// Rank of one query's true answer within its candidate pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankRecord {
    /// Index of the test triple this query came from.
    pub query_id: usize,
    pub anchor: EntityId,
    pub relation: RelationId,
    pub direction: Direction,
    pub true_entity: EntityId,
    /// Tie-averaged rank, 1 ≤ rank ≤ pool_size (half-integers on ties).
    pub rank: f64,
    /// Ranked candidates including the true entity.
    pub pool_size: usize,
}

/// Aggregate ranking metrics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricBundle {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_queries: usize,
    pub wall_time_s: f64,
}

/// Error statistics of an estimated metric series against its truth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ComparisonReport {
    pub mae: f64,
    /// None when every truth entry was zero (all skipped).
    pub mape: Option<f64>,
    pub mape_skipped: usize,
    /// None when either series is constant (undefined correlation).
    pub pearson: Option<f64>,
    /// None when ties leave the tau-b denominator empty.
    pub kendall_tau: Option<f64>,
    /// full time / estimator time when timings are supplied.
    pub speedup: Option<f64>,
}

/// Exact filtered ranks over the whole entity set.
pub fn full_filtered_ranks<S: Scorer + ?Sized>(scorer: &S, store: &TripleStore) -> Vec<RankRecord> {
    full_filtered_ranks_scoped(scorer, store, SplitMask::ALL)
}

pub fn full_filtered_ranks_scoped<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    scope: SplitMask,
) -> Vec<RankRecord> {
    let queries = test_queries(store);
    queries
        .par_iter()
        .map(|q| {
            let excluded = store.filtered_candidates_scoped(q.anchor, q.relation, q.direction, scope);
            let pool: Vec<EntityId> = (0..store.n_entities())
                .filter(|&e| e == q.true_entity || excluded.binary_search(&e).is_err())
                .collect();
            rank_in_pool(scorer, q, &pool)
        })
        .collect()
}

/// Ranks against the per-relation sampled pools of `plan` instead of the
/// full entity set. The true answer is appended when not sampled; known
/// positives are removed per query exactly as in the full oracle.
pub fn sampled_ranks<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    plan: &SamplePlan,
) -> Result<Vec<RankRecord>> {
    sampled_ranks_scoped(scorer, store, plan, SplitMask::ALL)
}

pub fn sampled_ranks_scoped<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    plan: &SamplePlan,
    scope: SplitMask,
) -> Result<Vec<RankRecord>> {
    if plan.n_relations() != store.n_relations() {
        return Err(Error::dimension(format!(
            "plan covers {} relations, store has {}",
            plan.n_relations(),
            store.n_relations()
        )));
    }
    let queries = test_queries(store);
    Ok(queries
        .par_iter()
        .map(|q| {
            let excluded = store.filtered_candidates_scoped(q.anchor, q.relation, q.direction, scope);
            let sample = plan.sample(q.relation, q.direction);
            let mut pool: Vec<EntityId> = sample
                .iter()
                .copied()
                .filter(|&e| e != q.true_entity && excluded.binary_search(&e).is_err())
                .collect();
            pool.push(q.true_entity);
            rank_in_pool(scorer, q, &pool)
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Query {
    query_id: usize,
    anchor: EntityId,
    relation: RelationId,
    direction: Direction,
    true_entity: EntityId,
}

fn test_queries(store: &TripleStore) -> Vec<Query> {
    store
        .split(Split::Test)
        .iter()
        .enumerate()
        .flat_map(|(query_id, t)| {
            [
                Query {
                    query_id,
                    anchor: t.head,
                    relation: t.relation,
                    direction: Direction::Tail,
                    true_entity: t.tail,
                },
                Query {
                    query_id,
                    anchor: t.tail,
                    relation: t.relation,
                    direction: Direction::Head,
                    true_entity: t.head,
                },
            ]
        })
        .collect()
}

fn rank_in_pool<S: Scorer + ?Sized>(scorer: &S, q: &Query, pool: &[EntityId]) -> RankRecord {
    debug_assert!(pool.contains(&q.true_entity));
    let scores = scorer.score_candidates(q.anchor, q.relation, pool, q.direction);
    let true_pos = pool.iter().position(|&e| e == q.true_entity).expect("true in pool");
    let s_true = scores[true_pos];
    let mut above = 0usize;
    let mut ties = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i == true_pos {
            continue;
        }
        if s > s_true {
            above += 1;
        } else if s == s_true {
            ties += 1;
        }
    }
    RankRecord {
        query_id: q.query_id,
        anchor: q.anchor,
        relation: q.relation,
        direction: q.direction,
        true_entity: q.true_entity,
        rank: 1.0 + above as f64 + ties as f64 / 2.0,
        pool_size: pool.len(),
    }
}

/// Summation by halving; keeps the floating-point result independent of
/// chunking and bounds accumulated error on long series.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// MRR and Hits@{1,3,10} over rank records. `wall_time_s` is left at zero
/// for the caller to fill.
pub fn metrics(records: &[RankRecord]) -> Result<MetricBundle> {
    if records.is_empty() {
        return Err(Error::consistency("cannot aggregate metrics over zero queries"));
    }
    let n = records.len() as f64;
    let reciprocal: Vec<f64> = records.iter().map(|r| 1.0 / r.rank).collect();
    let hits = |k: f64| records.iter().filter(|r| r.rank <= k).count() as f64 / n;
    Ok(MetricBundle {
        mrr: pairwise_sum(&reciprocal) / n,
        hits1: hits(1.0),
        hits3: hits(3.0),
        hits10: hits(10.0),
        n_queries: records.len(),
        wall_time_s: 0.0,
    })
}

/// MAE/MAPE/Pearson/Kendall-tau-b of `estimates` against `truth`
/// (element-wise series of equal length). `times` is (full, estimator)
/// wall-clock seconds when a speedup is meaningful.
pub fn compare(estimates: &[f64], truth: &[f64], times: Option<(f64, f64)>) -> Result<ComparisonReport> {
    if estimates.len() != truth.len() {
        return Err(Error::dimension(format!(
            "series lengths differ: {} vs {}",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::consistency("cannot compare empty series"));
    }
    let n = estimates.len();
    let abs_err: Vec<f64> = estimates.iter().zip(truth).map(|(e, t)| (e - t).abs()).collect();
    let mae = pairwise_sum(&abs_err) / n as f64;

    let mut mape_sum = 0.0;
    let mut mape_n = 0usize;
    for (e, t) in estimates.iter().zip(truth) {
        if *t != 0.0 {
            mape_sum += ((e - t) / t).abs();
            mape_n += 1;
        }
    }
    let mape = (mape_n > 0).then(|| mape_sum / mape_n as f64);

    Ok(ComparisonReport {
        mae,
        mape,
        mape_skipped: n - mape_n,
        pearson: pearson(estimates, truth),
        kendall_tau: kendall_tau_b(estimates, truth),
        speedup: times.map(|(full, est)| full / est),
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Kendall's tau-b (tie-corrected), O(n²) — series here are short.
fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    // Pairs tied in both series count toward neither axis total.
    let both_tied = n0 - concordant - discordant - ties_x - ties_y;
    let denom_x = n0 - ties_x - both_tied;
    let denom_y = n0 - ties_y - both_tied;
    if denom_x <= 0 || denom_y <= 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((denom_x as f64) * (denom_y as f64)).sqrt())
}

/// Which evaluations the suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyChoice {
    Full,
    Sampled(Strategy),
}

impl StrategyChoice {
    pub fn name(self) -> &'static str {
        match self {
            StrategyChoice::Full => "full",
            StrategyChoice::Sampled(s) => s.as_str(),
        }
    }

    pub fn parse(s: &str) -> Result<StrategyChoice> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(StrategyChoice::Full),
            "random" | "r" => Ok(StrategyChoice::Sampled(Strategy::Random)),
            "probabilistic" | "prob" | "p" => Ok(StrategyChoice::Sampled(Strategy::Probabilistic)),
            "static" | "s" => Ok(StrategyChoice::Sampled(Strategy::Static)),
            other => Err(Error::consistency(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub strategies: Vec<StrategyChoice>,
    pub sample_size: SampleSize,
    /// Master seed; per-repetition seeds are derived from it.
    pub seed: u64,
    pub repetitions: usize,
    pub filter_scope: SplitMask,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            strategies: vec![StrategyChoice::Full, StrategyChoice::Sampled(Strategy::Random)],
            sample_size: SampleSize::Fraction(0.1),
            seed: 0,
            repetitions: 5,
            filter_scope: SplitMask::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Per-strategy block of the evaluation report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StrategyReport {
    pub mrr: MeanStd,
    pub hits1: MeanStd,
    pub hits3: MeanStd,
    pub hits10: MeanStd,
    pub n_queries: usize,
    pub runs: usize,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_vs_full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape_vs_full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_vs_full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kendall_vs_full: Option<f64>,
}

/// Strategy name → report; BTreeMap keeps serialization order stable.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvaluationReport {
    pub strategies: BTreeMap<String, StrategyReport>,
}

/// Everything a suite run produces: the serializable report plus the full
/// oracle's per-query rank records when the full strategy ran.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub report: EvaluationReport,
    pub full_ranks: Option<Vec<RankRecord>>,
}

/// Runs the requested strategies. The full evaluation runs once (it is
/// deterministic); each sampled strategy runs once per derived seed, and its
/// per-seed MRR series is compared against the full MRR.
///
/// `score_matrix` backs probabilistic sampling, `candidate_sets` static
/// sampling; they are only required when the matching strategy is requested.
pub fn evaluate_suite<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    score_matrix: Option<&ScoreMatrix>,
    candidate_sets: Option<&CandidateSets>,
    config: &SuiteConfig,
) -> Result<SuiteOutcome> {
    if config.strategies.is_empty() {
        return Err(Error::consistency("no strategies requested"));
    }
    if config.repetitions == 0 {
        return Err(Error::consistency("repetitions must be ≥ 1"));
    }
    if store.split(Split::Test).is_empty() {
        return Err(Error::consistency("test split is empty"));
    }

    let wants_full = config.strategies.contains(&StrategyChoice::Full);
    let mut full_ranks: Option<Vec<RankRecord>> = None;
    let mut full_time = 0.0f64;
    let mut full_bundle: Option<MetricBundle> = None;
    if wants_full {
        let start = Instant::now();
        let ranks = full_filtered_ranks_scoped(scorer, store, config.filter_scope);
        full_time = start.elapsed().as_secs_f64();
        let mut bundle = metrics(&ranks)?;
        bundle.wall_time_s = full_time;
        full_bundle = Some(bundle);
        full_ranks = Some(ranks);
    }

    let mut blocks: BTreeMap<String, StrategyReport> = BTreeMap::new();
    for &choice in &config.strategies {
        match choice {
            StrategyChoice::Full => {
                let bundle = full_bundle.as_ref().expect("full ran");
                blocks.insert(
                    "full".to_string(),
                    StrategyReport {
                        mrr: MeanStd { mean: bundle.mrr, std: 0.0 },
                        hits1: MeanStd { mean: bundle.hits1, std: 0.0 },
                        hits3: MeanStd { mean: bundle.hits3, std: 0.0 },
                        hits10: MeanStd { mean: bundle.hits10, std: 0.0 },
                        n_queries: bundle.n_queries,
                        runs: 1,
                        wall_time_s: full_time,
                        speedup: Some(1.0),
                        mae_vs_full: Some(0.0),
                        mape_vs_full: None,
                        pearson_vs_full: None,
                        kendall_vs_full: None,
                    },
                );
            }
            StrategyChoice::Sampled(strategy) => {
                let mut mrr = Vec::with_capacity(config.repetitions);
                let mut hits1 = Vec::with_capacity(config.repetitions);
                let mut hits3 = Vec::with_capacity(config.repetitions);
                let mut hits10 = Vec::with_capacity(config.repetitions);
                let mut times = Vec::with_capacity(config.repetitions);
                let mut n_queries = 0usize;
                for rep in 0..config.repetitions {
                    let seed = split_seed(config.seed, rep as u64);
                    let start = Instant::now();
                    let plan = build_plan(strategy, store, score_matrix, candidate_sets, config.sample_size, seed)?;
                    let ranks = sampled_ranks_scoped(scorer, store, &plan, config.filter_scope)?;
                    times.push(start.elapsed().as_secs_f64());
                    let bundle = metrics(&ranks)?;
                    n_queries = bundle.n_queries;
                    mrr.push(bundle.mrr);
                    hits1.push(bundle.hits1);
                    hits3.push(bundle.hits3);
                    hits10.push(bundle.hits10);
                }
                let mean_time = pairwise_sum(&times) / times.len() as f64;
                let (speedup, comparison) = match &full_bundle {
                    Some(full) => {
                        let truth = vec![full.mrr; mrr.len()];
                        let report = compare(&mrr, &truth, Some((full_time, mean_time)))?;
                        (report.speedup, Some(report))
                    }
                    None => (None, None),
                };
                blocks.insert(
                    strategy.as_str().to_string(),
                    StrategyReport {
                        mrr: mean_std(&mrr),
                        hits1: mean_std(&hits1),
                        hits3: mean_std(&hits3),
                        hits10: mean_std(&hits10),
                        n_queries,
                        runs: config.repetitions,
                        wall_time_s: mean_time,
                        speedup,
                        mae_vs_full: comparison.as_ref().map(|c| c.mae),
                        mape_vs_full: comparison.as_ref().and_then(|c| c.mape),
                        pearson_vs_full: comparison.as_ref().and_then(|c| c.pearson),
                        kendall_vs_full: comparison.as_ref().and_then(|c| c.kendall_tau),
                    },
                );
            }
        }
    }

    Ok(SuiteOutcome {
        report: EvaluationReport { strategies: blocks },
        full_ranks,
    })
}

fn build_plan(
    strategy: Strategy,
    store: &TripleStore,
    score_matrix: Option<&ScoreMatrix>,
    candidate_sets: Option<&CandidateSets>,
    size: SampleSize,
    seed: u64,
) -> Result<SamplePlan> {
    match strategy {
        Strategy::Random => Ok(sample_uniform(store.n_entities(), store.n_relations(), size, seed)),
        Strategy::Probabilistic => {
            let x = score_matrix.ok_or_else(|| {
                Error::consistency("probabilistic strategy requires a recommender score matrix")
            })?;
            Ok(sample_probabilistic(x, size, seed))
        }
        Strategy::Static => {
            let sets = candidate_sets
                .ok_or_else(|| Error::consistency("static strategy requires candidate sets"))?;
            Ok(sample_static(sets, size, seed))
        }
    }
}

/// Writes the per-query rank CSV: `query_id,direction,relation,true_entity,rank,pool_size`.
pub fn write_rank_csv(records: &[RankRecord], store: &TripleStore, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "query_id,direction,relation,true_entity,rank,pool_size")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.query_id,
            r.direction.as_str(),
            store.relation_label(r.relation),
            store.entity_label(r.true_entity),
            r.rank,
            r.pool_size
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{ConstantScorer, RandomScorer, Scorer};
    use crate::store::TripleStore;

    /// Fixed score table; lets tests pin exact pools and scores.
    struct TableScorer {
        scores: Vec<Vec<f64>>, // [anchor][candidate], tail direction only
    }

    impl Scorer for TableScorer {
        fn score_candidates(
            &self,
            anchor: EntityId,
            _relation: RelationId,
            candidates: &[EntityId],
            _direction: Direction,
        ) -> Vec<f64> {
            candidates.iter().map(|&c| self.scores[anchor][c]).collect()
        }
    }

    fn chain_store(n: usize) -> TripleStore {
        // e0 → e1 → … under one relation; last triple goes to test.
        let lines: Vec<String> = (0..n - 1).map(|i| format!("v{i}\tp\tv{}", i + 1)).collect();
        let train = lines[..lines.len() - 1].join("\n");
        let test = lines[lines.len() - 1].clone();
        TripleStore::parse(&train, "", &test).unwrap()
    }

    #[test]
    fn rank_counts_strictly_better_and_half_ties() {
        // Pool of 4: true scores 0.9; others 0.95, 0.8, 0.7 → rank 2.
        let store = TripleStore::parse("a\tp\tb", "", "a\tp\tc").unwrap();
        // Entities: a=0, b=1, c=2 … plus d? Only 3 entities exist here.
        let scorer = TableScorer {
            scores: vec![vec![0.95, 0.8, 0.9]; 3],
        };
        let ranks = full_filtered_ranks(&scorer, &store);
        let tail = ranks.iter().find(|r| r.direction == Direction::Tail).unwrap();
        // Pool: {a, c} (b filtered as known positive) → above: a? a scores
        // 0.95 > 0.9 → rank 2 of pool 2.
        assert_eq!(tail.pool_size, 2);
        assert_eq!(tail.rank, 2.0);
    }

    #[test]
    fn constant_scorer_ranks_at_chance() {
        let store = chain_store(8);
        let ranks = full_filtered_ranks(&ConstantScorer(0.5), &store);
        for r in &ranks {
            assert_eq!(r.rank, (r.pool_size as f64 + 1.0) / 2.0);
        }
    }

    /// Sort-based oracle: independently sorts the (score, entity) pool
    /// descending and averages the positions of the true entity's tie block.
    fn brute_force_rank<S: Scorer + ?Sized>(
        scorer: &S,
        store: &TripleStore,
        q_anchor: EntityId,
        relation: RelationId,
        direction: Direction,
        true_entity: EntityId,
    ) -> f64 {
        let excluded = store.filtered_candidates(q_anchor, relation, direction);
        let pool: Vec<EntityId> = (0..store.n_entities())
            .filter(|&e| e == true_entity || excluded.binary_search(&e).is_err())
            .collect();
        let scores = scorer.score_candidates(q_anchor, relation, &pool, direction);
        let mut order: Vec<(f64, EntityId)> = scores.iter().copied().zip(pool.iter().copied()).collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0));
        let s_true = order.iter().find(|&&(_, e)| e == true_entity).unwrap().0;
        let first = order.iter().position(|&(s, _)| s == s_true).unwrap();
        let last = order.iter().rposition(|&(s, _)| s == s_true).unwrap();
        (first + 1 + last + 1) as f64 / 2.0
    }

    #[test]
    fn full_ranks_match_sort_oracle_on_random_store() {
        let store = random_store(50, 4, 120, 9);
        let scorer = RandomScorer { seed: 4 };
        let ranks = full_filtered_ranks(&scorer, &store);
        for r in &ranks {
            let expect = brute_force_rank(&scorer, &store, r.anchor, r.relation, r.direction, r.true_entity);
            assert_eq!(r.rank, expect);
        }
    }

    #[test]
    fn full_ranks_match_sort_oracle_with_ties() {
        // Coarse quantized scores force plenty of ties.
        struct Quantized(RandomScorer);
        impl Scorer for Quantized {
            fn score_candidates(&self, a: EntityId, r: RelationId, c: &[EntityId], d: Direction) -> Vec<f64> {
                self.0
                    .score_candidates(a, r, c, d)
                    .into_iter()
                    .map(|s| (s * 4.0).floor())
                    .collect()
            }
        }
        let store = random_store(40, 3, 90, 2);
        let scorer = Quantized(RandomScorer { seed: 8 });
        let ranks = full_filtered_ranks(&scorer, &store);
        for r in &ranks {
            let expect = brute_force_rank(&scorer, &store, r.anchor, r.relation, r.direction, r.true_entity);
            assert_eq!(r.rank, expect, "{r:?}");
            assert!(r.rank >= 1.0 && r.rank <= r.pool_size as f64);
        }
    }

    pub(crate) fn random_store(n_entities: usize, n_relations: usize, n_triples: usize, seed: u64) -> TripleStore {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::StreamKind::Synthesis, 999);
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while seen.len() < n_triples {
            let h = rng.gen_range(0..n_entities);
            let r = rng.gen_range(0..n_relations);
            let t = rng.gen_range(0..n_entities);
            if !seen.insert((h, r, t)) {
                continue;
            }
            let line = format!("n{h}\trel{r}\tn{t}");
            if seen.len() % 5 == 0 && !train.is_empty() {
                test.push(line);
            } else {
                train.push(line);
            }
        }
        TripleStore::parse(&train.join("\n"), "", &test.join("\n")).unwrap()
    }

    #[test]
    fn exhaustive_sample_equals_full_bit_exactly() {
        let store = random_store(30, 3, 70, 5);
        let scorer = RandomScorer { seed: 1 };
        let full = full_filtered_ranks(&scorer, &store);
        let plan = sample_uniform(store.n_entities(), store.n_relations(), SampleSize::Count(store.n_entities()), 3);
        let sampled = sampled_ranks(&scorer, &store, &plan).unwrap();
        assert_eq!(full.len(), sampled.len());
        for (f, s) in full.iter().zip(&sampled) {
            assert_eq!(f.rank, s.rank);
            assert_eq!(f.pool_size, s.pool_size);
        }
        assert_eq!(metrics(&full).unwrap(), metrics(&sampled).unwrap());
    }

    #[test]
    fn empty_sample_gives_rank_one() {
        let store = TripleStore::parse("a\tp\tb", "", "a\tq\tc").unwrap();
        // Relation q never seen in train: its candidate sets are empty.
        let x = crate::recommend::pt(&store);
        let sets = crate::candidates::materialize(&x, &vec![1.0; 2 * store.n_relations()], &store, false);
        let plan = crate::sampling::sample_static(&sets, SampleSize::Count(5), 0);
        let scorer = RandomScorer { seed: 0 };
        let ranks = sampled_ranks(&scorer, &store, &plan).unwrap();
        for r in &ranks {
            assert_eq!(r.rank, 1.0);
            assert_eq!(r.pool_size, 1);
        }
    }

    #[test]
    fn sampled_rank_never_exceeds_full_rank_and_small_samples_are_optimistic() {
        let store = random_store(50, 2, 100, 11);
        let scorer = RandomScorer { seed: 21 };
        let full = full_filtered_ranks(&scorer, &store);

        // Per query: mean (full − sampled) over many seeded plans ≥ 0, and
        // each sampled rank is bounded by the full rank (the sampled pool is
        // a subset after filtering).
        let trials = 10_000usize;
        let mut gap_sums = vec![0.0f64; full.len()];
        for i in 0..trials {
            let plan = sample_uniform(store.n_entities(), store.n_relations(), SampleSize::Count(10), split_seed(5, i as u64));
            let sampled = sampled_ranks(&scorer, &store, &plan).unwrap();
            for (k, (f, s)) in full.iter().zip(&sampled).enumerate() {
                assert!(s.rank <= f.rank + 1e-9);
                gap_sums[k] += f.rank - s.rank;
            }
        }
        for (k, g) in gap_sums.iter().enumerate() {
            assert!(g / trials as f64 >= 0.0, "query {k}");
        }
    }

    #[test]
    fn metric_arithmetic() {
        let mk = |rank: f64| RankRecord {
            query_id: 0,
            anchor: 0,
            relation: 0,
            direction: Direction::Tail,
            true_entity: 1,
            rank,
            pool_size: 100,
        };
        let bundle = metrics(&[mk(1.0), mk(2.0), mk(4.0)]).unwrap();
        assert!((bundle.mrr - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-15);
        assert!((bundle.hits1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((bundle.hits3 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(bundle.hits10, 1.0);

        let ones = metrics(&[mk(1.0), mk(1.0)]).unwrap();
        assert_eq!(ones.mrr, 1.0);
        assert_eq!(ones.hits1, 1.0);

        assert!(metrics(&[]).is_err());
    }

    #[test]
    fn metric_bundle_invariants_on_random_ranks() {
        let store = random_store(40, 3, 80, 13);
        let bundle = metrics(&full_filtered_ranks(&RandomScorer { seed: 2 }, &store)).unwrap();
        assert!(bundle.hits1 <= bundle.hits3);
        assert!(bundle.hits3 <= bundle.hits10);
        assert!(bundle.mrr >= bundle.hits1);
        assert!(bundle.mrr <= 1.0);
    }

    #[test]
    fn compare_examples() {
        let r = compare(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], None).unwrap();
        assert_eq!(r.pearson, Some(1.0));
        assert_eq!(r.kendall_tau, Some(1.0));

        let rev = compare(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], None).unwrap();
        assert_eq!(rev.kendall_tau, Some(-1.0));

        let mae = compare(&[0.5, 0.5], &[0.3, 0.7], None).unwrap();
        assert!((mae.mae - 0.2).abs() < 1e-15);

        assert!(compare(&[1.0], &[1.0, 2.0], None).is_err());

        let constant = compare(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(constant.pearson, None);

        let with_zero = compare(&[0.5, 0.5], &[0.0, 1.0], None).unwrap();
        assert_eq!(with_zero.mape_skipped, 1);
        assert_eq!(with_zero.mape, Some(0.5));
    }

    #[test]
    fn parallel_and_single_thread_agree() {
        let store = random_store(60, 4, 150, 3);
        let scorer = RandomScorer { seed: 77 };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| full_filtered_ranks(&scorer, &store));
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| full_filtered_ranks(&scorer, &store));
        assert_eq!(single, multi);
    }

    #[test]
    fn suite_full_only() {
        let store = random_store(30, 2, 60, 4);
        let config = SuiteConfig {
            strategies: vec![StrategyChoice::Full],
            ..Default::default()
        };
        let outcome = evaluate_suite(&RandomScorer { seed: 0 }, &store, None, None, &config).unwrap();
        let full = &outcome.report.strategies["full"];
        assert_eq!(full.speedup, Some(1.0));
        assert_eq!(full.mae_vs_full, Some(0.0));
        assert!(outcome.full_ranks.is_some());
    }

    #[test]
    fn suite_exhaustive_sample_has_zero_mae() {
        let store = random_store(25, 2, 50, 6);
        let config = SuiteConfig {
            strategies: vec![StrategyChoice::Full, StrategyChoice::Sampled(Strategy::Random)],
            sample_size: SampleSize::Count(25),
            repetitions: 3,
            ..Default::default()
        };
        let outcome = evaluate_suite(&RandomScorer { seed: 1 }, &store, None, None, &config).unwrap();
        let random = &outcome.report.strategies["random"];
        assert_eq!(random.mae_vs_full, Some(0.0));
        assert_eq!(random.mrr.std, 0.0);
    }

    #[test]
    fn suite_requires_backing_structures() {
        let store = random_store(20, 2, 40, 8);
        let config = SuiteConfig {
            strategies: vec![StrategyChoice::Sampled(Strategy::Static)],
            ..Default::default()
        };
        assert!(evaluate_suite(&RandomScorer { seed: 0 }, &store, None, None, &config).is_err());
    }

    #[test]
    fn uniform_estimate_monotone_toward_full_for_random_scorer() {
        // Mean estimated MRR is non-increasing in the sample size and exact
        // at n_s = |E| (within half a std for adjacent noise).
        let store = random_store(60, 3, 150, 10);
        let scorer = RandomScorer { seed: 3 };
        let full_mrr = metrics(&full_filtered_ranks(&scorer, &store)).unwrap().mrr;

        let mut last_mean = f64::INFINITY;
        let mut last_std = 0.0f64;
        for (i, fraction) in [0.01, 0.05, 0.1, 0.25, 1.0].into_iter().enumerate() {
            let mut estimates = Vec::new();
            for rep in 0..5u64 {
                let plan = sample_uniform(
                    store.n_entities(),
                    store.n_relations(),
                    SampleSize::Fraction(fraction),
                    split_seed(100 + i as u64, rep),
                );
                let est = metrics(&sampled_ranks(&scorer, &store, &plan).unwrap()).unwrap().mrr;
                estimates.push(est);
            }
            let stats = mean_std(&estimates);
            assert!(
                stats.mean <= last_mean + last_std.max(stats.std).max(1e-12),
                "fraction {fraction}: mean {} after {last_mean}",
                stats.mean
            );
            assert!(stats.mean >= full_mrr - 1e-12);
            last_mean = stats.mean;
            last_std = stats.std;
        }
        assert!((last_mean - full_mrr).abs() < 1e-12);
    }
}
