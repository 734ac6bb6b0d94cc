//! Fast, accurate estimation of knowledge-graph link-prediction metrics.
//!
//! Full filtered ranking scores every entity for every test query, which is
//! exact but quadratic in graph size. This crate implements the alternative:
//! relation recommenders score each entity's fitness as head or tail of each
//! relation, candidate pools are sampled once per (relation, direction)
//! instead of once per query, and the filtered metrics are estimated from
//! ranks within those pools. The exact oracle is kept alongside the
//! estimators so their error can always be measured.
//!
//! Pipeline: [`store`] ingests triples → [`recommend`] builds score matrices
//! → [`candidates`] discretizes them into head/tail sets → [`sampling`]
//! draws negative pools → [`eval`] ranks with any [`scorer::Scorer`] and
//! compares estimators against the full ranking. [`theory`] carries the
//! closed-form analysis of sampled-rank optimism, [`synth`] generates typed
//! benchmark graphs.

pub mod candidates;
pub mod error;
pub mod eval;
pub mod recommend;
pub mod rng;
pub mod sampling;
pub mod scorer;
pub mod sparse;
pub mod store;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use eval::{
    compare, evaluate_suite, full_filtered_ranks, metrics, sampled_ranks, ComparisonReport,
    EvaluationReport, MetricBundle, RankRecord, StrategyChoice, SuiteConfig,
};
pub use recommend::{mine_easy_negatives, EasyNegativeReport, Method, ScoreMatrix, TypeCredit};
pub use sampling::{
    ledger_from_shape, sample_probabilistic, sample_static, sample_uniform, sampling_ledger,
    SamplePlan, SampleSize, SamplingLedger, Strategy,
};
pub use scorer::{score, train, EmbeddingModel, ModelKind, Scorer, TrainConfig};
pub use sparse::SparseMatrix;
pub use store::{Direction, EntityId, RelationId, Split, SplitMask, Triple, TripleStore, TypeAssignment};
pub use synth::{generate, SynthConfig};
pub use theory::{expected_demotions_uniform, expected_gain, monte_carlo_gain, RankingScenario};
