//! Discretizing score matrices into narrow per-relation head/tail candidate
//! sets, and the candidate-recall / reduction-rate trade-off metrics.
//!
//! Column scores are first normalized to [0, 1] by their column maximum.
//! A per-column threshold is then picked over the finite set of distinct
//! normalized values (recall and reduction only change there), minimizing
//! the l2-distance to the ideal point (CR, RR) = (1, 1).

use std::collections::HashSet;

use crate::recommend::{Method, ScoreMatrix};
use crate::store::{Direction, EntityId, RelationId, Split, TripleStore};

/// Sentinel threshold strictly above every normalized score: selects the
/// empty set.
pub const EMPTY_SET_THRESHOLD: f64 = 2.0;

/// Per (relation, direction) entity sets cut from a score matrix.
#[derive(Debug, Clone)]
pub struct CandidateSets {
    sets: Vec<Vec<EntityId>>,
    thresholds: Vec<f64>,
    origin: Method,
    includes_seen: bool,
    n_relations: usize,
    n_entities: usize,
}

impl CandidateSets {
    pub fn origin(&self) -> Method {
        self.origin
    }

    pub fn includes_seen(&self) -> bool {
        self.includes_seen
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    fn column_index(&self, relation: RelationId, direction: Direction) -> usize {
        match direction {
            Direction::Head => relation,
            Direction::Tail => relation + self.n_relations,
        }
    }

    /// Sorted candidate entities for the predicted slot of `relation`.
    pub fn set(&self, relation: RelationId, direction: Direction) -> &[EntityId] {
        &self.sets[self.column_index(relation, direction)]
    }

    pub fn contains(&self, relation: RelationId, direction: Direction, entity: EntityId) -> bool {
        self.set(relation, direction).binary_search(&entity).is_ok()
    }

    pub fn columns(&self) -> &[Vec<EntityId>] {
        &self.sets
    }
}

/// Candidate recall of the sets on the test split.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CrRrPoint {
    pub cr: f64,
    pub rr: f64,
    pub mode: RecallMode,
}

/// `Test` measures all distinct test pairs; `Unseen` only those absent from
/// train and valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    Test,
    Unseen,
}

/// Distinct positive entities per column for threshold optimization, taken
/// from the validation split when present and from train otherwise (keeps
/// the test split out of the tuning loop).
pub fn threshold_eval_pairs(store: &TripleStore) -> Vec<Vec<EntityId>> {
    let split = if store.split(Split::Valid).is_empty() {
        Split::Train
    } else {
        Split::Valid
    };
    eval_pairs_from_split(store, split)
}

pub fn eval_pairs_from_split(store: &TripleStore, split: Split) -> Vec<Vec<EntityId>> {
    let n_relations = store.n_relations();
    let mut pairs: Vec<HashSet<EntityId>> = vec![HashSet::new(); 2 * n_relations];
    for t in store.split(split) {
        pairs[t.relation].insert(t.head);
        pairs[t.relation + n_relations].insert(t.tail);
    }
    pairs
        .into_iter()
        .map(|s| {
            let mut v: Vec<EntityId> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Chooses one threshold per column minimizing
/// `sqrt((1 − CR)² + (1 − RR)²)` over all distinct normalized scores of the
/// column plus the empty-set sentinel. Ties break toward the higher
/// threshold (the smaller set). Columns without positives get the sentinel.
pub fn optimize_thresholds(x: &ScoreMatrix, eval_pairs: &[Vec<EntityId>]) -> Vec<f64> {
    assert_eq!(eval_pairs.len(), x.n_columns(), "one positive set per column");
    let n_entities = x.n_entities() as f64;
    let mut thresholds = Vec::with_capacity(x.n_columns());

    for col in 0..x.n_columns() {
        let positives = &eval_pairs[col];
        if positives.is_empty() {
            thresholds.push(EMPTY_SET_THRESHOLD);
            continue;
        }
        let entries = normalized_column(x, col);
        if entries.is_empty() {
            thresholds.push(EMPTY_SET_THRESHOLD);
            continue;
        }
        // Walk thresholds in descending order so the set only grows and the
        // first (highest) threshold wins distance ties.
        let mut by_score = entries;
        by_score.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let positive_set: HashSet<EntityId> = positives.iter().copied().collect();
        let n_positives = positives.len() as f64;

        let mut best_threshold = EMPTY_SET_THRESHOLD;
        let mut best_distance = distance(0.0, 1.0);
        let mut set_size = 0usize;
        let mut hits = 0usize;
        let mut i = 0;
        while i < by_score.len() {
            let t = by_score[i].1;
            while i < by_score.len() && by_score[i].1 == t {
                set_size += 1;
                if positive_set.contains(&by_score[i].0) {
                    hits += 1;
                }
                i += 1;
            }
            let cr = hits as f64 / n_positives;
            let rr = 1.0 - set_size as f64 / n_entities;
            let d = distance(cr, rr);
            if d < best_distance {
                best_distance = d;
                best_threshold = t;
            }
        }
        thresholds.push(best_threshold);
    }
    thresholds
}

fn distance(cr: f64, rr: f64) -> f64 {
    ((1.0 - cr).powi(2) + (1.0 - rr).powi(2)).sqrt()
}

/// Column nonzeros normalized by the column maximum (empty for zero columns).
fn normalized_column(x: &ScoreMatrix, col: usize) -> Vec<(EntityId, f64)> {
    let max = x.matrix().column_max(col);
    if max <= 0.0 {
        return Vec::new();
    }
    x.matrix()
        .column(col)
        .expect("column in range")
        .into_iter()
        .map(|(e, v)| (e, v / max))
        .collect()
}

/// Cuts candidate sets at the given per-column thresholds, optionally
/// unioning in the train-seen head/tail sets.
pub fn materialize(
    x: &ScoreMatrix,
    thresholds: &[f64],
    store: &TripleStore,
    include_seen: bool,
) -> CandidateSets {
    assert_eq!(thresholds.len(), x.n_columns(), "one threshold per column");
    let n_relations = x.n_relations();
    let mut sets: Vec<Vec<EntityId>> = Vec::with_capacity(x.n_columns());
    for col in 0..x.n_columns() {
        let t = thresholds[col];
        let mut set: Vec<EntityId> = normalized_column(x, col)
            .into_iter()
            .filter(|&(_, v)| v >= t)
            .map(|(e, _)| e)
            .collect();
        if include_seen {
            let relation = col % n_relations;
            let seen = if col < n_relations {
                store.seen_domain(relation)
            } else {
                store.seen_range(relation)
            };
            set.extend_from_slice(seen);
        }
        set.sort_unstable();
        set.dedup();
        sets.push(set);
    }
    CandidateSets {
        sets,
        thresholds: thresholds.to_vec(),
        origin: x.method(),
        includes_seen: include_seen,
        n_relations,
        n_entities: x.n_entities(),
    }
}

/// Fraction of distinct test (h, r) pairs whose head is in the domain set
/// plus (r, t) pairs whose tail is in the range set. `Unseen` mode restricts
/// to pairs that never occur in train or valid.
pub fn candidate_recall(sets: &CandidateSets, store: &TripleStore, mode: RecallMode) -> CrRrPoint {
    let mut head_pairs: HashSet<(EntityId, RelationId)> = HashSet::new();
    let mut tail_pairs: HashSet<(RelationId, EntityId)> = HashSet::new();
    for t in store.split(Split::Test) {
        head_pairs.insert((t.head, t.relation));
        tail_pairs.insert((t.relation, t.tail));
    }
    if mode == RecallMode::Unseen {
        for split in [Split::Train, Split::Valid] {
            for t in store.split(split) {
                head_pairs.remove(&(t.head, t.relation));
                tail_pairs.remove(&(t.relation, t.tail));
            }
        }
    }
    let total = head_pairs.len() + tail_pairs.len();
    let mut hits = 0usize;
    for &(h, r) in &head_pairs {
        if sets.contains(r, Direction::Head, h) {
            hits += 1;
        }
    }
    for &(r, t) in &tail_pairs {
        if sets.contains(r, Direction::Tail, t) {
            hits += 1;
        }
    }
    let cr = if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    };
    CrRrPoint {
        cr,
        rr: reduction_rate(sets),
        mode,
    }
}

/// `1 − mean over columns of |set| / |E|`: the average fraction of the
/// entity space the sets exclude.
pub fn reduction_rate(sets: &CandidateSets) -> f64 {
    let n_entities = sets.n_entities() as f64;
    if sets.columns().is_empty() || n_entities == 0.0 {
        return 0.0;
    }
    let mean_fill: f64 = sets
        .columns()
        .iter()
        .map(|s| s.len() as f64 / n_entities)
        .sum::<f64>()
        / sets.columns().len() as f64;
    1.0 - mean_fill
}
