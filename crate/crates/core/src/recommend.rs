//! Relation recommenders: score matrices rating every entity's fitness as
//! head (domain) or tail (range) of every relation, plus easy-negative
//! mining over those scores.
//!
//! All recommenders emit an |E| × 2|R| matrix where column `r` is the domain
//! of relation `r` and column `r + |R|` its range. Entities with score zero
//! in a column are "easy negatives" for that slot: candidates that can be
//! excluded from ranking with high confidence.

use std::collections::HashSet;

use crate::error::Result;
use crate::sparse::SparseMatrix;
use crate::store::{Direction, EntityId, RelationId, Split, TripleStore, TypeAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lwd,
    LwdT,
    Dbh,
    DbhT,
    OntoSim,
    Pt,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lwd => "lwd",
            Method::LwdT => "lwd-t",
            Method::Dbh => "dbh",
            Method::DbhT => "dbh-t",
            Method::OntoSim => "ontosim",
            Method::Pt => "pt",
        }
    }

    pub fn requires_types(self) -> bool {
        matches!(self, Method::LwdT | Method::DbhT | Method::OntoSim)
    }
}

/// How the type-propagating degree heuristic credits a seen entity to its
/// type peers: one unit per distinct seen entity, or one per occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypeCredit {
    #[default]
    DistinctEntities,
    Occurrences,
}

/// Non-negative |E| × 2|R| recommender scores tagged with their method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    scores: SparseMatrix,
    method: Method,
}

impl ScoreMatrix {
    pub fn new(scores: SparseMatrix, method: Method) -> ScoreMatrix {
        ScoreMatrix { scores, method }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.scores
    }

    pub fn n_entities(&self) -> usize {
        self.scores.n_rows()
    }

    pub fn n_relations(&self) -> usize {
        self.scores.n_cols() / 2
    }

    pub fn n_columns(&self) -> usize {
        self.scores.n_cols()
    }

    /// Column holding scores for the predicted slot: the domain column when
    /// predicting heads, the range column when predicting tails.
    pub fn column_index(&self, relation: RelationId, direction: Direction) -> usize {
        match direction {
            Direction::Head => relation,
            Direction::Tail => relation + self.n_relations(),
        }
    }

    pub fn score(&self, entity: EntityId, relation: RelationId, direction: Direction) -> f64 {
        self.scores.get(entity, self.column_index(relation, direction))
    }

    /// Nonzeros of the (relation, direction) column, sorted by entity id.
    pub fn column(&self, relation: RelationId, direction: Direction) -> Vec<(EntityId, f64)> {
        self.scores
            .column(self.column_index(relation, direction))
            .expect("column index in range")
    }
}

/// Builds the binary seen-slot matrix: `B[e, r] = 1` iff `e` was seen as a
/// head of `r` in train, `B[e, r + |R|] = 1` iff seen as a tail. When types
/// are supplied, |T| extra columns mark type memberships.
pub fn build_b(store: &TripleStore, types: Option<&TypeAssignment>) -> SparseMatrix {
    let n_relations = store.n_relations();
    let n_type_cols = types.map_or(0, |t| t.n_types());
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..n_relations {
        for &e in store.seen_domain(r) {
            pairs.push((e, r, 1.0));
        }
        for &e in store.seen_range(r) {
            pairs.push((e, r + n_relations, 1.0));
        }
    }
    if let Some(types) = types {
        for e in 0..store.n_entities() {
            for &t in types.entity_types(e) {
                pairs.push((e, 2 * n_relations + t, 1.0));
            }
        }
    }
    SparseMatrix::from_pairs(store.n_entities(), 2 * n_relations + n_type_cols, pairs)
        .expect("indices in range by construction")
}

/// Aggregated association-confidence recommender: `W = BᵀB` row-normalized,
/// `X = B·W`. With types, the type columns participate in `B` and `W` but
/// only the 2|R| domain/range columns of `X` are kept.
pub fn lwd(store: &TripleStore, types: Option<&TypeAssignment>) -> Result<ScoreMatrix> {
    let b = build_b(store, types);
    let w = b.transpose().spmm(&b)?.row_normalize()?;
    let x = b.spmm(&w)?;
    let n_cols = 2 * store.n_relations();
    let x = if x.n_cols() == n_cols {
        x
    } else {
        truncate_columns(&x, n_cols)
    };
    let method = if types.is_some() { Method::LwdT } else { Method::Lwd };
    Ok(ScoreMatrix::new(x, method))
}

fn truncate_columns(m: &SparseMatrix, n_cols: usize) -> SparseMatrix {
    let mut pairs = Vec::new();
    for r in 0..m.n_rows() {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c < n_cols {
                pairs.push((r, c, v));
            }
        }
    }
    SparseMatrix::from_pairs(m.n_rows(), n_cols, pairs).expect("in range")
}

/// Degree-based heuristic: each entity's score in a column is its occurrence
/// count in that slot over the train split.
pub fn dbh(store: &TripleStore) -> ScoreMatrix {
    ScoreMatrix::new(occurrence_counts(store), Method::Dbh)
}

fn occurrence_counts(store: &TripleStore) -> SparseMatrix {
    let n_relations = store.n_relations();
    let pairs = store.split(Split::Train).iter().flat_map(|t| {
        [
            (t.head, t.relation, 1.0),
            (t.tail, t.relation + n_relations, 1.0),
        ]
    });
    SparseMatrix::from_pairs(store.n_entities(), 2 * n_relations, pairs).expect("in range")
}

/// Type-propagating degree heuristic: when a typed entity is seen in a slot,
/// every entity sharing one of its types gains credit in that column (one
/// unit per distinct seen entity by default, per occurrence with
/// [`TypeCredit::Occurrences`]). Untyped entities keep their own occurrence
/// counts, since nothing propagates to them.
pub fn dbh_t(store: &TripleStore, types: &TypeAssignment, credit: TypeCredit) -> Result<ScoreMatrix> {
    let n_entities = store.n_entities();
    let n_relations = store.n_relations();

    let membership = SparseMatrix::from_pairs(
        n_entities,
        types.n_types(),
        (0..n_entities).flat_map(|e| types.entity_types(e).iter().map(move |&t| (e, t, 1.0))),
    )?;
    let seen = match credit {
        TypeCredit::DistinctEntities => build_b(store, None),
        TypeCredit::Occurrences => occurrence_counts(store),
    };
    // Per (type, column) credit, then spread back over type members.
    let credit_per_type = membership.transpose().spmm(&seen)?;
    let propagated = membership.spmm(&credit_per_type)?;

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for e in 0..n_entities {
        let (cols, vals) = propagated.row(e);
        pairs.extend(cols.iter().zip(vals).map(|(&c, &v)| (e, c, v)));
    }
    let own = occurrence_counts(store);
    for e in 0..n_entities {
        if types.entity_types(e).is_empty() {
            let (cols, vals) = own.row(e);
            pairs.extend(cols.iter().zip(vals).map(|(&c, &v)| (e, c, v)));
        }
    }
    Ok(ScoreMatrix::new(
        SparseMatrix::from_pairs(n_entities, 2 * n_relations, pairs)?,
        Method::DbhT,
    ))
}

/// Binary type-propagation heuristic: an entity belongs to a domain/range
/// iff it shares a type with some entity seen there; directly seen entities
/// are always included.
pub fn ontosim(store: &TripleStore, types: &TypeAssignment) -> Result<ScoreMatrix> {
    let n_entities = store.n_entities();
    let n_relations = store.n_relations();
    let members = types.members_by_type(n_entities);

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..n_relations {
        for (direction_col, seen) in [(r, store.seen_domain(r)), (r + n_relations, store.seen_range(r))] {
            let mut included: HashSet<EntityId> = seen.iter().copied().collect();
            for &e in seen {
                for &t in types.entity_types(e) {
                    included.extend(members[t].iter().copied());
                }
            }
            pairs.extend(included.into_iter().map(|e| (e, direction_col, 1.0)));
        }
    }
    Ok(ScoreMatrix::new(
        SparseMatrix::from_pairs(n_entities, 2 * n_relations, pairs)?,
        Method::OntoSim,
    ))
}

/// PseudoTyped baseline: binary indicator of the seen head/tail sets.
pub fn pt(store: &TripleStore) -> ScoreMatrix {
    let n_relations = store.n_relations();
    let pairs = (0..n_relations).flat_map(|r| {
        let domains = store.seen_domain(r).iter().map(move |&e| (e, r, 1.0));
        let ranges = store
            .seen_range(r)
            .iter()
            .map(move |&e| (e, r + n_relations, 1.0));
        domains.chain(ranges)
    });
    ScoreMatrix::new(
        SparseMatrix::from_pairs(store.n_entities(), 2 * n_relations, pairs).expect("in range"),
        Method::Pt,
    )
}

/// Builds the recommender selected by `method`, validating type availability.
pub fn build(
    store: &TripleStore,
    method: Method,
    types: Option<&TypeAssignment>,
    credit: TypeCredit,
) -> Result<ScoreMatrix> {
    if method.requires_types() && types.is_none() {
        return Err(crate::error::Error::consistency(format!(
            "method {} requires a type assignment",
            method.as_str()
        )));
    }
    match method {
        Method::Lwd => lwd(store, None),
        Method::LwdT => lwd(store, types),
        Method::Dbh => Ok(dbh(store)),
        Method::DbhT => dbh_t(store, types.expect("checked"), credit),
        Method::OntoSim => ontosim(store, types.expect("checked")),
        Method::Pt => Ok(pt(store)),
    }
}

/// A test triple whose head and/or tail scored zero in its column, i.e. a
/// true statement a zero-score exclusion rule would have discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FalseEasyNegative {
    pub triple: crate::store::Triple,
    pub head_zero: bool,
    pub tail_zero: bool,
}

/// Census of zero-score cells and of the test triples contradicting them.
#[derive(Debug, Clone)]
pub struct EasyNegativeReport {
    pub method: Method,
    /// Zero-score cells per column, length 2|R|.
    pub per_column: Vec<usize>,
    pub total_easy_negatives: usize,
    pub total_cells: usize,
    /// total_easy_negatives / total_cells.
    pub fraction: f64,
    pub false_easy_negatives: Vec<FalseEasyNegative>,
}

/// Counts zero-score (entity, column) cells of `x` and lists every test
/// triple of `store` whose head or tail sits on a zero.
pub fn mine_easy_negatives(x: &ScoreMatrix, store: &TripleStore) -> EasyNegativeReport {
    let n_entities = store.n_entities();
    let n_columns = x.n_columns();
    let mut nonzero_per_column = vec![0usize; n_columns];
    for e in 0..n_entities {
        let (cols, _) = x.matrix().row(e);
        for &c in cols {
            nonzero_per_column[c] += 1;
        }
    }
    let per_column: Vec<usize> = nonzero_per_column.iter().map(|&nz| n_entities - nz).collect();
    let total_easy_negatives: usize = per_column.iter().sum();
    let total_cells = n_entities * n_columns;

    let mut false_easy_negatives = Vec::new();
    for &triple in store.split(Split::Test) {
        let head_zero = x.score(triple.head, triple.relation, Direction::Head) == 0.0;
        let tail_zero = x.score(triple.tail, triple.relation, Direction::Tail) == 0.0;
        if head_zero || tail_zero {
            false_easy_negatives.push(FalseEasyNegative {
                triple,
                head_zero,
                tail_zero,
            });
        }
    }

    EasyNegativeReport {
        method: x.method(),
        per_column,
        total_easy_negatives,
        total_cells,
        fraction: total_easy_negatives as f64 / total_cells.max(1) as f64,
        false_easy_negatives,
    }
}
