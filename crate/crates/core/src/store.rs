//! Triple ingestion, vocabularies, split-aware indexes and the
//! filtered-ranking positives index.
//!
//! Input is tab-separated `head<TAB>relation<TAB>tail` text, one triple per
//! line, optionally gzip-compressed (detected by magic bytes). Labels are
//! interned into dense contiguous ids in first-seen order across
//! train → valid → test, which makes every downstream seed-dependent
//! computation reproducible for a given file order.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

pub type EntityId = usize;
pub type RelationId = usize;
pub type TypeId = usize;

/// A (head, relation, tail) statement with interned ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Which slot of a query is being predicted. `Tail` is a `(h, r, ?)` query,
/// `Head` is `(?, r, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Head,
    Tail,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Head, Direction::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Head => "head",
            Direction::Tail => "tail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    fn bit(self) -> u8 {
        match self {
            Split::Train => 1,
            Split::Valid => 2,
            Split::Test => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Which splits the filtered-candidates lookup draws known positives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMask(u8);

impl SplitMask {
    pub const ALL: SplitMask = SplitMask(1 | 2 | 4);
    pub const TRAIN_TEST: SplitMask = SplitMask(1 | 4);
    pub const TRAIN_VALID: SplitMask = SplitMask(1 | 2);

    pub fn contains(self, split_bits: u8) -> bool {
        self.0 & split_bits != 0
    }
}

/// Label ↔ dense-id bimap.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Indexed train/valid/test triples with vocabularies, per-relation seen
/// head/tail sets (from train only) and the known-positives index spanning
/// all splits.
#[derive(Debug, Clone)]
pub struct TripleStore {
    entities: Vocabulary,
    relations: Vocabulary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    // (anchor, relation) → sorted (completion entity, split bits). `tails`
    // answers (h, r, ?), `heads` answers (?, r, t).
    filter_tails: HashMap<(EntityId, RelationId), Vec<(EntityId, u8)>>,
    filter_heads: HashMap<(EntityId, RelationId), Vec<(EntityId, u8)>>,
    seen_domains: Vec<Vec<EntityId>>,
    seen_ranges: Vec<Vec<EntityId>>,
}

impl TripleStore {
    /// Parses the three splits from TSV text. Valid and test may be empty;
    /// an empty train split is an error.
    pub fn parse(train_text: &str, valid_text: &str, test_text: &str) -> Result<TripleStore> {
        let mut entities = Vocabulary::default();
        let mut relations = Vocabulary::default();

        let mut parse_split = |text: &str, split: Split| -> Result<Vec<Triple>> {
            let mut triples = Vec::new();
            let mut seen: HashSet<Triple> = HashSet::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.strip_suffix('\r').unwrap_or(raw);
                if line.is_empty() {
                    continue;
                }
                let mut fields = line.split('\t');
                let (head, relation, tail) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                    (Some(h), Some(r), Some(t), None) => (h, r, t),
                    _ => {
                        return Err(Error::parse(
                            lineno + 1,
                            format!("{} split: expected head<TAB>relation<TAB>tail, got {:?}", split.name(), line),
                        ))
                    }
                };
                let triple = Triple {
                    head: entities.intern(head),
                    relation: relations.intern(relation),
                    tail: entities.intern(tail),
                };
                if !seen.insert(triple) {
                    log::warn!(
                        "{} split line {}: duplicate triple {:?} dropped",
                        split.name(),
                        lineno + 1,
                        (head, relation, tail)
                    );
                    continue;
                }
                triples.push(triple);
            }
            Ok(triples)
        };

        let train = parse_split(train_text, Split::Train)?;
        let valid = parse_split(valid_text, Split::Valid)?;
        let test = parse_split(test_text, Split::Test)?;
        if train.is_empty() {
            return Err(Error::consistency("train split is empty"));
        }
        Ok(Self::from_split_triples(entities, relations, train, valid, test))
    }

    /// Builds a store from already-interned triples (used by the synthetic
    /// generator and tests).
    pub(crate) fn from_split_triples(
        entities: Vocabulary,
        relations: Vocabulary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> TripleStore {
        let n_relations = relations.len();
        let mut filter_tails: HashMap<(EntityId, RelationId), Vec<(EntityId, u8)>> = HashMap::new();
        let mut filter_heads: HashMap<(EntityId, RelationId), Vec<(EntityId, u8)>> = HashMap::new();
        let mut seen_domains: Vec<HashSet<EntityId>> = vec![HashSet::new(); n_relations];
        let mut seen_ranges: Vec<HashSet<EntityId>> = vec![HashSet::new(); n_relations];

        for (split, triples) in [(Split::Train, &train), (Split::Valid, &valid), (Split::Test, &test)] {
            for t in triples {
                upsert(&mut filter_tails, (t.head, t.relation), t.tail, split.bit());
                upsert(&mut filter_heads, (t.tail, t.relation), t.head, split.bit());
                if split == Split::Train {
                    seen_domains[t.relation].insert(t.head);
                    seen_ranges[t.relation].insert(t.tail);
                }
            }
        }
        for entries in filter_tails.values_mut().chain(filter_heads.values_mut()) {
            entries.sort_unstable_by_key(|&(e, _)| e);
        }

        let finish = |sets: Vec<HashSet<EntityId>>| -> Vec<Vec<EntityId>> {
            sets.into_iter()
                .map(|s| {
                    let mut v: Vec<EntityId> = s.into_iter().collect();
                    v.sort_unstable();
                    v
                })
                .collect()
        };

        TripleStore {
            entities,
            relations,
            train,
            valid,
            test,
            filter_tails,
            filter_heads,
            seen_domains: finish(seen_domains),
            seen_ranges: finish(seen_ranges),
        }
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> &Vocabulary {
        &self.entities
    }

    pub fn relations(&self) -> &Vocabulary {
        &self.relations
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        self.entities.label(id)
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        self.relations.label(id)
    }

    /// Head entities of `relation` seen in train (𝒟ᵣ), sorted.
    pub fn seen_domain(&self, relation: RelationId) -> &[EntityId] {
        &self.seen_domains[relation]
    }

    /// Tail entities of `relation` seen in train, sorted.
    pub fn seen_range(&self, relation: RelationId) -> &[EntityId] {
        &self.seen_ranges[relation]
    }

    /// All entities known (across the splits selected by `mask`) to complete
    /// the query `(anchor, relation, <direction>)`; sorted. Ranking code
    /// removes these from candidate pools so that other true answers do not
    /// demote the one under evaluation.
    pub fn filtered_candidates_scoped(
        &self,
        anchor: EntityId,
        relation: RelationId,
        direction: Direction,
        mask: SplitMask,
    ) -> Vec<EntityId> {
        let index = match direction {
            Direction::Tail => &self.filter_tails,
            Direction::Head => &self.filter_heads,
        };
        match index.get(&(anchor, relation)) {
            Some(entries) => entries
                .iter()
                .filter(|&&(_, bits)| mask.contains(bits))
                .map(|&(e, _)| e)
                .collect(),
            None => Vec::new(),
        }
    }

    /// `filtered_candidates_scoped` over all splits (the usual filtered
    /// evaluation convention).
    pub fn filtered_candidates(
        &self,
        anchor: EntityId,
        relation: RelationId,
        direction: Direction,
    ) -> Vec<EntityId> {
        self.filtered_candidates_scoped(anchor, relation, direction, SplitMask::ALL)
    }

    /// Number of distinct (h, r) pairs plus distinct (r, t) pairs in `split`.
    pub fn distinct_pairs(&self, split: Split) -> usize {
        let triples = self.split(split);
        let head_pairs: HashSet<(EntityId, RelationId)> =
            triples.iter().map(|t| (t.head, t.relation)).collect();
        let tail_pairs: HashSet<(RelationId, EntityId)> =
            triples.iter().map(|t| (t.relation, t.tail)).collect();
        head_pairs.len() + tail_pairs.len()
    }

    /// Relations that occur in `split`, sorted.
    pub fn relations_in_split(&self, split: Split) -> Vec<RelationId> {
        let set: HashSet<RelationId> = self.split(split).iter().map(|t| t.relation).collect();
        let mut v: Vec<RelationId> = set.into_iter().collect();
        v.sort_unstable();
        v
    }
}

fn upsert(
    index: &mut HashMap<(EntityId, RelationId), Vec<(EntityId, u8)>>,
    key: (EntityId, RelationId),
    entity: EntityId,
    bit: u8,
) {
    let entries = index.entry(key).or_default();
    match entries.iter_mut().find(|(e, _)| *e == entity) {
        Some((_, bits)) => *bits |= bit,
        None => entries.push((entity, bit)),
    }
}

/// Entity → type memberships, with a type vocabulary of its own.
#[derive(Debug, Clone)]
pub struct TypeAssignment {
    types: Vocabulary,
    memberships: Vec<Vec<TypeId>>,
}

impl TypeAssignment {
    /// Parses `entity<TAB>type` lines. Every entity must exist in the store.
    pub fn parse(text: &str, store: &TripleStore) -> Result<TypeAssignment> {
        let mut types = Vocabulary::default();
        let mut memberships: Vec<Vec<TypeId>> = vec![Vec::new(); store.n_entities()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (entity, ty) = match (fields.next(), fields.next(), fields.next()) {
                (Some(e), Some(t), None) => (e, t),
                _ => {
                    return Err(Error::parse(
                        lineno + 1,
                        format!("type file: expected entity<TAB>type, got {:?}", line),
                    ))
                }
            };
            let entity_id = store.entities().id(entity).ok_or_else(|| {
                Error::parse(lineno + 1, format!("type file: unknown entity {:?}", entity))
            })?;
            let type_id = types.intern(ty);
            if !memberships[entity_id].contains(&type_id) {
                memberships[entity_id].push(type_id);
            }
        }
        for m in &mut memberships {
            m.sort_unstable();
        }
        Ok(TypeAssignment { types, memberships })
    }

    pub(crate) fn from_parts(types: Vocabulary, mut memberships: Vec<Vec<TypeId>>) -> TypeAssignment {
        for m in &mut memberships {
            m.sort_unstable();
            m.dedup();
        }
        TypeAssignment { types, memberships }
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> &Vocabulary {
        &self.types
    }

    /// Sorted type ids of `entity` (empty when untyped).
    pub fn entity_types(&self, entity: EntityId) -> &[TypeId] {
        &self.memberships[entity]
    }

    /// Sorted entity ids carrying each type.
    pub fn members_by_type(&self, n_entities: usize) -> Vec<Vec<EntityId>> {
        let mut members: Vec<Vec<EntityId>> = vec![Vec::new(); self.n_types()];
        for entity in 0..n_entities.min(self.memberships.len()) {
            for &t in &self.memberships[entity] {
                members[t].push(entity);
            }
        }
        members
    }
}

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Reads a whole file to a string, transparently gunzipping when the gzip
/// magic bytes are present.
pub fn read_text_auto(path: impl AsRef<Path>) -> Result<String> {
    let bytes = std::fs::read(path.as_ref())?;
    let text = if bytes.len() >= 2 && bytes[..2] == GZIP_MAGIC {
        let mut decoder = flate2::read::GzDecoder::new(&bytes[..]);
        let mut out = String::new();
        decoder.read_to_string(&mut out)?;
        out
    } else {
        String::from_utf8(bytes).map_err(|e| Error::parse(0, format!("invalid UTF-8: {e}")))?
    };
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) const TOY_TRAIN: &str = "e0\tr0\te2\ne1\tr0\te2\ne0\tr1\te1";
    pub(crate) const TOY_TEST: &str = "e3\tr0\te2";

    pub(crate) fn toy_store() -> TripleStore {
        TripleStore::parse(TOY_TRAIN, "", TOY_TEST).unwrap()
    }

    fn eid(store: &TripleStore, label: &str) -> EntityId {
        store.entities().id(label).unwrap()
    }

    fn rid(store: &TripleStore, label: &str) -> RelationId {
        store.relations().id(label).unwrap()
    }

    fn labels(store: &TripleStore, ids: &[EntityId]) -> Vec<String> {
        let mut v: Vec<String> = ids.iter().map(|&e| store.entity_label(e).to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn toy_parse_builds_vocabularies_and_seen_sets() {
        let store = toy_store();
        assert_eq!(store.n_entities(), 4);
        assert_eq!(store.n_relations(), 2);
        let r0 = rid(&store, "r0");
        assert_eq!(labels(&store, store.seen_domain(r0)), ["e0", "e1"]);
        assert_eq!(labels(&store, store.seen_range(r0)), ["e2"]);
    }

    #[test]
    fn single_triple_store() {
        let store = TripleStore::parse("a\tp\tb", "", "").unwrap();
        assert_eq!(store.n_entities(), 2);
        assert_eq!(store.n_relations(), 1);
        let a = eid(&store, "a");
        let p = rid(&store, "p");
        assert_eq!(
            labels(&store, &store.filtered_candidates(a, p, Direction::Tail)),
            ["b"]
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = TripleStore::parse("a\tp", "", "").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_train_is_an_error() {
        assert!(TripleStore::parse("", "", "a\tp\tb").is_err());
    }

    #[test]
    fn filtered_candidates_cover_all_splits() {
        let store = toy_store();
        let e0 = eid(&store, "e0");
        let e2 = eid(&store, "e2");
        let e3 = eid(&store, "e3");
        let r0 = rid(&store, "r0");
        let r1 = rid(&store, "r1");

        assert_eq!(
            labels(&store, &store.filtered_candidates(e0, r0, Direction::Tail)),
            ["e2"]
        );
        assert!(store.filtered_candidates(e3, r1, Direction::Tail).is_empty());
        // Head query (?, r0, e2): test triple included.
        assert_eq!(
            labels(&store, &store.filtered_candidates(e2, r0, Direction::Head)),
            ["e0", "e1", "e3"]
        );
        // Restricting the scope drops the test triple's head.
        assert_eq!(
            labels(
                &store,
                &store.filtered_candidates_scoped(e2, r0, Direction::Head, SplitMask::TRAIN_VALID)
            ),
            ["e0", "e1"]
        );
    }

    #[test]
    fn duplicates_within_split_are_dropped_across_splits_retained() {
        let store = TripleStore::parse("a\tp\tb\na\tp\tb\na\tp\tc", "", "a\tp\tb").unwrap();
        assert_eq!(store.split(Split::Train).len(), 2);
        assert_eq!(store.split(Split::Test).len(), 1);
        let a = eid(&store, "a");
        let p = rid(&store, "p");
        assert_eq!(
            labels(&store, &store.filtered_candidates(a, p, Direction::Tail)),
            ["b", "c"]
        );
    }

    #[test]
    fn load_types_accumulates_memberships() {
        let store = toy_store();
        let types = TypeAssignment::parse("e0\tPerson\ne1\tPerson\ne2\tCity\ne3\tCity", &store).unwrap();
        assert_eq!(types.n_types(), 2);
        let e3 = eid(&store, "e3");
        let city = types.types().id("City").unwrap();
        assert_eq!(types.entity_types(e3), &[city]);
    }

    #[test]
    fn load_types_empty_and_unknown() {
        let store = toy_store();
        let empty = TypeAssignment::parse("", &store).unwrap();
        assert_eq!(empty.n_types(), 0);
        assert!((0..store.n_entities()).all(|e| empty.entity_types(e).is_empty()));

        assert!(TypeAssignment::parse("zz\tPerson", &store).is_err());
    }

    #[test]
    fn multi_typed_entity() {
        let store = toy_store();
        let types = TypeAssignment::parse("e0\tPerson\ne0\tArtist\ne0\tPerson", &store).unwrap();
        let e0 = eid(&store, "e0");
        assert_eq!(types.entity_types(e0).len(), 2);
    }

    #[test]
    fn round_trip_reproduces_input_multiset() {
        let train = "x\tlikes\ty\nz\tlikes\ty\nx\tknows\tz";
        let store = TripleStore::parse(train, "", "").unwrap();
        let mut reconstructed: Vec<String> = store
            .split(Split::Train)
            .iter()
            .map(|t| {
                format!(
                    "{}\t{}\t{}",
                    store.entity_label(t.head),
                    store.relation_label(t.relation),
                    store.entity_label(t.tail)
                )
            })
            .collect();
        let mut original: Vec<String> = train.lines().map(|s| s.to_string()).collect();
        reconstructed.sort();
        original.sort();
        assert_eq!(reconstructed, original);
    }

    #[test]
    fn seen_sets_match_brute_force_scan() {
        let store = toy_store();
        for r in 0..store.n_relations() {
            let mut heads: Vec<EntityId> = store
                .split(Split::Train)
                .iter()
                .filter(|t| t.relation == r)
                .map(|t| t.head)
                .collect();
            heads.sort_unstable();
            heads.dedup();
            assert_eq!(store.seen_domain(r), heads.as_slice());
        }
    }

    #[test]
    fn gzip_input_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv.gz");
        let mut encoder =
            flate2::write::GzEncoder::new(std::fs::File::create(&path).unwrap(), flate2::Compression::default());
        encoder.write_all(b"a\tp\tb\n").unwrap();
        encoder.finish().unwrap();

        let text = read_text_auto(&path).unwrap();
        assert_eq!(text, "a\tp\tb\n");
    }
}
