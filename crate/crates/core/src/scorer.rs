//! Link-prediction scoring functions and a small deterministic trainer.
//!
//! Three embedding families are built in — TransE (−‖h + r − t‖₂),
//! DistMult (⟨h, r, t⟩) and ComplEx (Re⟨h, r, t̄⟩) — plus loaders for
//! externally trained embeddings, so the evaluation machinery stays
//! model-agnostic. Anything implementing [`Scorer`] can be ranked.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};
use crate::store::{Direction, EntityId, RelationId, Split, Triple, TripleStore};

/// Scores candidate entities for one slot of a query. `anchor` fills the
/// other slot: for tail prediction the candidate is placed at the tail, for
/// head prediction at the head. Higher scores mean more plausible.
pub trait Scorer: Sync {
    fn score_candidates(
        &self,
        anchor: EntityId,
        relation: RelationId,
        candidates: &[EntityId],
        direction: Direction,
    ) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            other => Err(Error::consistency(format!("unknown model kind {other:?}"))),
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::DistMult => 1,
            ModelKind::ComplEx => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<ModelKind> {
        match tag {
            0 => Ok(ModelKind::TransE),
            1 => Ok(ModelKind::DistMult),
            2 => Ok(ModelKind::ComplEx),
            other => Err(Error::parse(0, format!("unknown model kind tag {other}"))),
        }
    }
}

/// Entity and relation embeddings of one model family. ComplEx rows store
/// the real parts in the first `dim` slots and imaginary parts in the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    kind: ModelKind,
    dim: usize,
    n_entities: usize,
    n_relations: usize,
    entity: Vec<f64>,
    relation: Vec<f64>,
}

impl EmbeddingModel {
    /// Seeded Xavier-uniform initialization.
    pub fn init(kind: ModelKind, n_entities: usize, n_relations: usize, dim: usize, seed: u64) -> EmbeddingModel {
        let row_len = row_len(kind, dim);
        let limit = (6.0 / row_len as f64).sqrt();
        let mut rng = stream(seed, StreamKind::Training, 0);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n * row_len).map(|_| rng.gen_range(-limit..limit)).collect()
        };
        EmbeddingModel {
            kind,
            dim,
            n_entities,
            n_relations,
            entity: draw(n_entities),
            relation: draw(n_relations),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    fn row_len(&self) -> usize {
        row_len(self.kind, self.dim)
    }

    pub fn entity_row(&self, id: EntityId) -> &[f64] {
        let w = self.row_len();
        &self.entity[id * w..(id + 1) * w]
    }

    pub fn relation_row(&self, id: RelationId) -> &[f64] {
        let w = self.row_len();
        &self.relation[id * w..(id + 1) * w]
    }

    pub fn entity_row_mut(&mut self, id: EntityId) -> &mut [f64] {
        let w = self.row_len();
        &mut self.entity[id * w..(id + 1) * w]
    }

    pub fn relation_row_mut(&mut self, id: RelationId) -> &mut [f64] {
        let w = self.row_len();
        &mut self.relation[id * w..(id + 1) * w]
    }

    fn triple_score(&self, h: EntityId, r: RelationId, t: EntityId) -> f64 {
        raw_score(self.kind, self.dim, self.entity_row(h), self.relation_row(r), self.entity_row(t))
    }
}

fn row_len(kind: ModelKind, dim: usize) -> usize {
    match kind {
        ModelKind::ComplEx => 2 * dim,
        _ => dim,
    }
}

fn raw_score(kind: ModelKind, dim: usize, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    match kind {
        ModelKind::TransE => {
            let sq: f64 = h
                .iter()
                .zip(r)
                .zip(t)
                .map(|((&h, &r), &t)| {
                    let d = h + r - t;
                    d * d
                })
                .sum();
            -sq.sqrt()
        }
        ModelKind::DistMult => h.iter().zip(r).zip(t).map(|((&h, &r), &t)| h * r * t).sum(),
        ModelKind::ComplEx => {
            let mut s = 0.0;
            for k in 0..dim {
                let (a, b) = (h[k], h[dim + k]);
                let (c, d) = (r[k], r[dim + k]);
                let (e, f) = (t[k], t[dim + k]);
                s += (a * c - b * d) * e + (a * d + b * c) * f;
            }
            s
        }
    }
}

impl Scorer for EmbeddingModel {
    fn score_candidates(
        &self,
        anchor: EntityId,
        relation: RelationId,
        candidates: &[EntityId],
        direction: Direction,
    ) -> Vec<f64> {
        candidates
            .iter()
            .map(|&c| match direction {
                Direction::Tail => self.triple_score(anchor, relation, c),
                Direction::Head => self.triple_score(c, relation, anchor),
            })
            .collect()
    }
}

/// Validating wrapper around [`Scorer::score_candidates`] for callers with
/// unchecked ids.
pub fn score(
    model: &EmbeddingModel,
    anchor: EntityId,
    relation: RelationId,
    candidates: &[EntityId],
    direction: Direction,
) -> Result<Vec<f64>> {
    if anchor >= model.n_entities || relation >= model.n_relations {
        return Err(Error::dimension(format!(
            "query ({anchor}, {relation}) outside model of {} entities / {} relations",
            model.n_entities, model.n_relations
        )));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= model.n_entities) {
        return Err(Error::dimension(format!("candidate {bad} out of range")));
    }
    Ok(model.score_candidates(anchor, relation, candidates, direction))
}

/// Deterministic hash-based scorer; stands in for a model when only ranking
/// mechanics matter (baselines, stress tests).
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score_candidates(
        &self,
        anchor: EntityId,
        relation: RelationId,
        candidates: &[EntityId],
        direction: Direction,
    ) -> Vec<f64> {
        let dir = match direction {
            Direction::Head => 0u64,
            Direction::Tail => 1u64,
        };
        candidates
            .iter()
            .map(|&c| {
                let mut z = self
                    .seed
                    .wrapping_add((anchor as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                    .wrapping_add((relation as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
                    .wrapping_add((c as u64).wrapping_mul(0x1656_67B1_9E37_79F9))
                    .wrapping_add(dir.wrapping_mul(0x27D4_EB2F_1656_67C5));
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }
}

/// Scores every candidate identically; exercises tie handling.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score_candidates(&self, _: EntityId, _: RelationId, candidates: &[EntityId], _: Direction) -> Vec<f64> {
        vec![self.0; candidates.len()]
    }
}

/// Trainer hyperparameters. TransE minimizes a margin ranking loss,
/// DistMult/ComplEx binary cross-entropy; negatives are drawn uniformly.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub margin: f64,
    pub batch_size: usize,
    /// L2 penalty on the embedding rows each batch touches. Without it the
    /// bilinear models memorize small graphs instead of generalizing.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 32,
            epochs: 200,
            learning_rate: 1.0,
            negatives_per_positive: 8,
            margin: 1.0,
            batch_size: 64,
            weight_decay: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch_size == 0 || self.negatives_per_positive == 0 {
            return Err(Error::consistency("dim, batch size and negatives must be positive"));
        }
        if self.learning_rate <= 0.0 || self.margin <= 0.0 {
            return Err(Error::consistency("learning rate and margin must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::consistency("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// One training example: a positive triple and a corrupted counterpart.
#[derive(Debug, Clone, Copy)]
pub struct PairExample {
    pub positive: Triple,
    pub negative: Triple,
}

/// Per-row gradient accumulator.
#[derive(Debug, Default)]
pub struct Gradients {
    pub entity: HashMap<EntityId, Vec<f64>>,
    pub relation: HashMap<RelationId, Vec<f64>>,
}

impl Gradients {
    fn entity_row(&mut self, id: EntityId, w: usize) -> &mut Vec<f64> {
        self.entity.entry(id).or_insert_with(|| vec![0.0; w])
    }

    fn relation_row(&mut self, id: RelationId, w: usize) -> &mut Vec<f64> {
        self.relation.entry(id).or_insert_with(|| vec![0.0; w])
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Loss of one (positive, negative) example under the model's objective:
/// margin ranking for TransE, binary cross-entropy for DistMult/ComplEx.
pub fn pair_loss(model: &EmbeddingModel, example: &PairExample, margin: f64) -> f64 {
    let p = example.positive;
    let n = example.negative;
    let s_pos = model.triple_score(p.head, p.relation, p.tail);
    let s_neg = model.triple_score(n.head, n.relation, n.tail);
    match model.kind {
        ModelKind::TransE => (margin - s_pos + s_neg).max(0.0),
        // -ln σ(s_pos) - ln σ(-s_neg)
        _ => softplus(-s_pos) + softplus(s_neg),
    }
}

/// Analytic gradients of [`pair_loss`] with respect to every embedding row
/// the example touches.
pub fn pair_gradients(model: &EmbeddingModel, example: &PairExample, margin: f64) -> Gradients {
    let w = model.row_len();
    let mut grads = Gradients::default();
    let p = example.positive;
    let n = example.negative;

    match model.kind {
        ModelKind::TransE => {
            let s_pos = model.triple_score(p.head, p.relation, p.tail);
            let s_neg = model.triple_score(n.head, n.relation, n.tail);
            if margin - s_pos + s_neg <= 0.0 {
                return grads;
            }
            // d‖v‖/dv = v/‖v‖ with v = h + r − t; loss rises with the
            // positive distance and falls with the negative one.
            accumulate_transe(model, &mut grads, p, 1.0, w);
            accumulate_transe(model, &mut grads, n, -1.0, w);
        }
        _ => {
            let s_pos = model.triple_score(p.head, p.relation, p.tail);
            let s_neg = model.triple_score(n.head, n.relation, n.tail);
            let dl_dpos = sigmoid(s_pos) - 1.0;
            let dl_dneg = sigmoid(s_neg);
            accumulate_bilinear(model, &mut grads, p, dl_dpos, w);
            accumulate_bilinear(model, &mut grads, n, dl_dneg, w);
        }
    }
    grads
}

fn accumulate_transe(model: &EmbeddingModel, grads: &mut Gradients, t: Triple, sign: f64, w: usize) {
    let h = model.entity_row(t.head);
    let r = model.relation_row(t.relation);
    let tl = model.entity_row(t.tail);
    let mut v = vec![0.0; w];
    let mut norm_sq = 0.0;
    for k in 0..w {
        v[k] = h[k] + r[k] - tl[k];
        norm_sq += v[k] * v[k];
    }
    let norm = norm_sq.sqrt();
    if norm == 0.0 {
        return;
    }
    let scale = sign / norm;
    let gh = grads.entity_row(t.head, w);
    for k in 0..w {
        gh[k] += scale * v[k];
    }
    let gr = grads.relation_row(t.relation, w);
    for k in 0..w {
        gr[k] += scale * v[k];
    }
    let gt = grads.entity_row(t.tail, w);
    for k in 0..w {
        gt[k] -= scale * v[k];
    }
}

fn accumulate_bilinear(model: &EmbeddingModel, grads: &mut Gradients, t: Triple, dl_ds: f64, w: usize) {
    let dim = model.dim;
    let h = model.entity_row(t.head).to_vec();
    let r = model.relation_row(t.relation).to_vec();
    let tl = model.entity_row(t.tail).to_vec();
    match model.kind {
        ModelKind::DistMult => {
            let gh = grads.entity_row(t.head, w);
            for k in 0..w {
                gh[k] += dl_ds * r[k] * tl[k];
            }
            let gr = grads.relation_row(t.relation, w);
            for k in 0..w {
                gr[k] += dl_ds * h[k] * tl[k];
            }
            let gt = grads.entity_row(t.tail, w);
            for k in 0..w {
                gt[k] += dl_ds * h[k] * r[k];
            }
        }
        ModelKind::ComplEx => {
            // s = Σ (ac − bd)e + (ad + bc)f over complex h=(a,b), r=(c,d), t=(e,f)
            for k in 0..dim {
                let (a, b) = (h[k], h[dim + k]);
                let (c, d) = (r[k], r[dim + k]);
                let (e, f) = (tl[k], tl[dim + k]);
                let gh = grads.entity_row(t.head, w);
                gh[k] += dl_ds * (c * e + d * f);
                gh[dim + k] += dl_ds * (-d * e + c * f);
                let gr = grads.relation_row(t.relation, w);
                gr[k] += dl_ds * (a * e + b * f);
                gr[dim + k] += dl_ds * (-b * e + a * f);
                let gt = grads.entity_row(t.tail, w);
                gt[k] += dl_ds * (a * c - b * d);
                gt[dim + k] += dl_ds * (a * d + b * c);
            }
        }
        ModelKind::TransE => unreachable!("bilinear path"),
    }
}

/// Trains a model on the store's train split: SGD with uniform negative
/// sampling, deterministic under the config seed (single-threaded).
pub fn train(store: &TripleStore, kind: ModelKind, config: &TrainConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    let triples = store.split(Split::Train);
    if triples.is_empty() {
        return Err(Error::consistency("cannot train on an empty train split"));
    }
    let mut model = EmbeddingModel::init(kind, store.n_entities(), store.n_relations(), config.dim, config.seed);
    if config.epochs == 0 {
        return Ok(model);
    }
    let n_entities = store.n_entities();
    let mut rng = stream(config.seed, StreamKind::Training, 1);
    let mut order: Vec<usize> = (0..triples.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::default();
            let pairs_in_batch = batch.len() * config.negatives_per_positive;
            for &idx in batch {
                let positive = triples[idx];
                for _ in 0..config.negatives_per_positive {
                    let negative = corrupt(positive, n_entities, &mut rng);
                    let example = PairExample { positive, negative };
                    epoch_loss += pair_loss(&model, &example, config.margin);
                    let g = pair_gradients(&model, &example, config.margin);
                    merge(&mut grads, g);
                }
            }
            // Mean over the batch's pair examples, not the raw sum: keeps the
            // step size independent of batch_size × negatives. Decay is
            // decoupled and only touches rows the batch used, so rare rows
            // shrink toward zero unless positive evidence keeps them up.
            decay(&mut model, &grads, config.learning_rate * config.weight_decay);
            apply(&mut model, &grads, config.learning_rate / pairs_in_batch as f64);
            if kind == ModelKind::TransE {
                // Keep entity embeddings on the unit ball, as the translation
                // objective is scale-degenerate otherwise.
                for &idx in batch {
                    let t = triples[idx];
                    for id in [t.head, t.tail] {
                        let row = model.entity_row_mut(id);
                        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 1.0 {
                            for v in row {
                                *v /= norm;
                            }
                        }
                    }
                }
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite loss {epoch_loss} at epoch {epoch} (kind {}, lr {})",
                kind.as_str(),
                config.learning_rate
            )));
        }
    }
    Ok(model)
}

fn corrupt(positive: Triple, n_entities: usize, rng: &mut impl Rng) -> Triple {
    let corrupt_head = rng.gen_bool(0.5);
    let original = if corrupt_head { positive.head } else { positive.tail };
    let mut replacement = rng.gen_range(0..n_entities);
    if n_entities > 1 {
        while replacement == original {
            replacement = rng.gen_range(0..n_entities);
        }
    }
    if corrupt_head {
        Triple { head: replacement, ..positive }
    } else {
        Triple { tail: replacement, ..positive }
    }
}

fn merge(into: &mut Gradients, from: Gradients) {
    for (id, row) in from.entity {
        match into.entity.get_mut(&id) {
            Some(acc) => acc.iter_mut().zip(row).for_each(|(a, g)| *a += g),
            None => {
                into.entity.insert(id, row);
            }
        }
    }
    for (id, row) in from.relation {
        match into.relation.get_mut(&id) {
            Some(acc) => acc.iter_mut().zip(row).for_each(|(a, g)| *a += g),
            None => {
                into.relation.insert(id, row);
            }
        }
    }
}

fn decay(model: &mut EmbeddingModel, grads: &Gradients, rate: f64) {
    if rate == 0.0 {
        return;
    }
    let factor = (1.0 - rate).max(0.0);
    let mut entity_ids: Vec<_> = grads.entity.keys().copied().collect();
    entity_ids.sort_unstable();
    for id in entity_ids {
        for p in model.entity_row_mut(id) {
            *p *= factor;
        }
    }
    let mut relation_ids: Vec<_> = grads.relation.keys().copied().collect();
    relation_ids.sort_unstable();
    for id in relation_ids {
        for p in model.relation_row_mut(id) {
            *p *= factor;
        }
    }
}

fn apply(model: &mut EmbeddingModel, grads: &Gradients, lr: f64) {
    // Deterministic application order.
    let mut entity_ids: Vec<_> = grads.entity.keys().copied().collect();
    entity_ids.sort_unstable();
    for id in entity_ids {
        let g = &grads.entity[&id];
        for (p, gv) in model.entity_row_mut(id).iter_mut().zip(g) {
            *p -= lr * gv;
        }
    }
    let mut relation_ids: Vec<_> = grads.relation.keys().copied().collect();
    relation_ids.sort_unstable();
    for id in relation_ids {
        let g = &grads.relation[&id];
        for (p, gv) in model.relation_row_mut(id).iter_mut().zip(g) {
            *p -= lr * gv;
        }
    }
}

// ---------------------------------------------------------------------------
// Embedding file formats: text (`<count> <dim> <kind>` header, one row per
// id) and a binary mirror with a `KGEM` header. Both are per-table files.

impl EmbeddingModel {
    pub fn save_text(&self, entity_path: impl AsRef<Path>, relation_path: impl AsRef<Path>) -> Result<()> {
        write_text_table(entity_path, self.n_entities, self.dim, self.kind, &self.entity, self.row_len())?;
        write_text_table(relation_path, self.n_relations, self.dim, self.kind, &self.relation, self.row_len())
    }

    pub fn save_binary(&self, entity_path: impl AsRef<Path>, relation_path: impl AsRef<Path>) -> Result<()> {
        write_binary_table(entity_path, self.n_entities, self.dim, self.kind, &self.entity)?;
        write_binary_table(relation_path, self.n_relations, self.dim, self.kind, &self.relation)
    }

    /// Loads entity + relation tables (text or binary, detected per file),
    /// checking the declared kind and the store's vocabulary sizes.
    pub fn load(
        entity_path: impl AsRef<Path>,
        relation_path: impl AsRef<Path>,
        kind: ModelKind,
        store: &TripleStore,
    ) -> Result<EmbeddingModel> {
        let (e_kind, e_dim, e_count, entity) = read_table(entity_path.as_ref())?;
        let (r_kind, r_dim, r_count, relation) = read_table(relation_path.as_ref())?;
        if e_kind != kind || r_kind != kind {
            return Err(Error::consistency(format!(
                "embedding files declare kind {}/{}, expected {}",
                e_kind.as_str(),
                r_kind.as_str(),
                kind.as_str()
            )));
        }
        if e_dim != r_dim {
            return Err(Error::dimension(format!(
                "entity dim {e_dim} does not match relation dim {r_dim}"
            )));
        }
        if e_count != store.n_entities() {
            return Err(Error::dimension(format!(
                "entity file has {e_count} rows, store has {}",
                store.n_entities()
            )));
        }
        if r_count != store.n_relations() {
            return Err(Error::dimension(format!(
                "relation file has {r_count} rows, store has {}",
                store.n_relations()
            )));
        }
        if entity.iter().chain(&relation).any(|v| !v.is_finite()) {
            return Err(Error::numeric("embedding file contains non-finite values"));
        }
        Ok(EmbeddingModel {
            kind,
            dim: e_dim,
            n_entities: e_count,
            n_relations: r_count,
            entity,
            relation,
        })
    }

    /// Reads the kind declared in an embedding file without loading it.
    pub fn peek_kind(path: impl AsRef<Path>) -> Result<ModelKind> {
        let mut file = std::fs::File::open(path.as_ref())?;
        let mut magic = [0u8; 4];
        let n = file.read(&mut magic)?;
        if n == 4 && &magic == b"KGEM" {
            let mut buf = [0u8; 5];
            file.read_exact(&mut buf)?;
            return ModelKind::from_tag(buf[4]);
        }
        let file = std::fs::File::open(path.as_ref())?;
        let mut first = String::new();
        std::io::BufReader::new(file).read_line(&mut first)?;
        let kind_field = first.split_whitespace().nth(2).ok_or_else(|| {
            Error::parse(1, "embedding header must be `<count> <dim> <kind>`")
        })?;
        ModelKind::parse(kind_field)
    }
}

fn write_text_table(
    path: impl AsRef<Path>,
    count: usize,
    dim: usize,
    kind: ModelKind,
    data: &[f64],
    row_len: usize,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{count} {dim} {}", kind.as_str())?;
    for row in 0..count {
        let slice = &data[row * row_len..(row + 1) * row_len];
        let mut line = String::with_capacity(row_len * 12);
        for (k, v) in slice.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            // Shortest round-trip formatting: the text file restores bit-exactly.
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn write_binary_table(
    path: impl AsRef<Path>,
    count: usize,
    dim: usize,
    kind: ModelKind,
    data: &[f64],
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(b"KGEM")?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&[kind.tag()])?;
    w.write_all(&(count as u64).to_le_bytes())?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(ModelKind, usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= 4 && &bytes[..4] == b"KGEM" {
        return read_binary_table(&bytes);
    }
    read_text_table(&bytes)
}

fn read_binary_table(bytes: &[u8]) -> Result<(ModelKind, usize, usize, Vec<f64>)> {
    let mut r = &bytes[4..];
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != 1 {
        return Err(Error::parse(0, format!("unsupported KGEM version {version}")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let kind = ModelKind::from_tag(tag[0])?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let dim = u64::from_le_bytes(u64buf) as usize;
    let w = row_len(kind, dim);
    let mut data = Vec::with_capacity(count * w);
    let mut vbuf = [0u8; 8];
    for _ in 0..count * w {
        r.read_exact(&mut vbuf)?;
        data.push(f64::from_le_bytes(vbuf));
    }
    Ok((kind, dim, count, data))
}

fn read_text_table(bytes: &[u8]) -> Result<(ModelKind, usize, usize, Vec<f64>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(0, format!("invalid UTF-8: {e}")))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty embedding file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::parse(1, "embedding header must be `<count> <dim> <kind>`"));
    }
    let count: usize = fields[0]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad count {:?}", fields[0])))?;
    let dim: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad dim {:?}", fields[1])))?;
    let kind = ModelKind::parse(fields[2])?;
    let w = row_len(kind, dim);
    let mut data = Vec::with_capacity(count * w);
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split_whitespace() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(i + 2, format!("bad float {field:?}")))?;
            data.push(v);
        }
        if data.len() - before != w {
            return Err(Error::dimension(format!(
                "row {} has {} values, expected {w}",
                i + 2,
                data.len() - before
            )));
        }
    }
    if data.len() != count * w {
        return Err(Error::dimension(format!(
            "embedding file has {} values, header promises {}",
            data.len(),
            count * w
        )));
    }
    Ok((kind, dim, count, data))
}
