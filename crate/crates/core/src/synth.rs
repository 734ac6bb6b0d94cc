//! Synthetic typed knowledge graphs with planted relational structure:
//! every relation connects a head type to a tail type, up to a controlled
//! fraction of noise triples that ignore the signature.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};
use crate::store::{Triple, TripleStore, TypeAssignment, Vocabulary};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_types: usize,
    pub entities_per_type: usize,
    pub n_relations: usize,
    /// (head type, tail type) per relation.
    pub signatures: Vec<(usize, usize)>,
    pub triples_per_relation: usize,
    pub test_fraction: f64,
    /// Fraction of triples whose endpoints are drawn uniformly over all
    /// entities, violating the signature.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Round-robin signatures: relation `r` connects type `r mod T` to type
    /// `(r + 1) mod T`.
    pub fn with_round_robin_signatures(
        n_types: usize,
        entities_per_type: usize,
        n_relations: usize,
        triples_per_relation: usize,
        test_fraction: f64,
        noise_fraction: f64,
        seed: u64,
    ) -> SynthConfig {
        let signatures = (0..n_relations)
            .map(|r| (r % n_types, (r + 1) % n_types))
            .collect();
        SynthConfig {
            n_types,
            entities_per_type,
            n_relations,
            signatures,
            triples_per_relation,
            test_fraction,
            noise_fraction,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_types == 0 || self.entities_per_type == 0 || self.n_relations == 0 || self.triples_per_relation == 0
        {
            return Err(Error::consistency("all synthetic counts must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) || !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::consistency("fractions must lie in [0, 1]"));
        }
        if self.signatures.len() != self.n_relations {
            return Err(Error::consistency(format!(
                "{} signatures for {} relations",
                self.signatures.len(),
                self.n_relations
            )));
        }
        if let Some(&(h, t)) = self.signatures.iter().find(|&&(h, t)| h >= self.n_types || t >= self.n_types) {
            return Err(Error::consistency(format!(
                "signature ({h}, {t}) references a type outside 0..{}",
                self.n_types
            )));
        }
        let capacity = self.entities_per_type * self.entities_per_type;
        let clean = self.triples_per_relation - self.noise_count();
        if clean > capacity {
            return Err(Error::consistency(format!(
                "{clean} signature-respecting triples requested but a type pair only holds {capacity}"
            )));
        }
        Ok(())
    }

    fn noise_count(&self) -> usize {
        (self.noise_fraction * self.triples_per_relation as f64).round() as usize
    }
}

/// Generates the graph and its type assignment. Deterministic per seed.
pub fn generate(config: &SynthConfig) -> Result<(TripleStore, TypeAssignment)> {
    config.validate()?;
    let per = config.entities_per_type;
    let n_entities = config.n_types * per;
    let mut rng = stream(config.seed, StreamKind::Synthesis, 0);

    let mut train_labels: Vec<(usize, usize, usize)> = Vec::new();
    let mut test_labels: Vec<(usize, usize, usize)> = Vec::new();

    // Endpoint popularity within a type block follows a zipf law with a
    // shared order (lower index = more popular), giving the graph the hub
    // structure real KGs have; held-out triples stay predictable from it.
    let zipf_cdf = zipf_cumulative(per, ZIPF_EXPONENT);

    for (r, &(head_type, tail_type)) in config.signatures.iter().enumerate() {
        let n_noise = config.noise_count();
        let n_clean = config.triples_per_relation - n_noise;
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(config.triples_per_relation);
        let mut used: HashSet<(usize, usize)> = HashSet::new();

        // Clean pairs: distinct zipf-weighted draws from the
        // head-type × tail-type block.
        let capacity = per * per;
        if n_clean * 4 >= capacity {
            // Dense request: weigh every block pair once (exponential race)
            // instead of rejection-sampling a crowded space.
            let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(capacity);
            for hi in 0..per {
                for ti in 0..per {
                    let w = zipf_weight(hi) * zipf_weight(ti);
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    keyed.push((-u.ln() / w, hi, ti));
                }
            }
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            for &(_, hi, ti) in keyed.iter().take(n_clean) {
                let pair = (head_type * per + hi, tail_type * per + ti);
                pairs.push(pair);
                used.insert(pair);
            }
        } else {
            while used.len() < n_clean {
                let h = head_type * per + zipf_draw(&zipf_cdf, &mut rng);
                let t = tail_type * per + zipf_draw(&zipf_cdf, &mut rng);
                if used.insert((h, t)) {
                    pairs.push((h, t));
                }
            }
        }
        // Noise pairs: uniform over all entities, still duplicate-free.
        let mut drawn = 0usize;
        while drawn < n_noise {
            let h = rng.gen_range(0..n_entities);
            let t = rng.gen_range(0..n_entities);
            if used.insert((h, t)) {
                pairs.push((h, t));
                drawn += 1;
            }
        }

        // Stratified split: shuffle this relation's triples, cut the test
        // fraction off the front.
        shuffle(&mut pairs, &mut rng);
        let n_test = (config.test_fraction * pairs.len() as f64).round() as usize;
        for (i, &(h, t)) in pairs.iter().enumerate() {
            if i < n_test {
                test_labels.push((h, r, t));
            } else {
                train_labels.push((h, r, t));
            }
        }
    }

    // Intern in generation order so ids are reproducible.
    let mut entities = Vocabulary::default();
    let mut relations = Vocabulary::default();
    let intern = |labels: &[(usize, usize, usize)], entities: &mut Vocabulary, relations: &mut Vocabulary| {
        labels
            .iter()
            .map(|&(h, r, t)| Triple {
                head: entities.intern(&format!("e{h}")),
                relation: relations.intern(&format!("r{r}")),
                tail: entities.intern(&format!("e{t}")),
            })
            .collect::<Vec<_>>()
    };
    let train = intern(&train_labels, &mut entities, &mut relations);
    let test = intern(&test_labels, &mut entities, &mut relations);

    let mut types = Vocabulary::default();
    for t in 0..config.n_types {
        types.intern(&format!("T{t}"));
    }
    let mut memberships = vec![Vec::new(); entities.len()];
    for (id, membership) in memberships.iter_mut().enumerate() {
        let label = entities.label(id);
        let index: usize = label[1..].parse().expect("generated label");
        membership.push(index / per);
    }

    let store = TripleStore::from_split_triples(entities, relations, train, Vec::new(), test);
    let assignment = TypeAssignment::from_parts(types, memberships);
    Ok((store, assignment))
}

const ZIPF_EXPONENT: f64 = 1.5;

fn zipf_weight(index: usize) -> f64 {
    1.0 / ((index + 1) as f64).powf(ZIPF_EXPONENT)
}

fn zipf_cumulative(n: usize, exponent: f64) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += 1.0 / ((i + 1) as f64).powf(exponent);
        cdf.push(acc);
    }
    cdf
}

fn zipf_draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let u: f64 = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
