//! Inspects what a trained model scores on one synthetic graph.

use kgeval_core::scorer::{train, ModelKind, Scorer, TrainConfig};
use kgeval_core::store::{Direction, Split};
use kgeval_core::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let negs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let dim: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(32);

    let config = SynthConfig::with_round_robin_signatures(4, 50, 12, 40, 0.15, 0.05, 9);
    let (store, types) = generate(&config).unwrap();
    let tc = TrainConfig {
        dim,
        epochs,
        learning_rate: lr,
        negatives_per_positive: negs,
        weight_decay: std::env::var("WD").ok().and_then(|s| s.parse().ok()).unwrap_or(0.1),
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train(&store, ModelKind::DistMult, &tc).unwrap();

    // Unfiltered MRR on train vs test: memorization vs generalization.
    let mrr = |split: Split| -> f64 {
        let triples = store.split(split);
        let all: Vec<usize> = (0..store.n_entities()).collect();
        let mut sum = 0.0;
        for t in triples {
            let scores = model.score_candidates(t.head, t.relation, &all, Direction::Tail);
            let s_true = scores[t.tail];
            let above = scores.iter().filter(|&&s| s > s_true).count();
            sum += 1.0 / (1.0 + above as f64);
        }
        sum / triples.len() as f64
    };
    println!("unfiltered tail MRR: train={:.4} test={:.4}", mrr(Split::Train), mrr(Split::Test));

    // One test query: where do the top entities come from?
    let t = store.split(Split::Test)[0];
    let all: Vec<usize> = (0..store.n_entities()).collect();
    let scores = model.score_candidates(t.head, t.relation, &all, Direction::Tail);
    let mut order: Vec<(f64, usize)> = scores.iter().copied().zip(all.iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tail_types = types.entity_types(t.tail).to_vec();
    println!(
        "query ({}, {}, ?) true {} (label {}, types {:?}) true_score {:.3}",
        store.entity_label(t.head),
        store.relation_label(t.relation),
        t.tail,
        store.entity_label(t.tail),
        tail_types,
        scores[t.tail],
    );
    for (rank, &(s, e)) in order.iter().take(12).enumerate() {
        let seen_as_tail = store.seen_range(t.relation).binary_search(&e).is_ok();
        println!(
            "  rank {:2}: {} types {:?} score {:.3} seen_as_tail_of_r={}",
            rank + 1,
            store.entity_label(e),
            types.entity_types(e),
            s,
            seen_as_tail,
        );
    }
    let true_rank = order.iter().position(|&(_, e)| e == t.tail).unwrap() + 1;
    println!("true entity unfiltered rank: {true_rank}");
}
