//! Decomposes static-sampling estimation error on one synthetic graph.

use kgeval_core::candidates::{materialize, optimize_thresholds, threshold_eval_pairs};
use kgeval_core::eval::{full_filtered_ranks, metrics, sampled_ranks};
use kgeval_core::recommend::lwd;
use kgeval_core::sampling::{sample_static, SampleSize};
use kgeval_core::scorer::{train, ModelKind, Scorer, TrainConfig};
use kgeval_core::store::Split;
use kgeval_core::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let triples: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(25);
    let relations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let config = SynthConfig::with_round_robin_signatures(4, 50, relations, triples, 0.15, 0.05, 9);
    let (store, _types) = generate(&config).unwrap();
    let tc = TrainConfig {
        dim: 32,
        epochs,
        learning_rate: lr,
        negatives_per_positive: 32,
        weight_decay: std::env::var("WD").ok().and_then(|s| s.parse().ok()).unwrap_or(0.1),
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train(&store, ModelKind::DistMult, &tc).unwrap();
    let x = lwd(&store, None).unwrap();
    let thresholds = optimize_thresholds(&x, &threshold_eval_pairs(&store));
    let sets = materialize(&x, &thresholds, &store, true);

    let n = store.n_entities();
    let n_s = SampleSize::Fraction(0.1).resolve(n);
    let full = full_filtered_ranks(&model, &store);
    println!(
        "|E|={n} n_s={n_s} test={} full_mrr={:.4}",
        store.split(Split::Test).len(),
        metrics(&full).unwrap().mrr
    );

    let set_sizes: Vec<usize> = sets.columns().iter().map(|s| s.len()).collect();
    println!(
        "set sizes: min={} mean={:.1} max={} (columns > n_s: {})",
        set_sizes.iter().min().unwrap(),
        set_sizes.iter().sum::<usize>() as f64 / set_sizes.len() as f64,
        set_sizes.iter().max().unwrap(),
        set_sizes.iter().filter(|&&s| s > n_s).count(),
    );

    // Demoter accounting per query against one sampled plan.
    let plan = sample_static(&sets, SampleSize::Count(n_s), 1234);
    let sampled = sampled_ranks(&model, &store, &plan).unwrap();

    let mut gap_out_of_set = 0.0; // demoters outside the candidate set
    let mut gap_subsample = 0.0; // in-set demoters the draw missed
    let mut gap_ties = 0.0; // everything tie-related (residual)
    let mut total_gap = 0.0;
    let mut coverage_num = 0.0;
    let mut coverage_den = 0.0;
    for (f, s) in full.iter().zip(&sampled) {
        let rr_gap = 1.0 / s.rank - 1.0 / f.rank;
        total_gap += rr_gap;

        let excluded = store.filtered_candidates(f.anchor, f.relation, f.direction);
        let pool: Vec<usize> = (0..n)
            .filter(|&e| e == f.true_entity || excluded.binary_search(&e).is_err())
            .collect();
        let scores = model.score_candidates(f.anchor, f.relation, &pool, f.direction);
        let s_true = scores[pool.iter().position(|&e| e == f.true_entity).unwrap()];
        let mut d_total = 0usize;
        let mut d_in_set = 0usize;
        let mut d_sampled = 0usize;
        let sample = plan.sample(f.relation, f.direction);
        for (&e, &sc) in pool.iter().zip(&scores) {
            if e != f.true_entity && sc > s_true {
                d_total += 1;
                if sets.contains(f.relation, f.direction, e) {
                    d_in_set += 1;
                    if sample.binary_search(&e).is_ok() {
                        d_sampled += 1;
                    }
                }
            }
        }
        coverage_num += d_in_set as f64;
        coverage_den += d_total.max(1) as f64;
        let rr_full_no_ties = 1.0 / (1.0 + d_total as f64);
        let rr_in_set = 1.0 / (1.0 + d_in_set as f64);
        let rr_sampled_demoters = 1.0 / (1.0 + d_sampled as f64);
        gap_out_of_set += rr_in_set - rr_full_no_ties;
        gap_subsample += rr_sampled_demoters - rr_in_set;
        gap_ties += (1.0 / s.rank - rr_sampled_demoters) - (1.0 / f.rank - rr_full_no_ties);
    }
    let nq = full.len() as f64;
    println!(
        "mean RR gap: total={:.4} = out_of_set {:.4} + subsample {:.4} + ties {:.4}; demoter_set_coverage={:.3}",
        total_gap / nq,
        gap_out_of_set / nq,
        gap_subsample / nq,
        gap_ties / nq,
        coverage_num / coverage_den,
    );
}
