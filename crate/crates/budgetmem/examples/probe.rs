// Scratch probe for generator calibration (not part of the test suite).
use std::time::Instant;

use budgetmem::data::{generate, Corpus, SyntheticPaperSpec};
use budgetmem::evaluation::{evaluate_system, PipelineConfig, SelectionStrategy, StrategyKind};

fn main() {
    let t0 = Instant::now();
    let spec = SyntheticPaperSpec::default();
    let corpus = generate(&spec, 150, 30).unwrap();
    println!("generated {} docs, {} examples in {:?}", corpus.documents.len(), corpus.examples.len(), t0.elapsed());

    let config = PipelineConfig {
        workers: 4,
        ..PipelineConfig::default()
    };
    for kind in StrategyKind::baseline_order() {
        let t = Instant::now();
        let r = evaluate_system(&corpus, &config, &SelectionStrategy { kind, seed: 42 }).unwrap();
        println!(
            "{:<12} recall={:.4} f1={:.4} em={:.4} storage={:.4} saving={:.4} chunks={:.2} ({:?})",
            kind.as_str(), r.store_recall, r.mean_f1, r.mean_exact_match, r.storage_ratio, r.memory_saving, r.mean_chunks_used, t.elapsed()
        );
    }

    // short corpus: skewed two-component mix averaging ~237 tokens
    let t1 = Instant::now();
    let mut short = generate(
        &SyntheticPaperSpec {
            seed: 43,
            n_papers: 100,
            min_tokens: 115,
            max_tokens: 150,
            questions_per_paper: 1,
            section_plan: vec!["Passage".into()],
            ..SyntheticPaperSpec::default()
        },
        150,
        30,
    )
    .unwrap();
    let long_half = generate(
        &SyntheticPaperSpec {
            seed: 44,
            n_papers: 100,
            min_tokens: 290,
            max_tokens: 394,
            questions_per_paper: 1,
            section_plan: vec!["Passage".into()],
            ..SyntheticPaperSpec::default()
        },
        150,
        30,
    )
    .unwrap();
    short.documents.extend(long_half.documents);
    short.examples.extend(long_half.examples);
    let short = Corpus { documents: short.documents, examples: short.examples };
    let r = evaluate_system(&short, &config, &SelectionStrategy { kind: StrategyKind::BudgetmemFeatures, seed: 42 }).unwrap();
    let mean_tokens: f64 = short
        .documents
        .iter()
        .map(|d| budgetmem::text_prep::tokenize(&d.text).len() as f64)
        .sum::<f64>()
        / short.documents.len() as f64;
    println!(
        "short corpus: mean_tokens={:.1} storage={:.4} saving={:.4} ({:?})",
        mean_tokens, r.storage_ratio, r.memory_saving, t1.elapsed()
    );
}
