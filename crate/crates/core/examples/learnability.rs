//! Trains the ranker, BoW and random models on a synthetic corpus and
//! prints held-out EMA@5 for each.
//!
//! ```text
//! cargo run --release -p oppmodel --example learnability -- [epochs] [count]
//! ```

use std::time::Instant;

use oppmodel::corpus::synthetic::{generate_synthetic, SynthConfig};
use oppmodel::metrics::{evaluate, MetricConfig};
use oppmodel::train::{train_model, ModelKind, TrainConfig};
use oppmodel::Instance;

fn main() -> oppmodel::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let count: usize = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let corpus = generate_synthetic(
        &SynthConfig {
            count,
            ..SynthConfig::default()
        },
        1,
    )?;
    let n_eval = count / 5;
    let n_tune = count / 10;
    let eval: Vec<&Instance> = corpus[..n_eval].iter().collect();
    let tune: Vec<&Instance> = corpus[n_eval..n_eval + n_tune].iter().collect();
    let train: Vec<&Instance> = corpus[n_eval + n_tune..].iter().collect();
    for kind in [ModelKind::Random, ModelKind::Bow, ModelKind::Ranker] {
        let mut cfg = TrainConfig::desk(kind);
        cfg.epochs = epochs;
        cfg.mixture = vec![oppmodel::Source::Syn];
        let start = Instant::now();
        let out = train_model(&cfg, &train, &tune)?;
        for h in &out.history {
            println!(
                "  {} epoch {} loss {:.4} tune {:?}",
                kind.name(),
                h.epoch,
                h.train_loss,
                h.tune_ema_at_5
            );
        }
        let report = evaluate(&eval, &out.model, &MetricConfig::default())?;
        let at5 = report.at_k(5).expect("k=5");
        println!(
            "{}: epoch {} EMA@5 {:.2} top1@5 {:.2} ({:.1}s)",
            kind.name(),
            out.checkpoint.epoch,
            at5.ema,
            at5.top1,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
