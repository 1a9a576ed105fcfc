//! Full model vs source-only on the synthetic LOSO benchmark.
//!
//! `cargo run --release --example benchmark -- [shift] [noise] [seed] [epochs] [rho0] [rho1]`

use std::time::Instant;

use sdcnet::datamodel::{make_synthetic_dataset, Ablation, RunConfig};
use sdcnet::eval;

fn main() -> sdcnet::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let shift = args.first().copied().unwrap_or(3.0);
    let noise = args.get(1).copied().unwrap_or(0.5);
    let seed = args.get(2).copied().unwrap_or(7.0) as u64;
    let epochs = args.get(3).copied().unwrap_or(200.0) as usize;
    let table = make_synthetic_dataset(6, 5, 40, 20, 3, shift, noise, seed)?;
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        seed,
        epochs,
        rho0: args.get(4).copied().unwrap_or(defaults.rho0),
        rho1: args.get(5).copied().unwrap_or(defaults.rho1),
        ..defaults
    };
    for v in [Ablation::SourceOnly, Ablation::Full] {
        let t = Instant::now();
        let r = eval::loso_run(&table, &v.apply(&cfg), 1)?;
        println!(
            "{:<28} mean {:.4} std {:.4} neg {} folds {:?} ({:.1}s)",
            v.name(),
            r.mean_accuracy,
            r.std_accuracy,
            r.negative_transfer_count,
            r.fold_accuracies
                .iter()
                .map(|a| (a * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
