//! Mean accuracy per strategy for one experiment configuration. Used to pick
//! `accept_complexity` and the heuristic candidate count.
//!
//! cargo run --release --example calibrate -- [instances] [seed] [inversion_rate] [candidates] [accept_complexity]

use metaprov::embedding::default_schemas;
use metaprov::evalgen::{run_experiment, ExperimentConfig};
use metaprov::versiontree::Strategy;

fn arg<T: std::str::FromStr>(i: usize, d: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d)
}

fn main() {
    let d = ExperimentConfig::default();
    let mut cfg = ExperimentConfig { instances: arg(1, d.instances), rng_seed: arg(2, d.rng_seed), inversion_rate: arg(3, d.inversion_rate), ..d };
    cfg.tree.heuristic.candidates = arg(4, cfg.tree.heuristic.candidates);
    cfg.tree.heuristic.accept_complexity = arg(5, cfg.tree.heuristic.accept_complexity);
    let res = run_experiment(&cfg, &default_schemas()).unwrap();
    let line: Vec<String> = Strategy::ALL.iter().map(|&s| format!("{} {:.3}", s.as_str(), res.summary(s).mean_accuracy)).collect();
    println!("seed {} {}", cfg.rng_seed, line.join("  "));
}
