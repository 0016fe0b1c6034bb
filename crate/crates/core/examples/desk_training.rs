//! Trains bilinear GQE on the built-in block graph and prints held-out
//! metrics for the full curriculum and the edge-only ablation.
//!
//! Usage: cargo run --release --example desk_training [density] [dim] [lr] [seed] [patience] [valid]

use std::time::Instant;

use gqe::evaluation::{evaluate, EvalOptions, NegativeKind};
use gqe::kgraph::split_edges;
use gqe::kgraph::synthetic::{generate, SyntheticSpec};
use gqe::model::{ModelParams, Psi, Variant};
use gqe::querydag::Structure;
use gqe::sampler::{build_dataset, DatasetSpec};
use gqe::training::{train, Stages, TrainConfig};

fn main() -> gqe::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let density: f64 = args.get(1).map_or(0.5, |s| s.parse().unwrap());
    let dim: usize = args.get(2).map_or(32, |s| s.parse().unwrap());
    let lr: f64 = args.get(3).map_or(0.01, |s| s.parse().unwrap());
    let seed: u64 = args.get(4).map_or(7, |s| s.parse().unwrap());
    let patience: usize = args.get(5).map_or(5, |s| s.parse().unwrap());
    let valid: usize = args.get(6).map_or(100, |s| s.parse().unwrap());
    let t0 = Instant::now();
    let g = generate(&SyntheticSpec::parse(&format!("blocks:3,100,{density},4,10"))?, seed)?;
    let split = split_edges(&g, 0.1, seed)?;
    let mut spec = DatasetSpec::uniform(2000, valid, 300, seed);
    spec.pool_size = 100;
    let ds = build_dataset(&split, &spec)?;
    println!(
        "graph: {} edges; dataset {} / {} / {} in {:.1}s",
        g.base_edge_count(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        t0.elapsed().as_secs_f64()
    );
    let cfg = TrainConfig {
        dim,
        learning_rate: lr,
        batch_size: 128,
        validation_interval: 50,
        patience,
        max_stage1_batches: 3000,
        max_stage2_batches: 3000,
        seed,
        ..TrainConfig::default()
    };
    for stages in [Stages::EdgeOnly, Stages::Full] {
        let t = Instant::now();
        let p = ModelParams::init(&split.train_graph, Variant::Bilinear, Psi::Min, dim, seed)?;
        let out = train(p, &split.train_graph, &ds, &cfg, stages)?;
        let report = evaluate(&out.params, &split.train_graph, &ds.test, &EvalOptions::default())?;
        println!(
            "{stages:?}: {} + {} batches, {} degenerate, {:.1}s",
            out.stage1_batches,
            out.stage2_batches,
            out.degenerate_terms,
            t.elapsed().as_secs_f64()
        );
        print!("{}", report.to_table());
        let inter = report.mean_auc_where(|s| s.has_intersection()).unwrap();
        let c1 = report.cell(Structure::Chain1, NegativeKind::Standard).unwrap().auc;
        let i2 = report.cell(Structure::Inter2, NegativeKind::Standard).unwrap().auc;
        println!("chain1 {c1:.4} inter2 {i2:.4} intersection-mean {inter:.4}");
    }
    Ok(())
}
