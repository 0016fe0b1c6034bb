use super::*;
use crate::evaluation::NegativeKind;
use crate::kgraph::split_edges;
use crate::kgraph::synthetic::{generate, SyntheticSpec};
use crate::model::{ModelParams, Psi, Variant};
use crate::numkernel::{DenseMatrix, Gradients, ParamId};
use crate::querydag::Structure;
use crate::sampler::{build_dataset, Dataset, DatasetSpec};
use crate::GqeError;

fn scalar_model(x: f64) -> ModelParams {
    let g = crate::kgraph::ingest_sources(("e", ""), ("t", "a\tT\n"), None, &Default::default()).unwrap();
    let mut p = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 1, 0).unwrap();
    *p.tensor_mut(ParamId(0)) = DenseMatrix::from_vec(1, 1, vec![x]).unwrap();
    p
}

fn grad(v: f64) -> Gradients {
    let mut g = Gradients::new();
    g.insert(ParamId(0), vec![v]);
    g
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut p = scalar_model(1.0);
    let before = p.clone();
    let mut st = OptimizerState::new(&p, AdamConstants::default());
    st.step(&mut p, &grad(0.0), 0.1).unwrap();
    assert_eq!(p, before);
}

#[test]
fn adam_first_step_on_square() {
    // f(x) = x^2 at x = 1: g = 2, m = 0.2, v = 0.004, m_hat = 2, v_hat = 4
    let mut p = scalar_model(1.0);
    let mut st = OptimizerState::new(&p, AdamConstants::default());
    st.step(&mut p, &grad(2.0), 0.1).unwrap();
    let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
    assert!((p.tensor(ParamId(0)).get(0, 0) - expected).abs() < 1e-12);
}

#[test]
fn adam_constant_gradient_moves_by_lr() {
    let mut p = scalar_model(0.0);
    let mut st = OptimizerState::new(&p, AdamConstants::default());
    let mut last = 0.0;
    for _ in 0..2000 {
        st.step(&mut p, &grad(3.7), 0.01).unwrap();
        let x = p.tensor(ParamId(0)).get(0, 0);
        let delta = last - x;
        last = x;
        assert!((delta - 0.01).abs() < 1e-6);
    }
}

#[test]
fn adam_rejects_non_finite_gradient_by_name() {
    let mut p = scalar_model(1.0);
    let before = p.clone();
    let mut st = OptimizerState::new(&p, AdamConstants::default());
    match st.step(&mut p, &grad(f64::NAN), 0.1) {
        Err(GqeError::Numeric(m)) => assert!(m.contains("Z/T"), "{m}"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(p, before);
    assert_eq!(st.step, 0);
}

fn fixture() -> (crate::kgraph::GraphSplit, Dataset) {
    let g = generate(&SyntheticSpec::parse("blocks:2,30,0.4,2,3").unwrap(), 1).unwrap();
    let split = split_edges(&g, 0.1, 1).unwrap();
    let mut spec = DatasetSpec::uniform(40, 10, 10, 1);
    spec.counts.retain(|s, _| matches!(s, Structure::Chain1 | Structure::Chain2 | Structure::Inter2));
    spec.pool_size = 20;
    let ds = build_dataset(&split, &spec).unwrap();
    (split, ds)
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        dim: 8,
        batch_size: 16,
        validation_interval: 5,
        max_stage1_batches: 10,
        max_stage2_batches: 10,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn stage2_batches_are_single_structure_and_weighted() {
    let (split, ds) = fixture();
    let cfg = small_cfg();
    let p = ModelParams::init(&split.train_graph, Variant::Bilinear, Psi::Min, cfg.dim, 0).unwrap();
    let out = train(p, &split.train_graph, &ds, &cfg, Stages::Full).unwrap();
    assert!(out.stage2_batches > 0);
    let stage2: Vec<_> = out.log.iter().filter(|r| r.stage == 2).collect();
    for batch in 1..=out.stage2_batches {
        let tags: Vec<_> = stage2
            .iter()
            .filter(|r| r.batch == batch)
            .map(|r| (r.structure, r.negatives))
            .collect();
        assert_eq!(
            tags,
            vec![
                (Structure::Chain1, NegativeKind::Standard),
                (Structure::Chain2, NegativeKind::Standard),
                (Structure::Inter2, NegativeKind::Standard),
                (Structure::Inter2, NegativeKind::Hard),
            ]
        );
    }
    for r in &stage2 {
        assert_eq!(r.weighted_loss, cfg.weight(r.structure) * r.raw_loss);
        if r.structure == Structure::Chain2 {
            assert_eq!(r.weighted_loss, r.raw_loss * 0.01);
        }
    }
    assert!(out.log.iter().filter(|r| r.stage == 1).all(|r| r.structure == Structure::Chain1));
    let best = out
        .validations
        .iter()
        .filter(|v| v.stage == 2)
        .map(|v| v.auc)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_validation, Some(best));
    for line in out.log_ndjson().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["batch", "structure", "raw_loss", "weighted_loss", "grad_norm"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
    }
}

#[test]
fn flat_validation_stops_after_patience() {
    let (split, ds) = fixture();
    let cfg = TrainConfig {
        learning_rate: 1e-300,
        patience: 3,
        max_stage1_batches: 1000,
        ..small_cfg()
    };
    let p = ModelParams::init(&split.train_graph, Variant::Bilinear, Psi::Min, cfg.dim, 0).unwrap();
    let out = train(p, &split.train_graph, &ds, &cfg, Stages::EdgeOnly).unwrap();
    assert_eq!(out.validations.len(), 4);
    assert_eq!(out.stage1_batches, 3 * cfg.validation_interval);
}

#[test]
fn same_seed_same_trajectory() {
    let (split, ds) = fixture();
    let cfg = small_cfg();
    let run = || {
        let p = ModelParams::init(&split.train_graph, Variant::DistMult, Psi::Mean, cfg.dim, 0).unwrap();
        train(p, &split.train_graph, &ds, &cfg, Stages::Full).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
}

#[test]
fn config_validation() {
    assert!(TrainConfig { patience: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
}
