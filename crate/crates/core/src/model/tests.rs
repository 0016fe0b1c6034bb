use super::*;
use crate::kgraph::synthetic::{generate, SyntheticSpec};
use crate::kgraph::{ingest_sources, IngestOptions, NodeTypeId, TypedGraph};
use crate::numkernel::{grad_check, DenseMatrix, DenseVector};
use crate::querydag::{denotation, structure_catalog, QueryDag, Structure};
use crate::rng::{stream, Stream};
use crate::sampler::sample_query;
use crate::GqeError;

fn toy() -> TypedGraph {
    ingest_sources(
        ("e", "d1\ttreats\tx\nd2\ttreats\tx\nd1\ttreats\ty\n"),
        ("t", "d1\tdrug\nd2\tdrug\nx\tdisease\ny\tdisease\n"),
        None,
        &IngestOptions::default(),
    )
    .unwrap()
}

fn featured() -> TypedGraph {
    ingest_sources(
        ("e", "a\tr\tb\n"),
        ("t", "a\tT\nb\tU\n"),
        Some(("f", "a\t0 2\nb\t1\n")),
        &IngestOptions::default(),
    )
    .unwrap()
}

#[test]
fn embed_node_bag_of_features() {
    let g = featured();
    let p = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 4, 1).unwrap();
    let a = g.node_by_name("a").unwrap();
    let z = p.tensor(p.node_matrix(g.type_of(a)));
    let got = p.embed_node(&g, a).unwrap();
    for r in 0..4 {
        assert!((got.as_slice()[r] - (z.get(r, 0) + z.get(r, 2)) / 2.0).abs() < 1e-15);
    }
    let b = g.node_by_name("b").unwrap();
    let zb = p.tensor(p.node_matrix(g.type_of(b)));
    assert_eq!(p.embed_node(&g, b).unwrap(), zb.column_vector(1));
}

#[test]
fn exact_embeddings_are_indicators() {
    let g = toy();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    assert_eq!(p.dim, 4);
    for i in 0..4 {
        let v = crate::kgraph::NodeId(i as u32);
        assert_eq!(p.embed_node(&g, v).unwrap(), DenseVector::one_hot(4, i));
    }
}

#[test]
fn identity_operators_leave_input_unchanged() {
    let g = toy();
    let treats = g.relation_by_name("treats").unwrap();
    let q = DenseVector::new(vec![0.3, -1.0, 2.0]);
    let mut p = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 3, 0).unwrap();
    *p.tensor_mut(p.relation_param(treats)) = DenseMatrix::identity(3);
    assert_eq!(p.project(&q, treats).unwrap(), q);
    let mut p = ModelParams::init(&g, Variant::TransE, Psi::Min, 3, 0).unwrap();
    *p.tensor_mut(p.relation_param(treats)) = DenseMatrix::zeros(3, 1);
    assert_eq!(p.project(&q, treats).unwrap(), q);
    let mut p = ModelParams::init(&g, Variant::DistMult, Psi::Min, 3, 0).unwrap();
    *p.tensor_mut(p.relation_param(treats)) = DenseMatrix::from_vec(3, 1, vec![2.0, 0.0, -1.0]).unwrap();
    assert_eq!(p.project(&q, treats).unwrap().as_slice(), &[0.6, 0.0, -2.0]);
    assert!(matches!(
        p.project(&q, crate::kgraph::RelationId(99)),
        Err(GqeError::Argument(_))
    ));
}

#[test]
fn exact_projection_is_neighborhood_union() {
    let g = toy();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let n = |x: &str| g.node_by_name(x).unwrap().index();
    let treats = g.relation_by_name("treats").unwrap();
    let mut set = vec![0.0; 4];
    set[n("d1")] = 1.0;
    set[n("d2")] = 1.0;
    let out = p.project(&DenseVector::new(set), treats).unwrap();
    assert_eq!(out.as_slice()[n("x")], 2.0);
    assert_eq!(out.as_slice()[n("y")], 1.0);
    assert_eq!(out.as_slice()[n("d1")], 0.0);
}

#[test]
fn exact_intersection_is_min_and_symmetric() {
    let g = toy();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let a = DenseVector::new(vec![1.0, 0.0, 1.0, 0.0]);
    let b = DenseVector::new(vec![1.0, 1.0, 0.0, 0.0]);
    let ty = NodeTypeId(0);
    let out = p.intersect(&[a.clone(), b.clone()], ty).unwrap();
    assert_eq!(out.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(p.intersect(&[b.clone(), a.clone()], ty).unwrap(), out);
    assert_eq!(p.intersect(std::slice::from_ref(&a), ty).unwrap(), a);
    assert!(matches!(p.intersect(&[], ty), Err(GqeError::Argument(_))));
}

#[test]
fn learned_intersection_is_permutation_invariant() {
    let g = toy();
    let mut rng = stream(3, Stream::OracleCheck);
    for psi in [Psi::Min, Psi::Mean] {
        let p = ModelParams::init(&g, Variant::Bilinear, psi, 5, 2).unwrap();
        let vs: Vec<DenseVector> = (0..3)
            .map(|_| DenseVector::new((0..5).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()))
            .collect();
        let fwd = p.intersect(&vs, NodeTypeId(1)).unwrap();
        let rev: Vec<_> = vs.iter().rev().cloned().collect();
        let rot = vec![vs[1].clone(), vs[2].clone(), vs[0].clone()];
        if psi == Psi::Min {
            assert_eq!(p.intersect(&rev, NodeTypeId(1)).unwrap(), fwd);
            assert_eq!(p.intersect(&rot, NodeTypeId(1)).unwrap(), fwd);
        } else {
            for other in [rev, rot] {
                let o = p.intersect(&other, NodeTypeId(1)).unwrap();
                for (x, y) in o.as_slice().iter().zip(fwd.as_slice()) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn op_counts_match_edges() {
    let g = generate(&SyntheticSpec::parse("random:40,3,2,0.1").unwrap(), 5).unwrap();
    let p = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 6, 0).unwrap();
    let mut rng = stream(5, Stream::OracleCheck);
    for &s in structure_catalog() {
        let (q, _) = sample_query(&g, s, &mut rng).unwrap();
        let (_, c) = p.encode_query(&g, &q).unwrap();
        assert_eq!(c.projections, s.edge_count(), "{s}");
        assert!(c.intersections + c.pass_throughs <= q.nodes.len());
        assert_eq!(c.intersections, s.intersection_nodes().len());
    }
}

#[test]
fn inter_chain_counts() {
    let g = generate(&SyntheticSpec::parse("random:40,3,1,0.15").unwrap(), 7).unwrap();
    let p = ModelParams::init(&g, Variant::DistMult, Psi::Mean, 4, 0).unwrap();
    let mut rng = stream(7, Stream::OracleCheck);
    let (q, _) = sample_query(&g, Structure::InterChain, &mut rng).unwrap();
    let (_, c) = p.encode_query(&g, &q).unwrap();
    assert_eq!((c.projections, c.intersections, c.pass_throughs), (3, 1, 1));
}

#[test]
fn exact_mode_matches_oracle() {
    let g = generate(&SyntheticSpec::parse("random:50,3,2,0.06").unwrap(), 11).unwrap();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let mut rng = stream(11, Stream::OracleCheck);
    for &s in structure_catalog() {
        for _ in 0..30 {
            let (q, _) = sample_query(&g, s, &mut rng).unwrap();
            let (emb, _) = p.encode_query(&g, &q).unwrap();
            let positive: Vec<_> = p
                .score_all(&g, &emb)
                .unwrap()
                .into_iter()
                .filter(|(_, s)| *s > 0.0)
                .map(|(v, _)| v)
                .collect();
            assert_eq!(positive, denotation(&q, &g).unwrap().members(), "{s}");
        }
    }
}

#[test]
fn empty_denotation_scores_zero() {
    let g = ingest_sources(
        ("e", "d1\ttreats\tx\n"),
        ("t", "d1\tdrug\nx\tdisease\nw\tdisease\n"),
        None,
        &IngestOptions::default(),
    )
    .unwrap();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let n = |x: &str| g.node_by_name(x).unwrap();
    let inv = g.relation_by_name("treats_inv").unwrap();
    let (drug, dis) = (g.type_of(n("d1")), g.type_of(n("x")));
    let q = QueryDag::from_structure(Structure::Chain1, &[n("w")], &[inv], &[dis, drug]);
    assert!(denotation(&q, &g).unwrap().is_empty());
    let (emb, _) = p.encode_query(&g, &q).unwrap();
    assert!(emb.vector.is_zero());
    assert!(p.score_all(&g, &emb).unwrap().iter().all(|(_, s)| *s == 0.0));
}

#[test]
fn zero_query_vector_is_zero_score_only_in_exact_mode() {
    let g = toy();
    let exact = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let zero = QueryEmbedding {
        vector: DenseVector::zeros(4),
        target_type: NodeTypeId(1),
    };
    assert_eq!(exact.score(&zero, &DenseVector::one_hot(4, 0)).unwrap(), 0.0);
    let learned = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 4, 0).unwrap();
    assert!(matches!(
        learned.score(&zero, &DenseVector::one_hot(4, 0)),
        Err(GqeError::Degenerate(_))
    ));
}

#[test]
fn answer_ranks_members_first() {
    let g = toy();
    let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
    let n = |x: &str| g.node_by_name(x).unwrap();
    let treats = g.relation_by_name("treats").unwrap();
    let (drug, dis) = (g.type_of(n("d1")), g.type_of(n("x")));
    let q = QueryDag::from_structure(Structure::Chain1, &[n("d2")], &[treats], &[drug, dis]);
    let ranked = p.answer(&g, &q, 10).unwrap();
    assert_eq!(ranked.len(), 2);
    assert_eq!(ranked[0].0, n("x"));
    assert!(ranked[0].1 > 0.0);
    assert_eq!(ranked[1], (n("y"), 0.0));
    assert!(p.answer(&g, &q, 0).unwrap().is_empty());
}

#[test]
fn capacity_limit() {
    let g = toy();
    assert!(matches!(exact_parameters(&g, 64), Err(GqeError::Capacity(_))));
}

#[test]
fn hinge_values() {
    let g = toy();
    let p = ModelParams::init(&g, Variant::Bilinear, Psi::Min, 4, 0).unwrap();
    let n = |x: &str| g.node_by_name(x).unwrap();
    let treats = g.relation_by_name("treats").unwrap();
    let (drug, dis) = (g.type_of(n("d1")), g.type_of(n("x")));
    let q = QueryDag::from_structure(Structure::Chain1, &[n("d1")], &[treats], &[drug, dis]);
    let same = p.margin_loss(&g, &q, n("x"), n("x"), 1.0).unwrap();
    assert_eq!(same.loss, 1.0);
    let out = p.margin_loss(&g, &q, n("x"), n("y"), 1.0).unwrap();
    assert!((out.loss - (1.0 - out.positive_score + out.negative_score).max(0.0)).abs() < 1e-15);
    assert!(matches!(
        p.margin_loss(&g, &q, n("x"), n("d2"), 1.0),
        Err(GqeError::Argument(_))
    ));
}

#[test]
fn loss_gradients_pass_check() {
    let g = generate(&SyntheticSpec::parse("random:30,3,2,0.15").unwrap(), 3).unwrap();
    let mut rng = stream(3, Stream::OracleCheck);
    for variant in [Variant::Bilinear, Variant::DistMult, Variant::TransE] {
        for psi in [Psi::Min, Psi::Mean] {
            let p = ModelParams::init(&g, variant, psi, 8, 9).unwrap();
            let (q, pos) = sample_query(&g, Structure::InterChain, &mut rng).unwrap();
            let neg = *g
                .nodes_of_type(q.target_type().unwrap())
                .unwrap()
                .iter()
                .find(|&&v| v != pos)
                .unwrap();
            let report = grad_check(
                |t| {
                    let o = p.margin_loss_at(t, &g, &q, pos, neg, 1.0)?;
                    Ok((o.loss, o.gradients))
                },
                &p.tensors,
                1e-5,
            )
            .unwrap();
            let o = p.margin_loss(&g, &q, pos, neg, 1.0).unwrap();
            if o.kink_margin > 1e-3 && o.loss > 0.0 {
                assert!(report.passes(1e-4), "{variant} {psi}: {report:?}");
            }
        }
    }
}
