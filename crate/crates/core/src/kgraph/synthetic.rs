//! Built-in graph generators for tests and the desk-scale pipeline.
//!
//! `blocks:K,N,p[,R[,C]]` builds K node types ("blocks") of N nodes. Node
//! `i` of a type carries two planted community labels with C values each:
//! `c0(i) = i mod C` and `c1(i) = (i / C) mod C`. Relation `r` runs from
//! type `r mod K` to type `(r+1) mod K` and reads the target's label
//! `c_k` with `k = (r / K) mod 2`, mapped through a random permutation
//! `π_r`: an edge `(u, r, v)` is drawn with probability `p` when
//! `c_k(v) = π_r(c0(u))` and never otherwise. With `R > K`, two relations
//! into the same type constrain independent labels, so intersections are
//! strictly narrower than either branch. Defaults: `R = K + 1`, `C = 10`.
//!
//! `random:N,R,T,p` builds N nodes spread round-robin over T types and R
//! relations with random domain/range types; every type-compatible pair is
//! an edge with probability `p`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::{Edge, SchemaBuilder, TypedGraph};
use crate::error::{GqeError, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticSpec {
    Blocks {
        types: usize,
        nodes_per_type: usize,
        density: f64,
        relations: usize,
        communities: usize,
    },
    Random {
        nodes: usize,
        relations: usize,
        types: usize,
        density: f64,
    },
}

impl SyntheticSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |m: &str| GqeError::Argument(format!("synthetic spec `{s}`: {m}"));
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected kind:args"))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let int = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing argument"))?
                .parse()
                .map_err(|_| bad("expected an integer"))
        };
        let real = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing argument"))?
                .parse()
                .map_err(|_| bad("expected a number"))
        };
        let spec = match kind {
            "blocks" => {
                if !(3..=5).contains(&parts.len()) {
                    return Err(bad("blocks takes K,N,p[,R[,C]]"));
                }
                let types = int(0)?;
                SyntheticSpec::Blocks {
                    types,
                    nodes_per_type: int(1)?,
                    density: real(2)?,
                    relations: if parts.len() > 3 { int(3)? } else { types + 1 },
                    communities: if parts.len() > 4 { int(4)? } else { 10 },
                }
            }
            "random" => {
                if parts.len() != 4 {
                    return Err(bad("random takes N,R,T,p"));
                }
                SyntheticSpec::Random {
                    nodes: int(0)?,
                    relations: int(1)?,
                    types: int(2)?,
                    density: real(3)?,
                }
            }
            _ => return Err(bad("unknown kind (blocks | random)")),
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let (density, types) = match *self {
            SyntheticSpec::Blocks {
                types,
                density,
                communities,
                ..
            } => {
                if communities == 0 {
                    return Err(GqeError::Argument("communities must be >= 1".into()));
                }
                (density, types)
            }
            SyntheticSpec::Random { types, density, .. } => (density, types),
        };
        if types == 0 {
            return Err(GqeError::Argument("need at least one node type".into()));
        }
        if !(0.0..=1.0).contains(&density) {
            return Err(GqeError::Argument(format!("density {density} outside [0, 1]")));
        }
        Ok(())
    }
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<TypedGraph> {
    let mut rng = stream(seed, Stream::SyntheticGraph);
    let mut b = SchemaBuilder::new();
    let mut edges = Vec::new();
    match *spec {
        SyntheticSpec::Blocks {
            types,
            nodes_per_type,
            density,
            relations,
            communities,
        } => {
            let members: Vec<Vec<_>> = (0..types)
                .map(|t| {
                    (0..nodes_per_type)
                        .map(|i| b.node(&format!("t{t}_{i}"), &format!("type{t}")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            for r in 0..relations {
                let (dt, rt) = (r % types, (r + 1) % types);
                let rel = b.relation(
                    &format!("rel{r}"),
                    b.type_of(members[dt][0]),
                    b.type_of(members[rt][0]),
                )?;
                let mut perm: Vec<usize> = (0..communities).collect();
                perm.shuffle(&mut rng);
                let view = (r / types) % 2;
                let label = |j: usize| if view == 0 { j % communities } else { (j / communities) % communities };
                for (i, &u) in members[dt].iter().enumerate() {
                    let target = perm[i % communities];
                    for (j, &v) in members[rt].iter().enumerate() {
                        if label(j) == target && rng.gen_bool(density) {
                            edges.push(Edge::new(u, rel, v));
                        }
                    }
                }
            }
        }
        SyntheticSpec::Random {
            nodes,
            relations,
            types,
            density,
        } => {
            let ids: Vec<_> = (0..nodes)
                .map(|i| b.node(&format!("v{i}"), &format!("type{}", i % types)))
                .collect::<Result<_>>()?;
            for r in 0..relations {
                let (dt, rt) = (rng.gen_range(0..types), rng.gen_range(0..types));
                let (dty, rty) = (b.node_type(&format!("type{dt}")), b.node_type(&format!("type{rt}")));
                let rel = b.relation(&format!("rel{r}"), dty, rty)?;
                for &u in ids.iter().filter(|&&u| b.type_of(u) == dty) {
                    for &v in ids.iter().filter(|&&v| b.type_of(v) == rty) {
                        if rng.gen_bool(density) {
                            edges.push(Edge::new(u, rel, v));
                        }
                    }
                }
            }
        }
    }
    TypedGraph::from_base_edges(b.build()?, &edges)
}
