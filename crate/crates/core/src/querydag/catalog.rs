use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GqeError;

/// The seven query shapes with one to three edges.
///
/// Every shape is an in-tree rooted at the target: each non-target query
/// node has exactly one outgoing edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Chain1,
    Chain2,
    Chain3,
    Inter2,
    Inter3,
    InterChain,
    ChainInter,
}

/// Node roles in a structure template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateRole {
    Anchor,
    Variable,
    Target,
}

impl Structure {
    pub const ALL: [Structure; 7] = [
        Structure::Chain1,
        Structure::Chain2,
        Structure::Chain3,
        Structure::Inter2,
        Structure::Inter3,
        Structure::InterChain,
        Structure::ChainInter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Chain1 => "chain1",
            Structure::Chain2 => "chain2",
            Structure::Chain3 => "chain3",
            Structure::Inter2 => "inter2",
            Structure::Inter3 => "inter3",
            Structure::InterChain => "inter_chain",
            Structure::ChainInter => "chain_inter",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }

    /// Node roles; anchors first, the target last.
    pub fn roles(self) -> &'static [TemplateRole] {
        use TemplateRole::*;
        match self {
            Structure::Chain1 => &[Anchor, Target],
            Structure::Chain2 => &[Anchor, Variable, Target],
            Structure::Chain3 => &[Anchor, Variable, Variable, Target],
            Structure::Inter2 => &[Anchor, Anchor, Target],
            Structure::Inter3 => &[Anchor, Anchor, Anchor, Target],
            Structure::InterChain | Structure::ChainInter => &[Anchor, Anchor, Variable, Target],
        }
    }

    /// Template edges `(src, dst)` over [`Structure::roles`] indices, in
    /// topological order of the source.
    pub fn template_edges(self) -> &'static [(usize, usize)] {
        match self {
            Structure::Chain1 => &[(0, 1)],
            Structure::Chain2 => &[(0, 1), (1, 2)],
            Structure::Chain3 => &[(0, 1), (1, 2), (2, 3)],
            Structure::Inter2 => &[(0, 2), (1, 2)],
            Structure::Inter3 => &[(0, 3), (1, 3), (2, 3)],
            Structure::InterChain => &[(0, 2), (1, 2), (2, 3)],
            Structure::ChainInter => &[(0, 2), (1, 3), (2, 3)],
        }
    }

    pub fn target_index(self) -> usize {
        self.roles().len() - 1
    }

    pub fn edge_count(self) -> usize {
        self.template_edges().len()
    }

    /// Template nodes in breadth-first order from the target, walking edges
    /// backwards. This is the order the sampler expands nodes in.
    pub fn expansion_order(self) -> Vec<usize> {
        let mut order = vec![self.target_index()];
        let mut i = 0;
        while i < order.len() {
            let node = order[i];
            order.extend(
                self.template_edges()
                    .iter()
                    .filter(|(_, d)| *d == node)
                    .map(|(s, _)| *s),
            );
            i += 1;
        }
        order
    }

    /// In-degrees of the non-anchor template nodes in expansion order: the
    /// number of edges sampled from each node when walking out from the target.
    pub fn degree_vector(self) -> Vec<usize> {
        self.expansion_order()
            .into_iter()
            .map(|n| self.template_edges().iter().filter(|(_, d)| *d == n).count())
            .filter(|&d| d > 0)
            .collect()
    }

    /// Template nodes where two or more edges meet.
    pub fn intersection_nodes(self) -> Vec<usize> {
        (0..self.roles().len())
            .filter(|&n| self.template_edges().iter().filter(|(_, d)| *d == n).count() > 1)
            .collect()
    }

    pub fn has_intersection(self) -> bool {
        !self.intersection_nodes().is_empty()
    }

    /// Multi-edge paths without any intersection.
    pub fn is_path(self) -> bool {
        !self.has_intersection() && self.edge_count() > 1
    }

    pub fn has_bound_variables(self) -> bool {
        self.roles().contains(&TemplateRole::Variable)
    }
}

/// All seven structures.
pub fn structure_catalog() -> &'static [Structure] {
    &Structure::ALL
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = GqeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| GqeError::Argument(format!("unknown structure `{s}`")))
    }
}
