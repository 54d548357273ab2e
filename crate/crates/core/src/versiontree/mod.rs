//! Provenance trees over the versions of one image.
//!
//! Three builders share one edge weight, the summed per-group transform
//! complexity from parent to child:
//!
//! * [`build_baseline_chain`] trusts upload order completely.
//! * [`build_tree_heuristic`] repairs local order inversions, then attaches each
//!   version to the cheapest of a few nearby, already placed versions.
//! * [`build_tree_bruteforce`] scores every rooted labeled tree.

mod bruteforce;
mod diff;
mod heuristic;
mod output;
mod workspace;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::GroupSchema;
use crate::model::ImageServiceRecord;
use crate::transform::{GroupEdgeKind, TransformError, DEFAULT_MISSING_PENALTY};

pub use bruteforce::{build_tree_bruteforce, decode_prufer, BruteForceParams, DEFAULT_N_MAX};
pub use diff::{haversine_km, semantic_diff, SemanticDiff, EARTH_RADIUS_KM};
pub use heuristic::{build_tree_heuristic, reorder_sequence, HeuristicParams};
pub use output::{to_document, to_dot, TreeDocument};
pub use workspace::Built;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("no versions to build a tree from")]
    Empty,
    #[error("{n} versions exceed the exhaustive-search limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("trees cover different versions")]
    NodeMismatch,
    #[error("invalid tree: {0}")]
    Invalid(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Heuristic,
    Bruteforce,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Baseline, Strategy::Heuristic, Strategy::Bruteforce];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Heuristic => "heuristic",
            Strategy::Bruteforce => "bruteforce",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAnnotation {
    pub total_complexity: f64,
    pub kind_per_group: BTreeMap<String, GroupEdgeKind>,
    pub diff: SemanticDiff,
    /// No candidate parent passed the complexity cap.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionTree {
    /// Version ids in upload order.
    pub nodes: Vec<String>,
    pub root: String,
    /// child id -> parent id
    pub parent: BTreeMap<String, String>,
    /// child id -> annotation of the edge into it
    #[serde(default)]
    pub edges: BTreeMap<String, EdgeAnnotation>,
}

impl VersionTree {
    /// A bare tree from a parent map, without edge annotations.
    pub fn from_parent_map(nodes: Vec<String>, parent: BTreeMap<String, String>) -> Result<Self, TreeError> {
        let roots: Vec<&String> = nodes.iter().filter(|n| !parent.contains_key(*n)).collect();
        let [root] = roots.as_slice() else {
            return Err(TreeError::Invalid(format!("expected one root, found {}", roots.len())));
        };
        let t = Self { root: (*root).clone(), nodes, parent, edges: BTreeMap::new() };
        t.check_invariants()?;
        Ok(t)
    }

    /// Builds a tree from a corpus-style map where the root maps to `None`.
    pub fn from_optional_parents(nodes: Vec<String>, map: &BTreeMap<String, Option<String>>) -> Result<Self, TreeError> {
        let parent = map.iter().filter_map(|(c, p)| p.clone().map(|p| (c.clone(), p))).collect();
        Self::from_parent_map(nodes, parent)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.parent.get(id).map(String::as_str)
    }

    pub fn children_of(&self, id: &str) -> Vec<&str> {
        self.nodes.iter().filter(|n| self.parent_of(n) == Some(id)).map(String::as_str).collect()
    }

    /// Single root, N−1 parent links, no cycles, everything reachable.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(String::as_str).collect();
        if ids.len() != self.nodes.len() {
            return Err(TreeError::Invalid("duplicate node id".into()));
        }
        if ids.is_empty() {
            return Err(TreeError::Invalid("no nodes".into()));
        }
        if !ids.contains(self.root.as_str()) {
            return Err(TreeError::Invalid(format!("root {:?} is not a node", self.root)));
        }
        if self.parent.contains_key(&self.root) {
            return Err(TreeError::Invalid("root has a parent".into()));
        }
        if self.parent.len() != self.nodes.len() - 1 {
            return Err(TreeError::Invalid(format!("{} parent links for {} nodes", self.parent.len(), self.nodes.len())));
        }
        for (c, p) in &self.parent {
            if !ids.contains(c.as_str()) || !ids.contains(p.as_str()) {
                return Err(TreeError::Invalid(format!("edge {p:?} -> {c:?} leaves the node set")));
            }
        }
        for n in &self.nodes {
            let mut cur = n.as_str();
            let mut steps = 0;
            while let Some(p) = self.parent_of(cur) {
                cur = p;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(TreeError::Invalid(format!("cycle through {n:?}")));
                }
            }
            if cur != self.root {
                return Err(TreeError::Invalid(format!("{n:?} does not reach the root")));
            }
        }
        if self.edges.keys().any(|c| !self.parent.contains_key(c)) {
            return Err(TreeError::Invalid("annotation on a non-edge".into()));
        }
        Ok(())
    }

    /// Sum of annotated edge complexities.
    pub fn total_weight(&self) -> f64 {
        self.edges.values().map(|e| e.total_complexity).sum()
    }
}

/// Share of versions whose parent agrees with `truth`; the root counts as one
/// version that agrees when both trees pick the same root.
pub fn tree_accuracy(constructed: &VersionTree, truth: &VersionTree) -> Result<f64, TreeError> {
    let a: BTreeSet<&String> = constructed.nodes.iter().collect();
    let b: BTreeSet<&String> = truth.nodes.iter().collect();
    if a != b || a.is_empty() {
        return Err(TreeError::NodeMismatch);
    }
    let root_ok = usize::from(constructed.root == truth.root);
    let parents_ok = truth.parent.iter().filter(|(c, p)| constructed.parent.get(*c) == Some(*p)).count();
    Ok((root_ok + parents_ok) as f64 / truth.nodes.len() as f64)
}

/// Builder settings shared by the command line and the evaluation harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub heuristic: HeuristicParams,
    pub n_max: usize,
    pub missing_penalty: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { heuristic: HeuristicParams::default(), n_max: DEFAULT_N_MAX, missing_penalty: DEFAULT_MISSING_PENALTY }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        self.heuristic.validate()?;
        if self.n_max == 0 || self.n_max > 10 {
            return Err(TreeError::Params(format!("n_max must be in 1..=10, got {}", self.n_max)));
        }
        if !(self.missing_penalty >= 0.0 && self.missing_penalty.is_finite()) {
            return Err(TreeError::Params("missing_penalty must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Runs one strategy.
pub fn build_tree(
    strategy: Strategy,
    versions: &[ImageServiceRecord],
    schemas: &[GroupSchema],
    cfg: &TreeConfig,
    exec: crate::Exec,
) -> Result<Built, TreeError> {
    match strategy {
        Strategy::Baseline => build_baseline_chain(versions, schemas, cfg.missing_penalty),
        Strategy::Heuristic => build_tree_heuristic(versions, schemas, &cfg.heuristic, cfg.missing_penalty),
        Strategy::Bruteforce => build_tree_bruteforce(
            versions,
            schemas,
            &BruteForceParams { n_max: cfg.n_max, missing_penalty: cfg.missing_penalty, exec },
        ),
    }
}

/// Upload order taken as the derivation chain.
pub fn build_baseline_chain(
    versions: &[ImageServiceRecord],
    schemas: &[GroupSchema],
    missing_penalty: f64,
) -> Result<Built, TreeError> {
    let mut ws = workspace::Workspace::new(versions, schemas, missing_penalty)?;
    let parents: Vec<Option<usize>> = (0..ws.len()).map(|i| i.checked_sub(1)).collect();
    Ok(ws.finish(&parents, &[]))
}
