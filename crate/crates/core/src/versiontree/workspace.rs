use std::collections::BTreeMap;

use serde::Serialize;

use super::{semantic_diff, EdgeAnnotation, TreeError, VersionTree};
use crate::embedding::{build_clusters, Cluster, GroupSchema};
use crate::ingest::sort_records;
use crate::model::ImageServiceRecord;
use crate::transform::{pair_transforms, PairTransforms, TransformError};

/// A finished tree plus the cost of building it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Built {
    pub tree: VersionTree,
    pub total_weight: f64,
    /// `choose_transform` calls.
    pub fit_count: usize,
    /// Ordered version pairs whose transforms were computed.
    pub pair_count: usize,
}

/// Upload-ordered versions, their clusters and a memo of pair fits.
pub(crate) struct Workspace {
    pub records: Vec<ImageServiceRecord>,
    pub clusters: Vec<Cluster>,
    pub penalty: f64,
    cache: BTreeMap<(usize, usize), PairTransforms>,
    fit_count: usize,
}

impl Workspace {
    pub fn new(versions: &[ImageServiceRecord], schemas: &[GroupSchema], penalty: f64) -> Result<Self, TreeError> {
        if versions.is_empty() {
            return Err(TreeError::Empty);
        }
        let mut records = versions.to_vec();
        sort_records(&mut records);
        let clusters = build_clusters(&records, schemas);
        Ok(Self { records, clusters, penalty, cache: BTreeMap::new(), fit_count: 0 })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn pair(&mut self, from: usize, to: usize) -> &PairTransforms {
        if !self.cache.contains_key(&(from, to)) {
            let p = compute_pair(&self.clusters[from], &self.clusters[to], self.penalty);
            self.fit_count += p.fit_count;
            self.cache.insert((from, to), p);
        }
        &self.cache[&(from, to)]
    }

    /// Stores pairs computed elsewhere (e.g. in parallel).
    pub fn absorb(&mut self, pairs: Vec<((usize, usize), PairTransforms)>) {
        for (k, p) in pairs {
            if !self.cache.contains_key(&k) {
                self.fit_count += p.fit_count;
                self.cache.insert(k, p);
            }
        }
    }

    pub fn finish(&mut self, parents: &[Option<usize>], forced: &[usize]) -> Built {
        let mut parent = BTreeMap::new();
        let mut edges = BTreeMap::new();
        let mut total_weight = 0.0;
        let mut root = 0;
        for (child, p) in parents.iter().enumerate() {
            let Some(p) = *p else {
                root = child;
                continue;
            };
            let pair = self.pair(p, child).clone();
            total_weight += pair.total_complexity;
            let annotation = EdgeAnnotation {
                total_complexity: pair.total_complexity,
                kind_per_group: pair.kind_per_group(),
                diff: semantic_diff(&self.records[p], &self.records[child]),
                forced: forced.contains(&child),
            };
            let id = self.records[child].id.clone();
            parent.insert(id.clone(), self.records[p].id.clone());
            edges.insert(id, annotation);
        }
        let tree = VersionTree {
            nodes: self.records.iter().map(|r| r.id.clone()).collect(),
            root: self.records[root].id.clone(),
            parent,
            edges,
        };
        debug_assert!(tree.check_invariants().is_ok());
        Built { tree, total_weight, fit_count: self.fit_count, pair_count: self.cache.len() }
    }
}

/// Pair fits that never fail: versions without any common group are joined
/// by penalties alone.
pub(crate) fn compute_pair(a: &Cluster, b: &Cluster, penalty: f64) -> PairTransforms {
    match pair_transforms(a, b, penalty) {
        Ok(p) => p,
        Err(TransformError::NoOverlap(..)) | Err(TransformError::Dimension { .. }) => {
            let mut missing: Vec<String> = a.points.keys().chain(b.points.keys()).cloned().collect();
            missing.sort();
            missing.dedup();
            PairTransforms {
                from_version: a.version_id.clone(),
                to_version: b.version_id.clone(),
                fits: BTreeMap::new(),
                total_complexity: penalty * missing.len() as f64,
                missing,
                fit_count: 0,
            }
        }
    }
}
