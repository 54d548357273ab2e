use serde::{Deserialize, Serialize};

use super::workspace::{compute_pair, Built, Workspace};
use super::TreeError;
use crate::embedding::{intersection_score, Cluster, GroupSchema};
use crate::model::ImageServiceRecord;
use crate::transform::{pair_distance, Matrix, PairTransforms, TransformFit, TransformKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicParams {
    /// Two group points closer than this count as overlapping.
    pub epsilon: f64,
    pub threshold_0: f64,
    /// Threshold multiplier after each swap (> 1 makes later swaps rarer).
    pub growth: f64,
    /// Weight of the overlap gain added to the threshold after a swap.
    pub increment: f64,
    pub max_passes: usize,
    /// Per-group complexity above which one version is not derivable from
    /// another.
    pub accept_complexity: f64,
    /// Placed versions considered as parents for each new one.
    pub candidates: usize,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            threshold_0: 0.0,
            growth: 1.5,
            increment: 0.1,
            max_passes: 10,
            accept_complexity: 5.0,
            candidates: 3,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |m: &str| Err(TreeError::Params(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if !(self.threshold_0 >= 0.0) {
            return bad("threshold_0 must be >= 0");
        }
        if !(self.growth > 1.0) {
            return bad("growth must be > 1");
        }
        if !(self.increment > 0.0) {
            return bad("increment must be > 0");
        }
        if self.max_passes == 0 {
            return bad("max_passes must be >= 1");
        }
        if !(self.accept_complexity > 0.0) {
            return bad("accept_complexity must be > 0");
        }
        if self.candidates == 0 {
            return bad("candidates must be >= 1");
        }
        Ok(())
    }
}

/// Largest per-group complexity over the groups both versions carry.
fn derivable(p: &PairTransforms, cap: f64) -> bool {
    p.fits.values().all(|f| f.is_feasible() && f.complexity <= cap)
}

/// Adjacent-swap passes over upload order.
///
/// At each interior position the next version is moved in front of the
/// current one when it overlaps more with the preceding version than the
/// current one does, by at least the running threshold, and both new
/// adjacencies are derivable. Every swap raises the threshold
/// geometrically. Returns a permutation of `0..n`.
fn reorder_with(
    n: usize,
    params: &HeuristicParams,
    overlap: &dyn Fn(usize, usize) -> f64,
    derivable: &mut dyn FnMut(usize, usize) -> bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut threshold = params.threshold_0;
    for _ in 0..params.max_passes {
        let mut swapped = false;
        for pos in 1..n.saturating_sub(1) {
            let (prev, cur, next) = (order[pos - 1], order[pos], order[pos + 1]);
            let gain = overlap(prev, next) - overlap(prev, cur);
            if gain <= 0.0 || gain < threshold {
                continue;
            }
            if derivable(prev, next) && derivable(next, cur) {
                order.swap(pos, pos + 1);
                threshold = params.growth * threshold + params.increment * gain.abs();
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    order
}

/// Reorders upload-ordered clusters; returns indices into `clusters`.
pub fn reorder_sequence(clusters: &[Cluster], params: &HeuristicParams) -> Vec<usize> {
    let overlap = |i: usize, j: usize| intersection_score(&clusters[i], &clusters[j], params.epsilon);
    let mut check = |i: usize, j: usize| derivable(&compute_pair(&clusters[i], &clusters[j], 0.0), params.accept_complexity);
    reorder_with(clusters.len(), params, &overlap, &mut check)
}

/// The do-nothing transform for every group of `c`.
fn identity_pair(c: &Cluster) -> PairTransforms {
    let fits = c
        .points
        .iter()
        .map(|(g, p)| {
            let fit = TransformFit {
                kind: TransformKind::Linear,
                delta: Matrix::identity(p.values.len()),
                residual: 0.0,
                complexity: 0.0,
            };
            (g.clone(), fit)
        })
        .collect();
    PairTransforms {
        from_version: c.version_id.clone(),
        to_version: c.version_id.clone(),
        fits,
        missing: Vec::new(),
        total_complexity: 0.0,
        fit_count: 0,
    }
}

/// Reorder, root at the first version, then attach each later version to
/// the cheapest derivable parent among its nearest placed neighbours.
pub fn build_tree_heuristic(
    versions: &[ImageServiceRecord],
    schemas: &[GroupSchema],
    params: &HeuristicParams,
    missing_penalty: f64,
) -> Result<Built, TreeError> {
    params.validate()?;
    let mut ws = Workspace::new(versions, schemas, missing_penalty)?;
    let n = ws.len();

    let clusters = ws.clusters.clone();
    let overlap = |i: usize, j: usize| intersection_score(&clusters[i], &clusters[j], params.epsilon);
    let cap = params.accept_complexity;
    let order = {
        let mut check = |i: usize, j: usize| derivable(ws.pair(i, j), cap);
        reorder_with(n, params, &overlap, &mut check)
    };

    let root = order[0];
    let root_identity = identity_pair(&ws.clusters[root]);
    let mut parents: Vec<Option<usize>> = vec![None; n];
    let mut forced = Vec::new();
    let mut placed = vec![root];

    for &x in &order[1..] {
        let from_root = ws.pair(root, x).clone();
        // Nearest placed versions by distance between root-relative deltas;
        // most recently placed first so that ties favour recency.
        let mut ranked: Vec<(usize, f64)> = placed
            .iter()
            .rev()
            .map(|&p| {
                let reference = if p == root { root_identity.clone() } else { ws.pair(root, p).clone() };
                (p, pair_distance(&from_root, &reference, missing_penalty))
            })
            .collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        ranked.truncate(params.candidates);

        let mut best: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64)> = None;
        for &(p, _) in &ranked {
            let pair = ws.pair(p, x);
            let w = pair.total_complexity;
            if fallback.is_none_or(|(_, bw)| w < bw) {
                fallback = Some((p, w));
            }
            if derivable(pair, cap) && best.is_none_or(|(_, bw)| w < bw) {
                best = Some((p, w));
            }
        }
        let parent = match best {
            Some((p, _)) => p,
            None => {
                forced.push(x);
                fallback.expect("at least the root is a candidate").0
            }
        };
        parents[x] = Some(parent);
        placed.push(x);
    }
    Ok(ws.finish(&parents, &forced))
}
