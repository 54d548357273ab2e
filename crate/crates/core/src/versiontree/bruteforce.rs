use serde::{Deserialize, Serialize};

use super::workspace::{compute_pair, Built, Workspace};
use super::TreeError;
use crate::embedding::GroupSchema;
use crate::model::ImageServiceRecord;
use crate::par::{self, Exec};
use crate::transform::DEFAULT_MISSING_PENALTY;

pub const DEFAULT_N_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceParams {
    pub n_max: usize,
    pub missing_penalty: f64,
    pub exec: Exec,
}

impl Default for BruteForceParams {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, missing_penalty: DEFAULT_MISSING_PENALTY, exec: Exec::default() }
    }
}

/// Undirected edges of the labeled tree on `n` vertices encoded by `seq`
/// (length `n − 2`).
pub fn decode_prufer(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    debug_assert_eq!(seq.len() + 2, n);
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Total order on candidate trees: weight (to 1e−9), then earlier root, then
/// a per-child code that prefers each version's parent to be the version
/// uploaded just before it.
type Key = (i64, usize, [u8; 16]);

fn quantize(w: f64) -> i64 {
    if w.is_finite() {
        (w * 1e9).round() as i64
    } else {
        i64::MAX
    }
}

fn orient(adj: &[Vec<usize>], root: usize, parent: &mut [Option<usize>]) {
    parent.iter_mut().for_each(|p| *p = None);
    let mut stack = vec![root];
    let mut seen = vec![false; adj.len()];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }
}

fn key_of(parent: &[Option<usize>], root: usize, weights: &[Vec<f64>]) -> Key {
    let n = parent.len();
    let mut total = 0.0;
    let mut code = [0u8; 16];
    for (child, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            total += weights[p][child];
            code[child] = if p < child { (child - p - 1) as u8 } else { (n + p - child) as u8 };
        }
    }
    (quantize(total), root, code)
}

/// Best rooted orientation over the trees whose Prüfer index lies in `range`.
fn best_in_range(n: usize, range: std::ops::Range<usize>, weights: &[Vec<f64>]) -> Option<(Key, Vec<Option<usize>>)> {
    let mut best: Option<(Key, Vec<Option<usize>>)> = None;
    let mut seq = vec![0usize; n - 2];
    let mut parent = vec![None; n];
    let mut adj = vec![Vec::with_capacity(n); n];
    for code in range {
        let mut c = code;
        for s in seq.iter_mut().rev() {
            *s = c % n;
            c /= n;
        }
        adj.iter_mut().for_each(Vec::clear);
        for (a, b) in decode_prufer(&seq, n) {
            adj[a].push(b);
            adj[b].push(a);
        }
        for root in 0..n {
            orient(&adj, root, &mut parent);
            let key = key_of(&parent, root, weights);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, parent.clone()));
            }
        }
    }
    best
}

/// Minimum-weight rooted spanning tree by exhaustive enumeration.
pub fn build_tree_bruteforce(
    versions: &[ImageServiceRecord],
    schemas: &[GroupSchema],
    params: &BruteForceParams,
) -> Result<Built, TreeError> {
    let n = versions.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    if n > params.n_max || n > 16 {
        return Err(TreeError::TooLarge { n, max: params.n_max.min(16) });
    }
    let mut ws = Workspace::new(versions, schemas, params.missing_penalty)?;
    if n == 1 {
        return Ok(ws.finish(&[None], &[]));
    }

    let ordered: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let clusters = &ws.clusters;
    let penalty = ws.penalty;
    let pairs = par::map_slice(params.exec, &ordered, |&(i, j)| ((i, j), compute_pair(&clusters[i], &clusters[j], penalty)));
    let mut weights = vec![vec![0.0; n]; n];
    for ((i, j), p) in &pairs {
        weights[*i][*j] = p.total_complexity;
    }
    ws.absorb(pairs);

    let parents = if n == 2 {
        let candidates = [vec![None, Some(0)], vec![Some(1), None]];
        candidates.into_iter().enumerate().min_by_key(|(root, p)| key_of(p, *root, &weights)).unwrap().1
    } else {
        let total = n.pow((n - 2) as u32);
        let chunks = total.min(n * n);
        let size = total.div_ceil(chunks);
        let partial = par::map_range(params.exec, chunks, |c| best_in_range(n, c * size..((c + 1) * size).min(total), &weights));
        partial.into_iter().flatten().min_by_key(|(k, _)| *k).expect("at least one tree").1
    };
    Ok(ws.finish(&parents, &[]))
}
