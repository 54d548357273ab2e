//! Synthetic version corpora with known provenance, and the harness that
//! scores tree builders against them.
//!
//! A corpus starts from one internally consistent seed record. Every edge of
//! a random tree applies a short list of [`MutationOp`]s to the parent to
//! produce the child, and versions are "uploaded" in a random order that
//! respects the tree except for a few planted adjacent inversions.

mod experiment;
mod ops;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate, CameraAttrs, CaptureAction, ContextualAttrs, EnvironmentAttrs, FunctionalAttrs, ImageServiceRecord,
    ModeSwitch, SpatialAttrs, TemporalAttrs, WhiteBalance,
};
use crate::versiontree::VersionTree;

pub use experiment::{run_experiment, EvalResult, ExperimentConfig, InstanceRow, StrategySummary};
pub use ops::{apply_op, designated_group, MutationKind, MutationOp, CAMERA_SWAPS, NARRATIVES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("edge {parent} -> {child}: {op} needs {field}, which is absent")]
    Inapplicable { parent: String, child: String, op: &'static str, field: &'static str },
    #[error("edge {parent} -> {child} produced an invalid record: {message}")]
    Invalid { parent: String, child: String, message: String },
}

/// Everything needed to regenerate one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    /// Defaults to the shipped consistent record.
    #[serde(default = "seed_record")]
    pub seed_record: ImageServiceRecord,
    /// node id -> parent id; the root maps to null.
    pub tree_shape: BTreeMap<String, Option<String>>,
    /// child id -> mutations applied along the edge into it.
    #[serde(default)]
    pub ops_per_edge: BTreeMap<String, Vec<MutationOp>>,
    pub rng_seed: u64,
    pub upload_order: Vec<String>,
}

/// Knobs of [`random_spec_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecOptions {
    /// Chance that each adjacent pair of the upload order is swapped.
    pub inversion_rate: f64,
}

impl Default for SpecOptions {
    fn default() -> Self {
        Self { inversion_rate: 0.05 }
    }
}

/// The consistent record every generated corpus grows from: a daylight
/// shot by the Hudson river in January 2009.
pub fn seed_record() -> ImageServiceRecord {
    let utc = |h, m| Utc.with_ymd_and_hms(2009, 1, 15, h, m, 0).unwrap();
    let mut r = ImageServiceRecord::bare("seed", Utc.with_ymd_and_hms(2009, 1, 15, 21, 0, 0).unwrap());
    r.functional = Some(FunctionalAttrs {
        capture_action: CaptureAction::ShutterPress,
        mode_switch: ModeSwitch::Photo,
        capture_delay: 0.0,
    });
    r.spatial = Some(SpatialAttrs {
        latitude: 40.7128,
        longitude: -74.006,
        city: Some("New York".into()),
        state: Some("New York".into()),
        country: Some("United States".into()),
    });
    r.temporal = Some(TemporalAttrs {
        datetime_original: Some(utc(20, 31)),
        datetime_digitized: Some(utc(20, 31)),
        datetime_modified: Some(utc(20, 35)),
        timezone_offset: Some(-300),
        gps_timestamp: Some(utc(20, 31)),
    });
    r.contextual = Some(ContextualAttrs {
        title: Some("Plane lands on the Hudson".into()),
        caption: Some("Passenger jet floating on the Hudson river after an emergency landing, ferries approaching".into()),
        headline: Some("Everyone aboard rescued from the river".into()),
    });
    // f/8 at 1/256 s: EV = log2(64 * 256) = 14, APEX shutter value 8.
    r.camera = Some(CameraAttrs {
        make: Some("Canon".into()),
        model: Some("Canon EOS 5D Mark II".into()),
        focal_length: Some(50.0),
        aperture: Some(8.0),
        exposure_time: Some(1.0 / 256.0),
        shutter_speed: Some(8.0),
        iso: Some(200),
        exposure_value: Some(14.0),
        white_balance: Some(WhiteBalance::Daylight),
        resolution: Some((5616, 3744)),
    });
    r.environment = Some(EnvironmentAttrs {
        temperature: Some(-6.0),
        humidity: Some(45.0),
        pressure: Some(1022.0),
        weather: Some("sunny".into()),
        water_depth: Some(0.0),
    });
    r
}

pub fn node_id(i: usize) -> String {
    format!("v{:02}", i + 1)
}

fn prufer_parents(n: usize, rng: &mut ChaCha8Rng) -> Vec<Option<usize>> {
    if n == 1 {
        return vec![None];
    }
    let edges = if n == 2 {
        vec![(0, 1)]
    } else {
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
        crate::versiontree::decode_prufer(&seq, n)
    };
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let root = rng.gen_range(0..n);
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    parent
}

pub fn random_spec(n_nodes: usize, n_ops_per_edge: usize, rng_seed: u64, seed: &ImageServiceRecord) -> CorpusSpec {
    random_spec_with(n_nodes, n_ops_per_edge, rng_seed, seed, &SpecOptions::default())
}

/// Uniform labeled tree and root, `n_ops_per_edge` distinct mutation kinds per
/// edge, and an upload order drawn as a random topological order with
/// adjacent swaps.
pub fn random_spec_with(
    n_nodes: usize,
    n_ops_per_edge: usize,
    rng_seed: u64,
    seed: &ImageServiceRecord,
    opts: &SpecOptions,
) -> CorpusSpec {
    assert!(n_nodes >= 1, "a corpus needs at least one version");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let parents = prufer_parents(n_nodes, &mut rng);

    let mut ops_per_edge = BTreeMap::new();
    for (child, p) in parents.iter().enumerate() {
        if p.is_none() {
            continue;
        }
        let mut kinds = MutationKind::ALL.to_vec();
        kinds.shuffle(&mut rng);
        let ops: Vec<MutationOp> = kinds
            .into_iter()
            .take(n_ops_per_edge.min(MutationKind::ALL.len()))
            .map(|k| MutationOp::sample(k, &mut rng))
            .collect();
        ops_per_edge.insert(node_id(child), ops);
    }

    let mut children = vec![Vec::new(); n_nodes];
    for (c, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(c);
        }
    }
    let root = parents.iter().position(Option::is_none).unwrap();
    let mut available = vec![root];
    let mut order = Vec::with_capacity(n_nodes);
    while !available.is_empty() {
        let x = available.swap_remove(rng.gen_range(0..available.len()));
        order.push(x);
        available.extend(&children[x]);
        available.sort_unstable();
    }
    for i in 0..n_nodes.saturating_sub(1) {
        if rng.gen_bool(opts.inversion_rate.clamp(0.0, 1.0)) {
            order.swap(i, i + 1);
        }
    }

    CorpusSpec {
        seed_record: seed.clone(),
        tree_shape: parents.iter().enumerate().map(|(c, p)| (node_id(c), p.map(node_id))).collect(),
        ops_per_edge,
        rng_seed: rng.gen(),
        upload_order: order.into_iter().map(node_id).collect(),
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let nodes: BTreeSet<&String> = self.tree_shape.keys().collect();
        let order: BTreeSet<&String> = self.upload_order.iter().collect();
        if order.len() != self.upload_order.len() || order != nodes {
            return Err(GenError::Spec("upload_order must be a permutation of the tree nodes".into()));
        }
        self.truth_tree().map_err(|e| GenError::Spec(e.to_string()))?;
        if let Some(k) = self.ops_per_edge.keys().find(|k| !matches!(self.tree_shape.get(*k), Some(Some(_)))) {
            return Err(GenError::Spec(format!("ops given for {k:?}, which is not a child")));
        }
        for ops in self.ops_per_edge.values() {
            for op in ops {
                op.check_bounds().map_err(GenError::Spec)?;
            }
        }
        if !validate(&self.seed_record).is_empty() {
            return Err(GenError::Spec("seed record does not validate".into()));
        }
        Ok(())
    }

    pub fn truth_tree(&self) -> Result<VersionTree, crate::versiontree::TreeError> {
        VersionTree::from_optional_parents(self.upload_order.clone(), &self.tree_shape)
    }
}

/// Saved edits carry a later modification time than their source, by a
/// random delay in this range (seconds).
const RESAVE_DELAY_S: (i64, i64) = (600, 3 * 86_400);

/// Materializes a spec: versions in upload order plus the true tree.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<(Vec<ImageServiceRecord>, VersionTree), GenError> {
    spec.validate()?;
    let truth = spec.truth_tree().map_err(|e| GenError::Spec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut made: BTreeMap<String, ImageServiceRecord> = BTreeMap::new();
    let mut root = spec.seed_record.clone();
    root.id = truth.root.clone();
    made.insert(truth.root.clone(), root);
    let mut queue = VecDeque::from([truth.root.clone()]);
    while let Some(p) = queue.pop_front() {
        for c in truth.children_of(&p) {
            let mut rec = made[&p].clone();
            rec.id = c.to_string();
            let ops = spec.ops_per_edge.get(c).map(Vec::as_slice).unwrap_or(&[]);
            for op in ops {
                apply_op(&mut rec, op).map_err(|(op, field)| GenError::Inapplicable {
                    parent: p.clone(),
                    child: c.to_string(),
                    op,
                    field,
                })?;
            }
            if !ops.is_empty() {
                let delay = rng.gen_range(RESAVE_DELAY_S.0..=RESAVE_DELAY_S.1);
                if let Some(t) = rec.temporal.as_mut() {
                    let latest = [t.datetime_original, t.datetime_digitized, t.datetime_modified].into_iter().flatten().max();
                    if let Some(latest) = latest {
                        t.datetime_modified = Some(latest + Duration::seconds(delay));
                    }
                }
            }
            let problems = validate(&rec);
            if let Some(v) = problems.first() {
                return Err(GenError::Invalid { parent: p.clone(), child: c.to_string(), message: v.to_string() });
            }
            made.insert(c.to_string(), rec);
            queue.push_back(c.to_string());
        }
    }

    let mut upload = spec.seed_record.upload_time;
    let mut versions = Vec::with_capacity(spec.upload_order.len());
    for id in &spec.upload_order {
        let mut r = made.remove(id).expect("every node generated");
        r.upload_time = upload;
        versions.push(r);
        upload += Duration::minutes(rng.gen_range(10..=360));
    }
    Ok((versions, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{evaluate_all, CapabilityDb, FixtureEnvironment, Tolerances};
    use crate::model::{serialize_record, values::format_ts};

    #[test]
    fn seed_is_consistent() {
        let report = evaluate_all(&seed_record(), &CapabilityDb::bundled(), &FixtureEnvironment::bundled(), &Tolerances::default());
        assert_eq!(report.aggregate, Some(0.0), "{report:#?}");
        assert!(validate(&seed_record()).is_empty());
    }

    #[test]
    fn single_node_spec() {
        let s = random_spec(1, 2, 7, &seed_record());
        assert_eq!(s.tree_shape.len(), 1);
        assert!(s.ops_per_edge.is_empty());
        let (v, t) = generate_corpus(&s).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(t.root, "v01");
    }

    #[test]
    fn specs_are_reproducible() {
        assert_eq!(random_spec(6, 2, 42, &seed_record()), random_spec(6, 2, 42, &seed_record()));
        assert_ne!(random_spec(6, 2, 42, &seed_record()), random_spec(6, 2, 43, &seed_record()));
    }

    #[test]
    fn empty_ops_only_move_upload_time() {
        let mut s = random_spec(5, 0, 3, &seed_record());
        s.ops_per_edge.clear();
        let (v, _) = generate_corpus(&s).unwrap();
        for r in &v {
            let mut a = r.clone();
            let mut b = v[0].clone();
            a.id.clear();
            b.id.clear();
            a.upload_time = b.upload_time;
            assert_eq!(a, b);
        }
        assert!(v.windows(2).all(|w| w[0].upload_time < w[1].upload_time));
    }

    #[test]
    fn shift_by_one_day() {
        let mut s = random_spec(2, 0, 1, &seed_record());
        let child = s.tree_shape.iter().find(|(_, p)| p.is_some()).unwrap().0.clone();
        s.ops_per_edge.insert(child.clone(), vec![MutationOp::ShiftDatetime { seconds: 86_400 }]);
        let (v, t) = generate_corpus(&s).unwrap();
        let get = |id: &str| v.iter().find(|r| r.id == id).unwrap();
        let parent = get(&t.root).datetime_original().unwrap();
        assert_eq!(get(&child).datetime_original().unwrap() - parent, Duration::days(1));
    }

    #[test]
    fn generation_is_byte_identical() {
        let s = random_spec(8, 2, 99, &seed_record());
        let render = |s: &CorpusSpec| {
            let (v, _) = generate_corpus(s).unwrap();
            v.iter().map(serialize_record).collect::<String>()
        };
        assert_eq!(render(&s), render(&s));
    }

    #[test]
    fn upload_order_respects_tree_without_inversions() {
        for seed in 0..50 {
            let s = random_spec_with(7, 1, seed, &seed_record(), &SpecOptions { inversion_rate: 0.0 });
            let pos: BTreeMap<&String, usize> = s.upload_order.iter().enumerate().map(|(i, id)| (id, i)).collect();
            for (c, p) in &s.tree_shape {
                if let Some(p) = p {
                    assert!(pos[p] < pos[c]);
                }
            }
        }
    }

    #[test]
    fn missing_field_is_reported_with_edge() {
        let mut seed = seed_record();
        seed.spatial = None;
        let mut s = random_spec(2, 0, 1, &seed);
        let child = s.tree_shape.iter().find(|(_, p)| p.is_some()).unwrap().0.clone();
        s.ops_per_edge.insert(child, vec![MutationOp::MoveGps { dlat: 1.0, dlon: 90.0 }]);
        assert!(matches!(generate_corpus(&s), Err(GenError::Inapplicable { op: "move_gps", .. })));
    }

    #[test]
    fn upload_times_are_whole_seconds() {
        let (v, _) = generate_corpus(&random_spec(4, 1, 5, &seed_record())).unwrap();
        assert!(v.iter().all(|r| format_ts(&r.upload_time).ends_with(":00Z")));
    }

    /// Undirected Prüfer code, used to recover the sampled sequence.
    fn encode(parents: &[Option<usize>]) -> Vec<usize> {
        let n = parents.len();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (c, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                adj[c].insert(*p);
                adj[*p].insert(c);
            }
        }
        let mut seq = Vec::new();
        for _ in 0..n - 2 {
            let leaf = (0..n).find(|&v| adj[v].len() == 1).unwrap();
            let nb = *adj[leaf].iter().next().unwrap();
            seq.push(nb);
            adj[nb].remove(&leaf);
            adj[leaf].clear();
        }
        seq
    }

    fn sampled_code(seed: u64) -> Vec<usize> {
        let s = random_spec(6, 0, seed, &seed_record());
        let idx = |id: &str| id[1..].parse::<usize>().unwrap() - 1;
        let mut parents = vec![None; 6];
        for (c, p) in &s.tree_shape {
            parents[idx(c)] = p.as_deref().map(idx);
        }
        encode(&parents)
    }

    #[test]
    fn tree_sampling_is_uniform() {
        let cells = 6usize.pow(4);
        let samples = 10_000u64;
        let mut counts = BTreeMap::new();
        for seed in 0..samples {
            *counts.entry(sampled_code(seed)).or_insert(0u64) += 1;
        }
        let expected = samples as f64 / cells as f64;
        let chi2: f64 = (0..cells)
            .map(|i| {
                let code = vec![i / 216, (i / 36) % 6, (i / 6) % 6, i % 6];
                let o = *counts.get(&code).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        // 1295 degrees of freedom: mean 1295, sd ~50.9; 5 sd either side.
        assert!((1040.0..1550.0).contains(&chi2), "chi2 = {chi2}");
        assert!(counts.len() as f64 > 0.99 * cells as f64);
    }

    #[test]
    fn every_prufer_sequence_appears() {
        let mut seen = BTreeSet::new();
        for seed in 0..40_000 {
            seen.insert(sampled_code(seed));
        }
        assert_eq!(seen.len(), 1296);
    }
}
