use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_corpus, random_spec_with, seed_record, SpecOptions};
use crate::embedding::GroupSchema;
use crate::par::{self, Exec};
use crate::versiontree::{build_tree, tree_accuracy, Strategy, TreeConfig, TreeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub instances: usize,
    /// Inclusive range of versions per instance.
    pub nodes: (usize, usize),
    /// Inclusive range of mutations per edge.
    pub ops_per_edge: (usize, usize),
    pub rng_seed: u64,
    pub tree: TreeConfig,
    pub inversion_rate: f64,
    /// Record wall time per build. Off by default because it makes reports
    /// differ between runs.
    pub timings: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            nodes: (5, 8),
            ops_per_edge: (1, 2),
            rng_seed: 0,
            tree: TreeConfig::default(),
            inversion_rate: SpecOptions::default().inversion_rate,
            timings: false,
            exec: Exec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        self.tree.validate()?;
        let (lo, hi) = self.nodes;
        if lo == 0 || lo > hi {
            return Err(TreeError::Params(format!("bad node range {lo}..={hi}")));
        }
        if hi > self.tree.n_max {
            return Err(TreeError::TooLarge { n: hi, max: self.tree.n_max });
        }
        if self.ops_per_edge.0 > self.ops_per_edge.1 {
            return Err(TreeError::Params("bad ops-per-edge range".into()));
        }
        if !(0.0..=1.0).contains(&self.inversion_rate) {
            return Err(TreeError::Params("inversion_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub accuracy: f64,
    pub fit_count: usize,
    pub pair_count: usize,
    pub total_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub instance: usize,
    pub n_nodes: usize,
    pub ops_per_edge: usize,
    /// One entry per strategy, in [`Strategy::ALL`] order.
    pub runs: Vec<StrategyRun>,
}

impl InstanceRow {
    pub fn run(&self, s: Strategy) -> &StrategyRun {
        self.runs.iter().find(|r| r.strategy == s).expect("every strategy is run")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub mean_accuracy: f64,
    pub mean_fit_count: f64,
    pub mean_total_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub instance: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: ExperimentConfig,
    /// Instances that completed.
    pub instances: usize,
    pub strategies: Vec<StrategySummary>,
    pub failures: Vec<InstanceFailure>,
    pub rows: Vec<InstanceRow>,
}

impl EvalResult {
    pub fn summary(&self, s: Strategy) -> &StrategySummary {
        self.strategies.iter().find(|x| x.strategy == s).expect("every strategy is summarized")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One line per instance and strategy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,n_nodes,ops_per_edge,strategy,accuracy,fit_count,pair_count,total_weight,wall_ns\n");
        for row in &self.rows {
            for r in &row.runs {
                let wall = r.wall_ns.map(|w| w.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{},{},{:.9},{}",
                    row.instance,
                    row.n_nodes,
                    row.ops_per_edge,
                    r.strategy.as_str(),
                    r.accuracy,
                    r.fit_count,
                    r.pair_count,
                    r.total_weight,
                    wall
                );
            }
        }
        out
    }
}

fn run_instance(cfg: &ExperimentConfig, schemas: &[GroupSchema], index: usize) -> Result<InstanceRow, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(cfg.nodes.0..=cfg.nodes.1);
    let k = rng.gen_range(cfg.ops_per_edge.0..=cfg.ops_per_edge.1);
    let opts = SpecOptions { inversion_rate: cfg.inversion_rate };
    let spec = random_spec_with(n, k, rng.gen(), &seed_record(), &opts);
    let (versions, truth) = generate_corpus(&spec).map_err(|e| e.to_string())?;

    let mut runs = Vec::with_capacity(Strategy::ALL.len());
    for s in Strategy::ALL {
        let start = Instant::now();
        let built = build_tree(s, &versions, schemas, &cfg.tree, cfg.exec).map_err(|e| format!("{}: {e}", s.as_str()))?;
        let wall = start.elapsed().as_nanos() as u64;
        runs.push(StrategyRun {
            strategy: s,
            accuracy: tree_accuracy(&built.tree, &truth).map_err(|e| e.to_string())?,
            fit_count: built.fit_count,
            pair_count: built.pair_count,
            total_weight: built.total_weight,
            wall_ns: cfg.timings.then_some(wall),
        });
    }
    Ok(InstanceRow { instance: index, n_nodes: n, ops_per_edge: k, runs })
}

/// Generates `cfg.instances` corpora and scores every strategy on each.
/// Instance `i` draws from stream `i` of the seeded generator, so results do
/// not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, schemas: &[GroupSchema]) -> Result<EvalResult, TreeError> {
    cfg.validate()?;
    let outcomes = par::map_range(cfg.exec, cfg.instances, |i| run_instance(cfg, schemas, i));

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => rows.push(r),
            Err(message) => failures.push(InstanceFailure { instance: i, message }),
        }
    }

    let count = rows.len().max(1) as f64;
    let strategies = Strategy::ALL
        .iter()
        .map(|&s| {
            let runs = || rows.iter().map(|r| r.run(s));
            StrategySummary {
                strategy: s,
                mean_accuracy: runs().map(|r| r.accuracy).sum::<f64>() / count,
                mean_fit_count: runs().map(|r| r.fit_count as f64).sum::<f64>() / count,
                mean_total_weight: runs().map(|r| r.total_weight).sum::<f64>() / count,
                wall_ns: cfg.timings.then(|| runs().filter_map(|r| r.wall_ns).sum()),
            }
        })
        .collect();

    Ok(EvalResult { config: cfg.clone(), instances: rows.len(), strategies, failures, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::default_schemas;

    fn small(instances: usize) -> ExperimentConfig {
        ExperimentConfig { instances, nodes: (3, 5), ..Default::default() }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let schemas = default_schemas();
        let a = run_experiment(&ExperimentConfig { exec: Exec::Parallel, ..small(12) }, &schemas).unwrap();
        let b = run_experiment(&ExperimentConfig { exec: Exec::Sequential, ..small(12) }, &schemas).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.failures.is_empty(), "{:?}", a.failures);
    }

    #[test]
    fn baseline_fits_are_one_pair_per_edge() {
        let schemas = default_schemas();
        let res = run_experiment(&small(10), &schemas).unwrap();
        for row in &res.rows {
            assert_eq!(row.run(Strategy::Baseline).pair_count, row.n_nodes - 1);
            assert_eq!(row.run(Strategy::Bruteforce).pair_count, row.n_nodes * (row.n_nodes - 1));
            for r in &row.runs {
                assert!((0.0..=1.0).contains(&r.accuracy));
            }
        }
    }

    #[test]
    fn csv_has_a_line_per_run() {
        let res = run_experiment(&small(4), &default_schemas()).unwrap();
        assert_eq!(res.to_csv().lines().count(), 1 + 4 * 3);
    }

    #[test]
    fn rejects_node_range_over_limit() {
        let cfg = ExperimentConfig { nodes: (5, 9), ..Default::default() };
        assert!(matches!(run_experiment(&cfg, &default_schemas()), Err(TreeError::TooLarge { .. })));
    }
}
