use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{EdgeAnnotation, VersionTree};
use crate::model::values::format_ts;
use crate::model::ImageServiceRecord;

/// Serializable tree document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub strategy: String,
    pub root: String,
    pub nodes: Vec<String>,
    pub parent: BTreeMap<String, String>,
    pub edges: BTreeMap<String, EdgeAnnotation>,
    pub total_weight: f64,
}

pub fn to_document(tree: &VersionTree, strategy: &str) -> TreeDocument {
    TreeDocument {
        strategy: strategy.to_string(),
        root: tree.root.clone(),
        nodes: tree.nodes.clone(),
        parent: tree.parent.clone(),
        edges: tree.edges.clone(),
        total_weight: tree.total_weight(),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

/// Quoted label whose parts are separated by DOT line breaks.
fn label(parts: &[String]) -> String {
    let escaped: Vec<String> = parts.iter().map(|p| escape(p)).collect();
    format!("\"{}\"", escaped.join("\\n"))
}

/// Graphviz digraph. Nodes carry id and upload time; edges carry complexity
/// and the spatial, temporal and context deltas.
pub fn to_dot(tree: &VersionTree, records: &[ImageServiceRecord]) -> String {
    let upload: BTreeMap<&str, String> = records.iter().map(|r| (r.id.as_str(), format_ts(&r.upload_time))).collect();
    let mut out = String::from("digraph version_tree {\n  rankdir=TB;\n  node [shape=box];\n");
    for n in &tree.nodes {
        let lines = match upload.get(n.as_str()) {
            Some(t) => vec![n.clone(), t.clone()],
            None => vec![n.clone()],
        };
        let extra = if *n == tree.root { ", style=bold" } else { "" };
        let _ = writeln!(out, "  {} [label={}{}];", quoted(n), label(&lines), extra);
    }
    for n in &tree.nodes {
        let Some(p) = tree.parent.get(n) else { continue };
        let lines = match tree.edges.get(n) {
            Some(e) => vec![
                format!("c={:.4}", e.total_complexity),
                format!("spatial={:.1} km", e.diff.delta_spatial_km),
                format!("temporal={} s", e.diff.delta_temporal_s),
                format!("context={:.3}", e.diff.delta_context),
            ],
            None => Vec::new(),
        };
        let style = if tree.edges.get(n).is_some_and(|e| e.forced) { ", style=dashed" } else { "" };
        let _ = writeln!(out, "  {} -> {} [label={}{}];", quoted(p), quoted(n), label(&lines), style);
    }
    out.push_str("}\n");
    out
}
