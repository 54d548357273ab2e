//! Change detection across versions of a shared image using only metadata.
//!
//! The pipeline: parse sidecar records ([`model`]), discover and order the
//! versions ([`ingest`]), flag internal contradictions ([`consistency`]),
//! place each version in a normalized attribute space ([`embedding`]), fit
//! transformation matrices between versions ([`transform`]) and assemble a
//! provenance tree from them ([`versiontree`]). [`evalgen`] generates
//! synthetic corpora with known trees and scores the builders against them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod consistency;
pub mod embedding;
pub mod evalgen;
pub mod ingest;
pub mod model;
pub mod par;
pub mod transform;
pub mod versiontree;

pub use par::Exec;
