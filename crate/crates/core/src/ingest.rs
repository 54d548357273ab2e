//! Version discovery and upload-order sorting.
//!
//! Discovering "all versions of an image" is delegated to a
//! [`VersionProvider`]. The only shipped provider reads a local corpus file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::model::{parse_corpus, Corpus, ImageServiceRecord, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum DiscoveryError {
    #[error("cannot read corpus {path}: {source}")]
    Unreachable { path: PathBuf, source: std::io::Error },
    #[error("corpus {path}: {source}")]
    Malformed { path: PathBuf, source: ModelError },
    #[error("no versions found for image {0:?}")]
    Empty(String),
    #[error("duplicate version id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionQuery {
    pub image_id: String,
    pub corpus_path: PathBuf,
}

impl VersionQuery {
    /// Matches every version the provider knows about.
    pub const ANY: &'static str = "*";

    pub fn new(image_id: impl Into<String>, corpus_path: impl Into<PathBuf>) -> Self {
        Self { image_id: image_id.into(), corpus_path: corpus_path.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionSet {
    pub records: Vec<ImageServiceRecord>,
    pub source: String,
}

impl VersionSet {
    /// Builds a set, enforcing distinct ids and at least one record.
    pub fn new(records: Vec<ImageServiceRecord>, source: impl Into<String>) -> Result<Self, DiscoveryError> {
        let source = source.into();
        if records.is_empty() {
            return Err(DiscoveryError::Empty(source));
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(DiscoveryError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, source })
    }
}

/// Stand-in for reverse image search: answers "which records are versions of
/// this image?".
pub trait VersionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn find(&self, query: &VersionQuery) -> Result<Vec<ImageServiceRecord>, DiscoveryError>;
}

/// Reads the corpus file named by the query.
#[derive(Debug, Default, Clone, Copy)]
pub struct LocalCorpusProvider;

impl LocalCorpusProvider {
    pub fn load(path: &Path) -> Result<Corpus, DiscoveryError> {
        let bytes = std::fs::read(path)
            .map_err(|source| DiscoveryError::Unreachable { path: path.to_path_buf(), source })?;
        parse_corpus(&bytes).map_err(|source| match source {
            ModelError::Validation(v) if v.iter().any(|v| v.message.starts_with("duplicate id")) => {
                let dup = v.into_iter().find(|v| v.message.starts_with("duplicate id")).map(|v| v.record_id);
                DiscoveryError::DuplicateId(dup.unwrap_or_default())
            }
            source => DiscoveryError::Malformed { path: path.to_path_buf(), source },
        })
    }
}

impl VersionProvider for LocalCorpusProvider {
    fn name(&self) -> &str {
        "local-corpus"
    }

    fn find(&self, query: &VersionQuery) -> Result<Vec<ImageServiceRecord>, DiscoveryError> {
        let corpus = Self::load(&query.corpus_path)?;
        let matches = query.image_id == VersionQuery::ANY
            || corpus.image_id.as_deref().is_none_or(|id| id == query.image_id);
        Ok(if matches { corpus.versions } else { Vec::new() })
    }
}

pub fn discover_versions(query: &VersionQuery, provider: &dyn VersionProvider) -> Result<VersionSet, DiscoveryError> {
    let records = provider.find(query)?;
    if records.is_empty() {
        return Err(DiscoveryError::Empty(query.image_id.clone()));
    }
    VersionSet::new(records, provider.name())
}

/// Ascending upload time, ties broken by id.
pub fn sort_by_upload(vs: VersionSet) -> Vec<ImageServiceRecord> {
    let mut records = vs.records;
    sort_records(&mut records);
    records
}

pub fn sort_records(records: &mut [ImageServiceRecord]) {
    records.sort_by(|a, b| a.upload_time.cmp(&b.upload_time).then_with(|| a.id.cmp(&b.id)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use std::io::Write;

    fn rec(id: &str, secs: i64) -> ImageServiceRecord {
        ImageServiceRecord::bare(id, Utc.timestamp_opt(1_600_000_000 + secs, 0).unwrap())
    }

    fn write_corpus(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn discovers_every_record() {
        let versions: Vec<String> = (0..5)
            .map(|i| format!(r#"{{"id":"v{i}","upload_time":"2020-01-0{}T00:00:00Z"}}"#, i + 1))
            .collect();
        let f = write_corpus(&format!(r#"{{"image_id":"img","versions":[{}]}}"#, versions.join(",")));
        let vs = discover_versions(&VersionQuery::new("img", f.path()), &LocalCorpusProvider).unwrap();
        assert_eq!(vs.records.len(), 5);
        assert_eq!(vs.source, "local-corpus");
    }

    #[test]
    fn missing_file_is_a_discovery_error() {
        let q = VersionQuery::new("img", "/nonexistent/metaprov/corpus.json");
        assert!(matches!(
            discover_versions(&q, &LocalCorpusProvider),
            Err(DiscoveryError::Unreachable { .. })
        ));
    }

    #[test]
    fn duplicate_id_is_named() {
        let f = write_corpus(
            r#"{"versions":[{"id":"dup","upload_time":"2020-01-01T00:00:00Z"},{"id":"dup","upload_time":"2020-01-02T00:00:00Z"}]}"#,
        );
        match discover_versions(&VersionQuery::new("*", f.path()), &LocalCorpusProvider) {
            Err(DiscoveryError::DuplicateId(id)) => assert_eq!(id, "dup"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_image_yields_empty_set_error() {
        let f = write_corpus(r#"{"image_id":"a","versions":[{"id":"v","upload_time":"2020-01-01T00:00:00Z"}]}"#);
        assert!(matches!(
            discover_versions(&VersionQuery::new("b", f.path()), &LocalCorpusProvider),
            Err(DiscoveryError::Empty(_))
        ));
    }

    #[test]
    fn sorts_by_upload_time() {
        let vs = VersionSet::new(vec![rec("c", 3), rec("a", 1), rec("b", 2)], "t").unwrap();
        let ids: Vec<_> = sort_by_upload(vs).into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn ties_broken_by_id() {
        let vs = VersionSet::new(vec![rec("b", 0), rec("a", 0)], "t").unwrap();
        let ids: Vec<_> = sort_by_upload(vs).into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn single_record() {
        let vs = VersionSet::new(vec![rec("only", 0)], "t").unwrap();
        assert_eq!(sort_by_upload(vs).len(), 1);
    }

    proptest! {
        #[test]
        fn sort_is_an_idempotent_permutation(times in proptest::collection::vec(0i64..5, 1..12)) {
            let records: Vec<_> = times.iter().enumerate().map(|(i, t)| rec(&format!("r{i:02}"), *t)).collect();
            let once = sort_by_upload(VersionSet::new(records.clone(), "t").unwrap());
            let twice = sort_by_upload(VersionSet::new(once.clone(), "t").unwrap());
            prop_assert_eq!(&once, &twice);
            let mut a: Vec<_> = records.iter().map(|r| r.id.clone()).collect();
            let mut b: Vec<_> = once.iter().map(|r| r.id.clone()).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            prop_assert!(once.windows(2).all(|w| (w[0].upload_time, &w[0].id) <= (w[1].upload_time, &w[1].id)));
        }
    }
}
