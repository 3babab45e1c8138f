//! On-disk formats: JSONL corpora, the snapshot container, classifier and
//! orientation files, and augmented-dataset output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use domcf_core::{
    AugmentedDataset, CorpusConfig, CounterfactualCandidate, Document, DomainClassifier, DomainId,
    DomainRegistry, OrientationSet, StatsConfig, StatsSnapshot, Stemmer,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Deserialize)]
struct CorpusRecord {
    text: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    id: Option<String>,
}

/// Documents read from one JSONL file plus the optional `id` of each record.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub docs: Vec<Document>,
    pub record_ids: Vec<Option<String>>,
}

/// Load a JSONL corpus. Documents get ids `first_id, first_id + 1, ...` in
/// read order. Blank lines are skipped.
pub fn load_corpus(
    path: &Path,
    domain: DomainId,
    first_id: u64,
    config: &CorpusConfig,
    stemmer: &dyn Stemmer,
) -> Result<LoadedCorpus> {
    config.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = LoadedCorpus::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = first_id + out.docs.len() as u64;
        out.docs.push(Document::from_text(
            id, domain, &rec.text, rec.label, config, stemmer,
        ));
        out.record_ids.push(rec.id);
    }
    Ok(out)
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"DOMCFSNP";
pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotHeader {
    format_version: u32,
    domains: Vec<String>,
    stats: StatsConfig,
    corpus: CorpusConfig,
    n_docs: Vec<u32>,
    entries: usize,
}

/// Write a snapshot container:
///
/// ```text
/// magic[8] | version u32 | header_len u32 | header JSON | body_len u64 | body | sha256(body)[32]
/// ```
///
/// Integers are little-endian. The body is the snapshot's canonical encoding,
/// so the trailing digest equals its fingerprint.
pub fn write_snapshot(path: &Path, snapshot: &StatsSnapshot, corpus: &CorpusConfig) -> Result<()> {
    let header = SnapshotHeader {
        format_version: SNAPSHOT_FORMAT_VERSION,
        domains: snapshot.registry().names().to_vec(),
        stats: snapshot.config().clone(),
        corpus: corpus.clone(),
        n_docs: snapshot.n_docs().to_vec(),
        entries: snapshot.len(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let body = snapshot.canonical_bytes();
    let mut buf = Vec::with_capacity(body.len() + header.len() + 64);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(body.len() as u64).to_le_bytes());
    buf.extend_from_slice(&body);
    buf.extend_from_slice(snapshot.fingerprint());
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Read a snapshot container together with the corpus settings it was
/// built with.
pub fn read_snapshot(path: &Path) -> Result<(StatsSnapshot, CorpusConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes).map_err(|m| Error::format(path, m))
}

fn decode_snapshot(bytes: &[u8]) -> std::result::Result<(StatsSnapshot, CorpusConfig), String> {
    let mut rest = bytes;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        if rest.len() < n {
            return Err("truncated snapshot file".into());
        }
        let (a, b) = rest.split_at(n);
        rest = b;
        Ok(a)
    };
    if take(8)? != SNAPSHOT_MAGIC {
        return Err("not a snapshot file".into());
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != SNAPSHOT_FORMAT_VERSION {
        return Err(format!(
            "unsupported snapshot format version {version} (expected {SNAPSHOT_FORMAT_VERSION})"
        ));
    }
    let header_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let header: SnapshotHeader = serde_json::from_slice(take(header_len)?)
        .map_err(|e| format!("bad snapshot header: {e}"))?;
    let body_len = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let body_len = usize::try_from(body_len).map_err(|_| "snapshot body too large".to_string())?;
    let body = take(body_len)?;
    let digest: [u8; 32] = take(32)?.try_into().unwrap();
    if !rest.is_empty() {
        return Err("trailing bytes after snapshot".into());
    }
    let snapshot = StatsSnapshot::from_canonical_bytes(body).map_err(|e| e.to_string())?;
    if snapshot.fingerprint() != &digest {
        return Err("snapshot fingerprint mismatch".into());
    }
    if header.format_version != version
        || header.domains != snapshot.registry().names()
        || &header.stats != snapshot.config()
        || header.n_docs != snapshot.n_docs()
        || header.entries != snapshot.len()
    {
        return Err("snapshot header disagrees with its body".into());
    }
    header.corpus.validate().map_err(|e| e.to_string())?;
    Ok((snapshot, header.corpus))
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snapshot_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corpus: Option<CorpusConfig>,
    body: T,
}

const CLASSIFIER_FORMAT: &str = "domcf-classifier";
const ORIENTATION_FORMAT: &str = "domcf-orientations";
const FILE_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn read_versioned<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Versioned<T>> {
    let v: Versioned<T> = read_json(path)?;
    if v.format != format {
        return Err(Error::format(
            path,
            format!("expected a {format} file, found {}", v.format),
        ));
    }
    if v.version != FILE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {}", v.version),
        ));
    }
    Ok(v)
}

/// Save a classifier with the corpus settings its vocabulary was built under.
pub fn write_classifier(
    path: &Path,
    model: &DomainClassifier,
    corpus: &CorpusConfig,
) -> Result<()> {
    write_json(
        path,
        &Versioned {
            format: CLASSIFIER_FORMAT.into(),
            version: FILE_VERSION,
            snapshot_fingerprint: None,
            corpus: Some(corpus.clone()),
            body: model,
        },
    )
}

pub fn read_classifier(path: &Path) -> Result<(DomainClassifier, Option<CorpusConfig>)> {
    let v: Versioned<DomainClassifier> = read_versioned(path, CLASSIFIER_FORMAT)?;
    v.body
        .validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((v.body, v.corpus))
}

pub fn write_orientations(
    path: &Path,
    set: &OrientationSet,
    snapshot: &StatsSnapshot,
) -> Result<()> {
    write_json(
        path,
        &Versioned {
            format: ORIENTATION_FORMAT.into(),
            version: FILE_VERSION,
            snapshot_fingerprint: Some(snapshot.fingerprint_hex()),
            corpus: None,
            body: set,
        },
    )
}

/// Read an orientation table and check it was computed from `snapshot`.
pub fn read_orientations(path: &Path, snapshot: &StatsSnapshot) -> Result<OrientationSet> {
    let v: Versioned<OrientationSet> = read_versioned(path, ORIENTATION_FORMAT)?;
    v.body
        .validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if v.snapshot_fingerprint.as_deref() != Some(snapshot.fingerprint_hex().as_str()) {
        return Err(Error::format(
            path,
            "orientations were built from a different snapshot",
        ));
    }
    Ok(v.body)
}

/// Orientation overrides: a JSON object from domain name to its words.
pub fn read_overrides(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    read_json(path)
}

/// One line of augmented-dataset output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub text: String,
    pub label: Option<String>,
    pub domain: String,
    /// `original` or the generation mode name.
    pub source: String,
    pub origin_id: u64,
    pub orientation: Option<String>,
    pub accepted: bool,
    pub reject_reasons: Vec<String>,
}

impl AugmentedRecord {
    pub fn original(doc: &Document, registry: &DomainRegistry) -> Self {
        AugmentedRecord {
            text: doc.text().to_string(),
            label: doc.label().map(String::from),
            domain: registry.name(doc.domain()).unwrap_or("?").to_string(),
            source: "original".into(),
            origin_id: doc.id(),
            orientation: None,
            accepted: true,
            reject_reasons: Vec::new(),
        }
    }

    pub fn candidate(c: &CounterfactualCandidate, registry: &DomainRegistry) -> Self {
        AugmentedRecord {
            text: c.text.clone(),
            label: c.label.clone(),
            domain: registry.name(c.destination).unwrap_or("?").to_string(),
            source: c.source.as_str().into(),
            origin_id: c.origin,
            orientation: c.orientation.as_ref().map(|o| o.word.clone()),
            accepted: c.is_accepted(),
            reject_reasons: c
                .verdict
                .iter()
                .flat_map(|v| v.reasons.iter().map(|r| r.as_str().to_string()))
                .collect(),
        }
    }
}

/// Write JSON lines to `path`.
pub fn write_jsonl<'a, T, I>(path: &Path, rows: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read JSON lines, reporting the 1-based line of the first bad record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Write `augmented.jsonl`, `manifest.json` and `dataset.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    dataset: &AugmentedDataset,
    registry: &DomainRegistry,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = dataset
        .originals
        .iter()
        .map(|d| AugmentedRecord::original(d, registry))
        .chain(
            dataset
                .candidates
                .iter()
                .map(|c| AugmentedRecord::candidate(c, registry)),
        );
    write_jsonl(&dir.join("augmented.jsonl"), rows)?;
    write_json(&dir.join("manifest.json"), &dataset.manifest)?;
    write_json(&dir.join("dataset.json"), dataset)
}
