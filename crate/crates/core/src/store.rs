//! Portable embedding files.
//!
//! A store is a pair of files sharing a base path:
//!
//! * `<base>.remb` holds a fixed 20-byte header followed by `count * dim`
//!   little-endian `f32` values, row-major.
//! * `<base>.meta.jsonl` holds one `{"id": .., "text": ..}` object per row,
//!   line `i` describing vector row `i`.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "REMB"
//! 4       2     format version (u16, = 1)
//! 6       1     flags (bit 0 = normalized)
//! 7       1     reserved (= 0)
//! 8       4     dim (u32)
//! 12      8     count (u64)
//! 20      ..    payload
//! ```
//!
//! Vectors stay single precision at rest; every computation over them is
//! carried out in `f64`.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"REMB";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;
const FLAG_NORMALIZED: u8 = 0b0000_0001;

/// Vectors with a Euclidean norm below this cannot be normalized.
pub const MIN_NORM: f64 = 1e-12;
/// Allowed deviation from unit norm for a store flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// Row metadata, exactly the shape of one `.meta.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowMeta {
    pub id: String,
    pub text: String,
}

/// One row to be written: identifier, source text and its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub text: String,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            vector,
        }
    }
}

/// Paths of the two files making up a store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorePaths {
    pub vectors: PathBuf,
    pub metadata: PathBuf,
}

impl StorePaths {
    /// Derives both file names from a base path. A trailing `.remb` on the
    /// base is accepted and stripped.
    pub fn from_base(base: impl AsRef<Path>) -> Self {
        let base = base.as_ref();
        let raw = base.as_os_str().to_string_lossy();
        let stem = raw.strip_suffix(".remb").unwrap_or(&raw);
        Self {
            vectors: PathBuf::from(format!("{stem}.remb")),
            metadata: PathBuf::from(format!("{stem}.meta.jsonl")),
        }
    }
}

/// An ordered collection of dense vectors with row-aligned metadata.
///
/// Construction only checks shape (dimension, row counts). Semantic
/// invariants such as unique ids, finite components and unit norms are
/// checked by [`EmbeddingStore::validate`]; readers and writers refuse
/// stores that fail validation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: Vec<f32>,
    normalized: bool,
    metadata: Vec<RowMeta>,
}

impl EmbeddingStore {
    pub fn new(
        dim: usize,
        vectors: Vec<f32>,
        metadata: Vec<RowMeta>,
        normalized: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        if vectors.len() != metadata.len() * dim {
            return Err(Error::Validation(format!(
                "{} vector components do not fill {} rows of dim {}",
                vectors.len(),
                metadata.len(),
                dim
            )));
        }
        Ok(Self {
            dim,
            vectors,
            normalized,
            metadata,
        })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new(), false)
    }

    /// Builds an unnormalized store from records, rejecting records whose
    /// length differs from `dim`, duplicate ids and non-finite components.
    pub fn from_records(records: &[EmbeddingRecord], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        let mut vectors = Vec::with_capacity(records.len() * dim);
        let mut metadata = Vec::with_capacity(records.len());
        for (row, rec) in records.iter().enumerate() {
            if rec.vector.len() != dim {
                return Err(Error::dim(dim, rec.vector.len(), format!("record '{}'", rec.id)));
            }
            if let Some(first) = seen.insert(rec.id.as_str(), row) {
                return Err(Error::Validation(format!(
                    "duplicate id '{}' at rows {first} and {row}",
                    rec.id
                )));
            }
            if let Some(c) = rec.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "record '{}' has non-finite component {c}",
                    rec.id
                )));
            }
            vectors.extend_from_slice(&rec.vector);
            metadata.push(RowMeta {
                id: rec.id.clone(),
                text: rec.text.clone(),
            });
        }
        Self::new(dim, vectors, metadata, false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.metadata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metadata.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.vectors.chunks_exact(self.dim)
    }

    /// Row-major view of every component.
    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    pub fn metadata(&self) -> &[RowMeta] {
        &self.metadata
    }

    pub fn id(&self, i: usize) -> &str {
        &self.metadata[i].id
    }

    pub fn text(&self, i: usize) -> &str {
        &self.metadata[i].text
    }

    pub fn position_of_id(&self, id: &str) -> Option<usize> {
        self.metadata.iter().position(|m| m.id == id)
    }

    pub fn position_of_text(&self, text: &str) -> Option<usize> {
        self.metadata.iter().position(|m| m.text == text)
    }

    /// Scales every row to unit Euclidean norm and sets the normalized flag.
    pub fn normalize(self) -> Result<Self> {
        let dim = self.dim;
        let mut vectors = self.vectors;
        for (row, chunk) in vectors.chunks_exact_mut(dim).enumerate() {
            let norm = l2_norm(chunk);
            if norm.is_nan() || norm < MIN_NORM {
                return Err(Error::Validation(format!(
                    "row '{}' has norm {norm:e}, too small to normalize",
                    self.metadata[row].id
                )));
            }
            for v in chunk.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        Ok(Self {
            dim,
            vectors,
            normalized: true,
            metadata: self.metadata,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(self.len());
        for (row, meta) in self.metadata.iter().enumerate() {
            if let Some(&first) = seen.get(meta.id.as_str()) {
                issues.push(ValidationIssue::DuplicateId {
                    row,
                    first_row: first,
                    id: meta.id.clone(),
                });
            } else {
                seen.insert(meta.id.as_str(), row);
            }
        }
        for (row, v) in self.rows().enumerate() {
            if let Some(component) = v.iter().position(|x| !x.is_finite()) {
                issues.push(ValidationIssue::NonFinite {
                    row,
                    id: self.metadata[row].id.clone(),
                    component,
                });
                continue;
            }
            if self.normalized {
                let norm = l2_norm(v);
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    issues.push(ValidationIssue::NormOutOfRange {
                        row,
                        id: self.metadata[row].id.clone(),
                        norm,
                    });
                }
            }
        }
        ValidationReport { issues }
    }

    /// Writes `<base>.remb` and `<base>.meta.jsonl`.
    pub fn write(&self, base: impl AsRef<Path>) -> Result<StorePaths> {
        let report = self.validate();
        if !report.is_empty() {
            return Err(Error::Validation(format!("refusing to write store: {report}")));
        }
        let paths = StorePaths::from_base(base);

        let mut out = Vec::with_capacity(HEADER_LEN + self.vectors.len() * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(if self.normalized { FLAG_NORMALIZED } else { 0 });
        out.push(0);
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::InvalidArgument(format!("dim {} exceeds u32", self.dim)))?;
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&paths.vectors, &out).map_err(|e| Error::io(&paths.vectors, e))?;

        let file = File::create(&paths.metadata).map_err(|e| Error::io(&paths.metadata, e))?;
        let mut w = BufWriter::new(file);
        for meta in &self.metadata {
            let line = serde_json::to_string(meta).expect("row metadata serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(&paths.metadata, e))?;
        }
        w.flush().map_err(|e| Error::io(&paths.metadata, e))?;
        Ok(paths)
    }

    /// Reads a store written by [`EmbeddingStore::write`] (or any producer of
    /// the same format). The result always passes validation.
    pub fn read(base: impl AsRef<Path>) -> Result<Self> {
        let paths = StorePaths::from_base(base);
        let bytes = fs::read(&paths.vectors).map_err(|e| Error::io(&paths.vectors, e))?;
        let (normalized, dim, count) = parse_header(&bytes, &paths.vectors)?;

        let payload = &bytes[HEADER_LEN..];
        let expected = count
            .checked_mul(dim as u64)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::corrupt(&paths.vectors, "header count * dim overflows"))?;
        if payload.len() as u64 != expected {
            return Err(Error::corrupt(
                &paths.vectors,
                format!(
                    "payload has {} bytes, header implies {expected} ({count} rows x {dim} dims)",
                    payload.len()
                ),
            ));
        }
        let vectors: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let text = fs::read_to_string(&paths.metadata).map_err(|e| Error::io(&paths.metadata, e))?;
        let mut metadata = Vec::with_capacity(count as usize);
        for (lineno, line) in text.lines().enumerate() {
            let meta: RowMeta = serde_json::from_str(line).map_err(|e| {
                Error::format(&paths.metadata, format!("line {}: {e}", lineno + 1))
            })?;
            metadata.push(meta);
        }
        if metadata.len() as u64 != count {
            return Err(Error::corrupt(
                &paths.metadata,
                format!("{} metadata lines for {count} vectors", metadata.len()),
            ));
        }

        let store = Self::new(dim as usize, vectors, metadata, normalized)?;
        let report = store.validate();
        if !report.is_empty() {
            return Err(Error::corrupt(&paths.vectors, report.to_string()));
        }
        Ok(store)
    }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(bool, u32, u64)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("file shorter than the {HEADER_LEN}-byte header")));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::format(path, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let flags = bytes[6];
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::format(path, format!("unknown flag bits {flags:#04x}")));
    }
    if bytes[7] != 0 {
        return Err(Error::format(path, "reserved byte is not zero"));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if dim == 0 {
        return Err(Error::format(path, "dim is zero"));
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    Ok((flags & FLAG_NORMALIZED != 0, dim, count))
}

/// Euclidean norm accumulated in double precision.
pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// A single invariant violation found by validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    DuplicateId { row: usize, first_row: usize, id: String },
    NonFinite { row: usize, id: String, component: usize },
    NormOutOfRange { row: usize, id: String, norm: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateId { row, first_row, id } => {
                write!(f, "row {row}: id '{id}' already used by row {first_row}")
            }
            Self::NonFinite { row, id, component } => {
                write!(f, "row {row} ('{id}'): non-finite value at component {component}")
            }
            Self::NormOutOfRange { row, id, norm } => {
                write!(f, "row {row} ('{id}'): norm {norm:.6} but store is flagged normalized")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn write_embedding_file(
    records: &[EmbeddingRecord],
    dim: usize,
    path: impl AsRef<Path>,
) -> Result<StorePaths> {
    EmbeddingStore::from_records(records, dim)?.write(path)
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    EmbeddingStore::read(path)
}

pub fn normalize_store(store: EmbeddingStore) -> Result<EmbeddingStore> {
    store.normalize()
}

pub fn validate_store(store: &EmbeddingStore) -> ValidationReport {
    store.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, v: &[f32]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, format!("text {id}"), v.to_vec())
    }

    #[test]
    fn two_records_of_dim_three_have_expected_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("s");
        let recs = [rec("a", &[1.0, 2.0, 3.0]), rec("b", &[4.0, 5.0, 6.0])];
        let paths = write_embedding_file(&recs, 3, &base).unwrap();
        let bytes = fs::read(&paths.vectors).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        let meta = fs::read_to_string(&paths.metadata).unwrap();
        assert_eq!(meta.lines().count(), 2);
        assert_eq!(meta.lines().next().unwrap(), r#"{"id":"a","text":"text a"}"#);
    }

    #[test]
    fn empty_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("empty");
        write_embedding_file(&[], 4, &base).unwrap();
        let store = read_embedding_file(&base).unwrap();
        assert_eq!(store.len(), 0);
        assert_eq!(store.dim(), 4);
        assert!(!store.is_normalized());
    }

    #[test]
    fn write_rejects_bad_records() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("bad");
        let err = write_embedding_file(&[rec("x", &[1.0, 2.0]), rec("odd", &[1.0])], 2, &base)
            .unwrap_err();
        assert!(err.to_string().contains("odd"), "{err}");

        let err = write_embedding_file(&[rec("x", &[1.0]), rec("x", &[2.0])], 1, &base).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let err = write_embedding_file(&[rec("n", &[f32::NAN])], 1, &base).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = write_embedding_file(&[rec("i", &[f32::INFINITY])], 1, &base).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn unnormalized_flag_is_preserved_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("raw");
        write_embedding_file(&[rec("a", &[3.0, 4.0])], 2, &base).unwrap();
        let store = read_embedding_file(&base).unwrap();
        assert!(!store.is_normalized());
        assert_eq!(store.row(0), &[3.0, 4.0]);
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("t");
        let paths = write_embedding_file(&[rec("a", &[1.0, 2.0]), rec("b", &[3.0, 4.0])], 2, &base)
            .unwrap();
        let bytes = fs::read(&paths.vectors).unwrap();
        fs::write(&paths.vectors, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_embedding_file(&base), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("m");
        let paths = write_embedding_file(&[rec("a", &[1.0])], 1, &base).unwrap();
        let mut bytes = fs::read(&paths.vectors).unwrap();
        bytes[0..4].copy_from_slice(b"RIFF");
        fs::write(&paths.vectors, &bytes).unwrap();
        assert!(matches!(read_embedding_file(&base), Err(Error::Format { .. })));

        bytes[0..4].copy_from_slice(&MAGIC);
        bytes[4] = 2;
        fs::write(&paths.vectors, &bytes).unwrap();
        assert!(matches!(read_embedding_file(&base), Err(Error::Format { .. })));
    }

    #[test]
    fn metadata_line_count_mismatch_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("meta");
        let paths = write_embedding_file(&[rec("a", &[1.0]), rec("b", &[2.0])], 1, &base).unwrap();
        fs::write(&paths.metadata, "{\"id\":\"a\",\"text\":\"\"}\n").unwrap();
        assert!(matches!(read_embedding_file(&base), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn metadata_with_extra_keys_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("keys");
        let paths = write_embedding_file(&[rec("a", &[1.0])], 1, &base).unwrap();
        fs::write(&paths.metadata, "{\"id\":\"a\",\"text\":\"\",\"label\":1}\n").unwrap();
        assert!(matches!(read_embedding_file(&base), Err(Error::Format { .. })));
    }

    #[test]
    fn base_path_accepts_remb_suffix() {
        let p = StorePaths::from_base("/tmp/corpus.remb");
        assert_eq!(p.vectors, PathBuf::from("/tmp/corpus.remb"));
        assert_eq!(p.metadata, PathBuf::from("/tmp/corpus.meta.jsonl"));
    }

    #[test]
    fn normalizes_three_four_five() {
        let store = EmbeddingStore::from_records(&[rec("a", &[3.0, 4.0]), rec("b", &[1.0, 0.0])], 2)
            .unwrap()
            .normalize()
            .unwrap();
        assert!(store.is_normalized());
        assert!((store.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((store.row(0)[1] - 0.8).abs() < 1e-7);
        assert_eq!(store.row(1), &[1.0, 0.0]);
        assert_eq!(store.metadata()[0].id, "a");
    }

    #[test]
    fn normalize_rejects_zero_vector_by_id() {
        let store = EmbeddingStore::from_records(&[rec("ok", &[1.0, 1.0]), rec("zero", &[0.0, 0.0])], 2)
            .unwrap();
        let err = store.normalize().unwrap_err();
        assert!(err.to_string().contains("zero"), "{err}");
    }

    #[test]
    fn validation_reports_each_violation() {
        let good = EmbeddingStore::from_records(&[rec("a", &[1.0, 0.0])], 2)
            .unwrap()
            .normalize()
            .unwrap();
        assert!(validate_store(&good).is_empty());

        let meta = vec![
            RowMeta { id: "a".into(), text: String::new() },
            RowMeta { id: "b".into(), text: String::new() },
        ];
        let nan = EmbeddingStore::new(2, vec![1.0, 0.0, f32::NAN, 0.0], meta.clone(), false).unwrap();
        let report = validate_store(&nan);
        assert_eq!(report.issues.len(), 1);
        assert!(matches!(report.issues[0], ValidationIssue::NonFinite { row: 1, .. }));

        let long = EmbeddingStore::new(2, vec![1.0, 0.0, 2.0, 0.0], meta.clone(), true).unwrap();
        let report = validate_store(&long);
        assert_eq!(report.issues.len(), 1);
        match &report.issues[0] {
            ValidationIssue::NormOutOfRange { row, norm, .. } => {
                assert_eq!(*row, 1);
                assert!((norm - 2.0).abs() < 1e-12);
            }
            other => panic!("unexpected issue {other:?}"),
        }
        assert!(report.to_string().contains("2.000000"));

        let dup_meta = vec![meta[0].clone(), meta[0].clone()];
        let dup = EmbeddingStore::new(2, vec![1.0, 0.0, 0.0, 1.0], dup_meta, true).unwrap();
        assert!(matches!(validate_store(&dup).issues[0], ValidationIssue::DuplicateId { row: 1, first_row: 0, .. }));
    }

    #[test]
    fn shape_mismatch_is_rejected_at_construction() {
        let meta = vec![RowMeta { id: "a".into(), text: String::new() }];
        assert!(EmbeddingStore::new(3, vec![1.0, 2.0], meta, false).is_err());
        assert!(EmbeddingStore::empty(0).is_err());
    }
}
