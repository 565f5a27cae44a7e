//! `RIDX` index files. Layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RIDX"
//! 4       2     version (u16, = 1)
//! 6       1     kind (0 = flat, 1 = partitioned)
//! 7       1     reserved (= 0)
//! 8       4     dim of the indexed store (u32)
//! 12      8     row count of the indexed store (u64)
//! 20      4     partitions P (u32, 0 for flat)
//! 24      4     default probes (u32, 0 for flat)
//! 28      ..    P * dim f32 centroids, row-major
//! ..      ..    count u32 partition assignments
//! ```
//!
//! An index file only references its corpus; loading needs the same store.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

use super::{CorpusIndex, FlatIndex, PartitionedIndex, TopK};

pub const INDEX_MAGIC: [u8; 4] = *b"RIDX";
pub const INDEX_VERSION: u16 = 1;
const HEADER_LEN: usize = 28;
const KIND_FLAT: u8 = 0;
const KIND_PARTITIONED: u8 = 1;

pub fn save_index(index: &CorpusIndex<'_>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let store = index.store();
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    let (kind, partitions, probes) = match index {
        CorpusIndex::Flat(_) => (KIND_FLAT, 0u32, 0u32),
        CorpusIndex::Partitioned(p) => (KIND_PARTITIONED, p.partitions() as u32, p.probes() as u32),
    };
    out.push(kind);
    out.push(0);
    out.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    out.extend_from_slice(&partitions.to_le_bytes());
    out.extend_from_slice(&probes.to_le_bytes());
    if let CorpusIndex::Partitioned(p) = index {
        out.reserve(p.centroids().len() * 4 + p.assignments().len() * 4);
        for c in p.centroids() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for a in p.assignments() {
            out.extend_from_slice(&a.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_index<'a>(path: impl AsRef<Path>, store: &'a EmbeddingStore) -> Result<CorpusIndex<'a>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "file shorter than index header"));
    }
    if bytes[0..4] != INDEX_MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != INDEX_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let kind = bytes[6];
    if bytes[7] != 0 {
        return Err(Error::format(path, "reserved byte is not zero"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let dim = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let partitions = u32_at(20) as usize;
    let probes = u32_at(24) as usize;

    if dim != store.dim() || count != store.len() as u64 {
        return Err(Error::Validation(format!(
            "index built for {count} rows of dim {dim}, store has {} rows of dim {}",
            store.len(),
            store.dim()
        )));
    }

    match kind {
        KIND_FLAT => {
            if bytes.len() != HEADER_LEN {
                return Err(Error::corrupt(path, "flat index carries a payload"));
            }
            Ok(CorpusIndex::Flat(FlatIndex::new(store)?))
        }
        KIND_PARTITIONED => {
            let expected = HEADER_LEN + partitions * dim * 4 + store.len() * 4;
            if bytes.len() != expected {
                return Err(Error::corrupt(
                    path,
                    format!("{} bytes, header implies {expected}", bytes.len()),
                ));
            }
            let body = &bytes[HEADER_LEN..];
            let (cent, asg) = body.split_at(partitions * dim * 4);
            let centroids = cent
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let assignments = asg
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let index = PartitionedIndex::from_parts(store, centroids, assignments, probes)
                .map_err(|e| Error::corrupt(path, e.to_string()))?;
            Ok(CorpusIndex::Partitioned(index))
        }
        other => Err(Error::format(path, format!("unknown index kind {other}"))),
    }
}
