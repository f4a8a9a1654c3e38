use std::fs;
use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::fsutil::{append_line, one_line, read, sha256_hex, write_atomic};

/// One snapshot: its position, identifier, content digest and the
/// description it was proposed with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotRef {
    pub index: usize,
    pub id: String,
    pub blob: String,
    pub description: String,
}

impl SnapshotRef {
    /// The 7-character form used in `results.tsv`.
    pub fn short_id(&self) -> &str {
        &self.id[..7]
    }
}

/// Content-addressed blobs plus an ordered ref list.
///
/// ```text
/// .audit/objects/<sha256 of content>
/// .audit/refs        k \t id \t blob \t description
/// ```
#[derive(Clone, Debug)]
pub struct SnapshotStore {
    root: PathBuf,
}

impl SnapshotStore {
    pub fn open(audit_dir: &Path) -> Self {
        SnapshotStore {
            root: audit_dir.to_path_buf(),
        }
    }

    pub(crate) fn create(audit_dir: &Path) -> Result<Self, HarnessError> {
        let objects = audit_dir.join("objects");
        fs::create_dir_all(&objects).map_err(|e| HarnessError::io(&objects, e))?;
        let store = Self::open(audit_dir);
        write_atomic(&store.refs_path(), b"")?;
        Ok(store)
    }

    fn refs_path(&self) -> PathBuf {
        self.root.join("refs")
    }

    fn object_path(&self, blob: &str) -> PathBuf {
        self.root.join("objects").join(blob)
    }

    pub fn refs(&self) -> Result<Vec<SnapshotRef>, HarnessError> {
        let path = self.refs_path();
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.splitn(4, '\t').collect();
            let corrupt = || HarnessError::CorruptStore(format!("refs line {}", i + 1));
            if f.len() != 4 || f[0].parse::<usize>().ok() != Some(i) {
                return Err(corrupt());
            }
            let r = SnapshotRef {
                index: i,
                id: f[1].to_string(),
                blob: f[2].to_string(),
                description: f[3].to_string(),
            };
            if r.id != snapshot_id(i, &r.blob) {
                return Err(corrupt());
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Stores `content` as snapshot `index`, which must be the next free one.
    pub fn put(
        &self,
        index: usize,
        content: &[u8],
        description: &str,
    ) -> Result<SnapshotRef, HarnessError> {
        let existing = self.refs()?.len();
        if existing != index {
            return Err(HarnessError::CorruptStore(format!(
                "snapshot {index} requested but store holds {existing}"
            )));
        }
        let blob = sha256_hex(content);
        let path = self.object_path(&blob);
        if !path.exists() {
            write_atomic(&path, content)?;
        }
        let r = SnapshotRef {
            index,
            id: snapshot_id(index, &blob),
            blob,
            description: one_line(description),
        };
        append_line(
            &self.refs_path(),
            &format!("{}\t{}\t{}\t{}", r.index, r.id, r.blob, r.description),
        )?;
        Ok(r)
    }

    /// Reads a blob back, checking it still hashes to its name.
    pub fn content(&self, blob: &str) -> Result<Vec<u8>, HarnessError> {
        let bytes = read(&self.object_path(blob))?;
        if sha256_hex(&bytes) != blob {
            return Err(HarnessError::CorruptStore(format!("object {blob} altered")));
        }
        Ok(bytes)
    }
}

fn snapshot_id(index: usize, blob: &str) -> String {
    sha256_hex(format!("snapshot {index}\n{blob}\n").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_content_different_position_different_id() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::create(dir.path()).unwrap();
        let a = store.put(0, b"x", "first").unwrap();
        let b = store.put(1, b"x", "again").unwrap();
        assert_eq!(a.blob, b.blob);
        assert_ne!(a.id, b.id);
        assert_eq!(store.refs().unwrap(), vec![a.clone(), b]);
        assert_eq!(store.content(&a.blob).unwrap(), b"x");
        assert!(store.put(5, b"y", "gap").is_err());
    }

    #[test]
    fn altered_object_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::create(dir.path()).unwrap();
        let a = store.put(0, b"x", "first").unwrap();
        fs::write(dir.path().join("objects").join(&a.blob), b"y").unwrap();
        assert!(matches!(
            store.content(&a.blob),
            Err(HarnessError::CorruptStore(_))
        ));
    }
}
