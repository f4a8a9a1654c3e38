use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSetBuilder};

use crate::config::HoldoutManifest;
use crate::error::HarnessError;
use crate::AUDIT_DIR;

/// Fails if any workspace file matches a holdout pattern or has a line whose
/// first comma- or tab-separated field is a holdout date. `.audit` is skipped.
pub fn scan_workspace(workspace: &Path, manifest: &HoldoutManifest) -> Result<(), HarnessError> {
    let mut builder = GlobSetBuilder::new();
    for p in &manifest.patterns {
        let glob = Glob::new(p).map_err(|e| HarnessError::Config(format!("{p}: {e}")))?;
        builder.add(glob);
    }
    let globs = builder
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut files = Vec::new();
    collect(workspace, workspace, &mut files)?;
    for rel in files {
        let name_hit = globs.is_match(&rel)
            || rel
                .file_name()
                .is_some_and(|n| globs.is_match(Path::new(n)));
        if name_hit {
            return Err(HarnessError::Isolation {
                path: rel,
                reason: "matches a holdout file pattern".into(),
            });
        }
        if manifest.dates.is_empty() {
            continue;
        }
        let path = workspace.join(&rel);
        let bytes = fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        for line in text.lines() {
            let key = line
                .split([',', '\t'])
                .next()
                .unwrap_or("")
                .trim()
                .trim_matches('"');
            if manifest.dates.iter().any(|d| d == key) {
                return Err(HarnessError::Isolation {
                    path: rel,
                    reason: format!("contains holdout row {key}"),
                });
            }
        }
    }
    Ok(())
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| {
            e.map(|e| e.path())
                .map_err(|err| HarnessError::io(dir, err))
        })
        .collect::<Result<_, _>>()?;
    paths.sort();
    for path in paths {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        if rel == Path::new(AUDIT_DIR) {
            continue;
        }
        let meta = fs::symlink_metadata(&path).map_err(|e| HarnessError::io(&path, e))?;
        if meta.is_dir() {
            collect(root, &path, out)?;
        } else {
            out.push(rel);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_and_row_checks() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("panel.csv"), "date,a\n2015Q4,1\n").unwrap();
        let manifest = HoldoutManifest {
            patterns: vec!["*holdout*".into()],
            dates: vec!["2017Q1".into()],
        };
        scan_workspace(dir.path(), &manifest).unwrap();

        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/panel_holdout.csv"), "").unwrap();
        assert!(matches!(
            scan_workspace(dir.path(), &manifest),
            Err(HarnessError::Isolation { .. })
        ));
        fs::remove_file(dir.path().join("sub/panel_holdout.csv")).unwrap();

        fs::write(
            dir.path().join("panel.csv"),
            "date,a\n2015Q4,1\n\"2017Q1\",2\n",
        )
        .unwrap();
        match scan_workspace(dir.path(), &manifest) {
            Err(HarnessError::Isolation { path, .. }) => assert_eq!(path, Path::new("panel.csv")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn audit_dir_is_not_scanned() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join(AUDIT_DIR)).unwrap();
        fs::write(dir.path().join(AUDIT_DIR).join("holdout.csv"), "").unwrap();
        let manifest = HoldoutManifest {
            patterns: vec!["*holdout*".into()],
            dates: vec![],
        };
        scan_workspace(dir.path(), &manifest).unwrap();
    }
}
