//! Corpus loading for experiments.

use std::path::{Path, PathBuf};

use mltr_core::dataset::normalize_features;
use mltr_core::{synthetic, Dataset, QueryGroup};

use crate::config::ExperimentConfig;
use crate::error::{AppError, Result};
use crate::letor;

/// Files that make up a corpus at `path`: the file itself, or for a LETOR
/// directory the five partitions `S1.txt`..`S5.txt`, or failing that
/// `Fold1/{train,vali,test}.txt`.
pub fn corpus_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(AppError::Data(format!("{} does not exist", path.display())));
    }
    let parts: Vec<PathBuf> = (1..=5).map(|i| path.join(format!("S{i}.txt"))).collect();
    if parts.iter().all(|p| p.is_file()) {
        return Ok(parts);
    }
    let fold: Vec<PathBuf> = ["train", "vali", "test"].iter().map(|f| path.join("Fold1").join(format!("{f}.txt"))).collect();
    if fold.iter().all(|p| p.is_file()) {
        return Ok(fold);
    }
    Err(AppError::Data(format!(
        "{} holds neither S1.txt..S5.txt nor Fold1/{{train,vali,test}}.txt",
        path.display()
    )))
}

/// Reads and concatenates the files of a corpus. A query id may not appear in
/// two files.
pub fn read_corpus(path: &Path, expected_dims: Option<usize>) -> Result<Dataset> {
    let files = corpus_files(path)?;
    let mut parts = Vec::with_capacity(files.len());
    for f in &files {
        let ds = letor::read_file(f, expected_dims).map_err(|source| AppError::Letor { path: f.clone(), source })?;
        parts.push(ds);
    }
    let dims = expected_dims.unwrap_or_else(|| parts.iter().map(|d| d.feature_dims).max().unwrap_or(0));
    let mut queries: Vec<QueryGroup> = Vec::new();
    for mut part in parts {
        if part.feature_dims < dims {
            for d in part.queries.iter_mut().flat_map(|q| q.documents.iter_mut()) {
                d.features.resize(dims, 0.0);
            }
        }
        queries.extend(part.queries);
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("corpus").trim_end_matches(".txt").to_string();
    Dataset::new(name, dims, queries).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

/// The corpus an experiment runs on, normalized when configured.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Dataset> {
    let raw = match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(p), _) => read_corpus(p, cfg.data.expected_dims)?,
        (None, Some(s)) => synthetic::generate(&s.spec()).map_err(|e| AppError::Data(e.to_string()))?,
        (None, None) => return Err(AppError::Config("data: one of path or synthetic is required".into())),
    };
    Ok(if cfg.data.normalize { normalize_features(&raw) } else { raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_layouts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(corpus_files(dir.path()).is_err());
        assert!(corpus_files(&dir.path().join("missing")).is_err());
        for i in 1..=5 {
            std::fs::write(dir.path().join(format!("S{i}.txt")), format!("{} qid:{i} 1:0.5\n", i % 2)).unwrap();
        }
        assert_eq!(corpus_files(dir.path()).unwrap().len(), 5);
        let ds = read_corpus(dir.path(), Some(3)).unwrap();
        assert_eq!(ds.queries.len(), 5);
        assert_eq!(ds.feature_dims, 3);
    }

    #[test]
    fn duplicate_query_across_files_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let fold = dir.path().join("Fold1");
        std::fs::create_dir(&fold).unwrap();
        for f in ["train", "vali", "test"] {
            std::fs::write(fold.join(format!("{f}.txt")), "1 qid:7 1:0.5\n").unwrap();
        }
        assert!(matches!(read_corpus(dir.path(), None), Err(AppError::Data(_))));
    }
}
