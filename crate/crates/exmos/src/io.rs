//! CSV tables, the metadata sidecar, model snapshots and JSON-lines files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use exmos_core::dataset::{DataTable, DatasetError, FeatureMeta};
use exmos_core::model::TrainedModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}:{line}: {source}", path.display())]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Table { path: PathBuf, source: DatasetError },
    #[error("{}: unsupported snapshot format {found} (expected {SNAPSHOT_FORMAT})", path.display())]
    SnapshotFormat { path: PathBuf, found: u32 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// The metadata sidecar: one entry per CSV column, target last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFile {
    pub features: Vec<FeatureMeta>,
}

pub fn read_meta(path: &Path) -> Result<MetaFile, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), line: source.line(), source })
}

/// Load a CSV table. Without a sidecar every column is numeric and the last
/// one is the binary target.
pub fn load_table(data: &Path, meta: Option<&Path>) -> Result<DataTable, IoError> {
    let file = File::open(data).map_err(io_err(data))?;
    let csv_err = |source| IoError::Csv { path: data.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let records = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect::<Vec<String>>()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    let schema = match meta {
        Some(m) => read_meta(m)?.features,
        None => {
            let mut s: Vec<FeatureMeta> = header.iter().map(FeatureMeta::numeric).collect();
            if let Some(last) = s.pop() {
                s.push(FeatureMeta::binary(last.name));
            }
            s
        }
    };
    DataTable::from_text_records(schema, &header, records)
        .map_err(|source| IoError::Table { path: data.to_path_buf(), source })
}

pub const SNAPSHOT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub format_version: u32,
    pub model: TrainedModel,
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<(), IoError> {
    let snap = ModelSnapshot { format_version: SNAPSHOT_FORMAT, model: model.clone() };
    let json = serde_json::to_string(&snap).expect("model serializes");
    fs::write(path, json).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<TrainedModel, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let snap: ModelSnapshot = serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), line: source.line(), source })?;
    if snap.format_version != SNAPSHOT_FORMAT {
        return Err(IoError::SnapshotFormat { path: path.to_path_buf(), found: snap.format_version });
    }
    Ok(snap.model)
}

/// Append records as JSON lines, creating the file if needed.
pub fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("record serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read every non-blank line of a JSON-lines file.
pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|source| IoError::Json { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(item);
    }
    Ok(out)
}
