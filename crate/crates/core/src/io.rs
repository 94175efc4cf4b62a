//! CSV tables, atomic file writes and run manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A single CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Cell {
    fn render(&self) -> Result<String> {
        Ok(match self {
            Cell::Float(v) if !v.is_finite() => {
                return Err(Error::Schema(format!("non-finite value {v}")));
            }
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '\n', '"']) {
                    return Err(Error::Schema(format!("text cell {s:?} needs quoting")));
                }
                s.clone()
            }
        })
    }
}

/// A header plus rows of matching width.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String> {
        let mut out = self.header.join(",");
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} cells, header has {}",
                    row.len(),
                    self.header.len()
                )));
            }
            let cells = row.iter().map(Cell::render).collect::<Result<Vec<_>>>()?;
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Schema(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Validates the whole table, then writes it atomically.
pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    let text = table.render()?;
    write_atomic(path, text.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub seconds: f64,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Record of one run; the manifest never lists itself.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub wall_clock_seconds: f64,
    pub partial: bool,
    pub stages: Vec<StageRecord>,
    pub checks: Vec<CheckRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn all_checks_pass(&self) -> bool {
        !self.partial && self.checks.iter().all(|c| c.pass)
    }
}

/// Serializes all writes of one run and records their hashes.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        let sha = sha256_hex(bytes);
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => f.sha256 = sha,
            None => self.files.push(FileRecord {
                path: name.to_string(),
                sha256: sha,
            }),
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        let text = table.render()?;
        self.write_bytes(name, text.as_bytes())
    }

    /// Records a file written elsewhere under the root, such as a cache entry.
    pub fn record_existing(&mut self, path: &Path) -> Result<()> {
        let Ok(rel) = path.strip_prefix(&self.root) else {
            return Ok(());
        };
        let bytes = fs::read(path)?;
        self.record(&rel.to_string_lossy(), &bytes);
        Ok(())
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes `manifest.json` with the files recorded so far.
    pub fn write_manifest(&self, manifest: &mut RunManifest) -> Result<()> {
        manifest.files = self.files.clone();
        let text = serde_json::to_string_pretty(manifest)
            .map_err(|e| Error::Schema(format!("manifest: {e}")))?;
        write_atomic(&self.root.join("manifest.json"), (text + "\n").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_header_and_precision() {
        let mut t = Table::new(&["a", "delta", "E", "ell", "kinetic", "potential", "interaction", "profile_distance"]);
        t.push(vec![0.1.into(), (1.0 / 3.0).into(), 1.0.into(), 2.0.into(), 3.0.into(), 4.0.into(), 5.0.into(), 6.0.into()]);
        let s = t.render().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "a,delta,E,ell,kinetic,potential,interaction,profile_distance");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[1], "3.3333333333333331e-1");
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["x", "y"]);
        assert_eq!(t.render().unwrap(), "x,y\n");
    }

    #[test]
    fn nan_and_width_rejected() {
        let mut t = Table::new(&["x"]);
        t.push(vec![f64::NAN.into()]);
        assert!(matches!(t.render(), Err(Error::Schema(_))));
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![1.0.into()]);
        assert!(t.render().is_err());
    }

    #[test]
    fn failed_write_leaves_previous_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["x"]);
        t.push(vec![1.0.into()]);
        write_table(&t, &path).unwrap();
        let before = fs::read_to_string(&path).unwrap();
        t.push(vec![f64::INFINITY.into()]);
        assert!(write_table(&t, &path).is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), before);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
