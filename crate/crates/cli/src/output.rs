use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// An emitted file and its content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Writes files into one directory and remembers what it wrote.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

/// 17 significant digits; parses back to the identical f64.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0e0" for negative zero.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// RFC 4180 CSV with LF line endings and a header row.
    pub fn write_csv(&mut self, name: &str, headers: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Runtime(format!("{name}: {e}"));
        w.write_record(headers).map_err(csv_err)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(CliError::Runtime(format!(
                    "{name}: row {i} has {} columns, header has {}",
                    row.len(),
                    headers.len()
                )));
            }
            w.write_record(row.iter().map(|&x| format_number(x))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    /// Pretty JSON followed by a newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}
