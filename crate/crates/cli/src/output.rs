//! Output directory with a checksummed manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Name of the manifest inside an output directory.
pub const MANIFEST: &str = "manifest.json";

/// Round-trippable float text (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// Built-in numerical parameters that shaped the results.
    pub parameters: serde_json::Value,
    pub files: Vec<FileRecord>,
    pub timings: Vec<Timing>,
    pub checks: Vec<Check>,
}

/// Writes files into one directory and remembers what it wrote.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
    timings: Vec<Timing>,
    checks: Vec<Check>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), timings: Vec::new(), checks: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn target(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let rel = PathBuf::from(rel);
        if !self.files.contains(&rel) {
            self.files.push(rel);
        }
        Ok(path)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.target(rel)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    /// Columns of equal length under the given headers.
    pub fn write_csv(&mut self, rel: &str, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
        let rows = columns.first().map_or(0, |c| c.len());
        anyhow::ensure!(columns.iter().all(|c| c.len() == rows), "ragged columns for {rel}");
        let path = self.target(rel)?;
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(headers)?;
        for r in 0..rows {
            w.write_record(columns.iter().map(|c| fmt_f64(c[r])))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Run `f` and record its wall-clock time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self).with_context(|| format!("stage '{stage}'"))?;
        self.timings.push(Timing { stage: stage.into(), seconds: t0.elapsed().as_secs_f64() });
        Ok(out)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Checksum every written file and write the manifest.
    pub fn finish(
        self,
        command: &str,
        config_hash: String,
        config: serde_json::Value,
        parameters: serde_json::Value,
    ) -> Result<RunManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let bytes = std::fs::read(self.root.join(rel)).with_context(|| format!("reading {}", rel.display()))?;
            files.push(FileRecord {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: command.into(),
            config_hash,
            config,
            parameters,
            files,
            timings: self.timings,
            checks: self.checks,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn manifest_lists_files_with_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("a/x.csv", &["t", "v"], &[&[0.0, 1.0], &[2.0, 3.0]]).unwrap();
        out.write_text("b.txt", "hi").unwrap();
        out.write_text("b.txt", "hello").unwrap();
        let m = out.finish("test", "h".into(), serde_json::Value::Null, serde_json::Value::Null).unwrap();
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a/x.csv", "b.txt"]);
        assert_eq!(m.files[1].bytes, 5);
        assert_eq!(m.files[1].sha256, hex::encode(Sha256::digest(b"hello")));
        let csv = std::fs::read_to_string(dir.path().join("a/x.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("t,v"));
        assert!(dir.path().join(MANIFEST).exists());
    }

    #[test]
    fn ragged_columns_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        assert!(out.write_csv("x.csv", &["a", "b"], &[&[1.0], &[]]).is_err());
    }
}
