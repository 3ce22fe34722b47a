use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One row of a fringe table. `same` is herald and read on detector 1,
/// `cross` herald on 1 and read on 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeRow {
    pub x: f64,
    pub g2_same: f64,
    pub g2_same_err_lo: f64,
    pub g2_same_err_hi: f64,
    pub g2_cross: f64,
    pub g2_cross_err_lo: f64,
    pub g2_cross_err_hi: f64,
    pub g2_same_exact: f64,
    pub g2_cross_exact: f64,
}

pub const FRINGE_HEADER: [&str; 9] =
    ["x", "g2_same", "g2_same_err_lo", "g2_same_err_hi", "g2_cross", "g2_cross_err_lo", "g2_cross_err_hi", "g2_same_exact", "g2_cross_exact"];

pub fn fringe_csv(rows: &[FringeRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(FRINGE_HEADER).expect("in-memory csv");
    for r in rows {
        let v = [r.x, r.g2_same, r.g2_same_err_lo, r.g2_same_err_hi, r.g2_cross, r.g2_cross_err_lo, r.g2_cross_err_hi, r.g2_same_exact, r.g2_cross_exact];
        w.write_record(v.iter().map(|x| x.to_string())).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("result serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct ManifestFile {
    name: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: Option<u64>,
    trials: Option<u64>,
    files: Vec<ManifestFile>,
}

/// Artifacts of one run, written together with a manifest.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), content.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file and `manifest.json` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, subcommand: &str, echo: &str, seed: Option<u64>, trials: Option<u64>) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            atomic_write(&p, bytes)?;
            written.push(p);
        }
        let manifest = Manifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(echo.as_bytes()),
            seed,
            trials,
            files: self.files.iter().map(|(n, b)| ManifestFile { name: n.clone(), sha256: sha256_hex(b), bytes: b.len() }).collect(),
        };
        let p = dir.join("manifest.json");
        atomic_write(&p, to_json(&manifest).as_bytes())?;
        written.push(p);
        Ok(written)
    }
}
