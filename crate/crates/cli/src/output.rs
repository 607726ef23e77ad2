//! Run manifest and result files. Every file carries the manifest hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// What a run was asked to do. Serialized with sorted keys, so the hash
/// depends only on the content.
pub struct Manifest {
    command: String,
    scenario: Value,
    parameters: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, scenario: Option<(&Path, &[u8])>) -> Self {
        let scenario = match scenario {
            Some((path, bytes)) => json!({
                "path": path.display().to_string(),
                "sha256": sha256_hex(bytes),
            }),
            None => Value::Null,
        };
        Self {
            command: command.into(),
            scenario,
            parameters: Map::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    fn to_value(&self) -> Value {
        json!({
            "artifact": format!("mfgset {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "scenario": self.scenario,
            "parameters": self.parameters,
        })
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_value().to_string().as_bytes())
    }
}

pub struct Output {
    dir: PathBuf,
    stem: String,
    manifest: Manifest,
    hash: String,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, manifest: Manifest) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        let stem = manifest.command.replace(' ', "-");
        let hash = manifest.hash();
        Ok(Self {
            dir: dir.to_path_buf(),
            stem,
            manifest,
            hash,
            files: Vec::new(),
        })
    }

    /// Writes `<command>-<name>.csv` with a `# manifest_hash=` comment line.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let file = format!("{}-{name}.csv", self.stem);
        let mut buf = format!("# manifest_hash={}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(self.dir.join(&file), buf)?;
        self.files.push(file);
        Ok(())
    }

    /// Writes `<command>.json` and `<command>-manifest.json`, returning the summary path.
    pub fn finish(mut self, mut summary: Map<String, Value>) -> CliResult<PathBuf> {
        let file = format!("{}.json", self.stem);
        summary.insert("manifest_hash".into(), self.hash.clone().into());
        let path = self.dir.join(&file);
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        self.files.push(file);
        let mut manifest = self.manifest.to_value();
        manifest["manifest_hash"] = self.hash.clone().into();
        manifest["files"] = self.files.clone().into();
        fs::write(
            self.dir.join(format!("{}-manifest.json", self.stem)),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn nums(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_insertion_order() {
        let mut a = Manifest::new("flow", None);
        a.param("eps", 0.1);
        a.param("seed", 3);
        let mut b = Manifest::new("flow", None);
        b.param("seed", 3);
        b.param("eps", 0.1);
        assert_eq!(a.hash(), b.hash());
        b.param("seed", 4);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
