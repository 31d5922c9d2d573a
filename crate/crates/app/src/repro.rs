//! Reproducibility manifests: what ran, with which resolved flags and seed,
//! and the digests of everything it read and wrote.

use std::fs;
use std::path::Path;

use fast_core::manifest::{ManifestReader, ManifestWriter};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub const KIND_RUN: &str = "run";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> AppResult<String> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> AppResult<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub command: String,
    /// Command line after the program name, verbatim.
    pub args: Vec<String>,
    /// Every flag of the subcommand with its resolved value, defaults included.
    pub flags: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn digests_json(list: &[FileDigest]) -> String {
    let items: Vec<Value> = list
        .iter()
        .map(|d| {
            let mut m = Map::new();
            m.insert("path".into(), Value::String(d.path.clone()));
            m.insert("sha256".into(), Value::String(d.sha256.clone()));
            Value::Object(m)
        })
        .collect();
    Value::Array(items).to_string()
}

fn digests_from(value: Option<&Value>, key: &str) -> AppResult<Vec<FileDigest>> {
    let bad = || AppError::Data(format!("run manifest key `{key}` must be a list of {{path, sha256}}"));
    let arr = value.and_then(Value::as_array).ok_or_else(bad)?;
    arr.iter()
        .map(|v| {
            let path = v.get("path").and_then(Value::as_str).ok_or_else(bad)?;
            let sha = v.get("sha256").and_then(Value::as_str).ok_or_else(bad)?;
            Ok(FileDigest {
                path: path.to_owned(),
                sha256: sha.to_owned(),
            })
        })
        .collect()
}

impl RunRecord {
    pub fn to_manifest(&self) -> String {
        let mut flags = Map::new();
        for (k, v) in &self.flags {
            flags.insert(k.clone(), Value::String(v.clone()));
        }
        let mut w = ManifestWriter::new(KIND_RUN);
        w.string("tool", concat!("fast ", env!("CARGO_PKG_VERSION")))
            .string("command", &self.command)
            .strings("args", &self.args)
            .json("flags", &Value::Object(flags).to_string());
        match self.seed {
            Some(s) => w.uint("seed", s),
            None => w.json("seed", "null"),
        };
        w.json("inputs", &digests_json(&self.inputs))
            .json("outputs", &digests_json(&self.outputs))
            .finish()
    }

    pub fn from_manifest(text: &str) -> AppResult<Self> {
        let r = ManifestReader::parse_kind(text, KIND_RUN)?;
        let flags = r
            .map()
            .get("flags")
            .and_then(Value::as_object)
            .ok_or_else(|| AppError::Data("run manifest lacks a flags object".into()))?
            .iter()
            .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_owned()))
            .collect();
        let seed = match r.map().get("seed") {
            None | Some(Value::Null) => None,
            Some(_) => Some(r.uint("seed")?),
        };
        Ok(Self {
            command: r.string("command")?.to_owned(),
            args: r.strings("args")?,
            flags,
            seed,
            inputs: digests_from(r.map().get("inputs"), "inputs")?,
            outputs: digests_from(r.map().get("outputs"), "outputs")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn record_round_trip() {
        let rec = RunRecord {
            command: "fit".into(),
            args: vec!["fit".into(), "--seed".into(), "7".into()],
            flags: vec![("seed".into(), "7".into()), ("urf".into(), "md".into())],
            seed: Some(7),
            inputs: vec![FileDigest {
                path: "c.bin".into(),
                sha256: "00".into(),
            }],
            outputs: vec![],
        };
        let text = rec.to_manifest();
        assert_eq!(RunRecord::from_manifest(&text).unwrap(), rec);
        let unseeded = RunRecord { seed: None, ..rec };
        assert_eq!(RunRecord::from_manifest(&unseeded.to_manifest()).unwrap(), unseeded);
    }
}
