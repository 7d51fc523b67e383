//! Artifact writing.
//!
//! Every artifact is rendered in memory first and then written to a hidden
//! temporary file in the target directory and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use combmem::io::round_sig;
use serde_json::Value;

use crate::error::CliError;

pub const GENERATOR: &str = concat!("combmem ", env!("CARGO_PKG_VERSION"));

/// An artifact waiting to be written.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Self {
        let mut bytes = Vec::new();
        write(&mut bytes).expect("writing to memory cannot fail");
        Self {
            name: name.into(),
            bytes,
        }
    }

    /// JSON with a `generator` field, numbers rounded to 12 significant
    /// digits and non-finite values written as `null`.
    pub fn json(name: &str, mut value: Value) -> Self {
        if let Value::Object(map) = &mut value {
            map.insert("generator".into(), Value::String(GENERATOR.into()));
        }
        let value = round(value);
        let mut bytes = serde_json::to_vec_pretty(&value).expect("json values serialize");
        bytes.push(b'\n');
        Self {
            name: name.into(),
            bytes,
        }
    }
}

fn round(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round(v))).collect()),
        v => v,
    }
}

/// Finite value or `None`, for fields that serde_json would reject.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let io = |what: &str, p: &Path, e: std::io::Error| CliError::Io(format!("{what} {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io("cannot create", dir, e))?;
    let mut paths = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let target = dir.join(&a.name);
        let tmp = dir.join(format!(".{}.tmp", a.name));
        fs::write(&tmp, &a.bytes).map_err(|e| io("cannot write", &tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| io("cannot move into place", &target, e))?;
        paths.push(target);
    }
    Ok(paths)
}
