//! Run manifests: one JSON file per command invocation.
//!
//! The manifest records what produced the sibling CSVs: the command, its
//! input paths, a platform-stable hash of the run configuration, the seed
//! when one was used, the toolkit version and a timestamp. The hash covers
//! the command name, the flag values and the raw bytes of every input file,
//! so it changes exactly when the run would.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::Utc;
use serde::Serialize;

use crate::commands::Ctx;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }
}

/// Writes `<command>_manifest.json` into the output directory and returns
/// its path.
pub fn write(
    ctx: &Ctx,
    command: &str,
    inputs: &[&Path],
    flags: &[(&str, String)],
    seed: Option<u64>,
) -> anyhow::Result<PathBuf> {
    let mut hash = Fnv1a::new();
    hash.update(command.as_bytes());
    hash.update(&[0]);
    for (key, value) in flags {
        hash.update(key.as_bytes());
        hash.update(&[b'=']);
        hash.update(value.as_bytes());
        hash.update(&[0]);
    }
    if let Some(seed) = seed {
        hash.update(&seed.to_le_bytes());
    }
    hash.update(&[0]);
    for path in inputs {
        let bytes =
            fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        hash.update(&bytes);
        hash.update(&[0]);
    }

    let manifest = RunManifest {
        command: command.to_string(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        config_hash: format!("{:016x}", hash.0),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: Utc::now().to_rfc3339(),
    };
    let path = ctx.out.join(format!("{command}_manifest.json"));
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
