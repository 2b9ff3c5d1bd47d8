use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

/// Identifies the tool version, subcommand and resolved parameters behind a
/// report. The hash covers every parameter except output location and
/// thread count, so reruns into another directory share it.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new<A: Serialize>(command: &'static str, seed: u64, args: &A) -> CliResult<Self> {
        let canonical = serde_json::to_string(args)?;
        let digest = Sha256::digest(format!("{command}\n{canonical}").as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Provenance {
            tool: "fixlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash,
        })
    }

    /// One-line comment placed above CSV headers.
    pub fn comment(&self) -> String {
        format!(
            "# {} {} command={} seed={} config={}\n",
            self.tool, self.version, self.command, self.seed, self.config_hash
        )
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)
            .map_err(|e| format!("cannot create output directory {}: {e}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial file.
    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let target = self.path(name);
        let dir = target.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .map_err(|e| format!("cannot write {}: {}", target.display(), e.error))?;
        Ok(target)
    }

    pub fn write_json<V: Serialize>(&self, name: &str, value: &V) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// CSV with the provenance comment line above the header.
    pub fn write_csv(
        &self,
        name: &str,
        prov: &Provenance,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> CliResult<PathBuf> {
        let mut bytes = prov.comment().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.write(name, &bytes)
    }
}

/// Wraps a report body with its provenance.
#[derive(Serialize)]
pub struct Report<'a, B: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: B,
}
