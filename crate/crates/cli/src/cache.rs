//! On-disk cache of spectrum tables, one JSON-lines file per chain length.
//!
//! Layout: `<dir>/<key>_N<n>.jsonl`, a header line followed by one
//! [`SpectrumEntry`] per line. The key hashes the model, the normalization
//! flag and the tabulated observables, so a stale file is never picked up for
//! a different run. Unreadable files are reported and recomputed.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eevconv_core::spectra::{SpectrumEntry, SpectrumTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const FORMAT: &str = "eevconv-table/1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    key: String,
    n: usize,
    observables: Vec<String>,
    entries: usize,
}

pub fn cache_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct TableCache {
    dir: Option<PathBuf>,
    key: String,
    // Held for the lifetime of the cache; the OS lock drops with the handle.
    _lock: Option<File>,
    pub hits: usize,
    pub misses: usize,
}

impl TableCache {
    /// Opens (creating if needed) the cache directory and takes its advisory
    /// lock. `None` disables caching.
    pub fn open(dir: Option<&Path>, key: String) -> Result<Self> {
        let lock = match dir {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating cache directory {}", dir.display()))?;
                let path = dir.join(".lock");
                let file = OpenOptions::new()
                    .create(true)
                    .truncate(false)
                    .write(true)
                    .open(&path)
                    .with_context(|| format!("opening {}", path.display()))?;
                if file.try_lock().is_err() {
                    bail!("cache directory {} is locked by another process", dir.display());
                }
                Some(file)
            }
            None => None,
        };
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            key,
            _lock: lock,
            hits: 0,
            misses: 0,
        })
    }

    fn path(&self, n: usize) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}_N{n}.jsonl", self.key)))
    }

    pub fn get_or_compute<F>(&mut self, n: usize, observables: &[String], compute: F) -> Result<SpectrumTable>
    where
        F: FnOnce() -> eevconv_core::Result<SpectrumTable>,
    {
        if let Some(path) = self.path(n) {
            if path.exists() {
                match read_table(&path, &self.key, n, observables) {
                    Ok(table) => {
                        self.hits += 1;
                        return Ok(table);
                    }
                    Err(e) => eprintln!(
                        "warning: cache file {} is unusable ({e:#}); recomputing",
                        path.display()
                    ),
                }
            }
        }
        self.misses += 1;
        let table = compute().with_context(|| format!("diagonalizing N = {n}"))?;
        if let Some(path) = self.path(n) {
            write_table(&path, &self.key, &table)
                .with_context(|| format!("writing cache file {}", path.display()))?;
        }
        Ok(table)
    }
}

fn read_table(path: &Path, key: &str, n: usize, observables: &[String]) -> Result<SpectrumTable> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header: Header = serde_json::from_str(&lines.next().context("empty file")??)
        .context("bad header")?;
    if header.format != FORMAT || header.key != key || header.n != n || header.observables != observables {
        bail!("header does not match this run");
    }
    let mut entries = Vec::with_capacity(header.entries);
    for (i, line) in lines.enumerate() {
        let entry: SpectrumEntry =
            serde_json::from_str(&line?).with_context(|| format!("entry {i}"))?;
        if entry.eev.len() != observables.len() {
            bail!("entry {i} has {} EEV columns", entry.eev.len());
        }
        entries.push(entry);
    }
    if entries.len() != header.entries || entries.len() != 1usize << n {
        bail!("expected {} entries, found {}", header.entries, entries.len());
    }
    Ok(SpectrumTable::new(n, observables.to_vec(), entries))
}

fn write_table(path: &Path, key: &str, table: &SpectrumTable) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        let header = Header {
            format: FORMAT.into(),
            key: key.into(),
            n: table.n,
            observables: table.observables.clone(),
            entries: table.entries.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for e in &table.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use eevconv_core::Complex64;

    fn toy(n: usize) -> SpectrumTable {
        let entries = (0..1usize << n)
            .map(|j| SpectrumEntry {
                energy: j as f64 * 0.1 - 0.3,
                momentum: j % n,
                eev: vec![Complex64::new(1.0 / (j as f64 + 3.0), 0.0)],
            })
            .collect();
        SpectrumTable::new(n, vec!["a".into()], entries)
    }

    #[test]
    fn key_depends_on_every_part() {
        assert_eq!(cache_key(&["a", "b"]), cache_key(&["a", "b"]));
        assert_ne!(cache_key(&["a", "b"]), cache_key(&["ab"]));
        assert_eq!(cache_key(&["x"]).len(), 64);
    }

    #[test]
    fn tables_round_trip_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let t = toy(3);
        write_table(&path, "k", &t).unwrap();
        assert_eq!(read_table(&path, "k", 3, &["a".into()]).unwrap(), t);
        assert!(read_table(&path, "other", 3, &["a".into()]).is_err());
        assert!(read_table(&path, "k", 4, &["a".into()]).is_err());
        assert!(read_table(&path, "k", 3, &["b".into()]).is_err());
    }

    #[test]
    fn disabled_cache_always_computes() {
        let mut cache = TableCache::open(None, "k".into()).unwrap();
        for _ in 0..2 {
            cache.get_or_compute(2, &["a".into()], || Ok(toy(2))).unwrap();
        }
        assert_eq!((cache.hits, cache.misses), (0, 2));
    }
}
