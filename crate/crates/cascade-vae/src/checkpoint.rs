//! Checkpoint persistence: a flat binary tensor file plus a JSON manifest
//! carrying the effective config, its hash, and the RNG seed.
//!
//! `checkpoint.bin` layout (little-endian):
//!   magic "CVAE" | format u32 | tensor count u32 | per tensor:
//!   name len u32, name utf8, dtype u8 (0 = f64), rows u64, cols u64,
//!   rows*cols f64 values row-major.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"CVAE";
const FORMAT: u32 = 1;
const DTYPE_F64: u8 = 0;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config: TrainConfig,
    pub config_hash: String,
    pub seed: u64,
    pub num_users: usize,
    pub tensor_names: Vec<String>,
    /// Free-form run metadata (epochs run, final validation score, ...).
    #[serde(default)]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(config: &TrainConfig, num_users: usize, store: &ParamStore) -> Self {
        Manifest {
            format: FORMAT,
            config: config.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            num_users,
            tensor_names: store.names(),
            notes: BTreeMap::new(),
        }
    }
}

fn write_u32(w: &mut impl Write, v: u32, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

fn write_u64(w: &mut impl Write, v: u64, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::io(path, e))
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, path)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_checkpoint(dir: &Path, store: &ParamStore, manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin_path = dir.join(CHECKPOINT_FILE);
    let f = File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(MAGIC).map_err(|e| Error::io(&bin_path, e))?;
    write_u32(&mut w, FORMAT, &bin_path)?;
    let names = store.names();
    write_u32(&mut w, names.len() as u32, &bin_path)?;
    for name in &names {
        let t = store.get(name);
        write_u32(&mut w, name.len() as u32, &bin_path)?;
        w.write_all(name.as_bytes()).map_err(|e| Error::io(&bin_path, e))?;
        w.write_all(&[DTYPE_F64]).map_err(|e| Error::io(&bin_path, e))?;
        write_u64(&mut w, t.rows as u64, &bin_path)?;
        write_u64(&mut w, t.cols as u64, &bin_path)?;
        for &v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&bin_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&bin_path, e))?;

    let man_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&man_path, json).map_err(|e| Error::io(&man_path, e))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(ParamStore, Manifest)> {
    let man_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&man_path).map_err(|e| Error::io(&man_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", man_path.display())))?;
    if manifest.format != FORMAT {
        return Err(Error::Invalid(format!(
            "unsupported checkpoint format {}",
            manifest.format
        )));
    }

    let bin_path = dir.join(CHECKPOINT_FILE);
    let f = File::open(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, &bin_path)?;
    if &magic != MAGIC {
        return Err(Error::Invalid(format!(
            "{}: not a checkpoint file",
            bin_path.display()
        )));
    }
    let format = read_u32(&mut r, &bin_path)?;
    if format != FORMAT {
        return Err(Error::Invalid(format!("unsupported checkpoint format {format}")));
    }
    let count = read_u32(&mut r, &bin_path)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r, &bin_path)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes, &bin_path)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Invalid("checkpoint tensor name is not utf-8".into()))?;
        let mut dtype = [0u8; 1];
        read_exact(&mut r, &mut dtype, &bin_path)?;
        if dtype[0] != DTYPE_F64 {
            return Err(Error::Invalid(format!(
                "tensor {name}: unsupported dtype {}",
                dtype[0]
            )));
        }
        let rows = read_u64(&mut r, &bin_path)? as usize;
        let cols = read_u64(&mut r, &bin_path)? as usize;
        let mut data = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            read_exact(&mut r, &mut buf, &bin_path)?;
            *v = f64::from_le_bytes(buf);
        }
        store.insert(&name, Tensor::from_vec(rows, cols, data));
    }
    if store.names() != manifest.tensor_names {
        return Err(Error::Invalid(
            "checkpoint tensors do not match the manifest".into(),
        ));
    }
    Ok((store, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn sample_store() -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = RngStream::new(3);
        store.insert("a.w", Tensor::randn(4, 3, 1.0, &mut rng));
        store.insert("b.v", Tensor::randn(2, 5, 0.5, &mut rng));
        store.insert("c.scalarish", Tensor::from_vec(1, 1, vec![-0.0]));
        store
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let store = sample_store();
        let cfg = TrainConfig::default();
        let mut manifest = Manifest::new(&cfg, 4, &store);
        manifest
            .notes
            .insert("val_map10".into(), serde_json::json!(0.25));
        save_checkpoint(dir.path(), &store, &manifest).unwrap();
        let (loaded, man2) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(man2.config_hash, cfg.hash());
        assert_eq!(man2.notes["val_map10"], serde_json::json!(0.25));
        for name in store.names() {
            let a = store.get(&name);
            let b = loaded.get(&name);
            assert_eq!((a.rows, a.cols), (b.rows, b.cols));
            let bits_a: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = sample_store();
        let manifest = Manifest::new(&TrainConfig::default(), 4, &store);
        save_checkpoint(dir.path(), &store, &manifest).unwrap();
        let bin = dir.path().join(CHECKPOINT_FILE);
        let mut bytes = std::fs::read(&bin).unwrap();
        bytes[0] = b'X';
        std::fs::write(&bin, bytes).unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }

    #[test]
    fn missing_files_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        match load_checkpoint(&dir.path().join("nope")) {
            Err(Error::Io { .. }) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_tensor_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = sample_store();
        let mut manifest = Manifest::new(&TrainConfig::default(), 4, &store);
        manifest.tensor_names.pop();
        save_checkpoint(dir.path(), &store, &manifest).unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }
}
