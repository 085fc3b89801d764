//! Weight checkpoints: `manifest.txt` naming each parameter and its shape,
//! plus one TensorFile per parameter.

use std::path::Path;

use crate::error::{NebiError, Result};
use crate::kv::KvFile;
use crate::tensor_file::{read_tensor, write_tensor, NdArray};

use super::params::{Param, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "nebi-checkpoint";
pub const CHECKPOINT_MANIFEST: &str = "manifest.txt";

fn file_name(name: &str) -> String {
    format!("{name}.nebi")
}

/// Writes parameter values (not optimizer state). Keys already in `extra`
/// are copied into the manifest first.
pub fn save_params(store: &ParamStore, dir: impl AsRef<Path>, extra: &KvFile) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| NebiError::io(dir, e))?;
    let mut kv = KvFile::new();
    kv.set("format", CHECKPOINT_FORMAT);
    for key in extra.keys() {
        kv.set(key, extra.get_str(key)?);
    }
    kv.set("param_count", store.params.len());
    kv.set("scalar_count", store.count());
    kv.set("adam_step", store.step);
    for (i, p) in store.params.iter().enumerate() {
        if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_') {
            return Err(NebiError::Config(format!("parameter name {:?} is not file-safe", p.name)));
        }
        kv.set(&format!("param.{i}.name"), &p.name);
        kv.set_list(&format!("param.{i}.shape"), &p.shape);
        write_tensor(dir.join(file_name(&p.name)), &NdArray::new(p.shape.clone(), p.value.clone())?)?;
    }
    kv.write(dir.join(CHECKPOINT_MANIFEST))
}

/// Reads a checkpoint back; returns the parameters and the full manifest.
pub fn load_params(dir: impl AsRef<Path>) -> Result<(ParamStore, KvFile)> {
    let dir = dir.as_ref();
    let kv = KvFile::read(dir.join(CHECKPOINT_MANIFEST))?;
    if kv.get_str("format")? != CHECKPOINT_FORMAT {
        return Err(kv.err("not a nebi-checkpoint manifest"));
    }
    let count: usize = kv.get("param_count")?;
    let mut params = Vec::with_capacity(count);
    for i in 0..count {
        let name = kv.get_str(&format!("param.{i}.name"))?.to_string();
        let shape: Vec<usize> = kv.get_list(&format!("param.{i}.shape"))?;
        let arr = read_tensor(dir.join(file_name(&name)))?;
        if arr.dims() != shape {
            return Err(kv.err(format!("{name}: manifest shape {shape:?} vs tensor {:?}", arr.dims())));
        }
        params.push(Param::new(name, &shape, arr.data().to_vec())?);
    }
    let mut store = ParamStore::new(params);
    store.step = kv.get("adam_step")?;
    Ok((store, kv))
}
