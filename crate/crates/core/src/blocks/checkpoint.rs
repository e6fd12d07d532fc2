//! Model checkpoint file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "EFCK" | version u16 | config length u32 | config (key=value UTF-8)
//! parameter count u32
//! per parameter: name length u32 | name | trainable u8 | rank u8 | dims u32 x rank | f64 x len
//! ```

use std::io::{Read, Write};

use super::model::{ModelConfig, ModelGraph};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"EFCK";
pub const VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(model: &ModelGraph, mut w: W) -> Result<()> {
    let config = model.config().to_kv();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(config.as_bytes())?;
    write_params(model.params(), &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_params<W: Write>(params: &ParamStore, w: &mut W) -> Result<()> {
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params.iter() {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&[p.trainable as u8, p.value.rank() as u8])?;
        for &d in p.value.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(p.value.len() * 8);
        for x in p.value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("{what} length {len} is implausible")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

/// Reads a checkpoint and rebuilds the model it describes.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelGraph> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let config = ModelConfig::from_kv(&read_string(&mut r, "config")?)?;
    let count = read_u32(&mut r)? as usize;
    let mut stored = ParamStore::new();
    for _ in 0..count {
        let name = read_string(&mut r, "parameter name")?;
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let rank = flags[1] as usize;
        let shape = (0..rank)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut raw = vec![0u8; len * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        stored.add(name, Tensor::new(shape, data)?, flags[0] != 0)?;
    }
    let mut model = ModelGraph::build(config)?;
    model.params_mut().load_values(&stored)?;
    Ok(model)
}
