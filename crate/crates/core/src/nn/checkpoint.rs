//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `GLSPMODL`, `u32` version, `u32` record
//! count, then records of `u32` name length, name bytes, `u32` rank, `u32`
//! dims, `f32` data. The first record, `meta.config`, holds the model
//! dimensions so the remaining records can be checked against them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{ModelConfig, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"GLSPMODL";
pub const MODEL_VERSION: u32 = 1;
const META_NAME: &str = "meta.config";

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_record(buf: &mut Vec<u8>, name: &str, dims: &[usize], data: impl Iterator<Item = f32>) {
    put_u32(buf, name.len());
    buf.extend_from_slice(name.as_bytes());
    put_u32(buf, dims.len());
    for &d in dims {
        put_u32(buf, d);
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &ModelParams) -> Result<()> {
    let named = params.named();
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    put_u32(&mut buf, named.len() + 1);
    let meta = params.config.as_array();
    put_record(&mut buf, META_NAME, &[meta.len()], meta.iter().map(|&v| v as f32));
    for (name, t) in named {
        put_record(&mut buf, &name, &t.shape(), t.data().iter().map(|&v| v as f32));
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, params)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn record(&mut self) -> Result<(String, Vec<usize>, Vec<f64>)> {
        let len = self.u32()?;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("record name is not UTF-8".into()))?;
        let rank = self.u32()?;
        let dims = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("record {name} is too large")))?;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("record too large".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        Ok((name, dims, data))
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(Error::Format("not a model checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = cur.u32()?;
    let (name, dims, meta) = cur.record()?;
    if name != META_NAME || dims != [7] {
        return Err(Error::Format(format!("first record must be {META_NAME}")));
    }
    let mut arr = [0usize; 7];
    for (a, &v) in arr.iter_mut().zip(&meta) {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Format("bad model dimension".into()));
        }
        *a = v as usize;
    }
    let config = ModelConfig::from_array(arr);
    let mut params = ModelParams::init(config, 0)?;
    let expected: Vec<(String, [usize; 2])> = params.named().into_iter().map(|(n, t)| (n, t.shape())).collect();
    if count != expected.len() + 1 {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            count.saturating_sub(1)
        )));
    }
    for ((want_name, want_shape), slot) in expected.into_iter().zip(params.tensors_mut()) {
        let (name, dims, data) = cur.record()?;
        if name != want_name || dims != want_shape {
            return Err(Error::Checkpoint(format!(
                "record {name} {dims:?} where {want_name} {want_shape:?} was expected"
            )));
        }
        *slot = Tensor::from_vec(dims[0], dims[1], data)?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(params)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 7,
            hidden: 5,
            heads: 2,
            attn_dim: 3,
            value_dim: 2,
            edge_dim: 4,
            layers: 2,
        }
    }

    fn bytes(p: &ModelParams) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(&mut out, p).unwrap();
        out
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let p = ModelParams::init(cfg(), 3).unwrap();
        let first = bytes(&p);
        let loaded = read_checkpoint(&first[..]).unwrap();
        assert_eq!(loaded.config, p.config);
        assert_eq!(bytes(&loaded), first);
        // f32-representable parameters survive exactly
        assert_eq!(read_checkpoint(&first[..]).unwrap(), loaded);
        for ((_, a), (_, b)) in p.named().iter().zip(loaded.named()) {
            assert!(a.max_abs_diff(b) < 1e-7);
        }
    }

    #[test]
    fn header_layout() {
        let b = bytes(&ModelParams::init(cfg(), 0).unwrap());
        assert_eq!(&b[..8], b"GLSPMODL");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), MODEL_VERSION);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 11);
        assert_eq!(&b[20..31], b"meta.config");
    }

    #[test]
    fn rejects_corruption() {
        let b = bytes(&ModelParams::init(cfg(), 0).unwrap());
        assert!(matches!(read_checkpoint(&b[..b.len() - 1]), Err(Error::Format(_))));
        let mut extra = b.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
        let mut ver = b;
        ver[8] = 9;
        assert!(read_checkpoint(&ver[..]).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = ModelParams::init(cfg(), 0).unwrap();
        let mut b = bytes(&p);
        // shrink the declared input width in the meta record
        let meta_data = 20 + 11 + 8;
        b[meta_data..meta_data + 4].copy_from_slice(&6f32.to_le_bytes());
        assert!(matches!(read_checkpoint(&b[..]), Err(Error::Checkpoint(_))));
    }
}
