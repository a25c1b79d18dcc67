//! Little-endian plane container shared by rasters and heatmaps:
//! 8-byte magic, `u32` channels/height/width, then `C*H*W` `f32` values in
//! row-major order.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const RASTER_MAGIC: &[u8; 8] = b"GLSPRAST";
pub const HEATMAP_MAGIC: &[u8; 8] = b"GLSPHEAT";

pub(crate) fn write_planes<W: Write>(
    mut w: W,
    magic: &[u8; 8],
    dims: (usize, usize, usize),
    data: &[f32],
) -> Result<()> {
    let (c, h, wd) = dims;
    debug_assert_eq!(data.len(), c * h * wd);
    let mut buf = Vec::with_capacity(20 + data.len() * 4);
    buf.extend_from_slice(magic);
    for d in [c, h, wd] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_planes<R: Read>(
    mut r: R,
    magic: &[u8; 8],
) -> Result<((usize, usize, usize), Vec<f32>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[..8] != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let n = c
        .checked_mul(h)
        .and_then(|x| x.checked_mul(w))
        .ok_or_else(|| Error::Format("plane dimensions overflow".into()))?;
    if bytes.len() != 20 + 4 * n {
        return Err(Error::Format(format!(
            "expected {} data bytes for {c}x{h}x{w}, found {}",
            4 * n,
            bytes.len() - 20
        )));
    }
    let data = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(((c, h, w), data))
}
