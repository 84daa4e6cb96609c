//! Flat binary tensor files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   "KRONPDE1"
//! ndim       u32
//! shape      ndim × u64
//! nparams    u32
//! params     nparams × f64
//! data       (∏ shape) × f64, row-major, last axis fastest
//! checksum   32 bytes  SHA-256 of everything above
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 8] = b"KRONPDE1";

/// A tensor together with the parameters it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub params: Vec<f64>,
    pub tensor: DenseTensor,
}

pub fn encode(file: &TensorFile) -> Vec<u8> {
    let shape = file.tensor.shape();
    let mut buf = Vec::with_capacity(64 + 8 * file.tensor.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &m in shape {
        buf.extend_from_slice(&(m as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(file.params.len() as u32).to_le_bytes());
    for p in &file.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for v in file.tensor.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn decode(bytes: &[u8]) -> Result<TensorFile> {
    if bytes.len() < MAGIC.len() + 4 + 4 + 32 {
        return Err(Error::Cache("file too short".into()));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    if &body[..8] != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let mut r = Reader { body, pos: 8 };
    let ndim = r.u32()? as usize;
    let shape = (0..ndim)
        .map(|_| r.u64().map(|m| m as usize))
        .collect::<Result<Vec<_>>>()?;
    let nparams = r.u32()? as usize;
    let params = (0..nparams).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let len: usize = shape.iter().product();
    if body.len() - r.pos != 8 * len {
        return Err(Error::Cache(format!(
            "payload holds {} bytes, shape {shape:?} needs {}",
            body.len() - r.pos,
            8 * len
        )));
    }
    let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let tensor = DenseTensor::new(shape, data).map_err(|e| Error::Cache(e.to_string()))?;
    Ok(TensorFile { params, tensor })
}

struct Reader<'a> {
    body: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .body
            .get(self.pos..end)
            .ok_or_else(|| Error::Cache("truncated header".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn write_tensor_file(path: &Path, file: &TensorFile) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(file))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<TensorFile> {
    decode(&fs::read(path)?)
}

/// Directory for cached reference solutions: `$KRONPDE_CACHE_DIR`, or a
/// subdirectory of the system temp dir.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("KRONPDE_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kronpde-cache"))
}

/// Loads `path` if it holds a tensor computed for `params`, otherwise
/// computes it and writes the file.
pub fn cached(
    path: &Path,
    params: &[f64],
    compute: impl FnOnce() -> Result<DenseTensor>,
) -> Result<DenseTensor> {
    match read_tensor_file(path) {
        Ok(file) if file.params == params => return Ok(file.tensor),
        Ok(_) => log::info!("{} was computed for other parameters", path.display()),
        Err(Error::Io(_)) => {}
        Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
    }
    let tensor = compute()?;
    let file = TensorFile {
        params: params.to_vec(),
        tensor,
    };
    if let Err(e) = write_tensor_file(path, &file) {
        log::warn!("could not write cache {}: {e}", path.display());
    }
    Ok(file.tensor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        TensorFile {
            params: vec![0.1, 513.0],
            tensor: DenseTensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-300, 7.0]).unwrap(),
        }
    }

    #[test]
    fn round_trip() {
        let f = sample();
        assert_eq!(decode(&encode(&f)).unwrap(), f);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = encode(&sample());
        bytes[20] ^= 1;
        assert!(matches!(decode(&bytes), Err(Error::Cache(_))));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Cache(_))));
    }

    #[test]
    fn cached_recomputes_on_param_change() {
        let dir = std::env::temp_dir().join(format!("kronpde-cache-test-{}", std::process::id()));
        let path = dir.join("t.bin");
        let a = cached(&path, &[1.0], || Ok(DenseTensor::filled(&[2], 1.0))).unwrap();
        let b = cached(&path, &[1.0], || panic!("should load from disk")).unwrap();
        assert_eq!(a, b);
        let c = cached(&path, &[2.0], || Ok(DenseTensor::filled(&[2], 2.0))).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 2.0]);
        let _ = fs::remove_dir_all(dir);
    }
}
