//! Versioned little-endian binary files for bases, correlation tables and
//! trajectories.
//!
//! Every file starts with the same 36-byte header:
//!
//! ```text
//! magic       [u8; 8]
//! version     u32
//! mode_count  u64
//! node_count  u64
//! param       u64     kind-specific fingerprint (product order, k, ...)
//! ```
//!
//! A header that does not match the requested parameters is an error; the
//! caller decides whether to rebuild.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::basis::{EigenMode, SpectralBasis};
use crate::error::{CacheError, Result};
use crate::quadrature::QuadratureRule;

pub const FORMAT_VERSION: u32 = 1;
pub const BASIS_MAGIC: &[u8; 8] = b"DNLSBAS\0";
pub const CORRELATION_MAGIC: &[u8; 8] = b"DNLSCOR\0";
pub const TRAJECTORY_MAGIC: &[u8; 8] = b"DNLSTRJ\0";

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "DISC_NLS_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheHeader {
    pub magic: [u8; 8],
    pub version: u32,
    pub mode_count: u64,
    pub node_count: u64,
    pub param: u64,
}

impl CacheHeader {
    pub fn new(magic: &[u8; 8], mode_count: u64, node_count: u64, param: u64) -> Self {
        Self {
            magic: *magic,
            version: FORMAT_VERSION,
            mode_count,
            node_count,
            param,
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.magic)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.mode_count.to_le_bytes())?;
        w.write_all(&self.node_count.to_le_bytes())?;
        w.write_all(&self.param.to_le_bytes())
    }

    /// Read a header and check magic and version.
    pub fn read_from(r: &mut Reader<'_>, magic: &[u8; 8]) -> Result<Self> {
        let found: [u8; 8] = r.bytes(8)?.try_into().unwrap();
        if &found != magic {
            return Err(CacheError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(&found).into_owned(),
            }
            .into());
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CacheError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            }
            .into());
        }
        Ok(Self {
            magic: found,
            version,
            mode_count: r.u64()?,
            node_count: r.u64()?,
            param: r.u64()?,
        })
    }
}

/// Compare one header field against the requested value.
pub fn check_param(field: &'static str, found: u64, expected: u64) -> Result<()> {
    if found != expected {
        return Err(CacheError::FingerprintMismatch {
            field,
            found,
            expected,
        }
        .into());
    }
    Ok(())
}

/// Cursor over an in-memory cache file with truncation checks.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CacheError::Corrupt(format!(
                "needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.data.len()
            ))
            .into());
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(CacheError::Corrupt(format!(
                "{} trailing bytes",
                self.data.len() - self.pos
            ))
            .into());
        }
        Ok(())
    }
}

pub(crate) fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Write atomically: temp file in the same directory, then rename.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn basis_cache_path(dir: &Path, mode_count: usize, product_order: usize) -> PathBuf {
    dir.join(format!("basis-m{mode_count}-p{product_order}.bin"))
}

pub fn encode_basis(basis: &SpectralBasis) -> Vec<u8> {
    let mut out = Vec::new();
    CacheHeader::new(
        BASIS_MAGIC,
        basis.mode_count() as u64,
        basis.node_count() as u64,
        basis.product_order as u64,
    )
    .write_to(&mut out)
    .unwrap();
    let lambdas = basis.lambdas();
    let norms: Vec<f64> = basis.modes.iter().map(|m| m.j0_l2_norm).collect();
    put_f64s(&mut out, &lambdas).unwrap();
    put_f64s(&mut out, &norms).unwrap();
    put_f64s(&mut out, &basis.quad.nodes).unwrap();
    put_f64s(&mut out, &basis.quad.weights).unwrap();
    put_f64s(&mut out, basis.values.as_slice().unwrap()).unwrap();
    out
}

/// Decode a basis file, checking it was built for the requested shape.
pub fn decode_basis(bytes: &[u8], mode_count: usize, product_order: usize) -> Result<SpectralBasis> {
    let mut r = Reader::new(bytes);
    let h = CacheHeader::read_from(&mut r, BASIS_MAGIC)?;
    check_param("mode_count", h.mode_count, mode_count as u64)?;
    check_param("product_order", h.param, product_order as u64)?;
    let expected_nodes = crate::basis::node_count_for(mode_count, product_order) as u64;
    check_param("node_count", h.node_count, expected_nodes)?;
    let (m, n) = (h.mode_count as usize, h.node_count as usize);
    let lambdas = r.f64_vec(m)?;
    let norms = r.f64_vec(m)?;
    let nodes = r.f64_vec(n)?;
    let weights = r.f64_vec(n)?;
    let values = r.f64_vec(m * n)?;
    r.finish()?;
    let modes = lambdas
        .into_iter()
        .zip(norms)
        .enumerate()
        .map(|(i, (lambda, j0_l2_norm))| EigenMode {
            index: i + 1,
            lambda,
            j0_l2_norm,
        })
        .collect();
    let values = ndarray::Array2::from_shape_vec((m, n), values)
        .map_err(|e| crate::error::CacheError::Corrupt(e.to_string()))?;
    Ok(SpectralBasis {
        modes,
        quad: QuadratureRule { nodes, weights },
        product_order,
        values,
    })
}

/// Load a cached basis, building and writing it when the file is absent.
///
/// A present but invalid file is an error unless `rebuild` is set, in which
/// case it is replaced.
pub fn load_or_build_basis(
    dir: &Path,
    mode_count: usize,
    product_order: usize,
    rebuild: bool,
) -> Result<SpectralBasis> {
    let path = basis_cache_path(dir, mode_count, product_order);
    if path.exists() && !rebuild {
        let bytes = read_file(&path)?;
        return decode_basis(&bytes, mode_count, product_order);
    }
    let basis = SpectralBasis::build(mode_count, product_order)?;
    write_file(&path, &encode_basis(&basis))?;
    Ok(basis)
}

/// 64-bit FNV-1a fingerprint of a cache file's bytes (for report echoes).
pub fn fingerprint(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn basis_round_trip_is_exact() {
        let b = SpectralBasis::build(6, 4).unwrap();
        let back = decode_basis(&encode_basis(&b), 6, 4).unwrap();
        assert_eq!(back.lambdas(), b.lambdas());
        assert_eq!(back.values, b.values);
        assert_eq!(back.quad, b.quad);
    }

    #[test]
    fn header_mismatches_are_named() {
        let b = SpectralBasis::build(6, 4).unwrap();
        let bytes = encode_basis(&b);
        assert!(matches!(
            decode_basis(&bytes, 7, 4),
            Err(Error::Cache(CacheError::FingerprintMismatch { field: "mode_count", .. }))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_basis(&bad, 6, 4),
            Err(Error::Cache(CacheError::BadMagic { .. }))
        ));
        let mut old = bytes.clone();
        old[8..12].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            decode_basis(&old, 6, 4),
            Err(Error::Cache(CacheError::VersionMismatch { found: 99, .. }))
        ));
        assert!(matches!(
            decode_basis(&bytes[..bytes.len() - 3], 6, 4),
            Err(Error::Cache(CacheError::Corrupt(_)))
        ));
    }

    #[test]
    fn corrupt_file_refused_then_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let b = load_or_build_basis(dir.path(), 5, 4, false).unwrap();
        let path = basis_cache_path(dir.path(), 5, 4);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[2] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_or_build_basis(dir.path(), 5, 4, false).is_err());
        let again = load_or_build_basis(dir.path(), 5, 4, true).unwrap();
        assert_eq!(again.lambdas(), b.lambdas());
        assert!(load_or_build_basis(dir.path(), 5, 4, false).is_ok());
    }
}
