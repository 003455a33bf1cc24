//! On-disk profile cache. Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "BFMIPROF"
//! version  u32
//! name     u16 length + UTF-8 bytes
//! decoder  u8       0 = CM, 1 = BICM
//! M        u32
//! grid     f64 db_min, f64 db_max, f64 db_step
//! order    u32      Gauss-Hermite nodes per real dimension
//! n        u64
//! rows     n x (f64 rho, f64 mi, f64 mmse), raw quadrature output
//! digest   32 bytes SHA-256 of everything above
//! ```

use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::profile::{GridSpec, MiProfile, RawTable};
use super::Decoder;
use crate::constellation::Constellation;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"BFMIPROF";
pub const CACHE_VERSION: u32 = 1;

fn encode(p: &MiProfile) -> Vec<u8> {
    let raw = p.raw();
    let g = p.grid();
    let name = p.constellation().as_bytes();
    let mut b = Vec::with_capacity(96 + 24 * raw.rho.len());
    b.extend_from_slice(CACHE_MAGIC);
    b.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    b.extend_from_slice(&(name.len() as u16).to_le_bytes());
    b.extend_from_slice(name);
    b.push(match p.decoder() {
        Decoder::Cm => 0,
        Decoder::Bicm => 1,
    });
    b.extend_from_slice(&p.bits_per_symbol().to_le_bytes());
    for v in [g.db_min, g.db_max, g.db_step] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&(g.quad_order as u32).to_le_bytes());
    b.extend_from_slice(&(raw.rho.len() as u64).to_le_bytes());
    for i in 0..raw.rho.len() {
        for v in [raw.rho[i], raw.mi[i], raw.mmse[i]] {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&b);
    b.extend_from_slice(&digest);
    b
}

/// Writes through a temporary file and renames, so readers never see a partial file.
pub fn write_cache(path: &Path, p: &MiProfile) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(p))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptCache("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a cached table and checks that it matches the requested key.
pub fn read_cache(path: &Path, c: &Constellation, decoder: Decoder, grid: GridSpec) -> Result<MiProfile> {
    let buf = fs::read(path)?;
    if buf.len() < 32 {
        return Err(Error::CorruptCache("truncated".into()));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::CorruptCache("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != CACHE_MAGIC {
        return Err(Error::CorruptCache("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::CorruptCache(format!("version {version}")));
    }
    let len = r.u16()? as usize;
    let name = std::str::from_utf8(r.take(len)?)
        .map_err(|_| Error::CorruptCache("name is not UTF-8".into()))?
        .to_string();
    let dec = match r.u8()? {
        0 => Decoder::Cm,
        1 => Decoder::Bicm,
        d => return Err(Error::CorruptCache(format!("decoder tag {d}"))),
    };
    let bits = r.u32()?;
    let g = GridSpec {
        db_min: r.f64()?,
        db_max: r.f64()?,
        db_step: r.f64()?,
        quad_order: r.u32()? as usize,
    };
    if name != c.name() || dec != decoder || bits != c.bits_per_symbol() || g != grid {
        return Err(Error::CorruptCache(
            "header does not match the requested profile".into(),
        ));
    }
    let n = r.u64()? as usize;
    if n != grid.db_points() + 1 || body.len() - r.pos != 24 * n {
        return Err(Error::CorruptCache("row count mismatch".into()));
    }
    let mut raw = RawTable {
        rho: Vec::with_capacity(n),
        mi: Vec::with_capacity(n),
        mmse: Vec::with_capacity(n),
    };
    for _ in 0..n {
        raw.rho.push(r.f64()?);
        raw.mi.push(r.f64()?);
        raw.mmse.push(r.f64()?);
    }
    MiProfile::from_raw(&name, bits, decoder, grid, raw).map_err(|e| Error::CorruptCache(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec {
            db_min: -10.0,
            db_max: 20.0,
            db_step: 0.5,
            quad_order: 16,
        }
    }

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qpsk.bfprof");
        let c = Constellation::psk(2).unwrap();
        let p = MiProfile::build(&c, Decoder::Cm, small_grid()).unwrap();
        write_cache(&path, &p).unwrap();
        let q = read_cache(&path, &c, Decoder::Cm, small_grid()).unwrap();
        assert_eq!(p.raw(), q.raw());
        assert_eq!(p.mi_table(), q.mi_table());

        // wrong key
        assert!(read_cache(&path, &c, Decoder::Bicm, small_grid()).is_err());

        // flipped byte
        let mut bytes = fs::read(&path).unwrap();
        bytes[100] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_cache(&path, &c, Decoder::Cm, small_grid()),
            Err(Error::CorruptCache(_))
        ));

        // truncated
        fs::write(&path, &bytes[..40]).unwrap();
        assert!(read_cache(&path, &c, Decoder::Cm, small_grid()).is_err());
    }

    #[test]
    fn store_rebuilds_over_corrupt_file() {
        use super::super::ProfileStore;
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::with_grid(Some(dir.path().to_path_buf()), small_grid());
        let path = store.cache_file("qpsk", Decoder::Cm).unwrap();
        fs::write(&path, b"garbage").unwrap();
        let p = store.get("qpsk", Decoder::Cm).unwrap();
        assert_eq!(p.mi_table()[0], 0.0);
        // the rebuilt table replaced the garbage
        let c = Constellation::psk(2).unwrap();
        assert!(read_cache(&path, &c, Decoder::Cm, small_grid()).is_ok());
    }
}
