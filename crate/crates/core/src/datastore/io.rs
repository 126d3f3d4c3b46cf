//! Binary persistence for [`Datastore`] and [`IvfIndex`].
//!
//! Datastore layout (all integers and floats little-endian):
//!   magic `KNND` | u32 version=1 | u32 dim | u32 vocab_size | u64 count |
//!   count×dim f32 keys | count u32 values
//!
//! Index layout:
//!   magic `KNNI` | u32 version=1 | u32 dim | u32 n_clusters | u64 count |
//!   n_clusters×dim f32 centroids | count u32 assignments
//!
//! Round-trips are bit-exact. Decode errors carry the byte offset at which
//! reading failed.

use super::{Datastore, IvfIndex};
use crate::error::{Error, Result};

const DATASTORE_MAGIC: &[u8; 4] = b"KNND";
const INDEX_MAGIC: &[u8; 4] = b"KNNI";
const VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn byte_len(&self, n: usize, what: &str) -> Result<usize> {
        n.checked_mul(4)
            .ok_or_else(|| Error::format(self.pos as u64, format!("{what} length overflows")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let b = self.take(self.byte_len(n, what)?, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u32s(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        let b = self.take(self.byte_len(n, what)?, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let at = self.pos as u64;
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::format(
                at,
                format!(
                    "bad magic: expected {:?}, got {:?}",
                    String::from_utf8_lossy(magic),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    fn expect_version(&mut self) -> Result<()> {
        let at = self.pos as u64;
        let v = self.u32("version")?;
        if v != VERSION {
            return Err(Error::format(
                at,
                format!("unsupported version {v}, expected {VERSION}"),
            ));
        }
        Ok(())
    }

    fn expect_eof(&mut self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

impl Datastore {
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.keys.len() * 4 + self.values.len() * 4);
        out.extend_from_slice(DATASTORE_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.vocab_size.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for k in &self.keys {
            out.extend_from_slice(&k.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(DATASTORE_MAGIC)?;
        r.expect_version()?;
        let dim_at = r.pos as u64;
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::format(dim_at, "dim must be >= 1"));
        }
        let vocab_at = r.pos as u64;
        let vocab_size = r.u32("vocab_size")?;
        if vocab_size == 0 {
            return Err(Error::format(vocab_at, "vocab_size must be >= 1"));
        }
        let count_at = r.pos as u64;
        let count = r.u64("count")? as usize;
        let key_components = count
            .checked_mul(dim)
            .ok_or_else(|| Error::format(count_at, "count overflows"))?;
        let keys = r.f32s(key_components, "keys")?;
        let values_at = r.pos as u64;
        let values = r.u32s(count, "values")?;
        r.expect_eof()?;
        if let Some(bad) = values.iter().position(|&v| v >= vocab_size) {
            return Err(Error::format(
                values_at + bad as u64 * 4,
                format!(
                    "value {} out of range for vocab_size {vocab_size}",
                    values[bad]
                ),
            ));
        }
        Ok(Datastore {
            dim,
            vocab_size,
            keys,
            values,
        })
    }
}

impl IvfIndex {
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_clusters() as u32).to_le_bytes());
        out.extend_from_slice(&(self.assignments().len() as u64).to_le_bytes());
        for c in 0..self.n_clusters() {
            for x in self.centroid(c) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for a in self.assignments() {
            out.extend_from_slice(&a.to_le_bytes());
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(INDEX_MAGIC)?;
        r.expect_version()?;
        let dim_at = r.pos as u64;
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::format(dim_at, "dim must be >= 1"));
        }
        let nc_at = r.pos as u64;
        let n_clusters = r.u32("n_clusters")? as usize;
        if n_clusters == 0 {
            return Err(Error::format(nc_at, "n_clusters must be >= 1"));
        }
        let centroid_components = n_clusters
            .checked_mul(dim)
            .ok_or_else(|| Error::format(nc_at, "n_clusters overflows"))?;
        let count = r.u64("count")? as usize;
        let centroids = r.f32s(centroid_components, "centroids")?;
        let assign_at = r.pos as u64;
        let assignments = r.u32s(count, "assignments")?;
        r.expect_eof()?;
        IvfIndex::from_parts(dim, n_clusters, centroids, assignments).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::format(assign_at, msg),
            other => other,
        })
    }
}
