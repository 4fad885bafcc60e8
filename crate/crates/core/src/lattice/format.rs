//! `PERCCFG1` binary persistence. All integers little-endian:
//!
//! ```text
//! magic "PERCCFG1" | version u32 | d u8 | d × u64 sides | d × i64 origin
//! | f64 p | u64 seed | u64 edge_count | ceil(edge_count / 8) bytes of edge bits
//! ```
//!
//! Edge bits are packed eight per byte, least significant bit first, in
//! canonical edge order.

use sha2::{Digest, Sha256};

use super::{EdgeConfiguration, LatticeBox, MAX_DIM};
use crate::error::{Error, Result};

pub const CONFIG_MAGIC: &[u8; 8] = b"PERCCFG1";
pub const CONFIG_VERSION: u32 = 1;

impl EdgeConfiguration {
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = self.geometry();
        let edge_count = g.edge_count();
        let mut out = Vec::with_capacity(8 + 4 + 1 + 16 * g.dim() + 24 + edge_count.div_ceil(8));
        out.extend_from_slice(CONFIG_MAGIC);
        out.extend_from_slice(&CONFIG_VERSION.to_le_bytes());
        out.push(g.dim() as u8);
        for &s in g.sides() {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for &o in g.origin() {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.p().to_le_bytes());
        out.extend_from_slice(&self.seed().to_le_bytes());
        out.extend_from_slice(&(edge_count as u64).to_le_bytes());
        let mut byte = 0u8;
        for (i, bit) in self.canonical_bits().enumerate() {
            byte |= (bit as u8) << (i % 8);
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if !edge_count.is_multiple_of(8) {
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CONFIG_MAGIC {
            return Err(Error::Format { offset: 0, message: "bad magic".into() });
        }
        let at = r.pos;
        let version = r.u32()?;
        if version != CONFIG_VERSION {
            return Err(Error::Format { offset: at, message: format!("unsupported version {version}") });
        }
        let at = r.pos;
        let d = r.take(1)?[0] as usize;
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::Format { offset: at, message: format!("dimension {d} unsupported") });
        }
        let at = r.pos;
        let sides = (0..d).map(|_| r.u64().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let origin = (0..d).map(|_| r.u64().map(|o| o as i64)).collect::<Result<Vec<_>>>()?;
        let geometry =
            LatticeBox::new(sides, origin).map_err(|e| Error::Format { offset: at, message: e.to_string() })?;
        let at = r.pos;
        let p = f64::from_bits(r.u64()?);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Format { offset: at, message: format!("probability {p} outside [0, 1]") });
        }
        let seed = r.u64()?;
        let at = r.pos;
        let edge_count = r.u64()? as usize;
        if edge_count != geometry.edge_count() {
            return Err(Error::Format {
                offset: at,
                message: format!("edge count {edge_count} but the box has {}", geometry.edge_count()),
            });
        }
        let payload = r.take(edge_count.div_ceil(8))?;
        if r.pos != bytes.len() {
            return Err(Error::Format { offset: r.pos, message: "trailing bytes".into() });
        }
        let bits = (0..edge_count).map(|i| payload[i / 8] >> (i % 8) & 1 == 1);
        Ok(EdgeConfiguration::from_parts(geometry, p, seed, bits))
    }

    /// Lowercase hex SHA-256 of the serialized form.
    pub fn digest(&self) -> String {
        digest(&self.to_bytes())
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len(),
                message: format!("truncated: needed {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_all_open_payload() {
        let g = LatticeBox::new(vec![2, 2], vec![0, 0]).unwrap();
        let cfg = EdgeConfiguration::sample(g, 1.0, 3).unwrap();
        let bytes = cfg.to_bytes();
        let header = 8 + 4 + 1 + 2 * 8 + 2 * 8 + 8 + 8 + 8;
        assert_eq!(bytes.len(), header + 1);
        assert_eq!(bytes[header], 0x0F);
    }

    #[test]
    fn truncation_reports_offset() {
        let g = LatticeBox::new(vec![5, 4], vec![-2, 0]).unwrap();
        let bytes = EdgeConfiguration::sample(g, 0.5, 1).unwrap().to_bytes();
        for cut in [0, 7, 12, 30, bytes.len() - 1] {
            match EdgeConfiguration::from_bytes(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset <= cut),
                other => panic!("expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let g = LatticeBox::new(vec![3, 3], vec![0, 0]).unwrap();
        let mut bytes = EdgeConfiguration::sample(g, 0.5, 1).unwrap().to_bytes();
        bytes[8] = 2;
        assert!(matches!(EdgeConfiguration::from_bytes(&bytes), Err(Error::Format { offset: 8, .. })));
        bytes[0] = b'X';
        assert!(matches!(EdgeConfiguration::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn sampling_twice_gives_same_digest() {
        let g = LatticeBox::new(vec![8, 8], vec![0, 0]).unwrap();
        let a = EdgeConfiguration::sample(g.clone(), 0.7, 42).unwrap();
        let b = EdgeConfiguration::sample(g, 0.7, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }
}
