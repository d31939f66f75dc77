//! Binary matrix container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "CHPRCKPT"
//! version  u32
//! count    u32
//! shapes   count × (rows u32, cols u32)
//! data     every matrix's entries as f64, row-major, in declaration order
//! ```

use std::fs;
use std::path::Path;

use super::matrix::Matrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CHPRCKPT";
pub const VERSION: u32 = 1;

pub fn encode(mats: &[&Matrix]) -> Vec<u8> {
    let values: usize = mats.iter().map(|m| m.data().len()).sum();
    let mut out = Vec::with_capacity(16 + 8 * mats.len() + 8 * values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(mats.len() as u32).to_le_bytes());
    for m in mats {
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    }
    for m in mats {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Matrix>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        shapes.push((r.u32()? as usize, r.u32()? as usize));
    }
    let mut mats = Vec::with_capacity(shapes.len());
    for (rows, cols) in shapes {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?;
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        mats.push(Matrix::from_vec(rows, cols, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(mats)
}

pub fn save(path: &Path, mats: &[&Matrix]) -> Result<()> {
    fs::write(path, encode(mats)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<Matrix>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn header_layout() {
        let m = Matrix::from_rows(&[[1.0, 2.0]]);
        let bytes = encode(&[&m]);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 40);
    }

    #[test]
    fn rejects_corruption() {
        let m = Matrix::from_rows(&[[1.0, 2.0]]);
        let bytes = encode(&[&m]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut ver = bytes;
        ver[8] = 9;
        assert!(matches!(decode(&ver), Err(Error::Checkpoint(_))));
    }

    proptest! {
        #[test]
        fn round_trip(shapes in proptest::collection::vec((0usize..5, 0usize..5), 0..4), seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mats: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::random_uniform(r, c, 1e3, &mut rng)).collect();
            let refs: Vec<&Matrix> = mats.iter().collect();
            let back = decode(&encode(&refs)).unwrap();
            prop_assert_eq!(back, mats);
        }
    }
}
