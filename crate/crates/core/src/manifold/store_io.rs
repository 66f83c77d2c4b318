//! Binary store file.
//!
//! ```text
//! "FMST" | version u32 | embedder digest [32] | default K u32
//! layout: canvas w u32, h u32, 4 x (x0, y0, x1, y1) u32
//! 5 x block:
//!   component u8 | count u64 | d u32 | count*d f64 | count ids u64
//!   count tags (u32 byte length, u32::MAX = none, then UTF-8)
//!   exemplar flag u8 [| w u32 | h u32 | count*w*h u8]
//! CRC32 of all preceding bytes, u32
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{CropBank, FeatureSet, ManifoldStore};
use crate::error::{Error, Result};
use crate::sketch::{ComponentKind, ComponentLayout, Window};

const MAGIC: &[u8; 4] = b"FMST";
pub const STORE_VERSION: u32 = 1;
const NO_TAG: u32 = u32::MAX;

impl ManifoldStore {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, STORE_VERSION);
        out.extend_from_slice(&self.embedder_digest);
        put_u32(&mut out, self.default_k as u32);
        put_u32(&mut out, self.layout.canvas_width() as u32);
        put_u32(&mut out, self.layout.canvas_height() as u32);
        for kind in ComponentKind::FACIAL {
            let w = self.layout.window(kind);
            for v in [w.x0, w.y0, w.x1, w.y1] {
                put_u32(&mut out, v as u32);
            }
        }
        for set in &self.sets {
            out.push(set.component.index() as u8);
            out.extend_from_slice(&(set.len() as u64).to_le_bytes());
            put_u32(&mut out, set.dim as u32);
            for v in &set.vectors {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for id in &set.sample_ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
            for tag in &set.tags {
                match tag {
                    Some(t) => {
                        put_u32(&mut out, t.len() as u32);
                        out.extend_from_slice(t.as_bytes());
                    }
                    None => put_u32(&mut out, NO_TAG),
                }
            }
            match &set.exemplars {
                Some(bank) => {
                    out.push(1);
                    put_u32(&mut out, bank.width as u32);
                    put_u32(&mut out, bank.height as u32);
                    out.extend_from_slice(&bank.levels);
                }
                None => out.push(0),
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    /// Parses a store file. Nothing is returned unless the whole file is
    /// well formed and its checksum matches.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("not an FMST store file".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::Corrupt("checksum mismatch (truncated or damaged file)".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: STORE_VERSION,
            });
        }
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let default_k = r.u32()? as usize;
        let (cw, ch) = (r.u32()? as usize, r.u32()? as usize);
        let mut windows = [Window::new(0, 0, 0, 0); 4];
        for w in &mut windows {
            *w = Window::new(
                r.u32()? as usize,
                r.u32()? as usize,
                r.u32()? as usize,
                r.u32()? as usize,
            );
        }
        let layout = ComponentLayout::new(cw, ch, windows).map_err(|e| Error::Corrupt(e.to_string()))?;

        let mut sets = Vec::with_capacity(5);
        for _ in 0..5 {
            let tag = r.take(1)?[0];
            let kind = ComponentKind::from_index(tag as usize)
                .ok_or_else(|| Error::Corrupt(format!("bad component tag {tag}")))?;
            let count = usize::try_from(r.u64()?).map_err(|_| Error::Corrupt("count overflow".into()))?;
            let dim = r.u32()? as usize;
            let nfloat = count
                .checked_mul(dim)
                .ok_or_else(|| Error::Corrupt("block size overflow".into()))?;
            let vectors = r
                .take(nfloat.checked_mul(8).ok_or_else(|| Error::Corrupt("block size overflow".into()))?)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let sample_ids = r
                .take(count.checked_mul(8).ok_or_else(|| Error::Corrupt("id block overflow".into()))?)?
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let mut tags = Vec::with_capacity(count.min(r.remaining()));
            for _ in 0..count {
                let len = r.u32()?;
                if len == NO_TAG {
                    tags.push(None);
                } else {
                    let s = std::str::from_utf8(r.take(len as usize)?)
                        .map_err(|_| Error::Corrupt("tag is not UTF-8".into()))?;
                    tags.push(Some(s.to_string()));
                }
            }
            let exemplars = match r.take(1)?[0] {
                0 => None,
                1 => {
                    let (w, h) = (r.u32()? as usize, r.u32()? as usize);
                    let n = w
                        .checked_mul(h)
                        .and_then(|p| p.checked_mul(count))
                        .ok_or_else(|| Error::Corrupt("exemplar block overflow".into()))?;
                    Some(CropBank::new(w, h, r.take(n)?.to_vec()).map_err(|e| Error::Corrupt(e.to_string()))?)
                }
                f => return Err(Error::Corrupt(format!("bad exemplar flag {f}"))),
            };
            sets.push(
                FeatureSet::new(kind, dim, vectors, sample_ids, tags, exemplars)
                    .map_err(|e| Error::Corrupt(format!("{kind} block: {e}")))?,
            );
        }
        if r.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing bytes", r.remaining())));
        }
        ManifoldStore::from_parts(layout, digest, default_k, sets).map_err(|e| Error::Corrupt(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Corrupt("unexpected end of store data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
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

    fn store() -> ManifoldStore {
        let sets = ComponentKind::ALL
            .into_iter()
            .map(|kind| {
                let (w, h) = ComponentLayout::default().crop_dims(kind);
                let bank = CropBank::new(w, h, (0..3 * w * h).map(|i| (i % 251) as u8).collect()).unwrap();
                FeatureSet::new(
                    kind,
                    2,
                    vec![0.1, -2.5, 3.0, f64::MIN_POSITIVE, 1e300, -0.0],
                    vec![7, 3, 99],
                    vec![Some("A".into()), None, Some("ß".into())],
                    Some(bank),
                )
                .unwrap()
            })
            .collect();
        ManifoldStore::from_parts(ComponentLayout::default(), [7; 32], 2, sets).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let bytes = s.to_bytes();
        let back = ManifoldStore::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back, s);
        assert!(back.set(ComponentKind::Mouth).row(2)[1].is_sign_negative());
    }

    #[test]
    fn truncation_and_damage_are_detected() {
        let bytes = store().to_bytes();
        for cut in [1, 5, 100, bytes.len() - 13] {
            assert!(matches!(
                ManifoldStore::from_bytes(&bytes[..bytes.len() - cut]),
                Err(Error::Corrupt(_))
            ));
        }
        let mut flipped = bytes.clone();
        flipped[60] ^= 0x10;
        assert!(matches!(ManifoldStore::from_bytes(&flipped), Err(Error::Corrupt(_))));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = store().to_bytes();
        bytes[4] = 9;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            ManifoldStore::from_bytes(&bytes),
            Err(Error::Version { found: 9, .. })
        ));
    }
}
