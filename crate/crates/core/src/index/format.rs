//! Binary index container. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"KWSIDX\0\0"
//! 8       4     format version (u32)
//! 12      4     CRC-32 of every byte from offset 16 to end of file
//! 16      4     method code (u32: 0 onebest, 1 sum, 2 max, 3 nb, 4 exact)
//! 20      8     prune epsilon (f64)
//! 28      8     gamma (f64)
//! 36      8     peak threshold (f64)
//! 44      4     region count R (u32)
//! 48      4     word count W (u32)
//! 52      8     posting count P (u64)
//! 60            string table:
//!                 R × (u32 byte length, UTF-8 region id), ascending
//!                 W × (u32 byte length, UTF-8 word, u32 posting count), ascending
//!               posting lists, concatenated in word order, P records of 20 bytes:
//!                 region ordinal u32, score f64, span begin u32, span end u32
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{IndexConfig, Posting, SpotIndex};
use crate::error::{Error, Result};
use crate::lattice::{NormalizationConfig, Span};
use crate::relevance::Method;

pub const MAGIC: &[u8; 8] = b"KWSIDX\0\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 60;
const CHECKSUM_START: usize = 16;

impl SpotIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let total: usize = self.entries.values().map(Vec::len).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + 20 * total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.config.method.code().to_le_bytes());
        out.extend_from_slice(&self.config.prune_epsilon.to_le_bytes());
        out.extend_from_slice(&self.config.normalization.gamma.to_le_bytes());
        out.extend_from_slice(&self.config.peak_threshold.to_le_bytes());
        out.extend_from_slice(&(self.regions.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(total as u64).to_le_bytes());
        for region in &self.regions {
            out.extend_from_slice(&(region.len() as u32).to_le_bytes());
            out.extend_from_slice(region.as_bytes());
        }
        for (word, list) in &self.entries {
            out.extend_from_slice(&(word.len() as u32).to_le_bytes());
            out.extend_from_slice(word.as_bytes());
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
        }
        for p in self.entries.values().flatten() {
            out.extend_from_slice(&p.region.to_le_bytes());
            out.extend_from_slice(&p.score.to_le_bytes());
            out.extend_from_slice(&p.span.begin.to_le_bytes());
            out.extend_from_slice(&p.span.end.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[CHECKSUM_START..]);
        out[12..16].copy_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::Corrupt(if bytes.len() < 8 {
                "truncated header".into()
            } else {
                "bad magic".into()
            }));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Corrupt("truncated header".into()));
        }
        let stored = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        if crc32fast::hash(&bytes[CHECKSUM_START..]) != stored {
            return Err(Error::Corrupt("checksum mismatch".into()));
        }

        let mut r = Reader {
            bytes,
            pos: CHECKSUM_START,
        };
        let method = Method::from_code(r.u32()?)
            .ok_or_else(|| Error::Corrupt("unknown method code".into()))?;
        let prune_epsilon = r.f64()?;
        let gamma = r.f64()?;
        let peak_threshold = r.f64()?;
        let region_count = r.u32()? as usize;
        let word_count = r.u32()? as usize;
        let posting_count = r.u64()?;

        let config = IndexConfig {
            method,
            normalization: NormalizationConfig { gamma },
            peak_threshold,
            prune_epsilon,
        };
        config
            .validate()
            .map_err(|e| Error::Corrupt(format!("header: {e}")))?;

        let mut regions = Vec::with_capacity(region_count.min(bytes.len() / 4));
        for _ in 0..region_count {
            regions.push(r.string()?);
        }
        if regions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Corrupt("region table not strictly ascending".into()));
        }
        let mut words = Vec::with_capacity(word_count.min(bytes.len() / 8));
        for _ in 0..word_count {
            let word = r.string()?;
            let n = r.u32()? as usize;
            words.push((word, n));
        }
        if words.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Corrupt("word table not strictly ascending".into()));
        }
        if words.iter().map(|(_, n)| *n as u64).sum::<u64>() != posting_count {
            return Err(Error::Corrupt("posting count mismatch".into()));
        }

        let mut entries = BTreeMap::new();
        for (word, n) in words {
            let mut list = Vec::with_capacity(n.min(bytes.len() / 20));
            for _ in 0..n {
                let region = r.u32()?;
                let score = r.f64()?;
                let span = Span::new(r.u32()?, r.u32()?);
                if region as usize >= region_count {
                    return Err(Error::Corrupt(format!(
                        "posting for {word:?} names region {region}"
                    )));
                }
                if !(score.is_finite() && score >= prune_epsilon && score > 0.0) {
                    return Err(Error::Corrupt(format!(
                        "posting for {word:?} has score {score}"
                    )));
                }
                list.push(Posting {
                    region,
                    score,
                    span,
                });
            }
            let ordered = list.windows(2).all(|w| {
                w[0].score > w[1].score || (w[0].score == w[1].score && w[0].region < w[1].region)
            });
            if !ordered {
                return Err(Error::Corrupt(format!(
                    "postings for {word:?} out of order"
                )));
            }
            entries.insert(word, list);
        }
        if r.pos != bytes.len() {
            return Err(Error::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            config,
            regions,
            entries,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
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

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Corrupt("invalid UTF-8 string".into()))
    }
}

pub fn save_index(ix: &SpotIndex, path: &Path) -> Result<()> {
    std::fs::write(path, ix.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path) -> Result<SpotIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    SpotIndex::from_bytes(&bytes)
}
