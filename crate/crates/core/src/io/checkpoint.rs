//! Binary checkpoint format. Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "SPINAL1\0"
//! config_hash  u64       fingerprint of the config the run used
//! phase        u32 + utf-8 bytes
//! episodes     u64       training episodes completed
//! count        u32       number of arrays
//! per array:
//!   name       u32 + utf-8 bytes
//!   trainable  u8        0 or 1
//!   rank       u8        1 or 2
//!   dims       rank × u32
//!   data       numel × f64
//! crc          u32       CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Arrays keep the parameter-store order, so a store → checkpoint →
//! store round trip is the identity and re-serializing yields the exact
//! same bytes.

use std::io::Write;
use std::path::Path;

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPINAL1\0";

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointArray {
    pub name: String,
    pub trainable: bool,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub phase: String,
    pub episodes: u64,
    pub arrays: Vec<CheckpointArray>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, phase: &str, episodes: u64, config_hash: u64) -> Self {
        let arrays = store
            .iter()
            .map(|(_, e)| CheckpointArray {
                name: e.name.clone(),
                trainable: e.trainable,
                tensor: e.tensor.clone(),
            })
            .collect();
        Checkpoint {
            config_hash,
            phase: phase.to_string(),
            episodes,
            arrays,
        }
    }

    pub fn to_store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for a in &self.arrays {
            store.add(a.name.clone(), a.tensor.clone(), a.trainable)?;
        }
        Ok(store)
    }

    pub fn array(&self, name: &str) -> Option<&CheckpointArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Checkpoint holding only the arrays under a name prefix; metadata
    /// carries over unchanged.
    pub fn section(&self, prefix: &str) -> Checkpoint {
        Checkpoint {
            config_hash: self.config_hash,
            phase: self.phase.clone(),
            episodes: self.episodes,
            arrays: self
                .arrays
                .iter()
                .filter(|a| a.name.starts_with(prefix))
                .cloned()
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        put_str(&mut out, &self.phase);
        out.extend_from_slice(&self.episodes.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            put_str(&mut out, &a.name);
            out.push(a.trainable as u8);
            let dims = a.tensor.shape().dims();
            out.push(dims.len() as u8);
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in a.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < MAGIC.len() + 4 {
            return Err(corrupt("file too short to be a checkpoint"));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32(payload);
        if stored != computed {
            return Err(corrupt(&format!(
                "checksum mismatch: stored {stored:08x}, computed {computed:08x}"
            )));
        }

        let mut r = Reader::new(payload);
        if r.take(MAGIC.len())? != MAGIC {
            return Err(corrupt("bad magic; not a checkpoint file"));
        }
        let config_hash = r.u64()?;
        let phase = r.string("phase")?;
        let episodes = r.u64()?;
        let count = r.u32()? as usize;

        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string("array name")?;
            let trainable = match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(corrupt(&format!("array {name}: bad trainable flag {other}"))),
            };
            let rank = r.u8()? as usize;
            if !(1..=2).contains(&rank) {
                return Err(corrupt(&format!("array {name}: unsupported rank {rank}")));
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()? as usize);
            }
            let numel: usize = dims.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(r.f64()?);
            }
            let tensor = Tensor::new(&dims, data)
                .map_err(|e| corrupt(&format!("array {name}: {e}")))?;
            arrays.push(CheckpointArray {
                name,
                trainable,
                tensor,
            });
        }
        if !r.done() {
            return Err(corrupt("trailing bytes after the last array"));
        }
        Ok(Checkpoint {
            config_hash,
            phase,
            episodes,
            arrays,
        })
    }

    /// Writes through a temp file in the target directory plus a rename,
    /// so a crash mid-write never leaves a partial checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn corrupt(message: &str) -> Error {
    Error::Checkpoint {
        message: message.to_string(),
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(corrupt("unexpected end of file"));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
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

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt(&format!("{what} is not utf-8")))
    }

    fn done(&self) -> bool {
        self.at == self.bytes.len()
    }
}

/// Atomic byte-level file write: temp file in the same directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let low = crc & 1;
            crc >>= 1;
            if low != 0 {
                crc ^= 0xEDB8_8320;
            }
        }
    }
    !crc
}
