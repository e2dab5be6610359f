//! Versioned binary checkpoint container.
//!
//! ```text
//! header:  b"ALAECKPT" | version: u32 | payload_len: u64 | sha256(payload): [u8; 32]
//! payload: config: str
//!          level: u32 | alpha: f64 | iteration: u64 | images_seen: u64
//!          batch_epoch: u64 | batch_cursor: u64
//!          n_streams: u32, then per stream: name: str | seed: [u8; 32] | word_pos: u128
//!          n_params: u32, then per parameter:
//!              name: str | group: u8 | ndim: u32 | dims: u64 * ndim
//!              value: f32 * numel | adam_step: u64 | m: f32 * numel | v: f32 * numel
//! ```
//!
//! All integers and floats are little-endian; `str` is a `u64` byte length
//! followed by UTF-8 bytes. Readers reject versions newer than their own.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::params::Group;
use crate::rng::StreamState;

pub const MAGIC: &[u8; 8] = b"ALAECKPT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is newer than the supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub group: Group,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub adam_step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointData {
    pub config: String,
    pub level: u32,
    pub alpha: f64,
    pub iteration: u64,
    pub images_seen: u64,
    pub batch_epoch: u64,
    pub batch_cursor: u64,
    pub streams: Vec<StreamState>,
    pub params: Vec<ParamRecord>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        self.0.reserve(v.len() * 4);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N)?.try_into().unwrap())
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.arr::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn u128(&mut self) -> Result<u128, CheckpointError> {
        Ok(u128::from_le_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.arr()?))
    }
    fn len(&mut self) -> Result<usize, CheckpointError> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("implausible length {n}")))
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Corrupt("invalid UTF-8".into()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Corrupt("overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Serializes a checkpoint to bytes.
pub fn encode(data: &CheckpointData) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.str(&data.config);
    w.u32(data.level);
    w.f64(data.alpha);
    w.u64(data.iteration);
    w.u64(data.images_seen);
    w.u64(data.batch_epoch);
    w.u64(data.batch_cursor);
    w.u32(data.streams.len() as u32);
    for s in &data.streams {
        w.str(&s.name);
        w.0.extend_from_slice(&s.seed);
        w.u128(s.word_pos);
    }
    w.u32(data.params.len() as u32);
    for p in &data.params {
        w.str(&p.name);
        w.u8(p.group.tag());
        w.u32(p.shape.len() as u32);
        for &d in &p.shape {
            w.u64(d as u64);
        }
        w.f32s(&p.value);
        w.u64(p.adam_step);
        w.f32s(&p.m);
        w.f32s(&p.v);
    }
    let payload = w.0;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

/// Parses checkpoint bytes, verifying magic, version and digest.
pub fn decode(bytes: &[u8]) -> Result<CheckpointData, CheckpointError> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version > VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Corrupt("truncated header".into()));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(CheckpointError::Corrupt(format!(
            "payload is {} bytes, header says {len}",
            payload.len()
        )));
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(CheckpointError::Corrupt("digest mismatch".into()));
    }

    let mut r = Reader { buf: payload, pos: 0 };
    let config = r.str()?;
    let level = r.u32()?;
    let alpha = r.f64()?;
    let iteration = r.u64()?;
    let images_seen = r.u64()?;
    let batch_epoch = r.u64()?;
    let batch_cursor = r.u64()?;
    let n_streams = r.u32()?;
    let mut streams = Vec::new();
    for _ in 0..n_streams {
        let name = r.str()?;
        let seed = r.arr::<32>()?;
        let word_pos = r.u128()?;
        streams.push(StreamState { name, seed, word_pos });
    }
    let n_params = r.u32()?;
    let mut params = Vec::new();
    for _ in 0..n_params {
        let name = r.str()?;
        let tag = r.u8()?;
        let group = Group::from_tag(tag).ok_or_else(|| CheckpointError::Corrupt(format!("unknown group tag {tag}")))?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.len()?);
        }
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let numel = numel.ok_or_else(|| CheckpointError::Corrupt(format!("shape overflow in {name}")))?;
        let value = r.f32s(numel)?;
        let adam_step = r.u64()?;
        let m = r.f32s(numel)?;
        let v = r.f32s(numel)?;
        params.push(ParamRecord {
            name,
            group,
            shape,
            value,
            adam_step,
            m,
            v,
        });
    }
    if r.pos != payload.len() {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }
    Ok(CheckpointData {
        config,
        level,
        alpha,
        iteration,
        images_seen,
        batch_epoch,
        batch_cursor,
        streams,
        params,
    })
}

/// Writes a checkpoint atomically (temporary file, then rename).
pub fn checkpoint_save(data: &CheckpointData, path: &Path) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(data))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<CheckpointData, CheckpointError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CheckpointData {
        CheckpointData {
            config: "seed = 3\n".into(),
            level: 3,
            alpha: 0.25,
            iteration: 17,
            images_seen: 2176,
            batch_epoch: 1,
            batch_cursor: 640,
            streams: vec![StreamState {
                name: "prior".into(),
                seed: [7; 32],
                word_pos: 123456789,
            }],
            params: vec![ParamRecord {
                name: "F.0.weight".into(),
                group: Group::Mapper,
                shape: vec![2, 3],
                value: vec![1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, -0.0],
                adam_step: 5,
                m: vec![0.1; 6],
                v: vec![0.2; 6],
            }],
        }
    }

    #[test]
    fn roundtrip() {
        let d = sample();
        let bytes = encode(&d);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn rejects_newer_version() {
        let mut bytes = encode(&sample());
        bytes[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(CheckpointError::UnsupportedVersion { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn detects_corruption() {
        let mut bytes = encode(&sample());
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        assert!(matches!(decode(&bytes), Err(CheckpointError::Corrupt(_))));
        assert!(matches!(decode(b"NOTACKPT...."), Err(CheckpointError::BadMagic)));
        let bytes = encode(&sample());
        assert!(matches!(decode(&bytes[..bytes.len() - 4]), Err(CheckpointError::Corrupt(_))));
    }
}
