//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            5 bytes  "MTRZ1"
//! format version   u32
//! vocabulary hash  u64
//! d                u32
//! v                u32
//! parameters       f64 x n, blocks in declared order
//! global step      u64
//! optimizer step   u64
//! adam m           f64 x n, same block order
//! adam v           f64 x n, same block order
//! ```
//!
//! Writing then reading a checkpoint reproduces every byte of state,
//! so a resumed run continues exactly where the original left off.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::optim::AdamState;
use crate::policy::{ParamBlock, PolicyParams};

pub const MAGIC: &[u8; 5] = b"MTRZ1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint file is truncated")]
    Truncated,
    #[error("checkpoint file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab_hash: u64,
    pub params: PolicyParams,
    pub global_step: u64,
    pub opt: AdamState,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_blocks(out: &mut impl Write, t: &PolicyParams) -> std::io::Result<()> {
    for block in ParamBlock::ALL {
        for x in t.block(block) {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_blocks(r: &mut Reader<'_>, d: usize, v: usize) -> Result<PolicyParams, CheckpointError> {
    let mut t = PolicyParams::zeros(d, v);
    for block in ParamBlock::ALL {
        let n = t.block(block).len();
        let vals = r.f64s(n)?;
        t.block_mut(block).copy_from_slice(&vals);
    }
    Ok(t)
}

pub fn save(
    path: &Path,
    vocab_hash: u64,
    params: &PolicyParams,
    global_step: u64,
    opt: &AdamState,
) -> Result<(), CheckpointError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&vocab_hash.to_le_bytes())?;
    out.write_all(&(params.d as u32).to_le_bytes())?;
    out.write_all(&(params.v as u32).to_le_bytes())?;
    write_blocks(&mut out, params)?;
    out.write_all(&global_step.to_le_bytes())?;
    out.write_all(&opt.step.to_le_bytes())?;
    write_blocks(&mut out, &opt.m)?;
    write_blocks(&mut out, &opt.v)?;
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let vocab_hash = r.u64()?;
    let d = r.u32()? as usize;
    let v = r.u32()? as usize;
    let params = read_blocks(&mut r, d, v)?;
    let global_step = r.u64()?;
    let opt_step = r.u64()?;
    let m = read_blocks(&mut r, d, v)?;
    let vv = read_blocks(&mut r, d, v)?;
    if r.pos != buf.len() {
        return Err(CheckpointError::TrailingBytes(buf.len() - r.pos));
    }
    Ok(Checkpoint {
        vocab_hash,
        params,
        global_step,
        opt: AdamState {
            step: opt_step,
            m,
            v: vv,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Vocabulary;

    fn sample_state() -> (u64, PolicyParams, u64, AdamState) {
        let vocab = Vocabulary::new(["ka", "po", "ni"].map(String::from)).unwrap();
        let params = PolicyParams::init(4, &vocab, 123, 5.0);
        let mut opt = AdamState::zeros(4, vocab.size());
        opt.step = 77;
        let mut g = 0.0;
        for block in ParamBlock::ALL {
            for x in opt.m.block_mut(block) {
                g += 0.125;
                *x = g;
            }
            for x in opt.v.block_mut(block) {
                *x = g * g;
            }
        }
        (vocab.hash(), params, 4242, opt)
    }

    #[test]
    fn round_trip_restores_every_field_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (hash, params, step, opt) = sample_state();
        save(&path, hash, &params, step, &opt).unwrap();
        let ck = load(&path).unwrap();
        assert_eq!(ck.vocab_hash, hash);
        assert_eq!(ck.params, params);
        assert_eq!(ck.global_step, step);
        assert_eq!(ck.opt, opt);
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (hash, params, step, opt) = sample_state();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        save(&p1, hash, &params, step, &opt).unwrap();
        save(&p2, hash, &params, step, &opt).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn rejects_foreign_truncated_and_padded_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (hash, params, step, opt) = sample_state();
        save(&path, hash, &params, step, &opt).unwrap();
        let good = std::fs::read(&path).unwrap();

        let other = dir.path().join("bad.ckpt");
        std::fs::write(&other, b"NOTCK").unwrap();
        assert!(matches!(load(&other), Err(CheckpointError::BadMagic)));

        std::fs::write(&other, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load(&other), Err(CheckpointError::Truncated)));

        let mut padded = good.clone();
        padded.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&other, &padded).unwrap();
        assert!(matches!(load(&other), Err(CheckpointError::TrailingBytes(4))));

        let mut wrong_version = good;
        wrong_version[5] = 9;
        std::fs::write(&other, &wrong_version).unwrap();
        assert!(matches!(
            load(&other),
            Err(CheckpointError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn header_magic_matches_declared_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (hash, params, step, opt) = sample_state();
        save(&path, hash, &params, step, &opt).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"MTRZ1");
    }
}
