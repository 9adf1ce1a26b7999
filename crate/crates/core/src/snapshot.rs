//! Binary cache of enumeration state.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! "ESMS" | format u16 | isa version (u16 len, utf-8) | config hash [32]
//! | variant u8 | conditional (u8 flag, u32 len, packed bits)
//! | stage u32 | tree depth u32
//! | discrete frontier | discrete masses | continuous frontier | continuous tree
//! | sha-256 of everything before [32]
//! ```
//!
//! Frontiers are `u64` counts of `(u16 len, u32 credit_from, packed bits)`
//! records in sorted order. Masses are `(u128 numerator, u32 exponent)`
//! pairs: keyed by `(u16 len, packed bits)` for the discrete table and dense
//! in index order for the tree.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::enumerator::{ContinuousBound, DiscreteBound, FrontierRecord, Stage, MASS_EXP};
use crate::error::{Error, Result};
use crate::machine::{MachineConfig, Variant, INSTRUCTION_SET_VERSION};
use crate::prefix::Prefix;

pub const MAGIC: &[u8; 4] = b"ESMS";
pub const FORMAT_VERSION: u16 = 1;

/// Enumeration state for one machine configuration: the discrete bound and
/// the continuous bound at a common stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheSnapshot {
    pub discrete: DiscreteBound,
    pub continuous: ContinuousBound,
}

/// SHA-256 of the canonical machine configuration and tree depth.
pub fn config_hash(cfg: &MachineConfig, depth: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(cfg.canonical_bytes());
    h.update((depth as u32).to_be_bytes());
    h.finalize().into()
}

impl CacheSnapshot {
    pub fn new(cfg: MachineConfig, depth: usize) -> Self {
        CacheSnapshot {
            discrete: DiscreteBound::new(cfg),
            continuous: ContinuousBound::new(depth),
        }
    }

    pub fn stage(&self) -> Stage {
        self.discrete.stage()
    }

    pub fn advance_to(&mut self, t: usize) {
        self.discrete.advance_to(t);
        self.continuous.advance_to(t);
    }

    pub fn config_hash(&self) -> [u8; 32] {
        config_hash(self.discrete.config(), self.continuous.depth())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&FORMAT_VERSION.to_be_bytes());
        let cfg = self.discrete.config();
        w.extend_from_slice(&(cfg.version.len() as u16).to_be_bytes());
        w.extend_from_slice(cfg.version.as_bytes());
        w.extend_from_slice(&self.config_hash());
        w.push(match cfg.variant {
            Variant::PrefixDiscrete => 0,
            Variant::MonotoneContinuous => 1,
            Variant::ConditionalPrefix => 2,
        });
        match &cfg.conditional {
            None => w.push(0),
            Some(y) => {
                w.push(1);
                w.extend_from_slice(&(y.len() as u32).to_be_bytes());
                w.extend_from_slice(&y.packed());
            }
        }
        w.extend_from_slice(&(self.stage().0 as u32).to_be_bytes());
        w.extend_from_slice(&(self.continuous.depth() as u32).to_be_bytes());
        write_frontier(&mut w, self.discrete.frontier());
        let masses = self.discrete.raw_masses();
        w.extend_from_slice(&(masses.len() as u64).to_be_bytes());
        for (x, &n) in masses {
            write_prefix(&mut w, x);
            write_mass(&mut w, n);
        }
        write_frontier(&mut w, self.continuous.frontier());
        let tree = self.continuous.raw_tree();
        w.extend_from_slice(&(tree.len() as u64).to_be_bytes());
        for &n in tree {
            write_mass(&mut w, n);
        }
        let sum: [u8; 32] = Sha256::digest(&w).into();
        w.extend_from_slice(&sum);
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 || &bytes[..4] != MAGIC {
            return Err(Error::Snapshot("not a snapshot (bad magic)".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        let expected: [u8; 32] = Sha256::digest(body).into();
        if sum != expected {
            return Err(Error::Snapshot("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let fmt = r.u16()?;
        if fmt != FORMAT_VERSION {
            return Err(Error::Snapshot(format!(
                "format version {fmt}, expected {FORMAT_VERSION}"
            )));
        }
        let vlen = r.u16()? as usize;
        let version = String::from_utf8(r.take(vlen)?.to_vec())
            .map_err(|_| Error::Snapshot("instruction set version is not utf-8".into()))?;
        if version != INSTRUCTION_SET_VERSION {
            return Err(Error::Snapshot(format!(
                "instruction set {version}, expected {INSTRUCTION_SET_VERSION}"
            )));
        }
        let hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let variant = match r.u8()? {
            0 => Variant::PrefixDiscrete,
            2 => Variant::ConditionalPrefix,
            v => return Err(Error::Snapshot(format!("bad variant tag {v}"))),
        };
        let conditional = match r.u8()? {
            0 => None,
            1 => {
                let n = r.u32()? as usize;
                Some(Prefix::from_packed(r.take(n.div_ceil(8))?, n))
            }
            v => return Err(Error::Snapshot(format!("bad conditional flag {v}"))),
        };
        let cfg = MachineConfig {
            variant,
            conditional,
            version,
        };
        let stage = Stage(r.u32()? as usize);
        let depth = r.u32()? as usize;
        if config_hash(&cfg, depth) != hash {
            return Err(Error::Snapshot("config hash mismatch".into()));
        }
        let dfront = read_frontier(&mut r)?;
        let count = r.u64()?;
        let mut masses = BTreeMap::new();
        for _ in 0..count {
            let x = read_prefix(&mut r)?;
            masses.insert(x, read_mass(&mut r)?);
        }
        let cfront = read_frontier(&mut r)?;
        let n = r.u64()? as usize;
        if n != (1usize << (depth + 1)) - 1 {
            return Err(Error::Snapshot("tree size does not match depth".into()));
        }
        let tree = (0..n).map(|_| read_mass(&mut r)).collect::<Result<Vec<_>>>()?;
        if r.pos != body.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        Ok(CacheSnapshot {
            discrete: DiscreteBound::from_parts(cfg, stage, dfront, masses),
            continuous: ContinuousBound::from_parts(stage, depth, cfront, tree),
        })
    }
}

fn write_prefix(w: &mut Vec<u8>, x: &Prefix) {
    w.extend_from_slice(&(x.len() as u16).to_be_bytes());
    w.extend_from_slice(&x.packed());
}

fn write_mass(w: &mut Vec<u8>, n: u128) {
    w.extend_from_slice(&n.to_be_bytes());
    w.extend_from_slice(&MASS_EXP.to_be_bytes());
}

fn write_frontier(w: &mut Vec<u8>, f: &[FrontierRecord]) {
    w.extend_from_slice(&(f.len() as u64).to_be_bytes());
    for rec in f {
        w.extend_from_slice(&(rec.program.len() as u16).to_be_bytes());
        w.extend_from_slice(&(rec.credit_from as u32).to_be_bytes());
        w.extend_from_slice(&rec.program.packed());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Snapshot("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_be_bytes(self.take(16)?.try_into().unwrap()))
    }
}

fn read_prefix(r: &mut Reader) -> Result<Prefix> {
    let n = r.u16()? as usize;
    Ok(Prefix::from_packed(r.take(n.div_ceil(8))?, n))
}

fn read_mass(r: &mut Reader) -> Result<u128> {
    let n = r.u128()?;
    let e = r.u32()?;
    if e != MASS_EXP {
        return Err(Error::Snapshot(format!("mass exponent {e}, expected {MASS_EXP}")));
    }
    Ok(n)
}

fn read_frontier(r: &mut Reader) -> Result<Vec<FrontierRecord>> {
    let n = r.u64()?;
    let mut out = Vec::with_capacity(n.min(1 << 20) as usize);
    for _ in 0..n {
        let len = r.u16()? as usize;
        let credit_from = r.u32()? as usize;
        let program = Prefix::from_packed(r.take(len.div_ceil(8))?, len);
        out.push(FrontierRecord {
            program,
            credit_from,
        });
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Snapshot("frontier records out of order".into()));
    }
    Ok(out)
}
