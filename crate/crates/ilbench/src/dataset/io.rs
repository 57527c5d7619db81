//! Binary trajectory-dataset files.
//!
//! Layout (all little-endian):
//!   magic "ILDS", version byte 1,
//!   state dim (u32), action dim (u32),
//!   transition count (u64), trajectory count (u64),
//!   trajectory end offsets (u64 each),
//!   per transition: state f32s, action f32s, reward f32, next-state f32s,
//!   one terminal byte (0/1),
//!   trailer: environment name (u32 length + UTF-8), subsample rate (u32).
//!
//! Readers that only know the header-and-payload portion can ignore the
//! trailer; our loader treats a missing trailer as name "" and rate 1 so such
//! files still open.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Transition, TrajectoryDataset};

const MAGIC: &[u8; 4] = b"ILDS";
const VERSION: u8 = 1;

/// Guard against allocating from a corrupt count field.
const MAX_TRANSITIONS: u64 = 1 << 32;

pub fn save(ds: &TrajectoryDataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(ds.state_dim as u32).to_le_bytes())?;
    w.write_all(&(ds.action_dim as u32).to_le_bytes())?;
    w.write_all(&(ds.transitions.len() as u64).to_le_bytes())?;
    w.write_all(&(ds.boundaries.len() as u64).to_le_bytes())?;
    for b in &ds.boundaries {
        w.write_all(&(*b as u64).to_le_bytes())?;
    }
    for t in &ds.transitions {
        for v in &t.state {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &t.action {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&t.reward.to_le_bytes())?;
        for v in &t.next_state {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[u8::from(t.terminal)])?;
    }
    let name = ds.env_name.as_bytes();
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name)?;
    w.write_all(&ds.subsample_rate.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrajectoryDataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a trajectory dataset".into()));
    }
    let version = read_u8(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let state_dim = read_u32(&mut r, "state dim")? as usize;
    let action_dim = read_u32(&mut r, "action dim")? as usize;
    let n_transitions = read_u64(&mut r, "transition count")?;
    let n_trajectories = read_u64(&mut r, "trajectory count")?;
    if n_transitions > MAX_TRANSITIONS || n_trajectories > n_transitions {
        return Err(Error::Format("implausible counts in header".into()));
    }
    let mut boundaries = Vec::with_capacity(n_trajectories as usize);
    for i in 0..n_trajectories {
        let b = read_u64(&mut r, "trajectory boundary")?;
        if b > n_transitions {
            return Err(Error::Format(format!("boundary {i} beyond transition count")));
        }
        boundaries.push(b as usize);
    }
    let mut transitions = Vec::with_capacity(n_transitions as usize);
    for _ in 0..n_transitions {
        let state = read_f32s(&mut r, state_dim, "state")?;
        let action = read_f32s(&mut r, action_dim, "action")?;
        let reward = read_f32(&mut r, "reward")?;
        let next_state = read_f32s(&mut r, state_dim, "next state")?;
        let terminal = match read_u8(&mut r, "terminal flag")? {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("invalid terminal byte {b}"))),
        };
        transitions.push(Transition { state, action, reward, next_state, terminal });
    }
    // Trailer; absent in minimal files.
    let (env_name, subsample_rate) = match try_read_u32(&mut r)? {
        None => (String::new(), 1),
        Some(name_len) => {
            if name_len > 4096 {
                return Err(Error::Format("implausible environment name length".into()));
            }
            let mut buf = vec![0u8; name_len as usize];
            read_exact(&mut r, &mut buf, "environment name")?;
            let name = String::from_utf8(buf)
                .map_err(|_| Error::Format("environment name is not UTF-8".into()))?;
            (name, read_u32(&mut r, "subsample rate")?)
        }
    };
    let ds = TrajectoryDataset {
        state_dim,
        action_dim,
        transitions,
        boundaries,
        env_name,
        subsample_rate,
    };
    ds.validate()?;
    Ok(ds)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Format(format!("truncated file while reading {what}")))
}

fn read_u8(r: &mut impl Read, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b, what)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a u32 if any bytes remain; clean EOF yields None.
fn try_read_u32(r: &mut impl Read) -> Result<Option<u32>> {
    let mut b = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut b[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(Error::Format("truncated trailer".into()));
        }
        filled += n;
    }
    Ok(Some(u32::from_le_bytes(b)))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read, what: &str) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(f32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(read_f32(r, what)?);
    }
    Ok(out)
}
