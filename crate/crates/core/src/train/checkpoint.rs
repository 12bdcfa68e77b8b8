//! Binary checkpoints: little-endian, magic `OAE1`.
//!
//! Layout: magic, 32-byte config hash, step (u64), then three tensor groups
//! (parameters, first moments, second moments), each a u64 count followed by
//! length-prefixed f64 runs; then the optimizer step (u64) and the RNG
//! positions as a u64 count of `(stream, index)` u64 pairs.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndiff::Tensor;

pub const MAGIC: &[u8; 4] = b"OAE1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    /// Number of completed optimizer steps.
    pub step: u64,
    pub params: Vec<Vec<f64>>,
    pub adam_m: Vec<Vec<f64>>,
    pub adam_v: Vec<Vec<f64>>,
    pub optimizer_step: u64,
    /// `(stream id, next index)` for every seed stream in use.
    pub rng_positions: Vec<(u64, u64)>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&self.step.to_le_bytes());
        for group in [&self.params, &self.adam_m, &self.adam_v] {
            out.extend_from_slice(&(group.len() as u64).to_le_bytes());
            for t in group {
                out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                for v in t {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&self.optimizer_step.to_le_bytes());
        out.extend_from_slice(&(self.rng_positions.len() as u64).to_le_bytes());
        for (s, i) in &self.rng_positions {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&i.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Contract("not a checkpoint (bad magic)".into()));
        }
        let mut config_hash = [0u8; 32];
        read_exact(&mut r, &mut config_hash)?;
        let step = read_u64(&mut r)?;
        let mut groups = Vec::with_capacity(3);
        for _ in 0..3 {
            let count = read_len(&mut r, 8)?;
            let mut g = Vec::with_capacity(count);
            for _ in 0..count {
                let len = read_len(&mut r, 8)?;
                let mut t = Vec::with_capacity(len);
                for _ in 0..len {
                    t.push(f64::from_le_bytes(read_array(&mut r)?));
                }
                g.push(t);
            }
            groups.push(g);
        }
        let optimizer_step = read_u64(&mut r)?;
        let count = read_len(&mut r, 16)?;
        let mut rng_positions = Vec::with_capacity(count);
        for _ in 0..count {
            rng_positions.push((read_u64(&mut r)?, read_u64(&mut r)?));
        }
        if !r.is_empty() {
            return Err(Error::Contract(format!("{} trailing bytes in checkpoint", r.len())));
        }
        let adam_v = groups.pop().expect("three groups");
        let adam_m = groups.pop().expect("three groups");
        let params = groups.pop().expect("three groups");
        Ok(Checkpoint {
            config_hash,
            step,
            params,
            adam_m,
            adam_v,
            optimizer_step,
            rng_positions,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Reshapes a flat group onto template shapes.
    pub fn shaped(group: &[Vec<f64>], like: &[&Tensor]) -> Result<Vec<Tensor>> {
        if group.len() != like.len() {
            return Err(Error::Contract(format!(
                "checkpoint has {} tensors, model has {}",
                group.len(),
                like.len()
            )));
        }
        group
            .iter()
            .zip(like)
            .map(|(data, t)| Tensor::new(t.shape().to_vec(), data.clone()))
            .collect()
    }
}

fn truncated() -> Error {
    Error::Contract("truncated checkpoint".into())
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    if r.len() < buf.len() {
        return Err(truncated());
    }
    let (head, tail) = r.split_at(buf.len());
    buf.copy_from_slice(head);
    *r = tail;
    Ok(())
}

fn read_array(r: &mut &[u8]) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(b)
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// A count whose items need at least `item_bytes` each; guards allocation
/// against corrupt headers.
fn read_len(r: &mut &[u8], item_bytes: usize) -> Result<usize> {
    let n = read_u64(r)?;
    if n > (r.len() / item_bytes) as u64 {
        return Err(truncated());
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            config_hash: [7; 32],
            step: 12,
            params: vec![vec![1.0, -2.5], vec![f64::MIN_POSITIVE]],
            adam_m: vec![vec![0.1, 0.2], vec![0.0]],
            adam_v: vec![vec![0.01, 0.02], vec![1e-300]],
            optimizer_step: 12,
            rng_positions: vec![(3, 12)],
        }
    }

    #[test]
    fn bytes_round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
