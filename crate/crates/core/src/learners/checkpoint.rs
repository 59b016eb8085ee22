//! Versioned binary encoding of a [`LearnerState`].
//!
//! Layout (little-endian): magic `OPLS`, `u16` version, `u32` dimension, `u8` diverged flag,
//! `f64` follow-on, `f64` previous rho, `f64` previous pi, then `w`, `z`, `z_b` and `v`
//! as `d` doubles each.

use super::LearnerState;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OPLS";
pub const CHECKPOINT_VERSION: u16 = 1;

impl LearnerState {
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::with_capacity(35 + 32 * d);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.push(self.diverged as u8);
        for x in [self.follow_on, self.prev_rho, self.prev_pi] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for vector in [&self.w, &self.z, &self.z_b, &self.v] {
            for x in vector.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LearnerState> {
        let bad = |m: &str| Error::Format(format!("learner checkpoint: {m}"));
        if bytes.len() < 35 || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let d = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        if d == 0 || bytes.len() != 35 + 32 * d {
            return Err(bad("length does not match dimension"));
        }
        let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let vector = |k: usize| (0..d).map(|i| f(35 + 8 * (k * d + i))).collect::<Vec<f64>>();
        Ok(LearnerState {
            diverged: match bytes[10] {
                0 => false,
                1 => true,
                _ => return Err(bad("bad diverged flag")),
            },
            follow_on: f(11),
            prev_rho: f(19),
            prev_pi: f(27),
            w: vector(0),
            z: vector(1),
            z_b: vector(2),
            v: vector(3),
        })
    }
}
