//! Self-describing checkpoint encoding.
//!
//! ```text
//! "RSOUPCK1"                      8 bytes magic
//! desc_len: u64 LE                length of the description
//! desc: UTF-8                     ArchSpec::canonical_text()
//! values: f64 LE * n
//! n: u64 LE                       payload length trailer (number of f64)
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::policy::{ArchSpec, WeightVector};

pub const MAGIC: &[u8; 8] = b"RSOUPCK1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("corrupt checkpoint header: {0}")]
    CorruptHeader(String),
    #[error("truncated checkpoint: trailer declares {declared} values, payload holds {found}")]
    Truncated { declared: u64, found: u64 },
    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
    #[error("checkpoint contains non-finite weights")]
    NonFinite,
}

pub fn encode(weights: &WeightVector) -> Vec<u8> {
    let desc = weights.arch().canonical_text();
    let mut out = Vec::with_capacity(8 + 8 + desc.len() + 8 * weights.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(desc.len() as u64).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    for v in weights.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(weights.len() as u64).to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<WeightVector, CheckpointError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let rest = &bytes[8..];
    if rest.len() < 8 {
        return Err(CheckpointError::CorruptHeader("missing description length".into()));
    }
    let desc_len = read_u64(&rest[..8]);
    let rest = &rest[8..];
    let desc_len = usize::try_from(desc_len)
        .ok()
        .filter(|&n| n <= rest.len())
        .ok_or_else(|| CheckpointError::CorruptHeader("description length exceeds file".into()))?;
    let desc = core::str::from_utf8(&rest[..desc_len])
        .map_err(|_| CheckpointError::CorruptHeader("description is not UTF-8".into()))?;
    let arch = ArchSpec::parse_canonical(desc)
        .map_err(|e| CheckpointError::CorruptHeader(alloc::format!("{e}")))?;
    let rest = &rest[desc_len..];
    if rest.len() < 8 {
        return Err(CheckpointError::Truncated { declared: 0, found: 0 });
    }
    let (payload, trailer) = rest.split_at(rest.len() - 8);
    let declared = read_u64(trailer);
    if payload.len() % 8 != 0 || (payload.len() / 8) as u64 != declared {
        return Err(CheckpointError::Truncated { declared, found: (payload.len() / 8) as u64 });
    }
    if arch.param_count() as u64 != declared {
        return Err(CheckpointError::ArchMismatch(alloc::format!(
            "description implies {} parameters, payload has {declared}",
            arch.param_count()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    WeightVector::new(arch, values).map_err(|_| CheckpointError::NonFinite)
}

/// Decodes and additionally requires the stored architecture to equal `expected`.
pub fn decode_expecting(bytes: &[u8], expected: &ArchSpec) -> Result<WeightVector, CheckpointError> {
    let w = decode(bytes)?;
    if w.arch() != expected {
        return Err(CheckpointError::ArchMismatch(alloc::format!(
            "checkpoint holds `{}`, expected `{}`",
            w.arch(),
            expected
        )));
    }
    Ok(w)
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Activation, Head, LogStd};
    use crate::seed;
    use alloc::vec;

    fn sample() -> WeightVector {
        let arch = ArchSpec {
            obs_dim: 2,
            hidden: vec![5, 3],
            head: Head::Gaussian { action_dim: 1, log_std: LogStd::Fixed(-0.7) },
            activation: Activation::Tanh,
        };
        WeightVector::init_uniform(arch, &mut seed::rng(11)).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let w = sample();
        let back = decode(&encode(&w)).unwrap();
        assert_eq!(back.arch(), w.arch());
        for (a, b) in back.values().iter().zip(w.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert_eq!(decode(&bytes).unwrap_err(), CheckpointError::BadMagic);
        assert_eq!(decode(b"RSO").unwrap_err(), CheckpointError::BadMagic);
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode(&sample());
        let n = bytes.len();
        // Drop one float but keep the original trailer.
        let mut cut = bytes[..n - 16].to_vec();
        cut.extend_from_slice(&bytes[n - 8..]);
        assert!(matches!(decode(&cut).unwrap_err(), CheckpointError::Truncated { .. }));
    }

    #[test]
    fn corrupt_header() {
        let mut bytes = encode(&sample());
        bytes[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&bytes).unwrap_err(), CheckpointError::CorruptHeader(_)));
    }

    #[test]
    fn arch_mismatch() {
        let w = sample();
        let mut other = w.arch().clone();
        other.hidden = vec![4];
        assert!(matches!(
            decode_expecting(&encode(&w), &other).unwrap_err(),
            CheckpointError::ArchMismatch(_)
        ));
    }
}
