//! Binary slot pattern for the arbitrary-waveform generator.
//!
//! Little-endian layout:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `KPATTERN`                        |
//! | 8      | 4    | format version (1)                      |
//! | 12     | 1    | slot order (0 = ascending slot index)   |
//! | 13     | 3    | reserved, zero                          |
//! | 16     | 8    | slot period, s (f64)                    |
//! | 24     | 8    | slot count (u64)                        |
//! | 32     | 32   | SHA-256 of the resolved run config      |
//! | 64     | 16   | tool version, UTF-8, NUL padded         |
//! | 80     | n    | one byte per slot, 0x01 = transmit      |

use std::fmt;

pub const MAGIC: &[u8; 8] = b"KPATTERN";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub slot_period: f64,
    pub config_sha256: [u8; 32],
    pub tool_version: String,
    pub slots: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BitstreamError {
    Truncated { len: usize },
    BadMagic,
    UnsupportedVersion(u32),
    UnsupportedSlotOrder(u8),
    LengthMismatch { header: u64, body: usize },
    BadSlotByte { index: usize, value: u8 },
    VersionTooLong(usize),
}

impl fmt::Display for BitstreamError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Self::Truncated { len } => write!(f, "bitstream truncated at {len} bytes"),
            Self::BadMagic => f.write_str("not a pattern bitstream (bad magic)"),
            Self::UnsupportedVersion(v) => write!(f, "unsupported bitstream version {v}"),
            Self::UnsupportedSlotOrder(o) => write!(f, "unsupported slot order {o}"),
            Self::LengthMismatch { header, body } => write!(f, "header declares {header} slots, body has {body}"),
            Self::BadSlotByte { index, value } => write!(f, "slot {index} holds 0x{value:02x}"),
            Self::VersionTooLong(n) => write!(f, "tool version is {n} bytes, at most 16 fit"),
        }
    }
}

impl std::error::Error for BitstreamError {}

impl Bitstream {
    pub fn encode(&self) -> Result<Vec<u8>, BitstreamError> {
        let version = self.tool_version.as_bytes();
        if version.len() > 16 {
            return Err(BitstreamError::VersionTooLong(version.len()));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.slots.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]);
        out.extend_from_slice(&self.slot_period.to_le_bytes());
        out.extend_from_slice(&(self.slots.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.config_sha256);
        let mut v = [0u8; 16];
        v[..version.len()].copy_from_slice(version);
        out.extend_from_slice(&v);
        out.extend(self.slots.iter().map(|&b| u8::from(b)));
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, BitstreamError> {
        if bytes.len() < HEADER_LEN {
            return Err(BitstreamError::Truncated { len: bytes.len() });
        }
        if &bytes[..8] != MAGIC {
            return Err(BitstreamError::BadMagic);
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(BitstreamError::UnsupportedVersion(version));
        }
        if bytes[12] != 0 {
            return Err(BitstreamError::UnsupportedSlotOrder(bytes[12]));
        }
        let slot_period = f64::from_bits(u64_at(16));
        let count = u64_at(24);
        let body = &bytes[HEADER_LEN..];
        if count != body.len() as u64 {
            return Err(BitstreamError::LengthMismatch { header: count, body: body.len() });
        }
        let config_sha256 = bytes[32..64].try_into().unwrap();
        let tool = &bytes[64..80];
        let end = tool.iter().position(|&b| b == 0).unwrap_or(16);
        let tool_version = String::from_utf8_lossy(&tool[..end]).into_owned();
        let slots = body
            .iter()
            .enumerate()
            .map(|(index, &value)| match value {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(BitstreamError::BadSlotByte { index, value }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { slot_period, config_sha256, tool_version, slots })
    }
}
