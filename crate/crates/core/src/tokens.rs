//! Dynamic-frame-rate token streams and the `DFRT` wire format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DFRT"  u16 version=1  u64 K  u8 U  f64 base_rate_hz  u64 count
//! content plane:  count × ceil(log2 K) bits, byte-padded
//! duration plane: count × ceil(log2 U) bits of (duration - 1), byte-padded
//! ```
//!
//! Bits are packed LSB-first: value bit 0 lands in the lowest free bit of
//! the current byte.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, malformed, Result};
use crate::scheme::Scheme;

pub const DFRT_MAGIC: &[u8; 4] = b"DFRT";
pub const DFRT_VERSION: u16 = 1;
pub const DFRT_HEADER_LEN: usize = 4 + 2 + 8 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub code: u64,
    /// Frames covered, `1..=U`.
    pub duration: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    #[serde(rename = "K")]
    codebook_size: u64,
    #[serde(rename = "U")]
    max_duration: u8,
    base_rate_hz: f64,
    tokens: Vec<Token>,
}

/// Bits needed for `n` distinct values: `ceil(log2 n)`, 0 when `n <= 1`.
pub fn bits_for(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

impl TokenStream {
    pub fn new(
        tokens: Vec<Token>,
        codebook_size: u64,
        max_duration: u8,
        base_rate_hz: f64,
    ) -> Result<Self> {
        if codebook_size == 0 {
            return Err(invalid!("codebook size K must be at least 1"));
        }
        if max_duration == 0 {
            return Err(invalid!("max duration U must be at least 1"));
        }
        if !(base_rate_hz.is_finite() && base_rate_hz > 0.0) {
            return Err(invalid!(
                "base frame rate must be positive, got {base_rate_hz}"
            ));
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.code >= codebook_size {
                return Err(invalid!(
                    "token {i}: code {} >= K = {codebook_size}",
                    t.code
                ));
            }
            if t.duration == 0 || t.duration > max_duration {
                return Err(invalid!(
                    "token {i}: duration {} outside 1..={max_duration}",
                    t.duration
                ));
            }
        }
        Ok(Self {
            codebook_size,
            max_duration,
            base_rate_hz,
            tokens,
        })
    }

    /// Pairs per-segment codes with the scheme's segment lengths.
    pub fn from_scheme(
        codes: &[u64],
        scheme: &Scheme,
        codebook_size: u64,
        base_rate_hz: f64,
    ) -> Result<Self> {
        if codes.len() != scheme.len() {
            return Err(invalid!(
                "{} codes for a {}-segment scheme",
                codes.len(),
                scheme.len()
            ));
        }
        let max_duration = u8::try_from(scheme.max_seg())
            .map_err(|_| invalid!("U = {} does not fit the token format", scheme.max_seg()))?;
        let tokens = codes
            .iter()
            .zip(scheme.segments())
            .map(|(&code, &len)| Token {
                code,
                duration: len as u8,
            })
            .collect();
        Self::new(tokens, codebook_size, max_duration, base_rate_hz)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn codebook_size(&self) -> u64 {
        self.codebook_size
    }

    pub fn max_duration(&self) -> u8 {
        self.max_duration
    }

    pub fn base_rate_hz(&self) -> f64 {
        self.base_rate_hz
    }

    /// Original frame count: the sum of durations.
    pub fn frames(&self) -> u64 {
        self.tokens.iter().map(|t| t.duration as u64).sum()
    }

    pub fn codes(&self) -> Vec<u64> {
        self.tokens.iter().map(|t| t.code).collect()
    }

    pub fn durations(&self) -> Vec<u8> {
        self.tokens.iter().map(|t| t.duration).collect()
    }

    /// Durations as a scheme.
    pub fn scheme(&self) -> Result<Scheme> {
        Scheme::new(
            self.tokens.iter().map(|t| t.duration as usize).collect(),
            self.max_duration as usize,
        )
    }

    pub fn content_bits(&self) -> u32 {
        bits_for(self.codebook_size)
    }

    pub fn duration_bits(&self) -> u32 {
        bits_for(self.max_duration as u64)
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    bit: usize,
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            bit: 0,
        }
    }

    fn push(&mut self, value: u64, width: u32) {
        for b in 0..width {
            if self.bit.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> b) & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (self.bit % 8);
            }
            self.bit += 1;
        }
    }

    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, bit: 0 }
    }

    fn read(&mut self, width: u32) -> u64 {
        let mut value = 0u64;
        for b in 0..width {
            let byte = self.bytes[self.bit / 8];
            value |= (((byte >> (self.bit % 8)) & 1) as u64) << b;
            self.bit += 1;
        }
        value
    }
}

fn plane_len(count: u64, width: u32) -> Option<usize> {
    let bits = count.checked_mul(width as u64)?;
    usize::try_from(bits.div_ceil(8)).ok()
}

/// Serialises a stream. The stream type guarantees its invariants, so this
/// cannot fail.
pub fn pack(ts: &TokenStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(DFRT_HEADER_LEN);
    out.extend_from_slice(DFRT_MAGIC);
    out.extend_from_slice(&DFRT_VERSION.to_le_bytes());
    out.extend_from_slice(&ts.codebook_size.to_le_bytes());
    out.push(ts.max_duration);
    out.extend_from_slice(&ts.base_rate_hz.to_le_bytes());
    out.extend_from_slice(&(ts.tokens.len() as u64).to_le_bytes());

    let content_bits = ts.content_bits();
    let mut content = BitWriter::new();
    for t in &ts.tokens {
        content.push(t.code, content_bits);
    }
    out.extend(content.finish());

    let duration_bits = ts.duration_bits();
    let mut durations = BitWriter::new();
    for t in &ts.tokens {
        durations.push((t.duration - 1) as u64, duration_bits);
    }
    out.extend(durations.finish());
    out
}

pub fn unpack(bytes: &[u8]) -> Result<TokenStream> {
    if bytes.len() < DFRT_HEADER_LEN {
        return Err(malformed!(
            "DFRT header needs {DFRT_HEADER_LEN} bytes, got {}",
            bytes.len()
        ));
    }
    if &bytes[0..4] != DFRT_MAGIC {
        return Err(malformed!(
            "bad magic {:?} at offset 0, expected \"DFRT\"",
            &bytes[0..4]
        ));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DFRT_VERSION {
        return Err(malformed!("unsupported DFRT version {version} at offset 4"));
    }
    let codebook_size = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let max_duration = bytes[14];
    let base_rate_hz = f64::from_le_bytes(bytes[15..23].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[23..31].try_into().unwrap());
    if codebook_size == 0 {
        return Err(malformed!("K = 0 at offset 6"));
    }
    if max_duration == 0 {
        return Err(malformed!("U = 0 at offset 14"));
    }

    let content_bits = bits_for(codebook_size);
    let duration_bits = bits_for(max_duration as u64);
    let content_len = plane_len(count, content_bits)
        .ok_or_else(|| malformed!("token count {count} overflows the content plane"))?;
    let duration_len = plane_len(count, duration_bits)
        .ok_or_else(|| malformed!("token count {count} overflows the duration plane"))?;

    let content_start = DFRT_HEADER_LEN;
    let content_end = content_start
        .checked_add(content_len)
        .ok_or_else(|| malformed!("content plane length overflows"))?;
    if bytes.len() < content_end {
        return Err(malformed!(
            "truncated content plane at offset {content_start}: expected {content_len} bytes, got {}",
            bytes.len() - content_start
        ));
    }
    let duration_end = content_end
        .checked_add(duration_len)
        .ok_or_else(|| malformed!("duration plane length overflows"))?;
    if bytes.len() < duration_end {
        return Err(malformed!(
            "truncated duration plane at offset {content_end}: expected {duration_len} bytes, got {}",
            bytes.len() - content_end
        ));
    }
    if bytes.len() > duration_end {
        return Err(malformed!(
            "{} trailing bytes after offset {duration_end}",
            bytes.len() - duration_end
        ));
    }

    let count = count as usize;
    let mut content = BitReader::new(&bytes[content_start..content_end]);
    let mut durations = BitReader::new(&bytes[content_end..duration_end]);
    let mut tokens = Vec::with_capacity(count);
    for i in 0..count {
        let code = content.read(content_bits);
        if code >= codebook_size {
            return Err(malformed!(
                "token {i}: code {code} >= K = {codebook_size} (content plane offset {})",
                content_start + i * content_bits as usize / 8
            ));
        }
        let duration = durations.read(duration_bits) + 1;
        if duration > max_duration as u64 {
            return Err(malformed!(
                "token {i}: duration {duration} > U = {max_duration} (duration plane offset {})",
                content_end + i * duration_bits as usize / 8
            ));
        }
        tokens.push(Token {
            code,
            duration: duration as u8,
        });
    }
    TokenStream::new(tokens, codebook_size, max_duration, base_rate_hz)
        .map_err(|e| malformed!("{e}"))
}

/// Rates derived from a stream's durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bitrate {
    /// Tokens per second of audio.
    pub mean_token_rate_hz: f64,
    /// `token_rate · log2 K`.
    pub content_bps: f64,
    /// `token_rate · log2 U`.
    pub duration_bps: f64,
    /// `token_rate · ceil(log2 K)`, what the wire format spends.
    pub packed_content_bps: f64,
    /// `token_rate · ceil(log2 U)`.
    pub packed_duration_bps: f64,
    pub seconds: f64,
}

pub fn bitrate(ts: &TokenStream) -> Result<Bitrate> {
    if ts.is_empty() {
        return Err(invalid!("bitrate of an empty token stream is undefined"));
    }
    let seconds = ts.frames() as f64 / ts.base_rate_hz;
    let rate = ts.len() as f64 / seconds;
    Ok(Bitrate {
        mean_token_rate_hz: rate,
        content_bps: rate * (ts.codebook_size as f64).log2(),
        duration_bps: rate * (ts.max_duration as f64).log2(),
        packed_content_bps: rate * ts.content_bits() as f64,
        packed_duration_bps: rate * ts.duration_bits() as f64,
        seconds,
    })
}
