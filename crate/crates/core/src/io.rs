//! Small helpers shared by the binary readers.

use std::io::Read;

use crate::error::Error;

pub(crate) struct ByteReader<R> {
    inner: R,
    offset: u64,
    source: String,
}

impl<R: Read> ByteReader<R> {
    pub(crate) fn new(inner: R, source: &str) -> Self {
        Self {
            inner,
            offset: 0,
            source: source.to_owned(),
        }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    pub(crate) fn format_error(&self, offset: u64, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.source.clone(),
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn fill(&mut self, buf: &mut [u8]) -> Result<(), Error> {
        let start = self.offset;
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => {
                    return Err(self.format_error(
                        start,
                        format!("truncated: wanted {} bytes, found {read}", buf.len()),
                    ))
                }
                Ok(n) => read += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(&self.source, e)),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub(crate) fn bytes<const N: usize>(&mut self) -> Result<[u8; N], Error> {
        let mut b = [0u8; N];
        self.fill(&mut b)?;
        Ok(b)
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn u32_be(&mut self) -> Result<u32, Error> {
        Ok(u32::from_be_bytes(self.bytes()?))
    }

    pub(crate) fn u64_le(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn f64_le(&mut self) -> Result<f64, Error> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    /// True when no bytes remain.
    pub(crate) fn at_end(&mut self) -> Result<bool, Error> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(true),
                Ok(_) => return Ok(false),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(&self.source, e)),
            }
        }
    }
}

/// Deterministic seed derivation (SplitMix64 over the parts), used to give
/// every client and round its own independent RNG stream.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix(&mut state);
    for &p in parts {
        state ^= p.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
        out ^= splitmix(&mut state);
    }
    out
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
