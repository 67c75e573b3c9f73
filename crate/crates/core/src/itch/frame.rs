use std::io::{self, Read};

use super::IngestError;

/// One length-prefixed message as it sits in the capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawFrame<'a> {
    /// Byte offset of the length prefix within the decompressed stream.
    pub offset: u64,
    pub payload: &'a [u8],
}

impl RawFrame<'_> {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

/// Reads `u16_be length, payload` frames from a byte source.
pub struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
    offset: u64,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::with_capacity(64),
            offset: 0,
        }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Returns the next frame, or `None` at a clean end of stream.
    pub fn next_frame(&mut self) -> Result<Option<RawFrame<'_>>, IngestError> {
        let start = self.offset;
        let mut prefix = [0u8; 2];
        let got = read_full(&mut self.inner, &mut prefix)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 2 {
            return Err(IngestError::TruncatedFrame {
                offset: start,
                expected: 2,
                got,
            });
        }
        let len = u16::from_be_bytes(prefix) as usize;
        if len == 0 {
            return Err(IngestError::EmptyFrame { offset: start });
        }
        self.buf.resize(len, 0);
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got < len {
            return Err(IngestError::TruncatedFrame {
                offset: start,
                expected: len + 2,
                got: got + 2,
            });
        }
        self.offset += len as u64 + 2;
        Ok(Some(RawFrame {
            offset: start,
            payload: &self.buf,
        }))
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
