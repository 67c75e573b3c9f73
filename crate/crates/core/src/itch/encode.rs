//! Encoder for the supported message types, the inverse of
//! [`decode_message`](super::decode_message). Used to write synthetic
//! captures and golden test payloads.

use std::io::{self, Write};

use super::message::{MarketEvent, Message, NANOS_PER_SECOND};

/// Encodes an event to its payload bytes. The nanoseconds field is taken
/// as `timestamp_ns mod 1e9`; the caller is responsible for having written
/// the matching `T` message first.
///
/// Returns `None` for [`Message::Other`], which has no defined layout.
pub fn encode_message(ev: &MarketEvent) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(38);
    let code = ev.message.type_code();
    out.push(code);
    let nanos = (ev.timestamp_ns % NANOS_PER_SECOND) as u32;
    match ev.message {
        Message::Seconds { seconds } => out.extend_from_slice(&seconds.to_be_bytes()),
        Message::SystemEvent { code } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.push(code);
        }
        Message::AddOrder(a) => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&a.order_ref.to_be_bytes());
            out.push(a.side.as_byte());
            out.extend_from_slice(&a.shares.to_be_bytes());
            out.extend_from_slice(&a.stock.0);
            out.extend_from_slice(&a.price.0.to_be_bytes());
            if let Some(mpid) = a.attribution {
                out.extend_from_slice(&mpid);
            }
        }
        Message::OrderExecuted {
            order_ref,
            shares,
            match_number,
        } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&order_ref.to_be_bytes());
            out.extend_from_slice(&shares.to_be_bytes());
            out.extend_from_slice(&match_number.to_be_bytes());
        }
        Message::OrderExecutedWithPrice {
            order_ref,
            shares,
            match_number,
            printable,
            price,
        } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&order_ref.to_be_bytes());
            out.extend_from_slice(&shares.to_be_bytes());
            out.extend_from_slice(&match_number.to_be_bytes());
            out.push(printable);
            out.extend_from_slice(&price.0.to_be_bytes());
        }
        Message::OrderCancel { order_ref, shares } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&order_ref.to_be_bytes());
            out.extend_from_slice(&shares.to_be_bytes());
        }
        Message::OrderDelete { order_ref } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&order_ref.to_be_bytes());
        }
        Message::OrderReplace {
            old_ref,
            new_ref,
            shares,
            price,
        } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&old_ref.to_be_bytes());
            out.extend_from_slice(&new_ref.to_be_bytes());
            out.extend_from_slice(&shares.to_be_bytes());
            out.extend_from_slice(&price.0.to_be_bytes());
        }
        Message::NonDisplayedTrade {
            order_ref,
            side,
            shares,
            stock,
            price,
            match_number,
        } => {
            out.extend_from_slice(&nanos.to_be_bytes());
            out.extend_from_slice(&order_ref.to_be_bytes());
            out.push(side.as_byte());
            out.extend_from_slice(&shares.to_be_bytes());
            out.extend_from_slice(&stock.0);
            out.extend_from_slice(&price.0.to_be_bytes());
            out.extend_from_slice(&match_number.to_be_bytes());
        }
        Message::Other { .. } => return None,
    }
    debug_assert_eq!(Some(out.len()), Message::payload_len(code));
    Some(out)
}

/// Writes `u16_be length` followed by the payload.
pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u16::try_from(payload.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "payload exceeds 65535 bytes"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)
}

/// Length-prefixed ITCH writer. Wrap the sink in a gzip encoder to produce
/// a capture readable by [`open_events`](super::open_events).
pub struct ItchWriter<W: Write> {
    inner: W,
    frames: u64,
}

impl<W: Write> ItchWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner, frames: 0 }
    }

    /// Encodes and writes one event; `Other` events are skipped and
    /// reported as `false`.
    pub fn write_event(&mut self, ev: &MarketEvent) -> io::Result<bool> {
        match encode_message(ev) {
            Some(p) => {
                write_frame(&mut self.inner, &p)?;
                self.frames += 1;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Writes events to a gzip-compressed capture file.
/// Gzip stream of frames written to a file.
pub type CaptureWriter = ItchWriter<flate2::write::GzEncoder<io::BufWriter<std::fs::File>>>;

/// Creates a gzip capture file at `path`.
pub fn create_capture(path: &std::path::Path) -> io::Result<CaptureWriter> {
    let file = std::fs::File::create(path)?;
    let gz = flate2::write::GzEncoder::new(io::BufWriter::new(file), flate2::Compression::fast());
    Ok(ItchWriter::new(gz))
}

impl CaptureWriter {
    /// Completes the gzip stream; returns the number of frames written.
    pub fn finish(self) -> io::Result<u64> {
        let n = self.frames_written();
        self.into_inner().finish()?.flush()?;
        Ok(n)
    }
}

/// Writes `events` to a gzip capture; returns the number of frames.
pub fn write_capture<'a, I>(path: &std::path::Path, events: I) -> io::Result<u64>
where
    I: IntoIterator<Item = &'a MarketEvent>,
{
    let mut w = create_capture(path)?;
    for ev in events {
        w.write_event(ev)?;
    }
    w.finish()
}
