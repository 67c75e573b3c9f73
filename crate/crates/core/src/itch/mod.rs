//! TotalView-ITCH 4.1 capture ingestion.
//!
//! A capture is a gzip stream of `u16_be length, payload` frames. Payloads
//! are decoded into nanosecond-stamped [`MarketEvent`]s; an optional symbol
//! filter keeps only order-level events whose order reference was bound to
//! one of the wanted symbols by its add message.

mod encode;
mod frame;
mod message;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::types::Symbol;

pub use encode::{create_capture, encode_message, write_capture, write_frame, CaptureWriter, ItchWriter};
pub use frame::{FrameReader, RawFrame};
pub use message::{
    decode_message, AddOrder, Decoder, EventKind, MarketEvent, Message, NANOS_PER_SECOND,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("empty payload")]
    Empty,
    #[error("message '{code}' has {actual} bytes, layout requires {expected}")]
    LengthMismatch {
        code: char,
        expected: usize,
        actual: usize,
    },
    #[error("message '{code}' has invalid side byte 0x{byte:02x}")]
    InvalidSide { code: char, byte: u8 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("truncated frame at byte {offset}: needed {expected} bytes, stream ended after {got}")]
    TruncatedFrame {
        offset: u64,
        expected: usize,
        got: usize,
    },
    #[error("zero-length frame at byte {offset}")]
    EmptyFrame { offset: u64 },
    #[error("at byte {offset}: {source}")]
    Decode {
        offset: u64,
        #[source]
        source: DecodeError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    /// Byte offset in the decompressed stream where the problem was found.
    pub fn offset(&self) -> Option<u64> {
        match self {
            IngestError::TruncatedFrame { offset, .. }
            | IngestError::EmptyFrame { offset }
            | IngestError::Decode { offset, .. } => Some(*offset),
            IngestError::Io(_) => None,
        }
    }
}

/// Keeps order-level events for a set of symbols.
///
/// The ref→symbol binding learned from add messages is retained for the
/// whole run so that executions, cancels and replaces can be routed.
#[derive(Debug, Clone)]
pub struct SymbolFilter {
    symbols: HashSet<Symbol>,
    bindings: HashMap<u64, Symbol>,
}

impl SymbolFilter {
    pub fn new<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        Self {
            symbols: symbols.into_iter().collect(),
            bindings: HashMap::new(),
        }
    }

    /// Symbol bound to an order reference, if it belongs to the filter.
    pub fn symbol_of(&self, order_ref: u64) -> Option<Symbol> {
        self.bindings.get(&order_ref).copied()
    }

    /// Decides whether `ev` passes and updates the binding table.
    pub fn admit(&mut self, ev: &MarketEvent) -> bool {
        match ev.message {
            Message::Seconds { .. } | Message::SystemEvent { .. } | Message::Other { .. } => true,
            Message::AddOrder(a) => {
                if self.symbols.contains(&a.stock) {
                    self.bindings.insert(a.order_ref, a.stock);
                    true
                } else {
                    false
                }
            }
            Message::NonDisplayedTrade { stock, .. } => self.symbols.contains(&stock),
            Message::OrderReplace {
                old_ref, new_ref, ..
            } => match self.bindings.get(&old_ref).copied() {
                Some(sym) => {
                    self.bindings.insert(new_ref, sym);
                    true
                }
                None => false,
            },
            Message::OrderExecuted { order_ref, .. }
            | Message::OrderExecutedWithPrice { order_ref, .. }
            | Message::OrderCancel { order_ref, .. }
            | Message::OrderDelete { order_ref } => self.bindings.contains_key(&order_ref),
        }
    }
}

/// Decoded, optionally filtered event sequence over a byte source.
///
/// Yields `Err` once on the first fatal problem and then ends.
pub struct EventStream<R> {
    frames: FrameReader<R>,
    decoder: Decoder,
    filter: Option<SymbolFilter>,
    frames_read: u64,
    done: bool,
}

impl<R: Read> EventStream<R> {
    pub fn new(inner: R, filter: Option<SymbolFilter>) -> Self {
        Self {
            frames: FrameReader::new(inner),
            decoder: Decoder::new(),
            filter,
            frames_read: 0,
            done: false,
        }
    }

    pub fn frames_read(&self) -> u64 {
        self.frames_read
    }

    pub fn symbol_filter(&self) -> Option<&SymbolFilter> {
        self.filter.as_ref()
    }

    fn next_event(&mut self) -> Result<Option<MarketEvent>, IngestError> {
        loop {
            let Some(frame) = self.frames.next_frame()? else {
                return Ok(None);
            };
            self.frames_read += 1;
            let offset = frame.offset;
            let ev = self
                .decoder
                .decode(frame.payload)
                .map_err(|source| IngestError::Decode { offset, source })?;
            if let Some(f) = &mut self.filter {
                if !f.admit(&ev) {
                    continue;
                }
            }
            return Ok(Some(ev));
        }
    }
}

impl<R: Read> Iterator for EventStream<R> {
    type Item = Result<MarketEvent, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_event() {
            Ok(Some(ev)) => Some(Ok(ev)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub type CaptureReader = BufReader<flate2::read::MultiGzDecoder<BufReader<File>>>;

/// Opens a gzip-compressed capture and streams its events in file order.
pub fn open_events(
    path: &Path,
    symbols: Option<&[Symbol]>,
) -> Result<EventStream<CaptureReader>, IngestError> {
    let file = File::open(path)?;
    let gz = flate2::read::MultiGzDecoder::new(BufReader::with_capacity(1 << 16, file));
    let filter = symbols.map(|s| SymbolFilter::new(s.iter().copied()));
    Ok(EventStream::new(BufReader::with_capacity(1 << 16, gz), filter))
}
