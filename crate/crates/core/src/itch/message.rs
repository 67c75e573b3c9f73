//! TotalView-ITCH 4.1 message layouts and the payload decoder.
//!
//! All integer fields are big-endian. Every message except `T` starts with
//! the type byte followed by a 4-byte nanoseconds-within-second field; `T`
//! carries the seconds-since-midnight that those nanoseconds are relative to.

use crate::types::{Price4, Side, Symbol};

use super::DecodeError;

pub const NANOS_PER_SECOND: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    SystemEvent,
    Seconds,
    AddOrder,
    AddOrderMpid,
    OrderExecuted,
    OrderExecutedWithPrice,
    OrderCancel,
    OrderDelete,
    OrderReplace,
    NonDisplayedTrade,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddOrder {
    pub order_ref: u64,
    pub side: Side,
    pub shares: u32,
    pub stock: Symbol,
    pub price: Price4,
    /// Market participant attribution, present for `F` messages only.
    pub attribution: Option<[u8; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Message {
    Seconds {
        seconds: u32,
    },
    SystemEvent {
        code: u8,
    },
    AddOrder(AddOrder),
    OrderExecuted {
        order_ref: u64,
        shares: u32,
        match_number: u64,
    },
    OrderExecutedWithPrice {
        order_ref: u64,
        shares: u32,
        match_number: u64,
        printable: u8,
        price: Price4,
    },
    OrderCancel {
        order_ref: u64,
        shares: u32,
    },
    OrderDelete {
        order_ref: u64,
    },
    OrderReplace {
        old_ref: u64,
        new_ref: u64,
        shares: u32,
        price: Price4,
    },
    NonDisplayedTrade {
        /// Always 0 in captures after October 2010.
        order_ref: u64,
        side: Side,
        shares: u32,
        stock: Symbol,
        price: Price4,
        match_number: u64,
    },
    Other {
        code: u8,
    },
}

impl Message {
    pub fn kind(&self) -> EventKind {
        match self {
            Message::Seconds { .. } => EventKind::Seconds,
            Message::SystemEvent { .. } => EventKind::SystemEvent,
            Message::AddOrder(a) if a.attribution.is_some() => EventKind::AddOrderMpid,
            Message::AddOrder(_) => EventKind::AddOrder,
            Message::OrderExecuted { .. } => EventKind::OrderExecuted,
            Message::OrderExecutedWithPrice { .. } => EventKind::OrderExecutedWithPrice,
            Message::OrderCancel { .. } => EventKind::OrderCancel,
            Message::OrderDelete { .. } => EventKind::OrderDelete,
            Message::OrderReplace { .. } => EventKind::OrderReplace,
            Message::NonDisplayedTrade { .. } => EventKind::NonDisplayedTrade,
            Message::Other { .. } => EventKind::Other,
        }
    }

    pub fn type_code(&self) -> u8 {
        match self {
            Message::Seconds { .. } => b'T',
            Message::SystemEvent { .. } => b'S',
            Message::AddOrder(a) if a.attribution.is_some() => b'F',
            Message::AddOrder(_) => b'A',
            Message::OrderExecuted { .. } => b'E',
            Message::OrderExecutedWithPrice { .. } => b'C',
            Message::OrderCancel { .. } => b'X',
            Message::OrderDelete { .. } => b'D',
            Message::OrderReplace { .. } => b'U',
            Message::NonDisplayedTrade { .. } => b'P',
            Message::Other { code } => *code,
        }
    }

    /// The order reference an order-level message is keyed by (`old_ref`
    /// for replaces). `None` for messages that do not address an order.
    pub fn order_ref(&self) -> Option<u64> {
        match *self {
            Message::AddOrder(a) => Some(a.order_ref),
            Message::OrderExecuted { order_ref, .. }
            | Message::OrderExecutedWithPrice { order_ref, .. }
            | Message::OrderCancel { order_ref, .. }
            | Message::OrderDelete { order_ref } => Some(order_ref),
            Message::OrderReplace { old_ref, .. } => Some(old_ref),
            _ => None,
        }
    }

    /// Fixed payload length for a type code, `None` for unknown codes.
    pub fn payload_len(code: u8) -> Option<usize> {
        Some(match code {
            b'T' => 5,
            b'S' => 6,
            b'A' => 30,
            b'F' => 34,
            b'E' => 25,
            b'C' => 30,
            b'X' => 17,
            b'D' => 13,
            b'U' => 29,
            b'P' => 38,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarketEvent {
    /// Nanoseconds since midnight.
    pub timestamp_ns: u64,
    pub message: Message,
}

impl MarketEvent {
    pub fn kind(&self) -> EventKind {
        self.message.kind()
    }

    /// Decimal hours since midnight (9.75 is 9:45am).
    pub fn time_hours(&self) -> f64 {
        self.timestamp_ns as f64 / 3.6e12
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    #[inline]
    fn u8(&mut self) -> u8 {
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    #[inline]
    fn u32(&mut self) -> u32 {
        let v = u32::from_be_bytes(self.buf[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    #[inline]
    fn u64(&mut self) -> u64 {
        let v = u64::from_be_bytes(self.buf[self.pos..self.pos + 8].try_into().unwrap());
        self.pos += 8;
        v
    }

    #[inline]
    fn alpha<const N: usize>(&mut self) -> [u8; N] {
        let v: [u8; N] = self.buf[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        v
    }

    fn side(&mut self, code: u8) -> Result<Side, DecodeError> {
        let b = self.u8();
        Side::from_byte(b).ok_or(DecodeError::InvalidSide {
            code: code as char,
            byte: b,
        })
    }
}

/// Decodes one payload. `seconds_base` is the value of the most recent `T`
/// message; for a `T` payload the event is stamped at its own second.
pub fn decode_message(payload: &[u8], seconds_base: u32) -> Result<MarketEvent, DecodeError> {
    let code = *payload.first().ok_or(DecodeError::Empty)?;
    let base_ns = seconds_base as u64 * NANOS_PER_SECOND;

    let Some(expected) = Message::payload_len(code) else {
        let nanos = if payload.len() >= 5 {
            u32::from_be_bytes(payload[1..5].try_into().unwrap()) as u64
        } else {
            0
        };
        return Ok(MarketEvent {
            timestamp_ns: base_ns + nanos,
            message: Message::Other { code },
        });
    };
    if payload.len() != expected {
        return Err(DecodeError::LengthMismatch {
            code: code as char,
            expected,
            actual: payload.len(),
        });
    }

    let mut c = Cursor { buf: payload, pos: 1 };
    if code == b'T' {
        let seconds = c.u32();
        return Ok(MarketEvent {
            timestamp_ns: seconds as u64 * NANOS_PER_SECOND,
            message: Message::Seconds { seconds },
        });
    }

    let timestamp_ns = base_ns + c.u32() as u64;
    let message = match code {
        b'S' => Message::SystemEvent { code: c.u8() },
        b'A' | b'F' => {
            let order_ref = c.u64();
            let side = c.side(code)?;
            let shares = c.u32();
            let stock = Symbol(c.alpha::<8>());
            let price = Price4(c.u32());
            let attribution = (code == b'F').then(|| c.alpha::<4>());
            Message::AddOrder(AddOrder {
                order_ref,
                side,
                shares,
                stock,
                price,
                attribution,
            })
        }
        b'E' => Message::OrderExecuted {
            order_ref: c.u64(),
            shares: c.u32(),
            match_number: c.u64(),
        },
        b'C' => Message::OrderExecutedWithPrice {
            order_ref: c.u64(),
            shares: c.u32(),
            match_number: c.u64(),
            printable: c.u8(),
            price: Price4(c.u32()),
        },
        b'X' => Message::OrderCancel {
            order_ref: c.u64(),
            shares: c.u32(),
        },
        b'D' => Message::OrderDelete { order_ref: c.u64() },
        b'U' => Message::OrderReplace {
            old_ref: c.u64(),
            new_ref: c.u64(),
            shares: c.u32(),
            price: Price4(c.u32()),
        },
        b'P' => {
            let order_ref = c.u64();
            let side = c.side(code)?;
            Message::NonDisplayedTrade {
                order_ref,
                side,
                shares: c.u32(),
                stock: Symbol(c.alpha::<8>()),
                price: Price4(c.u32()),
                match_number: c.u64(),
            }
        }
        _ => unreachable!("payload_len covers every known code"),
    };
    debug_assert_eq!(c.pos, payload.len());
    Ok(MarketEvent {
        timestamp_ns,
        message,
    })
}

/// Stateful decoder tracking the seconds base across `T` messages.
#[derive(Debug, Default, Clone)]
pub struct Decoder {
    seconds_base: u32,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn seconds_base(&self) -> u32 {
        self.seconds_base
    }

    pub fn decode(&mut self, payload: &[u8]) -> Result<MarketEvent, DecodeError> {
        let ev = decode_message(payload, self.seconds_base)?;
        if let Message::Seconds { seconds } = ev.message {
            self.seconds_base = seconds;
        }
        Ok(ev)
    }
}
