//! Order book reconstruction from NASDAQ TotalView-ITCH 4.1 captures and
//! unnormalized, time-dependent order book attributes.
//!
//! The pipeline is `itch` (decode) → `book` (full-depth reconstruction,
//! one callback per modification) → `attributes`, `flow` and `edge`
//! (per-update values) → `dump` (CSV rows). `synth` generates spike-driven
//! trade flows and internally consistent event streams for validation.

pub mod attributes;
pub mod batch;
pub mod book;
pub mod dump;
pub mod edge;
pub mod flow;
pub mod itch;
pub mod linalg;
pub mod synth;
pub mod types;

pub use book::{BookUpdate, Order, OrderBook, Session, SessionStats, Trade};
pub use itch::{MarketEvent, Message};
pub use types::{Price4, Side, Symbol};
