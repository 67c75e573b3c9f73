//! Small domain newtypes shared across the crate.

use std::fmt;

/// Price in units of 1/10000 USD, the ITCH fixed-point convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price4(pub u32);

impl Price4 {
    pub const SCALE: f64 = 10_000.0;

    pub fn from_dollars(d: f64) -> Self {
        Price4((d * Self::SCALE).round() as u32)
    }

    #[inline]
    pub fn raw(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn dollars(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    /// Signed difference `self - other` in dollars.
    #[inline]
    pub fn minus(self, other: Price4) -> f64 {
        (self.0 as i64 - other.0 as i64) as f64 / Self::SCALE
    }

    /// Absolute distance in dollars.
    #[inline]
    pub fn distance(self, other: Price4) -> f64 {
        self.0.abs_diff(other.0) as f64 / Self::SCALE
    }
}

impl fmt::Display for Price4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:04}", self.0 / 10_000, self.0 % 10_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn from_byte(b: u8) -> Option<Side> {
        match b {
            b'B' => Some(Side::Buy),
            b'S' => Some(Side::Sell),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        match self {
            Side::Buy => b'B',
            Side::Sell => b'S',
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

/// Eight-character, right space-padded stock symbol.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub [u8; 8]);

impl Symbol {
    /// Pads `s` with spaces; names longer than eight bytes are truncated.
    pub fn new(s: &str) -> Self {
        let mut raw = [b' '; 8];
        for (dst, src) in raw.iter_mut().zip(s.trim().bytes()) {
            *dst = src;
        }
        Symbol(raw)
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("").trim_end()
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({:?})", self.as_str())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_display_is_exact() {
        assert_eq!(Price4(7_000_000).to_string(), "700.0000");
        assert_eq!(Price4(7_000_000).dollars(), 700.0);
        assert_eq!(Price4(99_990).to_string(), "9.9990");
    }

    #[test]
    fn price_signed_difference() {
        assert_eq!(Price4(99_900).minus(Price4(100_000)), -0.01);
        assert_eq!(Price4(100_100).minus(Price4(100_000)), 0.01);
        assert_eq!(Price4(99_900).distance(Price4(100_000)), 0.01);
    }

    #[test]
    fn symbol_padding() {
        let s = Symbol::new("AAPL");
        assert_eq!(&s.0, b"AAPL    ");
        assert_eq!(s.as_str(), "AAPL");
        assert_eq!(Symbol::new("AAPL    "), s);
    }
}
