//! Per-update scalar attributes of the book edge. Values are reported raw:
//! nothing is divided by a deviation or any other scale estimate.

use crate::book::{Order, OrderBook};
use crate::types::{Price4, Side};

pub const NANOS_PER_HOUR: f64 = 3.6e12;

/// Decimal hours since midnight: 9.75 is 9:45am.
pub fn decimal_hours(time_ns: u64) -> f64 {
    time_ns as f64 / NANOS_PER_HOUR
}

/// `(p_sell + p_buy) / 2` in dollars.
pub fn midprice(p_buy: Option<Price4>, p_sell: Option<Price4>) -> Option<f64> {
    let (b, s) = (p_buy?, p_sell?);
    Some((b.raw() as f64 + s.raw() as f64) / (2.0 * Price4::SCALE))
}

/// `(v_sell - v_buy) / (v_sell + v_buy)`; `None` when both are zero.
pub fn disbalance(v_best_buy: u64, v_best_sell: u64) -> Option<f64> {
    let total = v_best_buy + v_best_sell;
    (total > 0).then(|| (v_best_sell as f64 - v_best_buy as f64) / total as f64)
}

/// Size-weighted mean age, in seconds, of `orders` at `now_ns`.
pub fn time_in_book<'a, I>(orders: I, now_ns: u64) -> Option<f64>
where
    I: IntoIterator<Item = &'a Order>,
{
    let mut weight = 0u64;
    let mut weighted_age_ns = 0u128;
    for o in orders {
        let age = now_ns.saturating_sub(o.origination_ns);
        weight += o.shares as u64;
        weighted_age_ns += o.shares as u128 * age as u128;
    }
    (weight > 0).then(|| weighted_age_ns as f64 / weight as f64 * 1e-9)
}

/// `(p_buy - p_last, p_sell - p_last)` in signed dollars.
pub fn edge_prices(
    p_buy: Option<Price4>,
    p_sell: Option<Price4>,
    p_last: Option<Price4>,
) -> (Option<f64>, Option<f64>) {
    match p_last {
        Some(last) => (p_buy.map(|b| b.minus(last)), p_sell.map(|s| s.minus(last))),
        None => (None, None),
    }
}

/// Book-edge attributes at one update. `None` marks a value that does not
/// exist (empty side, no trade yet), which is distinct from zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttributeSample {
    pub time_ns: u64,
    pub time_decimal_hours: f64,
    pub p_last: Option<Price4>,
    pub p_buy: Option<Price4>,
    pub p_sell: Option<Price4>,
    pub p_buy_minus_last: Option<f64>,
    pub p_sell_minus_last: Option<f64>,
    pub v_best_buy: Option<u64>,
    pub v_best_sell: Option<u64>,
    pub eta_disbalance: Option<f64>,
    pub t_in_book_buy: Option<f64>,
    pub t_in_book_sell: Option<f64>,
}

impl AttributeSample {
    pub fn from_book(book: &OrderBook, time_ns: u64) -> Self {
        let (buy, sell) = book.best_levels();
        let p_buy = buy.map(|l| l.price);
        let p_sell = sell.map(|l| l.price);
        let p_last = book.last_trade_price();
        let (p_buy_minus_last, p_sell_minus_last) = edge_prices(p_buy, p_sell, p_last);
        let v_best_buy = buy.map(|l| l.volume);
        let v_best_sell = sell.map(|l| l.volume);
        AttributeSample {
            time_ns,
            time_decimal_hours: decimal_hours(time_ns),
            p_last,
            p_buy,
            p_sell,
            p_buy_minus_last,
            p_sell_minus_last,
            v_best_buy,
            v_best_sell,
            eta_disbalance: disbalance(v_best_buy.unwrap_or(0), v_best_sell.unwrap_or(0)),
            t_in_book_buy: time_in_book(book.best_orders(Side::Buy), time_ns),
            t_in_book_sell: time_in_book(book.best_orders(Side::Sell), time_ns),
        }
    }

    pub fn midprice(&self) -> Option<f64> {
        midprice(self.p_buy, self.p_sell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Side;

    fn order(shares: u32, origination_ns: u64) -> Order {
        Order {
            order_ref: 0,
            side: Side::Buy,
            price: Price4(100_000),
            shares,
            origination_ns,
        }
    }

    #[test]
    fn midprice_cases() {
        assert_eq!(midprice(Some(Price4(100_000)), Some(Price4(100_200))), Some(10.01));
        assert_eq!(midprice(Some(Price4(100_000)), Some(Price4(100_000))), Some(10.0));
        assert_eq!(midprice(Some(Price4(100_000)), None), None);
    }

    #[test]
    fn disbalance_cases() {
        assert_eq!(disbalance(100, 100), Some(0.0));
        assert_eq!(disbalance(0, 300), Some(1.0));
        assert_eq!(disbalance(300, 100), Some(-0.5));
        assert_eq!(disbalance(0, 0), None);
    }

    #[test]
    fn time_in_book_cases() {
        let s = 1_000_000_000u64;
        assert_eq!(time_in_book(&[order(7, 0)], 5 * s), Some(5.0));
        let orders = [order(100, 0), order(300, 8 * s)];
        assert_eq!(time_in_book(&orders, 10 * s), Some(4.0));
        assert_eq!(time_in_book(&[], 10 * s), None);
    }

    #[test]
    fn edge_price_cases() {
        let (b, s) = edge_prices(Some(Price4(99_900)), Some(Price4(100_100)), Some(Price4(100_000)));
        assert_eq!((b, s), (Some(-0.01), Some(0.01)));
        let (b, s) = edge_prices(Some(Price4(100_000)), Some(Price4(100_300)), Some(Price4(100_000)));
        assert_eq!((b, s), (Some(0.0), Some(0.03)));
        assert_eq!(edge_prices(Some(Price4(1)), Some(Price4(2)), None), (None, None));
    }

    #[test]
    fn decimal_hours_convention() {
        assert_eq!(decimal_hours(35_100 * 1_000_000_000), 9.75);
    }
}
