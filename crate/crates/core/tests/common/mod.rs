//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use lobflow::book::{MatchKind, Order, OrderBook, Trade};
use lobflow::edge::PriceMeasure;
use lobflow::{MarketEvent, Message, Price4, Side};
use rand::Rng;

/// Order book kept as one flat list in arrival order and rescanned on
/// every event.
#[derive(Debug, Default)]
pub struct NaiveBook {
    pub orders: Vec<Order>,
    pub trades: Vec<Trade>,
}

impl NaiveBook {
    fn find(&self, order_ref: u64) -> Option<usize> {
        self.orders.iter().position(|o| o.order_ref == order_ref)
    }

    fn take(&mut self, order_ref: u64, shares: Option<u32>) -> Result<Option<Order>, String> {
        let Some(i) = self.find(order_ref) else {
            return Ok(None);
        };
        let before = self.orders[i];
        let n = shares.unwrap_or(before.shares);
        if n > before.shares {
            return Err(format!("overdecrement of {order_ref}"));
        }
        self.orders[i].shares -= n;
        if self.orders[i].shares == 0 {
            self.orders.remove(i);
        }
        Ok(Some(before))
    }

    fn trade(&mut self, time_ns: u64, price: Price4, shares: u32, resting: Side) {
        let match_kind = match resting {
            Side::Buy => MatchKind::SellAggressor,
            Side::Sell => MatchKind::BuyAggressor,
        };
        self.trades.push(Trade {
            time_ns,
            price,
            shares,
            match_kind,
        });
    }

    pub fn apply(&mut self, ev: &MarketEvent) -> Result<(), String> {
        let now = ev.timestamp_ns;
        match ev.message {
            Message::AddOrder(a) => {
                if a.shares == 0 {
                    return Ok(());
                }
                if self.find(a.order_ref).is_some() {
                    return Err(format!("duplicate {}", a.order_ref));
                }
                self.orders.push(Order {
                    order_ref: a.order_ref,
                    side: a.side,
                    price: a.price,
                    shares: a.shares,
                    origination_ns: now,
                });
            }
            Message::OrderExecuted { order_ref, shares, .. } if shares > 0 => {
                if let Some(o) = self.take(order_ref, Some(shares))? {
                    self.trade(now, o.price, shares, o.side);
                }
            }
            Message::OrderExecutedWithPrice {
                order_ref,
                shares,
                printable,
                price,
                ..
            } if shares > 0 => {
                if let Some(o) = self.take(order_ref, Some(shares))? {
                    if printable == b'Y' {
                        self.trade(now, price, shares, o.side);
                    }
                }
            }
            Message::OrderCancel { order_ref, shares } if shares > 0 => {
                self.take(order_ref, Some(shares))?;
            }
            Message::OrderDelete { order_ref } => {
                self.take(order_ref, None)?;
            }
            Message::OrderReplace {
                old_ref,
                new_ref,
                shares,
                price,
            } => {
                if new_ref != old_ref && self.find(new_ref).is_some() {
                    return Err(format!("duplicate {new_ref}"));
                }
                if let Some(old) = self.take(old_ref, None)? {
                    if shares > 0 {
                        self.orders.push(Order {
                            order_ref: new_ref,
                            side: old.side,
                            price,
                            shares,
                            origination_ns: now,
                        });
                    }
                }
            }
            Message::NonDisplayedTrade {
                side, shares, price, ..
            } if shares > 0 => self.trade(now, price, shares, side),
            _ => {}
        }
        Ok(())
    }

    /// Levels of `side` from the best price outward, orders in arrival order.
    pub fn levels(&self, side: Side) -> Vec<(Price4, u64, Vec<Order>)> {
        let mut prices: Vec<Price4> = self.orders.iter().filter(|o| o.side == side).map(|o| o.price).collect();
        prices.sort();
        prices.dedup();
        if side == Side::Buy {
            prices.reverse();
        }
        prices
            .into_iter()
            .map(|p| {
                let orders: Vec<Order> = self.orders.iter().filter(|o| o.side == side && o.price == p).copied().collect();
                let volume = orders.iter().map(|o| o.shares as u64).sum();
                (p, volume, orders)
            })
            .collect()
    }
}

pub fn book_levels(book: &OrderBook, side: Side) -> Vec<(Price4, u64, Vec<Order>)> {
    book.levels(side).map(|(l, o)| (l.price, l.volume, o.to_vec())).collect()
}

/// First difference between the two books, if any.
pub fn compare_books(book: &OrderBook, naive: &NaiveBook) -> Option<String> {
    for side in [Side::Buy, Side::Sell] {
        let a = book_levels(book, side);
        let b = naive.levels(side);
        if a != b {
            let at = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
            return Some(format!("{side:?} side differs at level {at} ({} vs {} levels)", a.len(), b.len()));
        }
    }
    if book.order_count() != naive.orders.len() {
        return Some(format!("order count {} vs {}", book.order_count(), naive.orders.len()));
    }
    None
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Orthonormal shifted Legendre values `√(2j+1) P_j(2x − 1)` for `j < n`.
pub fn shifted_legendre(n: usize, x: f64) -> Vec<f64> {
    let s = 2.0 * x - 1.0;
    let mut p = vec![0.0; n];
    if n > 0 {
        p[0] = 1.0;
    }
    if n > 1 {
        p[1] = s;
    }
    for k in 2..n {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * s * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    p.iter().enumerate().map(|(j, v)| v * ((2 * j + 1) as f64).sqrt()).collect()
}

/// Random measure with `s` levels on a grid of `grid` steps over
/// `[0, cutoff]`, the first level at 0. Volumes are log-uniform over four
/// decades, ages uniform over an hour.
pub fn random_measure<R: Rng>(rng: &mut R, s: usize, grid: usize, cutoff: f64) -> PriceMeasure {
    assert!(s >= 1 && s <= grid + 1);
    let mut ticks: Vec<usize> = rand::seq::index::sample(rng, grid, s - 1).into_iter().map(|k| k + 1).collect();
    ticks.sort();
    let mut y = vec![0.0];
    y.extend(ticks.iter().map(|&k| k as f64 * cutoff / grid as f64));
    let w = (0..s).map(|_| 10f64.powf(rng.random_range(0.0..4.0)).round().max(1.0)).collect();
    let a = (0..s).map(|_| rng.random_range(0.0..3600.0)).collect();
    PriceMeasure {
        side: Side::Sell,
        y,
        w,
        a,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
