use crate::itch::MarketEvent;
use crate::types::Side;

use super::{BookError, BookStats, Order, OrderBook, Trade};

/// What the per-modification callback receives: the trades executed since
/// the previous callback and read-only views of both book sides, consistent
/// with the state right after the triggering event.
#[derive(Debug, Clone, Copy)]
pub struct BookUpdate<'a> {
    pub time_ns: u64,
    pub recent_trades: &'a [Trade],
    pub book: &'a OrderBook,
}

impl<'a> BookUpdate<'a> {
    pub fn buy_orders(&self) -> impl Iterator<Item = &'a Order> + 'a {
        self.book.orders(Side::Buy)
    }

    pub fn sell_orders(&self) -> impl Iterator<Item = &'a Order> + 'a {
        self.book.orders(Side::Sell)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub events: u64,
    pub updates: u64,
    pub book: BookStats,
}

/// Drives one book through an event sequence.
#[derive(Debug, Clone)]
pub struct Session {
    book: OrderBook,
    pending: Vec<Trade>,
    events: u64,
    updates: u64,
}

impl Session {
    pub fn new(book: OrderBook) -> Self {
        Self {
            book,
            pending: Vec::new(),
            events: 0,
            updates: 0,
        }
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn into_book(self) -> OrderBook {
        self.book
    }

    /// Applies `ev` and invokes `sink` if the book changed or a trade was
    /// executed. Returns whether `sink` ran.
    pub fn step<F>(&mut self, ev: &MarketEvent, mut sink: F) -> Result<bool, BookError>
    where
        F: FnMut(&BookUpdate<'_>),
    {
        self.events += 1;
        let changed = self.book.apply_event(ev, &mut self.pending)?;
        if !changed && self.pending.is_empty() {
            return Ok(false);
        }
        self.updates += 1;
        sink(&BookUpdate {
            time_ns: ev.timestamp_ns,
            recent_trades: &self.pending,
            book: &self.book,
        });
        self.pending.clear();
        Ok(true)
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats {
            events: self.events,
            updates: self.updates,
            book: self.book.stats().clone(),
        }
    }
}

/// Replays `events` through `book`, calling `sink` after every event that
/// modified the book or executed a trade.
pub fn run_session<'e, I, F>(events: I, book: &mut OrderBook, sink: F) -> Result<SessionStats, BookError>
where
    I: IntoIterator<Item = &'e MarketEvent>,
    F: FnMut(&BookUpdate<'_>),
{
    let mut sink = sink;
    let mut session = Session::new(std::mem::take(book));
    let mut result = Ok(());
    for ev in events {
        if let Err(e) = session.step(ev, &mut sink) {
            result = Err(e);
            break;
        }
    }
    let stats = session.stats();
    *book = session.into_book();
    result.map(|_| stats)
}

/// Fraction of orders that stood at a best level at some time and then
/// left the book by cancellation, among all such orders that left.
///
/// `None` when no best-level order has terminated yet.
pub fn cancellation_ratio(stats: &BookStats) -> Option<f64> {
    let cancelled = stats.touched_best_cancelled;
    let total = cancelled + stats.touched_best_executed;
    (total > 0).then(|| cancelled as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itch::{AddOrder, Message};
    use crate::types::{Price4, Symbol};

    fn add(ts: u64, r: u64, side: Side, px: u32, shares: u32) -> MarketEvent {
        MarketEvent {
            timestamp_ns: ts,
            message: Message::AddOrder(AddOrder {
                order_ref: r,
                side,
                shares,
                stock: Symbol::new("AAPL"),
                price: Price4(px),
                attribution: None,
            }),
        }
    }

    fn exec(ts: u64, r: u64, shares: u32) -> MarketEvent {
        MarketEvent {
            timestamp_ns: ts,
            message: Message::OrderExecuted {
                order_ref: r,
                shares,
                match_number: ts,
            },
        }
    }

    #[test]
    fn adds_produce_one_callback_each() {
        let evs: Vec<_> = (0..5).map(|i| add(i, i + 1, Side::Buy, 100_000 - i as u32 * 100, 10)).collect();
        let mut book = OrderBook::new(Symbol::new("AAPL"));
        let mut calls = Vec::new();
        let stats = run_session(&evs, &mut book, |u| calls.push(u.recent_trades.len())).unwrap();
        assert_eq!(calls, vec![0; 5]);
        assert_eq!(stats.updates, 5);
        assert_eq!(book.order_count(), 5);
    }

    #[test]
    fn full_execution_second_callback_has_trade() {
        let evs = vec![add(1, 1, Side::Sell, 100_100, 50), exec(2, 1, 50)];
        let mut book = OrderBook::new(Symbol::new("AAPL"));
        let mut seen: Vec<Vec<Trade>> = Vec::new();
        run_session(&evs, &mut book, |u| seen.push(u.recent_trades.to_vec())).unwrap();
        assert_eq!(seen.len(), 2);
        assert!(seen[0].is_empty());
        assert_eq!(seen[1].len(), 1);
        assert_eq!(seen[1][0].shares, 50);
        assert_eq!(book.order_count(), 0);
    }

    #[test]
    fn update_views_reflect_post_event_state() {
        let evs = vec![add(1, 1, Side::Buy, 100_000, 10), add(2, 2, Side::Sell, 100_100, 20)];
        let mut book = OrderBook::new(Symbol::new("AAPL"));
        let mut sizes = Vec::new();
        run_session(&evs, &mut book, |u| {
            sizes.push((u.buy_orders().count(), u.sell_orders().count()));
        })
        .unwrap();
        assert_eq!(sizes, vec![(1, 0), (1, 1)]);
    }

    #[test]
    fn ratio_extremes() {
        let mut s = BookStats::default();
        assert_eq!(cancellation_ratio(&s), None);
        s.touched_best_executed = 4;
        assert_eq!(cancellation_ratio(&s), Some(0.0));
        s.touched_best_executed = 0;
        s.touched_best_cancelled = 3;
        assert_eq!(cancellation_ratio(&s), Some(1.0));
    }

    #[test]
    fn fatal_error_stops_session() {
        let evs = vec![add(1, 1, Side::Buy, 100_000, 10), exec(2, 1, 11), add(3, 2, Side::Buy, 1, 1)];
        let mut book = OrderBook::new(Symbol::new("AAPL"));
        let err = run_session(&evs, &mut book, |_| {}).unwrap_err();
        assert_eq!(
            err,
            BookError::Overdecrement {
                order_ref: 1,
                remaining: 10,
                requested: 11
            }
        );
        assert_eq!(book.order_count(), 1);
    }
}
