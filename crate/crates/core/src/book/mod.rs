//! Full-depth, per-symbol limit order book.
//!
//! Each side is a price-ordered map of levels; a level keeps its orders in
//! arrival order together with the cached level volume. An index from order
//! reference to (side, price) makes execute/cancel/delete routing O(log L).

mod session;

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::itch::{MarketEvent, Message};
use crate::types::{Price4, Side, Symbol};

pub use session::{cancellation_ratio, run_session, BookUpdate, Session, SessionStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub order_ref: u64,
    pub side: Side,
    pub price: Price4,
    pub shares: u32,
    pub origination_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchKind {
    BuyAggressor,
    SellAggressor,
    Unknown,
}

impl MatchKind {
    /// Aggressor implied by the side of the resting order that was hit.
    pub fn against_resting(side: Side) -> MatchKind {
        match side {
            Side::Buy => MatchKind::SellAggressor,
            Side::Sell => MatchKind::BuyAggressor,
        }
    }
}

/// An executed volume atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trade {
    pub time_ns: u64,
    pub price: Price4,
    pub shares: u32,
    pub match_kind: MatchKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("order {order_ref}: {requested} shares removed but only {remaining} resting")]
    Overdecrement {
        order_ref: u64,
        remaining: u32,
        requested: u32,
    },
    #[error("order {order_ref} added while already resting")]
    DuplicateRef { order_ref: u64 },
}

/// Aggregate view of one price level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSummary {
    pub price: Price4,
    pub volume: u64,
    pub orders: usize,
}

/// Counters maintained while applying events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BookStats {
    pub adds: u64,
    pub executions: u64,
    pub cancels: u64,
    pub deletes: u64,
    pub replaces: u64,
    pub hidden_trades: u64,
    pub trades: u64,
    pub trade_volume: u64,
    /// Execute/cancel/delete/replace for an order this book never saw.
    pub unknown_refs: u64,
    /// Events after which best buy ≥ best sell.
    pub crossed_after_event: u64,
    pub time_reversals: u64,
    /// Orders that stood at a best level and then left by cancel, delete
    /// or replace.
    pub touched_best_cancelled: u64,
    /// Orders that stood at a best level and then were fully executed.
    pub touched_best_executed: u64,
}

/// Orders at one price in arrival order; `touched[i]` records whether
/// `orders[i]` has stood at the best level.
#[derive(Debug, Clone, Default)]
struct Level {
    volume: u64,
    orders: Vec<Order>,
    touched: Vec<bool>,
}

impl Level {
    fn position(&self, order_ref: u64) -> usize {
        self.orders
            .iter()
            .position(|o| o.order_ref == order_ref)
            .expect("index and level out of sync")
    }

    fn summary(&self, price: Price4) -> LevelSummary {
        LevelSummary {
            price,
            volume: self.volume,
            orders: self.orders.len(),
        }
    }
}

enum Termination {
    Executed,
    Cancelled,
}

#[derive(Debug, Clone, Default)]
pub struct OrderBook {
    symbol: Option<Symbol>,
    bids: BTreeMap<Reverse<Price4>, Level>,
    asks: BTreeMap<Price4, Level>,
    index: HashMap<u64, (Side, Price4)>,
    last_trade_price: Option<Price4>,
    last_time_ns: u64,
    marked_best: [Option<Price4>; 2],
    stats: BookStats,
}

impl OrderBook {
    pub fn new(symbol: Symbol) -> Self {
        Self {
            symbol: Some(symbol),
            ..Default::default()
        }
    }

    pub fn symbol(&self) -> Option<Symbol> {
        self.symbol
    }

    pub fn stats(&self) -> &BookStats {
        &self.stats
    }

    /// Price of the most recent execution (P_last).
    pub fn last_trade_price(&self) -> Option<Price4> {
        self.last_trade_price
    }

    pub fn last_time_ns(&self) -> u64 {
        self.last_time_ns
    }

    pub fn order_count(&self) -> usize {
        self.index.len()
    }

    pub fn get(&self, order_ref: u64) -> Option<&Order> {
        let &(side, price) = self.index.get(&order_ref)?;
        let level = self.level(side, price)?;
        level.orders.iter().find(|o| o.order_ref == order_ref)
    }

    fn level(&self, side: Side, price: Price4) -> Option<&Level> {
        match side {
            Side::Buy => self.bids.get(&Reverse(price)),
            Side::Sell => self.asks.get(&price),
        }
    }

    fn level_mut(&mut self, side: Side, price: Price4) -> Option<&mut Level> {
        match side {
            Side::Buy => self.bids.get_mut(&Reverse(price)),
            Side::Sell => self.asks.get_mut(&price),
        }
    }

    fn best_level(&self, side: Side) -> Option<(Price4, &Level)> {
        match side {
            Side::Buy => self.bids.iter().next().map(|(p, l)| (p.0, l)),
            Side::Sell => self.asks.iter().next().map(|(p, l)| (*p, l)),
        }
    }

    pub fn best_price(&self, side: Side) -> Option<Price4> {
        self.best_level(side).map(|(p, _)| p)
    }

    pub fn best(&self, side: Side) -> Option<LevelSummary> {
        self.best_level(side).map(|(price, l)| l.summary(price))
    }

    /// `(best_buy, best_sell)`; a side is `None` when empty.
    pub fn best_levels(&self) -> (Option<LevelSummary>, Option<LevelSummary>) {
        (self.best(Side::Buy), self.best(Side::Sell))
    }

    /// Orders resting at the best price of `side`, in arrival order.
    pub fn best_orders(&self, side: Side) -> impl Iterator<Item = &Order> + '_ {
        self.best_level(side)
            .into_iter()
            .flat_map(|(_, l)| l.orders.iter())
    }

    /// Levels from the best price outward.
    pub fn levels(&self, side: Side) -> Box<dyn Iterator<Item = (LevelSummary, &[Order])> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.iter().map(|(p, l)| (l.summary(p.0), &l.orders[..]))),
            Side::Sell => Box::new(self.asks.iter().map(|(p, l)| (l.summary(*p), &l.orders[..]))),
        }
    }

    /// All orders on `side`, best price first, arrival order within a level.
    pub fn orders(&self, side: Side) -> Box<dyn Iterator<Item = &Order> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.values().flat_map(|l| l.orders.iter())),
            Side::Sell => Box::new(self.asks.values().flat_map(|l| l.orders.iter())),
        }
    }

    pub fn side_volume(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.bids.values().map(|l| l.volume).sum(),
            Side::Sell => self.asks.values().map(|l| l.volume).sum(),
        }
    }

    fn insert(&mut self, order: Order) -> Result<(), BookError> {
        if self.index.contains_key(&order.order_ref) {
            return Err(BookError::DuplicateRef {
                order_ref: order.order_ref,
            });
        }
        self.index.insert(order.order_ref, (order.side, order.price));
        let level = match order.side {
            Side::Buy => self.bids.entry(Reverse(order.price)).or_default(),
            Side::Sell => self.asks.entry(order.price).or_default(),
        };
        level.volume += order.shares as u64;
        level.orders.push(order);
        level.touched.push(false);
        // An order joining the current best level has touched it; best
        // changes are handled in `mark_best`.
        let is_best = self.best_price(order.side) == Some(order.price);
        if is_best && self.marked_best[side_slot(order.side)] == Some(order.price) {
            let level = self.level_mut(order.side, order.price).unwrap();
            *level.touched.last_mut().unwrap() = true;
        }
        Ok(())
    }

    /// Removes up to `shares` from an order; returns the order as it was
    /// before removal and whether it left the book.
    fn decrement(
        &mut self,
        order_ref: u64,
        shares: Option<u32>,
        why: Termination,
    ) -> Result<Option<(Order, bool)>, BookError> {
        let Some(&(side, price)) = self.index.get(&order_ref) else {
            self.stats.unknown_refs += 1;
            return Ok(None);
        };
        let level = self.level_mut(side, price).expect("indexed level exists");
        let pos = level.position(order_ref);
        let resting = &mut level.orders[pos];
        let before = *resting;
        let take = shares.unwrap_or(before.shares);
        if take > before.shares {
            return Err(BookError::Overdecrement {
                order_ref,
                remaining: before.shares,
                requested: take,
            });
        }
        resting.shares -= take;
        level.volume -= take as u64;
        let gone = resting.shares == 0;
        if gone {
            level.orders.remove(pos);
            let touched = level.touched.remove(pos);
            let empty = level.orders.is_empty();
            if empty {
                match side {
                    Side::Buy => self.bids.remove(&Reverse(price)),
                    Side::Sell => self.asks.remove(&price),
                };
            }
            self.index.remove(&order_ref);
            if touched {
                match why {
                    Termination::Executed => self.stats.touched_best_executed += 1,
                    Termination::Cancelled => self.stats.touched_best_cancelled += 1,
                }
            }
        }
        Ok(Some((before, gone)))
    }

    fn record_trade(&mut self, trade: Trade, out: &mut Vec<Trade>) {
        self.last_trade_price = Some(trade.price);
        self.stats.trades += 1;
        self.stats.trade_volume += trade.shares as u64;
        out.push(trade);
    }

    fn mark_best(&mut self) {
        for side in [Side::Buy, Side::Sell] {
            let best = self.best_price(side);
            let slot = side_slot(side);
            if best != self.marked_best[slot] {
                if let Some(p) = best {
                    self.level_mut(side, p).unwrap().touched.fill(true);
                }
                self.marked_best[slot] = best;
            }
        }
    }

    /// Applies one event. Executed trades are appended to `trades`; the
    /// return value tells whether the book itself changed.
    ///
    /// Events for orders the book never saw are counted in
    /// [`BookStats::unknown_refs`] and otherwise ignored.
    pub fn apply_event(&mut self, ev: &MarketEvent, trades: &mut Vec<Trade>) -> Result<bool, BookError> {
        let now = ev.timestamp_ns;
        if now < self.last_time_ns {
            self.stats.time_reversals += 1;
        }
        self.last_time_ns = self.last_time_ns.max(now);

        let changed = match ev.message {
            Message::AddOrder(a) => {
                if a.shares == 0 {
                    return Ok(false);
                }
                self.insert(Order {
                    order_ref: a.order_ref,
                    side: a.side,
                    price: a.price,
                    shares: a.shares,
                    origination_ns: now,
                })?;
                self.stats.adds += 1;
                true
            }
            Message::OrderExecuted {
                order_ref, shares, ..
            } => {
                if shares == 0 {
                    return Ok(false);
                }
                match self.decrement(order_ref, Some(shares), Termination::Executed)? {
                    Some((o, _)) => {
                        self.stats.executions += 1;
                        self.record_trade(
                            Trade {
                                time_ns: now,
                                price: o.price,
                                shares,
                                match_kind: MatchKind::against_resting(o.side),
                            },
                            trades,
                        );
                        true
                    }
                    None => false,
                }
            }
            Message::OrderExecutedWithPrice {
                order_ref,
                shares,
                printable,
                price,
                ..
            } => {
                if shares == 0 {
                    return Ok(false);
                }
                match self.decrement(order_ref, Some(shares), Termination::Executed)? {
                    Some((o, _)) => {
                        self.stats.executions += 1;
                        if printable == b'Y' {
                            self.record_trade(
                                Trade {
                                    time_ns: now,
                                    price,
                                    shares,
                                    match_kind: MatchKind::against_resting(o.side),
                                },
                                trades,
                            );
                        }
                        true
                    }
                    None => false,
                }
            }
            Message::OrderCancel { order_ref, shares } => {
                if shares == 0 {
                    return Ok(false);
                }
                let hit = self.decrement(order_ref, Some(shares), Termination::Cancelled)?;
                if hit.is_some() {
                    self.stats.cancels += 1;
                }
                hit.is_some()
            }
            Message::OrderDelete { order_ref } => {
                let hit = self.decrement(order_ref, None, Termination::Cancelled)?;
                if hit.is_some() {
                    self.stats.deletes += 1;
                }
                hit.is_some()
            }
            Message::OrderReplace {
                old_ref,
                new_ref,
                shares,
                price,
            } => {
                if self.index.contains_key(&new_ref) && new_ref != old_ref {
                    return Err(BookError::DuplicateRef { order_ref: new_ref });
                }
                match self.decrement(old_ref, None, Termination::Cancelled)? {
                    Some((old, _)) => {
                        self.stats.replaces += 1;
                        if shares > 0 {
                            self.insert(Order {
                                order_ref: new_ref,
                                side: old.side,
                                price,
                                shares,
                                origination_ns: now,
                            })?;
                        }
                        true
                    }
                    None => false,
                }
            }
            Message::NonDisplayedTrade {
                side, shares, price, ..
            } => {
                if shares > 0 {
                    self.stats.hidden_trades += 1;
                    self.record_trade(
                        Trade {
                            time_ns: now,
                            price,
                            shares,
                            match_kind: MatchKind::against_resting(side),
                        },
                        trades,
                    );
                }
                false
            }
            Message::Seconds { .. } | Message::SystemEvent { .. } | Message::Other { .. } => false,
        };

        if changed {
            self.mark_best();
            if let (Some(b), Some(s)) = (self.best_price(Side::Buy), self.best_price(Side::Sell)) {
                if b >= s {
                    self.stats.crossed_after_event += 1;
                }
            }
        }
        Ok(changed)
    }

    /// Walks every level and the index and reports the first inconsistency.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for side in [Side::Buy, Side::Sell] {
            for (summary, orders) in self.levels(side) {
                if orders.is_empty() {
                    return Err(format!("empty level at {}", summary.price));
                }
                let sum: u64 = orders.iter().map(|o| o.shares as u64).sum();
                if sum != summary.volume {
                    return Err(format!("level {} volume {} != {}", summary.price, summary.volume, sum));
                }
                for o in orders {
                    if o.shares == 0 {
                        return Err(format!("order {} has zero shares", o.order_ref));
                    }
                    if o.side != side || o.price != summary.price {
                        return Err(format!("order {} misfiled", o.order_ref));
                    }
                    if self.index.get(&o.order_ref) != Some(&(side, o.price)) {
                        return Err(format!("order {} missing from index", o.order_ref));
                    }
                    if o.origination_ns > self.last_time_ns {
                        return Err(format!("order {} originates in the future", o.order_ref));
                    }
                    seen += 1;
                }
            }
        }
        if seen != self.index.len() {
            return Err(format!("index holds {} refs, levels hold {}", self.index.len(), seen));
        }
        Ok(())
    }
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Buy => 0,
        Side::Sell => 1,
    }
}
