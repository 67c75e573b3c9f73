//! Synthetic trade flows with exogenous spikes (fast excitation, slow
//! relaxation) and internally consistent ITCH event streams that realize
//! them on a live book.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};

use crate::itch::{AddOrder, MarketEvent, Message};
use crate::types::{Price4, Side, Symbol};

const NANOS_PER_SECOND: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Onset time in seconds from the start of the stream.
    pub onset: f64,
    /// Rate jump at onset, trades per second.
    pub amplitude: f64,
    /// Relaxation time in seconds.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeDist {
    Fixed(u32),
    /// `1 + Geometric`, with the given overall mean (≥ 1).
    Geometric { mean: f64 },
}

impl SizeDist {
    pub fn mean(&self) -> f64 {
        match *self {
            SizeDist::Fixed(v) => v as f64,
            SizeDist::Geometric { mean } => mean,
        }
    }

    fn sampler(&self) -> SizeSampler {
        match *self {
            SizeDist::Fixed(v) => SizeSampler::Fixed(v.max(1)),
            SizeDist::Geometric { mean } if mean <= 1.0 => SizeSampler::Fixed(1),
            SizeDist::Geometric { mean } => SizeSampler::Geometric(Geometric::new(1.0 / mean).expect("p in (0,1)")),
        }
    }
}

enum SizeSampler {
    Fixed(u32),
    Geometric(Geometric),
}

impl SizeSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match self {
            SizeSampler::Fixed(v) => *v,
            SizeSampler::Geometric(g) => 1 + g.sample(rng).min(u32::MAX as u64 - 1) as u32,
        }
    }
}

/// `λ(t) = λ0 + Σ_{s_i ≤ t} A_i exp(−(t − s_i)/θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeProcess {
    pub lambda0: f64,
    /// Sorted by onset.
    pub spikes: Vec<Spike>,
    pub size: SizeDist,
}

impl SpikeProcess {
    pub fn new(lambda0: f64, mut spikes: Vec<Spike>, size: SizeDist) -> Self {
        assert!(lambda0 >= 0.0, "base rate must be non-negative");
        for s in &spikes {
            assert!(s.amplitude >= 0.0 && s.theta > 0.0, "invalid spike {s:?}");
        }
        spikes.sort_by(|a, b| a.onset.total_cmp(&b.onset));
        Self { lambda0, spikes, size }
    }

    pub fn constant(rate: f64, size: SizeDist) -> Self {
        Self::new(rate, Vec::new(), size)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.lambda0
            + self
                .spikes
                .iter()
                .take_while(|s| s.onset <= t)
                .map(|s| s.amplitude * (-(t - s.onset) / s.theta).exp())
                .sum::<f64>()
    }

    /// `∫_0^t λ`.
    pub fn integrated_rate(&self, t: f64) -> f64 {
        self.lambda0 * t
            + self
                .spikes
                .iter()
                .take_while(|s| s.onset <= t)
                .map(|s| s.amplitude * s.theta * -(-(t - s.onset) / s.theta).exp_m1())
                .sum::<f64>()
    }
}

/// Parameters for drawing random spike processes.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpikes {
    pub count: usize,
    pub horizon: f64,
    pub lambda0: f64,
    pub amplitude: (f64, f64),
    /// Relaxation times are log-uniform over this range.
    pub theta: (f64, f64),
    /// Minimum gap between onsets; onsets also keep this gap from both ends.
    pub min_separation: f64,
    pub size: SizeDist,
}

impl Default for RandomSpikes {
    fn default() -> Self {
        Self {
            count: 5,
            horizon: 3600.0,
            lambda0: 0.5,
            amplitude: (5.0, 50.0),
            theta: (1.0, 1000.0),
            min_separation: 0.0,
            size: SizeDist::Geometric { mean: 100.0 },
        }
    }
}

impl RandomSpikes {
    pub fn sample(&self, seed: u64) -> SpikeProcess {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gap = self.min_separation;
        let free = self.horizon - 2.0 * gap - gap * self.count.saturating_sub(1) as f64;
        assert!(free >= 0.0, "horizon too short for {} separated spikes", self.count);
        // Uniform order statistics on the free length, then spread out.
        let mut u: Vec<f64> = (0..self.count).map(|_| rng.random::<f64>() * free).collect();
        u.sort_by(f64::total_cmp);
        let (lo, hi) = (self.theta.0.ln(), self.theta.1.ln());
        let spikes = u
            .iter()
            .enumerate()
            .map(|(i, &x)| Spike {
                onset: gap + x + gap * i as f64,
                amplitude: rng.random_range(self.amplitude.0..=self.amplitude.1),
                theta: (lo + (hi - lo) * rng.random::<f64>()).exp(),
            })
            .collect();
        SpikeProcess::new(self.lambda0, spikes, self.size)
    }
}

/// Trade times (seconds) and sizes in `[0, horizon)` by thinning. Between
/// onsets `λ` does not increase, so `λ(t)` at the current time bounds it
/// until the next onset.
pub fn gen_trades(process: &SpikeProcess, horizon: f64, seed: u64) -> Vec<(f64, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    trades_with(process, horizon, &mut rng)
}

fn trades_with<R: Rng>(process: &SpikeProcess, horizon: f64, rng: &mut R) -> Vec<(f64, u32)> {
    assert!(horizon > 0.0, "horizon must be positive");
    let sizes = process.size.sampler();
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut next_onset = 0;
    while t < horizon {
        while next_onset < process.spikes.len() && process.spikes[next_onset].onset <= t {
            next_onset += 1;
        }
        let boundary = process.spikes.get(next_onset).map_or(horizon, |s| s.onset.min(horizon));
        let bound = process.rate(t);
        if bound <= 0.0 {
            if boundary >= horizon {
                break;
            }
            t = boundary;
            continue;
        }
        let step = Exp::new(bound).expect("positive rate").sample(rng);
        let candidate = t + step;
        if candidate >= boundary {
            t = boundary;
            if boundary >= horizon {
                break;
            }
            continue;
        }
        t = candidate;
        if rng.random::<f64>() * bound <= process.rate(t) {
            out.push((t, sizes.sample(rng)));
        }
    }
    out
}

/// Background book activity around the trades.
#[derive(Debug, Clone, PartialEq)]
pub struct BookParams {
    pub symbol: Symbol,
    /// Time of day of the first event, in nanoseconds after midnight.
    pub start_ns: u64,
    pub mid: Price4,
    /// Price increment in 1/10000 dollars.
    pub tick: u32,
    /// Orders placed on each side at the start.
    pub initial_depth: usize,
    /// Resting orders the background flow keeps per side on average.
    pub target_depth: usize,
    /// Background (non-trade) events per second.
    pub background_rate: f64,
    /// Order sizes.
    pub order_size: SizeDist,
    /// Mean distance of new orders from the opposite best, in ticks.
    pub mean_offset_ticks: f64,
    pub replace_fraction: f64,
    pub partial_cancel_fraction: f64,
    /// Fraction of trades reported as a hidden (non-displayed) execution.
    pub hidden_fraction: f64,
    /// Fraction of displayed executions reported with a price.
    pub priced_fraction: f64,
}

impl Default for BookParams {
    fn default() -> Self {
        Self {
            symbol: Symbol::new("SYNTH"),
            start_ns: 9 * 3600 * NANOS_PER_SECOND + 30 * 60 * NANOS_PER_SECOND,
            mid: Price4::from_dollars(100.0),
            tick: 100,
            initial_depth: 50,
            target_depth: 100,
            background_rate: 50.0,
            order_size: SizeDist::Geometric { mean: 200.0 },
            mean_offset_ticks: 4.0,
            replace_fraction: 0.2,
            partial_cancel_fraction: 0.1,
            hidden_fraction: 0.05,
            priced_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Live {
    side: Side,
    price: u32,
    shares: u32,
}

/// Resting orders as the generator tracks them.
#[derive(Debug, Default)]
struct Shadow {
    live: HashMap<u64, Live>,
    /// Refs for uniform random choice.
    refs: Vec<u64>,
    slot: HashMap<u64, usize>,
    /// FIFO queues per price.
    bids: BTreeMap<u32, Vec<u64>>,
    asks: BTreeMap<u32, Vec<u64>>,
}

impl Shadow {
    fn side_map(&mut self, side: Side) -> &mut BTreeMap<u32, Vec<u64>> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn best(&self, side: Side) -> Option<u32> {
        match side {
            Side::Buy => self.bids.keys().next_back().copied(),
            Side::Sell => self.asks.keys().next().copied(),
        }
    }

    fn insert(&mut self, r: u64, o: Live) {
        self.live.insert(r, o);
        self.slot.insert(r, self.refs.len());
        self.refs.push(r);
        self.side_map(o.side).entry(o.price).or_default().push(r);
    }

    fn remove(&mut self, r: u64) -> Live {
        let o = self.live.remove(&r).expect("live ref");
        let i = self.slot.remove(&r).expect("slot");
        self.refs.swap_remove(i);
        if let Some(&moved) = self.refs.get(i) {
            self.slot.insert(moved, i);
        }
        let map = self.side_map(o.side);
        let queue = map.get_mut(&o.price).expect("level");
        queue.retain(|&x| x != r);
        if queue.is_empty() {
            map.remove(&o.price);
        }
        o
    }

    fn len(&self) -> usize {
        self.refs.len()
    }
}

/// Lazy ITCH event stream whose executions realize a trade log.
///
/// Background adds, cancels, deletes and replaces keep the book populated;
/// each trade executes against the opposite best level (adding liquidity
/// first if the level is too thin). A `Seconds` message precedes the
/// first event of every second, and one is emitted for every whole second
/// of the horizon even when nothing else happens.
pub struct ItchGenerator {
    params: BookParams,
    rng: ChaCha8Rng,
    trades: Vec<(f64, u32)>,
    next_trade: usize,
    next_background: f64,
    horizon: f64,
    next_second: u64,
    end_second: u64,
    seeded: bool,
    next_ref: u64,
    next_match: u64,
    book: Shadow,
    pending: std::collections::VecDeque<MarketEvent>,
    sizes: SizeSampler,
    executed_volume: u64,
    mid: u32,
}

impl ItchGenerator {
    pub fn new(process: &SpikeProcess, params: BookParams, horizon: f64, seed: u64) -> Self {
        let trades = gen_trades(process, horizon, seed);
        let rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let start_second = params.start_ns / NANOS_PER_SECOND;
        let end_ns = params.start_ns + (horizon * 1e9) as u64;
        let mut generator = Self {
            sizes: params.order_size.sampler(),
            mid: params.mid.raw(),
            params,
            rng,
            trades,
            next_trade: 0,
            next_background: 0.0,
            horizon,
            next_second: start_second,
            end_second: end_ns.div_ceil(NANOS_PER_SECOND),
            seeded: false,
            next_ref: 1,
            next_match: 1,
            book: Shadow::default(),
            pending: Default::default(),
            executed_volume: 0,
        };
        generator.next_background = generator.draw_background_gap();
        generator
    }

    /// Trades the stream realizes, as `(seconds from start, shares)`.
    pub fn trades(&self) -> &[(f64, u32)] {
        &self.trades
    }

    /// Shares executed by the events emitted so far.
    pub fn executed_volume(&self) -> u64 {
        self.executed_volume
    }

    fn draw_background_gap(&mut self) -> f64 {
        if self.params.background_rate > 0.0 {
            Exp::new(self.params.background_rate).unwrap().sample(&mut self.rng)
        } else {
            f64::INFINITY
        }
    }

    fn ts(&self, t: f64) -> u64 {
        self.params.start_ns + (t * 1e9) as u64
    }

    fn push(&mut self, timestamp_ns: u64, message: Message) {
        self.pending.push_back(MarketEvent { timestamp_ns, message });
    }

    fn add_order(&mut self, ts: u64, side: Side, price: u32, shares: u32) -> u64 {
        let r = self.next_ref;
        self.next_ref += 1;
        self.book.insert(r, Live { side, price, shares });
        self.push(
            ts,
            Message::AddOrder(AddOrder {
                order_ref: r,
                side,
                shares,
                stock: self.params.symbol,
                price: Price4(price),
                attribution: None,
            }),
        );
        r
    }

    /// A passive price for a new order on `side`, never crossing the
    /// opposite best.
    fn passive_price(&mut self, side: Side) -> u32 {
        let tick = self.params.tick;
        let p = 1.0 / (1.0 + self.params.mean_offset_ticks.max(0.0));
        let offset = Geometric::new(p).unwrap().sample(&mut self.rng) as u32;
        let opposite = self.book.best(side.opposite());
        match side {
            Side::Buy => {
                let ceiling = opposite.map_or(self.mid, |a| a.saturating_sub(tick)).max(tick);
                ceiling.saturating_sub(offset * tick).max(tick)
            }
            Side::Sell => {
                let floor = opposite.map_or(self.mid + tick, |b| b + tick);
                floor + offset * tick
            }
        }
    }

    fn random_side(&mut self) -> Side {
        if self.rng.random::<bool>() {
            Side::Buy
        } else {
            Side::Sell
        }
    }

    fn seed_book(&mut self) {
        let ts = self.params.start_ns;
        for _ in 0..self.params.initial_depth {
            for side in [Side::Buy, Side::Sell] {
                let price = self.passive_price(side);
                let shares = self.sizes.sample(&mut self.rng);
                self.add_order(ts, side, price, shares);
            }
        }
    }

    fn background(&mut self, t: f64) {
        let ts = self.ts(t);
        let target = 2 * self.params.target_depth.max(1);
        let fill = self.book.len() as f64 / target as f64;
        let p_add = (1.0 - 0.5 * fill).clamp(0.05, 0.95);
        if self.book.len() == 0 || self.rng.random::<f64>() < p_add {
            let side = self.random_side();
            let price = self.passive_price(side);
            let shares = self.sizes.sample(&mut self.rng);
            self.add_order(ts, side, price, shares);
            return;
        }
        let i = self.rng.random_range(0..self.book.len());
        let r = self.book.refs[i];
        let u = self.rng.random::<f64>();
        let live = self.book.live[&r];
        if u < self.params.partial_cancel_fraction && live.shares > 1 {
            let cut = self.rng.random_range(1..live.shares);
            self.book.live.get_mut(&r).unwrap().shares -= cut;
            self.push(ts, Message::OrderCancel { order_ref: r, shares: cut });
        } else if u < self.params.partial_cancel_fraction + self.params.replace_fraction {
            self.book.remove(r);
            let price = self.passive_price(live.side);
            let shares = self.sizes.sample(&mut self.rng);
            let new_ref = self.next_ref;
            self.next_ref += 1;
            self.book.insert(
                new_ref,
                Live {
                    side: live.side,
                    price,
                    shares,
                },
            );
            self.push(
                ts,
                Message::OrderReplace {
                    old_ref: r,
                    new_ref,
                    shares,
                    price: Price4(price),
                },
            );
        } else {
            self.book.remove(r);
            self.push(ts, Message::OrderDelete { order_ref: r });
        }
        // Drift the reference price with the book.
        if let (Some(b), Some(a)) = (self.book.best(Side::Buy), self.book.best(Side::Sell)) {
            self.mid = (b + a) / 2;
        }
    }

    fn trade(&mut self, t: f64, shares: u32) {
        let ts = self.ts(t);
        let aggressor = self.random_side();
        let resting = aggressor.opposite();
        self.executed_volume += shares as u64;
        if self.rng.random::<f64>() < self.params.hidden_fraction {
            let price = self.book.best(resting).unwrap_or(self.mid);
            let m = self.next_match;
            self.next_match += 1;
            self.push(
                ts,
                Message::NonDisplayedTrade {
                    order_ref: 0,
                    side: resting,
                    shares,
                    stock: self.params.symbol,
                    price: Price4(price),
                    match_number: m,
                },
            );
            return;
        }
        let best = match self.book.best(resting) {
            Some(p) => p,
            None => {
                let p = self.passive_price(resting);
                self.add_order(ts, resting, p, shares);
                p
            }
        };
        let queue = match resting {
            Side::Buy => &self.book.bids[&best],
            Side::Sell => &self.book.asks[&best],
        };
        let level_volume: u64 = queue.iter().map(|r| self.book.live[r].shares as u64).sum();
        if level_volume < shares as u64 {
            self.add_order(ts, resting, best, shares - level_volume as u32);
        }
        let mut left = shares;
        while left > 0 {
            let r = match resting {
                Side::Buy => self.book.bids[&best][0],
                Side::Sell => self.book.asks[&best][0],
            };
            let live = self.book.live[&r];
            let fill = left.min(live.shares);
            left -= fill;
            let m = self.next_match;
            self.next_match += 1;
            let message = if self.rng.random::<f64>() < self.params.priced_fraction {
                Message::OrderExecutedWithPrice {
                    order_ref: r,
                    shares: fill,
                    match_number: m,
                    printable: b'Y',
                    price: Price4(live.price),
                }
            } else {
                Message::OrderExecuted {
                    order_ref: r,
                    shares: fill,
                    match_number: m,
                }
            };
            self.push(ts, message);
            if fill == live.shares {
                self.book.remove(r);
            } else {
                self.book.live.get_mut(&r).unwrap().shares -= fill;
            }
        }
    }

    /// Generates the next batch of events into `pending`; false when done.
    fn refill(&mut self) -> bool {
        if !self.seeded {
            self.seeded = true;
            self.push(
                self.next_second * NANOS_PER_SECOND,
                Message::Seconds {
                    seconds: self.next_second as u32,
                },
            );
            self.next_second += 1;
            self.seed_book();
            return true;
        }
        let t_trade = self.trades.get(self.next_trade).map_or(f64::INFINITY, |x| x.0);
        let t_bg = if self.next_background < self.horizon {
            self.next_background
        } else {
            f64::INFINITY
        };
        let t_event = t_trade.min(t_bg);
        let ts_event = if t_event.is_finite() { self.ts(t_event) } else { u64::MAX };
        let second_ns = self.next_second * NANOS_PER_SECOND;
        if self.next_second < self.end_second && second_ns <= ts_event {
            self.push(
                second_ns,
                Message::Seconds {
                    seconds: self.next_second as u32,
                },
            );
            self.next_second += 1;
            return true;
        }
        if !t_event.is_finite() {
            return false;
        }
        if t_trade <= t_bg {
            let (t, shares) = self.trades[self.next_trade];
            self.next_trade += 1;
            self.trade(t, shares);
        } else {
            self.background(t_bg);
            self.next_background += self.draw_background_gap();
        }
        true
    }
}

impl Iterator for ItchGenerator {
    type Item = MarketEvent;

    fn next(&mut self) -> Option<MarketEvent> {
        loop {
            if let Some(ev) = self.pending.pop_front() {
                return Some(ev);
            }
            if !self.refill() {
                return None;
            }
        }
    }
}

/// Event stream realizing `gen_trades(process, horizon, seed)`.
pub fn gen_itch(process: &SpikeProcess, params: BookParams, horizon: f64, seed: u64) -> ItchGenerator {
    ItchGenerator::new(process, params, horizon, seed)
}
