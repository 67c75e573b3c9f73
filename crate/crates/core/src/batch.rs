//! Batch execution over independent work items (seeds, measures, symbols).
//!
//! With the `parallel` feature, [`map`] spreads items over the rayon pool;
//! without it, or through [`map_sequential`], items run in order on the
//! calling thread. Results are returned in input order either way.

use crate::book::{OrderBook, Trade};
use crate::dump::{replay, AttributeConfig, DumpError, RunSummary};
use crate::edge::{radau_rule, PriceMeasure, RadauRule, EdgeError};
use crate::synth::{gen_itch, BookParams, SpikeProcess};

/// Applies `f` to every item, in parallel when the `parallel` feature is on.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Final book and trade log of one synthetic stream.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub seed: u64,
    pub events: u64,
    pub book: OrderBook,
    pub trades: Vec<Trade>,
}

/// Generates the stream for `seed` (at most `max_events` events) and replays
/// it through a fresh book.
pub fn replay_seed(
    process: &SpikeProcess,
    params: &BookParams,
    horizon: f64,
    seed: u64,
    max_events: usize,
) -> Result<ReplayOutcome, crate::book::BookError> {
    let mut book = OrderBook::new(params.symbol);
    let mut trades = Vec::new();
    let mut events = 0;
    for ev in gen_itch(process, params.clone(), horizon, seed).take(max_events) {
        book.apply_event(&ev, &mut trades)?;
        events += 1;
    }
    Ok(ReplayOutcome {
        seed,
        events,
        book,
        trades,
    })
}

/// [`replay_seed`] over many seeds.
pub fn replay_seeds(
    process: &SpikeProcess,
    params: &BookParams,
    horizon: f64,
    seeds: &[u64],
    max_events: usize,
) -> Vec<Result<ReplayOutcome, crate::book::BookError>> {
    map(seeds, |&s| replay_seed(process, params, horizon, s, max_events))
}

/// Radau rules for many measures.
pub fn radau_rules(measures: &[PriceMeasure], n_nodes: usize) -> Vec<Result<RadauRule, EdgeError>> {
    map(measures, |m| radau_rule(m, n_nodes))
}

/// Row-producing simulation of many `(process, seed)` pairs, each row
/// folded by `fold` into a per-run accumulator.
pub fn simulate_many<A, F>(
    runs: &[(SpikeProcess, u64)],
    params: &BookParams,
    horizon: f64,
    config: &AttributeConfig,
    fold: F,
) -> Vec<Result<(A, RunSummary), DumpError>>
where
    A: Default + Send,
    F: Fn(&mut A, &crate::dump::Row) + Sync + Send,
{
    map(runs, |(process, seed)| {
        let mut acc = A::default();
        let events = gen_itch(process, params.clone(), horizon, *seed).map(Ok);
        let summary = replay(events, params.symbol, config.clone(), |row| {
            fold(&mut acc, row);
            Ok(())
        })?;
        Ok((acc, summary))
    })
}
