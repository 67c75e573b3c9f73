//! Replay one symbol and emit one CSV row per book modification.

use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::mpsc;
use std::thread;

use thiserror::Error;

use crate::attributes::AttributeSample;
use crate::book::cancellation_ratio;
use crate::book::{BookError, BookUpdate, OrderBook, Session, SessionStats};
use crate::edge::{edge_values, EdgeConfig, EdgeValues};
use crate::flow::{FlowConfig, FlowError, FlowReading, FlowState, SlidingWindow};
use crate::itch::{open_events, IngestError, MarketEvent};
use crate::synth::{gen_itch, BookParams, SpikeProcess};
use crate::types::{Price4, Side, Symbol};

pub const SCHEMA_LINE: &str = "# schema=1";

pub const COLUMNS: [&str; 21] = [
    "t_hours",
    "t_ns",
    "p_last",
    "p_buy",
    "p_sell",
    "p_buy_minus_last",
    "p_sell_minus_last",
    "v_best_buy",
    "v_best_sell",
    "eta_disbalance",
    "t_book_buy_s",
    "t_book_sell_s",
    "i_sliding",
    "i_now",
    "lambda_min",
    "lambda_max",
    "c_max_sq",
    "v_christoffel_buy",
    "v_christoffel_sell",
    "tau_edge_buy",
    "tau_edge_sell",
];

#[derive(Debug, Error)]
pub enum DumpError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("book error at event {event}: {source}")]
    Book { event: u64, source: BookError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DumpError {
    /// Byte offset of the failing frame for decode errors.
    pub fn offset(&self) -> Option<u64> {
        match self {
            DumpError::Ingest(e) => e.offset(),
            _ => None,
        }
    }
}

/// Everything a row depends on besides the event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeConfig {
    pub flow: FlowConfig,
    pub edge: EdgeConfig,
    /// Sliding-window length in seconds.
    pub window: f64,
    /// Edge values are recomputed on every n-th row and carried forward in
    /// between.
    pub edge_every_n: u64,
    /// Inclusive row filter in decimal hours.
    pub from_hours: Option<f64>,
    pub to_hours: Option<f64>,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            edge: EdgeConfig::default(),
            window: 64.0,
            edge_every_n: 1,
            from_hours: None,
            to_hours: None,
        }
    }
}

impl AttributeConfig {
    pub fn validate(&self) -> Result<(), DumpError> {
        self.flow.validate().map_err(|e| DumpError::Config(e.to_string()))?;
        if !(self.window > 0.0) {
            return Err(DumpError::Config("window must be positive".into()));
        }
        if self.edge_every_n == 0 {
            return Err(DumpError::Config("edge-every-n must be at least 1".into()));
        }
        if !(self.edge.cutoff > 0.0) {
            return Err(DumpError::Config("cutoff must be positive".into()));
        }
        if self.edge.radau_nodes == 0 {
            return Err(DumpError::Config("radau-nodes must be at least 1".into()));
        }
        if let (Some(a), Some(b)) = (self.from_hours, self.to_hours) {
            if a > b {
                return Err(DumpError::Config("--from is after --to".into()));
            }
        }
        Ok(())
    }

    fn in_range(&self, hours: f64) -> bool {
        self.from_hours.is_none_or(|a| hours >= a) && self.to_hours.is_none_or(|b| hours <= b)
    }
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub sample: AttributeSample,
    pub i_sliding: f64,
    /// `lambda_*` and `c_max_sq` are NaN when the estimator fell back to the
    /// sliding window.
    pub flow: FlowReading,
    pub edge_buy: EdgeValues,
    pub edge_sell: EdgeValues,
}

/// Per-symbol state turning book updates into rows.
#[derive(Debug, Clone)]
pub struct RowBuilder {
    config: AttributeConfig,
    flow: FlowState,
    sliding: SlidingWindow,
    edge_counter: u64,
    last_edge: (EdgeValues, EdgeValues),
    singular: u64,
}

const NO_EDGE: EdgeValues = EdgeValues {
    v_christoffel: None,
    tau_edge: None,
};

impl RowBuilder {
    pub fn new(config: AttributeConfig) -> Result<Self, DumpError> {
        config.validate()?;
        Ok(Self {
            flow: FlowState::new(config.flow).map_err(|e| DumpError::Config(e.to_string()))?,
            sliding: SlidingWindow::new(config.window),
            config,
            edge_counter: 0,
            last_edge: (NO_EDGE, NO_EDGE),
            singular: 0,
        })
    }

    pub fn config(&self) -> &AttributeConfig {
        &self.config
    }

    pub fn flow(&self) -> &FlowState {
        &self.flow
    }

    /// Rows whose flow reading fell back to the sliding window.
    pub fn singular_rows(&self) -> u64 {
        self.singular
    }

    /// Folds the update into the flow state and returns a row when the
    /// update falls inside the configured time range.
    pub fn update(&mut self, update: &BookUpdate<'_>) -> Option<Row> {
        let t = update.time_ns as f64 * 1e-9;
        self.flow.advance_to(t);
        let mut traded = 0u64;
        for trade in update.recent_trades {
            traded += trade.shares as u64;
        }
        if traded > 0 {
            self.flow.add_trade(traded as f64);
            self.sliding.push(t, traded as f64);
        }
        let hours = crate::attributes::decimal_hours(update.time_ns);
        if !self.config.in_range(hours) {
            return None;
        }
        Some(self.row(update.book, update.time_ns))
    }

    fn row(&mut self, book: &OrderBook, time_ns: u64) -> Row {
        let t = time_ns as f64 * 1e-9;
        let sample = AttributeSample::from_book(book, time_ns);
        let i_sliding = self.sliding.rate(t);
        let flow = match self.flow.i_extremal() {
            Ok(r) => r,
            Err(FlowError::SingularGram) | Err(_) => {
                self.singular += 1;
                FlowReading {
                    i_now: i_sliding,
                    lambda_min: f64::NAN,
                    lambda_max: f64::NAN,
                    c_max_sq: f64::NAN,
                }
            }
        };
        if self.edge_counter.is_multiple_of(self.config.edge_every_n) {
            self.last_edge = (
                edge_values(book, Side::Buy, time_ns, &self.config.edge),
                edge_values(book, Side::Sell, time_ns, &self.config.edge),
            );
        }
        self.edge_counter += 1;
        Row {
            sample,
            i_sliding,
            flow,
            edge_buy: self.last_edge.0,
            edge_sell: self.last_edge.1,
        }
    }
}

/// CSV output with the `nan` sentinel for absent values.
pub struct CsvWriter<W: Write> {
    out: W,
    line: String,
    rows: u64,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            line: String::with_capacity(512),
            rows: 0,
        }
    }

    pub fn write_header(&mut self) -> io::Result<()> {
        writeln!(self.out, "{SCHEMA_LINE}")?;
        writeln!(self.out, "{}", COLUMNS.join(","))
    }

    pub fn write_row(&mut self, row: &Row) -> io::Result<()> {
        let s = &row.sample;
        let l = &mut self.line;
        l.clear();
        push_hours(l, s.time_ns);
        push_u64(l, Some(s.time_ns));
        push_price(l, s.p_last);
        push_price(l, s.p_buy);
        push_price(l, s.p_sell);
        push_f64(l, s.p_buy_minus_last);
        push_f64(l, s.p_sell_minus_last);
        push_u64(l, s.v_best_buy);
        push_u64(l, s.v_best_sell);
        push_f64(l, s.eta_disbalance);
        push_f64(l, s.t_in_book_buy);
        push_f64(l, s.t_in_book_sell);
        push_f64(l, Some(row.i_sliding));
        push_f64(l, Some(row.flow.i_now));
        push_f64(l, Some(row.flow.lambda_min));
        push_f64(l, Some(row.flow.lambda_max));
        push_f64(l, Some(row.flow.c_max_sq));
        push_f64(l, row.edge_buy.v_christoffel);
        push_f64(l, row.edge_sell.v_christoffel);
        push_f64(l, row.edge_buy.tau_edge);
        push_f64(l, row.edge_sell.tau_edge);
        l.push('\n');
        self.rows += 1;
        self.out.write_all(l.as_bytes())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn push_price(l: &mut String, v: Option<Price4>) {
    match v {
        Some(p) => {
            let raw = p.raw();
            l.push(',');
            l.push_str(itoa::Buffer::new().format(raw / 10_000));
            let frac = raw % 10_000;
            l.push('.');
            for d in [1000, 100, 10, 1] {
                l.push((b'0' + (frac / d % 10) as u8) as char);
            }
        }
        None => l.push_str(",nan"),
    }
}

fn push_f64(l: &mut String, v: Option<f64>) {
    match v {
        Some(x) if !x.is_nan() => {
            l.push(',');
            l.push_str(ryu::Buffer::new().format(x));
        }
        _ => l.push_str(",nan"),
    }
}

/// `t_ns / 3.6e12` rounded to 9 decimals, computed exactly in integers.
fn push_hours(l: &mut String, t_ns: u64) {
    let nano_hours = (t_ns + 1800) / 3600;
    l.push_str(itoa::Buffer::new().format(nano_hours / 1_000_000_000));
    l.push('.');
    let mut buf = itoa::Buffer::new();
    let digits = buf.format(nano_hours % 1_000_000_000);
    for _ in digits.len()..9 {
        l.push('0');
    }
    l.push_str(digits);
}

fn push_u64(l: &mut String, v: Option<u64>) {
    match v {
        Some(x) => {
            l.push(',');
            l.push_str(itoa::Buffer::new().format(x));
        }
        None => l.push_str(",nan"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub session: SessionStats,
    pub rows: u64,
    pub singular_rows: u64,
}

impl RunSummary {
    pub fn cancellation_ratio(&self) -> Option<f64> {
        cancellation_ratio(&self.session.book)
    }

    /// One-line diagnostics: event counts and the cancellation ratio.
    pub fn summary_line(&self) -> String {
        let b = &self.session.book;
        let ratio = self
            .cancellation_ratio()
            .map_or_else(|| "nan".to_string(), |r| format!("{r:.6}"));
        format!(
            "events={} updates={} rows={} adds={} executions={} cancels={} deletes={} replaces={} hidden_trades={} trades={} trade_volume={} unknown_refs={} crossed={} flow_fallbacks={} cancellation_ratio={}",
            self.session.events,
            self.session.updates,
            self.rows,
            b.adds,
            b.executions,
            b.cancels,
            b.deletes,
            b.replaces,
            b.hidden_trades,
            b.trades,
            b.trade_volume,
            b.unknown_refs,
            b.crossed_after_event,
            self.singular_rows,
            ratio
        )
    }
}

/// Replays `events` for `symbol`, passing every row to `sink`.
pub fn replay<I, F>(events: I, symbol: Symbol, config: AttributeConfig, mut sink: F) -> Result<RunSummary, DumpError>
where
    I: IntoIterator<Item = Result<MarketEvent, IngestError>>,
    F: FnMut(&Row) -> io::Result<()>,
{
    let mut builder = RowBuilder::new(config)?;
    let mut session = Session::new(OrderBook::new(symbol));
    let mut rows = 0u64;
    let mut io_error = None;
    for ev in events {
        let ev = ev?;
        let event = session.stats().events;
        session
            .step(&ev, |u| {
                if io_error.is_some() {
                    return;
                }
                if let Some(row) = builder.update(u) {
                    rows += 1;
                    if let Err(e) = sink(&row) {
                        io_error = Some(e);
                    }
                }
            })
            .map_err(|source| DumpError::Book { event, source })?;
        if let Some(e) = io_error.take() {
            return Err(e.into());
        }
    }
    Ok(RunSummary {
        session: session.stats(),
        rows,
        singular_rows: builder.singular_rows(),
    })
}

/// Replays `events` and writes the CSV (schema line, header, rows) to `out`.
pub fn write_csv<I, W>(events: I, symbol: Symbol, config: AttributeConfig, out: W) -> Result<RunSummary, DumpError>
where
    I: IntoIterator<Item = Result<MarketEvent, IngestError>>,
    W: Write,
{
    let mut csv = CsvWriter::new(out);
    csv.write_header()?;
    let summary = replay(events, symbol, config, |row| csv.write_row(row))?;
    csv.flush()?;
    Ok(summary)
}

/// Options of the `dump` command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub symbol: Symbol,
    pub attributes: AttributeConfig,
    /// Decode on a separate thread feeding the book through a bounded
    /// queue.
    pub pipelined: bool,
}

const BATCH: usize = 4096;
const QUEUE_DEPTH: usize = 16;

/// Decodes the capture at `config.input` and writes CSV rows to `out`.
pub fn dump_attributes<W: Write>(config: &RunConfig, out: W) -> Result<RunSummary, DumpError> {
    config.attributes.validate()?;
    let symbols = [config.symbol];
    let stream = open_events(&config.input, Some(&symbols))?;
    let summary = if config.pipelined {
        let (tx, rx) = mpsc::sync_channel::<Vec<Result<MarketEvent, IngestError>>>(QUEUE_DEPTH);
        let decoder = thread::spawn(move || {
            let mut batch = Vec::with_capacity(BATCH);
            for ev in stream {
                batch.push(ev);
                if batch.len() == BATCH {
                    let full = std::mem::replace(&mut batch, Vec::with_capacity(BATCH));
                    if tx.send(full).is_err() {
                        return;
                    }
                }
            }
            let _ = tx.send(batch);
        });
        let result = write_csv(rx.into_iter().flatten(), config.symbol, config.attributes.clone(), out);
        decoder.join().expect("decoder thread panicked");
        result?
    } else {
        write_csv(stream, config.symbol, config.attributes.clone(), out)?
    };
    if summary.rows == 0 {
        log::warn!("no rows for symbol {} in {}", config.symbol, config.input.display());
    }
    Ok(summary)
}

/// Options of the `simulate` command.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub process: SpikeProcess,
    pub book: BookParams,
    pub horizon: f64,
    pub seed: u64,
    pub attributes: AttributeConfig,
}

/// Generates a synthetic stream and writes the same CSV as
/// [`dump_attributes`].
pub fn simulate<W: Write>(config: &SimulateConfig, out: W) -> Result<RunSummary, DumpError> {
    let events = gen_itch(&config.process, config.book.clone(), config.horizon, config.seed).map(Ok);
    write_csv(events, config.book.symbol, config.attributes.clone(), out)
}
