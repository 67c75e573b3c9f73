mod common;

use common::{compare_books, NaiveBook};
use lobflow::book::BookError;
use lobflow::itch::{decode_message, encode_message, write_capture, AddOrder, Decoder, EventStream};
use lobflow::synth::{gen_itch, BookParams, RandomSpikes};
use lobflow::{MarketEvent, Message, OrderBook, Price4, Side, Symbol};
use proptest::prelude::*;

fn side_of(b: bool) -> Side {
    if b {
        Side::Buy
    } else {
        Side::Sell
    }
}

fn arb_message() -> impl Strategy<Value = Message> {
    let sym = prop::array::uniform8(b'A'..=b'Z').prop_map(Symbol);
    prop_oneof![
        any::<u32>().prop_map(|seconds| Message::Seconds { seconds }),
        any::<u8>().prop_map(|code| Message::SystemEvent { code }),
        (any::<u64>(), any::<bool>(), any::<u32>(), sym.clone(), any::<u32>(), prop::option::of(prop::array::uniform4(b'A'..=b'Z'))).prop_map(
            |(order_ref, b, shares, stock, px, attribution)| Message::AddOrder(AddOrder {
                order_ref,
                side: side_of(b),
                shares,
                stock,
                price: Price4(px),
                attribution,
            })
        ),
        (any::<u64>(), any::<u32>(), any::<u64>()).prop_map(|(order_ref, shares, match_number)| Message::OrderExecuted {
            order_ref,
            shares,
            match_number
        }),
        (any::<u64>(), any::<u32>(), any::<u64>(), prop::sample::select(vec![b'Y', b'N']), any::<u32>()).prop_map(
            |(order_ref, shares, match_number, printable, px)| Message::OrderExecutedWithPrice {
                order_ref,
                shares,
                match_number,
                printable,
                price: Price4(px),
            }
        ),
        (any::<u64>(), any::<u32>()).prop_map(|(order_ref, shares)| Message::OrderCancel { order_ref, shares }),
        any::<u64>().prop_map(|order_ref| Message::OrderDelete { order_ref }),
        (any::<u64>(), any::<u64>(), any::<u32>(), any::<u32>()).prop_map(|(old_ref, new_ref, shares, px)| Message::OrderReplace {
            old_ref,
            new_ref,
            shares,
            price: Price4(px),
        }),
        (any::<u64>(), any::<bool>(), any::<u32>(), sym, any::<u32>(), any::<u64>()).prop_map(
            |(order_ref, b, shares, stock, px, match_number)| Message::NonDisplayedTrade {
                order_ref,
                side: side_of(b),
                shares,
                stock,
                price: Price4(px),
                match_number,
            }
        ),
    ]
}

/// Abstract operation turned into a valid event against the oracle state,
/// so that random sequences exercise every branch without tripping the
/// fatal checks.
#[derive(Debug, Clone, Copy)]
struct Op {
    kind: u8,
    pick: usize,
    shares: u32,
    tick: u32,
    buy: bool,
    dt: u64,
}

fn arb_op() -> impl Strategy<Value = Op> {
    (0u8..9, any::<usize>(), 1u32..500, 0u32..12, any::<bool>(), 0u64..5_000).prop_map(|(kind, pick, shares, tick, buy, dt)| Op {
        kind,
        pick,
        shares,
        tick,
        buy,
        dt,
    })
}

fn realize(op: Op, naive: &NaiveBook, next_ref: &mut u64, now: &mut u64) -> MarketEvent {
    *now += op.dt;
    let price = Price4(100_000 + 100 * op.tick);
    let resting = (!naive.orders.is_empty()).then(|| naive.orders[op.pick % naive.orders.len()]);
    // A reference the book has never seen.
    let unknown = 1_000_000 + op.pick as u64 % 1000;
    let mut fresh = || {
        *next_ref += 1;
        *next_ref
    };
    let message = match (op.kind, resting) {
        (0 | 1 | 2, _) | (_, None) if op.kind != 7 && op.kind != 8 => Message::AddOrder(AddOrder {
            order_ref: fresh(),
            side: side_of(op.buy),
            shares: op.shares,
            stock: Symbol::new("TEST"),
            price,
            attribution: (op.kind == 2).then_some(*b"MPID"),
        }),
        (3, Some(o)) => Message::OrderExecuted {
            order_ref: o.order_ref,
            shares: op.shares.min(o.shares),
            match_number: 1,
        },
        (4, Some(o)) => Message::OrderExecutedWithPrice {
            order_ref: o.order_ref,
            shares: op.shares.min(o.shares),
            match_number: 2,
            printable: if op.buy { b'Y' } else { b'N' },
            price,
        },
        (5, Some(o)) => Message::OrderCancel {
            order_ref: o.order_ref,
            shares: op.shares.min(o.shares),
        },
        (6, Some(o)) => Message::OrderDelete { order_ref: o.order_ref },
        (7, r) => Message::OrderReplace {
            old_ref: r.map_or(unknown, |o| o.order_ref),
            new_ref: fresh(),
            shares: op.shares,
            price,
        },
        (8, _) => match op.pick % 3 {
            0 => Message::NonDisplayedTrade {
                order_ref: 0,
                side: side_of(op.buy),
                shares: op.shares,
                stock: Symbol::new("TEST"),
                price,
                match_number: 3,
            },
            1 => Message::OrderDelete { order_ref: unknown },
            _ => Message::OrderExecuted {
                order_ref: unknown,
                shares: op.shares,
                match_number: 4,
            },
        },
        _ => unreachable!(),
    };
    MarketEvent {
        timestamp_ns: *now,
        message,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn encode_decode_round_trip(msg in arb_message(), secs in 0u32..86_400, nanos in 0u64..1_000_000_000) {
        let timestamp_ns = match msg {
            Message::Seconds { seconds } => seconds as u64 * 1_000_000_000,
            _ => secs as u64 * 1_000_000_000 + nanos,
        };
        let ev = MarketEvent { timestamp_ns, message: msg };
        let payload = encode_message(&ev).unwrap();
        prop_assert_eq!(Some(payload.len()), Message::payload_len(payload[0]));
        let back = decode_message(&payload, secs).unwrap();
        prop_assert_eq!(back, ev);
    }

    #[test]
    fn random_sequences_match_naive_book(ops in prop::collection::vec(arb_op(), 1..400)) {
        let mut book = OrderBook::new(Symbol::new("TEST"));
        let mut naive = NaiveBook::default();
        let mut trades = Vec::new();
        let (mut next_ref, mut now) = (0u64, 34_200_000_000_000u64);
        for op in ops {
            let ev = realize(op, &naive, &mut next_ref, &mut now);
            naive.apply(&ev).unwrap();
            book.apply_event(&ev, &mut trades).unwrap();
            prop_assert_eq!(book.audit(), Ok(()));
            prop_assert_eq!(compare_books(&book, &naive), None);
        }
        prop_assert_eq!(trades, naive.trades);
    }

    #[test]
    fn side_volume_changes_by_event_shares(ops in prop::collection::vec(arb_op(), 1..300)) {
        let mut book = OrderBook::new(Symbol::new("TEST"));
        let mut naive = NaiveBook::default();
        let mut trades = Vec::new();
        let (mut next_ref, mut now) = (0u64, 0u64);
        for op in ops {
            let ev = realize(op, &naive, &mut next_ref, &mut now);
            let before = [book.side_volume(Side::Buy), book.side_volume(Side::Sell)];
            let removed = match ev.message {
                Message::OrderExecuted { order_ref, shares, .. }
                | Message::OrderExecutedWithPrice { order_ref, shares, .. }
                | Message::OrderCancel { order_ref, shares } => book.get(order_ref).map(|o| (o.side, shares as i64)),
                Message::OrderDelete { order_ref } => book.get(order_ref).map(|o| (o.side, o.shares as i64)),
                _ => None,
            };
            naive.apply(&ev).unwrap();
            book.apply_event(&ev, &mut trades).unwrap();
            let after = [book.side_volume(Side::Buy), book.side_volume(Side::Sell)];
            let slot = |s: Side| usize::from(s == Side::Sell);
            let delta = |s: Side| after[slot(s)] as i64 - before[slot(s)] as i64;
            match (ev.message, removed) {
                (Message::AddOrder(a), _) => prop_assert_eq!(delta(a.side), a.shares as i64),
                (_, Some((side, n))) => {
                    prop_assert_eq!(delta(side), -n);
                    prop_assert_eq!(delta(side.opposite()), 0);
                }
                (Message::OrderReplace { .. }, _) => {}
                _ => prop_assert_eq!((delta(Side::Buy), delta(Side::Sell)), (0, 0)),
            }
        }
    }
}

#[test]
fn overdecrement_is_fatal_in_both() {
    let add = MarketEvent {
        timestamp_ns: 1,
        message: Message::AddOrder(AddOrder {
            order_ref: 7,
            side: Side::Buy,
            shares: 100,
            stock: Symbol::new("TEST"),
            price: Price4(10_000),
            attribution: None,
        }),
    };
    let cancel = MarketEvent {
        timestamp_ns: 2,
        message: Message::OrderCancel {
            order_ref: 7,
            shares: 101,
        },
    };
    let mut book = OrderBook::new(Symbol::new("TEST"));
    let mut naive = NaiveBook::default();
    let mut trades = Vec::new();
    book.apply_event(&add, &mut trades).unwrap();
    naive.apply(&add).unwrap();
    assert_eq!(
        book.apply_event(&cancel, &mut trades),
        Err(BookError::Overdecrement {
            order_ref: 7,
            remaining: 100,
            requested: 101
        })
    );
    assert!(naive.apply(&cancel).is_err());
}

#[test]
fn synthetic_streams_match_naive_book() {
    for seed in 0..4 {
        let process = RandomSpikes::default().sample(seed);
        let params = BookParams {
            background_rate: 200.0,
            ..BookParams::default()
        };
        let mut book = OrderBook::new(params.symbol);
        let mut naive = NaiveBook::default();
        let mut trades = Vec::new();
        for ev in gen_itch(&process, params, 600.0, seed).take(50_000) {
            book.apply_event(&ev, &mut trades).unwrap();
            naive.apply(&ev).unwrap();
        }
        book.audit().unwrap();
        assert_eq!(compare_books(&book, &naive), None, "seed {seed}");
        assert_eq!(trades, naive.trades, "seed {seed}");
        assert_eq!(book.stats().crossed_after_event, 0);
        assert_eq!(book.stats().unknown_refs, 0);
    }
}

#[test]
fn capture_file_replays_to_the_same_book() {
    let process = RandomSpikes::default().sample(11);
    let params = BookParams::default();
    let events: Vec<MarketEvent> = gen_itch(&process, params.clone(), 120.0, 11).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.itch.gz");
    let frames = write_capture(&path, events.iter()).unwrap();
    assert_eq!(frames as usize, events.len());

    let file = std::fs::File::open(&path).unwrap();
    let decoded: Vec<MarketEvent> = EventStream::new(flate2::read::MultiGzDecoder::new(file), None)
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(decoded, events);

    let mut dec = Decoder::new();
    let first = encode_message(&events[0]).unwrap();
    assert_eq!(dec.decode(&first).unwrap().message, events[0].message);
}
