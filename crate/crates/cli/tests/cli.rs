use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Output};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

const HEADER: &str = "t_hours,t_ns,p_last,p_buy,p_sell,p_buy_minus_last,p_sell_minus_last,v_best_buy,v_best_sell,eta_disbalance,t_book_buy_s,t_book_sell_s,i_sliding,i_now,lambda_min,lambda_max,c_max_sq,v_christoffel_buy,v_christoffel_sell,tau_edge_buy,tau_edge_sell";

const PROCESS: &[&str] = &["--horizon", "120", "--seed", "4", "--spike", "30:20:15", "--background-rate", "30"];

fn lobflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lobflow")).args(args).output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gzip(path: &Path, bytes: &[u8]) {
    let mut enc = GzEncoder::new(std::fs::File::create(path).unwrap(), Compression::fast());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap();
}

#[test]
fn dump_of_generated_capture_equals_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("s.itch.gz");
    let cap = capture.to_str().unwrap();
    ok(lobflow(&[&["gen-itch", "-o", cap], PROCESS].concat()));
    let simulated = ok(lobflow(&[&["simulate"], PROCESS].concat())).stdout;
    let dumped = ok(lobflow(&["dump", cap, "SYNTH"]));
    assert_eq!(dumped.stdout, simulated);
    let stderr = String::from_utf8(dumped.stderr).unwrap();
    assert!(stderr.contains("cancellation_ratio="), "{stderr}");

    let text = String::from_utf8(simulated).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    assert_eq!(lines.next(), Some(HEADER));
    let width = HEADER.split(',').count();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), width, "{line}");
        for c in &cells {
            assert!(*c == "nan" || c.parse::<f64>().is_ok(), "{c}");
        }
        let t_hours: f64 = cells[0].parse().unwrap();
        let t_ns: u64 = cells[1].parse().unwrap();
        assert!((t_hours - t_ns as f64 / 3.6e12).abs() <= 5e-10);
        assert_eq!(cells[0].split('.').nth(1).map(str::len), Some(9));
        rows += 1;
    }
    assert!(rows > 1000);
}

#[test]
fn simulate_is_deterministic_and_writes_the_capture() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let itch = dir.path().join("a.itch.gz");
    ok(lobflow(
        &[&["simulate", "-o", a.to_str().unwrap(), "--itch-out", itch.to_str().unwrap()], PROCESS].concat(),
    ));
    let again = ok(lobflow(&[&["simulate"], PROCESS].concat())).stdout;
    assert_eq!(std::fs::read(&a).unwrap(), again);
    let replayed = ok(lobflow(&["dump", itch.to_str().unwrap(), "SYNTH", "--no-pipeline"])).stdout;
    assert_eq!(replayed, again);
}

#[test]
fn time_range_and_unknown_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("s.itch.gz");
    let cap = capture.to_str().unwrap();
    ok(lobflow(&[&["gen-itch", "-o", cap], PROCESS].concat()));
    // The stream starts at 9.5 h and lasts two minutes.
    let out = ok(lobflow(&["dump", cap, "SYNTH", "--from", "9.51", "--to", "9.52"])).stdout;
    let text = String::from_utf8(out).unwrap();
    let times: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(!times.is_empty());
    assert!(times.iter().all(|&t| (9.51..=9.52).contains(&t)));

    let none = ok(lobflow(&["dump", cap, "MSFT"])).stdout;
    assert_eq!(String::from_utf8(none).unwrap().lines().count(), 2);
}

#[test]
fn empty_capture_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.gz");
    gzip(&path, &[]);
    let out = ok(lobflow(&["dump", path.to_str().unwrap(), "AAPL"])).stdout;
    assert_eq!(String::from_utf8(out).unwrap(), format!("# schema=1\n{HEADER}\n"));
}

#[test]
fn truncated_frame_fails_with_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("s.itch.gz");
    ok(lobflow(&[&["gen-itch", "-o", capture.to_str().unwrap()], PROCESS].concat()));
    let mut raw = Vec::new();
    MultiGzDecoder::new(std::fs::File::open(&capture).unwrap()).read_to_end(&mut raw).unwrap();
    let cut = dir.path().join("cut.gz");
    gzip(&cut, &raw[..raw.len() - 3]);
    let out = lobflow(&["dump", cut.to_str().unwrap(), "SYNTH", "--no-pipeline"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("byte offset"), "{stderr}");
}

#[test]
fn invalid_arguments_are_rejected() {
    let bad_spike = lobflow(&["simulate", "--spike", "10:5"]);
    assert!(!bad_spike.status.success());
    assert!(String::from_utf8_lossy(&bad_spike.stderr).contains("onset:amplitude:theta"));
    let negative_theta = lobflow(&["simulate", "--spike", "10:5:-1"]);
    assert!(!negative_theta.status.success());
    let bad_basis = lobflow(&[&["simulate", "--n-basis", "40"], PROCESS].concat());
    assert!(!bad_basis.status.success());
}
