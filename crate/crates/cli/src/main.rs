use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lobflow::dump::{dump_attributes, write_csv, AttributeConfig, DumpError, RunConfig, RunSummary};
use lobflow::edge::EdgeConfig;
use lobflow::flow::FlowConfig;
use lobflow::itch::{create_capture, CaptureWriter};
use lobflow::synth::{gen_itch, BookParams, RandomSpikes, SizeDist, Spike, SpikeProcess};
use lobflow::{Price4, Symbol};

#[derive(Parser)]
#[command(name = "lobflow", version, about = "Order book attributes from ITCH 4.1 captures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a gzip ITCH 4.1 capture for one symbol and write one CSV row
    /// per book modification.
    Dump(DumpArgs),
    /// Replay a synthetic spike-driven stream and write the same CSV.
    Simulate(SimulateArgs),
    /// Write a synthetic stream as a gzip ITCH 4.1 capture.
    GenItch(GenItchArgs),
}

#[derive(Args)]
struct DumpArgs {
    /// Gzip-compressed ITCH 4.1 capture.
    input: PathBuf,
    /// Stock symbol, e.g. AAPL.
    symbol: String,
    #[command(flatten)]
    attributes: AttributeArgs,
    /// Decode on the calling thread instead of a separate one.
    #[arg(long)]
    no_pipeline: bool,
}

#[derive(Args)]
struct AttributeArgs {
    /// Relaxation time of the flow estimator, seconds.
    #[arg(long, default_value_t = 128.0)]
    tau: f64,
    /// Flow estimator basis size (2..=12).
    #[arg(long, default_value_t = 7)]
    n_basis: usize,
    /// Book-edge cutoff from the best price, dollars.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Gauss–Radau nodes for the edge volume.
    #[arg(long, default_value_t = 10)]
    radau_nodes: usize,
    /// Sliding-window length, seconds.
    #[arg(long, default_value_t = 64.0)]
    window: f64,
    /// First row time, decimal hours (9.75 is 9:45am).
    #[arg(long)]
    from: Option<f64>,
    /// Last row time, decimal hours.
    #[arg(long)]
    to: Option<f64>,
    /// Recompute edge values every n-th row and carry them forward between.
    #[arg(long, default_value_t = 1)]
    edge_every_n: u64,
    /// Output CSV path (standard output when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl AttributeArgs {
    fn config(&self) -> AttributeConfig {
        AttributeConfig {
            flow: FlowConfig {
                tau: self.tau,
                n_basis: self.n_basis,
                ..FlowConfig::default()
            },
            edge: EdgeConfig {
                cutoff: self.cutoff,
                radau_nodes: self.radau_nodes,
                ..EdgeConfig::default()
            },
            window: self.window,
            edge_every_n: self.edge_every_n,
            from_hours: self.from,
            to_hours: self.to,
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::with_capacity(
                1 << 16,
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::with_capacity(1 << 16, io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct ProcessArgs {
    /// Base trade rate, trades per second.
    #[arg(long, default_value_t = 0.5)]
    lambda0: f64,
    /// Explicit spike as onset:amplitude:theta (seconds, trades/s, seconds).
    #[arg(long = "spike", value_parser = parse_spike)]
    spikes: Vec<Spike>,
    /// Number of random spikes added to the explicit ones.
    #[arg(long, default_value_t = 0)]
    random_spikes: usize,
    #[arg(long, default_value_t = 5.0)]
    amplitude_min: f64,
    #[arg(long, default_value_t = 50.0)]
    amplitude_max: f64,
    /// Random relaxation times are log-uniform on [theta-min, theta-max].
    #[arg(long, default_value_t = 1.0)]
    theta_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    theta_max: f64,
    /// Minimum gap between random spike onsets, seconds.
    #[arg(long, default_value_t = 0.0)]
    min_separation: f64,
    /// Mean trade size (geometric, at least one share).
    #[arg(long, default_value_t = 100.0)]
    size_mean: f64,
    /// Use this fixed trade size instead.
    #[arg(long)]
    fixed_size: Option<u32>,
    /// Stream length, seconds.
    #[arg(long, default_value_t = 3600.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Symbol of the synthetic stream.
    #[arg(long, default_value = "SYNTH")]
    symbol: String,
    /// Background (non-trade) book events per second.
    #[arg(long, default_value_t = 50.0)]
    background_rate: f64,
    /// Start time of day, decimal hours.
    #[arg(long, default_value_t = 9.5)]
    start_hours: f64,
    /// Initial reference price, dollars.
    #[arg(long, default_value_t = 100.0)]
    price: f64,
}

impl ProcessArgs {
    fn build(&self) -> Result<(SpikeProcess, BookParams)> {
        if self.lambda0 < 0.0 || !(self.horizon > 0.0) {
            bail!("lambda0 must be non-negative and horizon positive");
        }
        let size = match self.fixed_size {
            Some(v) => SizeDist::Fixed(v),
            None => SizeDist::Geometric { mean: self.size_mean },
        };
        let mut spikes = self.spikes.clone();
        if self.random_spikes > 0 {
            let random = RandomSpikes {
                count: self.random_spikes,
                horizon: self.horizon,
                lambda0: self.lambda0,
                amplitude: (self.amplitude_min, self.amplitude_max),
                theta: (self.theta_min, self.theta_max),
                min_separation: self.min_separation,
                size,
            };
            spikes.extend(random.sample(self.seed).spikes);
        }
        let process = SpikeProcess::new(self.lambda0, spikes, size);
        let params = BookParams {
            symbol: Symbol::new(&self.symbol),
            start_ns: (self.start_hours * 3.6e12) as u64,
            mid: Price4::from_dollars(self.price),
            background_rate: self.background_rate,
            ..BookParams::default()
        };
        Ok((process, params))
    }
}

fn parse_spike(s: &str) -> Result<Spike, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [onset, amplitude, theta] = parts[..] else {
        return Err("expected onset:amplitude:theta".into());
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    let spike = Spike {
        onset: num(onset)?,
        amplitude: num(amplitude)?,
        theta: num(theta)?,
    };
    if spike.amplitude < 0.0 || !(spike.theta > 0.0) {
        return Err("amplitude must be non-negative and theta positive".into());
    }
    Ok(spike)
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    attributes: AttributeArgs,
    /// Also write the generated stream as a gzip ITCH 4.1 capture.
    #[arg(long)]
    itch_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenItchArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Output capture path.
    #[arg(short, long)]
    output: PathBuf,
}

fn run_dump(args: DumpArgs) -> Result<RunSummary, DumpError> {
    let config = RunConfig {
        input: args.input,
        symbol: Symbol::new(&args.symbol),
        attributes: args.attributes.config(),
        pipelined: !args.no_pipeline,
    };
    let out = args.attributes.writer().map_err(|e| DumpError::Config(format!("{e:#}")))?;
    dump_attributes(&config, out)
}

fn capture(path: &PathBuf) -> Result<CaptureWriter> {
    create_capture(path).with_context(|| format!("creating {}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> Result<RunSummary> {
    let (process, params) = args.process.build()?;
    let config = args.attributes.config();
    let out = args.attributes.writer()?;
    let mut itch = args.itch_out.as_ref().map(capture).transpose()?;
    let mut write_error = None;
    let events = gen_itch(&process, params.clone(), args.process.horizon, args.process.seed).inspect(|ev| {
        if let Some(w) = itch.as_mut() {
            if let Err(e) = w.write_event(ev) {
                write_error.get_or_insert(e);
            }
        }
    });
    let summary = write_csv(events.map(Ok), params.symbol, config, out)?;
    if let Some(e) = write_error {
        return Err(e).context("writing ITCH output");
    }
    if let Some(w) = itch {
        let frames = w.finish()?;
        log::info!("wrote {frames} frames");
    }
    Ok(summary)
}

fn run_gen_itch(args: GenItchArgs) -> Result<()> {
    let (process, params) = args.process.build()?;
    let mut w = capture(&args.output)?;
    for ev in gen_itch(&process, params, args.process.horizon, args.process.seed) {
        w.write_event(&ev)?;
    }
    let frames = w.finish()?;
    eprintln!("frames={frames}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dump(args) => run_dump(args).map(|s| eprintln!("{}", s.summary_line())).map_err(|e| {
            match e.offset() {
                Some(offset) => anyhow::anyhow!("{e} (byte offset {offset})"),
                None => anyhow::Error::new(e),
            }
        }),
        Command::Simulate(args) => run_simulate(args).map(|s| eprintln!("{}", s.summary_line())),
        Command::GenItch(args) => run_gen_itch(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
