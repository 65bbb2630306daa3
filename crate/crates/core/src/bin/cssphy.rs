//! Command-line front end: modulate, demodulate and decode IQ files, and run
//! BER sweeps.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 decode failure,
//! 3 I/O error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cssphy::ber::{self, BerRecord, Curve, ReplicationOptions, StopRule, SweepSpec};
use cssphy::channel::simulate;
use cssphy::config::Config;
use cssphy::demodulator::Demodulator;
use cssphy::framing::{frame_data_symbols, frame_segments, Frame};
use cssphy::iq::{read_iq, read_iq_raw, write_iq, write_iq_raw};
use cssphy::modulator::{render, IqBuffer};
use cssphy::receiver::decode_stream;
use cssphy::Error;

const SEED_ENV: &str = "CSSPHY_SEED";

#[derive(Parser)]
#[command(name = "cssphy", version, about = "Chirp spread spectrum PHY: modulation, decoding and BER simulation")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Suppress progress output on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RawInput {
    /// Input IQ file.
    #[arg(short, long)]
    input: PathBuf,
    /// Treat the input as headerless interleaved f32 I/Q.
    #[arg(long, requires = "rate")]
    raw: bool,
    /// Sample rate of a headerless input, in Hz.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Output CSV file.
    #[arg(short, long)]
    out: PathBuf,
    /// Master seed; overrides CSSPHY_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum bit errors per SNR point.
    #[arg(long)]
    min_errors: Option<u64>,
    /// Maximum frames per SNR point.
    #[arg(long)]
    max_frames: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a frame from a payload file and write it as IQ.
    Modulate {
        /// Payload bytes.
        #[arg(short, long)]
        payload: PathBuf,
        /// Output IQ file.
        #[arg(short, long)]
        out: PathBuf,
        /// Pass the frame through the [channel] impairments.
        #[arg(long)]
        apply_channel: bool,
        /// Write a headerless file.
        #[arg(long)]
        raw: bool,
    },
    /// Demodulate consecutive symbols from an aligned IQ stream.
    Demodulate {
        #[command(flatten)]
        input: RawInput,
        /// First sample of the first symbol.
        #[arg(long, default_value_t = 0)]
        offset: usize,
        /// Number of symbols; all whole symbols when omitted.
        #[arg(long)]
        count: Option<usize>,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Detect, synchronize and decode one frame.
    Decode {
        #[command(flatten)]
        input: RawInput,
        /// Decoded payload bytes.
        #[arg(short, long)]
        out: PathBuf,
        /// Per-symbol diagnostics CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the [sweep] section of the configuration.
    Ber {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// CFO experiment: three receivers at 10 kHz and 10.1 kHz plus a baseline.
    Fig2 {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// SFO experiment: realignment at 5 Hz and 10 Hz, short and long frames.
    Fig3 {
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

enum Failure {
    Usage(String),
    Decode(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Decode(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Decode(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) | Error::IqFormat(_) => Failure::Io(msg),
            Error::NoPreamble | Error::SyncWordNotFound | Error::HeaderDecode(_) => Failure::Decode(msg),
            _ => Failure::Usage(msg),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> CliResult<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Config::from_toml(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn master_seed(cfg: &Config, flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(cfg.master_seed()),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_input(input: &RawInput) -> CliResult<IqBuffer> {
    let f = File::open(&input.input).map_err(|e| io_err(&input.input, e))?;
    let r = BufReader::new(f);
    let buf = match (input.raw, input.rate) {
        (true, Some(rate)) => read_iq_raw(r, rate),
        (false, None) => read_iq(r),
        (false, Some(_)) => return Err(Failure::Usage("--rate only applies with --raw".into())),
        (true, None) => unreachable!("clap enforces --rate with --raw"),
    };
    buf.map_err(|e| match e {
        Error::Io(_) | Error::IqFormat(_) => io_err(&input.input, e),
        other => other.into(),
    })
}

fn modulate(cfg: &Config, payload: &Path, out: &Path, apply_channel: bool, raw: bool) -> CliResult {
    let params = cfg.lora_params()?;
    let frame_cfg = cfg.frame_config(&params)?;
    let bytes = fs::read(payload).map_err(|e| io_err(payload, e))?;
    let frame = Frame::new(bytes, frame_cfg)?;
    let segments = frame_segments(&frame_data_symbols(&frame, &params)?, frame_cfg.sync_word, &params)?;
    let iq = if apply_channel { simulate(&segments, &params, &cfg.impairments()?)? } else { render(segments, &params) };
    let mut w = create(out)?;
    if raw {
        write_iq_raw(&mut w, &iq)?;
    } else {
        write_iq(&mut w, &iq)?;
    }
    w.flush().map_err(|e| io_err(out, e))
}

fn demodulate(cfg: &Config, input: &RawInput, offset: usize, count: Option<usize>, out: Option<&Path>) -> CliResult {
    let params = cfg.lora_params()?;
    let iq = read_input(input)?;
    let len = params.samples_per_symbol();
    let available = iq.len().saturating_sub(offset) / len;
    let count = count.unwrap_or(available);
    if count > available {
        return Err(Error::InsufficientSamples { needed: offset + count * len, available: iq.len() }.into());
    }
    let mut demod = Demodulator::new(&params);
    let mut text = String::from("symbol_index,sample_offset,bin,peak_magnitude\n");
    for i in 0..count {
        let start = offset + i * len;
        let r = demod.demod(&iq[start..start + len])?;
        text.push_str(&format!("{i},{start},{},{}\n", r.symbol.value(), r.peak_magnitude));
    }
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn decode(cfg: &Config, input: &RawInput, out: &Path, trace: Option<&Path>, quiet: bool) -> CliResult {
    let params = cfg.lora_params()?;
    let frame_cfg = cfg.frame_config(&params)?;
    let rx = cfg.receiver_config(&params)?;
    let iq = read_input(input)?;
    let report = decode_stream(&iq, &params, &frame_cfg, &rx)?;
    if let Some(path) = trace {
        let dphi = report.cfo.map_or(0.0, |c| c.delta_phi_hat);
        let mut text = String::from(
            "symbol_index,sample_offset,peak_bin,peak_magnitude,second_magnitude,delta_phi_hat,s_pre_hat\n",
        );
        for t in &report.trace {
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.index, t.sample_offset, t.peak_bin, t.peak_magnitude, t.second_magnitude, dphi, report.sync.s_pre_hat
            ));
        }
        write_file(path, text.as_bytes())?;
    }
    if !quiet {
        let s = &report.parsed.stats;
        eprintln!(
            "frame at sample {}: {} bytes, {} corrected, {} uncorrectable codewords",
            report.data_start,
            report.parsed.frame.payload.len(),
            s.corrected,
            s.uncorrectable
        );
    }
    if !report.parsed.crc_ok {
        return Err(Failure::Decode("payload CRC mismatch".into()));
    }
    write_file(out, &report.parsed.frame.payload)
}

fn apply_overrides(opts: &mut ReplicationOptions, cfg: &Config, args: &SweepArgs) -> CliResult {
    opts.seed = master_seed(cfg, args.seed)?;
    if let Some(n) = args.min_errors {
        opts.stop.min_bit_errors = n;
    }
    if let Some(n) = args.max_frames {
        opts.stop.max_frames = n;
    }
    Ok(())
}

fn progress(quiet: bool) -> impl FnMut(&SweepSpec, &BerRecord) {
    move |spec, rec| {
        if !quiet {
            eprintln!(
                "{:<26} cfo {:>7} Hz  sfo {:>4} Hz  os {}  len {:>3}  snr {:>6.1} dB  ber {:.3e}  frames {:>6}  {:.1?}",
                spec.mode.label(),
                spec.impairments.cfo_hz,
                spec.impairments.sfo_hz,
                spec.params.os(),
                spec.frame_len_symbols,
                rec.snr_db,
                rec.ber,
                rec.frames,
                rec.wall_time
            );
        }
    }
}

fn write_curves(path: &Path, curves: &[Curve]) -> CliResult {
    write_file(path, ber::curves_to_csv(curves).as_bytes())
}

fn run_ber(cfg: &Config, args: &SweepArgs, quiet: bool) -> CliResult {
    let mut spec = cfg.sweep_spec()?;
    spec.seed = master_seed(cfg, args.seed)?;
    spec.stop = StopRule {
        min_bit_errors: args.min_errors.unwrap_or(spec.stop.min_bit_errors),
        max_frames: args.max_frames.unwrap_or(spec.stop.max_frames),
    };
    let mut report = progress(quiet);
    let records = ber::run_sweep_with(&spec, |r| report(&spec, r))?;
    write_curves(&args.out, &[Curve { spec, records }])
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Modulate { payload, out, apply_channel, raw } => modulate(&cfg, payload, out, *apply_channel, *raw),
        Command::Demodulate { input, offset, count, out } => demodulate(&cfg, input, *offset, *count, out.as_deref()),
        Command::Decode { input, out, trace } => decode(&cfg, input, out, trace.as_deref(), cli.quiet),
        Command::Ber { sweep } => run_ber(&cfg, sweep, cli.quiet),
        Command::Fig2 { sweep } => {
            let mut opts = ReplicationOptions::fig2();
            apply_overrides(&mut opts, &cfg, sweep)?;
            let curves = ber::replicate_fig2(&opts, &mut progress(cli.quiet))?;
            write_curves(&sweep.out, &curves)
        }
        Command::Fig3 { sweep } => {
            let mut opts = ReplicationOptions::fig3();
            apply_overrides(&mut opts, &cfg, sweep)?;
            let curves = ber::replicate_fig3(&opts, &mut progress(cli.quiet))?;
            write_curves(&sweep.out, &curves)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cssphy: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
