use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coexsim::selftest;
use coexsim::RunConfig;
use coexsim_core::codec::ConvCode;

/// Packet error rate sweeps for 802.11g OFDM under Bluetooth HV1
/// interference, with symbol erasures at the receiver.
#[derive(Parser)]
#[command(name = "coexsim", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fast invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SelftestArgs {
    /// Decode with these octal generators instead of 133,171.
    #[arg(long, hide = true, value_name = "G0,G1")]
    debug_generators: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Data rates in Mb/s, comma separated.
    #[arg(long, value_name = "LIST")]
    rates: Option<String>,
    /// Eb/N0 grid in dB, comma separated.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    ebn0: Option<String>,
    /// Erasure counts, comma separated.
    #[arg(long, value_name = "LIST")]
    erasures: Option<String>,
    /// Signal-to-interference ratio in dB.
    #[arg(long, value_name = "DB", allow_hyphen_values = true)]
    sir: Option<String>,
    /// Payload size in bytes.
    #[arg(long, value_name = "BYTES")]
    payload: Option<String>,
    /// RMS delay spread in ns.
    #[arg(long, value_name = "NS")]
    tau_rms: Option<String>,
    /// Enable the Bluetooth interferer.
    #[arg(long, value_name = "BOOL")]
    bt_enabled: Option<String>,
    /// Master seed.
    #[arg(long, value_name = "INT")]
    seed: Option<String>,
    /// Stop a cell after this many packet errors.
    #[arg(long, value_name = "N")]
    min_errors: Option<String>,
    /// Stop a cell after this many packets.
    #[arg(long, value_name = "N")]
    max_trials: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        [
            ("rates", &self.rates),
            ("ebn0_grid", &self.ebn0),
            ("erasures", &self.erasures),
            ("sir_db", &self.sir),
            ("payload_bytes", &self.payload),
            ("tau_rms_ns", &self.tau_rms),
            ("bt_enabled", &self.bt_enabled),
            ("seed", &self.seed),
            ("min_errors", &self.min_errors),
            ("max_trials", &self.max_trials),
            ("output", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

fn parse_generators(text: &str) -> Result<ConvCode, String> {
    let g: Vec<u8> = text
        .split(',')
        .map(|s| u8::from_str_radix(s.trim(), 8).map_err(|e| format!("`{s}`: {e}")))
        .collect::<Result<_, _>>()?;
    match g[..] {
        [g0, g1] => ConvCode::new(g0, g1).map_err(|e| e.to_string()),
        _ => Err("expected two octal generators".into()),
    }
}

fn selftest(args: &SelftestArgs) -> ExitCode {
    let code = match args.debug_generators.as_deref().map(parse_generators) {
        None => ConvCode::IEEE80211,
        Some(Ok(code)) => code,
        Some(Err(e)) => {
            eprintln!("error: --debug-generators: {e}");
            return ExitCode::from(1);
        }
    };
    let checks = selftest::run_all(&code);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    match checks.iter().find(|c| !c.passed) {
        Some(c) => {
            eprintln!("selftest failed: {}", c.name);
            ExitCode::from(3)
        }
        None => ExitCode::SUCCESS,
    }
}

fn run(args: &RunArgs) -> ExitCode {
    let cfg = match RunConfig::load(args.config.as_deref(), &args.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let workers = match args.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    match coexsim::run(&cfg, workers) {
        Ok(results) => {
            eprintln!("{} cells written to {}", results.len(), cfg.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    match &cli.command {
        Some(Command::Selftest(args)) => selftest(args),
        None => run(&cli.run),
    }
}
