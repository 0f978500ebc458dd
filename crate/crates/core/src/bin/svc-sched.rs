use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svc_sched::cli::{self, Config, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use svc_sched::Result;

#[derive(Parser)]
#[command(name = "svc-sched", version, about = "Scalable video scheduling over slow-fading channels")]
struct Cli {
    /// TOML config with [stream], [channel], [mdp], [online] and [sim] sections.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Dotted override such as `sim.seed=3`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Directory that receives the timestamped run directories.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR, global = true)]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel model commands.
    Channel {
        #[command(subcommand)]
        command: ChannelCommand,
    },
    /// MDP commands.
    Mdp {
        #[command(subcommand)]
        command: MdpCommand,
    },
    /// Monte Carlo simulation of one scheduler.
    Simulate {
        /// mdp, online, online_no_isplit or sequential.
        #[arg(long)]
        scheduler: Option<String>,
        /// Policy file for the mdp scheduler.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Distortion lower bound.
    Bound {
        /// Bits per frame; defaults to the channel's mean throughput.
        #[arg(long)]
        r_avg: Option<f64>,
    },
    /// Comparison table of simulation summaries against a bound.
    Report {
        #[arg(long = "summary", num_args = 1..)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        bound: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChannelCommand {
    /// Builds the finite-state Markov channel and writes it as JSON.
    Build(ChannelArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Doppler frequency in Hz.
    #[arg(long)]
    fd: Option<f64>,
    /// Average SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    frame_rate: Option<f64>,
}

#[derive(Subcommand)]
enum MdpCommand {
    /// Enumerates the state space, solves for the average-cost policy and writes it.
    Solve,
}

fn push<T: std::fmt::Display>(o: &mut Vec<String>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        o.push(format!("{key}={v}"));
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut overrides = cli.overrides;
    let name = match &cli.command {
        Command::Channel { command: ChannelCommand::Build(a) } => {
            push(&mut overrides, "channel.f_d_hz", a.fd);
            push(&mut overrides, "channel.snr_avg_db", a.snr);
            push(&mut overrides, "channel.num_states", a.states);
            push(&mut overrides, "channel.frame_rate", a.frame_rate);
            "channel-build"
        }
        Command::Mdp { command: MdpCommand::Solve } => "mdp-solve",
        Command::Simulate { scheduler, policy, seed } => {
            push(&mut overrides, "sim.scheduler", scheduler.as_ref());
            push(&mut overrides, "sim.policy", policy.as_ref().map(|p| format!("{:?}", p.display().to_string())));
            push(&mut overrides, "sim.seed", *seed);
            "simulate"
        }
        Command::Bound { .. } => "bound",
        Command::Report { .. } => "report",
    };
    let cfg = Config::load(cli.config.as_deref(), &overrides)?;
    let dir = cli::create_run_dir(&cli.out, name)?;
    cli::record_config(&cfg, &dir, out)?;
    match cli.command {
        Command::Channel { .. } => cli::channel_build(&cfg, &dir, out).map(drop),
        Command::Mdp { .. } => cli::mdp_solve(&cfg, &dir, out).map(drop),
        Command::Simulate { .. } => cli::simulate(&cfg, &dir, out).map(drop),
        Command::Bound { r_avg } => cli::bound(&cfg, r_avg, &dir, out).map(drop),
        Command::Report { summaries, bound } => cli::report(&summaries, bound.as_deref(), &dir, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("{}", cli::error_record(&e));
            ExitCode::FAILURE
        }
    }
}
