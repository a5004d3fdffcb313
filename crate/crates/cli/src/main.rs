//! `bdm` — botnet DNS-traffic detector.
//!
//! Subcommands: `analyze` runs the full capture -> analyze -> classify
//! pipeline over an offline trace, `simulate` emits labeled synthetic
//! traffic, `report` computes evaluation rates against ground truth,
//! and `db` inspects or clears the domain database.
//!
//! Exit codes: 0 clean, 1 error, 2 success with alerts emitted.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bdm", version, about = "Botnet detection over offline DNS traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct DetectorArgs {
    /// Interval length in seconds
    #[arg(long, default_value_t = 60.0)]
    interval: f64,
    /// Monitoring period T_m in seconds
    #[arg(long, default_value_t = 600.0)]
    tm: f64,
    /// Similarity threshold for abnormal classification
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Minimum distinct MACs for a host group
    #[arg(long = "group-min", default_value_t = 2)]
    group_min: usize,
    /// Minimum queries for the single-host repeated-query rule
    #[arg(long = "repeat-min", default_value_t = 3)]
    repeat_min: usize,
    /// Max coefficient of variation of gaps counted as periodic
    #[arg(long = "periodicity-tol", default_value_t = 0.5)]
    periodicity_tol: f64,
    /// Require blacklist match AND periodicity for new single-host domains
    #[arg(long)]
    strict_single_host: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a capture and update the domain database
    Analyze {
        /// Classic pcap capture file
        #[arg(long, conflicts_with = "events")]
        pcap: Option<PathBuf>,
        /// JSON event-log file (one object per line)
        #[arg(long)]
        events: Option<PathBuf>,
        /// Database directory
        #[arg(long, env = "BDM_DB", default_value = "bdm-db")]
        db: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Generate a labeled synthetic DNS trace
    Simulate {
        /// Number of bot hosts
        #[arg(long, default_value_t = 10)]
        bots: usize,
        /// Number of legitimate hosts
        #[arg(long, default_value_t = 20)]
        legit: usize,
        /// Bot query period in seconds
        #[arg(long, default_value_t = 60.0)]
        period: f64,
        /// Trace duration in seconds
        #[arg(long, default_value_t = 600.0)]
        tm: f64,
        /// Size of the legitimate domain pool
        #[arg(long, default_value_t = 50)]
        pool: usize,
        /// Mean legitimate queries per host per 60 s interval
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        /// Domain the bots query
        #[arg(long = "bot-domain", default_value = "www.xxx.com")]
        bot_domain: String,
        /// Add a botmaster pre-check host
        #[arg(long)]
        precheck: bool,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace output path
        #[arg(long, default_value = "trace.jsonl")]
        out: PathBuf,
        /// Labels output path
        #[arg(long, default_value = "labels.jsonl")]
        labels: PathBuf,
    },
    /// Compute false-positive and detection rates against labels
    Report {
        /// Database directory; repeat for multi-run averages
        #[arg(long, env = "BDM_DB", default_value = "bdm-db")]
        db: Vec<PathBuf>,
        /// Ground-truth labels file
        #[arg(long)]
        labels: PathBuf,
        /// Report output path
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Inspect or clear the domain database
    Db {
        /// Database directory
        #[arg(long, env = "BDM_DB", default_value = "bdm-db")]
        db: PathBuf,
        #[command(subcommand)]
        action: DbAction,
    },
}

#[derive(Subcommand)]
enum DbAction {
    /// Print domain records and the blacklist in stable order
    List,
    /// Remove the database files
    Clear {
        /// Confirm the removal
        #[arg(long)]
        yes: bool,
    },
}

fn main() -> ExitCode {
    // Die quietly when piped into head(1) and friends.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            pcap,
            events,
            db,
            detector,
        } => commands::analyze(pcap, events, db, detector),
        Command::Simulate {
            bots,
            legit,
            period,
            tm,
            pool,
            rate,
            bot_domain,
            precheck,
            seed,
            out,
            labels,
        } => commands::simulate(
            bots, legit, period, tm, pool, rate, bot_domain, precheck, seed, out, labels,
        ),
        Command::Report { db, labels, out } => commands::report(db, labels, out),
        Command::Db { db, action } => match action {
            DbAction::List => commands::db_list(db),
            DbAction::Clear { yes } => commands::db_clear(db, yes),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
