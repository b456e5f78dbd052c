//! Command line front end.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad input files, unknown
//! ids, usage errors), 2 on internal errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use polylens::{KPolicy, Rating};
use serde::Serialize;

use crate::error::{ApiError, ApiResult};
use crate::service::{ingest_into, BenchRequest, Service, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "polylens", version, about = "Polymorphic lenses over a scholarly graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest papers/authors/venues JSONL into a data directory.
    Ingest {
        #[arg(long)]
        papers: PathBuf,
        #[arg(long)]
        authors: PathBuf,
        #[arg(long)]
        venues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    #[command(subcommand)]
    Feed(FeedCommand),
    #[command(subcommand)]
    Index(IndexCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// Data directory written by `ingest`.
    #[arg(long = "data", env = "POLYLENS_DATA", default_value = "data")]
    pub dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FeedCommand {
    Create {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        name: String,
        #[arg(long)]
        color: Option<String>,
    },
    /// Set a rating; `--rating none` clears it.
    Rate {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        feed: String,
        #[arg(long)]
        paper: String,
        #[arg(long, value_parser = parse_rating)]
        rating: RatingArg,
    },
    List {
        #[command(flatten)]
        data: DataArg,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct RatingArg(pub Option<Rating>);

fn parse_rating(s: &str) -> Result<RatingArg, String> {
    match s {
        "liked" | "like" => Ok(RatingArg(Some(Rating::Liked))),
        "disliked" | "dislike" => Ok(RatingArg(Some(Rating::Disliked))),
        "none" | "null" | "clear" => Ok(RatingArg(None)),
        other => Err(format!("expected liked, disliked or none, got `{other}`")),
    }
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    Build {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "sqrt:1")]
        policy: KPolicy,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    Run {
        #[command(flatten)]
        data: DataArg,
        /// Comma-separated K policies; defaults to the full sweep.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<KPolicy>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Comma-separated feed ids; defaults to every trainable feed.
        #[arg(long, value_delimiter = ',')]
        feeds: Vec<String>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> ApiResult<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn serve(dir: PathBuf, host: &str, port: u16) -> ApiResult<()> {
    let service = Arc::new(Service::open(dir)?);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| ApiError::invalid(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{addr}/api/v1");
        axum::serve(listener, crate::api::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

pub fn execute(command: Command) -> ApiResult<()> {
    match command {
        Command::Ingest {
            papers,
            authors,
            venues,
            out,
        } => print_json(&ingest_into(&papers, &authors, &venues, &out)?),
        Command::Serve { data, port, host } => serve(data.dir, &host, port),
        Command::Feed(FeedCommand::Create { data, name, color }) => {
            print_json(&Service::open(data.dir)?.create_feed(&name, color.as_deref())?)
        }
        Command::Feed(FeedCommand::Rate {
            data,
            feed,
            paper,
            rating,
        }) => print_json(&Service::open(data.dir)?.rate(&feed, &paper, rating.0)?),
        Command::Feed(FeedCommand::List { data }) => print_json(&Service::open(data.dir)?.list_feeds()),
        Command::Index(IndexCommand::Build { data, policy, seed }) => {
            print_json(&Service::open(data.dir)?.build_index(policy, seed)?)
        }
        Command::Bench(BenchCommand::Run {
            data,
            policies,
            seed,
            feeds,
            out,
        }) => {
            let service = Service::open(data.dir)?;
            let report = service.run_bench(&BenchRequest {
                policies: (!policies.is_empty()).then_some(policies),
                seed,
                feeds: (!feeds.is_empty()).then_some(feeds),
            })?;
            match out {
                Some(path) => {
                    report.write_csv(std::fs::File::create(&path)?)?;
                    for note in &report.notes {
                        eprintln!("note: {note}");
                    }
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", report.to_csv_string()),
            }
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(detail) = &e.detail {
                eprintln!("detail: {detail}");
            }
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
