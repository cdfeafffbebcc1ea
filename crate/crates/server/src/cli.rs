//! The operator command line. Failures print one line
//! `ERROR <Code> <message>` on stderr and exit with status 1.

use std::io::{IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use lago_dr_core::clock::{parse_utc, SystemClock, Timestamp};
use lago_dr_core::harvester::{self, HarvestMode, Harvester, HttpTransport};
use lago_dr_core::ingest;
use lago_dr_core::repo::{Checkpoint, Pid, RepoOptions, Repository};
use lago_dr_core::Error;

use crate::api::{self, AppState};
use crate::config::{ApiConfig, ConfigError};
use crate::hierarchy;

/// Test hook: abort the process when a deposit reaches the named checkpoint
/// (for example `before-commit` or `after-blob-0`).
pub const CRASH_ENV: &str = "LAGODR_CRASH_AT";

#[derive(Debug, Parser)]
#[command(name = "lago-dr", version, about = "LAGO data repository service and operator tools")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "LAGODR_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
        /// Harvest every registered peer at this interval, in seconds.
        #[arg(long)]
        harvest_every: Option<u64>,
    },
    /// Create the data directory and seed the hierarchy.
    Init {
        #[arg(long)]
        hierarchy: Option<PathBuf>,
    },
    /// Member provisioning.
    Members {
        #[command(subcommand)]
        command: MembersCommand,
    },
    /// Deposit one item-export directory.
    Deposit {
        dir: PathBuf,
        #[arg(long)]
        set: String,
        /// Deposit as this member; without it the operator deposits.
        #[arg(long)]
        token: Option<String>,
    },
    /// Deposit every entry of `<root>/entries.tsv`.
    BulkLoad {
        root: PathBuf,
        #[arg(long)]
        token: Option<String>,
    },
    /// Peer registry.
    Peers {
        #[command(subcommand)]
        command: PeersCommand,
    },
    /// Harvest one peer into the local aggregate.
    Harvest {
        peer: String,
        /// Re-read everything instead of changes since the watermark.
        #[arg(long)]
        full: bool,
    },
    /// Check every blob against its content address.
    Verify,
    /// Usage statistics as JSON.
    Stats {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        until: Option<String>,
        #[arg(long, default_value_t = api::DEFAULT_TOP_K)]
        k: usize,
    },
    /// Write an item as an export directory.
    Export {
        pid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum MembersCommand {
    /// Load `name \t email \t token \t communities [\t admin]` lines.
    Load { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum PeersCommand {
    Add { name: String, url: String },
    List,
    /// Load `name \t base-url` lines.
    Load { file: PathBuf },
}

#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: "BadConfig".into(),
            message: e.to_string(),
        }
    }
}

fn failure(code: &str, message: impl Into<String>) -> Failure {
    Failure {
        code: code.into(),
        message: message.into(),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("LAGODR_LOG").unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ERROR {} {}", f.code, f.message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = ApiConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    let mut out = std::io::stdout().lock();
    let mut say = |line: String| {
        let _ = writeln!(out, "{line}");
    };

    match cli.command {
        Command::Serve { listen, harvest_every } => {
            if let Some(l) = listen {
                config.listen = l;
            }
            let repo = Arc::new(open_repo(&config.data_dir)?);
            serve(repo, config, harvest_every.map(Duration::from_secs))
        }
        Command::Init { hierarchy: file } => {
            let repo = open_repo(&config.data_dir)?;
            let report = match file {
                Some(path) => hierarchy::seed_file(&repo, &path)?,
                None => hierarchy::SeedReport::default(),
            };
            say(format!(
                "initialized {} nodes={} created={} existing={}",
                config.data_dir.display(),
                repo.nodes()?.len(),
                report.created,
                report.existing
            ));
            Ok(())
        }
        Command::Members {
            command: MembersCommand::Load { file },
        } => {
            let repo = open_repo(&config.data_dir)?;
            let n = ingest::load_members(&repo, &file)?;
            say(format!("loaded members={n}"));
            Ok(())
        }
        Command::Deposit { dir, set, token } => {
            let repo = open_repo(&config.data_dir)?;
            let member = token.map(|t| ingest::authenticate(&repo, &t)).transpose()?;
            let item = ingest::deposit_dir(&repo, member.as_ref(), &dir, &set)?;
            say(format!("deposited {} set={} files={}", item.pid, item.set_spec.as_str(), item.bitstreams.len()));
            Ok(())
        }
        Command::BulkLoad { root, token } => {
            let repo = open_repo(&config.data_dir)?;
            let member = token.map(|t| ingest::authenticate(&repo, &t)).transpose()?;
            let report = ingest::bulk_load(&repo, member.as_ref(), &root)?;
            for f in &report.failed {
                say(format!("failed entry={} code={} {}", f.entry, f.code, f.message));
            }
            say(format!(
                "bulk-load attempted={} succeeded={} failed={}",
                report.attempted,
                report.succeeded,
                report.failed.len()
            ));
            match report.failed.first() {
                None => Ok(()),
                Some(first) => Err(failure(
                    &first.code,
                    format!("{} of {} entries failed", report.failed.len(), report.attempted),
                )),
            }
        }
        Command::Peers { command } => {
            let repo = open_repo(&config.data_dir)?;
            match command {
                PeersCommand::Add { name, url } => {
                    let p = harvester::register_peer(&repo, &name, &url)?;
                    say(format!("added peer={} url={}", p.name, p.base_url));
                }
                PeersCommand::Load { file } => {
                    let n = harvester::load_peers(&repo, &file)?;
                    say(format!("loaded peers={n}"));
                }
                PeersCommand::List => {
                    for p in harvester::peers(&repo)? {
                        let wm = p.watermark.map(|t| lago_dr_core::clock::format_utc(&t)).unwrap_or_else(|| "-".into());
                        say(format!("{}\t{}\t{}\t{}", p.name, p.base_url, p.status.as_str(), wm));
                    }
                }
            }
            Ok(())
        }
        Command::Harvest { peer, full } => {
            let repo = open_repo(&config.data_dir)?;
            let h = Harvester::new(Arc::new(HttpTransport::default()));
            let mode = if full { HarvestMode::Full } else { HarvestMode::Incremental };
            let r = h.harvest(&repo, &peer, mode)?;
            say(format!(
                "harvested peer={peer} mode={} fetched={} upserted={} deleted={} purged={} pages={}",
                if full { "full" } else { "incremental" },
                r.fetched,
                r.upserted,
                r.deleted,
                r.purged,
                r.pages
            ));
            Ok(())
        }
        Command::Verify => {
            let repo = open_repo(&config.data_dir)?;
            let report = repo.verify()?;
            for a in &report.corrupt {
                say(format!("corrupt {a}"));
            }
            for a in &report.missing {
                say(format!("missing {a}"));
            }
            say(format!(
                "verified blobs={} corrupt={} missing={}",
                report.checked,
                report.corrupt.len(),
                report.missing.len()
            ));
            if let Some(a) = report.corrupt.first() {
                return Err(failure("ChecksumMismatch", format!("{} corrupt blob(s), first {a}", report.corrupt.len())));
            }
            if let Some(a) = report.missing.first() {
                return Err(failure("UnknownAddress", format!("{} missing blob(s), first {a}", report.missing.len())));
            }
            Ok(())
        }
        Command::Stats { from, until, k } => {
            let repo = open_repo(&config.data_dir)?;
            let (from, until) = (instant(from.as_deref())?, instant(until.as_deref())?);
            let report = api::stats_window(&repo, from, until, k)?;
            say(serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Export { pid, out: dir } => {
            let repo = open_repo(&config.data_dir)?;
            let pid: Pid = pid.parse()?;
            repo.export_item(pid, &dir)?;
            say(format!("exported {pid} to {}", dir.display()));
            Ok(())
        }
    }
}

fn instant(s: Option<&str>) -> Result<Option<Timestamp>, Failure> {
    s.map(|v| parse_utc(v).ok_or_else(|| failure("BadInterval", format!("bad instant {v:?}"))))
        .transpose()
}

pub fn open_repo(dir: &Path) -> Result<Repository, Failure> {
    let mut options = RepoOptions::default();
    if let Ok(at) = std::env::var(CRASH_ENV) {
        options.fault_hook = Some(Arc::new(move |cp: Checkpoint| {
            if cp.to_string() == at {
                eprintln!("crash injected at {cp}");
                std::process::abort();
            }
        }));
    }
    Ok(Repository::open(dir, Arc::new(SystemClock), options)?)
}

fn serve(repo: Arc<Repository>, config: ApiConfig, harvest_every: Option<Duration>) -> Result<(), Failure> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| failure("StorageFailure", e.to_string()))?;
    rt.block_on(async move {
        let addr: SocketAddr = config
            .listen
            .parse()
            .map_err(|_| failure("BadConfig", format!("listen: bad socket address {:?}", config.listen)))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| failure("StorageFailure", format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| failure("StorageFailure", e.to_string()))?;
        if let Some(every) = harvest_every {
            tokio::spawn(scheduled_harvests(repo.clone(), every));
        }
        let app = api::router(AppState::new(repo, config));
        println!("listening on {local}");
        let _ = std::io::stdout().flush();
        tracing::info!(%local, "serving");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| failure("StorageFailure", e.to_string()))
    })
}

/// Incremental harvests of every peer, or full ones for peers never synced.
async fn scheduled_harvests(repo: Arc<Repository>, every: Duration) {
    let h = Arc::new(Harvester::new(Arc::new(HttpTransport::default())));
    let mut tick = tokio::time::interval(every);
    loop {
        tick.tick().await;
        let (repo, h) = (repo.clone(), h.clone());
        let _ = tokio::task::spawn_blocking(move || {
            let peers = match harvester::peers(&repo) {
                Ok(p) => p,
                Err(e) => return tracing::warn!(error = %e, "cannot list peers"),
            };
            for p in peers {
                let mode = if p.watermark.is_some() { HarvestMode::Incremental } else { HarvestMode::Full };
                match h.harvest(&repo, &p.name, mode) {
                    Ok(r) => tracing::info!(peer = %p.name, fetched = r.fetched, upserted = r.upserted, "harvested"),
                    Err(e) => tracing::warn!(peer = %p.name, error = %e, "harvest failed"),
                }
            }
        })
        .await;
    }
}
