//! `corpusforge` operator command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use corpusforge_core::exam::{build_exam, ExamPools};
use corpusforge_core::ingest::RawLine;
use corpusforge_core::langid::{self, Detector, LangProfile};
use corpusforge_core::ledger::{project_cost, CostFilter};
use corpusforge_core::store::{ExportFormat, Store};
use corpusforge_core::types::SystemClock;
use corpusforge_core::{Direction, Engine, EngineConfig, Lang, Money};
use corpusforge_server::{build_state, in_memory_state, spawn_background, BackgroundServer, ServiceConfig};
use corpusforge_sim::fixture::read_fixture;
use corpusforge_sim::{replay_funnel, simulate, Client, SimConfig, TextSupply};

#[derive(Debug, Parser)]
#[command(name = "corpusforge", version, about = "Crowd-translation pipeline: service, operator tools and simulator")]
struct Cli {
    /// Service configuration (TOML). Falls back to $CORPUSFORGE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CostGrouping {
    Worker,
    Kind,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Screen a file of sentences into the source pool.
    Ingest {
        #[arg(long)]
        lang: String,
        #[arg(long)]
        origin: String,
        #[arg(long)]
        file: PathBuf,
        /// Also open translation tasks in this direction.
        #[arg(long)]
        direction: Option<String>,
    },
    /// Draw a ten-item exam form from pool files.
    ExamBuild {
        #[arg(long)]
        direction: String,
        #[arg(long)]
        seed: u64,
        /// `src<TAB>tgt` pairs known to be correct.
        #[arg(long)]
        correct: PathBuf,
        /// `word<TAB>word` glossary for word-for-word distractors.
        #[arg(long)]
        glossary: PathBuf,
        /// Sentences in some third language.
        #[arg(long)]
        other: PathBuf,
        /// Store the form as the direction's current exam.
        #[arg(long)]
        publish: bool,
    },
    /// Drive a simulated worker population through the HTTP API.
    Simulate {
        #[arg(long)]
        profiles: PathBuf,
        /// Source sentences per direction; overrides the profiles file.
        #[arg(long)]
        sources: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Service to drive; an in-process one is started when absent.
        #[arg(long)]
        url: Option<String>,
        /// Directory of `<code>.txt` files the simulator draws text from.
        #[arg(long, default_value = "data/seeds")]
        seeds: PathBuf,
    },
    /// Replay a JSONL event log through the HTTP API and print the funnel.
    Replay {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        url: Option<String>,
        #[arg(long, default_value = "data/seeds")]
        seeds: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: TableFormat,
    },
    /// Write the accepted corpus of one direction.
    Export {
        #[arg(long)]
        direction: String,
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        include_pending: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print funnel statistics.
    Stats {
        #[arg(long, value_enum, default_value = "table")]
        format: TableFormat,
    },
    /// Print cost totals, or project the cost of a larger effort.
    Cost {
        #[arg(long, value_enum, default_value = "kind")]
        by: CostGrouping,
        /// Print every ledger entry as CSV instead.
        #[arg(long)]
        csv: bool,
        #[command(subcommand)]
        project: Option<CostCommand>,
    },
    /// Train a character n-gram profile from a text file.
    LangidTrain {
        #[arg(long)]
        lang: String,
        #[arg(long)]
        file: PathBuf,
        /// Defaults to `<lang>.profile.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify the language of a text.
    LangidDetect {
        #[arg(long)]
        text: String,
        /// Profile files to use instead of the configured ones.
        #[arg(long = "profile")]
        profiles: Vec<PathBuf>,
        /// Train from this seed directory instead of the configured profiles.
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CostCommand {
    /// Cost of translating M sentences into each of N languages.
    Project {
        #[arg(long)]
        languages: u64,
        #[arg(long)]
        sentences: u64,
        #[arg(long)]
        price: String,
    },
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig> {
    Ok(ServiceConfig::load(path)?)
}

/// Engine over the configured journal, for one-shot operator commands.
fn open_engine(path: Option<&Path>) -> Result<Engine> {
    let config = load_config(path)?;
    config.validate()?;
    let store_path = config.store_path.as_ref().context("operator commands need store_path in the config")?;
    let store = Store::open(store_path, config.store_sync)?;
    Ok(Engine::new(store, config.build_detector()?, Arc::new(SystemClock), config.engine.clone())?)
}

fn seed_detector(seeds: &Path) -> Result<Arc<Detector>> {
    let profiles = langid::train_from_dir(seeds).with_context(|| format!("training from {}", seeds.display()))?;
    Ok(Arc::new(Detector::new(profiles, langid::DEFAULT_MARGIN)?))
}

/// The given service, or one started in-process from the config (or, with
/// no config at all, an in-memory one trained on `seeds`).
fn service(url: Option<String>, config: Option<&Path>, seeds: &Path) -> Result<(Client, Option<BackgroundServer>)> {
    if let Some(url) = url {
        let mut client = Client::new(&url)?;
        if let Ok(cfg) = load_config(config) {
            if let Some(t) = cfg.requester.token.filter(|_| !cfg.requester.open) {
                client = client.with_requester_token(t);
            }
        }
        return Ok((client, None));
    }
    let have_config = config.is_some() || std::env::var_os(corpusforge_server::config::CONFIG_ENV).is_some();
    let (state, token) = if have_config {
        let cfg = load_config(config)?;
        let token = cfg.requester.token.clone().filter(|_| !cfg.requester.open);
        (build_state(&cfg)?, token)
    } else {
        (in_memory_state(seed_detector(seeds)?, EngineConfig::default())?, None)
    };
    let server = spawn_background(state, "127.0.0.1:0")?;
    tracing::info!(url = %server.base_url(), "started in-process service");
    let mut client = Client::new(&server.base_url())?;
    if let Some(t) = token {
        client = client.with_requester_token(t);
    }
    Ok((client, Some(server)))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Serve => {
            let cfg = load_config(config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(corpusforge_server::serve(&cfg))?;
        }
        Command::Ingest { lang, origin, file, direction } => {
            let engine = open_engine(config)?;
            let lang = Lang::new(&lang)?;
            let direction: Option<Direction> = direction.map(|d| d.parse()).transpose()?;
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let lines = text.lines().map(|l| RawLine { text: l.to_string(), origin: origin.clone() }).collect();
            let outcome = engine.ingest(&lang, lines, direction.as_ref())?;
            print_json(&outcome.report)?;
        }
        Command::ExamBuild { direction, seed, correct, glossary, other, publish } => {
            let direction: Direction = direction.parse()?;
            let pools = ExamPools::from_files(&correct, &glossary, &other)?;
            let form = build_exam(&direction, &pools, seed)?;
            if publish {
                open_engine(config)?.publish_form(form.clone())?;
            }
            print_json(&form)?;
        }
        Command::Simulate { profiles, sources, seed, url, seeds } => {
            let mut sim = SimConfig::load(&profiles)?;
            if let Some(n) = sources {
                sim.sources_per_direction = n;
            }
            if let Some(s) = seed {
                sim.seed = s;
            }
            let texts = TextSupply::from_dir(&seeds)?;
            let (client, _server) = service(url, config, &seeds)?;
            println!("{}", simulate(&client, &sim, &texts)?.to_json());
        }
        Command::Replay { fixture, url, seeds, format } => {
            let file = std::fs::File::open(&fixture).with_context(|| format!("opening {}", fixture.display()))?;
            let events = read_fixture(std::io::BufReader::new(file))?;
            let (client, _server) = service(url, config, &seeds)?;
            let stats = replay_funnel(&client, &events)?;
            match format {
                TableFormat::Json => print_json(&stats)?,
                TableFormat::Table => {
                    let core_stats: corpusforge_core::store::FunnelStats = serde_json::from_value(serde_json::to_value(&stats)?)?;
                    print!("{}", core_stats.render_table());
                }
            }
        }
        Command::Export { direction, format, include_pending, out } => {
            let engine = open_engine(config)?;
            let format: ExportFormat = format.parse()?;
            let body = engine.export_corpus(&direction.parse()?, format, include_pending)?;
            match out {
                Some(p) => std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(body.as_bytes())?,
            }
        }
        Command::Stats { format } => {
            let stats = open_engine(config)?.funnel_stats();
            match format {
                TableFormat::Json => print_json(&stats)?,
                TableFormat::Table => print!("{}", stats.render_table()),
            }
        }
        Command::Cost { project: Some(CostCommand::Project { languages, sentences, price }), .. } => {
            let price: Money = price.parse()?;
            println!("{}", project_cost(languages, sentences, price)?);
        }
        Command::Cost { by, csv, project: None } => {
            let engine = open_engine(config)?;
            if csv {
                print!("{}", engine.read(|s| s.ledger().to_csv())?);
            } else {
                match by {
                    CostGrouping::Kind => print_json(&engine.cost_totals(&CostFilter::default()))?,
                    CostGrouping::Worker => print_json(&engine.read(|s| s.ledger().totals_by_worker()))?,
                }
            }
        }
        Command::LangidTrain { lang, file, out } => {
            let profile = langid::train_from_file(&file, Lang::new(&lang)?)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{lang}.profile.json")));
            profile.save(&out)?;
            eprintln!("wrote {} ({} n-grams)", out.display(), profile.vocabulary_size());
        }
        Command::LangidDetect { text, profiles, seeds } => {
            let detector = if let Some(dir) = seeds {
                seed_detector(&dir)?
            } else if !profiles.is_empty() {
                let loaded = profiles.iter().map(|p| LangProfile::load(p)).collect::<Result<Vec<_>, _>>()?;
                Arc::new(Detector::new(loaded, langid::DEFAULT_MARGIN)?)
            } else {
                load_config(config)?.build_detector()?
            };
            print_json(&detector.detect(&text)?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn cost_project_parses() {
        let cli = Cli::try_parse_from(["corpusforge", "cost", "project", "--languages", "7000", "--sentences", "1000000", "--price", "1"])
            .unwrap();
        assert!(matches!(cli.command, Command::Cost { project: Some(CostCommand::Project { languages: 7000, .. }), .. }));
    }
}
