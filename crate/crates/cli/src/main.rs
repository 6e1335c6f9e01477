use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gridcomm::channel::BaselineKind;
use gridcomm::config::FileConfig;
use gridcomm::episode::{sample_episode_with, Episode};
use gridcomm::metrics::{evaluate_trace, SymbolView};
use gridcomm::render::render_grid;
use gridcomm::rollout::{run_rollout, ListenerPolicy};
use gridcomm::session::{serve, Session, TraceSink};
use gridcomm::solver::oracle_solve;
use gridcomm::trace::{read_trace, write_trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "gridcomm", version, about = "Grid world for speaker/listener communication tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Serve the line-delimited JSON protocol on stdio, or on TCP with --port.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        port: Option<u16>,
        /// Append finished session traces to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write sampled episodes and their oracle solutions as JSON lines.
    GenEpisodes {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a baseline speaker with a scripted listener and write the trace.
    Rollout {
        #[arg(long, value_enum)]
        speaker: SpeakerArg,
        #[arg(long, value_enum)]
        listener: ListenerArg,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute CI, CIC and topographic similarity over a trace file.
    EvalMetrics {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ViewArg::Concatenated)]
        view: ViewArg,
    },
    /// Render one episode from a gen-episodes file as a PPM image.
    Render {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cell_px: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpeakerArg {
    Random,
    Fixed,
    Perfect,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ListenerArg {
    Random,
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ViewArg {
    Concatenated,
    PerAttribute,
}

/// Flag beats `GRIDCOMM_SEED`, which beats the config file.
fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<FileConfig> {
    let mut cfg = match path {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    cfg.apply_seed_env()?;
    if let Some(s) = seed {
        cfg.environment.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn cmd_serve(config: FileConfig, port: Option<u16>, trace: Option<PathBuf>) -> Result<()> {
    let sink: Option<TraceSink> = match trace {
        Some(p) => {
            let file = File::options()
                .create(true)
                .append(true)
                .open(&p)
                .with_context(|| format!("cannot open {}", p.display()))?;
            Some(Arc::new(Mutex::new(file)))
        }
        None => None,
    };
    let session = |cfg: FileConfig| -> Result<Session> {
        let s = Session::new(cfg)?;
        Ok(match &sink {
            Some(sink) => s.with_sink(sink.clone()),
            None => s,
        })
    };
    match port {
        None => {
            let mut s = session(config)?;
            serve(&mut s, io::stdin().lock(), io::stdout().lock())?;
        }
        Some(port) => {
            let listener = TcpListener::bind(("127.0.0.1", port)).with_context(|| format!("cannot bind port {port}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let mut s = session(config.clone())?;
                thread::spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(r) => BufReader::new(r),
                        Err(e) => return eprintln!("connection error: {e}"),
                    };
                    if let Err(e) = serve(&mut s, reader, stream) {
                        eprintln!("connection error: {e}");
                    }
                });
            }
        }
    }
    Ok(())
}

fn cmd_gen_episodes(config: &FileConfig, count: u64, out: &Path) -> Result<()> {
    let lexicon = config.lexicon()?;
    let mut w = create(out)?;
    for index in 0..count {
        let seed = config.environment.seed.wrapping_add(index);
        let episode = sample_episode_with(&config.environment, &lexicon, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let solution = oracle_solve(&episode.state, &episode.task, config.environment.episode_len)?;
        let names: Vec<&str> = solution.iter().map(|a| a.name()).collect();
        let line = json!({ "index": index, "seed": seed, "episode": episode, "solution": names });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_rollout(config: &FileConfig, speaker: SpeakerArg, listener: ListenerArg, episodes: usize, out: &Path) -> Result<()> {
    let speaker = match speaker {
        SpeakerArg::Random => BaselineKind::RandomSpeaker,
        SpeakerArg::Fixed => BaselineKind::FixedSpeaker,
        SpeakerArg::Perfect => BaselineKind::PerfectSpeaker,
    };
    let listener = match listener {
        ListenerArg::Random => ListenerPolicy::Random,
        ListenerArg::Oracle => ListenerPolicy::Oracle,
    };
    let summary = run_rollout(config, speaker, listener, episodes)?;
    write_trace(create(out)?, &summary.records)?;
    let mut out = io::stdout().lock();
    writeln!(out, "episodes: {}", summary.records.len())?;
    writeln!(out, "mean reward: {:.3}", summary.mean_reward)?;
    writeln!(out, "mean length: {:.3}", summary.mean_length)?;
    Ok(())
}

fn cmd_eval_metrics(trace: &Path, alpha: f64, view: ViewArg) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        bail!("--alpha must be non-negative");
    }
    let file = File::open(trace).with_context(|| format!("cannot open {}", trace.display()))?;
    let records = read_trace(BufReader::new(file))?;
    let view = match view {
        ViewArg::Concatenated => SymbolView::Concatenated,
        ViewArg::PerAttribute => SymbolView::PerAttribute,
    };
    let metrics = evaluate_trace(&records, alpha, view);
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&metrics)?)?;
    Ok(())
}

fn cmd_render(episodes: &Path, index: usize, out: &Path, cell_px: Option<usize>) -> Result<()> {
    let file = File::open(episodes).with_context(|| format!("cannot open {}", episodes.display()))?;
    let line = BufReader::new(file)
        .lines()
        .nth(index)
        .with_context(|| format!("{} has no episode at index {index}", episodes.display()))??;
    let value: serde_json::Value = serde_json::from_str(&line)?;
    // accept both gen-episodes records and bare episodes
    let episode: Episode = serde_json::from_value(value.get("episode").cloned().unwrap_or(value))?;
    let frame = render_grid(&episode.state, cell_px.unwrap_or(FileConfig::default().render.cell_px))?;
    frame.write_ppm(create(out)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, seed, port, trace } => cmd_serve(load_config(config.as_deref(), seed)?, port, trace),
        Command::GenEpisodes { config, seed, count, out } => {
            cmd_gen_episodes(&load_config(config.as_deref(), seed)?, count, &out)
        }
        Command::Rollout { speaker, listener, episodes, out, config, seed } => {
            cmd_rollout(&load_config(config.as_deref(), seed)?, speaker, listener, episodes, &out)
        }
        Command::EvalMetrics { trace, alpha, view } => cmd_eval_metrics(&trace, alpha, view),
        Command::Render { episode, index, out, cell_px } => cmd_render(&episode, index, &out, cell_px),
    }
}

/// The error chain on one line, skipping causes a message already spells out.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !line.contains(&msg) {
            if !line.is_empty() {
                line.push_str(": ");
            }
            line.push_str(&msg);
        }
    }
    line.replace('\n', " ")
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        // a closed downstream pipe is not a failure of ours
        if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) {
            return;
        }
        eprintln!("error: {}", diagnostic(&e));
        std::process::exit(1);
    }
}
