//! `kkut`: command-line front end for the word-chain environment.
//!
//! Exit status: 0 on success, 1 on a domain error (bad lexicon, config,
//! dataset exhaustion, ...), 2 on a usage error.

mod policy;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kkut_core::arena::{run_games, ArenaConfig, DictionaryOpponent, EvalSummary, DEFAULT_TURN_CAP};
use kkut_core::curriculum::{build_dataset, DatasetConfig, TranscriptTemplate};
use kkut_core::service::{score_words, serve_scores};
use kkut_core::{load_lexicon, train, Lexicon, LoadMode, RewardScheme, TrainConfig, Word};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "kkut", version, about = "Korean word-chain reward environment")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Lexicon file: UTF-8, one noun per line, '#' comments.
    #[arg(long, global = true, env = "KKUT_LEXICON")]
    lexicon: Option<PathBuf>,
    /// RNG seed; overrides the seed in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reward scheme: baseline, isr_forcing or isr_forcing_os.
    #[arg(long, global = true)]
    scheme: Option<RewardScheme>,
    /// Skip invalid lexicon lines instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lexicon inspection.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Training data generation.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Games against the dictionary.
    #[command(subcommand)]
    Arena(ArenaCmd),
    /// Train the tabular policy and write a JSONL metrics log.
    Train {
        /// TOML training config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Metrics log (JSONL, one line per logged step).
        #[arg(long)]
        out: PathBuf,
        /// Also save the trained policy as JSON (usable as `tabular:<path>`).
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Score one candidate against a chain.
    Score {
        /// Chain so far (repeat the flag or separate with commas).
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        chain: Vec<String>,
        /// Proposed next word.
        #[arg(long)]
        candidate: String,
        /// Print the full response object instead of the reward.
        #[arg(long)]
        json: bool,
    },
    /// Serve NDJSON score requests on stdin/stdout (or a Unix socket).
    Serve {
        /// Listen on this Unix socket instead of stdin/stdout.
        #[arg(long)]
        socket: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum LexiconCmd {
    /// Print the final-syllable group histogram and ISR-group share.
    Stats {
        /// Lexicon file (defaults to --lexicon).
        file: Option<PathBuf>,
        /// Print the statistics as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Build a curriculum-ordered JSONL dataset.
    Build {
        /// TOML dataset config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output JSONL, one example per line.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum ArenaCmd {
    /// Play N games and write an evaluation summary.
    Run {
        #[arg(long, default_value = "random", help = policy::POLICY_HELP)]
        policy: String,
        /// Number of games; game i uses seed + i.
        #[arg(long, default_value_t = 1000)]
        games: usize,
        /// Cap on valid model answers per game; 0 disables the cap.
        #[arg(long, default_value_t = DEFAULT_TURN_CAP)]
        turn_cap: usize,
        /// The dictionary only replies with raw-syllable continuations.
        #[arg(long)]
        no_dictionary_isr: bool,
        /// Summary JSON.
        #[arg(long)]
        out: PathBuf,
        /// Per-game JSONL records.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn load_lex(path: Option<&Path>, lenient: bool) -> Result<Lexicon> {
    let Some(path) = path else {
        bail!("no lexicon given (use --lexicon or set KKUT_LEXICON)");
    };
    let file = File::open(path).with_context(|| format!("opening lexicon {}", path.display()))?;
    let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let (lex, report) = load_lexicon(BufReader::new(file), mode).with_context(|| format!("loading lexicon {}", path.display()))?;
    for (line, text) in &report.rejected {
        eprintln!("{}:{line}: skipped {text:?}", path.display());
    }
    Ok(lex)
}

fn read_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn write_stdout(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ArenaReport<'a> {
    policy: &'a str,
    seed: u64,
    turn_cap: Option<usize>,
    dictionary_isr: bool,
    #[serde(flatten)]
    summary: EvalSummary,
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let lex_path = g.lexicon.as_deref();
    match cli.command {
        Command::Lexicon(LexiconCmd::Stats { file, json }) => {
            let lex = load_lex(file.as_deref().or(lex_path), g.lenient)?;
            let stats = lex.stats();
            let mut text = String::new();
            if json {
                text = serde_json::to_string_pretty(&stats)? + "\n";
            } else {
                use std::fmt::Write as _;
                writeln!(text, "nouns\t{}", stats.nouns)?;
                writeln!(text, "groups\t{}", stats.groups)?;
                writeln!(text, "isr_groups\t{}", stats.isr_groups)?;
                writeln!(text, "isr_words\t{}", stats.isr_words)?;
                writeln!(text, "isr_group_share\t{:.4}", stats.isr_group_share)?;
                writeln!(text, "# group_size\tgroups")?;
                for (size, count) in &stats.group_size_histogram {
                    writeln!(text, "{size}\t{count}")?;
                }
            }
            write_stdout(&text)?;
        }
        Command::Dataset(DatasetCmd::Build { config, out }) => {
            let mut cfg: DatasetConfig = read_toml(config.as_deref())?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            let lex = load_lex(lex_path, g.lenient)?;
            let examples = build_dataset(&lex, &cfg, &TranscriptTemplate::default())?;
            write_jsonl(&out, &examples)?;
            eprintln!("wrote {} examples ({} in stage 1) to {}", examples.len(), cfg.stage1_count(), out.display());
        }
        Command::Arena(ArenaCmd::Run { policy, games, turn_cap, no_dictionary_isr, out, trace }) => {
            let lex = load_lex(lex_path, g.lenient)?;
            let seed = g.seed.unwrap_or(0);
            let cfg = ArenaConfig {
                scheme: g.scheme.unwrap_or(RewardScheme::IsrForcing),
                turn_cap: (turn_cap > 0).then_some(turn_cap),
                ..Default::default()
            };
            let mut player = policy::parse_policy(&policy)?;
            let mut opponent = DictionaryOpponent { use_isr: !no_dictionary_isr };
            let records = run_games(&mut player, &mut opponent, &lex, &cfg, games, seed)?;
            let summary = EvalSummary::from_records(cfg.scheme, &records)?;
            if let Some(trace) = trace {
                write_jsonl(&trace, &records)?;
            }
            let report = ArenaReport { policy: &policy, seed, turn_cap: cfg.turn_cap, dictionary_isr: opponent.use_isr, summary };
            write_json(&out, &report)?;
        }
        Command::Train { config, out, policy_out } => {
            let mut cfg: TrainConfig = read_toml(config.as_deref())?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
                cfg.curriculum.seed = seed;
            }
            if let Some(scheme) = g.scheme {
                cfg.scheme = scheme;
            }
            let lex = load_lex(lex_path, g.lenient)?;
            let log = train(&lex, &cfg)?;
            write_jsonl(&out, &log.metrics)?;
            if let Some(path) = policy_out {
                write_json(&path, &log.policy)?;
            }
        }
        Command::Score { chain, candidate, json } => {
            let lex = load_lex(lex_path, g.lenient)?;
            let chain = chain.iter().map(|w| Word::new(w.trim())).collect::<Result<Vec<_>, _>>()?;
            let candidate = Word::new(candidate.trim())?;
            let resp = score_words(&lex, g.scheme.unwrap_or(RewardScheme::IsrForcing), &chain, &candidate)?;
            if json {
                println!("{}", serde_json::to_string(&resp)?);
            } else {
                println!("{:?}", resp.reward);
            }
        }
        Command::Serve { socket } => {
            let lex = load_lex(lex_path, g.lenient)?;
            let scheme = g.scheme.unwrap_or(RewardScheme::IsrForcing);
            match socket {
                None => {
                    let stdin = io::stdin().lock();
                    let stdout = io::stdout().lock();
                    serve_scores(&lex, scheme, stdin, stdout)?;
                }
                Some(path) => serve_socket(lex, scheme, &path)?,
            }
        }
    }
    Ok(())
}

#[cfg(unix)]
fn serve_socket(lex: Lexicon, scheme: RewardScheme, path: &Path) -> Result<()> {
    use std::os::unix::net::UnixListener;
    use std::sync::Arc;

    let listener = UnixListener::bind(path).with_context(|| format!("binding {}", path.display()))?;
    let lex = Arc::new(lex);
    for conn in listener.incoming() {
        let conn = conn?;
        let lex = Arc::clone(&lex);
        std::thread::spawn(move || {
            let reader = BufReader::new(conn.try_clone()?);
            serve_scores(&lex, scheme, reader, conn)
        });
    }
    Ok(())
}

#[cfg(not(unix))]
fn serve_socket(_lex: Lexicon, _scheme: RewardScheme, _path: &Path) -> Result<()> {
    bail!("--socket is only supported on Unix")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
