//! `setexpand` command-line interface.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal or backend error |
//! | 2 | bad arguments, configuration, or unreadable input file |
//! | 3 | seeds not found in the vocabulary |
//! | 4 | malformed dataset |
//! | 5 | backend unavailable |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use setexpand::bench::{self, SyntheticWorld, WorldConfig};
use setexpand::config::{BackendKind, EngineConfig, ENV_CACHE_DIR, ENV_SERVER_URL};
use setexpand::eval::{self, ApConvention};
use setexpand::lm::synthetic;
use setexpand::{CalibrationMode, Engine, EntityVocabulary, Error, LmBackend, PrefixTrie, ToyLm};

const EXIT_HELP: &str = "\
EXIT CODES:
  0  success
  1  internal or backend error
  2  bad arguments, configuration, or unreadable input file
  3  seeds not found in the vocabulary
  4  malformed dataset
  5  backend unavailable

Settings resolve as: command-line flag, then environment, then --config file, then built-in default.";

#[derive(Parser)]
#[command(name = "setexpand", version, about = "Generative entity set expansion", after_help = EXIT_HELP)]
struct Cli {
    /// Engine configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for independent queries (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Toy,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationArg {
    PerStep,
    FirstToken,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    HitCount,
    MinKGold,
}

#[derive(Args, Clone, Default)]
struct BackendOpts {
    /// Scoring backend.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Saved toy model for the toy backend.
    #[arg(long)]
    toy_model: Option<PathBuf>,
    /// Logits server base URL for the remote backend.
    #[arg(long, env = ENV_SERVER_URL)]
    server_url: Option<String>,
    /// Directory holding trie caches.
    #[arg(long, env = ENV_CACHE_DIR)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    beam: Option<usize>,
    /// Calibration strength in [0, 1].
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum)]
    calibration: Option<CalibrationArg>,
    /// Weight of the template ranks in the final score, in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    /// Entities appended to the seed set per iteration.
    #[arg(long)]
    growth_k: Option<usize>,
    #[arg(long)]
    target_size: Option<usize>,
    #[arg(long)]
    rerank_pool: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a vocabulary, build its prefix trie and write the cache.
    BuildTrie {
        /// Entity vocabulary, one surface per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Cache file to write (default: derived name in the cache dir).
        #[arg(long)]
        cache_out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendOpts,
    },
    /// Expand one seed set.
    Expand {
        #[arg(long)]
        vocab: PathBuf,
        /// Comma-separated seed surfaces.
        #[arg(long, conflicts_with = "seeds_file")]
        seeds: Option<String>,
        /// File with one seed per line.
        #[arg(long)]
        seeds_file: Option<PathBuf>,
        #[arg(long, default_value = "query")]
        query_id: String,
        /// Human-readable table instead of JSON.
        #[arg(long)]
        pretty: bool,
        /// Include wall time in the output.
        #[arg(long)]
        timing: bool,
        /// Write the result here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendOpts,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Expand every query of a dataset and report MAP@K.
    Evaluate {
        #[arg(long)]
        vocab: PathBuf,
        /// JSON-lines dataset: {"id", "seeds", "gold", "class_hint"?}.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        /// Comma-separated cutoffs.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long)]
        pretty: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendOpts,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Time expansion over synthetic vocabularies of several sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 30)]
        members: usize,
        /// Queries per class in the timed batch.
        #[arg(long, default_value_t = 1)]
        queries_per_class: usize,
        #[arg(long, default_value_t = 42)]
        world_seed: u64,
        /// Plot-ready CSV output.
        #[arg(long)]
        csv_out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train a toy n-gram model on a text corpus.
    TrainToy {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        smoothing: f64,
        /// Extra words for the token inventory, one per line.
        #[arg(long)]
        extra_vocab: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a planted-class corpus, vocabulary, query set and toy model.
    GenSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 30)]
        members: usize,
        #[arg(long, default_value_t = 5)]
        queries_per_class: usize,
        #[arg(long, default_value_t = 3)]
        seeds_per_query: usize,
        /// Multi-token filler entities added to the vocabulary.
        #[arg(long, default_value_t = 0)]
        distractors: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::UnresolvedSeeds(_) => 3,
                Error::Dataset { .. } => 4,
                Error::BackendUnavailable(_) => 5,
                Error::Io { .. }
                | Error::EmptyVocabulary(_)
                | Error::VocabularyLine { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidConfig(_)
                | Error::EmptyCorpus
                | Error::ModelFormat(_)
                | Error::Cache(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    cfg.apply_env();

    match cli.command {
        Command::BuildTrie { vocab, cache_out, backend } => {
            apply_backend(&mut cfg, &backend);
            let lm = cfg.backend.open()?;
            let vocab = EntityVocabulary::load(&vocab, &*lm)?;
            let trie = PrefixTrie::build(&vocab)?;
            let path = match cache_out {
                Some(p) => p,
                None => cache_path(&cfg, &vocab).unwrap_or_else(|| PathBuf::from(PrefixTrie::cache_file_name(&vocab))),
            };
            trie.save(&path)?;
            let s = trie.stats(&vocab);
            println!(
                "entities={} nodes={} max_depth={} mean_tokens={:.3} cache={}",
                s.entities,
                s.nodes,
                s.max_depth,
                s.mean_tokens,
                path.display()
            );
        }
        Command::Expand {
            vocab,
            seeds,
            seeds_file,
            query_id,
            pretty,
            timing,
            output,
            backend,
            overrides,
        } => {
            apply_backend(&mut cfg, &backend);
            apply_overrides(&mut cfg, &overrides)?;
            let seeds = match (seeds, seeds_file) {
                (Some(s), _) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
                (None, Some(f)) => read_lines(&f)?,
                (None, None) => anyhow::bail!(Error::InvalidArgument("give --seeds or --seeds-file".into())),
            };
            let engine = open_engine(&cfg, &vocab)?;
            let result = engine.expand(&query_id, &seeds)?;
            let text = if pretty {
                pretty_expansion(&result, timing)
            } else {
                let mut s = serde_json::to_string_pretty(&result.to_json(timing))?;
                s.push('\n');
                s
            };
            emit(output.as_deref(), &text)?;
        }
        Command::Evaluate {
            vocab,
            dataset,
            convention,
            ks,
            pretty,
            output,
            backend,
            overrides,
        } => {
            apply_backend(&mut cfg, &backend);
            apply_overrides(&mut cfg, &overrides)?;
            if let Some(c) = convention {
                cfg.eval.convention = match c {
                    ConventionArg::HitCount => ApConvention::HitCount,
                    ConventionArg::MinKGold => ApConvention::MinKGold,
                };
            }
            if let Some(ks) = ks {
                cfg.eval.ks = ks;
            }
            cfg.validate()?;
            let queries = eval::load_dataset(&dataset)?;
            let engine = open_engine(&cfg, &vocab)?;
            let report = engine.evaluate(&queries, &cfg.eval.ks, cfg.eval.convention)?;
            let text = if pretty {
                report.pretty()
            } else {
                let mut s = serde_json::to_string_pretty(&report)?;
                s.push('\n');
                s
            };
            emit(output.as_deref(), &text)?;
        }
        Command::Bench {
            sizes,
            classes,
            members,
            queries_per_class,
            world_seed,
            csv_out,
            overrides,
        } => {
            apply_overrides(&mut cfg, &overrides)?;
            let world = SyntheticWorld::build(&WorldConfig {
                classes,
                members_per_class: members,
                queries_per_class,
                seed: world_seed,
                ..WorldConfig::default()
            })?;
            let rows = bench::run_benchmark(&world.lm, &world, &sizes, &cfg.expansion, &cfg.prompt, world_seed)?;
            print!("{}", bench::rows_to_table(&rows));
            if let Some(p) = csv_out {
                std::fs::write(&p, bench::rows_to_csv(&rows)).map_err(|e| Error::io(&p, e))?;
            }
        }
        Command::TrainToy {
            corpus,
            order,
            smoothing,
            extra_vocab,
            out,
        } => {
            let text = std::fs::read_to_string(&corpus).map_err(|e| Error::io(&corpus, e))?;
            let extra = match extra_vocab {
                Some(p) => read_lines(&p)?,
                None => Vec::new(),
            };
            let lm = ToyLm::train_with_vocabulary(&text, extra.iter().map(String::as_str), order, smoothing)?;
            lm.save(&out)?;
            println!("tokens={} order={} model={}", lm.vocab_size(), lm.order(), out.display());
        }
        Command::GenSynthetic {
            out_dir,
            classes,
            members,
            queries_per_class,
            seeds_per_query,
            distractors,
            seed,
        } => {
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let world = SyntheticWorld::build(&WorldConfig {
                classes,
                members_per_class: members,
                queries_per_class,
                seeds_per_query,
                seed,
                ..WorldConfig::default()
            })?;
            let mut surfaces = world.members();
            surfaces.extend(synthetic::distractor_entities(distractors, seed));
            let write = |name: &str, text: &str| -> anyhow::Result<()> {
                let p = out_dir.join(name);
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                Ok(())
            };
            write("corpus.txt", &world.corpus)?;
            write("vocab.txt", &(surfaces.join("\n") + "\n"))?;
            write("queries.jsonl", &eval::write_dataset(&world.queries))?;
            world.lm.save(&out_dir.join("toy.json"))?;
            println!(
                "classes={} entities={} queries={} dir={}",
                world.classes.len(),
                surfaces.len(),
                world.queries.len(),
                out_dir.display()
            );
        }
    }
    Ok(())
}

fn apply_backend(cfg: &mut EngineConfig, opts: &BackendOpts) {
    if let Some(b) = opts.backend {
        cfg.backend.kind = match b {
            BackendArg::Toy => BackendKind::Toy,
            BackendArg::Remote => BackendKind::Remote,
        };
    }
    if let Some(p) = &opts.toy_model {
        cfg.backend.toy_model = Some(p.clone());
    }
    if let Some(u) = &opts.server_url {
        cfg.backend.server_url = Some(u.clone());
    }
    if let Some(d) = &opts.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
}

fn apply_overrides(cfg: &mut EngineConfig, o: &Overrides) -> anyhow::Result<()> {
    let x = &mut cfg.expansion;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = o.$f { x.$f = v; })* };
    }
    set!(beam, mu, lambda, iterations, permutations, growth_k, target_size, rerank_pool, rng_seed);
    if let Some(c) = o.calibration {
        x.calibration = match c {
            CalibrationArg::PerStep => CalibrationMode::PerStep,
            CalibrationArg::FirstToken => CalibrationMode::FirstToken,
        };
    }
    // a smaller target implies a smaller pool is fine
    if o.target_size.is_some() && o.rerank_pool.is_none() && x.rerank_pool < x.target_size {
        x.rerank_pool = x.target_size;
    }
    cfg.validate()?;
    Ok(())
}

fn cache_path(cfg: &EngineConfig, vocab: &EntityVocabulary) -> Option<PathBuf> {
    cfg.cache_dir.as_ref().map(|d| d.join(PrefixTrie::cache_file_name(vocab)))
}

fn open_engine(cfg: &EngineConfig, vocab_path: &Path) -> anyhow::Result<Engine> {
    let lm: Box<dyn LmBackend> = cfg.backend.open()?;
    let vocab = EntityVocabulary::load(vocab_path, &*lm)?;
    let trie = match cache_path(cfg, &vocab) {
        Some(p) => {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            PrefixTrie::load_or_build(&p, &vocab)?
        }
        None => PrefixTrie::build(&vocab)?,
    };
    Ok(Engine::new(lm, vocab, trie, cfg.prompt.clone(), cfg.expansion.clone())?)
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty_expansion(r: &setexpand::RankedExpansion, timing: bool) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "query:      {}", r.query_id);
    let _ = writeln!(s, "class name: {}", r.class_name.as_deref().unwrap_or("(none)"));
    let _ = writeln!(s, "seeds:      {}", r.seeds.join(", "));
    if timing {
        let _ = writeln!(s, "elapsed:    {:.1} ms", r.elapsed.as_secs_f64() * 1e3);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>4}  {:<32} {:>8} {:>8} {:>8} {:>8}", "#", "entity", "M1", "M2", "M3", "C");
    for (i, e) in r.entries.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4}  {:<32} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            i + 1,
            e.surface,
            e.m1,
            e.m2,
            e.m3,
            e.score
        );
    }
    s
}
