use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use wcbench::bench::{self, build_benchmark, estimator_by_id, read_benchmark, write_benchmark, BuildConfig};
use wcbench::equivalence::{check_equivalence, SolverConfig, Verdict};
use wcbench::eval::{run_eval, CompletionSet, CompletionSource, ModelEndpoint};
use wcbench::explorer::{enumerate_paths, toys, worst_case, ExploreConfig};
use wcbench::generators::{find_program, generate, list_programs};
use wcbench::sgf::service::{serve_http_blocking, serve_stdio, DEFAULT_BIND};
use wcbench::sgf::{RewardModel, RewardOptions};
use wcbench::smtlib::parse_formula;

#[derive(Parser)]
#[command(name = "wcbench", version, about = "Worst-case constraint benchmark tools")]
struct Cli {
    /// Solver settings (TOML). WARP_SOLVER_CMD overrides the external command.
    #[arg(long, global = true)]
    solver_config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stdio,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Print the worst-case constraint of a program for size N.
    Generate {
        #[arg(long)]
        program: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// List the registered programs.
        #[arg(long)]
        list: bool,
    },
    /// Symbolically execute a toy program and report its worst-case path.
    Explore {
        #[arg(long)]
        program: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        show_paths: bool,
        /// Keep infeasible paths.
        #[arg(long)]
        no_prune: bool,
        #[arg(long)]
        path_budget: Option<usize>,
    },
    /// Check two constraints for logical equivalence.
    Equiv { a: String, b: String },
    /// Sample a benchmark into a newline-delimited JSON file.
    BuildBench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the 333/333/5 evaluation split instead of a config file.
        #[arg(long, conflicts_with = "config")]
        eval_split: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile a benchmark file.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "lexeme")]
        tokenizer: String,
        #[arg(long)]
        json: bool,
    },
    /// Score completions against a benchmark.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, required_unless_present = "endpoint_config")]
        completions: Option<PathBuf>,
        #[arg(long, conflicts_with = "completions")]
        endpoint_config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the reward service.
    Serve {
        #[arg(long, value_enum, default_value = "http")]
        mode: Mode,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: SocketAddr,
        /// Only award the semantic part when the layout check passes.
        #[arg(long)]
        strict: bool,
    },
}

fn solver_config(path: Option<&Path>) -> Result<SolverConfig> {
    let cfg = match path {
        Some(p) => SolverConfig::from_toml_file(p).with_context(|| format!("loading {}", p.display()))?,
        None => SolverConfig::default(),
    };
    Ok(cfg.with_env_overrides())
}

fn load_bench(path: &Path) -> Result<Vec<bench::BenchmarkInstance>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_benchmark(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Generate { program, n, list } => {
            if list {
                for p in list_programs() {
                    writeln!(out, "{:<20} n>={:<2} {}", p.name, p.min_n, p.description)?;
                }
                return Ok(());
            }
            let (Some(program), Some(n)) = (program, n) else {
                bail!("--program and --n are required unless --list is given");
            };
            writeln!(out, "{}", generate(find_program(&program)?, n)?.to_canonical())?;
        }
        Command::Explore { program, n, show_paths, no_prune, path_budget } => {
            let toy = toys::by_name(&program).with_context(|| format!("no toy program named {program:?}"))?;
            let mut cfg = ExploreConfig { prune: !no_prune, ..ExploreConfig::default() };
            if let Some(b) = path_budget {
                cfg.path_budget = b;
            }
            if show_paths {
                let paths = enumerate_paths(&toy, n, &cfg)?;
                for p in &paths {
                    writeln!(out, "cost {:>6}  {:?}  {}", p.cost, p.trace, p.condition.to_canonical())?;
                }
                writeln!(out, "{} paths", paths.len())?;
            }
            let w = worst_case(&toy, n, &cfg)?;
            writeln!(out, "worst-case cost {}", w.cost)?;
            writeln!(out, "{}", w.condition.to_canonical())?;
        }
        Command::Equiv { a, b } => {
            let cfg = solver_config(cli.solver_config.as_deref())?;
            let fa = parse_formula(&a).context("first formula")?;
            let fb = parse_formula(&b).context("second formula")?;
            let v = check_equivalence(&fa, &fb, &cfg)?;
            writeln!(out, "{}", serde_json::to_string(&v)?)?;
            if !matches!(v, Verdict::Equivalent) {
                return Err(anyhow::anyhow!("{v}")).context("not proven equivalent");
            }
        }
        Command::BuildBench { config, eval_split, seed, out: path } => {
            let mut cfg = match (config, eval_split) {
                (Some(p), _) => BuildConfig::from_toml_file(&p).with_context(|| format!("loading {}", p.display()))?,
                (None, true) => BuildConfig::eval_split(),
                (None, false) => BuildConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (instances, report) = build_benchmark(&cfg)?;
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_benchmark(&instances, BufWriter::new(f))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            eprintln!("wrote {} instances to {}", instances.len(), path.display());
        }
        Command::Stats { input, tokenizer, json } => {
            let est = estimator_by_id(&tokenizer).with_context(|| format!("unknown tokenizer {tokenizer:?}"))?;
            let stats = bench::profile(&input, est.as_ref())?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?;
            } else {
                writeln!(out, "instances {}", stats.count)?;
                writeln!(out, "{:<8} {:>6} {:>8} {:>10} {:>10}", "tier", "count", "%", "avg q tok", "avg a tok")?;
                for (tier, t) in &stats.tiers {
                    writeln!(out, "{:<8} {:>6} {:>8.2} {:>10.1} {:>10.1}", tier.as_str(), t.count, t.percentage,
                        t.avg_question_tokens, t.avg_answer_tokens)?;
                }
                let q = &stats.question_tokens;
                writeln!(out, "question tokens: min {} max {} mean {:.1} median {:.1} std {:.1}", q.min, q.max, q.mean, q.median, q.std)?;
                let a = &stats.answer_tokens;
                writeln!(out, "answer tokens:   min {} max {} mean {:.1} median {:.1} std {:.1}", a.min, a.max, a.mean, a.median, a.std)?;
                writeln!(out, "targets: {:?}", stats.unique_targets)?;
            }
        }
        Command::Eval { bench, completions, endpoint_config, trials, report } => {
            let cfg = solver_config(cli.solver_config.as_deref())?;
            let instances = load_bench(&bench)?;
            let result = if let Some(p) = completions {
                let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                let set = CompletionSet::read(BufReader::new(f))?;
                run_eval(&instances, CompletionSource::Recorded(&set), trials, &cfg)?
            } else {
                let p = endpoint_config.expect("clap enforces one source");
                let ep = ModelEndpoint::from_toml_file(&p).with_context(|| format!("loading {}", p.display()))?;
                run_eval(&instances, CompletionSource::Endpoint(&ep), trials, &cfg)?
            };
            if let Some(p) = report {
                std::fs::write(&p, serde_json::to_string_pretty(&result)?)
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            write!(out, "{}", result.render_table())?;
        }
        Command::Serve { mode, bind, strict } => {
            let cfg = solver_config(cli.solver_config.as_deref())?;
            let model = RewardModel::new(cfg, RewardOptions { strict_semantic_requires_template: strict });
            match mode {
                Mode::Stdio => serve_stdio(&model, io::stdin().lock(), out)?,
                Mode::Http => {
                    eprintln!("listening on http://{bind}");
                    serve_http_blocking(bind, model)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
