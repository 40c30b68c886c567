use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hearth_core::dataset::{bundled_corpus_dir, check_corpus, Corpus};
use hearth_core::episodic::{CorruptMode, MemoryFormat};
use hearth_core::harness::{
    render_markdown, report_dir, run_two_stage, sweep_topk, CorruptSpec, EmbedderSource, PlannerSource, RunConfig,
};
use hearth_core::profile::{render_subtree, NodeType, ProfileGraph};

#[derive(Parser)]
#[command(name = "hearth", version, about = "Two-stage memory benchmark for embodied household agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run acquisition then utilization over a corpus.
    Run {
        #[command(flatten)]
        run: RunArgs,
    },
    /// One acquisition pass, then a utilization pass per k.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
    },
    /// Rebuild and print the report of a finished run directory.
    Report { dir: PathBuf },
    /// Load a corpus and check it for ambiguous references.
    ValidateCorpus { dir: Option<PathBuf> },
    /// Inspect or export a profile graph (a JSON file or a run directory).
    Graph {
        path: PathBuf,
        /// Write the canonical JSON export here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Planner {
    Oracle,
    RandomChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Full,
    Summary,
    InstructionOnly,
}

#[derive(Args)]
struct RunArgs {
    /// Corpus directory. Defaults to the bundled corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in planner, used when neither --provider nor --scripted is given.
    #[arg(long, value_enum, default_value = "oracle")]
    planner: Planner,
    /// Chat endpoint config (TOML or JSON).
    #[arg(long, conflicts_with = "scripted")]
    provider: Option<PathBuf>,
    /// Directory of recorded `<episode_id>.json` transcripts.
    #[arg(long)]
    scripted: Option<PathBuf>,
    /// Embedding endpoint config. The hash embedder is used otherwise.
    #[arg(long, requires = "embed_dim")]
    embedder: Option<PathBuf>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    gold_guarantee: bool,
    #[arg(long, value_enum, default_value = "full")]
    memory_format: Format,
    #[arg(long)]
    profile_memory: bool,
    /// Corruption mode and rate, e.g. `--corrupt shuffle 0.5`.
    #[arg(long, num_args = 2, value_names = ["MODE", "RATE"])]
    corrupt: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    max_cycles: Option<u32>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let planner = match (&self.provider, &self.scripted) {
            (Some(p), _) => PlannerSource::Endpoint { config: p.clone() },
            (None, Some(d)) => PlannerSource::Scripted { dir: d.clone() },
            (None, None) => match self.planner {
                Planner::Oracle => PlannerSource::Oracle,
                Planner::RandomChoice => PlannerSource::RandomChoice,
            },
        };
        let mut c = RunConfig::new(self.corpus.clone().unwrap_or_else(bundled_corpus_dir), planner);
        if let (Some(config), Some(dimension)) = (&self.embedder, self.embed_dim) {
            c.embedder = EmbedderSource::Endpoint {
                config: config.clone(),
                dimension,
            };
        }
        c.agent.k = self.k;
        c.agent.gold_guarantee = self.gold_guarantee;
        c.agent.memory_format = match self.memory_format {
            Format::Full => MemoryFormat::Full,
            Format::Summary => MemoryFormat::Summarization,
            Format::InstructionOnly => MemoryFormat::InstructionOnly,
        };
        c.agent.use_profile_memory = self.profile_memory;
        if let Some(n) = self.max_cycles {
            c.agent.max_planning_cycles = n;
        }
        if let Some(v) = &self.corrupt {
            let mode: CorruptMode = v[0].parse().with_context(|| format!("corruption mode {}", v[0]))?;
            let rate: f64 = v[1].parse().with_context(|| format!("corruption rate {}", v[1]))?;
            c.corrupt = Some(CorruptSpec { mode, rate });
        }
        c.seed = self.seed;
        c.jobs = self.jobs;
        c.output = self.out.clone();
        c.validate()?;
        Ok(c)
    }
}

fn status(errors: usize) -> ExitCode {
    if errors == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{errors} episode(s) hit infrastructure errors");
        ExitCode::FAILURE
    }
}

fn load_graph(path: &Path) -> Result<ProfileGraph> {
    let file = if path.is_dir() { path.join("profile_graph.json") } else { path.to_path_buf() };
    let raw = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    Ok(ProfileGraph::from_json(&raw)?)
}

fn main() -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run { run } => {
            let out = run_two_stage(&run.config()?)?;
            print!("{}", render_markdown(&out.report));
            Ok(status(out.report.infrastructure_errors))
        }
        Command::Sweep { run, ks } => {
            let points = sweep_topk(&run.config()?, &ks)?;
            println!("| k | recall@k | SR % (utilization) |\n|---:|---:|---:|");
            let mut errors = 0;
            for p in &points {
                let util: Vec<_> = p.report.by_task.iter().filter(|a| a.group != "acquisition").collect();
                let n: usize = util.iter().map(|a| a.episodes).sum();
                let sr = util.iter().map(|a| a.sr * a.episodes as f64).sum::<f64>() / n.max(1) as f64;
                println!("| {} | {:.1} | {:.1} |", p.k, 100.0 * p.recall, sr);
                errors += p.report.infrastructure_errors;
            }
            Ok(status(errors))
        }
        Command::Report { dir } => {
            let report = report_dir(&dir)?;
            report.write(&dir)?;
            print!("{}", render_markdown(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateCorpus { dir } => {
            let dir = dir.unwrap_or_else(bundled_corpus_dir);
            let corpus = Corpus::load(&dir)?;
            println!("{}", serde_json::to_string_pretty(corpus.manifest())?);
            let bad = check_corpus(&corpus);
            for r in &bad {
                println!("{}: {}", r.episode_id, serde_json::to_string(&r.violations)?);
            }
            if !bad.is_empty() {
                bail!("{} episode(s) with ambiguous references", bad.len());
            }
            println!("ok: {} episodes", corpus.episodes().len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph { path, export } => {
            let g = load_graph(&path)?;
            if let Some(dest) = export {
                std::fs::write(&dest, g.to_json()).with_context(|| format!("writing {}", dest.display()))?;
            }
            println!(
                "{} knowledge, {} pattern, {} object, {} location nodes; {} edges",
                g.count(NodeType::Knowledge),
                g.count(NodeType::Pattern),
                g.count(NodeType::Object),
                g.count(NodeType::Location),
                g.edge_count()
            );
            for k in g.ids_of(NodeType::Knowledge) {
                println!("{}", render_subtree(&g, &k));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
