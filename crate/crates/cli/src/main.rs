//! `sqlsynth` — explore a SQLite database, synthesize question–SQL
//! instruction pairs, filter them by execution and consistency, and emit
//! fine-tuning datasets. Exit codes: 0 success, 1 fatal stage error,
//! 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use sqlsynth_cli::commands;
use sqlsynth_cli::config::{BackendKind, PipelineConfig};
use sqlsynth_cli::pipeline::{dry_run_plan, run_pipeline};
use sqlsynth_core::gateway::{GatewayConfig, HttpBackend, LlmGateway, MockBackend, ReplayBackend};
use sqlsynth_core::store::{RecordSource, TrainingTask};

#[derive(Parser)]
#[command(
    name = "sqlsynth",
    version,
    about = "database exploration and text-to-SQL instruction synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GatewayArgs {
    /// Gateway backend: mock, http, or replay
    #[arg(long, default_value = "mock")]
    backend: String,
    /// Transcript log path (JSON-lines, appended)
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Recorded transcript to replay (required for --backend replay)
    #[arg(long)]
    replay: Option<PathBuf>,
}

impl GatewayArgs {
    fn build(&self) -> anyhow::Result<LlmGateway> {
        let kind = BackendKind::parse(&self.backend)?;
        let config = GatewayConfig::default();
        let gw = match kind {
            BackendKind::Mock => LlmGateway::new(Box::new(MockBackend::new()), config),
            BackendKind::Http => {
                let backend = HttpBackend::from_env().map_err(|e| anyhow::anyhow!(e))?;
                LlmGateway::new(Box::new(backend), config)
            }
            BackendKind::Replay => {
                let path = self
                    .replay
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("--replay is required for replay backend"))?;
                LlmGateway::new(Box::new(ReplayBackend::from_transcript(path)?), config)
            }
        };
        match &self.transcript {
            Some(path) => Ok(gw.with_transcript(path)?),
            None => Ok(gw),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Print the stage plan and exit without side effects
        #[arg(long)]
        dry_run: bool,
        /// Override output.dir
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override output.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override gateway.backend
        #[arg(long)]
        backend: Option<String>,
        /// Override synthesis.rounds
        #[arg(long)]
        rounds: Option<u32>,
        /// Override verify.timeout_secs
        #[arg(long)]
        timeout_secs: Option<f64>,
        /// Override verify.max_workers
        #[arg(long)]
        max_workers: Option<usize>,
        /// Override synthesis.temperature
        #[arg(long)]
        temperature: Option<f64>,
        /// Override synthesis.evolve_depth_max
        #[arg(long)]
        evolve_depth_max: Option<usize>,
        /// Override synthesis.or_prob
        #[arg(long)]
        or_prob: Option<f64>,
        /// Override synthesis.aggregation_prob
        #[arg(long)]
        aggregation_prob: Option<f64>,
        /// Override gateway.transcript
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Override gateway.replay (switches the backend to replay)
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Override any config key: --set section.key=value (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Write the bundled demo database, seeds, and config into a directory
    Fixture {
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a seed file and write it as a pool file
    Ingest {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        pool: PathBuf,
    },
    /// Build the column graph (optionally seed-weighted) and dump it as JSON
    Graph {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        sample_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample connected subgraphs from the column graph
    Sample {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// walk | weighted
        #[arg(long, default_value = "walk")]
        strategy: String,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate one SQL draft per sampled subgraph
    Mine {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        subgraphs: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        aggregation_prob: f64,
        /// Per-class template weights, e.g. "text_eq=0.7,text_like=0.3,num_lt=0.3"
        #[arg(long)]
        predicate_weights: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append graph-guided conditions to queries from a file
    Evolve {
        #[arg(long)]
        db: PathBuf,
        /// Text file with one SELECT statement per line
        #[arg(long)]
        sql_file: PathBuf,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 0.1)]
        or_prob: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-instruct extraction: synthesize question–SQL pairs over subgraphs
    Extract {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        demos_k: usize,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 25.0)]
        timeout_secs: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Execute queries from a file against a database and classify verdicts
    Verify {
        #[arg(long)]
        db: PathBuf,
        /// Text file with one SELECT statement per line
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        timeout_secs: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a training dataset from a pool file
    Emit {
        #[arg(long)]
        pool: PathBuf,
        /// schema-linking | sql-generation
        #[arg(long)]
        task: String,
        /// Comma-separated source filter (seed,semantic,structural,evolved)
        #[arg(long)]
        sources: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match question tokens against database cell values (BM25 + LCS)
    Retrieve {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        #[arg(long, default_value_t = 0.0)]
        min_ratio: f64,
        /// Persisted index file (created when missing)
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[allow(clippy::too_many_arguments)]
fn run_command(
    config: PathBuf,
    dry_run: bool,
    out: Option<PathBuf>,
    seed: Option<u64>,
    backend: Option<String>,
    rounds: Option<u32>,
    timeout_secs: Option<f64>,
    max_workers: Option<usize>,
    temperature: Option<f64>,
    evolve_depth_max: Option<usize>,
    or_prob: Option<f64>,
    aggregation_prob: Option<f64>,
    transcript: Option<PathBuf>,
    replay: Option<PathBuf>,
    sets: Vec<String>,
) -> anyhow::Result<ExitCode> {
    let mut cfg = match PipelineConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    };
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(b) = &backend {
        match BackendKind::parse(b) {
            Ok(kind) => cfg.backend = kind,
            Err(e) => {
                eprintln!("config error: {e:#}");
                return Ok(ExitCode::from(2));
            }
        }
    }
    if let Some(r) = rounds {
        cfg.rounds = r;
    }
    if let Some(t) = timeout_secs {
        cfg.timeout_secs = t;
    }
    if let Some(w) = max_workers {
        cfg.max_workers = w;
    }
    if let Some(t) = temperature {
        cfg.temperature = t;
    }
    if let Some(d) = evolve_depth_max {
        cfg.evolve_depth_max = d;
    }
    if let Some(p) = or_prob {
        cfg.or_prob = p;
    }
    if let Some(p) = aggregation_prob {
        cfg.aggregation_prob = p;
    }
    if let Some(t) = transcript {
        cfg.transcript = Some(t);
    }
    if let Some(r) = replay {
        cfg.replay_from = Some(r);
        cfg.backend = BackendKind::Replay;
    }
    for spec in &sets {
        if let Err(e) = cfg.apply_override(spec) {
            eprintln!("config error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e:#}");
        return Ok(ExitCode::from(2));
    }
    if dry_run {
        print!("{}", dry_run_plan(&cfg));
        return Ok(ExitCode::SUCCESS);
    }
    match run_pipeline(&cfg) {
        Ok(report) => {
            eprintln!(
                "done: pool {} records ({}), wall time {:.2}s, report in {}",
                report.pool_size,
                report
                    .accepted_by_source
                    .iter()
                    .map(|(k, v)| format!("{k} {v}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                report.wall_time.as_secs_f64(),
                cfg.out_dir.display()
            );
            if report.is_fatal() {
                Ok(ExitCode::from(1))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Err(e) => {
            eprintln!("fatal: {e:#}");
            Ok(ExitCode::from(1))
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            dry_run,
            out,
            seed,
            backend,
            rounds,
            timeout_secs,
            max_workers,
            temperature,
            evolve_depth_max,
            or_prob,
            aggregation_prob,
            transcript,
            replay,
            sets,
        } => run_command(
            config,
            dry_run,
            out,
            seed,
            backend,
            rounds,
            timeout_secs,
            max_workers,
            temperature,
            evolve_depth_max,
            or_prob,
            aggregation_prob,
            transcript,
            replay,
            sets,
        ),
        Command::Fixture { out } => {
            let db = sqlsynth_core::fixture::write_fixture(&out)?;
            std::fs::write(out.join("pipeline.conf"), FIXTURE_CONF)?;
            eprintln!(
                "fixture written: {} plus seeds.jsonl, descriptions.tsv, pipeline.conf",
                db.display()
            );
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { seeds, pool } => {
            let n = commands::cmd_ingest(&seeds, &pool)?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph {
            db,
            seeds,
            sample_k,
            out,
        } => {
            let (nodes, edges) = commands::cmd_graph(&db, seeds.as_deref(), sample_k, &out)?;
            println!("{nodes} nodes, {edges} edges");
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample {
            db,
            seeds,
            strategy,
            min_size,
            max_size,
            samples,
            seed,
            out,
        } => {
            let n = commands::cmd_sample(
                &db,
                seeds.as_deref(),
                &strategy,
                min_size,
                max_size,
                samples,
                seed,
                &out,
            )?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Mine {
            db,
            subgraphs,
            seed,
            aggregation_prob,
            predicate_weights,
            out,
        } => {
            let n = commands::cmd_mine(
                &db,
                &subgraphs,
                seed,
                aggregation_prob,
                predicate_weights.as_deref(),
                &out,
            )?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Evolve {
            db,
            sql_file,
            seeds,
            depth,
            or_prob,
            seed,
            out,
        } => {
            let n =
                commands::cmd_evolve(&db, &sql_file, seeds.as_deref(), depth, or_prob, seed, &out)?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract {
            db,
            seeds,
            samples,
            demos_k,
            min_size,
            max_size,
            seed,
            timeout_secs,
            out,
            gateway,
        } => {
            let gw = gateway.build()?;
            let n = commands::cmd_extract(
                &db,
                &seeds,
                samples,
                demos_k,
                min_size,
                max_size,
                seed,
                &gw,
                Duration::from_secs_f64(timeout_secs),
                &out,
            )?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            db,
            file,
            timeout_secs,
            out,
        } => {
            let n = commands::cmd_verify(&db, &file, Duration::from_secs_f64(timeout_secs), &out)?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Emit {
            pool,
            task,
            sources,
            out,
        } => {
            let task = match task.as_str() {
                "schema-linking" => TrainingTask::SchemaLinking,
                "sql-generation" => TrainingTask::SqlGeneration,
                other => anyhow::bail!("unknown task `{other}` (schema-linking|sql-generation)"),
            };
            let sources = sources
                .map(|s| {
                    s.split(',')
                        .map(|part| match part.trim() {
                            "seed" => Ok(RecordSource::Seed),
                            "semantic" => Ok(RecordSource::Semantic),
                            "structural" => Ok(RecordSource::Structural),
                            "evolved" => Ok(RecordSource::Evolved),
                            other => anyhow::bail!("unknown source `{other}`"),
                        })
                        .collect::<anyhow::Result<Vec<_>>>()
                })
                .transpose()?;
            let n = commands::cmd_emit(&pool, task, sources, &out)?;
            println!("{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Retrieve {
            db,
            question,
            top_n,
            min_ratio,
            index,
        } => {
            let results = commands::cmd_retrieve(&db, &question, top_n, min_ratio, index.as_ref())?;
            for m in results {
                println!("{}", serde_json::to_string(&m)?);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

const FIXTURE_CONF: &str = "\
[database]
path = cars.db
descriptions = descriptions.tsv
sample_k = 3

[seeds]
path = seeds.jsonl

[sampling]
min_size = 2
max_size = 6

[synthesis]
rounds = 1
semantic_per_round = 40
structural_per_round = 50
evolve_per_round = 25
demos_k = 3
temperature = 0.7
evolve_depth_max = 3
or_prob = 0.1
aggregation_prob = 0.3
scale_prob = 0.3
paraphrase_n = 2
reweight_with_accepted = true

[verify]
timeout_secs = 25
max_workers = 4

[retrieval]
top_n = 5
min_lcs_ratio = 0.6

[gateway]
backend = mock

[output]
dir = out
seed = 42
";

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
