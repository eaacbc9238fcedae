//! Stage subcommands: each wraps one module operation with file-based
//! inputs and outputs so pipeline stages can be run and inspected alone.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sqlsynth_core::evolver::{augment_condition, parse_tree, EvolveConfig};
use sqlsynth_core::extractor::{sample_demos, synthesize_question, synthesize_response};
use sqlsynth_core::gateway::LlmGateway;
use sqlsynth_core::graph::{assign_weights, build_graph};
use sqlsynth_core::miner::{generate_sql, MinerConfig, SqlDraft};
use sqlsynth_core::retrieval::{build_index, MatchResult, ValueIndex};
use sqlsynth_core::rng::{derive_seed, domains};
use sqlsynth_core::sampler::{random_walk, weighted_sample, SchemaSubgraph};
use sqlsynth_core::schema::{load_metadata, load_schema, DatabaseSchema};
use sqlsynth_core::store::{DatasetStore, RecordSource, TrainingTask};
use sqlsynth_core::verifier::execute_verify;

pub fn load_schema_with_desc(
    db: &Path,
    descriptions: Option<&Path>,
    sample_k: usize,
) -> Result<DatabaseSchema> {
    let schema = load_schema(db, sample_k)?;
    let loaded = load_metadata(schema, descriptions)?;
    if loaded.warnings > 0 {
        eprintln!(
            "warning: {} description entries referenced unknown columns",
            loaded.warnings
        );
    }
    Ok(loaded.schema)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn cmd_ingest(seeds: &Path, pool_out: &Path) -> Result<usize> {
    let mut store = DatasetStore::new();
    let n = store.ingest_seeds(seeds)?;
    store.save_records(pool_out)?;
    Ok(n)
}

pub fn cmd_graph(
    db: &Path,
    seeds: Option<&Path>,
    sample_k: usize,
    out: &Path,
) -> Result<(usize, usize)> {
    let schema = load_schema(db, sample_k)?;
    let graph = build_graph(&schema);
    let graph = match seeds {
        Some(path) => {
            let mut store = DatasetStore::new();
            store.ingest_seeds(path)?;
            let weighted = assign_weights(&graph, store.demo_pool());
            if weighted.skipped_seeds > 0 {
                eprintln!(
                    "warning: {} seeds skipped in weighting",
                    weighted.skipped_seeds
                );
            }
            weighted.graph
        }
        None => graph,
    };
    std::fs::write(out, serde_json::to_string_pretty(&graph.to_debug_json())?)?;
    Ok((graph.node_count(), graph.edge_count()))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sample(
    db: &Path,
    seeds: Option<&Path>,
    strategy: &str,
    min_size: usize,
    max_size: usize,
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    use rand::Rng;
    use rand::SeedableRng;
    if min_size < 1 || max_size < min_size {
        bail!("size range [{min_size}, {max_size}] is degenerate");
    }
    let schema = load_schema(db, sqlsynth_core::schema::DEFAULT_SAMPLE_K)?;
    let graph = build_graph(&schema);
    let graph = match seeds {
        Some(path) => {
            let mut store = DatasetStore::new();
            store.ingest_seeds(path)?;
            assign_weights(&graph, store.demo_pool()).graph
        }
        None => graph,
    };
    let mut subgraphs: Vec<SchemaSubgraph> = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut size_rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, domains::SIZE, i as u64));
        let size = size_rng.gen_range(min_size..=max_size);
        let sub = match strategy {
            "walk" => random_walk(
                &graph,
                None,
                size,
                derive_seed(seed, domains::WALK, i as u64),
            )?,
            "weighted" => weighted_sample(
                &graph,
                None,
                size,
                derive_seed(seed, domains::WEIGHTED, i as u64),
            )?,
            other => bail!("unknown strategy `{other}` (walk|weighted)"),
        };
        subgraphs.push(sub);
    }
    write_jsonl(out, &subgraphs)?;
    Ok(subgraphs.len())
}

/// Parses `--predicate-weights` syntax: comma-separated key=value pairs over
/// text_eq, text_like, num_lt, num_gt, num_eq, num_between.
pub fn parse_predicate_weights(spec: &str) -> Result<sqlsynth_core::miner::PredicateWeights> {
    let mut weights = sqlsynth_core::miner::PredicateWeights::default();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((key, value)) = part.split_once('=') else {
            bail!("bad predicate weight `{part}`, expected key=value");
        };
        let v: f64 = value.trim().parse()?;
        match key.trim() {
            "text_eq" => weights.text_eq = v,
            "text_like" => weights.text_like = v,
            "num_lt" => weights.num_lt = v,
            "num_gt" => weights.num_gt = v,
            "num_eq" => weights.num_eq = v,
            "num_between" => weights.num_between = v,
            other => bail!("unknown predicate weight key `{other}`"),
        }
    }
    Ok(weights)
}

pub fn cmd_mine(
    db: &Path,
    subgraphs: &Path,
    seed: u64,
    aggregation_prob: f64,
    predicate_weights: Option<&str>,
    out: &Path,
) -> Result<usize> {
    let schema = load_schema(db, sqlsynth_core::schema::DEFAULT_SAMPLE_K)?;
    let config = MinerConfig {
        aggregation_prob,
        predicate_weights: match predicate_weights {
            Some(spec) => parse_predicate_weights(spec)?,
            None => Default::default(),
        },
        ..Default::default()
    };
    let text = std::fs::read_to_string(subgraphs)?;
    let mut drafts: Vec<SqlDraft> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sub: SchemaSubgraph =
            serde_json::from_str(line).with_context(|| format!("subgraph file line {}", i + 1))?;
        let draft = generate_sql(
            &sub,
            &schema,
            derive_seed(seed, domains::MINE, i as u64),
            &config,
        )?;
        drafts.push(draft);
    }
    write_jsonl(out, &drafts)?;
    Ok(drafts.len())
}

#[derive(Serialize)]
pub struct EvolvedLine {
    pub base_sql: String,
    pub evolved_sql: String,
    pub leaves_added: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evolve(
    db: &Path,
    sql_file: &Path,
    seeds: Option<&Path>,
    depth: usize,
    or_prob: f64,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    let schema = std::sync::Arc::new(load_schema(db, 3)?);
    let graph = build_graph(&schema);
    let graph = match seeds {
        Some(path) => {
            let mut store = DatasetStore::new();
            store.ingest_seeds(path)?;
            assign_weights(&graph, store.demo_pool()).graph
        }
        None => graph,
    };
    let config = EvolveConfig {
        or_prob,
        ..Default::default()
    };
    let text = std::fs::read_to_string(sql_file)?;
    let mut lines: Vec<EvolvedLine> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let sql = raw.trim();
        if sql.is_empty() || sql.starts_with('#') {
            continue;
        }
        let mut tree = parse_tree(sql, &schema)
            .with_context(|| format!("query file line {}: {sql}", i + 1))?;
        let before = tree.leaf_count();
        for d in 0..depth {
            let aug_seed = derive_seed(seed, domains::EVOLVE, ((i as u64) << 8) | d as u64);
            match augment_condition(&tree, &graph, aug_seed, &config) {
                Ok(next) => tree = next,
                Err(sqlsynth_core::evolver::EvolveError::AugmentationExhausted) => break,
                Err(e) => return Err(e.into()),
            }
        }
        lines.push(EvolvedLine {
            base_sql: sql.to_string(),
            evolved_sql: tree.render(),
            leaves_added: tree.leaf_count() - before,
        });
    }
    write_jsonl(out, &lines)?;
    Ok(lines.len())
}

#[derive(Serialize)]
pub struct ExtractedLine {
    pub question: String,
    pub sql: String,
    pub status: String,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_extract(
    db: &Path,
    seeds: &Path,
    samples: usize,
    demos_k: usize,
    min_size: usize,
    max_size: usize,
    seed: u64,
    gateway: &LlmGateway,
    timeout: Duration,
    out: &Path,
) -> Result<usize> {
    use rand::Rng;
    use rand::SeedableRng;
    let schema = load_schema(db, sqlsynth_core::schema::DEFAULT_SAMPLE_K)?;
    let mut store = DatasetStore::new();
    store.ingest_seeds(seeds)?;
    let graph = assign_weights(&build_graph(&schema), store.demo_pool()).graph;
    let mut lines: Vec<ExtractedLine> = Vec::new();
    for i in 0..samples {
        let mut size_rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, domains::SIZE, i as u64));
        let size = size_rng.gen_range(min_size..=max_size);
        let sub = random_walk(
            &graph,
            None,
            size,
            derive_seed(seed, domains::WALK, i as u64),
        )?;
        let demos = sample_demos(
            store.demo_pool(),
            "seed-pool",
            demos_k,
            derive_seed(seed, domains::DEMOS, i as u64),
        );
        let question = synthesize_question(&sub, &schema, &demos, gateway)?;
        let sql = synthesize_response(&question, &sub, &schema, gateway)?;
        let verdict = execute_verify(&sql, db, timeout);
        let status = match verdict {
            Ok(v) => format!("{:?}", v.status).to_lowercase(),
            Err(e) => format!("error: {e}"),
        };
        lines.push(ExtractedLine {
            question,
            sql,
            status,
        });
    }
    write_jsonl(out, &lines)?;
    Ok(lines.len())
}

#[derive(Serialize)]
pub struct VerdictLine {
    pub sql: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

pub fn cmd_verify(db: &Path, file: &Path, timeout: Duration, out: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(file)?;
    let mut lines: Vec<VerdictLine> = Vec::new();
    for raw in text.lines() {
        let sql = raw.trim();
        if sql.is_empty() || sql.starts_with('#') {
            continue;
        }
        let line = match execute_verify(sql, db, timeout) {
            Ok(v) => VerdictLine {
                sql: sql.to_string(),
                status: serde_json::to_value(v.status)?
                    .as_str()
                    .unwrap_or("unknown")
                    .to_string(),
                row_count: v.rows.as_ref().map(|r| r.row_count),
                digest: v.rows.map(|r| r.digest),
            },
            Err(e) => VerdictLine {
                sql: sql.to_string(),
                status: format!("invalid_input: {e}"),
                row_count: None,
                digest: None,
            },
        };
        lines.push(line);
    }
    write_jsonl(out, &lines)?;
    Ok(lines.len())
}

pub fn cmd_emit(
    pool: &Path,
    task: TrainingTask,
    sources: Option<Vec<RecordSource>>,
    out: &Path,
) -> Result<usize> {
    let store = DatasetStore::load(pool)?;
    let n = store.emit_training(task, out, sources.as_deref())?;
    Ok(n)
}

pub fn cmd_retrieve(
    db: &Path,
    question: &str,
    top_n: usize,
    min_ratio: f64,
    index_path: Option<&PathBuf>,
) -> Result<Vec<MatchResult>> {
    let index = match index_path {
        Some(path) if path.exists() => ValueIndex::load(path)?,
        Some(path) => {
            let schema = load_schema(db, sqlsynth_core::schema::DEFAULT_SAMPLE_K)?;
            let index = build_index(&schema, db, 10_000)?;
            index.save(path)?;
            eprintln!("index written to {}", path.display());
            index
        }
        None => {
            let schema = load_schema(db, sqlsynth_core::schema::DEFAULT_SAMPLE_K)?;
            build_index(&schema, db, 10_000)?
        }
    };
    let results: Vec<MatchResult> = index
        .query(question, top_n)
        .into_iter()
        .filter(|m| m.lcs_ratio >= min_ratio)
        .collect();
    Ok(results)
}
