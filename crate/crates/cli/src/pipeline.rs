//! End-to-end orchestration: ingest → graph → synthesis rounds (semantic,
//! structural, evolve) → verification → acceptance → dataset emission.
//! Stages run sequentially; work inside a stage fans out over a worker
//! budget with per-item derived seeds, so a pinned seed and the mock (or
//! replay) backend give byte-identical output directories.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use serde::Serialize;

use sqlsynth_core::evolver::{
    augment_condition, paraphrase, parse_tree, scale_complexity, EvolveConfig, EvolveError,
};
use sqlsynth_core::extractor::{sample_demos, synthesize_question, synthesize_response};
use sqlsynth_core::gateway::{GatewayConfig, HttpBackend, LlmGateway, MockBackend, ReplayBackend};
use sqlsynth_core::graph::{assign_weights, build_graph, DbGraph, SeedExample};
use sqlsynth_core::miner::{back_instruct, generate_sql, MinerConfig};
use sqlsynth_core::retrieval::{build_index, ValueIndex};
use sqlsynth_core::rng::{derive_seed, domains};
use sqlsynth_core::sampler::{random_walk, weighted_sample, SchemaSubgraph};
use sqlsynth_core::schema::{load_metadata, load_schema, ColumnRef, DatabaseSchema};
use sqlsynth_core::sql::{collect_column_refs, ScopeSchema};
use sqlsynth_core::store::{
    DatasetStore, InstructionRecord, RecordSource, TrainingTask, VerdictPair,
};
use sqlsynth_core::verifier::{consistency_verify, execute_verify, VerdictStatus};

use crate::config::{BackendKind, PipelineConfig};

#[derive(Debug, Serialize)]
pub struct StageReport {
    pub round: u32,
    pub stage: String,
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
    pub db_id: String,
    pub metadata_warnings: u32,
    pub skipped_seeds_in_weighting: usize,
    pub stages: Vec<StageReport>,
    pub pool_size: usize,
    pub accepted_by_source: BTreeMap<String, usize>,
    pub emitted_schema_linking: usize,
    pub emitted_sql_generation: usize,
    pub fatal_error: Option<String>,
    /// Wall time is operational; it goes to stderr, never into report.json,
    /// so two identical runs write identical output directories.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn is_fatal(&self) -> bool {
        self.fatal_error.is_some()
    }
}

/// Order-preserving parallel map over `0..n` with a bounded worker pool.
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if n == 0 {
        return Vec::new();
    }
    let workers = workers.max(1).min(n);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let value = f(i);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("worker filled every slot"))
        .collect()
}

/// The metadata block M: column types, foreign keys, descriptions, and
/// retrieved value hints for the question.
fn metadata_block(
    schema: &DatabaseSchema,
    index: &ValueIndex,
    question: &str,
    top_n: usize,
    min_ratio: f64,
) -> String {
    let mut out = String::from("Columns:\n");
    for t in &schema.tables {
        let cols: Vec<String> = t
            .columns
            .iter()
            .map(|c| format!("{} {}", c.name, c.declared_type.trim()))
            .collect();
        out.push_str(&format!("{}({})\n", t.name, cols.join(", ")));
    }
    if !schema.foreign_keys.is_empty() {
        out.push_str("Foreign keys:\n");
        for fk in &schema.foreign_keys {
            out.push_str(&format!("{} -> {}\n", fk.from, fk.to));
        }
    }
    if !schema.metadata.is_empty() {
        out.push_str("Descriptions:\n");
        for (k, v) in &schema.metadata {
            out.push_str(&format!("{k}: {v}\n"));
        }
    }
    let hints = index.hint_lines(question, top_n, min_ratio);
    if !hints.is_empty() {
        out.push_str("Values:\n");
        for h in hints {
            out.push_str(&h);
            out.push('\n');
        }
    }
    out
}

fn build_gateway(config: &PipelineConfig) -> Result<LlmGateway> {
    let gw_config = GatewayConfig {
        max_in_flight: config.max_workers,
        synthesis_temperature: Some(config.temperature),
        ..Default::default()
    };
    let gateway = match config.backend {
        BackendKind::Mock => LlmGateway::new(Box::new(MockBackend::new()), gw_config),
        BackendKind::Http => {
            let backend = HttpBackend::from_env().map_err(|e| anyhow::anyhow!(e))?;
            LlmGateway::new(Box::new(backend), gw_config)
        }
        BackendKind::Replay => {
            let path = config.replay_from.as_ref().expect("validated");
            let backend = ReplayBackend::from_transcript(path)?;
            LlmGateway::new(Box::new(backend), gw_config)
        }
    };
    match &config.transcript {
        Some(path) => Ok(gateway.with_transcript(path)?),
        None => Ok(gateway),
    }
}

enum Rejection {
    Verdict(VerdictStatus),
    Inconsistent,
    Duplicate,
    GatewayError,
    EmptyResponse,
    ParseError,
    Exhausted,
    SamplerError,
}

impl Rejection {
    fn key(&self) -> &'static str {
        match self {
            Rejection::Verdict(VerdictStatus::SyntaxError) => "syntax_error",
            Rejection::Verdict(VerdictStatus::InvalidReference) => "invalid_reference",
            Rejection::Verdict(VerdictStatus::Timeout) => "timeout",
            Rejection::Verdict(VerdictStatus::RuntimeError) => "runtime_error",
            Rejection::Verdict(VerdictStatus::Pass) => "pass",
            Rejection::Inconsistent => "inconsistent",
            Rejection::Duplicate => "duplicate",
            Rejection::GatewayError => "gateway_error",
            Rejection::EmptyResponse => "empty_response",
            Rejection::ParseError => "parse_error",
            Rejection::Exhausted => "augmentation_exhausted",
            Rejection::SamplerError => "sampler_error",
        }
    }
}

type ItemOutcome = Result<InstructionRecord, Rejection>;

struct PipelineCtx {
    config: PipelineConfig,
    schema: Arc<DatabaseSchema>,
    scope: ScopeSchema,
    index: ValueIndex,
    gateway: LlmGateway,
    timeout: Duration,
}

impl PipelineCtx {
    /// Extends S over every column referenced by the SQL and serializes it;
    /// keeps the stored record's schema subset covering its response.
    fn subset_for(&self, subgraph: &SchemaSubgraph, sql: &str, graph: &DbGraph) -> String {
        let extra: Vec<ColumnRef> = collect_column_refs(sql, &self.scope)
            .map(|refs| refs.into_iter().filter(|r| !subgraph.contains(r)).collect())
            .unwrap_or_default();
        if extra.is_empty() {
            subgraph.to_ddl(&self.schema)
        } else {
            subgraph.extended_with(&extra, graph).to_ddl(&self.schema)
        }
    }

    fn verify_and_build(
        &self,
        question: String,
        sql: String,
        subgraph: &SchemaSubgraph,
        graph: &DbGraph,
        source: RecordSource,
        round: u32,
    ) -> ItemOutcome {
        let execution = execute_verify(&sql, &self.config.db_path, self.timeout)
            .map_err(|_| Rejection::Verdict(VerdictStatus::RuntimeError))?;
        if !execution.passed() {
            return Err(Rejection::Verdict(execution.status));
        }
        let consistency =
            consistency_verify(&question, &sql, subgraph, &self.schema, &self.gateway)
                .map_err(|_| Rejection::GatewayError)?;
        if !consistency.aligned {
            return Err(Rejection::Inconsistent);
        }
        let metadata = metadata_block(
            &self.schema,
            &self.index,
            &question,
            self.config.retrieval_top_n,
            self.config.retrieval_min_ratio,
        );
        let schema_subset = self.subset_for(subgraph, &sql, graph);
        Ok(InstructionRecord {
            question,
            db_id: self.schema.db_id.clone(),
            sql,
            schema_subset,
            metadata,
            source,
            verdicts: Some(VerdictPair {
                execution,
                consistency,
            }),
            round,
        })
    }

    fn size_for(&self, index: u64) -> usize {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
            self.config.seed,
            domains::SIZE,
            index,
        ));
        rng.gen_range(self.config.min_size..=self.config.max_size)
    }
}

fn tally(
    round: u32,
    stage: &str,
    outcomes: Vec<ItemOutcome>,
    store: &mut DatasetStore,
) -> StageReport {
    let mut report = StageReport {
        round,
        stage: stage.to_string(),
        attempted: outcomes.len(),
        accepted: 0,
        rejected: BTreeMap::new(),
    };
    for outcome in outcomes {
        match outcome {
            Ok(record) => {
                let before = store.len();
                match store.accept(record) {
                    Ok(_) if store.len() > before => report.accepted += 1,
                    Ok(_) => {
                        *report
                            .rejected
                            .entry(Rejection::Duplicate.key().to_string())
                            .or_insert(0) += 1;
                    }
                    Err(_) => {
                        *report
                            .rejected
                            .entry("store_rejected".to_string())
                            .or_insert(0) += 1;
                    }
                }
            }
            Err(rej) => {
                *report.rejected.entry(rej.key().to_string()).or_insert(0) += 1;
            }
        }
    }
    report
}

fn semantic_stage(
    ctx: &PipelineCtx,
    graph: &DbGraph,
    store: &mut DatasetStore,
    round: u32,
) -> StageReport {
    let demos_snapshot: Vec<SeedExample> = store.demo_pool().to_vec();
    let pool_id = format!("{}-round{}", ctx.schema.db_id, round);
    let n = ctx.config.semantic_per_round;
    let outcomes = parallel_map(n, ctx.config.max_workers, |i| {
        let item = ((round as u64) << 32) | i as u64;
        let size = ctx.size_for(item);
        let walk_seed = derive_seed(ctx.config.seed, domains::WALK, item);
        let subgraph = match random_walk(graph, None, size, walk_seed) {
            Ok(s) => s,
            Err(_) => return Err(Rejection::SamplerError),
        };
        let demos = sample_demos(
            &demos_snapshot,
            &pool_id,
            ctx.config.demos_k,
            derive_seed(ctx.config.seed, domains::DEMOS, item),
        );
        let question = synthesize_question(&subgraph, &ctx.schema, &demos, &ctx.gateway).map_err(
            |e| match e {
                sqlsynth_core::extractor::ExtractError::EmptyResponse => Rejection::EmptyResponse,
                _ => Rejection::GatewayError,
            },
        )?;
        let sql =
            synthesize_response(&question, &subgraph, &ctx.schema, &ctx.gateway).map_err(|e| {
                match e {
                    sqlsynth_core::extractor::ExtractError::EmptyResponse => {
                        Rejection::EmptyResponse
                    }
                    _ => Rejection::GatewayError,
                }
            })?;
        ctx.verify_and_build(
            question,
            sql,
            &subgraph,
            graph,
            RecordSource::Semantic,
            round,
        )
    });
    tally(round, "semantic", outcomes, store)
}

fn structural_stage(
    ctx: &PipelineCtx,
    graph: &DbGraph,
    store: &mut DatasetStore,
    round: u32,
) -> StageReport {
    let miner_config = MinerConfig {
        aggregation_prob: ctx.config.aggregation_prob,
        ..Default::default()
    };
    let n = ctx.config.structural_per_round;
    let outcomes = parallel_map(n, ctx.config.max_workers, |i| {
        let item = ((round as u64) << 32) | i as u64;
        let size = ctx.size_for(item.wrapping_add(0x5151));
        let sample_seed = derive_seed(ctx.config.seed, domains::WEIGHTED, item);
        let subgraph = match weighted_sample(graph, None, size, sample_seed) {
            Ok(s) => s,
            Err(_) => return Err(Rejection::SamplerError),
        };
        let mine_seed = derive_seed(ctx.config.seed, domains::MINE, item);
        let draft = generate_sql(&subgraph, &ctx.schema, mine_seed, &miner_config)
            .map_err(|_| Rejection::SamplerError)?;

        // execution first; only surviving SQL is worth a back-instruct call
        let execution = execute_verify(&draft.sql, &ctx.config.db_path, ctx.timeout)
            .map_err(|_| Rejection::Verdict(VerdictStatus::RuntimeError))?;
        if !execution.passed() {
            return Err(Rejection::Verdict(execution.status));
        }
        let question = back_instruct(&draft, &ctx.schema, &ctx.gateway).map_err(|e| match e {
            sqlsynth_core::miner::MinerError::EmptyResponse => Rejection::EmptyResponse,
            _ => Rejection::GatewayError,
        })?;
        ctx.verify_and_build(
            question,
            draft.sql,
            &subgraph,
            graph,
            RecordSource::Structural,
            round,
        )
    });
    tally(round, "structural", outcomes, store)
}

fn evolve_stage(
    ctx: &PipelineCtx,
    graph: &DbGraph,
    store: &mut DatasetStore,
    round: u32,
) -> StageReport {
    let evolve_config = EvolveConfig {
        or_prob: ctx.config.or_prob,
        ..Default::default()
    };
    // base queries: current pool entries whose SQL parses under the grammar
    let bases: Vec<SeedExample> = store
        .demo_pool()
        .iter()
        .filter(|s| s.db_id == ctx.schema.db_id)
        .cloned()
        .collect();
    let n = if bases.is_empty() {
        0
    } else {
        ctx.config.evolve_per_round
    };
    let outcomes = parallel_map(n, ctx.config.max_workers, |i| {
        use rand::Rng;
        use rand::SeedableRng;
        let item = ((round as u64) << 32) | i as u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
            ctx.config.seed,
            domains::BASE_PICK,
            item,
        ));
        let base = &bases[rng.gen_range(0..bases.len())];
        let mut tree = match parse_tree(&base.sql, &ctx.schema) {
            Ok(t) => t,
            Err(_) => return Err(Rejection::ParseError),
        };
        let depth = rng.gen_range(0..=ctx.config.evolve_depth_max);
        let mut grew = false;
        for d in 0..depth {
            let aug_seed = derive_seed(ctx.config.seed, domains::EVOLVE, item ^ ((d as u64) << 48));
            match augment_condition(&tree, graph, aug_seed, &evolve_config) {
                Ok(next) => {
                    tree = next;
                    grew = true;
                }
                Err(EvolveError::AugmentationExhausted) => break,
                Err(_) => return Err(Rejection::ParseError),
            }
        }
        if rng.gen::<f64>() < ctx.config.scale_prob {
            match scale_complexity(&tree, &ctx.gateway) {
                Ok(outcome) => {
                    if !outcome.rejected && outcome.tree.render() != tree.render() {
                        grew = true;
                    }
                    tree = outcome.tree;
                }
                Err(_) => return Err(Rejection::GatewayError),
            }
        }
        if !grew {
            // identity evolution would only duplicate its base
            return Err(Rejection::Exhausted);
        }
        let questions =
            paraphrase(&tree, &ctx.gateway, ctx.config.paraphrase_n).map_err(|e| match e {
                EvolveError::EmptyResponse => Rejection::EmptyResponse,
                _ => Rejection::GatewayError,
            })?;
        let question = questions[0].clone();
        let sql = tree.render();
        // S for an evolved record is induced from the columns it touches
        let cols: Vec<ColumnRef> = tree.referenced_columns().into_iter().collect();
        let subgraph = SchemaSubgraph::from_nodes(
            cols,
            graph,
            sqlsynth_core::sampler::SampleOrigin::Weighted,
            item,
            false,
        );
        ctx.verify_and_build(
            question,
            sql,
            &subgraph,
            graph,
            RecordSource::Evolved,
            round,
        )
    });
    tally(round, "evolve", outcomes, store)
}

fn emit_filter(config: &PipelineConfig) -> Vec<RecordSource> {
    config
        .emit_sources
        .iter()
        .filter_map(|s| match s.as_str() {
            "seed" => Some(RecordSource::Seed),
            "semantic" => Some(RecordSource::Semantic),
            "structural" => Some(RecordSource::Structural),
            "evolved" => Some(RecordSource::Evolved),
            _ => None,
        })
        .collect()
}

/// Runs the whole pipeline. Partial outputs are retained on a fatal stage
/// error, with the manifest marked incomplete.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;

    let mut report = RunReport {
        config_hash: config.config_hash(),
        seed: config.seed,
        backend: config.backend.as_str().to_string(),
        db_id: String::new(),
        metadata_warnings: 0,
        skipped_seeds_in_weighting: 0,
        stages: Vec::new(),
        pool_size: 0,
        accepted_by_source: BTreeMap::new(),
        emitted_schema_linking: 0,
        emitted_sql_generation: 0,
        fatal_error: None,
        wall_time: Duration::ZERO,
    };

    // ingest
    let schema = load_schema(&config.db_path, config.sample_k)
        .map_err(|e| anyhow::anyhow!("stage ingest: {e}"))?;
    let loaded = load_metadata(schema, config.descriptions.as_deref())
        .map_err(|e| anyhow::anyhow!("stage ingest: {e}"))?;
    report.metadata_warnings = loaded.warnings;
    let schema = Arc::new(loaded.schema);
    report.db_id = schema.db_id.clone();

    let mut store = DatasetStore::new();
    store
        .ingest_seeds(&config.seeds)
        .map_err(|e| anyhow::anyhow!("stage ingest: {e}"))?;

    // graph
    let base_graph = build_graph(&schema);
    let weighted = assign_weights(&base_graph, store.demo_pool());
    report.skipped_seeds_in_weighting = weighted.skipped_seeds;
    let mut graph = weighted.graph;

    // value index for prompt hints
    let index = build_index(&schema, &config.db_path, 10_000)
        .map_err(|e| anyhow::anyhow!("stage index: {e}"))?;

    let gateway = build_gateway(config).map_err(|e| anyhow::anyhow!("stage gateway: {e}"))?;
    let ctx = PipelineCtx {
        config: config.clone(),
        scope: ScopeSchema::from_schema(&schema),
        schema: Arc::clone(&schema),
        index,
        gateway,
        timeout: Duration::from_secs_f64(config.timeout_secs),
    };

    for round in 1..=config.rounds {
        let semantic = semantic_stage(&ctx, &graph, &mut store, round);
        eprintln!(
            "round {round} semantic: {}/{} accepted",
            semantic.accepted, semantic.attempted
        );
        report.stages.push(semantic);

        let structural = structural_stage(&ctx, &graph, &mut store, round);
        eprintln!(
            "round {round} structural: {}/{} accepted",
            structural.accepted, structural.attempted
        );
        report.stages.push(structural);

        let evolve = evolve_stage(&ctx, &graph, &mut store, round);
        eprintln!(
            "round {round} evolve: {}/{} accepted",
            evolve.accepted, evolve.attempted
        );
        report.stages.push(evolve);

        if config.reweight_with_accepted {
            let reweighted = assign_weights(&base_graph, store.demo_pool());
            graph = reweighted.graph;
        }
    }

    // emission
    report.pool_size = store.len();
    report.accepted_by_source = store.counts_by_source();
    let filter = emit_filter(config);

    store
        .save_records(&config.out_dir.join("records.jsonl"))
        .map_err(|e| anyhow::anyhow!("stage emit: {e}"))?;
    report.emitted_schema_linking = store
        .emit_training(
            TrainingTask::SchemaLinking,
            &config.out_dir.join("train_schema_linking.jsonl"),
            Some(&filter),
        )
        .map_err(|e| anyhow::anyhow!("stage emit: {e}"))?;
    report.emitted_sql_generation = store
        .emit_training(
            TrainingTask::SqlGeneration,
            &config.out_dir.join("train_sql_generation.jsonl"),
            Some(&filter),
        )
        .map_err(|e| anyhow::anyhow!("stage emit: {e}"))?;
    ctx.index
        .save(&config.out_dir.join("values.idx"))
        .map_err(|e| anyhow::anyhow!("stage emit: {e}"))?;

    let manifest = store.manifest(&report.config_hash, true);
    std::fs::write(
        config.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    report.wall_time = started.elapsed();
    std::fs::write(
        config.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// The stage plan for --dry-run; printing it is the only effect.
pub fn dry_run_plan(config: &PipelineConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "plan (seed {}, backend {}):\n",
        config.seed,
        config.backend.as_str()
    ));
    out.push_str(&format!(
        "  1. ingest: schema from {}, seeds from {}\n",
        config.db_path.display(),
        config.seeds.display()
    ));
    out.push_str("  2. graph: build column graph, weight from seed co-occurrence\n");
    out.push_str("  3. index: BM25 value index for prompt hints\n");
    for round in 1..=config.rounds {
        out.push_str(&format!(
            "  round {round}: semantic x{}, structural x{}, evolve x{}{}\n",
            config.semantic_per_round,
            config.structural_per_round,
            config.evolve_per_round,
            if config.reweight_with_accepted {
                ", then reweight"
            } else {
                ""
            }
        ));
    }
    out.push_str(&format!(
        "  emit: records, manifest, training sets -> {}\n",
        config.out_dir.display()
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order_and_runs_everything() {
        let out = parallel_map(100, 8, |i| i * 2);
        assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
        let empty = parallel_map(0, 4, |i| i);
        assert!(empty.is_empty());
    }

    #[test]
    fn metadata_block_lists_schema_and_hints() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("cars.db");
        sqlsynth_core::fixture::create_cars_db(&db).unwrap();
        let schema = load_schema(&db, 3).unwrap();
        let loaded = load_metadata(schema, None).unwrap();
        let index = build_index(&loaded.schema, &db, 100).unwrap();
        let m = metadata_block(&loaded.schema, &index, "makers from Canada", 5, 0.6);
        assert!(m.contains("Columns:"), "{m}");
        assert!(
            m.contains("maker(id INTEGER, name TEXT, country TEXT)"),
            "{m}"
        );
        assert!(m.contains("Foreign keys:"), "{m}");
        assert!(m.contains("maker.country = 'Canada'"), "{m}");
    }
}
