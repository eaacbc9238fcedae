//! Instruction pool: seeds plus validated synthesized records, with
//! fail-closed acceptance, SQL-normalized deduplication, JSON-lines
//! persistence, a manifest, and emission of the two training datasets
//! (schema-linking and SQL-generation shapes).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::SeedExample;
use crate::sql::normalize_sql;
use crate::verifier::{ConsistencyVerdict, ExecutionVerdict};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("seed file line {line}: {message}")]
    SeedLine { line: usize, message: String },
    #[error("record rejected: {0}")]
    Rejected(String),
    #[error("records file line {line}: {message}")]
    RecordLine { line: usize, message: String },
    #[error("serialization: {0}")]
    Serde(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Seed,
    Semantic,
    Structural,
    Evolved,
}

impl RecordSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordSource::Seed => "seed",
            RecordSource::Semantic => "semantic",
            RecordSource::Structural => "structural",
            RecordSource::Evolved => "evolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictPair {
    pub execution: ExecutionVerdict,
    pub consistency: ConsistencyVerdict,
}

/// One validated instruction: the question Q, database D, SQL R, schema
/// subset serialization S, and metadata block M, plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub question: String,
    pub db_id: String,
    pub sql: String,
    pub schema_subset: String,
    pub metadata: String,
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<VerdictPair>,
    pub round: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingTask {
    SchemaLinking,
    SqlGeneration,
}

/// One emitted fine-tuning example. For schema linking the input serializes
/// (Q, D, M) and the target is S; for SQL generation the input serializes
/// (Q, S, M) and the target is R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub task: TrainingTask,
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub pool_size: usize,
    pub by_source: BTreeMap<String, usize>,
    pub by_round: BTreeMap<u32, usize>,
    pub config_hash: String,
    pub complete: bool,
}

#[derive(Debug, Default)]
pub struct DatasetStore {
    records: Vec<InstructionRecord>,
    demos: Vec<SeedExample>,
    dedup: HashMap<String, usize>,
}

fn dedup_key(sql: &str, db_id: &str) -> String {
    format!("{}\u{0}{}", normalize_sql(sql), db_id)
}

impl DatasetStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[InstructionRecord] {
        &self.records
    }

    /// The demonstration view of the pool: every record as a question–SQL
    /// pair, eligible for in-context sampling.
    pub fn demo_pool(&self) -> &[SeedExample] {
        &self.demos
    }

    /// Ingests a JSON-lines seed file. The whole file is validated before
    /// anything is written; duplicates (same normalized SQL and db_id) are
    /// skipped. Returns the number of newly accepted seeds.
    pub fn ingest_seeds(&mut self, path: &Path) -> Result<usize, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let mut parsed: Vec<SeedExample> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let seed: SeedExample =
                serde_json::from_str(line).map_err(|e| StoreError::SeedLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if seed.sql.trim().is_empty() || seed.db_id.trim().is_empty() {
                return Err(StoreError::SeedLine {
                    line: i + 1,
                    message: "empty sql or db_id".into(),
                });
            }
            parsed.push(seed);
        }
        Ok(self.ingest_seed_examples(parsed))
    }

    /// Adds seed examples directly; duplicates skipped. Returns accepted count.
    pub fn ingest_seed_examples(&mut self, seeds: Vec<SeedExample>) -> usize {
        let mut accepted = 0;
        for seed in seeds {
            let key = dedup_key(&seed.sql, &seed.db_id);
            if self.dedup.contains_key(&key) {
                continue;
            }
            let record = InstructionRecord {
                question: seed.question.clone(),
                db_id: seed.db_id.clone(),
                sql: seed.sql.clone(),
                schema_subset: String::new(),
                metadata: String::new(),
                source: RecordSource::Seed,
                verdicts: None,
                round: 0,
            };
            self.dedup.insert(key, self.records.len());
            self.records.push(record);
            self.demos.push(seed);
            accepted += 1;
        }
        accepted
    }

    /// Appends a validated record to the pool; it immediately becomes
    /// eligible as a demonstration for later rounds. Records with missing or
    /// failing verdicts are rejected (caller bug). Duplicates (normalized
    /// SQL + db_id) return the existing position without growing the pool.
    pub fn accept(&mut self, record: InstructionRecord) -> Result<usize, StoreError> {
        let Some(v) = &record.verdicts else {
            return Err(StoreError::Rejected(
                "record carries no verdicts".to_string(),
            ));
        };
        if !v.execution.passed() {
            return Err(StoreError::Rejected(format!(
                "execution verdict is {:?}",
                v.execution.status
            )));
        }
        if !v.consistency.aligned {
            return Err(StoreError::Rejected(format!(
                "consistency verdict is negative: {}",
                v.consistency.reason
            )));
        }
        let key = dedup_key(&record.sql, &record.db_id);
        if let Some(&pos) = self.dedup.get(&key) {
            return Ok(pos);
        }
        let pos = self.records.len();
        self.demos.push(SeedExample {
            question: record.question.clone(),
            sql: record.sql.clone(),
            db_id: record.db_id.clone(),
        });
        self.dedup.insert(key, pos);
        self.records.push(record);
        Ok(pos)
    }

    pub fn counts_by_source(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.source.as_str().to_string()).or_insert(0) += 1;
        }
        out
    }

    pub fn counts_by_round(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.round).or_insert(0) += 1;
        }
        out
    }

    pub fn manifest(&self, config_hash: &str, complete: bool) -> Manifest {
        Manifest {
            pool_size: self.len(),
            by_source: self.counts_by_source(),
            by_round: self.counts_by_round(),
            config_hash: config_hash.to_string(),
            complete,
        }
    }

    /// Writes the pool as JSON-lines, in pool order.
    pub fn save_records(&self, path: &Path) -> Result<(), StoreError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| StoreError::Serde(e.to_string()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a pool back from JSON-lines, rebuilding the dedup index.
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let mut store = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: InstructionRecord =
                serde_json::from_str(line).map_err(|e| StoreError::RecordLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            let key = dedup_key(&record.sql, &record.db_id);
            store.demos.push(SeedExample {
                question: record.question.clone(),
                sql: record.sql.clone(),
                db_id: record.db_id.clone(),
            });
            store.dedup.entry(key).or_insert(store.records.len());
            store.records.push(record);
        }
        Ok(store)
    }

    /// Builds the training example for one record under the given task.
    pub fn training_example(record: &InstructionRecord, task: TrainingTask) -> TrainingExample {
        match task {
            TrainingTask::SchemaLinking => TrainingExample {
                task,
                input: format!(
                    "Question: {}\nDatabase: {}\nMetadata:\n{}",
                    record.question, record.db_id, record.metadata
                ),
                target: record.schema_subset.clone(),
            },
            TrainingTask::SqlGeneration => TrainingExample {
                task,
                input: format!(
                    "Question: {}\nSchema:\n{}\nMetadata:\n{}",
                    record.question, record.schema_subset, record.metadata
                ),
                target: record.sql.clone(),
            },
        }
    }

    /// Emits JSON-lines training examples for the task, optionally filtered
    /// by record source. Output order follows pool order, so emission is
    /// deterministic for a given pool. Returns the number written.
    pub fn emit_training(
        &self,
        task: TrainingTask,
        out_path: &Path,
        source_filter: Option<&[RecordSource]>,
    ) -> Result<usize, StoreError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(out_path)?);
        let mut count = 0;
        for r in &self.records {
            if let Some(filter) = source_filter {
                if !filter.contains(&r.source) {
                    continue;
                }
            }
            let ex = Self::training_example(r, task);
            serde_json::to_writer(&mut w, &ex).map_err(|e| StoreError::Serde(e.to_string()))?;
            writeln!(w)?;
            count += 1;
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::{RowsDigest, VerdictStatus};
    use std::time::Duration;

    fn passing_verdicts() -> VerdictPair {
        VerdictPair {
            execution: ExecutionVerdict {
                status: VerdictStatus::Pass,
                rows: Some(RowsDigest {
                    digest: "00".into(),
                    row_count: 1,
                }),
                elapsed: Duration::from_millis(1),
            },
            consistency: ConsistencyVerdict {
                aligned: true,
                reason: "ok".into(),
            },
        }
    }

    fn record(sql: &str, source: RecordSource) -> InstructionRecord {
        InstructionRecord {
            question: format!("q for {sql}"),
            db_id: "cars".into(),
            sql: sql.into(),
            schema_subset: "CREATE TABLE t (\n  a INTEGER\n);\n".into(),
            metadata: "t.a: a column".into(),
            source,
            verdicts: Some(passing_verdicts()),
            round: 1,
        }
    }

    #[test]
    fn ingest_counts_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.jsonl");
        std::fs::write(
            &path,
            r#"{"question":"a","sql":"SELECT 1 FROM t","db_id":"d"}
{"question":"b","sql":"SELECT 2 FROM t","db_id":"d"}
{"question":"c","sql":"SELECT 3 FROM t","db_id":"d"}
"#,
        )
        .unwrap();
        let mut store = DatasetStore::new();
        assert_eq!(store.ingest_seeds(&path).unwrap(), 3);

        // duplicate (same sql+db_id, different whitespace/case) is skipped
        std::fs::write(
            &path,
            r#"{"question":"dup","sql":"select 1  from T","db_id":"d"}
{"question":"new","sql":"SELECT 4 FROM t","db_id":"d"}
"#,
        )
        .unwrap();
        assert_eq!(store.ingest_seeds(&path).unwrap(), 1);
        assert_eq!(store.len(), 4);
    }

    #[test]
    fn malformed_seed_line_is_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.jsonl");
        std::fs::write(
            &path,
            "{\"question\":\"a\",\"sql\":\"SELECT 1\",\"db_id\":\"d\"}\nnot json at all\n",
        )
        .unwrap();
        let mut store = DatasetStore::new();
        match store.ingest_seeds(&path) {
            Err(StoreError::SeedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(store.len(), 0, "no partial writes");
    }

    #[test]
    fn benchmark_style_query_field_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.jsonl");
        std::fs::write(
            &path,
            "{\"question\":\"a\",\"query\":\"SELECT 9 FROM t\",\"db_id\":\"d\"}\n",
        )
        .unwrap();
        let mut store = DatasetStore::new();
        assert_eq!(store.ingest_seeds(&path).unwrap(), 1);
        assert_eq!(store.records()[0].sql, "SELECT 9 FROM t");
    }

    #[test]
    fn accept_gates_on_verdicts() {
        let mut store = DatasetStore::new();
        let pos = store
            .accept(record("SELECT a FROM t", RecordSource::Structural))
            .unwrap();
        assert_eq!(pos, 0);
        assert_eq!(store.demo_pool().len(), 1);

        let mut bad = record("SELECT b FROM t", RecordSource::Semantic);
        bad.verdicts.as_mut().unwrap().execution.status = VerdictStatus::Timeout;
        bad.verdicts.as_mut().unwrap().execution.rows = None;
        assert!(matches!(store.accept(bad), Err(StoreError::Rejected(_))));

        let mut unaligned = record("SELECT c FROM t", RecordSource::Semantic);
        unaligned.verdicts.as_mut().unwrap().consistency.aligned = false;
        assert!(matches!(
            store.accept(unaligned),
            Err(StoreError::Rejected(_))
        ));

        let mut seedish = record("SELECT d FROM t", RecordSource::Seed);
        seedish.verdicts = None;
        assert!(matches!(
            store.accept(seedish),
            Err(StoreError::Rejected(_))
        ));
    }

    #[test]
    fn randomized_duplicates_collapse_to_one() {
        let mut store = DatasetStore::new();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spellings = [
            "SELECT x FROM t WHERE y = 'Z'",
            "select x from t where y = 'Z'",
            "SELECT  x  FROM  t  WHERE  y='Z'",
            "SELECT x FROM T WHERE Y = 'Z'",
        ];
        for _ in 0..1000 {
            let sql = spellings.choose(&mut rng).unwrap();
            store.accept(record(sql, RecordSource::Evolved)).unwrap();
        }
        assert_eq!(store.len(), 1, "normalized dedup failed");
        // literal case differences are NOT duplicates
        store
            .accept(record(
                "SELECT x FROM t WHERE y = 'z'",
                RecordSource::Evolved,
            ))
            .unwrap();
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn training_shapes_follow_field_roles() {
        let mut store = DatasetStore::new();
        store
            .accept(record("SELECT a FROM t", RecordSource::Structural))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();

        let link = dir.path().join("link.jsonl");
        assert_eq!(
            store
                .emit_training(TrainingTask::SchemaLinking, &link, None)
                .unwrap(),
            1
        );
        let ex: TrainingExample = serde_json::from_str(
            std::fs::read_to_string(&link)
                .unwrap()
                .lines()
                .next()
                .unwrap(),
        )
        .unwrap();
        assert!(ex.input.contains("Question: q for SELECT a FROM t"));
        assert!(ex.input.contains("Database: cars"));
        assert!(ex.input.contains("Metadata:"));
        assert!(
            !ex.input.contains("CREATE TABLE"),
            "S must not leak into input"
        );
        assert!(ex.target.contains("CREATE TABLE"), "target must be S");

        let gen = dir.path().join("gen.jsonl");
        assert_eq!(
            store
                .emit_training(TrainingTask::SqlGeneration, &gen, None)
                .unwrap(),
            1
        );
        let ex: TrainingExample = serde_json::from_str(
            std::fs::read_to_string(&gen)
                .unwrap()
                .lines()
                .next()
                .unwrap(),
        )
        .unwrap();
        assert!(ex.input.contains("Schema:\nCREATE TABLE"));
        assert_eq!(ex.target, "SELECT a FROM t");
    }

    #[test]
    fn emit_reingest_emit_is_byte_identical() {
        let mut store = DatasetStore::new();
        for i in 0..10 {
            store
                .accept(record(
                    &format!("SELECT c{i} FROM t"),
                    if i % 2 == 0 {
                        RecordSource::Structural
                    } else {
                        RecordSource::Semantic
                    },
                ))
                .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let records_path = dir.path().join("records.jsonl");
        store.save_records(&records_path).unwrap();

        let emitted1 = dir.path().join("gen1.jsonl");
        store
            .emit_training(TrainingTask::SqlGeneration, &emitted1, None)
            .unwrap();

        // every persisted field survives the round trip (execution elapsed
        // time is operational metadata and is deliberately not persisted)
        let reloaded = DatasetStore::load(&records_path).unwrap();
        let json = |r: &[InstructionRecord]| {
            r.iter()
                .map(|x| serde_json::to_string(x).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(
            json(reloaded.records()),
            json(store.records()),
            "round trip lossy"
        );
        let emitted2 = dir.path().join("gen2.jsonl");
        reloaded
            .emit_training(TrainingTask::SqlGeneration, &emitted2, None)
            .unwrap();
        assert_eq!(
            std::fs::read(&emitted1).unwrap(),
            std::fs::read(&emitted2).unwrap()
        );
    }

    #[test]
    fn counts_reconcile_to_pool_size() {
        let mut store = DatasetStore::new();
        store.ingest_seed_examples(vec![SeedExample {
            question: "q".into(),
            sql: "SELECT s FROM t".into(),
            db_id: "cars".into(),
        }]);
        store
            .accept(record("SELECT a FROM t", RecordSource::Structural))
            .unwrap();
        store
            .accept(record("SELECT b FROM t", RecordSource::Semantic))
            .unwrap();
        store
            .accept(record("SELECT c FROM t", RecordSource::Evolved))
            .unwrap();
        let m = store.manifest("abc123", true);
        let total: usize = m.by_source.values().sum();
        assert_eq!(total, m.pool_size);
        assert_eq!(m.pool_size, 4);
        assert_eq!(m.by_source.get("seed"), Some(&1));
    }

    #[test]
    fn source_filter_limits_emission() {
        let mut store = DatasetStore::new();
        store
            .accept(record("SELECT a FROM t", RecordSource::Structural))
            .unwrap();
        store
            .accept(record("SELECT b FROM t", RecordSource::Semantic))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("f.jsonl");
        let n = store
            .emit_training(
                TrainingTask::SqlGeneration,
                &out,
                Some(&[RecordSource::Semantic]),
            )
            .unwrap();
        assert_eq!(n, 1);
    }
}
