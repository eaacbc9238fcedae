//! Dual-stage candidate validation: execution verification against the
//! target database (read-only, hard timeout, failure classification) and
//! LLM-based consistency verification; plus order-insensitive result
//! comparison for execution-accuracy self-checks.

use std::path::Path;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rusqlite::{Connection, ErrorCode, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, LlmGateway, TemplateId};
use crate::rng::fnv1a;
use crate::sampler::SchemaSubgraph;
use crate::schema::DatabaseSchema;
use crate::sql::{collect_column_refs, ScopeSchema};

/// Default execution time limit for candidate queries.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(25);

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("cannot open database: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot compare: {side} query did not pass ({status:?})")]
    Comparison {
        side: &'static str,
        status: VerdictStatus,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    SyntaxError,
    InvalidReference,
    Timeout,
    RuntimeError,
}

/// Order-insensitive digest of a query's result multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowsDigest {
    pub digest: String,
    pub row_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionVerdict {
    pub status: VerdictStatus,
    /// Present exactly when status is pass.
    pub rows: Option<RowsDigest>,
    /// Measured wall time; operational metadata, not persisted with records.
    #[serde(skip, default)]
    pub elapsed: Duration,
}

impl ExecutionVerdict {
    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyVerdict {
    pub aligned: bool,
    pub reason: String,
}

enum QueryFailure {
    Classified(VerdictStatus),
    Corrupt(String),
}

fn classify_message(lower: &str) -> VerdictStatus {
    if lower.contains("syntax error")
        || lower.contains("incomplete input")
        || lower.contains("unrecognized token")
    {
        VerdictStatus::SyntaxError
    } else if lower.contains("no such table")
        || lower.contains("no such column")
        || lower.contains("ambiguous column")
    {
        VerdictStatus::InvalidReference
    } else {
        VerdictStatus::RuntimeError
    }
}

fn classify_error(err: &rusqlite::Error) -> QueryFailure {
    match err {
        rusqlite::Error::SqliteFailure(ffi, message) => {
            if ffi.code == ErrorCode::OperationInterrupted {
                return QueryFailure::Classified(VerdictStatus::Timeout);
            }
            if ffi.code == ErrorCode::NotADatabase {
                return QueryFailure::Corrupt(err.to_string());
            }
            let msg = message.clone().unwrap_or_else(|| err.to_string());
            QueryFailure::Classified(classify_message(&msg.to_lowercase()))
        }
        rusqlite::Error::SqlInputError { msg, .. } => {
            QueryFailure::Classified(classify_message(&msg.to_lowercase()))
        }
        _ => QueryFailure::Classified(VerdictStatus::RuntimeError),
    }
}

/// True when a `;` inside `sql` is followed by anything other than
/// whitespace, comments, or further semicolons. Quoted regions are skipped.
fn has_trailing_statement(sql: &str) -> bool {
    let b = sql.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            q @ (b'\'' | b'"' | b'`') => {
                i += 1;
                while i < b.len() {
                    if b[i] == q {
                        if i + 1 < b.len() && b[i + 1] == q {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'[' => {
                while i < b.len() && b[i] != b']' {
                    i += 1;
                }
                i += 1;
            }
            b'-' if i + 1 < b.len() && b[i + 1] == b'-' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if i + 1 < b.len() && b[i + 1] == b'*' => {
                i += 2;
                while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                    i += 1;
                }
                i += 2;
            }
            b';' => {
                let mut j = i + 1;
                while j < b.len() {
                    match b[j] {
                        b' ' | b'\t' | b'\r' | b'\n' | b';' => j += 1,
                        b'-' if j + 1 < b.len() && b[j + 1] == b'-' => {
                            while j < b.len() && b[j] != b'\n' {
                                j += 1;
                            }
                        }
                        _ => return true,
                    }
                }
                return false;
            }
            _ => i += 1,
        }
    }
    false
}

fn normalize_cell(v: rusqlite::types::ValueRef<'_>) -> String {
    match v {
        rusqlite::types::ValueRef::Null => "NULL".to_string(),
        rusqlite::types::ValueRef::Integer(i) => i.to_string(),
        rusqlite::types::ValueRef::Real(r) => {
            // canonicalize integral reals so 5.0 and 5 digest identically
            if r.is_finite() && r == r.trunc() && r.abs() < 9.2e18 {
                (r as i64).to_string()
            } else {
                r.to_string()
            }
        }
        rusqlite::types::ValueRef::Text(t) => {
            String::from_utf8_lossy(t).replace(['\u{1f}', '\u{1e}'], " ")
        }
        rusqlite::types::ValueRef::Blob(b) => {
            let mut s = String::with_capacity(2 + b.len() * 2);
            s.push_str("0x");
            for byte in b {
                s.push_str(&format!("{byte:02x}"));
            }
            s
        }
    }
}

fn run_query(conn: &Connection, sql: &str) -> Result<RowsDigest, QueryFailure> {
    let mut stmt = conn.prepare(sql).map_err(|e| classify_error(&e))?;
    let ncols = stmt.column_count();
    let mut rows = stmt.query([]).map_err(|e| classify_error(&e))?;
    let mut row_strings: Vec<String> = Vec::new();
    loop {
        match rows.next() {
            Ok(Some(row)) => {
                let mut cells = Vec::with_capacity(ncols);
                for i in 0..ncols {
                    match row.get_ref(i) {
                        Ok(v) => cells.push(normalize_cell(v)),
                        Err(e) => return Err(classify_error(&e)),
                    }
                }
                row_strings.push(cells.join("\u{1f}"));
            }
            Ok(None) => break,
            Err(e) => return Err(classify_error(&e)),
        }
    }
    row_strings.sort_unstable();
    let joined = row_strings.join("\u{1e}");
    Ok(RowsDigest {
        digest: format!("{:016x}", fnv1a(joined.as_bytes())),
        row_count: row_strings.len() as u64,
    })
}

fn first_keyword(sql: &str) -> Option<String> {
    let mut rest = sql.trim_start();
    // skip leading line comments
    while rest.starts_with("--") {
        {
            let p = rest.find('\n')?;
            rest = rest[p + 1..].trim_start()
        }
    }
    let word: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    if word.is_empty() {
        None
    } else {
        Some(word.to_ascii_uppercase())
    }
}

/// Runs `sql` against `db_path` in a read-only session with hard
/// cancellation at `limit`. Failures are classified as syntax errors,
/// invalid references, timeout, or other runtime errors; passing verdicts
/// carry an order-insensitive digest of the result multiset.
///
/// Write statements and multi-statement inputs are rejected as invalid
/// input before anything executes.
pub fn execute_verify(
    sql: &str,
    db_path: &Path,
    limit: Duration,
) -> Result<ExecutionVerdict, VerifierError> {
    if limit.is_zero() {
        return Err(VerifierError::InvalidInput("limit must be positive".into()));
    }
    match first_keyword(sql) {
        Some(kw) if kw == "SELECT" || kw == "WITH" => {}
        _ => {
            return Err(VerifierError::InvalidInput(
                "only SELECT statements are verified".into(),
            ))
        }
    }
    let conn = Connection::open_with_flags(
        db_path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_URI,
    )
    .map_err(|e| VerifierError::Io(e.to_string()))?;
    conn.pragma_update(None, "query_only", true)
        .map_err(|e| VerifierError::Io(e.to_string()))?;

    // multi-statement and write inputs never reach execution
    if has_trailing_statement(sql) {
        return Err(VerifierError::InvalidInput(
            "multiple statements are not allowed".into(),
        ));
    }
    if let Ok(stmt) = conn.prepare(sql) {
        if !stmt.readonly() {
            return Err(VerifierError::InvalidInput(
                "statement is not read-only".into(),
            ));
        }
    }

    let interrupt = conn.get_interrupt_handle();
    let (done_tx, done_rx) = mpsc::channel::<()>();
    let watchdog = std::thread::spawn(move || {
        if done_rx.recv_timeout(limit).is_err() {
            interrupt.interrupt();
        }
    });

    let start = Instant::now();
    let result = run_query(&conn, sql);
    let elapsed = start.elapsed();
    let _ = done_tx.send(());
    let _ = watchdog.join();

    match result {
        Ok(rows) => {
            if elapsed >= limit {
                Ok(ExecutionVerdict {
                    status: VerdictStatus::Timeout,
                    rows: None,
                    elapsed,
                })
            } else {
                Ok(ExecutionVerdict {
                    status: VerdictStatus::Pass,
                    rows: Some(rows),
                    elapsed,
                })
            }
        }
        Err(QueryFailure::Corrupt(msg)) => Err(VerifierError::Io(msg)),
        Err(QueryFailure::Classified(status)) => {
            let elapsed = if status == VerdictStatus::Timeout {
                elapsed.max(limit)
            } else {
                elapsed
            };
            Ok(ExecutionVerdict {
                status,
                rows: None,
                elapsed,
            })
        }
    }
}

/// LLM judgment that a question and its SQL express the same intent, at
/// temperature 0. An unparseable response fails closed. The mechanical check
/// that every SQL column lies inside the subgraph is recorded in the reason
/// when it finds strays, without overriding the model's verdict.
pub fn consistency_verify(
    question: &str,
    sql: &str,
    subgraph: &SchemaSubgraph,
    schema: &DatabaseSchema,
    gateway: &LlmGateway,
) -> Result<ConsistencyVerdict, VerifierError> {
    let ddl = subgraph.to_ddl(schema);
    let request = gateway.render(
        TemplateId::Consistency,
        &[("question", question), ("sql", sql), ("schema", &ddl)],
    )?;
    let response = gateway.complete(&request)?;
    let mut verdict = parse_consistency(&response.text);

    let scope = ScopeSchema::from_schema(schema);
    if let Some(refs) = collect_column_refs(sql, &scope) {
        let strays: Vec<String> = refs
            .iter()
            .filter(|r| !subgraph.contains(r))
            .map(|r| r.to_string())
            .collect();
        if !strays.is_empty() {
            verdict.reason = format!(
                "{}; columns outside schema subset: {}",
                verdict.reason,
                strays.join(", ")
            );
        }
    }
    Ok(verdict)
}

fn parse_consistency(text: &str) -> ConsistencyVerdict {
    let trimmed = text.trim();
    let first = trimmed
        .split(|c: char| {
            c.is_whitespace() || c == '—' || c == '-' || c == ':' || c == ',' || c == '.'
        })
        .next()
        .unwrap_or("");
    let aligned = match first.to_ascii_uppercase().as_str() {
        "YES" => true,
        "NO" => false,
        _ => {
            return ConsistencyVerdict {
                aligned: false,
                reason: "unparseable".into(),
            }
        }
    };
    let reason = trimmed[first.len()..]
        .trim_start_matches(|c: char| {
            c.is_whitespace() || c == '—' || c == '-' || c == ':' || c == ','
        })
        .trim()
        .to_string();
    ConsistencyVerdict {
        aligned,
        reason: if reason.is_empty() {
            first.to_ascii_uppercase()
        } else {
            reason
        },
    }
}

/// True when both queries pass and their result multisets are equal
/// (order-insensitive, type-normalized).
pub fn execution_match(
    sql_a: &str,
    sql_b: &str,
    db_path: &Path,
    limit: Duration,
) -> Result<bool, VerifierError> {
    let a = execute_verify(sql_a, db_path, limit)?;
    if !a.passed() {
        return Err(VerifierError::Comparison {
            side: "first",
            status: a.status,
        });
    }
    let b = execute_verify(sql_b, db_path, limit)?;
    if !b.passed() {
        return Err(VerifierError::Comparison {
            side: "second",
            status: b.status,
        });
    }
    Ok(a.rows == b.rows)
}
