//! Deterministic mock backend. Responses are pure functions of the request
//! text, so any pipeline run over the mock is reproducible. Tests can queue
//! scripted responses per template and inject transient failures.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use super::{Backend, BackendError, LlmRequest, TemplateId};

#[derive(Default)]
pub struct MockBackend {
    scripts: Mutex<BTreeMap<TemplateId, VecDeque<String>>>,
    failures: Mutex<BTreeMap<TemplateId, u32>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue scripted responses for a template, consumed in order before the
    /// default synthesizer kicks in.
    pub fn script(&self, id: TemplateId, responses: Vec<&str>) {
        let mut s = self.scripts.lock().unwrap();
        s.entry(id)
            .or_default()
            .extend(responses.into_iter().map(String::from));
    }

    /// The next `n` sends for `id` fail with a retryable error.
    pub fn inject_transient_failures(&self, id: TemplateId, n: u32) {
        self.failures.lock().unwrap().insert(id, n);
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        {
            let mut f = self.failures.lock().unwrap();
            if let Some(left) = f.get_mut(&request.template_id) {
                if *left > 0 {
                    *left -= 1;
                    return Err(BackendError::Transient(
                        "injected rate-limit failure".into(),
                    ));
                }
            }
        }
        if let Some(queue) = self.scripts.lock().unwrap().get_mut(&request.template_id) {
            if let Some(front) = queue.pop_front() {
                return Ok(front);
            }
        }
        Ok(default_response(request))
    }
}

/// Table name plus its column lines and per-column sample values, parsed
/// from the DDL block our prompts carry.
#[derive(Debug)]
struct DdlTable {
    name: String,
    columns: Vec<String>,
    samples: Vec<Vec<String>>,
}

fn parse_ddl(prompt: &str) -> (Vec<DdlTable>, Vec<(String, String)>) {
    let mut tables = Vec::new();
    let mut fks = Vec::new();
    let mut current: Option<DdlTable> = None;
    for line in prompt.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("CREATE TABLE ") {
            if let Some(name) = rest.split_whitespace().next() {
                current = Some(DdlTable {
                    name: name.trim_end_matches('(').to_string(),
                    columns: Vec::new(),
                    samples: Vec::new(),
                });
            }
            continue;
        }
        if trimmed.starts_with(");") {
            if let Some(t) = current.take() {
                tables.push(t);
            }
            continue;
        }
        if let Some(fk) = trimmed.strip_prefix("-- FK: ") {
            if let Some((a, b)) = fk.split_once(" -> ") {
                fks.push((a.trim().to_string(), b.trim().to_string()));
            }
            continue;
        }
        if let Some(t) = current.as_mut() {
            let (decl, samples) = match trimmed.split_once("-- samples: ") {
                Some((d, s)) => (d.trim(), s.trim()),
                None => (trimmed, ""),
            };
            if let Some(col) = decl.split_whitespace().next() {
                if !col.is_empty() {
                    t.columns.push(col.trim_end_matches(',').to_string());
                    let values: Vec<String> = if samples.is_empty() {
                        Vec::new()
                    } else {
                        split_samples(samples)
                    };
                    t.samples.push(values);
                }
            }
        }
    }
    (tables, fks)
}

fn split_samples(s: &str) -> Vec<String> {
    // values are comma-separated; quoted values may contain escaped quotes
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if rest.starts_with('\'') {
            let mut end = None;
            let bytes = rest.as_bytes();
            let mut i = 1;
            while i < bytes.len() {
                if bytes[i] == b'\'' {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'\'' {
                        i += 2;
                        continue;
                    }
                    end = Some(i);
                    break;
                }
                i += 1;
            }
            match end {
                Some(e) => {
                    out.push(rest[..=e].to_string());
                    rest = rest[e + 1..].trim_start_matches(',').trim();
                }
                None => break,
            }
        } else {
            match rest.find(',') {
                Some(p) => {
                    out.push(rest[..p].trim().to_string());
                    rest = rest[p + 1..].trim();
                }
                None => {
                    out.push(rest.trim().to_string());
                    rest = "";
                }
            }
        }
    }
    out.retain(|v| !v.is_empty());
    out
}

fn extract_block<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.find(header)? + header.len();
    let rest = &prompt[start..];
    let end = rest.find("\n\n").unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn extract_line<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix(prefix).map(str::trim))
}

fn sql_tables(sql: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut toks = sql.split_whitespace().peekable();
    while let Some(t) = toks.next() {
        let up = t.to_ascii_uppercase();
        if up == "FROM" || up == "JOIN" {
            if let Some(name) = toks.peek() {
                let clean = name.trim_matches(|c: char| !c.is_alphanumeric() && c != '_');
                if !clean.is_empty() && !out.iter().any(|o| o == clean) {
                    out.push(clean.to_string());
                }
            }
        }
    }
    out
}

fn question_about(sql: &str) -> String {
    let tables = sql_tables(sql);
    let list = if tables.is_empty() {
        "the database".to_string()
    } else {
        tables.join(" and ")
    };
    if sql.to_ascii_uppercase().contains("COUNT(") {
        format!("How many entries of {list} match the stated conditions?")
    } else {
        format!("List the requested values from {list} that satisfy the stated conditions.")
    }
}

fn default_response(request: &LlmRequest) -> String {
    let prompt = request.prompt.as_str();
    match request.template_id {
        TemplateId::SemanticExtract => {
            let (tables, _) = parse_ddl(prompt);
            match tables.first() {
                Some(t) => {
                    let cols = t.columns.join(" and ");
                    if tables.len() > 1 {
                        format!(
                            "List the {cols} of each {} together with its linked {} entries.",
                            t.name, tables[1].name
                        )
                    } else {
                        format!("List the {cols} of every {} on record.", t.name)
                    }
                }
                None => "List everything on record.".to_string(),
            }
        }
        TemplateId::SemanticRespond => {
            let (tables, fks) = parse_ddl(prompt);
            let Some(first) = tables.first() else {
                return "SELECT 1".to_string();
            };
            let mut sql = format!(
                "SELECT {} FROM {}",
                first
                    .columns
                    .iter()
                    .map(|c| format!("{}.{}", first.name, c))
                    .collect::<Vec<_>>()
                    .join(", "),
                first.name
            );
            // join one more table when a declared FK links it to the first
            if tables.len() > 1 {
                let names: Vec<&str> = tables.iter().map(|t| t.name.as_str()).collect();
                if let Some((a, b, other)) = fks.iter().find_map(|(a, b)| {
                    let ta = a.split('.').next().unwrap_or("");
                    let tb = b.split('.').next().unwrap_or("");
                    if !(names.contains(&ta) && names.contains(&tb)) {
                        return None;
                    }
                    if ta == first.name && tb != first.name {
                        Some((a, b, tb))
                    } else if tb == first.name && ta != first.name {
                        Some((a, b, ta))
                    } else {
                        None
                    }
                }) {
                    sql.push_str(&format!(" INNER JOIN {other} ON {a} = {b}"));
                }
            }
            // filter on the first sampled text value of the first table
            for (col, samples) in first.columns.iter().zip(&first.samples) {
                if let Some(v) = samples.iter().find(|v| v.starts_with('\'')) {
                    sql.push_str(&format!(" WHERE {}.{col} = {v}", first.name));
                    break;
                }
            }
            sql
        }
        TemplateId::BackInstruct => {
            let sql = extract_block(prompt, "SQL:\n").unwrap_or("");
            question_about(sql)
        }
        TemplateId::Scale => extract_block(prompt, "SQL:\n")
            .unwrap_or("SELECT 1")
            .to_string(),
        TemplateId::Paraphrase => {
            let sql = extract_block(prompt, "SQL:\n").unwrap_or("");
            let variant: u32 = extract_line(prompt, "Variant:")
                .and_then(|v| v.parse().ok())
                .unwrap_or(1);
            let tables = sql_tables(sql).join(" and ");
            let base = match variant % 3 {
                1 => format!("Which rows of {tables} satisfy the stated conditions?"),
                2 => format!("Show the matching values from {tables}."),
                _ => format!("Report the requested data from {tables}."),
            };
            if variant > 3 {
                format!("{base} (variant {variant})")
            } else {
                base
            }
        }
        TemplateId::Consistency => "YES — the SQL matches the question intent.".to_string(),
    }
}
