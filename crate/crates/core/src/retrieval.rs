//! Coarse-to-fine value retrieval: a from-scratch BM25 inverted index over
//! distinct text cell values, refined by longest-common-subsequence ratio
//! against question n-gram spans. Used to surface `column = 'value'` hints
//! at prompt-construction time.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ColumnRef, DatabaseSchema, TypeClass};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Defaults for prompt-hint extraction; both are configurable.
pub const DEFAULT_TOP_N: usize = 5;
pub const DEFAULT_MIN_LCS_RATIO: f64 = 0.6;

const INDEX_MAGIC: &[u8; 8] = b"SQVIDX\0\0";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sqlite error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("bad index file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueDoc {
    pub column: ColumnRef,
    pub value: String,
}

/// Inverted index over cell values. One document per distinct
/// (column, value) pair; immutable once built.
#[derive(Debug, Default, PartialEq)]
pub struct ValueIndex {
    docs: Vec<ValueDoc>,
    doc_len: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    /// Character-trigram recall map, derived from `docs`; lets the coarse
    /// stage surface candidates for misspelled tokens that share no whole
    /// word with any value. Never contributes to BM25 scores.
    trigrams: BTreeMap<String, Vec<u32>>,
    total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub column: ColumnRef,
    pub value: String,
    pub bm25_score: f64,
    pub lcs_ratio: f64,
}

/// Lowercased alphanumeric-run tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

/// Longest common subsequence length via the classic DP, O(|a|·|b|) time and
/// O(min) memory, over characters.
pub fn lcs_length(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    if short.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for lc in long.iter() {
        for (j, sc) in short.iter().enumerate() {
            cur[j + 1] = if lc == sc {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

impl ValueIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.docs.len() as f64
        }
    }

    fn add_document(&mut self, column: ColumnRef, value: String) {
        let tokens = tokenize(&value);
        let id = self.docs.len() as u32;
        self.doc_len.push(tokens.len() as u32);
        self.total_tokens += tokens.len() as u64;
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            self.postings
                .entry(term.to_string())
                .or_default()
                .push(Posting { doc: id, tf: count });
        }
        for gram in token_trigrams(&tokens) {
            let list = self.trigrams.entry(gram).or_default();
            if list.last() != Some(&id) {
                list.push(id);
            }
        }
        self.docs.push(ValueDoc { column, value });
    }

    /// BM25 scores over the question tokens (distinct terms), Robertson
    /// formula with the non-negative idf variant:
    /// idf = ln(1 + (N − df + 0.5) / (df + 0.5)).
    fn bm25(&self, terms: &[String]) -> HashMap<u32, f64> {
        let n = self.docs.len() as f64;
        let avgdl = self.avg_doc_len();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        let mut seen: Vec<&str> = Vec::new();
        for term in terms {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let df = postings.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for p in postings {
                let dl = self.doc_len[p.doc as usize] as f64;
                let tf = p.tf as f64;
                let denom =
                    tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl.max(f64::MIN_POSITIVE));
                let score = idf * tf * (BM25_K1 + 1.0) / denom;
                *scores.entry(p.doc).or_insert(0.0) += score;
            }
        }
        scores
    }

    /// Two-stage retrieval: BM25 ranks 10 × top_n candidates (padded with
    /// character-trigram recall hits at score 0 so misspelled tokens still
    /// surface), then each candidate is re-scored by its best LCS ratio
    /// against any question word n-gram (lengths 1–4). Results ordered by
    /// (lcs_ratio, bm25).
    pub fn query(&self, question: &str, top_n: usize) -> Vec<MatchResult> {
        if top_n == 0 {
            return Vec::new();
        }
        let terms = tokenize(question);
        if terms.is_empty() {
            return Vec::new();
        }
        let scores = self.bm25(&terms);
        let mut candidates: Vec<(u32, f64)> = scores.into_iter().collect();
        candidates.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        candidates.truncate(10 * top_n);

        if candidates.len() < 10 * top_n {
            let mut fuzzy: Vec<u32> = Vec::new();
            for gram in token_trigrams(&terms) {
                if let Some(docs) = self.trigrams.get(&gram) {
                    fuzzy.extend(docs);
                }
            }
            fuzzy.sort_unstable();
            fuzzy.dedup();
            for doc in fuzzy {
                if candidates.len() >= 10 * top_n {
                    break;
                }
                if !candidates.iter().any(|(d, _)| *d == doc) {
                    candidates.push((doc, 0.0));
                }
            }
        }

        let spans = ngram_spans(&terms, 4);
        let mut results: Vec<MatchResult> = candidates
            .into_iter()
            .map(|(doc, bm25_score)| {
                let d = &self.docs[doc as usize];
                let value_lower = d.value.to_lowercase();
                let value_chars = value_lower.chars().count();
                let mut best = 0.0f64;
                for span in &spans {
                    let lcs = lcs_length(span, &value_lower);
                    let denom = span.chars().count().max(value_chars);
                    if denom > 0 {
                        best = best.max(lcs as f64 / denom as f64);
                    }
                }
                MatchResult {
                    column: d.column.clone(),
                    value: d.value.clone(),
                    bm25_score,
                    lcs_ratio: best,
                }
            })
            .collect();
        results.sort_by(|a, b| {
            b.lcs_ratio
                .partial_cmp(&a.lcs_ratio)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    b.bm25_score
                        .partial_cmp(&a.bm25_score)
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
                .then(a.value.cmp(&b.value))
                .then(a.column.cmp(&b.column))
        });
        results.truncate(top_n);
        results
    }

    /// `table.column = 'value'` hint lines for matches at or above the
    /// given LCS ratio.
    pub fn hint_lines(&self, question: &str, top_n: usize, min_lcs_ratio: f64) -> Vec<String> {
        self.query(question, top_n)
            .into_iter()
            .filter(|m| m.lcs_ratio >= min_lcs_ratio)
            .map(|m| {
                format!(
                    "{}.{} = '{}'",
                    m.column.table,
                    m.column.column,
                    m.value.replace('\'', "''")
                )
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        write_u32(&mut w, self.docs.len() as u32)?;
        for (doc, len) in self.docs.iter().zip(&self.doc_len) {
            write_str(&mut w, &doc.column.table)?;
            write_str(&mut w, &doc.column.column)?;
            write_str(&mut w, &doc.value)?;
            write_u32(&mut w, *len)?;
        }
        write_u32(&mut w, self.postings.len() as u32)?;
        for (term, postings) in &self.postings {
            write_str(&mut w, term)?;
            write_u32(&mut w, postings.len() as u32)?;
            for p in postings {
                write_u32(&mut w, p.doc)?;
                write_u32(&mut w, p.tf)?;
            }
        }
        w.write_all(&self.total_tokens.to_le_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(RetrievalError::Format("magic header mismatch".into()));
        }
        let mut vbuf = [0u8; 4];
        r.read_exact(&mut vbuf)?;
        let version = u32::from_le_bytes(vbuf);
        if version != INDEX_VERSION {
            return Err(RetrievalError::Format(format!(
                "unsupported index version {version}"
            )));
        }
        let ndocs = read_u32(&mut r)? as usize;
        let mut docs = Vec::with_capacity(ndocs);
        let mut doc_len = Vec::with_capacity(ndocs);
        for _ in 0..ndocs {
            let table = read_str(&mut r)?;
            let column = read_str(&mut r)?;
            let value = read_str(&mut r)?;
            doc_len.push(read_u32(&mut r)?);
            docs.push(ValueDoc {
                column: ColumnRef::new(table, column),
                value,
            });
        }
        let nterms = read_u32(&mut r)? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..nterms {
            let term = read_str(&mut r)?;
            let len = read_u32(&mut r)? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = read_u32(&mut r)?;
                let tf = read_u32(&mut r)?;
                list.push(Posting { doc, tf });
            }
            postings.insert(term, list);
        }
        let mut tbuf = [0u8; 8];
        r.read_exact(&mut tbuf)?;
        // the trigram recall map is derived data; rebuild it
        let mut trigrams: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (id, doc) in docs.iter().enumerate() {
            for gram in token_trigrams(&tokenize(&doc.value)) {
                let list = trigrams.entry(gram).or_default();
                if list.last() != Some(&(id as u32)) {
                    list.push(id as u32);
                }
            }
        }
        Ok(Self {
            docs,
            doc_len,
            postings,
            trigrams,
            total_tokens: u64::from_le_bytes(tbuf),
        })
    }
}

fn ngram_spans(terms: &[String], max_n: usize) -> Vec<String> {
    let mut spans = Vec::new();
    for n in 1..=max_n.min(terms.len()) {
        for window in terms.windows(n) {
            spans.push(window.join(" "));
        }
    }
    spans
}

/// Character trigrams of each token; tokens shorter than three characters
/// index as themselves.
fn token_trigrams(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for t in tokens {
        let chars: Vec<char> = t.chars().collect();
        if chars.len() < 3 {
            out.push(t.clone());
            continue;
        }
        for w in chars.windows(3) {
            out.push(w.iter().collect());
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, RetrievalError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, RetrievalError> {
    let len = read_u32(r)? as usize;
    if len > 64 * 1024 * 1024 {
        return Err(RetrievalError::Format("oversized string field".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| RetrievalError::Format(e.to_string()))
}

fn render_text(v: rusqlite::types::ValueRef<'_>) -> Option<String> {
    match v {
        rusqlite::types::ValueRef::Null => None,
        rusqlite::types::ValueRef::Integer(i) => Some(i.to_string()),
        rusqlite::types::ValueRef::Real(r) => Some(r.to_string()),
        rusqlite::types::ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        rusqlite::types::ValueRef::Blob(_) => None,
    }
}

/// Indexes the distinct values of every text-class column, most frequent
/// first, capped per column. Numeric columns are excluded.
pub fn build_index(
    schema: &DatabaseSchema,
    db_path: &Path,
    max_values_per_column: usize,
) -> Result<ValueIndex, RetrievalError> {
    let conn = Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY)?;
    let mut index = ValueIndex::default();
    for table in &schema.tables {
        for col in &table.columns {
            if col.type_class != TypeClass::Text {
                continue;
            }
            let quote = |n: &str| format!("\"{}\"", n.replace('"', "\"\""));
            let sql = format!(
                "SELECT {c} FROM {t} WHERE {c} IS NOT NULL \
                 GROUP BY {c} ORDER BY COUNT(*) DESC, CAST({c} AS TEXT) ASC LIMIT {k}",
                c = quote(&col.name),
                t = quote(&table.name),
                k = max_values_per_column,
            );
            let mut stmt = conn.prepare(&sql)?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                if let Some(value) = render_text(row.get_ref(0)?) {
                    index.add_document(ColumnRef::new(table.name.clone(), col.name.clone()), value);
                }
            }
        }
    }
    Ok(index)
}
