//! Schema ingestion: introspect a SQLite database file into a
//! [`DatabaseSchema`] with typed columns, foreign keys, and sampled cell
//! values, and attach free-text metadata from a description file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of distinct sample values collected per column.
pub const DEFAULT_SAMPLE_K: usize = 3;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a usable database file {path}: {message}")]
    Format { path: String, message: String },
    #[error("sqlite error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("malformed description file at line {line}: {message}")]
    Description { line: usize, message: String },
}

/// Identifies one column of one table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// Coarse class of a column's declared type, used to derive filter templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeClass {
    Numeric,
    Text,
    Temporal,
    Boolean,
    Other,
}

/// Maps a declared SQL type string onto a [`TypeClass`].
///
/// The mapping is total and follows SQLite's substring-affinity style:
/// BOOL → boolean, DATE/TIME → temporal, INT/REAL/NUMERIC/DECIMAL/DOUBLE/
/// FLOAT → numeric, CHAR/TEXT/CLOB → text, anything else → other.
pub fn type_class_of(declared: &str) -> TypeClass {
    let up = declared.to_ascii_uppercase();
    if up.contains("BOOL") {
        TypeClass::Boolean
    } else if up.contains("DATE") || up.contains("TIME") {
        TypeClass::Temporal
    } else if up.contains("INT")
        || up.contains("REAL")
        || up.contains("NUMERIC")
        || up.contains("DECIMAL")
        || up.contains("DOUBLE")
        || up.contains("FLOAT")
    {
        TypeClass::Numeric
    } else if up.contains("CHAR") || up.contains("TEXT") || up.contains("CLOB") {
        TypeClass::Text
    } else {
        TypeClass::Other
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub type_class: TypeClass,
    pub declared_type: String,
    pub is_primary_key: bool,
    /// Up to K distinct non-null values actually present in the column,
    /// most frequent first, ties broken lexicographically.
    pub sample_values: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableMeta {
    pub name: String,
    pub columns: Vec<ColumnMeta>,
}

impl TableMeta {
    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_ci(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from: ColumnRef,
    pub to: ColumnRef,
}

/// Introspected shape of one database: tables, typed columns, foreign keys,
/// sampled cell values, and a free-text metadata map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableMeta>,
    pub foreign_keys: Vec<ForeignKey>,
    /// `table.column` → description text.
    pub metadata: BTreeMap<String, String>,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableMeta> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_ci(&self, name: &str) -> Option<&TableMeta> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, col: &ColumnRef) -> Option<&ColumnMeta> {
        self.table(&col.table).and_then(|t| t.column(&col.column))
    }

    /// All columns in table order, then column order.
    pub fn all_columns(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.tables.iter().flat_map(|t| {
            t.columns
                .iter()
                .map(move |c| ColumnRef::new(t.name.clone(), c.name.clone()))
        })
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn render_value(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(r) => Some(r.to_string()),
        ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => {
            let mut s = String::with_capacity(b.len() * 2);
            for byte in b {
                s.push_str(&format!("{byte:02x}"));
            }
            Some(s)
        }
    }
}

/// Loads a SQLite database file into a [`DatabaseSchema`].
///
/// Every column carries at most `sample_k` distinct sampled values. Composite
/// foreign keys are decomposed into per-column entries; reversed duplicates
/// are kept as-is here and merged at graph construction time.
pub fn load_schema(db_path: &Path, sample_k: usize) -> Result<DatabaseSchema, SchemaError> {
    let path_str = db_path.display().to_string();
    if !db_path.exists() {
        return Err(SchemaError::Io {
            path: path_str,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    let conn =
        Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY).map_err(|e| {
            SchemaError::Format {
                path: path_str.clone(),
                message: e.to_string(),
            }
        })?;

    let db_id = db_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "db".to_string());

    // Table list; alphabetical for load determinism across dump/restore.
    let mut table_names: Vec<String> = {
        let mut stmt = conn
            .prepare(
                "SELECT name FROM sqlite_master \
                 WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
            )
            .map_err(|e| SchemaError::Format {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        rows.collect::<Result<_, _>>()?
    };
    table_names.dedup();

    let mut tables = Vec::with_capacity(table_names.len());
    for tname in &table_names {
        let mut columns = Vec::new();
        {
            let mut stmt = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(tname)))?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, String>(1)?,
                    r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                    r.get::<_, i64>(5)?,
                ))
            })?;
            for row in rows {
                let (name, declared, pk) = row?;
                columns.push(ColumnMeta {
                    type_class: type_class_of(&declared),
                    declared_type: declared,
                    is_primary_key: pk > 0,
                    sample_values: Vec::new(),
                    name,
                });
            }
        }
        for col in &mut columns {
            col.sample_values = sample_column_values(&conn, tname, &col.name, sample_k)?;
        }
        tables.push(TableMeta {
            name: tname.clone(),
            columns,
        });
    }

    let schema_wip = DatabaseSchema {
        db_id,
        tables,
        foreign_keys: Vec::new(),
        metadata: BTreeMap::new(),
    };

    let mut foreign_keys = Vec::new();
    for t in &schema_wip.tables {
        let mut stmt = conn.prepare(&format!(
            "PRAGMA foreign_key_list({})",
            quote_ident(&t.name)
        ))?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, Option<String>>(4)?,
            ))
        })?;
        for row in rows {
            let (_id, seq, target_table, from_col, to_col) = row?;
            let Some(target) = schema_wip.table_ci(&target_table) else {
                continue; // dangling FK target; drop
            };
            let to_name = match to_col {
                Some(c) => match target.column_ci(&c) {
                    Some(cm) => cm.name.clone(),
                    None => continue,
                },
                // Omitted target column references the primary key.
                None => {
                    let pks: Vec<&ColumnMeta> =
                        target.columns.iter().filter(|c| c.is_primary_key).collect();
                    match pks.get(seq as usize) {
                        Some(cm) => cm.name.clone(),
                        None => continue,
                    }
                }
            };
            let Some(from_meta) = t.column_ci(&from_col) else {
                continue;
            };
            if target.name == t.name {
                continue; // self-referencing FK; the graph is cross-table only
            }
            let fk = ForeignKey {
                from: ColumnRef::new(t.name.clone(), from_meta.name.clone()),
                to: ColumnRef::new(target.name.clone(), to_name),
            };
            if !foreign_keys.contains(&fk) {
                foreign_keys.push(fk);
            }
        }
    }

    let mut schema = schema_wip;
    schema.foreign_keys = foreign_keys;
    Ok(schema)
}

fn sample_column_values(
    conn: &Connection,
    table: &str,
    column: &str,
    k: usize,
) -> Result<Vec<String>, SchemaError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let sql = format!(
        "SELECT {c} FROM {t} WHERE {c} IS NOT NULL \
         GROUP BY {c} ORDER BY COUNT(*) DESC, CAST({c} AS TEXT) ASC LIMIT {k}",
        c = quote_ident(column),
        t = quote_ident(table),
    );
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        if let Some(s) = render_value(row.get_ref(0)?) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Result of [`load_metadata`]: the enriched schema plus a count of
/// well-formed description entries that referenced unknown columns.
#[derive(Debug)]
pub struct MetadataLoad {
    pub schema: DatabaseSchema,
    pub warnings: u32,
}

/// Populates `schema.metadata` from a description file of UTF-8 lines
/// `table.column<TAB>description`. Entries referencing unknown columns are
/// dropped and counted; structurally malformed lines are an error.
pub fn load_metadata(
    mut schema: DatabaseSchema,
    desc_path: Option<&Path>,
) -> Result<MetadataLoad, SchemaError> {
    let Some(path) = desc_path else {
        return Ok(MetadataLoad {
            schema,
            warnings: 0,
        });
    };
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut warnings = 0u32;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, desc)) = line.split_once('\t') else {
            return Err(SchemaError::Description {
                line: line_no,
                message: "expected `table.column<TAB>description`".into(),
            });
        };
        let key = key.trim();
        let Some((table, column)) = key.split_once('.') else {
            return Err(SchemaError::Description {
                line: line_no,
                message: format!("key `{key}` is not of the form table.column"),
            });
        };
        if table.is_empty() || column.is_empty() {
            return Err(SchemaError::Description {
                line: line_no,
                message: format!("key `{key}` has an empty table or column part"),
            });
        }
        let resolved = schema.table_ci(table).and_then(|t| {
            t.column_ci(column)
                .map(|c| (t.name.clone(), c.name.clone()))
        });
        match resolved {
            Some((t, c)) => {
                schema
                    .metadata
                    .insert(format!("{t}.{c}"), desc.trim().to_string());
            }
            None => warnings += 1,
        }
    }
    Ok(MetadataLoad { schema, warnings })
}
