//! Column resolution: binds written column references to canonical
//! table/column names from a schema, resolving aliases and bare names.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::*;
use crate::schema::{ColumnRef, DatabaseSchema};

#[derive(Debug, Error, PartialEq)]
pub enum ResolveError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{0}` appears more than once in FROM; aliased self-joins are not supported")]
    DuplicateTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`: present in more than one table in scope")]
    AmbiguousColumn(String),
}

/// Table/column name lookup, case-insensitive, yielding canonical names.
#[derive(Debug, Clone)]
pub struct ScopeSchema {
    tables: HashMap<String, (String, HashMap<String, String>)>,
}

impl ScopeSchema {
    pub fn from_schema(schema: &DatabaseSchema) -> Self {
        let mut tables = HashMap::new();
        for t in &schema.tables {
            let cols: HashMap<String, String> = t
                .columns
                .iter()
                .map(|c| (c.name.to_lowercase(), c.name.clone()))
                .collect();
            tables.insert(t.name.to_lowercase(), (t.name.clone(), cols));
        }
        Self { tables }
    }

    /// Builds a view from bare column refs (e.g. the nodes of a graph).
    pub fn from_columns<'a>(cols: impl IntoIterator<Item = &'a ColumnRef>) -> Self {
        let mut tables: HashMap<String, (String, HashMap<String, String>)> = HashMap::new();
        for c in cols {
            let entry = tables
                .entry(c.table.to_lowercase())
                .or_insert_with(|| (c.table.clone(), HashMap::new()));
            entry.1.insert(c.column.to_lowercase(), c.column.clone());
        }
        Self { tables }
    }

    fn table(&self, name: &str) -> Option<&(String, HashMap<String, String>)> {
        self.tables.get(&name.to_lowercase())
    }
}

struct Scope {
    /// qualifier key (lowercased alias or table name) → canonical table
    entries: Vec<(String, String)>,
    has_unknown_tables: bool,
}

impl Scope {
    fn lookup_qualifier(&self, q: &str) -> Option<&str> {
        let ql = q.to_lowercase();
        self.entries
            .iter()
            .find(|(k, _)| *k == ql)
            .map(|(_, t)| t.as_str())
    }
}

struct Resolver<'a> {
    schema: &'a ScopeSchema,
    strict: bool,
    resolved: BTreeSet<ColumnRef>,
}

type RResult = Result<(), ResolveError>;

impl<'a> Resolver<'a> {
    fn build_scope(&self, from: &FromSpec) -> Result<Scope, ResolveError> {
        let mut entries = Vec::new();
        let mut seen_canonical: Vec<String> = Vec::new();
        let mut has_unknown = false;
        for tref in from.tables() {
            match self.schema.table(&tref.table) {
                Some((canonical, _)) => {
                    if seen_canonical.iter().any(|t| t == canonical) {
                        if self.strict {
                            return Err(ResolveError::DuplicateTable(canonical.clone()));
                        }
                    } else {
                        seen_canonical.push(canonical.clone());
                    }
                    let key = tref.alias.as_deref().unwrap_or(&tref.table).to_lowercase();
                    entries.push((key, canonical.clone()));
                }
                None => {
                    if self.strict {
                        return Err(ResolveError::UnknownTable(tref.table.clone()));
                    }
                    has_unknown = true;
                }
            }
        }
        Ok(Scope {
            entries,
            has_unknown_tables: has_unknown,
        })
    }

    fn resolve_column(&mut self, col: &mut ColumnExpr, scope: &Scope) -> RResult {
        match &col.qualifier {
            Some(q) => {
                let Some(table) = scope.lookup_qualifier(q) else {
                    if self.strict {
                        return Err(ResolveError::UnknownTable(q.clone()));
                    }
                    return Ok(());
                };
                let table = table.to_string();
                let Some((canonical_table, cols)) = self.schema.table(&table) else {
                    return Ok(());
                };
                match cols.get(&col.column.to_lowercase()) {
                    Some(canonical_col) => {
                        col.qualifier = Some(canonical_table.clone());
                        col.column = canonical_col.clone();
                        col.double_quoted = false;
                        self.resolved.insert(ColumnRef::new(
                            canonical_table.clone(),
                            canonical_col.clone(),
                        ));
                        Ok(())
                    }
                    None => {
                        if self.strict {
                            Err(ResolveError::UnknownColumn(format!("{}.{}", q, col.column)))
                        } else {
                            Ok(())
                        }
                    }
                }
            }
            None => {
                if !self.strict && scope.has_unknown_tables {
                    // cannot prove uniqueness; drop the reference
                    return Ok(());
                }
                let cl = col.column.to_lowercase();
                let mut hits: Vec<(String, String)> = Vec::new();
                for (_, table) in &scope.entries {
                    if let Some((ct, cols)) = self.schema.table(table) {
                        if let Some(cc) = cols.get(&cl) {
                            if !hits.iter().any(|(t, _)| t == ct) {
                                hits.push((ct.clone(), cc.clone()));
                            }
                        }
                    }
                }
                match hits.len() {
                    1 => {
                        let (t, c) = hits.pop().unwrap();
                        col.qualifier = Some(t.clone());
                        col.column = c.clone();
                        col.double_quoted = false;
                        self.resolved.insert(ColumnRef::new(t, c));
                        Ok(())
                    }
                    0 => {
                        if self.strict {
                            Err(ResolveError::UnknownColumn(col.column.clone()))
                        } else {
                            Ok(())
                        }
                    }
                    _ => {
                        if self.strict {
                            Err(ResolveError::AmbiguousColumn(col.column.clone()))
                        } else {
                            Ok(())
                        }
                    }
                }
            }
        }
    }

    fn resolve_operand(&mut self, op: &mut Operand, scope: &Scope) -> RResult {
        match op {
            Operand::Literal(_) => Ok(()),
            Operand::Column(c) => {
                let was_double_quoted = c.double_quoted && c.qualifier.is_none();
                match self.resolve_column(c, scope) {
                    Ok(()) => {
                        // lenient mode: an unresolved double-quoted name is a
                        // string literal, matching the engine's fallback
                        if !self.strict && was_double_quoted && c.qualifier.is_none() {
                            *op = Operand::Literal(Literal::Str(c.column.clone()));
                        }
                        Ok(())
                    }
                    Err(e) => {
                        if was_double_quoted {
                            *op = Operand::Literal(Literal::Str(c.column.clone()));
                            Ok(())
                        } else {
                            Err(e)
                        }
                    }
                }
            }
            Operand::Subquery(sub) => self.resolve_stmt(sub),
        }
    }

    fn resolve_condition(&mut self, cond: &mut Condition, scope: &Scope) -> RResult {
        match cond {
            Condition::Compare { column, rhs, .. } => {
                self.resolve_column(column, scope)?;
                self.resolve_operand(rhs, scope)
            }
            Condition::Like { column, .. }
            | Condition::Between { column, .. }
            | Condition::InList { column, .. }
            | Condition::IsNull { column, .. } => self.resolve_column(column, scope),
            Condition::InSubquery {
                column, subquery, ..
            } => {
                self.resolve_column(column, scope)?;
                self.resolve_stmt(subquery)
            }
            Condition::Group(nodes) => {
                for n in nodes {
                    self.resolve_condition(&mut n.condition, scope)?;
                }
                Ok(())
            }
        }
    }

    fn resolve_expr(&mut self, expr: &mut Expr, scope: &Scope) -> RResult {
        match expr {
            Expr::Column(c) => self.resolve_column(c, scope),
            Expr::Aggregate(a) => match &mut a.arg {
                AggArg::Star => Ok(()),
                AggArg::Column(c) => self.resolve_column(c, scope),
            },
        }
    }

    fn resolve_stmt(&mut self, stmt: &mut SelectStmt) -> RResult {
        let scope = self.build_scope(&stmt.from)?;
        for item in &mut stmt.projection {
            if let SelectItem::Expr(e) = item {
                self.resolve_expr(e, &scope)?;
            }
        }
        for join in &mut stmt.from.joins {
            self.resolve_column(&mut join.left, &scope)?;
            self.resolve_column(&mut join.right, &scope)?;
        }
        for node in &mut stmt.where_clause {
            self.resolve_condition(&mut node.condition, &scope)?;
        }
        for col in &mut stmt.group_by {
            self.resolve_column(col, &scope)?;
        }
        for h in &mut stmt.having {
            self.resolve_expr(&mut h.lhs, &scope)?;
            self.resolve_operand(&mut h.rhs, &scope)?;
        }
        for o in &mut stmt.order_by {
            self.resolve_expr(&mut o.expr, &scope)?;
        }
        // canonicalize FROM: real table names, no aliases
        if self.strict {
            let canonicalize = |tref: &mut TableRef, schema: &ScopeSchema| {
                if let Some((ct, _)) = schema.table(&tref.table) {
                    tref.table = ct.clone();
                }
                tref.alias = None;
            };
            canonicalize(&mut stmt.from.base, self.schema);
            for j in &mut stmt.from.joins {
                canonicalize(&mut j.table, self.schema);
            }
        }
        Ok(())
    }
}

/// Binds every column reference in `stmt` to canonical names. In strict mode
/// unknown tables/columns and ambiguous bare names are errors and the FROM
/// spec is rewritten alias-free; in lenient mode unresolvable references are
/// left as written. Returns the set of resolved column refs.
pub fn resolve_statement(
    stmt: &mut SelectStmt,
    schema: &ScopeSchema,
    strict: bool,
) -> Result<BTreeSet<ColumnRef>, ResolveError> {
    let mut r = Resolver {
        schema,
        strict,
        resolved: BTreeSet::new(),
    };
    r.resolve_stmt(stmt)?;
    Ok(r.resolved)
}

/// Parses `sql` and leniently collects the column refs it resolves.
/// Returns `None` when the text does not parse under the grammar.
pub fn collect_column_refs(sql: &str, schema: &ScopeSchema) -> Option<BTreeSet<ColumnRef>> {
    let mut stmt = super::parser::parse_select(sql).ok()?;
    Some(resolve_statement(&mut stmt, schema, false).expect("lenient resolve cannot fail"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope() -> ScopeSchema {
        ScopeSchema::from_columns(&[
            ColumnRef::new("price", "id"),
            ColumnRef::new("price", "price"),
            ColumnRef::new("production", "id"),
            ColumnRef::new("production", "country"),
            ColumnRef::new("production", "maker_id"),
            ColumnRef::new("maker", "id"),
            ColumnRef::new("maker", "name"),
            ColumnRef::new("maker", "country"),
        ])
    }

    #[test]
    fn aliases_resolve_to_canonical_tables() {
        let refs = collect_column_refs(
            "SELECT T1.name FROM maker AS T1 INNER JOIN production AS T2 \
             ON T1.id = T2.maker_id WHERE T2.country = 'USA'",
            &scope(),
        )
        .unwrap();
        let expect: BTreeSet<ColumnRef> = [
            ColumnRef::new("maker", "name"),
            ColumnRef::new("maker", "id"),
            ColumnRef::new("production", "maker_id"),
            ColumnRef::new("production", "country"),
        ]
        .into_iter()
        .collect();
        assert_eq!(refs, expect);
    }

    #[test]
    fn ambiguous_bare_columns_are_dropped_not_guessed() {
        // `country` exists in both production and maker
        let refs = collect_column_refs(
            "SELECT country FROM maker INNER JOIN production ON maker.id = production.maker_id",
            &scope(),
        )
        .unwrap();
        assert!(!refs.iter().any(|r| r.column == "country"));
        // unambiguous bare column resolves
        let refs = collect_column_refs("SELECT name FROM maker", &scope()).unwrap();
        assert!(refs.contains(&ColumnRef::new("maker", "name")));
    }

    #[test]
    fn strict_mode_rejects_unknowns() {
        let mut stmt = super::super::parser::parse_select("SELECT missing FROM price").unwrap();
        let err = resolve_statement(&mut stmt, &scope(), true).unwrap_err();
        assert_eq!(err, ResolveError::UnknownColumn("missing".into()));

        let mut stmt = super::super::parser::parse_select("SELECT x FROM nowhere").unwrap();
        assert!(matches!(
            resolve_statement(&mut stmt, &scope(), true),
            Err(ResolveError::UnknownTable(_))
        ));
    }

    #[test]
    fn strict_mode_drops_aliases_and_canonicalizes() {
        let mut stmt = super::super::parser::parse_select(
            "SELECT T1.name FROM maker AS T1 WHERE T1.country = 'Japan'",
        )
        .unwrap();
        resolve_statement(&mut stmt, &scope(), true).unwrap();
        let rendered = super::super::render::render_select(&stmt);
        assert_eq!(
            rendered,
            "SELECT maker.name FROM maker WHERE maker.country = 'Japan'"
        );
    }

    #[test]
    fn double_quoted_unresolvable_operand_becomes_string() {
        let mut stmt =
            super::super::parser::parse_select("SELECT name FROM maker WHERE country = \"Sweden\"")
                .unwrap();
        resolve_statement(&mut stmt, &scope(), true).unwrap();
        let rendered = super::super::render::render_select(&stmt);
        assert!(rendered.ends_with("maker.country = 'Sweden'"), "{rendered}");
    }

    #[test]
    fn unparseable_sql_collects_nothing() {
        assert!(collect_column_refs("DELETE FROM maker", &scope()).is_none());
    }
}
