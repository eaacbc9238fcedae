//! A small SQL dialect: lexer, SELECT-statement AST, recursive-descent
//! parser, canonical renderer, and schema resolution.
//!
//! The grammar covers the SELECT core with INNER JOINs, WHERE conjunct
//! lists (AND/OR), scalar and IN subqueries, GROUP BY / HAVING / ORDER BY /
//! LIMIT. That is wide enough to represent benchmark-style training queries
//! and everything the deterministic generator or the evolution step emits.

mod lexer;
mod parser;
mod render;
mod resolve;

pub use lexer::{lex, LexError, Tok};
pub use parser::{parse_select, ParseError};
pub use render::{ident_needs_quoting, render_select};
pub use resolve::{collect_column_refs, resolve_statement, ResolveError, ScopeSchema};

use serde::{Deserialize, Serialize};

use crate::schema::ColumnRef;

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
}

/// A column reference as written: optionally qualified, possibly via alias.
/// Resolution rewrites the qualifier to the canonical table name.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnExpr {
    pub qualifier: Option<String>,
    pub column: String,
    /// Set when the name was written in double quotes; used for the
    /// string-literal fallback SQLite applies to unresolvable names.
    pub double_quoted: bool,
}

impl ColumnExpr {
    pub fn bare(column: impl Into<String>) -> Self {
        Self {
            qualifier: None,
            column: column.into(),
            double_quoted: false,
        }
    }

    pub fn qualified(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            qualifier: Some(table.into()),
            column: column.into(),
            double_quoted: false,
        }
    }

    pub fn from_ref(col: &ColumnRef) -> Self {
        Self::qualified(col.table.clone(), col.column.clone())
    }

    /// The resolved form, if the qualifier has been filled in.
    pub fn as_ref(&self) -> Option<ColumnRef> {
        self.qualifier
            .as_ref()
            .map(|q| ColumnRef::new(q.clone(), self.column.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(&self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggArg {
    Star,
    Column(ColumnExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggExpr {
    pub func: AggFunc,
    pub distinct: bool,
    pub arg: AggArg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(ColumnExpr),
    Aggregate(AggExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Star,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub table: String,
    pub alias: Option<String>,
}

/// One INNER JOIN with a single column-equality condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub table: TableRef,
    pub left: ColumnExpr,
    pub right: ColumnExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromSpec {
    pub base: TableRef,
    pub joins: Vec<Join>,
}

impl FromSpec {
    pub fn tables(&self) -> impl Iterator<Item = &TableRef> {
        std::iter::once(&self.base).chain(self.joins.iter().map(|j| &j.table))
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.tables().any(|t| t.table == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Literal(Literal),
    Column(ColumnExpr),
    Subquery(Box<SelectStmt>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connector {
    And,
    Or,
}

/// Where a WHERE leaf came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mined,
    Augmented,
    LlmScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Compare {
        column: ColumnExpr,
        op: CompareOp,
        rhs: Operand,
    },
    Like {
        column: ColumnExpr,
        negated: bool,
        pattern: String,
    },
    Between {
        column: ColumnExpr,
        negated: bool,
        lo: Literal,
        hi: Literal,
    },
    InList {
        column: ColumnExpr,
        negated: bool,
        items: Vec<Literal>,
    },
    InSubquery {
        column: ColumnExpr,
        negated: bool,
        subquery: Box<SelectStmt>,
    },
    IsNull {
        column: ColumnExpr,
        negated: bool,
    },
    /// A parenthesized group; counts as one leaf of the tree.
    Group(Vec<ConditionNode>),
}

/// One top-level WHERE conjunct: the condition, the connective joining it to
/// the previous conjunct (ignored on the first), and its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionNode {
    pub connector: Connector,
    pub condition: Condition,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HavingCond {
    pub connector: Connector,
    pub lhs: Expr,
    pub op: CompareOp,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

/// A single SELECT statement.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectStmt {
    pub distinct: bool,
    pub projection: Vec<SelectItem>,
    pub from: FromSpec,
    pub where_clause: Vec<ConditionNode>,
    pub group_by: Vec<ColumnExpr>,
    pub having: Vec<HavingCond>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

fn collect_condition_columns(cond: &Condition, out: &mut std::collections::BTreeSet<ColumnRef>) {
    fn push(c: &ColumnExpr, out: &mut std::collections::BTreeSet<ColumnRef>) {
        if let Some(r) = c.as_ref() {
            out.insert(r);
        }
    }
    match cond {
        Condition::Compare { column, rhs, .. } => {
            push(column, out);
            match rhs {
                Operand::Column(c) => push(c, out),
                Operand::Subquery(s) => out.extend(s.referenced_columns()),
                Operand::Literal(_) => {}
            }
        }
        Condition::Like { column, .. }
        | Condition::Between { column, .. }
        | Condition::InList { column, .. }
        | Condition::IsNull { column, .. } => push(column, out),
        Condition::InSubquery {
            column, subquery, ..
        } => {
            push(column, out);
            out.extend(subquery.referenced_columns());
        }
        Condition::Group(nodes) => {
            for n in nodes {
                collect_condition_columns(&n.condition, out);
            }
        }
    }
}

impl SelectStmt {
    pub fn new(base_table: impl Into<String>) -> Self {
        Self {
            distinct: false,
            projection: Vec::new(),
            from: FromSpec {
                base: TableRef {
                    table: base_table.into(),
                    alias: None,
                },
                joins: Vec::new(),
            },
            where_clause: Vec::new(),
            group_by: Vec::new(),
            having: Vec::new(),
            order_by: Vec::new(),
            limit: None,
        }
    }

    /// Number of top-level WHERE conjuncts.
    pub fn leaf_count(&self) -> usize {
        self.where_clause.len()
    }

    /// Every resolved column reference in the statement, subqueries included.
    pub fn referenced_columns(&self) -> std::collections::BTreeSet<ColumnRef> {
        fn push(c: &ColumnExpr, out: &mut std::collections::BTreeSet<ColumnRef>) {
            if let Some(r) = c.as_ref() {
                out.insert(r);
            }
        }
        fn push_expr(e: &Expr, out: &mut std::collections::BTreeSet<ColumnRef>) {
            match e {
                Expr::Column(c) => push(c, out),
                Expr::Aggregate(a) => {
                    if let AggArg::Column(c) = &a.arg {
                        push(c, out)
                    }
                }
            }
        }
        let mut out = std::collections::BTreeSet::new();
        for item in &self.projection {
            if let SelectItem::Expr(e) = item {
                push_expr(e, &mut out);
            }
        }
        for j in &self.from.joins {
            push(&j.left, &mut out);
            push(&j.right, &mut out);
        }
        for node in &self.where_clause {
            collect_condition_columns(&node.condition, &mut out);
        }
        for c in &self.group_by {
            push(c, &mut out);
        }
        for h in &self.having {
            push_expr(&h.lhs, &mut out);
            if let Operand::Column(c) = &h.rhs {
                push(c, &mut out);
            }
        }
        for o in &self.order_by {
            push_expr(&o.expr, &mut out);
        }
        out
    }
}

/// Strips a surrounding markdown code fence from a model response, if any.
pub fn strip_code_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = match rest.find('\n') {
        Some(p) => &rest[p + 1..],
        None => rest,
    };
    rest.trim_end().trim_end_matches("```").trim()
}

/// Normalizes SQL text for deduplication: single-spaced token stream with
/// keywords and identifiers lowercased and string literal content preserved.
/// Falls back to lowercased whitespace-collapse when the text does not lex.
pub fn normalize_sql(sql: &str) -> String {
    match lex(sql) {
        Ok(tokens) => {
            let mut parts: Vec<String> = Vec::with_capacity(tokens.len());
            for (tok, _) in &tokens {
                let part = match tok {
                    Tok::Ident { text, .. } => text.to_lowercase(),
                    Tok::Str(s) => format!("'{}'", s.replace('\'', "''")),
                    Tok::Int(i) => i.to_string(),
                    Tok::Float(x) => render::float_text(*x),
                    Tok::Kw(k) => k.text().to_lowercase(),
                    other => other.symbol_text().to_string(),
                };
                parts.push(part);
            }
            parts.join(" ")
        }
        Err(_) => sql
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_whitespace_and_case_outside_literals() {
        let a = normalize_sql("SELECT  name FROM maker WHERE country = 'Japan'");
        let b = normalize_sql("select name\n from MAKER where COUNTRY='Japan'");
        assert_eq!(a, b);
        let c = normalize_sql("select name from maker where country = 'JAPAN'");
        assert_ne!(a, c, "literal content must stay case-sensitive");
    }
}
