//! Canonical SQL rendering. Rendering then reparsing a statement yields a
//! structurally identical tree.

use super::lexer::{lex, Tok};
use super::*;

/// True when the identifier must be double-quoted to survive a round trip.
pub fn ident_needs_quoting(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    if !head_ok || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return true;
    }
    // reserved words collide with the grammar
    matches!(lex(name), Ok(toks) if toks.len() == 1 && matches!(toks[0].0, Tok::Kw(_)))
}

fn ident_out(name: &str) -> String {
    if ident_needs_quoting(name) {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

fn column_out(c: &ColumnExpr) -> String {
    match &c.qualifier {
        Some(q) => format!("{}.{}", ident_out(q), ident_out(&c.column)),
        None => ident_out(&c.column),
    }
}

/// Renders an f64 so it re-lexes as a float (integral values keep a `.0`).
pub fn float_text(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn literal_out(l: &Literal) -> String {
    match l {
        Literal::Int(v) => v.to_string(),
        Literal::Float(v) => float_text(*v),
        Literal::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Literal::Bool(true) => "TRUE".into(),
        Literal::Bool(false) => "FALSE".into(),
        Literal::Null => "NULL".into(),
    }
}

fn expr_out(e: &Expr) -> String {
    match e {
        Expr::Column(c) => column_out(c),
        Expr::Aggregate(a) => {
            let arg = match &a.arg {
                AggArg::Star => "*".to_string(),
                AggArg::Column(c) => column_out(c),
            };
            if a.distinct {
                format!("{}(DISTINCT {arg})", a.func.name())
            } else {
                format!("{}({arg})", a.func.name())
            }
        }
    }
}

fn operand_out(o: &Operand) -> String {
    match o {
        Operand::Literal(l) => literal_out(l),
        Operand::Column(c) => column_out(c),
        Operand::Subquery(s) => format!("({})", render_select(s)),
    }
}

fn condition_out(c: &Condition) -> String {
    match c {
        Condition::Compare { column, op, rhs } => {
            format!(
                "{} {} {}",
                column_out(column),
                op.symbol(),
                operand_out(rhs)
            )
        }
        Condition::Like {
            column,
            negated,
            pattern,
        } => format!(
            "{}{} LIKE '{}'",
            column_out(column),
            if *negated { " NOT" } else { "" },
            pattern.replace('\'', "''")
        ),
        Condition::Between {
            column,
            negated,
            lo,
            hi,
        } => format!(
            "{}{} BETWEEN {} AND {}",
            column_out(column),
            if *negated { " NOT" } else { "" },
            literal_out(lo),
            literal_out(hi)
        ),
        Condition::InList {
            column,
            negated,
            items,
        } => {
            let list: Vec<String> = items.iter().map(literal_out).collect();
            format!(
                "{}{} IN ({})",
                column_out(column),
                if *negated { " NOT" } else { "" },
                list.join(", ")
            )
        }
        Condition::InSubquery {
            column,
            negated,
            subquery,
        } => format!(
            "{}{} IN ({})",
            column_out(column),
            if *negated { " NOT" } else { "" },
            render_select(subquery)
        ),
        Condition::IsNull { column, negated } => format!(
            "{} IS{} NULL",
            column_out(column),
            if *negated { " NOT" } else { "" }
        ),
        Condition::Group(nodes) => format!("({})", condition_list_out(nodes)),
    }
}

fn condition_list_out(nodes: &[ConditionNode]) -> String {
    let mut out = String::new();
    for (i, node) in nodes.iter().enumerate() {
        if i > 0 {
            out.push_str(match node.connector {
                Connector::And => " AND ",
                Connector::Or => " OR ",
            });
        }
        out.push_str(&condition_out(&node.condition));
    }
    out
}

/// Renders a statement as a single-line canonical SQL string.
pub fn render_select(stmt: &SelectStmt) -> String {
    let mut out = String::from("SELECT ");
    if stmt.distinct {
        out.push_str("DISTINCT ");
    }
    let items: Vec<String> = stmt
        .projection
        .iter()
        .map(|i| match i {
            SelectItem::Star => "*".to_string(),
            SelectItem::Expr(e) => expr_out(e),
        })
        .collect();
    out.push_str(&items.join(", "));

    out.push_str(" FROM ");
    out.push_str(&ident_out(&stmt.from.base.table));
    if let Some(a) = &stmt.from.base.alias {
        out.push_str(" AS ");
        out.push_str(&ident_out(a));
    }
    for j in &stmt.from.joins {
        out.push_str(" INNER JOIN ");
        out.push_str(&ident_out(&j.table.table));
        if let Some(a) = &j.table.alias {
            out.push_str(" AS ");
            out.push_str(&ident_out(a));
        }
        out.push_str(" ON ");
        out.push_str(&column_out(&j.left));
        out.push_str(" = ");
        out.push_str(&column_out(&j.right));
    }

    if !stmt.where_clause.is_empty() {
        out.push_str(" WHERE ");
        out.push_str(&condition_list_out(&stmt.where_clause));
    }
    if !stmt.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        let cols: Vec<String> = stmt.group_by.iter().map(column_out).collect();
        out.push_str(&cols.join(", "));
    }
    if !stmt.having.is_empty() {
        out.push_str(" HAVING ");
        for (i, h) in stmt.having.iter().enumerate() {
            if i > 0 {
                out.push_str(match h.connector {
                    Connector::And => " AND ",
                    Connector::Or => " OR ",
                });
            }
            out.push_str(&format!(
                "{} {} {}",
                expr_out(&h.lhs),
                h.op.symbol(),
                operand_out(&h.rhs)
            ));
        }
    }
    if !stmt.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        let items: Vec<String> = stmt
            .order_by
            .iter()
            .map(|o| {
                if o.desc {
                    format!("{} DESC", expr_out(&o.expr))
                } else {
                    expr_out(&o.expr)
                }
            })
            .collect();
        out.push_str(&items.join(", "));
    }
    if let Some(n) = stmt.limit {
        out.push_str(&format!(" LIMIT {n}"));
    }
    out
}
