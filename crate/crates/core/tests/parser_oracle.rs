//! Cross-checks the internal parser's WHERE-leaf counting against an
//! independent reference SQL parser over a small query corpus.

use std::sync::Arc;

use sqlparser::ast::{Expr, SetExpr, Statement};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

use sqlsynth_core::evolver::parse_tree;
use sqlsynth_core::schema::{
    ColumnMeta, ColumnRef, DatabaseSchema, ForeignKey, TableMeta, TypeClass,
};

fn corpus_schema() -> Arc<DatabaseSchema> {
    let col = |name: &str, tc: TypeClass, ty: &str| ColumnMeta {
        name: name.into(),
        type_class: tc,
        declared_type: ty.into(),
        is_primary_key: false,
        sample_values: Vec::new(),
    };
    Arc::new(DatabaseSchema {
        db_id: "corpus".into(),
        tables: vec![
            TableMeta {
                name: "t".into(),
                columns: vec![
                    col("a", TypeClass::Numeric, "INTEGER"),
                    col("x", TypeClass::Numeric, "INTEGER"),
                    col("y", TypeClass::Numeric, "REAL"),
                    col("z", TypeClass::Text, "TEXT"),
                ],
            },
            TableMeta {
                name: "u".into(),
                columns: vec![
                    col("a", TypeClass::Numeric, "INTEGER"),
                    col("w", TypeClass::Text, "TEXT"),
                ],
            },
        ],
        foreign_keys: vec![ForeignKey {
            from: ColumnRef::new("u", "a"),
            to: ColumnRef::new("t", "a"),
        }],
        metadata: Default::default(),
    })
}

/// Number of leaves in the AND/OR fringe of the reference parser's
/// selection expression; parenthesized groups count as one leaf.
fn reference_leaf_count(expr: &Expr) -> usize {
    match expr {
        Expr::BinaryOp {
            left,
            op: sqlparser::ast::BinaryOperator::And | sqlparser::ast::BinaryOperator::Or,
            right,
        } => reference_leaf_count(left) + reference_leaf_count(right),
        _ => 1,
    }
}

fn reference_count(sql: &str) -> usize {
    let statements = Parser::parse_sql(&SQLiteDialect {}, sql).expect("reference parse");
    assert_eq!(statements.len(), 1);
    let Statement::Query(q) = &statements[0] else {
        panic!("not a query");
    };
    let SetExpr::Select(select) = q.body.as_ref() else {
        panic!("not a plain select");
    };
    match &select.selection {
        Some(expr) => reference_leaf_count(expr),
        None => 0,
    }
}

#[test]
fn leaf_counts_match_reference_parser() {
    let schema = corpus_schema();
    let corpus = [
        "SELECT a FROM t WHERE x > 5",
        "SELECT a FROM t",
        "SELECT a FROM t WHERE x > 5 AND y < 3",
        "SELECT a FROM t WHERE x > 5 AND y < 3 OR z = 'q'",
        "SELECT a FROM t WHERE (x > 5 OR y < 3) AND z = 'q'",
        "SELECT a FROM t WHERE z LIKE 'ab%' AND x BETWEEN 1 AND 9",
        "SELECT a FROM t WHERE x IN (1, 2, 3)",
        "SELECT t.a FROM t INNER JOIN u ON t.a = u.a WHERE u.w = 'v' AND t.y >= 2.5",
        "SELECT a FROM t WHERE x IS NOT NULL AND z NOT LIKE 'no%' AND y != 0",
        "SELECT a FROM t WHERE a IN (SELECT a FROM u) AND x > 1",
    ];
    for sql in corpus {
        let ours = parse_tree(sql, &schema).unwrap().leaf_count();
        let reference = reference_count(sql);
        assert_eq!(ours, reference, "leaf count mismatch for {sql}");
    }
}

#[test]
fn malformed_keyword_positions_are_reported() {
    let schema = corpus_schema();
    let err = parse_tree("SELECT * FORM t", &schema).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("FORM"), "{text}");
    assert!(text.contains("9"), "position missing: {text}");
}
