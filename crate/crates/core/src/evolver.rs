//! Progressive query evolution over syntax trees: the root is the SELECT
//! core, leaves are modular WHERE conditions. Complexity grows by appending
//! graph-guided conditions, by LLM-proposed rewrites that must reparse, and
//! evolved trees are verbalized back into questions.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gateway::{GatewayError, LlmGateway, TemplateId};
use crate::graph::{DbGraph, EdgeKind};
use crate::miner::{derive_condition, PredicateWeights};
use crate::sampler::ddl_snippet;
use crate::schema::{ColumnRef, DatabaseSchema, TypeClass};
use crate::sql::{
    parse_select, render_select, resolve_statement, strip_code_fences, ColumnExpr, CompareOp,
    Condition, ConditionNode, Connector, Join, Literal, Operand, ParseError, ResolveError,
    ScopeSchema, SelectStmt, TableRef,
};

pub use crate::sql::{ConditionNode as WhereLeaf, Provenance};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("resolution error: {0}")]
    Resolution(#[from] ResolveError),
    #[error("no eligible neighbor column remains; evolution is exhausted")]
    AugmentationExhausted,
    #[error("gateway returned an empty response")]
    EmptyResponse,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A SELECT statement held as a tree, bound to its schema.
#[derive(Debug, Clone)]
pub struct SqlSyntaxTree {
    stmt: SelectStmt,
    schema: Arc<DatabaseSchema>,
}

impl PartialEq for SqlSyntaxTree {
    fn eq(&self, other: &Self) -> bool {
        self.stmt == other.stmt && self.schema.db_id == other.schema.db_id
    }
}

impl SqlSyntaxTree {
    pub fn render(&self) -> String {
        render_select(&self.stmt)
    }

    /// Top-level WHERE conjuncts; a parenthesized group counts as one leaf.
    pub fn leaves(&self) -> &[ConditionNode] {
        &self.stmt.where_clause
    }

    pub fn leaf_count(&self) -> usize {
        self.stmt.leaf_count()
    }

    pub fn referenced_columns(&self) -> BTreeSet<ColumnRef> {
        self.stmt.referenced_columns()
    }

    pub fn schema(&self) -> &Arc<DatabaseSchema> {
        &self.schema
    }

    pub fn stmt(&self) -> &SelectStmt {
        &self.stmt
    }

    pub fn tables(&self) -> Vec<&str> {
        self.stmt.from.tables().map(|t| t.table.as_str()).collect()
    }
}

/// Parses a single SELECT statement and binds every column reference to the
/// schema (strict: unknown or ambiguous references are errors).
pub fn parse_tree(sql: &str, schema: &Arc<DatabaseSchema>) -> Result<SqlSyntaxTree, EvolveError> {
    let mut stmt = parse_select(sql)?;
    let scope = ScopeSchema::from_schema(schema);
    resolve_statement(&mut stmt, &scope, true)?;
    Ok(SqlSyntaxTree {
        stmt,
        schema: Arc::clone(schema),
    })
}

#[derive(Debug, Clone)]
pub struct EvolveConfig {
    /// Probability that an appended condition attaches with OR.
    pub or_prob: f64,
    pub predicate_weights: PredicateWeights,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            or_prob: 0.1,
            predicate_weights: PredicateWeights::default(),
        }
    }
}

fn conditions_in(tree: &SqlSyntaxTree) -> Vec<&Condition> {
    fn walk<'a>(cond: &'a Condition, out: &mut Vec<&'a Condition>) {
        if let Condition::Group(nodes) = cond {
            for n in nodes {
                walk(&n.condition, out);
            }
        } else {
            out.push(cond);
        }
    }
    let mut out = Vec::new();
    for node in &tree.stmt.where_clause {
        walk(&node.condition, &mut out);
    }
    out
}

/// The finite condition space for text/temporal/boolean columns.
fn finite_conditions(node: &ColumnRef, schema: &DatabaseSchema) -> Option<Vec<Condition>> {
    let meta = schema.column(node)?;
    if meta.sample_values.is_empty() {
        return None;
    }
    let column = ColumnExpr::from_ref(node);
    let mut out = Vec::new();
    match meta.type_class {
        TypeClass::Text => {
            for v in &meta.sample_values {
                out.push(Condition::Compare {
                    column: column.clone(),
                    op: CompareOp::Eq,
                    rhs: Operand::Literal(Literal::Str(v.clone())),
                });
                let cut = (v.chars().count().div_ceil(2)).max(1);
                let prefix: String = v.chars().take(cut).collect();
                out.push(Condition::Like {
                    column: column.clone(),
                    negated: false,
                    pattern: format!("{prefix}%"),
                });
            }
        }
        TypeClass::Temporal => {
            for v in &meta.sample_values {
                for op in [CompareOp::Lt, CompareOp::Gt, CompareOp::Eq] {
                    out.push(Condition::Compare {
                        column: column.clone(),
                        op,
                        rhs: Operand::Literal(Literal::Str(v.clone())),
                    });
                }
            }
        }
        TypeClass::Boolean => {
            for v in &meta.sample_values {
                let lit = if let Ok(i) = v.parse::<i64>() {
                    Literal::Int(i)
                } else {
                    Literal::Str(v.clone())
                };
                out.push(Condition::Compare {
                    column: column.clone(),
                    op: CompareOp::Eq,
                    rhs: Operand::Literal(lit),
                });
            }
        }
        TypeClass::Numeric | TypeClass::Other => return None,
    }
    Some(out)
}

fn numeric_unexhausted(node: &ColumnRef, schema: &DatabaseSchema, used: &[&Condition]) -> bool {
    let Some(meta) = schema.column(node) else {
        return false;
    };
    if meta.type_class != TypeClass::Numeric || meta.sample_values.is_empty() {
        return false;
    }
    let mut values = Vec::new();
    for s in &meta.sample_values {
        match s.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) => return false,
        }
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min < max {
        return true; // a continuum of constants remains available
    }
    // degenerate range: the space collapses to a handful of conditions
    let column = ColumnExpr::from_ref(node);
    let lit = if let Ok(i) = meta.sample_values[0].parse::<i64>() {
        Literal::Int(i)
    } else {
        Literal::Float(min)
    };
    let space = [
        Condition::Compare {
            column: column.clone(),
            op: CompareOp::Lt,
            rhs: Operand::Literal(lit.clone()),
        },
        Condition::Compare {
            column: column.clone(),
            op: CompareOp::Gt,
            rhs: Operand::Literal(lit.clone()),
        },
        Condition::Compare {
            column: column.clone(),
            op: CompareOp::Eq,
            rhs: Operand::Literal(lit.clone()),
        },
        Condition::Between {
            column,
            negated: false,
            lo: lit.clone(),
            hi: lit,
        },
    ];
    space.iter().any(|c| !used.contains(&c))
}

fn column_eligible(node: &ColumnRef, schema: &DatabaseSchema, used: &[&Condition]) -> bool {
    match schema.column(node).map(|m| m.type_class) {
        Some(TypeClass::Numeric) => numeric_unexhausted(node, schema, used),
        Some(TypeClass::Other) | None => false,
        _ => match finite_conditions(node, schema) {
            Some(space) => space.iter().any(|c| !used.contains(&c)),
            None => false,
        },
    }
}

fn pick_condition(
    node: &ColumnRef,
    schema: &DatabaseSchema,
    used: &[&Condition],
    weights: &PredicateWeights,
    rng: &mut ChaCha8Rng,
) -> Option<Condition> {
    match schema.column(node).map(|m| m.type_class) {
        Some(TypeClass::Numeric) => derive_condition(node, schema, weights, used, rng),
        _ => {
            let space = finite_conditions(node, schema)?;
            let unused: Vec<Condition> = space.into_iter().filter(|c| !used.contains(&c)).collect();
            if unused.is_empty() {
                None
            } else {
                Some(unused[rng.gen_range(0..unused.len())].clone())
            }
        }
    }
}

/// Appends exactly one new condition to the tree, on a column chosen by one
/// weighted-sampling step over the graph edges incident to the tree's
/// current columns. When the chosen column's table is not yet in the FROM
/// spec, an INNER JOIN along the connecting foreign-key edge is added.
/// Original leaves are untouched.
pub fn augment_condition(
    tree: &SqlSyntaxTree,
    graph: &DbGraph,
    seed: u64,
    config: &EvolveConfig,
) -> Result<SqlSyntaxTree, EvolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = tree.schema.as_ref();
    let used = conditions_in(tree);

    let tree_cols: Vec<ColumnRef> = tree.referenced_columns().into_iter().collect();
    let mut candidates: Vec<(usize, ColumnRef, f64)> = Vec::new();
    for col in &tree_cols {
        let Some(nid) = graph.node_id(col) else {
            continue;
        };
        for &edge in graph.incident_edges(nid) {
            let other = graph.other_endpoint(edge, nid);
            let target = graph.node(other).clone();
            if !column_eligible(&target, schema, &used) {
                continue;
            }
            // joining a new table is only possible along an FK edge
            if !tree.stmt.from.has_table(&target.table)
                && graph.edge(edge).kind != EdgeKind::InterTable
            {
                continue;
            }
            if !candidates
                .iter()
                .any(|(e, t, _)| *e == edge && *t == target)
            {
                candidates.push((edge, target, graph.edge(edge).weight));
            }
        }
    }
    if candidates.is_empty() {
        return Err(EvolveError::AugmentationExhausted);
    }

    let total: f64 = candidates.iter().map(|(_, _, w)| w).sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut chosen = candidates.len() - 1;
    for (i, (_, _, w)) in candidates.iter().enumerate() {
        pick -= w;
        if pick <= 0.0 {
            chosen = i;
            break;
        }
    }
    let (edge_id, target, _) = candidates.swap_remove(chosen);

    let condition = pick_condition(&target, schema, &used, &config.predicate_weights, &mut rng)
        .ok_or(EvolveError::AugmentationExhausted)?;

    let mut stmt = tree.stmt.clone();
    if !stmt.from.has_table(&target.table) {
        let edge = graph.edge(edge_id);
        let (in_scope, incoming) = if stmt.from.has_table(&edge.a.table) {
            (edge.a.clone(), edge.b.clone())
        } else {
            (edge.b.clone(), edge.a.clone())
        };
        stmt.from.joins.push(Join {
            table: TableRef {
                table: target.table.clone(),
                alias: None,
            },
            left: ColumnExpr::from_ref(&in_scope),
            right: ColumnExpr::from_ref(&incoming),
        });
    }
    let connector = if !stmt.where_clause.is_empty() && rng.gen::<f64>() < config.or_prob {
        Connector::Or
    } else {
        Connector::And
    };
    stmt.where_clause.push(ConditionNode {
        connector,
        condition,
        provenance: Provenance::Augmented,
    });

    Ok(SqlSyntaxTree {
        stmt,
        schema: Arc::clone(&tree.schema),
    })
}

#[derive(Debug)]
pub struct ScaleOutcome {
    pub tree: SqlSyntaxTree,
    /// Set when the proposal failed to reparse and the original was kept.
    pub rejected: bool,
}

/// Asks the gateway to rewrite the query with more complexity. The proposal
/// must parse and resolve under the grammar; otherwise the original tree is
/// returned with `rejected` set.
pub fn scale_complexity(
    tree: &SqlSyntaxTree,
    gateway: &LlmGateway,
) -> Result<ScaleOutcome, EvolveError> {
    let schema = &tree.schema;
    let all_columns: Vec<ColumnRef> = schema.all_columns().collect();
    let fks: Vec<(ColumnRef, ColumnRef)> = schema
        .foreign_keys
        .iter()
        .map(|fk| (fk.from.clone(), fk.to.clone()))
        .collect();
    let ddl = ddl_snippet(schema, &all_columns, &fks);
    let sql = tree.render();
    let request = gateway.render(TemplateId::Scale, &[("schema", &ddl), ("sql", &sql)])?;
    let response = gateway.complete(&request)?;
    let proposal = strip_code_fences(&response.text);
    if proposal.is_empty() {
        return Ok(ScaleOutcome {
            tree: tree.clone(),
            rejected: true,
        });
    }
    match parse_tree(proposal, schema) {
        Ok(mut scaled) => {
            // conditions carried over from the input keep their provenance;
            // an identity rewrite therefore returns an identical tree
            for leaf in &mut scaled.stmt.where_clause {
                let carried = tree
                    .stmt
                    .where_clause
                    .iter()
                    .find(|orig| orig.condition == leaf.condition);
                leaf.provenance = match carried {
                    Some(orig) => orig.provenance,
                    None => Provenance::LlmScaled,
                };
            }
            Ok(ScaleOutcome {
                tree: scaled,
                rejected: false,
            })
        }
        Err(EvolveError::Parse(_)) | Err(EvolveError::Resolution(_)) => Ok(ScaleOutcome {
            tree: tree.clone(),
            rejected: true,
        }),
        Err(e) => Err(e),
    }
}

/// Verbalizes the tree into up to `n` distinct questions (duplicates and
/// empty responses removed; never empty when at least one response has
/// content).
pub fn paraphrase(
    tree: &SqlSyntaxTree,
    gateway: &LlmGateway,
    n: usize,
) -> Result<Vec<String>, EvolveError> {
    let schema = &tree.schema;
    let cols: Vec<ColumnRef> = tree.referenced_columns().into_iter().collect();
    let fks: Vec<(ColumnRef, ColumnRef)> = schema
        .foreign_keys
        .iter()
        .filter(|fk| {
            let tables = tree.tables();
            tables.contains(&fk.from.table.as_str()) && tables.contains(&fk.to.table.as_str())
        })
        .map(|fk| (fk.from.clone(), fk.to.clone()))
        .collect();
    let ddl = ddl_snippet(schema, &cols, &fks);
    let sql = tree.render();
    let mut out: Vec<String> = Vec::new();
    for k in 1..=n.max(1) {
        let variant = k.to_string();
        let request = gateway.render(
            TemplateId::Paraphrase,
            &[("schema", &ddl), ("sql", &sql), ("variant", &variant)],
        )?;
        let response = gateway.complete(&request)?;
        let text = response.text.trim().to_string();
        if !text.is_empty() && !out.contains(&text) {
            out.push(text);
        }
    }
    if out.is_empty() {
        return Err(EvolveError::EmptyResponse);
    }
    Ok(out)
}
