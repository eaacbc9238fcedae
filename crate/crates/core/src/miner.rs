//! Structural pattern mining: deterministically synthesize one executable
//! SELECT statement from a sampled subgraph (FK joins, type-derived filters,
//! optional aggregation over a numeric column), then translate it into a
//! natural-language question through the gateway.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, LlmGateway, TemplateId};
use crate::graph::EdgeKind;
use crate::sampler::{ddl_snippet, SchemaSubgraph};
use crate::schema::{ColumnRef, DatabaseSchema, TypeClass};
use crate::sql::{
    render_select, AggArg, AggExpr, AggFunc, ColumnExpr, CompareOp, Condition, ConditionNode,
    Connector, Expr, Join, Literal, Operand, OrderItem, Provenance, SelectItem, SelectStmt,
    TableRef,
};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("subgraph spans tables with no foreign-key path; sampler should prevent this")]
    UnjoinableSubgraph,
    #[error("subgraph node {0} does not resolve in the schema")]
    NodeOutsideSchema(ColumnRef),
    #[error("gateway returned an empty or degenerate response")]
    EmptyResponse,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqlFeature {
    Join,
    Filter,
    Aggregation,
    GroupBy,
    OrderBy,
    Limit,
}

/// Relative weights for the predicate templates of each type class.
#[derive(Debug, Clone)]
pub struct PredicateWeights {
    pub text_eq: f64,
    pub text_like: f64,
    pub num_lt: f64,
    pub num_gt: f64,
    pub num_eq: f64,
    pub num_between: f64,
}

impl Default for PredicateWeights {
    fn default() -> Self {
        Self {
            text_eq: 0.7,
            text_like: 0.3,
            num_lt: 0.3,
            num_gt: 0.3,
            num_eq: 0.2,
            num_between: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinerConfig {
    /// Probability of applying an aggregation when a numeric column exists.
    pub aggregation_prob: f64,
    /// Per-column probability of deriving a WHERE predicate.
    pub filter_prob: f64,
    pub order_by_prob: f64,
    pub limit_prob: f64,
    pub predicate_weights: PredicateWeights,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            aggregation_prob: 0.3,
            filter_prob: 0.6,
            order_by_prob: 0.2,
            limit_prob: 0.1,
            predicate_weights: PredicateWeights::default(),
        }
    }
}

/// A machine-generated SQL statement awaiting verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqlDraft {
    pub sql: String,
    pub used_nodes: Vec<ColumnRef>,
    pub features: BTreeSet<SqlFeature>,
}

fn weighted_pick<'a, T>(choices: &'a [(T, f64)], rng: &mut ChaCha8Rng) -> &'a T {
    let total: f64 = choices.iter().map(|(_, w)| w).sum();
    let mut target = rng.gen::<f64>() * total;
    for (item, w) in choices {
        target -= w;
        if target <= 0.0 {
            return item;
        }
    }
    &choices.last().unwrap().0
}

/// Builds a spanning tree over the subgraph's tables from its inter-table
/// edges, heaviest first, and returns the join sequence rooted at the first
/// table: (new_table, in_scope_column, new_table_column).
fn join_plan(subgraph: &SchemaSubgraph) -> Result<Vec<(String, ColumnRef, ColumnRef)>, MinerError> {
    let tables: Vec<String> = subgraph.tables().iter().map(|t| t.to_string()).collect();
    if tables.len() <= 1 {
        return Ok(Vec::new());
    }
    let mut inter: Vec<&crate::graph::GraphEdge> = subgraph
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::InterTable)
        .collect();
    inter.sort_by(|x, y| {
        y.weight
            .partial_cmp(&x.weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });

    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let index_of = |t: &str| tables.iter().position(|x| x == t).unwrap();
    let mut parent: Vec<usize> = (0..tables.len()).collect();
    let mut tree: Vec<(usize, usize, ColumnRef, ColumnRef)> = Vec::new();
    for e in inter {
        let (ia, ib) = (index_of(&e.a.table), index_of(&e.b.table));
        let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
        if ra != rb {
            parent[ra] = rb;
            tree.push((ia, ib, e.a.clone(), e.b.clone()));
        }
    }
    if tree.len() != tables.len() - 1 {
        return Err(MinerError::UnjoinableSubgraph);
    }

    // order joins so each new table attaches to a table already in scope
    let mut in_scope = vec![false; tables.len()];
    in_scope[0] = true;
    let mut plan = Vec::new();
    let mut remaining = tree;
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .position(|(a, b, _, _)| in_scope[*a] != in_scope[*b])
            .ok_or(MinerError::UnjoinableSubgraph)?;
        let (a, b, ca, cb) = remaining.remove(pos);
        let (new_idx, scope_col, new_col) = if in_scope[a] {
            (b, ca, cb)
        } else {
            (a, cb, ca)
        };
        in_scope[new_idx] = true;
        plan.push((tables[new_idx].clone(), scope_col, new_col));
    }
    Ok(plan)
}

fn numeric_range(samples: &[String]) -> Option<(f64, f64, bool)> {
    let mut values = Vec::new();
    let mut all_int = true;
    for s in samples {
        let v: f64 = s.parse().ok()?;
        if v != v.trunc() {
            all_int = false;
        }
        values.push(v);
    }
    if values.is_empty() {
        return None;
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ext = 0.5 * (max - min);
    Some((min - ext, max + ext, all_int))
}

fn numeric_literal(value: f64, as_int: bool) -> Literal {
    if as_int {
        Literal::Int(value.round() as i64)
    } else {
        Literal::Float((value * 100.0).round() / 100.0)
    }
}

fn sample_literal(raw: &str) -> Literal {
    if let Ok(i) = raw.parse::<i64>() {
        Literal::Int(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        Literal::Float(f)
    } else {
        Literal::Str(raw.to_string())
    }
}

/// Derives a predicate for one column from its type class and sample values,
/// or None when the column is unfilterable (no samples, or `other` class).
pub(crate) fn derive_condition(
    node: &ColumnRef,
    schema: &DatabaseSchema,
    weights: &PredicateWeights,
    exclude: &[&Condition],
    rng: &mut ChaCha8Rng,
) -> Option<Condition> {
    let meta = schema.column(node)?;
    if meta.sample_values.is_empty() {
        return None;
    }
    let column = ColumnExpr::from_ref(node);
    let samples = &meta.sample_values;
    // a couple of draws to dodge excluded (already present) conditions
    for _ in 0..8 {
        let condition = match meta.type_class {
            TypeClass::Text => {
                let value = samples[rng.gen_range(0..samples.len())].clone();
                let choices = [(0u8, weights.text_eq), (1u8, weights.text_like)];
                match weighted_pick(&choices, rng) {
                    0 => Condition::Compare {
                        column: column.clone(),
                        op: CompareOp::Eq,
                        rhs: Operand::Literal(Literal::Str(value)),
                    },
                    _ => {
                        let cut = (value.chars().count().div_ceil(2)).max(1);
                        let prefix: String = value.chars().take(cut).collect();
                        Condition::Like {
                            column: column.clone(),
                            negated: false,
                            pattern: format!("{prefix}%"),
                        }
                    }
                }
            }
            TypeClass::Numeric => {
                let (lo, hi, all_int) = numeric_range(samples)?;
                let choices = [
                    (0u8, weights.num_lt),
                    (1u8, weights.num_gt),
                    (2u8, weights.num_eq),
                    (3u8, weights.num_between),
                ];
                let pick = *weighted_pick(&choices, rng);
                let draw = |rng: &mut ChaCha8Rng| lo + rng.gen::<f64>() * (hi - lo);
                match pick {
                    0 => Condition::Compare {
                        column: column.clone(),
                        op: CompareOp::Lt,
                        rhs: Operand::Literal(numeric_literal(draw(rng), all_int)),
                    },
                    1 => Condition::Compare {
                        column: column.clone(),
                        op: CompareOp::Gt,
                        rhs: Operand::Literal(numeric_literal(draw(rng), all_int)),
                    },
                    2 => Condition::Compare {
                        column: column.clone(),
                        op: CompareOp::Eq,
                        rhs: Operand::Literal(sample_literal(
                            &samples[rng.gen_range(0..samples.len())],
                        )),
                    },
                    _ => {
                        let (a, b) = (draw(rng), draw(rng));
                        let (a, b) = if a <= b { (a, b) } else { (b, a) };
                        Condition::Between {
                            column: column.clone(),
                            negated: false,
                            lo: numeric_literal(a, all_int),
                            hi: numeric_literal(b, all_int),
                        }
                    }
                }
            }
            TypeClass::Temporal => {
                let value = samples[rng.gen_range(0..samples.len())].clone();
                let ops = [CompareOp::Lt, CompareOp::Gt, CompareOp::Eq];
                Condition::Compare {
                    column: column.clone(),
                    op: ops[rng.gen_range(0..ops.len())],
                    rhs: Operand::Literal(Literal::Str(value)),
                }
            }
            TypeClass::Boolean => Condition::Compare {
                column: column.clone(),
                op: CompareOp::Eq,
                rhs: Operand::Literal(sample_literal(&samples[rng.gen_range(0..samples.len())])),
            },
            TypeClass::Other => return None,
        };
        if !exclude.iter().any(|c| **c == condition) {
            return Some(condition);
        }
    }
    None
}

/// Emits one SELECT statement covering every subgraph node: tables joined
/// along foreign-key edges (heaviest spanning tree first), WHERE predicates
/// derived from column type classes and sampled values, an optional
/// aggregation over a numeric column with GROUP BY over the remaining
/// selected columns, and occasional ORDER BY / LIMIT. Identical inputs and
/// seed give an identical statement.
pub fn generate_sql(
    subgraph: &SchemaSubgraph,
    schema: &DatabaseSchema,
    seed: u64,
    config: &MinerConfig,
) -> Result<SqlDraft, MinerError> {
    for node in &subgraph.nodes {
        if schema.column(node).is_none() {
            return Err(MinerError::NodeOutsideSchema(node.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = BTreeSet::new();

    let plan = join_plan(subgraph)?;
    let base_table = subgraph.tables()[0].to_string();
    let mut stmt = SelectStmt::new(base_table);
    let mut join_cols: BTreeSet<ColumnRef> = BTreeSet::new();
    for (table, scope_col, new_col) in &plan {
        stmt.from.joins.push(Join {
            table: TableRef {
                table: table.clone(),
                alias: None,
            },
            left: ColumnExpr::from_ref(scope_col),
            right: ColumnExpr::from_ref(new_col),
        });
        join_cols.insert(scope_col.clone());
        join_cols.insert(new_col.clone());
        features.insert(SqlFeature::Join);
    }

    // type-derived filters over non-join columns
    let mut filter_cols: BTreeSet<ColumnRef> = BTreeSet::new();
    for node in &subgraph.nodes {
        if join_cols.contains(node) {
            continue;
        }
        if rng.gen::<f64>() >= config.filter_prob {
            continue;
        }
        if let Some(condition) =
            derive_condition(node, schema, &config.predicate_weights, &[], &mut rng)
        {
            stmt.where_clause.push(ConditionNode {
                connector: Connector::And,
                condition,
                provenance: Provenance::Mined,
            });
            filter_cols.insert(node.clone());
            features.insert(SqlFeature::Filter);
        }
    }

    // optional aggregation over a numeric column
    let numeric_nodes: Vec<&ColumnRef> = subgraph
        .nodes
        .iter()
        .filter(|n| {
            schema
                .column(n)
                .map(|m| m.type_class == TypeClass::Numeric)
                .unwrap_or(false)
        })
        .collect();
    let mut agg_target: Option<ColumnRef> = None;
    if !numeric_nodes.is_empty() && rng.gen::<f64>() < config.aggregation_prob {
        let target = numeric_nodes[rng.gen_range(0..numeric_nodes.len())].clone();
        let funcs = [
            AggFunc::Count,
            AggFunc::Sum,
            AggFunc::Avg,
            AggFunc::Min,
            AggFunc::Max,
        ];
        let func = funcs[rng.gen_range(0..funcs.len())];
        agg_target = Some(target.clone());
        features.insert(SqlFeature::Aggregation);
        stmt.projection
            .push(SelectItem::Expr(Expr::Aggregate(AggExpr {
                func,
                distinct: false,
                arg: AggArg::Column(ColumnExpr::from_ref(&target)),
            })));
    }

    // every node not covered yet goes to the SELECT list
    let mut plain_selected: Vec<ColumnRef> = Vec::new();
    for node in &subgraph.nodes {
        let covered = join_cols.contains(node)
            || filter_cols.contains(node)
            || agg_target.as_ref() == Some(node);
        if !covered {
            plain_selected.push(node.clone());
        }
    }
    for (i, node) in plain_selected.iter().enumerate() {
        stmt.projection.insert(
            i,
            SelectItem::Expr(Expr::Column(ColumnExpr::from_ref(node))),
        );
    }
    if stmt.projection.is_empty() {
        // everything became a join key or filter; surface the first node
        stmt.projection
            .push(SelectItem::Expr(Expr::Column(ColumnExpr::from_ref(
                &subgraph.nodes[0],
            ))));
    }
    if agg_target.is_some() && !plain_selected.is_empty() {
        stmt.group_by = plain_selected.iter().map(ColumnExpr::from_ref).collect();
        features.insert(SqlFeature::GroupBy);
    }

    if !plain_selected.is_empty() && rng.gen::<f64>() < config.order_by_prob {
        let col = &plain_selected[rng.gen_range(0..plain_selected.len())];
        stmt.order_by.push(OrderItem {
            expr: Expr::Column(ColumnExpr::from_ref(col)),
            desc: rng.gen::<bool>(),
        });
        features.insert(SqlFeature::OrderBy);
    }
    if rng.gen::<f64>() < config.limit_prob {
        let limits = [1u64, 3, 5, 10];
        stmt.limit = Some(limits[rng.gen_range(0..limits.len())]);
        features.insert(SqlFeature::Limit);
    }

    Ok(SqlDraft {
        sql: render_select(&stmt),
        used_nodes: subgraph.nodes.clone(),
        features,
    })
}

/// Translates a verified draft into a natural-language question via the
/// gateway. Empty or degenerate responses are a rejection signal.
pub fn back_instruct(
    draft: &SqlDraft,
    schema: &DatabaseSchema,
    gateway: &LlmGateway,
) -> Result<String, MinerError> {
    let used_tables: Vec<&str> = {
        let mut out: Vec<&str> = Vec::new();
        for n in &draft.used_nodes {
            if !out.contains(&n.table.as_str()) {
                out.push(&n.table);
            }
        }
        out
    };
    let fks: Vec<(ColumnRef, ColumnRef)> = schema
        .foreign_keys
        .iter()
        .filter(|fk| {
            used_tables.contains(&fk.from.table.as_str())
                && used_tables.contains(&fk.to.table.as_str())
        })
        .map(|fk| (fk.from.clone(), fk.to.clone()))
        .collect();
    let ddl = ddl_snippet(schema, &draft.used_nodes, &fks);
    let request = gateway.render(
        TemplateId::BackInstruct,
        &[("schema", &ddl), ("sql", &draft.sql)],
    )?;
    let response = gateway.complete(&request)?;
    let question = response.text.trim().to_string();
    if question.len() < 3 {
        return Err(MinerError::EmptyResponse);
    }
    Ok(question)
}
