//! Connected subgraph extraction from the column graph, via uniform random
//! walks or weight-biased walks. Every sample is an induced subgraph and is
//! bit-reproducible from its seed.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DbGraph, EdgeId, GraphEdge, NodeId};
use crate::schema::{ColumnRef, DatabaseSchema};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("cannot sample from an empty graph")]
    EmptyGraph,
    #[error("sample size must be at least 1")]
    InvalidSize,
    #[error("start node {0} is not in the graph")]
    UnknownStart(ColumnRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    RandomWalk,
    Weighted,
}

/// A connected induced subgraph of the column graph; the unit of synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSubgraph {
    /// Nodes in discovery order (the first is the walk start).
    pub nodes: Vec<ColumnRef>,
    /// Every parent-graph edge between the sampled nodes.
    pub edges: Vec<GraphEdge>,
    pub origin: SampleOrigin,
    pub seed: u64,
    /// Set when the walk could not reach the requested size.
    pub truncated: bool,
}

impl SchemaSubgraph {
    /// Builds the induced subgraph over `nodes` (deduplicated, order kept).
    pub fn from_nodes(
        nodes: Vec<ColumnRef>,
        graph: &DbGraph,
        origin: SampleOrigin,
        seed: u64,
        truncated: bool,
    ) -> Self {
        let mut seen = BTreeSet::new();
        let mut ordered = Vec::new();
        for n in nodes {
            if seen.insert(n.clone()) {
                ordered.push(n);
            }
        }
        let edges = graph
            .edges()
            .iter()
            .filter(|e| seen.contains(&e.a) && seen.contains(&e.b))
            .cloned()
            .collect();
        Self {
            nodes: ordered,
            edges,
            origin,
            seed,
            truncated,
        }
    }

    pub fn contains(&self, col: &ColumnRef) -> bool {
        self.nodes.iter().any(|n| n == col)
    }

    /// Distinct tables, in first-appearance order.
    pub fn tables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for n in &self.nodes {
            if !out.contains(&n.table.as_str()) {
                out.push(&n.table);
            }
        }
        out
    }

    /// Columns of one table, in node order.
    pub fn columns_of(&self, table: &str) -> Vec<&ColumnRef> {
        self.nodes.iter().filter(|n| n.table == table).collect()
    }

    /// A new subgraph extended with `extra` nodes, re-induced over the graph.
    pub fn extended_with(&self, extra: &[ColumnRef], graph: &DbGraph) -> SchemaSubgraph {
        let mut nodes = self.nodes.clone();
        nodes.extend(extra.iter().cloned());
        SchemaSubgraph::from_nodes(nodes, graph, self.origin, self.seed, self.truncated)
    }

    /// True when the subgraph is connected via its own edges (single nodes
    /// count as connected).
    pub fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let index = |c: &ColumnRef| self.nodes.iter().position(|n| n == c).unwrap();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (a, b) = (index(&e.a), index(&e.b));
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Serializes the subgraph as DDL snippets with sample values and
    /// foreign-key lines. This is the prompt and training-target format.
    pub fn to_ddl(&self, schema: &DatabaseSchema) -> String {
        let fks: Vec<(ColumnRef, ColumnRef)> = self
            .edges
            .iter()
            .filter(|e| e.kind == crate::graph::EdgeKind::InterTable)
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect();
        ddl_snippet(schema, &self.nodes, &fks)
    }
}

/// Renders DDL snippets for an ordered column set: per table a
/// `CREATE TABLE` block restricted to the given columns with up to three
/// sample values per column as a trailing comment, followed by `-- FK:`
/// lines. The format is shared by prompts and training targets.
pub fn ddl_snippet(
    schema: &DatabaseSchema,
    nodes: &[ColumnRef],
    fks: &[(ColumnRef, ColumnRef)],
) -> String {
    let mut tables: Vec<&str> = Vec::new();
    for n in nodes {
        if !tables.contains(&n.table.as_str()) {
            tables.push(&n.table);
        }
    }
    let mut out = String::new();
    for table in tables {
        out.push_str(&format!("CREATE TABLE {table} (\n"));
        let table_meta = schema.table(table);
        let mut cols: Vec<&ColumnRef> = nodes.iter().filter(|n| n.table == table).collect();
        if let Some(tm) = table_meta {
            cols.sort_by_key(|c| {
                tm.columns
                    .iter()
                    .position(|m| m.name == c.column)
                    .unwrap_or(usize::MAX)
            });
        }
        cols.dedup();
        let n = cols.len();
        for (i, col) in cols.into_iter().enumerate() {
            let meta = schema.column(col);
            let ty = meta
                .map(|m| {
                    if m.declared_type.is_empty() {
                        format!("{:?}", m.type_class).to_uppercase()
                    } else {
                        m.declared_type.clone()
                    }
                })
                .unwrap_or_default();
            let mut line = format!("  {} {}", col.column, ty.trim());
            if i + 1 < n {
                line.push(',');
            }
            if let Some(m) = meta {
                if !m.sample_values.is_empty() {
                    let shown: Vec<String> = m
                        .sample_values
                        .iter()
                        .take(3)
                        .map(|v| match m.type_class {
                            crate::schema::TypeClass::Numeric
                            | crate::schema::TypeClass::Boolean => v.clone(),
                            _ => format!("'{}'", v.replace('\'', "''")),
                        })
                        .collect();
                    line.push_str(&format!(" -- samples: {}", shown.join(", ")));
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(");\n");
    }
    for (a, b) in fks {
        out.push_str(&format!("-- FK: {a} -> {b}\n"));
    }
    out
}

enum StepRule {
    Uniform,
    Weighted,
}

fn pick_start(
    graph: &DbGraph,
    start: Option<&ColumnRef>,
    rule: &StepRule,
    rng: &mut ChaCha8Rng,
) -> Result<NodeId, SampleError> {
    if let Some(col) = start {
        return graph
            .node_id(col)
            .ok_or_else(|| SampleError::UnknownStart(col.clone()));
    }
    match rule {
        StepRule::Uniform => Ok(rng.gen_range(0..graph.node_count())),
        StepRule::Weighted => {
            let strengths: Vec<f64> = (0..graph.node_count())
                .map(|n| graph.node_strength(n))
                .collect();
            let total: f64 = strengths.iter().sum();
            if total <= 0.0 {
                return Ok(rng.gen_range(0..graph.node_count()));
            }
            let mut target = rng.gen::<f64>() * total;
            for (i, s) in strengths.iter().enumerate() {
                target -= s;
                if target <= 0.0 {
                    return Ok(i);
                }
            }
            Ok(graph.node_count() - 1)
        }
    }
}

fn pick_edge(
    graph: &DbGraph,
    node: NodeId,
    rule: &StepRule,
    rng: &mut ChaCha8Rng,
) -> Option<EdgeId> {
    let incident = graph.incident_edges(node);
    if incident.is_empty() {
        return None;
    }
    match rule {
        StepRule::Uniform => Some(incident[rng.gen_range(0..incident.len())]),
        StepRule::Weighted => {
            let dist = graph.normalize_out_weights_by_id(node);
            let mut target = rng.gen::<f64>();
            for (e, p) in &dist {
                target -= p;
                if target <= 0.0 {
                    return Some(*e);
                }
            }
            dist.last().map(|(e, _)| *e)
        }
    }
}

fn walk(
    graph: &DbGraph,
    start: Option<&ColumnRef>,
    size: usize,
    seed: u64,
    rule: StepRule,
    origin: SampleOrigin,
) -> Result<SchemaSubgraph, SampleError> {
    if graph.node_count() == 0 {
        return Err(SampleError::EmptyGraph);
    }
    if size == 0 {
        return Err(SampleError::InvalidSize);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = pick_start(graph, start, &rule, &mut rng)?;

    let step_cap = 10 * size;
    let mut visited: Vec<NodeId> = vec![current];
    let mut steps = 0;
    while visited.len() < size && steps < step_cap {
        let Some(edge) = pick_edge(graph, current, &rule, &mut rng) else {
            break; // isolated node, nowhere to go
        };
        current = graph.other_endpoint(edge, current);
        if !visited.contains(&current) {
            visited.push(current);
        }
        steps += 1;
    }

    let truncated = visited.len() < size;
    let nodes: Vec<ColumnRef> = visited.into_iter().map(|n| graph.node(n).clone()).collect();
    Ok(SchemaSubgraph::from_nodes(
        nodes, graph, origin, seed, truncated,
    ))
}

/// Uniform random walk: starts at `start` (or a uniformly chosen node) and
/// repeatedly crosses a uniformly chosen incident edge, collecting distinct
/// nodes until `size` nodes are gathered or the step cap (10 × size) hits.
pub fn random_walk(
    graph: &DbGraph,
    start: Option<&ColumnRef>,
    size: usize,
    seed: u64,
) -> Result<SchemaSubgraph, SampleError> {
    walk(
        graph,
        start,
        size,
        seed,
        StepRule::Uniform,
        SampleOrigin::RandomWalk,
    )
}

/// Weight-biased walk: identical skeleton to [`random_walk`] except each step
/// crosses an incident edge with probability proportional to its normalized
/// weight, and an unpinned start is chosen proportionally to summed incident
/// weight.
pub fn weighted_sample(
    graph: &DbGraph,
    start: Option<&ColumnRef>,
    size: usize,
    seed: u64,
) -> Result<SchemaSubgraph, SampleError> {
    walk(
        graph,
        start,
        size,
        seed,
        StepRule::Weighted,
        SampleOrigin::Weighted,
    )
}
