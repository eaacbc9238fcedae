//! The column graph: nodes are database columns, intra-table edges connect
//! columns of one table (complete per table), inter-table edges mirror
//! foreign keys. Edge weights come from co-occurrence of the endpoints in
//! seed queries, plus additive smoothing so every edge stays sampleable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ColumnRef, DatabaseSchema};
use crate::sql::{collect_column_refs, ScopeSchema};

/// Additive smoothing applied to every edge weight.
pub const SMOOTHING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(ColumnRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    IntraTable,
    InterTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: ColumnRef,
    pub b: ColumnRef,
    pub kind: EdgeKind,
    pub raw_count: u64,
    pub weight: f64,
}

/// A question–SQL pair used for edge weighting and as a demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedExample {
    pub question: String,
    #[serde(alias = "query")]
    pub sql: String,
    pub db_id: String,
}

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DbGraph {
    pub db_id: String,
    nodes: Vec<ColumnRef>,
    edges: Vec<GraphEdge>,
    /// node → incident edge ids, in construction order
    adjacency: Vec<Vec<EdgeId>>,
    #[serde(skip)]
    node_index: HashMap<ColumnRef, NodeId>,
}

impl DbGraph {
    pub fn nodes(&self) -> &[ColumnRef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_id(&self, col: &ColumnRef) -> Option<NodeId> {
        self.node_index.get(col).copied()
    }

    pub fn node(&self, id: NodeId) -> &ColumnRef {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &GraphEdge {
        &self.edges[id]
    }

    pub fn incident_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.adjacency[node]
    }

    /// The endpoint of `edge` that is not `node`.
    pub fn other_endpoint(&self, edge: EdgeId, node: NodeId) -> NodeId {
        let e = &self.edges[edge];
        let a = self.node_index[&e.a];
        if a == node {
            self.node_index[&e.b]
        } else {
            a
        }
    }

    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        let e = &self.edges[edge];
        (self.node_index[&e.a], self.node_index[&e.b])
    }

    fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Normalized distribution over the incident edges of `node`; empty for
    /// an isolated node.
    pub fn normalize_out_weights(
        &self,
        node: &ColumnRef,
    ) -> Result<Vec<(EdgeId, f64)>, GraphError> {
        let id = self
            .node_id(node)
            .ok_or_else(|| GraphError::UnknownNode(node.clone()))?;
        Ok(self.normalize_out_weights_by_id(id))
    }

    pub fn normalize_out_weights_by_id(&self, node: NodeId) -> Vec<(EdgeId, f64)> {
        let incident = &self.adjacency[node];
        let total: f64 = incident.iter().map(|&e| self.edges[e].weight).sum();
        if total <= 0.0 {
            return Vec::new();
        }
        incident
            .iter()
            .map(|&e| (e, self.edges[e].weight / total))
            .collect()
    }

    /// Summed incident weight per node, used for weighted start selection.
    pub fn node_strength(&self, node: NodeId) -> f64 {
        self.adjacency[node]
            .iter()
            .map(|&e| self.edges[e].weight)
            .sum()
    }

    /// Rebuilds the node index after deserialization.
    pub fn reindex(&mut self) {
        self.node_index = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }

    /// Debug JSON dump of nodes, edges, and weights. Not a stability contract.
    pub fn to_debug_json(&self) -> serde_json::Value {
        serde_json::json!({
            "db_id": self.db_id,
            "node_count": self.node_count(),
            "edge_count": self.edge_count(),
            "nodes": self.nodes,
            "edges": self.edges,
        })
    }
}

/// Builds the column graph for a schema: every column is a node, every
/// same-table column pair an intra-table edge, every decomposed foreign key
/// one inter-table edge (reversed duplicates merged). All raw counts are 0
/// and every weight starts at the smoothing floor.
pub fn build_graph(schema: &DatabaseSchema) -> DbGraph {
    let nodes: Vec<ColumnRef> = schema.all_columns().collect();
    let node_index: HashMap<ColumnRef, NodeId> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut seen: HashMap<(NodeId, NodeId), EdgeId> = HashMap::new();

    let mut push_edge = |edges: &mut Vec<GraphEdge>,
                         adjacency: &mut Vec<Vec<EdgeId>>,
                         a: NodeId,
                         b: NodeId,
                         kind: EdgeKind| {
        let key = DbGraph::edge_key(a, b);
        if a == b || seen.contains_key(&key) {
            return;
        }
        let id = edges.len();
        edges.push(GraphEdge {
            a: nodes[a].clone(),
            b: nodes[b].clone(),
            kind,
            raw_count: 0,
            weight: SMOOTHING,
        });
        adjacency[a].push(id);
        adjacency[b].push(id);
        seen.insert(key, id);
    };

    for table in &schema.tables {
        let ids: Vec<NodeId> = table
            .columns
            .iter()
            .map(|c| node_index[&ColumnRef::new(table.name.clone(), c.name.clone())])
            .collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                push_edge(
                    &mut edges,
                    &mut adjacency,
                    ids[i],
                    ids[j],
                    EdgeKind::IntraTable,
                );
            }
        }
    }
    for fk in &schema.foreign_keys {
        let (Some(a), Some(b)) = (
            node_index.get(&fk.from).copied(),
            node_index.get(&fk.to).copied(),
        ) else {
            continue;
        };
        push_edge(&mut edges, &mut adjacency, a, b, EdgeKind::InterTable);
    }

    DbGraph {
        db_id: schema.db_id.clone(),
        nodes,
        edges,
        adjacency,
        node_index,
    }
}

/// Result of weight assignment: the reweighted graph and how many seeds were
/// skipped (unparseable SQL or a mismatched db_id).
#[derive(Debug)]
pub struct WeightedGraph {
    pub graph: DbGraph,
    pub skipped_seeds: usize,
}

/// Counts, once per seed query, the co-occurrence of every connected column
/// pair referenced by that query, then sets weight = raw_count + smoothing.
/// Graph structure is untouched; only counts and weights change.
pub fn assign_weights(graph: &DbGraph, seeds: &[SeedExample]) -> WeightedGraph {
    let mut out = graph.clone();
    for e in &mut out.edges {
        e.raw_count = 0;
    }
    let scope = ScopeSchema::from_columns(graph.nodes.iter());
    let edge_by_key: HashMap<(NodeId, NodeId), EdgeId> = out
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let a = out.node_index[&e.a];
            let b = out.node_index[&e.b];
            (DbGraph::edge_key(a, b), i)
        })
        .collect();

    let mut skipped = 0;
    for seed in seeds {
        if !seed.db_id.is_empty() && seed.db_id != graph.db_id {
            skipped += 1;
            continue;
        }
        let Some(refs) = collect_column_refs(&seed.sql, &scope) else {
            skipped += 1;
            continue;
        };
        let ids: Vec<NodeId> = refs
            .iter()
            .filter_map(|r| out.node_index.get(r).copied())
            .collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                if let Some(&e) = edge_by_key.get(&DbGraph::edge_key(ids[i], ids[j])) {
                    out.edges[e].raw_count += 1;
                }
            }
        }
    }
    for e in &mut out.edges {
        e.weight = e.raw_count as f64 + SMOOTHING;
    }
    WeightedGraph {
        graph: out,
        skipped_seeds: skipped,
    }
}
