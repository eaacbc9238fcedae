//! Database exploration and text-to-SQL instruction synthesis.
//!
//! The crate models a relational database as a column-level graph, samples
//! connected schema subgraphs from it, synthesizes question–SQL pairs over
//! those subgraphs (deterministic SQL-first generation, self-instruct style
//! extraction, and progressive syntax-tree evolution), filters candidates by
//! execution and consistency verification, and emits fine-tuning-ready
//! datasets. A BM25 + longest-common-subsequence value retriever supports
//! prompt construction at inference time.

pub mod fixture;
pub mod gateway;
pub mod graph;
pub mod rng;
pub mod sampler;
pub mod schema;
pub mod sql;
pub mod store;
pub mod verifier;

pub mod evolver;
pub mod extractor;
pub mod miner;
pub mod retrieval;

pub use graph::{assign_weights, build_graph, DbGraph, EdgeKind, GraphEdge, SeedExample};
pub use sampler::{random_walk, weighted_sample, SampleOrigin, SchemaSubgraph};
pub use schema::{
    load_metadata, load_schema, ColumnMeta, ColumnRef, DatabaseSchema, ForeignKey, TableMeta,
    TypeClass,
};
pub use store::{DatasetStore, InstructionRecord, RecordSource, TrainingExample, TrainingTask};
pub use verifier::{execute_verify, execution_match, ExecutionVerdict, VerdictStatus};
