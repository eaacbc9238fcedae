//! Self-instruct extraction: sample seed demonstrations, synthesize a novel
//! question constrained to a schema subgraph, then ask for a SQL response.
//! Every output goes through the verifier before it can enter the pool.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gateway::{GatewayError, LlmGateway, TemplateId};
use crate::graph::SeedExample;
use crate::sampler::SchemaSubgraph;
use crate::schema::DatabaseSchema;
use crate::sql::strip_code_fences;

/// Demonstrations per synthesis prompt.
pub const DEFAULT_DEMOS_K: usize = 3;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("gateway returned an empty response")]
    EmptyResponse,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Demonstrations drawn without replacement from the instruction pool.
#[derive(Debug, Clone)]
pub struct DemoSet {
    pub demos: Vec<SeedExample>,
    pub sampled_from: String,
    /// Set when the pool was smaller than the requested k.
    pub undersized: bool,
}

/// Uniform sample of `k` demonstrations without replacement (partial
/// Fisher–Yates). A pool smaller than `k` is used whole, flagged.
pub fn sample_demos(pool: &[SeedExample], pool_id: &str, k: usize, seed: u64) -> DemoSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let undersized = pool.len() < k;
    let take = k.min(pool.len());
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    for i in 0..take {
        let j = i + rng.gen_range(0..indices.len() - i);
        indices.swap(i, j);
    }
    let demos = indices[..take].iter().map(|&i| pool[i].clone()).collect();
    DemoSet {
        demos,
        sampled_from: pool_id.to_string(),
        undersized,
    }
}

fn render_demos(demos: &DemoSet) -> String {
    let mut out = String::new();
    for (i, d) in demos.demos.iter().enumerate() {
        out.push_str(&format!("{}. {}\n   SQL: {}\n", i + 1, d.question, d.sql));
    }
    out
}

/// Synthesizes one natural-language question constrained to the subgraph's
/// tables and columns, prompted with the sampled demonstrations.
pub fn synthesize_question(
    subgraph: &SchemaSubgraph,
    schema: &DatabaseSchema,
    demos: &DemoSet,
    gateway: &LlmGateway,
) -> Result<String, ExtractError> {
    let ddl = subgraph.to_ddl(schema);
    let demo_text = render_demos(demos);
    let request = gateway.render(
        TemplateId::SemanticExtract,
        &[("schema", &ddl), ("demos", &demo_text)],
    )?;
    let response = gateway.complete(&request)?;
    let question = response.text.trim().to_string();
    if question.is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    Ok(question)
}

/// Produces a candidate SQL response for the question over the subgraph.
/// The candidate is unvalidated; execution verification is the caller's job.
pub fn synthesize_response(
    question: &str,
    subgraph: &SchemaSubgraph,
    schema: &DatabaseSchema,
    gateway: &LlmGateway,
) -> Result<String, ExtractError> {
    let ddl = subgraph.to_ddl(schema);
    let request = gateway.render(
        TemplateId::SemanticRespond,
        &[("schema", &ddl), ("question", question)],
    )?;
    let response = gateway.complete(&request)?;
    let sql = strip_code_fences(&response.text).to_string();
    if sql.is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    Ok(sql)
}
