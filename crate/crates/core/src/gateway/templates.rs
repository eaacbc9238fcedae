//! Versioned prompt bodies. Hand-written originals; wording is part of the
//! artifact and bumping a body must bump its version.

use super::{PromptTemplate, TemplateId, CONSISTENCY_TEMPERATURE, SYNTHESIS_TEMPERATURE};

// v1 — question synthesis over a schema subgraph with demonstrations.
const SEMANTIC_EXTRACT_V1: &str = "\
You are exploring a relational database. The relevant part of its schema is:

Schema:
{schema}

Here are example questions previously asked about databases like this one:

{demos}

Write exactly one new natural-language question that can be answered using \
only the tables and columns shown above. Prefer questions a real user would \
ask. Reply with the question text only.
";

// v1 — SQL synthesis for a generated question.
const SEMANTIC_RESPOND_V1: &str = "\
You are writing SQLite SQL. The relevant part of the database schema is:

Schema:
{schema}

Question: {question}

Write a single SELECT statement that answers the question. Use only the \
tables and columns shown in the schema. Reply with the SQL only, no \
explanation and no code fences.
";

// v1 — natural-language question for machine-generated SQL.
const BACK_INSTRUCT_V1: &str = "\
The following SQL runs against the schema shown below.

Schema:
{schema}

SQL:
{sql}

Rewrite the SQL as one natural-language question whose answer is exactly \
what the query returns. Keep every filter and every aggregation in the \
question. Reply with the question text only.
";

// v1 — complexity scaling of an existing query.
const SCALE_V1: &str = "\
The following SQL runs against the schema shown below.

Schema:
{schema}

SQL:
{sql}

Rewrite the query to be more complex while keeping it valid for this \
schema: you may add nested conditions (for example IN subqueries) or join \
additional tables along declared foreign keys. Keep it a single SELECT \
statement. Reply with the SQL only, no explanation and no code fences.
";

// v1 — paraphrase generation; the variant number requests distinct phrasings.
const PARAPHRASE_V1: &str = "\
The following SQL runs against the schema shown below.

Schema:
{schema}

SQL:
{sql}

Variant: {variant}

Express this query as a natural-language question. Produce a phrasing that \
differs from other variants. Reply with the question text only.
";

// v1 — semantic alignment judgment; runs at temperature 0.
const CONSISTENCY_V1: &str = "\
Question: {question}

SQL:
{sql}

Schema:
{schema}

Does the SQL faithfully answer the question, using only the schema shown? \
Answer YES or NO on the first line, followed by a short reason.
";

pub fn builtin_templates() -> Vec<PromptTemplate> {
    vec![
        PromptTemplate {
            id: TemplateId::SemanticExtract,
            body: SEMANTIC_EXTRACT_V1,
            version: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: 256,
        },
        PromptTemplate {
            id: TemplateId::SemanticRespond,
            body: SEMANTIC_RESPOND_V1,
            version: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: 512,
        },
        PromptTemplate {
            id: TemplateId::BackInstruct,
            body: BACK_INSTRUCT_V1,
            version: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: 256,
        },
        PromptTemplate {
            id: TemplateId::Scale,
            body: SCALE_V1,
            version: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: 512,
        },
        PromptTemplate {
            id: TemplateId::Paraphrase,
            body: PARAPHRASE_V1,
            version: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: 256,
        },
        PromptTemplate {
            id: TemplateId::Consistency,
            body: CONSISTENCY_V1,
            version: 1,
            temperature: CONSISTENCY_TEMPERATURE,
            max_tokens: 128,
        },
    ]
}
