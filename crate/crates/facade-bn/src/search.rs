//! Constrained random structure search: generate candidate DAGs, score them,
//! keep the best k.
//!
//! Candidates are deduplicated by canonical model string and each candidate
//! draws from its own RNG stream derived from the master seed, so the result
//! is fully determined by (schema, constraints, count, k, seed, data) no
//! matter how scoring is scheduled.

use serde::Serialize;

use crate::dag::{random_dag, Dag, DagConstraints, RandomDagConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schema::Schema;
use crate::score::{score, ScoreType};
use crate::seed::derive_seed;

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredModel {
    pub model_string: String,
    pub score: f64,
    pub rank: usize,
}

/// Outcome of a full search run.
#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub pool_size: usize,
    pub constraints: ConstraintSummary,
    pub seed: u64,
    /// All generated candidates satisfy the constraints by construction.
    pub candidates_satisfying: usize,
    pub score_type: ScoreType,
    pub top: Vec<ScoredModel>,
}

/// Echo of the constraint set in reports.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintSummary {
    pub sink_variable: String,
    pub min_arcs: usize,
    pub min_sink_in_degree: usize,
    pub forbid_sink_out_arcs: bool,
}

impl From<&DagConstraints> for ConstraintSummary {
    fn from(c: &DagConstraints) -> Self {
        ConstraintSummary {
            sink_variable: c.sink_variable.clone(),
            min_arcs: c.min_arcs,
            min_sink_in_degree: c.min_sink_in_degree,
            forbid_sink_out_arcs: c.forbid_sink_out_arcs,
        }
    }
}

/// Generate exactly `count` distinct constraint-satisfying DAGs.
///
/// Candidate k draws from the stream derived from (seed, k); duplicates are
/// discarded and generation continues, so the returned list is deterministic
/// for a fixed seed.
pub fn generate_candidates(
    schema: &Schema,
    constraints: &DagConstraints,
    config: &RandomDagConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Dag>> {
    if count == 0 {
        return Err(Error::DomainError(
            "candidate count must be at least 1".into(),
        ));
    }
    let mut dags = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::with_capacity(count);
    // Duplicates are rare on non-trivial schemas; the budget exists so a
    // saturated constrained space fails instead of spinning.
    let max_attempts = count.saturating_mul(100).saturating_add(1000);
    let mut attempt = 0u64;
    while dags.len() < count {
        if attempt as usize >= max_attempts {
            return Err(Error::GenerationExhausted {
                tries: max_attempts,
                reason: format!(
                    "only {} distinct constraint-satisfying DAGs found, {count} requested",
                    dags.len()
                ),
            });
        }
        let dag = random_dag(schema, constraints, config, derive_seed(seed, attempt))?;
        attempt += 1;
        if seen.insert(dag.to_model_string()) {
            dags.push(dag);
        }
    }
    Ok(dags)
}

/// Score each DAG, preserving input order.
pub fn score_networks(
    dags: &[Dag],
    data: &Dataset,
    score_type: ScoreType,
) -> Result<Vec<(String, f64)>> {
    if dags.is_empty() {
        return Err(Error::DomainError("no networks to score".into()));
    }
    dags.iter()
        .map(|dag| Ok((dag.to_model_string(), score(dag, data, score_type)?.total)))
        .collect()
}

/// The k highest-scoring entries, descending, ties broken by model string.
pub fn top_networks(scored: &[(String, f64)], k: usize) -> Vec<ScoredModel> {
    let mut ranked: Vec<&(String, f64)> = scored.iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (model_string, score))| ScoredModel {
            model_string: model_string.clone(),
            score: *score,
            rank: i + 1,
        })
        .collect()
}

/// Generate, score, and rank in one call. Returns the ranked result plus the
/// full scored pool.
pub fn run_search(
    data: &Dataset,
    constraints: &DagConstraints,
    config: &RandomDagConfig,
    count: usize,
    k: usize,
    seed: u64,
    score_type: ScoreType,
) -> Result<(SearchResult, Vec<(String, f64)>)> {
    let candidates = generate_candidates(data.schema(), constraints, config, count, seed)?;
    let scored = score_networks(&candidates, data, score_type)?;
    let top = top_networks(&scored, k);
    Ok((
        SearchResult {
            pool_size: count,
            constraints: constraints.into(),
            seed,
            candidates_satisfying: candidates.len(),
            score_type,
            top,
        },
        scored,
    ))
}
