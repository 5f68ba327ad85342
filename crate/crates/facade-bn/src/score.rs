//! Decomposable network scores: log-likelihood, BIC, and BDeu.
//!
//! All three decompose over nodes, so each node's component is computed from
//! its own counts and the total is the sum. Natural logarithms throughout.
//! BIC is `logL - (d/2) ln n` with `d` the full parameter count
//! `sum (r_i - 1) q_i`; unobserved parent configurations still count toward
//! `d`. Higher is better for every score under this sign convention.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cpt::map_nodes_to_columns;
use crate::dag::Dag;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScoreType {
    Loglik,
    Bic,
    Bdeu { iss: f64 },
}

impl std::fmt::Display for ScoreType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreType::Loglik => write!(f, "loglik"),
            ScoreType::Bic => write!(f, "bic"),
            ScoreType::Bdeu { iss } => write!(f, "bdeu(iss={iss})"),
        }
    }
}

/// A score broken down by node.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub score_type: ScoreType,
    pub per_node: BTreeMap<String, f64>,
    pub total: f64,
    /// Parameter count `sum (r_i - 1) q_i`.
    pub d: usize,
    pub n: usize,
}

/// Per-node child-level counts within each parent configuration.
struct NodeCounts {
    child_cardinality: usize,
    config_count: usize,
    /// `counts[config * r + level]`.
    counts: Vec<u64>,
}

fn node_counts(dag: &Dag, data: &Dataset, columns: &[usize]) -> Vec<NodeCounts> {
    (0..dag.node_count())
        .map(|node| {
            let parents = dag.parent_indices(node);
            let r = dag.schema().variable(node).cardinality();
            let cards: Vec<usize> = parents
                .iter()
                .map(|&p| dag.schema().variable(p).cardinality())
                .collect();
            let q: usize = cards.iter().product();
            let mut counts = vec![0u64; q * r];
            for row in data.index_rows() {
                let mut config = 0usize;
                for (&p, &card) in parents.iter().zip(&cards) {
                    config = config * card + row[columns[p]] as usize;
                }
                counts[config * r + row[columns[node]] as usize] += 1;
            }
            NodeCounts {
                child_cardinality: r,
                config_count: q,
                counts,
            }
        })
        .collect()
}

/// `d = sum over nodes of (r_i - 1) q_i`.
pub fn param_count(dag: &Dag) -> usize {
    (0..dag.node_count())
        .map(|node| {
            let r = dag.schema().variable(node).cardinality();
            let q: usize = dag
                .parent_indices(node)
                .iter()
                .map(|&p| dag.schema().variable(p).cardinality())
                .product();
            (r - 1) * q
        })
        .sum()
}

fn loglik_component(counts: &NodeCounts) -> f64 {
    let r = counts.child_cardinality;
    let mut total = 0.0;
    for config in 0..counts.config_count {
        let slice = &counts.counts[config * r..(config + 1) * r];
        let n_config: u64 = slice.iter().sum();
        if n_config == 0 {
            continue;
        }
        for &c in slice {
            if c > 0 {
                total += c as f64 * (c as f64 / n_config as f64).ln();
            }
        }
    }
    total
}

fn bdeu_component(counts: &NodeCounts, iss: f64) -> f64 {
    let r = counts.child_cardinality;
    let alpha_config = iss / counts.config_count as f64;
    let alpha_cell = alpha_config / r as f64;
    let mut total = 0.0;
    for config in 0..counts.config_count {
        let slice = &counts.counts[config * r..(config + 1) * r];
        let n_config: u64 = slice.iter().sum();
        if n_config == 0 {
            continue;
        }
        total += ln_gamma(alpha_config) - ln_gamma(alpha_config + n_config as f64);
        for &c in slice {
            if c > 0 {
                total += ln_gamma(alpha_cell + c as f64) - ln_gamma(alpha_cell);
            }
        }
    }
    total
}

fn report(dag: &Dag, data: &Dataset, score_type: ScoreType) -> Result<ScoreReport> {
    data.require_rows()?;
    let columns = map_nodes_to_columns(dag.schema(), data.schema())?;
    let all_counts = node_counts(dag, data, &columns);
    let n = data.n();
    let ln_n = (n as f64).ln();

    let mut per_node = BTreeMap::new();
    let mut total = 0.0;
    for (node, counts) in all_counts.iter().enumerate() {
        let component = match score_type {
            ScoreType::Loglik => loglik_component(counts),
            ScoreType::Bic => {
                let d_node = (counts.child_cardinality - 1) * counts.config_count;
                loglik_component(counts) - d_node as f64 / 2.0 * ln_n
            }
            ScoreType::Bdeu { iss } => bdeu_component(counts, iss),
        };
        per_node.insert(dag.schema().variable(node).name().to_string(), component);
        total += component;
    }

    Ok(ScoreReport {
        score_type,
        per_node,
        total,
        d: param_count(dag),
        n,
    })
}

/// Natural-log likelihood of the data under the MLE fit of `dag`.
pub fn log_likelihood(dag: &Dag, data: &Dataset) -> Result<f64> {
    Ok(report(dag, data, ScoreType::Loglik)?.total)
}

pub fn bic_score(dag: &Dag, data: &Dataset) -> Result<ScoreReport> {
    report(dag, data, ScoreType::Bic)
}

/// BDeu marginal likelihood with uniform-equivalent pseudo-counts scaled by
/// the imaginary sample size `iss`.
pub fn bdeu_score(dag: &Dag, data: &Dataset, iss: f64) -> Result<ScoreReport> {
    if iss.is_nan() || iss <= 0.0 {
        return Err(crate::error::Error::DomainError(format!(
            "bdeu requires iss > 0, got {iss}"
        )));
    }
    report(dag, data, ScoreType::Bdeu { iss })
}

/// Dispatch on a [`ScoreType`].
pub fn score(dag: &Dag, data: &Dataset, score_type: ScoreType) -> Result<ScoreReport> {
    match score_type {
        ScoreType::Bdeu { iss } if iss.is_nan() || iss <= 0.0 => Err(
            crate::error::Error::DomainError(format!("bdeu requires iss > 0, got {iss}")),
        ),
        other => report(dag, data, other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::schema::{Schema, VariableSpec};
    use crate::testutil::{sample_uniform_dataset, toy_schema};

    fn binary_split_2_2() -> (Dag, Dataset) {
        let schema = Schema::new(vec![VariableSpec::new("X", ["a", "b"]).unwrap()]).unwrap();
        let data = Dataset::from_rows(
            schema.clone(),
            &[vec!["a"], vec!["a"], vec!["b"], vec!["b"]],
        )
        .unwrap();
        (Dag::empty(schema), data)
    }

    #[test]
    fn loglik_closed_form() {
        let (dag, data) = binary_split_2_2();
        let ll = log_likelihood(&dag, &data).unwrap();
        assert!((ll - 4.0 * 0.5f64.ln()).abs() <= 1e-12); // -2.772589
    }

    #[test]
    fn loglik_of_deterministic_column_is_zero() {
        let schema = Schema::new(vec![VariableSpec::new("X", ["a", "b"]).unwrap()]).unwrap();
        let data = Dataset::from_rows(schema.clone(), &[vec!["a"], vec!["a"], vec!["a"]]).unwrap();
        assert_eq!(log_likelihood(&Dag::empty(schema), &data).unwrap(), 0.0);
    }

    #[test]
    fn bic_closed_form() {
        let (dag, data) = binary_split_2_2();
        let report = bic_score(&dag, &data).unwrap();
        let expected = 4.0 * 0.5f64.ln() - 0.5 * 4.0f64.ln(); // -3.465736
        assert!((report.total - expected).abs() <= 1e-9);
        assert!((report.total - (-3.465736)).abs() <= 1e-6);
        assert_eq!(report.d, 1);
        assert_eq!(report.n, 4);
    }

    #[test]
    fn param_count_cases() {
        // Parentless 3-level node.
        let schema = toy_schema(&["X"], &[3]);
        assert_eq!(param_count(&Dag::empty(schema)), 2);

        // Empty graph over 10 ternary nodes.
        assert_eq!(param_count(&Dag::empty(Schema::facade())), 20);

        // The initial facade model: 6 parentless nodes, DC with 3 parents,
        // MD with 4, TR with 1, CE with 2.
        assert_eq!(param_count(&crate::dag::initial_facade_model()), 252);
    }

    #[test]
    fn param_count_invariant_under_level_relabeling() {
        let a = toy_schema(&["X", "Y"], &[3, 2]);
        let b = Schema::new(vec![
            VariableSpec::new("X", ["p", "q", "r"]).unwrap(),
            VariableSpec::new("Y", ["s", "t"]).unwrap(),
        ])
        .unwrap();
        let dag_a = Dag::empty(a).with_arc("X", "Y").unwrap();
        let dag_b = Dag::empty(b).with_arc("X", "Y").unwrap();
        assert_eq!(param_count(&dag_a), param_count(&dag_b));
    }

    #[test]
    fn bdeu_hand_value() {
        // Parentless binary node, counts {1, 0}, iss = 1:
        // ln[Γ(1)/Γ(2)] + ln[Γ(1.5)/Γ(0.5)] = ln(1/2).
        let schema = Schema::new(vec![VariableSpec::new("X", ["a", "b"]).unwrap()]).unwrap();
        let data = Dataset::from_rows(schema.clone(), &[vec!["a"]]).unwrap();
        let report = bdeu_score(&Dag::empty(schema), &data, 1.0).unwrap();
        assert!((report.total - 0.5f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn bdeu_rejects_nonpositive_iss() {
        let (dag, data) = binary_split_2_2();
        assert!(bdeu_score(&dag, &data, 0.0).is_err());
        assert!(bdeu_score(&dag, &data, -1.0).is_err());
    }

    #[test]
    fn decomposability() {
        let data = sample_uniform_dataset(&["A", "B", "C", "D"], &[2, 3, 2, 3], 200, 11);
        let dag = Dag::empty(data.schema().clone())
            .with_arc("A", "B")
            .unwrap()
            .with_arc("B", "C")
            .unwrap()
            .with_arc("A", "D")
            .unwrap();
        for st in [
            ScoreType::Loglik,
            ScoreType::Bic,
            ScoreType::Bdeu { iss: 1.0 },
        ] {
            let report = score(&dag, &data, st).unwrap();
            let sum: f64 = report.per_node.values().sum();
            assert!((report.total - sum).abs() <= 1e-9, "{st}");
        }
    }

    #[test]
    fn likelihood_dominance_on_nested_dags() {
        let data = sample_uniform_dataset(&["A", "B", "C"], &[3, 3, 3], 150, 4);
        let small = Dag::empty(data.schema().clone())
            .with_arc("A", "B")
            .unwrap();
        let large = small
            .with_arc("A", "C")
            .unwrap()
            .with_arc("B", "C")
            .unwrap();
        let ll_small = log_likelihood(&small, &data).unwrap();
        let ll_large = log_likelihood(&large, &data).unwrap();
        assert!(ll_large >= ll_small - 1e-12);
    }

    #[test]
    fn score_equivalence_of_reversed_arc() {
        for seed in 0..20 {
            let data = sample_uniform_dataset(&["A", "B"], &[2, 3], 60, seed);
            let forward = Dag::empty(data.schema().clone())
                .with_arc("A", "B")
                .unwrap();
            let backward = Dag::empty(data.schema().clone())
                .with_arc("B", "A")
                .unwrap();
            let bic_f = bic_score(&forward, &data).unwrap().total;
            let bic_b = bic_score(&backward, &data).unwrap().total;
            assert!((bic_f - bic_b).abs() <= 1e-9, "bic seed {seed}");
            let bdeu_f = bdeu_score(&forward, &data, 1.0).unwrap().total;
            let bdeu_b = bdeu_score(&backward, &data, 1.0).unwrap().total;
            assert!((bdeu_f - bdeu_b).abs() <= 1e-9, "bdeu seed {seed}");
        }
    }
}
