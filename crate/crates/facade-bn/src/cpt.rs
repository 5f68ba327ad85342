//! Maximum-likelihood CPT estimation and the fitted-network container.
//!
//! Each node's conditional probability table has one row per parent
//! configuration (mixed-radix order over the parent list, last parent
//! fastest). A configuration never seen in training data is flagged
//! unsupported and stored as a uniform placeholder rather than invented
//! probabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::{parse_model_string, Dag};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schema::Schema;

/// One parent configuration's conditional distribution over child levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptRow {
    pub probs: Vec<f64>,
    /// Training observations of this configuration.
    pub count: u64,
    /// False when `count == 0` and `probs` is the uniform placeholder.
    pub supported: bool,
}

/// Conditional probability table of one node given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    node: usize,
    parents: Vec<usize>,
    child_cardinality: usize,
    parent_cardinalities: Vec<usize>,
    rows: Vec<CptRow>,
}

impl Cpt {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn rows(&self) -> &[CptRow] {
        &self.rows
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_cardinality
    }

    /// Number of parent configurations (1 for a parentless node).
    pub fn config_count(&self) -> usize {
        self.rows.len()
    }

    /// Row index for the given parent levels (mixed radix, last fastest).
    pub fn config_index(&self, parent_levels: &[usize]) -> usize {
        debug_assert_eq!(parent_levels.len(), self.parents.len());
        let mut idx = 0usize;
        for (&l, &card) in parent_levels.iter().zip(&self.parent_cardinalities) {
            debug_assert!(l < card);
            idx = idx * card + l;
        }
        idx
    }

    /// Row index extracted from a full assignment (levels in schema order).
    pub fn config_index_of_assignment(&self, assignment: &[usize]) -> usize {
        let mut idx = 0usize;
        for (&p, &card) in self.parents.iter().zip(&self.parent_cardinalities) {
            idx = idx * card + assignment[p];
        }
        idx
    }

    /// Decode a row index back into parent levels.
    pub fn config_levels(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0usize; self.parents.len()];
        for i in (0..self.parents.len()).rev() {
            let card = self.parent_cardinalities[i];
            levels[i] = index % card;
            index /= card;
        }
        levels
    }
}

/// A DAG plus one estimated CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedNetwork {
    dag: Dag,
    cpts: Vec<Cpt>,
    n: usize,
}

impl FittedNetwork {
    /// Frequentist estimates: each CPT cell is the fraction of the parent
    /// configuration's rows showing that child level.
    pub fn fit_mle(dag: &Dag, data: &Dataset) -> Result<FittedNetwork> {
        data.require_rows()?;
        let columns = map_nodes_to_columns(dag.schema(), data.schema())?;
        let mut cpts = Vec::with_capacity(dag.node_count());
        for node in 0..dag.node_count() {
            let parents = dag.parent_indices(node).to_vec();
            let child_cardinality = dag.schema().variable(node).cardinality();
            let parent_cardinalities: Vec<usize> = parents
                .iter()
                .map(|&p| dag.schema().variable(p).cardinality())
                .collect();
            let q: usize = parent_cardinalities.iter().product();

            let mut counts = vec![0u64; q * child_cardinality];
            for row in data.index_rows() {
                let mut config = 0usize;
                for (&p, &card) in parents.iter().zip(&parent_cardinalities) {
                    config = config * card + row[columns[p]] as usize;
                }
                counts[config * child_cardinality + row[columns[node]] as usize] += 1;
            }

            let rows = (0..q)
                .map(|config| {
                    let slice =
                        &counts[config * child_cardinality..(config + 1) * child_cardinality];
                    let total: u64 = slice.iter().sum();
                    if total == 0 {
                        CptRow {
                            probs: vec![1.0 / child_cardinality as f64; child_cardinality],
                            count: 0,
                            supported: false,
                        }
                    } else {
                        CptRow {
                            probs: slice.iter().map(|&c| c as f64 / total as f64).collect(),
                            count: total,
                            supported: true,
                        }
                    }
                })
                .collect();

            cpts.push(Cpt {
                node,
                parents,
                child_cardinality,
                parent_cardinalities,
                rows,
            });
        }
        Ok(FittedNetwork {
            dag: dag.clone(),
            cpts,
            n: data.n(),
        })
    }

    /// Assemble a network from explicit conditional distributions instead of
    /// data, for simulation studies. `tables[node]` holds one probability
    /// row per parent configuration in mixed-radix order (last parent
    /// fastest); every row must sum to 1.
    pub fn from_distributions(
        dag: &Dag,
        tables: &BTreeMap<String, Vec<Vec<f64>>>,
        n: usize,
    ) -> Result<FittedNetwork> {
        let schema = dag.schema();
        let mut cpts = Vec::with_capacity(dag.node_count());
        for node in 0..dag.node_count() {
            let name = schema.variable(node).name();
            let rows_in = tables
                .get(name)
                .ok_or_else(|| Error::SchemaMismatch(format!("no table for node {name:?}")))?;
            let parents = dag.parent_indices(node).to_vec();
            let child_cardinality = schema.variable(node).cardinality();
            let parent_cardinalities: Vec<usize> = parents
                .iter()
                .map(|&p| schema.variable(p).cardinality())
                .collect();
            let q: usize = parent_cardinalities.iter().product();
            if rows_in.len() != q {
                return Err(Error::SchemaMismatch(format!(
                    "table for {name:?} has {} rows, expected {q}",
                    rows_in.len()
                )));
            }
            let mut rows = Vec::with_capacity(q);
            for (config, probs) in rows_in.iter().enumerate() {
                let sum: f64 = probs.iter().sum();
                if probs.len() != child_cardinality
                    || probs.iter().any(|p| !(0.0..=1.0).contains(p))
                    || (sum - 1.0).abs() > 1e-9
                {
                    return Err(Error::DomainError(format!(
                        "table for {name:?} row {config} is not a probability distribution"
                    )));
                }
                rows.push(CptRow {
                    probs: probs.clone(),
                    count: 0,
                    supported: true,
                });
            }
            cpts.push(Cpt {
                node,
                parents,
                child_cardinality,
                parent_cardinalities,
                rows,
            });
        }
        Ok(FittedNetwork {
            dag: dag.clone(),
            cpts,
            n,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn schema(&self) -> &Schema {
        self.dag.schema()
    }

    /// Log-likelihood of a (possibly held-out) dataset under this fit.
    ///
    /// A row whose parent configuration was never observed in training
    /// contributes 0 and is counted in `unsupported_rows`; a row assigning
    /// a child level of probability zero makes the total `-inf` and is
    /// counted in `zero_probability_rows`. On the training data itself both
    /// counters are zero and the value equals the MLE log-likelihood.
    pub fn log_likelihood_of(&self, data: &Dataset) -> Result<HeldOutLogLik> {
        data.require_rows()?;
        let columns = map_nodes_to_columns(self.dag.schema(), data.schema())?;
        let mut value = 0.0f64;
        let mut unsupported_rows = 0usize;
        let mut zero_probability_rows = 0usize;
        for row in data.index_rows() {
            let mut row_unsupported = false;
            let mut row_zero = false;
            for cpt in &self.cpts {
                let mut config = 0usize;
                for (&p, &card) in cpt.parents.iter().zip(&cpt.parent_cardinalities) {
                    config = config * card + row[columns[p]] as usize;
                }
                let cpt_row = &cpt.rows[config];
                if !cpt_row.supported {
                    row_unsupported = true;
                    continue;
                }
                let p = cpt_row.probs[row[columns[cpt.node]] as usize];
                if p == 0.0 {
                    row_zero = true;
                } else {
                    value += p.ln();
                }
            }
            if row_zero {
                value = f64::NEG_INFINITY;
                zero_probability_rows += 1;
            }
            if row_unsupported {
                unsupported_rows += 1;
            }
        }
        Ok(HeldOutLogLik {
            value,
            unsupported_rows,
            zero_probability_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// Serialize to the documented JSON form:
    /// `{model_string, n, cpts: node -> {parents, parent_config_order, rows}}`.
    pub fn to_json(&self) -> String {
        let schema = self.dag.schema();
        let cpts: BTreeMap<String, CptFileEntry> = self
            .cpts
            .iter()
            .map(|cpt| {
                let name = schema.variable(cpt.node).name().to_string();
                let parents: Vec<String> = cpt
                    .parents
                    .iter()
                    .map(|&p| schema.variable(p).name().to_string())
                    .collect();
                let parent_config_order: Vec<Vec<String>> = (0..cpt.config_count())
                    .map(|config| {
                        cpt.config_levels(config)
                            .iter()
                            .zip(&cpt.parents)
                            .map(|(&l, &p)| schema.variable(p).levels()[l].clone())
                            .collect()
                    })
                    .collect();
                (
                    name,
                    CptFileEntry {
                        parents,
                        parent_config_order,
                        rows: cpt.rows.clone(),
                    },
                )
            })
            .collect();
        let file = FittedNetworkFile {
            model_string: self.dag.to_model_string(),
            n: self.n,
            cpts,
        };
        serde_json::to_string_pretty(&file).expect("fitted network serialization cannot fail")
    }

    /// Load from the documented JSON form, validating shapes against the
    /// schema and the embedded model string.
    pub fn from_json(text: &str, schema: &Schema) -> Result<FittedNetwork> {
        let file: FittedNetworkFile = serde_json::from_str(text)?;
        let dag = parse_model_string(&file.model_string, schema)?;
        let mut cpts = Vec::with_capacity(dag.node_count());
        for node in 0..dag.node_count() {
            let name = schema.variable(node).name();
            let entry = file.cpts.get(name).ok_or_else(|| {
                Error::SchemaMismatch(format!("fitted network JSON is missing cpt for {name:?}"))
            })?;
            let parents = dag.parent_indices(node).to_vec();
            let expected_parents: Vec<&str> =
                parents.iter().map(|&p| schema.variable(p).name()).collect();
            if entry.parents != expected_parents {
                return Err(Error::SchemaMismatch(format!(
                    "cpt for {name:?} lists parents {:?}, model string implies {:?}",
                    entry.parents, expected_parents
                )));
            }
            let child_cardinality = schema.variable(node).cardinality();
            let parent_cardinalities: Vec<usize> = parents
                .iter()
                .map(|&p| schema.variable(p).cardinality())
                .collect();
            let q: usize = parent_cardinalities.iter().product();
            if entry.rows.len() != q || entry.parent_config_order.len() != q {
                return Err(Error::SchemaMismatch(format!(
                    "cpt for {name:?} has {} rows, expected {q}",
                    entry.rows.len()
                )));
            }
            let cpt = Cpt {
                node,
                parents,
                child_cardinality,
                parent_cardinalities,
                rows: entry.rows.clone(),
            };
            for (config, codes) in entry.parent_config_order.iter().enumerate() {
                let expected: Vec<String> = cpt
                    .config_levels(config)
                    .iter()
                    .zip(&cpt.parents)
                    .map(|(&l, &p)| schema.variable(p).levels()[l].clone())
                    .collect();
                if *codes != expected {
                    return Err(Error::SchemaMismatch(format!(
                        "cpt for {name:?} row {config} declares configuration {codes:?}, expected {expected:?}"
                    )));
                }
            }
            for (config, row) in cpt.rows.iter().enumerate() {
                if row.probs.len() != child_cardinality {
                    return Err(Error::SchemaMismatch(format!(
                        "cpt for {name:?} row {config} has {} probabilities, expected {child_cardinality}",
                        row.probs.len()
                    )));
                }
                let sum: f64 = row.probs.iter().sum();
                if row.probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::DomainError(format!(
                        "cpt for {name:?} row {config} is not a probability distribution (sum {sum})"
                    )));
                }
            }
            cpts.push(cpt);
        }
        Ok(FittedNetwork {
            dag,
            cpts,
            n: file.n,
        })
    }
}

/// Held-out evaluation result; see [`FittedNetwork::log_likelihood_of`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOutLogLik {
    pub value: f64,
    /// Rows that hit an unsupported parent configuration (skipped factors).
    pub unsupported_rows: usize,
    /// Rows assigning a zero-probability child level (value is `-inf`).
    pub zero_probability_rows: usize,
}

/// Map each dag-schema variable to the column of the data schema with the
/// same name, requiring identical level lists.
pub(crate) fn map_nodes_to_columns(
    dag_schema: &Schema,
    data_schema: &Schema,
) -> Result<Vec<usize>> {
    let mut columns = Vec::with_capacity(dag_schema.len());
    for var in dag_schema.variables() {
        let col = data_schema.index_of(var.name()).ok_or_else(|| {
            Error::SchemaMismatch(format!("dataset is missing variable {:?}", var.name()))
        })?;
        if data_schema.variable(col).levels() != var.levels() {
            return Err(Error::SchemaMismatch(format!(
                "variable {:?} has different levels in the dataset",
                var.name()
            )));
        }
        columns.push(col);
    }
    Ok(columns)
}

#[derive(Serialize, Deserialize)]
struct FittedNetworkFile {
    model_string: String,
    n: usize,
    cpts: BTreeMap<String, CptFileEntry>,
}

#[derive(Serialize, Deserialize)]
struct CptFileEntry {
    parents: Vec<String>,
    parent_config_order: Vec<Vec<String>>,
    rows: Vec<CptRow>,
}
