//! Adaptive random-walk Metropolis over log-odds-transformed CPT rows.
//!
//! Each row of each node's CPT carries a Dirichlet(iss / (r q)) prior, so its
//! posterior is Dirichlet(alpha + counts), independent across rows. Rows are
//! parameterized as logits against the last level; with the softmax Jacobian
//! absorbed, the log target of a row is simply `sum_k (alpha + N_k) ln p_k`.
//! Proposals are isotropic Gaussian steps whose scale adapts per row during
//! warmup toward a 20-40% acceptance rate and is frozen afterwards.
//!
//! Chain c draws from an RNG stream derived from (seed, c), so traces are
//! reproducible and unaffected by how many chains run or on which threads.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dag::Dag;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

use super::{ChainSet, CoefficientId};

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Independent chains; at least 2 so PSRF is defined.
    pub chains: usize,
    /// Post-warmup iterations kept per chain.
    pub iters: usize,
    /// Warmup iterations per chain, dropped from traces.
    pub warmup: usize,
    pub seed: u64,
    /// Imaginary sample size of the Dirichlet prior: each CPT cell gets
    /// pseudo-count `prior_iss / (r q)`.
    pub prior_iss: f64,
    /// Also record a probability trace for every CPT cell.
    pub track_cells: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            iters: 5000,
            warmup: 1000,
            seed: 0,
            prior_iss: 1.0,
            track_cells: false,
        }
    }
}

/// Traces from one sampling run.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    /// One ChainSet per coefficient, sorted by label.
    pub coefficients: Vec<ChainSet>,
    /// Per-cell probability traces, present when `track_cells` was set.
    pub cells: Vec<CellTrace>,
}

/// Probability trace of a single CPT cell.
#[derive(Debug, Clone)]
pub struct CellTrace {
    pub node: String,
    pub config_index: usize,
    pub level_index: usize,
    pub chain_set: ChainSet,
}

/// Per-node sufficient statistics shared by all chains.
struct NodeTarget {
    cardinality: usize,
    config_count: usize,
    /// `alpha + N` per (config, level), flattened.
    posterior_counts: Vec<f64>,
}

enum CoeffKind {
    /// Log-odds of the modal level in one configuration (parentless nodes).
    Level { config: usize },
    /// Log-odds contrast of the modal level between two configurations
    /// (per-arc coefficients: parent at last vs first level).
    Contrast { low: usize, high: usize },
}

struct CoeffSpec {
    id: CoefficientId,
    node: usize,
    modal_level: usize,
    kind: CoeffKind,
}

/// Sample the CPT posterior of `dag` fitted to `data`.
pub fn sample_posterior(dag: &Dag, data: &Dataset, config: &McmcConfig) -> Result<PosteriorSample> {
    if data.is_empty() {
        return Err(Error::NoData(
            "cannot sample a posterior from no data".into(),
        ));
    }
    if config.chains < 2 {
        return Err(Error::DomainError(format!(
            "need at least 2 chains, got {}",
            config.chains
        )));
    }
    if config.iters < 100 {
        return Err(Error::DomainError(format!(
            "need at least 100 post-warmup iterations per chain, got {}",
            config.iters
        )));
    }
    if config.prior_iss.is_nan() || config.prior_iss <= 0.0 {
        return Err(Error::DomainError(format!(
            "prior imaginary sample size must be positive, got {}",
            config.prior_iss
        )));
    }

    let columns = crate::cpt::map_nodes_to_columns(dag.schema(), data.schema())?;
    let targets = build_targets(dag, data, &columns, config.prior_iss);
    let coeffs = coefficient_specs(dag, data, &columns);
    let cell_count: usize = if config.track_cells {
        targets.iter().map(|t| t.config_count * t.cardinality).sum()
    } else {
        0
    };

    // Each chain returns one trace per quantity: coefficients first, then
    // cells. Chains run on scoped threads; isolated RNG streams keep the
    // merged result identical to a serial run.
    let quantity_count = coeffs.len() + cell_count;
    let mut per_chain: Vec<Option<Vec<Vec<f64>>>> = (0..config.chains).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(config.chains);
        for chain_idx in 0..config.chains {
            let targets = &targets;
            let coeffs = &coeffs;
            handles.push(scope.spawn(move || {
                run_chain(
                    derive_seed(config.seed, chain_idx as u64),
                    targets,
                    coeffs,
                    config,
                )
            }));
        }
        for (slot, handle) in per_chain.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("chain worker panicked"));
        }
    });
    let per_chain: Vec<Vec<Vec<f64>>> = per_chain.into_iter().map(Option::unwrap).collect();
    debug_assert!(per_chain.iter().all(|c| c.len() == quantity_count));

    let collect_chains = |quantity: usize| -> Vec<Vec<f64>> {
        per_chain.iter().map(|c| c[quantity].clone()).collect()
    };

    let coefficients: Vec<ChainSet> = coeffs
        .iter()
        .enumerate()
        .map(|(i, spec)| ChainSet {
            coefficient: spec.id.clone(),
            chains: collect_chains(i),
            warmup_dropped: config.warmup,
            seed: config.seed,
        })
        .collect();

    let mut cells = Vec::with_capacity(cell_count);
    if config.track_cells {
        let mut quantity = coeffs.len();
        for (node, target) in targets.iter().enumerate() {
            let node_name = dag.schema().variable(node).name();
            for cfg in 0..target.config_count {
                for level in 0..target.cardinality {
                    let level_code = &dag.schema().variable(node).levels()[level];
                    cells.push(CellTrace {
                        node: node_name.to_string(),
                        config_index: cfg,
                        level_index: level,
                        chain_set: ChainSet {
                            coefficient: CoefficientId {
                                child: node_name.to_string(),
                                label: format!("{node_name}[{cfg}]={level_code}"),
                            },
                            chains: collect_chains(quantity),
                            warmup_dropped: config.warmup,
                            seed: config.seed,
                        },
                    });
                    quantity += 1;
                }
            }
        }
    }

    Ok(PosteriorSample {
        coefficients,
        cells,
    })
}

fn build_targets(dag: &Dag, data: &Dataset, columns: &[usize], prior_iss: f64) -> Vec<NodeTarget> {
    (0..dag.node_count())
        .map(|node| {
            let parents = dag.parent_indices(node);
            let r = dag.schema().variable(node).cardinality();
            let cards: Vec<usize> = parents
                .iter()
                .map(|&p| dag.schema().variable(p).cardinality())
                .collect();
            let q: usize = cards.iter().product();
            let alpha = prior_iss / (r * q) as f64;
            let mut posterior_counts = vec![alpha; q * r];
            for row in data.index_rows() {
                let mut cfg = 0usize;
                for (&p, &card) in parents.iter().zip(&cards) {
                    cfg = cfg * card + row[columns[p]] as usize;
                }
                posterior_counts[cfg * r + row[columns[node]] as usize] += 1.0;
            }
            NodeTarget {
                cardinality: r,
                config_count: q,
                posterior_counts,
            }
        })
        .collect()
}

/// One coefficient per parentless node plus one per arc. The arc coefficient
/// contrasts the parent's first and last levels with any other parents of
/// the child held at their first level.
fn coefficient_specs(dag: &Dag, data: &Dataset, columns: &[usize]) -> Vec<CoeffSpec> {
    let schema = dag.schema();
    let modal: Vec<usize> = (0..dag.node_count())
        .map(|node| {
            let r = schema.variable(node).cardinality();
            let mut counts = vec![0u64; r];
            for row in data.index_rows() {
                counts[row[columns[node]] as usize] += 1;
            }
            counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect();

    let mut specs = Vec::new();
    for (node, &modal_level) in modal.iter().enumerate() {
        let name = schema.variable(node).name();
        let parents = dag.parent_indices(node);
        if parents.is_empty() {
            specs.push(CoeffSpec {
                id: CoefficientId {
                    child: name.to_string(),
                    label: name.to_string(),
                },
                node,
                modal_level,
                kind: CoeffKind::Level { config: 0 },
            });
            continue;
        }
        let cards: Vec<usize> = parents
            .iter()
            .map(|&p| schema.variable(p).cardinality())
            .collect();
        for (pos, &parent) in parents.iter().enumerate() {
            // Stride of this parent in the mixed-radix config index.
            let stride: usize = cards[pos + 1..].iter().product();
            let high = (cards[pos] - 1) * stride;
            specs.push(CoeffSpec {
                id: CoefficientId {
                    child: name.to_string(),
                    label: format!("{name}\u{b7}{}", schema.variable(parent).name()),
                },
                node,
                modal_level,
                kind: CoeffKind::Contrast { low: 0, high },
            });
        }
    }
    specs.sort_by(|a, b| a.id.label.cmp(&b.id.label));
    specs
}

/// Chain state: one logit block per CPT row, reference level last.
struct RowState {
    theta: Vec<f64>,
    step: f64,
    accepts: u32,
    proposals: u32,
}

fn run_chain(
    chain_seed: u64,
    targets: &[NodeTarget],
    coeffs: &[CoeffSpec],
    config: &McmcConfig,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
    let mut states: Vec<Vec<RowState>> = targets
        .iter()
        .map(|t| {
            (0..t.config_count)
                .map(|_| RowState {
                    theta: (0..t.cardinality - 1)
                        .map(|_| standard_normal(&mut rng))
                        .collect(),
                    step: 1.0,
                    accepts: 0,
                    proposals: 0,
                })
                .collect()
        })
        .collect();

    let track_cells = config.track_cells;
    let quantity_count = coeffs.len()
        + if track_cells {
            targets.iter().map(|t| t.config_count * t.cardinality).sum()
        } else {
            0
        };
    let mut traces: Vec<Vec<f64>> = (0..quantity_count)
        .map(|_| Vec::with_capacity(config.iters))
        .collect();

    const ADAPT_BATCH: u32 = 50;
    let total_iters = config.warmup + config.iters;
    let mut proposal = Vec::new();
    for iter in 0..total_iters {
        let adapting = iter < config.warmup;
        for (target, rows) in targets.iter().zip(&mut states) {
            let r = target.cardinality;
            for (cfg, row) in rows.iter_mut().enumerate() {
                let counts = &target.posterior_counts[cfg * r..(cfg + 1) * r];
                proposal.clear();
                proposal.extend(
                    row.theta
                        .iter()
                        .map(|&t| t + row.step * standard_normal(&mut rng)),
                );
                let delta = row_log_target(&proposal, counts) - row_log_target(&row.theta, counts);
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                if u.ln() < delta {
                    row.theta.copy_from_slice(&proposal);
                    row.accepts += 1;
                }
                row.proposals += 1;
                if adapting && row.proposals == ADAPT_BATCH {
                    let rate = row.accepts as f64 / row.proposals as f64;
                    if rate < 0.20 {
                        row.step *= 0.8;
                    } else if rate > 0.40 {
                        row.step *= 1.25;
                    }
                    row.step = row.step.clamp(1e-3, 50.0);
                    row.accepts = 0;
                    row.proposals = 0;
                }
            }
        }
        if adapting {
            continue;
        }

        // Record quantities.
        for (quantity, spec) in coeffs.iter().enumerate() {
            let target = &targets[spec.node];
            let rows = &states[spec.node];
            let value = match spec.kind {
                CoeffKind::Level { config } => {
                    logit(row_probability(&rows[config].theta, spec.modal_level))
                }
                CoeffKind::Contrast { low, high } => {
                    logit(row_probability(&rows[high].theta, spec.modal_level))
                        - logit(row_probability(&rows[low].theta, spec.modal_level))
                }
            };
            debug_assert!(spec.modal_level < target.cardinality);
            traces[quantity].push(value);
        }
        if track_cells {
            let mut quantity = coeffs.len();
            for (target, rows) in targets.iter().zip(&states) {
                for row in rows {
                    for level in 0..target.cardinality {
                        traces[quantity].push(row_probability(&row.theta, level));
                        quantity += 1;
                    }
                }
            }
        }
    }
    traces
}

/// `sum_k a_k ln p_k` with p the softmax of (theta, 0); the Dirichlet
/// density and the transform Jacobian fold into the single `a_k` factor.
fn row_log_target(theta: &[f64], posterior_counts: &[f64]) -> f64 {
    let lse = log_sum_exp_with_zero(theta);
    let mut total = 0.0;
    for (k, &a) in posterior_counts.iter().enumerate() {
        let ln_p = if k < theta.len() {
            theta[k] - lse
        } else {
            -lse
        };
        total += a * ln_p;
    }
    total
}

/// Probability of `level` under the softmax of (theta, 0).
fn row_probability(theta: &[f64], level: usize) -> f64 {
    let lse = log_sum_exp_with_zero(theta);
    let ln_p = if level < theta.len() {
        theta[level] - lse
    } else {
        -lse
    };
    ln_p.exp()
}

/// log(sum(exp(theta)) + exp(0)), stable for large magnitudes.
fn log_sum_exp_with_zero(theta: &[f64]) -> f64 {
    let m = theta.iter().fold(0.0f64, |acc, &t| acc.max(t));
    let sum: f64 = theta.iter().map(|&t| (t - m).exp()).sum::<f64>() + (-m).exp();
    m + sum.ln()
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Box-Muller standard normal.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::mcmc::diagnostics::chain_set_diagnostics;
    use crate::testutil::toy_schema;

    fn quick_config(track_cells: bool) -> McmcConfig {
        McmcConfig {
            chains: 4,
            iters: 1500,
            warmup: 500,
            seed: 42,
            prior_iss: 2.0,
            track_cells,
        }
    }

    #[test]
    fn conjugate_posterior_mean_binary_node() {
        // Counts {3, 1} with Dirichlet(1, 1): posterior Beta(4, 2), mean of
        // the first level 4/6.
        let schema = toy_schema(&["X"], &[2]);
        let data =
            Dataset::from_index_rows(schema.clone(), vec![vec![0], vec![0], vec![0], vec![1]]);
        let dag = Dag::empty(schema);
        let sample = sample_posterior(&dag, &data, &quick_config(true)).unwrap();
        let cell = sample
            .cells
            .iter()
            .find(|c| c.node == "X" && c.config_index == 0 && c.level_index == 0)
            .unwrap();
        let diag = chain_set_diagnostics(&cell.chain_set).unwrap();
        let expected = 4.0 / 6.0;
        assert!(
            (diag.mean - expected).abs() <= 3.0 * diag.mcse,
            "mean {} vs conjugate {expected} (mcse {})",
            diag.mean,
            diag.mcse
        );
    }

    #[test]
    fn traces_are_seed_deterministic() {
        let schema = toy_schema(&["A", "B"], &[2, 3]);
        let data = Dataset::from_index_rows(
            schema.clone(),
            vec![vec![0, 0], vec![0, 1], vec![1, 2], vec![1, 1], vec![0, 2]],
        );
        let dag = Dag::empty(schema).with_arc("A", "B").unwrap();
        let config = quick_config(false);
        let a = sample_posterior(&dag, &data, &config).unwrap();
        let b = sample_posterior(&dag, &data, &config).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert_eq!(x.chains, y.chains);
        }
        let other = sample_posterior(&dag, &data, &McmcConfig { seed: 43, ..config }).unwrap();
        assert_ne!(a.coefficients[0].chains, other.coefficients[0].chains);
    }

    #[test]
    fn adding_chains_preserves_earlier_streams() {
        let schema = toy_schema(&["X"], &[3]);
        let data =
            Dataset::from_index_rows(schema.clone(), vec![vec![0], vec![1], vec![2], vec![0]]);
        let dag = Dag::empty(schema);
        let two = sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                chains: 2,
                ..quick_config(false)
            },
        )
        .unwrap();
        let three = sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                chains: 3,
                ..quick_config(false)
            },
        )
        .unwrap();
        assert_eq!(
            two.coefficients[0].chains[0],
            three.coefficients[0].chains[0]
        );
        assert_eq!(
            two.coefficients[0].chains[1],
            three.coefficients[0].chains[1]
        );
    }

    #[test]
    fn coefficient_labels_cover_arcs_and_parentless_nodes() {
        let schema = crate::schema::Schema::facade();
        let data = crate::testutil::sample_facade_dataset(30, 2);
        let dag = crate::dag::parse_model_string(
            "[B][C][DO][PL][T][DC|B][CE|DC][RF|DC][TR|RF][MD|TR]",
            &schema,
        )
        .unwrap();
        let sample = sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                iters: 150,
                warmup: 100,
                ..quick_config(false)
            },
        )
        .unwrap();
        let labels: Vec<&str> = sample
            .coefficients
            .iter()
            .map(|c| c.coefficient.label.as_str())
            .collect();
        // 5 parentless nodes plus 5 arcs.
        assert_eq!(labels.len(), 10);
        for expected in [
            "B",
            "C",
            "DO",
            "PL",
            "T",
            "DC\u{b7}B",
            "CE\u{b7}DC",
            "RF\u{b7}DC",
            "TR\u{b7}RF",
            "MD\u{b7}TR",
        ] {
            assert!(labels.contains(&expected), "missing {expected}: {labels:?}");
        }
        // Sorted by label, and each chain has exactly `iters` draws.
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
        assert!(sample.coefficients[0].chains.iter().all(|c| c.len() == 150));
    }

    #[test]
    fn short_run_fails_ess_threshold() {
        let schema = toy_schema(&["A", "B"], &[3, 3]);
        let data = Dataset::from_index_rows(
            schema.clone(),
            vec![vec![0, 1], vec![1, 2], vec![2, 0], vec![1, 1], vec![0, 0]],
        );
        let dag = Dag::empty(schema).with_arc("A", "B").unwrap();
        let sample = sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                iters: 200,
                warmup: 50,
                ..quick_config(false)
            },
        )
        .unwrap();
        let report = crate::mcmc::diagnostics_report(
            &sample.coefficients,
            &crate::mcmc::DiagnosticThresholds::default(),
        );
        assert!(
            report
                .iter()
                .any(|e| e.failures.iter().any(|f| f.starts_with("ess"))),
            "expected at least one ess failure from a 200-iteration run"
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let schema = toy_schema(&["X"], &[2]);
        let data = Dataset::from_index_rows(schema.clone(), vec![vec![0]]);
        let empty = Dataset::from_index_rows(schema.clone(), vec![]);
        let dag = Dag::empty(schema);
        assert!(matches!(
            sample_posterior(&dag, &empty, &quick_config(false)),
            Err(Error::NoData(_))
        ));
        assert!(sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                chains: 1,
                ..quick_config(false)
            }
        )
        .is_err());
        assert!(sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                prior_iss: 0.0,
                ..quick_config(false)
            }
        )
        .is_err());
        assert!(sample_posterior(
            &dag,
            &data,
            &McmcConfig {
                iters: 50,
                ..quick_config(false)
            }
        )
        .is_err());
    }
}
