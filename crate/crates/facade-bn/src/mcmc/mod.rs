//! Posterior sampling of CPT coefficients under Dirichlet priors, with
//! multi-chain convergence diagnostics.
//!
//! Every CPT row has an independent Dirichlet posterior, so the sampler is
//! validated against the closed-form conjugate means; the MCMC machinery
//! exists to produce the trace-based diagnostics (ESS, split-chain PSRF,
//! MCSE, ACF) that certify a model's robustness, mirroring how such checks
//! are usually reported.

mod sampler;

pub mod diagnostics;

pub use diagnostics::{
    acf, chain_set_diagnostics, diagnostics_report, ess, mcse, psrf, DiagnosticThresholds,
    Diagnostics, DiagnosticsEntry,
};
pub use sampler::{sample_posterior, CellTrace, McmcConfig, PosteriorSample};

/// Names one tracked coefficient: `child·parent` for an arc's log-odds
/// contrast, or just `child` for a parentless node's summary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoefficientId {
    pub child: String,
    pub label: String,
}

/// Post-warmup traces of one coefficient across all chains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub coefficient: CoefficientId,
    pub chains: Vec<Vec<f64>>,
    pub warmup_dropped: usize,
    pub seed: u64,
}

impl ChainSet {
    /// All post-warmup draws concatenated in chain order.
    pub fn pooled(&self) -> Vec<f64> {
        self.chains.iter().flatten().copied().collect()
    }

    pub fn pooled_mean(&self) -> f64 {
        let pooled = self.pooled();
        pooled.iter().sum::<f64>() / pooled.len() as f64
    }
}
