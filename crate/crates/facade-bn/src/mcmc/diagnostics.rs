//! Convergence diagnostics for MCMC traces: autocorrelation, effective
//! sample size (Geyer initial-positive-sequence), split-chain potential
//! scale reduction, and Monte Carlo standard error.

use serde::Serialize;

use crate::error::{Error, Result};

use super::{ChainSet, CoefficientId};

/// Minimum trace length for ESS/MCSE/PSRF, below which the estimators are
/// meaningless.
pub const MIN_TRACE_LEN: usize = 100;

/// Biased autocorrelation estimator; `acf[0] = 1`.
pub fn acf(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::DomainError(format!(
            "acf needs a trace of at least {MIN_TRACE_LEN}, got {n}"
        )));
    }
    if max_lag >= n {
        return Err(Error::DomainError(format!(
            "max_lag {max_lag} must be below the trace length {n}"
        )));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0: f64 = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(Error::ConstantTrace);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let ck: f64 = (0..n - k)
            .map(|t| (trace[t] - mean) * (trace[t + k] - mean))
            .sum::<f64>()
            / n as f64;
        out.push(ck / c0);
    }
    Ok(out)
}

/// Effective sample size `N / (1 + 2 sum rho_k)`, with the autocorrelation
/// sum truncated at the first non-positive consecutive pair (Geyer's initial
/// positive sequence). Lags are computed on demand, so the usual fast-mixing
/// trace stops after a handful of them; strongly antithetic traces may scan
/// far and legitimately report ESS above N.
pub fn ess(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::DomainError(format!(
            "ess needs a trace of at least {MIN_TRACE_LEN}, got {n}"
        )));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0: f64 = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(Error::ConstantTrace);
    }
    let rho = |k: usize| -> f64 {
        (0..n - k)
            .map(|t| (trace[t] - mean) * (trace[t + k] - mean))
            .sum::<f64>()
            / (n as f64 * c0)
    };

    let mut pair_sum = 0.0;
    let mut lag = 0usize;
    loop {
        if lag + 1 >= n {
            break;
        }
        let gamma = rho(lag) + rho(lag + 1);
        if gamma <= 0.0 {
            break;
        }
        pair_sum += gamma;
        lag += 2;
    }
    // tau = 1 + 2 sum_{k>=1} rho_k expressed through the pairs, which start
    // at rho_0 = 1. A floor keeps the pathological fully-antithetic trace
    // finite instead of dividing by a cancellation artifact.
    let tau = (2.0 * pair_sum - 1.0).max(2.0 / n as f64);
    Ok(n as f64 / tau)
}

/// Monte Carlo standard error of the trace mean: `sd / sqrt(ess)`.
pub fn mcse(trace: &[f64]) -> Result<f64> {
    let sd = sample_sd(trace);
    Ok(sd / ess(trace)?.sqrt())
}

fn sample_sd(trace: &[f64]) -> f64 {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    (trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
}

/// Split-chain potential scale reduction factor
/// `sqrt((n-1)/n + B/(n W))`.
///
/// Each chain is halved (middle element dropped when odd), B is n times the
/// variance of the half-chain means and W the mean of their variances.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::DomainError("psrf needs at least one chain".into()));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::DomainError("psrf needs equal-length chains".into()));
    }
    if len < MIN_TRACE_LEN {
        return Err(Error::DomainError(format!(
            "psrf needs chains of at least {MIN_TRACE_LEN}, got {len}"
        )));
    }

    let half = len / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        halves.push(&chain[..half]);
        halves.push(&chain[chain.len() - half..]);
    }

    let m = halves.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, &mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 1e-300 {
        return Err(Error::DegenerateChains("zero within-chain variance".into()));
    }
    Ok(((n - 1.0) / n + b / (n * w)).sqrt())
}

/// Summary statistics of one coefficient's chains.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub ess: f64,
    pub psrf: f64,
    pub mcse: f64,
    pub acf: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Pass/fail cutoffs applied by [`diagnostics_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticThresholds {
    pub psrf_max: f64,
    pub ess_min: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        DiagnosticThresholds {
            psrf_max: 1.1,
            ess_min: 400.0,
        }
    }
}

/// One coefficient's diagnostics plus threshold verdicts. A degenerate
/// coefficient carries the error text instead of numbers and never passes.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsEntry {
    pub coefficient: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
    pub failures: Vec<String>,
}

const ACF_REPORT_LAGS: usize = 40;

/// Pooled ESS (sum of per-chain ESS), pooled moments, mean ACF across
/// chains, and split-chain PSRF for one ChainSet.
pub fn chain_set_diagnostics(set: &ChainSet) -> Result<Diagnostics> {
    let mut total_ess = 0.0;
    for chain in &set.chains {
        total_ess += ess(chain)?;
    }
    let psrf = psrf(&set.chains)?;

    let pooled: Vec<f64> = set.chains.iter().flatten().copied().collect();
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let sd = sample_sd(&pooled);
    let mcse = sd / total_ess.sqrt();

    let max_lag = ACF_REPORT_LAGS.min(set.chains[0].len() - 1);
    let mut mean_acf = vec![0.0; max_lag + 1];
    for chain in &set.chains {
        for (i, v) in acf(chain, max_lag)?.iter().enumerate() {
            mean_acf[i] += v / set.chains.len() as f64;
        }
    }

    Ok(Diagnostics {
        ess: total_ess,
        psrf,
        mcse,
        acf: mean_acf,
        mean,
        sd,
    })
}

/// Evaluate every coefficient against the thresholds, sorted by label.
pub fn diagnostics_report(
    chain_sets: &[ChainSet],
    thresholds: &DiagnosticThresholds,
) -> Vec<DiagnosticsEntry> {
    let mut entries: Vec<DiagnosticsEntry> = chain_sets
        .iter()
        .map(|set| entry_for(set, thresholds))
        .collect();
    entries.sort_by(|a, b| a.coefficient.cmp(&b.coefficient));
    entries
}

fn entry_for(set: &ChainSet, thresholds: &DiagnosticThresholds) -> DiagnosticsEntry {
    let CoefficientId { label, .. } = &set.coefficient;
    match chain_set_diagnostics(set) {
        Ok(diag) => {
            let mut failures = Vec::new();
            if diag.psrf.is_nan() || diag.psrf >= thresholds.psrf_max {
                failures.push(format!(
                    "psrf {:.4} not below {}",
                    diag.psrf, thresholds.psrf_max
                ));
            }
            if diag.ess.is_nan() || diag.ess <= thresholds.ess_min {
                failures.push(format!(
                    "ess {:.1} not above {}",
                    diag.ess, thresholds.ess_min
                ));
            }
            DiagnosticsEntry {
                coefficient: label.clone(),
                pass: failures.is_empty(),
                failures,
                diagnostics: Some(diag),
                error: None,
            }
        }
        Err(e) => DiagnosticsEntry {
            coefficient: label.clone(),
            diagnostics: None,
            error: Some(e.to_string()),
            pass: false,
            failures: vec![e.to_string()],
        },
    }
}
