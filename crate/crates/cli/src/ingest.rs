//! Detection report for a user-supplied power trace.
//!
//! Thresholds are calibrated offline: for every `t` the order-statistic
//! threshold `γ*_t` with empirical false-alarm rate `≤ α` is taken from a
//! synthetic null batch with the same parameters and seed.

use std::io::Read;

use durdet::io::read_observations;
use durdet::lrt::run_trajectory;
use durdet::montecarlo::{p_miss_series, run_batch_with_mode};
use durdet::{Execution, Hypothesis, ModelParams};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Serialize)]
pub struct IngestRow {
    pub t: usize,
    pub x: f64,
    pub log_lrt: f64,
    pub gamma_star_log: f64,
    pub alarm: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub samples: usize,
    pub alpha: f64,
    pub calibration_runs: usize,
    pub final_log_lrt: f64,
    pub final_gamma_star_log: f64,
    /// Fixed-horizon test at the full trace length; its false-alarm rate is `α`.
    pub decision_at_end: bool,
    /// First `t` with `log L_t ≥ γ*_t`. Scanning every `t` is a sequence of
    /// tests, so its false-alarm rate exceeds `α`; informational only.
    pub first_crossing: Option<usize>,
    /// Miss probability of the end-of-trace test on synthetic signal runs.
    pub expected_p_miss_at_end: f64,
    #[serde(skip)]
    pub rows: Vec<IngestRow>,
}

/// Per-`t` thresholds `γ*_t` and synthetic miss probabilities for traces of
/// length `horizon`.
pub fn calibrate(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    horizon: usize,
    exec: Execution,
) -> CliResult<Vec<(f64, f64)>> {
    let runs = cfg.effective_runs();
    let b0 = run_batch_with_mode(params, Hypothesis::Null, horizon, runs, cfg.seed, cfg.init_mode, exec)?;
    let b1 = run_batch_with_mode(params, Hypothesis::Alternative, horizon, runs, cfg.seed, cfg.init_mode, exec)?;
    Ok(p_miss_series(&b0, &b1, cfg.alpha, exec)?
        .into_iter()
        .map(|m| (m.gamma_star, m.p_miss))
        .collect())
}

/// Report for a trace against precomputed thresholds (see [`calibrate`]).
pub fn evaluate(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    x: &[f64],
    thresholds: &[(f64, f64)],
) -> CliResult<IngestReport> {
    let llr = run_trajectory(params, x, cfg.init_mode)?;
    let rows: Vec<IngestRow> = x
        .iter()
        .zip(&llr)
        .zip(thresholds)
        .enumerate()
        .map(|(i, ((&x, &log_lrt), &(gamma, _)))| IngestRow {
            t: i + 1,
            x,
            log_lrt,
            gamma_star_log: gamma,
            alarm: log_lrt >= gamma,
        })
        .collect();
    let last = rows.last().expect("nonempty trace");
    Ok(IngestReport {
        samples: x.len(),
        alpha: cfg.alpha,
        calibration_runs: cfg.effective_runs(),
        final_log_lrt: last.log_lrt,
        final_gamma_star_log: last.gamma_star_log,
        decision_at_end: last.alarm,
        first_crossing: rows.iter().find(|r| r.alarm).map(|r| r.t),
        expected_p_miss_at_end: thresholds[x.len() - 1].1,
        rows,
    })
}

pub fn ingest_trace<R: Read>(cfg: &ExperimentConfig, input: R, exec: Execution) -> CliResult<IngestReport> {
    let params = cfg.model_params()?;
    let x = read_observations(input)?;
    let thresholds = calibrate(cfg, &params, x.len(), exec)?;
    evaluate(cfg, &params, &x, &thresholds)
}
