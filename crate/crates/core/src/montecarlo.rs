//! Batched simulation of likelihood-ratio trajectories and the detection
//! performance measures built on them.
//!
//! A detector decides for the signal when `log L_t ≥ γ`, so
//! `P_fa(γ) = #{H0 runs with log L_t ≥ γ} / J` and
//! `P_miss(γ) = #{H1 runs with log L_t < γ} / J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lrt::{run_trajectory_into, InitMode, TransitionStructure};
use crate::model::{fill_observations, Hypothesis, ModelParams};
use crate::rng::{stream_rng, DOMAIN_ALTERNATIVE, DOMAIN_NULL};

pub fn hypothesis_domain(h: Hypothesis) -> u64 {
    match h {
        Hypothesis::Null => DOMAIN_NULL,
        Hypothesis::Alternative => DOMAIN_ALTERNATIVE,
    }
}

/// `J` trajectories of `log L_t`, `t = 1..=T`, under one hypothesis.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub hypothesis: Hypothesis,
    pub horizon: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub params: ModelParams,
    /// Row-major `runs × horizon`.
    log_lrt: Vec<f64>,
}

impl BatchResult {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.log_lrt[j * self.horizon..(j + 1) * self.horizon]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.log_lrt.chunks_exact(self.horizon)
    }

    /// `log L_t` of every run at sample count `t` (1-based).
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.rows().map(|r| r[t - 1]).collect()
    }

    /// Mean and standard error of `-(1/t) log L_t` across runs.
    pub fn normalized_llr_rate(&self, t: usize) -> (f64, f64) {
        let vals: Vec<f64> = self.rows().map(|r| -r[t - 1] / t as f64).collect();
        mean_and_se(&vals)
    }
}

pub(crate) fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `runs` independent streams of length `horizon` under `hypothesis`.
///
/// Run `j` draws from `stream_rng(master_seed, domain(hypothesis), j)`.
pub fn run_batch(
    params: &ModelParams,
    hypothesis: Hypothesis,
    horizon: usize,
    runs: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<BatchResult> {
    run_batch_with_mode(params, hypothesis, horizon, runs, master_seed, InitMode::default(), exec)
}

pub fn run_batch_with_mode(
    params: &ModelParams,
    hypothesis: Hypothesis,
    horizon: usize,
    runs: usize,
    master_seed: u64,
    mode: InitMode,
    exec: Execution,
) -> Result<BatchResult> {
    if horizon == 0 || runs == 0 {
        return Err(Error::InvalidArgument("horizon and run count must be positive".into()));
    }
    params.validate()?;
    let structure = TransitionStructure::new(params);
    let domain = hypothesis_domain(hypothesis);
    let mut log_lrt = vec![0.0; runs * horizon];
    exec.try_for_each_chunk_mut(&mut log_lrt, horizon, |j, row| {
        let mut rng = stream_rng(master_seed, domain, j as u64);
        let mut x = Vec::with_capacity(horizon);
        fill_observations(params, hypothesis, horizon, &mut rng, &mut x);
        let mut out = Vec::with_capacity(horizon);
        run_trajectory_into(params, &structure, &x, mode, 1, &mut out)?;
        row.copy_from_slice(&out);
        Ok::<(), Error>(())
    })?;
    Ok(BatchResult {
        hypothesis,
        horizon,
        runs,
        master_seed,
        params: params.clone(),
        log_lrt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub t: usize,
    pub gamma_log: f64,
    pub p_fa: f64,
    pub p_miss: f64,
}

fn check_pair(b0: &BatchResult, b1: &BatchResult, t: usize) -> Result<()> {
    if t == 0 || t > b0.horizon || t > b1.horizon {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside the simulated horizons ({}, {})",
            b0.horizon, b1.horizon
        )));
    }
    Ok(())
}

fn sorted_column(b: &BatchResult, t: usize) -> Vec<f64> {
    let mut c = b.column(t);
    c.sort_by(f64::total_cmp);
    c
}

/// Fractions `(P_fa, P_miss)` at threshold `gamma` from sorted columns.
fn rates(h0_sorted: &[f64], h1_sorted: &[f64], gamma: f64) -> (f64, f64) {
    let alarms = h0_sorted.len() - h0_sorted.partition_point(|&v| v < gamma);
    let misses = h1_sorted.partition_point(|&v| v < gamma);
    (alarms as f64 / h0_sorted.len() as f64, misses as f64 / h1_sorted.len() as f64)
}

pub fn roc_point(b0: &BatchResult, b1: &BatchResult, t: usize, gamma_log: f64) -> Result<RocPoint> {
    check_pair(b0, b1, t)?;
    let (p_fa, p_miss) = rates(&sorted_column(b0, t), &sorted_column(b1, t), gamma_log);
    Ok(RocPoint { t, gamma_log, p_fa, p_miss })
}

/// Threshold sweep: `n_thresholds` log-thresholds evenly spaced over
/// `[min - 1, max + 1]` of both batches' values at `t`.
pub fn roc_curve(b0: &BatchResult, b1: &BatchResult, t: usize, n_thresholds: usize) -> Result<Vec<RocPoint>> {
    check_pair(b0, b1, t)?;
    if n_thresholds < 2 {
        return Err(Error::InvalidArgument("need at least two thresholds".into()));
    }
    const MARGIN: f64 = 1.0;
    let h0 = sorted_column(b0, t);
    let h1 = sorted_column(b1, t);
    let lo = h0[0].min(h1[0]) - MARGIN;
    let hi = h0[h0.len() - 1].max(h1[h1.len() - 1]) + MARGIN;
    let step = (hi - lo) / (n_thresholds - 1) as f64;
    Ok((0..n_thresholds)
        .map(|i| {
            let gamma_log = if i + 1 == n_thresholds { hi } else { lo + step * i as f64 };
            let (p_fa, p_miss) = rates(&h0, &h1, gamma_log);
            RocPoint { t, gamma_log, p_fa, p_miss }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissAtAlpha {
    pub t: usize,
    pub p_miss: f64,
    /// Smallest log-threshold whose empirical false-alarm rate is `≤ α`.
    pub gamma_star: f64,
}

fn miss_at_alpha_sorted(h0_sorted: &[f64], h1: &[f64], t: usize, alpha: f64) -> MissAtAlpha {
    let j = h0_sorted.len();
    let gamma_star = if alpha >= 1.0 {
        h0_sorted[0]
    } else {
        // at most floor(αJ) alarms: γ must exceed the (J - floor(αJ))-th smallest value
        let allowed = ((alpha * j as f64).floor() as usize).min(j - 1);
        h0_sorted[j - allowed - 1].next_up()
    };
    let misses = h1.iter().filter(|&&v| v < gamma_star).count();
    MissAtAlpha {
        t,
        p_miss: misses as f64 / h1.len() as f64,
        gamma_star,
    }
}

/// Empirical miss probability of the most powerful threshold test whose
/// empirical false-alarm rate does not exceed `alpha`.
pub fn p_miss_at_alpha(b0: &BatchResult, b1: &BatchResult, t: usize, alpha: f64) -> Result<MissAtAlpha> {
    check_pair(b0, b1, t)?;
    check_alpha(alpha)?;
    Ok(miss_at_alpha_sorted(&sorted_column(b0, t), &b1.column(t), t, alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// [`p_miss_at_alpha`] for every `t = 1..=min(T0, T1)`.
pub fn p_miss_series(b0: &BatchResult, b1: &BatchResult, alpha: f64, exec: Execution) -> Result<Vec<MissAtAlpha>> {
    check_alpha(alpha)?;
    let horizon = b0.horizon.min(b1.horizon);
    Ok(exec.map_range(horizon, |i| {
        let t = i + 1;
        miss_at_alpha_sorted(&sorted_column(b0, t), &b1.column(t), t, alpha)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "fraction")]
pub enum FitWindow {
    Full,
    /// Only `t ≥ f · t_max`.
    TailFraction(f64),
}

impl std::fmt::Display for FitWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWindow::Full => f.write_str("full"),
            FitWindow::TailFraction(x) => write!(f, "tail:{x}"),
        }
    }
}

/// Least-squares line through `(t, -log P_miss,t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `t` with a nonzero miss probability.
    pub t_max: usize,
    pub window: FitWindow,
    /// `(t, P_miss,t)` pairs used by the fit.
    pub points: Vec<(usize, f64)>,
}

impl SlopeFit {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    fn centered(&self) -> (Vec<f64>, f64) {
        let n = self.points.len() as f64;
        let tbar = self.points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let dev: Vec<f64> = self.points.iter().map(|p| p.0 as f64 - tbar).collect();
        let sxx = dev.iter().map(|d| d * d).sum();
        (dev, sxx)
    }

    /// Classical OLS standard error from the residuals; `None` with fewer
    /// than three points.
    pub fn residual_std_error(&self) -> Option<f64> {
        let n = self.points.len();
        if n < 3 {
            return None;
        }
        let rss: f64 = self
            .points
            .iter()
            .map(|&(t, p)| {
                let r = -p.ln() - (self.intercept + self.slope * t as f64);
                r * r
            })
            .sum();
        let (_, sxx) = self.centered();
        Some((rss / (n - 2) as f64 / sxx).sqrt())
    }

    /// Monte Carlo standard error of the slope: binomial variance of each
    /// `P̂_miss` from `runs` trials propagated through the OLS weights by the
    /// delta method (`Var(-log P̂) ≈ (1 - P) / (J P)`).
    pub fn monte_carlo_std_error(&self, runs: usize) -> f64 {
        let (dev, sxx) = self.centered();
        let var: f64 = self
            .points
            .iter()
            .zip(&dev)
            .map(|(&(_, p), d)| (d / sxx).powi(2) * (1.0 - p) / (runs as f64 * p))
            .sum();
        var.sqrt()
    }

    /// The larger of the residual and Monte Carlo standard errors.
    pub fn std_error(&self, runs: usize) -> f64 {
        let mc = self.monte_carlo_std_error(runs);
        self.residual_std_error().map_or(mc, |r| r.max(mc))
    }
}

/// Fits `-log P_miss,t = intercept + slope · t` over the `t` (1-based index
/// into `series`) where the miss probability is nonzero.
pub fn fit_slope(series: &[f64], window: FitWindow) -> Result<SlopeFit> {
    let nonzero: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i + 1, p))
        .collect();
    let t_max = nonzero
        .last()
        .map(|p| p.0)
        .ok_or_else(|| Error::InsufficientData("miss probability is zero everywhere".into()))?;
    let points: Vec<(usize, f64)> = match window {
        FitWindow::Full => nonzero,
        FitWindow::TailFraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("tail fraction {f} outside [0, 1]")));
            }
            let start = f * t_max as f64;
            nonzero.into_iter().filter(|p| p.0 as f64 >= start).collect()
        }
    };
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable point(s) in window {window}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let tbar = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let ybar = points.iter().map(|p| -p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, p) in &points {
        let dt = t as f64 - tbar;
        sxy += dt * (-p.ln() - ybar);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: ybar - slope * tbar,
        t_max,
        window,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::uniform(2, 0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn batches_are_reproducible() {
        let p = params();
        let a = run_batch(&p, Hypothesis::Alternative, 20, 1, 99, Execution::Sequential).unwrap();
        let b = run_batch(&p, Hypothesis::Alternative, 20, 1, 99, Execution::Parallel).unwrap();
        assert_eq!(a.row(0), b.row(0));
        let c = run_batch(&p, Hypothesis::Alternative, 20, 1, 100, Execution::Sequential).unwrap();
        assert_ne!(a.row(0), c.row(0));
    }

    #[test]
    fn identical_levels_give_zero_trajectories() {
        let p = ModelParams::uniform(3, 0.0, 0.0, 1.0).unwrap();
        let b = run_batch(&p, Hypothesis::Null, 15, 30, 1, Execution::default()).unwrap();
        assert!(b.rows().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn roc_limits_and_monotonicity() {
        let p = params();
        let b0 = run_batch(&p, Hypothesis::Null, 10, 500, 5, Execution::default()).unwrap();
        let b1 = run_batch(&p, Hypothesis::Alternative, 10, 500, 5, Execution::default()).unwrap();
        let roc = roc_curve(&b0, &b1, 10, 200).unwrap();
        assert_eq!((roc[0].p_fa, roc[0].p_miss), (1.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.p_fa, last.p_miss), (0.0, 1.0));
        for w in roc.windows(2) {
            assert!(w[1].gamma_log > w[0].gamma_log);
            assert!(w[1].p_fa <= w[0].p_fa);
            assert!(w[1].p_miss >= w[0].p_miss);
        }
        assert!(roc_curve(&b0, &b1, 11, 10).is_err());
    }

    #[test]
    fn miss_at_alpha_respects_budget() {
        let p = params();
        let b0 = run_batch(&p, Hypothesis::Null, 8, 1000, 8, Execution::default()).unwrap();
        let b1 = run_batch(&p, Hypothesis::Alternative, 8, 1000, 8, Execution::default()).unwrap();
        for t in 1..=8 {
            let m = p_miss_at_alpha(&b0, &b1, t, 0.05).unwrap();
            let at = roc_point(&b0, &b1, t, m.gamma_star).unwrap();
            assert!(at.p_fa <= 0.05);
            assert_eq!(at.p_miss, m.p_miss);
            // any smaller threshold at a data point breaks the budget
            let below = roc_point(&b0, &b1, t, m.gamma_star.next_down()).unwrap();
            assert!(below.p_fa > 0.05);
        }
        let all = p_miss_at_alpha(&b0, &b1, 4, 1.0).unwrap();
        assert_eq!(all.gamma_star, b0.column(4).into_iter().fold(f64::INFINITY, f64::min));
        assert!(p_miss_at_alpha(&b0, &b1, 4, 0.0).is_err());
    }

    #[test]
    fn slope_of_exact_exponential() {
        let series: Vec<f64> = (1..=100).map(|t| (-0.05 * t as f64).exp()).collect();
        let fit = fit_slope(&series, FitWindow::Full).unwrap();
        assert!((fit.slope - 0.05).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
        assert_eq!(fit.t_max, 100);
        let tail = fit_slope(&series, FitWindow::TailFraction(0.8)).unwrap();
        assert_eq!(tail.points.first().unwrap().0, 80);
        assert!((tail.slope - 0.05).abs() < 1e-12);
    }

    #[test]
    fn slope_skips_zeros() {
        let mut series: Vec<f64> = (1..=80).map(|t| 0.9 * (-0.1 * t as f64).exp()).collect();
        for v in &mut series[50..] {
            *v = 0.0;
        }
        series[20] = 0.0;
        let fit = fit_slope(&series, FitWindow::Full).unwrap();
        assert_eq!(fit.t_max, 50);
        assert_eq!(fit.n_points(), 49);
        assert!((fit.slope - 0.1).abs() < 1e-12);
        assert!(fit_slope(&[0.0, 0.5, 0.0], FitWindow::Full).is_err());
        assert!(fit_slope(&[0.0; 5], FitWindow::Full).is_err());
    }

    #[test]
    fn slope_standard_errors() {
        let series = [0.5, 0.3, 0.2, 0.1];
        let fit = fit_slope(&series, FitWindow::Full).unwrap();
        assert!(fit.residual_std_error().unwrap() > 0.0);
        assert!(fit.monte_carlo_std_error(1000) > fit.monte_carlo_std_error(100_000));
        let two = fit_slope(&series[..2], FitWindow::Full).unwrap();
        assert!(two.residual_std_error().is_none());
        assert!(two.std_error(100) > 0.0);
    }
}
