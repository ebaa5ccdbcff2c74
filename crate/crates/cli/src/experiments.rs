//! Experiment pipelines: batches, miss-probability series, slopes and bounds.

use durdet::combinatorics::EntropyConvention;
use durdet::exponent::{detectability, guaranteed_bound, solve_bound, BoundConfig};
use durdet::montecarlo::{fit_slope, p_miss_series, run_batch_with_mode, FitWindow, MissAtAlpha, SlopeFit};
use durdet::rng::child_seed;
use durdet::{Execution, Hypothesis, ModelParams};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_artifact, json_artifact, Artifact};
use crate::presets::Preset;

/// Seed offset separating bound searches from simulation sweeps.
const BOUND_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub t_max: usize,
    pub n_points: usize,
    pub window: String,
}

impl SlopeSummary {
    fn from_fit(fit: &SlopeFit, runs: usize) -> Self {
        SlopeSummary {
            slope: fit.slope,
            intercept: fit.intercept,
            std_error: fit.std_error(runs),
            t_max: fit.t_max,
            n_points: fit.n_points(),
            window: fit.window.to_string(),
        }
    }
}

fn try_fit(series: &[f64], window: FitWindow, runs: usize) -> Option<SlopeSummary> {
    fit_slope(series, window).ok().map(|f| SlopeSummary::from_fit(&f, runs))
}

/// Both batches for one parameter point plus the miss-at-α series.
pub struct Simulated {
    pub null: durdet::montecarlo::BatchResult,
    pub series: Vec<MissAtAlpha>,
}

pub fn simulate_pair(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    seed: u64,
    exec: Execution,
) -> CliResult<Simulated> {
    let runs = cfg.effective_runs();
    let b0 = run_batch_with_mode(params, Hypothesis::Null, cfg.horizon, runs, seed, cfg.init_mode, exec)?;
    let b1 = run_batch_with_mode(params, Hypothesis::Alternative, cfg.horizon, runs, seed, cfg.init_mode, exec)?;
    let series = p_miss_series(&b0, &b1, cfg.alpha, exec)?;
    Ok(Simulated { null: b0, series })
}

fn p_values(series: &[MissAtAlpha]) -> Vec<f64> {
    series.iter().map(|m| m.p_miss).collect()
}

/// Standard error of `-(1/t) log P̂` for a binomial estimate from `runs` trials.
fn miss_rate_se(p: f64, t: usize, runs: usize) -> f64 {
    ((1.0 - p) / (runs as f64 * p)).sqrt() / t as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Row {
    pub t: usize,
    pub p_miss: f64,
    pub gamma_star_log: f64,
    pub miss_rate: Option<f64>,
    pub miss_rate_se: Option<f64>,
    pub llr_rate: f64,
    pub llr_rate_se: f64,
}

/// Average of a rate over a window, with the mean of per-`t` standard
/// errors (exact under perfect correlation, conservative otherwise).
#[derive(Debug, Clone, Serialize)]
pub struct TailAverage {
    pub mean: f64,
    pub std_error: f64,
    pub n_points: usize,
    /// `|mean(second half) - mean(first half)| / |mean|` over the window.
    pub relative_drift: f64,
}

fn tail_average(values: &[(f64, f64)]) -> Option<TailAverage> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.0).sum::<f64>() / n;
    let std_error = values.iter().map(|v| v.1).sum::<f64>() / n;
    let half = values.len() / 2;
    let avg = |s: &[(f64, f64)]| s.iter().map(|v| v.0).sum::<f64>() / s.len() as f64;
    let relative_drift = (avg(&values[half..]) - avg(&values[..half])).abs() / mean.abs();
    Some(TailAverage {
        mean,
        std_error,
        n_points: values.len(),
        relative_drift,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Report {
    pub runs: usize,
    pub horizon: usize,
    pub tail_start: usize,
    pub miss_rate_tail: Option<TailAverage>,
    pub llr_rate_tail: Option<TailAverage>,
    /// `|difference| / sqrt(se_miss² + se_llr²)` of the two tail averages.
    pub tail_gap_in_se: Option<f64>,
    pub zeta_hat: f64,
    pub zeta_std_error: f64,
    pub slope_full: Option<SlopeSummary>,
    pub slope_tail: Option<SlopeSummary>,
    #[serde(skip)]
    pub rows: Vec<Fig1Row>,
}

pub fn fig1(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Fig1Report> {
    let params = cfg.model_params()?;
    let runs = cfg.effective_runs();
    let sim = simulate_pair(cfg, &params, cfg.seed, exec)?;
    let rows: Vec<Fig1Row> = sim
        .series
        .iter()
        .map(|m| {
            let (llr_rate, llr_rate_se) = sim.null.normalized_llr_rate(m.t);
            let positive = m.p_miss > 0.0;
            Fig1Row {
                t: m.t,
                p_miss: m.p_miss,
                gamma_star_log: m.gamma_star,
                miss_rate: positive.then(|| -m.p_miss.ln() / m.t as f64),
                miss_rate_se: positive.then(|| miss_rate_se(m.p_miss, m.t, runs)),
                llr_rate,
                llr_rate_se,
            }
        })
        .collect();
    let tail_start = ((cfg.tail_fraction * cfg.horizon as f64).ceil() as usize).max(1);
    let tail = &rows[tail_start - 1..];
    let miss: Vec<(f64, f64)> = tail
        .iter()
        .filter_map(|r| r.miss_rate.zip(r.miss_rate_se))
        .collect();
    let llr: Vec<(f64, f64)> = tail.iter().map(|r| (r.llr_rate, r.llr_rate_se)).collect();
    let miss_rate_tail = tail_average(&miss);
    let llr_rate_tail = tail_average(&llr);
    let tail_gap_in_se = match (&miss_rate_tail, &llr_rate_tail) {
        (Some(a), Some(b)) => Some((a.mean - b.mean).abs() / a.std_error.hypot(b.std_error)),
        _ => None,
    };
    let (zeta_hat, zeta_std_error) = sim.null.normalized_llr_rate(cfg.horizon);
    let p = p_values(&sim.series);
    Ok(Fig1Report {
        runs,
        horizon: cfg.horizon,
        tail_start,
        miss_rate_tail,
        llr_rate_tail,
        tail_gap_in_se,
        zeta_hat,
        zeta_std_error,
        slope_full: try_fit(&p, FitWindow::Full, runs),
        slope_tail: try_fit(&p, FitWindow::TailFraction(cfg.tail_fraction), runs),
        rows,
    })
}

fn sigma_grid(cfg: &ExperimentConfig) -> CliResult<Vec<f64>> {
    cfg.sigma_grid
        .clone()
        .ok_or_else(|| CliError::config("run.sigma_grid is required for this experiment"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub sigma: f64,
    /// `μ1² / (2σ²)`.
    pub lb: f64,
    /// `μ2² / (2σ²)`.
    pub ub: f64,
    pub slope_full: Option<SlopeSummary>,
    pub slope_tail: Option<SlopeSummary>,
    #[serde(skip)]
    pub series: Vec<MissAtAlpha>,
}

/// Simulates every noise level of `run.sigma_grid`; point `i` uses master
/// seed `child_seed(run.seed, i)`.
pub fn sigma_sweep(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Vec<SweepPoint>> {
    let base = cfg.model_params()?;
    let runs = cfg.effective_runs();
    sigma_grid(cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, sigma)| {
            let params = base.with_sigma(sigma)?;
            let sim = simulate_pair(cfg, &params, child_seed(cfg.seed, i as u64), exec)?;
            let p = p_values(&sim.series);
            let s2 = 2.0 * sigma * sigma;
            Ok(SweepPoint {
                sigma,
                lb: params.mu1 * params.mu1 / s2,
                ub: params.mu2 * params.mu2 / s2,
                slope_full: try_fit(&p, FitWindow::Full, runs),
                slope_tail: try_fit(&p, FitWindow::TailFraction(cfg.tail_fraction), runs),
                series: sim.series,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub sigma: f64,
    pub eta_lower: f64,
    pub zeta_lower: f64,
    pub eta_lower_mass_weighted: f64,
    pub undetectable: Option<bool>,
    pub feasible_points_evaluated: usize,
}

/// Lower bound for every grid point, in both entropy conventions.
pub fn bound_sweep(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Vec<BoundPoint>> {
    let base = cfg.model_params()?;
    sigma_grid(cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, sigma)| {
            let params = base.with_sigma(sigma)?;
            let bc = BoundConfig {
                budget: cfg.effective_budget(),
                convention: EntropyConvention::Normalized,
                refine: cfg.refine,
                seed: child_seed(cfg.seed, BOUND_SEED_OFFSET + i as u64),
            };
            let normalized = solve_bound(&params, &bc, exec)?;
            let weighted = solve_bound(
                &params,
                &BoundConfig {
                    convention: EntropyConvention::MassWeighted,
                    ..bc
                },
                exec,
            )?;
            Ok(BoundPoint {
                sigma,
                eta_lower: normalized.eta_lower,
                zeta_lower: normalized.zeta_lower,
                eta_lower_mass_weighted: weighted.eta_lower,
                undetectable: detectability(&params).ok().map(|d| d.undetectable),
                feasible_points_evaluated: normalized.feasible_points_evaluated,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct SeriesRow {
    sigma: f64,
    t: usize,
    p_miss: f64,
    gamma_star_log: f64,
}

fn series_rows(points: &[SweepPoint]) -> Vec<SeriesRow> {
    points
        .iter()
        .flat_map(|p| {
            p.series.iter().map(move |m| SeriesRow {
                sigma: p.sigma,
                t: m.t,
                p_miss: m.p_miss,
                gamma_star_log: m.gamma_star,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct SlopeRow {
    sigma: f64,
    slope: Option<f64>,
    slope_se: Option<f64>,
    slope_tail: Option<f64>,
    slope_tail_se: Option<f64>,
    t_max: Option<usize>,
    lb: f64,
    ub: f64,
}

fn slope_rows(points: &[SweepPoint]) -> Vec<SlopeRow> {
    points
        .iter()
        .map(|p| SlopeRow {
            sigma: p.sigma,
            slope: p.slope_full.as_ref().map(|s| s.slope),
            slope_se: p.slope_full.as_ref().map(|s| s.std_error),
            slope_tail: p.slope_tail.as_ref().map(|s| s.slope),
            slope_tail_se: p.slope_tail.as_ref().map(|s| s.std_error),
            t_max: p.slope_full.as_ref().map(|s| s.t_max),
            lb: p.lb,
            ub: p.ub,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct Mu1ZeroRow {
    sigma: f64,
    slope_full: Option<f64>,
    slope_full_se: Option<f64>,
    slope_tail: Option<f64>,
    slope_tail_se: Option<f64>,
    tail_points: Option<usize>,
    eta_lower: f64,
    eta_lower_mass_weighted: f64,
    undetectable: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
struct DishwasherRow {
    sigma: f64,
    /// First `t` whose empirical miss probability is zero.
    first_zero_miss_t: Option<usize>,
    p_miss_at_10: Option<f64>,
    guaranteed_exponent: f64,
}

/// Runs a preset end to end and renders its output files.
pub fn reproduce(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Vec<Artifact>> {
    let preset = cfg
        .preset
        .ok_or_else(|| CliError::config("reproduce needs a preset (--preset or 'preset =' in the config)"))?;
    let meta = cfg.metadata_line("reproduce");
    let json_meta = cfg.metadata_json("reproduce");
    let name = preset.name();
    let mut out = Vec::new();
    match preset {
        Preset::Fig1 => {
            let r = fig1(cfg, exec)?;
            out.push(csv_artifact(&format!("{name}_rates.csv"), &meta, &r.rows)?);
            out.push(json_artifact(&format!("{name}_summary.json"), json_meta, &r)?);
        }
        Preset::FigPmissSigma | Preset::FigExponentVsBound => {
            let points = sigma_sweep(cfg, exec)?;
            out.push(csv_artifact(&format!("{name}_pmiss.csv"), &meta, &series_rows(&points))?);
            out.push(csv_artifact(&format!("{name}_slopes.csv"), &meta, &slope_rows(&points))?);
            out.push(json_artifact(&format!("{name}_summary.json"), json_meta, &points)?);
        }
        Preset::FigMu1Zero => {
            let points = sigma_sweep(cfg, exec)?;
            let bounds = bound_sweep(cfg, exec)?;
            let rows: Vec<Mu1ZeroRow> = points
                .iter()
                .zip(&bounds)
                .map(|(p, b)| Mu1ZeroRow {
                    sigma: p.sigma,
                    slope_full: p.slope_full.as_ref().map(|s| s.slope),
                    slope_full_se: p.slope_full.as_ref().map(|s| s.std_error),
                    slope_tail: p.slope_tail.as_ref().map(|s| s.slope),
                    slope_tail_se: p.slope_tail.as_ref().map(|s| s.std_error),
                    tail_points: p.slope_tail.as_ref().map(|s| s.n_points),
                    eta_lower: b.eta_lower,
                    eta_lower_mass_weighted: b.eta_lower_mass_weighted,
                    undetectable: b.undetectable,
                })
                .collect();
            out.push(csv_artifact(&format!("{name}_pmiss.csv"), &meta, &series_rows(&points))?);
            out.push(csv_artifact(&format!("{name}_slopes.csv"), &meta, &rows)?);
            out.push(json_artifact(
                &format!("{name}_summary.json"),
                json_meta,
                &serde_json::json!({ "points": points, "bounds": bounds }),
            )?);
        }
        Preset::FigDishwasher => {
            let points = sigma_sweep(cfg, exec)?;
            let base = cfg.model_params()?;
            let rows: Vec<DishwasherRow> = points
                .iter()
                .map(|p| DishwasherRow {
                    sigma: p.sigma,
                    first_zero_miss_t: p.series.iter().find(|m| m.p_miss == 0.0).map(|m| m.t),
                    p_miss_at_10: p.series.get(9).map(|m| m.p_miss),
                    guaranteed_exponent: guaranteed_bound(&base.with_sigma(p.sigma).expect("grid validated")),
                })
                .collect();
            out.push(csv_artifact(&format!("{name}_pmiss.csv"), &meta, &series_rows(&points))?);
            out.push(csv_artifact(&format!("{name}_detection.csv"), &meta, &rows)?);
            out.push(json_artifact(&format!("{name}_summary.json"), json_meta, &rows)?);
        }
    }
    Ok(out)
}
