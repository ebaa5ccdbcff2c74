//! One function per subcommand; each returns the rendered output files.

use std::path::Path;

use durdet::combinatorics::{growth_rate_psi, CountTable};
use durdet::exponent::{
    critical_sigma_uniform, detectability as detect, estimate_error_exponent, guaranteed_bound, solve_bound,
    BoundConfig,
};
use durdet::lrt::{oracle_log_lrt, run_trajectory};
use durdet::model::sample_observations;
use durdet::montecarlo::{fit_slope, roc_curve, run_batch_with_mode, FitWindow};
use durdet::rng::{stream_rng, DOMAIN_SIMULATE};
use durdet::sequence::ENUMERATION_LIMIT;
use durdet::{DurationPmf, Execution, Hypothesis};
use num_bigint::BigUint;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::{simulate_pair, SlopeSummary};
use crate::ingest::ingest_trace;
use crate::output::{csv_artifact, json_artifact, Artifact};

#[derive(Serialize)]
struct ObservationRow {
    t: usize,
    x: f64,
}

pub fn simulate(cfg: &ExperimentConfig, hypothesis: Hypothesis, length: Option<usize>) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let t = length.unwrap_or(cfg.horizon);
    let mut rng = stream_rng(cfg.seed, DOMAIN_SIMULATE, 0);
    let obs = sample_observations(&params, hypothesis, t, &mut rng)?;
    let meta = cfg.metadata_line("simulate");
    let rows: Vec<ObservationRow> = obs.x.iter().enumerate().map(|(i, &x)| ObservationRow { t: i + 1, x }).collect();
    let mut out = vec![csv_artifact("observations.csv", &meta, &rows)?];
    if let Some(path) = obs.truth {
        let mut buf = Vec::new();
        durdet::io::write_phase_sequence(&mut buf, &path)?;
        out.push(Artifact {
            name: "phases.csv".into(),
            contents: format!("{meta}\n{}", String::from_utf8(buf).expect("utf-8")),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct LrtRow {
    t: usize,
    log_lrt: f64,
}

#[derive(Serialize)]
struct CheckedLrtRow {
    t: usize,
    log_lrt: f64,
    oracle_log_lrt: Option<f64>,
}

/// `log L_t` for a trace read from `input`, or for a synthetic signal trace
/// of length `run.horizon` when no input is given. With `oracle`, the
/// brute-force ratio is added for every `t` whose sequence count is within
/// the enumeration guard; the column is empty beyond it.
pub fn lrt_run(cfg: &ExperimentConfig, input: Option<&Path>, oracle: bool, exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let x = match input {
        Some(p) => durdet::io::read_observations(std::fs::File::open(p)?)?,
        None => {
            let mut rng = stream_rng(cfg.seed, DOMAIN_SIMULATE, 0);
            sample_observations(&params, Hypothesis::Alternative, cfg.horizon, &mut rng)?.x
        }
    };
    let llr = run_trajectory(&params, &x, cfg.init_mode)?;
    let checked = if oracle {
        let table = CountTable::new(params.delta, x.len())?;
        let limit = BigUint::from(ENUMERATION_LIMIT);
        let n = (1..=x.len()).take_while(|&t| *table.exact(t) <= limit).count();
        exec.map_range(n, |i| oracle_log_lrt(&params, &x[..=i]))
            .into_iter()
            .collect::<durdet::Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let meta = cfg.metadata_line("lrt-run");
    let artifact = if oracle {
        let rows: Vec<CheckedLrtRow> = llr
            .iter()
            .enumerate()
            .map(|(i, &v)| CheckedLrtRow {
                t: i + 1,
                log_lrt: v,
                oracle_log_lrt: checked.get(i).copied(),
            })
            .collect();
        csv_artifact("lrt.csv", &meta, &rows)?
    } else {
        let rows: Vec<LrtRow> = llr
            .iter()
            .enumerate()
            .map(|(i, &v)| LrtRow { t: i + 1, log_lrt: v })
            .collect();
        csv_artifact("lrt.csv", &meta, &rows)?
    };
    Ok(vec![artifact])
}

#[derive(Serialize)]
struct CountRow {
    t: usize,
    #[serde(rename = "C_t")]
    c_t: String,
    #[serde(rename = "log_C_t")]
    log_c_t: f64,
}

pub fn combinatorics(cfg: &ExperimentConfig, t_max: Option<usize>) -> CliResult<Vec<Artifact>> {
    let delta = cfg.delta()?;
    let t_max = t_max.unwrap_or(cfg.horizon);
    let table = CountTable::new(delta, t_max)?;
    let rows: Vec<CountRow> = (1..=t_max)
        .map(|t| CountRow {
            t,
            c_t: table.exact(t).to_string(),
            log_c_t: table.log(t),
        })
        .collect();
    let meta = format!(
        "{} psi={} enumeration_limit={ENUMERATION_LIMIT}",
        cfg.metadata_line("combinatorics"),
        growth_rate_psi(delta)?
    );
    Ok(vec![csv_artifact("combinatorics.csv", &meta, &rows)?])
}

pub fn roc(cfg: &ExperimentConfig, t: Option<usize>, exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let t = t.unwrap_or(cfg.horizon);
    if t == 0 || t > cfg.horizon {
        return Err(CliError::config(format!("--t must lie in 1..={} (run.horizon)", cfg.horizon)));
    }
    let runs = cfg.effective_runs();
    let b0 = run_batch_with_mode(&params, Hypothesis::Null, t, runs, cfg.seed, cfg.init_mode, exec)?;
    let b1 = run_batch_with_mode(&params, Hypothesis::Alternative, t, runs, cfg.seed, cfg.init_mode, exec)?;
    let curve = roc_curve(&b0, &b1, t, cfg.thresholds)?;
    Ok(vec![csv_artifact("roc.csv", &cfg.metadata_line("roc"), &curve)?])
}

#[derive(Serialize)]
struct PmissRow {
    t: usize,
    p_miss: f64,
    gamma_star_log: f64,
}

pub fn pmiss(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let sim = simulate_pair(cfg, &params, cfg.seed, exec)?;
    let rows: Vec<PmissRow> = sim
        .series
        .iter()
        .map(|m| PmissRow {
            t: m.t,
            p_miss: m.p_miss,
            gamma_star_log: m.gamma_star,
        })
        .collect();
    Ok(vec![csv_artifact("pmiss.csv", &cfg.metadata_line("pmiss"), &rows)?])
}

pub fn slope(cfg: &ExperimentConfig, tail: bool, exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let sim = simulate_pair(cfg, &params, cfg.seed, exec)?;
    let p: Vec<f64> = sim.series.iter().map(|m| m.p_miss).collect();
    let window = if tail {
        FitWindow::TailFraction(cfg.tail_fraction)
    } else {
        FitWindow::Full
    };
    let fit = fit_slope(&p, window)?;
    let s2 = 2.0 * params.sigma * params.sigma;
    let body = serde_json::json!({
        "fit": SlopeSummary {
            slope: fit.slope,
            intercept: fit.intercept,
            std_error: fit.std_error(cfg.effective_runs()),
            t_max: fit.t_max,
            n_points: fit.n_points(),
            window: fit.window.to_string(),
        },
        "lb": params.mu1 * params.mu1 / s2,
        "ub": params.mu2 * params.mu2 / s2,
    });
    Ok(vec![json_artifact("slope.json", cfg.metadata_json("slope"), &body)?])
}

#[derive(Serialize)]
struct ExponentRow {
    #[serde(rename = "T")]
    t: usize,
    zeta_hat: f64,
    std_error: f64,
}

pub fn exponent(cfg: &ExperimentConfig, horizons: &[usize], exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let horizons = if horizons.is_empty() { vec![cfg.horizon] } else { horizons.to_vec() };
    let rows = horizons
        .iter()
        .map(|&t| {
            let e = estimate_error_exponent(&params, t, cfg.effective_runs(), cfg.seed, exec)?;
            Ok(ExponentRow {
                t,
                zeta_hat: e.zeta_hat,
                std_error: e.std_error,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(vec![csv_artifact("exponent.csv", &cfg.metadata_line("exponent"), &rows)?])
}

#[derive(Serialize)]
struct TraceRow {
    samples: usize,
    best_value: f64,
}

pub fn bound(cfg: &ExperimentConfig, exec: Execution) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let budget = cfg.effective_budget();
    let bc = BoundConfig {
        budget,
        convention: cfg.convention,
        refine: cfg.refine,
        seed: cfg.seed,
    };
    let r = solve_bound(&params, &bc, exec)?;
    let body = serde_json::json!({
        "eta_lower": r.eta_lower,
        "zeta_lower": r.zeta_lower,
        "guaranteed": guaranteed_bound(&params),
        "argmin_nu": r.argmin_nu.nu,
        "argmin_xi": r.argmin_xi,
        "mode": r.mode.to_string(),
        "budget": budget,
        "seed": cfg.seed,
        "feasible_points_evaluated": r.feasible_points_evaluated,
        "vanishing": r.vanishing,
        "no_feasible_point": r.no_feasible_point,
    });
    let trace: Vec<TraceRow> = r
        .trace
        .iter()
        .map(|&(samples, best_value)| TraceRow { samples, best_value })
        .collect();
    Ok(vec![
        json_artifact("bound.json", cfg.metadata_json("bound"), &body)?,
        csv_artifact("bound_trace.csv", &cfg.metadata_line("bound"), &trace)?,
    ])
}

pub fn detectability(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let params = cfg.model_params()?;
    let d = detect(&params)?;
    let uniform = params.p1 == DurationPmf::uniform(params.delta) && params.p2 == params.p1;
    let critical = if uniform && params.delta >= 2 && params.mu2 > 0.0 {
        Some(critical_sigma_uniform(params.delta, params.mu2)?)
    } else {
        None
    };
    let body = serde_json::json!({
        "lhs": d.lhs,
        "rhs": d.rhs,
        "undetectable": d.undetectable,
        "critical_sigma_uniform": critical,
    });
    Ok(vec![json_artifact(
        "detectability.json",
        cfg.metadata_json("detectability"),
        &body,
    )?])
}

pub fn ingest(cfg: &ExperimentConfig, input: &Path, exec: Execution) -> CliResult<Vec<Artifact>> {
    let file = std::fs::File::open(input)?;
    let report = ingest_trace(cfg, file, exec)?;
    Ok(vec![
        csv_artifact("ingest.csv", &cfg.metadata_line("ingest"), &report.rows)?,
        json_artifact("ingest_report.json", cfg.metadata_json("ingest"), &report)?,
    ])
}
