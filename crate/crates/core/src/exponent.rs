//! Error exponent of the optimal test: simulation estimate, the guaranteed
//! bound `μ1²/(2σ²)`, the detectability condition for `μ1 = 0`, and the
//! large-deviations lower bound over the type polytope.
//!
//! # Lower bound
//!
//! For a type `ν` with `θ2 = qᵀν2` and a scalar `ξ` the objective is
//!
//! ```text
//! G(ν, ξ) = D(ν1‖p1) + D(ν2‖p2) + θ2/(2σ²) (ξ/θ2 − (μ2 − μ1))² + θ2 μ1 (μ2 − μ1)/σ²
//! ```
//!
//! subject to `H(ν1) + H(ν2) ≥ ξ² / (2 θ2 σ²)`. For fixed `ν` the best `ξ` is
//! `θ2 (μ2 − μ1)` when that is feasible and the constraint boundary
//! `σ √(2 θ2 H(ν))` otherwise, so the bound reduces to a minimization over `ν`
//! alone, which is done by random search plus an optional coordinate descent.
//! The minimum `η` gives `ζ ≥ η + μ1²/(2σ²)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{entropy, kl_divergence, EntropyConvention};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lrt::{run_trajectory_into, InitMode, TransitionStructure};
use crate::model::{fill_observations, Hypothesis, ModelParams, State};
use crate::montecarlo::mean_and_se;
use crate::rng::{stream_rng, DOMAIN_NULL, DOMAIN_TYPE_SEARCH};
use crate::sequence::TypeVector;

/// Types with less state-2 occupation than this are treated as infeasible.
pub const THETA2_FLOOR: f64 = 1e-9;

/// Samples handled by one seeded stream of the random search.
const SEARCH_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Mean of `-(1/T) log L_T` under the null (nats per sample).
    pub zeta_hat: f64,
    pub std_error: f64,
    pub t_used: usize,
    pub n_runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_run_values: Option<Vec<f64>>,
}

/// Estimates the error exponent as the average of `-(1/T) log L_T` over
/// `n_runs` null streams.
///
/// Run `j` uses the same stream as row `j` of a null
/// [`run_batch`](crate::montecarlo::run_batch) with the same seed.
pub fn estimate_error_exponent(
    params: &ModelParams,
    horizon: usize,
    n_runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<ExponentEstimate> {
    if horizon == 0 || n_runs == 0 {
        return Err(Error::InvalidArgument("horizon and run count must be positive".into()));
    }
    params.validate()?;
    let structure = TransitionStructure::new(params);
    let values = exec
        .map_range(n_runs, |j| {
            let mut rng = stream_rng(seed, DOMAIN_NULL, j as u64);
            let mut x = Vec::with_capacity(horizon);
            fill_observations(params, Hypothesis::Null, horizon, &mut rng, &mut x);
            let mut out = Vec::with_capacity(horizon);
            run_trajectory_into(params, &structure, &x, InitMode::ModelConsistent, 1, &mut out)?;
            Ok(-out[horizon - 1] / horizon as f64)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let (zeta_hat, std_error) = mean_and_se(&values);
    Ok(ExponentEstimate {
        zeta_hat,
        std_error,
        t_used: horizon,
        n_runs,
        per_run_values: Some(values),
    })
}

/// `μ1² / (2σ²)`: the exponent guaranteed by the always-present level `μ1`.
pub fn guaranteed_bound(params: &ModelParams) -> f64 {
    params.mu1 * params.mu1 / (2.0 * params.sigma * params.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detectability {
    /// `H(p1) + H(p2)`.
    pub lhs: f64,
    /// Long-run SNR `qᵀp2 / (qᵀp1 + qᵀp2) · μ²/(2σ²)`.
    pub rhs: f64,
    /// The lower bound vanishes: the duration entropy dominates the SNR.
    pub undetectable: bool,
}

/// Entropy-versus-SNR condition for `μ1 = 0`, `μ = μ2`.
pub fn detectability(params: &ModelParams) -> Result<Detectability> {
    if params.mu1 != 0.0 {
        return Err(Error::InvalidArgument(
            "detectability condition requires mu1 = 0; use solve_bound for the general case".into(),
        ));
    }
    let conv = EntropyConvention::Normalized;
    let lhs = entropy(params.p1.probs(), conv)? + entropy(params.p2.probs(), conv)?;
    let (m1, m2) = (params.p1.mean_duration(), params.p2.mean_duration());
    let rhs = m2 / (m1 + m2) * params.mu2 * params.mu2 / (2.0 * params.sigma * params.sigma);
    Ok(Detectability {
        lhs,
        rhs,
        undetectable: lhs >= rhs,
    })
}

/// Noise level at which uniform durations on `1..=Δ` become undetectable:
/// `μ / (2 √(2 log Δ))`.
pub fn critical_sigma_uniform(delta: usize, mu: f64) -> Result<f64> {
    if delta < 2 {
        return Err(Error::InvalidArgument(
            "delta = 1 has no finite threshold: the process is always detectable".into(),
        ));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    Ok(mu / (2.0 * (2.0 * (delta as f64).ln()).sqrt()))
}

/// Uniform point of the `Δ`-simplex via sorted uniform spacings.
fn sample_simplex<R: Rng + ?Sized>(delta: usize, rng: &mut R) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..delta - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut w = Vec::with_capacity(delta);
    let mut prev = 0.0;
    for c in cuts {
        w.push(c - prev);
        prev = c;
    }
    w.push(1.0 - prev);
    w
}

/// Maps two simplex points to the polytope: `ν_m = c · w_m` with the single
/// scale `c = 1 / (qᵀw1 + qᵀw2)`.
pub fn type_from_weights(w1: &[f64], w2: &[f64]) -> TypeVector {
    let qdot = |w: &[f64]| w.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum::<f64>();
    let c = 1.0 / (qdot(w1) + qdot(w2));
    TypeVector {
        nu: [w1.iter().map(|v| c * v).collect(), w2.iter().map(|v| c * v).collect()],
    }
}

/// Random point of the type polytope with equal masses by construction.
pub fn sample_type<R: Rng + ?Sized>(delta: usize, rng: &mut R) -> TypeVector {
    let w1 = sample_simplex(delta, rng);
    let w2 = sample_simplex(delta, rng);
    type_from_weights(&w1, &w2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub feasible: bool,
}

/// Entropy sum and relative-entropy sum of a type under a convention.
fn type_information(nu: &TypeVector, params: &ModelParams, convention: EntropyConvention) -> Result<(f64, f64)> {
    let mut h = 0.0;
    let mut d = 0.0;
    for s in [State::One, State::Two] {
        let row = nu.row(s);
        let mass = nu.mass(s);
        if mass <= 0.0 {
            continue;
        }
        let weight = match convention {
            EntropyConvention::Normalized => 1.0,
            EntropyConvention::MassWeighted => mass,
        };
        h += weight * entropy(row, EntropyConvention::Normalized)?;
        d += weight * kl_divergence(row, params.pmf(s))?;
    }
    Ok((h, d))
}

/// `G(ν, ξ)` and whether `(ν, ξ)` satisfies the entropy constraint.
pub fn bound_objective(
    nu: &TypeVector,
    xi: f64,
    params: &ModelParams,
    convention: EntropyConvention,
) -> Result<ObjectiveValue> {
    if nu.delta() != params.delta {
        return Err(Error::InvalidArgument("type and model disagree on delta".into()));
    }
    let theta2 = nu.theta(State::Two);
    if theta2 < THETA2_FLOOR {
        return Ok(ObjectiveValue {
            value: f64::INFINITY,
            feasible: false,
        });
    }
    let (h, d) = type_information(nu, params, convention)?;
    let s2 = params.sigma * params.sigma;
    let gap = params.mu2 - params.mu1;
    let value = d + theta2 / (2.0 * s2) * (xi / theta2 - gap).powi(2) + theta2 * params.mu1 * gap / s2;
    Ok(ObjectiveValue {
        value,
        feasible: h >= xi * xi / (2.0 * theta2 * s2),
    })
}

/// Objective minimized over `ξ` in closed form; `(value, ξ*)`.
fn reduced_objective(nu: &TypeVector, params: &ModelParams, convention: EntropyConvention) -> Result<(f64, f64)> {
    let theta2 = nu.theta(State::Two);
    if theta2.is_nan() || theta2 < THETA2_FLOOR {
        return Ok((f64::INFINITY, f64::NAN));
    }
    let (h, d) = type_information(nu, params, convention)?;
    if !d.is_finite() {
        return Ok((f64::INFINITY, f64::NAN));
    }
    let gap = params.mu2 - params.mu1;
    let boundary = params.sigma * (2.0 * theta2 * h).sqrt();
    let xi = (theta2 * gap).min(boundary);
    let s2 = params.sigma * params.sigma;
    let value = d + theta2 / (2.0 * s2) * (xi / theta2 - gap).powi(2) + theta2 * params.mu1 * gap / s2;
    Ok((value, xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Number of random types evaluated.
    pub budget: usize,
    pub convention: EntropyConvention,
    pub refine: bool,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            budget: 100_000,
            convention: EntropyConvention::Normalized,
            refine: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub eta_lower: f64,
    /// `eta_lower + μ1²/(2σ²)`.
    pub zeta_lower: f64,
    pub argmin_nu: TypeVector,
    pub argmin_xi: f64,
    pub feasible_points_evaluated: usize,
    pub mode: EntropyConvention,
    /// The stationary point `ν ∝ p` already attains zero (`μ1 = 0` only).
    pub vanishing: bool,
    /// No feasible type was found; only the guaranteed part is reported.
    pub no_feasible_point: bool,
    /// Best value after `n` samples, at powers of two and at the budget.
    pub trace: Vec<(usize, f64)>,
}

/// The point `ν_m = p_m / (qᵀp1 + qᵀp2)` where both relative entropies vanish.
pub fn stationary_type(params: &ModelParams) -> TypeVector {
    type_from_weights(params.p1.probs(), params.p2.probs())
}

/// Lower bound on the error exponent by random search over types.
pub fn solve_bound(params: &ModelParams, config: &BoundConfig, exec: Execution) -> Result<BoundResult> {
    params.validate()?;
    if config.budget == 0 {
        return Err(Error::InvalidArgument("search budget must be positive".into()));
    }
    let guaranteed = guaranteed_bound(params);

    if params.mu1 == 0.0 {
        let nu = stationary_type(params);
        let vanishes = match config.convention {
            EntropyConvention::Normalized => detectability(params)?.undetectable,
            EntropyConvention::MassWeighted => {
                let (h, _) = type_information(&nu, params, config.convention)?;
                let theta2 = nu.theta(State::Two);
                h >= theta2 * params.mu2 * params.mu2 / (2.0 * params.sigma * params.sigma)
            }
        };
        if vanishes {
            let xi = nu.theta(State::Two) * params.mu2;
            return Ok(BoundResult {
                eta_lower: 0.0,
                zeta_lower: guaranteed,
                argmin_nu: nu,
                argmin_xi: xi,
                feasible_points_evaluated: 0,
                mode: config.convention,
                vanishing: true,
                no_feasible_point: false,
                trace: vec![(0, 0.0)],
            });
        }
    }

    let blocks = config.budget.div_ceil(SEARCH_BLOCK);
    let per_block = exec.map_range(blocks, |b| -> Result<Vec<f64>> {
        let mut rng = stream_rng(config.seed, DOMAIN_TYPE_SEARCH, b as u64);
        let n = SEARCH_BLOCK.min(config.budget - b * SEARCH_BLOCK);
        (0..n)
            .map(|_| {
                let nu = sample_type(params.delta, &mut rng);
                reduced_objective(&nu, params, config.convention).map(|v| v.0)
            })
            .collect()
    });

    // global order of samples is (block, index); first minimum wins ties
    let mut best = (f64::INFINITY, usize::MAX);
    let mut feasible = 0usize;
    let mut trace = Vec::new();
    let mut next_checkpoint = 1usize;
    let mut seen = 0usize;
    for (b, values) in per_block.into_iter().enumerate() {
        for (i, v) in values?.into_iter().enumerate() {
            if v.is_finite() {
                feasible += 1;
                if v < best.0 {
                    best = (v, b * SEARCH_BLOCK + i);
                }
            }
            seen += 1;
            if seen == next_checkpoint || seen == config.budget {
                trace.push((seen, best.0));
                next_checkpoint *= 2;
            }
        }
    }

    if best.1 == usize::MAX {
        return Ok(BoundResult {
            eta_lower: 0.0,
            zeta_lower: guaranteed,
            argmin_nu: stationary_type(params),
            argmin_xi: f64::NAN,
            feasible_points_evaluated: 0,
            mode: config.convention,
            vanishing: false,
            no_feasible_point: true,
            trace,
        });
    }

    // replay the winning sample to recover its weights
    let (block, offset) = (best.1 / SEARCH_BLOCK, best.1 % SEARCH_BLOCK);
    let mut rng = stream_rng(config.seed, DOMAIN_TYPE_SEARCH, block as u64);
    let mut w = (Vec::new(), Vec::new());
    for _ in 0..=offset {
        w = (sample_simplex(params.delta, &mut rng), sample_simplex(params.delta, &mut rng));
    }
    let (mut w1, mut w2) = w;
    let mut value = best.0;
    if config.refine {
        value = refine(params, config.convention, &mut w1, &mut w2, value)?;
        trace.push((config.budget, value));
    }
    let nu = type_from_weights(&w1, &w2);
    let (value, xi) = reduced_objective(&nu, params, config.convention)?;
    let eta = value.max(0.0);
    Ok(BoundResult {
        eta_lower: eta,
        zeta_lower: eta + guaranteed,
        argmin_nu: nu,
        argmin_xi: xi,
        feasible_points_evaluated: feasible,
        mode: config.convention,
        vanishing: false,
        no_feasible_point: false,
        trace,
    })
}

/// Coordinate descent in simplex weights with steps `1e-3 … 1e-6`. Each move
/// adds `±step` to one weight, clips at zero and renormalizes, which keeps
/// the type inside the polytope.
fn refine(
    params: &ModelParams,
    convention: EntropyConvention,
    w1: &mut [f64],
    w2: &mut [f64],
    mut best: f64,
) -> Result<f64> {
    const MAX_SWEEPS: usize = 10_000;
    let delta = params.delta;
    let perturb = |w: &[f64], d: usize, step: f64| -> Option<Vec<f64>> {
        let mut c = w.to_vec();
        c[d] = (c[d] + step).max(0.0);
        let s: f64 = c.iter().sum();
        (s > 0.0).then(|| c.iter().map(|v| v / s).collect())
    };
    for step in [1e-3, 1e-4, 1e-5, 1e-6] {
        for _ in 0..MAX_SWEEPS {
            let mut improved = false;
            for m in 0..2 {
                for d in 0..delta {
                    for sign in [1.0, -1.0] {
                        let cur = if m == 0 { &*w1 } else { &*w2 };
                        let Some(cand) = perturb(cur, d, sign * step) else {
                            continue;
                        };
                        let nu = if m == 0 {
                            type_from_weights(&cand, w2)
                        } else {
                            type_from_weights(w1, &cand)
                        };
                        let (v, _) = reduced_objective(&nu, params, convention)?;
                        if v < best {
                            best = v;
                            if m == 0 {
                                w1.copy_from_slice(&cand);
                            } else {
                                w2.copy_from_slice(&cand);
                            }
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(best)
}
