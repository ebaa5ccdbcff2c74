//! Exact likelihood ratio via a `2Δ`-dimensional linear recursion.
//!
//! The state vector holds, for each state `m` and last-phase length `d`, the
//! summed contribution of all paths that currently sit in state `m` with a
//! running phase of length `d`. One sample multiplies it by `D_k·M_0`, where
//! `M_0` shifts within each block (phase continues) and moves mass weighted by
//! `p_{m,d}` into the first slot of the other block (phase completes), and
//! `D_k` scales block `m` by `exp(f_m(x_k))`. The likelihood ratio is the
//! inner product with the tail sums `p^+`.
//!
//! The vector is kept at unit 1-norm; the discarded norms accumulate in
//! `log_scale`.

use serde::{Deserialize, Serialize};

use crate::combinatorics::log_sum_exp;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::sequence::{enumerate_sequences, log_sequence_probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Only paths starting in state 1 contribute.
    #[default]
    ModelConsistent,
    /// Both blocks are seeded with the first sample, admitting paths that
    /// start in state 2 as well.
    PaperLiteral,
}

/// Per-sample log-likelihood ratio of state `m` against the null, for a
/// baseline-corrected sample `y`: `(μ_m y - μ_m²/2) / σ²`.
pub fn sample_llr(y: f64, state: State, params: &ModelParams) -> f64 {
    let mu = params.level(state);
    (mu * y - 0.5 * mu * mu) / (params.sigma * params.sigma)
}

/// The constant part of the recursion: duration pmfs and tail sums.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStructure {
    delta: usize,
    p1: Vec<f64>,
    p2: Vec<f64>,
    /// `(p_1^+, p_2^+)`, length `2Δ`.
    p_plus: Vec<f64>,
}

impl TransitionStructure {
    pub fn new(params: &ModelParams) -> Self {
        let mut p_plus = params.p1.tails().to_vec();
        p_plus.extend_from_slice(params.p2.tails());
        TransitionStructure {
            delta: params.delta,
            p1: params.p1.probs().to_vec(),
            p2: params.p2.probs().to_vec(),
            p_plus,
        }
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn p_plus(&self) -> &[f64] {
        &self.p_plus
    }

    /// Dense `2Δ × 2Δ` copy of `M_0`, row-major. Reference use only.
    pub fn dense_m0(&self) -> Vec<Vec<f64>> {
        let n = self.delta;
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for d in 1..n {
            m[d][d - 1] = 1.0;
            m[n + d][n + d - 1] = 1.0;
        }
        for d in 0..n {
            m[0][n + d] = self.p2[d];
            m[n][d] = self.p1[d];
        }
        m
    }

    /// Structural nonzeros of `M_0`: two shifts and two rank-one rows.
    pub fn nonzero_count(&self) -> usize {
        2 * (self.delta - 1) + 2 * self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtState {
    lambda: Vec<f64>,
    log_scale: f64,
    t: usize,
    mode: InitMode,
}

impl LrtState {
    /// State after the first (raw) sample `x1`.
    pub fn init(params: &ModelParams, x1: f64, mode: InitMode) -> Self {
        let n = params.delta;
        let y = x1 - params.mu0;
        let f1 = sample_llr(y, State::One, params);
        let mut lambda = vec![0.0; 2 * n];
        let log_scale = match mode {
            InitMode::ModelConsistent => {
                lambda[0] = 1.0;
                f1
            }
            InitMode::PaperLiteral => {
                let f2 = sample_llr(y, State::Two, params);
                let m = f1.max(f2);
                let (a, b) = ((f1 - m).exp(), (f2 - m).exp());
                lambda[0] = a / (a + b);
                lambda[n] = b / (a + b);
                m + (a + b).ln()
            }
        };
        LrtState {
            lambda,
            log_scale,
            t: 1,
            mode,
        }
    }

    /// Advances by one raw sample and renormalizes.
    pub fn step(&mut self, x: f64, structure: &TransitionStructure, params: &ModelParams) -> Result<()> {
        self.step_unnormalized(x, structure, params);
        self.renormalize()
    }

    /// Applies `D_k·M_0` without renormalizing; the common factor
    /// `exp(max(f1, f2))` still moves into `log_scale`.
    pub fn step_unnormalized(&mut self, x: f64, structure: &TransitionStructure, params: &ModelParams) {
        let n = structure.delta;
        let y = x - params.mu0;
        let f1 = sample_llr(y, State::One, params);
        let f2 = sample_llr(y, State::Two, params);
        let m = f1.max(f2);
        let (w1, w2) = ((f1 - m).exp(), (f2 - m).exp());

        let (b1, b2) = self.lambda.split_at_mut(n);
        let enter1: f64 = structure.p2.iter().zip(b2.iter()).map(|(p, l)| p * l).sum();
        let enter2: f64 = structure.p1.iter().zip(b1.iter()).map(|(p, l)| p * l).sum();
        b1.copy_within(0..n - 1, 1);
        b2.copy_within(0..n - 1, 1);
        b1[0] = enter1;
        b2[0] = enter2;
        b1.iter_mut().for_each(|v| *v *= w1);
        b2.iter_mut().for_each(|v| *v *= w2);

        self.log_scale += m;
        self.t += 1;
    }

    /// Rescales to unit 1-norm.
    pub fn renormalize(&mut self) -> Result<()> {
        let norm: f64 = self.lambda.iter().sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::VanishingState(self.t));
        }
        self.lambda.iter_mut().for_each(|v| *v /= norm);
        self.log_scale += norm.ln();
        Ok(())
    }

    /// `log L_t = log(p^+ᵀ Λ_t)`.
    pub fn log_likelihood_ratio(&self, structure: &TransitionStructure) -> f64 {
        let dot: f64 = structure.p_plus.iter().zip(&self.lambda).map(|(p, l)| p * l).sum();
        dot.ln() + self.log_scale
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn mode(&self) -> InitMode {
        self.mode
    }
}

/// `log L_t` for `t = 1..=x.len()`.
pub fn run_trajectory(params: &ModelParams, x: &[f64], mode: InitMode) -> Result<Vec<f64>> {
    let structure = TransitionStructure::new(params);
    let mut out = Vec::with_capacity(x.len());
    run_trajectory_into(params, &structure, x, mode, 1, &mut out)?;
    Ok(out)
}

/// Appends `log L_t` for every prefix of `x` to `out`, renormalizing every
/// `renorm_interval` samples (and always before a readout would overflow).
pub fn run_trajectory_into(
    params: &ModelParams,
    structure: &TransitionStructure,
    x: &[f64],
    mode: InitMode,
    renorm_interval: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let Some((&x1, rest)) = x.split_first() else {
        return Ok(());
    };
    let interval = renorm_interval.max(1);
    let mut state = LrtState::init(params, x1, mode);
    out.push(state.log_likelihood_ratio(structure));
    for (k, &xk) in rest.iter().enumerate() {
        state.step_unnormalized(xk, structure, params);
        if (k + 1) % interval == 0 {
            state.renormalize()?;
        }
        let llr = state.log_likelihood_ratio(structure);
        if llr.is_nan() || llr == f64::NEG_INFINITY {
            return Err(Error::VanishingState(state.t));
        }
        out.push(llr);
    }
    Ok(())
}

/// Brute-force `log L_t`: log-sum-exp over every feasible path of
/// `log P(s^t) + Σ_k f_{s_k}(y_k)`.
pub fn oracle_log_lrt(params: &ModelParams, x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty observation vector".into()));
    }
    let y: Vec<f64> = x.iter().map(|v| v - params.mu0).collect();
    let llr = [State::One, State::Two].map(|s| y.iter().map(|&v| sample_llr(v, s, params)).collect::<Vec<_>>());
    let mut terms = Vec::new();
    for seq in enumerate_sequences(params.delta, x.len())? {
        let mut term = log_sequence_probability(params, &seq)?;
        let mut k = 0;
        for p in seq.phases() {
            let row = &llr[p.state.index()];
            term += row[k..k + p.duration].iter().sum::<f64>();
            k += p.duration;
        }
        terms.push(term);
    }
    Ok(log_sum_exp(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_observations, Hypothesis};
    use crate::rng::{stream_rng, DOMAIN_SIMULATE};

    #[test]
    fn sample_llr_examples() {
        let params = ModelParams::uniform(2, 2.0, 4.0, 10.0).unwrap();
        assert_eq!(sample_llr(1.0, State::One, &params), 0.0);
        assert!((sample_llr(0.0, State::One, &params) + 0.02).abs() < 1e-15);
        let zero = ModelParams::uniform(2, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(sample_llr(3.7, State::Two, &zero), 0.0);
    }

    #[test]
    fn first_sample_readout() {
        let params = ModelParams::uniform(3, 1.0, 2.5, 0.7).unwrap();
        let structure = TransitionStructure::new(&params);
        let s = LrtState::init(&params, 0.4, InitMode::ModelConsistent);
        let f1 = sample_llr(0.4, State::One, &params);
        assert!((s.log_likelihood_ratio(&structure) - f1).abs() < 1e-14);
        assert!(s.lambda()[params.delta..].iter().all(|&v| v == 0.0));

        let same = ModelParams::uniform(3, 1.5, 1.5, 1.0).unwrap();
        let s = LrtState::init(&same, -0.3, InitMode::PaperLiteral);
        let n = same.delta;
        assert_eq!(s.lambda()[..n], s.lambda()[n..]);
    }

    #[test]
    fn matches_dense_reference() {
        let params = ModelParams::new(
            crate::DurationPmf::new(vec![0.1, 0.6, 0.3]).unwrap(),
            crate::DurationPmf::new(vec![0.5, 0.2, 0.3]).unwrap(),
            0.8,
            2.0,
            1.3,
            0.0,
        )
        .unwrap();
        let structure = TransitionStructure::new(&params);
        let m0 = structure.dense_m0();
        let nnz = m0.iter().flatten().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, structure.nonzero_count());

        let mut rng = stream_rng(17, DOMAIN_SIMULATE, 0);
        let x = sample_observations(&params, Hypothesis::Alternative, 25, &mut rng).unwrap().x;
        let mut state = LrtState::init(&params, x[0], InitMode::ModelConsistent);
        let mut dense: Vec<f64> = state.lambda().to_vec();
        let mut dense_log = state.log_scale();
        for &xk in &x[1..] {
            state.step(xk, &structure, &params).unwrap();
            let f = [sample_llr(xk, State::One, &params), sample_llr(xk, State::Two, &params)];
            let mut next = vec![0.0; dense.len()];
            for (i, row) in m0.iter().enumerate() {
                let scale = f[i / params.delta].exp();
                next[i] = scale * row.iter().zip(&dense).map(|(a, b)| a * b).sum::<f64>();
            }
            let norm: f64 = next.iter().sum();
            dense = next.iter().map(|v| v / norm).collect();
            dense_log += norm.ln();
            for (a, b) in state.lambda().iter().zip(&dense) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((state.log_scale() - dense_log).abs() < 1e-12 * dense_log.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_stays_normalized() {
        let params = ModelParams::uniform(4, 1.0, 3.0, 0.5).unwrap();
        let structure = TransitionStructure::new(&params);
        let mut rng = stream_rng(3, DOMAIN_SIMULATE, 0);
        let x = sample_observations(&params, Hypothesis::Null, 500, &mut rng).unwrap().x;
        let mut state = LrtState::init(&params, x[0], InitMode::ModelConsistent);
        for &xk in &x[1..] {
            state.step(xk, &structure, &params).unwrap();
            assert!((state.lambda().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(state.lambda().iter().all(|&v| v >= 0.0));
            assert!(state.log_likelihood_ratio(&structure).is_finite());
        }
    }

    #[test]
    fn identical_hypotheses_give_zero() {
        let params = ModelParams::uniform(3, 0.0, 0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin()).collect();
        let llr = run_trajectory(&params, &x, InitMode::ModelConsistent).unwrap();
        assert!(llr.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hand_enumerated_oracle() {
        // paths 112, 122, 121 with (P, τ2) = (1/2, 1), (1/4, 2), (1/4, 1)
        let params = ModelParams::uniform(2, 0.0, 1.0, 1.0).unwrap();
        let expected = (0.5 * (-0.5f64).exp() + 0.25 * (-1.0f64).exp() + 0.25 * (-0.5f64).exp()).ln();
        let oracle = oracle_log_lrt(&params, &[0.0, 0.0, 0.0]).unwrap();
        assert!((oracle - expected).abs() < 1e-14);
        let rec = run_trajectory(&params, &[0.0, 0.0, 0.0], InitMode::ModelConsistent).unwrap();
        assert!((rec[2] - expected).abs() < 1e-14);
    }

    #[test]
    fn oracle_guard_trips() {
        let params = ModelParams::uniform(3, 0.0, 1.0, 1.0).unwrap();
        let err = oracle_log_lrt(&params, &vec![0.0; 40]).unwrap_err();
        assert!(err.is_numeric_guard());
    }
}
