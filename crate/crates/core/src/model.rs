//! The two-state random-duration signal model.
//!
//! Under the alternative the hidden state starts in state 1 and alternates;
//! the duration of every state-`m` phase is an independent draw from the pmf
//! `p_m` on `1..=Δ`. Samples are `N(μ0 + μ_{S_k}, σ²)` given the path, and
//! `N(μ0, σ²)` i.i.d. under the null.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::PhaseSequence;

const PMF_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    One,
    Two,
}

impl State {
    /// 0 for state 1, 1 for state 2.
    pub fn index(self) -> usize {
        match self {
            State::One => 0,
            State::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> State {
        match self {
            State::One => State::Two,
            State::Two => State::One,
        }
    }

    pub fn from_number(n: u8) -> Option<State> {
        match n {
            1 => Some(State::One),
            2 => Some(State::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Noise only.
    Null,
    /// Noise plus the switching signal.
    Alternative,
}

/// Phase-duration pmf on `1..=Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DurationPmf {
    probs: Vec<f64>,
    /// `tails[d-1] = p_d + ... + p_Δ`
    tails: Vec<f64>,
    cdf: Vec<f64>,
}

impl DurationPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParams("duration pmf must have at least one entry".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidParams(format!("pmf entry {bad} is not a nonnegative number")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidParams(format!("pmf sums to {sum}, expected 1")));
        }
        let mut tails = vec![0.0; probs.len()];
        let mut acc = 0.0;
        for (d, p) in probs.iter().enumerate().rev() {
            acc += p;
            tails[d] = acc;
        }
        let cdf = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(DurationPmf { probs, tails, cdf })
    }

    pub fn uniform(delta: usize) -> Self {
        assert!(delta >= 1, "duration spread must be positive");
        let p = 1.0 / delta as f64;
        let mut probs = vec![p; delta];
        // absorb rounding so the entries sum to one exactly
        let head: f64 = probs[..delta - 1].iter().sum();
        probs[delta - 1] = 1.0 - head;
        DurationPmf::new(probs).expect("uniform pmf is valid")
    }

    /// Δ, the largest possible duration.
    pub fn delta(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p_d` for `d` in `1..=Δ`.
    pub fn prob(&self, d: usize) -> f64 {
        self.probs[d - 1]
    }

    /// Tail sums `p_d^+ = p_d + ... + p_Δ`, indexed from `d = 1`.
    pub fn tails(&self) -> &[f64] {
        &self.tails
    }

    pub fn tail(&self, d: usize) -> f64 {
        self.tails[d - 1]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean duration `qᵀp` with `q = (1, ..., Δ)`.
    pub fn mean_duration(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Inverse-CDF draw of a duration in `1..=Δ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        if idx < self.probs.len() {
            idx + 1
        } else {
            // u landed above a cdf that rounds to slightly below one
            self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) + 1
        }
    }
}

impl TryFrom<Vec<f64>> for DurationPmf {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        DurationPmf::new(probs)
    }
}

impl From<DurationPmf> for Vec<f64> {
    fn from(p: DurationPmf) -> Self {
        p.probs
    }
}

/// A complete problem instance.
///
/// `μ2 ≥ μ1 ≥ 0` is required; equality is accepted so that degenerate
/// instances (identical hypotheses, constant signal) can be expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: usize,
    pub p1: DurationPmf,
    pub p2: DurationPmf,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    /// Baseline offset present under both hypotheses.
    #[serde(default)]
    pub mu0: f64,
}

impl ModelParams {
    pub fn new(p1: DurationPmf, p2: DurationPmf, mu1: f64, mu2: f64, sigma: f64, mu0: f64) -> Result<Self> {
        let params = ModelParams {
            delta: p1.delta(),
            p1,
            p2,
            mu1,
            mu2,
            sigma,
            mu0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Both states with the uniform duration pmf on `1..=delta`.
    pub fn uniform(delta: usize, mu1: f64, mu2: f64, sigma: f64) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidParams("delta must be at least 1".into()));
        }
        Self::new(DurationPmf::uniform(delta), DurationPmf::uniform(delta), mu1, mu2, sigma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::InvalidParams("delta must be at least 1".into()));
        }
        if self.p1.delta() != self.delta || self.p2.delta() != self.delta {
            return Err(Error::InvalidParams(format!(
                "pmf lengths ({}, {}) must both equal delta = {}",
                self.p1.delta(),
                self.p2.delta(),
                self.delta
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.mu0.is_finite() && self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::InvalidParams("signal levels must be finite".into()));
        }
        if self.mu1 < 0.0 || self.mu2 < self.mu1 {
            return Err(Error::InvalidParams(format!(
                "signal levels must satisfy mu2 >= mu1 >= 0, got mu1 = {}, mu2 = {}",
                self.mu1, self.mu2
            )));
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let mut p = self.clone();
        p.sigma = sigma;
        p.validate()?;
        Ok(p)
    }

    pub fn pmf(&self, state: State) -> &DurationPmf {
        match state {
            State::One => &self.p1,
            State::Two => &self.p2,
        }
    }

    pub fn level(&self, state: State) -> f64 {
        match state {
            State::One => self.mu1,
            State::Two => self.mu2,
        }
    }

    /// Smallest duration probability over both states.
    pub fn p_min(&self) -> f64 {
        self.p1.min_prob().min(self.p2.min_prob())
    }
}

/// Draws a state path of length `t` starting in state 1.
///
/// The last phase is cut at `t` and marked censored.
pub fn sample_phase_sequence<R: Rng + ?Sized>(params: &ModelParams, t: usize, rng: &mut R) -> Result<PhaseSequence> {
    if t == 0 {
        return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
    }
    let mut durations = Vec::new();
    let mut state = State::One;
    let mut covered = 0;
    while covered < t {
        let d = params.pmf(state).sample(rng).min(t - covered);
        durations.push(d);
        covered += d;
        state = state.other();
    }
    PhaseSequence::from_durations(&durations, params.delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub x: Vec<f64>,
    /// Hidden path, present under the alternative only.
    pub truth: Option<PhaseSequence>,
}

pub fn sample_observations<R: Rng + ?Sized>(
    params: &ModelParams,
    hypothesis: Hypothesis,
    t: usize,
    rng: &mut R,
) -> Result<Observations> {
    if t == 0 {
        return Err(Error::InvalidArgument("observation length must be at least 1".into()));
    }
    let mut x = Vec::with_capacity(t);
    let truth = fill_observations(params, hypothesis, t, rng, &mut x);
    Ok(Observations { x, truth })
}

/// Appends `t` observations to `out`; returns the hidden path under the
/// alternative. Allocation-light variant used by the batch kernels.
pub(crate) fn fill_observations<R: Rng + ?Sized>(
    params: &ModelParams,
    hypothesis: Hypothesis,
    t: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Option<PhaseSequence> {
    let noise = Normal::new(0.0, params.sigma).expect("sigma validated positive");
    match hypothesis {
        Hypothesis::Null => {
            out.extend((0..t).map(|_| params.mu0 + noise.sample(rng)));
            None
        }
        Hypothesis::Alternative => {
            let path = sample_phase_sequence(params, t, rng).expect("t >= 1");
            for phase in path.phases() {
                let level = params.mu0 + params.level(phase.state);
                out.extend((0..phase.duration).map(|_| level + noise.sample(rng)));
            }
            Some(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, DOMAIN_SIMULATE};

    #[test]
    fn pmf_rejects_bad_input() {
        assert!(DurationPmf::new(vec![]).is_err());
        assert!(DurationPmf::new(vec![0.5, 0.6]).is_err());
        assert!(DurationPmf::new(vec![1.2, -0.2]).is_err());
        assert!(DurationPmf::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn pmf_tails() {
        let p = DurationPmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.tails(), &[1.0, 0.8, 0.5]);
        assert_eq!(p.tail(3), p.prob(3));
        assert!((p.mean_duration() - 2.3).abs() < 1e-15);
        assert!(p.is_strictly_positive());
        assert!(!DurationPmf::new(vec![0.0, 1.0]).unwrap().is_strictly_positive());
    }

    #[test]
    fn uniform_pmf_sums_to_one() {
        for delta in 1..20 {
            let p = DurationPmf::uniform(delta);
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn params_invariants() {
        assert!(ModelParams::uniform(2, 1.0, 2.0, 0.0).is_err());
        assert!(ModelParams::uniform(2, 3.0, 2.0, 1.0).is_err());
        assert!(ModelParams::uniform(2, -1.0, 2.0, 1.0).is_err());
        assert!(ModelParams::uniform(0, 1.0, 2.0, 1.0).is_err());
        assert!(ModelParams::new(DurationPmf::uniform(2), DurationPmf::uniform(3), 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::uniform(3, 2.0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn zero_probability_durations_never_drawn() {
        let p = DurationPmf::new(vec![0.0, 1.0, 0.0]).unwrap();
        let mut rng = stream_rng(1, DOMAIN_SIMULATE, 0);
        assert!((0..1000).all(|_| p.sample(&mut rng) == 2));
    }

    #[test]
    fn delta_one_alternates_every_sample() {
        let params = ModelParams::uniform(1, 3.0, 5.0, 1.0).unwrap();
        let mut rng = stream_rng(3, DOMAIN_SIMULATE, 0);
        let seq = sample_phase_sequence(&params, 7, &mut rng).unwrap();
        let states: Vec<u8> = seq.states().iter().map(|s| s.number()).collect();
        assert_eq!(states, vec![1, 2, 1, 2, 1, 2, 1]);
        assert!(seq.phases().iter().all(|p| p.duration == 1));
    }

    #[test]
    fn first_phase_is_state_one() {
        let params = ModelParams::uniform(4, 0.0, 1.0, 1.0).unwrap();
        let mut rng = stream_rng(5, DOMAIN_SIMULATE, 0);
        for _ in 0..2000 {
            let seq = sample_phase_sequence(&params, 13, &mut rng).unwrap();
            assert_eq!(seq.phases()[0].state, State::One);
            assert_eq!(seq.total_length(), 13);
        }
    }

    #[test]
    fn first_phase_duration_frequency() {
        let params = ModelParams::uniform(2, 0.0, 1.0, 1.0).unwrap();
        let mut rng = stream_rng(11, DOMAIN_SIMULATE, 0);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_phase_sequence(&params, 5, &mut rng).unwrap().phases()[0].duration == 1)
            .count();
        let freq = ones as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * se, "freq = {freq}");
    }

    #[test]
    fn null_moments() {
        let params = ModelParams::uniform(3, 2.0, 5.0, 10.0).unwrap();
        let mut rng = stream_rng(21, DOMAIN_SIMULATE, 0);
        let n = 100_000;
        let obs = sample_observations(&params, Hypothesis::Null, n, &mut rng).unwrap();
        assert!(obs.truth.is_none());
        let mean = obs.x.iter().sum::<f64>() / n as f64;
        let var = obs.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * 10.0 / (n as f64).sqrt(), "mean = {mean}");
        // Var of the sample variance for a Gaussian is 2σ⁴/(n-1)
        let var_se = (2.0 * 1e4 / (n - 1) as f64).sqrt();
        assert!((var - 100.0).abs() <= 3.0 * var_se, "var = {var}");
    }

    #[test]
    fn zero_noise_alternation() {
        let params = ModelParams::uniform(1, 3.0, 5.0, 1e-12).unwrap();
        let mut rng = stream_rng(2, DOMAIN_SIMULATE, 0);
        let obs = sample_observations(&params, Hypothesis::Alternative, 6, &mut rng).unwrap();
        for (k, x) in obs.x.iter().enumerate() {
            let expected = if k % 2 == 0 { 3.0 } else { 5.0 };
            assert!((x - expected).abs() < 1e-9);
        }
        assert_eq!(obs.truth.unwrap().total_length(), 6);
    }

    #[test]
    fn baseline_offset_shifts_both_hypotheses() {
        let mut params = ModelParams::uniform(10, 66.0, 2200.0, 1e-9).unwrap();
        params.mu0 = 90.0;
        let mut rng = stream_rng(4, DOMAIN_SIMULATE, 0);
        let h0 = sample_observations(&params, Hypothesis::Null, 5, &mut rng).unwrap();
        assert!(h0.x.iter().all(|x| (x - 90.0).abs() < 1e-6));
        let h1 = sample_observations(&params, Hypothesis::Alternative, 30, &mut rng).unwrap();
        let states = h1.truth.unwrap().states();
        for (x, s) in h1.x.iter().zip(states) {
            let level = if s == State::One { 156.0 } else { 2290.0 };
            assert!((x - level).abs() < 1e-6);
        }
    }
}
