//! State paths, their duration histograms, exact probabilities and types.

use serde::{Deserialize, Serialize};

use crate::combinatorics::count_sequences;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

/// Largest number of sequences [`enumerate_sequences`] will produce.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub state: State,
    pub duration: usize,
    /// Set on the last phase only: it is still running at the end of the path.
    pub censored: bool,
}

/// A state path `s^t`, stored as its phases.
///
/// Phases alternate starting with state 1, every duration lies in `1..=Δ`, and
/// the final phase is the censored one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSequence {
    phases: Vec<Phase>,
    delta: usize,
    total_length: usize,
}

impl PhaseSequence {
    /// Builds the path whose phases have the given durations, the first phase
    /// being in state 1.
    pub fn from_durations(durations: &[usize], delta: usize) -> Result<Self> {
        let mut state = State::One;
        let phases = durations
            .iter()
            .enumerate()
            .map(|(i, &duration)| {
                let p = Phase {
                    state,
                    duration,
                    censored: i + 1 == durations.len(),
                };
                state = state.other();
                p
            })
            .collect();
        Self::new(phases, delta)
    }

    /// Splits a per-sample state string into phases: each phase is the maximal
    /// run of equal states.
    pub fn from_states(states: &[State], delta: usize) -> Result<Self> {
        let mut durations = Vec::new();
        let mut prev = None;
        for &s in states {
            if prev == Some(s) {
                *durations.last_mut().expect("run started") += 1;
            } else {
                if prev.is_none() && s != State::One {
                    return Err(Error::InfeasibleSequence("the first state must be 1".into()));
                }
                durations.push(1);
                prev = Some(s);
            }
        }
        Self::from_durations(&durations, delta)
    }

    pub fn new(phases: Vec<Phase>, delta: usize) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InfeasibleSequence("empty sequence".into()));
        }
        let mut expected = State::One;
        for (i, p) in phases.iter().enumerate() {
            if p.state != expected {
                return Err(Error::InfeasibleSequence(format!(
                    "phase {i} has state {}, expected {}",
                    p.state.number(),
                    expected.number()
                )));
            }
            if p.duration == 0 || p.duration > delta {
                return Err(Error::InfeasibleSequence(format!(
                    "phase {i} has duration {} outside [1, {delta}]",
                    p.duration
                )));
            }
            if p.censored && i + 1 != phases.len() {
                return Err(Error::InfeasibleSequence(format!("phase {i} is censored but not last")));
            }
            expected = expected.other();
        }
        let total_length = phases.iter().map(|p| p.duration).sum();
        Ok(PhaseSequence {
            phases,
            delta,
            total_length,
        })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn total_length(&self) -> usize {
        self.total_length
    }

    pub fn last(&self) -> &Phase {
        self.phases.last().expect("nonempty by construction")
    }

    /// Per-sample states `s_1, ..., s_t`.
    pub fn states(&self) -> Vec<State> {
        self.phases
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.state, p.duration))
            .collect()
    }

    /// Switching times `T_1 < T_2 < ...`: the last sample index of every phase.
    pub fn switching_times(&self) -> Vec<usize> {
        self.phases
            .iter()
            .scan(0, |acc, p| {
                *acc += p.duration;
                Some(*acc)
            })
            .collect()
    }
}

/// Phase-duration histograms and occupation times of a path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceStats {
    /// `counts[m][d-1]`: number of state-`m+1` phases of duration `d`,
    /// the censored last phase counted at its observed length.
    pub counts: [Vec<u64>; 2],
    /// Samples spent in state 1 and state 2.
    pub occupation: [usize; 2],
    /// Number of state-1 and state-2 phases.
    pub phase_counts: [usize; 2],
    pub last_state: State,
    pub last_duration: usize,
}

impl SequenceStats {
    pub fn count(&self, state: State, d: usize) -> u64 {
        self.counts[state.index()][d - 1]
    }

    pub fn total_length(&self) -> usize {
        self.occupation[0] + self.occupation[1]
    }
}

pub fn compute_stats(seq: &PhaseSequence) -> SequenceStats {
    let mut counts = [vec![0u64; seq.delta], vec![0u64; seq.delta]];
    let mut occupation = [0usize; 2];
    let mut phase_counts = [0usize; 2];
    for p in seq.phases() {
        let m = p.state.index();
        counts[m][p.duration - 1] += 1;
        occupation[m] += p.duration;
        phase_counts[m] += 1;
    }
    SequenceStats {
        counts,
        occupation,
        phase_counts,
        last_state: seq.last().state,
        last_duration: seq.last().duration,
    }
}

fn check_compatible(params: &ModelParams, seq: &PhaseSequence) -> Result<()> {
    if seq.phases().iter().any(|p| p.duration > params.delta) {
        return Err(Error::InfeasibleSequence(format!(
            "sequence has a phase longer than delta = {}",
            params.delta
        )));
    }
    Ok(())
}

/// `log P(S^t = s^t)`: completed phases contribute `log p_{m,d}`, the running
/// last phase contributes `log p^+_{m,o}`. Returns `-inf` for impossible paths.
pub fn log_sequence_probability(params: &ModelParams, seq: &PhaseSequence) -> Result<f64> {
    check_compatible(params, seq)?;
    let (last, completed) = seq.phases().split_last().expect("nonempty");
    let mut log_p = params.pmf(last.state).tail(last.duration).ln();
    for p in completed {
        log_p += params.pmf(p.state).prob(p.duration).ln();
    }
    Ok(log_p)
}

pub fn sequence_probability(params: &ModelParams, seq: &PhaseSequence) -> Result<f64> {
    log_sequence_probability(params, seq).map(f64::exp)
}

/// `log P'(s^t)`: every phase, the last one included, contributes `log p_{m,d}`.
pub fn log_sequence_probability_prime(params: &ModelParams, seq: &PhaseSequence) -> Result<f64> {
    check_compatible(params, seq)?;
    Ok(seq
        .phases()
        .iter()
        .map(|p| params.pmf(p.state).prob(p.duration).ln())
        .sum())
}

pub fn sequence_probability_prime(params: &ModelParams, seq: &PhaseSequence) -> Result<f64> {
    log_sequence_probability_prime(params, seq).map(f64::exp)
}

/// Phase counts per sample, `ν[m][d-1] = N_{m,d} / t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeVector {
    pub nu: [Vec<f64>; 2],
}

impl TypeVector {
    pub fn new(nu1: Vec<f64>, nu2: Vec<f64>) -> Result<Self> {
        if nu1.len() != nu2.len() || nu1.is_empty() {
            return Err(Error::InvalidArgument("type rows must have equal, nonzero length".into()));
        }
        if nu1.iter().chain(&nu2).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("type entries must be nonnegative".into()));
        }
        Ok(TypeVector { nu: [nu1, nu2] })
    }

    pub fn delta(&self) -> usize {
        self.nu[0].len()
    }

    pub fn row(&self, state: State) -> &[f64] {
        &self.nu[state.index()]
    }

    /// `1ᵀν_m`: phases of state `m` per sample.
    pub fn mass(&self, state: State) -> f64 {
        self.row(state).iter().sum()
    }

    /// `Θ_m = qᵀν_m`: fraction of samples spent in state `m`.
    pub fn theta(&self, state: State) -> f64 {
        self.row(state).iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum()
    }

    /// Membership in the limiting type polytope: equal masses and
    /// `Θ_1 + Θ_2 = 1`, within `tol`.
    pub fn is_in_polytope(&self, tol: f64) -> bool {
        (self.mass(State::One) - self.mass(State::Two)).abs() <= tol
            && (self.theta(State::One) + self.theta(State::Two) - 1.0).abs() <= tol
    }
}

pub fn sequence_type(seq: &PhaseSequence) -> TypeVector {
    let stats = compute_stats(seq);
    let t = seq.total_length() as f64;
    let [c1, c2] = stats.counts;
    TypeVector {
        nu: [
            c1.into_iter().map(|c| c as f64 / t).collect(),
            c2.into_iter().map(|c| c as f64 / t).collect(),
        ],
    }
}

/// Iterator over every feasible path of length `t`, i.e. every composition of
/// `t` into parts of size at most Δ, in decreasing lexicographic order.
#[derive(Debug, Clone)]
pub struct SequenceIter {
    delta: usize,
    t: usize,
    parts: Vec<usize>,
    started: bool,
    done: bool,
}

impl SequenceIter {
    fn fill_greedy(&mut self) {
        let mut covered: usize = self.parts.iter().sum();
        while covered < self.t {
            let d = self.delta.min(self.t - covered);
            self.parts.push(d);
            covered += d;
        }
    }

    /// Advances `parts` to the next composition; false when exhausted.
    fn advance(&mut self) -> bool {
        // everything after the last part > 1 is all ones and cannot shrink
        let Some(i) = self.parts.iter().rposition(|&p| p > 1) else {
            return false;
        };
        self.parts.truncate(i + 1);
        self.parts[i] -= 1;
        self.fill_greedy();
        true
    }

    /// Current composition as phase durations, without building a sequence.
    pub fn next_durations(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_greedy();
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(&self.parts)
    }
}

impl Iterator for SequenceIter {
    type Item = PhaseSequence;

    fn next(&mut self) -> Option<PhaseSequence> {
        let delta = self.delta;
        self.next_durations()
            .map(|d| PhaseSequence::from_durations(d, delta).expect("compositions are feasible"))
    }
}

/// All feasible paths of length `t` (strictly positive pmfs assumed).
///
/// Fails with [`Error::GuardExceeded`] when `C_t > ENUMERATION_LIMIT`.
pub fn enumerate_sequences(delta: usize, t: usize) -> Result<SequenceIter> {
    enumerate_sequences_with_limit(delta, t, ENUMERATION_LIMIT)
}

pub fn enumerate_sequences_with_limit(delta: usize, t: usize, limit: u64) -> Result<SequenceIter> {
    if delta == 0 || t == 0 {
        return Err(Error::InvalidArgument("delta and t must be positive".into()));
    }
    let count = count_sequences(delta, t)?;
    if count.exact > limit.into() {
        return Err(Error::GuardExceeded {
            t,
            count: count.exact.to_string(),
            limit,
        });
    }
    Ok(SequenceIter {
        delta,
        t,
        parts: Vec::with_capacity(t),
        started: false,
        done: false,
    })
}
