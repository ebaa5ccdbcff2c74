use std::collections::HashMap;

use durdet::combinatorics::count_sequences;
use durdet::model::sample_phase_sequence;
use durdet::rng::{stream_rng, DOMAIN_SIMULATE};
use durdet::sequence::{
    compute_stats, enumerate_sequences, sequence_probability, sequence_probability_prime, sequence_type,
};
use durdet::{DurationPmf, ModelParams, State};
use num_traits::ToPrimitive;

fn skewed(delta: usize) -> ModelParams {
    let p1: Vec<f64> = (1..=delta).map(|d| d as f64).collect();
    let s1: f64 = p1.iter().sum();
    let p2: Vec<f64> = (1..=delta).map(|d| (delta + 1 - d) as f64 * 0.5 + 0.25).collect();
    let s2: f64 = p2.iter().sum();
    ModelParams::new(
        DurationPmf::new(p1.iter().map(|v| v / s1).collect()).unwrap(),
        DurationPmf::new(p2.iter().map(|v| v / s2).collect()).unwrap(),
        0.0,
        1.0,
        1.0,
        0.0,
    )
    .unwrap()
}

#[test]
fn probabilities_sum_to_one_and_obey_sandwich() {
    for delta in 1..=3 {
        for params in [ModelParams::uniform(delta, 0.0, 1.0, 1.0).unwrap(), skewed(delta)] {
            let p_min = params.p_min();
            for t in 1..=14 {
                let mut total = 0.0;
                for seq in enumerate_sequences(delta, t).unwrap() {
                    let p = sequence_probability(&params, &seq).unwrap();
                    let pp = sequence_probability_prime(&params, &seq).unwrap();
                    assert!(pp <= p * (1.0 + 1e-14));
                    assert!(p <= pp / p_min * (1.0 + 1e-14));
                    total += p;
                }
                assert!((total - 1.0).abs() <= 1e-12, "delta={delta} t={t}: {total}");
            }
        }
    }
}

#[test]
fn enumeration_count_matches_recursion() {
    for delta in 1..=4 {
        for t in 1..=15 {
            let n = enumerate_sequences(delta, t).unwrap().count() as u64;
            assert_eq!(n, count_sequences(delta, t).unwrap().exact.to_u64().unwrap());
        }
    }
}

#[test]
fn enumerated_sequences_are_distinct() {
    let all: Vec<Vec<State>> = enumerate_sequences(3, 10).unwrap().map(|s| s.states()).collect();
    let mut sorted = all.clone();
    sorted.sort_by_key(|v| v.iter().map(|s| s.number()).collect::<Vec<_>>());
    sorted.dedup();
    assert_eq!(sorted.len(), all.len());
}

#[test]
fn histogram_identities_hold_for_enumerated_and_sampled_paths() {
    let check = |seq: &durdet::sequence::PhaseSequence| {
        let stats = compute_stats(seq);
        let t = seq.total_length();
        let weighted: u64 = (0..2)
            .flat_map(|m| stats.counts[m].iter().enumerate().map(|(i, c)| (i as u64 + 1) * c))
            .sum();
        assert_eq!(weighted, t as u64);
        let n1 = stats.phase_counts[0] as i64;
        let n2 = stats.phase_counts[1] as i64;
        assert!(n1 - n2 == 0 || n1 - n2 == 1);
        let ty = sequence_type(seq);
        let gap = ty.mass(State::One) - ty.mass(State::Two);
        assert!(gap >= -1e-15 && gap <= 1.0 / t as f64 + 1e-15);
        assert!((ty.theta(State::One) + ty.theta(State::Two) - 1.0).abs() < 1e-12);
    };
    for seq in enumerate_sequences(3, 11).unwrap() {
        check(&seq);
    }
    let params = skewed(5);
    let mut rng = stream_rng(5, DOMAIN_SIMULATE, 0);
    for t in 1..200 {
        check(&sample_phase_sequence(&params, t, &mut rng).unwrap());
    }
}

#[test]
fn sampler_frequencies_match_probabilities() {
    let params = ModelParams::new(
        DurationPmf::new(vec![0.3, 0.7]).unwrap(),
        DurationPmf::new(vec![0.55, 0.45]).unwrap(),
        0.0,
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    const DRAWS: usize = 1_000_000;
    let mut rng = stream_rng(2024, DOMAIN_SIMULATE, 0);
    let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..DRAWS {
        let seq = sample_phase_sequence(&params, 5, &mut rng).unwrap();
        *freq.entry(seq.phases().iter().map(|p| p.duration).collect()).or_default() += 1;
    }
    let mut seen = 0;
    for seq in enumerate_sequences(2, 5).unwrap() {
        let key: Vec<usize> = seq.phases().iter().map(|p| p.duration).collect();
        let p = sequence_probability(&params, &seq).unwrap();
        let f = *freq.get(&key).unwrap_or(&0) as f64 / DRAWS as f64;
        let tol = 4.0 * (p * (1.0 - p) / DRAWS as f64).sqrt();
        assert!((f - p).abs() <= tol, "{key:?}: {f} vs {p}");
        seen += freq.get(&key).copied().unwrap_or(0);
    }
    assert_eq!(seen, DRAWS);
}
