use std::collections::HashMap;

use durdet::combinatorics::{
    count_sequences, count_type_sequences, count_type_sequences_from_counts, entropy, feasible_type_counts,
    growth_rate_psi, CountTable, EntropyConvention, TypeCounts,
};
use durdet::sequence::{compute_stats, enumerate_sequences};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

#[test]
fn fibonacci_counts_for_delta_two() {
    let table = CountTable::new(2, 40).unwrap();
    let (mut a, mut b) = (1u64, 2u64);
    for t in 1..=40 {
        assert_eq!(table.exact(t).to_u64().unwrap(), a, "t = {t}");
        (a, b) = (b, a + b);
    }
    for t in 1..=16 {
        assert_eq!(enumerate_sequences(2, t).unwrap().count() as u64, table.exact(t).to_u64().unwrap());
    }
    assert!((growth_rate_psi(2).unwrap() - 1.618033988749895).abs() < 1e-12);
}

#[test]
fn type_counts_partition_all_paths() {
    for delta in 1..=3 {
        for t in 1..=12 {
            let total: BigUint = feasible_type_counts(delta, t)
                .iter()
                .map(|c| count_type_sequences_from_counts(c).unwrap().exact)
                .sum();
            assert_eq!(total, count_sequences(delta, t).unwrap().exact, "delta={delta} t={t}");
        }
    }
}

#[test]
fn type_counts_match_enumerated_histograms() {
    let mut by_type: HashMap<[Vec<u64>; 2], u64> = HashMap::new();
    for seq in enumerate_sequences(3, 11).unwrap() {
        *by_type.entry(compute_stats(&seq).counts).or_default() += 1;
    }
    let types = feasible_type_counts(3, 11);
    assert_eq!(types.len(), by_type.len());
    for tc in types {
        let c = count_type_sequences_from_counts(&tc).unwrap();
        assert_eq!(c.exact.to_u64().unwrap(), by_type[&tc.counts]);
        let via_type = count_type_sequences(11, &tc.to_type()).unwrap();
        assert_eq!(via_type.exact, c.exact);
    }
}

#[test]
fn log_count_envelope() {
    for delta in 2..=4 {
        let psi = growth_rate_psi(delta).unwrap();
        let table = CountTable::new(delta, 2000).unwrap();
        let mut prev = f64::INFINITY;
        for t in (100..=2000).step_by(100) {
            let gap = (table.log(t) / t as f64 - psi.ln()).abs();
            let tf = t as f64;
            assert!(gap <= 2.0 * tf.ln() / tf * delta as f64);
            assert!(gap <= prev);
            prev = gap;
        }
    }
}

#[test]
fn stirling_exponent_uses_mass_weighted_entropy() {
    // interior type at t = 200: 30 phases of length 1 and 35 of length 2 in each state
    let tc = TypeCounts {
        counts: [vec![30, 35], vec![30, 35]],
    };
    assert_eq!(tc.total_length(), 200);
    let nu = tc.to_type();
    let rate = count_type_sequences(200, &nu).unwrap().log / 200.0;
    let h = |conv| entropy(&nu.nu[0], conv).unwrap() + entropy(&nu.nu[1], conv).unwrap();
    let weighted = h(EntropyConvention::MassWeighted);
    let normalized = h(EntropyConvention::Normalized);
    assert!((rate - weighted).abs() <= 0.05, "{rate} vs {weighted}");
    // equal masses 65/200: the scale-invariant sum is larger by 1/mass
    assert!((normalized / weighted - 200.0 / 65.0).abs() < 1e-12);
    assert!((rate - normalized).abs() > 0.5);
}
