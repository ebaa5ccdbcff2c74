//! Counting feasible paths and types; entropy and relative entropy.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DurationPmf;
use crate::sequence::TypeVector;

/// Exact and log-domain values of a count.
#[derive(Debug, Clone, PartialEq)]
pub struct Count {
    pub exact: BigUint,
    pub log: f64,
}

/// `C_0, ..., C_T` for one Δ, where `C_t` is the number of compositions of
/// `t` with parts in `1..=Δ` (`C_0 = 1`, the empty composition).
#[derive(Debug, Clone)]
pub struct CountTable {
    delta: usize,
    exact: Vec<BigUint>,
    log: Vec<f64>,
}

impl CountTable {
    pub fn new(delta: usize, t_max: usize) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidArgument("delta must be at least 1".into()));
        }
        let mut exact: Vec<BigUint> = Vec::with_capacity(t_max + 1);
        let mut log: Vec<f64> = Vec::with_capacity(t_max + 1);
        exact.push(BigUint::one());
        log.push(0.0);
        for t in 1..=t_max {
            let lo = t.saturating_sub(delta);
            let sum = exact[lo..t].iter().fold(BigUint::zero(), |acc, c| acc + c);
            exact.push(sum);
            log.push(log_sum_exp(&log[lo..t]));
        }
        Ok(CountTable { delta, exact, log })
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn t_max(&self) -> usize {
        self.exact.len() - 1
    }

    pub fn exact(&self, t: usize) -> &BigUint {
        &self.exact[t]
    }

    pub fn log(&self, t: usize) -> f64 {
        self.log[t]
    }
}

/// `C_t`, the number of feasible paths of length `t`.
pub fn count_sequences(delta: usize, t: usize) -> Result<Count> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    let table = CountTable::new(delta, t)?;
    Ok(Count {
        exact: table.exact(t).clone(),
        log: table.log(t),
    })
}

/// Growth constant ψ of `C_t`: the positive root of
/// `x^Δ - x^{Δ-1} - ... - 1`, found by bisection on `[1, 2]`.
pub fn growth_rate_psi(delta: usize) -> Result<f64> {
    if delta == 0 {
        return Err(Error::InvalidArgument("delta must be at least 1".into()));
    }
    if delta == 1 {
        return Ok(1.0);
    }
    let poly = |x: f64| {
        // x^Δ - (x^{Δ-1} + ... + 1), Horner on the lower part
        let lower = (0..delta).fold(0.0, |acc, _| acc * x + 1.0);
        x.powi(delta as i32) - lower
    };
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if poly(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Integer phase-duration histograms `N_{m,d}` of a type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub counts: [Vec<u64>; 2],
}

impl TypeCounts {
    pub fn total_length(&self) -> u64 {
        self.counts
            .iter()
            .flat_map(|row| row.iter().enumerate().map(|(i, n)| (i as u64 + 1) * n))
            .sum()
    }

    pub fn mass(&self, m: usize) -> u64 {
        self.counts[m].iter().sum()
    }

    pub fn to_type(&self) -> TypeVector {
        let t = self.total_length() as f64;
        let [a, b] = &self.counts;
        TypeVector {
            nu: [
                a.iter().map(|&n| n as f64 / t).collect(),
                b.iter().map(|&n| n as f64 / t).collect(),
            ],
        }
    }

    /// Converts `t·ν` to integers, rejecting entries farther than `1e-9` from
    /// an integer.
    pub fn from_type(t: usize, nu: &TypeVector) -> Result<Self> {
        let to_int = |row: &[f64]| -> Result<Vec<u64>> {
            row.iter()
                .map(|v| {
                    let x = v * t as f64;
                    let r = x.round();
                    if (x - r).abs() > 1e-9 || r < 0.0 {
                        Err(Error::NonIntegralCounts(format!("t·ν = {x} is not a nonnegative integer")))
                    } else {
                        Ok(r as u64)
                    }
                })
                .collect()
        };
        Ok(TypeCounts {
            counts: [to_int(&nu.nu[0])?, to_int(&nu.nu[1])?],
        })
    }
}

fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn multinomial(parts: &[u64]) -> BigUint {
    let total: u64 = parts.iter().sum();
    let denom = parts.iter().fold(BigUint::one(), |acc, &k| acc * factorial(k));
    factorial(total) / denom
}

/// Natural log of an arbitrarily large integer.
pub fn ln_biguint(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    (n >> shift).to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// `C_{t,ν}`: the number of feasible paths with the given duration
/// histograms, a product of two multinomial coefficients.
pub fn count_type_sequences_from_counts(counts: &TypeCounts) -> Result<Count> {
    let (n1, n2) = (counts.mass(0), counts.mass(1));
    if counts.counts[0].len() != counts.counts[1].len() {
        return Err(Error::InvalidArgument("histogram rows differ in length".into()));
    }
    if !(n1 == n2 || n1 == n2 + 1) || n1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "phase counts ({n1}, {n2}) are not those of a path starting in state 1"
        )));
    }
    let exact = multinomial(&counts.counts[0]) * multinomial(&counts.counts[1]);
    let log = ln_biguint(&exact);
    Ok(Count { exact, log })
}

pub fn count_type_sequences(t: usize, nu: &TypeVector) -> Result<Count> {
    let counts = TypeCounts::from_type(t, nu)?;
    if counts.total_length() != t as u64 {
        return Err(Error::InvalidArgument(format!(
            "type describes {} samples, expected {t}",
            counts.total_length()
        )));
    }
    count_type_sequences_from_counts(&counts)
}

/// Every realizable pair of duration histograms for paths of length `t`.
pub fn feasible_type_counts(delta: usize, t: usize) -> Vec<TypeCounts> {
    // all histograms h over 1..=Δ with Σ d·h_d = s, for every s ≤ t
    fn histograms(delta: usize, budget: usize, d: usize, cur: &mut Vec<u64>, out: &mut Vec<(usize, Vec<u64>)>) {
        if d > delta {
            let used = cur.iter().enumerate().map(|(i, n)| (i + 1) * *n as usize).sum();
            out.push((used, cur.clone()));
            return;
        }
        let mut k = 0;
        while k * d <= budget {
            cur.push(k as u64);
            histograms(delta, budget - k * d, d + 1, cur, out);
            cur.pop();
            k += 1;
        }
    }
    let mut all = Vec::new();
    histograms(delta, t, 1, &mut Vec::new(), &mut all);
    let mut out = Vec::new();
    for (s1, h1) in &all {
        let n1: u64 = h1.iter().sum();
        for (s2, h2) in &all {
            let n2: u64 = h2.iter().sum();
            if s1 + s2 == t && n1 >= 1 && (n1 == n2 || n1 == n2 + 1) {
                out.push(TypeCounts {
                    counts: [h1.clone(), h2.clone()],
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyConvention {
    /// Entropy of the normalized vector; invariant to scaling.
    #[default]
    Normalized,
    /// Normalized entropy times the total mass `1ᵀλ`.
    MassWeighted,
}

impl std::fmt::Display for EntropyConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EntropyConvention::Normalized => "normalized",
            EntropyConvention::MassWeighted => "mass-weighted",
        })
    }
}

fn total_mass(lambda: &[f64]) -> Result<f64> {
    if lambda.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument("vector entries must be nonnegative".into()));
    }
    let mass: f64 = lambda.iter().sum();
    if mass <= 0.0 {
        return Err(Error::InvalidArgument("vector has zero mass".into()));
    }
    Ok(mass)
}

/// Shannon entropy (nats) of a nonnegative vector, `0 log 0 = 0`.
pub fn entropy(lambda: &[f64], convention: EntropyConvention) -> Result<f64> {
    let mass = total_mass(lambda)?;
    let h = -lambda
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| {
            let r = v / mass;
            r * r.ln()
        })
        .sum::<f64>();
    let h = h.max(0.0);
    Ok(match convention {
        EntropyConvention::Normalized => h,
        EntropyConvention::MassWeighted => mass * h,
    })
}

/// Relative entropy of the normalized `λ` with respect to `p`.
///
/// Returns `f64::INFINITY` when `λ` puts mass where `p` has none.
pub fn kl_divergence(lambda: &[f64], p: &DurationPmf) -> Result<f64> {
    if lambda.len() != p.delta() {
        return Err(Error::InvalidArgument(format!(
            "vector length {} differs from pmf length {}",
            lambda.len(),
            p.delta()
        )));
    }
    let mass = total_mass(lambda)?;
    let mut d = 0.0;
    for (&v, &q) in lambda.iter().zip(p.probs()) {
        if v > 0.0 {
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            let r = v / mass;
            d += r * (r / q).ln();
        }
    }
    Ok(d.max(0.0))
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_counts() {
        let table = CountTable::new(2, 6).unwrap();
        let c: Vec<u64> = (1..=6).map(|t| table.exact(t).to_u64().unwrap()).collect();
        assert_eq!(c, vec![1, 2, 3, 5, 8, 13]);
        for t in 1..=6 {
            assert!((table.log(t) - (c[t - 1] as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_one_counts() {
        let table = CountTable::new(1, 50).unwrap();
        assert!((1..=50).all(|t| table.exact(t).is_one()));
    }

    #[test]
    fn psi_values() {
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((growth_rate_psi(2).unwrap() - golden).abs() < 1e-12);
        assert_eq!(growth_rate_psi(1).unwrap(), 1.0);
        // tribonacci constant
        assert!((growth_rate_psi(3).unwrap() - 1.839_286_755_214_161).abs() < 1e-12);
        assert!(growth_rate_psi(0).is_err());
    }

    #[test]
    fn log_count_tracks_psi() {
        let psi = growth_rate_psi(3).unwrap();
        let c = count_sequences(3, 400).unwrap();
        let next = count_sequences(3, 401).unwrap();
        assert!((next.log - c.log - psi.ln()).abs() < 1e-12);
        assert!((ln_biguint(&c.exact) - c.log).abs() < 1e-9);
    }

    #[test]
    fn type_count_examples() {
        let single = TypeCounts {
            counts: [vec![1, 0], vec![1, 0]],
        };
        assert!(count_type_sequences_from_counts(&single).unwrap().exact.is_one());
        let c = TypeCounts {
            counts: [vec![2, 1], vec![2, 1]],
        };
        assert_eq!(c.total_length(), 8);
        assert_eq!(count_type_sequences_from_counts(&c).unwrap().exact, BigUint::from(9u32));
        let via_type = count_type_sequences(8, &c.to_type()).unwrap();
        assert_eq!(via_type.exact, BigUint::from(9u32));
    }

    #[test]
    fn type_count_errors() {
        let nu = TypeVector::new(vec![0.1, 0.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(count_type_sequences(5, &nu), Err(Error::NonIntegralCounts(_))));
        let bad = TypeCounts {
            counts: [vec![0, 1], vec![2, 0]],
        };
        assert!(count_type_sequences_from_counts(&bad).is_err());
    }

    #[test]
    fn entropy_examples() {
        let h = entropy(&[0.3, 0.3], EntropyConvention::Normalized).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);
        for conv in [EntropyConvention::Normalized, EntropyConvention::MassWeighted] {
            assert_eq!(entropy(&[4.0, 0.0, 0.0], conv).unwrap(), 0.0);
        }
        let hw = entropy(&[0.25, 0.25], EntropyConvention::MassWeighted).unwrap();
        assert!((hw - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(entropy(&[0.0, 0.0], EntropyConvention::Normalized).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = DurationPmf::new(vec![0.5, 0.5]).unwrap();
        assert!(kl_divergence(&[3.0, 3.0], &p).unwrap().abs() < 1e-15);
        assert!((kl_divergence(&[1.0, 0.0], &p).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let q = DurationPmf::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&[0.5, 0.5], &q).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&[1.0], &p).is_err());
    }
}
