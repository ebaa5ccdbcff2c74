use durdet::combinatorics::EntropyConvention;
use durdet::exponent::{
    bound_objective, critical_sigma_uniform, detectability, guaranteed_bound, sample_type, solve_bound, BoundConfig,
};
use durdet::rng::{stream_rng, DOMAIN_SIMULATE};
use durdet::{DurationPmf, Execution, ModelParams, State};

fn cfg(budget: usize) -> BoundConfig {
    BoundConfig {
        budget,
        ..BoundConfig::default()
    }
}

#[test]
fn bound_vanishes_exactly_when_undetectable() {
    let star = critical_sigma_uniform(2, 1.0).unwrap();
    for i in 0..20 {
        let sigma = star * (0.8 + 0.02 * i as f64);
        let p = ModelParams::uniform(2, 0.0, 1.0, sigma).unwrap();
        let r = solve_bound(&p, &cfg(20_000), Execution::default()).unwrap();
        let undetectable = detectability(&p).unwrap().undetectable;
        assert_eq!(r.eta_lower == 0.0, undetectable, "sigma = {sigma}: {}", r.eta_lower);
    }
}

#[test]
fn bound_decreases_with_noise() {
    let mut prev = f64::INFINITY;
    for sigma in [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5] {
        let p = ModelParams::uniform(3, 0.0, 1.0, sigma).unwrap();
        let r = solve_bound(&p, &cfg(30_000), Execution::default()).unwrap();
        assert!(r.eta_lower <= prev + 1e-9, "sigma = {sigma}");
        prev = r.eta_lower;
    }
}

#[test]
fn positive_level_keeps_guaranteed_part() {
    let mut rng = stream_rng(4, DOMAIN_SIMULATE, 0);
    for _ in 0..10 {
        use rand::Rng;
        let mu1 = rng.random_range(0.1..2.0);
        let mu2 = mu1 + rng.random_range(0.0..3.0);
        let sigma = rng.random_range(0.3..5.0);
        let p = ModelParams::uniform(rng.random_range(1..5), mu1, mu2, sigma).unwrap();
        let r = solve_bound(&p, &cfg(5_000), Execution::default()).unwrap();
        assert!(r.eta_lower >= 0.0);
        assert!(r.zeta_lower >= guaranteed_bound(&p));
        assert!(r.argmin_nu.is_in_polytope(1e-12));
        // ξ* is either unconstrained or on the entropy boundary
        let obj = bound_objective(&r.argmin_nu, r.argmin_xi, &p, EntropyConvention::Normalized).unwrap();
        let slack = obj.feasible || {
            let near = bound_objective(&r.argmin_nu, r.argmin_xi * (1.0 - 1e-9), &p, EntropyConvention::Normalized)
                .unwrap();
            near.feasible
        };
        assert!(slack);
        assert!((obj.value - r.eta_lower).abs() < 1e-9);
    }
}

#[test]
fn objective_is_nonnegative() {
    let mut rng = stream_rng(6, DOMAIN_SIMULATE, 0);
    use rand::Rng;
    let p = ModelParams::new(
        DurationPmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
        DurationPmf::new(vec![0.4, 0.4, 0.1, 0.1]).unwrap(),
        0.7,
        1.9,
        0.8,
        0.0,
    )
    .unwrap();
    for _ in 0..10_000 {
        let nu = sample_type(4, &mut rng);
        let xi = rng.random_range(-3.0..3.0);
        for conv in [EntropyConvention::Normalized, EntropyConvention::MassWeighted] {
            let v = bound_objective(&nu, xi, &p, conv).unwrap();
            assert!(v.value >= -1e-12);
        }
    }
}

#[test]
fn sampled_mass_matches_quadrature() {
    // Δ = 2: w_m = (u_m, 1 - u_m) with u_m uniform, so the common mass is
    // c = 1 / (4 - u_1 - u_2)
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut integral = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            integral += 1.0 / (4.0 - u - v);
        }
    }
    integral *= h * h;

    let draws = 100_000;
    let mut rng = stream_rng(8, DOMAIN_SIMULATE, 0);
    let masses: Vec<f64> = (0..draws).map(|_| sample_type(2, &mut rng).mass(State::One)).collect();
    let mean = masses.iter().sum::<f64>() / draws as f64;
    let var = masses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var / draws as f64).sqrt();
    assert!((mean - integral).abs() <= 3.0 * se, "{mean} vs {integral} ± {se}");
}

#[test]
fn mass_weighted_threshold_sits_higher() {
    // weighting by the phase rate shrinks the entropy side, so the bound
    // remains positive past the scale-invariant threshold
    let star = critical_sigma_uniform(2, 1.0).unwrap();
    let p = ModelParams::uniform(2, 0.0, 1.0, star * 1.05).unwrap();
    let normalized = solve_bound(&p, &cfg(20_000), Execution::default()).unwrap();
    let weighted = solve_bound(
        &p,
        &BoundConfig {
            convention: EntropyConvention::MassWeighted,
            ..cfg(20_000)
        },
        Execution::default(),
    )
    .unwrap();
    assert_eq!(normalized.eta_lower, 0.0);
    assert!(weighted.eta_lower > 0.0);
    assert_eq!(weighted.mode, EntropyConvention::MassWeighted);
}
