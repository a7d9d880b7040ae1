//! Analytical quantities checked against simulation and closed forms.

use proptest::prelude::*;
use squad_core::analytics::{
    degree_evolution_pmf, expected_dopings, expected_yield, interdoping_yield_pmf, sample_walk_yield, unreleased_degree_dist,
    yield_pmf_delta0,
};
use squad_core::degree::DegreeDistribution;
use squad_core::rng::trial_rng;

#[test]
fn censored_mean_matches_simulated_walks() {
    let k = 1000;
    let pmf = yield_pmf_delta0(k).unwrap();
    let analytic = expected_yield(&pmf, k, 0.0);
    let mut rng = trial_rng(2024, 0);
    let walks = 1_000_000;
    let total: usize = (0..walks).map(|_| sample_walk_yield(1.0, k, &mut rng).unwrap().unwrap_or(k)).sum();
    let mc = total as f64 / walks as f64;
    let rel = (analytic - mc).abs() / mc;
    assert!(rel < 0.02, "analytic {analytic} vs simulated {mc}");
}

#[test]
fn degree_evolution_at_start_is_the_soliton() {
    let k = 80;
    let is = DegreeDistribution::ideal_soliton(k).unwrap();
    // Degree-one outputs are released at once, so the support starts at two.
    assert_eq!(degree_evolution_pmf(k, 0, 1), 0.0);
    for d in 2..=k {
        assert!((degree_evolution_pmf(k, 0, d) - is.pmf(d)).abs() < 1e-15, "d = {d}");
    }
}

#[test]
fn degree_evolution_one_step_recurrence() {
    // Removing one more recovered input: a degree-d output either keeps
    // degree d with probability 1 - d/(k - ell) or came from degree d + 1.
    let (k, ell) = (50usize, 10usize);
    let rem = (k - ell) as f64;
    for d in 2..k - ell {
        let lhs = degree_evolution_pmf(k, ell + 1, d);
        let rhs = degree_evolution_pmf(k, ell, d) * (1.0 - d as f64 / rem)
            + degree_evolution_pmf(k, ell, d + 1) * (d + 1) as f64 / rem;
        assert!((lhs - rhs).abs() < 1e-12, "d = {d}: {lhs} vs {rhs}");
    }
}

#[test]
fn unreleased_support_near_the_end() {
    let k = 40;
    let u = unreleased_degree_dist(k, k - 3).unwrap();
    for (d, &p) in u.normalized.probabilities().iter().enumerate() {
        if p > 0.0 {
            assert!(d == 2 || d == 3, "mass {p} at degree {d}");
        }
    }
    let total: f64 = u.normalized.probabilities().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(unreleased_degree_dist(k, k - 2).is_err());
}

#[test]
fn yield_pmf_rejects_subcritical_intensity() {
    assert!(interdoping_yield_pmf(0.9, 50).is_err());
    assert!(interdoping_yield_pmf(1.0, 1).is_err());
}

#[test]
fn predicted_doping_decreases_with_surplus() {
    let p: Vec<f64> = [0.0, 0.02, 0.05].iter().map(|&d| expected_dopings(1000, d).unwrap().predicted_kd).collect();
    assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
    assert!(p[0] > 0.0 && p[0] < 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn yield_pmf_is_a_subprobability(lambda in 1.0f64..3.0, t_max in 2usize..400) {
        let pmf = interdoping_yield_pmf(lambda, t_max).unwrap();
        let total: f64 = pmf.probs.iter().sum();
        prop_assert!(pmf.probs.iter().all(|&p| p >= 0.0));
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert!((total + pmf.tail - 1.0).abs() < 1e-9);
        prop_assert_eq!(pmf.prob(1), 0.0);
    }

    #[test]
    fn censored_mean_is_bounded(lambda in 1.0f64..2.0, k in 10usize..300, frac in 0.0f64..1.0) {
        let pmf = interdoping_yield_pmf(lambda, k).unwrap();
        let l = frac * k as f64;
        let m = expected_yield(&pmf, k, l);
        prop_assert!(m >= 0.0 && m <= k as f64 - l + 1e-9);
    }

    #[test]
    fn degree_evolution_mass_matches_unreleased_total(k in 8usize..60, frac in 0.0f64..1.0) {
        let ell = ((k - 3) as f64 * frac) as usize;
        let u = unreleased_degree_dist(k, ell).unwrap();
        let direct: f64 = (2..=k - ell).map(|d| degree_evolution_pmf(k, ell, d)).sum();
        let raw: f64 = u.raw.iter().sum();
        prop_assert!((direct - raw * (k - ell) as f64 / k as f64).abs() < 1e-12);
        prop_assert!((raw - (1.0 - 1.0 / (k - ell) as f64)).abs() < 1e-12);
    }
}
