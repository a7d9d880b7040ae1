//! Code-symbol degree distributions.
//!
//! A [`DegreeDistribution`] is a dense pmf over degrees `1..=k` together with
//! its cdf, sampled by inverse transform. Constructors validate
//! normalization, so every value of this type is a proper distribution.

use rand::Rng;
use statrs::function::factorial::ln_factorial;

use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Probability distribution over code-symbol degrees `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    // pmf[d] for d in 0..=k; pmf[0] is always zero.
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from explicit probabilities `probs[d - 1]` for
    /// `d = 1..=k`. The probabilities must already sum to one.
    pub fn from_pmf(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("degree distribution needs k >= 1".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative or non-finite probability {p}")));
        }
        let mut pmf = Vec::with_capacity(probs.len() + 1);
        pmf.push(0.0);
        pmf.extend_from_slice(probs);
        let cdf: Vec<f64> = pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let total = *cdf.last().unwrap();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { pmf, cdf })
    }

    /// Normalizes nonnegative weights `weights[d - 1]` into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::from_pmf(&probs)
    }

    /// Ideal Soliton: `rho(1) = 1/k`, `rho(d) = 1/(d(d-1))` for `d = 2..=k`.
    pub fn ideal_soliton(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("ideal soliton needs k >= 2, got {k}")));
        }
        let probs: Vec<f64> = (1..=k).map(|d| ideal_soliton_mass(k, d)).collect();
        Self::from_pmf(&probs)
    }

    /// Robust Soliton in Luby's construction with spike at `ceil(k/R)`,
    /// `R = c ln(k/delta_rs) sqrt(k)`.
    pub fn robust_soliton(k: usize, c: f64, delta_rs: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("robust soliton needs k >= 2, got {k}")));
        }
        if !(c > 0.0) || !(delta_rs > 0.0 && delta_rs < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "robust soliton needs c > 0 and 0 < delta < 1, got c={c}, delta={delta_rs}"
            )));
        }
        let kf = k as f64;
        let r = c * (kf / delta_rs).ln() * kf.sqrt();
        let spike = (kf / r).ceil();
        if r >= kf || spike > kf || r <= delta_rs {
            return Err(Error::InvalidParameter(format!(
                "robust soliton parameters give R = {r:.4} (spike at {spike}) for k = {k}"
            )));
        }
        let spike = spike as usize;
        let weights: Vec<f64> = (1..=k)
            .map(|d| {
                let tau = if d < spike {
                    r / (d as f64 * kf)
                } else if d == spike {
                    r * (r / delta_rs).ln() / kf
                } else {
                    0.0
                };
                ideal_soliton_mass(k, d) + tau
            })
            .collect();
        Self::from_weights(&weights)
    }

    /// All mass on degree `d`.
    pub fn point_mass(k: usize, d: usize) -> Result<Self> {
        if d == 0 || d > k {
            return Err(Error::InvalidParameter(format!("degree {d} outside 1..={k}")));
        }
        let mut probs = vec![0.0; k];
        probs[d - 1] = 1.0;
        Self::from_pmf(&probs)
    }

    /// Largest degree in the support.
    pub fn k(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Probability of degree `d`; zero outside `1..=k`.
    pub fn pmf(&self, d: usize) -> f64 {
        self.pmf.get(d).copied().unwrap_or(0.0)
    }

    /// Dense pmf indexed by degree (entry 0 is zero).
    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self, d: usize) -> f64 {
        self.cdf[d.min(self.k())]
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(d, p)| d as f64 * p).sum()
    }

    /// Inverse-transform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cdf[self.k()];
        let u = rng.random::<f64>() * total;
        // First degree whose cdf exceeds u; zero-mass degrees are never hit.
        let d = self.cdf.partition_point(|&c| c <= u);
        d.clamp(1, self.k())
    }
}

pub(crate) fn ideal_soliton_mass(k: usize, d: usize) -> f64 {
    match d {
        1 => 1.0 / k as f64,
        d if d <= k => 1.0 / (d as f64 * (d as f64 - 1.0)),
        _ => 0.0,
    }
}

/// `ln(mu^r e^-mu / r!)`, with the `mu = 0` limit handled.
pub fn poisson_ln_pmf(mu: f64, r: u64) -> f64 {
    if mu == 0.0 {
        return if r == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    r as f64 * mu.ln() - mu - ln_factorial(r)
}

pub fn poisson_pmf(mu: f64, r: u64) -> f64 {
    poisson_ln_pmf(mu, r).exp()
}

/// Poisson pmf of intensity `lambda` at `r`, truncated to zero above `n_max`.
/// Not renormalized.
pub fn truncated_poisson_pmf(lambda: f64, r: u64, n_max: u64) -> f64 {
    if r > n_max {
        0.0
    } else {
        poisson_pmf(lambda, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use proptest::prelude::*;

    #[test]
    fn ideal_soliton_small_cases() {
        let is2 = DegreeDistribution::ideal_soliton(2).unwrap();
        assert_eq!(is2.pmf(1), 0.5);
        assert_eq!(is2.pmf(2), 0.5);

        let is10 = DegreeDistribution::ideal_soliton(10).unwrap();
        let total: f64 = (1..=10).map(|d| is10.pmf(d)).sum();
        assert!((total - 1.0).abs() < 1e-15);

        let is1000 = DegreeDistribution::ideal_soliton(1000).unwrap();
        assert_eq!(is1000.pmf(2), 0.5);
        assert_eq!(is1000.pmf(1), 1e-3);
        for d in 2..=1000 {
            let back = is1000.pmf(d) * (d * (d - 1)) as f64;
            assert!((back - 1.0).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn ideal_soliton_rejects_tiny_k() {
        assert!(matches!(DegreeDistribution::ideal_soliton(1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn robust_soliton_shape() {
        let (k, c, delta) = (1000usize, 0.1, 0.5);
        let rs = DegreeDistribution::robust_soliton(k, c, delta).unwrap();
        let is = DegreeDistribution::ideal_soliton(k).unwrap();
        assert!(rs.pmf(1) > is.pmf(1));

        // Independent evaluation of the spike location: R = 0.1 ln(2000) sqrt(1000).
        let r = 0.1 * 2000f64.ln() * 1000f64.sqrt();
        assert!((r - 24.0362).abs() < 1e-3);
        let spike = (1000.0 / r).ceil() as usize;
        assert_eq!(spike, 42);
        assert!(rs.pmf(spike) > rs.pmf(spike - 1));
        assert!(rs.pmf(spike) > rs.pmf(spike + 1));
        let above: f64 = (spike + 1..=k).map(|d| rs.pmf(d)).sum();
        let is_above: f64 = (spike + 1..=k).map(|d| is.pmf(d)).sum();
        assert!(above < is_above);
    }

    #[test]
    fn robust_soliton_rejects_degenerate_parameters() {
        assert!(DegreeDistribution::robust_soliton(10, 5.0, 0.5).is_err());
        assert!(DegreeDistribution::robust_soliton(100, 0.1, 1.5).is_err());
        assert!(DegreeDistribution::robust_soliton(100, -1.0, 0.5).is_err());
    }

    #[test]
    fn point_mass_always_samples_its_degree() {
        let dist = DegreeDistribution::point_mass(10, 2).unwrap();
        let mut rng = trial_rng(1, 0);
        assert!((0..1000).all(|_| dist.sample(&mut rng) == 2));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let dist = DegreeDistribution::ideal_soliton(100).unwrap();
        let draw = |seed| {
            let mut rng = trial_rng(seed, 0);
            (0..64).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn sampling_histogram_matches_pmf() {
        let k = 1000;
        let n = 1_000_000;
        let dist = DegreeDistribution::ideal_soliton(k).unwrap();
        let mut rng = trial_rng(42, 0);
        let mut counts = vec![0u64; k + 1];
        for _ in 0..n {
            counts[dist.sample(&mut rng)] += 1;
        }
        let freq2 = counts[2] as f64 / n as f64;
        assert!((freq2 - 0.5).abs() < 0.005, "freq2={freq2}");
        for d in 1..=k {
            let p = dist.pmf(d);
            let emp = counts[d] as f64 / n as f64;
            let bound = 5.0 * (p / n as f64).sqrt() + 1e-4;
            assert!((emp - p).abs() < bound, "d={d} emp={emp} p={p}");
        }
    }

    #[test]
    fn truncated_poisson_values() {
        assert!((truncated_poisson_pmf(1.0, 0, 10) - (-1f64).exp()).abs() < 1e-15);
        assert!((truncated_poisson_pmf(1.0, 2, 10) - (-1f64).exp() / 2.0).abs() < 1e-15);
        assert!((truncated_poisson_pmf(1.0, 0, 10) - 0.367879).abs() < 1e-6);
        assert!((truncated_poisson_pmf(1.0, 2, 10) - 0.183940).abs() < 1e-6);
        assert_eq!(truncated_poisson_pmf(1.0, 11, 10), 0.0);
        // Large r stays finite and matches the Stirling-scale value.
        let far = truncated_poisson_pmf(500.0, 500, 1000);
        assert!((far - 1.0 / (2.0 * std::f64::consts::PI * 500.0).sqrt()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn robust_soliton_is_normalized(k in 50usize..3000, c in 0.02f64..0.3, delta in 0.05f64..0.95) {
            if let Ok(rs) = DegreeDistribution::robust_soliton(k, c, delta) {
                let total: f64 = rs.probabilities().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(rs.probabilities().iter().all(|p| *p >= 0.0));
                prop_assert!((rs.cdf(k) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn ideal_soliton_cdf_is_monotone(k in 2usize..5000) {
            let is = DegreeDistribution::ideal_soliton(k).unwrap();
            prop_assert!((1..=k).all(|d| is.cdf(d) >= is.cdf(d - 1)));
            prop_assert!((is.cdf(k) - 1.0).abs() < 1e-12);
        }
    }
}
