//! Analytical model of the doped peeling decoder.
//!
//! Between two dopings the ripple is modeled as a random walk started at
//! two whose increments are `Poisson(lambda) - 1`; the walk stops when the
//! ripple empties. `lambda = 1 + delta * k / (k - ell)` is held constant
//! within an interdoping interval and refreshed at each doping.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::degree::{ideal_soliton_mass, poisson_pmf, DegreeDistribution};
use crate::{Error, Result};

/// Release intensity after `ell` symbols have been recovered from
/// `k (1 + delta)` collected symbols.
pub fn ripple_intensity(k: usize, delta: f64, ell: f64) -> f64 {
    let k = k as f64;
    1.0 + delta * k / (k - ell)
}

/// Parameters of the ripple walk at a given decoding time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub k: usize,
    pub delta: f64,
    pub ell: usize,
    pub lambda: f64,
}

impl WalkParams {
    pub fn new(k: usize, delta: f64, ell: usize) -> Result<Self> {
        if ell >= k {
            return Err(Error::InvalidParameter(format!("ell = {ell} must be below k = {k}")));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
        }
        Ok(Self { k, delta, ell, lambda: ripple_intensity(k, delta, ell as f64) })
    }
}

/// Probability that an Ideal Soliton column has `d` remaining ones after
/// `ell` rows were removed: `(k - ell)/k * rho(d)` on `2..=k-ell`.
pub fn degree_evolution_pmf(k: usize, ell: usize, d: usize) -> f64 {
    if d < 2 || ell >= k || d > k - ell {
        return 0.0;
    }
    (k - ell) as f64 / k as f64 * ideal_soliton_mass(k, d)
}

/// Degree distribution of the unreleased outputs after `ell` recoveries.
#[derive(Debug, Clone, PartialEq)]
pub struct UnreleasedDegrees {
    /// `raw[d] = rho(d)` for `d = 2..=k-ell`, zero elsewhere; sums to
    /// `1 - 1/(k-ell)`.
    pub raw: Vec<f64>,
    /// `raw` rescaled to a distribution over `1..=k-ell` (no mass at 1).
    pub normalized: DegreeDistribution,
}

pub fn unreleased_degree_dist(k: usize, ell: usize) -> Result<UnreleasedDegrees> {
    if k < 3 || ell > k - 3 {
        return Err(Error::InvalidParameter(format!("need ell <= k - 3, got k = {k}, ell = {ell}")));
    }
    let support = k - ell;
    let raw: Vec<f64> = (0..=support).map(|d| if d >= 2 { ideal_soliton_mass(k, d) } else { 0.0 }).collect();
    let normalized = DegreeDistribution::from_weights(&raw[1..])?;
    Ok(UnreleasedDegrees { raw, normalized })
}

/// Distribution of an interdoping yield `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldPmf {
    pub lambda: f64,
    /// `probs[t] = P(Y = t)` for `t = 0..=t_max`.
    pub probs: Vec<f64>,
    /// Mass beyond `t_max`.
    pub tail: f64,
    /// Total negative mass zeroed out by clamping.
    pub clamped_mass: f64,
    pub clamp_events: usize,
}

impl YieldPmf {
    pub fn t_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, t: usize) -> f64 {
        self.probs.get(t).copied().unwrap_or(0.0)
    }
}

/// First-passage distribution of the ripple walk by the convolution
/// recursion
///
/// `P(Y = t+1) = eta(0) [A_t(t-1) - sum_{i=1}^{t-1} P(Y = t-i) A_i(1+i)]`
///
/// where `A_s` is the Poisson pmf of intensity `s * lambda` and
/// `eta(0) = e^{-lambda}`.
pub fn interdoping_yield_pmf(lambda: f64, t_max: usize) -> Result<YieldPmf> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("yield pmf needs lambda >= 1, got {lambda}")));
    }
    if t_max < 2 {
        return Err(Error::InvalidParameter(format!("yield pmf needs t_max >= 2, got {t_max}")));
    }
    // reach[t] = A_t(t - 1), back[i] = A_i(i + 1).
    let reach: Vec<f64> = (0..t_max).map(|t| if t == 0 { 0.0 } else { poisson_pmf(t as f64 * lambda, t as u64 - 1) }).collect();
    let back: Vec<f64> = (0..t_max).map(|i| poisson_pmf(i as f64 * lambda, i as u64 + 1)).collect();
    let eta0 = (-lambda).exp();

    let mut probs = vec![0.0; t_max + 1];
    let mut clamped_mass = 0.0;
    let mut clamp_events = 0;
    for t in 1..t_max {
        let through_zero: f64 = (1..t).map(|i| probs[t - i] * back[i]).sum();
        let mut p = eta0 * (reach[t] - through_zero);
        if p < 0.0 {
            clamped_mass -= p;
            clamp_events += 1;
            p = 0.0;
        }
        probs[t + 1] = p;
    }
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(YieldPmf { lambda, probs, tail, clamped_mass, clamp_events })
}

/// Yield distribution with no collection surplus (`lambda = 1`) on `0..=k`.
pub fn yield_pmf_delta0(k: usize) -> Result<YieldPmf> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("need k >= 3, got {k}")));
    }
    interdoping_yield_pmf(1.0, k)
}

/// Censored mean of `Y` for an interval starting after `l_i` recoveries:
/// mass beyond `k - l_i` is charged at the bound.
pub fn expected_yield(pmf: &YieldPmf, k: usize, l_i: f64) -> f64 {
    let bound = k as f64 - l_i;
    if bound <= 0.0 {
        return 0.0;
    }
    let last = (bound.floor() as usize).min(pmf.t_max());
    let (mean, mass) = (1..=last).fold((0.0, 0.0), |(m, s), t| (m + t as f64 * pmf.probs[t], s + pmf.probs[t]));
    mean + (1.0 - mass) * bound
}

/// Renewal estimate of the doping count at `delta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldEstimate {
    pub expected_yield: f64,
    pub dopings: f64,
}

/// `k / E[Y]` with `E[Y]` the censored mean of the `lambda = 1` yield.
pub fn wald_dopings(k: usize) -> Result<WaldEstimate> {
    let pmf = yield_pmf_delta0(k)?;
    let expected_yield = expected_yield(&pmf, k, 0.0);
    Ok(WaldEstimate { expected_yield, dopings: k as f64 / expected_yield })
}

/// Expected number of source symbols covered by no collected symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncoveredCount {
    /// `k (1 - 1/k)^{k (1 + delta) ln k}`
    pub exact: f64,
    /// `k e^{-(1 + delta) ln k}`
    pub approx: f64,
}

pub fn uncovered_count(k: usize, delta: f64) -> Result<UncoveredCount> {
    if k < 2 || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("need k >= 2 and delta >= 0, got k = {k}, delta = {delta}")));
    }
    let kf = k as f64;
    let draws = kf * (1.0 + delta) * kf.ln();
    Ok(UncoveredCount {
        exact: kf * (draws * (-1.0 / kf).ln_1p()).exp(),
        approx: kf * (-(1.0 + delta) * kf.ln()).exp(),
    })
}

/// Output of [`expected_dopings`].
#[derive(Debug, Clone, PartialEq)]
pub struct DopingPrediction {
    pub k: usize,
    pub delta: f64,
    /// Dopings that restart a stalled decoder (loop iterations, counting the
    /// one that starts decoding).
    pub stall_dopings: usize,
    /// Expected uncovered symbols, which are doped as well.
    pub uncovered: f64,
    /// `stall_dopings + uncovered`.
    pub predicted_kd: f64,
    /// `100 * predicted_kd / k`.
    pub percent: f64,
    /// Intensity used in each interval.
    pub lambdas: Vec<f64>,
    /// Censored mean yield of each interval.
    pub expected_yields: Vec<f64>,
}

// Float dust guard on the stopping test.
const STOP_SLACK: f64 = 1e-9;

/// Iterates interval by interval, accumulating expected yields until the
/// decoded count plus the expected uncovered symbols reaches `k`.
pub fn expected_dopings(k: usize, delta: f64) -> Result<DopingPrediction> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("need k >= 3, got {k}")));
    }
    let uncovered = uncovered_count(k, delta)?.exact;
    let kf = k as f64;
    let mut decoded = 0.0;
    let mut lambdas = Vec::new();
    let mut expected_yields = Vec::new();
    loop {
        if lambdas.len() >= k {
            return Err(Error::Diverged(lambdas.len()));
        }
        let remaining = kf - decoded;
        let lambda = ripple_intensity(k, delta, decoded);
        let t_max = remaining.floor() as usize;
        let ey = if t_max >= 2 {
            expected_yield(&interdoping_yield_pmf(lambda, t_max)?, k, decoded)
        } else {
            remaining
        };
        lambdas.push(lambda);
        expected_yields.push(ey);
        decoded += ey;
        if decoded + uncovered >= kf - STOP_SLACK {
            break;
        }
    }
    let stall_dopings = lambdas.len();
    let predicted_kd = stall_dopings as f64 + uncovered;
    Ok(DopingPrediction {
        k,
        delta,
        stall_dopings,
        uncovered,
        predicted_kd,
        percent: 100.0 * predicted_kd / kf,
        lambdas,
        expected_yields,
    })
}

/// Draws one interdoping yield by running the ripple walk from two with
/// `Poisson(lambda) - 1` increments. `None` if it survives `cap` steps.
pub fn sample_walk_yield<R: Rng + ?Sized>(lambda: f64, cap: usize, rng: &mut R) -> Result<Option<usize>> {
    let releases = Poisson::new(lambda).map_err(|e| Error::InvalidParameter(format!("lambda {lambda}: {e}")))?;
    let mut ripple: i64 = 2;
    for t in 1..=cap {
        ripple += releases.sample(rng) as i64 - 1;
        if ripple <= 0 {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Transition matrix of the ripple Markov chain. State `v` (1-based)
/// stands for a ripple of `v - 1` symbols; state 1 is absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Entry for 1-based states `from`, `to`.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[(from - 1) * self.size + (to - 1)]
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        let r = (from - 1) * self.size;
        self.data[r..r + self.size].iter().sum()
    }

    /// `p_t = e_3 P^t e_1` for `t = 0..=u_max`: probability of having been
    /// trapped by time `t` starting from a ripple of two.
    pub fn trapped_by(&self, u_max: usize) -> Vec<f64> {
        let n = self.size;
        let mut x = vec![0.0; n];
        x[2] = 1.0;
        let mut out = Vec::with_capacity(u_max + 1);
        out.push(x[0]);
        let mut next = vec![0.0; n];
        for _ in 0..u_max {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (from, &mass) in x.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let row = &self.data[from * n..(from + 1) * n];
                for (acc, p) in next.iter_mut().zip(row) {
                    *acc += mass * p;
                }
            }
            std::mem::swap(&mut x, &mut next);
            out.push(x[0]);
        }
        out
    }
}

/// Builds the `k x k` ripple chain for intensity `lambda`. `max_increment`
/// caps the upward jump `b` (the release truncation); `None` only limits it
/// by the matrix edge.
pub fn ripple_transition_matrix(lambda: f64, k: usize, max_increment: Option<usize>) -> Result<TransitionMatrix> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("transition matrix needs k >= 3, got {k}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let eta: Vec<f64> = (0..=k as u64).map(|r| poisson_pmf(lambda, r)).collect();
    let mut data = vec![0.0; k * k];
    data[0] = 1.0;
    for v in 2..=k {
        let top = max_increment.unwrap_or(usize::MAX).min(k - v);
        // b = -1 ..= top, entry (v, v + b) = eta(1 + b)
        for released in 0..=top + 1 {
            let to = v - 1 + released;
            data[(v - 1) * k + (to - 1)] = eta[released];
        }
    }
    Ok(TransitionMatrix { size: k, data })
}

/// Probability that the walk is first trapped exactly `u` steps after a
/// doping: `e_3 (P^u - P^{u-1}) e_1`.
pub fn trapping_prob(matrix: &TransitionMatrix, u: usize) -> f64 {
    if u == 0 {
        return 0.0;
    }
    let p = matrix.trapped_by(u);
    p[u] - p[u - 1]
}
