//! Per-source-packet collection cost of the two-phase collector.
//!
//! Upfront symbols are pulled from a supersquad of `s = ceil(k_s / h)`
//! adjacent squads at `c_s` hops each; every doped symbol is polled from its
//! relay at an average `c_d = ceil(k / 4)` hops.

use std::fmt;
use std::str::FromStr;

use crate::analytics::expected_dopings;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HopModel {
    /// `c_s = 1 + (s + 1) / 4`
    #[default]
    CostEq,
    /// `c_s = 1 + (s - 1) / 4`
    Sec2,
}

impl HopModel {
    pub fn name(self) -> &'static str {
        match self {
            HopModel::CostEq => "costeq",
            HopModel::Sec2 => "sec2",
        }
    }

    pub fn supersquad_hops(self, s: usize) -> f64 {
        let s = s as f64;
        match self {
            HopModel::CostEq => 1.0 + (s + 1.0) / 4.0,
            HopModel::Sec2 => 1.0 + (s - 1.0) / 4.0,
        }
    }
}

impl FromStr for HopModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "costeq" | "eq_costeq" => Ok(HopModel::CostEq),
            "sec2" => Ok(HopModel::Sec2),
            other => Err(Error::InvalidParameter(format!("unknown hop model '{other}' (expected costeq or sec2)"))),
        }
    }
}

impl fmt::Display for HopModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Polling,
    Coupon,
    RsNoDoping,
    IsDoping,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Polling, Strategy::Coupon, Strategy::RsNoDoping, Strategy::IsDoping];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Polling => "polling",
            Strategy::Coupon => "coupon",
            Strategy::RsNoDoping => "rs_no_doping",
            Strategy::IsDoping => "is_doping",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPoint {
    pub strategy: Strategy,
    pub k: usize,
    pub h: f64,
    pub delta: f64,
    pub k_s: f64,
    pub k_d: f64,
    pub c_t: f64,
}

impl CostPoint {
    /// Cost relative to pure polling.
    pub fn normalized(&self) -> f64 {
        self.c_t / doping_hops(self.k)
    }
}

/// Average hops to poll one packet, `ceil(k / 4)`.
pub fn doping_hops(k: usize) -> f64 {
    k.div_ceil(4) as f64
}

/// Squads needed to supply `k_s` symbols at `h` per squad.
pub fn supersquad_squads(k_s: f64, h: f64) -> usize {
    if k_s <= 0.0 {
        0
    } else {
        (k_s / h).ceil() as usize
    }
}

/// `c_T = (c_s k_s + ceil(k/4) k_d) / k`.
pub fn collection_cost(k: usize, k_s: f64, k_d: f64, h: f64, hop: HopModel) -> f64 {
    let upfront = if k_s > 0.0 { hop.supersquad_hops(supersquad_squads(k_s, h)) * k_s } else { 0.0 };
    (upfront + doping_hops(k) * k_d) / k as f64
}

/// How many nodes the coupon collector reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouponCount {
    /// `ceil(k H_k)`, the coupon-collector mean.
    #[default]
    Harmonic,
    /// `ceil(k ln k)`.
    KLogK,
}

/// Where `is_doping` takes `k_d` from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DopingEstimate {
    #[default]
    Analytic,
    /// A measured value, e.g. a Monte Carlo mean.
    Given(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub delta: f64,
    /// Failure parameter in the RS symbol count.
    pub eps_rs: f64,
    pub coupon: CouponCount,
    pub doping: DopingEstimate,
    pub hop: HopModel,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self { delta: 0.0, eps_rs: 0.5, coupon: CouponCount::Harmonic, doping: DopingEstimate::Analytic, hop: HopModel::CostEq }
    }
}

pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Coupon nodes read for `k` sources.
pub fn coupon_symbols(k: usize, count: CouponCount) -> f64 {
    let k_f = k as f64;
    match count {
        CouponCount::Harmonic => (k_f * harmonic(k)).ceil(),
        CouponCount::KLogK => (k_f * k_f.ln()).ceil(),
    }
}

/// `k + sqrt(k) ln^2(k / eps)` symbols for RS decoding without doping.
pub fn rs_symbols(k: usize, eps_rs: f64) -> f64 {
    let k_f = k as f64;
    k_f + k_f.sqrt() * (k_f / eps_rs).ln().powi(2)
}

/// `(k_s, k_d)` pair of a strategy.
pub fn strategy_load(strategy: Strategy, k: usize, params: &StrategyParams) -> Result<(f64, f64)> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("need k >= 3, got {k}")));
    }
    let k_f = k as f64;
    Ok(match strategy {
        Strategy::Polling => (0.0, k_f),
        Strategy::Coupon => {
            let k_s = coupon_symbols(k, params.coupon);
            (k_s, coupon_residual(k, k_s))
        }
        Strategy::RsNoDoping => {
            if !(params.eps_rs > 0.0) {
                return Err(Error::InvalidParameter(format!("eps_rs must be positive, got {}", params.eps_rs)));
            }
            (rs_symbols(k, params.eps_rs), 0.0)
        }
        Strategy::IsDoping => {
            let k_s = k_f * (1.0 + params.delta);
            let k_d = match params.doping {
                DopingEstimate::Analytic => expected_dopings(k, params.delta)?.predicted_kd,
                DopingEstimate::Given(v) => v,
            };
            (k_s, k_d)
        }
    })
}

pub fn strategy_cost(strategy: Strategy, k: usize, h: f64, params: &StrategyParams) -> Result<CostPoint> {
    if !(h >= 1.0) {
        return Err(Error::InvalidParameter(format!("h must be >= 1, got {h}")));
    }
    let (k_s, k_d) = strategy_load(strategy, k, params)?;
    let delta = if strategy == Strategy::IsDoping { params.delta } else { 0.0 };
    Ok(CostPoint { strategy, k, h, delta, k_s, k_d, c_t: collection_cost(k, k_s, k_d, h, params.hop) })
}

/// Expected `k_d` for each `delta` on a grid, for reuse across many `h`.
pub fn doping_table(k: usize, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    deltas.iter().map(|&d| Ok((d, expected_dopings(k, d)?.predicted_kd))).collect()
}

/// Cheapest `is_doping` point over a precomputed `(delta, k_d)` table; ties
/// go to the smaller `delta`.
pub fn minimize_cost_with(k: usize, h: f64, table: &[(f64, f64)], hop: HopModel) -> Result<CostPoint> {
    let mut best: Option<CostPoint> = None;
    let mut sorted = table.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (delta, k_d) in sorted {
        let params = StrategyParams { delta, doping: DopingEstimate::Given(k_d), hop, ..Default::default() };
        let point = strategy_cost(Strategy::IsDoping, k, h, &params)?;
        if best.is_none_or(|b| point.c_t < b.c_t) {
            best = Some(point);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("delta grid is empty".into()))
}

/// Minimizes the `is_doping` cost over `deltas` using analytical `k_d`.
pub fn minimize_cost(k: usize, h: f64, deltas: &[f64], hop: HopModel) -> Result<CostPoint> {
    minimize_cost_with(k, h, &doping_table(k, deltas)?, hop)
}

/// Expected sources left uncovered by `k_s` uniform coupon reads.
pub fn coupon_residual(k: usize, k_s: f64) -> f64 {
    let k_f = k as f64;
    k_f * (k_s * (-1.0 / k_f).ln_1p()).exp()
}
