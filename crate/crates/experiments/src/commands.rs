use rayon::prelude::*;
use squad_core::analytics::{expected_dopings, interdoping_yield_pmf};
use squad_core::codec::SourceBlock;
use squad_core::cost::{
    doping_table, minimize_cost_with, strategy_cost, CostPoint, DopingEstimate, Strategy, StrategyParams,
};
use squad_core::network::{disseminate, simulate_collection_with_doping, CollectionOutcome, Network};
use squad_core::rng::trial_rng;

use crate::output::{Cell, Table};
use crate::settings::{dissemination_name, DistKind, Settings};
use crate::ExpError;

fn table_for(command: &str, settings: &Settings, header: Vec<&'static str>) -> Table {
    let mut t = Table::new(header);
    t.meta("command", command);
    for (k, v) in &settings.echo {
        t.meta(k, v);
    }
    t
}

/// One collection-and-decode run on a freshly built network.
pub fn run_trial(settings: &Settings, dist: DistKind, delta: f64, trial: usize) -> Result<CollectionOutcome, ExpError> {
    let mut rng = trial_rng(settings.seed, trial as u64);
    let cfg = settings.network_config(dist);
    let block = SourceBlock::random(settings.k, settings.payload, &mut rng)?;
    let net = Network::build(cfg, &mut rng)?;
    let schedule = disseminate(cfg.dissemination, &block)?;
    let out = simulate_collection_with_doping(&net, &schedule, &block, settings.collector, settings.upfront(delta), &mut rng)?;
    if !out.exact {
        return Err(ExpError::Verification(format!("trial {trial} decoded a wrong packet")));
    }
    Ok(out)
}

/// Doping counts of `settings.trials` trials, in trial order.
pub fn doping_counts(settings: &Settings, dist: DistKind, delta: f64) -> Result<Vec<usize>, ExpError> {
    (0..settings.trials)
        .into_par_iter()
        .map(|t| run_trial(settings, dist, delta, t).map(|o| o.decode.k_d))
        .collect()
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

pub fn decode_sim(settings: &Settings) -> Result<Table, ExpError> {
    let mut t = table_for(
        "decode-sim",
        settings,
        vec!["kind", "strategy", "delta", "trial", "seed", "k", "k_s", "k_d", "p_d", "var_p_d"],
    );
    let k = settings.k;
    for &dist in &settings.dists {
        for &delta in &settings.deltas {
            let k_s = settings.upfront(delta);
            let counts = doping_counts(settings, dist, delta)?;
            for (trial, &k_d) in counts.iter().enumerate() {
                t.push(vec![
                    "trial".into(),
                    dist.name().into(),
                    delta.into(),
                    trial.into(),
                    (settings.seed ^ trial as u64).into(),
                    k.into(),
                    k_s.into(),
                    k_d.into(),
                    (k_d as f64 / k as f64).into(),
                    Cell::Empty,
                ]);
            }
            let ratios: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
            let (mean, var) = mean_var(&ratios);
            t.push(vec![
                "summary".into(),
                dist.name().into(),
                delta.into(),
                Cell::Empty,
                settings.seed.into(),
                k.into(),
                k_s.into(),
                (mean * k as f64).into(),
                mean.into(),
                var.into(),
            ]);
        }
    }
    Ok(t)
}

pub fn analyze(settings: &Settings) -> Result<Table, ExpError> {
    let mut t = table_for("analyze", settings, vec!["delta", "stall_dopings", "uncovered", "predicted_kd", "p_d"]);
    t.meta("assumption", "predicted_kd = stall_dopings + uncovered (uncovered symbols are doped in addition to loop iterations)");
    let rows: Vec<_> = settings.deltas.par_iter().map(|&d| expected_dopings(settings.k, d)).collect::<Result<_, _>>()?;
    for p in rows {
        t.push(vec![p.delta.into(), p.stall_dopings.into(), p.uncovered.into(), p.predicted_kd.into(), (p.percent / 100.0).into()]);
    }
    Ok(t)
}

pub fn yield_dump(settings: &Settings, lambda: f64, t_max: usize) -> Result<Table, ExpError> {
    let mut t = table_for("analyze", settings, vec!["t", "p"]);
    t.meta("lambda", lambda);
    let pmf = interdoping_yield_pmf(lambda, t_max)?;
    for (i, p) in pmf.probs.iter().enumerate().skip(1) {
        t.push(vec![i.into(), (*p).into()]);
    }
    Ok(t)
}

pub fn disseminate_cmd(settings: &Settings) -> Result<Table, ExpError> {
    let mut t = table_for(
        "disseminate",
        settings,
        vec!["mode", "k", "relay", "transmissions", "rounds", "verified", "max_buffer"],
    );
    let block = SourceBlock::random(settings.k, settings.payload, &mut trial_rng(settings.seed, 0))?;
    for &mode in &settings.disseminations {
        let s = disseminate(mode, &block)?;
        for (relay, n) in s.transmission_counts().into_iter().enumerate() {
            t.push(vec![
                dissemination_name(mode).into(),
                settings.k.into(),
                relay.into(),
                n.into(),
                s.rounds.into(),
                s.verified.into(),
                s.max_buffer.into(),
            ]);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CostMode {
    /// is_doping cost over the delta x h grid.
    #[default]
    Delta,
    /// Every strategy over the h grid.
    Strategies,
}

const COST_HEADER: [&str; 9] = ["strategy", "k", "h", "delta", "k_s", "k_d", "c_T", "c_T_normalized", "optimal"];

fn cost_row(p: &CostPoint, optimal: bool) -> Vec<Cell> {
    vec![
        p.strategy.name().into(),
        p.k.into(),
        p.h.into(),
        p.delta.into(),
        p.k_s.into(),
        p.k_d.into(),
        p.c_t.into(),
        p.normalized().into(),
        optimal.into(),
    ]
}

/// `(delta, k_d)` pairs, analytic or from Monte Carlo means.
pub fn kd_table(settings: &Settings, monte_carlo: bool) -> Result<Vec<(f64, f64)>, ExpError> {
    if !monte_carlo {
        return Ok(doping_table(settings.k, &settings.deltas)?);
    }
    settings
        .deltas
        .iter()
        .map(|&d| {
            let counts = doping_counts(settings, DistKind::Is, d)?;
            Ok((d, counts.iter().sum::<usize>() as f64 / counts.len() as f64))
        })
        .collect()
}

pub fn cost(settings: &Settings, mode: CostMode, monte_carlo: bool) -> Result<Table, ExpError> {
    let mut t = table_for("cost", settings, COST_HEADER.to_vec());
    t.meta("mode", format!("{mode:?}").to_lowercase());
    t.meta("kd_source", if monte_carlo { "monte_carlo" } else { "analytic" });
    let k = settings.k;
    let table = kd_table(settings, monte_carlo)?;
    for &h in &settings.h_grid {
        let best = minimize_cost_with(k, h, &table, settings.hop)?;
        match mode {
            CostMode::Delta => {
                for &(delta, k_d) in &table {
                    let params = StrategyParams { delta, doping: DopingEstimate::Given(k_d), hop: settings.hop, ..Default::default() };
                    let p = strategy_cost(Strategy::IsDoping, k, h, &params)?;
                    t.push(cost_row(&p, delta == best.delta));
                }
            }
            CostMode::Strategies => {
                for &s in &settings.strategies {
                    let p = if s == Strategy::IsDoping {
                        best
                    } else {
                        let params = StrategyParams { eps_rs: settings.eps_rs, hop: settings.hop, ..Default::default() };
                        strategy_cost(s, k, h, &params)?
                    };
                    t.push(cost_row(&p, true));
                }
            }
        }
    }
    Ok(t)
}
