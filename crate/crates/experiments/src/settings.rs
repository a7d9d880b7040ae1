//! Experiment parameters from command-line flags and an optional
//! `key=value` config file. Flags win over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use squad_core::cost::{HopModel, Strategy};
use squad_core::network::{CombineInput, Dissemination, NetworkConfig, SquadSizeModel, StorageMode};

use crate::ExpError;

/// Flags shared by every subcommand. Values stay strings until they are
/// merged with the config file so both report errors the same way.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Number of source packets (relays).
    #[arg(long)]
    pub k: Option<String>,
    /// Expected squad size.
    #[arg(long)]
    pub h: Option<String>,
    /// Collection surplus: k_s = k (1 + delta).
    #[arg(long)]
    pub delta: Option<String>,
    /// Delta values as `a:b:step` or a comma list.
    #[arg(long = "delta-grid")]
    pub delta_grid: Option<String>,
    /// Squad sizes as `a:b:step`, `log:a:b:n` or a comma list.
    #[arg(long = "h-grid")]
    pub h_grid: Option<String>,
    /// Degree distributions, comma separated: is, rs.
    #[arg(long)]
    pub dist: Option<String>,
    /// Robust Soliton constant c.
    #[arg(long = "rs-c")]
    pub rs_c: Option<String>,
    /// Robust Soliton failure bound.
    #[arg(long = "rs-delta")]
    pub rs_delta: Option<String>,
    /// d1 (flooding) or d2 (degree-two combining); comma list for disseminate.
    #[arg(long)]
    pub dissemination: Option<String>,
    /// coupon, is or rs. Overrides --dist for the network.
    #[arg(long)]
    pub storage: Option<String>,
    /// What degree-two storage nodes combine: decoded or raw.
    #[arg(long)]
    pub combine: Option<String>,
    /// fixed or poisson squad sizes.
    #[arg(long = "squad-model")]
    pub squad_model: Option<String>,
    /// Upfront symbols; defaults to round(k (1 + delta)).
    #[arg(long = "k-s")]
    pub k_s: Option<String>,
    /// Relay the collector sits at.
    #[arg(long)]
    pub collector: Option<String>,
    /// Bytes per source packet.
    #[arg(long)]
    pub payload: Option<String>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    pub trials: Option<String>,
    /// Base seed; trial t uses seed XOR t.
    #[arg(long)]
    pub seed: Option<String>,
    /// costeq or sec2.
    #[arg(long = "hop-model")]
    pub hop_model: Option<String>,
    /// Strategies for `cost --mode strategies`.
    #[arg(long)]
    pub strategies: Option<String>,
    /// RS failure parameter in the no-doping symbol count.
    #[arg(long = "eps-rs")]
    pub eps_rs: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    fn flags(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("k", self.k.as_ref()),
            ("h", self.h.as_ref()),
            ("delta", self.delta.as_ref()),
            ("delta-grid", self.delta_grid.as_ref()),
            ("h-grid", self.h_grid.as_ref()),
            ("dist", self.dist.as_ref()),
            ("rs-c", self.rs_c.as_ref()),
            ("rs-delta", self.rs_delta.as_ref()),
            ("dissemination", self.dissemination.as_ref()),
            ("storage", self.storage.as_ref()),
            ("combine", self.combine.as_ref()),
            ("squad-model", self.squad_model.as_ref()),
            ("k-s", self.k_s.as_ref()),
            ("collector", self.collector.as_ref()),
            ("payload", self.payload.as_ref()),
            ("trials", self.trials.as_ref()),
            ("seed", self.seed.as_ref()),
            ("hop-model", self.hop_model.as_ref()),
            ("strategies", self.strategies.as_ref()),
            ("eps-rs", self.eps_rs.as_ref()),
        ]
    }
}

const KEYS: &[&str] = &[
    "k", "h", "delta", "delta-grid", "h-grid", "dist", "rs-c", "rs-delta", "dissemination", "storage", "combine",
    "squad-model", "k-s", "collector", "payload", "trials", "seed", "hop-model", "strategies", "eps-rs",
];

/// Where a raw value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Flag(&'static str),
    File { path: PathBuf, line: usize },
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag(name) => write!(f, "--{name}"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Default => f.write_str("default"),
        }
    }
}

/// Parses a `key=value` file. Blank lines and `#` comments are skipped;
/// keys accept `-` or `_`.
pub fn parse_config(path: &Path, text: &str) -> Result<BTreeMap<String, (String, Origin)>, ExpError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let origin = Origin::File { path: path.to_path_buf(), line: i + 1 };
        let Some((key, value)) = line.split_once('=') else {
            return Err(ExpError::Config { origin, message: format!("expected key=value, got '{line}'") });
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(ExpError::Config { origin, message: format!("unknown key '{key}'") });
        }
        out.insert(key, (value.trim().to_string(), origin));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    Is,
    Rs,
}

impl DistKind {
    pub fn name(self) -> &'static str {
        match self {
            DistKind::Is => "is",
            DistKind::Rs => "rs",
        }
    }
}

impl FromStr for DistKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "is" => Ok(DistKind::Is),
            "rs" => Ok(DistKind::Rs),
            _ => Err(format!("unknown distribution '{s}' (expected is or rs)")),
        }
    }
}

fn parse_dissemination(s: &str) -> Result<Dissemination, String> {
    match s {
        "d1" => Ok(Dissemination::DegreeOne),
        "d2" => Ok(Dissemination::DegreeTwo),
        _ => Err(format!("unknown dissemination '{s}' (expected d1 or d2)")),
    }
}

pub fn dissemination_name(d: Dissemination) -> &'static str {
    match d {
        Dissemination::DegreeOne => "d1",
        Dissemination::DegreeTwo => "d2",
    }
}

/// Storage choice before RS parameters are attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Coupon,
    Is,
    Rs,
}

impl FromStr for StorageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coupon" => Ok(StorageKind::Coupon),
            "is" => Ok(StorageKind::Is),
            "rs" => Ok(StorageKind::Rs),
            _ => Err(format!("unknown storage '{s}' (expected coupon, is or rs)")),
        }
    }
}

/// Parses `a:b:step` (inclusive, tolerant to rounding) or `v1,v2,...`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected log:a:b:n, got '{s}'"));
        };
        let (a, b) = (parse_f64(a)?, parse_f64(b)?);
        let n: usize = n.parse().map_err(|_| format!("bad point count '{n}'"))?;
        if !(a > 0.0 && b >= a) || n < 2 {
            return Err(format!("log grid needs 0 < a <= b and n >= 2, got '{s}'"));
        }
        let (la, lb) = (a.ln(), b.ln());
        return Ok((0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(format!("expected a:b:step, got '{s}'"));
        };
        let (a, b, step) = (parse_f64(a)?, parse_f64(b)?, parse_f64(step)?);
        if !(step > 0.0) || b < a {
            return Err(format!("grid needs step > 0 and b >= a, got '{s}'"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Multiply rather than accumulate so grid points are reproducible.
        return Ok((0..=n).map(|i| round_grid(a + i as f64 * step)).collect());
    }
    s.split(',').map(|v| parse_f64(v.trim())).collect()
}

fn round_grid(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("'{s}' is not a number"))
}

/// Resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k: usize,
    pub h: f64,
    pub deltas: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub dists: Vec<DistKind>,
    pub rs_c: f64,
    pub rs_delta: f64,
    pub disseminations: Vec<Dissemination>,
    pub storage: Option<StorageKind>,
    pub combine: CombineInput,
    pub squad_model: SquadSizeModel,
    pub k_s: Option<usize>,
    pub collector: usize,
    pub payload: usize,
    pub trials: usize,
    pub seed: u64,
    pub hop: HopModel,
    pub strategies: Vec<Strategy>,
    pub eps_rs: f64,
    /// Every resolved key with its textual value, for CSV headers.
    pub echo: Vec<(String, String)>,
}

struct Raw {
    values: BTreeMap<String, (String, Origin)>,
    echo: Vec<(String, String)>,
}

impl Raw {
    fn get<T>(&mut self, key: &'static str, default: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ExpError> {
        let (text, origin) = self.values.remove(key).unwrap_or_else(|| (default.to_string(), Origin::Default));
        let value = parse(&text).map_err(|message| ExpError::Config { origin, message: format!("{key}: {message}") })?;
        self.echo.push((key.to_string(), text));
        Ok(value)
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("'{s}' is not a valid value"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let out: Vec<T> = s.split(',').map(|p| item(p.trim())).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

impl Settings {
    /// Merges the config file (if any) with the flags and parses everything.
    pub fn resolve(args: &CommonArgs) -> Result<Self, ExpError> {
        let mut values = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ExpError::Config { origin: Origin::Flag("config"), message: format!("{}: {e}", path.display()) })?;
                parse_config(path, &text)?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in args.flags() {
            if let Some(v) = value {
                values.insert(key.to_string(), (v.clone(), Origin::Flag(key)));
            }
        }
        // A single delta is a one-point grid; a flag beats a file entry.
        if let Some((v, o)) = values.remove("delta") {
            let grid_from_file = values.get("delta-grid").is_none_or(|(_, g)| !matches!(g, Origin::Flag(_)));
            if matches!(o, Origin::Flag(_)) && grid_from_file || !values.contains_key("delta-grid") {
                values.insert("delta-grid".into(), (v, o));
            }
        }

        let mut raw = Raw { values, echo: Vec::new() };
        let k: usize = raw.get("k", "1000", |s| {
            let k: usize = parse_num(s)?;
            if k < 3 { Err(format!("k must be at least 3, got {k}")) } else { Ok(k) }
        })?;
        let h: f64 = raw.get("h", "200", |s| {
            let h = parse_f64(s)?;
            if h < 1.0 { Err(format!("h must be at least 1, got {h}")) } else { Ok(h) }
        })?;
        let deltas = raw.get("delta-grid", "0", |s| {
            let g = parse_grid(s)?;
            if g.iter().any(|d| *d < 0.0) { Err("delta must be nonnegative".into()) } else { Ok(g) }
        })?;
        let h_grid = raw.get("h-grid", "10,15,30", |s| {
            let g = parse_grid(s)?;
            if g.iter().any(|h| *h < 1.0) { Err("squad sizes must be at least 1".into()) } else { Ok(g) }
        })?;
        let dists = raw.get("dist", "is", |s| parse_list(s, DistKind::from_str))?;
        let rs_c = raw.get("rs-c", "0.1", parse_f64)?;
        let rs_delta = raw.get("rs-delta", "0.5", parse_f64)?;
        let disseminations = raw.get("dissemination", "d1", |s| parse_list(s, parse_dissemination))?;
        let storage = raw.get("storage", "", |s| if s.is_empty() { Ok(None) } else { s.parse().map(Some) })?;
        let combine = raw.get("combine", "decoded", |s| match s {
            "decoded" => Ok(CombineInput::DegreeOneInputs),
            "raw" => Ok(CombineInput::DegreeTwoInputs),
            _ => Err(format!("unknown combine mode '{s}' (expected decoded or raw)")),
        })?;
        let squad_model = raw.get("squad-model", "fixed", |s| match s {
            "fixed" => Ok(SquadSizeModel::Fixed),
            "poisson" => Ok(SquadSizeModel::Poisson),
            _ => Err(format!("unknown squad model '{s}' (expected fixed or poisson)")),
        })?;
        let k_s = raw.get("k-s", "", |s| if s.is_empty() { Ok(None) } else { parse_num(s).map(Some) })?;
        let collector = raw.get("collector", "0", |s| {
            let c: usize = parse_num(s)?;
            if c >= k { Err(format!("collector must be below k = {k}")) } else { Ok(c) }
        })?;
        let payload = raw.get("payload", "32", |s| {
            let p: usize = parse_num(s)?;
            if p == 0 { Err("payload must be positive".into()) } else { Ok(p) }
        })?;
        let trials = raw.get("trials", "100", |s| {
            let t: usize = parse_num(s)?;
            if t == 0 { Err("trials must be at least 1".into()) } else { Ok(t) }
        })?;
        let seed = raw.get("seed", "1", parse_num::<u64>)?;
        let hop = raw.get("hop-model", "costeq", |s| s.parse::<HopModel>().map_err(|e| e.to_string()))?;
        let strategies = raw.get("strategies", "polling,coupon,rs_no_doping,is_doping", |s| {
            parse_list(s, |x| x.parse::<Strategy>().map_err(|e| e.to_string()))
        })?;
        let eps_rs = raw.get("eps-rs", "0.5", |s| {
            let e = parse_f64(s)?;
            if e > 0.0 { Ok(e) } else { Err("eps-rs must be positive".into()) }
        })?;
        Ok(Self {
            k,
            h,
            deltas,
            h_grid,
            dists,
            rs_c,
            rs_delta,
            disseminations,
            storage,
            combine,
            squad_model,
            k_s,
            collector,
            payload,
            trials,
            seed,
            hop,
            strategies,
            eps_rs,
            echo: raw.echo,
        })
    }

    pub fn delta(&self) -> f64 {
        self.deltas[0]
    }

    /// Upfront symbols for a given surplus.
    pub fn upfront(&self, delta: f64) -> usize {
        self.k_s.unwrap_or_else(|| (self.k as f64 * (1.0 + delta)).round() as usize)
    }

    /// Storage mode for a run with degree distribution `dist`.
    pub fn storage_mode(&self, dist: DistKind) -> StorageMode {
        let kind = self.storage.unwrap_or(match dist {
            DistKind::Is => StorageKind::Is,
            DistKind::Rs => StorageKind::Rs,
        });
        match kind {
            StorageKind::Coupon => StorageMode::Coupon,
            StorageKind::Is => StorageMode::IsCombining,
            StorageKind::Rs => StorageMode::RsCombining { c: self.rs_c, delta_rs: self.rs_delta },
        }
    }

    pub fn network_config(&self, dist: DistKind) -> NetworkConfig {
        NetworkConfig {
            k: self.k,
            h: self.h,
            squad_size_model: self.squad_model,
            dissemination: self.disseminations[0],
            storage: self.storage_mode(dist),
            combine_input: self.combine,
        }
    }
}
