//! Parameter scans over `N_tot`, Bob's loss or fibre length, and the canned
//! figure presets. Results are tables with a parameter header so that the
//! CLI only has to pick a format and a destination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::bounds::{LogBase, SecurityBudget};
use crate::error::{invalid, Result};
use crate::gaussian::ChannelParams;
use crate::keyrate::{
    asymptotic_rates, calibrate, distance_scenario, finite_key_length, optimize_with_model, ur_gap,
    ChannelModel, KeyRateResult, OptimizerSettings,
};
use crate::simulator::run_protocol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    NTot,
    EtaB,
    DistanceKm,
}

impl AxisKind {
    pub fn column(&self) -> &'static str {
        match self {
            AxisKind::NTot => "n_tot",
            AxisKind::EtaB => "eta_b",
            AxisKind::DistanceKm => "distance_km",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub kind: AxisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl AxisConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, &self.grid) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(g)) => Ok(g.values()),
            _ => Err(invalid("axis", "give exactly one of `values` or `grid`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub eps_s: f64,
    pub eps_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_t: Option<f64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            eps_s: 1e-9,
            eps_c: 1e-9,
            eps_1: None,
            eps_2: None,
            eps_t: None,
        }
    }
}

impl BudgetConfig {
    pub fn budget(&self) -> SecurityBudget {
        let mut b = SecurityBudget::with_targets(self.eps_s, self.eps_c);
        if let Some(v) = self.eps_1 {
            b.eps_1 = v;
        }
        if let Some(v) = self.eps_2 {
            b.eps_2 = v;
        }
        if let Some(v) = self.eps_t {
            b.eps_t = v;
        }
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceModel {
    pub db_per_km: f64,
    pub coupling_loss: f64,
}

impl Default for DistanceModel {
    fn default() -> Self {
        Self {
            db_per_km: 0.2,
            coupling_loss: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Finite,
    Asymptotic,
    Gap,
    Simulate,
}

/// Protocol settings for simulate mode. `r` and `delta` are optimised at the
/// axis point when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub rounds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBaseConfig {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl From<LogBaseConfig> for LogBase {
    fn from(v: LogBaseConfig) -> Self {
        match v {
            LogBaseConfig::Two => LogBase::Two,
            LogBaseConfig::E => LogBase::E,
        }
    }
}

fn default_transmittance() -> f64 {
    0.99
}

fn default_n_tot() -> f64 {
    1e9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub channel: ChannelParams,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default = "default_transmittance")]
    pub transmittance: f64,
    /// Used when the axis is not `n_tot`.
    #[serde(default = "default_n_tot")]
    pub n_tot: f64,
    pub axis: AxisConfig,
    #[serde(default)]
    pub distance: DistanceModel,
    pub mode: ScanMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_base: Option<LogBaseConfig>,
    /// Adds the asymptotic rates next to the finite rate.
    #[serde(default)]
    pub asymptotic_columns: bool,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("line {}, column {}: {e}", e.line(), e.column()))
    }

    fn settings(&self) -> OptimizerSettings {
        let mut s = OptimizerSettings {
            transmittance: self.transmittance,
            ..OptimizerSettings::default()
        };
        if let Some(b) = self.log_base {
            s.options.log_base = b.into();
        }
        s
    }

    /// Channel and total rounds at one axis value.
    fn point(&self, x: f64) -> (ChannelParams, f64) {
        let mut ch = self.channel;
        let mut n = self.n_tot;
        match self.axis.kind {
            AxisKind::NTot => n = x,
            AxisKind::EtaB => ch.eta_b = x,
            AxisKind::DistanceKm => {
                ch.eta_b = distance_scenario(x, self.distance.db_per_km, self.distance.coupling_loss)
            }
        }
        (ch, n)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Parses and checks a config; parse failures become error entries.
pub fn validate_str(text: &str) -> (Option<ScanConfig>, Diagnostics) {
    match ScanConfig::from_json(text) {
        Ok(c) => {
            let d = validate(&c);
            (Some(c), d)
        }
        Err(e) => (
            None,
            Diagnostics {
                errors: vec![e],
                warnings: vec![],
            },
        ),
    }
}

pub fn validate(c: &ScanConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    let mut err = |field: &str, msg: String| d.errors.push(format!("{field}: {msg}"));
    if let Err(e) = c.channel.validate() {
        err("channel", e.to_string());
    }
    if let Err(e) = c.budget.budget().validate() {
        err("budget", e.to_string());
    }
    if !(c.transmittance > 0.5 && c.transmittance < 1.0) {
        err("transmittance", format!("{} outside (1/2, 1)", c.transmittance));
    }
    if !(c.n_tot >= 1.0 && c.n_tot.is_finite()) {
        err("n_tot", format!("{} must be at least 1", c.n_tot));
    }
    if !(c.distance.db_per_km >= 0.0 && (0.0..1.0).contains(&c.distance.coupling_loss)) {
        err("distance", "db_per_km must be non-negative and coupling_loss in [0, 1)".into());
    }
    match c.axis.points() {
        Err(e) => err("axis", e.to_string()),
        Ok(v) => {
            if v.is_empty() {
                err("axis", "grid is empty".into());
            }
            if v.iter().any(|x| !x.is_finite()) {
                err("axis", "grid values must be finite".into());
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                err("axis", "grid must be strictly increasing".into());
            }
            if let Some(g) = c.axis.grid {
                if g.spacing == Spacing::Log && !(g.start > 0.0 && g.stop > 0.0) {
                    err("axis.grid", "log spacing needs positive end points".into());
                }
            }
            let ok = |x: &f64| match c.axis.kind {
                AxisKind::NTot => *x >= 1.0,
                AxisKind::EtaB => (0.0..1.0).contains(x),
                AxisKind::DistanceKm => *x >= 0.0,
            };
            if let Some(bad) = v.iter().find(|x| !ok(x)) {
                err("axis", format!("value {bad} out of range for {}", c.axis.kind.column()));
            }
        }
    }
    if c.mode == ScanMode::Simulate {
        match c.simulation {
            None => err("simulation", "simulate mode needs a `simulation` block".into()),
            Some(s) => {
                if !(s.rounds >= 1.0 && s.rounds <= 1e10) {
                    err("simulation.rounds", format!("{} outside [1, 1e10]", s.rounds));
                }
                if let Some(r) = s.r {
                    if !(r > 0.0 && r < 1.0) {
                        err("simulation.r", format!("{r} outside (0, 1)"));
                    }
                }
                if let Some(dl) = s.delta {
                    if !(dl > 0.0 && dl <= 1.0) {
                        err("simulation.delta", format!("{dl} outside (0, 1]"));
                    }
                }
            }
        }
    }

    let mut warn = |msg: String| d.warnings.push(msg);
    if c.channel.lambda_sq > 15.0 || c.channel.lambda_asq > 20.0 {
        warn("squeezing beyond the 11/16 dB reference source".into());
    }
    if c.channel.eta_ex > 0.1 {
        warn(format!("excess noise {} is far above the reference 0.01", c.channel.eta_ex));
    }
    if c.transmittance < 0.9 {
        warn(format!("energy-test transmittance {} taps a large share of the signal", c.transmittance));
    }
    if c.channel.beta < 0.85 {
        warn(format!("reconciliation efficiency {} is below the studied range", c.channel.beta));
    }
    if let Ok(v) = c.axis.points() {
        let n_max = if c.axis.kind == AxisKind::NTot {
            v.iter().cloned().fold(c.n_tot, f64::max)
        } else {
            c.n_tot
        };
        if n_max > 1e12 {
            warn(format!("N_tot up to {n_max:e} is beyond the studied range (1e12)"));
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

/// Output table with a parameter header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub parameters: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

fn fmt_num(x: f64) -> String {
    // Non-finite values print as 0 so every cell parses as a number.
    let x = if x.is_finite() { x } else { 0.0 };
    format!("{x}")
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.parameters {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => fmt_num(*x),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_json(&self) -> String {
        let params: serde_json::Map<String, serde_json::Value> = self
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(k, c)| {
                        let v = match c {
                            Cell::Num(x) => serde_json::json!(if x.is_finite() { *x } else { 0.0 }),
                            Cell::Text(t) => serde_json::Value::String(t.clone()),
                        };
                        (k.clone(), v)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let v = serde_json::json!({ "parameters": params, "columns": self.columns, "rows": rows });
        serde_json::to_string_pretty(&v).expect("table serialises") + "\n"
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|v| {
            v.into_iter()
                .map(|c| match c {
                    Cell::Num(x) => *x,
                    Cell::Text(_) => f64::NAN,
                })
                .collect()
        })
    }

    fn append(&mut self, other: Table) {
        debug_assert_eq!(self.columns, other.columns);
        self.rows.extend(other.rows);
    }
}

fn header(c: &ScanConfig) -> Vec<(String, String)> {
    let b = c.budget.budget();
    let ch = &c.channel;
    let mut p = vec![
        ("mode".into(), format!("{:?}", c.mode).to_lowercase()),
        ("axis".into(), c.axis.kind.column().into()),
        ("lambda_sq_db".into(), ch.lambda_sq.to_string()),
        ("lambda_asq_db".into(), ch.lambda_asq.to_string()),
        ("eta_a".into(), ch.eta_a.to_string()),
        ("eta_ex".into(), ch.eta_ex.to_string()),
        ("beta".into(), ch.beta.to_string()),
        ("transmittance".into(), c.transmittance.to_string()),
        ("eps_s".into(), b.eps_s.to_string()),
        ("eps_c".into(), b.eps_c.to_string()),
        ("eps_1".into(), b.eps_1.to_string()),
        ("eps_2".into(), b.eps_2.to_string()),
        ("eps_t".into(), b.eps_t.to_string()),
        ("outcome_units".into(), "vacuum variance 1/2".into()),
    ];
    match c.axis.kind {
        AxisKind::NTot => p.push(("eta_b".into(), ch.eta_b.to_string())),
        AxisKind::EtaB => p.push(("n_tot".into(), c.n_tot.to_string())),
        AxisKind::DistanceKm => {
            p.push(("n_tot".into(), c.n_tot.to_string()));
            p.push(("db_per_km".into(), c.distance.db_per_km.to_string()));
            p.push(("coupling_loss".into(), c.distance.coupling_loss.to_string()));
        }
    }
    if c.mode == ScanMode::Simulate {
        p.push(("seed".into(), c.seed.to_string()));
    }
    if let Some(lb) = c.log_base {
        p.push(("log_base".into(), if lb == LogBaseConfig::Two { "2" } else { "e" }.into()));
    }
    p
}

fn lead_columns(c: &ScanConfig) -> Vec<String> {
    let mut cols = vec![];
    if c.axis.kind == AxisKind::DistanceKm {
        cols.push("distance_km".to_string());
    }
    cols.extend(["eta_b", "beta", "n_tot"].map(String::from));
    cols
}

fn lead_cells(c: &ScanConfig, x: f64, ch: &ChannelParams, n: f64) -> Vec<Cell> {
    let mut v = vec![];
    if c.axis.kind == AxisKind::DistanceKm {
        v.push(Cell::Num(x));
    }
    v.extend([Cell::Num(ch.eta_b), Cell::Num(ch.beta), Cell::Num(n)]);
    v
}

const FINITE_COLUMNS: [&str; 13] = [
    "rate", "key_length", "leak_ir", "r", "delta", "m_range", "alpha", "nu", "xi", "mu_stat", "d0",
    "sigma_star", "reason",
];

fn finite_cells(r: &KeyRateResult) -> Vec<Cell> {
    let c = &r.chosen;
    vec![
        Cell::Num(r.rate),
        Cell::Num(r.key_length),
        Cell::Num(r.leak_ir()),
        Cell::Num(c.r),
        Cell::Num(c.delta),
        Cell::Num(c.m_range),
        Cell::Num(c.alpha),
        Cell::Num(c.nu),
        Cell::Num(c.xi),
        Cell::Num(c.mu_stat),
        Cell::Num(c.d0),
        Cell::Num(r.sigma_star),
        Cell::Text(r.reason.map_or("ok", |x| x.as_str()).into()),
    ]
}

const SIM_COLUMNS: [&str; 15] = [
    "rounds", "r", "delta", "m_range", "alpha", "d0", "d_pe", "v_d_pe", "v_ya_pe", "v_yb_pe",
    "predicted_d_pe", "key_distance", "aborted", "rate", "reason",
];

fn run_point(c: &ScanConfig, x: f64, model: Option<&ChannelModel>) -> Result<Vec<Cell>> {
    let (ch, n) = c.point(x);
    let budget = c.budget.budget();
    let settings = c.settings();
    let mut row = lead_cells(c, x, &ch, n);
    let owned;
    let model = match model {
        Some(m) => m,
        None => {
            owned = ChannelModel::new(&ch)?;
            &owned
        }
    };
    match c.mode {
        ScanMode::Finite => {
            let r = optimize_with_model(model, &budget, n, &settings)?;
            row.extend(finite_cells(&r));
            if c.asymptotic_columns {
                let a = asymptotic_rates(&ch)?;
                row.extend([Cell::Num(a.r_ur), Cell::Num(a.r_opt), Cell::Num(a.r_dr)]);
            }
        }
        ScanMode::Asymptotic => {
            let a = asymptotic_rates(&ch)?;
            row.extend([Cell::Num(a.r_ur), Cell::Num(a.r_opt), Cell::Num(a.r_dr)]);
        }
        ScanMode::Gap => {
            let g = ur_gap(&ch)?;
            row.extend([Cell::Num(g.gap_quantum), Cell::Num(g.gap_classical)]);
        }
        ScanMode::Simulate => {
            let sim = c.simulation.ok_or_else(|| invalid("simulation", "missing"))?;
            let rounds = if c.axis.kind == AxisKind::NTot { n } else { sim.rounds };
            let (r, delta) = match (sim.r, sim.delta) {
                (Some(r), Some(d)) => (r, d),
                _ => {
                    let best = optimize_with_model(model, &budget, rounds, &settings)?;
                    (sim.r.unwrap_or(best.chosen.r), sim.delta.unwrap_or(best.chosen.delta))
                }
            };
            let (pp, counts, predicted, leak) = calibrate(model, &budget, rounds, r, delta, &settings)?;
            let rec = run_protocol(&ch, &pp, c.seed)?;
            let measured = finite_key_length(&pp, &budget, &rec.pe_stats, &counts, leak, &settings.options)?;
            row.extend([
                Cell::Num(rounds),
                Cell::Num(r),
                Cell::Num(delta),
                Cell::Num(pp.m_range),
                Cell::Num(pp.alpha),
                Cell::Num(pp.d0),
                Cell::Num(rec.pe_stats.d_pe),
                Cell::Num(rec.pe_stats.v_d_pe),
                Cell::Num(rec.pe_stats.v_ya_pe),
                Cell::Num(rec.pe_stats.v_yb_pe),
                Cell::Num(predicted.d_pe),
                Cell::Num(rec.key_distance),
                Cell::Num(if rec.aborted { 1.0 } else { 0.0 }),
                Cell::Num(if rec.aborted { 0.0 } else { measured.rate }),
                Cell::Text(if rec.aborted {
                    "aborted".into()
                } else {
                    measured.reason.map_or("ok", |x| x.as_str()).into()
                }),
            ]);
        }
    }
    Ok(row)
}

pub fn columns(c: &ScanConfig) -> Vec<String> {
    let mut cols = lead_columns(c);
    let tail: Vec<&str> = match c.mode {
        ScanMode::Finite => {
            let mut v = FINITE_COLUMNS.to_vec();
            if c.asymptotic_columns {
                v.extend(["r_ur", "r_opt", "r_dr"]);
            }
            v
        }
        ScanMode::Asymptotic => vec!["r_ur", "r_opt", "r_dr"],
        ScanMode::Gap => vec!["gap_quantum", "gap_classical"],
        ScanMode::Simulate => SIM_COLUMNS.to_vec(),
    };
    cols.extend(tail.into_iter().map(String::from));
    cols
}

/// Runs a scan. Points along `N_tot` share one channel model and run in
/// order; points that change the channel run in parallel.
pub fn run_scan(c: &ScanConfig) -> Result<Table> {
    let d = validate(c);
    if !d.is_ok() {
        return Err(invalid("config", d.errors.join("; ")));
    }
    let xs = c.axis.points()?;
    let rows: Vec<Vec<Cell>> = if c.axis.kind == AxisKind::NTot {
        let model = ChannelModel::new(&c.channel)?;
        xs.iter()
            .map(|&x| run_point(c, x, Some(&model)))
            .collect::<Result<_>>()?
    } else {
        xs.par_iter()
            .map(|&x| run_point(c, x, None))
            .collect::<Result<_>>()?
    };
    Ok(Table {
        parameters: header(c),
        columns: columns(c),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            other => Err(format!("unknown preset `{other}` (expected fig2..fig6)")),
        }
    }
}

fn base_config(eta_b: f64, beta: f64, eta_ex: f64, axis: AxisConfig, mode: ScanMode) -> ScanConfig {
    ScanConfig {
        channel: ChannelParams {
            eta_ex,
            ..ChannelParams::reference(eta_b, beta)
        },
        budget: BudgetConfig::default(),
        transmittance: 0.99,
        n_tot: 1e9,
        axis,
        distance: DistanceModel::default(),
        mode,
        seed: 0,
        simulation: None,
        log_base: None,
        asymptotic_columns: false,
    }
}

fn n_tot_axis() -> AxisConfig {
    AxisConfig {
        kind: AxisKind::NTot,
        values: None,
        grid: Some(GridSpec {
            start: 1e6,
            stop: 1e10,
            points: 9,
            spacing: Spacing::Log,
        }),
    }
}

fn eta_axis(start: f64, stop: f64, points: usize) -> AxisConfig {
    AxisConfig {
        kind: AxisKind::EtaB,
        values: None,
        grid: Some(GridSpec {
            start,
            stop,
            points,
            spacing: Spacing::Linear,
        }),
    }
}

/// The scans behind a preset, one per plotted series.
pub fn preset_configs(p: Preset) -> Vec<ScanConfig> {
    match p {
        Preset::Fig2 => [0.45, 0.50, 0.55]
            .iter()
            .map(|&e| base_config(e, 0.95, 0.01, n_tot_axis(), ScanMode::Finite))
            .collect(),
        Preset::Fig3 => [0.40, 0.45, 0.50]
            .iter()
            .map(|&e| base_config(e, 0.90, 0.01, n_tot_axis(), ScanMode::Finite))
            .collect(),
        Preset::Fig4 => [0.95, 0.90, 0.85]
            .iter()
            .map(|&b| {
                let axis = AxisConfig {
                    kind: AxisKind::DistanceKm,
                    values: None,
                    grid: Some(GridSpec {
                        start: 0.0,
                        stop: 30.0,
                        points: 16,
                        spacing: Spacing::Linear,
                    }),
                };
                base_config(0.0, b, 0.01, axis, ScanMode::Finite)
            })
            .collect(),
        Preset::Fig5 => vec![base_config(0.0, 0.95, 0.0, eta_axis(0.0, 0.95, 20), ScanMode::Gap)],
        Preset::Fig6 => {
            let mut c = base_config(0.0, 0.95, 0.0, eta_axis(0.0, 0.7, 15), ScanMode::Finite);
            c.n_tot = 1e11;
            c.asymptotic_columns = true;
            vec![c]
        }
    }
}

pub fn run_preset(p: Preset) -> Result<Table> {
    run_preset_configs(p, &preset_configs(p))
}

/// Runs preset series, possibly adjusted by the caller, into one table.
pub fn run_preset_configs(p: Preset, configs: &[ScanConfig]) -> Result<Table> {
    let mut out: Option<Table> = None;
    for c in configs {
        let t = run_scan(c)?;
        match &mut out {
            None => {
                let mut t = t;
                t.parameters.retain(|(k, _)| k != "beta" && k != "eta_b");
                t.parameters.insert(0, ("preset".into(), format!("{p:?}").to_lowercase()));
                out = Some(t);
            }
            Some(o) => o.append(t),
        }
    }
    out.ok_or_else(|| invalid("preset", "no series"))
}
