//! Config-driven runs of every engine with CSV and JSON output.
//!
//! A run is described by one JSON document ([`ExperimentConfig`]). Every
//! output file starts with the resolved config and the crate version: CSV
//! files carry it as `# ` comment lines above the header row, JSON files as a
//! `meta` block. Sweep cells run concurrently but each draws from its own RNG
//! stream keyed by `(seed, cell, replication)`, and rows are gathered in cell
//! order, so outputs are identical across runs and thread counts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cascade::{init_sim, PathRecord, SimResult};
use crate::contagion::{is_contagious, small_seed_limit};
use crate::dist::{DegreeDistribution, DegreeSequences, DistKind, DEFAULT_TAIL_TOL};
use crate::meanfield::{MeanField, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::model::{Community, ModelSpec, SeedingRule, ThresholdRule};
use crate::ode::{OdeConfig, OdeMode, OdeSample, OdeSystem, OdeTrajectory};
use crate::{rng, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Meanfield,
    Simulate,
    Ode,
    Contagion,
}

/// Model declaration as written in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDecl {
    pub p1: DistKind,
    pub p2: DistKind,
    pub pm: DistKind,
    #[serde(default = "default_n")]
    pub n1: usize,
    #[serde(default = "default_n")]
    pub n2: usize,
    pub threshold: ThresholdRule,
    #[serde(default = "default_seeding")]
    pub seeding: SeedingRule,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_n() -> usize {
    10_000
}

fn default_seeding() -> SeedingRule {
    SeedingRule::GlobalUniform(0.0)
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

impl ModelDecl {
    pub fn build(&self) -> Result<ModelSpec> {
        ModelSpec::new(
            DegreeDistribution::build(self.p1.clone(), self.tail_tol)?,
            DegreeDistribution::build(self.p2.clone(), self.tail_tol)?,
            DegreeDistribution::build(self.pm.clone(), self.tail_tol)?,
            self.n1,
            self.n2,
            self.threshold.clone(),
            self.seeding.clone(),
        )
    }
}

/// A parameter that a sweep axis may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Mean of `P_1` (Poisson).
    Lambda1,
    /// Mean of `P_2` (Poisson).
    Lambda2,
    /// Both internal means at once.
    LambdaIn,
    /// Mean of `P_m` (Poisson).
    #[serde(alias = "lambda_out")]
    LambdaM,
    /// Linear threshold fraction.
    Theta,
    /// Size of each community.
    N,
    /// Seed budget of every budget-based strategy.
    Budget,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Lambda1 => "lambda_1",
            Param::Lambda2 => "lambda_2",
            Param::LambdaIn => "lambda_in",
            Param::LambdaM => "lambda_m",
            Param::Theta => "theta",
            Param::N => "n",
            Param::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

/// A named seeding strategy: an explicit rule, or a seed budget spent
/// uniformly over everyone (`global`), uniformly within each community
/// (`split`), or on the highest-degree nodes of each community (`split` with
/// `targeted`).
///
/// Budgets count seeds in units of the community size `n̄ = (n1 + n2)/2`:
/// budget `b` plants `b·n̄` seeds, and split `(s_1, s_2)` puts `s_j·b·n̄` of
/// them in community `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeding: Option<SeedingRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default)]
    pub targeted: bool,
}

impl Strategy {
    fn validate(&self) -> Result<()> {
        if self.seeding.is_some() && (self.split.is_some() || self.budget.is_some() || self.targeted) {
            return Err(Error::Config(format!(
                "strategy {}: an explicit `seeding` excludes budget fields",
                self.name
            )));
        }
        if self.targeted && self.split.is_none() {
            return Err(Error::Config(format!(
                "strategy {}: `targeted` needs a split",
                self.name
            )));
        }
        if let Some(s) = self.split {
            if s.iter().any(|&x| !(0.0..=1.0).contains(&x)) || ((s[0] + s[1]) - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "strategy {}: split must be a distribution",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn uses_budget(&self) -> bool {
        self.seeding.is_none()
    }

    /// Seeding rule for a model with sizes `(n1, n2)`.
    pub fn rule(&self, n1: usize, n2: usize, budget: Option<f64>) -> Result<SeedingRule> {
        if let Some(rule) = &self.seeding {
            return Ok(rule.clone());
        }
        let b = budget
            .or(self.budget)
            .ok_or_else(|| Error::Config(format!("strategy {}: no budget", self.name)))?;
        if b.is_nan() || b < 0.0 {
            return Err(Error::Config(format!("budget {b} is negative")));
        }
        let n = (n1 + n2) as f64;
        let seeds = 0.5 * b * n;
        let Some(split) = self.split else {
            if seeds > n {
                return Err(Error::Config(format!(
                    "strategy {}: budget exceeds the population",
                    self.name
                )));
            }
            return Ok(SeedingRule::GlobalUniform(seeds / n));
        };
        let counts = [split[0] * seeds, split[1] * seeds];
        if counts[0] > n1 as f64 || counts[1] > n2 as f64 {
            return Err(Error::Config(format!(
                "strategy {}: budget exceeds a community",
                self.name
            )));
        }
        if self.targeted {
            return Ok(SeedingRule::DegreeTargeted([counts[0] / n, counts[1] / n]));
        }
        Ok(SeedingRule::PerCommunity([
            counts[0] / n1 as f64,
            counts[1] / n2 as f64,
        ]))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelDecl,
    #[serde(default = "default_engines")]
    pub engines: Vec<Engine>,
    #[serde(default)]
    pub sweep: Vec<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<Strategy>>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub ode: OdeConfig,
    /// Decreasing seed fractions for the small-seed table.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Simulation steps between path records; 0 keeps only the endpoints.
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_engines() -> Vec<Engine> {
    vec![Engine::Meanfield]
}

fn default_replications() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_record_every() -> u64 {
    1000
}

impl ExperimentConfig {
    /// Parse and validate a JSON document; `origin` names it in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.engines.is_empty() {
            return Err(Error::Config("no engine selected".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.ode.validate()?;
        if let Some(s) = &self.strategies {
            if s.is_empty() {
                return Err(Error::Config("strategy list is empty".into()));
            }
            for st in s {
                st.validate()?;
            }
        }
        let poisson = |d: &DistKind, p: Param| match d {
            DistKind::Poisson(_) => Ok(()),
            _ => Err(Error::Config(format!(
                "cannot sweep {}: the law is not Poisson",
                p.name()
            ))),
        };
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep axis {} has no values", axis.param.name())));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "sweep axis {} has a non-finite value",
                    axis.param.name()
                )));
            }
            match axis.param {
                Param::Lambda1 => poisson(&self.model.p1, axis.param)?,
                Param::Lambda2 => poisson(&self.model.p2, axis.param)?,
                Param::LambdaIn => {
                    poisson(&self.model.p1, axis.param)?;
                    poisson(&self.model.p2, axis.param)?;
                }
                Param::LambdaM => poisson(&self.model.pm, axis.param)?,
                Param::Theta => {
                    if !matches!(self.model.threshold, ThresholdRule::Linear(_)) {
                        return Err(Error::Config("cannot sweep theta: threshold is not linear".into()));
                    }
                }
                Param::N => {
                    if axis.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                        return Err(Error::Config("sweep axis n needs positive integers".into()));
                    }
                }
                Param::Budget => {
                    let split_only = self
                        .strategies
                        .as_ref()
                        .is_some_and(|s| s.iter().all(Strategy::uses_budget));
                    if !split_only {
                        return Err(Error::Config("cannot sweep budget without budget strategies".into()));
                    }
                }
            }
        }
        self.model.build()?;
        Ok(())
    }

    fn has(&self, e: Engine) -> bool {
        self.engines.contains(&e)
    }

    fn meta(&self, command: &str) -> Value {
        json!({
            "tool": "commcascade",
            "version": VERSION,
            "command": command,
            "config": self,
        })
    }

    /// Cartesian grid of sweep values, last axis varying fastest.
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.sweep {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// Model declaration and budget override of one grid cell.
    pub fn cell_decl(&self, values: &[f64]) -> (ModelDecl, Option<f64>) {
        let mut d = self.model.clone();
        let mut budget = None;
        for (axis, &v) in self.sweep.iter().zip(values) {
            match axis.param {
                Param::Lambda1 => d.p1 = DistKind::Poisson(v),
                Param::Lambda2 => d.p2 = DistKind::Poisson(v),
                Param::LambdaIn => {
                    d.p1 = DistKind::Poisson(v);
                    d.p2 = DistKind::Poisson(v);
                }
                Param::LambdaM => d.pm = DistKind::Poisson(v),
                Param::Theta => d.threshold = ThresholdRule::Linear(v),
                Param::N => {
                    d.n1 = v as usize;
                    d.n2 = v as usize;
                }
                Param::Budget => budget = Some(v),
            }
        }
        (d, budget)
    }

    /// The strategies to run, or the model's own seeding under the name
    /// `model`.
    pub fn strategy_list(&self) -> Vec<Strategy> {
        self.strategies.clone().unwrap_or_else(|| {
            vec![Strategy {
                name: "model".into(),
                seeding: Some(self.model.seeding.clone()),
                split: None,
                budget: None,
                targeted: false,
            }]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Stat { mean, stderr }
    }
}

fn population_mean(model: &ModelSpec, v: [f64; 2]) -> f64 {
    let (n1, n2) = (model.n1() as f64, model.n2() as f64);
    (n1 * v[0] + n2 * v[1]) / (n1 + n2)
}

/// One replication of the chain on a freshly sampled degree sequence.
pub fn simulate_once(model: &ModelSpec, seed: u64, cell: u32, rep: u32, record_every: u64) -> Result<SimResult> {
    let mut r = rng::stream(seed, cell, rep);
    let seqs = DegreeSequences::sample(model, &mut r);
    let mut st = init_sim(model, &seqs, &mut r)?;
    let every = if record_every == 0 { u64::MAX } else { record_every };
    st.run(&mut r, every)
}

fn simulate_many(model: &ModelSpec, cfg: &ExperimentConfig, cell: u32) -> Result<Vec<SimResult>> {
    (0..cfg.replications as u32)
        .into_par_iter()
        .map(|rep| simulate_once(model, cfg.seed, cell, rep, cfg.record_every))
        .collect()
}

/// Largest gap between a simulated path and the ODE observables at the
/// same chain times.
pub fn path_distance(path: &[PathRecord], ode: &OdeTrajectory) -> f64 {
    path.iter()
        .map(|rec| {
            let v = rec.values();
            let o = ode.observables_at(rec.k_over_n);
            (0..8).map(|i| (v[i + 1] - o[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// First ODE time at which `φ_j` drops below `level`.
pub fn crossing_time(samples: &[OdeSample], c: Community, level: f64) -> Option<f64> {
    samples
        .iter()
        .find(|s| s.obs.phi[c.index()] < level)
        .map(|s| s.physical_t)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, meta: &Value, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "# {}", serde_json::to_string(meta)?)?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

/// Fixed point, census and termination verdict; writes `meanfield.json`.
pub fn cmd_meanfield(cfg: &ExperimentConfig) -> Result<Value> {
    let model = cfg.model.build()?;
    let mf = MeanField::new(&model);
    let fp = mf.fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let termination = if fp.converged {
        let (verdict, rho) = mf.termination_check(&fp.mu)?;
        json!({ "verdict": verdict, "rho": rho })
    } else {
        Value::Null
    };
    let adoption = fp.phi.adoption();
    let report = json!({
        "meta": cfg.meta("meanfield"),
        "mu": fp.mu,
        "phi": fp.phi,
        "adoption": adoption,
        "total_adoption": population_mean(&model, adoption),
        "iterations": fp.iterations,
        "converged": fp.converged,
        "termination": termination,
    });
    write_json(&out_dir(cfg)?.join("meanfield.json"), &report)?;
    Ok(report)
}

/// Replicated simulation; writes `simulate.csv`, `simulate_summary.json`
/// and the path of replication 0 as `simulate_path.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Value> {
    let model = cfg.model.build()?;
    let runs = simulate_many(&model, cfg, 0)?;
    let dir = out_dir(cfg)?;
    let meta = cfg.meta("simulate");

    let header: Vec<String> = [
        "replication",
        "active1",
        "active2",
        "adoption1",
        "adoption2",
        "adoption",
        "seeds",
        "steps",
        "balance_checks",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                r.active[0].to_string(),
                r.active[1].to_string(),
                fmt(r.fraction[0]),
                fmt(r.fraction[1]),
                fmt(r.total_fraction(model.n1(), model.n2())),
                r.seeds.to_string(),
                r.steps.to_string(),
                r.balance_checks.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join("simulate.csv"), &meta, &header, &rows)?;

    let path_header: Vec<String> = PathRecord::COLUMNS.map(String::from).to_vec();
    let path_rows: Vec<Vec<String>> = runs[0].path.iter().map(|p| p.values().map(fmt).to_vec()).collect();
    write_csv(&dir.join("simulate_path.csv"), &meta, &path_header, &path_rows)?;

    let per = |j: usize| Stat::of(&runs.iter().map(|r| r.fraction[j]).collect::<Vec<_>>());
    let total = Stat::of(
        &runs
            .iter()
            .map(|r| r.total_fraction(model.n1(), model.n2()))
            .collect::<Vec<_>>(),
    );
    let fp = MeanField::new(&model).fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let predicted = fp.phi.adoption();
    let adoption = [per(0), per(1)];
    let summary = json!({
        "meta": meta,
        "replications": runs.len(),
        "adoption": adoption,
        "total_adoption": total,
        "meanfield_adoption": predicted,
        "meanfield_gap": [
            (adoption[0].mean - predicted[0]).abs(),
            (adoption[1].mean - predicted[1]).abs(),
        ],
        "balance_checks": runs.iter().map(|r| r.balance_checks).sum::<u64>(),
    });
    write_json(&dir.join("simulate_summary.json"), &summary)?;
    Ok(summary)
}

fn ode_rows(samples: &[OdeSample]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = OdeSample::COLUMNS.map(String::from).to_vec();
    let rows = samples.iter().map(|s| s.values().map(fmt).to_vec()).collect();
    (header, rows)
}

/// Multiples of the configured ε at which physical-time runs are repeated.
const EPS_SCAN: [f64; 4] = [1e3, 1e2, 1e1, 1.0];

/// ODE in the configured mode; writes `ode.csv` and `ode.json`. Physical-time
/// runs also report the terminal μ over a scan of ε.

pub fn cmd_ode(cfg: &ExperimentConfig) -> Result<Value> {
    let model = cfg.model.build()?;
    let sys = OdeSystem::new(&model);
    let tr = sys.integrate(&cfg.ode)?;
    let dir = out_dir(cfg)?;
    let meta = cfg.meta("ode");
    let (header, rows) = ode_rows(&tr.samples);
    write_csv(&dir.join("ode.csv"), &meta, &header, &rows)?;
    let fp = sys.mean_field().fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let eps_scan = if cfg.ode.mode == OdeMode::PhysicalTime {
        EPS_SCAN
            .iter()
            .map(|f| {
                let eps = cfg.ode.eps * f;
                if eps >= 1.0 {
                    return Ok(None);
                }
                let t = sys.integrate_physical(&OdeConfig { eps, ..cfg.ode })?;
                Ok(Some(json!({
                    "eps": eps,
                    "terminal_t": t.terminal_t,
                    "terminal_mu": t.terminal,
                    "fixed_point_gap": t.terminal.max_abs_diff(&fp.mu),
                })))
            })
            .filter_map(Result::transpose)
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let report = json!({
        "meta": meta,
        "mode": tr.mode,
        "stop": tr.stop,
        "steps": tr.steps,
        "clamped": tr.clamped,
        "terminal_t": tr.terminal_t,
        "terminal_mu": tr.terminal,
        "terminal_phi": tr.terminal_phi(),
        "fixed_point_mu": fp.mu,
        "fixed_point_gap": tr.terminal.max_abs_diff(&fp.mu),
        "eps_scan": eps_scan,
    });
    write_json(&dir.join("ode.json"), &report)?;
    Ok(report)
}

/// Physical-time ODE, overlaid with one simulation when the `simulate`
/// engine is selected; writes long-format `evolve.csv` and `evolve.json`.
///
/// Rows have `source` `ode` (ODE samples), `sim` (simulation records) or
/// `ode_at_sim` (ODE interpolated at the simulation times).
pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<Value> {
    let model = cfg.model.build()?;
    let ode_cfg = OdeConfig {
        mode: OdeMode::PhysicalTime,
        ..cfg.ode
    };
    let tr = OdeSystem::new(&model).integrate_physical(&ode_cfg)?;
    let sim = if cfg.has(Engine::Simulate) {
        Some(simulate_once(&model, cfg.seed, 0, 0, cfg.record_every)?)
    } else {
        None
    };
    let header: Vec<String> = ["source", "t", "a1", "a2", "am1", "am2", "tau1", "tau2", "phi1", "phi2"]
        .map(String::from)
        .to_vec();
    let row = |source: &str, t: f64, v: [f64; 8]| {
        let mut r = vec![source.to_string(), fmt(t)];
        r.extend(v.map(fmt));
        r
    };
    let mut rows: Vec<Vec<String>> = tr.samples.iter().map(|s| row("ode", s.t, s.obs.values())).collect();
    if let Some(sim) = &sim {
        for rec in &sim.path {
            let v = rec.values();
            rows.push(row("sim", rec.k_over_n, std::array::from_fn(|i| v[i + 1])));
        }
        for rec in &sim.path {
            rows.push(row("ode_at_sim", rec.k_over_n, tr.observables_at(rec.k_over_n)));
        }
    }
    let meta = cfg.meta("evolve");
    let dir = out_dir(cfg)?;
    write_csv(&dir.join("evolve.csv"), &meta, &header, &rows)?;
    let report = json!({
        "meta": meta,
        "stop": tr.stop,
        "terminal_t": tr.terminal_t,
        "terminal_mu": tr.terminal,
        "terminal_phi": tr.terminal_phi(),
        "half_time": [
            crossing_time(&tr.samples, Community::One, 0.5),
            crossing_time(&tr.samples, Community::Two, 0.5),
        ],
        "simulation": sim.as_ref().map(|s| json!({
            "adoption": s.fraction,
            "steps": s.steps,
            "path_distance": path_distance(&s.path, &tr),
        })),
    });
    write_json(&dir.join("evolve.json"), &report)?;
    Ok(report)
}

/// Outputs of every selected engine for one (cell, strategy) pair.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub strategy: String,
    pub values: Vec<f64>,
    pub meanfield: Option<MeanfieldCell>,
    pub simulate: Option<SimulateCell>,
    pub ode: Option<OdeCell>,
    pub contagion: Option<ContagionCell>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanfieldCell {
    pub phi: [f64; 2],
    pub adoption: [f64; 2],
    pub total: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimulateCell {
    pub adoption: [Stat; 2],
    pub total: Stat,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdeCell {
    pub phi: [f64; 2],
    pub total: f64,
    pub t: f64,
    pub stop: crate::ode::StopReason,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContagionCell {
    pub rho: f64,
    pub contagious: bool,
}

fn sweep_job(cfg: &ExperimentConfig, job: usize, cell: usize, values: &[f64], strategy: &Strategy) -> Result<SweepRow> {
    let (decl, budget) = cfg.cell_decl(values);
    let base = decl.build()?;
    let model = base.with_seeding(strategy.rule(base.n1(), base.n2(), budget)?)?;
    let meanfield = if cfg.has(Engine::Meanfield) {
        let fp = MeanField::new(&model).fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let adoption = fp.phi.adoption();
        Some(MeanfieldCell {
            phi: fp.phi.0,
            adoption,
            total: population_mean(&model, adoption),
            converged: fp.converged,
        })
    } else {
        None
    };
    let simulate = if cfg.has(Engine::Simulate) {
        let runs = simulate_many(&model, cfg, job as u32)?;
        let per = |j: usize| Stat::of(&runs.iter().map(|r| r.fraction[j]).collect::<Vec<_>>());
        let total: Vec<f64> = runs.iter().map(|r| r.total_fraction(model.n1(), model.n2())).collect();
        Some(SimulateCell {
            adoption: [per(0), per(1)],
            total: Stat::of(&total),
        })
    } else {
        None
    };
    let ode = if cfg.has(Engine::Ode) {
        let tr = OdeSystem::new(&model).integrate(&cfg.ode)?;
        let phi = tr.terminal_phi().0;
        Some(OdeCell {
            phi,
            total: population_mean(&model, [1.0 - phi[0], 1.0 - phi[1]]),
            t: tr.terminal_t,
            stop: tr.stop,
        })
    } else {
        None
    };
    let contagion = if cfg.has(Engine::Contagion) {
        let r = is_contagious(&model)?;
        Some(ContagionCell {
            rho: r.rho,
            contagious: r.contagious,
        })
    } else {
        None
    };
    Ok(SweepRow {
        cell,
        strategy: strategy.name.clone(),
        values: values.to_vec(),
        meanfield,
        simulate,
        ode,
        contagion,
    })
}

/// Rows of a sweep without writing anything.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cells = cfg.cells();
    let strategies = cfg.strategy_list();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..strategies.len()).map(move |s| (c, s)))
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(job, &(c, s))| sweep_job(cfg, job, c, &cells[c], &strategies[s]))
        .collect()
}

fn sweep_table(cfg: &ExperimentConfig, rows: &[SweepRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = vec!["cell".into(), "strategy".into()];
    header.extend(cfg.sweep.iter().map(|a| a.param.name().to_string()));
    let mut engines = cfg.engines.clone();
    engines.sort();
    engines.dedup();
    for e in &engines {
        let cols: &[&str] = match e {
            Engine::Meanfield => &[
                "mf_phi1",
                "mf_phi2",
                "mf_adoption1",
                "mf_adoption2",
                "mf_adoption",
                "mf_converged",
            ],
            Engine::Simulate => &[
                "sim_adoption1",
                "sim_adoption2",
                "sim_adoption",
                "sim_stderr1",
                "sim_stderr2",
                "sim_stderr",
            ],
            Engine::Ode => &["ode_phi1", "ode_phi2", "ode_adoption", "ode_t", "ode_stop"],
            Engine::Contagion => &["rho", "contagious"],
        };
        header.extend(cols.iter().map(|c| c.to_string()));
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut out = vec![r.cell.to_string(), r.strategy.clone()];
            out.extend(r.values.iter().copied().map(fmt));
            for e in &engines {
                match e {
                    Engine::Meanfield => {
                        let m = r.meanfield.expect("engine ran");
                        out.extend([m.phi[0], m.phi[1], m.adoption[0], m.adoption[1], m.total].map(fmt));
                        out.push(m.converged.to_string());
                    }
                    Engine::Simulate => {
                        let s = r.simulate.expect("engine ran");
                        out.extend(
                            [
                                s.adoption[0].mean,
                                s.adoption[1].mean,
                                s.total.mean,
                                s.adoption[0].stderr,
                                s.adoption[1].stderr,
                                s.total.stderr,
                            ]
                            .map(fmt),
                        );
                    }
                    Engine::Ode => {
                        let o = r.ode.expect("engine ran");
                        out.extend([o.phi[0], o.phi[1], o.total, o.t].map(fmt));
                        out.push(
                            serde_json::to_value(o.stop)
                                .map(|v| v.as_str().unwrap_or("").to_string())
                                .unwrap_or_default(),
                        );
                    }
                    Engine::Contagion => {
                        let c = r.contagion.expect("engine ran");
                        out.push(fmt(c.rho));
                        out.push(c.contagious.to_string());
                    }
                }
            }
            out
        })
        .collect();
    (header, body)
}

/// Cartesian sweep over the configured axes and strategies; writes
/// `sweep.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(cfg)?;
    let (header, body) = sweep_table(cfg, &rows);
    write_csv(&out_dir(cfg)?.join("sweep.csv"), &cfg.meta("sweep"), &header, &body)?;
    Ok(rows)
}

/// Perron-root contagion test, plus the small-seed table when `alphas` is
/// set; writes `contagion.json`.
pub fn cmd_contagion(cfg: &ExperimentConfig) -> Result<Value> {
    let model = cfg.model.build()?;
    let report = is_contagious(&model)?;
    let small = if cfg.alphas.is_empty() {
        None
    } else {
        Some(small_seed_limit(&model, &cfg.alphas)?)
    };
    let out = json!({
        "meta": cfg.meta("contagion"),
        "rho": report.rho,
        "contagious": report.contagious,
        "margin": report.margin,
        "indeterminate": report.indeterminate,
        "jacobian": report.jacobian,
        "pivotal": report.pivotal,
        "small_seed": small,
    });
    write_json(&out_dir(cfg)?.join("contagion.json"), &out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(out: &Path) -> String {
        format!(
            r#"{{
  "model": {{
    "p1": {{"poisson": 8}}, "p2": {{"poisson": 8}}, "pm": {{"poisson": 1}},
    "n1": 200, "n2": 200,
    "threshold": {{"linear": 0.25}},
    "seeding": {{"global": 0.05}}
  }},
  "out": {:?}
}}"#,
            out.display().to_string()
        )
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ExperimentConfig::from_json("{\n  \"model\": 3\n}", "cfg.json").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.starts_with("cfg.json:2:"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(ExperimentConfig::from_json("{", "x").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn invariants_are_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Value = serde_json::from_str(&base(dir.path())).unwrap();
        v["strategies"] = json!([]);
        assert!(ExperimentConfig::from_json(&v.to_string(), "x").is_err());
        v["strategies"] = json!([{"name": "a", "targeted": true, "budget": 0.05}]);
        assert!(ExperimentConfig::from_json(&v.to_string(), "x").is_err());
        v["strategies"] = json!([{"name": "a", "split": [1, 0], "budget": 0.05}]);
        v["replications"] = json!(0);
        assert!(ExperimentConfig::from_json(&v.to_string(), "x").is_err());
        v["replications"] = json!(1);
        v["sweep"] = json!([{"param": "lambda_in", "values": []}]);
        assert!(ExperimentConfig::from_json(&v.to_string(), "x").is_err());
        v["model"]["p1"] = json!({"regular": 4});
        v["sweep"] = json!([{"param": "lambda_1", "values": [1.0]}]);
        assert!(ExperimentConfig::from_json(&v.to_string(), "x").is_err());
        v["sweep"] = json!([{"param": "lambda_out", "values": [0.5, 1.0]}]);
        let cfg = ExperimentConfig::from_json(&v.to_string(), "x").unwrap();
        assert_eq!(cfg.sweep[0].param, Param::LambdaM);
    }

    #[test]
    fn grid_order_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Value = serde_json::from_str(&base(dir.path())).unwrap();
        v["sweep"] = json!([
            {"param": "lambda_in", "values": [2, 4]},
            {"param": "theta", "values": [0.2, 0.3, 0.4]}
        ]);
        let cfg = ExperimentConfig::from_json(&v.to_string(), "x").unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1], vec![2.0, 0.3]);
        let (d, _) = cfg.cell_decl(&cells[5]);
        assert_eq!(d.p2, DistKind::Poisson(4.0));
        assert_eq!(d.threshold, ThresholdRule::Linear(0.4));
    }

    #[test]
    fn strategies_resolve_budgets() {
        let s = Strategy {
            name: "local".into(),
            seeding: None,
            split: Some([1.0, 0.0]),
            budget: Some(0.05),
            targeted: false,
        };
        assert_eq!(s.rule(100, 100, None).unwrap(), SeedingRule::PerCommunity([0.05, 0.0]));
        let t = Strategy {
            targeted: true,
            ..s.clone()
        };
        assert_eq!(
            t.rule(100, 100, Some(0.02)).unwrap(),
            SeedingRule::DegreeTargeted([0.01, 0.0])
        );
        assert!(s.rule(100, 100, Some(1.5)).is_err());
        let g = Strategy {
            split: None,
            ..s.clone()
        };
        assert_eq!(g.rule(100, 300, None).unwrap(), SeedingRule::GlobalUniform(0.025));
        let uneven = Strategy {
            split: Some([0.5, 0.5]),
            ..s
        };
        assert_eq!(
            uneven.rule(100, 300, None).unwrap(),
            SeedingRule::PerCommunity([0.05, 0.05 / 3.0])
        );
    }

    #[test]
    fn meanfield_report_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(&base(dir.path()), "x").unwrap();
        let r = cmd_meanfield(&cfg).unwrap();
        assert_eq!(r["mu"].as_array().unwrap().len(), 4);
        assert_eq!(r["phi"].as_array().unwrap().len(), 2);
        assert_eq!(r["converged"], json!(true));
        let first = fs::read(dir.path().join("meanfield.json")).unwrap();
        cmd_meanfield(&cfg).unwrap();
        assert_eq!(first, fs::read(dir.path().join("meanfield.json")).unwrap());
    }

    #[test]
    fn full_seeding_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Value = serde_json::from_str(&base(dir.path())).unwrap();
        v["model"]["seeding"] = json!({"global": 1.0});
        let cfg = ExperimentConfig::from_json(&v.to_string(), "x").unwrap();
        let r = cmd_meanfield(&cfg).unwrap();
        assert_eq!(r["phi"], json!([0.0, 0.0]));
    }

    #[test]
    fn csv_starts_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Value = serde_json::from_str(&base(dir.path())).unwrap();
        v["engines"] = json!(["meanfield", "contagion"]);
        v["sweep"] = json!([{"param": "lambda_in", "values": [2, 6]}]);
        let cfg = ExperimentConfig::from_json(&v.to_string(), "x").unwrap();
        let rows = cmd_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        let mut lines = text.lines();
        let meta: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
        assert_eq!(meta["version"], json!(VERSION));
        assert_eq!(meta["config"]["sweep"][0]["values"], json!([2.0, 6.0]));
        assert!(lines.next().unwrap().starts_with("cell,strategy,lambda_in,mf_phi1"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn tiny_simulation_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Value = serde_json::from_str(&base(dir.path())).unwrap();
        v["model"]["n1"] = json!(5);
        v["model"]["n2"] = json!(5);
        v["replications"] = json!(3);
        v["seed"] = json!(11);
        let cfg = ExperimentConfig::from_json(&v.to_string(), "x").unwrap();
        cmd_simulate(&cfg).unwrap();
        let a = fs::read(dir.path().join("simulate.csv")).unwrap();
        cmd_simulate(&cfg).unwrap();
        assert_eq!(a, fs::read(dir.path().join("simulate.csv")).unwrap());
    }
}
