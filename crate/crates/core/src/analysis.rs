//! Experiment harness: execution-horizon sweep, objective gap, correlation decay and
//! candidate-count scaling, plus the CSV tables they produce.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{rescore_horizon, run_suite, EngineConfig, EpisodeReport, Scorer};
use crate::error::{Error, Result};
use crate::metrics::EvalMode;
use crate::par::par_map;
use crate::policy::PolicySpec;
use crate::procgen::{generate_suite, ProcGenConfig};
use crate::rng::derive_seed;
use crate::scenario::{read_scenario_dir, ScenarioDescription};

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Empty("pearson needs at least two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// p-value of the paired one-sided t-test for `mean(a - b) > 0`.
pub fn paired_one_sided(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Empty("paired test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean > 0.0 { 0.0 } else { 1.0 });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(1.0 - dist.cdf(t))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Where an experiment's scenarios come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuiteRef {
    /// `count` scenarios from each generator config.
    Procgen {
        configs: Vec<ProcGenConfig>,
        count: usize,
        seed: u64,
    },
    Directory { path: PathBuf },
}

impl SuiteRef {
    pub fn load(&self) -> Result<Vec<ScenarioDescription>> {
        match self {
            SuiteRef::Procgen { configs, count, seed } => {
                let mut out = Vec::with_capacity(configs.len() * count);
                for (i, cfg) in configs.iter().enumerate() {
                    out.extend(generate_suite(cfg, *count, derive_seed(*seed, &[i as u64]))?);
                }
                Ok(out)
            }
            SuiteRef::Directory { path } => read_scenario_dir(path),
        }
    }

    /// Resolves a relative directory against `base`.
    pub fn relative_to(&self, base: &Path) -> SuiteRef {
        match self {
            SuiteRef::Directory { path } if path.is_relative() => SuiteRef::Directory { path: base.join(path) },
            other => other.clone(),
        }
    }
}

fn default_ol_horizon() -> usize {
    40
}

fn default_fixed_horizon() -> usize {
    80
}

/// One experiment's grid. Which fields matter depends on the experiment; all lists must be
/// non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub suite: SuiteRef,
    /// The first entry is the policy under study; correlation uses the whole family.
    pub policies: Vec<PolicySpec>,
    /// Closed-loop horizons T, in steps.
    pub horizons: Vec<usize>,
    /// Execution prefixes (replan intervals) for the sweep.
    pub ks: Vec<usize>,
    /// Candidate counts for scaling.
    pub ns: Vec<usize>,
    pub scorers: Vec<Scorer>,
    pub seeds: Vec<u64>,
    /// Base engine settings; mode, scorer, horizon and seed are set per cell.
    #[serde(default)]
    pub engine: EngineConfig,
    /// Horizon of the open-loop arm.
    #[serde(default = "default_ol_horizon")]
    pub ol_horizon: usize,
    /// Horizon for the sweep and scaling runs.
    #[serde(default = "default_fixed_horizon")]
    pub fixed_horizon: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::validation(format!("experiment.{name}"), "must not be empty"))
            } else {
                Ok(())
            }
        };
        empty("policies", self.policies.len())?;
        empty("horizons", self.horizons.len())?;
        empty("ks", self.ks.len())?;
        empty("ns", self.ns.len())?;
        empty("scorers", self.scorers.len())?;
        empty("seeds", self.seeds.len())?;
        if self.horizons.contains(&0) || self.ol_horizon == 0 || self.fixed_horizon == 0 {
            return Err(Error::validation("experiment.horizons", "horizons must be positive"));
        }
        if self.ks.contains(&0) || self.ns.contains(&0) {
            return Err(Error::validation("experiment", "k and N values must be positive"));
        }
        for p in &self.policies {
            p.validate()?;
        }
        self.engine.validate()
    }

    fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

/// Reports of one (policy, config) cell over every seed, seed-major.
fn run_cell(scenarios: &[ScenarioDescription], spec: &PolicySpec, cfg: &EngineConfig, seeds: &[u64]) -> Result<Vec<EpisodeReport>> {
    let mut out = Vec::with_capacity(scenarios.len() * seeds.len());
    for &seed in seeds {
        let c = EngineConfig { seed, ..cfg.clone() };
        for r in run_suite(scenarios, spec, &c) {
            out.push(r?);
        }
    }
    Ok(out)
}

fn closed_loop(base: &EngineConfig, scorer: Scorer, horizon: usize) -> EngineConfig {
    EngineConfig {
        mode: EvalMode::ClosedLoop,
        scorer,
        horizon_steps: horizon,
        ..base.clone()
    }
}

/// Per-episode DS of `reports` truncated to each horizon; `out[j][i]` is episode `i` at `horizons[j]`.
fn rescored(scenarios: &[ScenarioDescription], reports: &[EpisodeReport], horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    horizons
        .iter()
        .map(|&t| {
            reports
                .iter()
                .enumerate()
                .map(|(i, r)| Ok(rescore_horizon(&scenarios[i % scenarios.len()], r, t)?.ds))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub scorer: Scorer,
    pub mean_ds: f64,
    pub min_ds: f64,
    pub max_ds: f64,
    pub episodes: usize,
}

impl SweepRow {
    fn of(k: usize, scorer: Scorer, reports: &[EpisodeReport]) -> Self {
        let ds: Vec<f64> = reports.iter().map(|r| r.ds).collect();
        SweepRow {
            k,
            scorer,
            mean_ds: mean(&ds),
            min_ds: ds.iter().copied().fold(f64::INFINITY, f64::min),
            max_ds: ds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            episodes: ds.len(),
        }
    }
}

/// Mean DS of the first policy at each fixed execution prefix k, for every non-oracle
/// scorer, at `fixed_horizon`. A final oracle row, run at the smallest k, is the
/// optimal-execution reference.
pub fn horizon_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let scenarios = spec.suite.load()?;
    let policy = &spec.policies[0];
    let mut cells: Vec<(usize, Scorer)> = Vec::new();
    for &k in &spec.ks {
        for &s in spec.scorers.iter().filter(|s| **s != Scorer::OracleEpdms) {
            cells.push((k, s));
        }
    }
    let k_min = spec.ks.iter().copied().min().expect("validated non-empty");
    cells.push((k_min, Scorer::OracleEpdms));
    let rows = par_map(&cells, |&(k, scorer)| -> Result<SweepRow> {
        let mut cfg = closed_loop(&spec.engine, scorer, spec.fixed_horizon);
        cfg.replan_rate = k;
        cfg.validate()?;
        Ok(SweepRow::of(k, scorer, &run_cell(&scenarios, policy, &cfg, &spec.seeds)?))
    });
    rows.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub horizon: usize,
    /// Mean DS when the policy's own choice is executed.
    pub ol_selected: f64,
    /// Mean DS when the simulator-scored choice is executed.
    pub cl_selected: f64,
    pub gap: f64,
    /// One-sided paired p-value for `cl_selected > ol_selected`.
    pub p_dominance: f64,
    /// One-sided paired p-value for the gap here exceeding the gap at the shortest horizon.
    pub p_widening: f64,
    pub episodes: usize,
}

/// Objective-mismatch gap of the first policy at each horizon: NativeBest against
/// OracleEpdms selection on the same scenarios and seeds.
pub fn objective_gap(spec: &ExperimentSpec) -> Result<Vec<GapRow>> {
    spec.validate()?;
    let scenarios = spec.suite.load()?;
    let policy = &spec.policies[0];
    let t_max = spec.max_horizon();
    let arms = par_map(&[Scorer::NativeBest, Scorer::OracleEpdms], |&s| {
        run_cell(&scenarios, policy, &closed_loop(&spec.engine, s, t_max), &spec.seeds)
            .and_then(|reports| rescored(&scenarios, &reports, &spec.horizons))
    });
    let mut arms = arms.into_iter();
    let native = arms.next().expect("two arms")?;
    let oracle = arms.next().expect("two arms")?;
    let gaps: Vec<Vec<f64>> = native
        .iter()
        .zip(&oracle)
        .map(|(n, o)| o.iter().zip(n).map(|(a, b)| a - b).collect())
        .collect();
    let first = spec
        .horizons
        .iter()
        .enumerate()
        .min_by_key(|(_, t)| **t)
        .map(|(j, _)| j)
        .expect("validated non-empty");
    spec.horizons
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let p_widening = if j == first {
                1.0
            } else {
                paired_one_sided(&gaps[j], &gaps[first])?
            };
            Ok(GapRow {
                horizon: t,
                ol_selected: mean(&native[j]),
                cl_selected: mean(&oracle[j]),
                gap: mean(&gaps[j]),
                p_dominance: paired_one_sided(&oracle[j], &native[j])?,
                p_widening,
                episodes: native[j].len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberCurve {
    pub policy: String,
    /// Mean open-loop score at `ol_horizon`.
    pub ol_score: f64,
    /// Mean closed-loop DS per horizon, aligned with the table rows.
    pub cl_ds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub horizon: usize,
    pub r: f64,
    pub cl_min: f64,
    pub cl_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    pub members: Vec<MemberCurve>,
}

/// Pearson r across the policy family between open-loop score and closed-loop DS, per
/// horizon. Every member runs under its own native choice.
pub fn correlation_decay(spec: &ExperimentSpec) -> Result<DecayTable> {
    spec.validate()?;
    if spec.policies.len() < 2 {
        return Err(Error::validation("experiment.policies", "correlation needs at least two policies"));
    }
    let scenarios = spec.suite.load()?;
    let t_max = spec.max_horizon();
    let members = par_map(&spec.policies, |p| -> Result<MemberCurve> {
        let ol_cfg = EngineConfig {
            mode: EvalMode::OpenLoop,
            scorer: Scorer::NativeBest,
            horizon_steps: spec.ol_horizon,
            ..spec.engine.clone()
        };
        let ol: Vec<f64> = run_cell(&scenarios, p, &ol_cfg, &spec.seeds)?.iter().map(|r| r.ds).collect();
        let cl = run_cell(&scenarios, p, &closed_loop(&spec.engine, Scorer::NativeBest, t_max), &spec.seeds)?;
        Ok(MemberCurve {
            policy: p.label(),
            ol_score: mean(&ol),
            cl_ds: rescored(&scenarios, &cl, &spec.horizons)?.iter().map(|v| mean(v)).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ol: Vec<f64> = members.iter().map(|m| m.ol_score).collect();
    let rows = spec
        .horizons
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let cl: Vec<f64> = members.iter().map(|m| m.cl_ds[j]).collect();
            Ok(DecayRow {
                horizon: t,
                r: pearson(&ol, &cl)?,
                cl_min: cl.iter().copied().fold(f64::INFINITY, f64::min),
                cl_max: cl.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DecayTable { rows, members })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub scorer: Scorer,
    pub mean_ds: f64,
    pub collisions: usize,
    pub episodes: usize,
}

/// Policy spec with `n` candidates.
pub fn with_candidates(spec: &PolicySpec, n: usize) -> Result<PolicySpec> {
    match spec {
        PolicySpec::NoisyExpert { sigma, drift, accel_spread, .. } => Ok(PolicySpec::NoisyExpert {
            sigma: *sigma,
            n,
            drift: *drift,
            accel_spread: *accel_spread,
        }),
        PolicySpec::Lattice { speeds, curvatures } if speeds.len() * curvatures.len() == n => Ok(spec.clone()),
        other => Err(Error::validation(
            "experiment.policies",
            format!("{} cannot produce {n} candidates", other.label()),
        )),
    }
}

/// Mean DS of the first policy per (N, scorer) at `fixed_horizon`.
pub fn scaling_experiment(spec: &ExperimentSpec) -> Result<Vec<ScalingRow>> {
    spec.validate()?;
    let scenarios = spec.suite.load()?;
    let mut cells = Vec::new();
    for &n in &spec.ns {
        let policy = with_candidates(&spec.policies[0], n)?;
        for &s in &spec.scorers {
            cells.push((n, s, policy.clone()));
        }
    }
    par_map(&cells, |(n, scorer, policy)| -> Result<ScalingRow> {
        let reports = run_cell(&scenarios, policy, &closed_loop(&spec.engine, *scorer, spec.fixed_horizon), &spec.seeds)?;
        let ds: Vec<f64> = reports.iter().map(|r| r.ds).collect();
        Ok(ScalingRow {
            n: *n,
            scorer: *scorer,
            mean_ds: mean(&ds),
            collisions: reports.iter().map(|r| r.collisions).sum(),
            episodes: ds.len(),
        })
    })
    .into_iter()
    .collect()
}

/// Suite means in the order of [`SUMMARY_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub ds: f64,
    pub epdms: f64,
    pub rc: f64,
    pub nc: f64,
    pub dac: f64,
    pub tlc: f64,
    pub ddc: f64,
    pub lk: f64,
    pub ttc: f64,
    pub hc: f64,
    pub ec: f64,
    pub collisions: usize,
    pub terminated: usize,
    pub emergency_brakes: usize,
}

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "episodes",
    "ds",
    "epdms",
    "rc",
    "nc",
    "dac",
    "tlc",
    "ddc",
    "lk",
    "ttc",
    "hc",
    "ec",
    "collisions",
    "terminated",
    "emergency_brakes",
];

pub fn aggregate(reports: &[EpisodeReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to aggregate"));
    }
    let m = |f: fn(&EpisodeReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(Summary {
        episodes: reports.len(),
        ds: m(|r| r.ds),
        epdms: m(|r| r.epdms_mean),
        rc: m(|r| r.rc),
        nc: m(|r| r.subscores.nc),
        dac: m(|r| r.subscores.dac),
        tlc: m(|r| r.subscores.tlc),
        ddc: m(|r| r.subscores.ddc),
        lk: m(|r| r.subscores.lk),
        ttc: m(|r| r.subscores.ttc),
        hc: m(|r| r.subscores.hc),
        ec: m(|r| r.subscores.ec),
        collisions: reports.iter().map(|r| r.collisions).sum(),
        terminated: reports.iter().filter(|r| r.terminated).count(),
        emergency_brakes: reports.iter().map(|r| r.emergency_brakes).sum(),
    })
}

pub fn summary_csv(summary: &Summary) -> Result<Vec<u8>> {
    table_csv(std::slice::from_ref(summary))
}

/// Which experiments to run; each present section produces its figure table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig3a: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig3b: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig3c: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig4c: Option<ExperimentSpec>,
}

impl AnalysisSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [&self.fig3a, &self.fig3b, &self.fig3c, &self.fig4c];
        if all.iter().all(|s| s.is_none()) {
            return Err(Error::validation("analysis", "no experiment sections"));
        }
        for s in all.into_iter().flatten() {
            s.validate()?;
        }
        Ok(())
    }

    /// Resolves relative scenario directories against `base`.
    pub fn relative_to(mut self, base: &Path) -> Self {
        for s in [&mut self.fig3a, &mut self.fig3b, &mut self.fig3c, &mut self.fig4c].into_iter().flatten() {
            s.suite = s.suite.relative_to(base);
        }
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub fig3a: Option<Vec<SweepRow>>,
    pub fig3b: Option<Vec<GapRow>>,
    pub fig3c: Option<DecayTable>,
    pub fig4c: Option<Vec<ScalingRow>>,
}

pub fn run_analysis(spec: &AnalysisSpec) -> Result<AnalysisOutput> {
    spec.validate()?;
    Ok(AnalysisOutput {
        fig3a: spec.fig3a.as_ref().map(horizon_sweep).transpose()?,
        fig3b: spec.fig3b.as_ref().map(objective_gap).transpose()?,
        fig3c: spec.fig3c.as_ref().map(correlation_decay).transpose()?,
        fig4c: spec.fig4c.as_ref().map(scaling_experiment).transpose()?,
    })
}

/// Plot-ready row: one point of one series of one figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub figure: &'static str,
    pub series: String,
    pub x: f64,
    pub y: f64,
}

fn label(s: Scorer) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

impl AnalysisOutput {
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut out = Vec::new();
        let mut row = |figure, series: String, x: usize, y: f64| out.push(LongRow { figure, series, x: x as f64, y });
        for r in self.fig3a.iter().flatten() {
            row("fig3a", label(r.scorer), r.k, r.mean_ds);
        }
        for r in self.fig3b.iter().flatten() {
            row("fig3b", "ol-selected".into(), r.horizon, r.ol_selected);
            row("fig3b", "cl-selected".into(), r.horizon, r.cl_selected);
            row("fig3b", "gap".into(), r.horizon, r.gap);
        }
        if let Some(t) = &self.fig3c {
            for r in &t.rows {
                row("fig3c", "r".into(), r.horizon, r.r);
            }
            for m in &t.members {
                for (r, ds) in t.rows.iter().zip(&m.cl_ds) {
                    row("fig3c", m.policy.clone(), r.horizon, *ds);
                }
            }
        }
        for r in self.fig4c.iter().flatten() {
            row("fig4c", label(r.scorer), r.n, r.mean_ds);
        }
        out
    }

    /// Writes `figXY.csv` for every experiment run, plus `long.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, bytes)?;
            written.push(p);
            Ok(())
        };
        if let Some(rows) = &self.fig3a {
            put("fig3a.csv", table_csv(rows)?)?;
        }
        if let Some(rows) = &self.fig3b {
            put("fig3b.csv", table_csv(rows)?)?;
        }
        if let Some(t) = &self.fig3c {
            put("fig3c.csv", table_csv(&t.rows)?)?;
        }
        if let Some(rows) = &self.fig4c {
            put("fig4c.csv", table_csv(rows)?)?;
        }
        put("long.csv", table_csv(&self.long_rows())?)?;
        Ok(written)
    }
}

fn table_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn paired_test_direction() {
        let a = [3.0, 4.0, 5.0, 6.0, 7.5];
        let b = [1.0, 2.0, 3.1, 4.0, 5.0];
        assert!(paired_one_sided(&a, &b).unwrap() < 0.01);
        assert!(paired_one_sided(&b, &a).unwrap() > 0.99);
        assert_eq!(paired_one_sided(&[2.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn candidate_count_override() {
        let p = PolicySpec::NoisyExpert { sigma: 0.5, n: 8, drift: 0.0, accel_spread: 0.0 };
        assert!(matches!(with_candidates(&p, 32).unwrap(), PolicySpec::NoisyExpert { n: 32, .. }));
        let l = PolicySpec::Lattice { speeds: vec![4.0, 8.0], curvatures: vec![0.0] };
        assert!(with_candidates(&l, 2).is_ok());
        assert!(with_candidates(&l, 3).is_err());
        assert!(with_candidates(&PolicySpec::Expert, 2).is_err());
    }
}
