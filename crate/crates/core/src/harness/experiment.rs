//! Experiment specs, cell fan-out, CSV traces and `summary.json`.
//!
//! A cell is one `(sweep value, seed, policy)` triple. Cells run in parallel
//! on a dedicated thread pool; results are collected in cell order, so the
//! output files do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{run_episode, RegretTrace, ThetaCheckpoint};
use super::slope::{dyadic_checkpoints, fit_slope, fmt_sig6, ols_slope};
use super::HarnessError;
use crate::environments::{make_instance, ContextSequence, Environment, InstanceSpec};
use crate::learners::{Construction, Learner, LearnerConfig};
use crate::rng::GENERATOR_ID;
use crate::thresholds::Mode;

/// Smallest horizon an experiment accepts.
pub const MIN_HORIZON: usize = 8;
/// CSV header of every trace file.
pub const CSV_HEADER: &str = "t,optimal_value,learner_value,inst_regret,cum_regret";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<Construction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Either a seed count (seeds `0..k`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(k) => (0..*k).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seeds: SeedSpec,
    /// Slope window; defaults to `[T/16, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "T")]
    Horizon,
    #[serde(rename = "n")]
    Boxes,
    #[serde(rename = "d")]
    Dimension,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "T",
            SweepAxis::Boxes => "n",
            SweepAxis::Dimension => "d",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "T" => Ok(SweepAxis::Horizon),
            "n" => Ok(SweepAxis::Boxes),
            "d" => Ok(SweepAxis::Dimension),
            other => Err(HarnessError::InvalidSpec(format!("unknown sweep axis `{other}` (expected T, n or d)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub instance: InstanceSpec,
    pub learner: LearnerSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Also run the fixed-mass baseline on every cell's seed.
    #[serde(default)]
    pub compare_baseline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Parses a spec file; a relative `contexts_file` is resolved against
    /// the spec's directory.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
        if let Some(file) = spec.instance.contexts_file.as_mut() {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *file = base.join(&*file);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        self.instance.validate()?;
        let horizons: Vec<usize> = match &self.sweep {
            Some(SweepSpec {
                axis: SweepAxis::Horizon,
                values,
            }) => values.clone(),
            _ => vec![self.run.horizon],
        };
        if let Some(&t) = horizons.iter().find(|&&t| t < MIN_HORIZON) {
            return bad(format!("T = {t} is below the minimum of {MIN_HORIZON}"));
        }
        let seeds = self.run.seeds.seeds();
        if seeds.is_empty() {
            return bad("no seeds".into());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad("sweep has no values".into());
            }
            if sweep.values.contains(&0) {
                return bad("sweep values must be positive".into());
            }
            if sweep.axis == SweepAxis::Dimension && !self.instance.contextual {
                return bad("a d sweep needs a contextual instance".into());
            }
        }
        if self.compare_baseline && self.instance.contextual {
            return bad("the fixed-mass baseline is non-contextual".into());
        }
        if let Some([lo, hi]) = self.run.slope_window {
            if lo < 1 || hi <= lo {
                return bad(format!("slope window [{lo}, {hi}] is empty"));
            }
        }
        for value in self.axis_values() {
            self.learner_config(value).validate()?;
        }
        Ok(())
    }

    fn axis_values(&self) -> Vec<Option<usize>> {
        match &self.sweep {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }

    /// Instance spec and horizon of one sweep value.
    pub fn resolve(&self, value: Option<usize>) -> (InstanceSpec, usize) {
        let mut instance = self.instance.clone();
        let mut horizon = self.run.horizon;
        if let (Some(sweep), Some(v)) = (&self.sweep, value) {
            match sweep.axis {
                SweepAxis::Horizon => horizon = v,
                SweepAxis::Boxes => instance.n = v,
                SweepAxis::Dimension => instance.d = v,
            }
        }
        (instance, horizon)
    }

    pub fn learner_config(&self, value: Option<usize>) -> LearnerConfig {
        let (instance, horizon) = self.resolve(value);
        LearnerConfig {
            mode: self.learner.mode,
            contextual: instance.contextual,
            delta: self.learner.delta,
            horizon,
            construction: self.learner.construction,
        }
    }

    /// Content hash of the canonical spec JSON, computed like a git blob id
    /// but with SHA-256.
    pub fn content_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("spec serializes");
        let mut hasher = Sha256::new();
        hasher.update(format!("blob {}\0", body.len()).as_bytes());
        hasher.update(body.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Builds the environment of an instance spec, loading a fixed context
/// sequence when one is named.
pub fn build_environment(instance: &InstanceSpec) -> Result<Environment, HarnessError> {
    let env = make_instance(instance)?;
    let Some(path) = &instance.contexts_file else {
        return Ok(env);
    };
    let Environment::Contextual(ctx) = env else {
        return Err(HarnessError::InvalidSpec("contexts_file needs a contextual instance".into()));
    };
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.clone(),
        source,
    })?;
    let sequence: ContextSequence = serde_json::from_str(&text)?;
    Ok(Environment::Contextual(ctx.with_fixed_contexts(sequence)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Learner,
    Baseline,
}

impl PolicyKind {
    fn label(self) -> &'static str {
        match self {
            PolicyKind::Learner => "learner",
            PolicyKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CellKey {
    value: Option<usize>,
    seed: u64,
    policy: PolicyKind,
}

impl CellKey {
    fn label(&self, axis: Option<SweepAxis>) -> String {
        let prefix = match (axis, self.value) {
            (Some(a), Some(v)) => format!("{}{v}-", a.label()),
            _ => String::new(),
        };
        format!("{prefix}seed{}-{}", self.seed, self.policy.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub axis_value: Option<usize>,
    pub policy: PolicyKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<CheckpointStat>,
    pub slope_window: [usize; 2],
    /// Slope of the mean cumulative regret curve.
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_error: Option<String>,
    pub final_mean: f64,
    pub final_stderr: f64,
    pub mean_realized_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub axis_value: Option<usize>,
    pub horizon: usize,
    pub learner_mean: f64,
    pub baseline_mean: f64,
    /// Mean of paired `baseline - learner` final regrets.
    pub mean_delta: f64,
    pub delta_stderr: f64,
    /// Seeds on which the learner's final regret is lower.
    pub learner_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisExponent {
    pub axis: SweepAxis,
    pub policy: PolicyKind,
    pub values: Vec<usize>,
    pub final_means: Vec<f64>,
    /// Log-log slope of final mean regret against the axis value.
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub file: String,
    pub axis_value: Option<usize>,
    pub seed: u64,
    pub policy: PolicyKind,
    pub final_cum_regret: f64,
    pub open_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta_checkpoints: Vec<ThetaCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub generator: String,
    pub spec_hash: String,
    pub spec: ExperimentSpec,
    pub groups: Vec<GroupSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baseline_comparisons: Vec<BaselineComparison>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis_exponents: Vec<AxisExponent>,
    pub cells: Vec<CellSummary>,
}

impl ExperimentSummary {
    pub fn group(&self, axis_value: Option<usize>, policy: PolicyKind) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.axis_value == axis_value && g.policy == policy)
    }
}

fn run_cell(spec: &ExperimentSpec, key: CellKey, hash: &str) -> Result<RegretTrace, HarnessError> {
    let (instance, horizon) = spec.resolve(key.value);
    let env = build_environment(&instance)?;
    let mut config = spec.learner_config(key.value);
    if key.policy == PolicyKind::Baseline {
        config.construction = Some(Construction::Flat);
    }
    let contextual = config.contextual;
    let mut learner = Learner::new(config, env.costs().to_vec(), instance.d)?;
    run_episode(&env, &mut learner, contextual, horizon, key.seed, hash)
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The CSV text of a trace.
pub fn trace_csv(trace: &RegretTrace) -> String {
    let mut out = String::with_capacity(48 * (trace.rounds.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.rounds {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            fmt_sig6(r.optimal_value),
            fmt_sig6(r.learner_value),
            fmt_sig6(r.inst_regret),
            fmt_sig6(r.cum_regret)
        ));
    }
    out
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Cumulative regret as written to the CSV.
fn written_cumulative(trace: &RegretTrace) -> Vec<f64> {
    trace
        .rounds
        .iter()
        .map(|r| fmt_sig6(r.cum_regret).parse().expect("formatted float parses"))
        .collect()
}

fn summarize_group(
    spec: &ExperimentSpec,
    value: Option<usize>,
    policy: PolicyKind,
    seeds: &[u64],
    traces: &[&RegretTrace],
) -> GroupSummary {
    let (_, horizon) = spec.resolve(value);
    let curves: Vec<Vec<f64>> = traces.iter().map(|t| written_cumulative(t)).collect();
    let mut ts = dyadic_checkpoints(1, horizon);
    if ts.last() != Some(&horizon) {
        ts.push(horizon);
    }
    let checkpoints = ts
        .iter()
        .map(|&t| {
            let at: Vec<f64> = curves.iter().map(|c| c[t - 1]).collect();
            let (mean, stderr) = mean_stderr(&at);
            CheckpointStat { t, mean, stderr }
        })
        .collect();
    let mean_curve: Vec<f64> = (0..horizon)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect();
    let slope_window = spec.run.slope_window.unwrap_or([(horizon / 16).max(1), horizon]);
    let (slope, slope_error) = match fit_slope(&mean_curve, slope_window[0], slope_window[1]) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let finals: Vec<f64> = curves.iter().map(|c| c[horizon - 1]).collect();
    let (final_mean, final_stderr) = mean_stderr(&finals);
    let realized: Vec<f64> = traces
        .iter()
        .map(|t| t.rounds.iter().map(|r| r.realized_utility).sum::<f64>() / horizon as f64)
        .collect();
    GroupSummary {
        axis_value: value,
        policy,
        horizon,
        seeds: seeds.to_vec(),
        checkpoints,
        slope_window,
        slope,
        slope_error,
        final_mean,
        final_stderr,
        mean_realized_utility: mean_stderr(&realized).0,
    }
}

/// Runs every cell of `spec`, writes one CSV per cell plus `summary.json`
/// into `out`, and returns the summary. `parallel` is the worker count.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, parallel: usize) -> Result<ExperimentSummary, HarnessError> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let hash = spec.content_hash();
    let seeds = spec.run.seeds.seeds();
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let policies: &[PolicyKind] = if spec.compare_baseline {
        &[PolicyKind::Learner, PolicyKind::Baseline]
    } else {
        &[PolicyKind::Learner]
    };
    let values = spec.axis_values();
    let mut keys = Vec::with_capacity(values.len() * policies.len() * seeds.len());
    for &value in &values {
        for &policy in policies {
            keys.extend(seeds.iter().map(|&seed| CellKey { value, seed, policy }));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidSpec(format!("thread pool: {e}")))?;
    let results: Vec<Result<RegretTrace, HarnessError>> =
        pool.install(|| keys.par_iter().map(|&k| run_cell(spec, k, &hash)).collect());
    let mut traces = Vec::with_capacity(keys.len());
    for (key, result) in keys.iter().zip(results) {
        let trace = result.map_err(|e| HarnessError::Cell {
            cell: key.label(axis),
            source: Box::new(e),
        })?;
        traces.push(trace);
    }

    let mut cells = Vec::with_capacity(keys.len());
    for (key, trace) in keys.iter().zip(&traces) {
        let file = format!("{}.csv", key.label(axis));
        write_file(&out.join(&file), &trace_csv(trace))?;
        cells.push(CellSummary {
            file,
            axis_value: key.value,
            seed: key.seed,
            policy: key.policy,
            final_cum_regret: written_cumulative(trace).last().copied().unwrap_or(0.0),
            open_counts: trace.open_counts.clone(),
            theta_checkpoints: trace.theta_checkpoints.clone(),
        });
    }

    let select = |value: Option<usize>, policy: PolicyKind| -> Vec<&RegretTrace> {
        keys.iter()
            .zip(&traces)
            .filter(|(k, _)| k.value == value && k.policy == policy)
            .map(|(_, t)| t)
            .collect()
    };
    let mut groups = Vec::new();
    for &value in &values {
        for &policy in policies {
            groups.push(summarize_group(spec, value, policy, &seeds, &select(value, policy)));
        }
    }

    let baseline_comparisons = if spec.compare_baseline {
        values
            .iter()
            .map(|&value| {
                let learner: Vec<f64> = select(value, PolicyKind::Learner)
                    .iter()
                    .map(|t| *written_cumulative(t).last().expect("nonempty"))
                    .collect();
                let baseline: Vec<f64> = select(value, PolicyKind::Baseline)
                    .iter()
                    .map(|t| *written_cumulative(t).last().expect("nonempty"))
                    .collect();
                let deltas: Vec<f64> = baseline.iter().zip(&learner).map(|(b, l)| b - l).collect();
                let (mean_delta, delta_stderr) = mean_stderr(&deltas);
                BaselineComparison {
                    axis_value: value,
                    horizon: spec.resolve(value).1,
                    learner_mean: mean_stderr(&learner).0,
                    baseline_mean: mean_stderr(&baseline).0,
                    mean_delta,
                    delta_stderr,
                    learner_wins: deltas.iter().filter(|&&d| d > 0.0).count(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let axis_exponents = match &spec.sweep {
        Some(sweep) if sweep.values.len() >= 2 => policies
            .iter()
            .map(|&policy| {
                let final_means: Vec<f64> = groups
                    .iter()
                    .filter(|g| g.policy == policy)
                    .map(|g| g.final_mean)
                    .collect();
                let exponent = final_means.iter().all(|&m| m > 0.0).then(|| {
                    let points: Vec<(f64, f64)> = sweep
                        .values
                        .iter()
                        .zip(&final_means)
                        .map(|(&v, &m)| ((v as f64).ln(), m.ln()))
                        .collect();
                    ols_slope(&points)
                });
                AxisExponent {
                    axis: sweep.axis,
                    policy,
                    values: sweep.values.clone(),
                    final_means,
                    exponent,
                }
            })
            .collect(),
        _ => Vec::new(),
    };

    let summary = ExperimentSummary {
        generator: GENERATOR_ID.to_string(),
        spec_hash: hash,
        spec: spec.clone(),
        groups,
        baseline_comparisons,
        axis_exponents,
        cells,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_file(&out.join("summary.json"), &(json + "\n"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{CostSpec, Family};

    fn spec(horizon: usize, seeds: u64) -> ExperimentSpec {
        ExperimentSpec {
            instance: InstanceSpec::new(3, Family::Grid, 3, CostSpec::Fixed(0.1)),
            learner: LearnerSpec {
                mode: Mode::Pandora,
                construction: None,
                delta: None,
            },
            run: RunSpec {
                horizon,
                seeds: SeedSpec::Count(seeds),
                slope_window: None,
            },
            sweep: None,
            compare_baseline: false,
            out: None,
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{
            "instance": {"n": 3, "family": "grid", "support_size": 3, "cost": [0.05, 0.2]},
            "learner": {"mode": "prophet", "construction": "fixed-mass"},
            "run": {"T": 64, "seeds": [4, 7]},
            "sweep": {"axis": "n", "values": [2, 4]}
        }"#;
        let s: ExperimentSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s.run.seeds.seeds(), vec![4, 7]);
        assert_eq!(s.learner.construction, Some(Construction::Flat));
        assert_eq!(s.sweep.as_ref().unwrap().axis, SweepAxis::Boxes);
        s.validate().unwrap();
        let back: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.content_hash().len(), 64);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(4, 2).validate().is_err());
        let mut s = spec(16, 2);
        s.run.seeds = SeedSpec::List(vec![1, 1]);
        assert!(s.validate().is_err());
        let mut s = spec(16, 2);
        s.sweep = Some(SweepSpec {
            axis: SweepAxis::Dimension,
            values: vec![2],
        });
        assert!(s.validate().is_err());
        assert!(SweepAxis::parse("x").is_err());
    }

    #[test]
    fn single_cell_files_and_aggregation() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(40, 3);
        let summary = run_experiment(&s, dir.path(), 1).unwrap();
        assert_eq!(summary.groups.len(), 1);
        assert_eq!(summary.cells.len(), 3);
        let mut finals = Vec::new();
        for cell in &summary.cells {
            let text = fs::read_to_string(dir.path().join(&cell.file)).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), 41);
            assert_eq!(lines[0], CSV_HEADER);
            let last: f64 = lines[40].rsplit(',').next().unwrap().parse().unwrap();
            finals.push(last);
        }
        let g = &summary.groups[0];
        let mean = finals.iter().sum::<f64>() / 3.0;
        assert!((g.final_mean - mean).abs() < 1e-12);
        let at32 = g.checkpoints.iter().find(|c| c.t == 32).unwrap();
        assert!(at32.mean >= 0.0);
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn parallel_matches_serial() {
        let mut s = spec(24, 3);
        s.compare_baseline = true;
        s.sweep = Some(SweepSpec {
            axis: SweepAxis::Boxes,
            values: vec![2, 3],
        });
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&s, a.path(), 1).unwrap();
        let summary = run_experiment(&s, b.path(), 3).unwrap();
        assert_eq!(summary.baseline_comparisons.len(), 2);
        assert_eq!(summary.axis_exponents.len(), 2);
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 2 * 2 * 3 + 1);
        for name in names {
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }

    #[test]
    fn unwritable_output_errors() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = run_experiment(&spec(16, 1), &blocker.join("sub"), 1).unwrap_err();
        assert!(matches!(err, HarnessError::Io { .. }));
    }
}
