//! Subcommand implementations. Each writes its files into the output
//! directory and returns what it wrote.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rsoup_core::env::RewardVector;
use rsoup_core::pareto::{self, FrontComparison, FrontPoint, NamedFront, NormalizationSpec};
use rsoup_core::policy::WeightVector;
use rsoup_core::quadratic::{self, BoundCurve, VerifyReport, VerifySpec};
use rsoup_core::simplex::SimplexPoint;
use rsoup_core::soup::{self, LmcReport, ScalingAudit};
use rsoup_core::trainer::{self, RunRecord};
use rsoup_core::seed;
use serde::{Deserialize, Serialize};

use crate::output;
use crate::pipeline::{self, Experiment, FrontRow, Selection};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A precondition or input problem; the binary exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Whether a finished command found what it checks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub updates: usize,
    pub final_scalarized_return: Option<f64>,
    pub distance_from_init: f64,
    pub relative_distance_from_init: f64,
}

impl RunSummary {
    pub fn of(run: &RunRecord) -> Self {
        RunSummary {
            label: run.weighting.label(),
            seed: run.config.seed,
            updates: run.config.updates,
            final_scalarized_return: run.history.last().map(|h| h.scalarized_return),
            distance_from_init: run.distance_from_init,
            relative_distance_from_init: run.relative_distance_from_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub version: String,
    pub config_hash: String,
    pub run: RunSummary,
    pub init_eval: RewardVector,
    pub pretrained_eval: RewardVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub version: String,
    pub config_hash: String,
    pub runs: Vec<RunSummary>,
    pub evals: Vec<RewardVector>,
}

/// Contents of `front_rs.json` and `front_morl.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFile {
    pub version: String,
    pub config_hash: String,
    pub kind: String,
    pub reward_ids: Vec<String>,
    /// Evaluation of the shared initialization.
    pub init_eval: RewardVector,
    pub normalization: NormalizationSpec,
    pub rows: Vec<FrontRow>,
    pub normalized: Vec<FrontPoint>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub version: String,
    /// Per input: the config hash from its JSON, if any.
    pub input_hashes: Vec<Option<String>>,
    pub normalization: NormalizationSpec,
    pub pareto_fronts: Vec<NamedFront>,
    #[serde(flatten)]
    pub comparison: FrontComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcFile {
    pub version: String,
    pub config_hash: String,
    pub report: LmcReport,
    pub interior_mean_margin: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScratchPair {
    pub seed: u64,
    pub pretrained: LmcReport,
    pub scratch: LmcReport,
    pub pretrained_mean_margin: f64,
    pub scratch_mean_margin: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScratchReport {
    pub version: String,
    pub config_hash: String,
    pub pairs: Vec<ScratchPair>,
    pub mean_pretrained: f64,
    pub mean_scratch: f64,
    pub mean_difference: f64,
    pub ordering_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub version: String,
    pub config_hash: String,
    pub source: String,
    pub lambda: f64,
    pub audit: ScalingAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadVerifyFile {
    pub version: String,
    pub report: VerifyReport,
    pub curve: BoundCurve,
}

/// Everything from one `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config_hash: String,
    pub pretrain: RunSummary,
    pub experts: Vec<RunSummary>,
    pub morl: Vec<RunSummary>,
    pub init_eval: RewardVector,
    pub rs_front: Vec<FrontRow>,
    pub morl_front: Vec<FrontRow>,
    pub normalization: NormalizationSpec,
    pub comparison: FrontComparison,
    pub lmc: Option<LmcReport>,
    pub selection: Vec<Selection>,
}

pub const PRETRAINED: &str = "pretrained.ckpt";

pub fn expert_file(id: &str) -> String {
    format!("expert_{id}.ckpt")
}

fn hash(exp: &Experiment) -> String {
    exp.config.hash()
}

fn load_pretrained(exp: &Experiment, out: &Path) -> Result<WeightVector> {
    let path = out.join(PRETRAINED);
    if !path.exists() {
        return Err(UsageError(format!("{} not found; run `rsoup pretrain` first", path.display())).into());
    }
    output::load_checkpoint(&path, &exp.arch)
}

fn load_experts(exp: &Experiment, out: &Path) -> Result<Vec<WeightVector>> {
    exp.config
        .rewards
        .iter()
        .map(|id| {
            let path = out.join(expert_file(id));
            if !path.exists() {
                return Err(UsageError(format!("{} not found; run `rsoup finetune` first", path.display())).into());
            }
            output::load_checkpoint(&path, &exp.arch)
        })
        .collect()
}

fn history_name(kind: &str, index: usize, run: &RunRecord) -> String {
    match run.weighting.weights.vertex_index() {
        Some(i) if kind == "finetune" => format!("finetune_{}_history.csv", run.weighting.ids[i]),
        _ => format!("{kind}_{index:03}_history.csv"),
    }
}

pub fn pretrain(exp: &Experiment, out: &Path) -> Result<PretrainReport> {
    output::ensure_dir(out)?;
    let run = exp.pretrain()?;
    output::save_checkpoint(&out.join(PRETRAINED), &run.final_weights)?;
    output::write_history_csv(&out.join("pretrain_history.csv"), &run)?;
    let init = trainer::fresh_init(exp.arch.clone(), exp.config.seed)?;
    let t = exp.config.test_seed();
    let report = PretrainReport {
        version: VERSION.into(),
        config_hash: hash(exp),
        run: RunSummary::of(&run),
        init_eval: exp.evaluate(&init, t)?,
        pretrained_eval: exp.evaluate(&run.final_weights, t)?,
    };
    output::write_json(&out.join("pretrain.json"), &report)?;
    Ok(report)
}

fn train_experts(exp: &Experiment, init: &WeightVector, out: &Path) -> Result<Vec<RunRecord>> {
    let runs = exp.experts(init)?;
    for (i, (id, run)) in exp.config.rewards.iter().zip(&runs).enumerate() {
        output::save_checkpoint(&out.join(expert_file(id)), &run.final_weights)?;
        output::write_history_csv(&out.join(history_name("finetune", i, run)), run)?;
    }
    Ok(runs)
}

pub fn finetune(exp: &Experiment, out: &Path) -> Result<FinetuneReport> {
    let init = load_pretrained(exp, out)?;
    let runs = train_experts(exp, &init, out)?;
    let t = exp.config.test_seed();
    let report = FinetuneReport {
        version: VERSION.into(),
        config_hash: hash(exp),
        runs: runs.iter().map(RunSummary::of).collect(),
        evals: runs.iter().map(|r| exp.evaluate(&r.final_weights, t)).collect::<rsoup_core::Result<_>>()?,
    };
    output::write_json(&out.join("finetune.json"), &report)?;
    Ok(report)
}

fn front_file(exp: &Experiment, kind: &str, init_eval: RewardVector, rows: Vec<FrontRow>, runs: &[RunRecord]) -> Result<FrontFile> {
    let values: Vec<&[f64]> = rows.iter().map(|r| r.eval.values.as_slice()).collect();
    let normalization = pipeline::normalization(&init_eval, &values)?;
    let points: Vec<FrontPoint> = rows.iter().map(FrontRow::point).collect();
    Ok(FrontFile {
        version: VERSION.into(),
        config_hash: hash(exp),
        kind: kind.into(),
        reward_ids: exp.config.rewards.clone(),
        normalized: pareto::normalize(&points, &normalization)?,
        init_eval,
        normalization,
        rows,
        runs: runs.iter().map(RunSummary::of).collect(),
    })
}

/// User preferences reported in `selection.csv`: the lambda grid itself for
/// two rewards, otherwise the vertices and the barycenter.
fn preferences(exp: &Experiment) -> Vec<SimplexPoint> {
    let n = exp.n_rewards();
    if n == 2 {
        SimplexPoint::pair_grid(5)
    } else {
        let mut p: Vec<SimplexPoint> = (0..n).map(|i| SimplexPoint::vertex(n, i)).collect();
        p.push(SimplexPoint::barycenter(n));
        p
    }
}

fn write_selection_csv(path: &Path, rows: &[Selection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["preference", "lambda", "validation_value", "test_value"])?;
    let join = |p: &SimplexPoint| p.coeffs().iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(";");
    for s in rows {
        w.write_record([join(&s.preference), join(&s.lambda), format!("{}", s.validation_value), format!("{}", s.test_value)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_lmc(exp: &Experiment, out: &Path, report: &LmcReport) -> Result<()> {
    output::write_lmc_csv(&out.join("lmc.csv"), report)?;
    let file = LmcFile {
        version: VERSION.into(),
        config_hash: hash(exp),
        interior_mean_margin: (0..report.reward_ids.len()).map(|k| report.interior_mean_margin(k)).collect(),
        report: report.clone(),
    };
    output::write_json(&out.join("lmc.json"), &file)
}

pub struct RsOutput {
    pub front: FrontFile,
    pub lmc: Option<LmcReport>,
    pub selection: Vec<Selection>,
    pub runs: Vec<RunRecord>,
}

pub fn rs(exp: &Experiment, out: &Path) -> Result<RsOutput> {
    let init = load_pretrained(exp, out)?;
    let runs = train_experts(exp, &init, out)?;
    let experts: Vec<WeightVector> = runs.iter().map(|r| r.final_weights.clone()).collect();
    let t = exp.config.test_seed();
    let grid = exp.lambda_grid()?;
    let candidates = exp.sweep(&experts, &grid, exp.config.eval.episodes, t)?;
    let rows = exp.rs_rows(&candidates);
    output::write_front_csv(&out.join("front_rs.csv"), "lambda", &rows)?;
    let front = front_file(exp, "rs", exp.evaluate(&init, t)?, rows, &runs)?;
    output::write_json(&out.join("front_rs.json"), &front)?;
    let lmc = if experts.len() == 2 {
        let report = exp.lmc(&experts[0], &experts[1])?;
        write_lmc(exp, out, &report)?;
        Some(report)
    } else {
        None
    };
    let selection = exp.select(&experts, &candidates, &preferences(exp))?;
    write_selection_csv(&out.join("selection.csv"), &selection)?;
    Ok(RsOutput { front, lmc, selection, runs })
}

pub struct MorlOutput {
    pub front: FrontFile,
    pub runs: Vec<RunRecord>,
}

pub fn morl(exp: &Experiment, out: &Path) -> Result<MorlOutput> {
    let init = load_pretrained(exp, out)?;
    let grid = exp.mu_grid()?;
    let runs = exp.morl_runs(&init, &grid)?;
    for (i, run) in runs.iter().enumerate() {
        output::write_history_csv(&out.join(history_name("morl", i, run)), run)?;
    }
    let t = exp.config.test_seed();
    let rows = exp.morl_rows(&runs, t)?;
    output::write_front_csv(&out.join("front_morl.csv"), "mu", &rows)?;
    let front = front_file(exp, "morl", exp.evaluate(&init, t)?, rows, &runs)?;
    output::write_json(&out.join("front_morl.json"), &front)?;
    Ok(MorlOutput { front, runs })
}

struct LoadedFront {
    name: String,
    points: Vec<FrontPoint>,
    init: Option<RewardVector>,
    hash: Option<String>,
}

fn load_front(path: &Path) -> Result<LoadedFront> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let f: FrontFile = serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        Ok(LoadedFront {
            name,
            points: f.rows.iter().map(FrontRow::point).collect(),
            init: Some(f.init_eval),
            hash: Some(f.config_hash),
        })
    } else {
        Ok(LoadedFront { name, points: output::read_front_csv(path)?, init: None, hash: None })
    }
}

/// Joint normalization and deficiencies of the fronts in `paths` (JSON or
/// CSV). The first front's initialization evaluation sets the normalization
/// when available; CSV-only inputs fall back to min-max scaling.
pub fn compare(paths: &[PathBuf], utopia: Option<Vec<f64>>, out: &Path) -> Result<CompareReport> {
    if paths.len() < 2 {
        return Err(UsageError("compare needs at least two fronts".into()).into());
    }
    let fronts = paths.iter().map(|p| load_front(p)).collect::<Result<Vec<_>>>()?;
    let ids = fronts[0].points.first().map(|p| p.rewards.ids.clone()).context("first front is empty")?;
    for (f, p) in fronts.iter().zip(paths) {
        if f.points.is_empty() {
            return Err(UsageError(format!("{} has no points", p.display())).into());
        }
        if f.points.iter().any(|q| q.rewards.ids != ids) {
            return Err(UsageError(format!("{} uses reward ids other than {ids:?}", p.display())).into());
        }
    }
    let union: Vec<&[f64]> = fronts.iter().flat_map(|f| f.points.iter().map(|p| p.rewards.values.as_slice())).collect();
    let normalization = match fronts.iter().find_map(|f| f.init.clone()) {
        Some(init) => pipeline::normalization(&init, &union)?,
        None => {
            let top = pareto::utopia_of(&union)?;
            pipeline::normalization(&RewardVector::new(ids.clone(), top)?, &union)?
        }
    };
    let named = fronts
        .iter()
        .map(|f| Ok(NamedFront { name: f.name.clone(), points: pareto::normalize(&f.points, &normalization)? }))
        .collect::<Result<Vec<_>>>()?;
    let pareto_fronts = named
        .iter()
        .map(|f| Ok(NamedFront { name: f.name.clone(), points: pareto::pareto_filter(&f.points)? }))
        .collect::<Result<Vec<_>>>()?;
    let comparison = pareto::compare_fronts(named, utopia).map_err(|e| UsageError(e.to_string()))?;
    let report = CompareReport {
        version: VERSION.into(),
        input_hashes: fronts.iter().map(|f| f.hash.clone()).collect(),
        normalization,
        pareto_fronts,
        comparison,
    };
    output::ensure_dir(out)?;
    output::write_json(&out.join("compare.json"), &report)?;
    Ok(report)
}

pub fn quad_verify(spec: &VerifySpec, m_values: &[f64], out: &Path) -> Result<(QuadVerifyFile, Status)> {
    let report = quadratic::verify_instances(spec)?;
    let curve = quadratic::bound_curve(m_values, &quadratic::unit_grid(spec.mu_points))?;
    output::ensure_dir(out)?;
    output::write_bound_curve_csv(&out.join("bound_curve.csv"), &curve)?;
    let status = if report.passed() { Status::Ok } else { Status::Violation };
    let file = QuadVerifyFile { version: VERSION.into(), report, curve };
    output::write_json(&out.join("quad_verify.json"), &file)?;
    Ok((file, status))
}

pub fn lmc(exp: &Experiment, out: &Path) -> Result<LmcReport> {
    let experts = load_experts(exp, out)?;
    if experts.len() != 2 {
        return Err(UsageError(format!("lmc needs exactly two rewards, the config has {}", experts.len())).into());
    }
    let report = exp.lmc(&experts[0], &experts[1])?;
    write_lmc(exp, out, &report)?;
    Ok(report)
}

/// Paired LMC audits over seeds `seed, seed + 1, ...`: experts from the
/// shared pretrained initialization against experts trained from scratch.
pub fn scratch_control(exp: &Experiment, repeats: usize, out: &Path) -> Result<(ScratchReport, Status)> {
    if exp.n_rewards() != 2 {
        return Err(UsageError("scratch-control needs exactly two rewards".into()).into());
    }
    if repeats == 0 {
        return Err(UsageError("--repeats must be positive".into()).into());
    }
    output::ensure_dir(out)?;
    let mut pairs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let s = exp.config.seed.wrapping_add(r as u64);
        let e = Experiment::new(exp.config.with_seed(s))?;
        let init = e.pretrain()?.final_weights;
        let shared: Vec<WeightVector> = e.experts(&init)?.into_iter().map(|r| r.final_weights).collect();
        let scratch: Vec<WeightVector> = e.scratch_experts()?.into_iter().map(|r| r.final_weights).collect();
        let pretrained = e.lmc(&shared[0], &shared[1])?;
        let scratch = e.lmc(&scratch[0], &scratch[1])?;
        output::write_lmc_csv(&out.join(format!("lmc_pretrained_seed{s}.csv")), &pretrained)?;
        output::write_lmc_csv(&out.join(format!("lmc_scratch_seed{s}.csv")), &scratch)?;
        let a = pretrained.interior_mean_margin_all().context("lambda grid has no interior points")?;
        let b = scratch.interior_mean_margin_all().context("lambda grid has no interior points")?;
        pairs.push(ScratchPair { seed: s, pretrained, scratch, pretrained_mean_margin: a, scratch_mean_margin: b, difference: a - b });
    }
    let n = pairs.len() as f64;
    let mean_pretrained = pairs.iter().map(|p| p.pretrained_mean_margin).sum::<f64>() / n;
    let mean_scratch = pairs.iter().map(|p| p.scratch_mean_margin).sum::<f64>() / n;
    let report = ScratchReport {
        version: VERSION.into(),
        config_hash: hash(exp),
        ordering_holds: mean_pretrained > mean_scratch,
        mean_difference: mean_pretrained - mean_scratch,
        mean_pretrained,
        mean_scratch,
        pairs,
    };
    output::write_json(&out.join("scratch_control.json"), &report)?;
    let status = if report.ordering_holds { Status::Ok } else { Status::Violation };
    Ok((report, status))
}

pub const AUDIT_SCALES: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

/// Uniform probe observations in `[-1, 1]^obs_dim`.
pub fn probes(obs_dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rsoup_core::seed::rng(seed);
    (0..count).map(|_| (0..obs_dim).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
}

/// Scaling audit around the first expert along the unit direction towards
/// the second, or around a fresh initialization along a random direction.
pub fn ensemble_audit(exp: &Experiment, fresh: bool, lambda: f64, out: &Path) -> Result<AuditReport> {
    let (theta, mut direction, source) = if fresh {
        let theta = trainer::fresh_init(exp.arch.clone(), exp.config.seed)?;
        let mut rng = seed::rng(seed::derive(exp.config.seed, "audit:direction"));
        let u: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        (theta, u, "fresh".to_string())
    } else {
        let experts = load_experts(exp, out)?;
        let u = experts[1].values().iter().zip(experts[0].values()).map(|(b, a)| b - a).collect();
        (experts[0].clone(), u, format!("experts:{}->{}", exp.config.rewards[0], exp.config.rewards[1]))
    };
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        bail!("the audit direction is zero");
    }
    direction.iter_mut().for_each(|x| *x /= norm);
    let probes = probes(exp.arch.obs_dim, 16, seed::derive(exp.config.seed, "audit:probes"));
    let audit = soup::scaling_audit(&theta, &direction, lambda, &AUDIT_SCALES, &probes)?;
    output::ensure_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("ensemble_audit.csv"))?;
    w.write_record(["scale", "gap"])?;
    for (s, g) in &audit.points {
        w.write_record([format!("{s}"), format!("{g}")])?;
    }
    w.flush()?;
    let report = AuditReport { version: VERSION.into(), config_hash: hash(exp), source, lambda, audit };
    output::write_json(&out.join("ensemble_audit.json"), &report)?;
    Ok(report)
}

/// Every stage in order, finishing with `report.json`.
pub fn run_all(exp: &Experiment, out: &Path) -> Result<ExperimentReport> {
    let pre = pretrain(exp, out)?;
    let rs_out = rs(exp, out)?;
    let morl_out = morl(exp, out)?;
    let compared = compare(&[out.join("front_rs.json"), out.join("front_morl.json")], None, out)?;
    let report = ExperimentReport {
        version: VERSION.into(),
        config_hash: hash(exp),
        pretrain: pre.run,
        experts: rs_out.runs.iter().map(RunSummary::of).collect(),
        morl: morl_out.runs.iter().map(RunSummary::of).collect(),
        init_eval: rs_out.front.init_eval.clone(),
        rs_front: rs_out.front.rows,
        morl_front: morl_out.front.rows,
        normalization: compared.normalization,
        comparison: compared.comparison,
        lmc: rs_out.lmc,
        selection: rs_out.selection,
    };
    output::write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
