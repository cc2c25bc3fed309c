//! CSV, JSON and checkpoint files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rsoup_core::checkpoint;
use rsoup_core::env::RewardVector;
use rsoup_core::pareto::{FrontPoint, Provenance};
use rsoup_core::policy::{ArchSpec, WeightVector};
use rsoup_core::quadratic::BoundCurve;
use rsoup_core::soup::LmcReport;
use rsoup_core::trainer::RunRecord;
use serde::Serialize;

use crate::pipeline::FrontRow;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn save_checkpoint(path: &Path, w: &WeightVector) -> Result<()> {
    fs::write(path, checkpoint::encode(w)).with_context(|| format!("writing {}", path.display()))
}

pub fn load_checkpoint(path: &Path, arch: &ArchSpec) -> Result<WeightVector> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    checkpoint::decode_expecting(&bytes, arch).with_context(|| format!("loading {}", path.display()))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

/// Columns: update, scalarized_return, then one column per reward id.
pub fn write_history_csv(path: &Path, run: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["update".to_string(), "scalarized_return".to_string()];
    header.extend(run.reward_ids.iter().cloned());
    w.write_record(&header)?;
    for h in &run.history {
        let mut rec = vec![h.update.to_string(), num(h.scalarized_return)];
        rec.extend(h.rewards.iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn coeff_columns(name: &str, ids: &[String]) -> Vec<String> {
    if ids.len() == 2 {
        vec![name.to_string()]
    } else {
        ids.iter().map(|id| format!("{name}_{id}")).collect()
    }
}

fn provenance_label(p: &Provenance) -> String {
    p.label()
}

/// Columns: the coefficient (`lambda` or `mu`; for two rewards the weight on
/// the second one, otherwise one column per reward), each reward, provenance.
pub fn write_front_csv(path: &Path, coeff_name: &str, rows: &[FrontRow]) -> Result<()> {
    let first = rows.first().context("empty front")?;
    let ids = &first.eval.ids;
    let mut w = csv_writer(path)?;
    let mut header = coeff_columns(coeff_name, ids);
    header.extend(ids.iter().cloned());
    header.push("provenance".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = if ids.len() == 2 {
            vec![num(r.coeffs.coeffs()[1])]
        } else {
            r.coeffs.coeffs().iter().map(|c| num(*c)).collect()
        };
        rec.extend(r.eval.values.iter().map(|v| num(*v)));
        rec.push(provenance_label(&r.provenance));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a front CSV: an optional leading coefficient column (`lambda*` or
/// `mu*`), one column per reward, and a `provenance` column.
pub fn read_front_csv(path: &Path) -> Result<Vec<FrontPoint>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let reward_cols: Vec<usize> = (0..header.len())
        .filter(|&i| {
            let h = &header[i];
            h != "provenance" && h != "lambda" && h != "mu" && !h.starts_with("lambda_") && !h.starts_with("mu_")
        })
        .collect();
    let prov_col = header.iter().position(|h| h == "provenance");
    let coeff_cols: Vec<usize> = (0..header.len()).filter(|i| !reward_cols.contains(i) && Some(*i) != prov_col).collect();
    if reward_cols.is_empty() {
        bail!("{}: no reward columns", path.display());
    }
    let ids: Vec<String> = reward_cols.iter().map(|&i| header[i].clone()).collect();
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().with_context(|| format!("{}: row {}: bad number `{}`", path.display(), line + 2, &rec[i]))
        };
        let values = reward_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<f64>>>()?;
        let coeffs = coeff_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<f64>>>()?;
        let kind = prov_col.map(|i| rec[i].to_string()).unwrap_or_default();
        let coeffs = if coeffs.len() == 1 && ids.len() == 2 { vec![1.0 - coeffs[0], coeffs[0]] } else { coeffs };
        let provenance = match kind.as_str() {
            "morl" => Provenance::Morl { mu: coeffs },
            "init" => Provenance::Init,
            k if k.starts_with("endpoint:") => Provenance::Endpoint { reward_id: k["endpoint:".len()..].to_string() },
            _ => Provenance::Rs { lambda: coeffs },
        };
        points.push(FrontPoint { rewards: RewardVector::new(ids.clone(), values)?, provenance });
    }
    Ok(points)
}

/// Columns: lambda, then `<id>_interpolated`, `<id>_linear`, `<id>_margin` per reward.
pub fn write_lmc_csv(path: &Path, report: &LmcReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["lambda".to_string()];
    for id in &report.reward_ids {
        header.extend([format!("{id}_interpolated"), format!("{id}_linear"), format!("{id}_margin")]);
    }
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![num(row.lambda)];
        for k in 0..report.reward_ids.len() {
            rec.extend([num(row.interpolated[k]), num(row.linear[k]), num(row.margin[k])]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: mu_hat, rs_value, lmc_lower, then `bound_M=<M>` per curvature ratio.
pub fn write_bound_curve_csv(path: &Path, curve: &BoundCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["mu_hat".to_string(), "rs_value".into(), "lmc_lower".into()];
    header.extend(curve.m_values.iter().map(|m| format!("bound_M={m}")));
    w.write_record(&header)?;
    for row in &curve.rows {
        let mut rec = vec![num(row.mu_hat), num(row.rs_value), num(row.lmc_lower)];
        rec.extend(row.upper.iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
