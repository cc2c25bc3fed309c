//! Dominance, front extraction, normalization and hypervolume deficiency.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::RewardVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Rs { lambda: Vec<f64> },
    Morl { mu: Vec<f64> },
    Endpoint { reward_id: String },
    Init,
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Rs { .. } => "rs".into(),
            Provenance::Morl { .. } => "morl".into(),
            Provenance::Endpoint { reward_id } => alloc::format!("endpoint:{reward_id}"),
            Provenance::Init => "init".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub rewards: RewardVector,
    pub provenance: Provenance,
}

/// True iff `a` is at least `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Arity(a.len(), b.len()));
    }
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return Ok(false);
        }
        if x > y {
            strict = true;
        }
    }
    Ok(strict)
}

/// Indices of the undominated vectors in input order; of several exact
/// duplicates only the first is kept.
pub fn pareto_indices(points: &[&[f64]]) -> Result<Vec<usize>> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            if dominates(q, p)? || (j < i && q == p) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    Ok(keep)
}

pub fn pareto_filter(points: &[FrontPoint]) -> Result<Vec<FrontPoint>> {
    check_ids(points)?;
    let values: Vec<&[f64]> = points.iter().map(|p| p.rewards.values.as_slice()).collect();
    Ok(pareto_indices(&values)?.into_iter().map(|i| points[i].clone()).collect())
}

fn check_ids(points: &[FrontPoint]) -> Result<()> {
    if let Some(first) = points.first() {
        for p in &points[1..] {
            if p.rewards.ids != first.rewards.ids {
                return Err(Error::invalid("front points carry different reward ids"));
            }
        }
    }
    Ok(())
}

/// Per reward: the value mapped to 1 (the initialization) and to 0 (the worst model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub ids: Vec<String>,
    pub init: Vec<f64>,
    pub worst: Vec<f64>,
}

impl NormalizationSpec {
    pub fn new(ids: Vec<String>, init: Vec<f64>, worst: Vec<f64>) -> Result<Self> {
        if ids.len() != init.len() || ids.len() != worst.len() {
            return Err(Error::Arity(ids.len(), init.len().max(worst.len())));
        }
        for (id, (i, w)) in ids.iter().zip(init.iter().zip(&worst)) {
            if !i.is_finite() || !w.is_finite() {
                return Err(Error::NonFinite("normalization bound"));
            }
            if i == w {
                return Err(Error::Degenerate(alloc::format!("reward `{id}` has init == worst == {i}")));
            }
        }
        Ok(NormalizationSpec { ids, init, worst })
    }

    pub fn apply(&self, rewards: &RewardVector) -> Result<RewardVector> {
        let values = rewards
            .ids
            .iter()
            .zip(&rewards.values)
            .map(|(id, r)| {
                let k = self.ids.iter().position(|x| x == id).ok_or_else(|| Error::UnknownReward(id.clone()))?;
                Ok((r - self.worst[k]) / (self.init[k] - self.worst[k]))
            })
            .collect::<Result<Vec<f64>>>()?;
        RewardVector::new(rewards.ids.clone(), values)
    }
}

/// Maps each reward by `r -> (r - worst) / (init - worst)`.
pub fn normalize(points: &[FrontPoint], spec: &NormalizationSpec) -> Result<Vec<FrontPoint>> {
    points
        .iter()
        .map(|p| Ok(FrontPoint { rewards: spec.apply(&p.rewards)?, provenance: p.provenance.clone() }))
        .collect()
}

/// Componentwise minimum.
pub fn floor_of(points: &[&[f64]]) -> Result<Vec<f64>> {
    extreme(points, f64::min)
}

/// Componentwise maximum.
pub fn utopia_of(points: &[&[f64]]) -> Result<Vec<f64>> {
    extreme(points, f64::max)
}

fn extreme(points: &[&[f64]], pick: fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let first = points.first().ok_or_else(|| Error::invalid("no points"))?;
    let mut out = first.to_vec();
    for p in &points[1..] {
        if p.len() != out.len() {
            return Err(Error::Arity(out.len(), p.len()));
        }
        for (o, v) in out.iter_mut().zip(p.iter()) {
            *o = pick(*o, *v);
        }
    }
    Ok(out)
}

/// Area of the box `[floor, utopia]` not dominated by any point, computed by
/// a staircase sweep over the undominated points.
pub fn deficiency_with_floor(points: &[&[f64]], utopia: &[f64], floor: &[f64]) -> Result<f64> {
    if utopia.len() != 2 {
        return Err(Error::Arity(2, utopia.len()));
    }
    if floor.len() != 2 {
        return Err(Error::Arity(2, floor.len()));
    }
    if floor[0] > utopia[0] || floor[1] > utopia[1] {
        return Err(Error::invalid("floor exceeds utopia"));
    }
    for p in points {
        if p.len() != 2 {
            return Err(Error::Arity(2, p.len()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("front point"));
        }
        if p[0] > utopia[0] || p[1] > utopia[1] {
            return Err(Error::invalid(alloc::format!(
                "utopia ({}, {}) does not dominate point ({}, {})",
                utopia[0],
                utopia[1],
                p[0],
                p[1]
            )));
        }
    }
    let front = pareto_indices(points)?;
    let mut stairs: Vec<(f64, f64)> = front.into_iter().map(|i| (points[i][0], points[i][1])).collect();
    stairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut covered = 0.0;
    let mut y_prev = floor[1];
    for (x, y) in stairs {
        let w = x - floor[0];
        if w > 0.0 && y > y_prev {
            covered += w * (y - y_prev);
            y_prev = y;
        }
    }
    let total = (utopia[0] - floor[0]) * (utopia[1] - floor[1]);
    Ok((total - covered).max(0.0))
}

/// Deficiency with the floor at the componentwise minimum of `points`.
pub fn hypervolume_deficiency(points: &[FrontPoint], utopia: &RewardVector) -> Result<f64> {
    check_ids(points)?;
    if let Some(p) = points.first() {
        if p.rewards.ids != utopia.ids {
            return Err(Error::invalid("utopia reward ids differ from the front's"));
        }
    }
    let values: Vec<&[f64]> = points.iter().map(|p| p.rewards.values.as_slice()).collect();
    if values.is_empty() {
        return Err(Error::invalid("hypervolume of an empty front"));
    }
    if utopia.len() != 2 {
        return Err(Error::Arity(2, utopia.len()));
    }
    let floor = floor_of(&values)?;
    deficiency_with_floor(&values, &utopia.values, &floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFront {
    pub name: String,
    pub points: Vec<FrontPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontComparison {
    pub fronts: Vec<NamedFront>,
    pub utopia: Vec<f64>,
    pub floor: Vec<f64>,
    pub deficiency_per_front: Vec<f64>,
    /// `(D_0 - D_1) / D_1` for the first two fronts; `None` when `D_1 = 0`.
    pub relative_gap: Option<f64>,
}

/// Deficiencies of several fronts inside one shared box: the utopia defaults
/// to the componentwise maximum and the floor is the componentwise minimum,
/// both over the union of all fronts.
pub fn compare_fronts(fronts: Vec<NamedFront>, utopia: Option<Vec<f64>>) -> Result<FrontComparison> {
    if fronts.is_empty() {
        return Err(Error::invalid("nothing to compare"));
    }
    let ids = fronts
        .iter()
        .flat_map(|f| f.points.first())
        .map(|p| p.rewards.ids.clone())
        .next()
        .ok_or_else(|| Error::invalid("all fronts are empty"))?;
    for f in &fronts {
        if f.points.is_empty() {
            return Err(Error::invalid(alloc::format!("front `{}` is empty", f.name)));
        }
        if f.points.iter().any(|p| p.rewards.ids != ids) {
            return Err(Error::invalid(alloc::format!("front `{}` uses different reward ids", f.name)));
        }
    }
    let all: Vec<&[f64]> = fronts.iter().flat_map(|f| f.points.iter().map(|p| p.rewards.values.as_slice())).collect();
    let utopia = match utopia {
        Some(u) => u,
        None => utopia_of(&all)?,
    };
    let floor = floor_of(&all)?;
    let deficiency_per_front = fronts
        .iter()
        .map(|f| {
            let v: Vec<&[f64]> = f.points.iter().map(|p| p.rewards.values.as_slice()).collect();
            deficiency_with_floor(&v, &utopia, &floor)
        })
        .collect::<Result<Vec<f64>>>()?;
    let relative_gap = match deficiency_per_front.as_slice() {
        [a, b, ..] if *b != 0.0 => Some((a - b) / b),
        [a, b, ..] if a == b => Some(0.0),
        _ => None,
    };
    Ok(FrontComparison { fronts, utopia, floor, deficiency_per_front, relative_gap })
}
