//! Scoring estimated group effects against the truth.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::assign_groups;
use crate::simulation::ScenarioId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DoGates,
    CateQuantiles,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DoGates => "do_gates",
            Method::CateQuantiles => "cate_quantiles",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub scenario_id: ScenarioId,
    pub rep: usize,
    pub method: Method,
    pub gamma_hat: Vec<f64>,
    pub gamma_true: Vec<f64>,
}

/// Quantile-bins `tau` by its own empirical quantiles and returns the bin
/// means.
pub fn true_group_effects(tau: &[f64], k: usize) -> Result<Vec<f64>> {
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("true effects contain non-finite values".into()));
    }
    let groups = assign_groups(tau, k)?;
    Ok(groups.group_means(tau))
}

/// Per-group values and their mean over groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetric {
    pub per_group: Vec<f64>,
    pub overall: f64,
}

fn check_records(records: &[BenchmarkRecord]) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("no benchmark records".into()))?;
    let k = first.gamma_true.len();
    for r in records {
        if r.gamma_hat.len() != k || r.gamma_true.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "rep {} has {} estimates and {} true effects, expected {k}",
                r.rep,
                r.gamma_hat.len(),
                r.gamma_true.len()
            )));
        }
    }
    Ok(k)
}

fn summarize(per_group: Vec<f64>) -> GroupMetric {
    let overall = per_group.iter().sum::<f64>() / per_group.len() as f64;
    GroupMetric { per_group, overall }
}

/// Mean absolute error per group (averaged over reps) and its mean over groups.
pub fn mae(records: &[BenchmarkRecord]) -> Result<GroupMetric> {
    let k = check_records(records)?;
    let mut acc = vec![0.0; k];
    for r in records {
        for (a, (h, t)) in acc.iter_mut().zip(r.gamma_hat.iter().zip(&r.gamma_true)) {
            *a += (h - t).abs();
        }
    }
    Ok(summarize(acc.into_iter().map(|a| a / records.len() as f64).collect()))
}

/// Squared bias `(mean_j gamma_hat - gamma)^2` per group. The truth is
/// averaged over reps as well, which is exact when it is fixed.
pub fn bias2(records: &[BenchmarkRecord]) -> Result<GroupMetric> {
    let k = check_records(records)?;
    let n = records.len() as f64;
    Ok(summarize(
        (0..k)
            .map(|g| {
                let diff: f64 = records.iter().map(|r| r.gamma_hat[g] - r.gamma_true[g]).sum::<f64>() / n;
                diff * diff
            })
            .collect(),
    ))
}

/// Mean squared error per group, the upper bound for [`bias2`].
pub fn mse(records: &[BenchmarkRecord]) -> Result<GroupMetric> {
    let k = check_records(records)?;
    let n = records.len() as f64;
    Ok(summarize(
        (0..k)
            .map(|g| records.iter().map(|r| (r.gamma_hat[g] - r.gamma_true[g]).powi(2)).sum::<f64>() / n)
            .collect(),
    ))
}

/// One summary row per scenario and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub scenario_id: ScenarioId,
    pub method: Method,
    pub reps: usize,
    pub mae: GroupMetric,
    pub bias2: GroupMetric,
}

/// Groups records by scenario and method (sorted) and scores each set.
pub fn summarize_records(records: &[BenchmarkRecord]) -> Result<Vec<MethodSummary>> {
    let mut keys: Vec<(ScenarioId, Method)> = records.iter().map(|r| (r.scenario_id, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(s, m)| {
            let set: Vec<BenchmarkRecord> = records
                .iter()
                .filter(|r| r.scenario_id == s && r.method == m)
                .cloned()
                .collect();
            Ok(MethodSummary {
                scenario_id: s,
                method: m,
                reps: set.len(),
                mae: mae(&set)?,
                bias2: bias2(&set)?,
            })
        })
        .collect()
}

/// Long-format table: `scenario,method,group,mae_k,bias2_k`.
pub fn write_group_table(summaries: &[MethodSummary], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "method", "group", "mae_k", "bias2_k"])?;
    for s in summaries {
        for (g, (m, b)) in s.mae.per_group.iter().zip(&s.bias2.per_group).enumerate() {
            w.write_record([
                s.scenario_id.to_string(),
                s.method.to_string(),
                (g + 1).to_string(),
                format!("{m:?}"),
                format!("{b:?}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
