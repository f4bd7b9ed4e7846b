//! Cross-fitted DO GATES estimation.
//!
//! One split does the following:
//!
//! 1. Halve the sample into an auxiliary part (training) and a main part.
//! 2. On the auxiliary half fit `g0` (controls), `g1` (treated), the
//!    propensity `e` and the unconditional mean `mu`.
//! 3. Trim rows whose estimated propensity falls outside `[lo, hi]`.
//! 4. Form doubly-robust pseudo-outcomes on the auxiliary rows, regress them
//!    on covariates (the CATE proxy) and predict the proxy on the main rows.
//! 5. Sort main rows into `K` quantile groups of the proxy and estimate the
//!    group effects with one of the projections below.
//!
//! Predictions on auxiliary rows come from out-of-bag trees, so no model is
//! evaluated on a row it was trained on. Group effects are aggregated over
//! splits by per-coordinate medians, and per-row proxy predictions by
//! per-row medians (the bagged CATE).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_split, validate_dataset, Dataset, Matrix, SplitPlan};
use crate::error::{Error, Result};
use crate::forest::{ForestModel, ForestParams, PropensityModel, DEFAULT_PROPENSITY_CLIP};
use crate::linreg::{wls, WlsFit};
use crate::rng::{derive_seed, tag};
use crate::stats;

pub const DEFAULT_TRIM_LO: f64 = 0.02;
pub const DEFAULT_TRIM_HI: f64 = 0.95;
/// Groups smaller than this trigger a warning.
pub const SMALL_GROUP_WARNING: usize = 10;
/// Groups smaller than this are an error.
pub const MIN_GROUP_SIZE: usize = 2;
pub const MAX_FAILED_SPLIT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatesMode {
    /// Horvitz-Thompson weighted projection with baseline controls.
    Rct,
    /// Orthogonalised projection on residualised outcome and treatment.
    Observational,
    /// Orthogonalised projection, grouped by the baseline outcome `Y0`.
    BaselineY0,
}

impl fmt::Display for GatesMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatesMode::Rct => "rct",
            GatesMode::Observational => "observational",
            GatesMode::BaselineY0 => "baseline_y0",
        })
    }
}

impl FromStr for GatesMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rct" => Ok(Self::Rct),
            "observational" => Ok(Self::Observational),
            "baseline_y0" => Ok(Self::BaselineY0),
            _ => Err(Error::InvalidInput(format!(
                "unknown mode `{s}` (expected rct, observational or baseline_y0)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    /// Number of random splits.
    pub b: usize,
    pub mode: GatesMode,
    pub forest: ForestParams,
    pub trim_lo: f64,
    pub trim_hi: f64,
    pub propensity_clip: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 5,
            b: 100,
            mode: GatesMode::Observational,
            forest: ForestParams::default(),
            trim_lo: DEFAULT_TRIM_LO,
            trim_hi: DEFAULT_TRIM_HI,
            propensity_clip: DEFAULT_PROPENSITY_CLIP,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.b == 0 {
            return Err(Error::InvalidInput("b must be at least 1".into()));
        }
        if !(0.0 <= self.trim_lo && self.trim_lo < self.trim_hi && self.trim_hi <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "trim bounds must satisfy 0 <= lo < hi <= 1, got ({}, {})",
                self.trim_lo, self.trim_hi
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Overlap trimming

#[derive(Debug, Clone, PartialEq)]
pub struct Trimmed {
    /// Positions (into the input vectors) that were kept.
    pub retained: Vec<usize>,
    pub dropped: usize,
}

/// Keeps exactly the rows with `lo <= e_hat <= hi`.
pub fn trim_overlap(d: &[u8], e_hat: &[f64], lo: f64, hi: f64) -> Result<Trimmed> {
    if d.len() != e_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} treatments but {} propensities",
            d.len(),
            e_hat.len()
        )));
    }
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidInput(format!("invalid trim bounds ({lo}, {hi})")));
    }
    let retained: Vec<usize> = (0..d.len()).filter(|&i| lo <= e_hat[i] && e_hat[i] <= hi).collect();
    let treated = retained.iter().filter(|&&i| d[i] == 1).count();
    if treated == 0 || treated == retained.len() {
        return Err(Error::OverlapViolation(format!(
            "after trimming to [{lo}, {hi}] {} rows remain with {treated} treated",
            retained.len()
        )));
    }
    Ok(Trimmed {
        dropped: d.len() - retained.len(),
        retained,
    })
}

// ---------------------------------------------------------------------------
// Nuisances

/// Nuisance values for a set of rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NuisanceValues {
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub e: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Record of which rows trained and which rows evaluated each model.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CrossFitAudit {
    /// `(role, training rows)` in dataset indexing.
    pub trained_on: Vec<(String, Vec<usize>)>,
    /// `(role, evaluated rows)` in dataset indexing; out-of-bag evaluations
    /// of training rows are listed under `oob_evaluated`.
    pub evaluated_on: Vec<(String, Vec<usize>)>,
    pub oob_evaluated: Vec<(String, Vec<usize>)>,
    /// Training rows that fell in-bag for every tree and had to be
    /// predicted by the full ensemble.
    pub in_sample_fallbacks: usize,
}

impl CrossFitAudit {
    /// True when no model's plain (non out-of-bag) evaluation touches one of
    /// its own training rows.
    pub fn is_clean(&self) -> bool {
        self.in_sample_fallbacks == 0
            && self.trained_on.iter().all(|(role, train)| {
                self.evaluated_on
                    .iter()
                    .filter(|(r, _)| r == role)
                    .all(|(_, eval)| eval.iter().all(|i| train.binary_search(i).is_err()))
            })
    }

    fn record(&mut self, role: &str, train: &[usize], oob: &[usize], eval: &[usize]) {
        let mut t = train.to_vec();
        t.sort_unstable();
        self.trained_on.push((role.into(), t));
        self.oob_evaluated.push((role.into(), oob.to_vec()));
        self.evaluated_on.push((role.into(), eval.to_vec()));
    }
}

#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub g0: ForestModel,
    pub g1: ForestModel,
    pub e_model: PropensityModel,
    pub mu_model: ForestModel,
    pub split: SplitPlan,
    aux_values: NuisanceValues,
    audit: CrossFitAudit,
}

fn role_params(base: &ForestParams, split_seed: u64, role: u64) -> ForestParams {
    base.with_seed(derive_seed(base.seed, &[split_seed, role]))
}

/// Merges out-of-bag values (for training rows) with ordinary predictions
/// (for the rest). Returns the merged vector and the number of rows that
/// needed an in-sample fallback.
fn merge_oob(model: &ForestModel, x: &Matrix, oob: &[Option<f64>], train_pos: &[usize]) -> Result<(Vec<f64>, usize)> {
    let mut out = model.predict(x)?;
    let mut fallbacks = 0;
    for (o, &pos) in oob.iter().zip(train_pos) {
        match o {
            Some(v) => out[pos] = *v,
            None => fallbacks += 1,
        }
    }
    Ok((out, fallbacks))
}

/// Fits `g0`, `g1`, `e` and `mu` on the auxiliary half of `split`.
pub fn fit_nuisances(data: &Dataset, split: &SplitPlan, params: &ForestParams, clip: f64) -> Result<NuisanceFit> {
    let aux = &split.aux_idx;
    let aux_data = data.subset(aux);
    let control_pos: Vec<usize> = (0..aux.len()).filter(|&i| aux_data.d()[i] == 0).collect();
    let treated_pos: Vec<usize> = (0..aux.len()).filter(|&i| aux_data.d()[i] == 1).collect();
    if control_pos.is_empty() || treated_pos.is_empty() {
        return Err(Error::SingleClass(format!(
            "auxiliary sample has {} controls and {} treated",
            control_pos.len(),
            treated_pos.len()
        )));
    }
    let x_aux = aux_data.x();
    let pick = |pos: &[usize]| -> (Matrix, Vec<f64>) {
        (x_aux.select_rows(pos), pos.iter().map(|&i| aux_data.y()[i]).collect())
    };

    let (x0, y0) = pick(&control_pos);
    let (g0, oob0) = ForestModel::fit_with_oob(&x0, &y0, &role_params(params, split.seed, tag::G0))?;
    let (x1, y1) = pick(&treated_pos);
    let (g1, oob1) = ForestModel::fit_with_oob(&x1, &y1, &role_params(params, split.seed, tag::G1))?;
    let (e_model, oob_e) = PropensityModel::fit_with_oob(
        x_aux,
        aux_data.d(),
        &role_params(params, split.seed, tag::PROPENSITY),
        clip,
    )?;
    let (mu_model, oob_mu) = ForestModel::fit_with_oob(x_aux, aux_data.y(), &role_params(params, split.seed, tag::MU))?;

    let all_pos: Vec<usize> = (0..aux.len()).collect();
    let (g0v, f0) = merge_oob(&g0, x_aux, &oob0, &control_pos)?;
    let (g1v, f1) = merge_oob(&g1, x_aux, &oob1, &treated_pos)?;
    let mut e_v = e_model.predict(x_aux)?;
    let mut fe = 0;
    for (i, o) in oob_e.iter().enumerate() {
        match o {
            Some(v) => e_v[i] = *v,
            None => fe += 1,
        }
    }
    let (mu_v, fm) = merge_oob(&mu_model, x_aux, &oob_mu, &all_pos)?;

    let to_rows = |pos: &[usize]| -> Vec<usize> { pos.iter().map(|&i| aux[i]).collect() };
    let mut audit = CrossFitAudit {
        in_sample_fallbacks: f0 + f1 + fe + fm,
        ..Default::default()
    };
    let controls = to_rows(&control_pos);
    let treated = to_rows(&treated_pos);
    let mut eval_g0 = treated.clone();
    eval_g0.extend(&split.main_idx);
    let mut eval_g1 = controls.clone();
    eval_g1.extend(&split.main_idx);
    audit.record("g0", &controls, &controls, &eval_g0);
    audit.record("g1", &treated, &treated, &eval_g1);
    audit.record("e", aux, aux, &split.main_idx);
    audit.record("mu", aux, aux, &split.main_idx);

    Ok(NuisanceFit {
        g0,
        g1,
        e_model,
        mu_model,
        split: split.clone(),
        aux_values: NuisanceValues {
            g0: g0v,
            g1: g1v,
            e: e_v,
            mu: mu_v,
        },
        audit,
    })
}

impl NuisanceFit {
    /// Cross-fitted values on the auxiliary rows, in `split.aux_idx` order.
    pub fn aux_values(&self) -> &NuisanceValues {
        &self.aux_values
    }

    pub fn audit(&self) -> &CrossFitAudit {
        &self.audit
    }

    /// Predictions for rows the models were not trained on.
    pub fn predict(&self, x: &Matrix) -> Result<NuisanceValues> {
        Ok(NuisanceValues {
            g0: self.g0.predict(x)?,
            g1: self.g1.predict(x)?,
            e: self.e_model.predict(x)?,
            mu: self.mu_model.predict(x)?,
        })
    }
}

// ---------------------------------------------------------------------------
// Scores

fn check_open_unit(e_hat: &[f64]) -> Result<()> {
    match e_hat.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
        Some(row) => Err(Error::DegeneratePropensity {
            row,
            value: e_hat[row],
        }),
        None => Ok(()),
    }
}

fn same_len(n: usize, others: &[(&str, usize)]) -> Result<()> {
    for (name, len) in others {
        if *len != n {
            return Err(Error::DimensionMismatch(format!("{name} has length {len}, expected {n}")));
        }
    }
    Ok(())
}

/// Doubly-robust pseudo-outcome
/// `g1 - g0 + d (y - g1) / e - (1 - d)(y - g0) / (1 - e)`.
pub fn dr_pseudo_outcomes(y: &[f64], d: &[u8], g0: &[f64], g1: &[f64], e_hat: &[f64]) -> Result<Vec<f64>> {
    same_len(
        y.len(),
        &[("d", d.len()), ("g0", g0.len()), ("g1", g1.len()), ("e_hat", e_hat.len())],
    )?;
    check_open_unit(e_hat)?;
    Ok((0..y.len())
        .map(|i| {
            let di = f64::from(d[i]);
            g1[i] - g0[i] + di * (y[i] - g1[i]) / e_hat[i] - (1.0 - di) * (y[i] - g0[i]) / (1.0 - e_hat[i])
        })
        .collect())
}

/// Doubly-robust baseline score `g0 + (1 - d)(y - g0) / (1 - e)`.
pub fn baseline_pseudo_outcomes(y: &[f64], d: &[u8], g0: &[f64], e_hat: &[f64]) -> Result<Vec<f64>> {
    same_len(y.len(), &[("d", d.len()), ("g0", g0.len()), ("e_hat", e_hat.len())])?;
    check_open_unit(e_hat)?;
    Ok((0..y.len())
        .map(|i| g0[i] + (1.0 - f64::from(d[i])) * (y[i] - g0[i]) / (1.0 - e_hat[i]))
        .collect())
}

/// Horvitz-Thompson transform `(d - e) / (e (1 - e))`.
pub fn horvitz_thompson(d: &[u8], e_hat: &[f64]) -> Result<Vec<f64>> {
    same_len(d.len(), &[("e_hat", e_hat.len())])?;
    check_open_unit(e_hat)?;
    Ok(d.iter()
        .zip(e_hat)
        .map(|(&di, &e)| (f64::from(di) - e) / (e * (1.0 - e)))
        .collect())
}

/// Fits the CATE proxy on auxiliary covariates and pseudo-outcomes.
pub fn fit_cate_proxy(x_aux: &Matrix, s_hat_aux: &[f64], params: &ForestParams) -> Result<ForestModel> {
    ForestModel::fit(x_aux, s_hat_aux, params)
}

/// Raw pseudo-outcomes on the auxiliary rows and proxy predictions on the
/// main rows.
#[derive(Debug, Clone)]
pub struct DrScores {
    pub s_hat: Vec<f64>,
    pub s_tilde: Vec<f64>,
    pub proxy_model: ForestModel,
}

// ---------------------------------------------------------------------------
// Grouping

/// Quantile groups of a score vector. Labels are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub k: usize,
    /// `cuts[j]` is the smallest score in group `j + 1`.
    pub cuts: Vec<f64>,
    pub labels: Vec<usize>,
}

impl GroupAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Means of `values` within each group.
    pub fn group_means(&self, values: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.k];
        let mut cnt = vec![0usize; self.k];
        for (&l, v) in self.labels.iter().zip(values) {
            sum[l] += v;
            cnt[l] += 1;
        }
        sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect()
    }
}

/// Sorts scores into `k` empirical-quantile groups by stable rank: the
/// observation with rank `r` (0-based, ties in input order) goes to group
/// `floor(r * k / n)`, so group sizes differ by at most one.
pub fn assign_groups(scores: &[f64], k: usize) -> Result<GroupAssignment> {
    let n = scores.len();
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InvalidInput(format!("{n} scores for {k} groups")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores contain non-finite values".into()));
    }
    if k > 1 && scores.iter().all(|&s| s == scores[0]) {
        return Err(Error::NoHeterogeneity);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * k / n;
    }
    let cuts = (1..k).map(|j| scores[order[(j * n).div_ceil(k)]]).collect();
    Ok(GroupAssignment { k, cuts, labels })
}

// ---------------------------------------------------------------------------
// Projections

/// Per-group estimates from one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimates {
    pub gamma: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GroupEstimates {
    fn from_fit(fit: &WlsFit, range: std::ops::Range<usize>, warnings: Vec<String>) -> Self {
        Self {
            gamma: fit.coef[range.clone()].to_vec(),
            se: fit.se[range.clone()].to_vec(),
            p_values: fit.p_values[range.clone()].to_vec(),
            ci_low: fit.ci_low[range.clone()].to_vec(),
            ci_high: fit.ci_high[range].to_vec(),
            warnings,
        }
    }
}

fn check_group_sizes(groups: &GroupAssignment) -> Result<Vec<String>> {
    let sizes = groups.sizes();
    let empty: Vec<usize> = (0..groups.k).filter(|&g| sizes[g] < MIN_GROUP_SIZE).map(|g| g + 1).collect();
    if !empty.is_empty() {
        return Err(Error::EmptyGroups(empty));
    }
    Ok((0..groups.k)
        .filter(|&g| sizes[g] < SMALL_GROUP_WARNING)
        .map(|g| format!("group {} has only {} main-sample observations", g + 1, sizes[g]))
        .collect())
}

/// Horvitz-Thompson GATES: OLS of `Y H` on `[H, B(X) H]` and the `K` group
/// indicators. Returns the indicator coefficients.
pub fn gates_rct(
    y: &[f64],
    d: &[u8],
    e_hat: &[f64],
    baseline: &[f64],
    groups: &GroupAssignment,
    alpha: f64,
) -> Result<GroupEstimates> {
    let n = y.len();
    same_len(
        n,
        &[("d", d.len()), ("e_hat", e_hat.len()), ("baseline", baseline.len()), ("groups", groups.labels.len())],
    )?;
    let warnings = check_group_sizes(groups)?;
    let h = horvitz_thompson(d, e_hat)?;
    let k = groups.k;
    let design = Matrix::from_fn(n, 2 + k, |i, j| match j {
        0 => h[i],
        1 => baseline[i] * h[i],
        _ => f64::from(u8::from(groups.labels[i] == j - 2)),
    });
    let response: Vec<f64> = y.iter().zip(&h).map(|(a, b)| a * b).collect();
    let fit = wls(&design, &response, &vec![1.0; n], alpha)?;
    Ok(GroupEstimates::from_fit(&fit, 2..2 + k, warnings))
}

/// Orthogonal GATES: OLS of `U = y - mu` on `V * 1(group = k)` with
/// `V = d - e`, no intercept.
pub fn gates_orthogonal(
    y: &[f64],
    d: &[u8],
    mu_hat: &[f64],
    e_hat: &[f64],
    groups: &GroupAssignment,
    alpha: f64,
) -> Result<GroupEstimates> {
    let n = y.len();
    same_len(
        n,
        &[("d", d.len()), ("mu_hat", mu_hat.len()), ("e_hat", e_hat.len()), ("groups", groups.labels.len())],
    )?;
    let warnings = check_group_sizes(groups)?;
    let u: Vec<f64> = y.iter().zip(mu_hat).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = d.iter().zip(e_hat).map(|(&a, b)| f64::from(a) - b).collect();
    let k = groups.k;
    let mut vv = vec![0.0; k];
    for (i, &g) in groups.labels.iter().enumerate() {
        vv[g] += v[i] * v[i];
    }
    if let Some(g) = vv.iter().position(|&s| s == 0.0) {
        return Err(Error::NoTreatmentVariation(g + 1));
    }
    let design = Matrix::from_fn(n, k, |i, j| if groups.labels[i] == j { v[i] } else { 0.0 });
    let fit = wls(&design, &u, &vec![1.0; n], alpha)?;
    Ok(GroupEstimates::from_fit(&fit, 0..k, warnings))
}

/// Closed form of [`gates_orthogonal`]: `sum V U / sum V^2` within each group.
pub fn gates_orthogonal_closed_form(u: &[f64], v: &[f64], labels: &[usize], k: usize) -> Vec<f64> {
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    for ((&ui, &vi), &g) in u.iter().zip(v).zip(labels) {
        num[g] += vi * ui;
        den[g] += vi * vi;
    }
    num.iter().zip(&den).map(|(a, b)| a / b).collect()
}

/// Orthogonal GATES with groups formed from baseline-outcome scores.
pub fn gates_baseline_y0(
    y: &[f64],
    d: &[u8],
    y0_scores: &[f64],
    mu_hat: &[f64],
    e_hat: &[f64],
    k: usize,
    alpha: f64,
) -> Result<GroupEstimates> {
    let groups = assign_groups(y0_scores, k)?;
    gates_orthogonal(y, d, mu_hat, e_hat, &groups, alpha)
}

// ---------------------------------------------------------------------------
// Full loop

/// Outcome of one successful split.
#[derive(Debug, Clone)]
pub struct SplitRecord {
    pub index: usize,
    pub seed: u64,
    pub estimates: GroupEstimates,
    /// Main-sample rows and their proxy predictions (all main rows,
    /// including trimmed ones).
    pub main_idx: Vec<usize>,
    pub s_tilde: Vec<f64>,
    pub trimmed_aux: usize,
    pub trimmed_main: usize,
    pub audit: CrossFitAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatesResult {
    pub mode: GatesMode,
    pub k: usize,
    pub alpha: f64,
    /// Indices of the splits that contributed, in order.
    pub split_indices: Vec<usize>,
    pub gamma_per_split: Vec<Vec<f64>>,
    pub se_per_split: Vec<Vec<f64>>,
    pub p_per_split: Vec<Vec<f64>>,
    pub ci_low_per_split: Vec<Vec<f64>>,
    pub ci_high_per_split: Vec<Vec<f64>>,
    pub gamma_median: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub ci_median_low: Vec<f64>,
    pub ci_median_high: Vec<f64>,
    pub failures: Vec<SplitFailure>,
    pub warnings: Vec<String>,
}

fn column_medians(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            stats::median(&col).unwrap_or(f64::NAN)
        })
        .collect()
}

impl GatesResult {
    /// Aggregates per-split estimates: per-coordinate medians of `gamma` and
    /// of the CI endpoints, and `min(1, 2 * median p)`.
    pub fn aggregate(mode: GatesMode, k: usize, alpha: f64, splits: &[(usize, &GroupEstimates)]) -> Self {
        let gamma: Vec<Vec<f64>> = splits.iter().map(|(_, e)| e.gamma.clone()).collect();
        let se = splits.iter().map(|(_, e)| e.se.clone()).collect();
        let p: Vec<Vec<f64>> = splits.iter().map(|(_, e)| e.p_values.clone()).collect();
        let lo: Vec<Vec<f64>> = splits.iter().map(|(_, e)| e.ci_low.clone()).collect();
        let hi: Vec<Vec<f64>> = splits.iter().map(|(_, e)| e.ci_high.clone()).collect();
        let p_adjusted = column_medians(&p, k).iter().map(|m| (2.0 * m).min(1.0)).collect();
        let mut warnings: Vec<String> = splits
            .iter()
            .flat_map(|(i, e)| e.warnings.iter().map(move |w| format!("split {i}: {w}")))
            .collect();
        warnings.dedup();
        Self {
            mode,
            k,
            alpha,
            split_indices: splits.iter().map(|(i, _)| *i).collect(),
            gamma_median: column_medians(&gamma, k),
            ci_median_low: column_medians(&lo, k),
            ci_median_high: column_medians(&hi, k),
            p_adjusted,
            gamma_per_split: gamma,
            se_per_split: se,
            p_per_split: p,
            ci_low_per_split: lo,
            ci_high_per_split: hi,
            failures: Vec::new(),
            warnings,
        }
    }

    /// Median of the first `b` contributing splits' estimates.
    pub fn gamma_median_prefix(&self, b: usize) -> Vec<f64> {
        column_medians(&self.gamma_per_split[..b.min(self.gamma_per_split.len())], self.k)
    }
}

/// Out-of-sample proxy predictions collected across splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateEnsemble {
    /// Per observation, the proxy predictions from every split in which it
    /// was in the main half, in split order.
    pub estimates: Vec<Vec<f64>>,
    /// Per-observation medians; `None` where no estimate exists.
    pub s_bar: Vec<Option<f64>>,
}

impl CateEnsemble {
    pub fn from_splits<'a>(n: usize, splits: impl IntoIterator<Item = (&'a [usize], &'a [f64])>) -> Self {
        let mut estimates = vec![Vec::new(); n];
        for (rows, vals) in splits {
            for (&i, &v) in rows.iter().zip(vals) {
                estimates[i].push(v);
            }
        }
        let s_bar = estimates.iter().map(|e| stats::median(e)).collect();
        Self { estimates, s_bar }
    }

    pub fn counts(&self) -> Vec<usize> {
        self.estimates.iter().map(Vec::len).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.s_bar.iter().all(Option::is_some)
    }
}

/// Group means of the bagged CATE `s_bar` within its own quantile groups.
pub fn run_benchmark_cate_quantiles(cate: &CateEnsemble, k: usize) -> Result<Vec<f64>> {
    let s_bar: Vec<f64> = cate
        .s_bar
        .iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::InvalidInput(format!("observation {} has no CATE estimate", i + 1))))
        .collect::<Result<_>>()?;
    let groups = assign_groups(&s_bar, k)?;
    Ok(groups.group_means(&s_bar))
}

/// Like [`run_benchmark_cate_quantiles`], but a constant `s_bar` reports the
/// constant for every group instead of failing.
pub fn benchmark_or_constant(cate: &CateEnsemble, k: usize) -> Result<Vec<f64>> {
    match run_benchmark_cate_quantiles(cate, k) {
        Err(Error::NoHeterogeneity) => {
            let c = run_benchmark_cate_quantiles(cate, 1)?[0];
            Ok(vec![c; k])
        }
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct DoGatesOutput {
    pub gates: GatesResult,
    pub cate: CateEnsemble,
    pub splits: Vec<SplitRecord>,
}

impl DoGatesOutput {
    /// Bagged CATE built from the first `b` successful splits.
    pub fn cate_prefix(&self, b: usize) -> CateEnsemble {
        CateEnsemble::from_splits(
            self.cate.estimates.len(),
            self.splits[..b.min(self.splits.len())]
                .iter()
                .map(|s| (s.main_idx.as_slice(), s.s_tilde.as_slice())),
        )
    }
}

fn select<T: Copy>(v: &[T], pos: &[usize]) -> Vec<T> {
    pos.iter().map(|&i| v[i]).collect()
}

/// Runs one split end to end.
pub fn run_split(data: &Dataset, config: &RunConfig, index: usize) -> Result<SplitRecord> {
    let seed = derive_seed(config.seed, &[tag::SPLIT, index as u64]);
    let split = make_split(data.len(), seed)?;
    let nuis = fit_nuisances(data, &split, &config.forest, config.propensity_clip)?;

    let aux = data.subset(&split.aux_idx);
    let main = data.subset(&split.main_idx);
    let av = nuis.aux_values();
    let mv = nuis.predict(main.x())?;

    let aux_keep = trim_overlap(aux.d(), &av.e, config.trim_lo, config.trim_hi)?;
    let main_keep = trim_overlap(main.d(), &mv.e, config.trim_lo, config.trim_hi)?;

    let ka = &aux_keep.retained;
    let x_aux = aux.x().select_rows(ka);
    let (y_a, d_a) = (select(aux.y(), ka), select(aux.d(), ka));
    let s_hat = dr_pseudo_outcomes(&y_a, &d_a, &select(&av.g0, ka), &select(&av.g1, ka), &select(&av.e, ka))?;
    let proxy = fit_cate_proxy(&x_aux, &s_hat, &role_params(&config.forest, seed, tag::PROXY))?;
    let s_tilde = proxy.predict(main.x())?;

    let km = &main_keep.retained;
    let (y_m, d_m) = (select(main.y(), km), select(main.d(), km));
    let e_m = select(&mv.e, km);
    let estimates = match config.mode {
        GatesMode::Rct => {
            let groups = assign_groups(&select(&s_tilde, km), config.k)?;
            gates_rct(&y_m, &d_m, &e_m, &select(&mv.g0, km), &groups, config.alpha)?
        }
        GatesMode::Observational => {
            let groups = assign_groups(&select(&s_tilde, km), config.k)?;
            gates_orthogonal(&y_m, &d_m, &select(&mv.mu, km), &e_m, &groups, config.alpha)?
        }
        GatesMode::BaselineY0 => {
            let y0_hat = baseline_pseudo_outcomes(&y_a, &d_a, &select(&av.g0, ka), &select(&av.e, ka))?;
            let y0_proxy = ForestModel::fit(&x_aux, &y0_hat, &role_params(&config.forest, seed, tag::BASELINE_PROXY))?;
            let y0_main = y0_proxy.predict(&main.x().select_rows(km))?;
            gates_baseline_y0(&y_m, &d_m, &y0_main, &select(&mv.mu, km), &e_m, config.k, config.alpha)?
        }
    };

    let mut audit = nuis.audit().clone();
    let proxy_train: Vec<usize> = ka.iter().map(|&i| split.aux_idx[i]).collect();
    audit.record("proxy", &proxy_train, &[], &split.main_idx);
    Ok(SplitRecord {
        index,
        seed,
        estimates,
        main_idx: split.main_idx.clone(),
        s_tilde,
        trimmed_aux: aux_keep.dropped,
        trimmed_main: main_keep.dropped,
        audit,
    })
}

/// Repeats [`run_split`] over `config.b` splits and aggregates. Failed splits
/// are recorded and skipped; more than 20% failures is an error.
pub fn run_dogates(data: &Dataset, config: &RunConfig) -> Result<DoGatesOutput> {
    config.check()?;
    let violations = validate_dataset(data, config.k);
    if !violations.is_empty() {
        return Err(Error::Validation(violations.into_iter().map(|v| v.0).collect()));
    }
    let outcomes: Vec<Result<SplitRecord>> = (0..config.b)
        .into_par_iter()
        .map(|b| run_split(data, config, b))
        .collect();

    let mut splits = Vec::new();
    let mut failures = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => splits.push(r),
            Err(e) => failures.push(SplitFailure {
                index: b,
                error: e.to_string(),
            }),
        }
    }
    let limit = (MAX_FAILED_SPLIT_FRACTION * config.b as f64).floor() as usize;
    if failures.len() > limit || splits.is_empty() {
        return Err(Error::TooManyFailedSplits {
            failed: failures.len(),
            total: config.b,
            limit,
            first: failures.first().map(|f| f.error.clone()).unwrap_or_default(),
        });
    }

    let per_split: Vec<(usize, &GroupEstimates)> = splits.iter().map(|s| (s.index, &s.estimates)).collect();
    let mut gates = GatesResult::aggregate(config.mode, config.k, config.alpha, &per_split);
    gates.failures = failures;
    let cate = CateEnsemble::from_splits(
        data.len(),
        splits.iter().map(|s| (s.main_idx.as_slice(), s.s_tilde.as_slice())),
    );
    Ok(DoGatesOutput { gates, cate, splits })
}
