//! Data-generating process for the Monte Carlo study.
//!
//! Covariates are multivariate normal with a random correlation matrix drawn
//! by the onion method. The covariate law (correlation matrix and the
//! covariate draws themselves) depends only on `covariate_seed`; the outcome
//! noise, effect noise and treatment draws depend on `rep_seed`.
//!
//! Covariate indices below are 1-based (`X2` is column 1).

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix, SimulatedDataset};
use crate::error::{Error, Result};
use crate::rng::{self, tag, Rng};
use crate::stats;

/// Standard deviation of the noise term in the linear effect shape.
pub const EFFECT_NOISE_SD: f64 = 0.5;
pub const TAU_MIN: f64 = 0.1;
pub const TAU_MAX: f64 = 1.0;
pub const DEFAULT_P: usize = 20;
pub const DEFAULT_COVARIATE_SEED: u64 = 20_200;
const MAX_JITTER_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 12] = [
        Self::A,
        Self::B,
        Self::C,
        Self::D,
        Self::E,
        Self::F,
        Self::G,
        Self::H,
        Self::I,
        Self::J,
        Self::K,
        Self::L,
    ];

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    /// Treatment assignment, effect shape and misspecification flag.
    pub fn design(self) -> (Assignment, EffectShape, bool) {
        let idx = self as usize;
        let shape = if idx < 6 {
            EffectShape::Linear
        } else {
            EffectShape::Nonlinear
        };
        let (assignment, misspecified) = match idx % 6 {
            0 => (Assignment::Random { c: 0.5 }, false),
            1 => (Assignment::Random { c: 0.2 }, false),
            2 => (Assignment::Linear, false),
            3 => (Assignment::Interaction, false),
            4 => (Assignment::Nonlinear, false),
            _ => (Assignment::Linear, true),
        };
        (assignment, shape, misspecified)
    }

    /// Parses a list such as `A,C,F` or a range such as `A..L`.
    pub fn parse_list(s: &str) -> Result<Vec<ScenarioId>> {
        if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (a.trim().parse::<ScenarioId>()?, b.trim().parse::<ScenarioId>()?);
            if a > b {
                return Err(Error::InvalidInput(format!("empty scenario range {s}")));
            }
            return Ok(Self::ALL[a as usize..=b as usize].to_vec());
        }
        s.split(',').map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let b = up.as_bytes();
        if b.len() == 1 && (b'A'..=b'L').contains(&b[0]) {
            Ok(Self::ALL[(b[0] - b'A') as usize])
        } else {
            Err(Error::InvalidInput(format!("unknown scenario `{s}` (expected A..L)")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Assignment {
    /// Constant propensity `c`.
    Random { c: f64 },
    Linear,
    Interaction,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectShape {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_id: ScenarioId,
    pub n: usize,
    pub p: usize,
    pub assignment: Assignment,
    pub effect_shape: EffectShape,
    /// Drop `X2` from the observed covariates.
    pub misspecified: bool,
    pub covariate_seed: u64,
    pub rep_seed: u64,
}

impl ScenarioConfig {
    pub fn new(id: ScenarioId, n: usize, rep_seed: u64) -> Self {
        let (assignment, effect_shape, misspecified) = id.design();
        Self {
            scenario_id: id,
            n,
            p: DEFAULT_P,
            assignment,
            effect_shape,
            misspecified,
            covariate_seed: DEFAULT_COVARIATE_SEED,
            rep_seed,
        }
    }

    pub fn with_covariate_seed(mut self, seed: u64) -> Self {
        self.covariate_seed = seed;
        self
    }
}

/// Covariate weights `b_l = 1 / l`, `l = 1..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn new(p: usize) -> Self {
        Self((1..=p).map(|l| 1.0 / l as f64).collect())
    }

    pub fn dot(&self, row: &[f64]) -> f64 {
        self.0.iter().zip(row).map(|(b, x)| b * x).sum()
    }
}

/// `X_j` with 1-based `j`.
fn xj(row: &[f64], j: usize) -> f64 {
    row[j - 1]
}

fn lower_cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        let piv = d.sqrt();
        l[j][j] = piv;
        for i in j + 1..n {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / piv;
        }
    }
    Some(l)
}

/// Random correlation matrix, uniform over the space of `p x p` correlation
/// matrices (onion method with unit concentration).
pub fn random_correlation(p: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if p < 2 {
        return Err(Error::InvalidInput(format!("correlation matrix needs p >= 2, got {p}")));
    }
    let beta_dist = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::Numerical(e.to_string()));
    let mut beta = 1.0 + (p as f64 - 2.0) / 2.0;
    let r = 2.0 * beta_dist(beta, beta)?.sample(rng) - 1.0;
    let mut c = vec![vec![1.0, r], vec![r, 1.0]];
    for k in 2..p {
        beta -= 0.5;
        let y = beta_dist(k as f64 / 2.0, beta)?.sample(rng);
        let mut u: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = y.sqrt() / norm;
        u.iter_mut().for_each(|v| *v *= scale);
        let l = lower_cholesky(&c)
            .ok_or_else(|| Error::Numerical("onion step lost positive definiteness".into()))?;
        let z: Vec<f64> = (0..k).map(|i| (0..=i).map(|j| l[i][j] * u[j]).sum()).collect();
        for (i, row) in c.iter_mut().enumerate() {
            row.push(z[i]);
        }
        let mut last = z;
        last.push(1.0);
        c.push(last);
    }
    Ok(c)
}

/// Correlation matrix of the covariate law for `seed`.
pub fn correlation_matrix(p: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    random_correlation(p, &mut rng::rng_from(seed, &[tag::CORRELATION]))
}

/// Draws `n` rows from `N(0, C)` with `C = correlation_matrix(p, seed)`.
/// Row `i` depends only on `(seed, i)`, so samples of different sizes share
/// their leading rows.
pub fn gen_correlated_covariates(n: usize, p: usize, seed: u64) -> Result<Matrix> {
    let mut c = correlation_matrix(p, seed)?;
    let mut chol = lower_cholesky(&c);
    let mut attempts = 0;
    while chol.is_none() {
        attempts += 1;
        if attempts > MAX_JITTER_ATTEMPTS {
            return Err(Error::Numerical(
                "correlation matrix is not positive definite after jitter".into(),
            ));
        }
        for (i, row) in c.iter_mut().enumerate() {
            row[i] += 1e-8;
        }
        chol = lower_cholesky(&c);
    }
    let l = chol.expect("checked above");
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        let mut rng = rng::rng_from(seed, &[tag::COVARIATES, i as u64]);
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        for a in 0..p {
            let v: f64 = (0..=a).map(|b| l[a][b] * z[b]).sum();
            x.set(i, a, v);
        }
    }
    Ok(x)
}

fn require_multiple_of_20(p: usize) -> Result<()> {
    if p == 0 || p % 20 != 0 {
        return Err(Error::InvalidInput(format!(
            "p must be a multiple of 20 or indices supplied explicitly (p = {p})"
        )));
    }
    Ok(())
}

/// Baseline outcome `X_{p/2} + X_{p/10} + X_{p/4} * X_{p/10}`.
pub fn mu0(x: &Matrix) -> Result<Vec<f64>> {
    let p = x.ncols();
    require_multiple_of_20(p)?;
    Ok(x.rows_iter()
        .map(|r| xj(r, p / 2) + xj(r, p / 10) + xj(r, p / 4) * xj(r, p / 10))
        .collect())
}

/// Unstandardised assignment index `a(X)`.
pub fn assignment_index(x: &Matrix, assignment: Assignment) -> Result<Vec<f64>> {
    let p = x.ncols();
    require_multiple_of_20(p)?;
    let b = WeightVector::new(p);
    let a = x.rows_iter().map(|r| match assignment {
        Assignment::Random { .. } => 0.0,
        Assignment::Linear => xj(r, 2) + xj(r, p / 2) + xj(r, p / 4) - xj(r, 8),
        Assignment::Interaction => b.dot(r) + xj(r, p / 2) + xj(r, 2) + xj(r, p / 4) * xj(r, 8),
        Assignment::Nonlinear => b.dot(r) + xj(r, p / 2).sin() + xj(r, 2) + (xj(r, p / 4) * xj(r, 8)).cos(),
    });
    Ok(a.collect())
}

/// True propensities and Bernoulli treatment draws.
pub fn propensity_dgp(x: &Matrix, assignment: Assignment, rng: &mut Rng) -> Result<(Vec<f64>, Vec<u8>)> {
    let e0 = match assignment {
        Assignment::Random { c } => {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::InvalidInput(format!("random assignment share {c} outside (0, 1)")));
            }
            vec![c; x.nrows()]
        }
        _ => {
            let a = assignment_index(x, assignment)?;
            let (m, sd) = (stats::mean(&a), stats::std_dev(&a));
            if !(sd > 0.0) {
                return Err(Error::Numerical("assignment index has zero variance".into()));
            }
            a.iter().map(|v| stats::normal_cdf((v - m) / sd)).collect()
        }
    };
    let d = e0.iter().map(|&e| u8::from(rng.random::<f64>() < e)).collect();
    Ok((e0, d))
}

/// Unstandardised effect `tau_u(X)`; the linear shape adds `W ~ N(0, 0.5^2)`.
pub fn raw_treatment_effect(x: &Matrix, shape: EffectShape, rng: &mut Rng) -> Result<Vec<f64>> {
    let p = x.ncols();
    require_multiple_of_20(p)?;
    match shape {
        EffectShape::Linear => {
            let noise = Normal::new(0.0, EFFECT_NOISE_SD).map_err(|e| Error::Numerical(e.to_string()))?;
            Ok(x.rows_iter()
                .map(|r| xj(r, 1) + f64::from(u8::from(xj(r, 2) > 0.0)) + noise.sample(rng))
                .collect())
        }
        EffectShape::Nonlinear => {
            let b = WeightVector::new(p);
            Ok(x.rows_iter().map(|r| b.dot(r).sin() + xj(r, 5 + p / 2)).collect())
        }
    }
}

/// Min-max rescaling of the realised sample onto `[0.1, 1]`.
pub fn standardize_effect(tau_u: &[f64]) -> Result<Vec<f64>> {
    let lo = tau_u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tau_u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Numerical("treatment effect is degenerate (max = min)".into()));
    }
    Ok(tau_u
        .iter()
        .map(|v| (v - lo) / (hi - lo) * (TAU_MAX - TAU_MIN) + TAU_MIN)
        .collect())
}

pub fn treatment_effect_dgp(x: &Matrix, shape: EffectShape, rng: &mut Rng) -> Result<Vec<f64>> {
    standardize_effect(&raw_treatment_effect(x, shape, rng)?)
}

/// Generates one replication of a scenario.
pub fn gen_scenario(config: &ScenarioConfig) -> Result<SimulatedDataset> {
    let n = config.n;
    let x = gen_correlated_covariates(n, config.p, config.covariate_seed)?;
    let tau = treatment_effect_dgp(
        &x,
        config.effect_shape,
        &mut rng::rng_from(config.rep_seed, &[tag::EFFECT_NOISE]),
    )?;
    let (e0, d) = propensity_dgp(
        &x,
        config.assignment,
        &mut rng::rng_from(config.rep_seed, &[tag::ASSIGNMENT]),
    )?;
    let base = mu0(&x)?;
    let mut noise_rng = rng::rng_from(config.rep_seed, &[tag::OUTCOME_NOISE]);
    let y0: Vec<f64> = base
        .iter()
        .map(|m| {
            let u: f64 = StandardNormal.sample(&mut noise_rng);
            m + u
        })
        .collect();
    let y1: Vec<f64> = y0.iter().zip(&tau).map(|(a, t)| a + t).collect();
    let y: Vec<f64> = (0..n).map(|i| if d[i] == 1 { y1[i] } else { y0[i] }).collect();

    let mut names: Vec<String> = (1..=config.p).map(|j| format!("x{j}")).collect();
    let observed = if config.misspecified {
        names.remove(1);
        x.drop_column(1)
    } else {
        x
    };
    Ok(SimulatedDataset {
        base: Dataset::new(y, d, observed, Some(names))?,
        tau_true: tau,
        e_true: e0,
        y0,
        y1,
    })
}

/// Excess-free sample kurtosis (normal = 3).
pub fn kurtosis(v: &[f64]) -> f64 {
    let m = stats::mean(v);
    let n = v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}
