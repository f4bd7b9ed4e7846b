//! Tabular data, sample splits and CSV ingestion.
//!
//! Rows and columns are 0-based internally. Every external surface (CSV
//! headers, validation messages) uses the 1-based covariate names `x1..xp`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} columns, expected {cols}",
                    i + 1,
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn drop_column(&self, j: usize) -> Matrix {
        Matrix::from_fn(self.rows, self.cols - 1, |r, c| {
            self.get(r, if c < j { c } else { c + 1 })
        })
    }
}

/// Observed data: outcome, binary treatment and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<u8>,
    x: Matrix,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking only shapes and the 0/1 coding of `d`.
    /// Content problems (NaNs, a missing arm) are left to [`validate_dataset`].
    pub fn new(y: Vec<f64>, d: Vec<u8>, x: Matrix, feature_names: Option<Vec<String>>) -> Result<Self> {
        let n = y.len();
        if d.len() != n || x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, d has {}, x has {}",
                d.len(),
                x.nrows()
            )));
        }
        if let Some(i) = d.iter().position(|&v| v > 1) {
            return Err(Error::InvalidInput(format!(
                "treatment at row {} is {}, expected 0 or 1",
                i + 1,
                d[i]
            )));
        }
        let feature_names = match feature_names {
            Some(names) if names.len() != x.ncols() => {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature names for {} covariates",
                    names.len(),
                    x.ncols()
                )))
            }
            Some(names) => names,
            None => (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self {
            y,
            d,
            x,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn d_f64(&self) -> Vec<f64> {
        self.d.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&v| v == 1).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d: idx.iter().map(|&i| self.d[i]).collect(),
            x: self.x.select_rows(idx),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Reads `y`, `d` and every `x<j>` column from CSV. Other columns are
    /// ignored, except `tau_true`, which is returned when present.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<LoadedCsv> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv_from(file)
    }

    pub fn read_csv_from(reader: impl Read) -> Result<LoadedCsv> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let y_col = find("y").ok_or_else(|| Error::InvalidInput("missing required column `y`".into()))?;
        let d_col = find("d").ok_or_else(|| Error::InvalidInput("missing required column `d`".into()))?;
        let tau_col = find("tau_true");
        let x_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| is_covariate_name(h.trim()))
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect();
        if x_cols.is_empty() {
            return Err(Error::InvalidInput("no covariate columns named x1..xp".into()));
        }

        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut x = Vec::new();
        let mut tau = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let line = r + 1;
            let field = |c: usize| record.get(c).unwrap_or("").trim();
            y.push(parse_real(field(y_col), line, "y")?);
            d.push(parse_treatment(field(d_col), line)?);
            for (c, name) in &x_cols {
                x.push(parse_real(field(*c), line, name)?);
            }
            if let Some(c) = tau_col {
                tau.push(parse_real(field(c), line, "tau_true")?);
            }
        }
        let n = y.len();
        let names: Vec<String> = x_cols.into_iter().map(|(_, n)| n).collect();
        let x = Matrix::new(n, names.len(), x)?;
        Ok(LoadedCsv {
            data: Dataset::new(y, d, x, Some(names))?,
            tau_true: tau_col.map(|_| tau),
        })
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["y".to_string(), "d".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![fmt_f64(self.y[i]), self.d[i].to_string()];
            rec.extend(self.x.row(i).iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of [`Dataset::read_csv`].
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub data: Dataset,
    pub tau_true: Option<Vec<f64>>,
}

fn is_covariate_name(h: &str) -> bool {
    h.len() > 1 && h.starts_with('x') && h[1..].bytes().all(|b| b.is_ascii_digit())
}

fn parse_real(s: &str, line: usize, col: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("row {line}, column {col}: `{s}` is not a real number")))
}

fn parse_treatment(s: &str, line: usize) -> Result<u8> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(Error::InvalidInput(format!(
            "row {line}, column d: `{s}` is not 0 or 1"
        ))),
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Simulated data with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    /// Observed view; may lack a confounder when misspecified.
    pub base: Dataset,
    pub tau_true: Vec<f64>,
    pub e_true: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl SimulatedDataset {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let b = &self.base;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["y".to_string(), "d".to_string()];
        header.extend(b.feature_names().iter().cloned());
        header.extend(["tau_true", "e_true", "y0", "y1"].map(String::from));
        w.write_record(&header)?;
        for i in 0..b.len() {
            let mut rec = vec![fmt_f64(b.y()[i]), b.d()[i].to_string()];
            rec.extend(b.x().row(i).iter().map(|v| fmt_f64(*v)));
            rec.extend([self.tau_true[i], self.e_true[i], self.y0[i], self.y1[i]].map(fmt_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One invariant violation found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reports every dataset invariant violated for a `k`-group analysis.
pub fn validate_dataset(data: &Dataset, k: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = data.len();
    if n < 2 * k.max(1) {
        out.push(Violation(format!(
            "N = {n} is below 2K = {}; grouping is infeasible",
            2 * k.max(1)
        )));
    }
    let treated = data.n_treated();
    if treated == 0 {
        out.push(Violation("no treated observations (d is never 1)".into()));
    }
    if treated == n {
        out.push(Violation("no control observations (d is never 0)".into()));
    }
    for (i, v) in data.y().iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation(format!("non-finite y at row {}: {v}", i + 1)));
        }
    }
    for i in 0..n {
        for (j, v) in data.x().row(i).iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation(format!(
                    "non-finite covariate at row {}, column {}: {v}",
                    i + 1,
                    data.feature_names()[j]
                )));
            }
        }
    }
    out
}

/// Partition of `0..n` into an auxiliary (training) half and a main half.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub aux_idx: Vec<usize>,
    pub main_idx: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn n(&self) -> usize {
        self.aux_idx.len() + self.main_idx.len()
    }
}

/// Uniform random half split, deterministic in `seed`. For odd `n` the
/// auxiliary half gets the smaller share.
pub fn make_split(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 4 {
        return Err(Error::SampleTooSmall(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = rng::rng_from(seed, &[tag::SPLIT]);
    perm.shuffle(&mut rng);
    let (aux, main) = perm.split_at(n / 2);
    let mut aux_idx = aux.to_vec();
    let mut main_idx = main.to_vec();
    aux_idx.sort_unstable();
    main_idx.sort_unstable();
    Ok(SplitPlan {
        aux_idx,
        main_idx,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, p: usize) -> Dataset {
        let x = Matrix::from_fn(n, p, |i, j| (i * p + j) as f64 * 0.01);
        let y = (0..n).map(|i| i as f64).collect();
        let d = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(y, d, x, None).unwrap()
    }

    #[test]
    fn valid_dataset_has_empty_report() {
        assert!(validate_dataset(&toy(100, 20), 5).is_empty());
    }

    #[test]
    fn all_treated_reports_missing_controls() {
        let t = toy(20, 3);
        let data = Dataset::new(t.y().to_vec(), vec![1; 20], t.x().clone(), None).unwrap();
        let report = validate_dataset(&data, 5);
        assert!(report.iter().any(|v| v.0.contains("no control observations")), "{report:?}");
    }

    #[test]
    fn nan_covariate_is_located() {
        let t = toy(20, 3);
        let mut x = t.x().clone();
        x.set(4, 1, f64::NAN);
        let data = Dataset::new(t.y().to_vec(), t.d().to_vec(), x, None).unwrap();
        let report = validate_dataset(&data, 2);
        assert_eq!(report.len(), 1);
        assert!(report[0].0.contains("row 5") && report[0].0.contains("x2"), "{report:?}");
    }

    #[test]
    fn too_few_rows_for_k() {
        let report = validate_dataset(&toy(8, 2), 5);
        assert!(report.iter().any(|v| v.0.contains("2K")));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let x = Matrix::zeros(3, 2);
        assert!(Dataset::new(vec![0.0; 4], vec![0, 1, 0, 1], x, None).is_err());
        assert!(Dataset::new(vec![0.0; 3], vec![0, 2, 1], Matrix::zeros(3, 2), None).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(make_split(10, 7).unwrap(), make_split(10, 7).unwrap());
        assert_ne!(make_split(100, 7).unwrap(), make_split(100, 8).unwrap());
    }

    #[test]
    fn odd_split_sizes() {
        let s = make_split(11, 3).unwrap();
        assert!(s.aux_idx.len() == 5 || s.aux_idx.len() == 6);
        assert_eq!(s.main_idx.len(), 11 - s.aux_idx.len());
    }

    #[test]
    fn small_sample_rejected() {
        let err = make_split(3, 1).unwrap_err();
        assert!(err.to_string().contains("sample too small to split"));
    }

    #[test]
    fn csv_round_trip_keeps_names() {
        let names = vec!["x1".to_string(), "x3".to_string()];
        let x = Matrix::from_rows(&[vec![1.0, 2.5], vec![-0.125, 3.0]]).unwrap();
        let data = Dataset::new(vec![0.5, 1.5], vec![0, 1], x, Some(names)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back.data, data);
        assert!(back.tau_true.is_none());
    }

    #[test]
    fn csv_rejects_bad_treatment() {
        let text = "y,d,x1\n1.0,2,0.3\n";
        let err = Dataset::read_csv_from(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("not 0 or 1"));
    }

    #[test]
    fn csv_accepts_nan_for_validation() {
        let text = "y,d,x1\n1.0,1,NaN\n2.0,0,0.1\n";
        let loaded = Dataset::read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(validate_dataset(&loaded.data, 1).len(), 1);
    }
}
