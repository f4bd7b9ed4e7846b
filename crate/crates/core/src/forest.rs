//! Regression random forest.
//!
//! Trees are grown CART-style: each node draws `mtry` candidate features,
//! scans every threshold between distinct sorted values and keeps the split
//! with the largest reduction in squared error. Candidate features are scanned
//! in increasing index order and thresholds in increasing order, and only a
//! strictly better split replaces the incumbent, so equal gains resolve to the
//! lowest feature and then the lowest threshold.
//!
//! Per-feature sort orders are computed once per forest. Each tree expands
//! them to its bootstrap multiset and then keeps one stably partitioned copy
//! per feature, so a node never re-sorts.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    pub bootstrap_fraction: f64,
    /// Draw the per-tree sample with replacement (bootstrap) or without.
    pub replace: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_leaf: 5,
            mtry: None,
            bootstrap_fraction: 1.0,
            replace: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| p.div_ceil(3)).max(1)
    }

    fn check(&self, n: usize, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidInput("min_leaf must be at least 1".into()));
        }
        if p == 0 {
            return Err(Error::InvalidInput("forest needs at least one feature".into()));
        }
        let mtry = self.resolved_mtry(p);
        if mtry > p {
            return Err(Error::InvalidInput(format!("mtry = {mtry} exceeds p = {p}")));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "bootstrap_fraction {} outside (0, 1]",
                self.bootstrap_fraction
            )));
        }
        if n < 2 * self.min_leaf {
            return Err(Error::InvalidInput(format!(
                "{n} training rows is fewer than 2 * min_leaf = {}",
                2 * self.min_leaf
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    params: ForestParams,
    n_features: usize,
}

/// Column-major view of the training data plus per-feature sort orders.
struct TrainingSet<'a> {
    cols: Vec<Vec<f64>>,
    y: &'a [f64],
    order: Vec<Vec<u32>>,
}

impl<'a> TrainingSet<'a> {
    fn new(x: &Matrix, y: &'a [f64]) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j)).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..c.len() as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                o
            })
            .collect();
        Self { cols, y, order }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.cols.len()
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    n_left: usize,
}

fn sample_counts(n: usize, params: &ForestParams, rng: &mut rng::Rng) -> Vec<u32> {
    let m = ((params.bootstrap_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    let mut counts = vec![0u32; n];
    if params.replace {
        for _ in 0..m {
            counts[rng.random_range(0..n)] += 1;
        }
    } else if m == n {
        counts.fill(1);
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        let (chosen, _) = idx.partial_shuffle(rng, m);
        for &i in chosen.iter() {
            counts[i] = 1;
        }
    }
    counts
}

fn grow_tree(ts: &TrainingSet<'_>, params: &ForestParams, counts: &[u32], rng: &mut rng::Rng) -> Tree {
    let p = ts.p();
    let m: usize = counts.iter().map(|&c| c as usize).sum();
    let mtry = params.resolved_mtry(p);
    let min_leaf = params.min_leaf;

    // ord[f * m .. (f + 1) * m] holds the sample rows sorted by feature f.
    let mut ord: Vec<u32> = Vec::with_capacity(p * m);
    for f in 0..p {
        for &r in &ts.order[f] {
            for _ in 0..counts[r as usize] {
                ord.push(r);
            }
        }
    }
    let mut goes_left = vec![false; ts.n()];
    let mut scratch: Vec<u32> = vec![0; m];
    let mut vals: Vec<f64> = Vec::with_capacity(m);
    let mut ys: Vec<f64> = Vec::with_capacity(m);
    let mut features: Vec<usize> = (0..p).collect();
    let inv: Vec<f64> = (0..=m).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect();

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // (node id, start, end, depth)
    let mut stack = vec![(0usize, 0usize, m, 0usize)];
    while let Some((id, start, end, depth)) = stack.pop() {
        let cnt = end - start;
        let rows = &ord[start..end];
        let mut total = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            let v = ts.y[r as usize];
            total += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let leaf_value = if lo == hi { lo } else { total / cnt as f64 };
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if lo == hi || cnt < 2 * min_leaf || depth_capped {
            nodes[id] = Node::Leaf { value: leaf_value };
            continue;
        }

        let (chosen, _) = features.partial_shuffle(rng, mtry);
        let mut tried: Vec<usize> = chosen.to_vec();
        tried.sort_unstable();

        let mut best: Option<Candidate> = None;
        let mut best_gain = f64::NEG_INFINITY;
        for &f in &tried {
            let col = &ts.cols[f];
            let s = &ord[f * m + start..f * m + end];
            vals.clear();
            ys.clear();
            for &r in s {
                vals.push(col[r as usize]);
                ys.push(ts.y[r as usize]);
            }
            let mut sum_left: f64 = ys[..min_leaf - 1].iter().sum();
            let mut found = None;
            for n_left in min_leaf..=cnt - min_leaf {
                sum_left += ys[n_left - 1];
                if vals[n_left - 1] < vals[n_left] {
                    let sum_right = total - sum_left;
                    let gain = sum_left * sum_left * inv[n_left] + sum_right * sum_right * inv[cnt - n_left];
                    if gain > best_gain {
                        best_gain = gain;
                        found = Some(n_left);
                    }
                }
            }
            if let Some(n_left) = found {
                let (v, v_next) = (vals[n_left - 1], vals[n_left]);
                let mut threshold = 0.5 * (v + v_next);
                if !(threshold >= v && threshold < v_next) {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    n_left,
                });
            }
        }

        let Some(best) = best else {
            nodes[id] = Node::Leaf { value: leaf_value };
            continue;
        };

        let split_rows = &ord[best.feature * m + start..best.feature * m + end];
        for (i, &r) in split_rows.iter().enumerate() {
            goes_left[r as usize] = i < best.n_left;
        }
        for f in 0..p {
            if f == best.feature {
                continue;
            }
            let seg = &mut ord[f * m + start..f * m + end];
            // Branch-free stable partition: left rows compact in place,
            // right rows collect in `scratch`.
            let mut w = 0;
            let mut k = 0;
            for i in 0..cnt {
                let r = seg[i];
                let left = usize::from(goes_left[r as usize]);
                seg[w] = r;
                scratch[k] = r;
                w += left;
                k += 1 - left;
            }
            debug_assert_eq!(w, best.n_left);
            seg[w..].copy_from_slice(&scratch[..k]);
        }

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        stack.push((right, start + best.n_left, end, depth + 1));
        stack.push((left, start, start + best.n_left, depth + 1));
    }
    Tree { nodes }
}

fn check_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} rows but y has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("forest inputs contain non-finite values".into()));
    }
    Ok(())
}

impl ForestModel {
    pub fn fit(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<Self> {
        Self::fit_inner(x, y, params, false).map(|(m, _)| m)
    }

    /// Fits and also returns out-of-bag predictions for every training row.
    /// A row that was drawn into every tree has no out-of-bag prediction.
    pub fn fit_with_oob(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<(Self, Vec<Option<f64>>)> {
        Self::fit_inner(x, y, params, true).map(|(m, oob)| (m, oob.unwrap_or_default()))
    }

    fn fit_inner(
        x: &Matrix,
        y: &[f64],
        params: &ForestParams,
        want_oob: bool,
    ) -> Result<(Self, Option<Vec<Option<f64>>>)> {
        check_inputs(x, y)?;
        params.check(x.nrows(), x.ncols())?;
        let ts = TrainingSet::new(x, y);
        let n = ts.n();

        let grown: Vec<(Tree, Vec<(u32, f64)>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::rng_from(params.seed, &[tag::TREE, t as u64]);
                let counts = sample_counts(n, params, &mut rng);
                let tree = grow_tree(&ts, params, &counts, &mut rng);
                let oob = if want_oob {
                    counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c == 0)
                        .map(|(i, _)| (i as u32, tree.predict_row(x.row(i))))
                        .collect()
                } else {
                    Vec::new()
                };
                (tree, oob)
            })
            .collect();

        let oob = want_oob.then(|| {
            let mut sum = vec![0.0; n];
            let mut hits = vec![0usize; n];
            for (_, preds) in &grown {
                for &(i, v) in preds {
                    sum[i as usize] += v;
                    hits[i as usize] += 1;
                }
            }
            sum.iter()
                .zip(&hits)
                .map(|(s, &h)| (h > 0).then(|| s / h as f64))
                .collect()
        });

        let model = ForestModel {
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            params: params.clone(),
            n_features: x.ncols(),
        };
        Ok((model, oob))
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the per-tree predictions, summed in tree order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "model was fit on {} features, query has {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }

    /// Same model with the tree order permuted; used to check that
    /// predictions do not depend on ensemble order.
    pub fn with_tree_order(&self, order: &[usize]) -> Self {
        Self {
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
            params: self.params.clone(),
            n_features: self.n_features,
        }
    }
}

/// Probability forest: a regression forest on the 0/1 treatment label with
/// predictions clamped to `[clip, 1 - clip]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityModel {
    forest: ForestModel,
    clip: f64,
}

pub const DEFAULT_PROPENSITY_CLIP: f64 = 0.01;

impl PropensityModel {
    pub fn fit(x: &Matrix, d: &[u8], params: &ForestParams, clip: f64) -> Result<Self> {
        Self::fit_with_oob(x, d, params, clip).map(|(m, _)| m)
    }

    pub fn fit_with_oob(
        x: &Matrix,
        d: &[u8],
        params: &ForestParams,
        clip: f64,
    ) -> Result<(Self, Vec<Option<f64>>)> {
        if !(clip > 0.0 && clip < 0.5) {
            return Err(Error::InvalidInput(format!("propensity clip {clip} outside (0, 0.5)")));
        }
        let treated = d.iter().filter(|&&v| v == 1).count();
        if treated == 0 || treated == d.len() {
            return Err(Error::SingleClass(format!(
                "{treated} of {} rows treated; propensity needs both arms",
                d.len()
            )));
        }
        let labels: Vec<f64> = d.iter().map(|&v| f64::from(v)).collect();
        let (forest, oob) = ForestModel::fit_with_oob(x, &labels, params)?;
        let model = Self { forest, clip };
        let oob = oob.into_iter().map(|o| o.map(|v| model.clamp(v))).collect();
        Ok((model, oob))
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn clamp(&self, raw: f64) -> f64 {
        raw.clamp(self.clip, 1.0 - self.clip)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forest.predict(x)?.into_iter().map(|v| self.clamp(v)).collect())
    }

    pub fn forest(&self) -> &ForestModel {
        &self.forest
    }
}
