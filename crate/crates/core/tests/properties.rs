use dogates_core::pipeline::{gates_orthogonal, gates_orthogonal_closed_form, GatesResult, GroupEstimates};
use dogates_core::stats::median;
use dogates_core::*;
use proptest::prelude::*;

/// Solves `A b = c` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut c: Vec<f64>) -> Vec<f64> {
    let q = c.len();
    for col in 0..q {
        let piv = (col..q).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        c.swap(col, piv);
        for r in col + 1..q {
            let f = a[r][col] / a[col][col];
            for k in col..q {
                a[r][k] -= f * a[col][k];
            }
            c[r] -= f * c[col];
        }
    }
    let mut b = vec![0.0; q];
    for r in (0..q).rev() {
        let s: f64 = (r + 1..q).map(|k| a[r][k] * b[k]).sum();
        b[r] = (c[r] - s) / a[r][r];
    }
    b
}

fn normal_equations(x: &Matrix, y: &[f64], w: &[f64]) -> Vec<f64> {
    let q = x.ncols();
    let mut a = vec![vec![0.0; q]; q];
    let mut c = vec![0.0; q];
    for i in 0..x.nrows() {
        let r = x.row(i);
        for j in 0..q {
            c[j] += w[i] * r[j] * y[i];
            for k in 0..q {
                a[j][k] += w[i] * r[j] * r[k];
            }
        }
    }
    gauss_solve(a, c)
}

fn design_strategy() -> impl Strategy<Value = (Matrix, Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|q| {
        (q * 3..q * 3 + 40).prop_flat_map(move |n| {
            (
                prop::collection::vec(-3.0f64..3.0, n * q),
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(0.1f64..4.0, n),
            )
                .prop_map(move |(xs, y, w)| (Matrix::new(n, q, xs).unwrap(), y, w))
        })
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_rows(n in 4usize..500, seed in any::<u64>()) {
        let s = make_split(n, seed).unwrap();
        prop_assert_eq!(s.aux_idx.len(), n / 2);
        let mut all: Vec<usize> = s.aux_idx.iter().chain(&s.main_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(make_split(n, seed).unwrap(), s);
    }

    #[test]
    fn wls_matches_normal_equations((x, y, w) in design_strategy()) {
        let fit = wls(&x, &y, &w, 0.05).unwrap();
        let oracle = normal_equations(&x, &y, &w);
        for (a, b) in fit.coef.iter().zip(&oracle) {
            prop_assert!(close(*a, *b, 1e-10), "{} vs {}", a, b);
        }
    }

    #[test]
    fn wls_scale_equivariance((x, y, w) in design_strategy(), c in 0.1f64..10.0, wc in 0.1f64..10.0) {
        let base = wls(&x, &y, &w, 0.05).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let scaled = wls(&x, &ys, &w, 0.05).unwrap();
        for j in 0..x.ncols() {
            prop_assert!(close(scaled.coef[j], c * base.coef[j], 1e-9));
            prop_assert!(close(scaled.se[j], c * base.se[j], 1e-9));
            prop_assert!((scaled.p_values[j] - base.p_values[j]).abs() < 1e-9);
        }
        let ws: Vec<f64> = w.iter().map(|v| v * wc).collect();
        let reweighted = wls(&x, &y, &ws, 0.05).unwrap();
        for j in 0..x.ncols() {
            prop_assert!(close(reweighted.coef[j], base.coef[j], 1e-9));
        }
    }

    #[test]
    fn indicator_design_gives_group_means(
        labels in prop::collection::vec(0usize..4, 8..60),
        seed in any::<u64>(),
    ) {
        let k = 4;
        prop_assume!((0..k).all(|g| labels.contains(&g)));
        let n = labels.len();
        let y: Vec<f64> = (0..n).map(|i| ((i as u64 ^ seed) % 97) as f64 / 7.0).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + ((i as u64).wrapping_mul(seed | 1) % 5) as f64).collect();
        let x = Matrix::from_fn(n, k, |i, j| f64::from(u8::from(labels[i] == j)));
        let fit = wls(&x, &y, &w, 0.05).unwrap();
        for g in 0..k {
            let (num, den) = (0..n)
                .filter(|&i| labels[i] == g)
                .fold((0.0, 0.0), |(a, b), i| (a + w[i] * y[i], b + w[i]));
            prop_assert!(close(fit.coef[g], num / den, 1e-10));
        }
    }

    #[test]
    fn orthogonal_ols_equals_closed_form(
        n in 20usize..120,
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = rng::rng_from(seed, &[1]);
        use rand::Rng;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let d: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let groups = assign_groups(&scores, k).unwrap();
        let est = gates_orthogonal(&y, &d, &mu, &e, &groups, 0.05).unwrap();
        let u: Vec<f64> = y.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = d.iter().zip(&e).map(|(&a, b)| f64::from(a) - b).collect();
        let closed = gates_orthogonal_closed_form(&u, &v, &groups.labels, k);
        for (a, b) in est.gamma.iter().zip(&closed) {
            prop_assert!(close(*a, *b, 1e-10));
        }
    }

    #[test]
    fn groups_are_balanced(scores in prop::collection::hash_set(-1_000_000i64..1_000_000, 1..300), k in 1usize..12) {
        let scores: Vec<f64> = scores.into_iter().map(|v| v as f64).collect();
        prop_assume!(scores.len() >= k);
        let g = assign_groups(&scores, k).unwrap();
        let sizes = g.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        // groups are ordered by score
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(g.labels[i] <= g.labels[j]);
                }
            }
        }
    }

    #[test]
    fn true_group_effects_nondecreasing(tau in prop::collection::vec(-5.0f64..5.0, 10..200), k in 1usize..8) {
        prop_assume!(tau.len() >= k);
        prop_assume!(k == 1 || tau.iter().any(|&t| t != tau[0]));
        let g = metrics::true_group_effects(&tau, k).unwrap();
        prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn forest_predictions_stay_in_range(
        n in 12usize..80,
        seed in any::<u64>(),
    ) {
        let mut rng = rng::rng_from(seed, &[2]);
        use rand::Rng;
        let x = Matrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let params = ForestParams { n_trees: 15, min_leaf: 2, seed, ..ForestParams::default() };
        let f = ForestModel::fit(&x, &y, &params).unwrap();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let q = Matrix::from_fn(20, 3, |_, _| rng.random_range(-4.0..4.0));
        for p in f.predict(&q).unwrap() {
            prop_assert!(lo <= p && p <= hi);
        }
        let d: Vec<u8> = (0..n).map(|i| u8::from(y[i] > 0.0)).collect();
        prop_assume!(d.contains(&0) && d.contains(&1));
        let e = PropensityModel::fit(&x, &d, &params, 0.01).unwrap();
        for p in e.predict(&q).unwrap() {
            prop_assert!((0.01..=0.99).contains(&p));
        }
    }

    #[test]
    fn median_aggregation_robust_to_outlier(
        gammas in prop::collection::vec(-2.0f64..2.0, 3..25),
        outlier in prop::sample::select(vec![-1e6, 1e6]),
        seed in any::<u64>(),
    ) {
        let mk = |g: f64| GroupEstimates {
            gamma: vec![g], se: vec![0.1], p_values: vec![0.5],
            ci_low: vec![g - 0.1], ci_high: vec![g + 0.1], warnings: vec![],
        };
        let base: Vec<GroupEstimates> = gammas.iter().map(|&g| mk(g)).collect();
        let refs: Vec<(usize, &GroupEstimates)> = base.iter().enumerate().collect();
        let m0 = GatesResult::aggregate(GatesMode::Observational, 1, 0.05, &refs).gamma_median[0];

        // permutation invariance
        let mut perm: Vec<usize> = (0..base.len()).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng::rng_from(seed, &[3]));
        let shuffled: Vec<(usize, &GroupEstimates)> = perm.iter().map(|&i| (i, &base[i])).collect();
        prop_assert_eq!(GatesResult::aggregate(GatesMode::Observational, 1, 0.05, &shuffled).gamma_median[0], m0);

        // one extreme split moves the median at most to the adjacent order statistic
        let extra = mk(outlier);
        let mut with: Vec<(usize, &GroupEstimates)> = refs.clone();
        with.push((base.len(), &extra));
        let m1 = GatesResult::aggregate(GatesMode::Observational, 1, 0.05, &with).gamma_median[0];
        let mut sorted = gammas.clone();
        sorted.sort_by(f64::total_cmp);
        let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        prop_assert!((m1 - m0).abs() <= gap + 1e-12);
        prop_assert!(m1 >= sorted[0] && m1 <= sorted[sorted.len() - 1]);
    }

    #[test]
    fn bias2_bounded_by_mse(
        hats in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..30),
        truth in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let recs: Vec<BenchmarkRecord> = hats.iter().enumerate().map(|(j, h)| BenchmarkRecord {
            scenario_id: ScenarioId::C, rep: j, method: Method::DoGates,
            gamma_hat: h.clone(), gamma_true: truth.clone(),
        }).collect();
        let b = bias2(&recs).unwrap();
        let m = metrics::mse(&recs).unwrap();
        let a = mae(&recs).unwrap();
        prop_assert!(a.overall >= 0.0);
        for g in 0..3 {
            prop_assert!(b.per_group[g] <= m.per_group[g] + 1e-12);
        }
        let mut rev = recs.clone();
        rev.reverse();
        prop_assert!((mae(&rev).unwrap().overall - a.overall).abs() < 1e-12);
        prop_assert!((bias2(&rev).unwrap().overall - b.overall).abs() < 1e-12);
    }
}

#[test]
fn forest_is_running_mean_of_trees() {
    let mut rng = rng::rng_from(9, &[]);
    use rand::Rng;
    let x = Matrix::from_fn(60, 4, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..60).map(|i| x.get(i, 0) * 2.0 + rng.random_range(-0.1..0.1)).collect();
    let small = ForestModel::fit(&x, &y, &ForestParams { n_trees: 7, seed: 4, ..Default::default() }).unwrap();
    let big = ForestModel::fit(&x, &y, &ForestParams { n_trees: 20, seed: 4, ..Default::default() }).unwrap();
    for i in 0..60 {
        let row = x.row(i);
        let first7: f64 = big.trees()[..7].iter().map(|t| t.predict_row(row)).sum::<f64>() / 7.0;
        assert_eq!(small.predict_row(row), first7);
    }
    let rev: Vec<usize> = (0..20).rev().collect();
    let flipped = big.with_tree_order(&rev);
    for i in 0..60 {
        assert!((flipped.predict_row(x.row(i)) - big.predict_row(x.row(i))).abs() < 1e-12);
    }
}

#[test]
fn median_of_even_count_averages_middle() {
    assert_eq!(median(&[1.0, 3.0, 2.0, 10.0]), Some(2.5));
}
