use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TreeOfPredictors;
use crate::error::{Error, Result};
use crate::learners::BinaryRows;

/// Paths up to this length are solved exactly by enumerating simplex faces.
const MAX_EXACT_PATH: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Nonnegative weights summing to one.
    #[default]
    Simplex,
    /// Ordinary least squares; predictions are clamped to [0, 1].
    Unconstrained,
}

/// Per-row path-predictor outputs and labels for the second-validation rows
/// that route to `leaf`.
pub fn leaf_design(tree: &TreeOfPredictors, leaf: usize, v2: &BinaryRows<'_>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let path = tree.path_to(leaf);
    let mut h = Vec::new();
    let mut y = Vec::new();
    for (x, &yi) in v2.x.iter().zip(&v2.y) {
        if tree.route_unchecked(x).0 == leaf {
            h.push(path.iter().map(|&id| tree.nodes[id].predictor.score(x)).collect());
            y.push(yi);
        }
    }
    (h, y)
}

pub fn squared_error(h: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    h.iter()
        .zip(y)
        .map(|(row, yi)| {
            let p: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            (yi - p).powi(2)
        })
        .sum()
}

fn gram(h: &[Vec<f64>], y: &[f64], l: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut g = DMatrix::zeros(l, l);
    let mut b = DVector::zeros(l);
    for (row, yi) in h.iter().zip(y) {
        for i in 0..l {
            b[i] += row[i] * yi;
            for j in 0..l {
                g[(i, j)] += row[i] * row[j];
            }
        }
    }
    (g, b)
}

/// Minimizes `sum (y - h w)^2` over the probability simplex. Exact for paths
/// of up to eight predictors (every face's equality-constrained optimum is
/// checked, vertices included); projected gradient beyond that.
pub fn simplex_least_squares(h: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let l = h.first()?.len();
    if l == 0 || h.len() != y.len() {
        return None;
    }
    let (g, b) = gram(h, y, l);
    if l > MAX_EXACT_PATH {
        return projected_gradient(&g, &b);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << l) {
        let face: Vec<usize> = (0..l).filter(|i| mask & (1 << i) != 0).collect();
        let Some(w) = face_optimum(&g, &b, &face, l) else {
            continue;
        };
        let err = squared_error(h, y, &w);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, w));
        }
    }
    best.map(|(_, w)| w)
}

/// Equality-constrained optimum on the affine hull of `face`, if it lies in
/// the face.
fn face_optimum(g: &DMatrix<f64>, b: &DVector<f64>, face: &[usize], l: usize) -> Option<Vec<f64>> {
    let mut w = vec![0.0; l];
    if face.len() == 1 {
        w[face[0]] = 1.0;
        return Some(w);
    }
    let m = face.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for (a, &i) in face.iter().enumerate() {
        for (c, &j) in face.iter().enumerate() {
            kkt[(a, c)] = g[(i, j)];
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
        rhs[a] = b[i];
    }
    rhs[m] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    let scale = sol.iter().take(m).fold(1.0f64, |acc, v| acc.max(v.abs()));
    for (a, &i) in face.iter().enumerate() {
        let v = sol[a];
        if !v.is_finite() || v < -1e-10 * scale {
            return None;
        }
        w[i] = v.max(0.0);
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= total);
    Some(w)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn projected_gradient(g: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    let l = b.len();
    let lmax = g.clone().symmetric_eigenvalues().max();
    if !(lmax > 0.0) {
        return None;
    }
    let step = 1.0 / lmax;
    let mut w = DVector::from_element(l, 1.0 / l as f64);
    for _ in 0..20_000 {
        let grad = g * &w - b;
        let next = DVector::from_vec(project_simplex((&w - grad * step).as_slice()));
        let moved = (&next - &w).amax();
        w = next;
        if moved < 1e-13 {
            break;
        }
    }
    w.iter().all(|v| v.is_finite()).then(|| w.as_slice().to_vec())
}

fn least_squares(h: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let l = h.first()?.len();
    let a = DMatrix::from_fn(h.len(), l, |i, j| h[i][j]);
    let w = a.svd(true, true).solve(&DVector::from_column_slice(y), 1e-12).ok()?;
    w.iter().all(|v| v.is_finite()).then(|| w.as_slice().to_vec())
}

/// Fits weights for every leaf from the second-validation rows. Leaves whose
/// rows are empty, single-class, or give no usable solution get uniform
/// weights; their ids are returned.
pub fn fit_path_weights(tree: &mut TreeOfPredictors, v2: &BinaryRows<'_>) -> Result<Vec<usize>> {
    if v2.x.iter().any(|x| x.len() != tree.width()) {
        return Err(Error::Domain(format!(
            "second validation rows must have width {}",
            tree.width()
        )));
    }
    let leaves: Vec<usize> = tree.leaves().map(|n| n.id).collect();
    let mut fallback = Vec::new();
    let mut weights = std::collections::BTreeMap::new();
    for leaf in leaves {
        let (h, y) = leaf_design(tree, leaf, v2);
        let l = tree.nodes[leaf].depth + 1;
        let pos = y.iter().filter(|&&v| v > 0.5).count();
        let solved = if pos == 0 || pos == y.len() {
            None
        } else {
            match tree.weight_mode {
                WeightMode::Simplex => simplex_least_squares(&h, &y),
                WeightMode::Unconstrained => least_squares(&h, &y),
            }
        };
        let w = solved.unwrap_or_else(|| {
            fallback.push(leaf);
            vec![1.0 / l as f64; l]
        });
        weights.insert(leaf, w);
    }
    tree.path_weights = weights;
    Ok(fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::test_support::depth_one;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let h = (0..n).map(|_| (0..l).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        (h, y)
    }

    #[test]
    fn never_worse_than_any_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let l = rng.random_range(1..=6);
            let n = rng.random_range(2..40);
            let (h, y) = random_instance(&mut rng, n, l);
            let w = simplex_least_squares(&h, &y).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
            let err = squared_error(&h, &y, &w);
            for k in 0..l {
                let mut e = vec![0.0; l];
                e[k] = 1.0;
                assert!(err <= squared_error(&h, &y, &e) + 1e-9);
            }
        }
    }

    #[test]
    fn exact_matches_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let l = rng.random_range(2..=5);
            let (h, y) = random_instance(&mut rng, 30, l);
            let exact = simplex_least_squares(&h, &y).unwrap();
            let (g, b) = gram(&h, &y, l);
            let pg = projected_gradient(&g, &b).unwrap();
            let (e1, e2) = (squared_error(&h, &y, &exact), squared_error(&h, &y, &pg));
            assert!(e1 <= e2 + 1e-9, "{e1} vs {e2}");
        }
    }

    #[test]
    fn duplicate_columns_still_solve() {
        let h = vec![vec![0.2, 0.2, 0.9], vec![0.8, 0.8, 0.1], vec![0.5, 0.5, 0.5]];
        let y = vec![0.0, 1.0, 1.0];
        let w = simplex_least_squares(&h, &y).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_onto_simplex() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.3, 0.3, 0.3]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_class_leaf_falls_back_to_uniform() {
        let mut t = depth_one(0.4, 0.8, 0.3);
        let rows = [vec![0.1, 0.0], vec![0.2, 0.0], vec![0.9, 0.0], vec![0.7, 1.0]];
        let v2 = BinaryRows {
            horizon: 90.0,
            x: rows.iter().map(Vec::as_slice).collect(),
            y: vec![1.0, 1.0, 0.0, 1.0],
        };
        let fallback = fit_path_weights(&mut t, &v2).unwrap();
        assert_eq!(fallback, vec![1]);
        assert_eq!(t.path_weights[&1], vec![0.5, 0.5]);
        // Leaf 2: predictors 0.4 (root) and 0.3; labels {0, 1} -> mean 0.5 is
        // best approximated by putting all weight on the root.
        assert_eq!(t.path_weights[&2], vec![1.0, 0.0]);
    }

    #[test]
    fn unconstrained_mode_uses_least_squares() {
        let h = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let y = vec![1.0, 0.0, 1.0];
        let w = least_squares(&h, &y).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }
}
