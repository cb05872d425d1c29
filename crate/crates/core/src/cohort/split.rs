use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Cohort;
use crate::error::{Error, Result};

/// Shuffles `0..n` under `seed` and cuts it into parts sized by `ratios`
/// (largest-remainder rounding, so each size is within 1 of `ratio * n`).
pub fn partition_indices(n: usize, ratios: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if ratios.is_empty() || ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!(
            "split ratios must all be > 0, got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "split ratios must sum to 1, got {total}"
        )));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Domain(format!(
            "{n} rows cannot fill part {k} of ratios {ratios:?}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        let mut part = idx[start..start + s].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += s;
    }
    Ok(parts)
}

/// Training set, two validation sets, and test set.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub s: Cohort,
    pub v1: Cohort,
    pub v2: Cohort,
    pub t: Cohort,
    /// Row indices into the input cohort, in (S, V1, V2, T) order.
    pub indices: [Vec<usize>; 4],
}

pub fn split_dataset(cohort: &Cohort, ratios: [f64; 4], seed: u64) -> Result<SplitBundle> {
    let parts = partition_indices(cohort.len(), &ratios, seed)?;
    let [s, v1, v2, t]: [Vec<usize>; 4] = parts.try_into().expect("four ratios give four parts");
    Ok(SplitBundle {
        s: cohort.subset(&s),
        v1: cohort.subset(&v1),
        v2: cohort.subset(&v2),
        t: cohort.subset(&t),
        indices: [s, v1, v2, t],
    })
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub development: Cohort,
    pub test: Cohort,
    pub test_indices: Vec<usize>,
}

pub fn kfold(cohort: &Cohort, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = cohort.len();
    if k < 2 {
        return Err(Error::Domain(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut test: Vec<usize> = idx[start..start + size].to_vec();
        test.sort_unstable();
        let mut dev: Vec<usize> = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
        dev.sort_unstable();
        folds.push(Fold {
            development: cohort.subset(&dev),
            test: cohort.subset(&test),
            test_indices: test,
        });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{FeatureSpec, Record, Schema};
    use proptest::prelude::*;

    fn cohort(n: usize) -> Cohort {
        let s = Schema::new(vec![FeatureSpec::continuous("x")]).unwrap();
        let records = (0..n)
            .map(|i| Record {
                features: vec![i as f64],
                time: 1.0 + i as f64,
                event: i % 2 == 0,
            })
            .collect();
        Cohort::new(s, records).unwrap()
    }

    #[test]
    fn exact_proportions() {
        let b = split_dataset(&cohort(100), [0.6, 0.1, 0.1, 0.2], 7).unwrap();
        assert_eq!([b.s.len(), b.v1.len(), b.v2.len(), b.t.len()], [60, 10, 10, 20]);
    }

    #[test]
    fn same_seed_same_assignment() {
        let a = split_dataset(&cohort(100), [0.6, 0.1, 0.1, 0.2], 7).unwrap();
        let b = split_dataset(&cohort(100), [0.6, 0.1, 0.1, 0.2], 7).unwrap();
        assert_eq!(a.indices, b.indices);
        let c = split_dataset(&cohort(100), [0.6, 0.1, 0.1, 0.2], 8).unwrap();
        assert_ne!(a.indices, c.indices);
    }

    #[test]
    fn degenerate_ratios() {
        assert!(split_dataset(&cohort(3), [0.25; 4], 1).is_err());
        assert!(split_dataset(&cohort(100), [0.5, 0.5, 0.0, 0.0], 1).is_err());
        assert!(split_dataset(&cohort(100), [0.5, 0.5, 0.1, 0.1], 1).is_err());
    }

    #[test]
    fn kfold_even_division() {
        let folds = kfold(&cohort(10), 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.test.len() == 2 && f.development.len() == 8));
        assert!(kfold(&cohort(3), 5, 3).is_err());
        assert!(kfold(&cohort(3), 1, 3).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_exact(n in 4usize..300, seed in any::<u64>(), a in 1u32..10, b in 1u32..10, c in 1u32..10, d in 1u32..10) {
            let tot = (a + b + c + d) as f64;
            let ratios = [a as f64 / tot, b as f64 / tot, c as f64 / tot, d as f64 / tot];
            if let Ok(parts) = partition_indices(n, &ratios, seed) {
                let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                for (p, r) in parts.iter().zip(ratios) {
                    prop_assert!((p.len() as f64 - r * n as f64).abs() < 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn kfold_is_a_partition(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = kfold(&cohort(n), k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test_indices.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for f in &folds {
                prop_assert_eq!(f.development.len() + f.test.len(), n);
            }
        }
    }
}
