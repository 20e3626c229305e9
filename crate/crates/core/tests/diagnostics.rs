use approx::assert_abs_diff_eq;
use embspec::diagnostics::{
    ami, corollary1_check, kmeans, kmeans_fits, nmi, rff_residual, theorem1_certificate,
};
use embspec::io::{pair, EmbeddingSet};
use embspec::linalg::{frobenius, submatrix, sym_eigen, sym_eigenvalues};
use embspec::synthetic::{gaussian_blobs, gaussian_matrix, random_unit_kernel};
use embspec::Error;
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

/// A random kernel pair and index set. Every fourth trial plants a block
/// that the first kernel isolates.
fn trial(seed: u64) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.random_range(10..=200);
    let size = rng.random_range(1..n);
    let mut set = sample(&mut rng, n, size).into_vec();
    set.sort_unstable();
    let k2 = random_unit_kernel(n, rng.random_range(1..20), seed + 1_000_000);
    let k1 = if seed % 4 == 0 {
        let mut inside = vec![false; n];
        for &i in &set {
            inside[i] = true;
        }
        let base = random_unit_kernel(n, rng.random_range(1..20), seed + 2_000_000);
        Array2::from_shape_fn((n, n), |(i, j)| match (inside[i], inside[j]) {
            (true, true) => 1.0,
            (false, false) => base[[i, j]],
            _ => 0.0,
        })
    } else {
        random_unit_kernel(n, rng.random_range(1..20), seed + 2_000_000)
    };
    (k1, k2, set)
}

fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !set.contains(i)).collect()
}

/// The certificate sum written out from its definition.
fn direct_lhs(k1: &Array2<f64>, k2: &Array2<f64>, set: &[usize]) -> (f64, f64, f64) {
    let n = k1.nrows();
    let nf = n as f64;
    let out = complement(n, set);
    let lam = (k1 - k2) / nf;
    let eps1 = frobenius(submatrix(k1.view(), set, &out).view()) / nf;
    let eps2 = sym_eigenvalues(submatrix(k2.view(), set, set).view()).unwrap()[0] / nf;
    let (vals, vecs) = sym_eigen(lam.view()).unwrap();
    let vi = sym_eigenvalues(submatrix(lam.view(), set, set).view()).unwrap();
    let vo = sym_eigenvalues(submatrix(lam.view(), &out, &out).view()).unwrap();
    let closest = |vs: &Array1<f64>, x: f64| {
        vs.iter()
            .copied()
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()).then(a.total_cmp(b)))
            .unwrap()
    };
    let mut lhs = 0.0;
    for (i, &l) in vals.iter().enumerate() {
        let v = vecs.column(i);
        let a: f64 = set.iter().map(|&j| v[j] * v[j]).sum();
        let b: f64 = out.iter().map(|&j| v[j] * v[j]).sum();
        lhs += (l - closest(&vi, l)).powi(2) * a + (l - closest(&vo, l)).powi(2) * b;
    }
    (lhs, eps1, eps2)
}

#[test]
fn separation_certificate_holds_on_random_kernel_pairs() {
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let (k1, k2, set) = trial(seed);
        let cert = theorem1_certificate(k1.view(), k2.view(), &set).unwrap();
        let (lhs, eps1, eps2) = direct_lhs(&k1, &k2, &set);
        assert_abs_diff_eq!(cert.lhs, lhs, epsilon = 1e-10 * lhs.max(1e-3));
        assert_abs_diff_eq!(cert.eps1, eps1, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.eps2, eps2, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.xi, 4.0 * (eps1 * eps1 + eps2), epsilon = 1e-12);
        if !cert.satisfied {
            failures.push(seed);
        }
    }
    assert!(failures.is_empty(), "violations at seeds {failures:?}");
}

#[test]
fn planted_block_certificate_has_slack() {
    let n = 120;
    let set: Vec<usize> = (0..30).collect();
    let k1 = Array2::from_shape_fn((n, n), |(i, j)| if (i < 30) == (j < 30) { 1.0 } else { 0.0 });
    let f = embspec::synthetic::normalize_rows(gaussian_matrix(n, 60, 3));
    let k2 = f.dot(&f.t());
    let cert = theorem1_certificate(k1.view(), k2.view(), &set).unwrap();
    assert!(cert.satisfied);
    assert_eq!(cert.eps1, 0.0);
    assert!(cert.lhs < 0.25 * cert.xi, "lhs {} xi {}", cert.lhs, cert.xi);
    let cor = corollary1_check(k1.view(), k2.view(), &set, 0).unwrap();
    assert!(cor.satisfied && cor.actual_tail_norm <= cor.bound);
}

#[test]
fn tail_bound_holds_whenever_the_gap_is_positive() {
    let mut applicable = 0;
    for seed in 0..200u64 {
        let (k1, k2, set) = trial(seed);
        match corollary1_check(k1.view(), k2.view(), &set, 0) {
            Ok(c) => {
                applicable += 1;
                assert!(c.gap > 0.0);
                assert!(c.satisfied, "seed {seed}: tail {} bound {}", c.actual_tail_norm, c.bound);
            }
            Err(Error::CorollaryInapplicable { gap }) => assert!(gap <= 0.0),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    assert!(applicable >= 20, "only {applicable} applicable trials");
}

#[test]
fn weaker_coupling_shrinks_the_tail_bound() {
    let n = 60;
    let set: Vec<usize> = (0..15).collect();
    let f = embspec::synthetic::normalize_rows(gaussian_matrix(n, 40, 8));
    let k2 = f.dot(&f.t());
    let mut last = f64::INFINITY;
    for c in [0.3, 0.2, 0.1, 0.0] {
        // Block rows share e₀; the others lean on e₀ by `c`, so cross-block
        // kernel values equal `c`.
        let feats = Array2::from_shape_fn((n, n + 1), |(i, j)| match (i < 15, j) {
            (true, 0) => 1.0,
            (false, 0) => c,
            (false, j) if j == i + 1 => (1.0f64 - c * c).sqrt(),
            _ => 0.0,
        });
        let k1 = feats.dot(&feats.t());
        let cor = corollary1_check(k1.view(), k2.view(), &set, 0).unwrap();
        assert!(cor.bound < last);
        last = cor.bound;
    }
}

/// Mutual information of two labelings from the contingency table.
fn mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut t = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        t[x][y] += 1.0;
    }
    let ra: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let rb: Vec<f64> = (0..kb).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut s = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            if t[i][j] > 0.0 {
                s += t[i][j] / n * (n * t[i][j] / (ra[i] * rb[j])).ln();
            }
        }
    }
    s
}

fn entropy(a: &[usize]) -> f64 {
    let n = a.len() as f64;
    let k = a.iter().max().unwrap() + 1;
    (0..k)
        .map(|c| a.iter().filter(|&&x| x == c).count() as f64 / n)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        out(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

#[test]
fn expected_mutual_information_matches_permutation_average() {
    let cases: [(&[usize], &[usize]); 3] = [
        (&[0, 0, 1, 1, 2, 2, 2], &[0, 1, 1, 0, 0, 1, 1]),
        (&[0, 0, 0, 1, 1, 2, 3], &[1, 1, 0, 0, 2, 2, 2]),
        (&[0, 1, 0, 1, 0, 1, 0, 1], &[0, 0, 0, 0, 1, 1, 2, 2]),
    ];
    for (a, b) in cases {
        let mut total = 0.0;
        let mut count = 0.0;
        let mut perm = b.to_vec();
        permutations(&mut perm, 0, &mut |p| {
            total += mi(a, p);
            count += 1.0;
        });
        let emi = total / count;
        let want = (mi(a, b) - emi) / (0.5 * (entropy(a) + entropy(b)) - emi);
        assert_abs_diff_eq!(ami(a, b).unwrap(), want, epsilon = 1e-10);
        assert_abs_diff_eq!(nmi(a, b).unwrap(), mi(a, b) / (0.5 * (entropy(a) + entropy(b))), epsilon = 1e-12);
    }
}

#[test]
fn independent_labelings_score_near_zero() {
    let mut rng = StdRng::seed_from_u64(99);
    let mut total = 0.0;
    for _ in 0..20 {
        let a: Vec<usize> = (0..1000).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<usize> = (0..1000).map(|_| rng.random_range(0..5)).collect();
        total += ami(&a, &b).unwrap();
    }
    assert!((total / 20.0).abs() <= 0.05);
}

#[test]
fn nmi_dominates_ami_on_independent_partitions() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..20 {
        let a: Vec<usize> = (0..300).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<usize> = (0..300).map(|_| rng.random_range(0..12)).collect();
        let (x, y) = (nmi(&a, &b).unwrap(), ami(&a, &b).unwrap());
        assert!((0.0..=1.0).contains(&x) && x >= y);
        assert_abs_diff_eq!(ami(&b, &a).unwrap(), y, epsilon = 1e-12);
        let relabeled: Vec<usize> = b.iter().map(|&l| (l * 5 + 3) % 12).collect();
        assert_abs_diff_eq!(ami(&a, &relabeled).unwrap(), y, epsilon = 1e-12);
    }
}

#[test]
fn kmeans_finds_the_optimal_two_pair_split() {
    let x = ndarray::array![[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.0, 10.1]];
    for labels in kmeans(x.view(), 2, 20, 4).unwrap() {
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }
    let fits = kmeans_fits(x.view(), 4, 3, 1).unwrap();
    assert!(fits.iter().all(|f| f.inertia == 0.0));
    assert_eq!(kmeans(x.view(), 2, 5, 8).unwrap(), kmeans(x.view(), 2, 5, 8).unwrap());
    assert!(kmeans(x.view(), 5, 1, 0).is_err());
}

#[test]
fn blob_labels_are_recovered_by_kmeans() {
    let (x, truth) = gaussian_blobs(400, 5, 4, 12.0, 3);
    let fits = kmeans(x.view(), 4, 5, 2).unwrap();
    let best = fits.iter().map(|l| ami(l, &truth).unwrap()).fold(f64::MIN, f64::max);
    assert!(best > 0.95, "best ami {best}");
}

#[test]
fn more_features_shrink_the_residual() {
    let mut decreases = 0;
    for seed in 0..10u64 {
        let (a, _) = gaussian_blobs(150, 4, 3, 3.0, seed);
        let (b, _) = gaussian_blobs(150, 6, 5, 3.0, seed + 100);
        let p = pair(
            EmbeddingSet::with_default_ids(a).unwrap(),
            EmbeddingSet::with_default_ids(b).unwrap(),
        )
        .unwrap();
        let small = rff_residual(&p, 2.0, 3.0, 200, 0.05, seed).unwrap();
        let large = rff_residual(&p, 2.0, 3.0, 400, 0.05, seed).unwrap();
        assert!(small.residual_sum >= 0.0 && large.residual_sum >= 0.0);
        if large.residual_sum < small.residual_sum {
            decreases += 1;
        }
    }
    assert!(decreases >= 8, "{decreases}/10");
}
