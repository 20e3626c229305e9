//! Information-theoretic agreement between two partitions.
//!
//! Entropies use natural logarithms. The adjusted score subtracts the mutual
//! information expected between random partitions with the same cluster
//! sizes (hypergeometric model) and normalizes by the arithmetic mean of the
//! two entropies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

struct Table {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn table(a: &[usize], b: &[usize]) -> Result<Table> {
    if a.len() != b.len() {
        return Err(Error::CountMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(Error::invalid("empty labelings"));
    }
    let (ra, ka) = relabel(a);
    let (rb, kb) = relabel(b);
    let mut cells = vec![vec![0usize; kb]; ka];
    for (&i, &j) in ra.iter().zip(&rb) {
        cells[i][j] += 1;
    }
    let rows = cells.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
    Ok(Table {
        n: a.len(),
        rows,
        cols,
        cells,
    })
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

fn mutual_info(t: &Table) -> f64 {
    let nf = t.n as f64;
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (nf * c / (t.rows[i] as f64 * t.cols[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// `ln k!` for `k = 0..=n`.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

fn expected_mutual_info(t: &Table) -> f64 {
    let n = t.n;
    let nf = n as f64;
    let lf = log_factorials(n);
    let mut emi = 0.0;
    for &a in &t.rows {
        for &b in &t.cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let base = lf[a] + lf[b] + lf[n - a] + lf[n - b] - lf[n];
            for k in lo..=hi {
                let kf = k as f64;
                let term = kf / nf * (nf * kf / (a as f64 * b as f64)).ln();
                let logp = base - lf[k] - lf[a - k] - lf[b - k] - lf[n + k - a - b];
                emi += term * logp.exp();
            }
        }
    }
    emi
}

fn same_partition(t: &Table) -> bool {
    t.cells.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
        && (0..t.cols.len()).all(|j| t.cells.iter().filter(|r| r[j] > 0).count() == 1)
}

/// Adjusted mutual information with arithmetic-mean normalization.
///
/// When the normalizer vanishes (for instance both labelings have a single
/// cluster) the result is 1 for partitions equal up to relabeling and 0
/// otherwise.
pub fn ami(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let t = table(labels_a, labels_b)?;
    let ha = entropy(&t.rows, t.n);
    let hb = entropy(&t.cols, t.n);
    let mi = mutual_info(&t);
    let emi = expected_mutual_info(&t);
    let denom = 0.5 * (ha + hb) - emi;
    if denom.abs() <= 1e-12 * (0.5 * (ha + hb)).max(1.0) {
        return Ok(if same_partition(&t) { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

/// Normalized mutual information, `MI / mean(H_a, H_b)`.
///
/// Two single-cluster labelings give 1; a single-cluster labeling against
/// anything else gives 0.
pub fn nmi(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let t = table(labels_a, labels_b)?;
    let ha = entropy(&t.rows, t.n);
    let hb = entropy(&t.cols, t.n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mean = 0.5 * (ha + hb);
    Ok((mutual_info(&t) / mean).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabeled_copy_scores_one() {
        let a = [0, 0, 1, 1, 2, 2, 2];
        let b = [5, 5, 3, 3, 9, 9, 9];
        assert!((ami(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_conventions() {
        let one = [4, 4, 4, 4];
        let two = [0, 0, 1, 1];
        assert_eq!(ami(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &two).unwrap(), 0.0);
        assert_eq!(ami(&one, &two).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(ami(&[0, 1], &[0]).is_err());
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn mutual_info_from_table() {
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        let t = table(&a, &b).unwrap();
        let mi = mutual_info(&t);
        // Contingency table [[2, 1, 0], [0, 1, 2]].
        let expect_mi = 2.0 * (2.0 / 6.0) * (6.0 * 2.0 / (3.0 * 2.0f64)).ln()
            + 2.0 * (1.0 / 6.0) * (6.0 * 1.0 / (3.0 * 2.0f64)).ln();
        assert!((mi - expect_mi).abs() < 1e-12);
        let v = ami(&a, &b).unwrap();
        assert!(v < 1.0 && v > -1.0);
    }
}
