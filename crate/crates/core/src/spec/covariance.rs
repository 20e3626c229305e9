use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, CowArray, Ix2};

use crate::error::{Error, Result};
use crate::io::PairedDataset;
use crate::kernels::FeatureMap;

/// Rows of two aligned embeddings, served in contiguous ranges.
///
/// [`PairedDataset`] is the in-memory implementation; other sources can
/// generate or stream rows so that accumulation never holds all `n` samples.
pub trait PairedSource: Sync {
    fn n(&self) -> usize;
    fn widths(&self) -> (usize, usize);
    fn rows(&self, range: Range<usize>) -> Result<(CowArray<'_, f64, Ix2>, CowArray<'_, f64, Ix2>)>;
    fn id(&self, index: usize) -> String;
}

impl PairedSource for PairedDataset {
    fn n(&self) -> usize {
        PairedDataset::n(self)
    }

    fn widths(&self) -> (usize, usize) {
        (self.a().d(), self.b().d())
    }

    fn rows(&self, range: Range<usize>) -> Result<(CowArray<'_, f64, Ix2>, CowArray<'_, f64, Ix2>)> {
        let a = self.a().data().slice_move(ndarray::s![range.clone(), ..]);
        let b = self.b().data().slice_move(ndarray::s![range, ..]);
        Ok((a.into(), b.into()))
    }

    fn id(&self, index: usize) -> String {
        self.ids()[index].clone()
    }
}

/// `C1 = (1/n) Σ φ₁φ₁ᵀ`, `C2 = (1/n) Σ φ₂φ₂ᵀ`, `C12 = (1/n) Σ φ₁φ₂ᵀ`.
#[derive(Clone, Debug)]
pub struct DifferentialCovariance {
    pub c1: Array2<f64>,
    pub c2: Array2<f64>,
    pub c12: Array2<f64>,
    pub n_seen: usize,
}

impl DifferentialCovariance {
    pub fn d1(&self) -> usize {
        self.c1.nrows()
    }

    pub fn d2(&self) -> usize {
        self.c2.nrows()
    }
}

/// Running sums of feature outer products.
///
/// Each pushed chunk is folded in with three matrix products. The products
/// for `C1`, `C2` and `C12` run concurrently but each one sums its chunks in
/// push order, so results do not depend on scheduling.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator {
    s1: Array2<f64>,
    s2: Array2<f64>,
    s12: Array2<f64>,
    n_seen: usize,
}

impl CovarianceAccumulator {
    pub fn new(d1: usize, d2: usize) -> Self {
        CovarianceAccumulator {
            s1: Array2::zeros((d1, d1)),
            s2: Array2::zeros((d2, d2)),
            s12: Array2::zeros((d1, d2)),
            n_seen: 0,
        }
    }

    /// Adds a chunk of mapped features; row `i` of both views is one sample.
    pub fn push(&mut self, f1: ArrayView2<f64>, f2: ArrayView2<f64>) -> Result<()> {
        if f1.nrows() != f2.nrows() {
            return Err(Error::CountMismatch {
                a: f1.nrows(),
                b: f2.nrows(),
            });
        }
        if f1.ncols() != self.s1.nrows() || f2.ncols() != self.s2.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.s1.nrows() + self.s2.nrows(),
                found: f1.ncols() + f2.ncols(),
            });
        }
        let CovarianceAccumulator { s1, s2, s12, .. } = self;
        rayon::join(
            || general_mat_mul(1.0, &f1.t(), &f1, 1.0, s1),
            || {
                rayon::join(
                    || general_mat_mul(1.0, &f2.t(), &f2, 1.0, s2),
                    || general_mat_mul(1.0, &f1.t(), &f2, 1.0, s12),
                )
            },
        );
        self.n_seen += f1.nrows();
        Ok(())
    }

    pub fn n_seen(&self) -> usize {
        self.n_seen
    }

    /// Scales by `1/n` and symmetrizes the diagonal blocks.
    pub fn finish(self) -> Result<DifferentialCovariance> {
        if self.n_seen == 0 {
            return Err(Error::invalid("no samples accumulated"));
        }
        let inv = 1.0 / self.n_seen as f64;
        let sym = |s: Array2<f64>| {
            let t = s.t().to_owned();
            (s + t) * (0.5 * inv)
        };
        Ok(DifferentialCovariance {
            c1: sym(self.s1),
            c2: sym(self.s2),
            c12: self.s12 * inv,
            n_seen: self.n_seen,
        })
    }
}

/// Maps a chunk of raw rows and checks the features are finite.
pub(crate) fn map_chunk<S: PairedSource + ?Sized>(
    source: &S,
    range: Range<usize>,
    map1: &FeatureMap,
    map2: &FeatureMap,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let start = range.start;
    let (a, b) = source.rows(range)?;
    let f1 = map1.apply_rows(a.view())?;
    let f2 = map2.apply_rows(b.view())?;
    for (f, _) in [(&f1, 1), (&f2, 2)] {
        for (i, row) in f.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature {
                    id: source.id(start + i),
                });
            }
        }
    }
    Ok((f1, f2))
}

pub(crate) fn check_maps<S: PairedSource + ?Sized>(
    source: &S,
    map1: &FeatureMap,
    map2: &FeatureMap,
) -> Result<()> {
    let (w1, w2) = source.widths();
    if map1.input_dim() != w1 {
        return Err(Error::DimensionMismatch {
            expected: w1,
            found: map1.input_dim(),
        });
    }
    if map2.input_dim() != w2 {
        return Err(Error::DimensionMismatch {
            expected: w2,
            found: map2.input_dim(),
        });
    }
    Ok(())
}

/// Single streaming pass computing the differential covariance blocks.
pub fn accumulate(
    paired: &PairedDataset,
    map1: &FeatureMap,
    map2: &FeatureMap,
    chunk_size: usize,
) -> Result<DifferentialCovariance> {
    accumulate_source(paired, map1, map2, chunk_size)
}

/// [`accumulate`] over any [`PairedSource`]. Memory use is the three
/// accumulators plus one chunk of features.
pub fn accumulate_source<S: PairedSource + ?Sized>(
    source: &S,
    map1: &FeatureMap,
    map2: &FeatureMap,
    chunk_size: usize,
) -> Result<DifferentialCovariance> {
    if chunk_size == 0 {
        return Err(Error::invalid("chunk_size must be at least 1"));
    }
    check_maps(source, map1, map2)?;
    let n = source.n();
    let mut acc = CovarianceAccumulator::new(map1.output_dim(), map2.output_dim());
    let mut start = 0;
    while start < n {
        let end = (start + chunk_size).min(n);
        let (f1, f2) = map_chunk(source, start..end, map1, map2)?;
        acc.push(f1.view(), f2.view())?;
        start = end;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{pair, EmbeddingSet};
    use crate::kernels::{build_feature_map, KernelSpec};
    use ndarray::array;

    #[test]
    fn two_sample_linear_example() {
        let a = EmbeddingSet::with_default_ids(array![[1.0], [1.0]]).unwrap();
        let b = EmbeddingSet::with_default_ids(array![[1.0], [-1.0]]).unwrap();
        let p = pair(a, b).unwrap();
        let lin = build_feature_map(&KernelSpec::linear(), 1).unwrap();
        let cov = accumulate(&p, &lin, &lin, 1).unwrap();
        assert_eq!(cov.c1, array![[1.0]]);
        assert_eq!(cov.c2, array![[1.0]]);
        assert_eq!(cov.c12, array![[0.0]]);
        assert_eq!(cov.n_seen, 2);
    }

    #[test]
    fn chunking_does_not_change_the_sums() {
        let data = Array2::from_shape_fn((37, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let set = EmbeddingSet::with_default_ids(data).unwrap();
        let p = pair(set.clone(), set).unwrap();
        let lin = build_feature_map(&KernelSpec::linear(), 3).unwrap();
        let whole = accumulate(&p, &lin, &lin, 1000).unwrap();
        let pieces = accumulate(&p, &lin, &lin, 5).unwrap();
        for (x, y) in whole.c1.iter().zip(pieces.c1.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(whole.c1, whole.c2);
    }

    #[test]
    fn map_width_is_checked() {
        let set = EmbeddingSet::with_default_ids(Array2::ones((3, 2))).unwrap();
        let p = pair(set.clone(), set).unwrap();
        let wrong = build_feature_map(&KernelSpec::linear(), 3).unwrap();
        let right = build_feature_map(&KernelSpec::linear(), 2).unwrap();
        assert!(accumulate(&p, &wrong, &right, 4).is_err());
        assert!(accumulate(&p, &right, &right, 0).is_err());
    }
}
