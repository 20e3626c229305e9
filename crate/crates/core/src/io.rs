//! Embedding sets, label vectors and their on-disk formats.
//!
//! Two embedding formats are supported:
//!
//! * CSV: one sample per line, first column the sample id, remaining columns
//!   the features. A header line is optional and detected by its first
//!   feature cell failing to parse as a number. Cells are parsed with `.` as
//!   the decimal separator regardless of locale.
//! * `SPECEMB1` binary: the 8 magic bytes `SPECEMB1`, little-endian `u32` n,
//!   little-endian `u32` d, then `n * d` little-endian `f32` values in
//!   row-major order. Sample ids live in an optional sidecar text file named
//!   `<path>.ids`, one per line; without it the ids are `"0".."n-1"`.
//!
//! Features are held as `f64` in memory whatever the on-disk precision.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub const SPECEMB1_MAGIC: &[u8; 8] = b"SPECEMB1";

/// On-disk layout of an embedding file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Csv,
    Binary,
}

impl EmbeddingFormat {
    /// Picks the format from the file's leading bytes.
    pub fn detect(path: &Path) -> Result<Self> {
        let mut head = [0u8; 8];
        let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut read = 0;
        while read < head.len() {
            match std::io::Read::read(&mut file, &mut head[read..]) {
                Ok(0) => break,
                Ok(k) => read += k,
                Err(e) => return Err(Error::io(path, e)),
            }
        }
        if read == 8 && &head == SPECEMB1_MAGIC {
            Ok(EmbeddingFormat::Binary)
        } else {
            Ok(EmbeddingFormat::Csv)
        }
    }
}

/// `n` samples embedded in `d` dimensions, with one unique id per sample.
///
/// Immutable once built; the feature matrix is shared, so clones are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    ids: Arc<Vec<String>>,
    data: Arc<Array2<f64>>,
}

impl EmbeddingSet {
    /// Validates and wraps a feature matrix. Requires `n >= 2`, `d >= 1`,
    /// finite values and unique ids.
    pub fn new(ids: Vec<String>, data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if ids.len() != n {
            return Err(Error::CountMismatch { a: ids.len(), b: n });
        }
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
        }
        if d < 1 {
            return Err(Error::invalid("feature width must be at least 1"));
        }
        let mut seen = HashSet::with_capacity(n);
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    row,
                    id: id.clone(),
                });
            }
        }
        for (row, values) in data.rows().into_iter().enumerate() {
            if let Some(column) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    id: ids[row].clone(),
                    column,
                });
            }
        }
        Ok(EmbeddingSet {
            ids: Arc::new(ids),
            data: Arc::new(data),
        })
    }

    /// Like [`EmbeddingSet::new`] with ids `"0".."n-1"`.
    pub fn with_default_ids(data: Array2<f64>) -> Result<Self> {
        let ids = default_ids(data.nrows());
        Self::new(ids, data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Reorders samples: row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let ids = order.iter().map(|&i| self.ids[i].clone()).collect();
        let data = self.data.select(ndarray::Axis(0), order);
        Self::new(ids, data)
    }
}

pub(crate) fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Two embeddings of the same samples, rows aligned by id.
#[derive(Clone, Debug)]
pub struct PairedDataset {
    a: EmbeddingSet,
    b: EmbeddingSet,
}

impl PairedDataset {
    pub fn a(&self) -> &EmbeddingSet {
        &self.a
    }

    pub fn b(&self) -> &EmbeddingSet {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn ids(&self) -> &[String] {
        self.a.ids()
    }

    /// The same pair with the roles of the two embeddings exchanged.
    pub fn swapped(&self) -> PairedDataset {
        PairedDataset {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }
}

/// Pairs two embedding sets; ids must agree position by position.
pub fn pair(a: EmbeddingSet, b: EmbeddingSet) -> Result<PairedDataset> {
    if a.n() != b.n() {
        return Err(Error::CountMismatch { a: a.n(), b: b.n() });
    }
    if let Some(index) = a.ids().iter().zip(b.ids()).position(|(x, y)| x != y) {
        return Err(Error::IdMismatch {
            index,
            a: a.ids()[index].clone(),
            b: b.ids()[index].clone(),
        });
    }
    Ok(PairedDataset { a, b })
}

/// Non-negative class labels, one per sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Self {
        LabelVector { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Checks the length against a paired dataset.
    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::CountMismatch {
                a: self.labels.len(),
                b: n,
            });
        }
        Ok(())
    }
}

/// Reads integer labels, one per line. Lines may also be `id,label`.
pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cell = line.rsplit(',').next().unwrap_or(line).trim();
        let value: i64 = cell.parse().map_err(|_| Error::Malformed {
            row,
            message: format!("label {cell:?} is not an integer"),
        })?;
        if value < 0 {
            return Err(Error::Malformed {
                row,
                message: format!("label {value} is negative"),
            });
        }
        labels.push(value as usize);
    }
    Ok(LabelVector::new(labels))
}

/// Loads an embedding set in the given format.
pub fn load_embedding_set(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    match format {
        EmbeddingFormat::Csv => load_csv(path),
        EmbeddingFormat::Binary => load_binary(path),
    }
}

/// Loads an embedding set, detecting the format from the file contents.
pub fn load_embedding_auto(path: &Path) -> Result<EmbeddingSet> {
    load_embedding_set(path, EmbeddingFormat::detect(path)?)
}

fn load_csv(path: &Path) -> Result<EmbeddingSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_content_line = true;
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if first_content_line {
            first_content_line = false;
            if cells.len() >= 2 && cells[1].parse::<f64>().is_err() {
                continue;
            }
        }
        let row = ids.len();
        if cells.len() < 2 {
            return Err(Error::Malformed {
                row,
                message: format!("line {}: expected an id and at least one value", line_no + 1),
            });
        }
        let found = cells.len() - 1;
        match width {
            None => width = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::RowLength {
                    row,
                    expected,
                    found,
                })
            }
            _ => {}
        }
        let id = cells[0].to_string();
        for (column, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Malformed {
                row,
                message: format!("value {cell:?} in column {column} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, id, column });
            }
            values.push(v);
        }
        ids.push(id);
    }
    let d = width.unwrap_or(0);
    let data = Array2::from_shape_vec((ids.len(), d), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    EmbeddingSet::new(ids, data)
}

/// Path of the id sidecar that accompanies a binary embedding file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

fn load_binary(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (n, d, data) = decode_specemb1(&bytes)?;
    let sidecar = sidecar_path(path);
    let ids = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let ids: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
        let ids: Vec<String> = match ids.iter().rposition(|s| !s.is_empty()) {
            Some(last) => ids[..=last].to_vec(),
            None => Vec::new(),
        };
        if ids.len() != n {
            return Err(Error::Malformed {
                row: ids.len().min(n),
                message: format!("sidecar lists {} ids for {n} samples", ids.len()),
            });
        }
        ids
    } else {
        default_ids(n)
    };
    let data = Array2::from_shape_vec((n, d), data).map_err(|e| Error::invalid(e.to_string()))?;
    EmbeddingSet::new(ids, data)
}

/// Decodes a `SPECEMB1` buffer into `(n, d, row-major values)`.
pub fn decode_specemb1(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != SPECEMB1_MAGIC {
        return Err(Error::Malformed {
            row: 0,
            message: "missing SPECEMB1 header".into(),
        });
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Malformed {
            row: 0,
            message: format!("header n={n}, d={d} overflows"),
        })?;
    if body.len() != expected {
        let complete_rows = if d == 0 { 0 } else { body.len() / (4 * d) };
        return Err(Error::RowLength {
            row: complete_rows,
            expected: d,
            found: (body.len() / 4).saturating_sub(complete_rows * d),
        });
    }
    let mut values = Vec::with_capacity(n * d);
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: k / d.max(1),
                id: (k / d.max(1)).to_string(),
                column: k % d.max(1),
            });
        }
        values.push(v as f64);
    }
    Ok((n, d, values))
}

/// Encodes a matrix as `SPECEMB1`. Values are narrowed to `f32`.
pub fn encode_specemb1(data: ArrayView2<f64>) -> Result<Vec<u8>> {
    let (n, d) = data.dim();
    let n32 = u32::try_from(n).map_err(|_| Error::invalid("too many rows for SPECEMB1"))?;
    let d32 = u32::try_from(d).map_err(|_| Error::invalid("too many columns for SPECEMB1"))?;
    let mut out = Vec::with_capacity(16 + 4 * n * d);
    out.extend_from_slice(SPECEMB1_MAGIC);
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for row in data.rows() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes an embedding set as `SPECEMB1`, plus an id sidecar unless the ids
/// are the defaults.
pub fn write_embedding_binary(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let bytes = encode_specemb1(set.data())?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    if set.ids() != default_ids(set.n()).as_slice() {
        let mut text = set.ids().join("\n");
        text.push('\n');
        fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    } else if sidecar.exists() {
        fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    }
    Ok(())
}

/// Writes an embedding set as CSV without a header. Values use Rust's
/// shortest round-trip formatting.
pub fn write_embedding_csv(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, row) in set.ids().iter().zip(set.data().rows()) {
        write!(w, "{id}").map_err(|e| Error::io(path, e))?;
        for v in row {
            write!(w, ",{v:?}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, contents: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn csv_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"s1,1.0,0.0\ns2,0.0,1.0\n");
        let set = load_embedding_set(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!((set.n(), set.d()), (2, 2));
        assert_eq!(set.ids(), &["s1", "s2"]);
        assert_eq!(set.data(), array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn csv_header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"id,f0,f1\ns1,1.0,0.5\ns2,-2e-3,1\n");
        let set = load_embedding_auto(&p).unwrap();
        assert_eq!((set.n(), set.d()), (2, 2));
        assert_eq!(set.row(1)[0], -2e-3);
    }

    #[test]
    fn csv_nan_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"s1,1.0,0.0\ns2,NaN,1.0\ns3,1,1\n");
        match load_embedding_set(&p, EmbeddingFormat::Csv) {
            Err(Error::NonFinite { row, id, column }) => {
                assert_eq!((row, id.as_str(), column), (1, "s2", 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_row_and_duplicate_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"s1,1.0,0.0\ns2,1.0\n");
        assert!(matches!(
            load_embedding_set(&p, EmbeddingFormat::Csv),
            Err(Error::RowLength {
                row: 1,
                expected: 2,
                found: 1
            })
        ));
        let p = write(&dir, "b.csv", b"s1,1.0\ns2,2.0\ns1,3.0\n");
        assert!(matches!(
            load_embedding_set(&p, EmbeddingFormat::Csv),
            Err(Error::DuplicateId { row: 2, .. })
        ));
    }

    #[test]
    fn csv_locale_formats_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"s1;1.5\ns2;2.5\n");
        assert!(load_embedding_set(&p, EmbeddingFormat::Csv).is_err());
        let p = write(&dir, "b.csv", b"s1,1.5\ns2,2\xc2\xb75\n");
        assert!(matches!(
            load_embedding_set(&p, EmbeddingFormat::Csv),
            Err(Error::Malformed { row: 1, .. })
        ));
    }

    #[test]
    fn binary_three_by_four() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = SPECEMB1_MAGIC.to_vec();
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        for k in 0..12 {
            bytes.extend_from_slice(&(k as f32 * 0.5).to_le_bytes());
        }
        let p = write(&dir, "a.bin", &bytes);
        assert_eq!(EmbeddingFormat::detect(&p).unwrap(), EmbeddingFormat::Binary);
        let set = load_embedding_set(&p, EmbeddingFormat::Binary).unwrap();
        assert_eq!((set.n(), set.d()), (3, 4));
        assert_eq!(set.ids(), &["0", "1", "2"]);
        assert_eq!(set.row(2)[3], 5.5);
    }

    #[test]
    fn binary_truncated_body() {
        let mut bytes = SPECEMB1_MAGIC.to_vec();
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 4 * 10]);
        assert!(matches!(
            decode_specemb1(&bytes),
            Err(Error::RowLength { row: 2, .. })
        ));
        assert!(decode_specemb1(b"SPECEMB0").is_err());
    }

    #[test]
    fn binary_sidecar_ids() {
        let dir = tempfile::tempdir().unwrap();
        let set = EmbeddingSet::new(
            vec!["x".into(), "y".into()],
            array![[1.0, 2.0], [3.0, 4.0]],
        )
        .unwrap();
        let p = dir.path().join("e.bin");
        write_embedding_binary(&set, &p).unwrap();
        assert!(sidecar_path(&p).exists());
        let back = load_embedding_auto(&p).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn pairing() {
        let a = EmbeddingSet::new(vec!["s1".into(), "s2".into()], array![[1.0], [2.0]]).unwrap();
        let b = EmbeddingSet::new(
            vec!["s1".into(), "s2".into()],
            array![[1.0, 0.0], [2.0, 1.0]],
        )
        .unwrap();
        let p = pair(a.clone(), b).unwrap();
        assert_eq!(p.n(), 2);

        let swapped =
            EmbeddingSet::new(vec!["s2".into(), "s1".into()], array![[1.0], [2.0]]).unwrap();
        assert!(matches!(
            pair(a.clone(), swapped),
            Err(Error::IdMismatch { index: 0, .. })
        ));

        let five = EmbeddingSet::with_default_ids(Array2::zeros((5, 1))).unwrap();
        let four = EmbeddingSet::with_default_ids(Array2::zeros((4, 1))).unwrap();
        assert!(matches!(
            pair(five, four),
            Err(Error::CountMismatch { a: 5, b: 4 })
        ));
    }

    #[test]
    fn invariants_enforced() {
        assert!(EmbeddingSet::with_default_ids(Array2::zeros((1, 3))).is_err());
        assert!(EmbeddingSet::with_default_ids(Array2::zeros((3, 0))).is_err());
        assert!(EmbeddingSet::with_default_ids(array![[1.0], [f64::INFINITY]]).is_err());
    }

    #[test]
    fn labels_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.txt", b"0\n2\ns3,1\n");
        assert_eq!(load_labels(&p).unwrap().labels(), &[0, 2, 1]);
        let p = write(&dir, "bad.txt", b"0\n-1\n");
        assert!(load_labels(&p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn binary_round_trip_is_bit_exact(
            n in 2usize..12,
            d in 1usize..6,
            seed in proptest::collection::vec(-1e6f32..1e6f32, 72),
        ) {
            let values: Vec<f64> = (0..n * d).map(|k| seed[k % seed.len()] as f64).collect();
            let set = EmbeddingSet::with_default_ids(Array2::from_shape_vec((n, d), values).unwrap()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.bin");
            write_embedding_binary(&set, &p).unwrap();
            let once = load_embedding_auto(&p).unwrap();
            let twice = load_embedding_auto(&p).unwrap();
            prop_assert!(once.data().iter().zip(set.data().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert_eq!(once, twice);
        }
    }
}
