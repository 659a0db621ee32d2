//! Dense row-major matrices and the trace functionals the estimators use.
//!
//! Every trace term in the shrinkage formulas has the form `tr(A Bᵀ)`, which
//! is the entrywise (Frobenius) inner product. These are computed as flat
//! sums over the storage and never by forming the product `A Bᵀ`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::RngStream;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Dimension {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },

    #[error("entry storage has length {len}, expected {rows}x{cols}")]
    StorageLength { rows: usize, cols: usize, len: usize },

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("could not construct a positive definite root: {0}")]
    Construction(String),

    #[error("malformed matrix file at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Real `rows x cols` matrix stored row-major. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::StorageLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: idx / cols,
                col: idx % cols,
                value: data[idx],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(MatrixError::Dimension {
                    expected_rows: r,
                    expected_cols: c,
                    rows: r,
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    /// Build from a generator closure. Panics if the closure yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("generator produced an invalid matrix")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        assert!(value.is_finite());
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        Self::from_fn(size, size, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn same_shape(&self, other: &Self) -> Result<(), MatrixError> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(MatrixError::Dimension {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            })
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.rows, self.cols, data).expect("map produced a non-finite entry")
    }

    /// `a * self + b * other`, entrywise.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self, MatrixError> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::Dimension {
                expected_rows: self.cols,
                expected_cols: other.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        // SAFETY: the slices hold exactly m*k, k*n and m*n elements and the
        // strides describe contiguous row-major layouts of those shapes.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                other.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Self::new(m, n, out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        self.row_iter().map(|row| dot(row, x)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Sum of all entries, i.e. `tr(A Uᵀ)` for the all-ones `U`.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, MatrixError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(std::io::BufReader::new(file))
    }

    /// Parses the plain matrix format: one row per line, comma separated, no header.
    pub fn read_csv_from(reader: impl BufRead) -> Result<Self, MatrixError> {
        let mut rows = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| MatrixError::Parse {
                        line: idx + 1,
                        reason: format!("{tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if first != row.len() {
                    return Err(MatrixError::Parse {
                        line: idx + 1,
                        reason: format!("expected {first} columns, found {}", row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(MatrixError::Parse {
                line: 0,
                reason: "no rows".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), MatrixError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        for row in self.row_iter() {
            let mut first = true;
            for v in row {
                if !first {
                    out.write_all(b",")?;
                }
                first = false;
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.rows, self.cols)?;
        if self.data.len() <= 36 {
            f.debug_list().entries(self.row_iter()).finish()
        } else {
            write!(f, "[..]")
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `tr(A Bᵀ) = Σᵢⱼ aᵢⱼ bᵢⱼ`.
pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64, MatrixError> {
    a.same_shape(b)?;
    Ok(dot(&a.data, &b.data))
}

/// `tr(A Aᵀ)`.
pub fn frobenius_norm_sq(a: &DenseMatrix) -> f64 {
    dot(&a.data, &a.data)
}

/// How a symmetric positive-definite noise root `R` (with `Σ = R²`) is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// `R = σ I`.
    IdentityScaled { sigma: f64 },
    /// `R = diag(d)` with `d` evenly spaced over `[low, high]`.
    Diagonal { low: f64, high: f64 },
    /// Dense `R = c (I + s G Gᵀ)` from a Gaussian `size x rank` factor `G`,
    /// with `s` chosen so that the condition number is at most
    /// [`MAX_CONDITION`] and `c` so that `(1/size) tr(R²) = 1`.
    DenseWellConditioned { rank: usize },
}

pub const MAX_CONDITION: f64 = 100.0;

impl Default for CovarianceSpec {
    fn default() -> Self {
        CovarianceSpec::DenseWellConditioned { rank: 8 }
    }
}

/// Symmetric positive-definite root `R`; `Σ := R·R`.
pub fn make_spd_root(
    size: usize,
    spec: &CovarianceSpec,
    rng: &mut RngStream,
) -> Result<DenseMatrix, MatrixError> {
    if size == 0 {
        return Err(MatrixError::Construction("size must be positive".into()));
    }
    match *spec {
        CovarianceSpec::IdentityScaled { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(MatrixError::Construction(format!(
                    "identity scale must be positive, got {sigma}"
                )));
            }
            Ok(DenseMatrix::identity(size).scale(sigma))
        }
        CovarianceSpec::Diagonal { low, high } => {
            if !(low > 0.0 && high >= low && high.is_finite()) {
                return Err(MatrixError::Construction(format!(
                    "diagonal range must satisfy 0 < low <= high, got [{low}, {high}]"
                )));
            }
            let entries: Vec<f64> = if size == 1 {
                vec![low]
            } else {
                let step = (high - low) / (size - 1) as f64;
                (0..size).map(|i| low + step * i as f64).collect()
            };
            Ok(DenseMatrix::diagonal(&entries))
        }
        CovarianceSpec::DenseWellConditioned { rank } => {
            let rank = rank.clamp(1, size);
            let factor: Vec<f64> = (0..size * rank)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let fro_sq = dot(&factor, &factor);
            if fro_sq <= 0.0 {
                return Err(MatrixError::Construction("zero Gaussian factor".into()));
            }
            // λ_max(G Gᵀ) <= ‖G‖²_F, so eigenvalues of I + s G Gᵀ lie in [1, MAX_CONDITION].
            let s = (MAX_CONDITION - 1.0) / fro_sq;
            let mut data = vec![0.0; size * size];
            for i in 0..size {
                let gi = &factor[i * rank..(i + 1) * rank];
                for j in i..size {
                    let gj = &factor[j * rank..(j + 1) * rank];
                    let mut v = s * dot(gi, gj);
                    if i == j {
                        v += 1.0;
                    }
                    data[i * size + j] = v;
                    data[j * size + i] = v;
                }
            }
            let mean_sq = dot(&data, &data) / size as f64;
            let c = mean_sq.sqrt().recip();
            data.iter_mut().for_each(|v| *v *= c);
            DenseMatrix::new(size, size, data)
        }
    }
}

/// `(1/size) tr(R²)` for a symmetric root `R`.
pub fn mean_trace_of_square(root: &DenseMatrix) -> f64 {
    frobenius_norm_sq(root) / root.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(frobenius_inner(&a, &DenseMatrix::identity(2)).unwrap(), 5.0);
        let ones = DenseMatrix::ones(2, 2);
        assert_eq!(frobenius_inner(&ones, &ones).unwrap(), 4.0);
        let swap = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(frobenius_inner(&DenseMatrix::identity(2), &swap).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_rejects_mismatched_shapes() {
        let err = frobenius_inner(&DenseMatrix::ones(2, 3), &DenseMatrix::ones(3, 2));
        assert!(matches!(err, Err(MatrixError::Dimension { .. })));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(frobenius_norm_sq(&DenseMatrix::zeros(3, 2)), 0.0);
        assert_eq!(frobenius_norm_sq(&DenseMatrix::ones(2, 3)), 6.0);
        assert_eq!(frobenius_norm_sq(&m(&[&[1.0, 2.0], &[3.0, 4.0]])), 30.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(MatrixError::NonFinite { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(MatrixError::StorageLength { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(0, 2, vec![]),
            Err(MatrixError::Empty { .. })
        ));
    }

    #[test]
    fn spd_root_identity_and_diagonal() {
        let mut rng = RngStream::new(1, 0);
        let r = make_spd_root(3, &CovarianceSpec::IdentityScaled { sigma: 2.0 }, &mut rng).unwrap();
        assert_eq!(r, DenseMatrix::identity(3).scale(2.0));
        assert_eq!(mean_trace_of_square(&r), 4.0);

        let r = make_spd_root(2, &CovarianceSpec::Diagonal { low: 1.0, high: 3.0 }, &mut rng).unwrap();
        assert_eq!(r, DenseMatrix::diagonal(&[1.0, 3.0]));
        assert_eq!(mean_trace_of_square(&r), 5.0);
    }

    #[test]
    fn dense_root_is_symmetric_positive_definite() {
        let mut rng = RngStream::new(7, 3);
        let r = make_spd_root(50, &CovarianceSpec::default(), &mut rng).unwrap();
        assert!(r.is_symmetric());
        assert!((mean_trace_of_square(&r) - 1.0).abs() < 1e-12);
        // quadratic-form probe
        let mut probe = RngStream::new(99, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..50).map(|_| probe.sample(StandardNormal)).collect();
            let rx = r.mul_vec(&x);
            assert!(dot(&x, &rx) > 0.0);
            // xᵀ R² x = ‖R x‖² > 0
            assert!(dot(&rx, &rx) > 0.0);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = m(&[&[0.1, -2.5e-17], &[3.0, 1.0 / 3.0]]);
        let mut buf = Vec::new();
        a.write_csv_to(&mut buf).unwrap();
        let back = DenseMatrix::read_csv_from(&buf[..]).unwrap();
        assert_eq!(a, back);
        assert!(DenseMatrix::read_csv_from(&b"1,2\n3\n"[..]).is_err());
        assert!(DenseMatrix::read_csv_from(&b""[..]).is_err());
    }

    #[test]
    fn matmul_matches_naive() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let b = DenseMatrix::from_fn(4, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        let c = a.matmul(&b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let want: f64 = (0..4).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    fn pair() -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(-10.0f64..10.0, r * c),
                proptest::collection::vec(-10.0f64..10.0, r * c),
            )
                .prop_map(move |(a, b)| {
                    (
                        DenseMatrix::new(r, c, a).unwrap(),
                        DenseMatrix::new(r, c, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn inner_is_symmetric((a, b) in pair()) {
            prop_assert_eq!(frobenius_inner(&a, &b).unwrap(), frobenius_inner(&b, &a).unwrap());
        }

        #[test]
        fn norm_expands_over_sum((a, b) in pair()) {
            let lhs = frobenius_norm_sq(&a.add(&b).unwrap());
            let rhs = frobenius_norm_sq(&a) + 2.0 * frobenius_inner(&a, &b).unwrap() + frobenius_norm_sq(&b);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (frobenius_norm_sq(&a) + frobenius_norm_sq(&b)).max(1.0));
        }

        #[test]
        fn cauchy_schwarz((a, b) in pair(), k in -3.0f64..3.0) {
            let ab = frobenius_inner(&a, &b).unwrap();
            prop_assert!(frobenius_norm_sq(&a) * frobenius_norm_sq(&b) >= ab * ab * (1.0 - 1e-12));
            // equality for proportional pairs
            let ka = a.scale(k);
            let aka = frobenius_inner(&a, &ka).unwrap();
            let lhs = frobenius_norm_sq(&a) * frobenius_norm_sq(&ka);
            prop_assert!((lhs - aka * aka).abs() <= 1e-9 * lhs.max(1e-300));
        }
    }
}
