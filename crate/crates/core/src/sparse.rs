//! Minimal sparse-matrix kernel: canonical CSR construction, sparse×sparse
//! product, transpose, row normalization and column extraction.
//!
//! Matrices are kept in canonical form at every constructor exit: row slices
//! sorted by column, duplicates summed, exact zeros dropped. Canonical form
//! makes structural equality meaningful, which the tests rely on.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Compressed sparse row matrix over f64 values.
///
/// Column access is served through a lazily built column-major mirror, so a
/// matrix that is only ever traversed row-wise never pays for it.
#[derive(Debug, Default)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    csc: OnceLock<CscMirror>,
}

#[derive(Debug, Clone)]
struct CscMirror {
    offsets: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl Clone for SparseMatrix {
    fn clone(&self) -> Self {
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            offsets: self.offsets.clone(),
            indices: self.indices.clone(),
            values: self.values.clone(),
            csc: OnceLock::new(),
        }
    }
}

impl PartialEq for SparseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.offsets == other.offsets
            && self.indices == other.indices
            && self.values == other.values
    }
}

impl SparseMatrix {
    /// Builds a canonical CSR matrix from (row, col, value) triplets.
    /// Duplicate coordinates are summed; entries that are (or sum to) zero
    /// are dropped.
    pub fn from_pairs(
        n_rows: usize,
        n_cols: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<SparseMatrix> {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in pairs {
            if r >= n_rows || c >= n_cols {
                return Err(Error::dimension(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            triplets.push((r, c, v));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut offsets = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, _) = triplets[i];
            let mut sum = 0.0;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                sum += triplets[i].2;
                i += 1;
            }
            if sum != 0.0 {
                indices.push(c);
                values.push(sum);
                offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
            csc: OnceLock::new(),
        })
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix::from_pairs(n, n, (0..n).map(|i| (i, i, 1.0))).expect("in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Exact sparse product via row-wise Gustavson accumulation.
    pub fn spmm(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::dimension(format!(
                "spmm: {}x{} times {}x{}",
                self.n_rows, self.n_cols, rhs.n_rows, rhs.n_cols
            )));
        }
        let mut offsets = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; rhs.n_cols];
        let mut touched: Vec<usize> = Vec::new();

        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rcols, rvals) = rhs.row(k);
                for (&j, &b) in rcols.iter().zip(rvals) {
                    if acc[j] == 0.0 && !touched.contains(&j) {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                let v = acc[j];
                acc[j] = 0.0;
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            touched.clear();
            offsets[i + 1] = indices.len();
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: rhs.n_cols,
            offsets,
            indices,
            values,
            csc: OnceLock::new(),
        })
    }

    /// Transpose in canonical CSR (counting sort over columns).
    pub fn transpose(&self) -> SparseMatrix {
        let mut offsets = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            offsets[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            offsets[c + 1] += offsets[c];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        let mut cursor = offsets.clone();
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let pos = cursor[c];
                indices[pos] = r;
                values[pos] = v;
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            offsets,
            indices,
            values,
            csc: OnceLock::new(),
        }
    }

    /// Scales every nonzero row to sum to one. All-zero rows stay all-zero.
    /// Values must be non-negative.
    pub fn row_normalize(&self) -> Result<SparseMatrix> {
        if let Some(v) = self.values.iter().find(|&&v| v < 0.0) {
            return Err(Error::consistency(format!(
                "row_normalize requires non-negative values, found {v}"
            )));
        }
        let mut values = self.values.clone();
        for r in 0..self.n_rows {
            let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
            let sum: f64 = values[lo..hi].iter().sum();
            if sum > 0.0 {
                for v in &mut values[lo..hi] {
                    *v /= sum;
                }
            }
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            offsets: self.offsets.clone(),
            indices: self.indices.clone(),
            values,
            csc: OnceLock::new(),
        })
    }

    fn csc(&self) -> &CscMirror {
        self.csc.get_or_init(|| {
            let mut offsets = vec![0usize; self.n_cols + 1];
            for &c in &self.indices {
                offsets[c + 1] += 1;
            }
            for c in 0..self.n_cols {
                offsets[c + 1] += offsets[c];
            }
            let mut rows = vec![0usize; self.nnz()];
            let mut values = vec![0.0f64; self.nnz()];
            let mut cursor = offsets.clone();
            for r in 0..self.n_rows {
                let (cols, vals) = self.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    let pos = cursor[c];
                    rows[pos] = r;
                    values[pos] = v;
                    cursor[c] += 1;
                }
            }
            CscMirror { offsets, rows, values }
        })
    }

    /// Nonzeros of column `j`, sorted by row.
    pub fn column(&self, j: usize) -> Result<Vec<(usize, f64)>> {
        if j >= self.n_cols {
            return Err(Error::dimension(format!(
                "column {j} out of range for {} columns",
                self.n_cols
            )));
        }
        let csc = self.csc();
        let (lo, hi) = (csc.offsets[j], csc.offsets[j + 1]);
        Ok(csc.rows[lo..hi]
            .iter()
            .copied()
            .zip(csc.values[lo..hi].iter().copied())
            .collect())
    }

    /// Maximum value in column `j` (0.0 for an empty column).
    pub fn column_max(&self, j: usize) -> f64 {
        let csc = self.csc();
        let (lo, hi) = (csc.offsets[j], csc.offsets[j + 1]);
        csc.values[lo..hi].iter().copied().fold(0.0, f64::max)
    }

    /// Row-major dense copy; intended for small matrices and diagnostics.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[r * self.n_cols + c] = v;
            }
        }
        dense
    }

    /// Writes the binary dump: little-endian `KGSM` header (version, dims,
    /// nnz) followed by offsets, indices and values.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"KGSM")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n_rows as u64).to_le_bytes())?;
        w.write_all(&(self.n_cols as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for &o in &self.offsets {
            w.write_all(&(o as u64).to_le_bytes())?;
        }
        for &i in &self.indices {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<SparseMatrix> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"KGSM" {
            return Err(Error::parse(0, "bad magic, expected KGSM"));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(Error::parse(0, format!("unsupported KGSM version {version}")));
        }
        let n_rows = read_u64(&mut r)? as usize;
        let n_cols = read_u64(&mut r)? as usize;
        let nnz = read_u64(&mut r)? as usize;
        let mut offsets = Vec::with_capacity(n_rows + 1);
        for _ in 0..=n_rows {
            offsets.push(read_u64(&mut r)? as usize);
        }
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            indices.push(read_u64(&mut r)? as usize);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            values.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        if offsets.len() != n_rows + 1 || *offsets.last().unwrap_or(&0) != nnz {
            return Err(Error::consistency("KGSM offsets inconsistent with nnz"));
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
            csc: OnceLock::new(),
        })
    }

    pub fn write_binary_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(file))
    }

    pub fn read_binary_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
        let file = std::fs::File::open(path)?;
        SparseMatrix::read_binary(std::io::BufReader::new(file))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent dense product used as the spmm oracle.
    fn dense_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for l in 0..k {
                let av = a[i * k + l];
                if av == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[i * m + j] += av * b[l * m + j];
                }
            }
        }
        out
    }

    #[test]
    fn from_pairs_sums_duplicates() {
        let m = SparseMatrix::from_pairs(2, 2, [(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 2.0);
    }

    #[test]
    fn from_pairs_drops_zeros() {
        let m = SparseMatrix::from_pairs(2, 2, [(1, 1, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 0);
        let cancel = SparseMatrix::from_pairs(2, 2, [(0, 1, 2.0), (0, 1, -2.0)]).unwrap();
        assert_eq!(cancel.nnz(), 0);
    }

    #[test]
    fn from_pairs_canonical_offsets() {
        let m = SparseMatrix::from_pairs(3, 2, [(2, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.offsets(), &[0, 1, 1, 2]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(2, 0), 1.0);
    }

    #[test]
    fn from_pairs_rejects_out_of_range() {
        assert!(SparseMatrix::from_pairs(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn spmm_identity_is_exact() {
        let m = SparseMatrix::from_pairs(3, 3, [(0, 1, 2.5), (1, 2, -1.0), (2, 0, 4.0)]).unwrap();
        let i = SparseMatrix::identity(3);
        assert_eq!(i.spmm(&m).unwrap(), m);
        assert_eq!(m.spmm(&i).unwrap(), m);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let a = SparseMatrix::identity(3);
        let b = SparseMatrix::identity(2);
        assert!(a.spmm(&b).is_err());
    }

    #[test]
    fn transpose_examples() {
        let row = SparseMatrix::from_pairs(1, 3, [(0, 0, 1.0), (0, 2, 2.0)]).unwrap();
        let col = row.transpose();
        assert_eq!(col.n_rows(), 3);
        assert_eq!(col.n_cols(), 1);
        assert_eq!(col.get(0, 0), 1.0);
        assert_eq!(col.get(2, 0), 2.0);

        let sym =
            SparseMatrix::from_pairs(2, 2, [(0, 0, 1.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(sym.transpose(), sym);
    }

    #[test]
    fn row_normalize_examples() {
        let m = SparseMatrix::from_pairs(1, 4, [(0, 0, 2.0), (0, 1, 1.0), (0, 3, 1.0)]).unwrap();
        let n = m.row_normalize().unwrap();
        assert_eq!(n.get(0, 0), 0.5);
        assert_eq!(n.get(0, 1), 0.25);
        assert_eq!(n.get(0, 2), 0.0);
        assert_eq!(n.get(0, 3), 0.25);

        let single = SparseMatrix::from_pairs(1, 1, [(0, 0, 5.0)]).unwrap();
        assert_eq!(single.row_normalize().unwrap().get(0, 0), 1.0);

        let with_empty = SparseMatrix::from_pairs(2, 2, [(0, 0, 3.0)]).unwrap();
        let n = with_empty.row_normalize().unwrap();
        assert_eq!(n.row(1).0.len(), 0);
    }

    #[test]
    fn row_normalize_rejects_negative() {
        let m = SparseMatrix::from_pairs(1, 2, [(0, 0, -1.0)]).unwrap();
        assert!(m.row_normalize().is_err());
    }

    #[test]
    fn column_examples() {
        let i = SparseMatrix::identity(3);
        assert_eq!(i.column(1).unwrap(), vec![(1, 1.0)]);

        let m = SparseMatrix::from_pairs(3, 2, [(0, 0, 1.0), (2, 0, 2.0)]).unwrap();
        assert_eq!(m.column(0).unwrap(), vec![(0, 1.0), (2, 2.0)]);
        assert_eq!(m.column(1).unwrap(), vec![]);
        assert!(m.column(2).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let m = SparseMatrix::from_pairs(3, 4, [(0, 3, 1.5), (1, 0, -2.0), (2, 2, 0.25)]).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        let back = SparseMatrix::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    fn arb_matrix_shaped(r: usize, c: usize) -> impl Strategy<Value = SparseMatrix> {
        proptest::collection::vec(
            (0..r, 0..c, prop_oneof![Just(0.0), Just(1.0), -2.0..2.0f64]),
            0..=(r * c),
        )
        .prop_map(move |pairs| SparseMatrix::from_pairs(r, c, pairs).unwrap())
    }

    fn arb_matrix(max_dim: usize) -> impl Strategy<Value = SparseMatrix> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| arb_matrix_shaped(r, c))
    }

    fn arb_matrix_pair(max_dim: usize) -> impl Strategy<Value = (SparseMatrix, SparseMatrix)> {
        (1..=max_dim, 1..=max_dim, 1..=max_dim)
            .prop_flat_map(|(n, k, m)| (arb_matrix_shaped(n, k), arb_matrix_shaped(k, m)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spmm_matches_dense_oracle((a, b) in arb_matrix_pair(16)) {
            let product = a.spmm(&b).unwrap();
            let expected = dense_matmul(&a.to_dense(), &b.to_dense(), a.n_rows(), a.n_cols(), b.n_cols());
            let got = product.to_dense();
            for (g, e) in got.iter().zip(&expected) {
                prop_assert!((g - e).abs() <= 1e-12_f64.max(e.abs() * 1e-12));
            }
            // No stored zeros in the result.
            prop_assert!(product.values.iter().all(|&v| v != 0.0));
            prop_assert!(product.nnz() <= a.n_rows() * b.n_cols());
        }

        #[test]
        fn transpose_matches_dense_oracle(a in arb_matrix(24)) {
            let t = a.transpose();
            prop_assert_eq!(t.transpose(), a.clone());
            let dense = a.to_dense();
            for i in 0..a.n_rows() {
                for j in 0..a.n_cols() {
                    prop_assert_eq!(t.get(j, i), dense[i * a.n_cols() + j]);
                }
            }
        }

        #[test]
        fn row_normalize_is_idempotent(a in arb_matrix(16)) {
            let abs = SparseMatrix::from_pairs(
                a.n_rows(),
                a.n_cols(),
                (0..a.n_rows()).flat_map(|r| {
                    let (cols, vals) = a.row(r);
                    cols.iter().zip(vals).map(|(&c, &v)| (r, c, v.abs())).collect::<Vec<_>>()
                }),
            )
            .unwrap();
            let once = abs.row_normalize().unwrap();
            let twice = once.row_normalize().unwrap();
            for r in 0..once.n_rows() {
                let (_, vals) = once.row(r);
                if !vals.is_empty() {
                    let sum: f64 = vals.iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                }
                let (c1, v1) = once.row(r);
                let (c2, v2) = twice.row(r);
                prop_assert_eq!(c1, c2);
                for (a, b) in v1.iter().zip(v2) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn binary_round_trip_any(a in arb_matrix(12)) {
            let mut buf = Vec::new();
            a.write_binary(&mut buf).unwrap();
            prop_assert_eq!(SparseMatrix::read_binary(buf.as_slice()).unwrap(), a);
        }
    }
}
