//! Sparse and dense linear-algebra kernels.
//!
//! CSR is the only sparse format. Dense symmetric matrices and their Cholesky
//! factors back the reference paths (exact log-determinants, initial and
//! periodic factorizations of the maintained solver).

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != col_indices.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!(
                    "row_offsets not monotone at row {i}"
                )));
            }
            let cols = &col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "column indices of row {i} not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::InvalidMatrix(format!(
                    "column index out of range in row {i}"
                )));
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite value at entry {k}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a CSR matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are rejected; explicit zeros are kept.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = sorted
            .windows(2)
            .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::InvalidMatrix(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_offsets = vec![0usize; n_rows + 1];
        for &(r, _, _) in &sorted {
            row_offsets[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Self::from_csr(n_rows, n_cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len("from_dense row", n_cols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), n_cols, &trip)
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .map(move |(&c, &v)| (i, c, v))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, c, v) in self.triplets() {
            out[i][c] = v;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec", self.n_cols, x.len())?;
        Ok((0..self.n_rows).map(|i| self.row_dot(i, x)).collect())
    }

    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec_t", self.n_rows, y.len())?;
        let mut out = vec![0.0; self.n_cols];
        self.matvec_t_into(y, &mut out);
        Ok(out)
    }

    /// `out = Mᵀ y`, lengths assumed checked by the caller.
    pub(crate) fn matvec_t_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yi;
            }
        }
    }

    /// Stacks `self` over `other`.
    pub fn vstack(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        check_len("vstack", self.n_cols, other.n_cols)?;
        let mut row_offsets = self.row_offsets.clone();
        let base = self.nnz();
        row_offsets.extend(other.row_offsets[1..].iter().map(|&o| o + base));
        let mut col_indices = self.col_indices.clone();
        col_indices.extend_from_slice(&other.col_indices);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(SparseMatrix {
            n_rows: self.n_rows + other.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `Mᵀ diag(c) M x` without forming the Gram matrix.
    pub(crate) fn weighted_normal_apply(&self, c: &[f64], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ci) in c.iter().enumerate() {
            let s = ci * self.row_dot(i, x);
            if s == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&col, &v) in cols.iter().zip(vals) {
                out[col] += v * s;
            }
        }
    }
}

/// Positive diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagWeights(Vec<f64>);

impl DiagWeights {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidWeights(format!(
                "entry {i} = {v} is not positive and finite"
            )));
        }
        Ok(Self(entries))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `(1 - t) * self + t * other`; positive whenever both ends are.
    pub fn interpolate(&self, other: &DiagWeights, t: f64) -> Result<DiagWeights> {
        check_len("interpolate", self.len(), other.len())?;
        DiagWeights::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

/// Dense symmetric matrix stored as a full row-major square.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut g = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            g.set(i, i, v);
        }
        g
    }

    /// Accepts a full square; rejects input that is not symmetric to 1e-12
    /// relative to its largest entry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            check_len("DenseSym row", dim, r.len())?;
            entries.extend_from_slice(r);
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..dim {
            for j in 0..i {
                if (entries[i * dim + j] - entries[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMatrix(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseSym::matvec", self.dim, x.len())?;
        Ok(self
            .entries
            .chunks(self.dim.max(1))
            .take(self.dim)
            .map(|row| dot(row, x))
            .collect())
    }

    pub fn scaled(&self, s: f64) -> DenseSym {
        DenseSym {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }
}

/// `Mᵀ diag(c) M` as a dense symmetric matrix. Cost is `Σ_i nnz(row_i)²`.
pub fn gram(m: &SparseMatrix, c: &DiagWeights) -> Result<DenseSym> {
    check_len("gram", m.n_rows(), c.len())?;
    let d = m.n_cols();
    let mut g = vec![0.0; d * d];
    for (i, &ci) in c.as_slice().iter().enumerate() {
        let (cols, vals) = m.row(i);
        for (a, (&ca, &va)) in cols.iter().zip(vals).enumerate() {
            let s = ci * va;
            let row = &mut g[ca * d..(ca + 1) * d];
            for (&cb, &vb) in cols[..=a].iter().zip(&vals[..=a]) {
                row[cb] += s * vb;
            }
        }
    }
    // only the lower triangle was accumulated
    for i in 0..d {
        for j in 0..i {
            g[j * d + i] = g[i * d + j];
        }
    }
    Ok(DenseSym { dim: d, entries: g })
}

/// Cholesky factor `G = L Lᵀ`, `L` lower triangular, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(g: &DenseSym) -> Result<Self> {
        let n = g.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let s = g.entries[i * n + j] - dot(ri, rj);
                if i == j {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { dim: n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
    }

    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("Cholesky::solve", self.dim, v.len())?;
        let mut x = v.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` with `G⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        let l = &self.lower;
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            x[i] = (x[i] - dot(row, &x[..i])) / l[i * n + i];
        }
        for i in (0..n).rev() {
            x[i] /= l[i * n + i];
            let xi = x[i];
            let row = &l[i * n..i * n + i];
            for (xk, &lik) in x[..i].iter_mut().zip(row) {
                *xk -= lik * xi;
            }
        }
    }

    /// `L⁻¹ x`, used by tests and oracles that need a whitening transform.
    pub fn forward_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("Cholesky::forward_solve", self.dim, v.len())?;
        let n = self.dim;
        let mut x = v.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            x[i] = (x[i] - dot(row, &x[..i])) / self.lower[i * n + i];
        }
        Ok(x)
    }
}

pub fn factor(g: &DenseSym) -> Result<Cholesky> {
    Cholesky::factor(g)
}

pub fn logdet_dense(g: &DenseSym) -> Result<f64> {
    Ok(Cholesky::factor(g)?.logdet())
}

/// LU with partial pivoting for small dense non-symmetric systems (the
/// Woodbury capacitance matrix).
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    dim: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Returns `None` when a pivot is zero relative to the matrix scale.
    pub(crate) fn factor(dim: usize, mut a: Vec<f64>) -> Option<Self> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return None;
        }
        let mut perm: Vec<usize> = (0..dim).collect();
        for k in 0..dim {
            let p = (k..dim)
                .max_by(|&i, &j| a[i * dim + k].abs().total_cmp(&a[j * dim + k].abs()))
                .unwrap_or(k);
            if a[p * dim + k].abs() <= 1e-14 * scale {
                return None;
            }
            if p != k {
                for j in 0..dim {
                    a.swap(k * dim + j, p * dim + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * dim + k];
            for i in k + 1..dim {
                let f = a[i * dim + k] / pivot;
                a[i * dim + k] = f;
                if f != 0.0 {
                    for j in k + 1..dim {
                        a[i * dim + j] -= f * a[k * dim + j];
                    }
                }
            }
        }
        Some(Self { dim, lu: a, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}
