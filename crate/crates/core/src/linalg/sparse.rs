use crate::error::{Error, Result};

/// Square matrix in compressed sparse row format.
///
/// Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds an `n × n` matrix from `(row, col, value)` entries. Duplicate
    /// positions are summed, which is what element assembly needs.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in entries {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut fill = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(i, j, v) in entries {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            // stable sort keeps the summation order of duplicates deterministic
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.iter().copied();
            if let Some((mut cur_j, mut cur_v)) = iter.next() {
                for (j, v) in iter {
                    if j == cur_j {
                        cur_v += v;
                    } else {
                        col_indices.push(cur_j);
                        values.push(cur_v);
                        cur_j = j;
                        cur_v = v;
                    }
                }
                col_indices.push(cur_j);
                values.push(cur_v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from raw CSR arrays, checking the structural invariants.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 {
            return Err(Error::invalid(
                "row offsets must have length n + 1 and start at 0",
            ));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("row offsets must be non-decreasing"));
        }
        let nnz = row_offsets[n];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::invalid(
                "column/value arrays disagree with row offsets",
            ));
        }
        for i in 0..n {
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&j| j >= n) {
                return Err(Error::invalid(format!(
                    "row {i}: column indices must be sorted, unique and < n"
                )));
            }
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
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

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y = A x`, summing each row in column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        if y.len() != self.n {
            return Err(Error::dims(self.n, y.len()));
        }
        self.mul_unchecked(x, y);
        Ok(())
    }

    pub(crate) fn mul_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let start = self.row_offsets[i];
            let end = self.row_offsets[i + 1];
            let mut acc = 0.0;
            for p in start..end {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *yi = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `alpha * self + beta * other`, over the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::dims(self.n, other.n));
        }
        let mut row_offsets = Vec::with_capacity(self.n + 1);
        let mut col_indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_offsets.push(0);
        for i in 0..self.n {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let (j, v) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ja, va)), Some((jb, vb))) if ja == jb => {
                        a.next();
                        b.next();
                        (ja, alpha * va + beta * vb)
                    }
                    (Some((ja, va)), Some((jb, _))) if ja < jb => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (Some((ja, va)), None) => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (_, Some((jb, vb))) => {
                        b.next();
                        (jb, beta * vb)
                    }
                };
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Row sums; the lumped mass when applied to a mass matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, _)| {
                let range = self.row_offsets[j]..self.row_offsets[j + 1];
                self.col_indices[range].binary_search(&i).is_ok()
            })
        })
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy, for small matrices and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}
