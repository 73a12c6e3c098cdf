//! Small linear-algebra kit for run-length chains: a CSR matrix, dense LU
//! with partial pivoting, and a sparse Gaussian elimination for `I - Q`.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        };
        m.drop_zeros();
        m
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..d.n_rows {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d.n_rows, d.n_cols, triplets)
    }

    fn drop_zeros(&mut self) {
        if self.vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[i + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `y' = x' A`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        self.vec_mul_into(x, &mut y);
        y
    }

    pub fn vec_mul_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (c, v) in self.row(i) {
                y[c] += xi * v;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                triplets.push((c, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, triplets)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                d[(i, c)] = v;
            }
        }
        d
    }

    /// Fraction of stored entries.
    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        let n = a.n_rows;
        if n != a.n_cols {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.n_cols,
            });
        }
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, max) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max <= 1e-14 * scale {
                return Err(Error::NonAbsorbing(format!("singular pivot at column {k}")));
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let (upper, lower) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            let d = pivot_row[k];
            for row in lower.chunks_exact_mut(n) {
                let f = row[k] / d;
                if f == 0.0 {
                    continue;
                }
                row[k] = f;
                for (x, &p) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *x -= f * p;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A' x = b` with the same factors.
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        // A' = U' L' P, so solve U' y = b, L' z = y, x = P' z.
        let mut y = b.to_vec();
        for i in 0..n {
            y[i] /= self.lu[(i, i)];
            let yi = y[i];
            let row = self.lu.row(i);
            for (t, &u) in y[i + 1..].iter_mut().zip(&row[i + 1..]) {
                *t -= u * yi;
            }
        }
        for i in (0..n).rev() {
            let yi = y[i];
            let row = self.lu.row(i);
            for (t, &l) in y[..i].iter_mut().zip(&row[..i]) {
                *t -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// One eliminated pivot of a sparse factorization.
#[derive(Debug, Clone)]
struct PivotStep {
    pivot: usize,
    diag: f64,
    upper: Vec<(usize, f64)>,
    lower: Vec<(usize, f64)>,
}

/// Gaussian elimination of a sparse M-matrix (here always `I - Q` for a
/// substochastic `Q`) without pivoting, in greedy minimum-fill order.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    steps: Vec<PivotStep>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| a.row(i).collect()).collect();
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, r) in rows.iter().enumerate() {
            for &(c, _) in r {
                col_rows[c].push(i);
            }
        }
        let scale = (0..n)
            .flat_map(|i| a.row(i).map(|(_, v)| v.abs()))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut done = vec![false; n];
        let mut steps = Vec::with_capacity(n);
        let mut scratch: Vec<(usize, f64)> = Vec::new();

        for _ in 0..n {
            // Markowitz-style cost with stale column entries tolerated.
            let pivot = (0..n)
                .filter(|&i| !done[i])
                .min_by_key(|&i| {
                    let rl = rows[i].len().saturating_sub(1);
                    let cl = col_rows[i].iter().filter(|&&r| !done[r]).count().saturating_sub(1);
                    (rl * cl, rl + cl, i)
                })
                .expect("pivot candidates remain");
            done[pivot] = true;
            let prow = std::mem::take(&mut rows[pivot]);
            let diag = prow
                .iter()
                .find(|&&(c, _)| c == pivot)
                .map(|&(_, v)| v)
                .unwrap_or(0.0);
            if !(diag.abs() > 1e-14 * scale) {
                return Err(Error::NonAbsorbing(format!("zero pivot at state {pivot}")));
            }
            let upper: Vec<(usize, f64)> = prow.iter().copied().filter(|&(c, _)| c != pivot).collect();
            let mut lower = Vec::new();
            let mut targets = std::mem::take(&mut col_rows[pivot]);
            targets.sort_unstable();
            targets.dedup();
            for r in targets {
                if done[r] {
                    continue;
                }
                let Ok(pos) = rows[r].binary_search_by_key(&pivot, |&(c, _)| c) else {
                    continue;
                };
                let f = rows[r][pos].1 / diag;
                rows[r].remove(pos);
                if f == 0.0 {
                    continue;
                }
                lower.push((r, f));
                // rows[r] -= f * upper, merging two sorted lists.
                scratch.clear();
                let (mut i, mut j) = (0, 0);
                let row = &rows[r];
                while i < row.len() || j < upper.len() {
                    let take_row = j >= upper.len() || (i < row.len() && row[i].0 < upper[j].0);
                    let take_up = i >= row.len() || (j < upper.len() && upper[j].0 < row[i].0);
                    if take_row {
                        scratch.push(row[i]);
                        i += 1;
                    } else if take_up {
                        let c = upper[j].0;
                        scratch.push((c, -f * upper[j].1));
                        col_rows[c].push(r);
                        j += 1;
                    } else {
                        scratch.push((row[i].0, row[i].1 - f * upper[j].1));
                        i += 1;
                        j += 1;
                    }
                }
                std::mem::swap(&mut rows[r], &mut scratch);
            }
            steps.push(PivotStep {
                pivot,
                diag,
                upper,
                lower,
            });
        }
        Ok(Self { n, steps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for s in &self.steps {
            let bp = y[s.pivot];
            if bp != 0.0 {
                for &(r, f) in &s.lower {
                    y[r] -= f * bp;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for s in self.steps.iter().rev() {
            let acc: f64 = s.upper.iter().map(|&(c, v)| v * x[c]).sum();
            x[s.pivot] = (y[s.pivot] - acc) / s.diag;
        }
        x
    }
}

/// Which factorization backs a solve of `I - Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Sparse,
}

impl SolverKind {
    /// Dense LU for small or well-filled matrices, sparse elimination otherwise.
    pub fn auto(q: &SparseMatrix) -> Self {
        if q.n_rows() <= 64 || q.density() > 0.05 {
            SolverKind::Dense
        } else {
            SolverKind::Sparse
        }
    }
}

/// `I - A` in CSR form.
pub fn identity_minus(q: &SparseMatrix) -> SparseMatrix {
    let n = q.n_rows();
    let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for i in 0..n {
        for (c, v) in q.row(i) {
            triplets.push((i, c, -v));
        }
    }
    SparseMatrix::from_triplets(n, q.n_cols(), triplets)
}

/// A factorization of `I - Q` that can solve with `I - Q` or `I - Q'`.
pub enum ResolventSolver {
    Dense(DenseLu),
    Sparse { direct: SparseLu, transposed: Option<SparseLu> },
}

impl ResolventSolver {
    pub fn new(q: &SparseMatrix, kind: SolverKind) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch {
                expected: q.n_rows(),
                got: q.n_cols(),
            });
        }
        let a = identity_minus(q);
        Ok(match kind {
            SolverKind::Dense => ResolventSolver::Dense(DenseLu::factor(a.to_dense())?),
            SolverKind::Sparse => ResolventSolver::Sparse {
                direct: SparseLu::factor(&a)?,
                transposed: None,
            },
        })
    }

    /// Factorization prepared for both orientations.
    pub fn with_transpose(q: &SparseMatrix, kind: SolverKind) -> Result<Self> {
        let mut s = Self::new(q, kind)?;
        if let ResolventSolver::Sparse { transposed, .. } = &mut s {
            *transposed = Some(SparseLu::factor(&identity_minus(&q.transpose()))?);
        }
        Ok(s)
    }

    /// `(I - Q)^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            ResolventSolver::Dense(lu) => lu.solve(b),
            ResolventSolver::Sparse { direct, .. } => direct.solve(b),
        }
    }

    /// `(I - Q)^{-1} b` with two rounds of iterative refinement; `q` must be
    /// the matrix that was factored.
    pub fn solve_refined(&self, q: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        for _ in 0..2 {
            let qx = q.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&x).zip(&qx).map(|((b, x), qx)| b - x + qx).collect();
            for (xi, d) in x.iter_mut().zip(self.solve(&r)) {
                *xi += d;
            }
        }
        x
    }

    /// `(I - Q')^{-1} b` with two rounds of iterative refinement.
    pub fn solve_transposed_refined(&self, q: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve_transposed(b);
        for _ in 0..2 {
            let xq = q.vec_mul(&x);
            let r: Vec<f64> = b.iter().zip(&x).zip(&xq).map(|((b, x), xq)| b - x + xq).collect();
            for (xi, d) in x.iter_mut().zip(self.solve_transposed(&r)) {
                *xi += d;
            }
        }
        x
    }

    /// `(I - Q')^{-1} b`.
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        match self {
            ResolventSolver::Dense(lu) => lu.solve_transposed(b),
            ResolventSolver::Sparse { transposed, .. } => transposed
                .as_ref()
                .expect("transposed factorization requested via with_transpose")
                .solve(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            4,
            4,
            vec![
                (0, 1, 0.5),
                (0, 3, 0.2),
                (1, 2, 0.6),
                (1, 0, 0.1),
                (2, 3, 0.3),
                (2, 2, 0.4),
                (3, 0, 0.25),
                (3, 3, 0.7),
                (3, 3, 0.0),
            ],
        )
    }

    #[test]
    fn csr_basics() {
        let q = sample();
        assert_eq!(q.nnz(), 8);
        assert_eq!(q.get(3, 3), 0.7);
        assert_eq!(q.get(1, 3), 0.0);
        let x = [1.0, 2.0, 3.0, 4.0];
        let d = q.to_dense();
        assert_eq!(q.mul_vec(&x), d.mul_vec(&x));
        let t = q.transpose();
        assert_eq!(q.vec_mul(&x), t.mul_vec(&x));
    }

    #[test]
    fn dense_and_sparse_agree() {
        let q = sample();
        let ones = vec![1.0; 4];
        let dense = ResolventSolver::with_transpose(&q, SolverKind::Dense).unwrap();
        let sparse = ResolventSolver::with_transpose(&q, SolverKind::Sparse).unwrap();
        let a = dense.solve(&ones);
        let b = sparse.solve(&ones);
        let at = dense.solve_transposed(&[0.0, 1.0, 0.0, 0.0]);
        let bt = sparse.solve_transposed(&[0.0, 1.0, 0.0, 0.0]);
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-12 * a[i].abs());
            assert!((at[i] - bt[i]).abs() < 1e-12);
        }
        // residual of (I - Q) x = 1
        let r = identity_minus(&q).mul_vec(&a);
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn lu_pivots_general_matrix() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let lu = DenseLu::factor(a.clone()).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([3.0, 2.0, 4.0]) {
            assert!((ri - bi).abs() < 1e-12);
        }
        let xt = lu.solve_transposed(&[1.0, 0.0, 0.0]);
        let at = SparseMatrix::from_dense(&a).transpose().to_dense();
        let rt = at.mul_vec(&xt);
        assert!((rt[0] - 1.0).abs() < 1e-12 && rt[1].abs() < 1e-12 && rt[2].abs() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let q = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert!(matches!(
            ResolventSolver::new(&q, SolverKind::Dense),
            Err(Error::NonAbsorbing(_))
        ));
        assert!(matches!(
            ResolventSolver::new(&q, SolverKind::Sparse),
            Err(Error::NonAbsorbing(_))
        ));
    }
}
