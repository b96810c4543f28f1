//! Dense linear algebra helpers: Gauss-Legendre rules, plain and pivoted
//! Cholesky factorizations on row-major matrices.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · selfᵀ`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

/// Result of a diagonally pivoted, rank-revealing Cholesky factorization.
///
/// `factor` holds the rows of `L` in pivot order, so that
/// `A[perm[i], perm[j]] ≈ Σ_c L[i, c] L[j, c]`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub factor: Matrix,
    pub rank: usize,
    pub perm: Vec<usize>,
    pub trace: f64,
}

impl PivotedCholesky {
    /// Factor rows in the original ordering: `A ≈ G Gᵀ` with `G = P L`.
    pub fn unpermuted(&self) -> Matrix {
        let dim = self.factor.rows();
        let mut g = Matrix::zeros(dim, self.rank);
        for (i, &orig) in self.perm.iter().enumerate() {
            for c in 0..self.rank {
                g[(orig, c)] = self.factor[(i, c)];
            }
        }
        g
    }

    /// `P L Lᵀ Pᵀ` in the original ordering.
    pub fn reconstruct(&self) -> Matrix {
        self.unpermuted().gram()
    }
}

/// Pivoted Cholesky of a symmetric positive semidefinite matrix.
///
/// Stops once the largest remaining diagonal pivot is `<= tol · trace(A)`.
pub fn pivoted_cholesky(matrix: &Matrix, tol: f64) -> Result<PivotedCholesky> {
    if !matrix.is_square() {
        return Err(Error::invalid("pivoted_cholesky needs a square matrix"));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tol}")));
    }
    let dim = matrix.rows();
    let trace = matrix.trace();
    let stop = tol * trace;
    let negative_floor = -(tol.max(8.0 * f64::EPSILON * dim as f64)) * trace.abs();

    let mut perm: Vec<usize> = (0..dim).collect();
    let mut diag: Vec<f64> = (0..dim).map(|i| matrix[(i, i)]).collect();
    let mut cols: Vec<Vec<f64>> = Vec::new(); // cols[c][i] indexes pivot-ordered row i

    let mut rank = 0;
    while rank < dim {
        let (best, &pivot) = diag[rank..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i + rank, v))
            .unwrap();
        if let Some((i, &v)) = diag[rank..]
            .iter()
            .enumerate()
            .find(|(_, &v)| v < negative_floor)
        {
            return Err(Error::NotPsd {
                pivot: v,
                index: perm[i + rank],
                threshold: negative_floor,
            });
        }
        if pivot <= stop || pivot <= 0.0 {
            break;
        }
        perm.swap(rank, best);
        diag.swap(rank, best);
        for col in cols.iter_mut() {
            col.swap(rank, best);
        }
        let l_kk = pivot.sqrt();
        let mut col = vec![0.0; dim];
        col[rank] = l_kk;
        let pk = perm[rank];
        for i in rank + 1..dim {
            let mut v = matrix[(perm[i], pk)];
            for c in cols.iter() {
                v -= c[i] * c[rank];
            }
            let l = v / l_kk;
            col[i] = l;
            diag[i] -= l * l;
        }
        diag[rank] = 0.0;
        cols.push(col);
        rank += 1;
    }

    let mut factor = Matrix::zeros(dim, rank);
    for (c, col) in cols.iter().enumerate() {
        for i in c..dim {
            factor[(i, c)] = col[i];
        }
    }
    Ok(PivotedCholesky {
        factor,
        rank,
        perm,
        trace,
    })
}

/// Plain Cholesky `A = L Lᵀ`, returning the lower factor. Fails on the first
/// non-positive pivot.
pub fn cholesky(matrix: &Matrix) -> Result<Matrix> {
    if !matrix.is_square() {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    let n = matrix.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = matrix[(j, j)];
        for c in 0..j {
            d -= l[(j, c)] * l[(j, c)];
        }
        if !(d > 0.0) {
            return Err(Error::numerical(format!(
                "cholesky pivot {d:e} at row {j} is not positive"
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = matrix[(i, j)];
            let (ri, rj) = (i * n, j * n);
            for c in 0..j {
                v -= l.data[ri + c] * l.data[rj + c];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Cholesky with diagonal jitter: retries up to three times, adding
/// `1e-14 · max diag` to the diagonal each time.
pub fn cholesky_with_jitter(matrix: &Matrix) -> Result<Matrix> {
    let max_diag = (0..matrix.rows())
        .map(|i| matrix[(i, i)])
        .fold(0.0, f64::max);
    let mut work = matrix.clone();
    let mut last = None;
    for attempt in 0..=3 {
        if attempt > 0 {
            for i in 0..work.rows() {
                work[(i, i)] += 1e-14 * max_diag;
            }
        }
        match cholesky(&work) {
            Ok(l) => return Ok(l),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::numerical(format!(
        "cholesky failed after 3 jitter attempts: {}",
        last.unwrap()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn pivoted_identity() {
        let pc = pivoted_cholesky(&Matrix::identity(3), 0.0).unwrap();
        assert_eq!(pc.rank, 3);
        assert_eq!(pc.unpermuted().gram(), Matrix::identity(3));
        for i in 0..3 {
            assert_eq!(pc.factor[(i, i)], 1.0);
        }
    }

    #[test]
    fn pivoted_all_ones() {
        let a = Matrix::from_fn(2, 2, |_, _| 1.0);
        let pc = pivoted_cholesky(&a, 1e-12).unwrap();
        assert_eq!(pc.rank, 1);
        let g = pc.unpermuted();
        assert_eq!((g[(0, 0)], g[(1, 0)]), (1.0, 1.0));
    }

    #[test]
    fn pivoted_low_rank() {
        // G has rank 2 in dimension 5.
        let g = Matrix::from_fn(5, 2, |i, j| {
            ((i + 1) as f64).powi(j as i32 + 1) * 0.3 - j as f64
        });
        let a = g.gram();
        let tol = 1e-12;
        let pc = pivoted_cholesky(&a, tol).unwrap();
        assert_eq!(pc.rank, 2);
        assert!(pc.reconstruct().max_abs_diff(&a) <= tol * a.trace());
    }

    #[test]
    fn pivoted_rejects_indefinite() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(
            pivoted_cholesky(&a, 1e-12),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn cholesky_jitter_rescues_semidefinite() {
        let a = Matrix::from_fn(2, 2, |_, _| 1.0);
        assert!(cholesky(&a).is_err());
        let l = cholesky_with_jitter(&a).unwrap();
        assert!(l.gram().max_abs_diff(&a) < 1e-12);
    }
}
