//! Small dense complex-matrix helpers: just enough linear algebra for the
//! beamforming solvers (inner products, Frobenius norms, a Hermitian
//! positive-definite solve, and real-stacked views of complex matrices).

use num_complex::Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    /// Builds from row vectors. All rows must share one length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == ncols),
            "ragged rows in CMatrix::from_rows"
        );
        Self {
            rows: nrows,
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Squared Frobenius norm, Tr(A A^H).
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real-stacked view: the real plane flattened row-major, then the
    /// imaginary plane. Length is `2 * rows * cols`.
    pub fn to_real_stacked(&self) -> Vec<f64> {
        let n = self.data.len();
        let mut out = Vec::with_capacity(2 * n);
        out.extend(self.data.iter().map(|z| z.re));
        out.extend(self.data.iter().map(|z| z.im));
        out
    }

    /// Inverse of [`to_real_stacked`](Self::to_real_stacked).
    pub fn from_real_stacked(rows: usize, cols: usize, stacked: &[f64]) -> Self {
        let n = rows * cols;
        assert_eq!(stacked.len(), 2 * n, "real-stacked length mismatch");
        let data = (0..n)
            .map(|i| Complex64::new(stacked[i], stacked[n + i]))
            .collect();
        Self { rows, cols, data }
    }
}

/// Conjugated inner product `a^H b`.
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Cholesky factor L (lower triangular, A = L L^H) of a Hermitian
/// positive-definite matrix. Returns `None` when a pivot is not positive.
pub fn cholesky(a: &CMatrix) -> Option<CMatrix> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let ljj = d.sqrt();
        l.set(j, j, Complex64::new(ljj, 0.0));
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / ljj);
        }
    }
    Some(l)
}

/// Solves A x = b given the Cholesky factor L of A.
#[allow(clippy::needless_range_loop)]
pub fn cholesky_solve(l: &CMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    // forward: L y = b
    let mut y = vec![Complex64::ZERO; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // backward: L^H x = y
    let mut x = vec![Complex64::ZERO; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i).conj() * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn real_stack_round_trip() {
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(-0.5, 0.25)],
            vec![c(0.0, -3.0), c(4.0, 0.0)],
        ]);
        let s = m.to_real_stacked();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[4], 2.0); // imaginary plane starts at rows*cols
        let back = CMatrix::from_real_stacked(2, 2, &s);
        assert_eq!(back, m);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn cholesky_solves_hermitian_system() {
        // A = B B^H + I is Hermitian positive definite.
        let b = CMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(0.2, -0.3), c(0.0, 1.0)],
            vec![c(-0.7, 0.1), c(2.0, 0.0), c(0.3, 0.3)],
            vec![c(0.4, -0.4), c(0.1, 0.9), c(-1.0, 0.2)],
        ]);
        let n = 3;
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = dot_conj(b.row(j), b.row(i));
                if i == j {
                    s += 1.0;
                }
                a.set(i, j, s);
            }
        }
        let rhs = vec![c(1.0, -1.0), c(0.0, 2.0), c(-0.5, 0.5)];
        let l = cholesky(&a).expect("positive definite");
        let x = cholesky_solve(&l, &rhs);
        // residual check
        for i in 0..n {
            let mut ax = Complex64::ZERO;
            for j in 0..n {
                ax += a.get(i, j) * x[j];
            }
            assert!((ax - rhs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::zeros(2, 2);
        a.set(0, 0, c(1.0, 0.0));
        a.set(1, 1, c(-1.0, 0.0));
        assert!(cholesky(&a).is_none());
    }
}
