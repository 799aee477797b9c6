//! Small dense complex matrices, just enough for per-subcarrier MIMO work.
//!
//! Dimensions here are tiny (antenna counts), so everything is plain
//! row-major storage with direct loops.

use num_complex::Complex64;

/// Complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
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

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// New matrix holding the selected columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> CMat {
        CMat::from_fn(self.rows, cols.len(), |r, j| self.get(r, cols[j]))
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (h, x) in row.iter().zip(v.iter()) {
                acc += h * x;
            }
            *o = acc;
        }
        out
    }

    /// A^H A (Gram matrix), Hermitian `cols x cols`.
    pub fn gram(&self) -> CMat {
        let k = self.cols;
        let mut g = CMat::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..self.rows {
                    acc += self.get(r, i).conj() * self.get(r, j);
                }
                g.set(i, j, acc);
            }
        }
        g
    }

    /// A^H y.
    pub fn herm_mul_vec(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(self.rows, y.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..self.rows {
                acc += self.get(r, c).conj() * y[r];
            }
            *o = acc;
        }
        out
    }
}

/// Solve `A x = b` in place via Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot underflows (singular up to `tiny`).
pub fn solve(a: &CMat, b: &[Complex64]) -> Option<Vec<Complex64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut m = a.clone();
    let mut x = b.to_vec();
    const TINY: f64 = 1e-300;

    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, m.get(r, col).norm_sqr()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_mag < TINY {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot_row, c));
                m.set(pivot_row, c, tmp);
            }
            x.swap(col, pivot_row);
        }
        let pivot = m.get(col, col);
        for r in (col + 1)..n {
            let factor = m.get(r, col) / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - factor * m.get(col, c);
                m.set(r, c, v);
            }
            x[r] = x[r] - factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for c in (col + 1)..n {
            acc -= m.get(col, c) * x[c];
        }
        x[col] = acc / m.get(col, col);
    }
    Some(x)
}

/// Lower Cholesky factor of a real symmetric positive-definite matrix
/// (row-major `n x n`). Returns `None` if the matrix is not SPD.
pub fn cholesky_lower(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `L_rx * A * L_tx^T` with real triangular factors: colors an i.i.d.
/// matrix with receive/transmit correlation.
pub fn color_kronecker(a: &CMat, l_rx: &[f64], l_tx: &[f64]) -> CMat {
    let nr = a.rows;
    let nt = a.cols;
    debug_assert_eq!(l_rx.len(), nr * nr);
    debug_assert_eq!(l_tx.len(), nt * nt);
    // tmp = L_rx * A
    let tmp = CMat::from_fn(nr, nt, |r, c| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..=r {
            acc += l_rx[r * nr + k] * a.get(k, c);
        }
        acc
    });
    // out = tmp * L_tx^T  (out[r][c] = sum_k tmp[r][k] * L_tx[c][k])
    CMat::from_fn(nr, nt, |r, c| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..=c {
            acc += tmp.get(r, k) * l_tx[c * nt + k];
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = CMat::from_fn(3, 3, |r, cidx| {
            let diag = if r == cidx { 10.0 } else { 0.0 };
            c(diag + (r * 3 + cidx) as f64, ((r as f64) - (cidx as f64)) * 0.5)
        });
        let x_true = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 1.0)];
        let b = a.mul_vec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (xs, xt) in x.iter().zip(&x_true) {
            assert!((xs - xt).norm() < 1e-10);
        }
    }

    #[test]
    fn solve_reports_singular() {
        // rows [1,1] and [2,2] are linearly dependent
        let a = CMat::from_fn(2, 2, |r, _| if r == 0 { c(1.0, 0.0) } else { c(2.0, 0.0) });
        assert!(solve(&a, &[c(1.0, 0.0), c(2.0, 0.0)]).is_none());
    }

    #[test]
    fn cholesky_reconstructs() {
        let n = 4;
        let rho: f64 = 0.6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = rho.powi((i as i32 - j as i32).abs());
            }
        }
        let l = cholesky_lower(n, &a).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += l[i * n + k] * l[j * n + k];
                }
                assert!((acc - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_lower(2, &a).is_none());
    }

    #[test]
    fn identity_coloring_is_exact() {
        let a = CMat::from_fn(2, 3, |r, cidx| c(r as f64 + 0.5, cidx as f64 - 1.0));
        let l2 = cholesky_lower(2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let l3 = cholesky_lower(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let h = color_kronecker(&a, &l2, &l3);
        assert_eq!(h, a);
    }
}
