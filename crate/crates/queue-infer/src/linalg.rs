//! Dense square matrices and a symmetric eigensolver, sized for the small
//! covariance kernels this crate produces (dimension is the number of
//! evaluation points of the cdf, a few dozen at most).

use serde::{Deserialize, Serialize};

/// Row-major square matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; dim * dim] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    /// Maximum absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues and eigenvectors of a symmetric matrix via the cyclic Jacobi
/// rotation method. Returns `(eigenvalues, columns)` where `columns[k]` is
/// the eigenvector for `eigenvalues[k]`; NaN entries are rejected.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.dim;
    assert!(a.data.iter().all(|x| x.is_finite()), "matrix must be finite");
    let mut m = a.clone();
    // Work on the symmetrized matrix so tiny float asymmetries cannot stall
    // the sweep.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
    let mut v = Matrix::zeros(n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    let columns: Vec<Vec<f64>> =
        (0..n).map(|k| (0..n).map(|i| v.get(i, k)).collect()).collect();
    (eigenvalues, columns)
}

/// Factor `B` with `B Bᵀ` equal to the positive-semidefinite part of `a`
/// (negative eigenvalues clamped to zero). Multiplying `B` by a standard
/// normal vector yields a draw from `N(0, a⁺)`.
pub fn psd_factor(a: &Matrix) -> Matrix {
    let n = a.dim;
    let (vals, cols) = sym_eigen(a);
    let mut b = Matrix::zeros(n);
    for k in 0..n {
        let scale = vals[k].max(0.0).sqrt();
        for (i, &col_i) in cols[k].iter().enumerate() {
            b.set(i, k, col_i * scale);
        }
    }
    b
}

/// `y = a * x` for a square matrix.
pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.dim, x.len());
    (0..a.dim)
        .map(|i| (0..a.dim).map(|j| a.get(i, j) * x[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[f64]]) -> Matrix {
        let dim = rows.len();
        let mut m = Matrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[test]
    fn eigen_of_diagonal_matrix() {
        let m = from_rows(&[&[3.0, 0.0], &[0.0, -1.0]]);
        let (mut vals, _) = sym_eigen(&m);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_symmetric_matrix() {
        let m = from_rows(&[
            &[2.0, 0.5, 0.1],
            &[0.5, 1.0, -0.3],
            &[0.1, -0.3, 0.7],
        ]);
        let (vals, cols) = sym_eigen(&m);
        for i in 0..3 {
            for j in 0..3 {
                let mut rec = 0.0;
                for k in 0..3 {
                    rec += vals[k] * cols[k][i] * cols[k][j];
                }
                assert!(
                    (rec - m.get(i, j)).abs() < 1e-10,
                    "reconstruction mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn psd_factor_squares_back() {
        let m = from_rows(&[&[1.0, 0.9], &[0.9, 1.0]]);
        let b = psd_factor(&m);
        for i in 0..2 {
            for j in 0..2 {
                let mut prod = 0.0;
                for k in 0..2 {
                    prod += b.get(i, k) * b.get(j, k);
                }
                assert!((prod - m.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn psd_factor_clamps_negative_eigenvalues() {
        // Indefinite matrix: eigenvalues 1 and -1.
        let m = from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let b = psd_factor(&m);
        // B Bᵀ must be PSD: diagonal entries nonnegative.
        for i in 0..2 {
            let mut prod = 0.0;
            for k in 0..2 {
                prod += b.get(i, k) * b.get(i, k);
            }
            assert!(prod >= -1e-12);
        }
    }
}
