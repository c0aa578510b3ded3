//! Small dense linear-algebra helpers. Matrices are row-major `Vec<f64>`.
//! Everything here targets tall skinny design matrices (N up to ~10⁴, m ≤ ~16)
//! and tiny square systems, so simple direct methods are the right tool.

use crate::error::{CoreError, Result};

/// `AᵀA` of the row-major N×m matrix `a`.
pub fn gram(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut g = vec![0.0; m * m];
    for row in 0..n {
        let r = &a[row * m..(row + 1) * m];
        for i in 0..m {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..m {
                g[i * m + j] += ri * r[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            g[i * m + j] = g[j * m + i];
        }
    }
    g
}

/// `Aᵀv` for row-major N×m `a`.
pub fn mat_t_vec(a: &[f64], n: usize, m: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for row in 0..n {
        let r = &a[row * m..(row + 1) * m];
        let vr = v[row];
        for j in 0..m {
            out[j] += r[j] * vr;
        }
    }
    out
}

/// `Av` for row-major N×m `a`.
pub fn mat_vec(a: &[f64], n: usize, m: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for row in 0..n {
        let r = &a[row * m..(row + 1) * m];
        out[row] = r.iter().zip(v).map(|(x, y)| x * y).sum();
    }
    out
}

/// Largest eigenvalue of a symmetric m×m matrix by power iteration with a
/// fixed number of steps.
pub fn power_iter_max_eig(g: &[f64], m: usize, steps: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    // Deterministic start with all components populated.
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    let mut lambda = 0.0;
    for _ in 0..steps {
        let w = mat_vec(g, m, m, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>()
            / v.iter().map(|x| x * x).sum::<f64>();
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda.abs()
}

/// Singular values of a row-major N×m matrix via one-sided Jacobi
/// (Hestenes) rotations. Accurate for small singular values because they are
/// read off as column norms rather than square roots of Gram eigenvalues.
pub fn singular_values(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    // Work column-major for cheap column rotations.
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| a[i * m + j]).collect())
        .collect();
    let max_sweeps = 30;
    let tol = 1e-14;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    app += cols[p][i] * cols[p][i];
                    aqq += cols[q][i] * cols[q][i];
                    apq += cols[p][i] * cols[q][i];
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Solve the square system `G x = b` by Gaussian elimination with partial
/// pivoting. `g` is row-major m×m and consumed by value.
pub fn solve_dense(mut g: Vec<f64>, mut b: Vec<f64>, m: usize) -> Result<Vec<f64>> {
    for col in 0..m {
        let mut pivot = col;
        for row in (col + 1)..m {
            if g[row * m + col].abs() > g[pivot * m + col].abs() {
                pivot = row;
            }
        }
        if g[pivot * m + col].abs() < 1e-300 {
            return Err(CoreError::Singular("dense solve"));
        }
        if pivot != col {
            for k in 0..m {
                g.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / g[col * m + col];
        for row in (col + 1)..m {
            let f = g[row * m + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..m {
                g[row * m + k] -= f * g[col * m + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in (row + 1)..m {
            acc -= g[row * m + k] * x[k];
        }
        x[row] = acc / g[row * m + row];
    }
    Ok(x)
}

/// Least squares `min ‖Ax − b‖₂` via the normal equations (fine for m ≤ ~16
/// and the well-conditioned designs used here).
pub fn least_squares(a: &[f64], n: usize, m: usize, b: &[f64]) -> Result<Vec<f64>> {
    let g = gram(a, n, m);
    let rhs = mat_t_vec(a, n, m, b);
    solve_dense(g, rhs, m)
}

/// Thomas algorithm for a tridiagonal system with constant bands
/// (`lower`, `diag`, `upper`).
pub fn tridiag_solve_const(
    lower: f64,
    diag: f64,
    upper: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n == 0 {
        return Err(CoreError::Empty("tridiagonal rhs"));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag;
    if denom.abs() < 1e-300 {
        return Err(CoreError::Singular("tridiagonal solve"));
    }
    c[0] = upper / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag - lower * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(CoreError::Singular("tridiagonal solve"));
        }
        c[i] = upper / denom;
        d[i] = (rhs[i] - lower * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn power_iteration_finds_dominant_eigenvalue() {
        // diag(3, 1) rotated by 45°: eigenvalues 3 and 1.
        let c = std::f64::consts::FRAC_1_SQRT_2;
        // R diag R^T with R = [[c,-c],[c,c]]
        let g = vec![
            c * c * 3.0 + c * c * 1.0,
            c * c * 3.0 - c * c * 1.0,
            c * c * 3.0 - c * c * 1.0,
            c * c * 3.0 + c * c * 1.0,
        ];
        let l = power_iter_max_eig(&g, 2, 100);
        assert!((l - 3.0).abs() < 1e-10, "{l}");
    }

    #[test]
    fn singular_values_of_orthogonal_columns() {
        // columns e1*2, e2*0.5 in R^3
        let a = vec![2.0, 0.0, 0.0, 0.5, 0.0, 0.0];
        let sv = singular_values(&a, 3, 2);
        assert!((sv[0] - 2.0).abs() < 1e-12);
        assert!((sv[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_values_detect_duplicate_column() {
        let mut rng = Rng::new(9);
        let n = 40;
        let col: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut a = vec![0.0; n * 2];
        for i in 0..n {
            a[i * 2] = col[i];
            a[i * 2 + 1] = col[i];
        }
        let sv = singular_values(&a, n, 2);
        assert!(sv[1] / sv[0] < 1e-12, "ratio {}", sv[1] / sv[0]);
    }

    #[test]
    fn dense_solve_matches_known_solution() {
        let g = vec![4.0, 1.0, 2.0, 3.0];
        let x = solve_dense(g, vec![9.0, 13.0], 2).unwrap();
        assert!((x[0] - 1.4).abs() < 1e-12);
        assert!((x[1] - 3.4).abs() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_planted_coefficients() {
        let mut rng = Rng::new(2);
        let (n, m) = (50, 3);
        let mut a = vec![0.0; n * m];
        for v in &mut a {
            *v = rng.normal();
        }
        let truth = [1.5, -0.3, 0.8];
        let b: Vec<f64> = (0..n)
            .map(|i| (0..m).map(|j| a[i * m + j] * truth[j]).sum())
            .collect();
        let x = least_squares(&a, n, m, &b).unwrap();
        for j in 0..m {
            assert!((x[j] - truth[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let n = 6;
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * 0.3).collect();
        let x = tridiag_solve_const(-1.0, 2.0, -1.0, &rhs).unwrap();
        // residual check
        for i in 0..n {
            let mut acc = 2.0 * x[i];
            if i > 0 {
                acc -= x[i - 1];
            }
            if i + 1 < n {
                acc -= x[i + 1];
            }
            assert!((acc - rhs[i]).abs() < 1e-12);
        }
    }
}
