//! ℓ1-regularized coefficient estimation on a fixed design matrix.
//!
//! `ista_solve` runs proximal gradient descent on
//!
//! ```text
//! F(α) = ‖Aα − b‖₂² + λ‖α‖₁
//! ```
//!
//! with step 1/L, L = λ_max(AᵀA) from power iteration. The proximal step is
//! `α ← ST_{λ·step/2}(α − step·Aᵀ(Aα − b))`; the ½ in the threshold pairs the
//! soft-threshold with the un-halved quadratic so the objective is provably
//! non-increasing (and the orthonormal-design fixed point is the closed form
//! `α_j = ST_{λ/2}((Aᵀb)_j)`).

use crate::error::{CoreError, Result};
use crate::linalg;

/// sign(x)·max(|x|−lam, 0).
#[inline]
pub fn soft_threshold(x: f64, lam: f64) -> f64 {
    debug_assert!(lam >= 0.0);
    if x > lam {
        x - lam
    } else if x < -lam {
        x + lam
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct LassoProblem {
    /// Row-major N×m design.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub n: usize,
    pub m: usize,
    /// ℓ1 weight, ≥ 0.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop when ‖Δα‖∞ falls below this.
    pub tol: f64,
}

impl LassoProblem {
    pub fn new(a: Vec<f64>, b: Vec<f64>, n: usize, m: usize, lambda: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(CoreError::Empty("lasso design"));
        }
        if a.len() != n * m || b.len() != n {
            return Err(CoreError::LengthMismatch {
                context: "lasso problem",
                expected: n * m,
                got: a.len(),
            });
        }
        if !(lambda >= 0.0) {
            return Err(CoreError::Invalid {
                what: "lasso lambda",
                why: format!("must be >= 0, got {lambda}"),
            });
        }
        Ok(LassoProblem {
            a,
            b,
            n,
            m,
            lambda,
            max_iter: 10_000,
            tol: 1e-12,
        })
    }

    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let r = linalg::mat_vec(&self.a, self.n, self.m, alpha);
        let quad: f64 = r
            .iter()
            .zip(&self.b)
            .map(|(ax, b)| (ax - b) * (ax - b))
            .sum();
        quad + self.lambda * alpha.iter().map(|x| x.abs()).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct IstaResult {
    pub alpha: Vec<f64>,
    /// Objective after each iteration, starting with the initial point.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Proximal gradient descent from `warm` (zeros when absent).
pub fn ista_solve(p: &LassoProblem, warm: Option<&[f64]>) -> Result<IstaResult> {
    let gram = linalg::gram(&p.a, p.n, p.m);
    let lmax = linalg::power_iter_max_eig(&gram, p.m, 100);
    if lmax <= 0.0 {
        return Err(CoreError::ZeroColumn {
            index: 0,
            key: "all columns are zero".into(),
        });
    }
    let step = 1.0 / lmax;
    let thresh = 0.5 * p.lambda * step;

    let mut alpha = match warm {
        Some(w) => {
            if w.len() != p.m {
                return Err(CoreError::LengthMismatch {
                    context: "ista warm start",
                    expected: p.m,
                    got: w.len(),
                });
            }
            w.to_vec()
        }
        None => vec![0.0; p.m],
    };
    let atb = linalg::mat_t_vec(&p.a, p.n, p.m, &p.b);

    let mut objective = Vec::with_capacity(64);
    objective.push(p.objective(&alpha));
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..p.max_iter {
        iterations = it + 1;
        // ∇½‖Aα−b‖² = Aᵀ(Aα−b) = Gα − Aᵀb
        let mut grad = linalg::mat_vec(&gram, p.m, p.m, &alpha);
        for j in 0..p.m {
            grad[j] -= atb[j];
        }
        let mut delta_max = 0.0_f64;
        for j in 0..p.m {
            let next = soft_threshold(alpha[j] - step * grad[j], thresh);
            delta_max = delta_max.max((next - alpha[j]).abs());
            alpha[j] = next;
        }
        if alpha.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite {
                context: format!("ista iterate at iteration {it} (badly scaled design?)"),
            });
        }
        objective.push(p.objective(&alpha));
        if delta_max < p.tol {
            converged = true;
            break;
        }
    }
    Ok(IstaResult {
        alpha,
        objective,
        iterations,
        converged,
    })
}

/// Sufficient-condition certificate for exact s-sparse support recovery.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct RecoveryCertificate {
    pub mu: f64,
    /// 1/(2s − 1).
    pub coherence_bound: f64,
    pub sparsity: usize,
    /// Numerical rank: singular values above 1e-10·σ_max.
    pub rank: usize,
    pub full_rank: bool,
    pub coherence_ok: bool,
    pub note: String,
}

/// Compute μ, the coherence bound for sparsity `s`, and a rank estimate.
/// Restricted-isometry constants are not certified (their verification is
/// intractable); coherence is the sufficient condition checked here.
pub fn certify_recovery(a: &[f64], n: usize, m: usize, s: usize) -> Result<RecoveryCertificate> {
    if s < 1 {
        return Err(CoreError::Invalid {
            what: "sparsity",
            why: "s must be at least 1".into(),
        });
    }
    let mu = crate::design::mutual_coherence(a, n, m)?;
    let bound = 1.0 / (2.0 * s as f64 - 1.0);
    let sv = linalg::singular_values(a, n, m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&x| x > 1e-10 * smax).count();
    Ok(RecoveryCertificate {
        mu,
        coherence_bound: bound,
        sparsity: s,
        rank,
        full_rank: rank == m,
        coherence_ok: mu < bound,
        note: "coherence checked as the sufficient condition; RIP not certified".into(),
    })
}

/// Result of a log-grid sweep over λ.
#[derive(Clone, Debug)]
pub struct LambdaSweep {
    pub chosen_lambda: f64,
    pub alpha: Vec<f64>,
    pub support: Vec<usize>,
    /// (λ, support, refit residual norm) per grid point.
    pub candidates: Vec<(f64, Vec<usize>, f64)>,
}

/// Sweep λ over a 10-point log grid and pick the sparsest support whose
/// least-squares refit residual stays within 5% of the λ = 0 residual.
/// The refit is used for *selection only*; the returned coefficients are the
/// ISTA solution at the chosen λ.
///
/// Columns are normalized to unit length internally so the ℓ1 path treats
/// every operator on the same footing regardless of its raw magnitude; the
/// returned coefficients are rescaled back to the original units.
pub fn lambda_sweep(a_raw: &[f64], b: &[f64], n: usize, m: usize) -> Result<LambdaSweep> {
    lambda_sweep_with(a_raw, b, n, m, 10)
}

/// [`lambda_sweep`] with a custom grid resolution over the same λ range.
/// Finer grids resolve narrow windows on strongly correlated designs where
/// two terms leave the path at nearby λ values.
pub fn lambda_sweep_with(
    a_raw: &[f64],
    b: &[f64],
    n: usize,
    m: usize,
    grid_points: usize,
) -> Result<LambdaSweep> {
    let mut norms = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            norms[j] += a_raw[i * m + j] * a_raw[i * m + j];
        }
    }
    for (j, v) in norms.iter_mut().enumerate() {
        if *v == 0.0 {
            return Err(CoreError::ZeroColumn {
                index: j,
                key: String::new(),
            });
        }
        *v = v.sqrt();
    }
    let mut a = a_raw.to_vec();
    for i in 0..n {
        for j in 0..m {
            a[i * m + j] /= norms[j];
        }
    }
    let a = &a[..];
    let atb = linalg::mat_t_vec(a, n, m, b);
    let lam_max = atb.iter().fold(0.0_f64, |acc, x| acc.max(2.0 * x.abs()));
    if lam_max == 0.0 {
        return Err(CoreError::Empty("lambda sweep: A'b is zero"));
    }
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();

    // λ = 0 reference residual (full least squares)
    let ls = linalg::least_squares(a, n, m, b)?;
    let res0 = residual_norm(a, b, n, m, &ls);
    let budget = (1.05 * res0).max(res0 + 1e-8 * bnorm);

    let grid: Vec<f64> = (0..grid_points)
        .map(|k| lam_max * 10f64.powf(-5.0 + 5.0 * k as f64 / (grid_points - 1) as f64))
        .collect();

    let mut candidates = Vec::new();
    let mut best: Option<(usize, f64, Vec<f64>, Vec<usize>)> = None;
    for &lam in &grid {
        let problem = LassoProblem::new(a.to_vec(), b.to_vec(), n, m, lam)?;
        let sol = ista_solve(&problem, None)?;
        // support judged in the original units
        let support: Vec<usize> = (0..m)
            .filter(|&j| (sol.alpha[j] / norms[j]).abs() > crate::model::DEFAULT_PRUNE_TOL)
            .collect();
        let refit_res = if support.is_empty() {
            bnorm
        } else {
            let (sub, _) = restrict_columns(a, n, m, &support);
            let coef = linalg::least_squares(&sub, n, support.len(), b)?;
            residual_norm(&sub, b, n, support.len(), &coef)
        };
        candidates.push((lam, support.clone(), refit_res));
        if refit_res <= budget {
            let better = match &best {
                None => true,
                Some((sz, _, _, _)) => support.len() < *sz,
            };
            if better {
                best = Some((support.len(), lam, sol.alpha.clone(), support));
            }
        }
    }
    let (_, chosen_lambda, alpha, support) = best.unwrap_or_else(|| {
        // nothing met the budget: fall back to the densest (smallest λ) fit
        let problem =
            LassoProblem::new(a.to_vec(), b.to_vec(), n, m, grid[0]).expect("validated above");
        let sol = ista_solve(&problem, None).expect("same problem solved above");
        let support = (0..m)
            .filter(|&j| (sol.alpha[j] / norms[j]).abs() > crate::model::DEFAULT_PRUNE_TOL)
            .collect();
        (0, grid[0], sol.alpha, support)
    });
    // back to the original column units
    let alpha: Vec<f64> = alpha.iter().zip(&norms).map(|(x, s)| x / s).collect();
    Ok(LambdaSweep {
        chosen_lambda,
        alpha,
        support,
        candidates,
    })
}

fn residual_norm(a: &[f64], b: &[f64], n: usize, m: usize, x: &[f64]) -> f64 {
    let ax = linalg::mat_vec(a, n, m, x);
    ax.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn restrict_columns(a: &[f64], n: usize, m: usize, cols: &[usize]) -> (Vec<f64>, usize) {
    let k = cols.len();
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        for &j in cols {
            out.push(a[i * m + j]);
        }
    }
    (out, k)
}
