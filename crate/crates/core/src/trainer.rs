//! Joint optimization of the surrogate parameters θ and the operator
//! coefficients α.
//!
//! Every epoch takes one full-batch Adam step on θ against
//!
//! ```text
//! L(θ, α) = (1/N) Σ_i (u_θ(x_i,t_i) − u_i)²
//!           + λ_r ‖∂_t u_θ − Σ_j α_j T_j[u_θ]‖²_{L²(Ω×(0,T))}
//!           + λ_s ‖α‖₁
//! ```
//!
//! and every `alpha_update_period` epochs the α-subproblem is re-solved by
//! ISTA on a design matrix refreshed from the current surrogate (rows scaled
//! by the quadrature weights so the subproblem is exactly the α-part of L).
//! Coefficients start at one for every term.
//!
//! Gradients are accumulated over fixed-size point chunks that are reduced
//! in index order, so a run is bitwise reproducible for a given seed no
//! matter how many worker threads execute it.

use rayon::prelude::*;

use crate::design::{apply_operator_unchecked, assemble_design, operator_jet_gradient};
use crate::error::{CoreError, Result};
use crate::jet::JetSeed;
use crate::model::{
    apply_intervention, validate_model, CoefficientEstimate, Intervention, OperatorSpec, Point,
    SampleSet, SpaceTimeDomain, StructuralModel,
};
use crate::sparse::{ista_solve, LassoProblem};
use crate::surrogate::{SurrogateNet, Tape};

const GRAD_CHUNK: usize = 256;
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Hidden layer widths; the input and scalar output are implied.
    pub hidden: Vec<usize>,
    pub omega0: f64,
    /// Residual weight λ_r.
    pub lambda_r: f64,
    /// Sparsity weight λ_s.
    pub lambda_s: f64,
    /// Adam learning rate.
    pub lr: f64,
    pub epochs: usize,
    /// Epoch period of the ISTA coefficient refresh.
    pub alpha_update_period: usize,
    pub seed: u64,
    /// Relative total-loss change below which an epoch counts as converged.
    pub conv_rel_tol: f64,
    /// Converged epochs in a row required to stop early.
    pub conv_patience: usize,
    pub prune_tol: f64,
    pub ista_max_iter: usize,
    pub ista_tol: f64,
    /// Full-batch L-BFGS iterations run after the Adam phase (0 disables).
    /// Adam alone plateaus with derivative errors large enough to leak into
    /// spurious library terms; the quasi-Newton polish removes that floor.
    pub polish_iters: usize,
    /// Final coefficient estimate via the λ-sweep selection rule instead of
    /// a single ISTA solve at `lambda_s`.
    pub final_sweep: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![32, 32, 32],
            omega0: 3.0,
            lambda_r: 1.0,
            lambda_s: 0.01,
            lr: 1e-3,
            epochs: 3000,
            alpha_update_period: 50,
            seed: 0,
            conv_rel_tol: 1e-6,
            conv_patience: 50,
            prune_tol: crate::model::DEFAULT_PRUNE_TOL,
            ista_max_iter: 2000,
            ista_tol: 1e-10,
            polish_iters: 0,
            final_sweep: false,
        }
    }
}

impl TrainConfig {
    pub fn widths(&self, dim: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(dim + 1);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |why: String| {
            Err(CoreError::Invalid {
                what: "train config",
                why,
            })
        };
        if !(self.lambda_r >= 0.0) || !(self.lambda_s >= 0.0) {
            return fail("lambda_r and lambda_s must be >= 0".into());
        }
        if !(self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if !(self.prune_tol > 0.0) {
            return fail("prune_tol must be positive".into());
        }
        Ok(())
    }
}

/// Loss components; `total = data + λ_r·residual + λ_s·l1`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub data: f64,
    pub residual: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data: f64,
    pub residual: f64,
    pub l1: f64,
    pub total: f64,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub op_keys: Vec<String>,
    pub records: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: SurrogateNet,
    pub estimate: CoefficientEstimate,
    pub trace: TrainTrace,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1c = 1.0 - self.beta1.powi(self.t as i32);
        let b2c = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mhat = self.m[k] / b1c;
            let vhat = self.v[k] / b2c;
            params[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Full-batch loss and (optionally) its θ-gradient.
///
/// Chunked in fixed index order: results are independent of thread count.
fn loss_and_grad(
    net: &SurrogateNet,
    library: &[OperatorSpec],
    alpha: &[f64],
    samples: &[crate::model::Sample],
    colloc: &[(Point, f64)],
    domain: &SpaceTimeDomain,
    lambda_r: f64,
    lambda_s: f64,
    grad: Option<&mut [f64]>,
) -> LossParts {
    let need_grad = grad.is_some();
    let n_params = net.param_count();

    let res_partials: Vec<(f64, Option<Vec<f64>>)> = colloc
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut tape = Tape::new();
            let mut g = if need_grad {
                Some(vec![0.0; n_params])
            } else {
                None
            };
            let mut acc = 0.0;
            for &(p, w) in chunk {
                let jet = net.forward_jet(p, &mut tape);
                let mut r = jet.dt;
                let mut seed = JetSeed {
                    dt: 1.0,
                    ..Default::default()
                };
                for (op, &a) in library.iter().zip(alpha) {
                    if a == 0.0 {
                        continue;
                    }
                    r -= a * apply_operator_unchecked(op, &jet, p, domain);
                    if need_grad {
                        seed.add_scaled(&operator_jet_gradient(op, &jet), -a);
                    }
                }
                acc += w * r * r;
                if let Some(g) = g.as_mut() {
                    let scaled = seed.scaled(2.0 * lambda_r * w * r);
                    net.backward_jet(&mut tape, &scaled, g);
                }
            }
            (acc, g)
        })
        .collect();

    let n = samples.len();
    let data_partials: Vec<(f64, Option<Vec<f64>>)> = samples
        .par_chunks(GRAD_CHUNK * 4)
        .map(|chunk| {
            let mut tape = Tape::new();
            let mut g = if need_grad {
                Some(vec![0.0; n_params])
            } else {
                None
            };
            let mut acc = 0.0;
            for s in chunk {
                let u = net.forward_value(s.point, &mut tape);
                let e = u - s.u;
                acc += e * e;
                if let Some(g) = g.as_mut() {
                    net.backward_value(&mut tape, 2.0 * e / n as f64, g);
                }
            }
            (acc, g)
        })
        .collect();

    let mut residual = 0.0;
    let mut data = 0.0;
    if let Some(grad) = grad {
        for (acc, g) in &res_partials {
            residual += acc;
            let g = g.as_ref().expect("gradient requested");
            for (dst, src) in grad.iter_mut().zip(g) {
                *dst += src;
            }
        }
        for (acc, g) in &data_partials {
            data += acc;
            let g = g.as_ref().expect("gradient requested");
            for (dst, src) in grad.iter_mut().zip(g) {
                *dst += src;
            }
        }
    } else {
        for (acc, _) in &res_partials {
            residual += acc;
        }
        for (acc, _) in &data_partials {
            data += acc;
        }
    }
    if n > 0 {
        data /= n as f64;
    }
    let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
    LossParts {
        total: data + lambda_r * residual + lambda_s * l1,
        data,
        residual,
        l1,
    }
}

/// Loss of a fixed model on a sample set (no gradient).
pub fn loss(
    net: &SurrogateNet,
    model: &StructuralModel,
    samples: &SampleSet,
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    check_model(model, domain)?;
    let colloc = colloc_with_weights(samples);
    let parts = loss_and_grad(
        net,
        &model.library,
        &model.alpha,
        &samples.points,
        &colloc,
        domain,
        cfg.lambda_r,
        cfg.lambda_s,
        None,
    );
    if !parts.total.is_finite() {
        return Err(CoreError::NonFinite {
            context: format!(
                "loss (data={:.3e}, residual={:.3e}, l1={:.3e})",
                parts.data, parts.residual, parts.l1
            ),
        });
    }
    Ok(parts)
}

fn check_model(model: &StructuralModel, domain: &SpaceTimeDomain) -> Result<()> {
    let violations = validate_model(model, domain);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CoreError::Invalid {
            what: "structural model",
            why: violations
                .iter()
                .map(|v| v.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        })
    }
}

fn colloc_with_weights(samples: &SampleSet) -> Vec<(Point, f64)> {
    let grid = &samples.colloc;
    (0..grid.len())
        .map(|i| (grid.node(i), grid.weight(i)))
        .collect()
}

/// Solve the α-subproblem at fixed θ: the design matrix is refreshed from
/// the current surrogate at the collocation points and rows are scaled by
/// √(λ_r·w_i), so ISTA minimizes exactly λ_r‖R‖²_quad + λ_s‖α‖₁.
fn refresh_alpha(
    net: &SurrogateNet,
    library: &[OperatorSpec],
    warm: &[f64],
    colloc: &[(Point, f64)],
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    if cfg.lambda_r == 0.0 {
        // No residual term: the subproblem is pure ℓ1, minimized at zero
        // (or at the warm start when the ℓ1 weight also vanishes).
        let alpha = if cfg.lambda_s == 0.0 {
            warm.to_vec()
        } else {
            vec![0.0; library.len()]
        };
        return Ok((alpha, 0.0, 0.0));
    }
    let model = StructuralModel::new(library.to_vec(), vec![0.0; library.len()])?;
    let points: Vec<Point> = colloc.iter().map(|&(p, _)| p).collect();
    let dm = assemble_design(&model, net, &points, domain)?;
    let mut a = dm.a;
    let mut b = dm.b;
    for (i, &(_, w)) in colloc.iter().enumerate() {
        let s = (cfg.lambda_r * w).sqrt();
        for j in 0..dm.m {
            a[i * dm.m + j] *= s;
        }
        b[i] *= s;
    }
    let mut problem = LassoProblem::new(a, b, dm.n, dm.m, cfg.lambda_s)?;
    problem.max_iter = cfg.ista_max_iter;
    problem.tol = cfg.ista_tol;
    let sol = ista_solve(&problem, Some(warm))?;
    let first = *sol.objective.first().expect("objective recorded");
    let last = *sol.objective.last().expect("objective recorded");
    Ok((sol.alpha, first, last))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch L-BFGS (two-loop recursion, Armijo backtracking) on θ at fixed
/// α. Returns the number of iterations actually taken; stops early when the
/// line search stalls or the loss plateaus.
#[allow(clippy::too_many_arguments)]
fn lbfgs_rounds(
    net: &mut SurrogateNet,
    library: &[OperatorSpec],
    alpha: &[f64],
    samples: &[crate::model::Sample],
    colloc: &[(Point, f64)],
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
    iters: usize,
    trace: &mut TrainTrace,
    epoch_offset: usize,
) -> Result<usize> {
    const MEM: usize = 10;
    let n = net.param_count();
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> =
        std::collections::VecDeque::with_capacity(MEM);
    let mut grad = vec![0.0; n];
    let mut parts = loss_and_grad(
        net,
        library,
        alpha,
        samples,
        colloc,
        domain,
        cfg.lambda_r,
        cfg.lambda_s,
        Some(&mut grad),
    );
    let mut taken = 0usize;
    let mut prev_total = parts.total;
    let mut streak = 0usize;
    for it in 0..iters {
        // search direction from the two-loop recursion
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut coeffs = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for k in 0..n {
                d[k] -= a * y[k];
            }
            coeffs.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y).max(1e-300);
            for v in &mut d {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(coeffs.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for k in 0..n {
                d[k] += (a - b) * s[k];
            }
        }
        let mut g_dot_d = dot(&grad, &d);
        if g_dot_d >= 0.0 {
            // not a descent direction: restart from steepest descent
            hist.clear();
            d = grad.iter().map(|g| -g).collect();
            g_dot_d = dot(&grad, &d);
            if g_dot_d >= 0.0 {
                break; // zero gradient
            }
        }

        // Armijo backtracking
        let theta0 = net.params().to_vec();
        let f0 = parts.total;
        let mut t = if hist.is_empty() {
            (1.0 / dot(&d, &d).sqrt()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..30 {
            for (k, p) in net.params_mut().iter_mut().enumerate() {
                *p = theta0[k] + t * d[k];
            }
            let f = loss_and_grad(
                net,
                library,
                alpha,
                samples,
                colloc,
                domain,
                cfg.lambda_r,
                cfg.lambda_s,
                None,
            )
            .total;
            if f.is_finite() && f <= f0 + 1e-4 * t * g_dot_d {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            net.params_mut().copy_from_slice(&theta0);
            break;
        }

        let mut new_grad = vec![0.0; n];
        parts = loss_and_grad(
            net,
            library,
            alpha,
            samples,
            colloc,
            domain,
            cfg.lambda_r,
            cfg.lambda_s,
            Some(&mut new_grad),
        );
        taken = it + 1;
        trace.records.push(EpochRecord {
            epoch: epoch_offset + it,
            data: parts.data,
            residual: parts.residual,
            l1: parts.l1,
            total: parts.total,
            alpha: alpha.to_vec(),
        });
        if !parts.total.is_finite() || parts.total > DIVERGENCE_LIMIT {
            return Err(CoreError::Diverged {
                epoch: epoch_offset + it,
                loss: parts.total,
                trace: Box::new(std::mem::take(trace)),
            });
        }

        let s: Vec<f64> = d.iter().map(|v| t * v).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == MEM {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        grad = new_grad;

        let rel = (parts.total - prev_total).abs() / prev_total.abs().max(1e-300);
        if rel < cfg.conv_rel_tol {
            streak += 1;
        } else {
            streak = 0;
        }
        prev_total = parts.total;
        if streak >= cfg.conv_patience {
            break;
        }
    }
    Ok(taken)
}

/// Final coefficient estimate by the λ-sweep selection rule on the
/// quadrature-weighted design.
fn sweep_estimate(
    net: &SurrogateNet,
    library: &[OperatorSpec],
    colloc: &[(Point, f64)],
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let model = StructuralModel::new(library.to_vec(), vec![0.0; library.len()])?;
    let points: Vec<Point> = colloc.iter().map(|&(p, _)| p).collect();
    let dm = assemble_design(&model, net, &points, domain)?;
    let mut a = dm.a;
    let mut b = dm.b;
    for (i, &(_, w)) in colloc.iter().enumerate() {
        let s = (cfg.lambda_r.max(1e-300) * w).sqrt();
        for j in 0..dm.m {
            a[i * dm.m + j] *= s;
        }
        b[i] *= s;
    }
    let sweep = crate::sparse::lambda_sweep_with(&a, &b, dm.n, dm.m, 40)?;
    Ok(sweep.alpha)
}

/// Joint training per the alternating scheme. Returns the fitted surrogate,
/// the pruned coefficient estimate, and the per-epoch trace.
pub fn train(
    samples: &SampleSet,
    library: &[OperatorSpec],
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    samples.validate(domain)?;
    let m = library.len();
    let probe = StructuralModel::new(library.to_vec(), vec![1.0; m])?;
    check_model(&probe, domain)?;

    let mut net = SurrogateNet::init(&cfg.widths(domain.dim), cfg.omega0, cfg.seed)?
        .with_input_normalization(domain);
    let mut alpha = vec![1.0; m];
    let colloc = colloc_with_weights(samples);
    let mut adam = Adam::new(net.param_count(), cfg.lr);
    let mut grad = vec![0.0; net.param_count()];
    let mut trace = TrainTrace {
        op_keys: probe.keys(),
        records: Vec::with_capacity(cfg.epochs.min(8192)),
    };
    let mut prev_total = f64::INFINITY;
    let mut streak = 0usize;

    for epoch in 0..cfg.epochs {
        if cfg.alpha_update_period > 0 && epoch > 0 && epoch % cfg.alpha_update_period == 0 {
            let (new_alpha, obj_start, obj_end) =
                refresh_alpha(&net, library, &alpha, &colloc, domain, cfg)?;
            debug_assert!(
                obj_end <= obj_start * (1.0 + 1e-12) + 1e-12,
                "ISTA refresh increased the subproblem objective"
            );
            alpha = new_alpha;
        }

        grad.iter_mut().for_each(|g| *g = 0.0);
        let parts = loss_and_grad(
            &net,
            library,
            &alpha,
            &samples.points,
            &colloc,
            domain,
            cfg.lambda_r,
            cfg.lambda_s,
            Some(&mut grad),
        );
        trace.records.push(EpochRecord {
            epoch,
            data: parts.data,
            residual: parts.residual,
            l1: parts.l1,
            total: parts.total,
            alpha: alpha.clone(),
        });
        if !parts.total.is_finite() || parts.total > DIVERGENCE_LIMIT {
            return Err(CoreError::Diverged {
                epoch,
                loss: parts.total,
                trace: Box::new(trace),
            });
        }
        adam.step(net.params_mut(), &grad);

        let rel = (parts.total - prev_total).abs() / prev_total.abs().max(1e-300);
        if rel < cfg.conv_rel_tol {
            streak += 1;
        } else {
            streak = 0;
        }
        prev_total = parts.total;
        if streak >= cfg.conv_patience {
            break;
        }
    }

    // Quasi-Newton polish in rounds: refresh α, then L-BFGS on θ at fixed α.
    if cfg.polish_iters > 0 {
        let rounds = 4usize;
        let per_round = cfg.polish_iters.div_ceil(rounds);
        let mut offset = trace.records.last().map(|r| r.epoch + 1).unwrap_or(0);
        for _ in 0..rounds {
            let (new_alpha, _, _) = refresh_alpha(&net, library, &alpha, &colloc, domain, cfg)?;
            alpha = new_alpha;
            let taken = lbfgs_rounds(
                &mut net,
                library,
                &alpha,
                &samples.points,
                &colloc,
                domain,
                cfg,
                per_round,
                &mut trace,
                offset,
            )?;
            offset += taken;
            if taken == 0 {
                break;
            }
        }
    }

    // Final coefficient estimate matching the final surrogate: either one
    // ISTA refresh at λ_s or the sweep selection rule.
    let final_alpha = if cfg.final_sweep {
        sweep_estimate(&net, library, &colloc, domain, cfg)?
    } else {
        refresh_alpha(&net, library, &alpha, &colloc, domain, cfg)?.0
    };
    let estimate = CoefficientEstimate::new(final_alpha, cfg.prune_tol);
    Ok(TrainOutcome {
        net,
        estimate,
        trace,
    })
}

/// Baseline: identical surrogate optimization but with α frozen at the given
/// model's coefficients — no ISTA refresh, no ℓ1 term.
pub fn train_baseline_pinn(
    samples: &SampleSet,
    model: &StructuralModel,
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<(SurrogateNet, TrainTrace)> {
    cfg.validate()?;
    samples.validate(domain)?;
    check_model(model, domain)?;

    let mut net = SurrogateNet::init(&cfg.widths(domain.dim), cfg.omega0, cfg.seed)?
        .with_input_normalization(domain);
    let colloc = colloc_with_weights(samples);
    let mut adam = Adam::new(net.param_count(), cfg.lr);
    let mut grad = vec![0.0; net.param_count()];
    let mut trace = TrainTrace {
        op_keys: model.keys(),
        records: Vec::new(),
    };
    let mut prev_total = f64::INFINITY;
    let mut streak = 0usize;

    for epoch in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let parts = loss_and_grad(
            &net,
            &model.library,
            &model.alpha,
            &samples.points,
            &colloc,
            domain,
            cfg.lambda_r,
            0.0,
            Some(&mut grad),
        );
        trace.records.push(EpochRecord {
            epoch,
            data: parts.data,
            residual: parts.residual,
            l1: 0.0,
            total: parts.total,
            alpha: model.alpha.clone(),
        });
        if !parts.total.is_finite() || parts.total > DIVERGENCE_LIMIT {
            return Err(CoreError::Diverged {
                epoch,
                loss: parts.total,
                trace: Box::new(trace),
            });
        }
        adam.step(net.params_mut(), &grad);
        let rel = (parts.total - prev_total).abs() / prev_total.abs().max(1e-300);
        if rel < cfg.conv_rel_tol {
            streak += 1;
        } else {
            streak = 0;
        }
        prev_total = parts.total;
        if streak >= cfg.conv_patience {
            break;
        }
    }
    if cfg.polish_iters > 0 {
        let mut frozen = cfg.clone();
        frozen.lambda_s = 0.0;
        let offset = trace.records.last().map(|r| r.epoch + 1).unwrap_or(0);
        lbfgs_rounds(
            &mut net,
            &model.library,
            &model.alpha,
            &samples.points,
            &colloc,
            domain,
            &frozen,
            cfg.polish_iters,
            &mut trace,
            offset,
        )?;
    }
    Ok((net, trace))
}

/// Re-optimize θ only under the intervened model with a residual-only loss
/// (the counterfactual world has no observations), warm-starting from the
/// factual surrogate. Returns the counterfactual surrogate and the
/// quadrature L² deviation between the two fields.
///
/// A null intervention (the intervened model equals the factual one) returns
/// the warm start unchanged with zero deviation: the counterfactual of
/// "change nothing" is the factual world, and re-optimizing would only add
/// optimizer drift.
pub fn retrain_counterfactual(
    net: &SurrogateNet,
    model: &StructuralModel,
    iv: &Intervention,
    samples: &SampleSet,
    domain: &SpaceTimeDomain,
    cfg: &TrainConfig,
) -> Result<(SurrogateNet, f64)> {
    cfg.validate()?;
    let intervened = apply_intervention(model, iv)?;
    if intervened == *model {
        return Ok((net.clone(), 0.0));
    }
    check_model(&intervened, domain)?;

    let colloc = colloc_with_weights(samples);
    let mut cf = net.clone();
    let mut adam = Adam::new(cf.param_count(), cfg.lr);
    let mut grad = vec![0.0; cf.param_count()];
    let mut prev_total = f64::INFINITY;
    let mut streak = 0usize;
    let mut trace = TrainTrace {
        op_keys: intervened.keys(),
        records: Vec::new(),
    };

    for epoch in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let parts = loss_and_grad(
            &cf,
            &intervened.library,
            &intervened.alpha,
            &[],
            &colloc,
            domain,
            cfg.lambda_r,
            0.0,
            Some(&mut grad),
        );
        trace.records.push(EpochRecord {
            epoch,
            data: 0.0,
            residual: parts.residual,
            l1: 0.0,
            total: parts.total,
            alpha: intervened.alpha.clone(),
        });
        if !parts.total.is_finite() || parts.total > DIVERGENCE_LIMIT {
            return Err(CoreError::Diverged {
                epoch,
                loss: parts.total,
                trace: Box::new(trace),
            });
        }
        adam.step(cf.params_mut(), &grad);
        let rel = (parts.total - prev_total).abs() / prev_total.abs().max(1e-300);
        if rel < cfg.conv_rel_tol {
            streak += 1;
        } else {
            streak = 0;
        }
        prev_total = parts.total;
        if streak >= cfg.conv_patience {
            break;
        }
    }
    if cfg.polish_iters > 0 {
        let mut frozen = cfg.clone();
        frozen.lambda_s = 0.0;
        let offset = trace.records.last().map(|r| r.epoch + 1).unwrap_or(0);
        lbfgs_rounds(
            &mut cf,
            &intervened.library,
            &intervened.alpha,
            &[],
            &colloc,
            domain,
            &frozen,
            cfg.polish_iters,
            &mut trace,
            offset,
        )?;
    }

    let mut acc = 0.0;
    for &(p, w) in &colloc {
        let d = net.eval_value(p) - cf.eval_value(p);
        acc += w * d * d;
    }
    Ok((cf, acc.sqrt()))
}
