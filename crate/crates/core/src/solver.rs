//! Explicit finite-difference reference solver and benchmark generation.
//!
//! `solve_fd` marches the anchored model `∂_t u = Σ_j α_j T_j[u]` with
//! forward Euler in time and second-order central differences in space.
//! Dirichlet boundary values are taken from the initial condition's trace and
//! held fixed. Nonlinear terms are evaluated pointwise explicitly. Stability
//! is enforced by error — a diffusion-limit check up front plus a blow-up
//! guard while marching — never by silently shrinking the step, so a run is
//! reproducible from its configuration alone.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::GriddedField;
use crate::model::{
    apply_intervention, validate_model, InitialCondition, Intervention, OpKind, OperatorSpec,
    Point, Sample, SampleSet, SourceFn, SpaceTimeDomain, StructuralModel,
};
use crate::quadrature::CollocGrid;
use crate::rng::Rng;

const BLOWUP_LIMIT: f64 = 1e6;

/// Forward-Euler / central-difference solve of the model from the given
/// initial condition.
pub fn solve_fd(
    model: &StructuralModel,
    ic: &InitialCondition,
    domain: &SpaceTimeDomain,
) -> Result<GriddedField> {
    let violations = validate_model(model, domain);
    if !violations.is_empty() {
        return Err(CoreError::Invalid {
            what: "structural model",
            why: violations
                .iter()
                .map(|v| v.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }

    let dim = domain.dim;
    let nx = domain.nx[0];
    let ny = domain.ny();
    let nt = domain.nt;
    let dx = domain.dx(0);
    let dy = if dim == 2 { domain.dx(1) } else { 1.0 };
    let dt = domain.dt();

    // Diffusion stability limit: dt · Σ_axes |α_diff| · 2/h² ≤ 1.
    let mut rx = 0.0;
    let mut ry = 0.0;
    for (op, &a) in model.library.iter().zip(&model.alpha) {
        match op.kind {
            OpKind::Dxx => rx += a.abs(),
            OpKind::Dyy => ry += a.abs(),
            OpKind::Lap => {
                rx += a.abs();
                if dim == 2 {
                    ry += a.abs();
                }
            }
            _ => {}
        }
    }
    let rate = 2.0 * (rx / (dx * dx) + if dim == 2 { ry / (dy * dy) } else { 0.0 });
    if rate > 0.0 {
        let limit = 1.0 / rate;
        if dt > limit {
            return Err(CoreError::Unstable { dt, limit });
        }
    }

    let xs = domain.xs(0);
    let ys = if dim == 2 { domain.xs(1) } else { vec![0.0] };

    let slice_len = nx * ny;
    let mut values = Vec::with_capacity(domain.n_nodes());
    let mut cur = vec![0.0; slice_len];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Point {
                x: xs[ix],
                y: ys[iy],
                t: 0.0,
            };
            cur[iy * nx + ix] = ic.eval(p, domain);
        }
    }
    values.extend_from_slice(&cur);

    let mut next = vec![0.0; slice_len];
    for step in 0..nt - 1 {
        let t = step as f64 * dt;
        // boundary rows stay at the initial trace
        next.copy_from_slice(&cur);
        let iy_range = if dim == 2 { 1..ny - 1 } else { 0..1 };
        for iy in iy_range {
            for ix in 1..nx - 1 {
                let i = iy * nx + ix;
                let mut rhs = 0.0;
                for (op, &a) in model.library.iter().zip(&model.alpha) {
                    if a == 0.0 {
                        continue;
                    }
                    rhs += a * fd_operator(
                        op,
                        &cur,
                        ix,
                        iy,
                        nx,
                        dx,
                        dy,
                        dim,
                        Point {
                            x: xs[ix],
                            y: ys[iy],
                            t,
                        },
                        domain,
                    );
                }
                next[i] = cur[i] + dt * rhs;
            }
        }
        let max = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !max.is_finite() || max > BLOWUP_LIMIT {
            return Err(CoreError::BlowUp {
                step: step + 1,
                max,
            });
        }
        values.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }

    GriddedField::new(*domain, values)
}

/// Central-difference evaluation of one term at an interior node.
#[allow(clippy::too_many_arguments)]
#[inline]
fn fd_operator(
    op: &OperatorSpec,
    u: &[f64],
    ix: usize,
    iy: usize,
    nx: usize,
    dx: f64,
    dy: f64,
    dim: usize,
    p: Point,
    domain: &SpaceTimeDomain,
) -> f64 {
    let i = iy * nx + ix;
    let uc = u[i];
    match op.kind {
        OpKind::U => uc,
        OpKind::U2 => uc * uc,
        OpKind::U3 => uc * uc * uc,
        OpKind::Dx => (u[i + 1] - u[i - 1]) / (2.0 * dx),
        OpKind::Dxx => (u[i + 1] - 2.0 * uc + u[i - 1]) / (dx * dx),
        OpKind::Dy => (u[i + nx] - u[i - nx]) / (2.0 * dy),
        OpKind::Dyy => (u[i + nx] - 2.0 * uc + u[i - nx]) / (dy * dy),
        OpKind::Dxy => {
            (u[i + nx + 1] - u[i + nx - 1] - u[i - nx + 1] + u[i - nx - 1]) / (4.0 * dx * dy)
        }
        OpKind::Lap => {
            let mut lap = (u[i + 1] - 2.0 * uc + u[i - 1]) / (dx * dx);
            if dim == 2 {
                lap += (u[i + nx] - 2.0 * uc + u[i - nx]) / (dy * dy);
            }
            lap
        }
        OpKind::AdvX => uc * (u[i + 1] - u[i - 1]) / (2.0 * dx),
        OpKind::AdvY => uc * (u[i + nx] - u[i - nx]) / (2.0 * dy),
        OpKind::Source => op.source.map(|f| f.eval(p, domain)).unwrap_or(0.0),
    }
}

/// Apply the intervention, then solve with unchanged initial and boundary
/// data.
pub fn solve_counterfactual(
    model: &StructuralModel,
    iv: &Intervention,
    ic: &InitialCondition,
    domain: &SpaceTimeDomain,
) -> Result<GriddedField> {
    let intervened = apply_intervention(model, iv)?;
    solve_fd(&intervened, ic, domain)
}

/// Named benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkName {
    Reaction1d,
    AdvDiff2d,
    ReacDiff2d,
    Orthogonal1d,
    Heat1d,
}

impl BenchmarkName {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkName::Reaction1d => "reaction1d",
            BenchmarkName::AdvDiff2d => "advdiff2d",
            BenchmarkName::ReacDiff2d => "reacdiff2d",
            BenchmarkName::Orthogonal1d => "orthogonal1d",
            BenchmarkName::Heat1d => "heat1d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reaction1d" => Ok(BenchmarkName::Reaction1d),
            "advdiff2d" => Ok(BenchmarkName::AdvDiff2d),
            "reacdiff2d" => Ok(BenchmarkName::ReacDiff2d),
            "orthogonal1d" => Ok(BenchmarkName::Orthogonal1d),
            "heat1d" => Ok(BenchmarkName::Heat1d),
            other => Err(CoreError::Invalid {
                what: "benchmark name",
                why: format!(
                    "unknown benchmark `{other}` (expected one of reaction1d, advdiff2d, \
                     reacdiff2d, orthogonal1d, heat1d)"
                ),
            }),
        }
    }

    pub fn all() -> [BenchmarkName; 5] {
        [
            BenchmarkName::Reaction1d,
            BenchmarkName::AdvDiff2d,
            BenchmarkName::ReacDiff2d,
            BenchmarkName::Orthogonal1d,
            BenchmarkName::Heat1d,
        ]
    }
}

/// Full description of one synthetic discovery problem: the generating model,
/// the (larger) candidate library handed to discovery, grids, and sampling.
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub name: BenchmarkName,
    pub true_model: StructuralModel,
    pub library: Vec<OperatorSpec>,
    pub ic: InitialCondition,
    pub domain: SpaceTimeDomain,
    pub n_samples: usize,
    pub noise_sigma: f64,
    /// Collocation grid resolution for training quadrature.
    pub colloc_nx: usize,
    pub colloc_ny: usize,
    pub colloc_nt: usize,
}

impl BenchmarkSpec {
    pub fn by_name(name: BenchmarkName) -> Self {
        use std::f64::consts::PI;
        match name {
            BenchmarkName::Reaction1d => BenchmarkSpec {
                name,
                // logistic reaction ∂_t u = u − u²; the horizon stops well
                // before saturation so the u and u² columns stay
                // distinguishable
                true_model: StructuralModel::from_pairs(vec![
                    (OperatorSpec::u(), 1.0),
                    (OperatorSpec::u2(), -1.0),
                ]),
                library: vec![OperatorSpec::u(), OperatorSpec::u2(), OperatorSpec::dxx()],
                ic: InitialCondition::OffsetSine {
                    base: 0.5,
                    amp: 0.4,
                },
                domain: SpaceTimeDomain::dim1(0.0, 1.0, 0.5, 101, 1001).expect("static domain"),
                n_samples: 500,
                noise_sigma: 0.0,
                colloc_nx: 29,
                colloc_ny: 1,
                colloc_nt: 29,
            },
            BenchmarkName::AdvDiff2d => BenchmarkSpec {
                name,
                // drifting, decaying bump: ∂_t u = −0.7 u_x − 0.5 u_y − 0.4 u
                true_model: StructuralModel::from_pairs(vec![
                    (OperatorSpec::dx(), -0.7),
                    (OperatorSpec::dy(), -0.5),
                    (OperatorSpec::u(), -0.4),
                ]),
                library: vec![
                    OperatorSpec::u(),
                    OperatorSpec::dx(),
                    OperatorSpec::dy(),
                    OperatorSpec::lap(),
                ],
                ic: InitialCondition::Gauss2d {
                    x0: 0.3,
                    y0: 0.35,
                    sigma: 0.09,
                    amp: 1.0,
                },
                domain: SpaceTimeDomain::dim2([0.0, 0.0], [1.0, 1.0], 0.5, [61, 61], 801)
                    .expect("static domain"),
                n_samples: 2500,
                noise_sigma: 0.0,
                colloc_nx: 13,
                colloc_ny: 13,
                colloc_nt: 9,
            },
            BenchmarkName::ReacDiff2d => BenchmarkSpec {
                name,
                true_model: StructuralModel::from_pairs(vec![
                    (OperatorSpec::lap(), 0.05),
                    (OperatorSpec::u(), 1.0),
                    (OperatorSpec::u2(), -1.0),
                ]),
                library: vec![
                    OperatorSpec::u(),
                    OperatorSpec::u2(),
                    OperatorSpec::lap(),
                    OperatorSpec::dx(),
                    OperatorSpec::dy(),
                ],
                ic: InitialCondition::Gauss2d {
                    x0: 0.5,
                    y0: 0.5,
                    sigma: 0.2,
                    amp: 0.9,
                },
                domain: SpaceTimeDomain::dim2([0.0, 0.0], [1.0, 1.0], 0.4, [61, 61], 801)
                    .expect("static domain"),
                n_samples: 2000,
                noise_sigma: 0.0,
                colloc_nx: 13,
                colloc_ny: 13,
                colloc_nt: 9,
            },
            BenchmarkName::Orthogonal1d => BenchmarkSpec {
                name,
                // pure decay of the first sine mode
                true_model: StructuralModel::from_pairs(vec![(OperatorSpec::u(), -PI * PI)]),
                library: vec![
                    OperatorSpec::u(),
                    OperatorSpec::source(SourceFn::Sin2PiX),
                ],
                ic: InitialCondition::SinPiX,
                domain: SpaceTimeDomain::dim1(0.0, 1.0, 0.2, 121, 2001).expect("static domain"),
                n_samples: 300,
                noise_sigma: 0.0,
                colloc_nx: 33,
                colloc_ny: 1,
                colloc_nt: 25,
            },
            BenchmarkName::Heat1d => BenchmarkSpec {
                name,
                true_model: StructuralModel::from_pairs(vec![(OperatorSpec::dxx(), 1.0)]),
                library: vec![OperatorSpec::dxx(), OperatorSpec::u(), OperatorSpec::u2()],
                // two decaying modes: on a single eigenmode u_xx is exactly
                // proportional to u and the library would be unidentifiable
                ic: InitialCondition::TwoSines { a1: 1.0, a2: 0.4 },
                // short horizon (the fast mode stays visible) and some
                // diffusion-stability headroom so counterfactual solves of
                // fitted models with nu slightly above 1 stay admissible
                domain: SpaceTimeDomain::dim1(0.0, 1.0, 0.05, 201, 4501).expect("static domain"),
                n_samples: 400,
                noise_sigma: 0.0,
                colloc_nx: 33,
                colloc_ny: 1,
                colloc_nt: 21,
            },
        }
    }

    /// Keys of the truly active operators.
    pub fn expected_support(&self) -> Vec<String> {
        self.true_model.support_keys(crate::model::DEFAULT_PRUNE_TOL)
    }

    /// Candidate-library model with all coefficients at the given value.
    pub fn library_model(&self, alpha0: f64) -> StructuralModel {
        StructuralModel::from_pairs(self.library.iter().map(|op| (*op, alpha0)).collect())
    }

    pub fn colloc_grid(&self) -> CollocGrid {
        CollocGrid::uniform(&self.domain, self.colloc_nx, self.colloc_ny, self.colloc_nt)
    }

    pub fn validate(&self) -> Result<()> {
        let lib_keys: Vec<String> = self.library.iter().map(|o| o.key()).collect();
        for key in self.expected_support() {
            if !lib_keys.contains(&key) {
                return Err(CoreError::Invalid {
                    what: "benchmark",
                    why: format!("true operator {key} missing from the candidate library"),
                });
            }
        }
        Ok(())
    }
}

/// Solve the true model, sample observation points uniformly at random from
/// interior grid nodes (seeded), and add Gaussian noise to the u values.
pub fn generate_benchmark(spec: &BenchmarkSpec, seed: u64) -> Result<(SampleSet, GriddedField)> {
    spec.validate()?;
    let truth = solve_fd(&spec.true_model, &spec.ic, &spec.domain)?;
    let domain = &spec.domain;
    let (nx, ny, nt) = (domain.nx[0], domain.ny(), domain.nt);
    let inx = nx - 2;
    let iny = if domain.dim == 2 { ny - 2 } else { 1 };
    let interior = inx * iny * nt;
    if spec.n_samples > interior {
        return Err(CoreError::Invalid {
            what: "benchmark",
            why: format!(
                "requested {} samples but only {interior} interior nodes exist",
                spec.n_samples
            ),
        });
    }
    let mut rng = Rng::new(seed);
    let chosen = rng.sample_indices(interior, spec.n_samples);
    let mut points = Vec::with_capacity(spec.n_samples);
    for flat in chosen {
        let it = flat / (inx * iny);
        let rem = flat % (inx * iny);
        let iy = if domain.dim == 2 { rem / inx + 1 } else { 0 };
        let ix = rem % inx + 1;
        let p = truth.node_point(ix, iy, it);
        let mut u = truth.at(ix, iy, it);
        if spec.noise_sigma > 0.0 {
            u += spec.noise_sigma * rng.normal();
        }
        points.push(Sample { point: p, u });
    }
    let samples = SampleSet {
        points,
        colloc: spec.colloc_grid(),
        noise_sigma: spec.noise_sigma,
    };
    samples.validate(domain)?;
    Ok((samples, truth))
}
