//! Operator evaluation on jets, design-matrix assembly, residual fields,
//! and the mutual coherence of a design.
//!
//! The design matrix pairs `A_ij = T_j[u](x_i, t_i)` with the anchored
//! target `b_i = ∂_t u(x_i, t_i)`, so a coefficient vector α explains the
//! data exactly when `b = Aα`.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::FieldEval;
use crate::jet::{Jet2, JetSeed};
use crate::model::{OpKind, OperatorSpec, Point, SpaceTimeDomain, StructuralModel};
use crate::quadrature::{l2_norm, CollocGrid};

/// Evaluate one library term on a jet.
pub fn apply_operator(
    spec: &OperatorSpec,
    jet: &Jet2,
    point: Point,
    domain: &SpaceTimeDomain,
) -> Result<f64> {
    if spec.needs_y() && jet.dim == 1 {
        return Err(CoreError::AxisMismatch { op: spec.key() });
    }
    Ok(apply_operator_unchecked(spec, jet, point, domain))
}

/// Same as [`apply_operator`] without the axis check; used in hot loops after
/// the model has been validated against the domain once.
#[inline]
pub fn apply_operator_unchecked(
    spec: &OperatorSpec,
    jet: &Jet2,
    point: Point,
    domain: &SpaceTimeDomain,
) -> f64 {
    match spec.kind {
        OpKind::U => jet.value,
        OpKind::U2 => jet.value * jet.value,
        OpKind::U3 => jet.value * jet.value * jet.value,
        OpKind::Dx => jet.dx,
        OpKind::Dy => jet.dy,
        OpKind::Dxx => jet.dxx,
        OpKind::Dyy => jet.dyy,
        OpKind::Dxy => jet.dxy,
        OpKind::Lap => jet.laplacian(),
        OpKind::AdvX => jet.value * jet.dx,
        OpKind::AdvY => jet.value * jet.dy,
        OpKind::Source => spec
            .source
            .map(|f| f.eval(point, domain))
            .unwrap_or(0.0),
    }
}

/// Gradient of `T[u]` with respect to the jet components (the reverse-mode
/// seed contribution of one term).
#[inline]
pub fn operator_jet_gradient(spec: &OperatorSpec, jet: &Jet2) -> JetSeed {
    let mut g = JetSeed::default();
    match spec.kind {
        OpKind::U => g.value = 1.0,
        OpKind::U2 => g.value = 2.0 * jet.value,
        OpKind::U3 => g.value = 3.0 * jet.value * jet.value,
        OpKind::Dx => g.dx = 1.0,
        OpKind::Dy => g.dy = 1.0,
        OpKind::Dxx => g.dxx = 1.0,
        OpKind::Dyy => g.dyy = 1.0,
        OpKind::Dxy => g.dxy = 1.0,
        OpKind::Lap => {
            g.dxx = 1.0;
            if jet.dim == 2 {
                g.dyy = 1.0;
            }
        }
        OpKind::AdvX => {
            g.value = jet.dx;
            g.dx = jet.value;
        }
        OpKind::AdvY => {
            g.value = jet.dy;
            g.dy = jet.value;
        }
        OpKind::Source => {}
    }
    g
}

/// N×m operator evaluations with the anchored target vector.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub op_keys: Vec<String>,
    /// Row-major N×m.
    pub a: Vec<f64>,
    /// b_i = ∂_t u(x_i, t_i).
    pub b: Vec<f64>,
    pub points: Vec<Point>,
    pub n: usize,
    pub m: usize,
}

impl DesignMatrix {
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.a[i * self.m + j]).collect()
    }
}

/// Evaluate every library term of `model` on the field at the given points.
pub fn assemble_design(
    model: &StructuralModel,
    field: &dyn FieldEval,
    points: &[Point],
    domain: &SpaceTimeDomain,
) -> Result<DesignMatrix> {
    if points.is_empty() {
        return Err(CoreError::Empty("design matrix points"));
    }
    let m = model.library.len();
    for op in &model.library {
        if op.needs_y() && field.dim() == 1 {
            return Err(CoreError::AxisMismatch { op: op.key() });
        }
    }
    let rows: Vec<(Vec<f64>, f64)> = points
        .par_chunks(512)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&p| {
                    let jet = field.jet(p);
                    let row: Vec<f64> = model
                        .library
                        .iter()
                        .map(|op| apply_operator_unchecked(op, &jet, p, domain))
                        .collect();
                    (row, jet.dt)
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();

    let mut a = Vec::with_capacity(points.len() * m);
    let mut b = Vec::with_capacity(points.len());
    for (i, (row, bt)) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!(
                        "design entry for operator {} at point ({}, {}, {})",
                        model.library[j].key(),
                        points[i].x,
                        points[i].y,
                        points[i].t
                    ),
                });
            }
            a.push(*v);
        }
        if !bt.is_finite() {
            return Err(CoreError::NonFinite {
                context: format!(
                    "time derivative at point ({}, {}, {})",
                    points[i].x, points[i].y, points[i].t
                ),
            });
        }
        b.push(*bt);
    }
    Ok(DesignMatrix {
        op_keys: model.keys(),
        a,
        b,
        points: points.to_vec(),
        n: points.len(),
        m,
    })
}

/// Pointwise anchored residual r_i = ∂_t u − Σ_j α_j T_j[u] on a collocation
/// grid, with its quadrature L² norm.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub values: Vec<f64>,
    pub norm: f64,
}

pub fn residual_field(
    model: &StructuralModel,
    field: &dyn FieldEval,
    grid: &CollocGrid,
    domain: &SpaceTimeDomain,
) -> Result<ResidualField> {
    let dm = assemble_design(model, field, &grid.points(), domain)?;
    let mut values = Vec::with_capacity(dm.n);
    for i in 0..dm.n {
        let mut r = dm.b[i];
        for j in 0..dm.m {
            r -= model.alpha[j] * dm.a[i * dm.m + j];
        }
        values.push(r);
    }
    let norm = l2_norm(&values, grid)?;
    Ok(ResidualField { values, norm })
}

/// μ = max_{i≠j} |⟨A_i, A_j⟩| / (‖A_i‖·‖A_j‖) over design columns.
pub fn mutual_coherence(a: &[f64], n: usize, m: usize) -> Result<f64> {
    mutual_coherence_keyed(a, n, m, None)
}

pub(crate) fn mutual_coherence_keyed(
    a: &[f64],
    n: usize,
    m: usize,
    keys: Option<&[String]>,
) -> Result<f64> {
    let mut norms = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            norms[j] += a[i * m + j] * a[i * m + j];
        }
    }
    for (j, nj) in norms.iter_mut().enumerate() {
        if *nj == 0.0 {
            return Err(CoreError::ZeroColumn {
                index: j,
                key: keys.map_or_else(String::new, |k| k[j].clone()),
            });
        }
        *nj = nj.sqrt();
    }
    let mut mu: f64 = 0.0;
    for p in 0..m {
        for q in (p + 1)..m {
            let mut dot = 0.0;
            for i in 0..n {
                dot += a[i * m + p] * a[i * m + q];
            }
            mu = mu.max((dot / (norms[p] * norms[q])).abs());
        }
    }
    Ok(mu.min(1.0))
}

impl DesignMatrix {
    pub fn mutual_coherence(&self) -> Result<f64> {
        mutual_coherence_keyed(&self.a, self.n, self.m, Some(&self.op_keys))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::model::SourceFn;

    fn dom1() -> SpaceTimeDomain {
        SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 11, 11).unwrap()
    }

    #[test]
    fn squaring_operator() {
        let jet = Jet2 {
            dim: 1,
            value: 0.5,
            ..Default::default()
        };
        let v = apply_operator(&OperatorSpec::u2(), &jet, Point::xt(0.0, 0.0), &dom1()).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn laplacian_of_first_sine_mode() {
        use std::f64::consts::PI;
        let f = AnalyticField::heat_mode_1d();
        let p = Point::xt(0.5, 0.0);
        let jet = f.jet(p);
        let v = apply_operator(&OperatorSpec::lap(), &jet, p, &dom1()).unwrap();
        assert!((v + PI * PI).abs() < 1e-10, "{v}");
    }

    #[test]
    fn source_operator_evaluates_the_field_not_u() {
        let spec = OperatorSpec::source(SourceFn::Sin2PiX);
        let jet = Jet2 {
            dim: 1,
            value: 123.0,
            ..Default::default()
        };
        let v = apply_operator(&spec, &jet, Point::xt(0.25, 0.9), &dom1()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_mismatch_is_an_error() {
        let jet = Jet2 {
            dim: 1,
            ..Default::default()
        };
        let err = apply_operator(&OperatorSpec::dy(), &jet, Point::xt(0.0, 0.0), &dom1());
        assert!(err.is_err());
    }

    #[test]
    fn design_column_of_u_matches_target_over_decay_rate() {
        // For u = e^(−π²t) sin(πx): ∂_t u = −π² u, so b = −π² · (U column).
        use std::f64::consts::PI;
        let f = AnalyticField::heat_mode_1d();
        let model = StructuralModel::from_pairs(vec![(OperatorSpec::u(), 0.0)]);
        let d = dom1();
        let grid = CollocGrid::uniform(&d, 9, 1, 7);
        let dm = assemble_design(&model, &f, &grid.points(), &d).unwrap();
        for i in 0..dm.n {
            assert!(
                (dm.b[i] - (-PI * PI) * dm.a[i]).abs() < 1e-10,
                "row {i}: {} vs {}",
                dm.b[i],
                -PI * PI * dm.a[i]
            );
        }
    }

    #[test]
    fn design_shape_matches_points_and_library() {
        let f = AnalyticField::logistic_1d(1.0, 0.5, 0.4);
        let model = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 0.0),
            (OperatorSpec::u2(), 0.0),
            (OperatorSpec::dxx(), 0.0),
        ]);
        let d = dom1();
        let grid = CollocGrid::uniform(&d, 25, 1, 20);
        let dm = assemble_design(&model, &f, &grid.points(), &d).unwrap();
        assert_eq!(dm.n, 500);
        assert_eq!(dm.m, 3);
        assert_eq!(dm.a.len(), 1500);
    }

    #[test]
    fn empty_point_list_is_an_error() {
        let f = AnalyticField::heat_mode_1d();
        let model = StructuralModel::from_pairs(vec![(OperatorSpec::u(), 0.0)]);
        assert!(assemble_design(&model, &f, &[], &dom1()).is_err());
    }

    #[test]
    fn nonfinite_entry_names_the_operator() {
        let f = AnalyticField::new_1d(|x, _t| x.recip()); // 1/x blows up at 0
        let model = StructuralModel::from_pairs(vec![(OperatorSpec::u(), 0.0)]);
        let err = assemble_design(&model, &f, &[Point::xt(0.0, 0.5)], &dom1()).unwrap_err();
        assert!(err.to_string().contains('U'), "{err}");
    }

    #[test]
    fn scaling_the_field_scales_columns_by_their_degree() {
        let d = dom1();
        let grid = CollocGrid::uniform(&d, 9, 1, 7);
        let model = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 0.0),
            (OperatorSpec::u2(), 0.0),
            (OperatorSpec::dx(), 0.0),
            (OperatorSpec::dxx(), 0.0),
            (OperatorSpec::lap(), 0.0),
        ]);
        let c = 1.7;
        fn expr(x: crate::jet::Scalar2, t: crate::jet::Scalar2) -> crate::jet::Scalar2 {
            use std::f64::consts::PI;
            let one = crate::jet::Scalar2::constant(1.0);
            let u0 = crate::jet::Scalar2::constant(0.5) + (x.scale(PI)).sin().scale(0.3);
            let ekt = t.exp();
            u0 * ekt / (one + u0 * (ekt - one))
        }
        let base = AnalyticField::new_1d(expr);
        let scaled = AnalyticField::new_1d(move |x, t| expr(x, t).scale(c));
        let d0 = assemble_design(&model, &base, &grid.points(), &d).unwrap();
        let d1 = assemble_design(&model, &scaled, &grid.points(), &d).unwrap();
        for i in 0..d0.n {
            for (j, degree) in [(0usize, 1.0_f64), (1, 2.0), (2, 1.0), (3, 1.0), (4, 1.0)] {
                let expect = if degree == 2.0 { c * c } else { c };
                let (v0, v1) = (d0.a[i * d0.m + j], d1.a[i * d1.m + j]);
                assert!(
                    (v1 - expect * v0).abs() < 1e-9 * (1.0 + v0.abs()),
                    "op {j}: {v1} vs {expect}·{v0}"
                );
            }
        }
    }

    #[test]
    fn residual_vanishes_for_the_true_model_on_the_exact_solution() {
        use std::f64::consts::PI;
        let d = dom1();
        let grid = CollocGrid::uniform(&d, 21, 1, 21);
        // ∂_t u = −π² u for the decaying sine mode
        let model = StructuralModel::from_pairs(vec![(OperatorSpec::u(), -PI * PI)]);
        let f = AnalyticField::heat_mode_1d();
        let r = residual_field(&model, &f, &grid, &d).unwrap();
        assert!(r.norm < 1e-8, "{}", r.norm);
    }

    #[test]
    fn residual_with_zero_alpha_is_the_time_derivative() {
        let d = dom1();
        let grid = CollocGrid::uniform(&d, 11, 1, 11);
        let model = StructuralModel::from_pairs(vec![(OperatorSpec::u(), 0.0)]);
        let f = AnalyticField::heat_mode_1d();
        let r = residual_field(&model, &f, &grid, &d).unwrap();
        for (i, p) in grid.points().iter().enumerate() {
            let jet = f.jet(*p);
            assert!((r.values[i] - jet.dt).abs() < 1e-12);
        }
    }

    #[test]
    fn contaminated_model_residual_slice_norm_is_eps_over_sqrt2() {
        use std::f64::consts::PI;
        // Model with an extra orthogonal forcing: ∂_t u = −π²u + ε sin(2πx).
        // On the uncontaminated solution at t = 0 the residual is
        // −ε sin(2πx), whose spatial L² norm is ε/√2.
        let eps = 0.1;
        let d = SpaceTimeDomain::dim1(0.0, 1.0, 0.2, 401, 3).unwrap();
        let model = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), -PI * PI),
            (OperatorSpec::source(SourceFn::Sin2PiX), eps),
        ]);
        let f = AnalyticField::heat_mode_1d();
        let slice = CollocGrid::dim1(d.xs(0), vec![0.0]);
        let r = residual_field(&model, &f, &slice, &d).unwrap();
        let expected = eps / 2.0_f64.sqrt();
        assert!(
            (r.norm - expected).abs() < 1e-4 * expected,
            "{} vs {expected}",
            r.norm
        );
    }

    #[test]
    fn coherence_of_orthogonal_and_duplicate_columns() {
        // orthogonal columns
        let a = vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        assert!(mutual_coherence(&a, 3, 2).unwrap() < 1e-15);
        // duplicated column
        let b = vec![1.0, 1.0, 2.0, 2.0, -1.0, -1.0];
        assert!((mutual_coherence(&b, 3, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_column_is_named() {
        let a = vec![1.0, 0.0, 2.0, 0.0];
        let err = mutual_coherence(&a, 2, 2).unwrap_err();
        assert!(err.to_string().contains("column 1"), "{err}");
    }
}
