//! Field adapters: anything that can produce a [`Jet2`] at a point.
//!
//! Three implementations share the interface: the trained surrogate, closed
//! form analytic fields (exact jets via [`Scalar2`] arithmetic — the oracle
//! path for tests), and gridded solver output (finite-difference jets at its
//! own nodes).

use crate::error::{CoreError, Result};
use crate::jet::{Jet2, Scalar2, SLOT_T, SLOT_X, SLOT_Y};
use crate::model::{Point, SpaceTimeDomain};
use crate::quadrature::CollocGrid;
use crate::surrogate::SurrogateNet;

pub trait FieldEval: Sync {
    fn dim(&self) -> usize;
    fn jet(&self, p: Point) -> Jet2;
    fn value(&self, p: Point) -> f64 {
        self.jet(p).value
    }
}

impl FieldEval for SurrogateNet {
    fn dim(&self) -> usize {
        self.spatial_dim()
    }

    fn jet(&self, p: Point) -> Jet2 {
        self.eval_jet(p)
    }
}

/// A closed-form field u(x[,y],t) with exact derivatives.
pub struct AnalyticField {
    dim: usize,
    f: Box<dyn Fn(Scalar2, Scalar2, Scalar2) -> Scalar2 + Sync + Send>,
}

impl AnalyticField {
    pub fn new_1d(
        f: impl Fn(Scalar2, Scalar2) -> Scalar2 + Sync + Send + 'static,
    ) -> Self {
        AnalyticField {
            dim: 1,
            f: Box::new(move |x, _y, t| f(x, t)),
        }
    }

    pub fn new_2d(
        f: impl Fn(Scalar2, Scalar2, Scalar2) -> Scalar2 + Sync + Send + 'static,
    ) -> Self {
        AnalyticField {
            dim: 2,
            f: Box::new(f),
        }
    }

    /// The decaying sine mode `e^(−π² t) sin(πx)`.
    pub fn heat_mode_1d() -> Self {
        use std::f64::consts::PI;
        AnalyticField::new_1d(move |x, t| {
            (x.scale(PI)).sin() * (t.scale(-PI * PI)).exp()
        })
    }

    /// Pointwise logistic flow `u0 e^(κt) / (1 + u0 (e^(κt) − 1))` with
    /// u0(x) = base + amp·sin(πx).
    pub fn logistic_1d(kappa: f64, base: f64, amp: f64) -> Self {
        use std::f64::consts::PI;
        AnalyticField::new_1d(move |x, t| {
            let one = Scalar2::constant(1.0);
            let u0 = Scalar2::constant(base) + (x.scale(PI)).sin().scale(amp);
            let ekt = t.scale(kappa).exp();
            u0 * ekt / (one + u0 * (ekt - one))
        })
    }
}

impl FieldEval for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, p: Point) -> Jet2 {
        let x = Scalar2::var(p.x, SLOT_X);
        let y = Scalar2::var(p.y, SLOT_Y);
        let t = Scalar2::var(p.t, SLOT_T);
        (self.f)(x, y, t).to_jet(self.dim)
    }
}

/// Values of u on the full (nx[, ny], nt) tensor grid of a domain, in the
/// canonical node order `idx = (it·ny + iy)·nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedField {
    pub domain: SpaceTimeDomain,
    pub values: Vec<f64>,
}

impl GriddedField {
    pub fn new(domain: SpaceTimeDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_nodes() {
            return Err(CoreError::LengthMismatch {
                context: "gridded field values",
                expected: domain.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "gridded field values".into(),
            });
        }
        Ok(GriddedField { domain, values })
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, it: usize) -> usize {
        (it * self.domain.ny() + iy) * self.domain.nx[0] + ix
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, it: usize) -> f64 {
        self.values[self.idx(ix, iy, it)]
    }

    pub fn node_point(&self, ix: usize, iy: usize, it: usize) -> Point {
        Point {
            x: self.domain.x_lo[0] + ix as f64 * self.domain.dx(0),
            y: if self.domain.dim == 2 {
                self.domain.x_lo[1] + iy as f64 * self.domain.dx(1)
            } else {
                0.0
            },
            t: it as f64 * self.domain.dt(),
        }
    }

    /// The field's own tensor grid (nodes and trapezoid weights).
    pub fn grid(&self) -> CollocGrid {
        CollocGrid::from_domain(&self.domain)
    }

    /// Quadrature L² distance to another field on the identical grid.
    pub fn l2_distance(&self, other: &GriddedField) -> Result<f64> {
        if self.domain != other.domain {
            return Err(CoreError::GridMismatch(
                "fields live on different grids".into(),
            ));
        }
        crate::quadrature::l2_distance(&self.values, &other.values, &self.grid())
    }

    pub fn l2_norm(&self) -> f64 {
        crate::quadrature::l2_norm(&self.values, &self.grid()).expect("grid matches by construction")
    }

    /// 1D only: coefficient of the sin(kπξ) mode at every time node,
    /// a_k(t) = (2/L) ∫ u(x,t) sin(kπξ(x)) dx.
    pub fn sine_mode_coeffs(&self, k: usize) -> Result<Vec<f64>> {
        if self.domain.dim != 1 {
            return Err(CoreError::Invalid {
                what: "sine mode projection",
                why: "only defined for 1-dimensional fields".into(),
            });
        }
        use std::f64::consts::PI;
        let nx = self.domain.nx[0];
        let l = self.domain.x_hi[0] - self.domain.x_lo[0];
        let h = self.domain.dx(0);
        let basis: Vec<f64> = (0..nx)
            .map(|ix| (k as f64 * PI * ix as f64 * h / l).sin())
            .collect();
        let mut out = Vec::with_capacity(self.domain.nt);
        for it in 0..self.domain.nt {
            let mut acc = 0.0;
            for ix in 0..nx {
                let w = if ix == 0 || ix == nx - 1 { 0.5 * h } else { h };
                acc += w * self.at(ix, 0, it) * basis[ix];
            }
            out.push(2.0 * acc / l);
        }
        Ok(out)
    }

    /// Finite-difference jet at a grid node: central differences in the
    /// interior, second-order one-sided stencils at the boundary.
    pub fn jet_at(&self, ix: usize, iy: usize, it: usize) -> Jet2 {
        let dim = self.domain.dim;
        let nx = self.domain.nx[0];
        let ny = self.domain.ny();
        let nt = self.domain.nt;
        let hx = self.domain.dx(0);
        let ht = self.domain.dt();

        let ux = |i: usize| self.at(i, iy, it);
        let ut = |i: usize| self.at(ix, iy, i);

        let dt = d1(ut, it, nt, ht);
        let dx = d1(ux, ix, nx, hx);
        let dxx = d2(ux, ix, nx, hx);
        let (dy, dyy, dxy) = if dim == 2 {
            let hy = self.domain.dx(1);
            let uy = |i: usize| self.at(ix, i, it);
            let dy = d1(uy, iy, ny, hy);
            let dyy = d2(uy, iy, ny, hy);
            // cross derivative: x-stencil applied to y-derivatives
            let dy_at = |i: usize| d1(|j: usize| self.at(i, j, it), iy, ny, hy);
            let dxy = d1(dy_at, ix, nx, hx);
            (dy, dyy, dxy)
        } else {
            (0.0, 0.0, 0.0)
        };

        Jet2 {
            dim,
            value: self.at(ix, iy, it),
            dt,
            dx,
            dy,
            dxx,
            dyy,
            dxy,
        }
    }

    fn nearest_indices(&self, p: Point) -> (usize, usize, usize) {
        let clamp = |v: f64, n: usize| -> usize {
            let i = v.round();
            if i < 0.0 {
                0
            } else if i as usize >= n {
                n - 1
            } else {
                i as usize
            }
        };
        let ix = clamp((p.x - self.domain.x_lo[0]) / self.domain.dx(0), self.domain.nx[0]);
        let iy = if self.domain.dim == 2 {
            clamp((p.y - self.domain.x_lo[1]) / self.domain.dx(1), self.domain.ny())
        } else {
            0
        };
        let it = clamp(p.t / self.domain.dt(), self.domain.nt);
        (ix, iy, it)
    }
}

/// First derivative along one axis: central in the interior, second-order
/// one-sided at the ends.
fn d1(u: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * u(n - 1) - 4.0 * u(n - 2) + u(n - 3)) / (2.0 * h)
    } else {
        (u(i + 1) - u(i - 1)) / (2.0 * h)
    }
}

/// Second derivative along one axis: central in the interior; at the ends a
/// second-order one-sided stencil when four nodes exist, otherwise the plain
/// three-point difference.
fn d2(u: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if i == 0 {
        if n >= 4 {
            (2.0 * u(0) - 5.0 * u(1) + 4.0 * u(2) - u(3)) / h2
        } else {
            (u(0) - 2.0 * u(1) + u(2)) / h2
        }
    } else if i == n - 1 {
        if n >= 4 {
            (2.0 * u(n - 1) - 5.0 * u(n - 2) + 4.0 * u(n - 3) - u(n - 4)) / h2
        } else {
            (u(n - 1) - 2.0 * u(n - 2) + u(n - 3)) / h2
        }
    } else {
        (u(i + 1) - 2.0 * u(i) + u(i - 1)) / h2
    }
}

impl FieldEval for GriddedField {
    fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Finite-difference jet at the nearest grid node. Callers are expected
    /// to query at (or very near) the field's own nodes.
    fn jet(&self, p: Point) -> Jet2 {
        let (ix, iy, it) = self.nearest_indices(p);
        debug_assert!(
            (p.x - self.node_point(ix, iy, it).x).abs() <= 0.5 * self.domain.dx(0),
            "query point far from grid node"
        );
        self.jet_at(ix, iy, it)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_heat_mode_jet_is_exact() {
        use std::f64::consts::PI;
        let f = AnalyticField::heat_mode_1d();
        let p = Point::xt(0.5, 0.0);
        let j = f.jet(p);
        assert!((j.value - 1.0).abs() < 1e-15);
        assert!((j.dxx + PI * PI).abs() < 1e-12);
        assert!((j.dt + PI * PI).abs() < 1e-12);
        assert!(j.dx.abs() < 1e-12);
    }

    #[test]
    fn gridded_field_fd_jet_converges_to_analytic() {
        use std::f64::consts::PI;
        // u = sin(πx)·e^(−π²t) sampled on a fine grid
        let reference = AnalyticField::heat_mode_1d();
        let mut errs = Vec::new();
        for nx in [41, 81] {
            let domain = SpaceTimeDomain::dim1(0.0, 1.0, 0.02, nx, 41).unwrap();
            let mut values = Vec::with_capacity(domain.n_nodes());
            for it in 0..domain.nt {
                for ix in 0..domain.nx[0] {
                    let x = ix as f64 * domain.dx(0);
                    let t = it as f64 * domain.dt();
                    values.push((PI * x).sin() * (-PI * PI * t).exp());
                }
            }
            let g = GriddedField::new(domain, values).unwrap();
            let (ix, it) = (nx / 2, 20);
            let p = g.node_point(ix, 0, it);
            let fd = g.jet_at(ix, 0, it);
            let exact = reference.jet(p);
            errs.push((fd.dxx - exact.dxx).abs());
        }
        // halving h should divide the error by about four
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn sine_mode_projection_isolates_modes() {
        use std::f64::consts::PI;
        let domain = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 201, 3).unwrap();
        let mut values = Vec::new();
        for _it in 0..domain.nt {
            for ix in 0..domain.nx[0] {
                let x = ix as f64 * domain.dx(0);
                values.push(0.7 * (PI * x).sin() + 0.2 * (2.0 * PI * x).sin());
            }
        }
        let g = GriddedField::new(domain, values).unwrap();
        let m1 = g.sine_mode_coeffs(1).unwrap();
        let m2 = g.sine_mode_coeffs(2).unwrap();
        assert!((m1[0] - 0.7).abs() < 1e-4, "{}", m1[0]);
        assert!((m2[0] - 0.2).abs() < 1e-4, "{}", m2[0]);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let d1 = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 5, 5).unwrap();
        let d2 = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 7, 5).unwrap();
        let a = GriddedField::new(d1, vec![0.0; d1.n_nodes()]).unwrap();
        let b = GriddedField::new(d2, vec![0.0; d2.n_nodes()]).unwrap();
        assert!(a.l2_distance(&b).is_err());
    }
}
