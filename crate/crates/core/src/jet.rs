//! Second-order jets.
//!
//! A jet is a value together with its partial derivatives up to order two at
//! a point. [`Jet2`] is the public shape used throughout the crate (value,
//! first partials in x/y/t, second spatial partials). [`Scalar2`] is a
//! truncated second-order Taylor scalar with overloaded arithmetic: functions
//! written against it propagate exact derivatives, which is how analytic
//! reference fields are evaluated and how the surrogate's hand-rolled
//! propagation is cross-checked.

/// Coordinate slots for [`Scalar2`]: 0 = x, 1 = y, 2 = t.
pub const SLOT_X: usize = 0;
pub const SLOT_Y: usize = 1;
pub const SLOT_T: usize = 2;

/// Packed index into the symmetric 3x3 Hessian, `i <= j`.
#[inline]
pub const fn hess_idx(i: usize, j: usize) -> usize {
    // (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
    i * 3 - i * (i + 1) / 2 + j
}

/// Value and partial derivatives of a scalar field at one point.
///
/// `dy`, `dyy`, `dxy` are zero when `dim == 1`. Mixed x/y order is a single
/// slot, so `u_xy == u_yx` by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub dim: usize,
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

impl Jet2 {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.dt.is_finite()
            && self.dx.is_finite()
            && self.dy.is_finite()
            && self.dxx.is_finite()
            && self.dyy.is_finite()
            && self.dxy.is_finite()
    }

    /// `u_xx` in 1D, `u_xx + u_yy` in 2D.
    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

/// Adjoint weights over the components of a [`Jet2`]; the seed for reverse
/// passes through the surrogate.
#[derive(Clone, Copy, Debug, Default)]
pub struct JetSeed {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

impl JetSeed {
    pub fn scaled(&self, c: f64) -> JetSeed {
        JetSeed {
            value: c * self.value,
            dt: c * self.dt,
            dx: c * self.dx,
            dy: c * self.dy,
            dxx: c * self.dxx,
            dyy: c * self.dyy,
            dxy: c * self.dxy,
        }
    }

    pub fn add_scaled(&mut self, other: &JetSeed, c: f64) {
        self.value += c * other.value;
        self.dt += c * other.dt;
        self.dx += c * other.dx;
        self.dy += c * other.dy;
        self.dxx += c * other.dxx;
        self.dyy += c * other.dyy;
        self.dxy += c * other.dxy;
    }
}

/// Truncated second-order Taylor scalar over the three coordinates (x, y, t).
///
/// `g` holds the gradient, `h` the packed symmetric Hessian (see
/// [`hess_idx`]). Arithmetic and elementary functions propagate both exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar2 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [f64; 6],
}

impl Scalar2 {
    pub fn constant(v: f64) -> Self {
        Scalar2 {
            v,
            g: [0.0; 3],
            h: [0.0; 6],
        }
    }

    /// A coordinate variable seeded in `slot`.
    pub fn var(v: f64, slot: usize) -> Self {
        let mut s = Scalar2::constant(v);
        s.g[slot] = 1.0;
        s
    }

    /// Apply a scalar function with known first/second derivative at `self.v`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Scalar2::constant(f);
        for i in 0..3 {
            out.g[i] = df * self.g[i];
        }
        for i in 0..3 {
            for j in i..3 {
                let k = hess_idx(i, j);
                out.h[k] = df * self.h[k] + d2f * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Self {
        let f = self.v.powi(n);
        let df = n as f64 * self.v.powi(n - 1);
        let d2f = (n * (n - 1)) as f64 * self.v.powi(n - 2);
        self.chain(f, df, d2f)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        for g in &mut out.g {
            *g *= c;
        }
        for h in &mut out.h {
            *h *= c;
        }
        out
    }

    /// Extract the jet shape used by the rest of the crate.
    pub fn to_jet(&self, dim: usize) -> Jet2 {
        Jet2 {
            dim,
            value: self.v,
            dt: self.g[SLOT_T],
            dx: self.g[SLOT_X],
            dy: if dim == 2 { self.g[SLOT_Y] } else { 0.0 },
            dxx: self.h[hess_idx(SLOT_X, SLOT_X)],
            dyy: if dim == 2 {
                self.h[hess_idx(SLOT_Y, SLOT_Y)]
            } else {
                0.0
            },
            dxy: if dim == 2 {
                self.h[hess_idx(SLOT_X, SLOT_Y)]
            } else {
                0.0
            },
        }
    }
}

impl std::ops::Add for Scalar2 {
    type Output = Scalar2;
    fn add(self, rhs: Scalar2) -> Scalar2 {
        let mut out = self;
        out.v += rhs.v;
        for i in 0..3 {
            out.g[i] += rhs.g[i];
        }
        for i in 0..6 {
            out.h[i] += rhs.h[i];
        }
        out
    }
}

impl std::ops::Sub for Scalar2 {
    type Output = Scalar2;
    fn sub(self, rhs: Scalar2) -> Scalar2 {
        let mut out = self;
        out.v -= rhs.v;
        for i in 0..3 {
            out.g[i] -= rhs.g[i];
        }
        for i in 0..6 {
            out.h[i] -= rhs.h[i];
        }
        out
    }
}

impl std::ops::Neg for Scalar2 {
    type Output = Scalar2;
    fn neg(self) -> Scalar2 {
        self.scale(-1.0)
    }
}

impl std::ops::Mul for Scalar2 {
    type Output = Scalar2;
    fn mul(self, rhs: Scalar2) -> Scalar2 {
        let mut out = Scalar2::constant(self.v * rhs.v);
        for i in 0..3 {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
        }
        for i in 0..3 {
            for j in i..3 {
                let k = hess_idx(i, j);
                out.h[k] = self.h[k] * rhs.v
                    + self.g[i] * rhs.g[j]
                    + self.g[j] * rhs.g[i]
                    + self.v * rhs.h[k];
            }
        }
        out
    }
}

impl std::ops::Div for Scalar2 {
    type Output = Scalar2;
    fn div(self, rhs: Scalar2) -> Scalar2 {
        self * rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x,t) = sin(2x) * exp(-t), closed-form partials.
    fn field(x: f64, t: f64) -> Scalar2 {
        let xs = Scalar2::var(x, SLOT_X);
        let ts = Scalar2::var(t, SLOT_T);
        xs.scale(2.0).sin() * (-ts).exp()
    }

    #[test]
    fn matches_closed_form_partials() {
        let (x, t) = (0.3, 0.7);
        let j = field(x, t).to_jet(1);
        let e = (-t as f64).exp();
        assert!((j.value - (2.0 * x).sin() * e).abs() < 1e-14);
        assert!((j.dx - 2.0 * (2.0 * x).cos() * e).abs() < 1e-14);
        assert!((j.dt + (2.0 * x).sin() * e).abs() < 1e-14);
        assert!((j.dxx + 4.0 * (2.0 * x).sin() * e).abs() < 1e-14);
    }

    #[test]
    fn product_and_quotient_rules() {
        let x = Scalar2::var(0.4, SLOT_X);
        let y = Scalar2::var(1.3, SLOT_Y);
        // f = x^2 y / (1 + x y). Compare against finite differences.
        let f = |xv: f64, yv: f64| xv * xv * yv / (1.0 + xv * yv);
        let fs = x.powi(2) * y / (Scalar2::constant(1.0) + x * y);
        let h = 1e-5;
        let fd_x = (f(0.4 + h, 1.3) - f(0.4 - h, 1.3)) / (2.0 * h);
        let fd_y = (f(0.4, 1.3 + h) - f(0.4, 1.3 - h)) / (2.0 * h);
        let fd_xy = (f(0.4 + h, 1.3 + h) - f(0.4 + h, 1.3 - h) - f(0.4 - h, 1.3 + h)
            + f(0.4 - h, 1.3 - h))
            / (4.0 * h * h);
        assert!((fs.g[SLOT_X] - fd_x).abs() < 1e-9);
        assert!((fs.g[SLOT_Y] - fd_y).abs() < 1e-9);
        assert!((fs.h[hess_idx(SLOT_X, SLOT_Y)] - fd_xy).abs() < 1e-6);
    }

    #[test]
    fn hessian_packing_is_consistent() {
        assert_eq!(hess_idx(0, 0), 0);
        assert_eq!(hess_idx(0, 1), 1);
        assert_eq!(hess_idx(0, 2), 2);
        assert_eq!(hess_idx(1, 1), 3);
        assert_eq!(hess_idx(1, 2), 4);
        assert_eq!(hess_idx(2, 2), 5);
    }
}
