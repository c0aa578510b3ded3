//! Tensor-product trapezoid quadrature over collocation grids.
//!
//! Collocation points are the nodes of a tensor grid (x [, y], t); the same
//! grid supplies both the residual evaluation points and the quadrature
//! weights for L² norms over Ω × (0, T). A grid whose time axis is a single
//! node is treated as a fixed-time slice: the time weight is one and the
//! quadrature measures Ω only.

use crate::error::{CoreError, Result};
use crate::model::{Point, SpaceTimeDomain};

/// Tensor collocation grid. Nodes are enumerated t-outermost, x-innermost:
/// `idx = (it * ny + iy) * nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocGrid {
    pub xs: Vec<f64>,
    pub ys: Option<Vec<f64>>,
    pub ts: Vec<f64>,
}

impl CollocGrid {
    pub fn dim1(xs: Vec<f64>, ts: Vec<f64>) -> Self {
        CollocGrid { xs, ys: None, ts }
    }

    pub fn dim2(xs: Vec<f64>, ys: Vec<f64>, ts: Vec<f64>) -> Self {
        CollocGrid {
            xs,
            ys: Some(ys),
            ts,
        }
    }

    /// Uniform grid over the domain closure with the given node counts.
    pub fn uniform(domain: &SpaceTimeDomain, nx: usize, ny: usize, nt: usize) -> Self {
        let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + i as f64 * h).collect()
        };
        let xs = lin(domain.x_lo[0], domain.x_hi[0], nx);
        let ts = lin(0.0, domain.t_end, nt);
        if domain.dim == 2 {
            CollocGrid::dim2(xs, lin(domain.x_lo[1], domain.x_hi[1], ny), ts)
        } else {
            CollocGrid::dim1(xs, ts)
        }
    }

    /// The full node grid of a domain.
    pub fn from_domain(domain: &SpaceTimeDomain) -> Self {
        CollocGrid::uniform(domain, domain.nx[0], domain.ny(), domain.nt)
    }

    pub fn dim(&self) -> usize {
        if self.ys.is_some() {
            2
        } else {
            1
        }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.as_ref().map_or(1, |ys| ys.len())
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny() * self.nt()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, idx: usize) -> Point {
        let (nx, ny) = (self.nx(), self.ny());
        let ix = idx % nx;
        let iy = (idx / nx) % ny;
        let it = idx / (nx * ny);
        Point {
            x: self.xs[ix],
            y: self.ys.as_ref().map_or(0.0, |ys| ys[iy]),
            t: self.ts[it],
        }
    }

    /// Trapezoid weight of the node (product over axes). A single-node time
    /// axis contributes weight one (slice semantics).
    pub fn weight(&self, idx: usize) -> f64 {
        let (nx, ny) = (self.nx(), self.ny());
        let ix = idx % nx;
        let iy = (idx / nx) % ny;
        let it = idx / (nx * ny);
        let mut w = axis_weight(&self.xs, ix);
        if let Some(ys) = &self.ys {
            w *= axis_weight(ys, iy);
        }
        w * axis_weight(&self.ts, it)
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }
}

/// Composite trapezoid weight along one axis; weight one for a single node.
fn axis_weight(nodes: &[f64], i: usize) -> f64 {
    let n = nodes.len();
    if n == 1 {
        return 1.0;
    }
    if i == 0 {
        0.5 * (nodes[1] - nodes[0])
    } else if i == n - 1 {
        0.5 * (nodes[n - 1] - nodes[n - 2])
    } else {
        0.5 * (nodes[i + 1] - nodes[i - 1])
    }
}

/// sqrt(Σ_i w_i v_i²): trapezoid L² norm of grid values.
pub fn l2_norm(values: &[f64], grid: &CollocGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(CoreError::LengthMismatch {
            context: "l2_norm values vs grid",
            expected: grid.len(),
            got: values.len(),
        });
    }
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += grid.weight(i) * v * v;
    }
    Ok(acc.sqrt())
}

/// Trapezoid L² distance between two sets of grid values.
pub fn l2_distance(a: &[f64], b: &[f64], grid: &CollocGrid) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch {
            context: "l2_distance",
            expected: a.len(),
            got: b.len(),
        });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(&diff, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn constant_field_on_unit_square_has_unit_norm() {
        let d = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 21, 21).unwrap();
        let g = CollocGrid::from_domain(&d);
        let ones = vec![1.0; g.len()];
        let n = l2_norm(&ones, &g).unwrap();
        assert!((n - 1.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn sine_norm_matches_analytic_value() {
        // ∫₀¹ sin²(2πx) dx = 1/2, so the slice norm is 1/√2.
        let d = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 401, 3).unwrap();
        let g = CollocGrid::dim1(d.xs(0), vec![0.0]);
        let vals: Vec<f64> = g
            .points()
            .iter()
            .map(|p| (2.0 * std::f64::consts::PI * p.x).sin())
            .collect();
        let n = l2_norm(&vals, &g).unwrap();
        assert!((n - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4, "{n}");
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let d = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 11, 11).unwrap();
        let g = CollocGrid::from_domain(&d);
        assert_eq!(l2_norm(&vec![0.0; g.len()], &g).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let d = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 11, 11).unwrap();
        let g = CollocGrid::from_domain(&d);
        assert!(l2_norm(&[1.0, 2.0], &g).is_err());
    }

    #[test]
    fn triangle_inequality_and_homogeneity() {
        let d = SpaceTimeDomain::dim2([0.0, 0.0], [1.0, 2.0], 0.5, [9, 7], 5).unwrap();
        let g = CollocGrid::from_domain(&d);
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let a: Vec<f64> = (0..g.len()).map(|_| rng.range(-2.0, 2.0)).collect();
            let b: Vec<f64> = (0..g.len()).map(|_| rng.range(-2.0, 2.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (na, nb, ns) = (
                l2_norm(&a, &g).unwrap(),
                l2_norm(&b, &g).unwrap(),
                l2_norm(&sum, &g).unwrap(),
            );
            assert!(ns <= na + nb + 1e-12);

            let c = rng.range(-3.0, 3.0);
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            let nscaled = l2_norm(&scaled, &g).unwrap();
            assert!((nscaled - c.abs() * na).abs() < 1e-10 * (1.0 + na));
        }
    }

    #[test]
    fn weights_sum_to_the_domain_measure() {
        let d = SpaceTimeDomain::dim2([0.0, -1.0], [2.0, 1.0], 0.5, [13, 9], 7).unwrap();
        let g = CollocGrid::from_domain(&d);
        let total: f64 = g.weights().iter().sum();
        assert!((total - d.measure()).abs() < 1e-12, "{total}");
    }

    #[test]
    fn single_time_node_means_slice_quadrature() {
        let g = CollocGrid::dim1(vec![0.0, 0.5, 1.0], vec![0.25]);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
