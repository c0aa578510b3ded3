//! Domain types shared by every other module: spatiotemporal domains,
//! operator specifications, structural models, interventions, samples.
//!
//! A structural model is always written in anchored form
//!
//! ```text
//! ∂_t u = Σ_j α_j T_j[u]
//! ```
//!
//! with the time-derivative coefficient fixed at one. Anchoring removes the
//! trivial all-zero minimizer from the joint objective while keeping the
//! support semantics: the governing terms are exactly the operators with
//! nonzero α.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::quadrature::CollocGrid;

/// Absolute coefficient magnitude below which a term counts as pruned.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-3;

/// A spacetime location. `y` is ignored (kept at zero) in one spatial
/// dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point {
    pub fn xt(x: f64, t: f64) -> Self {
        Point { x, y: 0.0, t }
    }

    pub fn xyt(x: f64, y: f64, t: f64) -> Self {
        Point { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

/// Rectangular domain Ω × [0, T] with a tensor grid, in one or two spatial
/// dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeDomain {
    pub dim: usize,
    pub x_lo: [f64; 2],
    pub x_hi: [f64; 2],
    pub t_end: f64,
    pub nx: [usize; 2],
    pub nt: usize,
}

impl SpaceTimeDomain {
    pub fn dim1(x_lo: f64, x_hi: f64, t_end: f64, nx: usize, nt: usize) -> Result<Self> {
        let d = SpaceTimeDomain {
            dim: 1,
            x_lo: [x_lo, 0.0],
            x_hi: [x_hi, 0.0],
            t_end,
            nx: [nx, 1],
            nt,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dim2(
        x_lo: [f64; 2],
        x_hi: [f64; 2],
        t_end: f64,
        nx: [usize; 2],
        nt: usize,
    ) -> Result<Self> {
        let d = SpaceTimeDomain {
            dim: 2,
            x_lo,
            x_hi,
            t_end,
            nx,
            nt,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |why: String| {
            Err(CoreError::Invalid {
                what: "domain",
                why,
            })
        };
        if self.dim != 1 && self.dim != 2 {
            return fail(format!("dim must be 1 or 2, got {}", self.dim));
        }
        for axis in 0..self.dim {
            if !(self.x_hi[axis] > self.x_lo[axis]) {
                return fail(format!(
                    "axis {axis}: x_hi ({}) must exceed x_lo ({})",
                    self.x_hi[axis], self.x_lo[axis]
                ));
            }
            if self.nx[axis] < 3 {
                return fail(format!(
                    "axis {axis}: need at least 3 grid nodes, got {}",
                    self.nx[axis]
                ));
            }
        }
        if !(self.t_end > 0.0) {
            return fail(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.nt < 3 {
            return fail(format!("need at least 3 time nodes, got {}", self.nt));
        }
        Ok(())
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.x_hi[axis] - self.x_lo[axis]) / (self.nx[axis] - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / (self.nt - 1) as f64
    }

    /// Grid nodes along a spatial axis, endpoints included.
    pub fn xs(&self, axis: usize) -> Vec<f64> {
        let h = self.dx(axis);
        (0..self.nx[axis])
            .map(|i| self.x_lo[axis] + i as f64 * h)
            .collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        let h = self.dt();
        (0..self.nt).map(|i| i as f64 * h).collect()
    }

    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.nx[1]
        } else {
            1
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nx[0] * self.ny() * self.nt
    }

    /// |Ω| · T.
    pub fn measure(&self) -> f64 {
        let mut m = (self.x_hi[0] - self.x_lo[0]) * self.t_end;
        if self.dim == 2 {
            m *= self.x_hi[1] - self.x_lo[1];
        }
        m
    }

    pub fn contains(&self, p: Point) -> bool {
        let eps = 1e-12;
        let mut ok = p.x >= self.x_lo[0] - eps
            && p.x <= self.x_hi[0] + eps
            && p.t >= -eps
            && p.t <= self.t_end + eps;
        if self.dim == 2 {
            ok = ok && p.y >= self.x_lo[1] - eps && p.y <= self.x_hi[1] + eps;
        }
        ok
    }
}

/// Closed-form source fields available to `SOURCE` terms, evaluated on
/// normalized spatial coordinates ξ = (x − x_lo)/(x_hi − x_lo).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceFn {
    Const(f64),
    SinPiX,
    Sin2PiX,
    SinPiXSinPiY,
}

impl SourceFn {
    pub fn eval(&self, p: Point, domain: &SpaceTimeDomain) -> f64 {
        use std::f64::consts::PI;
        let xi = (p.x - domain.x_lo[0]) / (domain.x_hi[0] - domain.x_lo[0]);
        match self {
            SourceFn::Const(c) => *c,
            SourceFn::SinPiX => (PI * xi).sin(),
            SourceFn::Sin2PiX => (2.0 * PI * xi).sin(),
            SourceFn::SinPiXSinPiY => {
                let eta = (p.y - domain.x_lo[1]) / (domain.x_hi[1] - domain.x_lo[1]);
                (PI * xi).sin() * (PI * eta).sin()
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SourceFn::Const(c) => format!("const_{c}"),
            SourceFn::SinPiX => "sin_pi_x".into(),
            SourceFn::Sin2PiX => "sin_2pi_x".into(),
            SourceFn::SinPiXSinPiY => "sin_pi_x_sin_pi_y".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sin_pi_x" => Ok(SourceFn::SinPiX),
            "sin_2pi_x" => Ok(SourceFn::Sin2PiX),
            "sin_pi_x_sin_pi_y" => Ok(SourceFn::SinPiXSinPiY),
            other => {
                if let Some(c) = other.strip_prefix("const_") {
                    let v: f64 = c.parse().map_err(|_| CoreError::Invalid {
                        what: "source function",
                        why: format!("bad constant in `{other}`"),
                    })?;
                    Ok(SourceFn::Const(v))
                } else {
                    Err(CoreError::Invalid {
                        what: "source function",
                        why: format!("unknown source `{other}`"),
                    })
                }
            }
        }
    }
}

/// Symbolic operator tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    /// u
    U,
    /// u²
    U2,
    /// u³
    U3,
    /// ∂_x u
    Dx,
    /// ∂_y u
    Dy,
    /// ∂_xx u
    Dxx,
    /// ∂_yy u
    Dyy,
    /// ∂_xy u
    Dxy,
    /// Δu (= ∂_xx u in 1D)
    Lap,
    /// u ∂_x u
    AdvX,
    /// u ∂_y u
    AdvY,
    /// f(x[,y],t), independent of u
    Source,
}

impl OpKind {
    pub fn tag(&self) -> &'static str {
        match self {
            OpKind::U => "U",
            OpKind::U2 => "U2",
            OpKind::U3 => "U3",
            OpKind::Dx => "DX",
            OpKind::Dy => "DY",
            OpKind::Dxx => "DXX",
            OpKind::Dyy => "DYY",
            OpKind::Dxy => "DXY",
            OpKind::Lap => "LAP",
            OpKind::AdvX => "ADV_X",
            OpKind::AdvY => "ADV_Y",
            OpKind::Source => "SOURCE",
        }
    }
}

/// One candidate library term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OpKind,
    /// Present exactly for `SOURCE` terms.
    pub source: Option<SourceFn>,
}

impl OperatorSpec {
    pub fn u() -> Self {
        Self::plain(OpKind::U)
    }
    pub fn u2() -> Self {
        Self::plain(OpKind::U2)
    }
    pub fn u3() -> Self {
        Self::plain(OpKind::U3)
    }
    pub fn dx() -> Self {
        Self::plain(OpKind::Dx)
    }
    pub fn dy() -> Self {
        Self::plain(OpKind::Dy)
    }
    pub fn dxx() -> Self {
        Self::plain(OpKind::Dxx)
    }
    pub fn dyy() -> Self {
        Self::plain(OpKind::Dyy)
    }
    pub fn dxy() -> Self {
        Self::plain(OpKind::Dxy)
    }
    pub fn lap() -> Self {
        Self::plain(OpKind::Lap)
    }
    pub fn adv_x() -> Self {
        Self::plain(OpKind::AdvX)
    }
    pub fn adv_y() -> Self {
        Self::plain(OpKind::AdvY)
    }

    pub fn source(f: SourceFn) -> Self {
        OperatorSpec {
            kind: OpKind::Source,
            source: Some(f),
        }
    }

    fn plain(kind: OpKind) -> Self {
        OperatorSpec { kind, source: None }
    }

    /// Maximum derivative order applied to u.
    pub fn order(&self) -> usize {
        match self.kind {
            OpKind::U | OpKind::U2 | OpKind::U3 | OpKind::Source => 0,
            OpKind::Dx | OpKind::Dy | OpKind::AdvX | OpKind::AdvY => 1,
            OpKind::Dxx | OpKind::Dyy | OpKind::Dxy | OpKind::Lap => 2,
        }
    }

    /// True when T[cu] = c·T[u].
    pub fn is_linear(&self) -> bool {
        matches!(
            self.kind,
            OpKind::U
                | OpKind::Dx
                | OpKind::Dy
                | OpKind::Dxx
                | OpKind::Dyy
                | OpKind::Dxy
                | OpKind::Lap
        )
    }

    /// Operators meaningful only with a second spatial axis. `LAP` is valid
    /// in both dimensions (it degrades to ∂_xx in 1D).
    pub fn needs_y(&self) -> bool {
        matches!(
            self.kind,
            OpKind::Dy | OpKind::Dyy | OpKind::Dxy | OpKind::AdvY
        )
    }

    /// Unique key, e.g. `U2` or `SOURCE(sin_2pi_x)`.
    pub fn key(&self) -> String {
        match (self.kind, &self.source) {
            (OpKind::Source, Some(f)) => format!("SOURCE({})", f.name()),
            (OpKind::Source, None) => "SOURCE(?)".into(),
            (kind, _) => kind.tag().into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("SOURCE(") {
            let inner = rest.strip_suffix(')').ok_or_else(|| CoreError::Invalid {
                what: "operator key",
                why: format!("unterminated SOURCE in `{s}`"),
            })?;
            return Ok(OperatorSpec::source(SourceFn::parse(inner)?));
        }
        let kind = match s {
            "U" => OpKind::U,
            "U2" => OpKind::U2,
            "U3" => OpKind::U3,
            "DX" => OpKind::Dx,
            "DY" => OpKind::Dy,
            "DXX" => OpKind::Dxx,
            "DYY" => OpKind::Dyy,
            "DXY" => OpKind::Dxy,
            "LAP" => OpKind::Lap,
            "ADV_X" => OpKind::AdvX,
            "ADV_Y" => OpKind::AdvY,
            other => return Err(CoreError::UnknownOperator(other.to_string())),
        };
        Ok(OperatorSpec::plain(kind))
    }
}

/// Anchored structural model `∂_t u = Σ_j α_j T_j[u]`.
///
/// The evolution term `∂_t u` is the fixed anchor with coefficient one; only
/// the library coefficients are free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub library: Vec<OperatorSpec>,
    pub alpha: Vec<f64>,
}

impl StructuralModel {
    /// Pair a library with its coefficients. Lengths must agree; other
    /// invariant breaches (duplicates, empty library) are reported by
    /// [`validate_model`], not here, so that invalid models can be inspected.
    pub fn new(library: Vec<OperatorSpec>, alpha: Vec<f64>) -> Result<Self> {
        if library.len() != alpha.len() {
            return Err(CoreError::LengthMismatch {
                context: "structural model: library vs alpha",
                expected: library.len(),
                got: alpha.len(),
            });
        }
        Ok(StructuralModel { library, alpha })
    }

    /// Convenience constructor from (operator, coefficient) pairs.
    pub fn from_pairs(pairs: Vec<(OperatorSpec, f64)>) -> Self {
        let (library, alpha) = pairs.into_iter().unzip();
        StructuralModel { library, alpha }
    }

    pub fn len(&self) -> usize {
        self.library.len()
    }

    pub fn is_empty(&self) -> bool {
        self.library.is_empty()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.library.iter().position(|op| op.key() == key)
    }

    pub fn keys(&self) -> Vec<String> {
        self.library.iter().map(|op| op.key()).collect()
    }

    /// Indices with |α_j| above the prune tolerance.
    pub fn support(&self, prune_tol: f64) -> Vec<usize> {
        (0..self.alpha.len())
            .filter(|&j| self.alpha[j].abs() > prune_tol)
            .collect()
    }

    pub fn support_keys(&self, prune_tol: f64) -> Vec<String> {
        self.support(prune_tol)
            .into_iter()
            .map(|j| self.library[j].key())
            .collect()
    }

    /// Model with the same library and every coefficient replaced.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        StructuralModel::new(self.library.clone(), alpha)
    }
}

/// A broken model invariant, reported rather than thrown.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check a model against its own invariants and the domain's axes. Returns
/// an empty list exactly when everything holds.
pub fn validate_model(model: &StructuralModel, domain: &SpaceTimeDomain) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = |msg: String| Violation { message: msg };

    if model.library.is_empty() {
        out.push(v("library is empty; need at least one operator".into()));
    }
    if model.library.len() != model.alpha.len() {
        out.push(v(format!(
            "library has {} operators but alpha has {} entries",
            model.library.len(),
            model.alpha.len()
        )));
    }
    let mut seen: Vec<String> = Vec::new();
    for op in &model.library {
        let key = op.key();
        if seen.contains(&key) {
            if !out
                .iter()
                .any(|w| w.message.contains(&format!("duplicate operator `{key}`")))
            {
                out.push(v(format!("duplicate operator `{key}` in library")));
            }
        } else {
            seen.push(key);
        }
    }
    for op in &model.library {
        if op.needs_y() && domain.dim == 1 {
            out.push(v(format!(
                "operator {} requires a y axis but the domain is 1-dimensional",
                op.key()
            )));
        }
        match (op.kind, &op.source) {
            (OpKind::Source, None) => {
                out.push(v("SOURCE operator is missing its source field".into()))
            }
            (OpKind::Source, Some(_)) => {}
            (_, Some(_)) => out.push(v(format!(
                "operator {} must not carry a source field",
                op.key()
            ))),
            _ => {}
        }
    }
    for (j, a) in model.alpha.iter().enumerate() {
        if !a.is_finite() {
            out.push(v(format!("alpha[{j}] is not finite")));
        }
    }
    out
}

/// A structural intervention on one library term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    /// Operator key, e.g. `U2`.
    pub target: String,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// α_target ← 0.
    Zero,
    /// α_target ← c · α_target.
    Scale(f64),
    /// Swap the operator, keeping its coefficient.
    Replace(OperatorSpec),
}

impl Intervention {
    pub fn zero(target: &str) -> Self {
        Intervention {
            target: target.into(),
            action: Action::Zero,
        }
    }

    pub fn scale(target: &str, c: f64) -> Self {
        Intervention {
            target: target.into(),
            action: Action::Scale(c),
        }
    }

    pub fn replace(target: &str, spec: OperatorSpec) -> Self {
        Intervention {
            target: target.into(),
            action: Action::Replace(spec),
        }
    }
}

/// Apply a structural intervention, returning the modified model. The input
/// model is left untouched.
pub fn apply_intervention(model: &StructuralModel, iv: &Intervention) -> Result<StructuralModel> {
    let idx = model
        .index_of(&iv.target)
        .ok_or_else(|| CoreError::UnknownOperator(iv.target.clone()))?;
    let mut out = model.clone();
    match &iv.action {
        Action::Zero => out.alpha[idx] = 0.0,
        Action::Scale(c) => {
            if !c.is_finite() {
                return Err(CoreError::Invalid {
                    what: "intervention",
                    why: format!("scale factor {c} is not finite"),
                });
            }
            out.alpha[idx] *= c;
        }
        Action::Replace(spec) => out.library[idx] = *spec,
    }
    Ok(out)
}

/// Coefficient estimate with its pruned support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub alpha_hat: Vec<f64>,
    /// Exactly { j : |alpha_hat[j]| > prune_tol }.
    pub support: Vec<usize>,
    pub prune_tol: f64,
}

impl CoefficientEstimate {
    pub fn new(alpha_hat: Vec<f64>, prune_tol: f64) -> Self {
        let support = (0..alpha_hat.len())
            .filter(|&j| alpha_hat[j].abs() > prune_tol)
            .collect();
        CoefficientEstimate {
            alpha_hat,
            support,
            prune_tol,
        }
    }
}

/// One observation record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: Point,
    pub u: f64,
}

/// Observations plus the collocation grid used for residual quadrature.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub points: Vec<Sample>,
    pub colloc: CollocGrid,
    /// Standard deviation of the Gaussian noise applied at generation.
    pub noise_sigma: f64,
}

impl SampleSet {
    pub fn validate(&self, domain: &SpaceTimeDomain) -> Result<()> {
        if self.colloc.len() == 0 {
            return Err(CoreError::Empty("collocation grid"));
        }
        for (i, s) in self.points.iter().enumerate() {
            if !s.point.is_finite() || !s.u.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("sample {i}"),
                });
            }
            if !domain.contains(s.point) {
                return Err(CoreError::Invalid {
                    what: "sample set",
                    why: format!(
                        "sample {i} at ({}, {}, {}) lies outside the domain",
                        s.point.x, s.point.y, s.point.t
                    ),
                });
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(CoreError::Invalid {
                what: "sample set",
                why: format!("noise_sigma must be >= 0, got {}", self.noise_sigma),
            });
        }
        Ok(())
    }
}

/// Named initial conditions, evaluated on normalized spatial coordinates
/// ξ, η ∈ [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Const(f64),
    /// sin(πξ)
    SinPiX,
    /// sin(πξ)·sin(πη)
    SinPiXSinPiY,
    /// base + amp·sin(πξ)
    OffsetSine { base: f64, amp: f64 },
    /// a1·sin(πξ) + a2·sin(2πξ)
    TwoSines { a1: f64, a2: f64 },
    /// amp·exp(−((ξ−x0)² + (η−y0)²) / (2σ²)), σ in normalized units
    Gauss2d { x0: f64, y0: f64, sigma: f64, amp: f64 },
}

impl InitialCondition {
    pub fn eval(&self, p: Point, domain: &SpaceTimeDomain) -> f64 {
        use std::f64::consts::PI;
        let xi = (p.x - domain.x_lo[0]) / (domain.x_hi[0] - domain.x_lo[0]);
        let eta = if domain.dim == 2 {
            (p.y - domain.x_lo[1]) / (domain.x_hi[1] - domain.x_lo[1])
        } else {
            0.0
        };
        match self {
            InitialCondition::Const(c) => *c,
            InitialCondition::SinPiX => (PI * xi).sin(),
            InitialCondition::SinPiXSinPiY => (PI * xi).sin() * (PI * eta).sin(),
            InitialCondition::OffsetSine { base, amp } => base + amp * (PI * xi).sin(),
            InitialCondition::TwoSines { a1, a2 } => {
                a1 * (PI * xi).sin() + a2 * (2.0 * PI * xi).sin()
            }
            InitialCondition::Gauss2d { x0, y0, sigma, amp } => {
                let dx = xi - x0;
                let dy = eta - y0;
                amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom1() -> SpaceTimeDomain {
        SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 11, 11).unwrap()
    }

    #[test]
    fn validate_flags_missing_axis() {
        let m = StructuralModel::from_pairs(vec![(OperatorSpec::dy(), 1.0)]);
        let vs = validate_model(&m, &dom1());
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("DY"), "{}", vs[0].message);
    }

    #[test]
    fn validate_accepts_reaction_library() {
        let m = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 1.0),
            (OperatorSpec::u2(), -1.0),
            (OperatorSpec::dxx(), 0.0),
        ]);
        assert!(validate_model(&m, &dom1()).is_empty());
    }

    #[test]
    fn validate_flags_duplicate_ids_once() {
        let m = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 1.0),
            (OperatorSpec::u(), 2.0),
        ]);
        let vs = validate_model(&m, &dom1());
        assert_eq!(vs.len(), 1);
        assert!(vs[0].message.contains("duplicate operator `U`"));
    }

    #[test]
    fn intervention_zero_and_scale() {
        let m = StructuralModel::from_pairs(vec![
            (OperatorSpec::dxx(), 0.9),
            (OperatorSpec::u(), 1.0),
        ]);
        let z = apply_intervention(&m, &Intervention::zero("DXX")).unwrap();
        assert_eq!(z.alpha, vec![0.0, 1.0]);
        // original untouched
        assert_eq!(m.alpha, vec![0.9, 1.0]);

        let s = apply_intervention(&m, &Intervention::scale("U", 0.5)).unwrap();
        assert_eq!(s.alpha, vec![0.9, 0.5]);
    }

    #[test]
    fn intervention_zero_is_idempotent_and_commutes() {
        let m = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 1.0),
            (OperatorSpec::u2(), -1.0),
            (OperatorSpec::dxx(), 0.3),
        ]);
        let once = apply_intervention(&m, &Intervention::zero("U2")).unwrap();
        let twice = apply_intervention(&once, &Intervention::zero("U2")).unwrap();
        assert_eq!(once, twice);

        let ab = apply_intervention(
            &apply_intervention(&m, &Intervention::zero("U")).unwrap(),
            &Intervention::zero("DXX"),
        )
        .unwrap();
        let ba = apply_intervention(
            &apply_intervention(&m, &Intervention::zero("DXX")).unwrap(),
            &Intervention::zero("U"),
        )
        .unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn intervention_unknown_target_named_in_error() {
        let m = StructuralModel::from_pairs(vec![(OperatorSpec::u(), 1.0)]);
        let err = apply_intervention(&m, &Intervention::zero("LAP")).unwrap_err();
        assert!(err.to_string().contains("LAP"), "{err}");
    }

    #[test]
    fn intervention_replace_keeps_alpha() {
        let m = StructuralModel::from_pairs(vec![(OperatorSpec::dxx(), 0.7)]);
        let r = apply_intervention(
            &m,
            &Intervention::replace("DXX", OperatorSpec::lap()),
        )
        .unwrap();
        assert_eq!(r.library[0], OperatorSpec::lap());
        assert_eq!(r.alpha[0], 0.7);
    }

    #[test]
    fn interventions_introduce_no_new_violations() {
        let m = StructuralModel::from_pairs(vec![
            (OperatorSpec::u(), 1.0),
            (OperatorSpec::u2(), -1.0),
        ]);
        let before = validate_model(&m, &dom1()).len();
        for iv in [
            Intervention::zero("U"),
            Intervention::scale("U2", 2.5),
            Intervention::scale("U", 0.0),
        ] {
            let after = apply_intervention(&m, &iv).unwrap();
            assert!(validate_model(&after, &dom1()).len() <= before);
        }
    }

    #[test]
    fn coefficient_estimate_support_is_exact() {
        let est = CoefficientEstimate::new(vec![0.5, -1e-4, 0.0, -2.0], 1e-3);
        assert_eq!(est.support, vec![0, 3]);
    }

    #[test]
    fn operator_keys_round_trip() {
        for op in [
            OperatorSpec::u(),
            OperatorSpec::u2(),
            OperatorSpec::u3(),
            OperatorSpec::dx(),
            OperatorSpec::dy(),
            OperatorSpec::dxx(),
            OperatorSpec::dyy(),
            OperatorSpec::dxy(),
            OperatorSpec::lap(),
            OperatorSpec::adv_x(),
            OperatorSpec::adv_y(),
            OperatorSpec::source(SourceFn::Sin2PiX),
            OperatorSpec::source(SourceFn::Const(2.0)),
        ] {
            let parsed = OperatorSpec::parse(&op.key()).unwrap();
            assert_eq!(parsed, op, "round trip of {}", op.key());
        }
    }

    #[test]
    fn domain_rejects_degenerate_bounds() {
        assert!(SpaceTimeDomain::dim1(1.0, 1.0, 1.0, 11, 11).is_err());
        assert!(SpaceTimeDomain::dim1(0.0, 1.0, 0.0, 11, 11).is_err());
        assert!(SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 2, 11).is_err());
    }
}
