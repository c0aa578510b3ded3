//! Sine-activation MLP surrogate `u(x[,y],t)` with exact derivative
//! evaluation.
//!
//! The forward pass propagates *jet channels* through the network: the value
//! plus every first partial and the spatial second partials with respect to
//! the inputs. Affine layers act channel-wise; the sine nonlinearity mixes
//! channels through the chain rule. Because the channels are carried exactly,
//! `eval_jet` returns true derivatives of the network function, not
//! finite-difference approximations.
//!
//! The reverse pass walks the same tape backwards and accumulates the
//! gradient of any linear functional of the jet with respect to all
//! parameters, which is what both `eval_param_grad` and the trainer's loss
//! gradient are built on.
//!
//! Architecture: `widths = [in, h1, ..., hk, 1]`; hidden activations are
//! `sin(·)`, the first hidden layer computes `sin(ω₀·(W x) + b)` (frequency
//! scale on the weight term only), the output layer is affine. Input order is
//! `[x, t]` in 1D and `[x, y, t]` in 2D.

use crate::error::{CoreError, Result};
use crate::jet::{Jet2, JetSeed};
use crate::model::Point;
use crate::rng::Rng;

/// Names one component of a [`Jet2`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetComponent {
    Value,
    Dt,
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
}

#[derive(Clone, Debug)]
pub struct SurrogateNet {
    widths: Vec<usize>,
    omega0: f64,
    params: Vec<f64>,
    seed: u64,
    /// Start offset of each layer's weight block; biases follow the weights.
    offsets: Vec<usize>,
    /// Affine input map: the network consumes (coord − shift)·scale. The
    /// reported jets are always with respect to the physical coordinates
    /// (the map enters through the derivative seeds).
    input_shift: [f64; 3],
    input_scale: [f64; 3],
}

/// Per-point forward storage reused across evaluations.
#[derive(Default)]
pub struct Tape {
    channels: usize,
    input: Vec<f64>,
    /// Pre-activation channels per hidden layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation channels per hidden layer.
    act: Vec<Vec<f64>>,
    adj_a: Vec<f64>,
    adj_p: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }
}

// Channel indices. 1D uses [VAL, DX, DT, DXX]; 2D uses
// [VAL, DX, DY, DT, DXX, DYY, DXY]; value-only mode uses [VAL].
const C1: usize = 4;
const C2: usize = 7;

fn channel_count(dim: usize) -> usize {
    if dim == 2 {
        C2
    } else {
        C1
    }
}

impl SurrogateNet {
    /// Deterministic initialization. First-layer weights are drawn from
    /// U(−1/fan_in, 1/fan_in), deeper weights from U(−√(6/fan_in),
    /// √(6/fan_in)), biases from U(−1/√fan_in, 1/√fan_in).
    pub fn init(widths: &[usize], omega0: f64, seed: u64) -> Result<Self> {
        Self::check_widths(widths)?;
        if !omega0.is_finite() {
            return Err(CoreError::Invalid {
                what: "surrogate",
                why: format!("omega0 = {omega0} is not finite"),
            });
        }
        let mut rng = Rng::new(seed);
        let mut params = Vec::new();
        let n_layers = widths.len() - 1;
        for l in 0..n_layers {
            let (wb, bb) = Self::layer_bounds(widths, l);
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            for _ in 0..fan_in * fan_out {
                params.push(rng.range(-wb, wb));
            }
            for _ in 0..fan_out {
                params.push(rng.range(-bb, bb));
            }
        }
        let mut net = SurrogateNet {
            widths: widths.to_vec(),
            omega0,
            params,
            seed,
            offsets: Vec::new(),
            input_shift: [0.0; 3],
            input_scale: [1.0; 3],
        };
        net.offsets = Self::compute_offsets(&net.widths);
        Ok(net)
    }

    /// Wrap an existing flat parameter vector (e.g. a loaded checkpoint).
    pub fn from_params(widths: Vec<usize>, omega0: f64, params: Vec<f64>) -> Result<Self> {
        Self::check_widths(&widths)?;
        let expected = Self::expected_param_count(&widths);
        if params.len() != expected {
            return Err(CoreError::LengthMismatch {
                context: "surrogate parameters",
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "surrogate parameters".into(),
            });
        }
        let offsets = Self::compute_offsets(&widths);
        Ok(SurrogateNet {
            widths,
            omega0,
            params,
            seed: 0,
            offsets,
            input_shift: [0.0; 3],
            input_scale: [1.0; 3],
        })
    }

    /// Normalize inputs to the unit cube of the given domain. Jets remain
    /// derivatives with respect to the physical coordinates.
    pub fn with_input_normalization(mut self, domain: &crate::model::SpaceTimeDomain) -> Self {
        self.input_shift = [domain.x_lo[0], domain.x_lo[1], 0.0];
        self.input_scale = [
            1.0 / (domain.x_hi[0] - domain.x_lo[0]),
            if domain.dim == 2 {
                1.0 / (domain.x_hi[1] - domain.x_lo[1])
            } else {
                1.0
            },
            1.0 / domain.t_end,
        ];
        self
    }

    /// Set the affine input map directly (used when loading checkpoints).
    pub fn set_input_transform(&mut self, shift: [f64; 3], scale: [f64; 3]) {
        self.input_shift = shift;
        self.input_scale = scale;
    }

    pub fn input_transform(&self) -> ([f64; 3], [f64; 3]) {
        (self.input_shift, self.input_scale)
    }

    /// Initialization bounds (weight, bias) for one layer.
    pub fn layer_bounds(widths: &[usize], layer: usize) -> (f64, f64) {
        let fan_in = widths[layer] as f64;
        let wb = if layer == 0 {
            1.0 / fan_in
        } else {
            (6.0 / fan_in).sqrt()
        };
        (wb, 1.0 / fan_in.sqrt())
    }

    fn check_widths(widths: &[usize]) -> Result<()> {
        let fail = |why: String| {
            Err(CoreError::Invalid {
                what: "surrogate widths",
                why,
            })
        };
        if widths.len() < 2 {
            return fail(format!("need at least [in, out], got {widths:?}"));
        }
        if widths[0] != 2 && widths[0] != 3 {
            return fail(format!(
                "input width must be 2 (x,t) or 3 (x,y,t), got {}",
                widths[0]
            ));
        }
        if *widths.last().unwrap() != 1 {
            return fail(format!("output width must be 1, got {widths:?}"));
        }
        if widths.iter().any(|&w| w == 0) {
            return fail(format!("zero width in {widths:?}"));
        }
        Ok(())
    }

    fn expected_param_count(widths: &[usize]) -> usize {
        widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum::<usize>()
    }

    fn compute_offsets(widths: &[usize]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(widths.len() - 1);
        let mut acc = 0;
        for w in widths.windows(2) {
            offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }
        offsets
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Spatial dimension implied by the input width.
    pub fn spatial_dim(&self) -> usize {
        self.widths[0] - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_w(&self, l: usize) -> &[f64] {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let start = self.offsets[l];
        &self.params[start..start + fan_in * fan_out]
    }

    fn layer_b(&self, l: usize) -> &[f64] {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let start = self.offsets[l] + fan_in * fan_out;
        &self.params[start..start + fan_out]
    }

    fn layer_scale(&self, l: usize) -> f64 {
        // The frequency scale applies to the first layer only, and only when
        // that layer feeds a sine (i.e. the net has at least one hidden layer).
        if l == 0 && self.widths.len() > 2 {
            self.omega0
        } else {
            1.0
        }
    }

    fn input_channels(&self, p: Point, channels: usize) -> Vec<f64> {
        let dim = self.spatial_dim();
        let n_in = self.widths[0];
        let mut input = vec![0.0; n_in * channels];
        // slot indices into shift/scale: x = 0, y = 1, t = 2
        for (j, slot) in input.chunks_exact_mut(channels).enumerate() {
            let axis = if j + 1 == n_in { 2 } else { j };
            let coord = match axis {
                0 => p.x,
                1 => p.y,
                _ => p.t,
            };
            slot[0] = (coord - self.input_shift[axis]) * self.input_scale[axis];
            if channels > 1 {
                // first-derivative seed: input j varies only along itself,
                // at the rate of the affine input map
                let d1 = if dim == 1 {
                    // channels [VAL, DX, DT, DXX]
                    if j == 0 {
                        1
                    } else {
                        2
                    }
                } else {
                    // channels [VAL, DX, DY, DT, DXX, DYY, DXY]
                    j + 1
                };
                slot[d1] = self.input_scale[axis];
            }
        }
        input
    }

    /// Affine transform of all channels: `out = scale·(W·a)`, bias added to
    /// the value channel.
    fn affine_forward(
        &self,
        l: usize,
        channels: usize,
        a: &[f64],
        out: &mut Vec<f64>,
    ) {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let w = self.layer_w(l);
        let b = self.layer_b(l);
        let scale = self.layer_scale(l);
        out.clear();
        out.resize(fan_out * channels, 0.0);
        for n in 0..fan_out {
            let wrow = &w[n * fan_in..(n + 1) * fan_in];
            let orow = &mut out[n * channels..(n + 1) * channels];
            for (j, &wnj) in wrow.iter().enumerate() {
                if wnj == 0.0 {
                    continue;
                }
                let arow = &a[j * channels..(j + 1) * channels];
                for c in 0..channels {
                    orow[c] += wnj * arow[c];
                }
            }
            for c in 0..channels {
                orow[c] *= scale;
            }
            orow[0] += b[n];
        }
    }

    /// sin(·) applied to jet channels in place (`a` ← sine(`p`)).
    fn sine_forward(channels: usize, p: &[f64], a: &mut Vec<f64>) {
        let width = p.len() / channels;
        a.clear();
        a.resize(p.len(), 0.0);
        for n in 0..width {
            let pc = &p[n * channels..(n + 1) * channels];
            let ac = &mut a[n * channels..(n + 1) * channels];
            let (s, c) = pc[0].sin_cos();
            ac[0] = s;
            match channels {
                1 => {}
                C1 => {
                    ac[1] = c * pc[1];
                    ac[2] = c * pc[2];
                    ac[3] = c * pc[3] - s * pc[1] * pc[1];
                }
                C2 => {
                    ac[1] = c * pc[1];
                    ac[2] = c * pc[2];
                    ac[3] = c * pc[3];
                    ac[4] = c * pc[4] - s * pc[1] * pc[1];
                    ac[5] = c * pc[5] - s * pc[2] * pc[2];
                    ac[6] = c * pc[6] - s * pc[1] * pc[2];
                }
                _ => unreachable!("unsupported channel count"),
            }
        }
    }

    /// Adjoint of [`Self::sine_forward`]: given output adjoints `adj_a` and the
    /// stored pre-activations `p`, write pre-activation adjoints into `adj_p`.
    fn sine_backward(channels: usize, p: &[f64], adj_a: &[f64], adj_p: &mut [f64]) {
        let width = p.len() / channels;
        for n in 0..width {
            let pc = &p[n * channels..(n + 1) * channels];
            let aa = &adj_a[n * channels..(n + 1) * channels];
            let ap = &mut adj_p[n * channels..(n + 1) * channels];
            let (s, c) = pc[0].sin_cos();
            match channels {
                1 => {
                    ap[0] = aa[0] * c;
                }
                C1 => {
                    ap[0] = aa[0] * c
                        - s * (aa[1] * pc[1] + aa[2] * pc[2])
                        - aa[3] * (s * pc[3] + c * pc[1] * pc[1]);
                    ap[1] = aa[1] * c - 2.0 * s * pc[1] * aa[3];
                    ap[2] = aa[2] * c;
                    ap[3] = aa[3] * c;
                }
                C2 => {
                    ap[0] = aa[0] * c
                        - s * (aa[1] * pc[1] + aa[2] * pc[2] + aa[3] * pc[3])
                        - aa[4] * (s * pc[4] + c * pc[1] * pc[1])
                        - aa[5] * (s * pc[5] + c * pc[2] * pc[2])
                        - aa[6] * (s * pc[6] + c * pc[1] * pc[2]);
                    ap[1] = aa[1] * c - 2.0 * s * pc[1] * aa[4] - s * pc[2] * aa[6];
                    ap[2] = aa[2] * c - 2.0 * s * pc[2] * aa[5] - s * pc[1] * aa[6];
                    ap[3] = aa[3] * c;
                    ap[4] = aa[4] * c;
                    ap[5] = aa[5] * c;
                    ap[6] = aa[6] * c;
                }
                _ => unreachable!("unsupported channel count"),
            }
        }
    }

    /// Adjoint of [`Self::affine_forward`]. Accumulates parameter gradients
    /// into `grad` and, when `adj_in` is `Some`, writes input adjoints.
    fn affine_backward(
        &self,
        l: usize,
        channels: usize,
        a_in: &[f64],
        adj_out: &[f64],
        grad: &mut [f64],
        adj_in: Option<&mut [f64]>,
    ) {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let w = self.layer_w(l);
        let scale = self.layer_scale(l);
        let w_off = self.offsets[l];
        let b_off = w_off + fan_in * fan_out;
        for n in 0..fan_out {
            let ao = &adj_out[n * channels..(n + 1) * channels];
            grad[b_off + n] += ao[0];
            let grow = &mut grad[w_off + n * fan_in..w_off + (n + 1) * fan_in];
            for j in 0..fan_in {
                let arow = &a_in[j * channels..(j + 1) * channels];
                let mut acc = 0.0;
                for c in 0..channels {
                    acc += ao[c] * arow[c];
                }
                grow[j] += scale * acc;
            }
        }
        if let Some(adj_in) = adj_in {
            for v in adj_in.iter_mut() {
                *v = 0.0;
            }
            for n in 0..fan_out {
                let ao = &adj_out[n * channels..(n + 1) * channels];
                let wrow = &w[n * fan_in..(n + 1) * fan_in];
                for (j, &wnj) in wrow.iter().enumerate() {
                    if wnj == 0.0 {
                        continue;
                    }
                    let arow = &mut adj_in[j * channels..(j + 1) * channels];
                    let f = scale * wnj;
                    for c in 0..channels {
                        arow[c] += f * ao[c];
                    }
                }
            }
        }
    }

    fn forward(&self, p: Point, channels: usize, tape: &mut Tape) -> Vec<f64> {
        let n_layers = self.widths.len() - 1;
        let n_hidden = n_layers - 1;
        tape.channels = channels;
        tape.input = self.input_channels(p, channels);
        tape.pre.resize_with(n_hidden, Vec::new);
        tape.act.resize_with(n_hidden, Vec::new);
        for l in 0..n_hidden {
            let mut pre = std::mem::take(&mut tape.pre[l]);
            {
                let a_in: &[f64] = if l == 0 { &tape.input } else { &tape.act[l - 1] };
                self.affine_forward(l, channels, a_in, &mut pre);
            }
            let mut act = std::mem::take(&mut tape.act[l]);
            Self::sine_forward(channels, &pre, &mut act);
            tape.pre[l] = pre;
            tape.act[l] = act;
        }
        let a_last: &[f64] = if n_hidden == 0 {
            &tape.input
        } else {
            &tape.act[n_hidden - 1]
        };
        let mut out = Vec::new();
        self.affine_forward(n_layers - 1, channels, a_last, &mut out);
        out
    }

    fn backward(&self, tape: &mut Tape, out_adj: &[f64], grad: &mut [f64]) {
        let channels = tape.channels;
        let n_layers = self.widths.len() - 1;
        let n_hidden = n_layers - 1;
        let max_width = *self.widths.iter().max().unwrap();
        let Tape {
            input,
            pre,
            act,
            adj_a,
            adj_p,
            ..
        } = tape;
        adj_a.resize(max_width * channels, 0.0);
        adj_p.resize(max_width * channels, 0.0);

        // Output affine layer feeds the activation adjoints.
        let a_last: &[f64] = if n_hidden == 0 { input } else { &act[n_hidden - 1] };
        let last_in = self.widths[n_layers - 1];
        self.affine_backward(
            n_layers - 1,
            channels,
            a_last,
            out_adj,
            grad,
            Some(&mut adj_a[..last_in * channels]),
        );

        for l in (0..n_hidden).rev() {
            let width = self.widths[l + 1];
            Self::sine_backward(
                channels,
                &pre[l],
                &adj_a[..width * channels],
                &mut adj_p[..width * channels],
            );
            let a_in: &[f64] = if l == 0 { input } else { &act[l - 1] };
            let in_width = self.widths[l];
            let adj_in = if l == 0 {
                None // inputs are leaves
            } else {
                Some(&mut adj_a[..in_width * channels])
            };
            self.affine_backward(l, channels, a_in, &adj_p[..width * channels], grad, adj_in);
        }
    }

    /// Value and exact partial derivatives at a point.
    pub fn eval_jet(&self, p: Point) -> Jet2 {
        let mut tape = Tape::new();
        self.forward_jet(p, &mut tape)
    }

    /// Jet evaluation reusing a caller-held tape (the tape then supports
    /// [`Self::backward_jet`]).
    pub fn forward_jet(&self, p: Point, tape: &mut Tape) -> Jet2 {
        let dim = self.spatial_dim();
        let channels = channel_count(dim);
        let out = self.forward(p, channels, tape);
        if dim == 1 {
            Jet2 {
                dim,
                value: out[0],
                dx: out[1],
                dy: 0.0,
                dt: out[2],
                dxx: out[3],
                dyy: 0.0,
                dxy: 0.0,
            }
        } else {
            Jet2 {
                dim,
                value: out[0],
                dx: out[1],
                dy: out[2],
                dt: out[3],
                dxx: out[4],
                dyy: out[5],
                dxy: out[6],
            }
        }
    }

    /// Accumulate `Σ_c seed_c · ∂(jet_c)/∂θ` into `grad` for the point whose
    /// forward pass filled `tape`.
    pub fn backward_jet(&self, tape: &mut Tape, seed: &JetSeed, grad: &mut [f64]) {
        let dim = self.spatial_dim();
        let channels = channel_count(dim);
        assert_eq!(tape.channels, channels, "tape was not filled by forward_jet");
        let out_adj: Vec<f64> = if dim == 1 {
            vec![seed.value, seed.dx, seed.dt, seed.dxx]
        } else {
            vec![
                seed.value, seed.dx, seed.dy, seed.dt, seed.dxx, seed.dyy, seed.dxy,
            ]
        };
        self.backward(tape, &out_adj, grad);
    }

    /// Plain value evaluation (cheap path without derivative channels).
    pub fn eval_value(&self, p: Point) -> f64 {
        let mut tape = Tape::new();
        self.forward_value(p, &mut tape)
    }

    pub fn forward_value(&self, p: Point, tape: &mut Tape) -> f64 {
        self.forward(p, 1, tape)[0]
    }

    /// Accumulate `adj · ∂u/∂θ` into `grad` after [`Self::forward_value`].
    pub fn backward_value(&self, tape: &mut Tape, adj: f64, grad: &mut [f64]) {
        assert_eq!(tape.channels, 1, "tape was not filled by forward_value");
        self.backward(tape, &[adj], grad);
    }

    /// Gradient of one jet component with respect to every parameter.
    pub fn eval_param_grad(&self, p: Point, which: JetComponent) -> Vec<f64> {
        let mut tape = Tape::new();
        let _ = self.forward_jet(p, &mut tape);
        let mut seed = JetSeed::default();
        match which {
            JetComponent::Value => seed.value = 1.0,
            JetComponent::Dt => seed.dt = 1.0,
            JetComponent::Dx => seed.dx = 1.0,
            JetComponent::Dy => seed.dy = 1.0,
            JetComponent::Dxx => seed.dxx = 1.0,
            JetComponent::Dyy => seed.dyy = 1.0,
            JetComponent::Dxy => seed.dxy = 1.0,
        }
        let mut grad = vec![0.0; self.param_count()];
        self.backward_jet(&mut tape, &seed, &mut grad);
        grad
    }
}
