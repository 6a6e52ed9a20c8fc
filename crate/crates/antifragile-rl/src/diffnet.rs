//! Minimal dense feedforward network with analytic backpropagation.
//!
//! Supplies the three primitives everything else is built on: forward
//! evaluation, parameter gradients, and gradients with respect to the input
//! vector (needed by the observation-attack generators). Parameters are kept
//! in one flat `Vec<f64>` (per layer: row-major weights, then biases) so
//! optimizers and soft target updates can treat a network as a plain slice.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Serialized form: one row-major weight array and one bias array per layer.
#[derive(Serialize, Deserialize)]
struct DiffNetRaw {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "DiffNetRaw", try_from = "DiffNetRaw")]
pub struct DiffNet {
    layer_sizes: Vec<usize>,
    /// Per layer: `out*in` weights (row-major, row = output unit), then `out` biases.
    params: Vec<f64>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Gradients of a scalar (or cotangent-weighted output) with respect to all
/// parameters and the input. `flat` uses the same layout as `DiffNet::params`.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    layer_sizes: Vec<usize>,
    pub flat: Vec<f64>,
    pub input_grad: Vec<f64>,
}

impl GradientBundle {
    fn zeros(net: &DiffNet) -> Self {
        GradientBundle {
            layer_sizes: net.layer_sizes.clone(),
            flat: vec![0.0; net.param_len()],
            input_grad: vec![0.0; net.input_dim()],
        }
    }

    pub fn zero(&mut self) {
        self.flat.iter_mut().for_each(|g| *g = 0.0);
        self.input_grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn weight_grad(&self, layer: usize, out: usize, inp: usize) -> f64 {
        let (w_off, _, fan_in) = layout(&self.layer_sizes, layer);
        self.flat[w_off + out * fan_in + inp]
    }

    pub fn bias_grad(&self, layer: usize, out: usize) -> f64 {
        let (_, b_off, _) = layout(&self.layer_sizes, layer);
        self.flat[b_off + out]
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().chain(self.input_grad.iter()).all(|g| g.is_finite())
    }
}

/// Reusable forward/backward workspace so batched training does not allocate.
#[derive(Debug, Clone)]
pub struct Scratch {
    /// Post-activation values, `acts[0]` is the input copy.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Scratch {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("scratch has at least the input layer")
    }
}

fn layout(layer_sizes: &[usize], layer: usize) -> (usize, usize, usize) {
    let mut off = 0;
    for l in 0..layer {
        off += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
    }
    let fan_in = layer_sizes[layer];
    (off, off + layer_sizes[layer + 1] * fan_in, fan_in)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(scale: f64, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    for (o, &v) in out.iter_mut().zip(x.iter()) {
        *o += scale * v;
    }
}

impl DiffNet {
    /// Zero-initialized network. At least two layer sizes (input, output).
    pub fn new(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "invalid layer sizes {layer_sizes:?}: need >= 2 positive entries"
            )));
        }
        if hidden_activation == Activation::Linear {
            return Err(Error::Config("hidden activation must be tanh or relu".into()));
        }
        let n: usize = (0..layer_sizes.len() - 1)
            .map(|l| layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1])
            .sum();
        Ok(DiffNet {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; n],
            hidden_activation,
            output_activation,
        })
    }

    /// Weights and biases drawn uniformly from ±1/sqrt(fan_in).
    pub fn random(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let mut net = Self::new(layer_sizes, hidden_activation, output_activation)?;
        for layer in 0..net.num_layers() {
            let bound = 1.0 / (net.layer_sizes[layer] as f64).sqrt();
            let (w_off, b_off, fan_in) = layout(&net.layer_sizes, layer);
            let n_w = net.layer_sizes[layer + 1] * fan_in;
            let n_b = net.layer_sizes[layer + 1];
            for p in &mut net.params[w_off..w_off + n_w] {
                *p = rng.gen_range(-bound..bound);
            }
            for p in &mut net.params[b_off..b_off + n_b] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_weight(&mut self, layer: usize, out: usize, inp: usize, v: f64) {
        let (w_off, _, fan_in) = layout(&self.layer_sizes, layer);
        self.params[w_off + out * fan_in + inp] = v;
    }

    pub fn set_bias(&mut self, layer: usize, out: usize, v: f64) {
        let (_, b_off, _) = layout(&self.layer_sizes, layer);
        self.params[b_off + out] = v;
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            delta: vec![0.0; self.layer_sizes.iter().copied().max().unwrap()],
            delta_prev: vec![0.0; self.layer_sizes.iter().copied().max().unwrap()],
        }
    }

    /// Forward pass recording per-layer activations in `scratch`.
    pub fn forward_scratch<'s>(&self, input: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        debug_assert_eq!(input.len(), self.input_dim());
        scratch.acts[0].copy_from_slice(input);
        for layer in 0..self.num_layers() {
            let (w_off, b_off, fan_in) = layout(&self.layer_sizes, layer);
            let fan_out = self.layer_sizes[layer + 1];
            let act = self.activation_for(layer);
            let (prev, rest) = scratch.acts.split_at_mut(layer + 1);
            let x = &prev[layer];
            let y = &mut rest[0];
            for o in 0..fan_out {
                let row = &self.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                let z = dot(row, x) + self.params[b_off + o];
                y[o] = act.apply(z);
            }
        }
        scratch.acts.last().unwrap()
    }

    /// Forward evaluation. Deterministic; errors on input length mismatch.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "forward input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut scratch = self.scratch();
        Ok(self.forward_scratch(input, &mut scratch).to_vec())
    }

    /// Backward pass from recorded activations. Accumulates `scale * grad`
    /// into `bundle` and writes the input gradient (overwriting it).
    pub fn backward_scratch(
        &self,
        scratch: &mut Scratch,
        output_cotangent: &[f64],
        bundle: &mut GradientBundle,
        scale: f64,
    ) {
        debug_assert_eq!(output_cotangent.len(), self.output_dim());
        let n_layers = self.num_layers();
        let out_act = self.activation_for(n_layers - 1);
        for (d, (&c, &a)) in scratch
            .delta
            .iter_mut()
            .zip(output_cotangent.iter().zip(scratch.acts[n_layers].iter()))
        {
            *d = c * out_act.derivative_from_output(a);
        }
        for layer in (0..n_layers).rev() {
            let (w_off, b_off, fan_in) = layout(&self.layer_sizes, layer);
            let fan_out = self.layer_sizes[layer + 1];
            let x = &scratch.acts[layer];
            scratch.delta_prev[..fan_in].iter_mut().for_each(|d| *d = 0.0);
            for o in 0..fan_out {
                let d = scratch.delta[o];
                let row = &self.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                let g_row = &mut bundle.flat[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                axpy(scale * d, x, g_row);
                bundle.flat[b_off + o] += scale * d;
                axpy(d, row, &mut scratch.delta_prev[..fan_in]);
            }
            if layer > 0 {
                let act = self.activation_for(layer - 1);
                for i in 0..fan_in {
                    scratch.delta[i] =
                        scratch.delta_prev[i] * act.derivative_from_output(scratch.acts[layer][i]);
                }
            } else {
                bundle
                    .input_grad
                    .copy_from_slice(&scratch.delta_prev[..fan_in]);
            }
        }
    }

    /// Jacobian-transpose products of the forward map: parameter gradients and
    /// the input gradient of `cotangent . output`.
    pub fn backward(&self, input: &[f64], output_cotangent: &[f64]) -> Result<GradientBundle> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "backward input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        if output_cotangent.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "backward cotangent",
                expected: self.output_dim(),
                got: output_cotangent.len(),
            });
        }
        let mut scratch = self.scratch();
        self.forward_scratch(input, &mut scratch);
        let mut bundle = GradientBundle::zeros(self);
        self.backward_scratch(&mut scratch, output_cotangent, &mut bundle, 1.0);
        if !bundle.is_finite() {
            return Err(Error::NonFinite("backward gradients"));
        }
        Ok(bundle)
    }

    /// Gradient with respect to the input of the scalar
    /// `sum_j output_weights[j] * output_j`.
    pub fn input_gradient_of_scalar(
        &self,
        input: &[f64],
        output_weights: &[f64],
    ) -> Result<Vec<f64>> {
        Ok(self.backward(input, output_weights)?.input_grad)
    }

    pub fn gradient_bundle(&self) -> GradientBundle {
        GradientBundle::zeros(self)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl From<DiffNet> for DiffNetRaw {
    fn from(net: DiffNet) -> Self {
        let mut weights = Vec::with_capacity(net.num_layers());
        let mut biases = Vec::with_capacity(net.num_layers());
        for layer in 0..net.num_layers() {
            let (w_off, b_off, fan_in) = layout(&net.layer_sizes, layer);
            let fan_out = net.layer_sizes[layer + 1];
            weights.push(net.params[w_off..w_off + fan_out * fan_in].to_vec());
            biases.push(net.params[b_off..b_off + fan_out].to_vec());
        }
        DiffNetRaw {
            layer_sizes: net.layer_sizes,
            weights,
            biases,
            hidden_activation: net.hidden_activation,
            output_activation: net.output_activation,
        }
    }
}

impl TryFrom<DiffNetRaw> for DiffNet {
    type Error = Error;

    fn try_from(raw: DiffNetRaw) -> Result<Self> {
        let mut net = DiffNet::new(&raw.layer_sizes, raw.hidden_activation, raw.output_activation)?;
        let n_layers = net.num_layers();
        if raw.weights.len() != n_layers || raw.biases.len() != n_layers {
            return Err(Error::Config(format!(
                "expected {n_layers} weight/bias arrays, got {}/{}",
                raw.weights.len(),
                raw.biases.len()
            )));
        }
        for layer in 0..n_layers {
            let (w_off, b_off, fan_in) = layout(&raw.layer_sizes, layer);
            let fan_out = raw.layer_sizes[layer + 1];
            if raw.weights[layer].len() != fan_out * fan_in {
                return Err(Error::Shape {
                    context: "deserialized weight array",
                    expected: fan_out * fan_in,
                    got: raw.weights[layer].len(),
                });
            }
            if raw.biases[layer].len() != fan_out {
                return Err(Error::Shape {
                    context: "deserialized bias array",
                    expected: fan_out,
                    got: raw.biases[layer].len(),
                });
            }
            net.params[w_off..w_off + fan_out * fan_in].copy_from_slice(&raw.weights[layer]);
            net.params[b_off..b_off + fan_out].copy_from_slice(&raw.biases[layer]);
        }
        if !net.all_finite() {
            return Err(Error::NonFinite("deserialized network parameters"));
        }
        Ok(net)
    }
}

/// Central finite differences of `f` with respect to `x`. Test oracle shared
/// by the gradient-correctness suites; kept in the library so integration
/// tests and the acceptance suite use one implementation.
pub fn finite_difference_gradient(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Relative error with an absolute floor, for comparing gradients near zero.
pub fn gradient_mismatch(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom < 1e-6 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_maps_anything_to_zero() {
        let net = DiffNet::new(&[3, 4, 2], Activation::Tanh, Activation::Tanh).unwrap();
        let out = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let mut net = DiffNet::new(&[2, 2], Activation::Tanh, Activation::Linear).unwrap();
        net.set_weight(0, 0, 0, 1.0);
        net.set_weight(0, 1, 1, 1.0);
        let out = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    // Independent oracle: recompute a 3-4-2 tanh net element by element,
    // without going through the layered forward path.
    #[test]
    fn forward_matches_per_element_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = DiffNet::random(&[3, 4, 2], Activation::Tanh, Activation::Tanh, &mut rng).unwrap();
        let raw: DiffNetRaw = net.clone().into();
        let input = [0.3, -0.8, 1.4];

        let mut hidden = [0.0f64; 4];
        for (o, h) in hidden.iter_mut().enumerate() {
            let mut z = raw.biases[0][o];
            for (i, &x) in input.iter().enumerate() {
                z += raw.weights[0][o * 3 + i] * x;
            }
            *h = z.tanh();
        }
        let mut expect = [0.0f64; 2];
        for (o, e) in expect.iter_mut().enumerate() {
            let mut z = raw.biases[1][o];
            for (i, &h) in hidden.iter().enumerate() {
                z += raw.weights[1][o * 4 + i] * h;
            }
            *e = z.tanh();
        }

        let out = net.forward(&input).unwrap();
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DiffNet::random(&[5, 8, 3], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, -0.5];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn linear_1x1_backward_analytic() {
        let mut net = DiffNet::new(&[1, 1], Activation::Tanh, Activation::Linear).unwrap();
        net.set_weight(0, 0, 0, 2.5);
        let bundle = net.backward(&[1.5], &[1.0]).unwrap();
        assert_eq!(bundle.input_grad, vec![2.5]);
        assert_eq!(bundle.weight_grad(0, 0, 0), 1.5);
        assert_eq!(bundle.bias_grad(0, 0), 1.0);
    }

    #[test]
    fn zero_cotangent_gives_zero_bundle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = DiffNet::random(&[4, 6, 2], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let bundle = net.backward(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(bundle.flat.iter().all(|&g| g == 0.0));
        assert!(bundle.input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences_9_16_3() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net =
            DiffNet::random(&[9, 16, 3], Activation::Tanh, Activation::Tanh, &mut rng).unwrap();
        let input: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cot = [0.7, -1.3, 0.4];
        let bundle = net.backward(&input, &cot).unwrap();

        let scalar = |n: &DiffNet, x: &[f64]| -> f64 {
            let y = n.forward(x).unwrap();
            y.iter().zip(cot.iter()).map(|(a, b)| a * b).sum()
        };

        // Parameter gradients.
        let mut probe = net.clone();
        let base = net.params().to_vec();
        let numeric = finite_difference_gradient(
            &mut |p: &[f64]| {
                probe.params_mut().copy_from_slice(p);
                scalar(&probe, &input)
            },
            &base,
            1e-5,
        );
        for (a, n) in bundle.flat.iter().zip(numeric.iter()) {
            assert!(gradient_mismatch(*a, *n) <= 1e-4, "param grad {a} vs {n}");
        }

        // Input gradient.
        let numeric_in =
            finite_difference_gradient(&mut |x: &[f64]| scalar(&net, x), &input, 1e-5);
        for (a, n) in bundle.input_grad.iter().zip(numeric_in.iter()) {
            assert!(gradient_mismatch(*a, *n) <= 1e-4, "input grad {a} vs {n}");
        }
    }

    #[test]
    fn input_gradient_of_weighted_sum_linear() {
        let mut net = DiffNet::new(&[2, 1], Activation::Tanh, Activation::Linear).unwrap();
        net.set_weight(0, 0, 0, 2.0);
        net.set_weight(0, 0, 1, -1.0);
        let grad = net.input_gradient_of_scalar(&[0.3, 0.9], &[1.0]).unwrap();
        assert_eq!(grad, vec![2.0, -1.0]);
    }

    #[test]
    fn input_gradient_of_constant_scalar_is_zero() {
        // All zero weights: output does not depend on the input.
        let net = DiffNet::new(&[3, 2], Activation::Tanh, Activation::Linear).unwrap();
        let grad = net.input_gradient_of_scalar(&[1.0, 2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(grad, vec![0.0, 0.0, 0.0]);
    }

    // Chain rule: input gradient of g(f(x)) equals backward through g then f.
    #[test]
    fn chained_backward_equals_composition_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = DiffNet::random(&[4, 8, 3], Activation::Tanh, Activation::Tanh, &mut rng).unwrap();
        let g = DiffNet::random(&[3, 6, 1], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mid = f.forward(&x).unwrap();
        let g_in = g.input_gradient_of_scalar(&mid, &[1.0]).unwrap();
        let chained = f.backward(&x, &g_in).unwrap().input_grad;

        let numeric = finite_difference_gradient(
            &mut |p: &[f64]| {
                let m = f.forward(p).unwrap();
                g.forward(&m).unwrap()[0]
            },
            &x,
            1e-5,
        );
        for (a, n) in chained.iter().zip(numeric.iter()) {
            assert!(gradient_mismatch(*a, *n) <= 1e-4, "chained {a} vs fd {n}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net =
            DiffNet::random(&[9, 64, 64, 3], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let json = net.to_json().unwrap();
        let back = DiffNet::from_json(&json).unwrap();
        assert_eq!(net.layer_sizes(), back.layer_sizes());
        assert!(net
            .params()
            .iter()
            .zip(back.params().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn shape_errors_are_reported() {
        let net = DiffNet::new(&[3, 2], Activation::Tanh, Activation::Linear).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(matches!(net.backward(&[1.0, 2.0, 3.0], &[1.0]), Err(Error::Shape { .. })));
    }
}
