//! Fully connected autoencoder: topology, forward pass, reconstruction loss,
//! reverse-mode gradients and the momentum SGD update.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix};

/// Hidden widths of the encoder between the input and the latent layer.
/// The decoder mirrors them.
pub const DEFAULT_HIDDEN: [usize; 6] = [128, 128, 29, 17, 7, 5];
/// Only layers of this width carry a ReLU unless explicitly overridden.
pub const RELU_WIDTH: usize = 128;
pub const DEFAULT_LATENT_DIM: usize = 3;
pub const DEFAULT_INPUT_DIM: usize = 24;

/// Rows per chunk when evaluating large datasets without keeping activations.
const EVAL_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative; the ReLU subgradient at exactly 0 is taken as 0.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// Index of the layer whose output is the latent code.
    pub latent_layer: usize,
    /// Allows ReLU on layers narrower or wider than [`RELU_WIDTH`].
    #[serde(default)]
    pub relu_override: bool,
}

impl NetworkSpec {
    /// The default ladder `C→128→128→29→17→7→5→L→5→7→17→29→128→128→C`.
    pub fn autoencoder(input_dim: usize, latent_dim: usize) -> Result<Self> {
        Self::ladder(input_dim, &DEFAULT_HIDDEN, latent_dim)
    }

    /// Mirrored encoder/decoder through `hidden` widths; ReLU exactly on the
    /// [`RELU_WIDTH`]-wide layers.
    pub fn ladder(input_dim: usize, hidden: &[usize], latent_dim: usize) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(latent_dim);
        widths.extend(hidden.iter().rev());
        widths.push(input_dim);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| LayerSpec {
                in_dim: w[0],
                out_dim: w[1],
                activation: if w[1] == RELU_WIDTH && i != last {
                    Activation::Relu
                } else {
                    Activation::Identity
                },
            })
            .collect();
        let spec = NetworkSpec {
            input_dim,
            latent_dim,
            layers,
            latent_layer: hidden.len(),
            relu_override: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Arbitrary layer chain, mainly for reduced networks in tests.
    pub fn custom(
        layers: Vec<LayerSpec>,
        latent_layer: usize,
        relu_override: bool,
    ) -> Result<Self> {
        let input_dim = layers.first().map_or(0, |l| l.in_dim);
        let latent_dim = layers.get(latent_layer).map_or(0, |l| l.out_dim);
        let spec = NetworkSpec {
            input_dim,
            latent_dim,
            layers,
            latent_layer,
            relu_override,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(format!("network spec: {m}")));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if self.latent_layer >= self.layers.len() {
            return bad(format!("latent layer {} out of range", self.latent_layer));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return bad(format!("layer {i} has a zero dimension"));
            }
            if l.activation == Activation::Relu && l.out_dim != RELU_WIDTH && !self.relu_override {
                return bad(format!(
                    "layer {i} ({}→{}) uses ReLU but only {RELU_WIDTH}-wide layers may without an override",
                    l.in_dim, l.out_dim
                ));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return bad(format!("layer {i} output does not feed layer {}", i + 1));
            }
        }
        if self.layers[0].in_dim != self.input_dim {
            return bad("first layer does not take the input".into());
        }
        if self.layers.last().map(|l| l.out_dim) != Some(self.input_dim) {
            return bad("last layer does not reconstruct the input".into());
        }
        if self.layers[self.latent_layer].out_dim != self.latent_dim {
            return bad("latent layer width disagrees with latent_dim".into());
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.out_dim * (l.in_dim + 1)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// out_dim × in_dim.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Trainable parameters in ladder order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub layers: Vec<LayerParams>,
}

/// Gradients share the layout of the parameters they differentiate.
pub type Gradients = Weights;

impl Weights {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Weights {
            layers: spec
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: Matrix::zeros(l.out_dim, l.in_dim),
                    bias: vec![0.0; l.out_dim],
                })
                .collect(),
        }
    }

    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::Shape(format!(
                "{} weight layers for a {}-layer network",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        for (i, (p, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if p.weight.shape() != (l.out_dim, l.in_dim) || p.bias.len() != l.out_dim {
                return Err(Error::Shape(format!(
                    "layer {i} parameters do not match the spec"
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Every parameter, layer by layer: weights row-major, then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    /// Overwrites every parameter from a slice in [`Weights::flat`] order.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let n = self.flat().len();
        if values.len() != n {
            return Err(Error::Shape(format!(
                "{} values for {n} parameters",
                values.len()
            )));
        }
        for (dst, src) in self.flat_mut().zip(values) {
            *dst = *src;
        }
        Ok(())
    }
}

/// Glorot-uniform weights in `[−a, a]`, `a = sqrt(6 / (in + out))`; zero biases.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Weights::zeros(spec);
    for (p, l) in w.layers.iter_mut().zip(&spec.layers) {
        let a = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        for v in p.weight.as_mut_slice() {
            *v = dist.sample(&mut rng);
        }
    }
    w
}

/// Activations of a single forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
    pub latent: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

pub fn forward(spec: &NetworkSpec, w: &Weights, x: &[f64]) -> Result<ForwardTrace> {
    let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let trace = forward_batch(spec, w, &batch)?;
    let pre: Vec<Vec<f64>> = trace.pre.into_iter().map(Matrix::into_vec).collect();
    let post: Vec<Vec<f64>> = trace
        .post
        .into_iter()
        .skip(1)
        .map(Matrix::into_vec)
        .collect();
    Ok(ForwardTrace {
        latent: post[spec.latent_layer].clone(),
        reconstruction: post.last().cloned().unwrap_or_default(),
        pre,
        post,
    })
}

/// Batched activations. `post[0]` is the input, `post[l + 1]` the output of layer `l`.
pub(crate) struct BatchTrace {
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl BatchTrace {
    fn output(&self) -> &Matrix {
        self.post.last().expect("input is always present")
    }
}

pub(crate) fn forward_batch(spec: &NetworkSpec, w: &Weights, x: &Matrix) -> Result<BatchTrace> {
    check_inputs(spec, w, x)?;
    let mut pre = Vec::with_capacity(spec.layers.len());
    let mut post = Vec::with_capacity(spec.layers.len() + 1);
    post.push(x.clone());
    for (l, p) in spec.layers.iter().zip(&w.layers) {
        let z = affine(post.last().expect("nonempty"), p);
        let mut a = z.clone();
        if l.activation != Activation::Identity {
            a.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = l.activation.apply(*v));
        }
        pre.push(z);
        post.push(a);
    }
    Ok(BatchTrace { pre, post })
}

fn check_inputs(spec: &NetworkSpec, w: &Weights, x: &Matrix) -> Result<()> {
    w.check_shape(spec)?;
    if x.cols() != spec.input_dim {
        return Err(Error::Shape(format!(
            "input has {} values, network expects {}",
            x.cols(),
            spec.input_dim
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("network input".into()));
    }
    Ok(())
}

/// `input · Wᵀ + b`, one row per sample.
fn affine(input: &Matrix, p: &LayerParams) -> Matrix {
    let mut out = Matrix::zeros(input.rows(), p.weight.rows());
    for r in 0..out.rows() {
        out.row_mut(r).copy_from_slice(&p.bias);
    }
    gemm(1.0, input.view(), p.weight.view().t(), 1.0, &mut out);
    out
}

/// Latent codes and summed squared reconstruction error of every row,
/// computed in chunks so that activations are never all resident.
pub(crate) fn encode_and_score(
    spec: &NetworkSpec,
    w: &Weights,
    x: &Matrix,
) -> Result<(Matrix, f64)> {
    check_inputs(spec, w, x)?;
    let mut latents = Vec::with_capacity(x.rows() * spec.latent_dim);
    let mut sse = 0.0;
    let mut start = 0;
    while start < x.rows() {
        let end = (start + EVAL_CHUNK).min(x.rows());
        let chunk = x.slice_rows(start, end);
        let trace = forward_batch(spec, w, &chunk)?;
        latents.extend_from_slice(trace.post[spec.latent_layer + 1].as_slice());
        sse += trace
            .output()
            .as_slice()
            .iter()
            .zip(chunk.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        start = end;
    }
    Ok((Matrix::from_vec(x.rows(), spec.latent_dim, latents)?, sse))
}

/// Latent code of every row of `x`.
pub fn encode_batch(spec: &NetworkSpec, w: &Weights, x: &Matrix) -> Result<Matrix> {
    encode_and_score(spec, w, x).map(|(z, _)| z)
}

/// Mean squared reconstruction error over all `N·C` entries.
pub fn reconstruction_loss(batch: &Matrix, spec: &NetworkSpec, w: &Weights) -> Result<f64> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    let (_, sse) = encode_and_score(spec, w, batch)?;
    Ok(sse / (batch.rows() * batch.cols()) as f64)
}

/// A differentiable penalty on the batch of latent codes (N × L).
pub trait LatentPenalty {
    fn value(&self, latents: &Matrix) -> Result<f64>;
    fn value_and_gradient(&self, latents: &Matrix) -> Result<(f64, Matrix)>;
}

/// `MSE + λ·P` for one batch. `P` is skipped when `λ = 0` or no penalty is given.
pub fn objective(
    batch: &Matrix,
    spec: &NetworkSpec,
    w: &Weights,
    penalty_weight: f64,
    penalty: Option<&dyn LatentPenalty>,
) -> Result<f64> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    let (z, sse) = encode_and_score(spec, w, batch)?;
    let mse = sse / (batch.rows() * batch.cols()) as f64;
    match penalty {
        Some(p) if penalty_weight > 0.0 => Ok(mse + penalty_weight * p.value(&z)?),
        _ => Ok(mse),
    }
}

/// Gradients of the combined objective together with its two terms.
#[derive(Clone, Debug)]
pub struct GradientReport {
    pub grads: Gradients,
    pub mse: f64,
    /// Unweighted penalty value (0 when the penalty was not evaluated).
    pub penalty: f64,
}

impl GradientReport {
    pub fn loss(&self, penalty_weight: f64) -> f64 {
        self.mse + penalty_weight * self.penalty
    }
}

/// Exact reverse-mode gradients of `MSE + λ·P` with respect to every weight and bias.
pub fn gradients(
    batch: &Matrix,
    spec: &NetworkSpec,
    w: &Weights,
    penalty_weight: f64,
    penalty: Option<&dyn LatentPenalty>,
) -> Result<GradientReport> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    if !(penalty_weight >= 0.0 && penalty_weight.is_finite()) {
        return Err(Error::Parameter(format!(
            "penalty weight must be nonnegative, got {penalty_weight}"
        )));
    }
    let trace = forward_batch(spec, w, batch)?;
    let scale = 1.0 / (batch.rows() * batch.cols()) as f64;

    let residual = trace.output().sub(batch);
    let mse = residual.as_slice().iter().map(|r| r * r).sum::<f64>() * scale;
    let mut upstream = residual.scaled(2.0 * scale);

    let (penalty_value, penalty_grad) = match penalty {
        Some(p) if penalty_weight > 0.0 => {
            let (v, g) = p.value_and_gradient(&trace.post[spec.latent_layer + 1])?;
            (v, Some(g))
        }
        _ => (0.0, None),
    };

    let mut grads = Weights::zeros(spec);
    for l in (0..spec.layers.len()).rev() {
        if l == spec.latent_layer {
            if let Some(g) = &penalty_grad {
                for (u, gi) in upstream.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *u += penalty_weight * gi;
                }
            }
        }
        let act = spec.layers[l].activation;
        if act != Activation::Identity {
            for (u, z) in upstream
                .as_mut_slice()
                .iter_mut()
                .zip(trace.pre[l].as_slice())
            {
                *u *= act.derivative(*z);
            }
        }
        let gl = &mut grads.layers[l];
        gemm(
            1.0,
            upstream.view().t(),
            trace.post[l].view(),
            0.0,
            &mut gl.weight,
        );
        for row in upstream.row_iter() {
            for (b, u) in gl.bias.iter_mut().zip(row) {
                *b += u;
            }
        }
        if l > 0 {
            let mut down = Matrix::zeros(batch.rows(), spec.layers[l].in_dim);
            gemm(
                1.0,
                upstream.view(),
                w.layers[l].weight.view(),
                0.0,
                &mut down,
            );
            upstream = down;
        }
    }
    Ok(GradientReport {
        grads,
        mse,
        penalty: penalty_value,
    })
}

/// Momentum buffers for [`sgd_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity(pub Weights);

impl Velocity {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Velocity(Weights::zeros(spec))
    }
}

/// `v ← momentum·v − lr·g; w ← w + v`.
pub fn sgd_step(
    w: &mut Weights,
    g: &Gradients,
    lr: f64,
    momentum: f64,
    state: &mut Velocity,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Parameter(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Parameter(format!(
            "momentum must lie in [0, 1), got {momentum}"
        )));
    }
    if w.layers.len() != g.layers.len() || w.layers.len() != state.0.layers.len() {
        return Err(Error::Shape(
            "weights, gradients and velocity disagree".into(),
        ));
    }
    let grads = g
        .layers
        .iter()
        .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias));
    for ((wi, vi), gi) in w.flat_mut().zip(state.0.flat_mut()).zip(grads) {
        *vi = momentum * *vi - lr * gi;
        *wi += *vi;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(n: usize) -> (NetworkSpec, Weights) {
        let spec = NetworkSpec::custom(
            vec![LayerSpec {
                in_dim: n,
                out_dim: n,
                activation: Activation::Identity,
            }],
            0,
            false,
        )
        .unwrap();
        let mut w = Weights::zeros(&spec);
        w.layers[0].weight = Matrix::identity(n);
        (spec, w)
    }

    #[test]
    fn default_ladder_shape() {
        let spec = NetworkSpec::autoencoder(24, 3).unwrap();
        let widths: Vec<usize> = std::iter::once(spec.layers[0].in_dim)
            .chain(spec.layers.iter().map(|l| l.out_dim))
            .collect();
        assert_eq!(
            widths,
            vec![24, 128, 128, 29, 17, 7, 5, 3, 5, 7, 17, 29, 128, 128, 24]
        );
        assert_eq!(spec.latent_layer, 6);
        let relu: Vec<usize> = spec
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.activation == Activation::Relu)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(relu, vec![0, 1, 11, 12]);
        // Buffer layers on both sides of the latent code.
        assert_eq!(spec.layers[5].out_dim, 5);
        assert_eq!(spec.layers[7].out_dim, 5);
    }

    #[test]
    fn relu_on_narrow_layer_needs_override() {
        let layers = vec![
            LayerSpec {
                in_dim: 4,
                out_dim: 3,
                activation: Activation::Relu,
            },
            LayerSpec {
                in_dim: 3,
                out_dim: 4,
                activation: Activation::Identity,
            },
        ];
        assert!(NetworkSpec::custom(layers.clone(), 0, false).is_err());
        assert!(NetworkSpec::custom(layers, 0, true).is_ok());
    }

    #[test]
    fn broken_chain_is_rejected() {
        let layers = vec![
            LayerSpec {
                in_dim: 4,
                out_dim: 3,
                activation: Activation::Identity,
            },
            LayerSpec {
                in_dim: 2,
                out_dim: 4,
                activation: Activation::Identity,
            },
        ];
        assert!(NetworkSpec::custom(layers, 0, false).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = NetworkSpec::autoencoder(24, 3).unwrap();
        let a = init_weights(&spec, 11);
        assert_eq!(a, init_weights(&spec, 11));
        assert_ne!(a, init_weights(&spec, 12));
        for (p, l) in a.layers.iter().zip(&spec.layers) {
            let bound = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            assert!(p.weight.as_slice().iter().all(|v| v.abs() <= bound));
            assert!(p.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_mean_is_within_three_standard_errors() {
        // One layer with 10^5 weights: uniform on [−a, a] has variance a²/3.
        let spec = NetworkSpec::custom(
            vec![
                LayerSpec {
                    in_dim: 250,
                    out_dim: 400,
                    activation: Activation::Identity,
                },
                LayerSpec {
                    in_dim: 400,
                    out_dim: 250,
                    activation: Activation::Identity,
                },
            ],
            0,
            false,
        )
        .unwrap();
        let w = init_weights(&spec, 3);
        let vals = w.layers[0].weight.as_slice();
        assert_eq!(vals.len(), 100_000);
        let a = (6.0 / 650.0_f64).sqrt();
        let se = (a * a / 3.0 / vals.len() as f64).sqrt();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = NetworkSpec::autoencoder(24, 3).unwrap();
        let w = Weights::zeros(&spec);
        let x: Vec<f64> = (0..24).map(|i| i as f64 - 3.0).collect();
        let t = forward(&spec, &w, &x).unwrap();
        assert_eq!(t.latent, vec![0.0; 3]);
        assert_eq!(t.reconstruction, vec![0.0; 24]);
        assert_eq!(t.pre.len(), spec.layers.len());
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let (spec, w) = identity_layer(4);
        let x = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(forward(&spec, &w, &x).unwrap().reconstruction, x.to_vec());
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let (spec, w) = identity_layer(4);
        assert!(matches!(
            forward(&spec, &w, &[1.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn full_spec_shape_contract() {
        let spec = NetworkSpec::autoencoder(24, 3).unwrap();
        let w = init_weights(&spec, 0);
        let t = forward(&spec, &w, &[0.5; 24]).unwrap();
        assert_eq!(t.latent.len(), 3);
        assert_eq!(t.reconstruction.len(), 24);
    }

    #[test]
    fn loss_closed_forms() {
        let (spec, w) = identity_layer(3);
        let batch = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 4.0]]).unwrap();
        assert_eq!(reconstruction_loss(&batch, &spec, &w).unwrap(), 0.0);
        let zero = Weights::zeros(&spec);
        let s: f64 = batch.as_slice().iter().map(|v| v * v).sum();
        assert_eq!(reconstruction_loss(&batch, &spec, &zero).unwrap(), s / 6.0);
        assert!(matches!(
            reconstruction_loss(&Matrix::zeros(0, 3), &spec, &w),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn perfect_reconstruction_has_zero_gradient() {
        let (spec, w) = identity_layer(3);
        let batch = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 4.0]]).unwrap();
        let r = gradients(&batch, &spec, &w, 0.0, None).unwrap();
        assert!(r.grads.flat().iter().all(|&g| g == 0.0));
        assert_eq!(r.mse, 0.0);
    }

    #[test]
    fn single_linear_layer_closed_form_gradient() {
        let (spec, mut w) = identity_layer(3);
        w.layers[0].weight[(0, 1)] = 0.5;
        w.layers[0].weight[(2, 2)] = -1.0;
        let x = [1.0, -2.0, 0.5];
        let batch = Matrix::from_vec(1, 3, x.to_vec()).unwrap();
        let xhat = forward(&spec, &w, &x).unwrap().reconstruction;
        let g = gradients(&batch, &spec, &w, 0.0, None).unwrap().grads;
        for i in 0..3 {
            for j in 0..3 {
                let expected = 2.0 / 3.0 * (xhat[i] - x[i]) * x[j];
                assert!((g.layers[0].weight[(i, j)] - expected).abs() < 1e-15);
            }
            assert!((g.layers[0].bias[i] - 2.0 / 3.0 * (xhat[i] - x[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn plain_sgd_and_stationary_step() {
        let (spec, w0) = identity_layer(2);
        let mut g = Weights::zeros(&spec);
        g.layers[0].weight[(0, 0)] = 2.0;
        g.layers[0].bias[1] = -4.0;
        let mut w = w0.clone();
        let mut v = Velocity::zeros(&spec);
        sgd_step(&mut w, &g, 0.5, 0.0, &mut v).unwrap();
        assert_eq!(w.layers[0].weight[(0, 0)], 0.0);
        assert_eq!(w.layers[0].bias[1], 2.0);

        let mut w = w0.clone();
        let mut v = Velocity::zeros(&spec);
        sgd_step(&mut w, &Weights::zeros(&spec), 0.1, 0.9, &mut v).unwrap();
        assert_eq!(w, w0);
        assert!(matches!(
            sgd_step(&mut w, &g, 0.0, 0.9, &mut v),
            Err(Error::Parameter(_))
        ));
        assert!(sgd_step(&mut w, &g, 0.1, 1.0, &mut v).is_err());
    }

    #[test]
    fn momentum_sgd_minimizes_quadratic() {
        // f(x) = 2 (x − 3)², gradient 4 (x − 3), minimum at 3.
        let (spec, _) = identity_layer(1);
        let mut w = Weights::zeros(&spec);
        let mut v = Velocity::zeros(&spec);
        for _ in 0..100 {
            let x = w.layers[0].bias[0];
            let mut g = Weights::zeros(&spec);
            g.layers[0].bias[0] = 4.0 * (x - 3.0);
            sgd_step(&mut w, &g, 0.1, 0.5, &mut v).unwrap();
        }
        assert!((w.layers[0].bias[0] - 3.0).abs() < 1e-6);
    }
}
