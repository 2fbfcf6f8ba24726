//! Fully connected autoencoder `x ↦ g(f(x))` with hand-written backprop.
//!
//! Hidden layers use ReLU; the bottleneck and the output layer are linear.
//! Per-sample losses are `‖g(f(x)) − x‖²` for reconstruction and
//! `‖f(x) − c‖²` for the distance of the code to a fixed centroid `c`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{axpy, dot, squared_distance, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.row_iter().zip(&self.bias).map(|(w, b)| {
            let z = dot(w, x) + b;
            match self.activation {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            }
        }));
    }
}

/// Encoder parameters are the layers up to and including the bottleneck,
/// decoder parameters are the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    layers: Vec<Layer>,
    bottleneck: usize,
}

/// Gradient with the same shapes as the autoencoder's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-sample loss values of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    pub reconstruction: f64,
    /// `‖f(x) − c‖²`, unweighted. Zero when no centroid was given.
    pub clustering: f64,
}

/// Activations of every layer for one input; `acts[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace is filled by forward")
    }
}

impl Autoencoder {
    /// Builds `input → hidden… → input` with Glorot-uniform weights and zero
    /// biases. `hidden` must be a palindrome whose narrowest layer is the
    /// bottleneck, narrower than `input`.
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(input);
        let bottleneck = check_sizes(&sizes)?;
        let mut r = rng::stream(seed, &[rng::label("glorot")]);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| r.random_range(-limit..=limit)).collect();
                Layer {
                    weights: DenseMatrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                    activation: default_activation(i, bottleneck, sizes.len() - 2),
                }
            })
            .collect();
        Ok(Autoencoder { layers, bottleneck })
    }

    /// Wraps explicit layers. Shapes must chain and mirror around the
    /// narrowest layer.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an autoencoder needs at least two layers".into()));
        }
        let mut sizes = vec![layers[0].input_dim()];
        for (i, l) in layers.iter().enumerate() {
            if l.input_dim() != *sizes.last().expect("non-empty") {
                return Err(Error::Shape(format!("layer {i} expects {} inputs", l.input_dim())));
            }
            if l.bias.len() != l.output_dim() {
                return Err(Error::Shape(format!("layer {i} bias has {} entries", l.bias.len())));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite);
            }
            sizes.push(l.output_dim());
        }
        let bottleneck = check_sizes(&sizes)?;
        Ok(Autoencoder { layers, bottleneck })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Full width stack, input first and output last.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::output_dim)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.bottleneck].output_dim()
    }

    /// Index of the layer whose output is the latent code.
    pub fn bottleneck_layer(&self) -> usize {
        self.bottleneck
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.rows() * l.weights.cols() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut rest = values;
        for l in &mut self.layers {
            let n = l.weights.rows() * l.weights.cols();
            l.weights.as_mut_slice().copy_from_slice(&rest[..n]);
            rest = &rest[n..];
            let b = l.bias.len();
            l.bias.copy_from_slice(&rest[..b]);
            rest = &rest[b..];
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Runs every layer, keeping activations in `trace`.
    pub fn forward_trace(&self, x: &[f64], trace: &mut Trace) -> Result<()> {
        self.check_input(x)?;
        trace.acts.resize_with(self.layers.len() + 1, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            let (prev, next) = trace.acts.split_at_mut(i + 1);
            l.forward_into(&prev[i], &mut next[0]);
        }
        Ok(())
    }

    /// `(f(x), g(f(x)))`
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut t = Trace::default();
        self.forward_trace(x, &mut t)?;
        let latent = t.acts[self.bottleneck + 1].clone();
        let recon = t.acts.pop().expect("filled");
        Ok((latent, recon))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers[..=self.bottleneck] {
            l.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch { expected: self.latent_dim(), actual: z.len() });
        }
        let mut cur = z.to_vec();
        let mut next = Vec::new();
        for l in &self.layers[self.bottleneck + 1..] {
            l.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Encodes every row of `batch`.
    pub fn encode_rows(&self, batch: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(batch.rows(), self.latent_dim());
        for (i, row) in batch.row_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&self.encode(row)?);
        }
        Ok(out)
    }

    fn losses(&self, trace: &Trace, centroid: Option<&[f64]>) -> SampleLoss {
        SampleLoss {
            reconstruction: squared_distance(trace.output(), &trace.acts[0]),
            clustering: centroid.map_or(0.0, |c| squared_distance(&trace.acts[self.bottleneck + 1], c)),
        }
    }

    /// Fills `trace.deltas[i]` with the loss gradient with respect to the
    /// pre-activation output of layer `i`. Weights are only read.
    fn backward(&self, trace: &mut Trace, centroid: Option<(&[f64], f64)>) {
        let acts = &trace.acts;
        let deltas = &mut trace.deltas;
        deltas.resize_with(self.layers.len(), Vec::new);
        let last = self.layers.len() - 1;
        let out = &acts[last + 1];
        deltas[last].clear();
        deltas[last].extend(out.iter().zip(&acts[0]).map(|(o, x)| 2.0 * (o - x)));
        if self.layers[last].activation == Activation::Relu {
            for (d, a) in deltas[last].iter_mut().zip(out) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
        }

        for i in (1..self.layers.len()).rev() {
            let (lower, upper) = deltas.split_at_mut(i);
            let (delta, prev) = (&upper[0], &mut lower[i - 1]);
            let l = &self.layers[i];
            prev.clear();
            prev.resize(l.input_dim(), 0.0);
            for (w_row, &d) in l.weights.row_iter().zip(delta.iter()) {
                if d != 0.0 {
                    axpy(d, w_row, prev);
                }
            }
            let below = i - 1;
            if below == self.bottleneck {
                if let Some((c, lambda)) = centroid {
                    if lambda != 0.0 {
                        for ((p, z), ci) in prev.iter_mut().zip(&acts[i]).zip(c) {
                            *p += 2.0 * lambda * (z - ci);
                        }
                    }
                }
            }
            if self.layers[below].activation == Activation::Relu {
                for (p, a) in prev.iter_mut().zip(&acts[i]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
    }

    /// `W_i ← W_i − lr · δ_i ⊗ a_i` for every layer of a back-propagated trace.
    fn apply_trace(&mut self, trace: &Trace, lr: f64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            let input = &trace.acts[i];
            for (r, &d) in trace.deltas[i].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = l.weights.row_mut(r);
                for (w, a) in row.iter_mut().zip(input) {
                    *w -= lr * (d * a);
                }
                l.bias[r] -= lr * d;
            }
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| DenseMatrix::zeros(l.weights.rows(), l.weights.cols())).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Gradient of `‖g(f(x)) − x‖² + λ‖f(x) − c‖²` for one sample, with `c`
    /// held fixed.
    pub fn gradients(&self, x: &[f64], centroid: Option<(&[f64], f64)>) -> Result<(Gradients, SampleLoss)> {
        self.check_centroid(centroid)?;
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace)?;
        let loss = self.losses(&trace, centroid.map(|c| c.0));
        self.backward(&mut trace, centroid);
        let mut g = self.zero_gradients();
        for (i, delta) in trace.deltas.iter().enumerate() {
            for (r, &d) in delta.iter().enumerate() {
                for (w, a) in g.weights[i].row_mut(r).iter_mut().zip(&trace.acts[i]) {
                    *w = d * a;
                }
            }
            g.biases[i].copy_from_slice(delta);
        }
        Ok((g, loss))
    }

    /// One SGD step on a single sample. Returns the losses measured before
    /// the step.
    pub fn train_step(
        &mut self,
        x: &[f64],
        centroid: Option<(&[f64], f64)>,
        lr: f64,
        trace: &mut Trace,
    ) -> Result<SampleLoss> {
        self.check_centroid(centroid)?;
        self.forward_trace(x, trace)?;
        let loss = self.losses(trace, centroid.map(|c| c.0));
        if !(loss.reconstruction.is_finite() && loss.clustering.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.backward(trace, centroid);
        self.apply_trace(trace, lr);
        Ok(loss)
    }

    /// The latent code of the last `forward_trace`.
    pub fn traced_latent<'t>(&self, trace: &'t Trace) -> &'t [f64] {
        &trace.acts[self.bottleneck + 1]
    }

    /// `params ← params − lr · gradient`
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.weights.len() != self.layers.len() || grads.biases.len() != self.layers.len() {
            return Err(Error::Shape("gradient has a different layer count".into()));
        }
        for (i, (l, (gw, gb))) in self.layers.iter().zip(grads.weights.iter().zip(&grads.biases)).enumerate() {
            if gw.shape() != l.weights.shape() || gb.len() != l.bias.len() {
                return Err(Error::Shape(format!("gradient of layer {i} has the wrong shape")));
            }
        }
        for (l, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (w, g) in l.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= lr * g;
            }
            for (b, g) in l.bias.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
        Ok(())
    }

    fn check_centroid(&self, centroid: Option<(&[f64], f64)>) -> Result<()> {
        if let Some((c, lambda)) = centroid {
            if c.len() != self.latent_dim() {
                return Err(Error::DimensionMismatch { expected: self.latent_dim(), actual: c.len() });
            }
            if !(lambda >= 0.0) {
                return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
            }
        }
        Ok(())
    }
}

impl Gradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Mean over rows of `‖g(f(x)) − x‖²`.
pub fn reconstruction_loss(ae: &Autoencoder, batch: &DenseMatrix) -> Result<f64> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for row in batch.row_iter() {
        let (_, recon) = ae.forward(row)?;
        total += squared_distance(&recon, row);
    }
    Ok(total / batch.rows() as f64)
}

fn default_activation(layer: usize, bottleneck: usize, last: usize) -> Activation {
    if layer == bottleneck || layer == last {
        Activation::Linear
    } else {
        Activation::Relu
    }
}

/// Validates a width stack and returns the index of the bottleneck layer.
fn check_sizes(sizes: &[usize]) -> Result<usize> {
    if sizes.len() < 3 {
        return Err(Error::Config("an autoencoder needs at least one hidden width".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    let rev: Vec<usize> = sizes.iter().rev().copied().collect();
    if rev != sizes {
        return Err(Error::Config(format!("layer widths {sizes:?} do not mirror around the bottleneck")));
    }
    let inner = &sizes[1..sizes.len() - 1];
    let (pos, &width) = inner.iter().enumerate().min_by_key(|(i, w)| (**w, *i)).expect("non-empty");
    if width >= sizes[0] {
        return Err(Error::Config(format!("bottleneck width {width} must be below the input width {}", sizes[0])));
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(w: &[&[f64]], b: &[f64]) -> Layer {
        Layer { weights: DenseMatrix::from_rows(w).unwrap(), bias: b.to_vec(), activation: Activation::Linear }
    }

    #[test]
    fn paper_stack_builds() {
        let ae = Autoencoder::new(300, &[200, 200, 800, 10, 800, 200, 200], 1).unwrap();
        assert_eq!(ae.sizes(), vec![300, 200, 200, 800, 10, 800, 200, 200, 300]);
        assert_eq!(ae.latent_dim(), 10);
        assert_eq!(ae.bottleneck_layer(), 3);
        let acts: Vec<Activation> = ae.layers().iter().map(|l| l.activation).collect();
        use Activation::*;
        assert_eq!(acts, vec![Relu, Relu, Relu, Linear, Relu, Relu, Relu, Linear]);
    }

    #[test]
    fn rejects_bad_stacks() {
        assert!(Autoencoder::new(10, &[], 0).is_err());
        assert!(Autoencoder::new(10, &[4, 3], 0).is_err());
        assert!(Autoencoder::new(3, &[5], 0).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let ae = Autoencoder::new(30, &[10], 4).unwrap();
        let limit = (6.0f64 / 40.0).sqrt();
        for l in ae.layers() {
            assert!(l.weights.as_slice().iter().all(|w| w.abs() <= limit));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_map_reconstructs_zero() {
        let mut ae = Autoencoder::new(4, &[3, 2, 3], 0).unwrap();
        let n = ae.parameter_count();
        ae.set_flat(&vec![0.0; n]).unwrap();
        let (z, r) = ae.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(z, vec![0.0; 2]);
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn identity_slice_composition() {
        let enc = linear(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &[0.0, 0.0]);
        let dec = linear(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]], &[0.0, 0.0, 0.0]);
        let ae = Autoencoder::from_layers(vec![enc, dec]).unwrap();
        let x = [0.25, -4.0, 0.0];
        let (z, r) = ae.forward(&x).unwrap();
        assert_eq!(z, vec![0.25, -4.0]);
        assert_eq!(r, x.to_vec());
        assert_eq!(ae.decode(&z).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_is_deterministic_and_checks_dims() {
        let a = Autoencoder::new(6, &[4, 2, 4], 77).unwrap();
        let b = Autoencoder::new(6, &[4, 2, 4], 77).unwrap();
        assert_eq!(a, b);
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        assert!(matches!(a.forward(&x[..5]), Err(Error::DimensionMismatch { expected: 6, actual: 5 })));
        assert_eq!(a.encode(&x).unwrap(), a.forward(&x).unwrap().0);
    }

    #[test]
    fn reconstruction_loss_examples() {
        let enc = linear(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &[0.0, 0.0]);
        let dec = linear(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]], &[0.0, 0.0, 0.0]);
        let ae = Autoencoder::from_layers(vec![enc, dec]).unwrap();
        let inside = DenseMatrix::from_rows(&[[1.0, 2.0, 0.0], [3.0, -1.0, 0.0]]).unwrap();
        assert_eq!(reconstruction_loss(&ae, &inside).unwrap(), 0.0);
        // the third coordinate is dropped: errors 2² and 1², mean 2.5
        let outside = DenseMatrix::from_rows(&[[1.0, 2.0, 2.0], [3.0, -1.0, 1.0]]).unwrap();
        assert_eq!(reconstruction_loss(&ae, &outside).unwrap(), 2.5);

        let mut zero = ae.clone();
        zero.set_flat(&vec![0.0; zero.parameter_count()]).unwrap();
        let units = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]]).unwrap();
        assert!((reconstruction_loss(&zero, &units).unwrap() - 1.0).abs() < 1e-15);
        assert!(reconstruction_loss(&zero, &DenseMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn sgd_step_examples() {
        let enc = linear(&[&[1.0]], &[0.0]);
        let mut ae = Autoencoder::from_layers(vec![
            linear(&[&[1.0, 0.0]], &[0.0]),
            linear(&[&[0.5], &[0.0]], &[0.0, 0.0]),
        ])
        .unwrap();
        let before = ae.clone();
        ae.sgd_step(&ae.zero_gradients(), 0.003).unwrap();
        assert_eq!(ae, before);
        let mut g = ae.zero_gradients();
        g.weights[0].set(0, 0, 2.0);
        ae.sgd_step(&g, 0.0).unwrap();
        assert_eq!(ae, before);
        ae.sgd_step(&g, 0.003).unwrap();
        assert!((ae.layers()[0].weights.get(0, 0) - 0.994).abs() < 1e-15);

        let bad = Gradients { weights: vec![enc.weights.clone()], biases: vec![vec![0.0]] };
        assert!(ae.sgd_step(&bad, 0.1).is_err());
    }

    #[test]
    fn fused_step_equals_gradient_then_sgd() {
        let ae = Autoencoder::new(5, &[4, 2, 4], 9).unwrap();
        let x = [0.3, -0.1, 0.8, 0.05, -0.4];
        let c = [0.2, -0.7];
        let (g, _) = ae.gradients(&x, Some((&c, 0.5))).unwrap();
        let mut a = ae.clone();
        a.sgd_step(&g, 0.01).unwrap();
        let mut b = ae.clone();
        b.train_step(&x, Some((&c, 0.5)), 0.01, &mut Trace::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lambda_matches_plain_reconstruction() {
        let ae = Autoencoder::new(5, &[3, 2, 3], 2).unwrap();
        let x = [0.3, -0.1, 0.8, 0.05, -0.4];
        let (g0, _) = ae.gradients(&x, None).unwrap();
        let (g1, l) = ae.gradients(&x, Some((&[9.0, 9.0], 0.0))).unwrap();
        assert_eq!(g0, g1);
        assert!(l.clustering > 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let mut ae = Autoencoder::new(4, &[3, 2, 3], 1).unwrap();
        let flat = ae.to_flat();
        assert_eq!(flat.len(), ae.parameter_count());
        let doubled: Vec<f64> = flat.iter().map(|x| 2.0 * x).collect();
        ae.set_flat(&doubled).unwrap();
        assert_eq!(ae.to_flat(), doubled);
        assert!(ae.set_flat(&doubled[1..]).is_err());
    }
}
