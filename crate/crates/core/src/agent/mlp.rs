use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Dense layer; `weights` is row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, &b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let z = dot(row, x) + b;
            out.push(match self.activation {
                Activation::Identity => z,
                Activation::Relu => z.max(0.0),
            });
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise without reassociating.
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

/// Forward-pass mode. Training draws a fresh input-dropout mask.
pub enum Mode<'a> {
    Inference,
    Training(&'a mut dyn RngCore),
}

/// Multilayer perceptron with ReLU hidden layers and a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub input_dropout: f64,
}

/// Activations recorded by a forward pass, for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `activations[0]` is the (masked) input, the last entry is the output.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Per-parameter gradients, laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|g| g.is_finite())
    }
}

impl Mlp {
    /// `sizes` = input width, hidden widths…, output width. Hidden layers use
    /// ReLU; the output layer is linear.
    pub fn zeros(sizes: &[usize], input_dropout: f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Contract(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { Activation::Relu };
                Layer::zeros(w[0], w[1], act)
            })
            .collect();
        Ok(Mlp { layers, input_dropout })
    }

    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], input_dropout: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, input_dropout)?;
        for layer in &mut net.layers {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Contract(format!(
                "{} parameters for a network of {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Inverted-dropout mask for the input layer.
    pub fn dropout_mask(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let p = self.input_dropout;
        let keep = 1.0 / (1.0 - p);
        (0..self.input_width())
            .map(|_| if p > 0.0 && rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect()
    }

    pub fn forward(&self, input: &[f64], mode: Mode<'_>) -> Result<Vec<f64>> {
        let mask = match mode {
            Mode::Inference => None,
            Mode::Training(rng) => Some(self.dropout_mask(rng)),
        };
        Ok(self.forward_trace(input, mask.as_deref())?.activations.pop().unwrap_or_default())
    }

    /// Forward pass with an explicit input mask (`None` = no dropout).
    pub fn forward_trace(&self, input: &[f64], mask: Option<&[f64]>) -> Result<ForwardTrace> {
        if input.len() != self.input_width() {
            return Err(Error::Contract(format!(
                "input width {} != network input {}",
                input.len(),
                self.input_width()
            )));
        }
        let x: Vec<f64> = match mask {
            Some(m) => input.iter().zip(m).map(|(x, m)| x * m).collect(),
            None => input.to_vec(),
        };
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&activations[i], &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericFault {
                    layer: i,
                    what: "non-finite activation".into(),
                });
            }
            activations.push(out);
        }
        Ok(ForwardTrace { activations })
    }

    /// Accumulates into `grads` the gradient of a scalar whose derivative
    /// with respect to the network output is `output_grad`.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64], grads: &mut Gradients) {
        let mut delta = output_grad.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let out = &trace.activations[i + 1];
            if layer.activation == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(out) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &trace.activations[i];
            let gw = &mut grads.weights[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grads.biases[i][o] += d;
                for (g, &x) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (row, &d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (w, g) in l.weights.iter_mut().zip(&grads.weights[i]) {
                *w -= learning_rate * g;
            }
            for (b, g) in l.biases.iter_mut().zip(&grads.biases[i]) {
                *b -= learning_rate * g;
            }
        }
    }
}
