//! Fully connected network with manual reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },
}

/// Affine map `y = act(W x + b)` with `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input of every layer, one row per sample.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Array2<f64>>,
}

impl Cache {
    /// Pre-activation of layer `i`, one row per sample.
    pub fn pre_activation(&self, i: usize) -> &Array2<f64> {
        &self.pre[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Mlp {
    /// Rectifier hidden layers and a linear output. Weights are uniform in
    /// `±1/sqrt(fan_in)` and the output layer is further scaled by
    /// `output_scale`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let last = i + 1 == n;
                let limit = (1.0 / fan_in as f64).sqrt() * if last { output_scale } else { 1.0 };
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                    activation: if last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs()));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Cache), NeuralError> {
        if x.ncols() != self.input_dim() {
            return Err(NeuralError::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let z = h.dot(&layer.weight.t()) + &layer.bias;
            let out = match layer.activation {
                Activation::Identity => z.clone(),
                Activation::Relu => z.mapv(|v| v.max(0.0)),
            };
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok((h, Cache { inputs, pre }))
    }

    /// Output only, no cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        if x.ncols() != self.input_dim() {
            return Err(NeuralError::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weight.t()) + &layer.bias;
            if layer.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            h = z;
        }
        Ok(h)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of `Σ grad_out ⊙ output` with respect to the parameters and
    /// the input.
    pub fn backward(&self, cache: &Cache, grad_out: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>), NeuralError> {
        if grad_out.ncols() != self.output_dim() {
            return Err(NeuralError::Shape {
                expected: self.output_dim(),
                got: grad_out.ncols(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                ndarray::Zip::from(&mut g).and(&cache.pre[i]).for_each(|gv, &z| {
                    if z <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            let gw = g.t().dot(&cache.inputs[i]);
            let gb = g.sum_axis(Axis(0));
            let gx = g.dot(&layer.weight);
            grads.push((gw, gb));
            g = gx;
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, g))
    }

    /// Appends all parameters, layer by layer, weights row-major then bias.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
    }

    /// Reads parameters in [`Mlp::write_params`] order; returns the count read.
    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = src[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = src[k];
                k += 1;
            }
        }
        k
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

impl MlpGrads {
    pub fn write(&self, out: &mut Vec<f64>) {
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
    }
}
