use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Tanh,
    Identity,
}

/// Dense layer `y = x W + b` with `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Feed-forward network with ReLU hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub output: OutputActivation,
}

/// Per-layer parameter gradients, shaped like [`Mlp::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

/// Layer inputs and the network output of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    pub inputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.inputs.last().unwrap()
    }
}

impl Mlp {
    /// Uniform fan-in initialization `U(-1/sqrt(in), 1/sqrt(in))` with zero
    /// biases; the last layer's weights are multiplied by `final_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s > 0));
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let scale = if l + 1 == n { final_scale } else { 1.0 };
                let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound) * scale);
                Layer {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = inputs[l].dot(&layer.w);
            z += &layer.b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            inputs.push(z);
        }
        Ok(ForwardCache { inputs })
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.forward_cached(x)?.inputs.pop().unwrap())
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass for `upstream = dL/dy`; returns parameter gradients and
    /// `dL/dx`. Gradients are summed over the batch.
    pub fn backward_cached(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>), NnError> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(NnError::Dimension {
                expected: out.ncols(),
                actual: upstream.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut delta = upstream.to_owned();
        if self.output == OutputActivation::Tanh {
            Zip::from(&mut delta).and(out).for_each(|d, y| *d *= 1.0 - y * y);
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..=last).rev() {
            let input = &cache.inputs[l];
            let layer = &self.layers[l];
            grads.push(Layer {
                w: input.t().dot(&delta),
                b: delta.sum_axis(Axis(0)),
            });
            let mut dx = delta.dot(&layer.w.t());
            if l > 0 {
                // ReLU derivative, from the activated input of this layer.
                Zip::from(&mut dx).and(input).for_each(|d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>), NnError> {
        let cache = self.forward_cached(x)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.output == other.output
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

/// `target = tau * online + (1 - tau) * target`, evaluated as
/// `target + tau * (online - target)` so equal networks stay equal.
pub fn polyak_blend(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), NnError> {
    if !target.same_architecture(online) {
        return Err(NnError::Architecture);
    }
    if tau == 1.0 {
        target.layers.clone_from(&online.layers);
        return Ok(());
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.w).and(&o.w).for_each(|a, b| *a += tau * (b - *a));
        Zip::from(&mut t.b).and(&o.b).for_each(|a, b| *a += tau * (b - *a));
    }
    Ok(())
}
