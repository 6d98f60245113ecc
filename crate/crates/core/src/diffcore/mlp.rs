use rand::Rng;

use super::tape::{Gradients, NodeId, Tape};
use super::{DiffError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

/// Fully connected network with relu hidden layers.
///
/// Parameters are kept flat as `[w0, b0, w1, b1, ...]` with `w_i` of shape
/// `in x out` and `b_i` of shape `1 x out`, so optimizers, Polyak averaging
/// and checkpoints can treat every network as a plain list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<Tensor>,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct MlpNodes {
    pub output: NodeId,
    pub params: Vec<NodeId>,
}

impl MlpNodes {
    /// Gradient of the backward root with respect to each parameter tensor,
    /// in the network's parameter order.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.params.iter().map(|&p| grads.wrt(p).clone()).collect()
    }
}

impl Mlp {
    /// Uniform fan-in initialisation: every weight and bias of a layer with
    /// `n` inputs is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Tensor::matrix(fan_in, fan_out, weight));
            params.push(Tensor::matrix(1, fan_out, bias));
        }
        Self {
            sizes: sizes.to_vec(),
            output,
            params,
        }
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        let params = sizes
            .windows(2)
            .flat_map(|w| [Tensor::zeros(&[w[0], w[1]]), Tensor::zeros(&[1, w[1]])])
            .collect();
        Self {
            sizes: sizes.to_vec(),
            output,
            params,
        }
    }

    pub fn from_params(sizes: &[usize], output: OutputActivation, params: Vec<Tensor>) -> Result<Self, DiffError> {
        let template = Self::zeros(sizes, output);
        if template.params.len() != params.len() {
            return Err(DiffError::ShapeMismatch {
                context: "mlp parameters",
                expected: format!("{} tensors", template.params.len()),
                actual: format!("{} tensors", params.len()),
            });
        }
        for (want, got) in template.params.iter().zip(&params) {
            if !want.same_shape(got) {
                return Err(DiffError::ShapeMismatch {
                    context: "mlp parameters",
                    expected: format!("{:?}", want.shape()),
                    actual: format!("{:?}", got.shape()),
                });
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<(), DiffError> {
        *self = Self::from_params(&self.sizes, self.output, params)?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check_input(&self, input: &Tensor) -> Result<(), DiffError> {
        if input.cols() != self.input_dim() {
            return Err(DiffError::ShapeMismatch {
                context: "mlp input",
                expected: format!("{} features", self.input_dim()),
                actual: format!("{} features (shape {:?})", input.cols(), input.shape()),
            });
        }
        Ok(())
    }

    /// Records the forward pass with parameters as variable leaves.
    pub fn forward(&self, tape: &mut Tape, input: NodeId) -> Result<MlpNodes, DiffError> {
        self.forward_impl(tape, input, true)
    }

    /// Records the forward pass with parameters as constants; gradients still
    /// flow to `input`.
    pub fn forward_frozen(&self, tape: &mut Tape, input: NodeId) -> Result<MlpNodes, DiffError> {
        self.forward_impl(tape, input, false)
    }

    fn forward_impl(&self, tape: &mut Tape, input: NodeId, track: bool) -> Result<MlpNodes, DiffError> {
        self.check_input(tape.value(input))?;
        let layers = self.sizes.len() - 1;
        let mut params = Vec::with_capacity(self.params.len());
        let mut h = input;
        for (l, pair) in self.params.chunks(2).enumerate() {
            let (w, b) = if track {
                (tape.variable(pair[0].clone()), tape.variable(pair[1].clone()))
            } else {
                (tape.constant(pair[0].clone()), tape.constant(pair[1].clone()))
            };
            params.push(w);
            params.push(b);
            let z = tape.matmul(h, w);
            let z = tape.add_row(z, b);
            h = if l + 1 < layers {
                tape.relu(z)
            } else {
                match self.output {
                    OutputActivation::Linear => z,
                    OutputActivation::Tanh => tape.tanh(z),
                }
            };
        }
        Ok(MlpNodes { output: h, params })
    }

    /// Smallest `|pre-activation|` of any hidden unit over the input rows:
    /// how far the inputs sit from a relu kink.
    pub fn kink_margin(&self, input: &Tensor) -> Result<f64, DiffError> {
        self.check_input(input)?;
        let hidden = self.sizes.len() - 2;
        let mut h = input.clone();
        let mut margin = f64::INFINITY;
        for pair in self.params.chunks(2).take(hidden) {
            let mut z = h.matmul(&pair[0]);
            let c = z.cols();
            for row in z.data_mut().chunks_mut(c) {
                for (x, b) in row.iter_mut().zip(pair[1].data()) {
                    *x += b;
                    margin = margin.min(x.abs());
                }
            }
            h = z.map(|x| x.max(0.0));
        }
        Ok(margin)
    }

    /// Tape-free forward pass.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor, DiffError> {
        self.check_input(input)?;
        let layers = self.sizes.len() - 1;
        let mut h = input.clone();
        for (l, pair) in self.params.chunks(2).enumerate() {
            let mut z = h.matmul(&pair[0]);
            let c = z.cols();
            for row in z.data_mut().chunks_mut(c) {
                for (x, b) in row.iter_mut().zip(pair[1].data()) {
                    *x += b;
                }
            }
            h = if l + 1 < layers {
                z.map(|x| x.max(0.0))
            } else {
                match self.output {
                    OutputActivation::Linear => z,
                    OutputActivation::Tanh => z.map(f64::tanh),
                }
            };
        }
        Ok(h)
    }
}
