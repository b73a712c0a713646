use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{sigmoid, softplus, Activation, ConvStack, Dense, StackTrace};
use super::tensor::Tensor;
use super::SynthError;

/// Convolution layout `(kernel, out_channels, stride)` ahead of the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorSpec {
    pub convs: Vec<(usize, usize, usize)>,
    pub leak: f64,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self { convs: alloc::vec![(3, 32, 2), (3, 64, 2), (3, 64, 2)], leak: 0.2 }
    }
}

impl DiscriminatorSpec {
    pub fn desk() -> Self {
        Self { convs: alloc::vec![(3, 8, 2), (3, 8, 2), (3, 8, 2)], leak: 0.2 }
    }
}

/// Patch critic with a positive score.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub convs: ConvStack,
    pub dense: Dense,
    /// Patch size `(width, height)` the dense head was built for.
    pub input: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct DiscriminatorTrace {
    convs: StackTrace,
    features: Vec<f64>,
    logit: f64,
}

impl DiscriminatorModel {
    pub fn new(spec: &DiscriminatorSpec, input: (usize, usize), seed: u64) -> Result<Self, SynthError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if spec.convs.is_empty() {
            return Err(SynthError::ModelShapeError);
        }
        let convs = ConvStack::new(3, &spec.convs, Activation::LeakyRelu(spec.leak), true, &mut rng);
        let (h, w) = convs.output_size(input.1, input.0).ok_or(SynthError::ModelShapeError)?;
        let dense = Dense::new(h * w * convs.out_channels(), 1, &mut rng);
        Ok(Self { convs, dense, input })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.convs.params();
        out.extend([&self.dense.weight, &self.dense.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.convs.params_mut();
        out.extend([&mut self.dense.weight, &mut self.dense.bias]);
        out
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().into_iter().map(Tensor::zeros_like).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Scores a `[3, h, w]` patch.
    pub fn forward(&self, x: &Tensor) -> (f64, DiscriminatorTrace) {
        let convs = self.convs.forward(x.clone());
        let features = self.convs.output(&convs).data;
        let logit = self.dense.forward(&features)[0];
        (score(logit), DiscriminatorTrace { convs, features, logit })
    }

    pub fn score(&self, x: &Tensor) -> f64 {
        self.forward(x).0
    }

    /// Accumulates `d_score · ∂score/∂θ` into `grads` and returns the input gradient.
    pub fn backward(&self, trace: &DiscriminatorTrace, d_score: f64, grads: &mut [Tensor]) -> Tensor {
        let n = grads.len();
        let d_logit = d_score * sigmoid(trace.logit);
        let (head, tail) = grads.split_at_mut(n - 2);
        let (gw, gb) = tail.split_at_mut(1);
        let g_feat = self.dense.backward(&trace.features, &[d_logit], &mut gw[0], &mut gb[0]);
        let shape = trace.convs.output().shape.clone();
        let g = Tensor::from_vec(&shape, g_feat).expect("shape");
        self.convs.backward(&trace.convs, g, head)
    }
}

/// Softplus kept strictly positive where it would underflow.
#[inline]
pub fn score(logit: f64) -> f64 {
    softplus(logit).max(f64::MIN_POSITIVE)
}
