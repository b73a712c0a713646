//! Convolution stacks and dense layers with hand-written backward passes.

use alloc::vec::Vec;

use rand::Rng;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    #[inline]
    fn slope(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => (pre > 0.0) as u8 as f64,
            Activation::LeakyRelu(a) => {
                if pre > 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }
}

/// Valid (unpadded) 2-D convolution over a `[C, H, W]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `[out, in, k, k]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub stride: usize,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let bound = libm::sqrt(6.0 / fan_in);
        let mut weight = Tensor::zeros(&[out_ch, in_ch, kernel, kernel]);
        for w in &mut weight.data {
            *w = (rng.random::<f64>() * 2.0 - 1.0) * bound;
        }
        weight.round_to_f32();
        Self { weight, bias: Tensor::zeros(&[out_ch]), stride }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape[2]
    }

    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let k = self.kernel();
        (h >= k && w >= k).then(|| ((h - k) / self.stride + 1, (w - k) / self.stride + 1))
    }

    pub fn forward(&self, input: &Tensor) -> Tensor {
        let (c_in, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
        debug_assert_eq!(c_in, self.in_channels());
        let k = self.kernel();
        let s = self.stride;
        let (oh, ow) = self.output_size(h, w).expect("input smaller than kernel");
        let c_out = self.out_channels();
        let mut out = Tensor::zeros(&[c_out, oh, ow]);
        for o in 0..c_out {
            let dst = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
            dst.fill(self.bias.data[o]);
            for c in 0..c_in {
                let src = &input.data[c * h * w..(c + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = self.weight.data[((o * c_in + c) * k + ky) * k + kx];
                        if s == 1 {
                            for y in 0..oh {
                                let row = &src[(y + ky) * w + kx..][..ow];
                                let out_row = &mut dst[y * ow..][..ow];
                                for (d, v) in out_row.iter_mut().zip(row) {
                                    *d += wv * v;
                                }
                            }
                        } else {
                            for y in 0..oh {
                                for x in 0..ow {
                                    dst[y * ow + x] += wv * src[(y * s + ky) * w + x * s + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `gw`/`gb` and returns the input gradient.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor, gw: &mut Tensor, gb: &mut Tensor) -> Tensor {
        let (c_in, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
        let (c_out, oh, ow) = (grad_out.shape[0], grad_out.shape[1], grad_out.shape[2]);
        let k = self.kernel();
        let s = self.stride;
        let mut grad_in = Tensor::zeros(&input.shape);
        for o in 0..c_out {
            let go = &grad_out.data[o * oh * ow..(o + 1) * oh * ow];
            gb.data[o] += go.iter().sum::<f64>();
            for c in 0..c_in {
                let src = &input.data[c * h * w..(c + 1) * h * w];
                let gi = &mut grad_in.data[c * h * w..(c + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((o * c_in + c) * k + ky) * k + kx;
                        let wv = self.weight.data[widx];
                        let mut acc = 0.0;
                        if s == 1 {
                            for y in 0..oh {
                                let row = &src[(y + ky) * w + kx..][..ow];
                                let grow = &go[y * ow..][..ow];
                                let gi_row = &mut gi[(y + ky) * w + kx..][..ow];
                                for x in 0..ow {
                                    acc += grow[x] * row[x];
                                    gi_row[x] += wv * grow[x];
                                }
                            }
                        } else {
                            for y in 0..oh {
                                for x in 0..ow {
                                    let idx = (y * s + ky) * w + x * s + kx;
                                    acc += go[y * ow + x] * src[idx];
                                    gi[idx] += wv * go[y * ow + x];
                                }
                            }
                        }
                        gw.data[widx] += acc;
                    }
                }
            }
        }
        grad_in
    }
}

/// Cached activations of one [`ConvStack`] evaluation.
#[derive(Debug, Clone)]
pub struct StackTrace {
    /// Input of each layer (after the previous activation).
    pub inputs: Vec<Tensor>,
    /// Pre-activation output of each layer.
    pub pre: Vec<Tensor>,
}

impl StackTrace {
    pub fn output(&self) -> &Tensor {
        self.pre.last().expect("non-empty stack")
    }
}

/// Convolutions with an activation between layers and optionally after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    pub layers: Vec<Conv2d>,
    pub activation: Activation,
    pub activate_last: bool,
}

impl ConvStack {
    /// `spec` lists `(kernel, out_channels, stride)` per layer.
    pub fn new(in_ch: usize, spec: &[(usize, usize, usize)], activation: Activation, activate_last: bool, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(spec.len());
        let mut c = in_ch;
        for &(k, out, stride) in spec {
            layers.push(Conv2d::new(c, out, k, stride, rng));
            c = out;
        }
        Self { layers, activation, activate_last }
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels())
    }

    /// Border lost on each side for stride-1 stacks.
    pub fn margin(&self) -> usize {
        self.layers.iter().map(|l| l.kernel() - 1).sum::<usize>() / 2
    }

    pub fn output_size(&self, mut h: usize, mut w: usize) -> Option<(usize, usize)> {
        for l in &self.layers {
            (h, w) = l.output_size(h, w)?;
        }
        Some((h, w))
    }

    fn activated(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.activate_last
    }

    pub fn forward(&self, input: Tensor) -> StackTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(&x);
            inputs.push(x);
            x = y.clone();
            if self.activated(i) {
                for v in &mut x.data {
                    *v = self.activation.apply(*v);
                }
            }
            pre.push(y);
        }
        let _ = x;
        StackTrace { inputs, pre }
    }

    /// Final output after the optional last activation.
    pub fn output(&self, trace: &StackTrace) -> Tensor {
        let mut out = trace.output().clone();
        if self.activate_last {
            for v in &mut out.data {
                *v = self.activation.apply(*v);
            }
        }
        out
    }

    /// `grads` holds `(weight, bias)` gradient pairs per layer in order.
    pub fn backward(&self, trace: &StackTrace, grad_output: Tensor, grads: &mut [Tensor]) -> Tensor {
        let mut g = grad_output;
        for i in (0..self.layers.len()).rev() {
            if self.activated(i) {
                for (gv, &p) in g.data.iter_mut().zip(&trace.pre[i].data) {
                    *gv *= self.activation.slope(p);
                }
            }
            let (gw, gb) = grads[2 * i..2 * i + 2].split_at_mut(1);
            g = self.layers[i].backward(&trace.inputs[i], &g, &mut gw[0], &mut gb[0]);
        }
        g
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}

/// Fully connected layer to a single output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[out, in]`
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = libm::sqrt(6.0 / inputs as f64);
        let mut weight = Tensor::zeros(&[outputs, inputs]);
        for w in &mut weight.data {
            *w = (rng.random::<f64>() * 2.0 - 1.0) * bound;
        }
        weight.round_to_f32();
        Self { weight, bias: Tensor::zeros(&[outputs]) }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let n = self.weight.shape[1];
        (0..self.weight.shape[0])
            .map(|o| self.bias.data[o] + self.weight.data[o * n..(o + 1) * n].iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64], gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
        let n = self.weight.shape[1];
        let mut grad_in = alloc::vec![0.0; n];
        for (o, &g) in grad_out.iter().enumerate() {
            gb.data[o] += g;
            for i in 0..n {
                gw.data[o * n + i] += g * input[i];
                grad_in[i] += g * self.weight.data[o * n + i];
            }
        }
        grad_in
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x)))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
