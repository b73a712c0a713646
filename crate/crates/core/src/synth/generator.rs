//! Disparity network, backward warping and colour network.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lf::View;

use super::layers::{Activation, ConvStack, StackTrace};
use super::tensor::Tensor;
use super::warp::{delta, sample_grad, sweep_levels, sweep_window, Image, Position};
use super::{Regime, SynthError};

/// Layer layout of a generator; kernels must be odd.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_sweep: usize,
    pub d_max: f64,
    pub n_refs: usize,
    /// `(kernel, out_channels)`; the last layer has one output channel.
    pub disparity_layers: Vec<(usize, usize)>,
    /// `(kernel, out_channels)`; the last layer has three output channels.
    pub color_layers: Vec<(usize, usize)>,
    /// Initial softmax temperature of the plane-sweep prior.
    pub temperature: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_sweep: 9,
            d_max: 2.0,
            n_refs: 4,
            disparity_layers: alloc::vec![(7, 64), (5, 32), (3, 16), (1, 1)],
            color_layers: alloc::vec![(7, 32), (3, 16), (1, 3)],
            temperature: 0.002,
        }
    }
}

impl GeneratorSpec {
    /// Narrow layers suited to CPU training in minutes.
    pub fn desk() -> Self {
        Self {
            disparity_layers: alloc::vec![(5, 8), (3, 8), (1, 1)],
            color_layers: alloc::vec![(3, 8), (1, 3)],
            ..Self::default()
        }
    }
}

/// Trainable view synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub disparity_net: ConvStack,
    pub color_net: ConvStack,
    /// Log of the plane-sweep prior temperature, `[1]`.
    pub log_temperature: Tensor,
    /// Sweep disparities, `[N_sweep]`; not trained.
    pub sweep: Tensor,
    pub regime: Regime,
    pub train_qp: u8,
}

/// Cached intermediate values of one windowed forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorTrace {
    pub output: Tensor,
    origin: (isize, isize),
    disp: StackTrace,
    color: StackTrace,
    disparity: Vec<f64>,
    prior_slope: Vec<f64>,
    share: Vec<f64>,
}

/// Half-width of the window over which sweep costs are averaged.
const PRIOR_RADIUS: usize = 2;

/// Box mean of each std channel, cropped by `crop` on every side.
fn aggregate_std(features: &Tensor, levels: usize, (fw, fh): (usize, usize), radius: usize, crop: usize) -> Vec<f64> {
    let (ew, eh) = (fw - 2 * crop, fh - 2 * crop);
    let side = 2 * radius + 1;
    let norm = 1.0 / (side * side) as f64;
    let mut out = alloc::vec![0.0; levels * ew * eh];
    let mut rows = alloc::vec![0.0; fw * eh];
    for k in 0..levels {
        let std = features.channel(2 * k + 1);
        // Vertical sums first, then horizontal.
        rows.fill(0.0);
        for y in 0..eh {
            for dy in 0..side {
                let src = &std[(y + crop - radius + dy) * fw..][..fw];
                for (r, v) in rows[y * fw..][..fw].iter_mut().zip(src) {
                    *r += v;
                }
            }
        }
        for y in 0..eh {
            for x in 0..ew {
                let row = &rows[y * fw + x + crop - radius..][..side];
                out[(k * eh + y) * ew + x] = row.iter().sum::<f64>() * norm;
            }
        }
    }
    out
}

fn stack_spec(layers: &[(usize, usize)]) -> Vec<(usize, usize, usize)> {
    layers.iter().map(|&(k, c)| (k, c, 1)).collect()
}

impl GeneratorModel {
    pub fn new(spec: &GeneratorSpec, seed: u64) -> Result<Self, SynthError> {
        if spec.n_sweep == 0 || spec.n_refs == 0 || spec.disparity_layers.is_empty() || spec.color_layers.is_empty() {
            return Err(SynthError::ModelShapeError);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disparity_net = ConvStack::new(2 * spec.n_sweep, &stack_spec(&spec.disparity_layers), Activation::Relu, false, &mut rng);
        let color_net = ConvStack::new(3 * spec.n_refs + 2, &stack_spec(&spec.color_layers), Activation::Relu, false, &mut rng);
        let mut sweep = Tensor::from_vec(&[spec.n_sweep], sweep_levels(spec.n_sweep, spec.d_max)).expect("length");
        sweep.round_to_f32();
        let mut log_temperature = Tensor::from_vec(&[1], alloc::vec![libm::log(spec.temperature)]).expect("length");
        log_temperature.round_to_f32();
        let model = Self { disparity_net, color_net, log_temperature, sweep, regime: Regime::Original, train_qp: 0 };
        model.validate()?;
        Ok(model)
    }

    /// Rebuilds a model from its serialised tensor list.
    pub fn from_tensors(tensors: Vec<Tensor>, regime: Regime, train_qp: u8) -> Result<Self, SynthError> {
        let mut it = tensors.into_iter();
        let sweep = it.next().ok_or(SynthError::ModelShapeError)?;
        let log_temperature = it.next().ok_or(SynthError::ModelShapeError)?;
        let rest: Vec<Tensor> = it.collect();
        if sweep.shape.len() != 1 || log_temperature.shape != [1] || rest.len() % 2 != 0 {
            return Err(SynthError::ModelShapeError);
        }
        let mut layers = Vec::new();
        for pair in rest.chunks(2) {
            let (w, b) = (&pair[0], &pair[1]);
            if w.shape.len() != 4 || w.shape[2] != w.shape[3] || b.shape != [w.shape[0]] {
                return Err(SynthError::ModelShapeError);
            }
            layers.push(super::layers::Conv2d { weight: w.clone(), bias: b.clone(), stride: 1 });
        }
        // The disparity stack ends where the channel chain breaks.
        let split = (1..layers.len())
            .find(|&i| layers[i].in_channels() != layers[i - 1].out_channels())
            .ok_or(SynthError::ModelShapeError)?;
        let color = layers.split_off(split);
        let model = Self {
            disparity_net: ConvStack { layers, activation: Activation::Relu, activate_last: false },
            color_net: ConvStack { layers: color, activation: Activation::Relu, activate_last: false },
            log_temperature,
            sweep,
            regime,
            train_qp,
        };
        model.validate()?;
        Ok(model)
    }

    /// Serialisation order: sweep, temperature, disparity layers, colour layers.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = alloc::vec![&self.sweep, &self.log_temperature];
        out.extend(self.disparity_net.params());
        out.extend(self.color_net.params());
        out
    }

    fn validate(&self) -> Result<(), SynthError> {
        let chain = |s: &ConvStack| {
            !s.layers.is_empty()
                && s.layers.windows(2).all(|w| w[1].in_channels() == w[0].out_channels())
                && s.layers.iter().all(|l| l.kernel() % 2 == 1 && l.stride == 1)
        };
        let ok = chain(&self.disparity_net)
            && chain(&self.color_net)
            && self.disparity_net.in_channels() == 2 * self.sweep.len()
            && self.disparity_net.out_channels() == 1
            && self.color_net.out_channels() == 3
            && self.color_net.in_channels() >= 5
            && (self.color_net.in_channels() - 2) % 3 == 0;
        ok.then_some(()).ok_or(SynthError::ModelShapeError)
    }

    pub fn n_sweep(&self) -> usize {
        self.sweep.len()
    }

    pub fn n_refs(&self) -> usize {
        (self.color_net.in_channels() - 2) / 3
    }

    /// Pixels of context needed around an output window.
    pub fn margin(&self) -> usize {
        self.disparity_net.margin() + self.color_net.margin()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Trainable tensors: disparity layers, temperature, colour layers.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.disparity_net.params();
        out.push(&self.log_temperature);
        out.extend(self.color_net.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.disparity_net.params_mut();
        out.push(&mut self.log_temperature);
        out.extend(self.color_net.params_mut());
        out
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().into_iter().map(Tensor::zeros_like).collect()
    }

    pub fn round_to_f32(&mut self) {
        for p in self.params_mut() {
            p.round_to_f32();
        }
    }

    /// Synthesises the `size` window at `origin` of the target view, normalised.
    pub fn forward_window(&self, refs: &[(&Image, Position)], target: Position, origin: (isize, isize), size: (usize, usize)) -> GeneratorTrace {
        let mc = self.color_net.margin();
        let md = self.disparity_net.margin();
        let (ew, eh) = (size.0 + 2 * mc, size.1 + 2 * mc);
        let ext_origin = (origin.0 - mc as isize, origin.1 - mc as isize);
        let feat_origin = (ext_origin.0 - md as isize, ext_origin.1 - md as isize);
        let features = sweep_window(refs, target, &self.sweep.data, feat_origin, (ew + 2 * md, eh + 2 * md));

        // Soft-argmin over the sweep of box-filtered std channels.
        let n = ew * eh;
        let fw = ew + 2 * md;
        let fh = eh + 2 * md;
        let agg = aggregate_std(&features, self.sweep.len(), (fw, fh), md.min(PRIOR_RADIUS), md);
        let inv_tau = libm::exp(-self.log_temperature.data[0]);
        let mut prior = alloc::vec![0.0; n];
        let mut prior_slope = alloc::vec![0.0; n];
        let mut z = alloc::vec![0.0; self.sweep.len()];
        for y in 0..eh {
            for x in 0..ew {
                for (k, zk) in z.iter_mut().enumerate() {
                    *zk = -agg[(k * eh + y) * ew + x] * inv_tau;
                }
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                let mut dsum = 0.0;
                let mut zsum = 0.0;
                let mut dzsum = 0.0;
                for (k, &zk) in z.iter().enumerate() {
                    let e = libm::exp(zk - zmax);
                    let d = self.sweep.data[k];
                    total += e;
                    dsum += e * d;
                    zsum += e * zk;
                    dzsum += e * d * zk;
                }
                let p = dsum / total;
                let zbar = zsum / total;
                prior[y * ew + x] = p;
                // d prior / d log_tau = sum_k d_k w_k (zbar - z_k)
                prior_slope[y * ew + x] = p * zbar - dzsum / total;
            }
        }

        let disp = self.disparity_net.forward(features);
        let disparity: Vec<f64> = disp.output().data.iter().zip(&prior).map(|(r, p)| r + p).collect();

        let k = refs.len();
        let mut color_in = Tensor::zeros(&[3 * k + 2, eh, ew]);
        // Share of each reference in the base average: those sampling inside their view.
        let mut share = alloc::vec![0.0; k * size.0 * size.1];
        for (r, &(img, pos)) in refs.iter().enumerate() {
            let (ds, dt) = delta(pos, target);
            for y in 0..eh {
                let ay = (ext_origin.1 + y as isize) as f64;
                for x in 0..ew {
                    let ax = (ext_origin.0 + x as isize) as f64;
                    let d = disparity[y * ew + x];
                    let (sx, sy) = (ax + d * dt, ay + d * ds);
                    for c in 0..3 {
                        color_in.data[((3 * r + c) * eh + y) * ew + x] = sample_grad(&img.planes[c], img.width, img.height, sx, sy).0;
                    }
                    let inner = (mc..mc + size.0).contains(&x) && (mc..mc + size.1).contains(&y);
                    if inner && sx >= 0.0 && sy >= 0.0 && sx <= (img.width - 1) as f64 && sy <= (img.height - 1) as f64 {
                        share[(r * size.1 + y - mc) * size.0 + x - mc] = 1.0;
                    }
                }
            }
        }
        let plane = size.0 * size.1;
        for i in 0..plane {
            let n = (0..k).map(|r| share[r * plane + i]).sum::<f64>();
            for r in 0..k {
                share[r * plane + i] = if n > 0.0 { share[r * plane + i] / n } else { 1.0 / k as f64 };
            }
        }
        let centroid = refs.iter().fold((0.0, 0.0), |a, (_, p)| (a.0 + p.0 / k as f64, a.1 + p.1 / k as f64));
        color_in.channel_mut(3 * k).fill(target.0 - centroid.0);
        color_in.channel_mut(3 * k + 1).fill(target.1 - centroid.1);

        let mut output = Tensor::zeros(&[3, size.1, size.0]);
        for r in 0..k {
            let wr = &share[r * plane..(r + 1) * plane];
            for c in 0..3 {
                let src = color_in.channel(3 * r + c);
                let dst = output.channel_mut(c);
                for y in 0..size.1 {
                    for x in 0..size.0 {
                        dst[y * size.0 + x] += wr[y * size.0 + x] * src[(y + mc) * ew + x + mc];
                    }
                }
            }
        }
        let color = self.color_net.forward(color_in);
        output.add_assign(color.output());
        GeneratorTrace { output, origin, disp, color, disparity, prior_slope, share }
    }

    /// Parameter gradients for `grad_output` (same shape as the trace output).
    pub fn backward(&self, trace: &GeneratorTrace, refs: &[(&Image, Position)], target: Position, grad_output: &Tensor, grads: &mut [Tensor]) {
        let mc = self.color_net.margin();
        let nd = self.disparity_net.layers.len() * 2;
        let (oh, ow) = (grad_output.shape[1], grad_output.shape[2]);
        let (ew, eh) = (ow + 2 * mc, oh + 2 * mc);
        let ext_origin = (trace.origin.0 - mc as isize, trace.origin.1 - mc as isize);
        let k = refs.len();

        let mut g_in = self.color_net.backward(&trace.color, grad_output.clone(), &mut grads[nd + 1..]);
        for r in 0..k {
            let wr = &trace.share[r * oh * ow..(r + 1) * oh * ow];
            for c in 0..3 {
                let dst = g_in.channel_mut(3 * r + c);
                let src = grad_output.channel(c);
                for y in 0..oh {
                    for x in 0..ow {
                        dst[(y + mc) * ew + x + mc] += wr[y * ow + x] * src[y * ow + x];
                    }
                }
            }
        }

        let mut g_disp = Tensor::zeros(&[1, eh, ew]);
        for (r, &(img, pos)) in refs.iter().enumerate() {
            let (ds, dt) = delta(pos, target);
            for c in 0..3 {
                let g = g_in.channel(3 * r + c);
                for y in 0..eh {
                    let ay = (ext_origin.1 + y as isize) as f64;
                    for x in 0..ew {
                        let i = y * ew + x;
                        if g[i] == 0.0 {
                            continue;
                        }
                        let ax = (ext_origin.0 + x as isize) as f64;
                        let d = trace.disparity[i];
                        let (_, gx, gy) = sample_grad(&img.planes[c], img.width, img.height, ax + d * dt, ay + d * ds);
                        g_disp.data[i] += g[i] * (gx * dt + gy * ds);
                    }
                }
            }
        }
        grads[nd].data[0] += g_disp.data.iter().zip(&trace.prior_slope).map(|(g, s)| g * s).sum::<f64>();
        self.disparity_net.backward(&trace.disp, g_disp, &mut grads[..nd]);
    }

    /// Synthesises a full view.
    pub fn generate_view(&self, refs: &[(&View, Position)], target: Position) -> Result<View, SynthError> {
        let first = refs.first().ok_or(SynthError::NoReferences)?.0;
        if refs.len() != self.n_refs() {
            return Err(SynthError::ModelShapeError);
        }
        if refs.iter().any(|(v, _)| !v.same_dims(first)) {
            return Err(SynthError::ShapeError);
        }
        let images: Vec<Image> = refs.iter().map(|(v, _)| Image::from_view(v)).collect();
        let pairs: Vec<(&Image, Position)> = images.iter().zip(refs).map(|(i, r)| (i, r.1)).collect();
        Ok(self.synthesize(&pairs, target).to_view())
    }

    /// Full-view synthesis on normalised images.
    pub fn synthesize(&self, refs: &[(&Image, Position)], target: Position) -> Image {
        let (w, h) = (refs[0].0.width, refs[0].0.height);
        let trace = self.forward_window(refs, target, (0, 0), (w, h));
        let planes = core::array::from_fn(|c| trace.output.channel(c).to_vec());
        Image { width: w, height: h, planes }
    }
}
