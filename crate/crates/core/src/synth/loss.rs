//! The three-player objective and its per-network costs.

use alloc::vec;
use alloc::vec::Vec;

use super::discriminator::{DiscriminatorModel, DiscriminatorTrace};
use super::generator::{GeneratorModel, GeneratorTrace};
use super::tensor::Tensor;
use super::warp::{Image, Position};
use super::SynthError;

/// Objective value and its derivatives with respect to two score batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrad {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

fn check(scores: &[f64]) -> Result<(), SynthError> {
    if scores.is_empty() {
        return Err(SynthError::EmptyBatch);
    }
    match scores.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        Some(&s) => Err(SynthError::DomainError(s)),
        None => Ok(()),
    }
}

fn mean_log(s: &[f64]) -> f64 {
    s.iter().map(|v| libm::log(*v)).sum::<f64>() / s.len() as f64
}

fn mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}

/// `α·E[log D₁(x)] − E[D₁(G(z))] − E[D₂(x)] + β·E[log D₂(G(z))]`.
pub fn d2gan_value(d1_real: &[f64], d1_fake: &[f64], d2_real: &[f64], d2_fake: &[f64], alpha: f64, beta: f64) -> Result<f64, SynthError> {
    for s in [d1_real, d1_fake, d2_real, d2_fake] {
        check(s)?;
    }
    Ok(alpha * mean_log(d1_real) - mean(d1_fake) - mean(d2_real) + beta * mean_log(d2_fake))
}

/// First critic: `mean(α·log real − fake)`; `grad_a` is over `real`, `grad_b` over `fake`.
pub fn objective_d1(real: &[f64], fake: &[f64], alpha: f64) -> Result<ScoreGrad, SynthError> {
    check(real)?;
    check(fake)?;
    let (mr, mf) = (real.len() as f64, fake.len() as f64);
    Ok(ScoreGrad {
        value: alpha * mean_log(real) - mean(fake),
        grad_a: real.iter().map(|s| alpha / (mr * s)).collect(),
        grad_b: vec![-1.0 / mf; fake.len()],
    })
}

/// Second critic: `mean(β·log fake − real)`; `grad_a` is over `real`, `grad_b` over `fake`.
pub fn objective_d2(real: &[f64], fake: &[f64], beta: f64) -> Result<ScoreGrad, SynthError> {
    check(real)?;
    check(fake)?;
    let (mr, mf) = (real.len() as f64, fake.len() as f64);
    Ok(ScoreGrad {
        value: beta * mean_log(fake) - mean(real),
        grad_a: vec![-1.0 / mr; real.len()],
        grad_b: fake.iter().map(|s| beta / (mf * s)).collect(),
    })
}

/// Generator's adversarial cost `mean(β·log D₂(G) − D₁(G))`; `grad_a` is over the D₁ scores, `grad_b` over D₂.
pub fn objective_g(d1_fake: &[f64], d2_fake: &[f64], beta: f64) -> Result<ScoreGrad, SynthError> {
    check(d1_fake)?;
    check(d2_fake)?;
    let m = d1_fake.len() as f64;
    Ok(ScoreGrad {
        value: beta * mean_log(d2_fake) - mean(d1_fake),
        grad_a: vec![-1.0 / m; d1_fake.len()],
        grad_b: d2_fake.iter().map(|s| beta / (d2_fake.len() as f64 * s)).collect(),
    })
}

/// `weight · mean|synthesized − target|` over every sample and its gradient.
pub fn l1_term(synthesized: &[Tensor], target: &[Tensor], weight: f64) -> Result<(f64, Vec<Tensor>), SynthError> {
    if synthesized.len() != target.len() || synthesized.iter().zip(target).any(|(a, b)| a.shape != b.shape) {
        return Err(SynthError::ShapeError);
    }
    let count: usize = synthesized.iter().map(Tensor::len).sum();
    if count == 0 {
        return Err(SynthError::EmptyBatch);
    }
    let scale = weight / count as f64;
    let mut total = 0.0;
    let grads = synthesized
        .iter()
        .zip(target)
        .map(|(a, b)| {
            let mut g = Tensor::zeros_like(a);
            for ((gv, x), y) in g.data.iter_mut().zip(&a.data).zip(&b.data) {
                let d = x - y;
                total += libm::fabs(d);
                *gv = if d > 0.0 {
                    scale
                } else if d < 0.0 {
                    -scale
                } else {
                    0.0
                };
            }
            g
        })
        .collect();
    Ok((total * scale, grads))
}

fn critic_grads(model: &DiscriminatorModel, sg: &ScoreGrad, traces: (&[DiscriminatorTrace], &[DiscriminatorTrace])) -> Vec<Tensor> {
    let mut grads = model.zero_grads();
    for (t, g) in traces.0.iter().zip(&sg.grad_a) {
        model.backward(t, *g, &mut grads);
    }
    for (t, g) in traces.1.iter().zip(&sg.grad_b) {
        model.backward(t, *g, &mut grads);
    }
    grads
}

fn score_all(model: &DiscriminatorModel, xs: &[Tensor]) -> (Vec<f64>, Vec<DiscriminatorTrace>) {
    xs.iter().map(|x| model.forward(x)).unzip()
}

/// First critic's objective and its parameter gradients (for ascent).
pub fn loss_d1(model: &DiscriminatorModel, real: &[Tensor], fake: &[Tensor], alpha: f64) -> Result<(f64, Vec<Tensor>), SynthError> {
    let (sr, tr) = score_all(model, real);
    let (sf, tf) = score_all(model, fake);
    let sg = objective_d1(&sr, &sf, alpha)?;
    Ok((sg.value, critic_grads(model, &sg, (&tr, &tf))))
}

/// Second critic's objective and its parameter gradients (for ascent).
pub fn loss_d2(model: &DiscriminatorModel, real: &[Tensor], fake: &[Tensor], beta: f64) -> Result<(f64, Vec<Tensor>), SynthError> {
    let (sr, tr) = score_all(model, real);
    let (sf, tf) = score_all(model, fake);
    let sg = objective_d2(&sr, &sf, beta)?;
    Ok((sg.value, critic_grads(model, &sg, (&tr, &tf))))
}

/// One training patch: references, target position and the ground-truth crop at `origin`.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub refs: Vec<(&'a Image, Position)>,
    pub target_pos: Position,
    pub origin: (usize, usize),
    pub target: Tensor,
}

impl Example<'_> {
    pub fn size(&self) -> (usize, usize) {
        (self.target.shape[2], self.target.shape[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLoss {
    pub value: f64,
    pub adversarial: f64,
    pub reconstruction: f64,
    pub grads: Vec<Tensor>,
}

pub(crate) fn generator_traces(g: &GeneratorModel, batch: &[Example]) -> Vec<GeneratorTrace> {
    batch
        .iter()
        .map(|e| g.forward_window(&e.refs, e.target_pos, (e.origin.0 as isize, e.origin.1 as isize), e.size()))
        .collect()
}

/// Generator cost (adversarial plus weighted L1) with gradients through both networks and the warp.
pub fn loss_g(g: &GeneratorModel, d1: &DiscriminatorModel, d2: &DiscriminatorModel, batch: &[Example], beta: f64, recon_weight: f64) -> Result<GeneratorLoss, SynthError> {
    let traces = generator_traces(g, batch);
    loss_g_traced(g, d1, d2, batch, &traces, beta, recon_weight)
}

pub(crate) fn loss_g_traced(
    g: &GeneratorModel,
    d1: &DiscriminatorModel,
    d2: &DiscriminatorModel,
    batch: &[Example],
    traces: &[GeneratorTrace],
    beta: f64,
    recon_weight: f64,
) -> Result<GeneratorLoss, SynthError> {
    let fakes: Vec<Tensor> = traces.iter().map(|t| t.output.clone()).collect();
    let (s1, t1) = score_all(d1, &fakes);
    let (s2, t2) = score_all(d2, &fakes);
    let adv = objective_g(&s1, &s2, beta)?;
    let targets: Vec<Tensor> = batch.iter().map(|e| e.target.clone()).collect();
    let (recon, mut out_grads) = if recon_weight > 0.0 {
        l1_term(&fakes, &targets, recon_weight)?
    } else {
        (0.0, fakes.iter().map(Tensor::zeros_like).collect())
    };
    let mut scratch1 = d1.zero_grads();
    let mut scratch2 = d2.zero_grads();
    for i in 0..batch.len() {
        out_grads[i].add_assign(&d1.backward(&t1[i], adv.grad_a[i], &mut scratch1));
        out_grads[i].add_assign(&d2.backward(&t2[i], adv.grad_b[i], &mut scratch2));
    }
    let mut grads = g.zero_grads();
    for ((e, t), og) in batch.iter().zip(traces).zip(&out_grads) {
        g.backward(t, &e.refs, e.target_pos, og, &mut grads);
    }
    Ok(GeneratorLoss { value: adv.value + recon, adversarial: adv.value, reconstruction: recon, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::discriminator::DiscriminatorSpec;
    use core::f64::consts::E;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn value_identities() {
        assert_eq!(d2gan_value(&[1.0], &[1.0], &[1.0], &[1.0], 1.0, 1.0).unwrap(), -2.0);
        assert_eq!(d2gan_value(&[1.0], &[1.0], &[1.0], &[1.0], 0.2, 0.2).unwrap(), -2.0);
        assert_eq!(d2gan_value(&[E], &[1.0], &[1.0], &[1.0], 0.2, 0.2).unwrap(), 0.2 - 1.0 - 1.0);
        assert_eq!(d2gan_value(&[0.0], &[1.0], &[1.0], &[1.0], 0.2, 0.2), Err(SynthError::DomainError(0.0)));
        assert_eq!(d2gan_value(&[1.0], &[-1.0], &[1.0], &[1.0], 0.2, 0.2), Err(SynthError::DomainError(-1.0)));
    }

    #[test]
    fn per_network_identities() {
        assert_eq!(objective_d1(&[E], &[1.0], 0.2).unwrap().value, 0.2 - 1.0);
        assert_eq!(objective_d1(&[E, E], &[1.0, 1.0], 0.2).unwrap().value, 0.2 - 1.0);
        assert_eq!(objective_d2(&[1.0], &[E], 0.2).unwrap().value, 0.2 - 1.0);
        assert_eq!(objective_d2(&[1.0], &[1.0], 0.2).unwrap().value, -1.0);
        assert_eq!(objective_g(&[1.0], &[E], 0.2).unwrap().value, 0.2 - 1.0);
    }

    #[test]
    fn zero_l1_leaves_adversarial_part() {
        let t = Tensor::from_vec(&[3, 1, 1], vec![0.1, 0.2, 0.3]).unwrap();
        let (v, g) = l1_term(&[t.clone()], &[t], 10.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(g[0].data.iter().all(|&x| x == 0.0));
    }

    fn random_patch(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
        Tensor::from_vec(&[3, n, n], (0..3 * n * n).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn check_critic(loss: impl Fn(&DiscriminatorModel, &[Tensor], &[Tensor]) -> Result<(f64, Vec<Tensor>), SynthError>) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let spec = DiscriminatorSpec { convs: vec![(3, 3, 2), (3, 3, 2)], leak: 0.2 };
        let d = DiscriminatorModel::new(&spec, (12, 12), 5).unwrap();
        let real: Vec<Tensor> = (0..3).map(|_| random_patch(&mut rng, 12)).collect();
        let fake: Vec<Tensor> = (0..3).map(|_| random_patch(&mut rng, 12)).collect();
        let (_, grads) = loss(&d, &real, &fake).unwrap();
        let h = 1e-6;
        for (pi, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                let mut dp = d.clone();
                dp.params_mut()[pi].data[i] += h;
                let mut dm = d.clone();
                dm.params_mut()[pi].data[i] -= h;
                let num = (loss(&dp, &real, &fake).unwrap().0 - loss(&dm, &real, &fake).unwrap().0) / (2.0 * h);
                let err = (num - g.data[i]).abs() / num.abs().max(g.data[i].abs()).max(1e-6);
                assert!(err < 1e-4, "{pi}[{i}] {num} vs {}", g.data[i]);
            }
        }
    }

    #[test]
    fn d1_gradient_matches_finite_difference() {
        check_critic(|d, r, f| loss_d1(d, r, f, 0.2));
    }

    #[test]
    fn d2_gradient_matches_finite_difference() {
        check_critic(|d, r, f| loss_d2(d, r, f, 0.2));
    }

    #[test]
    fn mirrored_batches_give_mirrored_critic_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = DiscriminatorModel::new(&DiscriminatorSpec { convs: vec![(3, 4, 2)], leak: 0.2 }, (8, 8), 3).unwrap();
        let a: Vec<Tensor> = (0..2).map(|_| random_patch(&mut rng, 8)).collect();
        let b: Vec<Tensor> = (0..2).map(|_| random_patch(&mut rng, 8)).collect();
        let (v1, g1) = loss_d1(&d, &a, &b, 0.3).unwrap();
        let (v2, g2) = loss_d2(&d, &b, &a, 0.3).unwrap();
        assert!((v1 - v2).abs() < 1e-15);
        for (x, y) in g1.iter().zip(&g2) {
            for (p, q) in x.data.iter().zip(&y.data) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
