use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{self, ConvGeom};
use super::layer::{infer_shapes, Activation, LayerKind, LayerSpec, PoolSpec};
use super::params::{ParamStore, Trainable};
use super::{NnError, Tensor, BN_EPS, SAFELOG_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm, dropout active.
    Train,
    /// Running statistics, dropout is the identity.
    Eval,
}

#[derive(Debug, Clone)]
enum Aux {
    None,
    BatchNorm {
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        /// Batch mean and biased variance; empty in eval mode.
        mean: Vec<f64>,
        var: Vec<f64>,
        count: usize,
    },
    MaxPool {
        argmax: Vec<usize>,
    },
    Dropout {
        /// Already scaled by `1 / (1 - rate)`.
        mask: Vec<f64>,
    },
}

/// Batch mean, biased batch variance and values per channel of one layer.
pub type BatchStats<'a> = (&'a [f64], &'a [f64], usize);

/// Per-layer inputs and intermediates recorded by [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    inputs: Vec<Tensor>,
    aux: Vec<Aux>,
    output_shape: [usize; 4],
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `(layer index, (batch mean, biased batch variance, values per channel))`
    /// for every train-mode batch-norm layer.
    pub fn batch_norm_stats(&self) -> Vec<(usize, BatchStats<'_>)> {
        self.aux
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                Aux::BatchNorm {
                    mean, var, count, ..
                } if !mean.is_empty() => Some((i, (mean.as_slice(), var.as_slice(), *count))),
                _ => None,
            })
            .collect()
    }
}

pub fn forward(
    stack: &[LayerSpec],
    params: &ParamStore,
    input: &Tensor,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor, ForwardCache), NnError> {
    let (out, cache) = run(stack, params, input, mode, seed, true)?;
    Ok((out, cache.expect("cache requested")))
}

/// Eval-mode forward pass without recording a cache.
pub fn predict(stack: &[LayerSpec], params: &ParamStore, input: &Tensor) -> Result<Tensor, NnError> {
    run(stack, params, input, Mode::Eval, 0, false).map(|(t, _)| t)
}

fn run(
    stack: &[LayerSpec],
    params: &ParamStore,
    input: &Tensor,
    mode: Mode,
    seed: u64,
    keep: bool,
) -> Result<(Tensor, Option<ForwardCache>), NnError> {
    params.check(stack)?;
    infer_shapes(stack, input.feature_shape())?;
    let mut inputs = Vec::new();
    let mut auxes = Vec::new();
    let mut x = input.clone();
    for (i, layer) in stack.iter().enumerate() {
        let (y, aux) = layer_forward(i, layer, params, &x, mode, seed);
        if keep {
            inputs.push(x);
            auxes.push(aux);
        }
        x = y;
    }
    let cache = keep.then(|| ForwardCache {
        mode,
        inputs,
        aux: auxes,
        output_shape: x.shape(),
    });
    Ok((x, cache))
}

fn pool_out(p: &PoolSpec, h: usize, w: usize) -> (usize, usize) {
    (
        (h - p.kernel.0) / p.stride.0 + 1,
        (w - p.kernel.1) / p.stride.1 + 1,
    )
}

fn layer_forward(
    index: usize,
    layer: &LayerSpec,
    params: &ParamStore,
    x: &Tensor,
    mode: Mode,
    seed: u64,
) -> (Tensor, Aux) {
    let [n, c, h, w] = x.shape();
    let p = &params.trainable[index];
    match &layer.kind {
        LayerKind::Conv2d(spec) => {
            let g = ConvGeom::new(spec, n, h, w);
            let mut out = Tensor::zeros([n, g.cout, g.oh, g.ow]);
            conv::forward(&g, x.data(), &p.weight, &p.bias, out.data_mut());
            (out, Aux::None)
        }
        LayerKind::BatchNorm { .. } => batch_norm_forward(index, params, x, mode),
        LayerKind::Activation(a) => {
            let mut out = x.clone();
            let f: fn(f64) -> f64 = match a {
                Activation::Elu => |v| if v > 0.0 { v } else { v.exp_m1() },
                Activation::Relu => |v| v.max(0.0),
                Activation::Square => |v| v * v,
                Activation::SafeLog => |v| v.max(SAFELOG_EPS).ln(),
            };
            out.data_mut().iter_mut().for_each(|v| *v = f(*v));
            (out, Aux::None)
        }
        LayerKind::MaxPool(ps) => {
            let (oh, ow) = pool_out(ps, h, w);
            let mut out = Tensor::zeros([n, c, oh, ow]);
            let mut argmax = vec![0; n * c * oh * ow];
            let xd = x.data();
            let od = out.data_mut();
            for plane in 0..n * c {
                let base = plane * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = base;
                        for ky in 0..ps.kernel.0 {
                            let row = base + (oy * ps.stride.0 + ky) * w + ox * ps.stride.1;
                            for (kx, &v) in xd[row..row + ps.kernel.1].iter().enumerate() {
                                if v > best {
                                    best = v;
                                    at = row + kx;
                                }
                            }
                        }
                        let o = (plane * oh + oy) * ow + ox;
                        od[o] = best;
                        argmax[o] = at;
                    }
                }
            }
            (out, Aux::MaxPool { argmax })
        }
        LayerKind::AvgPool(ps) => {
            let (oh, ow) = pool_out(ps, h, w);
            let mut out = Tensor::zeros([n, c, oh, ow]);
            let scale = 1.0 / (ps.kernel.0 * ps.kernel.1) as f64;
            let xd = x.data();
            let od = out.data_mut();
            for plane in 0..n * c {
                let base = plane * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut s = 0.0;
                        for ky in 0..ps.kernel.0 {
                            let row = base + (oy * ps.stride.0 + ky) * w + ox * ps.stride.1;
                            s += xd[row..row + ps.kernel.1].iter().sum::<f64>();
                        }
                        od[(plane * oh + oy) * ow + ox] = s * scale;
                    }
                }
            }
            (out, Aux::None)
        }
        LayerKind::Dropout { rate } => {
            if mode == Mode::Eval || *rate == 0.0 {
                return (x.clone(), Aux::None);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let keep = 1.0 - rate;
            let mask: Vec<f64> = (0..x.data().len())
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            let mut out = x.clone();
            out.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
            (out, Aux::Dropout { mask })
        }
        LayerKind::Flatten => (x.clone().reshaped([n, c * h * w, 1, 1]), Aux::None),
        LayerKind::Dense {
            in_features,
            out_features,
            ..
        } => {
            let (fi, fo) = (*in_features, *out_features);
            let mut out = Tensor::zeros([n, fo, 1, 1]);
            let xd = x.data();
            let od = out.data_mut();
            for b in 0..n {
                let xb = &xd[b * fi..(b + 1) * fi];
                for o in 0..fo {
                    let wrow = &p.weight[o * fi..(o + 1) * fi];
                    let s: f64 = wrow.iter().zip(xb).map(|(a, b)| a * b).sum();
                    od[b * fo + o] = s + p.bias.get(o).copied().unwrap_or(0.0);
                }
            }
            (out, Aux::None)
        }
    }
}

fn batch_norm_forward(index: usize, params: &ParamStore, x: &Tensor, mode: Mode) -> (Tensor, Aux) {
    let [n, c, h, w] = x.shape();
    let plane = h * w;
    let count = n * plane;
    let p = &params.trainable[index];
    let xd = x.data();
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for b in 0..n {
                for ch in 0..c {
                    mean[ch] += xd[(b * c + ch) * plane..][..plane].iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            for b in 0..n {
                for ch in 0..c {
                    let m = mean[ch];
                    var[ch] += xd[(b * c + ch) * plane..][..plane]
                        .iter()
                        .map(|v| (v - m) * (v - m))
                        .sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= count as f64);
            (mean, var)
        }
        Mode::Eval => {
            let run = params.running[index]
                .as_ref()
                .expect("checked by ParamStore::check");
            (run.mean.clone(), run.var.clone())
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; xd.len()];
    let mut out = Tensor::zeros(x.shape());
    let od = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            for j in off..off + plane {
                let z = (xd[j] - mean[ch]) * inv_std[ch];
                xhat[j] = z;
                od[j] = p.weight[ch] * z + p.bias[ch];
            }
        }
    }
    let (mean, var) = match mode {
        Mode::Train => (mean, var),
        Mode::Eval => (Vec::new(), Vec::new()),
    };
    (
        out,
        Aux::BatchNorm {
            xhat,
            inv_std,
            mean,
            var,
            count,
        },
    )
}

/// Gradients of a scalar loss given `upstream = dL/d(output)`.
/// Returns the input gradient and one [`Trainable`] of gradients per layer.
pub fn backward(
    stack: &[LayerSpec],
    params: &ParamStore,
    cache: &ForwardCache,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<Trainable>), NnError> {
    let (din, grads) = backward_impl(stack, params, cache, upstream, true)?;
    Ok((din.expect("input gradient requested"), grads))
}

/// Parameter gradients only; skips the input gradient of the first layer.
pub(crate) fn backward_params(
    stack: &[LayerSpec],
    params: &ParamStore,
    cache: &ForwardCache,
    upstream: &Tensor,
) -> Result<Vec<Trainable>, NnError> {
    backward_impl(stack, params, cache, upstream, false).map(|(_, g)| g)
}

fn backward_impl(
    stack: &[LayerSpec],
    params: &ParamStore,
    cache: &ForwardCache,
    upstream: &Tensor,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, Vec<Trainable>), NnError> {
    if cache.inputs.len() != stack.len() {
        return Err(NnError::CacheMismatch(format!(
            "cache holds {} layers, stack has {}",
            cache.inputs.len(),
            stack.len()
        )));
    }
    if upstream.shape() != cache.output_shape {
        return Err(NnError::CacheMismatch(format!(
            "upstream gradient {:?} does not match output {:?}",
            upstream.shape(),
            cache.output_shape
        )));
    }
    params.check(stack)?;
    let mut grads: Vec<Trainable> = params.trainable.iter().map(Trainable::zeros_like).collect();
    let mut dy = upstream.clone();
    for i in (0..stack.len()).rev() {
        let want_dx = i > 0 || need_input_grad;
        let dx = layer_backward(i, &stack[i], params, cache, &dy, &mut grads[i], want_dx);
        match dx {
            Some(dx) => dy = dx,
            None => return Ok((None, grads)),
        }
    }
    Ok((Some(dy), grads))
}

fn layer_backward(
    index: usize,
    layer: &LayerSpec,
    params: &ParamStore,
    cache: &ForwardCache,
    dy: &Tensor,
    grad: &mut Trainable,
    want_dx: bool,
) -> Option<Tensor> {
    let x = &cache.inputs[index];
    let [n, c, h, w] = x.shape();
    let p = &params.trainable[index];
    let dyd = dy.data();
    match (&layer.kind, &cache.aux[index]) {
        (LayerKind::Conv2d(spec), _) => {
            let g = ConvGeom::new(spec, n, h, w);
            let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
            conv::backward(
                &g,
                x.data(),
                &p.weight,
                dyd,
                dx.as_mut().map(|t| t.data_mut()),
                &mut grad.weight,
                &mut grad.bias,
            );
            dx
        }
        (
            LayerKind::BatchNorm { .. },
            Aux::BatchNorm {
                xhat,
                inv_std,
                count,
                ..
            },
        ) => {
            let plane = h * w;
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * plane;
                    for j in off..off + plane {
                        grad.weight[ch] += dyd[j] * xhat[j];
                        grad.bias[ch] += dyd[j];
                    }
                }
            }
            if !want_dx {
                return None;
            }
            let mut dx = Tensor::zeros(x.shape());
            let dxd = dx.data_mut();
            let m = *count as f64;
            #[allow(clippy::needless_range_loop)]
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * plane;
                    let k = p.weight[ch] * inv_std[ch];
                    for j in off..off + plane {
                        dxd[j] = match cache.mode {
                            Mode::Train => {
                                k * (dyd[j] - grad.bias[ch] / m - xhat[j] * grad.weight[ch] / m)
                            }
                            Mode::Eval => k * dyd[j],
                        };
                    }
                }
            }
            Some(dx)
        }
        (LayerKind::Activation(a), _) => {
            let mut dx = dy.clone();
            let d: fn(f64) -> f64 = match a {
                Activation::Elu => |v| if v > 0.0 { 1.0 } else { v.exp() },
                Activation::Relu => |v| if v > 0.0 { 1.0 } else { 0.0 },
                Activation::Square => |v| 2.0 * v,
                Activation::SafeLog => |v| if v > SAFELOG_EPS { 1.0 / v } else { 0.0 },
            };
            dx.data_mut()
                .iter_mut()
                .zip(x.data())
                .for_each(|(g, &v)| *g *= d(v));
            Some(dx)
        }
        (LayerKind::MaxPool(_), Aux::MaxPool { argmax }) => {
            let mut dx = Tensor::zeros(x.shape());
            let dxd = dx.data_mut();
            for (o, &at) in argmax.iter().enumerate() {
                dxd[at] += dyd[o];
            }
            Some(dx)
        }
        (LayerKind::AvgPool(ps), _) => {
            let (oh, ow) = pool_out(ps, h, w);
            let scale = 1.0 / (ps.kernel.0 * ps.kernel.1) as f64;
            let mut dx = Tensor::zeros(x.shape());
            let dxd = dx.data_mut();
            for plane in 0..n * c {
                let base = plane * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = dyd[(plane * oh + oy) * ow + ox] * scale;
                        for ky in 0..ps.kernel.0 {
                            let row = base + (oy * ps.stride.0 + ky) * w + ox * ps.stride.1;
                            dxd[row..row + ps.kernel.1].iter_mut().for_each(|v| *v += g);
                        }
                    }
                }
            }
            Some(dx)
        }
        (LayerKind::Dropout { .. }, Aux::Dropout { mask }) => {
            let mut dx = dy.clone();
            dx.data_mut().iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            Some(dx)
        }
        (LayerKind::Dropout { .. }, _) => Some(dy.clone()),
        (LayerKind::Flatten, _) => Some(dy.clone().reshaped(x.shape())),
        (
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            },
            _,
        ) => {
            let (fi, fo) = (*in_features, *out_features);
            let xd = x.data();
            for b in 0..n {
                let xb = &xd[b * fi..(b + 1) * fi];
                for o in 0..fo {
                    let g = dyd[b * fo + o];
                    if let Some(gb) = grad.bias.get_mut(o) {
                        *gb += g;
                    }
                    grad.weight[o * fi..(o + 1) * fi]
                        .iter_mut()
                        .zip(xb)
                        .for_each(|(gw, xv)| *gw += g * xv);
                }
            }
            if !want_dx {
                return None;
            }
            let mut dx = Tensor::zeros(x.shape());
            let dxd = dx.data_mut();
            for b in 0..n {
                let dxb = &mut dxd[b * fi..(b + 1) * fi];
                for o in 0..fo {
                    let g = dyd[b * fo + o];
                    dxb.iter_mut()
                        .zip(&p.weight[o * fi..(o + 1) * fi])
                        .for_each(|(d, wv)| *d += g * wv);
                }
            }
            Some(dx)
        }
        (LayerKind::BatchNorm { .. } | LayerKind::MaxPool(_), _) => {
            unreachable!("cache aux recorded by forward")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    fn tensor(shape: [usize; 4], f: impl Fn(usize) -> f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn batch_norm_train_output_is_standardized() {
        let stack = vec![LayerSpec::batch_norm("bn", 3)];
        let params = init_params(&stack, 0);
        let x = tensor([4, 3, 2, 5], |i| ((i * 7919) % 101) as f64 * 0.3 + (i % 3) as f64 * 10.0);
        let (y, cache) = forward(&stack, &params, &x, Mode::Train, 0).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| (0..10).map(move |j| (b, j)))
                .map(|(b, j)| y.get([b, ch, j / 5, j % 5]))
                .collect();
            let m = vals.iter().sum::<f64>() / 40.0;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 40.0;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-3);
        }
        assert_eq!(cache.batch_norm_stats().len(), 1);
    }

    #[test]
    fn dropout_rate_and_eval_identity() {
        let stack = vec![LayerSpec::dropout("do", 0.25)];
        let params = init_params(&stack, 0);
        let x = tensor([10, 1, 1, 1000], |_| 1.0);
        let (y, _) = forward(&stack, &params, &x, Mode::Train, 3).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64;
        let n = 10_000.0;
        let sd = (n * 0.25 * 0.75f64).sqrt();
        assert!((zeros - 0.25 * n).abs() < 3.0 * sd, "{zeros}");
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12));
        let (y2, _) = forward(&stack, &params, &x, Mode::Train, 3).unwrap();
        assert_eq!(y, y2);
        assert_eq!(predict(&stack, &params, &x).unwrap(), x);
    }

    #[test]
    fn dense_gradients_are_outer_products() {
        let stack = vec![LayerSpec::dense("d", 3, 2, true)];
        let mut params = init_params(&stack, 0);
        params.trainable[0].weight = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = tensor([1, 3, 1, 1], |i| [0.5, -1.0, 2.0][i]);
        let (_, cache) = forward(&stack, &params, &x, Mode::Train, 0).unwrap();
        let g = tensor([1, 2, 1, 1], |i| [1.0, -2.0][i]);
        let (dx, grads) = backward(&stack, &params, &cache, &g).unwrap();
        assert_eq!(grads[0].weight, vec![0.5, -1.0, 2.0, -1.0, 2.0, -4.0]);
        assert_eq!(grads[0].bias, vec![1.0, -2.0]);
        assert_eq!(dx.data(), &[1.0 - 8.0, 2.0 - 10.0, 3.0 - 12.0]);
    }

    #[test]
    fn square_and_safelog_gradients() {
        let stack = vec![LayerSpec::activation("sq", Activation::Square)];
        let params = init_params(&stack, 0);
        let x = tensor([1, 1, 1, 1], |_| 3.0);
        let (y, cache) = forward(&stack, &params, &x, Mode::Train, 0).unwrap();
        assert_eq!(y.data(), &[9.0]);
        let (dx, _) = backward(&stack, &params, &cache, &tensor([1, 1, 1, 1], |_| 1.0)).unwrap();
        assert_eq!(dx.data(), &[6.0]);

        let stack = vec![LayerSpec::activation("log", Activation::SafeLog)];
        let x = tensor([1, 1, 1, 2], |i| [0.0, 2.0][i]);
        let (y, cache) = forward(&stack, &params_for(&stack), &x, Mode::Train, 0).unwrap();
        assert_eq!(y.data()[0], SAFELOG_EPS.ln());
        let (dx, _) =
            backward(&stack, &params_for(&stack), &cache, &tensor([1, 1, 1, 2], |_| 1.0)).unwrap();
        assert_eq!(dx.data(), &[0.0, 0.5]);
    }

    fn params_for(stack: &[LayerSpec]) -> ParamStore {
        init_params(stack, 0)
    }

    #[test]
    fn pooling_forward_and_routing() {
        let stack = vec![LayerSpec::max_pool("mp", (1, 2), (1, 2))];
        let params = params_for(&stack);
        let x = tensor([1, 1, 1, 5], |i| [1.0, 3.0, 2.0, 0.0, 9.0][i]);
        let (y, cache) = forward(&stack, &params, &x, Mode::Train, 0).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
        let (dx, _) = backward(&stack, &params, &cache, &tensor([1, 1, 1, 2], |_| 1.0)).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 1.0, 0.0, 0.0]);

        let stack = vec![LayerSpec::avg_pool("ap", (1, 3), (1, 2))];
        let (y, _) = forward(&stack, &params_for(&stack), &x, Mode::Train, 0).unwrap();
        assert_eq!(y.data(), &[2.0, 11.0 / 3.0]);
    }

    #[test]
    fn shape_errors_surface_before_compute() {
        let stack = vec![LayerSpec::dense("d", 5, 2, true)];
        let params = params_for(&stack);
        let x = tensor([1, 3, 1, 1], |_| 0.0);
        assert!(matches!(
            forward(&stack, &params, &x, Mode::Eval, 0),
            Err(NnError::ShapeMismatch { index: 0, .. })
        ));
    }
}
