//! Fixed-topology feed-forward networks: 3x3 same-padding convolutions,
//! 2x2 max-pooling, dense layers, and a residual output head. Forward and
//! backward passes are hand-written; there is no autodiff graph.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation, as a function of it.
    /// The ReLU subgradient at exactly 0 is taken as 0.
    #[inline]
    pub fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }

    /// Same derivative expressed through the activation output. Both ReLU
    /// and the logistic function allow this, which lets the forward pass
    /// keep only post-activation values.
    #[inline]
    pub fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// 3x3 kernel, stride 1, zero padding preserving the spatial size.
    Conv { out_channels: usize, activation: Activation },
    /// 2x2 non-overlapping max pooling; spatial dims of size 1 pass through.
    MaxPool2,
    /// Affine map over the flattened input.
    Dense { out_units: usize, activation: Activation },
    /// Emits `network_input - x`, treating the chain so far as a residual.
    ResidualOutput,
}

/// Layer stack plus the (channel, height, width) of a single input item.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Per-layer output shapes; validates the chain.
    pub fn shape_chain(&self) -> Result<Vec<[usize; 3]>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                LayerSpec::Conv { out_channels, .. } => [*out_channels, cur[1], cur[2]],
                LayerSpec::MaxPool2 => [cur[0], pooled(cur[1]), pooled(cur[2])],
                LayerSpec::Dense { out_units, .. } => [*out_units, 1, 1],
                LayerSpec::ResidualOutput => {
                    if cur != self.input {
                        return Err(Error::ShapeMismatch(format!(
                            "residual output at layer {i} needs shape {:?}, chain produces {:?}",
                            self.input, cur
                        )));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<[usize; 3]> {
        Ok(*self.shape_chain()?.last().unwrap_or(&self.input))
    }
}

#[inline]
fn pooled(dim: usize) -> usize {
    if dim >= 2 {
        dim / 2
    } else {
        1
    }
}

/// Parameters of one layer; pooling and residual layers hold none.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Conv { kernel: Tensor, bias: Vec<f64> },
    Dense { weight: Tensor, bias: Vec<f64> },
    None,
}

impl LayerParams {
    fn zeros_like_spec(spec: &LayerSpec, in_shape: [usize; 3]) -> Self {
        match spec {
            LayerSpec::Conv { out_channels, .. } => LayerParams::Conv {
                kernel: Tensor::zeros([*out_channels, in_shape[0], 3, 3]),
                bias: vec![0.0; *out_channels],
            },
            LayerSpec::Dense { out_units, .. } => LayerParams::Dense {
                weight: Tensor::zeros([*out_units, in_shape.iter().product(), 1, 1]),
                bias: vec![0.0; *out_units],
            },
            _ => LayerParams::None,
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        match self {
            LayerParams::Conv { kernel, bias } | LayerParams::Dense { weight: kernel, bias } => {
                vec![&kernel.data, bias.as_slice()]
            }
            LayerParams::None => vec![],
        }
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            LayerParams::Conv { kernel, bias } | LayerParams::Dense { weight: kernel, bias } => {
                vec![&mut kernel.data, bias.as_mut_slice()]
            }
            LayerParams::None => vec![],
        }
    }
}

/// A network: topology plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: Vec<LayerParams>,
}

impl Network {
    /// All-zero parameters (useful as a neutral starting point in tests).
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let chain = spec.shape_chain()?;
        let mut params = Vec::with_capacity(spec.layers.len());
        let mut in_shape = spec.input;
        for (layer, out_shape) in spec.layers.iter().zip(&chain) {
            params.push(LayerParams::zeros_like_spec(layer, in_shape));
            in_shape = *out_shape;
        }
        Ok(Self { spec, params })
    }

    /// Uniform Glorot kernels, zero biases.
    pub fn init(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for p in net.params.iter_mut() {
            match p {
                LayerParams::Conv { kernel, .. } => {
                    let fan_in = kernel.shape[1] * 9;
                    let fan_out = kernel.shape[0] * 9;
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in kernel.data.iter_mut() {
                        *v = (2.0 * rng.gen::<f64>() - 1.0) * a;
                    }
                }
                LayerParams::Dense { weight, .. } => {
                    let fan_in = weight.shape[1];
                    let fan_out = weight.shape[0];
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in weight.data.iter_mut() {
                        *v = (2.0 * rng.gen::<f64>() - 1.0) * a;
                    }
                }
                LayerParams::None => {}
            }
        }
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flat_map(|p| p.slices()).map(|s| s.len()).sum()
    }

    /// Read one parameter by its global flat index.
    pub fn param_get(&self, index: usize) -> f64 {
        let mut i = index;
        for p in &self.params {
            for s in p.slices() {
                if i < s.len() {
                    return s[i];
                }
                i -= s.len();
            }
        }
        panic!("parameter index out of range");
    }

    /// Write one parameter by its global flat index.
    pub fn param_set(&mut self, index: usize, value: f64) {
        let mut i = index;
        for p in self.params.iter_mut() {
            for s in p.slices_mut() {
                if i < s.len() {
                    s[i] = value;
                    return;
                }
                i -= s.len();
            }
        }
        panic!("parameter index out of range");
    }

    /// Forward pass, keeping what backward needs: the activation entering
    /// each layer (post-activation values; both ReLU and sigmoid expose
    /// their derivative through the output) plus pooling argmax positions.
    pub fn forward(&self, input: &Tensor) -> (Tensor, Cache) {
        assert_eq!(
            [input.shape[1], input.shape[2], input.shape[3]],
            self.spec.input,
            "network input shape mismatch"
        );
        let mut cache = Cache {
            items: Vec::with_capacity(self.params.len()),
            activations: Vec::with_capacity(self.params.len() + 1),
        };
        cache.activations.push(input.clone());
        for (layer, params) in self.spec.layers.iter().zip(&self.params) {
            let x = cache.activations.last().expect("nonempty");
            let (out, item) = match (layer, params) {
                (LayerSpec::Conv { activation, .. }, LayerParams::Conv { kernel, bias }) => {
                    let mut z = conv2d_forward(x, kernel, bias);
                    activate_in_place(&mut z, *activation);
                    (z, CacheItem::Plain)
                }
                (LayerSpec::MaxPool2, _) => {
                    let (out, argmax) = maxpool2_forward(x);
                    (out, CacheItem::Pool { argmax })
                }
                (LayerSpec::Dense { activation, .. }, LayerParams::Dense { weight, bias }) => {
                    let mut z = dense_forward(x, weight, bias);
                    activate_in_place(&mut z, *activation);
                    (z, CacheItem::Plain)
                }
                (LayerSpec::ResidualOutput, _) => {
                    let mut out = cache.activations[0].clone();
                    for (o, r) in out.data.iter_mut().zip(&x.data) {
                        *o -= r;
                    }
                    (out, CacheItem::Plain)
                }
                _ => unreachable!("layer/params mismatch"),
            };
            cache.items.push(item);
            cache.activations.push(out);
        }
        (cache.activations.last().expect("nonempty").clone(), cache)
    }

    /// Backward pass from `grad_out` (dL/d output). Returns parameter
    /// gradients and the gradient with respect to the network input.
    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> (Gradients, Tensor) {
        let mut grads: Vec<LayerParams> = {
            let chain = self.spec.shape_chain().expect("validated at construction");
            let mut v = Vec::with_capacity(self.params.len());
            let mut in_shape = self.spec.input;
            for (layer, out_shape) in self.spec.layers.iter().zip(&chain) {
                v.push(LayerParams::zeros_like_spec(layer, in_shape));
                in_shape = *out_shape;
            }
            v
        };
        let mut grad = grad_out.clone();
        let mut residual_to_input: Option<Tensor> = None;
        for idx in (0..self.spec.layers.len()).rev() {
            let input = &cache.activations[idx];
            let output = &cache.activations[idx + 1];
            grad = match (&self.spec.layers[idx], &self.params[idx], &cache.items[idx]) {
                (
                    LayerSpec::Conv { activation, .. },
                    LayerParams::Conv { kernel, .. },
                    CacheItem::Plain,
                ) => {
                    let dz = activation_backward_from_output(&grad, output, *activation);
                    let (dk, db, dx) = conv2d_backward(input, kernel, &dz);
                    grads[idx] = LayerParams::Conv { kernel: dk, bias: db };
                    dx
                }
                (LayerSpec::MaxPool2, _, CacheItem::Pool { argmax }) => {
                    maxpool2_backward(&grad, input.shape, argmax)
                }
                (
                    LayerSpec::Dense { activation, .. },
                    LayerParams::Dense { weight, .. },
                    CacheItem::Plain,
                ) => {
                    let dz = activation_backward_from_output(&grad, output, *activation);
                    let (dw, db, dx) = dense_backward(input, weight, &dz);
                    grads[idx] = LayerParams::Dense { weight: dw, bias: db };
                    dx
                }
                (LayerSpec::ResidualOutput, _, CacheItem::Plain) => {
                    residual_to_input = Some(grad.clone());
                    let mut neg = grad;
                    for v in neg.data.iter_mut() {
                        *v = -*v;
                    }
                    neg
                }
                _ => unreachable!("layer/cache mismatch"),
            };
        }
        if let Some(extra) = residual_to_input {
            for (g, e) in grad.data.iter_mut().zip(&extra.data) {
                *g += e;
            }
        }
        (Gradients { layers: grads }, grad)
    }
}

/// Per-layer gradients, shaped exactly like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        let chain = net.spec.shape_chain().expect("validated");
        let mut v = Vec::with_capacity(net.params.len());
        let mut in_shape = net.spec.input;
        for (layer, out_shape) in net.spec.layers.iter().zip(&chain) {
            v.push(LayerParams::zeros_like_spec(layer, in_shape));
            in_shape = *out_shape;
        }
        Self { layers: v }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (sa, sb) in a.slices_mut().into_iter().zip(b.slices()) {
                for (x, y) in sa.iter_mut().zip(sb) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers.iter_mut() {
            for s in layer.slices_mut() {
                for v in s.iter_mut() {
                    *v *= factor;
                }
            }
        }
    }

    pub fn param_get(&self, index: usize) -> f64 {
        let mut i = index;
        for p in &self.layers {
            for s in p.slices() {
                if i < s.len() {
                    return s[i];
                }
                i -= s.len();
            }
        }
        panic!("gradient index out of range");
    }
}

/// Saved forward state: activations entering each layer plus per-layer
/// auxiliaries.
pub struct Cache {
    items: Vec<CacheItem>,
    activations: Vec<Tensor>,
}

enum CacheItem {
    Plain,
    Pool { argmax: Vec<usize> },
}

fn activate_in_place(z: &mut Tensor, act: Activation) {
    if act == Activation::Linear {
        return;
    }
    for v in z.data.iter_mut() {
        *v = act.apply(*v);
    }
}

fn activation_backward_from_output(grad_out: &Tensor, output: &Tensor, act: Activation) -> Tensor {
    if act == Activation::Linear {
        return grad_out.clone();
    }
    let mut dz = grad_out.clone();
    for (g, a) in dz.data.iter_mut().zip(&output.data) {
        *g *= act.grad_from_output(*a);
    }
    dz
}

/// Kernel rearranged as kt[(tap * in_c + ic) * out_c + oc], putting the
/// output-channel axis contiguous for the per-tap inner loops.
fn transpose_kernel(kernel: &Tensor) -> Vec<f64> {
    let out_c = kernel.shape[0];
    let in_c = kernel.shape[1];
    let mut kt = vec![0.0; 9 * in_c * out_c];
    for oc in 0..out_c {
        for ic in 0..in_c {
            for t in 0..9 {
                kt[(t * in_c + ic) * out_c + oc] = kernel.data[(oc * in_c + ic) * 9 + t];
            }
        }
    }
    kt
}

/// 3x3 same-padding convolution. Accumulates across the contiguous
/// output-channel axis per valid kernel tap; zero inputs (common after
/// ReLU) contribute nothing and are skipped.
pub fn conv2d_forward(input: &Tensor, kernel: &Tensor, bias: &[f64]) -> Tensor {
    let [batch, in_c, h, w] = input.shape;
    let out_c = kernel.shape[0];
    debug_assert_eq!(kernel.shape[1], in_c);
    debug_assert_eq!(kernel.shape[2], 3);
    debug_assert_eq!(kernel.shape[3], 3);
    let kt = transpose_kernel(kernel);
    let hw = h * w;
    let mut out = Tensor::zeros([batch, out_c, h, w]);
    let mut acc = vec![0.0; out_c];
    for b in 0..batch {
        let in_base = b * in_c * hw;
        for y in 0..h {
            for x in 0..w {
                acc.copy_from_slice(bias);
                for dy in 0..3usize {
                    let iy = y + dy;
                    if iy < 1 || iy > h {
                        continue;
                    }
                    let iy = iy - 1;
                    for dx in 0..3usize {
                        let ix = x + dx;
                        if ix < 1 || ix > w {
                            continue;
                        }
                        let ix = ix - 1;
                        let t = dy * 3 + dx;
                        for ic in 0..in_c {
                            let v = input.data[in_base + ic * hw + iy * w + ix];
                            if v == 0.0 {
                                continue;
                            }
                            let krow = &kt[(t * in_c + ic) * out_c..][..out_c];
                            for (a, k) in acc.iter_mut().zip(krow) {
                                *a += v * k;
                            }
                        }
                    }
                }
                let out_base = b * out_c * hw + y * w + x;
                for (oc, a) in acc.iter().enumerate() {
                    out.data[out_base + oc * hw] = *a;
                }
            }
        }
    }
    out
}

/// Gradients of the 3x3 convolution: (dKernel, dBias, dInput).
pub fn conv2d_backward(input: &Tensor, kernel: &Tensor, dz: &Tensor) -> (Tensor, Vec<f64>, Tensor) {
    let [batch, in_c, h, w] = input.shape;
    let out_c = kernel.shape[0];
    let hw = h * w;
    let kt = transpose_kernel(kernel);
    let mut dkt = vec![0.0; kt.len()];
    let mut db = vec![0.0; out_c];
    let mut dx = Tensor::zeros(input.shape);
    let mut dzv = vec![0.0; out_c];
    for b in 0..batch {
        let in_base = b * in_c * hw;
        for y in 0..h {
            for x in 0..w {
                let dz_base = b * out_c * hw + y * w + x;
                for (oc, g) in dzv.iter_mut().enumerate() {
                    *g = dz.data[dz_base + oc * hw];
                    db[oc] += *g;
                }
                for dy in 0..3usize {
                    let iy = y + dy;
                    if iy < 1 || iy > h {
                        continue;
                    }
                    let iy = iy - 1;
                    for dx_k in 0..3usize {
                        let ix = x + dx_k;
                        if ix < 1 || ix > w {
                            continue;
                        }
                        let ix = ix - 1;
                        let t = dy * 3 + dx_k;
                        for ic in 0..in_c {
                            let idx = in_base + ic * hw + iy * w + ix;
                            let v = input.data[idx];
                            let base = (t * in_c + ic) * out_c;
                            if v != 0.0 {
                                let dkrow = &mut dkt[base..base + out_c];
                                for (dk_v, g) in dkrow.iter_mut().zip(&dzv) {
                                    *dk_v += v * g;
                                }
                            }
                            let krow = &kt[base..base + out_c];
                            let mut s = 0.0;
                            for (g, k) in dzv.iter().zip(krow) {
                                s += g * k;
                            }
                            dx.data[idx] += s;
                        }
                    }
                }
            }
        }
    }
    let mut dk = Tensor::zeros(kernel.shape);
    for oc in 0..out_c {
        for ic in 0..in_c {
            for t in 0..9 {
                dk.data[(oc * in_c + ic) * 9 + t] = dkt[(t * in_c + ic) * out_c + oc];
            }
        }
    }
    (dk, db, dx)
}

/// 2x2 max pooling; returns output and per-output argmax (linear index
/// into the input plane). Ties take the first position in scan order.
pub fn maxpool2_forward(input: &Tensor) -> (Tensor, Vec<usize>) {
    let [batch, ch, h, w] = input.shape;
    let (oh, ow) = (pooled(h), pooled(w));
    let (wh, ww) = (if h >= 2 { 2 } else { 1 }, if w >= 2 { 2 } else { 1 });
    let mut out = Tensor::zeros([batch, ch, oh, ow]);
    let mut argmax = vec![0usize; out.numel()];
    let mut k = 0usize;
    for b in 0..batch {
        for c in 0..ch {
            let iplane = input.plane(b, c);
            let oplane = out.plane_mut(b, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for dy in 0..wh {
                        for dx in 0..ww {
                            let iy = oy * wh + dy;
                            let ix = ox * ww + dx;
                            let idx = iy * w + ix;
                            let v = iplane[idx];
                            if v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    oplane[oy * ow + ox] = best;
                    argmax[k] = best_idx;
                    k += 1;
                }
            }
        }
    }
    (out, argmax)
}

/// Routes the gradient back to each window's argmax position.
pub fn maxpool2_backward(grad_out: &Tensor, in_shape: [usize; 4], argmax: &[usize]) -> Tensor {
    let mut dx = Tensor::zeros(in_shape);
    let [batch, ch, _, _] = grad_out.shape;
    let mut k = 0usize;
    for b in 0..batch {
        for c in 0..ch {
            let gplane = grad_out.plane(b, c);
            let dplane = dx.plane_mut(b, c);
            for g in gplane {
                dplane[argmax[k]] += g;
                k += 1;
            }
        }
    }
    dx
}

/// Affine map over the flattened per-item input.
pub fn dense_forward(input: &Tensor, weight: &Tensor, bias: &[f64]) -> Tensor {
    let batch = input.shape[0];
    let in_n: usize = input.shape[1] * input.shape[2] * input.shape[3];
    let out_n = weight.shape[0];
    debug_assert_eq!(weight.shape[1], in_n, "dense weight shape mismatch");
    let mut out = Tensor::zeros([batch, out_n, 1, 1]);
    for b in 0..batch {
        let x = &input.data[b * in_n..(b + 1) * in_n];
        let o = &mut out.data[b * out_n..(b + 1) * out_n];
        for (u, ov) in o.iter_mut().enumerate() {
            let row = &weight.data[u * in_n..(u + 1) * in_n];
            let mut acc = bias[u];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            *ov = acc;
        }
    }
    out
}

/// Gradients of the dense layer: (dWeight, dBias, dInput).
pub fn dense_backward(input: &Tensor, weight: &Tensor, dz: &Tensor) -> (Tensor, Vec<f64>, Tensor) {
    let batch = input.shape[0];
    let in_n: usize = input.shape[1] * input.shape[2] * input.shape[3];
    let out_n = weight.shape[0];
    let mut dw = Tensor::zeros(weight.shape);
    let mut db = vec![0.0; out_n];
    let mut dx = Tensor::zeros(input.shape);
    for b in 0..batch {
        let x = &input.data[b * in_n..(b + 1) * in_n];
        let g = &dz.data[b * out_n..(b + 1) * out_n];
        for (u, gv) in g.iter().enumerate() {
            db[u] += gv;
            let wrow = &weight.data[u * in_n..(u + 1) * in_n];
            let dwrow = &mut dw.data[u * in_n..(u + 1) * in_n];
            let dxrow = &mut dx.data[b * in_n..(b + 1) * in_n];
            for i in 0..in_n {
                dwrow[i] += gv * x[i];
                dxrow[i] += gv * wrow[i];
            }
        }
    }
    (dw, db, dx)
}
