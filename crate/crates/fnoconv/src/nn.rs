//! Operator layers `L(u) = sigma(W u + K u + b)` in both kernel
//! parametrizations, adaptive pooling, the linear classifier head,
//! cross-entropy, hand-derived reverse-mode gradients for every parameter,
//! SGD with momentum, and a text checkpoint format.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::conv::{
    conv_spatial, conv_spatial_backward, conv_spectral_backward, conv_spectral_cached,
    SpatialKernel, SpectralConvCache, SpectralKernel,
};
use crate::convert::cnn_to_fno;
use crate::error::{Error, Result};
use crate::resample::{trig_resample, trig_resample_adjoint};
use crate::grids::RealGrid;

// ---------------------------------------------------------------------------
// Activations

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

pub fn gelu(x: f64) -> f64 {
    x * phi(x)
}

pub fn gelu_prime(x: f64) -> f64 {
    phi(x) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Gelu => gelu(x),
            Activation::Identity => x,
        }
    }

    pub fn prime(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_prime(x),
            Activation::Gelu => gelu_prime(x),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Format(format!("unknown activation {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Layers

/// Either kernel parametrization; doubles as gradient storage since spectral
/// gradients in the conjugate-pair convention are Hermitian-structured too.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Spatial(SpatialKernel),
    Spectral(SpectralKernel),
}

impl Kernel {
    pub fn m(&self) -> usize {
        match self {
            Kernel::Spatial(k) => k.m(),
            Kernel::Spectral(k) => k.m(),
        }
    }

    pub fn c_out(&self) -> usize {
        match self {
            Kernel::Spatial(k) => k.c_out(),
            Kernel::Spectral(k) => k.c_out(),
        }
    }

    pub fn c_in(&self) -> usize {
        match self {
            Kernel::Spatial(k) => k.c_in(),
            Kernel::Spectral(k) => k.c_in(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Kernel::Spatial(_) => "spatial",
            Kernel::Spectral(_) => "spectral",
        }
    }

    fn zeros_like(&self) -> Kernel {
        match self {
            Kernel::Spatial(k) => {
                Kernel::Spatial(SpatialKernel::zeros(k.m(), k.c_out(), k.c_in()))
            }
            Kernel::Spectral(k) => {
                Kernel::Spectral(SpectralKernel::zeros(k.m(), k.c_out(), k.c_in()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kernel: Kernel,
    /// Residual channel mixing, `c_out x c_in` row-major; zero disables it.
    pub w_mix: Vec<f64>,
    /// Constant per output channel.
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl LayerParams {
    pub fn c_in(&self) -> usize {
        self.kernel.c_in()
    }

    pub fn c_out(&self) -> usize {
        self.kernel.c_out()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_mix.len() != self.c_out() * self.c_in() || self.bias.len() != self.c_out() {
            return Err(Error::InvalidDimension(
                "layer parameter shapes are inconsistent".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub kernel: Kernel,
    pub w_mix: Vec<f64>,
    pub bias: Vec<f64>,
}

pub struct LayerCache {
    input: RealGrid,
    /// Pre-activation `Psi = W v + K v + b`.
    pre: RealGrid,
    spec: Option<SpectralConvCache>,
}

impl LayerCache {
    pub fn pre(&self) -> &RealGrid {
        &self.pre
    }
}

pub fn layer_forward(p: &LayerParams, v: &RealGrid) -> Result<RealGrid> {
    let (out, _) = layer_forward_cached(p, v)?;
    Ok(out)
}

pub fn layer_forward_cached(p: &LayerParams, v: &RealGrid) -> Result<(RealGrid, LayerCache)> {
    p.validate()?;
    if v.channels() != p.c_in() {
        return Err(Error::ChannelMismatch {
            expected: p.c_in(),
            got: v.channels(),
        });
    }
    let (mut pre, spec) = match &p.kernel {
        Kernel::Spatial(k) => (conv_spatial(k, v)?, None),
        Kernel::Spectral(k) => {
            let (o, c) = conv_spectral_cached(k, v)?;
            (o, Some(c))
        }
    };
    let (c_out, c_in) = (p.c_out(), p.c_in());
    for co in 0..c_out {
        for ci in 0..c_in {
            let w = p.w_mix[co * c_in + ci];
            if w == 0.0 {
                continue;
            }
            let src = v.channel(ci).to_vec();
            for (o, s) in pre.channel_mut(co).iter_mut().zip(&src) {
                *o += w * s;
            }
        }
        let b = p.bias[co];
        for o in pre.channel_mut(co).iter_mut() {
            *o += b;
        }
    }
    let mut out = pre.clone();
    for x in out.data_mut() {
        *x = p.activation.apply(*x);
    }
    Ok((
        out,
        LayerCache {
            input: v.clone(),
            pre,
            spec,
        },
    ))
}

pub fn layer_backward(
    p: &LayerParams,
    cache: &LayerCache,
    upstream: &RealGrid,
) -> Result<(LayerGrads, RealGrid)> {
    let (c_out, c_in) = (p.c_out(), p.c_in());
    if upstream.channels() != c_out || upstream.n() != cache.pre.n() {
        return Err(Error::InvalidDimension(
            "upstream cotangent shape mismatch".into(),
        ));
    }
    // Through the activation.
    let mut d = upstream.clone();
    for (g, x) in d.data_mut().iter_mut().zip(cache.pre.data()) {
        *g *= p.activation.prime(*x);
    }
    // Through the kernel.
    let (dkernel, mut dv) = match (&p.kernel, &cache.spec) {
        (Kernel::Spatial(k), _) => {
            let (dk, dv) = conv_spatial_backward(k, &cache.input, &d)?;
            (Kernel::Spatial(dk), dv)
        }
        (Kernel::Spectral(k), Some(sc)) => {
            let (dk, dv) = conv_spectral_backward(k, sc, &d)?;
            (Kernel::Spectral(dk), dv)
        }
        (Kernel::Spectral(_), None) => unreachable!("spectral cache missing"),
    };
    // Through W v + b.
    let mut dw = vec![0.0; c_out * c_in];
    let mut db = vec![0.0; c_out];
    for co in 0..c_out {
        let dc = d.channel(co);
        db[co] = dc.iter().sum();
        for ci in 0..c_in {
            let w = p.w_mix[co * c_in + ci];
            dw[co * c_in + ci] = dc
                .iter()
                .zip(cache.input.channel(ci))
                .map(|(a, b)| a * b)
                .sum();
            if w != 0.0 {
                let dc = dc.to_vec();
                for (o, g) in dv.channel_mut(ci).iter_mut().zip(&dc) {
                    *o += w * g;
                }
            }
        }
    }
    Ok((
        LayerGrads {
            kernel: dkernel,
            w_mix: dw,
            bias: db,
        },
        dv,
    ))
}

// ---------------------------------------------------------------------------
// Pooling and downsampling

fn pool_window(i: usize, n: usize, s: usize) -> (usize, usize) {
    let lo = i * n / s;
    let hi = ((i + 1) * n + s - 1) / s;
    (lo, hi)
}

/// Adaptive average pooling onto an `s x s` grid: output cell `(i1, i2)` is
/// the mean over rows `[floor(i1 n / s), ceil((i1+1) n / s))` and likewise
/// for columns.
pub fn adaptive_avg_pool(v: &RealGrid, s: usize) -> RealGrid {
    assert!(s >= 1);
    let n = v.n();
    if s > n {
        log::warn!("adaptive pool output {s} exceeds input {n}; cells repeat samples");
    }
    let mut out = RealGrid::zeros(s, v.channels());
    for c in 0..v.channels() {
        for i1 in 0..s {
            let (r0, r1) = pool_window(i1, n, s);
            for i2 in 0..s {
                let (c0, c1) = pool_window(i2, n, s);
                let mut acc = 0.0;
                for r in r0..r1 {
                    for cc in c0..c1 {
                        acc += v.get(c, r, cc);
                    }
                }
                out.set(c, i1, i2, acc / ((r1 - r0) * (c1 - c0)) as f64);
            }
        }
    }
    out
}

pub fn adaptive_avg_pool_backward(g: &RealGrid, n: usize) -> RealGrid {
    let s = g.n();
    let mut out = RealGrid::zeros(n, g.channels());
    for c in 0..g.channels() {
        for i1 in 0..s {
            let (r0, r1) = pool_window(i1, n, s);
            for i2 in 0..s {
                let (c0, c1) = pool_window(i2, n, s);
                let w = g.get(c, i1, i2) / ((r1 - r0) * (c1 - c0)) as f64;
                for r in r0..r1 {
                    for cc in c0..c1 {
                        out.set(c, r, cc, out.get(c, r, cc) + w);
                    }
                }
            }
        }
    }
    out
}

/// Trigonometric striding replacement: resample to `ceil(N/2)`.
pub fn trig_downsample(v: &RealGrid) -> RealGrid {
    trig_resample(v, (v.n() + 1) / 2)
}

pub fn trig_downsample_backward(g: &RealGrid, n: usize) -> RealGrid {
    trig_resample_adjoint(g, n)
}

// ---------------------------------------------------------------------------
// Loss

/// Stable cross-entropy; returns the loss and the logits gradient
/// `softmax(logits) - onehot(label)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

// ---------------------------------------------------------------------------
// Model

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<LayerParams>,
    pub pool_size: usize,
    pub n_classes: usize,
    /// `n_classes x (pool_size^2 * c_last)`, row-major.
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
    /// Layer indices after which trigonometric downsampling is applied.
    pub downsample_after: Vec<usize>,
}

impl Model {
    pub fn c_in(&self) -> usize {
        self.layers[0].c_in()
    }

    pub fn c_last(&self) -> usize {
        self.layers.last().expect("nonempty").c_out()
    }

    pub fn feature_dim(&self) -> usize {
        self.pool_size * self.pool_size * self.c_last()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for p in &self.layers {
            p.validate()?;
        }
        for w in self.layers.windows(2) {
            if w[0].c_out() != w[1].c_in() {
                return Err(Error::ChannelMismatch {
                    expected: w[0].c_out(),
                    got: w[1].c_in(),
                });
            }
        }
        if self.classifier_w.len() != self.n_classes * self.feature_dim()
            || self.classifier_b.len() != self.n_classes
        {
            return Err(Error::InvalidDimension("classifier shape mismatch".into()));
        }
        for &i in &self.downsample_after {
            if i >= self.layers.len() {
                return Err(Error::Config(format!("downsample index {i} out of range")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, v: &RealGrid) -> Result<Vec<f64>> {
        let (logits, _) = self.forward_cached(v)?;
        Ok(logits)
    }

    pub fn forward_cached(&self, v: &RealGrid) -> Result<(Vec<f64>, ModelCache)> {
        let mut cur = v.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, p) in self.layers.iter().enumerate() {
            let (out, cache) = layer_forward_cached(p, &cur)?;
            caches.push(cache);
            cur = if self.downsample_after.contains(&i) {
                trig_downsample(&out)
            } else {
                out
            };
        }
        let final_n = cur.n();
        let pooled = adaptive_avg_pool(&cur, self.pool_size);
        let feat = pooled.data().to_vec();
        let dim = self.feature_dim();
        let mut logits = self.classifier_b.clone();
        for (k, l) in logits.iter_mut().enumerate() {
            let row = &self.classifier_w[k * dim..(k + 1) * dim];
            *l += row.iter().zip(&feat).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok((
            logits,
            ModelCache {
                layer_caches: caches,
                final_n,
                feat,
            },
        ))
    }

    /// Reverse-mode gradients of a scalar loss whose logits cotangent is
    /// `dlogits`.
    pub fn backward(&self, cache: &ModelCache, dlogits: &[f64]) -> Result<ModelGrads> {
        let dim = self.feature_dim();
        let mut dw = vec![0.0; self.n_classes * dim];
        let mut dfeat = vec![0.0; dim];
        for k in 0..self.n_classes {
            let g = dlogits[k];
            for (j, f) in cache.feat.iter().enumerate() {
                dw[k * dim + j] = g * f;
                dfeat[j] += g * self.classifier_w[k * dim + j];
            }
        }
        let s = self.pool_size;
        let mut gpool = RealGrid::zeros(s, self.c_last());
        gpool.data_mut().copy_from_slice(&dfeat);
        let mut gcur = adaptive_avg_pool_backward(&gpool, cache.final_n);
        let mut layer_grads: Vec<Option<LayerGrads>> = vec![None; self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            if self.downsample_after.contains(&i) {
                gcur = trig_downsample_backward(&gcur, cache.layer_caches[i].pre.n());
            }
            let (lg, dv) = layer_backward(&self.layers[i], &cache.layer_caches[i], &gcur)?;
            layer_grads[i] = Some(lg);
            gcur = dv;
        }
        Ok(ModelGrads {
            layers: layer_grads.into_iter().map(|g| g.unwrap()).collect(),
            classifier_w: dw,
            classifier_b: dlogits.to_vec(),
        })
    }
}

pub struct ModelCache {
    layer_caches: Vec<LayerCache>,
    final_n: usize,
    feat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<LayerGrads>,
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(m: &Model) -> Self {
        Self {
            layers: m
                .layers
                .iter()
                .map(|p| LayerGrads {
                    kernel: p.kernel.zeros_like(),
                    w_mix: vec![0.0; p.w_mix.len()],
                    bias: vec![0.0; p.bias.len()],
                })
                .collect(),
            classifier_w: vec![0.0; m.classifier_w.len()],
            classifier_b: vec![0.0; m.classifier_b.len()],
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (&mut a.kernel, &b.kernel) {
                (Kernel::Spatial(x), Kernel::Spatial(y)) => {
                    for (p, q) in x.weights_mut().iter_mut().zip(y.weights()) {
                        *p += q;
                    }
                }
                (Kernel::Spectral(x), Kernel::Spectral(y)) => {
                    for (p, q) in x.coeffs_mut().iter_mut().zip(y.coeffs()) {
                        *p += q;
                    }
                }
                _ => panic!("kernel kind mismatch"),
            }
            for (p, q) in a.w_mix.iter_mut().zip(&b.w_mix) {
                *p += q;
            }
            for (p, q) in a.bias.iter_mut().zip(&b.bias) {
                *p += q;
            }
        }
        for (p, q) in self.classifier_w.iter_mut().zip(&other.classifier_w) {
            *p += q;
        }
        for (p, q) in self.classifier_b.iter_mut().zip(&other.classifier_b) {
            *p += q;
        }
    }

    pub fn scale(&mut self, f: f64) {
        for a in &mut self.layers {
            match &mut a.kernel {
                Kernel::Spatial(x) => x.weights_mut().iter_mut().for_each(|p| *p *= f),
                Kernel::Spectral(x) => x.coeffs_mut().iter_mut().for_each(|p| *p *= f),
            }
            a.w_mix.iter_mut().for_each(|p| *p *= f);
            a.bias.iter_mut().for_each(|p| *p *= f);
        }
        self.classifier_w.iter_mut().for_each(|p| *p *= f);
        self.classifier_b.iter_mut().for_each(|p| *p *= f);
    }
}

// ---------------------------------------------------------------------------
// Optimizer

/// Plain SGD with momentum. Spectral kernels move by a complex AXPY on the
/// conjugate-pair gradient, which preserves Hermitian symmetry exactly.
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    vel: ModelGrads,
}

impl Sgd {
    pub fn new(m: &Model, lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            vel: ModelGrads::zeros_like(m),
        }
    }

    pub fn step(&mut self, m: &mut Model, grads: &ModelGrads) {
        self.vel.scale(self.momentum);
        self.vel.add_assign(grads);
        let lr = self.lr;
        for (p, v) in m.layers.iter_mut().zip(&self.vel.layers) {
            match (&mut p.kernel, &v.kernel) {
                (Kernel::Spatial(x), Kernel::Spatial(y)) => {
                    for (a, b) in x.weights_mut().iter_mut().zip(y.weights()) {
                        *a -= lr * b;
                    }
                }
                (Kernel::Spectral(x), Kernel::Spectral(y)) => {
                    for (a, b) in x.coeffs_mut().iter_mut().zip(y.coeffs()) {
                        *a -= lr * b;
                    }
                }
                _ => panic!("kernel kind mismatch"),
            }
            for (a, b) in p.w_mix.iter_mut().zip(&v.w_mix) {
                *a -= lr * b;
            }
            for (a, b) in p.bias.iter_mut().zip(&v.bias) {
                *a -= lr * b;
            }
        }
        for (a, b) in m.classifier_w.iter_mut().zip(&self.vel.classifier_w) {
            *a -= lr * b;
        }
        for (a, b) in m.classifier_b.iter_mut().zip(&self.vel.classifier_b) {
            *a -= lr * b;
        }
    }
}

// ---------------------------------------------------------------------------
// Initialization

#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub m: usize,
    pub c_out: usize,
    pub spectral: bool,
    pub activation: Activation,
}

fn uniform(rng: &mut ChaCha8Rng, a: f64) -> f64 {
    rng.gen_range(-a..a)
}

/// Build a model with uniform(-1/sqrt(fan_in), ..) spatial initialization.
/// Spectral layers are initialized by converting a freshly initialized
/// spatial kernel, so a spatial and a spectral model drawn from the same seed
/// start as the same operator.
pub fn init_model(
    rng: &mut ChaCha8Rng,
    c_in: usize,
    specs: &[LayerSpec],
    pool_size: usize,
    n_classes: usize,
    downsample_after: Vec<usize>,
) -> Model {
    let mut layers = Vec::with_capacity(specs.len());
    let mut cin = c_in;
    for spec in specs {
        let a = 1.0 / ((cin * spec.m * spec.m) as f64).sqrt();
        let w: Vec<f64> = (0..spec.c_out * cin * spec.m * spec.m)
            .map(|_| uniform(rng, a))
            .collect();
        let spatial = SpatialKernel::from_weights(spec.m, spec.c_out, cin, w).expect("init");
        let kernel = if spec.spectral {
            Kernel::Spectral(cnn_to_fno(&spatial))
        } else {
            Kernel::Spatial(spatial)
        };
        let aw = 1.0 / (cin as f64).sqrt();
        let w_mix = (0..spec.c_out * cin).map(|_| uniform(rng, aw)).collect();
        layers.push(LayerParams {
            kernel,
            w_mix,
            bias: vec![0.0; spec.c_out],
            activation: spec.activation,
        });
        cin = spec.c_out;
    }
    let dim = pool_size * pool_size * cin;
    let ac = 1.0 / (dim as f64).sqrt();
    let classifier_w = (0..n_classes * dim).map(|_| uniform(rng, ac)).collect();
    Model {
        layers,
        pool_size,
        n_classes,
        classifier_w,
        classifier_b: vec![0.0; n_classes],
        downsample_after,
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct PayloadWriter {
    text: String,
    payload: Vec<u8>,
}

impl PayloadWriter {
    fn new() -> Self {
        Self {
            text: String::new(),
            payload: Vec::new(),
        }
    }

    fn line(&mut self, s: &str) {
        self.text.push_str(s);
        self.text.push('\n');
    }

    fn reals(&mut self, vals: &[f64]) {
        for chunk in vals.chunks(8) {
            let mut line = String::new();
            for v in chunk {
                if !line.is_empty() {
                    line.push(' ');
                }
                let tok = format!("{:.16e}", v);
                self.payload.extend_from_slice(tok.as_bytes());
                self.payload.push(b'\n');
                line.push_str(&tok);
            }
            self.line(&line);
        }
    }

    fn complexes(&mut self, vals: &[Complex64]) {
        for chunk in vals.chunks(4) {
            let mut line = String::new();
            for v in chunk {
                if !line.is_empty() {
                    line.push(' ');
                }
                let tok = format!("{:.16e},{:.16e}", v.re, v.im);
                self.payload.extend_from_slice(tok.as_bytes());
                self.payload.push(b'\n');
                line.push_str(&tok);
            }
            self.line(&line);
        }
    }
}

pub fn checkpoint_string(m: &Model) -> String {
    let mut w = PayloadWriter::new();
    w.line("fnoconv checkpoint v1");
    w.line(&format!(
        "layers {} pool {} classes {}",
        m.layers.len(),
        m.pool_size,
        m.n_classes
    ));
    let ds: Vec<String> = m.downsample_after.iter().map(|i| i.to_string()).collect();
    w.line(&format!("downsample {}", ds.join(" ")));
    for (i, p) in m.layers.iter().enumerate() {
        w.line(&format!(
            "layer {} kind={} m={} cin={} cout={} act={}",
            i,
            p.kernel.kind_name(),
            p.kernel.m(),
            p.c_in(),
            p.c_out(),
            p.activation.name()
        ));
        w.line("kernel");
        match &p.kernel {
            Kernel::Spatial(k) => w.reals(k.weights()),
            Kernel::Spectral(k) => w.complexes(k.coeffs()),
        }
        w.line("wmix");
        w.reals(&p.w_mix);
        w.line("bias");
        w.reals(&p.bias);
    }
    w.line(&format!(
        "classifier rows={} cols={}",
        m.n_classes,
        m.feature_dim()
    ));
    w.reals(&m.classifier_w);
    w.line("classifier_bias");
    w.reals(&m.classifier_b);
    let mut out = w.text;
    let _ = writeln!(out, "checksum {:016x}", fnv1a64(&w.payload));
    out
}

pub fn save_checkpoint(m: &Model, path: &std::path::Path) -> Result<()> {
    m.validate()?;
    std::fs::write(path, checkpoint_string(m))?;
    Ok(())
}

struct TokenReader<'a> {
    lines: std::str::Lines<'a>,
    payload: Vec<u8>,
}

impl<'a> TokenReader<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.lines
            .next()
            .ok_or_else(|| Error::Format("unexpected end of checkpoint".into()))
    }

    fn reals(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let line = self.next_line()?;
            for tok in line.split_whitespace() {
                self.payload.extend_from_slice(tok.as_bytes());
                self.payload.push(b'\n');
                out.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad float {tok:?}: {e}")))?,
                );
            }
        }
        if out.len() != count {
            return Err(Error::Format("value count mismatch".into()));
        }
        Ok(out)
    }

    fn complexes(&mut self, count: usize) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let line = self.next_line()?;
            for tok in line.split_whitespace() {
                self.payload.extend_from_slice(tok.as_bytes());
                self.payload.push(b'\n');
                let (re, im) = tok
                    .split_once(',')
                    .ok_or_else(|| Error::Format(format!("bad complex {tok:?}")))?;
                let re = re
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad float {re:?}: {e}")))?;
                let im = im
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad float {im:?}: {e}")))?;
                out.push(Complex64::new(re, im));
            }
        }
        if out.len() != count {
            return Err(Error::Format("value count mismatch".into()));
        }
        Ok(out)
    }
}

fn kv<'a>(field: &'a str, key: &str) -> Result<&'a str> {
    field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| Error::Format(format!("expected {key}=... got {field:?}")))
}

pub fn parse_checkpoint(text: &str) -> Result<Model> {
    let mut r = TokenReader {
        lines: text.lines(),
        payload: Vec::new(),
    };
    if r.next_line()? != "fnoconv checkpoint v1" {
        return Err(Error::Format("not a fnoconv checkpoint".into()));
    }
    let header = r.next_line()?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "layers" || parts[2] != "pool" || parts[4] != "classes" {
        return Err(Error::Format(format!("bad header {header:?}")));
    }
    let n_layers: usize = parts[1].parse().map_err(|_| Error::Format("bad layer count".into()))?;
    let pool_size: usize = parts[3].parse().map_err(|_| Error::Format("bad pool size".into()))?;
    let n_classes: usize = parts[5].parse().map_err(|_| Error::Format("bad class count".into()))?;
    let ds_line = r.next_line()?;
    let ds_body = ds_line
        .strip_prefix("downsample")
        .ok_or_else(|| Error::Format("missing downsample line".into()))?;
    let downsample_after: Vec<usize> = ds_body
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format("bad downsample index".into())))
        .collect::<Result<_>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let line = r.next_line()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 || f[0] != "layer" || f[1] != i.to_string() {
            return Err(Error::Format(format!("bad layer header {line:?}")));
        }
        let kind = kv(f[2], "kind")?;
        let m: usize = kv(f[3], "m")?.parse().map_err(|_| Error::Format("bad m".into()))?;
        let cin: usize = kv(f[4], "cin")?.parse().map_err(|_| Error::Format("bad cin".into()))?;
        let cout: usize = kv(f[5], "cout")?.parse().map_err(|_| Error::Format("bad cout".into()))?;
        let act = Activation::from_name(kv(f[6], "act")?)?;
        if r.next_line()? != "kernel" {
            return Err(Error::Format("missing kernel section".into()));
        }
        let kernel = match kind {
            "spatial" => Kernel::Spatial(SpatialKernel::from_weights(
                m,
                cout,
                cin,
                r.reals(cout * cin * m * m)?,
            )?),
            "spectral" => Kernel::Spectral(SpectralKernel::from_coeffs(
                m,
                cout,
                cin,
                r.complexes(cout * cin * m * m)?,
            )?),
            other => return Err(Error::Format(format!("unknown kernel kind {other:?}"))),
        };
        if r.next_line()? != "wmix" {
            return Err(Error::Format("missing wmix section".into()));
        }
        let w_mix = r.reals(cout * cin)?;
        if r.next_line()? != "bias" {
            return Err(Error::Format("missing bias section".into()));
        }
        let bias = r.reals(cout)?;
        layers.push(LayerParams {
            kernel,
            w_mix,
            bias,
            activation: act,
        });
    }
    let line = r.next_line()?;
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 3 || f[0] != "classifier" {
        return Err(Error::Format(format!("bad classifier header {line:?}")));
    }
    let rows: usize = kv(f[1], "rows")?.parse().map_err(|_| Error::Format("bad rows".into()))?;
    let cols: usize = kv(f[2], "cols")?.parse().map_err(|_| Error::Format("bad cols".into()))?;
    let classifier_w = r.reals(rows * cols)?;
    if r.next_line()? != "classifier_bias" {
        return Err(Error::Format("missing classifier_bias section".into()));
    }
    let classifier_b = r.reals(rows)?;
    let line = r.next_line()?;
    let sum = line
        .strip_prefix("checksum ")
        .ok_or_else(|| Error::Format("missing checksum line".into()))?;
    let stated = u64::from_str_radix(sum.trim(), 16)
        .map_err(|_| Error::Format("bad checksum".into()))?;
    let actual = fnv1a64(&r.payload);
    if stated != actual {
        return Err(Error::Format(format!(
            "checksum mismatch: stated {stated:016x}, payload {actual:016x}"
        )));
    }
    let model = Model {
        layers,
        pool_size,
        n_classes,
        classifier_w,
        classifier_b,
        downsample_after,
    };
    model.validate()?;
    Ok(model)
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    parse_checkpoint(&text)
}
