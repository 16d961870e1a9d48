//! The unrolled learned solver: K soft-thresholding layers whose structure
//! mirrors one plain proximal-gradient iteration each, with the threshold,
//! step size, per-slice transpose kernels, and per-slice aggregation weights
//! trainable per layer. Freshly initialized from a kernel bank, the network
//! reproduces K ISTA iterations exactly; training then moves the parameters
//! away from that starting point.
//!
//! Gradients are derived by hand (reverse mode through the explicit layer
//! recursion) rather than taped: the soft threshold contributes a 0/1 mask on
//! the active set (ties take the zero branch), the transpose-convolution's
//! adjoint is the forward sweep with the same kernel, and the kernel gradient
//! is the outer product of the layer's residual with the back-projected
//! sensitivity, accumulated window by window.

use crate::conv::{
    assemble_volume, conv_forward, conv_forward_slice, extract_slices, sweep_forward,
    sweep_kernel_grad, sweep_transpose, KernelBank, SliceSet, SliceWeights,
};
use crate::error::{Error, Result};
use crate::scene::{ReflectivityMap, RoiGrid, Scatterer, ScattererList};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Per-layer trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Soft-threshold level (non-negative; `lambda / L` at initialization).
    pub theta: f64,
    /// Gradient step scale (positive; `1 / L` at initialization).
    pub step: f64,
    /// Per-slice transpose kernels, same shapes as the forward bank.
    pub g_kernels: Vec<Vec<f64>>,
    /// Per-slice aggregation weights, length `n_c`.
    pub agg_w: Vec<f64>,
}

/// Which parameter groups training may update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainableMask {
    /// Thresholds.
    pub theta: bool,
    /// Step scales.
    pub step: bool,
    /// Transpose kernels.
    pub g_kernels: bool,
    /// Aggregation weights.
    pub agg_w: bool,
    /// The shared forward bank (off by default; the forward model is kept
    /// fixed so the network stays consistent with the physics).
    pub forward_bank: bool,
}

impl Default for TrainableMask {
    fn default() -> Self {
        Self { theta: true, step: true, g_kernels: true, agg_w: true, forward_bank: false }
    }
}

/// The full network: a fixed forward bank plus K layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    /// Forward model shared by all layers.
    pub forward_bank: KernelBank<f64>,
    /// The K layers, applied in order.
    pub layers: Vec<LayerParams>,
    /// Which groups training updates.
    pub trainable: TrainableMask,
}

impl NetParams {
    /// Checks layer count, parameter ranges, and shape agreement with the
    /// forward bank.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if !layer.theta.is_finite() || layer.theta < 0.0 {
                return Err(Error::Contract(format!(
                    "layer {k}: threshold must be finite and non-negative, got {}",
                    layer.theta
                )));
            }
            if !layer.step.is_finite() || layer.step <= 0.0 {
                return Err(Error::Contract(format!(
                    "layer {k}: step must be finite and positive, got {}",
                    layer.step
                )));
            }
            if layer.agg_w.len() != self.forward_bank.n_c {
                return Err(Error::Shape(format!(
                    "layer {k}: {} aggregation weights, expected {}",
                    layer.agg_w.len(),
                    self.forward_bank.n_c
                )));
            }
            if layer.g_kernels.len() != self.forward_bank.n_c {
                return Err(Error::Shape(format!(
                    "layer {k}: {} transpose kernels, expected {}",
                    layer.g_kernels.len(),
                    self.forward_bank.n_c
                )));
            }
            for (i_s, g) in layer.g_kernels.iter().enumerate() {
                let want = self.forward_bank.n_t * self.forward_bank.row_len(i_s);
                if g.len() != want {
                    return Err(Error::Shape(format!(
                        "layer {k} slice {i_s}: kernel has {} entries, expected {want}",
                        g.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// Training hyperparameters and the synthetic-map recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of epochs; each draws a fresh batch.
    pub epochs: usize,
    /// Maps generated per epoch.
    pub maps_per_epoch: usize,
    /// Adam learning rate (zero freezes the parameters).
    pub lr: f64,
    /// Seed for map generation, noise, and ordering.
    pub seed: u64,
    /// Minimum scatterers per map (at least 1).
    pub k_min: usize,
    /// Maximum scatterers per map.
    pub k_max: usize,
    /// Lower amplitude bound.
    pub a_min: f64,
    /// Upper amplitude bound.
    pub a_max: f64,
    /// Measurement noise level; zero keeps the data noiseless.
    pub noise_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            maps_per_epoch: 20,
            lr: 1e-4,
            seed: 0,
            k_min: 1,
            k_max: 3,
            a_min: 0.5,
            a_max: 1.5,
            noise_std: 0.0,
        }
    }
}

impl TrainConfig {
    /// Checks counts and ranges.
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.maps_per_epoch < 1 {
            return Err(Error::Contract("epochs and maps_per_epoch must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Contract(format!(
                "learning rate must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::Contract(format!(
                "scatterer count range [{}, {}] is invalid",
                self.k_min, self.k_max
            )));
        }
        if !self.a_min.is_finite() || !self.a_max.is_finite() || self.a_min > self.a_max {
            return Err(Error::Contract(format!(
                "amplitude range [{}, {}] is invalid",
                self.a_min, self.a_max
            )));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::Contract(format!(
                "noise level must be finite and non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Builds the K-layer network that replicates plain proximal-gradient
/// iterations: every layer gets `theta = lambda0 / l0`, `step = 1 / l0`, a
/// copy of the forward kernels as its transpose kernels, and the reciprocity
/// weights as aggregation weights.
pub fn init_from_model(
    bank: &KernelBank<f64>,
    lambda0: f64,
    l0: f64,
    k: usize,
) -> Result<NetParams> {
    if k < 1 {
        return Err(Error::Contract("network needs at least one layer".into()));
    }
    if !(l0.is_finite() && l0 > 0.0) {
        return Err(Error::Contract(format!("step constant must be finite and positive, got {l0}")));
    }
    if !lambda0.is_finite() || lambda0 < 0.0 {
        return Err(Error::Contract(format!(
            "penalty must be finite and non-negative, got {lambda0}"
        )));
    }
    let layer = LayerParams {
        theta: lambda0 / l0,
        step: 1.0 / l0,
        g_kernels: bank.kernels.clone(),
        agg_w: SliceWeights::reciprocity(bank.n_c).w,
    };
    Ok(NetParams {
        forward_bank: bank.clone(),
        layers: vec![layer; k],
        trainable: TrainableMask::default(),
    })
}

fn shrink(v: f64, theta: f64) -> f64 {
    crate::solver::soft_threshold_scalar(v, theta)
}

fn check_measurements(bank: &KernelBank<f64>, y: &SliceSet<f64>) -> Result<()> {
    if y.n_t != bank.n_t || y.n_c != bank.n_c || y.slices.len() != bank.n_c {
        return Err(Error::Shape(format!(
            "measurements ({} slices, n_t = {}) do not match bank (n_c = {}, n_t = {})",
            y.slices.len(),
            y.n_t,
            bank.n_c,
            bank.n_t
        )));
    }
    Ok(())
}

/// One layer: back-project the per-slice residuals through the layer's
/// transpose kernels, aggregate with the layer weights, take a scaled
/// gradient-style step, and soft-threshold.
pub fn lista_layer(
    x_k: &[f64],
    y: &SliceSet<f64>,
    layer: &LayerParams,
    bank: &KernelBank<f64>,
) -> Result<Vec<f64>> {
    check_measurements(bank, y)?;
    let n = bank.n_x * bank.n_z;
    if x_k.len() != n {
        return Err(Error::Shape(format!("iterate has {} entries, expected {n}", x_k.len())));
    }
    let mut b = vec![0.0; n];
    for i_s in 0..bank.n_c {
        let f = conv_forward_slice(bank, x_k, i_s)?;
        let r: Vec<f64> = y.slices[i_s].iter().zip(&f).map(|(a, c)| a - c).collect();
        let t = conv_transpose_slice_with(&layer.g_kernels[i_s], bank, &r, i_s)?;
        for (bi, &ti) in b.iter_mut().zip(&t) {
            *bi += layer.agg_w[i_s] * ti;
        }
    }
    Ok(x_k
        .iter()
        .zip(&b)
        .map(|(&xi, &bi)| shrink(xi + layer.step * bi, layer.theta))
        .collect())
}

/// Transposed sweep with an arbitrary kernel matrix of the bank's shape for
/// slice `i_s` (the layers' transpose kernels drift away from the bank during
/// training).
fn conv_transpose_slice_with(
    kernel: &[f64],
    bank: &KernelBank<f64>,
    r: &[f64],
    i_s: usize,
) -> Result<Vec<f64>> {
    let n_rp = bank.n_cols(i_s);
    if r.len() != bank.n_t * n_rp {
        return Err(Error::Shape(format!(
            "slice {i_s} residual has {} entries, expected {}",
            r.len(),
            bank.n_t * n_rp
        )));
    }
    let mut acc = vec![0.0; bank.n_x * bank.n_z];
    sweep_transpose(kernel, bank.n_t, bank.row_len(i_s), bank.n_z, n_rp, r, 1.0, &mut acc);
    Ok(acc)
}

/// Runs the whole network from `x0 = 0`.
pub fn lista_forward(net: &NetParams, y: &SliceSet<f64>) -> Result<Vec<f64>> {
    net.validate()?;
    check_measurements(&net.forward_bank, y)?;
    let mut x = vec![0.0; net.forward_bank.n_x * net.forward_bank.n_z];
    for layer in &net.layers {
        x = lista_layer(&x, y, layer, &net.forward_bank)?;
    }
    Ok(x)
}

/// Mean squared error over pixels.
pub fn loss_mse(x_hat: &[f64], x_true: &[f64]) -> Result<f64> {
    if x_hat.len() != x_true.len() || x_hat.is_empty() {
        return Err(Error::Shape(format!(
            "loss operands have lengths {} and {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let n = x_hat.len() as f64;
    Ok(x_hat.iter().zip(x_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// Gradients for one layer's parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    /// d loss / d theta.
    pub theta: f64,
    /// d loss / d step.
    pub step: f64,
    /// d loss / d g_kernels, same shapes as the kernels.
    pub g_kernels: Vec<Vec<f64>>,
    /// d loss / d agg_w.
    pub agg_w: Vec<f64>,
}

/// Full gradient of the loss with respect to every trainable group, plus the
/// loss value the forward pass realized.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Per-layer gradients.
    pub layers: Vec<LayerGrads>,
    /// Forward-bank gradients, present only when that group is trainable.
    pub forward_bank: Option<Vec<Vec<f64>>>,
    /// Realized mean-squared-error loss.
    pub loss: f64,
}

struct LayerTape {
    x_in: Vec<f64>,
    residuals: Vec<Vec<f64>>,
    backprojections: Vec<Vec<f64>>,
    aggregate: Vec<f64>,
    pre: Vec<f64>,
}

/// Exact reverse-mode gradients of `loss_mse(lista_forward(net, y), x_true)`.
///
/// The soft threshold differentiates to an indicator of the active set
/// (`|pre| > theta`; ties take the zero branch, matching the forward pass),
/// its theta-derivative is `-sign(pre)` on that set, and each transposed
/// convolution back-propagates through the forward sweep with the same
/// kernel. Aborts with the layer index if an intermediate goes non-finite.
pub fn backward(net: &NetParams, y: &SliceSet<f64>, x_true: &[f64]) -> Result<Gradients> {
    net.validate()?;
    check_measurements(&net.forward_bank, y)?;
    let bank = &net.forward_bank;
    let n = bank.n_x * bank.n_z;
    if x_true.len() != n {
        return Err(Error::Shape(format!(
            "target map has {} entries, expected {n}",
            x_true.len()
        )));
    }

    // Forward pass, taping what the backward pass needs.
    let mut tapes = Vec::with_capacity(net.layers.len());
    let mut x = vec![0.0; n];
    for (k, layer) in net.layers.iter().enumerate() {
        let mut residuals = Vec::with_capacity(bank.n_c);
        let mut backprojections = Vec::with_capacity(bank.n_c);
        let mut aggregate = vec![0.0; n];
        for i_s in 0..bank.n_c {
            let f = conv_forward_slice(bank, &x, i_s)?;
            let r: Vec<f64> = y.slices[i_s].iter().zip(&f).map(|(a, c)| a - c).collect();
            let t = conv_transpose_slice_with(&layer.g_kernels[i_s], bank, &r, i_s)?;
            for (bi, &ti) in aggregate.iter_mut().zip(&t) {
                *bi += layer.agg_w[i_s] * ti;
            }
            residuals.push(r);
            backprojections.push(t);
        }
        let pre: Vec<f64> =
            x.iter().zip(&aggregate).map(|(&xi, &bi)| xi + layer.step * bi).collect();
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "non-finite pre-activation in layer {k}"
            )));
        }
        let x_out: Vec<f64> = pre.iter().map(|&v| shrink(v, layer.theta)).collect();
        tapes.push(LayerTape { x_in: x, residuals, backprojections, aggregate, pre });
        x = x_out;
    }

    let loss = loss_mse(&x, x_true)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("non-finite loss".into()));
    }

    // dL/dx after the last layer.
    let scale = 2.0 / n as f64;
    let mut g_x: Vec<f64> = x.iter().zip(x_true).map(|(a, b)| scale * (a - b)).collect();

    let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(net.layers.len());
    let mut bank_grads: Option<Vec<Vec<f64>>> = if net.trainable.forward_bank {
        Some(bank.kernels.iter().map(|kk| vec![0.0; kk.len()]).collect())
    } else {
        None
    };

    for (k, layer) in net.layers.iter().enumerate().rev() {
        let tape = &tapes[k];
        // Through the shrink: sensitivity on the active set, theta gradient.
        let mut g_theta = 0.0;
        let s: Vec<f64> = tape
            .pre
            .iter()
            .zip(&g_x)
            .map(|(&p, &g)| {
                if p.abs() > layer.theta {
                    g_theta -= p.signum() * g;
                    g
                } else {
                    0.0
                }
            })
            .collect();
        let g_step: f64 = s.iter().zip(&tape.aggregate).map(|(a, b)| a * b).sum();

        let mut g_agg = vec![0.0; bank.n_c];
        let mut g_kernels: Vec<Vec<f64>> = Vec::with_capacity(bank.n_c);
        // dL/dx_in starts with the identity path through pre = x_in + step*b.
        let mut g_x_in = s.clone();
        for i_s in 0..bank.n_c {
            g_agg[i_s] =
                layer.step * s.iter().zip(&tape.backprojections[i_s]).map(|(a, b)| a * b).sum::<f64>();
            // Sensitivity flowing into this slice's back-projection.
            let c = layer.step * layer.agg_w[i_s];
            let u: Vec<f64> = s.iter().map(|&v| c * v).collect();
            let n_rp = bank.n_cols(i_s);
            let row_len = bank.row_len(i_s);
            // t = G^T r  =>  dL/dr = G u; dL/dG accumulates r (x) u windows.
            let mut g_r = vec![0.0; bank.n_t * n_rp];
            sweep_forward(&layer.g_kernels[i_s], bank.n_t, row_len, bank.n_z, n_rp, &u, &mut g_r);
            let mut g_kernel = vec![0.0; bank.n_t * row_len];
            sweep_kernel_grad(
                &mut g_kernel,
                bank.n_t,
                row_len,
                bank.n_z,
                n_rp,
                &tape.residuals[i_s],
                &u,
                1.0,
            );
            // r = y - B x_in  =>  dL/dx_in -= B^T (dL/dr); the forward bank
            // gradient (optional) collects -(dL/dr) (x) x_in windows.
            sweep_transpose(
                &bank.kernels[i_s],
                bank.n_t,
                row_len,
                bank.n_z,
                n_rp,
                &g_r,
                -1.0,
                &mut g_x_in,
            );
            if let Some(bg) = bank_grads.as_mut() {
                sweep_kernel_grad(
                    &mut bg[i_s],
                    bank.n_t,
                    row_len,
                    bank.n_z,
                    n_rp,
                    &g_r,
                    &tape.x_in,
                    -1.0,
                );
            }
            g_kernels.push(g_kernel);
        }
        if g_x_in.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "non-finite gradient in layer {k}"
            )));
        }
        layer_grads.push(LayerGrads { theta: g_theta, step: g_step, g_kernels, agg_w: g_agg });
        g_x = g_x_in;
    }
    layer_grads.reverse();
    Ok(Gradients { layers: layer_grads, forward_bank: bank_grads, loss })
}

/// First and second Adam moments for one layer.
#[derive(Debug, Clone, PartialEq)]
struct LayerMoments {
    m_theta: f64,
    v_theta: f64,
    m_step: f64,
    v_step: f64,
    m_g: Vec<Vec<f64>>,
    v_g: Vec<Vec<f64>>,
    m_agg: Vec<f64>,
    v_agg: Vec<f64>,
}

/// First and second Adam moments for the shared kernel bank, one pair of
/// per-slice coefficient vectors.
type BankMoments = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Adam optimizer state mirroring a network's parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    t: u64,
    layers: Vec<LayerMoments>,
    forward_bank: Option<BankMoments>,
}

/// Adam moment decay and stabilizer constants.
pub const ADAM_BETA1: f64 = 0.9;
/// Second-moment decay.
pub const ADAM_BETA2: f64 = 0.999;
/// Denominator stabilizer.
pub const ADAM_EPS: f64 = 1e-8;
/// Positive floor for the step scale after an update.
pub const MIN_STEP: f64 = 1e-12;

impl AdamState {
    /// Zero moments shaped like the network's trainable groups.
    pub fn new(net: &NetParams) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerMoments {
                m_theta: 0.0,
                v_theta: 0.0,
                m_step: 0.0,
                v_step: 0.0,
                m_g: l.g_kernels.iter().map(|g| vec![0.0; g.len()]).collect(),
                v_g: l.g_kernels.iter().map(|g| vec![0.0; g.len()]).collect(),
                m_agg: vec![0.0; l.agg_w.len()],
                v_agg: vec![0.0; l.agg_w.len()],
            })
            .collect();
        let forward_bank = if net.trainable.forward_bank {
            Some((
                net.forward_bank.kernels.iter().map(|g| vec![0.0; g.len()]).collect(),
                net.forward_bank.kernels.iter().map(|g| vec![0.0; g.len()]).collect(),
            ))
        } else {
            None
        };
        Self { t: 0, layers, forward_bank }
    }
}

fn adam_update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, t: u64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / (1.0 - ADAM_BETA1.powi(t as i32));
    let v_hat = *v / (1.0 - ADAM_BETA2.powi(t as i32));
    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
}

/// One Adam step over every trainable group; bias-corrected, with `theta`
/// clamped to stay non-negative and `step` to stay positive afterwards.
/// Groups disabled in the mask keep their parameters and moments untouched.
pub fn adam_step(
    net: &mut NetParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.layers.len() != net.layers.len() {
        return Err(Error::Shape("gradient/state layer count mismatch".into()));
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::Contract(format!(
            "learning rate must be finite and non-negative, got {lr}"
        )));
    }
    state.t += 1;
    let t = state.t;
    let mask = net.trainable;
    for ((layer, g), mom) in net.layers.iter_mut().zip(&grads.layers).zip(state.layers.iter_mut())
    {
        if mask.theta {
            adam_update(&mut layer.theta, g.theta, &mut mom.m_theta, &mut mom.v_theta, lr, t);
            layer.theta = layer.theta.max(0.0);
        }
        if mask.step {
            adam_update(&mut layer.step, g.step, &mut mom.m_step, &mut mom.v_step, lr, t);
            layer.step = layer.step.max(MIN_STEP);
        }
        if mask.g_kernels {
            for ((pk, gk), (mk, vk)) in layer
                .g_kernels
                .iter_mut()
                .zip(&g.g_kernels)
                .zip(mom.m_g.iter_mut().zip(mom.v_g.iter_mut()))
            {
                for ((p, &gg), (m, v)) in
                    pk.iter_mut().zip(gk).zip(mk.iter_mut().zip(vk.iter_mut()))
                {
                    adam_update(p, gg, m, v, lr, t);
                }
            }
        }
        if mask.agg_w {
            for ((p, &gg), (m, v)) in layer
                .agg_w
                .iter_mut()
                .zip(&g.agg_w)
                .zip(mom.m_agg.iter_mut().zip(mom.v_agg.iter_mut()))
            {
                adam_update(p, gg, m, v, lr, t);
            }
        }
    }
    if mask.forward_bank {
        if let (Some(bg), Some((mb, vb))) = (&grads.forward_bank, state.forward_bank.as_mut()) {
            for ((pk, gk), (mk, vk)) in net
                .forward_bank
                .kernels
                .iter_mut()
                .zip(bg)
                .zip(mb.iter_mut().zip(vb.iter_mut()))
            {
                for ((p, &gg), (m, v)) in
                    pk.iter_mut().zip(gk).zip(mk.iter_mut().zip(vk.iter_mut()))
                {
                    adam_update(p, gg, m, v, lr, t);
                }
            }
        }
    }
    Ok(())
}

/// Draws a sparse reflectivity map: a uniform scatterer count in
/// `[k_min, k_max]`, distinct uniform pixels, amplitudes uniform in
/// `[a_min, a_max]`.
pub fn random_map(
    rng: &mut ChaCha8Rng,
    roi: &RoiGrid,
    cfg: &TrainConfig,
) -> Result<(ReflectivityMap, ScattererList)> {
    cfg.validate()?;
    roi.validate()?;
    let pixels = roi.n_pixels();
    if cfg.k_max > pixels {
        return Err(Error::Contract(format!(
            "k_max = {} exceeds the {pixels}-pixel grid",
            cfg.k_max
        )));
    }
    let k = rng.random_range(cfg.k_min..=cfg.k_max);
    let mut map = ReflectivityMap::zeros(roi);
    let mut entries = Vec::with_capacity(k);
    while entries.len() < k {
        let i_x = rng.random_range(0..roi.n_x);
        let i_z = rng.random_range(0..roi.n_z);
        if map.get(i_z, i_x) != 0.0 {
            continue;
        }
        let a = rng.random_range(cfg.a_min..=cfg.a_max);
        map.set(i_z, i_x, a);
        entries.push(Scatterer { i_x, i_z, a });
    }
    Ok((map, ScattererList { entries }))
}

/// Noiseless or noisy measurements for a map: forward model, then (when
/// `noise_std > 0`) white Gaussian noise added per volume entry before
/// folding back to slices, mirroring how acquisition noise enters real data.
pub fn synth_measurements(
    bank: &KernelBank<f64>,
    x: &[f64],
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SliceSet<f64>> {
    let y = conv_forward(bank, x)?;
    if noise_std == 0.0 {
        return Ok(y);
    }
    let normal = Normal::new(0.0, noise_std)
        .map_err(|e| Error::Contract(format!("invalid noise level: {e}")))?;
    let mut v = assemble_volume(&y);
    for e in v.data.iter_mut() {
        *e += normal.sample(rng);
    }
    extract_slices(&v)
}

/// Generates `count` (map, measurements) pairs from the config's recipe —
/// the shared path for training batches and held-out evaluation sets.
pub fn generate_dataset(
    bank: &KernelBank<f64>,
    cfg: &TrainConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<(Vec<f64>, SliceSet<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (map, _) = random_map(&mut rng, &bank.roi, cfg)?;
        let y = synth_measurements(bank, &map.data, cfg.noise_std, &mut rng)?;
        out.push((map.data, y));
    }
    Ok(out)
}

/// Streaming training: per epoch, draw `maps_per_epoch` fresh maps and run
/// one backward pass plus one Adam update per sample, in order. Returns the
/// per-epoch mean loss (measured at the parameters each sample saw).
/// Deterministic for a fixed seed; the loop is fully sequential.
pub fn train(net: &mut NetParams, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    net.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(net);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut sum = 0.0;
        for _ in 0..cfg.maps_per_epoch {
            let (map, _) = random_map(&mut rng, &net.forward_bank.roi, cfg)?;
            let y = synth_measurements(&net.forward_bank, &map.data, cfg.noise_std, &mut rng)?;
            let grads = backward(net, &y, &map.data)?;
            adam_step(net, &grads, &mut adam, cfg.lr)?;
            sum += grads.loss;
        }
        trace.push(sum / cfg.maps_per_epoch as f64);
    }
    Ok(trace)
}

/// Mean loss of the network over a dataset, without touching parameters.
pub fn eval_mse(net: &NetParams, dataset: &[(Vec<f64>, SliceSet<f64>)]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    let mut sum = 0.0;
    for (x_true, y) in dataset {
        let x_hat = lista_forward(net, y)?;
        sum += loss_mse(&x_hat, x_true)?;
    }
    Ok(sum / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::build_kernel_bank;
    use crate::scene::AcquisitionConfig;
    use crate::solver::{default_lambda, ista, lipschitz_estimate, LassoProblem};

    fn desk(n_c: usize, n: usize) -> KernelBank<f64> {
        build_kernel_bank(&AcquisitionConfig::desk(n_c), &RoiGrid::desk(n, n)).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_y(rng: &mut ChaCha8Rng, bank: &KernelBank<f64>) -> SliceSet<f64> {
        let mut y = SliceSet::zeros(bank.n_t, bank.n_c);
        for s in y.slices.iter_mut() {
            *s = random_vec(rng, s.len());
        }
        y
    }

    #[test]
    fn untrained_network_reproduces_plain_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bank = desk(3, 3);
        let weights = SliceWeights::reciprocity(3);
        let x_star = random_vec(&mut rng, 9);
        let y = conv_forward(&bank, &x_star).unwrap();
        let l0 = 1.05 * lipschitz_estimate(&bank, &weights, 500, 1e-9, 0).unwrap().l;
        let lambda0 = default_lambda(&bank, &y, &weights, 0.01).unwrap();
        for k in [1usize, 2, 5] {
            let net = init_from_model(&bank, lambda0, l0, k).unwrap();
            let x_net = lista_forward(&net, &y).unwrap();
            let prob =
                LassoProblem { bank: &bank, y: &y, weights: weights.clone(), lambda: lambda0 };
            let its = ista(&prob, &[0.0; 9], k, l0).unwrap();
            let x_ista = &its[k];
            let num = x_net
                .iter()
                .zip(x_ista)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = x_ista.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-300);
            assert!(num / den <= 1e-10, "K = {k}: {}", num / den);
        }
    }

    #[test]
    fn zero_aggregation_weights_reduce_to_pure_shrinkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bank = desk(2, 2);
        let y = random_y(&mut rng, &bank);
        let layer = LayerParams {
            theta: 0.3,
            step: 0.7,
            g_kernels: bank.kernels.clone(),
            agg_w: vec![0.0; 2],
        };
        let x_k = random_vec(&mut rng, 4);
        let out = lista_layer(&x_k, &y, &layer, &bank).unwrap();
        for (o, &xi) in out.iter().zip(&x_k) {
            assert_eq!(*o, shrink(xi, 0.3));
        }
    }

    #[test]
    fn exact_iterate_with_zero_threshold_is_a_bitwise_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bank = desk(3, 2);
        let x_star = random_vec(&mut rng, 4);
        let y = conv_forward(&bank, &x_star).unwrap();
        let layer = LayerParams {
            theta: 0.0,
            step: 0.4,
            g_kernels: bank.kernels.clone(),
            agg_w: SliceWeights::reciprocity(3).w,
        };
        let out = lista_layer(&x_star, &y, &layer, &bank).unwrap();
        for (o, x) in out.iter().zip(&x_star) {
            assert_eq!(o.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn zero_measurements_give_a_zero_output_and_zero_gradients() {
        let bank = desk(3, 2);
        let net = init_from_model(&bank, 0.05, 2.0, 3).unwrap();
        let y = SliceSet::zeros(bank.n_t, 3);
        let x_hat = lista_forward(&net, &y).unwrap();
        assert!(x_hat.iter().all(|&v| v == 0.0));
        // Every residual is zero, so every kernel gradient vanishes exactly.
        let x_true = vec![0.25; 4];
        let grads = backward(&net, &y, &x_true).unwrap();
        assert_eq!(grads.loss, 0.25 * 0.25);
        for lg in &grads.layers {
            for g in &lg.g_kernels {
                assert!(g.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn forward_is_deterministic_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bank = desk(3, 3);
        let net = init_from_model(&bank, 0.02, 3.0, 4).unwrap();
        let y = random_y(&mut rng, &bank);
        let a = lista_forward(&net, &y).unwrap();
        let b = lista_forward(&net, &y).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), z.to_bits());
        }
    }

    #[test]
    fn positive_threshold_produces_exact_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let bank = desk(3, 3);
        let weights = SliceWeights::reciprocity(3);
        let y = random_y(&mut rng, &bank);
        // A threshold at half the back-projection's sup-norm (scaled by the
        // shared step) zeroes most pixels but keeps the strongest ones.
        let l0 = 1.05 * lipschitz_estimate(&bank, &weights, 500, 1e-9, 0).unwrap().l;
        let lambda0 = default_lambda(&bank, &y, &weights, 0.5).unwrap();
        let net = init_from_model(&bank, lambda0, l0, 2).unwrap();
        let x_hat = lista_forward(&net, &y).unwrap();
        assert!(
            x_hat.contains(&0.0),
            "a strong threshold should zero out some pixels"
        );
        assert!(
            x_hat.iter().any(|&v| v != 0.0),
            "the strongest pixels should survive the threshold"
        );
    }

    #[test]
    fn loss_basics() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        let z = vec![0.0; 3];
        let expected = (1.0 + 4.0 + 9.0) / 3.0;
        assert_eq!(loss_mse(&z, &a).unwrap(), expected);
        assert_eq!(loss_mse(&a, &z).unwrap(), expected);
        assert!(loss_mse(&a, &z[..2]).is_err());
        assert!(loss_mse(&[], &[]).is_err());
    }

    /// Central finite difference of the loss with respect to one scalar
    /// parameter, mutated through `set`.
    fn fd_grad(
        net: &NetParams,
        y: &SliceSet<f64>,
        x_true: &[f64],
        set: &dyn Fn(&mut NetParams, f64),
        base: f64,
        h: f64,
    ) -> (f64, bool) {
        let eval = |v: f64| -> (f64, Vec<u64>) {
            let mut n = net.clone();
            set(&mut n, v);
            // Track the activation pattern so kink crossings can be skipped.
            let mut pattern = Vec::new();
            let mut x = vec![0.0; n.forward_bank.n_x * n.forward_bank.n_z];
            for layer in &n.layers {
                let mut b = vec![0.0; x.len()];
                for i_s in 0..n.forward_bank.n_c {
                    let f = conv_forward_slice(&n.forward_bank, &x, i_s).unwrap();
                    let r: Vec<f64> =
                        y.slices[i_s].iter().zip(&f).map(|(a, c)| a - c).collect();
                    let t =
                        conv_transpose_slice_with(&layer.g_kernels[i_s], &n.forward_bank, &r, i_s)
                            .unwrap();
                    for (bi, &ti) in b.iter_mut().zip(&t) {
                        *bi += layer.agg_w[i_s] * ti;
                    }
                }
                let mut bits = 0u64;
                let mut word = Vec::new();
                for (i, (&xi, &bi)) in x.iter().zip(&b).enumerate() {
                    let pre = xi + layer.step * bi;
                    if pre.abs() > layer.theta {
                        bits |= 1 << (i % 64);
                    }
                    if i % 64 == 63 {
                        word.push(bits);
                        bits = 0;
                    }
                }
                word.push(bits);
                pattern.extend(word);
                x = x
                    .iter()
                    .zip(&b)
                    .map(|(&xi, &bi)| shrink(xi + layer.step * bi, layer.theta))
                    .collect();
            }
            (loss_mse(&x, x_true).unwrap(), pattern)
        };
        let (lp, pp) = eval(base + h);
        let (lm, pm) = eval(base - h);
        ((lp - lm) / (2.0 * h), pp == pm)
    }

    fn assert_grad_close(analytic: f64, numeric: f64, what: &str) {
        let diff = (analytic - numeric).abs();
        // Central differences at h = 1e-6 on losses of this scale carry
        // ~1e-11 of cancellation noise; below 1e-10 the oracle itself is the
        // unreliable side, so only larger disagreements are judged.
        if diff <= 1e-10 {
            return;
        }
        let denom = numeric.abs().max(analytic.abs());
        assert!(
            diff / denom <= 1e-4,
            "{what}: analytic {analytic:.12e} vs numeric {numeric:.12e}"
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let bank = desk(4, 3);
        let weights = SliceWeights::reciprocity(4);
        let x_star = random_vec(&mut rng, 9);
        let y = conv_forward(&bank, &x_star).unwrap();
        let l0 = 1.05 * lipschitz_estimate(&bank, &weights, 500, 1e-9, 0).unwrap().l;
        let lambda0 = default_lambda(&bank, &y, &weights, 0.05).unwrap();
        let mut net = init_from_model(&bank, lambda0, l0, 2).unwrap();
        // Perturb the layers so they are not identical copies.
        for (k, layer) in net.layers.iter_mut().enumerate() {
            layer.theta *= 1.0 + 0.3 * k as f64;
            layer.step *= 1.0 - 0.2 * k as f64;
            for w in layer.agg_w.iter_mut() {
                *w += rng.random_range(-0.2..0.2);
            }
            for g in layer.g_kernels.iter_mut() {
                for v in g.iter_mut() {
                    *v *= 1.0 + rng.random_range(-0.05..0.05);
                }
            }
        }
        let x_true = random_vec(&mut rng, 9);
        let grads = backward(&net, &y, &x_true).unwrap();
        let h = 1e-6;
        let mut checked = 0usize;
        let mut skipped = 0usize;

        for k in 0..net.layers.len() {
            let base_theta = net.layers[k].theta;
            let (num, clean) = fd_grad(
                &net,
                &y,
                &x_true,
                &|n, v| n.layers[k].theta = v,
                base_theta,
                h,
            );
            if clean {
                assert_grad_close(grads.layers[k].theta, num, &format!("theta[{k}]"));
                checked += 1;
            } else {
                skipped += 1;
            }

            let base_step = net.layers[k].step;
            let (num, clean) = fd_grad(
                &net,
                &y,
                &x_true,
                &|n, v| n.layers[k].step = v,
                base_step,
                h * base_step.abs().max(1e-3),
            );
            if clean {
                assert_grad_close(grads.layers[k].step, num, &format!("step[{k}]"));
                checked += 1;
            } else {
                skipped += 1;
            }

            for i_s in 0..bank.n_c {
                let base = net.layers[k].agg_w[i_s];
                let (num, clean) = fd_grad(
                    &net,
                    &y,
                    &x_true,
                    &|n, v| n.layers[k].agg_w[i_s] = v,
                    base,
                    h,
                );
                if clean {
                    assert_grad_close(
                        grads.layers[k].agg_w[i_s],
                        num,
                        &format!("agg_w[{k}][{i_s}]"),
                    );
                    checked += 1;
                } else {
                    skipped += 1;
                }

                // A strided sample of kernel coordinates.
                let len = net.layers[k].g_kernels[i_s].len();
                let mut idx = (k * 131 + i_s * 17) % len.max(1);
                for _ in 0..12 {
                    let base = net.layers[k].g_kernels[i_s][idx];
                    let (num, clean) = fd_grad(
                        &net,
                        &y,
                        &x_true,
                        &|n, v| n.layers[k].g_kernels[i_s][idx] = v,
                        base,
                        h,
                    );
                    if clean {
                        assert_grad_close(
                            grads.layers[k].g_kernels[i_s][idx],
                            num,
                            &format!("g_kernels[{k}][{i_s}][{idx}]"),
                        );
                        checked += 1;
                    } else {
                        skipped += 1;
                    }
                    idx = (idx + len / 12 + 1) % len;
                }
            }
        }
        assert!(checked >= 40, "only {checked} coordinates checked ({skipped} kink-skipped)");
        assert!(skipped <= checked / 10, "{skipped} kink skips vs {checked} checks");
    }

    #[test]
    fn forward_bank_gradients_match_finite_differences_when_enabled() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let bank = desk(3, 2);
        let x_star = random_vec(&mut rng, 4);
        let y = conv_forward(&bank, &x_star).unwrap();
        let mut net = init_from_model(&bank, 0.02, 4000.0, 2).unwrap();
        net.trainable.forward_bank = true;
        let x_true = random_vec(&mut rng, 4);
        let grads = backward(&net, &y, &x_true).unwrap();
        let bg = grads.forward_bank.as_ref().expect("bank gradients requested");
        let h = 1e-6;
        let mut checked = 0usize;
        for (i_s, bg_s) in bg.iter().enumerate() {
            let len = net.forward_bank.kernels[i_s].len();
            let mut idx = (7 * i_s + 3) % len;
            for _ in 0..8 {
                let base = net.forward_bank.kernels[i_s][idx];
                let eval = |v: f64| -> f64 {
                    let mut n = net.clone();
                    n.forward_bank.kernels[i_s][idx] = v;
                    loss_mse(&lista_forward(&n, &y).unwrap(), &x_true).unwrap()
                };
                let num = (eval(base + h) - eval(base - h)) / (2.0 * h);
                assert_grad_close(bg_s[idx], num, &format!("bank[{i_s}][{idx}]"));
                checked += 1;
                idx = (idx + len / 8 + 1) % len;
            }
        }
        assert!(checked >= 24);
        // With the flag off, no bank gradients are produced.
        net.trainable.forward_bank = false;
        assert!(backward(&net, &y, &x_true).unwrap().forward_bank.is_none());
    }

    #[test]
    fn adam_first_step_matches_the_hand_computation() {
        let bank = desk(2, 2);
        let mut net = init_from_model(&bank, 0.5, 1.0, 1).unwrap();
        let theta0 = net.layers[0].theta;
        let mut grads = backward(
            &net,
            &SliceSet::zeros(bank.n_t, 2),
            &[0.0; 4],
        )
        .unwrap();
        // Force a unit gradient on theta only.
        for lg in grads.layers.iter_mut() {
            lg.theta = 1.0;
            lg.step = 0.0;
            lg.agg_w.iter_mut().for_each(|v| *v = 0.0);
            lg.g_kernels.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
        }
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state, 1e-4).unwrap();
        // First step: m_hat = g, v_hat = g^2, so the update is
        // lr * 1 / (1 + 1e-8) regardless of the gradient's magnitude.
        let expected = theta0 - 1e-4 / (1.0 + ADAM_EPS);
        assert_eq!(net.layers[0].theta.to_bits(), expected.to_bits());
        // Untouched groups stay bitwise identical.
        assert_eq!(net.layers[0].step, 1.0);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let bank = desk(2, 2);
        let mut net = init_from_model(&bank, 0.3, 2.0, 2).unwrap();
        let reference = net.clone();
        let grads = backward(&net, &SliceSet::zeros(bank.n_t, 2), &[0.0; 4]).unwrap();
        let mut state = AdamState::new(&net);
        for _ in 0..3 {
            adam_step(&mut net, &grads, &mut state, 1e-2).unwrap();
        }
        assert_eq!(net, reference);
    }

    #[test]
    fn adam_clamps_theta_and_step_into_their_domains() {
        let bank = desk(2, 2);
        let mut net = init_from_model(&bank, 1e-9, 1.0, 1).unwrap();
        net.layers[0].step = 1e-13_f64.max(MIN_STEP);
        let mut grads = backward(&net, &SliceSet::zeros(bank.n_t, 2), &[0.0; 4]).unwrap();
        for lg in grads.layers.iter_mut() {
            lg.theta = 1.0;
            lg.step = 1.0;
        }
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state, 1e-2).unwrap();
        assert_eq!(net.layers[0].theta, 0.0);
        assert_eq!(net.layers[0].step, MIN_STEP);
    }

    #[test]
    fn random_maps_are_seeded_sparse_and_ranged() {
        let roi = RoiGrid::desk(4, 4);
        let cfg = TrainConfig { k_min: 2, k_max: 5, ..TrainConfig::default() };
        let a = random_map(&mut ChaCha8Rng::seed_from_u64(42), &roi, &cfg).unwrap();
        let b = random_map(&mut ChaCha8Rng::seed_from_u64(42), &roi, &cfg).unwrap();
        assert_eq!(a.0.data, b.0.data);
        assert_eq!(a.1.entries.len(), b.1.entries.len());
        for seed in 0..20u64 {
            let (map, list) = random_map(&mut ChaCha8Rng::seed_from_u64(seed), &roi, &cfg).unwrap();
            let nnz = map.data.iter().filter(|&&v| v != 0.0).count();
            assert_eq!(nnz, list.entries.len());
            assert!((cfg.k_min..=cfg.k_max).contains(&nnz));
            for s in &list.entries {
                assert!(s.a >= cfg.a_min && s.a <= cfg.a_max);
                assert_eq!(map.get(s.i_z, s.i_x), s.a);
            }
        }
        let tiny = RoiGrid::desk(1, 2);
        let bad = TrainConfig { k_min: 1, k_max: 3, ..TrainConfig::default() };
        assert!(random_map(&mut ChaCha8Rng::seed_from_u64(0), &tiny, &bad).is_err());
    }

    #[test]
    fn zero_learning_rate_trains_to_a_flat_trace() {
        let bank = desk(2, 2);
        let mut net = init_from_model(&bank, 0.01, 3000.0, 2).unwrap();
        let reference = net.clone();
        let cfg = TrainConfig {
            epochs: 3,
            maps_per_epoch: 4,
            lr: 0.0,
            seed: 9,
            ..TrainConfig::default()
        };
        let trace = train(&mut net, &cfg).unwrap();
        assert_eq!(net, reference);
        assert_eq!(trace.len(), 3);
        // Same parameters, fresh random maps: every epoch-mean stays finite.
        assert!(trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn training_is_deterministic_and_moves_parameters() {
        let bank = desk(3, 3);
        let weights = SliceWeights::reciprocity(3);
        let l0 = 1.05 * lipschitz_estimate(&bank, &weights, 500, 1e-9, 0).unwrap().l;
        let cfg = TrainConfig {
            epochs: 4,
            maps_per_epoch: 5,
            lr: 1e-3,
            seed: 21,
            ..TrainConfig::default()
        };
        let mut net1 = init_from_model(&bank, 1.0, l0, 2).unwrap();
        let reference = net1.clone();
        let trace1 = train(&mut net1, &cfg).unwrap();
        let mut net2 = init_from_model(&bank, 1.0, l0, 2).unwrap();
        let trace2 = train(&mut net2, &cfg).unwrap();
        assert_eq!(net1, net2);
        assert_eq!(trace1, trace2);
        assert_ne!(net1, reference, "training should move the parameters");
        assert!(trace1.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn training_reduces_the_loss_on_small_problems() {
        // Small-scale version of the statistical training property; the
        // desk-scale single-seed run lives in the acceptance suite.
        let bank = desk(4, 4);
        let weights = SliceWeights::reciprocity(4);
        let l0 = 1.05 * lipschitz_estimate(&bank, &weights, 500, 1e-9, 0).unwrap().l;
        let cfg_probe = TrainConfig::default();
        let probe = generate_dataset(&bank, &cfg_probe, 7, 8).unwrap();
        let lambda0 = default_lambda(
            &bank,
            &probe[0].1,
            &weights,
            1e-3,
        )
        .unwrap();
        let mut improved = 0;
        let seeds = [1u64, 2, 3, 4, 5];
        for &seed in &seeds {
            let mut net = init_from_model(&bank, lambda0, l0, 3).unwrap();
            let before = eval_mse(&net, &probe).unwrap();
            let cfg = TrainConfig {
                epochs: 20,
                maps_per_epoch: 10,
                lr: 1e-4,
                seed,
                ..TrainConfig::default()
            };
            train(&mut net, &cfg).unwrap();
            let after = eval_mse(&net, &probe).unwrap();
            if after <= before {
                improved += 1;
            }
        }
        assert!(
            improved >= seeds.len() - 1,
            "training regressed held-out loss on {}/{} seeds",
            seeds.len() - improved,
            seeds.len()
        );
    }

    #[test]
    fn shape_and_contract_violations_are_rejected() {
        let bank = desk(2, 2);
        let net = init_from_model(&bank, 0.1, 1.0, 2).unwrap();
        let y_bad = SliceSet::zeros(bank.n_t + 1, 2);
        assert!(lista_forward(&net, &y_bad).is_err());
        let y = SliceSet::zeros(bank.n_t, 2);
        assert!(backward(&net, &y, &[0.0; 3]).is_err());
        assert!(init_from_model(&bank, 0.1, 0.0, 1).is_err());
        assert!(init_from_model(&bank, -0.1, 1.0, 1).is_err());
        assert!(init_from_model(&bank, 0.1, 1.0, 0).is_err());
        let mut broken = net.clone();
        broken.layers[0].agg_w.pop();
        assert!(broken.validate().is_err());
        let mut bad_theta = net.clone();
        bad_theta.layers[1].theta = -1.0;
        assert!(bad_theta.validate().is_err());
        let cfg = TrainConfig { k_min: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { lr: f64::NAN, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_finite_measurements_abort_with_the_layer_index() {
        let bank = desk(2, 2);
        let net = init_from_model(&bank, 0.1, 1.0, 2).unwrap();
        let mut y = SliceSet::zeros(bank.n_t, 2);
        y.slices[0][1] = f64::INFINITY;
        let err = backward(&net, &y, &[0.0; 4]).unwrap_err();
        match err {
            Error::NonFinite(msg) => assert!(msg.contains("layer 0"), "{msg}"),
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }

    #[test]
    fn noisy_measurements_are_reproducible_and_spread() {
        let bank = desk(2, 2);
        let x = vec![0.5, 0.0, 0.0, -0.25];
        let mut r1 = ChaCha8Rng::seed_from_u64(31);
        let mut r2 = ChaCha8Rng::seed_from_u64(31);
        let a = synth_measurements(&bank, &x, 0.1, &mut r1).unwrap();
        let b = synth_measurements(&bank, &x, 0.1, &mut r2).unwrap();
        assert_eq!(a, b);
        let clean = synth_measurements(&bank, &x, 0.0, &mut r1).unwrap();
        assert_ne!(a, clean);
        // The mirrored-pair average keeps slices consistent: the noisy data
        // came through a symmetric fold, so no slice is bitwise equal to the
        // clean one but every shape matches.
        assert!(clean.shape_matches(&a));
    }
}
