//! First-order leaky integrate-and-fire networks with surrogate-gradient
//! backpropagation through time.
//!
//! The forward simulation unrolls the exposure window: at each step the
//! membrane decays by beta, integrates the weighted presynaptic spikes,
//! fires on threshold crossing, and resets (subtract or zero). Training
//! backpropagates through the unrolled graph, replacing the derivative of
//! the hard threshold with a surrogate.
//!
//! Two forward passes share one backward implementation:
//! - the production pass emits hard binary spikes;
//! - a smooth pass replaces the threshold with the surrogate's
//!   antiderivative (a sigmoid-like relaxation), making the whole graph
//!   differentiable so the backward pass can be checked against finite
//!   differences.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{train, Adam, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::encoding::{SpikeTrain, TargetTrain};
use crate::error::{Error, Result};
use crate::preprocess::PolarisationMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Membrane reset behaviour after a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResetMode {
    /// Soft reset: subtract the threshold.
    #[default]
    Subtract,
    /// Hard reset: clamp the membrane to zero.
    Zero,
}

/// First-order LIF neuron parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifParams {
    /// Membrane decay per step, in (0, 1).
    pub beta: f64,
    pub v_threshold: f64,
    pub reset: ResetMode,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            v_threshold: 1.0,
            reset: ResetMode::Subtract,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must be in (0, 1), got {}",
                self.beta
            )));
        }
        if self.v_threshold <= 0.0 {
            return Err(Error::Config(format!(
                "v_threshold must be > 0, got {}",
                self.v_threshold
            )));
        }
        Ok(())
    }
}

/// Surrogate derivative used in place of the threshold's derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    #[default]
    FastSigmoid,
    Arctan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub slope: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::FastSigmoid,
            slope: 25.0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slope <= 0.0 {
            return Err(Error::Config(format!(
                "surrogate slope must be > 0, got {}",
                self.slope
            )));
        }
        Ok(())
    }

    /// d spike / d u_pre at membrane offset x = u_pre - threshold.
    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.slope;
        match self.kind {
            SurrogateKind::FastSigmoid => {
                let denom = 1.0 + k * x.abs();
                k / (denom * denom)
            }
            SurrogateKind::Arctan => 1.0 / (1.0 + (k * x) * (k * x)),
        }
    }

    /// Smooth spike relaxation: the antiderivative of [`Self::derivative`],
    /// centred so the value at the threshold is 0.5.
    pub fn smooth_spike(&self, x: f64) -> f64 {
        let k = self.slope;
        match self.kind {
            SurrogateKind::FastSigmoid => {
                let tail = 1.0 - 1.0 / (1.0 + k * x.abs());
                0.5 + x.signum() * tail
            }
            SurrogateKind::Arctan => 0.5 + (k * x).atan() / k,
        }
    }
}

/// One weighted spiking layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// [C_out, C_in] synaptic weights.
    pub weights: Array2<f64>,
    pub params: LifParams,
}

/// Feed-forward stack of LIF layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LifNetwork {
    layers: Vec<Layer>,
}

impl LifNetwork {
    /// Build from explicit layers, checking that dimensions compose and
    /// weights are finite.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            layer.params.validate()?;
            if layer.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Data(format!("non-finite weight in layer {l}")));
            }
            if l > 0 && layers[l - 1].weights.nrows() != layer.weights.ncols() {
                return Err(Error::Shape(format!(
                    "layer {l} expects {} inputs but layer {} emits {}",
                    layer.weights.ncols(),
                    l - 1,
                    layers[l - 1].weights.nrows()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Fresh network with weights drawn uniformly from
    /// +/- sqrt(1 / C_in) per layer.
    pub fn new(dims: &[usize], params: LifParams, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "network dims need at least input and output sizes".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::Config("layer sizes must be >= 1".into()));
        }
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (c_in, c_out) = (w[0], w[1]);
                let bound = (1.0 / c_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((c_out, c_in), |_| rng.gen_range(-bound..bound));
                Layer { weights, params }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Layer sizes, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.ncols()];
        dims.extend(self.layers.iter().map(|l| l.weights.nrows()));
        dims
    }

    pub fn channels_in(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn channels_out(&self) -> usize {
        self.layers.last().expect("non-empty").weights.nrows()
    }

    /// Neurons in all layers except the output layer.
    pub fn hidden_total(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.weights.nrows())
            .sum()
    }

    /// Zero-weight gradients matching the layer shapes.
    pub fn zero_gradients(&self) -> Vec<Array2<f64>> {
        self.layers
            .iter()
            .map(|l| Array2::zeros(l.weights.dim()))
            .collect()
    }
}

/// One LIF update: decay, integrate, threshold, reset.
///
/// Returns the post-step membrane and the spike flags.
pub fn lif_step(u: &[f64], current: &[f64], p: &LifParams) -> (Vec<f64>, Vec<bool>) {
    debug_assert_eq!(u.len(), current.len());
    let mut u_next = Vec::with_capacity(u.len());
    let mut spikes = Vec::with_capacity(u.len());
    for (&u0, &i0) in u.iter().zip(current) {
        let u_pre = p.beta * u0 + i0;
        let s = u_pre >= p.v_threshold;
        let u1 = match p.reset {
            ResetMode::Subtract => u_pre - if s { p.v_threshold } else { 0.0 },
            ResetMode::Zero => {
                if s {
                    0.0
                } else {
                    u_pre
                }
            }
        };
        u_next.push(u1);
        spikes.push(s);
    }
    (u_next, spikes)
}

/// Which spike nonlinearity the unrolled simulation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikePass {
    /// Hard threshold (production).
    Hard,
    /// Surrogate antiderivative relaxation (gradient checking).
    Smooth(SurrogateConfig),
}

/// Cached activations of one unrolled simulation, consumed by the
/// backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input spikes as reals, [C_in, e].
    pub input: Array2<f64>,
    /// Per layer: pre-reset membrane, [C_l, e].
    pub u_pre: Vec<Array2<f64>>,
    /// Per layer: emitted spikes (binary for the hard pass), [C_l, e].
    pub spikes: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn exposure(&self) -> usize {
        self.input.ncols()
    }

    /// Output-layer spike values summed over the window, per channel.
    pub fn output_counts(&self) -> Array1<f64> {
        let out = self.spikes.last().expect("at least one layer");
        out.sum_axis(ndarray::Axis(1))
    }
}

/// Unroll the network over the input's exposure window, recording every
/// intermediate needed for backpropagation.
pub fn forward_trace(
    net: &LifNetwork,
    input: &SpikeTrain,
    pass: SpikePass,
) -> Result<ForwardTrace> {
    if input.channels() != net.channels_in() {
        return Err(Error::Shape(format!(
            "input has {} channels but the network expects {}",
            input.channels(),
            net.channels_in()
        )));
    }
    let e = input.exposure();
    let input_real = input.spikes.mapv(|s| f64::from(u8::from(s)));

    let mut u_pre_all = Vec::with_capacity(net.layers.len());
    let mut spikes_all = Vec::with_capacity(net.layers.len());
    let mut membranes: Vec<Array1<f64>> = net
        .layers
        .iter()
        .map(|l| Array1::zeros(l.weights.nrows()))
        .collect();
    for layer in &net.layers {
        u_pre_all.push(Array2::zeros((layer.weights.nrows(), e)));
        spikes_all.push(Array2::zeros((layer.weights.nrows(), e)));
    }

    for t in 0..e {
        let mut prev: Array1<f64> = input_real.column(t).to_owned();
        for (l, layer) in net.layers.iter().enumerate() {
            let p = &layer.params;
            let current = layer.weights.dot(&prev);
            let mut spikes_t = Array1::zeros(current.len());
            for (j, &i0) in current.iter().enumerate() {
                let u_pre = p.beta * membranes[l][j] + i0;
                let s = match pass {
                    SpikePass::Hard => f64::from(u8::from(u_pre >= p.v_threshold)),
                    SpikePass::Smooth(sg) => sg.smooth_spike(u_pre - p.v_threshold),
                };
                let u_next = match p.reset {
                    ResetMode::Subtract => u_pre - s * p.v_threshold,
                    ResetMode::Zero => u_pre * (1.0 - s),
                };
                u_pre_all[l][(j, t)] = u_pre;
                spikes_t[j] = s;
                membranes[l][j] = u_next;
            }
            spikes_all[l].column_mut(t).assign(&spikes_t);
            prev = spikes_t;
        }
    }

    Ok(ForwardTrace {
        input: input_real,
        u_pre: u_pre_all,
        spikes: spikes_all,
    })
}

/// Hard forward pass: output spike train plus per-layer spike rates.
/// `rates[0]` is the input train's rate; `rates[l + 1]` belongs to layer l.
pub fn forward(net: &LifNetwork, input: &SpikeTrain) -> Result<(SpikeTrain, Vec<f64>)> {
    let trace = forward_trace(net, input, SpikePass::Hard)?;
    let mut rates = Vec::with_capacity(net.layers.len() + 1);
    rates.push(input.rate());
    for s in &trace.spikes {
        rates.push(s.sum() / s.len() as f64);
    }
    let out = trace.spikes.last().expect("at least one layer");
    let spikes = out.mapv(|v| v >= 0.5);
    Ok((SpikeTrain { spikes }, rates))
}

fn count_loss(output_counts: &Array1<f64>, target_counts: &Array1<f64>, e: usize) -> f64 {
    let e = e as f64;
    let n = output_counts.len() as f64;
    output_counts
        .iter()
        .zip(target_counts.iter())
        .map(|(&o, &t)| ((o - t) / e).powi(2))
        .sum::<f64>()
        / n
}

/// Spike-count comparator: mean over channels of the squared count
/// difference, normalised by the exposure. Zero exactly when the counts
/// match.
pub fn loss_h(output: &SpikeTrain, target: &TargetTrain) -> Result<f64> {
    if output.spikes.dim() != target.spikes.dim() {
        return Err(Error::Shape(format!(
            "output {:?} and target {:?} shapes differ",
            output.spikes.dim(),
            target.spikes.dim()
        )));
    }
    let e = output.exposure();
    let oc = Array1::from_iter(output.counts().into_iter().map(|c| c as f64));
    let tc = Array1::from_iter(target.counts().into_iter().map(|c| c as f64));
    Ok(count_loss(&oc, &tc, e))
}

/// Loss of a recorded (possibly smooth) forward pass against a target.
pub fn loss_from_trace(trace: &ForwardTrace, target: &TargetTrain) -> Result<f64> {
    let out = trace.spikes.last().expect("at least one layer");
    if out.dim() != target.spikes.dim() {
        return Err(Error::Shape(format!(
            "output {:?} and target {:?} shapes differ",
            out.dim(),
            target.spikes.dim()
        )));
    }
    let tc = Array1::from_iter(target.counts().into_iter().map(|c| c as f64));
    Ok(count_loss(&trace.output_counts(), &tc, trace.exposure()))
}

/// Backpropagate the count loss through a recorded trace.
///
/// The spike derivative is the surrogate; the reset path is
/// differentiated too, so applied to a smooth trace this is the exact
/// gradient of the smooth computation.
pub fn backward_from_trace(
    net: &LifNetwork,
    trace: &ForwardTrace,
    target: &TargetTrain,
    surrogate: &SurrogateConfig,
) -> Result<Vec<Array2<f64>>> {
    surrogate.validate()?;
    let n_layers = net.layers.len();
    let e = trace.exposure();
    let out = trace.spikes.last().expect("at least one layer");
    if out.dim() != target.spikes.dim() {
        return Err(Error::Shape(format!(
            "output {:?} and target {:?} shapes differ",
            out.dim(),
            target.spikes.dim()
        )));
    }

    // dL/d count_c, constant over the window
    let counts = trace.output_counts();
    let target_counts = Array1::from_iter(target.counts().into_iter().map(|c| c as f64));
    let c_out = counts.len() as f64;
    let e_f = e as f64;
    let g_count: Array1<f64> = (&counts - &target_counts).mapv(|d| 2.0 * d / (e_f * e_f * c_out));

    let mut grads = net.zero_gradients();
    // adjoint of u_l[t] arriving from step t + 1 through the decay
    let mut carry: Vec<Array1<f64>> = net
        .layers
        .iter()
        .map(|l| Array1::zeros(l.weights.nrows()))
        .collect();

    for t in (0..e).rev() {
        // adjoint of the current layer's spikes, filled top-down
        let mut g_spike_from_above: Option<Array1<f64>> = None;
        for l in (0..n_layers).rev() {
            let layer = &net.layers[l];
            let p = &layer.params;
            let g_spike = if l == n_layers - 1 {
                g_count.clone()
            } else {
                g_spike_from_above.take().expect("set by the layer above")
            };

            let u_pre_col = trace.u_pre[l].column(t);
            let spike_col = trace.spikes[l].column(t);
            let mut g_upre = Array1::zeros(u_pre_col.len());
            for j in 0..u_pre_col.len() {
                let x = u_pre_col[j] - p.v_threshold;
                let sd = surrogate.derivative(x);
                let du = carry[l][j];
                g_upre[j] = match p.reset {
                    // u = u_pre - s * thr
                    ResetMode::Subtract => g_spike[j] * sd + du * (1.0 - p.v_threshold * sd),
                    // u = u_pre * (1 - s)
                    ResetMode::Zero => {
                        g_spike[j] * sd + du * ((1.0 - spike_col[j]) - u_pre_col[j] * sd)
                    }
                };
            }

            // weight gradient: outer(g_upre, presynaptic spikes)
            let prev = if l == 0 {
                trace.input.column(t)
            } else {
                trace.spikes[l - 1].column(t)
            };
            for (r, &g) in g_upre.iter().enumerate() {
                if g != 0.0 {
                    for (cix, &s) in prev.iter().enumerate() {
                        grads[l][(r, cix)] += g * s;
                    }
                }
            }

            if l > 0 {
                g_spike_from_above = Some(layer.weights.t().dot(&g_upre));
            }
            carry[l] = g_upre.mapv(|g| g * p.beta);
        }
    }
    Ok(grads)
}

/// Gradients of the count loss with respect to every weight, using the
/// hard forward pass and the surrogate spike derivative.
pub fn backward_bptt(
    net: &LifNetwork,
    input: &SpikeTrain,
    target: &TargetTrain,
    surrogate: &SurrogateConfig,
) -> Result<Vec<Array2<f64>>> {
    let trace = forward_trace(net, input, SpikePass::Hard)?;
    backward_from_trace(net, &trace, target, surrogate)
}

/// Loss and gradients in one pass (training hot path).
pub fn loss_and_gradients(
    net: &LifNetwork,
    input: &SpikeTrain,
    target: &TargetTrain,
    surrogate: &SurrogateConfig,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let trace = forward_trace(net, input, SpikePass::Hard)?;
    let loss = loss_from_trace(&trace, target)?;
    let grads = backward_from_trace(net, &trace, target, surrogate)?;
    Ok((loss, grads))
}

/// Mean per-layer spike rates of the hard forward pass over a sample set.
pub fn measure_spike_rates(net: &LifNetwork, samples: &[SpikeTrain]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Config(
            "spike-rate measurement needs a non-empty sample set".into(),
        ));
    }
    let mut acc = vec![0.0; net.layers.len() + 1];
    for sample in samples {
        let (_, rates) = forward(net, sample)?;
        for (a, r) in acc.iter_mut().zip(&rates) {
            *a += r;
        }
    }
    let n = samples.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

// ---- architecture table ----

/// Network families tested in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelType {
    /// 16x16 spectrogram patches.
    #[default]
    Patched,
    /// Truncated to the Xylo chip's channel budget.
    Xylo,
    /// Whole-spectrogram input.
    Full,
}

/// (channels_in, hidden, channels_out) of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub channels_in: usize,
    pub hidden: usize,
    pub channels_out: usize,
}

impl NetworkArchitecture {
    pub fn dims(&self) -> Vec<usize> {
        vec![self.channels_in, self.hidden, self.channels_out]
    }
}

/// The fixed architecture for each (model, polarisation) pair at the
/// nominal 512-channel spectrogram scale.
pub fn build_from_config(model: ModelType, pol: PolarisationMode) -> NetworkArchitecture {
    let (channels_in, channels_out) = match (model, pol) {
        (ModelType::Patched, PolarisationMode::Dop) => (16, 16),
        (ModelType::Patched, PolarisationMode::Full) => (64, 16),
        (ModelType::Xylo, PolarisationMode::Dop) => (15, 15),
        (ModelType::Xylo, PolarisationMode::Full) => (4, 4),
        (ModelType::Full, PolarisationMode::Dop) => (512, 512),
        (ModelType::Full, PolarisationMode::Full) => (2048, 512),
    };
    NetworkArchitecture {
        channels_in,
        hidden: 512,
        channels_out,
    }
}

/// Patch geometry and channel bookkeeping for a (model, polarisation)
/// pair on data with `freq_channels` x `time_steps` spectrograms.
///
/// The full-spectrogram family adapts its patch to the data extent; the
/// patched and Xylo families use the fixed published geometries. In the
/// Xylo full-polarisation case the network sees one frequency channel's
/// four polarisations and emits four votes for that single pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelGeometry {
    pub patch_freq: usize,
    pub patch_time: usize,
    /// Feature planes stacked per patch (4 for full polarisation).
    pub planes: usize,
    /// Output channels voting for each mask pixel.
    pub votes_per_pixel: usize,
}

impl ModelGeometry {
    pub fn for_data(
        model: ModelType,
        pol: PolarisationMode,
        freq_channels: usize,
        time_steps: usize,
    ) -> Self {
        let planes = match pol {
            PolarisationMode::Full => 4,
            PolarisationMode::Dop => 1,
        };
        let (patch_freq, patch_time, votes_per_pixel) = match (model, pol) {
            (ModelType::Patched, _) => (16, 16, 1),
            (ModelType::Xylo, PolarisationMode::Dop) => (15, 16, 1),
            (ModelType::Xylo, PolarisationMode::Full) => (1, 16, 4),
            (ModelType::Full, _) => (freq_channels, time_steps, 1),
        };
        Self {
            patch_freq,
            patch_time,
            planes,
            votes_per_pixel,
        }
    }

    pub fn channels_in(&self) -> usize {
        self.planes * self.patch_freq
    }

    pub fn channels_out(&self) -> usize {
        self.votes_per_pixel * self.patch_freq
    }

    /// Architecture implied by this geometry (hidden width 512).
    pub fn architecture(&self) -> NetworkArchitecture {
        NetworkArchitecture {
            channels_in: self.channels_in(),
            hidden: 512,
            channels_out: self.channels_out(),
        }
    }
}

// ---- Xylo constraint checking ----

/// Hardware budget of the Xylo inference chip.
pub const XYLO_MAX_INPUT_CHANNELS: usize = 16;
pub const XYLO_MAX_INTERNAL_NEURONS: usize = 1000;
pub const XYLO_MAX_OUTPUT_CHANNELS: usize = 16;

/// A way the architecture exceeds the Xylo budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "got")]
pub enum XyloViolation {
    TooManyInputs(usize),
    TooManyHidden(usize),
    TooManyOutputs(usize),
}

impl std::fmt::Display for XyloViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            XyloViolation::TooManyInputs(got) => write!(
                f,
                "{got} input channels exceed the Xylo limit of {XYLO_MAX_INPUT_CHANNELS}"
            ),
            XyloViolation::TooManyHidden(got) => write!(
                f,
                "{got} internal neurons exceed the Xylo limit of {XYLO_MAX_INTERNAL_NEURONS}"
            ),
            XyloViolation::TooManyOutputs(got) => write!(
                f,
                "{got} output channels exceed the Xylo limit of {XYLO_MAX_OUTPUT_CHANNELS}"
            ),
        }
    }
}

/// Check an architecture against the Xylo budget. An empty list means the
/// model fits.
pub fn xylo_check(arch: &NetworkArchitecture) -> Vec<XyloViolation> {
    let mut violations = Vec::new();
    if arch.channels_in > XYLO_MAX_INPUT_CHANNELS {
        violations.push(XyloViolation::TooManyInputs(arch.channels_in));
    }
    if arch.hidden > XYLO_MAX_INTERNAL_NEURONS {
        violations.push(XyloViolation::TooManyHidden(arch.hidden));
    }
    if arch.channels_out > XYLO_MAX_OUTPUT_CHANNELS {
        violations.push(XyloViolation::TooManyOutputs(arch.channels_out));
    }
    violations
}

/// Xylo check against an instantiated network (counts every non-output
/// layer's neurons as internal).
pub fn xylo_check_network(net: &LifNetwork) -> Vec<XyloViolation> {
    let mut violations = Vec::new();
    if net.channels_in() > XYLO_MAX_INPUT_CHANNELS {
        violations.push(XyloViolation::TooManyInputs(net.channels_in()));
    }
    if net.hidden_total() > XYLO_MAX_INTERNAL_NEURONS {
        violations.push(XyloViolation::TooManyHidden(net.hidden_total()));
    }
    if net.channels_out() > XYLO_MAX_OUTPUT_CHANNELS {
        violations.push(XyloViolation::TooManyOutputs(net.channels_out()));
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_target, latency_encode};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spike_train(rows: Vec<Vec<bool>>) -> SpikeTrain {
        let r = rows.len();
        let c = rows[0].len();
        let mut spikes = Array2::from_elem((r, c), false);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                spikes[(i, j)] = v;
            }
        }
        SpikeTrain { spikes }
    }

    #[test]
    fn lif_step_pure_decay() {
        let p = LifParams::default();
        let (u, s) = lif_step(&[0.5], &[0.0], &p);
        assert_abs_diff_eq!(u[0], 0.45, epsilon = 1e-12);
        assert!(!s[0]);
    }

    #[test]
    fn lif_step_threshold_crossing_subtract() {
        let p = LifParams {
            beta: 0.5,
            v_threshold: 1.0,
            reset: ResetMode::Subtract,
        };
        let (u, s) = lif_step(&[1.0], &[0.6], &p);
        assert!(s[0]);
        assert_abs_diff_eq!(u[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn lif_step_zero_fixed_point() {
        let p = LifParams::default();
        let (u, s) = lif_step(&[0.0], &[0.0], &p);
        assert_eq!(u[0], 0.0);
        assert!(!s[0]);
    }

    #[test]
    fn lif_step_zero_reset() {
        let p = LifParams {
            beta: 0.5,
            v_threshold: 1.0,
            reset: ResetMode::Zero,
        };
        let (u, s) = lif_step(&[1.0], &[0.6], &p);
        assert!(s[0]);
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn geometric_decay_without_input() {
        let p = LifParams::default();
        let mut u = vec![0.7];
        for _ in 0..5 {
            let (next, s) = lif_step(&u, &[0.0], &p);
            assert!(!s[0]);
            u = next;
        }
        assert_abs_diff_eq!(u[0], 0.7 * 0.9f64.powi(5), epsilon = 1e-12);
    }

    #[test]
    fn forward_zero_weights_is_silent() {
        let net = LifNetwork::from_layers(vec![
            Layer {
                weights: Array2::zeros((3, 2)),
                params: LifParams::default(),
            },
            Layer {
                weights: Array2::zeros((1, 3)),
                params: LifParams::default(),
            },
        ])
        .unwrap();
        let input = latency_encode(&[1.0, 0.3], 4).unwrap();
        let (out, rates) = forward(&net, &input).unwrap();
        assert!(out.spikes.iter().all(|&s| !s));
        assert!(rates[0] > 0.0);
        assert_eq!(rates[1], 0.0);
        assert_eq!(rates[2], 0.0);
    }

    #[test]
    fn forward_single_strong_synapse_fires_once() {
        let net = LifNetwork::from_layers(vec![Layer {
            weights: array![[2.0]],
            params: LifParams::default(),
        }])
        .unwrap();
        let input = spike_train(vec![vec![false, true, false, false]]);
        let (out, _) = forward(&net, &input).unwrap();
        let count: usize = out.counts().iter().sum();
        assert_eq!(count, 1);
        assert!(out.spikes[(0, 1)]);
    }

    #[test]
    fn forward_matches_lif_step_sequence() {
        // single layer driven through both code paths
        let w = array![[0.8, -0.4], [0.3, 0.9]];
        let p = LifParams {
            beta: 0.7,
            v_threshold: 0.6,
            reset: ResetMode::Zero,
        };
        let net = LifNetwork::from_layers(vec![Layer {
            weights: w.clone(),
            params: p,
        }])
        .unwrap();
        let input = spike_train(vec![
            vec![true, false, true, false],
            vec![false, true, true, false],
        ]);
        let (out, _) = forward(&net, &input).unwrap();

        let mut u = vec![0.0; 2];
        for t in 0..4 {
            let x: Vec<f64> = (0..2)
                .map(|c| f64::from(u8::from(input.spikes[(c, t)])))
                .collect();
            let current: Vec<f64> = (0..2)
                .map(|r| (0..2).map(|c| w[(r, c)] * x[c]).sum())
                .collect();
            let (next, spikes) = lif_step(&u, &current, &p);
            for (r, &s) in spikes.iter().enumerate() {
                assert_eq!(out.spikes[(r, t)], s, "t={t} r={r}");
            }
            u = next;
        }
    }

    #[test]
    fn forward_shape_mismatch() {
        let net = LifNetwork::new(&[3, 2], LifParams::default(), 0).unwrap();
        let input = latency_encode(&[0.1, 0.2], 4).unwrap();
        assert!(matches!(forward(&net, &input), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_is_deterministic() {
        let net = LifNetwork::new(&[4, 8, 2], LifParams::default(), 3).unwrap();
        let input = latency_encode(&[0.2, 0.9, 0.5, 0.0], 6).unwrap();
        let (a, ra) = forward(&net, &input).unwrap();
        let (b, rb) = forward(&net, &input).unwrap();
        assert_eq!(a.spikes, b.spikes);
        assert_eq!(ra, rb);
    }

    #[test]
    fn rates_bounded_on_random_networks() {
        for seed in 0..10 {
            let net = LifNetwork::new(&[5, 7, 3], LifParams::default(), seed).unwrap();
            let x: Vec<f64> = (0..5).map(|k| (k as f64) / 4.0).collect();
            let input = latency_encode(&x, 5).unwrap();
            let (_, rates) = forward(&net, &input).unwrap();
            assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn loss_zero_iff_counts_match() {
        let target = encode_target(&[true, false], 4).unwrap();
        let perfect = spike_train(vec![
            vec![true, true, true, true],
            vec![false, false, false, false],
        ]);
        assert_eq!(loss_h(&perfect, &target).unwrap(), 0.0);

        // same counts, different timing: still zero
        let shuffled = spike_train(vec![
            vec![true, true, true, true],
            vec![false, false, false, false],
        ]);
        assert_eq!(loss_h(&shuffled, &target).unwrap(), 0.0);

        let off = spike_train(vec![
            vec![true, true, true, false],
            vec![false, false, false, false],
        ]);
        assert!(loss_h(&off, &target).unwrap() > 0.0);
    }

    #[test]
    fn loss_argmin_is_exactly_count_equivalence() {
        // enumerate every binary output train for C = 2, e = 3
        let target = encode_target(&[true, false], 3).unwrap();
        let target_counts = target.counts();
        for bits in 0u32..64 {
            let mut spikes = Array2::from_elem((2, 3), false);
            for k in 0..6 {
                spikes[(k / 3, k % 3)] = bits & (1 << k) != 0;
            }
            let out = SpikeTrain { spikes };
            let loss = loss_h(&out, &target).unwrap();
            if out.counts() == target_counts {
                assert_eq!(loss, 0.0, "bits {bits:#08b}");
            } else {
                assert!(loss > 0.0, "bits {bits:#08b}");
            }
        }
    }

    #[test]
    fn loss_routes_agree_on_hard_traces() {
        for seed in 0..20 {
            let net = LifNetwork::new(&[3, 6, 2], LifParams::default(), seed).unwrap();
            let x: Vec<f64> = vec![0.9, 0.2, 0.55];
            let input = latency_encode(&x, 4).unwrap();
            let target = encode_target(&[seed % 2 == 0, seed % 3 == 0], 4).unwrap();
            let (out, _) = forward(&net, &input).unwrap();
            let via_train = loss_h(&out, &target).unwrap();
            let trace = forward_trace(&net, &input, SpikePass::Hard).unwrap();
            let via_trace = loss_from_trace(&trace, &target).unwrap();
            assert_eq!(via_train, via_trace);
        }
    }

    #[test]
    fn loss_silent_output_against_full_target() {
        let target = encode_target(&[true], 4).unwrap();
        let silent = spike_train(vec![vec![false, false, false, false]]);
        assert_abs_diff_eq!(loss_h(&silent, &target).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_is_symmetric_in_counts() {
        let a = spike_train(vec![vec![true, true, false, false]]);
        let b = spike_train(vec![vec![true, false, false, false]]);
        let ta = TargetTrain {
            spikes: a.spikes.clone(),
        };
        let tb = TargetTrain {
            spikes: b.spikes.clone(),
        };
        assert_eq!(loss_h(&a, &tb).unwrap(), loss_h(&b, &ta).unwrap());
    }

    #[test]
    fn backward_silent_net_silent_target_is_zero() {
        let net = LifNetwork::from_layers(vec![Layer {
            weights: Array2::zeros((2, 2)),
            params: LifParams::default(),
        }])
        .unwrap();
        let input = latency_encode(&[0.5, 0.5], 4).unwrap();
        let target = encode_target(&[false, false], 4).unwrap();
        let grads = backward_bptt(&net, &input, &target, &SurrogateConfig::default()).unwrap();
        assert!(grads.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn slope_changes_gradients_not_spikes() {
        let net = LifNetwork::new(&[3, 4, 2], LifParams::default(), 7).unwrap();
        let input = latency_encode(&[0.9, 0.1, 0.6], 4).unwrap();
        let target = encode_target(&[true, false], 4).unwrap();
        let s1 = SurrogateConfig {
            kind: SurrogateKind::FastSigmoid,
            slope: 10.0,
        };
        let s2 = SurrogateConfig {
            kind: SurrogateKind::FastSigmoid,
            slope: 20.0,
        };
        let (out1, _) = forward(&net, &input).unwrap();
        let (out2, _) = forward(&net, &input).unwrap();
        assert_eq!(out1.spikes, out2.spikes);
        let g1 = backward_bptt(&net, &input, &target, &s1).unwrap();
        let g2 = backward_bptt(&net, &input, &target, &s2).unwrap();
        assert_ne!(g1, g2);
    }

    #[test]
    fn smooth_spike_matches_derivative() {
        // numeric check that smooth_spike is the antiderivative
        for kind in [SurrogateKind::FastSigmoid, SurrogateKind::Arctan] {
            let sg = SurrogateConfig { kind, slope: 8.0 };
            for &x in &[-0.9, -0.2, -0.01, 0.0, 0.03, 0.4, 1.2] {
                let h = 1e-6;
                let fd = (sg.smooth_spike(x + h) - sg.smooth_spike(x - h)) / (2.0 * h);
                // curvature kink at the threshold leaves an O(k^2 h) residue
                assert_abs_diff_eq!(fd, sg.derivative(x), epsilon = 1e-4);
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn smooth_gradcheck_small_net() {
        let surrogate = SurrogateConfig {
            kind: SurrogateKind::FastSigmoid,
            slope: 5.0,
        };
        let mut net = LifNetwork::new(&[2, 2, 1], LifParams::default(), 11).unwrap();
        let input = latency_encode(&[0.8, 0.2], 3).unwrap();
        let target = encode_target(&[true], 3).unwrap();

        let trace = forward_trace(&net, &input, SpikePass::Smooth(surrogate)).unwrap();
        let grads = backward_from_trace(&net, &trace, &target, &surrogate).unwrap();

        let h = 1e-5;
        for l in 0..net.layers().len() {
            for r in 0..net.layers()[l].weights.nrows() {
                for c in 0..net.layers()[l].weights.ncols() {
                    let orig = net.layers()[l].weights[(r, c)];
                    net.layers_mut()[l].weights[(r, c)] = orig + h;
                    let tp = forward_trace(&net, &input, SpikePass::Smooth(surrogate)).unwrap();
                    let lp = loss_from_trace(&tp, &target).unwrap();
                    net.layers_mut()[l].weights[(r, c)] = orig - h;
                    let tm = forward_trace(&net, &input, SpikePass::Smooth(surrogate)).unwrap();
                    let lm = loss_from_trace(&tm, &target).unwrap();
                    net.layers_mut()[l].weights[(r, c)] = orig;
                    let fd = (lp - lm) / (2.0 * h);
                    let g = grads[l][(r, c)];
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                    assert!(rel <= 1e-4, "layer {l} ({r},{c}): bptt {g} vs fd {fd}");
                }
            }
        }
    }

    #[test]
    fn measure_rates_zero_weight_net() {
        let net = LifNetwork::from_layers(vec![Layer {
            weights: Array2::zeros((2, 2)),
            params: LifParams::default(),
        }])
        .unwrap();
        let samples = vec![
            latency_encode(&[1.0, 0.0], 4).unwrap(),
            latency_encode(&[0.5, 0.5], 4).unwrap(),
        ];
        let rates = measure_spike_rates(&net, &samples).unwrap();
        assert_abs_diff_eq!(rates[0], 0.25, epsilon = 1e-12);
        assert_eq!(rates[1], 0.0);
    }

    #[test]
    fn measure_rates_saturated_net() {
        let net = LifNetwork::from_layers(vec![Layer {
            weights: Array2::from_elem((4, 2), 100.0),
            params: LifParams::default(),
        }])
        .unwrap();
        // dense input: every channel spikes every step
        let dense = SpikeTrain {
            spikes: Array2::from_elem((2, 4), true),
        };
        let rates = measure_spike_rates(&net, &[dense]).unwrap();
        assert_eq!(rates[2 - 1], 1.0);
    }

    #[test]
    fn measure_rates_singleton_equals_forward() {
        let net = LifNetwork::new(&[3, 5, 2], LifParams::default(), 2).unwrap();
        let sample = latency_encode(&[0.9, 0.4, 0.0], 4).unwrap();
        let (_, rates) = forward(&net, &sample).unwrap();
        let measured = measure_spike_rates(&net, &[sample]).unwrap();
        assert_eq!(rates, measured);
    }

    #[test]
    fn measure_rates_empty_is_config_error() {
        let net = LifNetwork::new(&[2, 2], LifParams::default(), 0).unwrap();
        assert!(matches!(
            measure_spike_rates(&net, &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn architecture_table() {
        use PolarisationMode::{Dop, Full};
        let cases = [
            (ModelType::Patched, Dop, 16, 16),
            (ModelType::Patched, Full, 64, 16),
            (ModelType::Xylo, Dop, 15, 15),
            (ModelType::Xylo, Full, 4, 4),
            (ModelType::Full, Dop, 512, 512),
            (ModelType::Full, Full, 2048, 512),
        ];
        for (model, pol, c_in, c_out) in cases {
            let arch = build_from_config(model, pol);
            assert_eq!(arch.channels_in, c_in, "{model:?}/{pol:?}");
            assert_eq!(arch.hidden, 512);
            assert_eq!(arch.channels_out, c_out, "{model:?}/{pol:?}");
        }
    }

    #[test]
    fn geometry_matches_table_at_nominal_scale() {
        use PolarisationMode::{Dop, Full};
        for (model, pol) in [
            (ModelType::Patched, Dop),
            (ModelType::Patched, Full),
            (ModelType::Xylo, Dop),
            (ModelType::Xylo, Full),
            (ModelType::Full, Dop),
            (ModelType::Full, Full),
        ] {
            let geom = ModelGeometry::for_data(model, pol, 512, 512);
            assert_eq!(geom.architecture(), build_from_config(model, pol));
        }
    }

    #[test]
    fn xylo_check_table_rows() {
        let pass = NetworkArchitecture {
            channels_in: 4,
            hidden: 512,
            channels_out: 4,
        };
        assert!(xylo_check(&pass).is_empty());

        let patched_full = NetworkArchitecture {
            channels_in: 64,
            hidden: 512,
            channels_out: 16,
        };
        let violations = xylo_check(&patched_full);
        assert_eq!(violations, vec![XyloViolation::TooManyInputs(64)]);

        let too_big = NetworkArchitecture {
            channels_in: 16,
            hidden: 1001,
            channels_out: 16,
        };
        assert_eq!(
            xylo_check(&too_big),
            vec![XyloViolation::TooManyHidden(1001)]
        );
    }
}
