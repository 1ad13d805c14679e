//! Fourier-analysis blocks and the residual/attention blocks of the ECG
//! networks, built on [`crate::tensor::Tape`].
//!
//! A FAN layer concatenates `cos(W_p x) ‖ sin(W_p x) ‖ σ(B_p̄ + W_p̄ x)`; the
//! periodic branches share `W_p` and have no bias. The convolutional FAN
//! block does the same with three equal kernel groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ActivationKind, ParamId, ParamStore, Padding, Tape, Var};

/// `(d_p, d_pbar)` for an FC-FAN block of `width` outputs split 4:1:1
/// between the σ, sine and cosine branches.
pub fn fan_fc_split(width: usize) -> Result<(usize, usize)> {
    if width == 0 || !width.is_multiple_of(6) {
        return Err(Error::Config(format!(
            "FAN block width {width} cannot be split 4:1:1 (needs a positive multiple of 6)"
        )));
    }
    Ok((width / 6, 4 * width / 6))
}

/// Filters per branch of a CONV-FAN block with `filters` total outputs.
pub fn fan_conv_split(filters: usize) -> Result<usize> {
    if filters == 0 || !filters.is_multiple_of(3) {
        return Err(Error::Config(format!(
            "CONV-FAN block with {filters} filters cannot be split 1:1:1"
        )));
    }
    Ok(filters / 3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanFcBlockParams {
    /// `[d_p, d_x]`, shared by the cosine and sine branches.
    pub w_p: ParamId,
    /// `[d_pbar, d_x]`.
    pub w_pbar: ParamId,
    /// `[d_pbar]`.
    pub b_pbar: ParamId,
    pub sigma: ActivationKind,
    pub d_x: usize,
    pub d_p: usize,
    pub d_pbar: usize,
}

impl FanFcBlockParams {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        d_x: usize,
        width: usize,
        sigma: ActivationKind,
        seed: u64,
    ) -> Result<Self> {
        let (d_p, d_pbar) = fan_fc_split(width)?;
        Ok(Self {
            w_p: store.add_he_uniform(&format!("{name}.w_p"), vec![d_p, d_x], d_x, seed)?,
            w_pbar: store.add_he_uniform(&format!("{name}.w_pbar"), vec![d_pbar, d_x], d_x, seed)?,
            b_pbar: store.add_zeros(&format!("{name}.b_pbar"), vec![d_pbar])?,
            sigma,
            d_x,
            d_p,
            d_pbar,
        })
    }

    pub fn width(&self) -> usize {
        2 * self.d_p + self.d_pbar
    }
}

/// `cos(W_p x) ‖ sin(W_p x) ‖ σ(B_p̄ + W_p̄ x)` on `[D]` or `[B, D]` input.
pub fn fan_fc_block(tape: &mut Tape, store: &ParamStore, x: Var, p: &FanFcBlockParams) -> Result<Var> {
    let w_p = tape.param(store, p.w_p);
    let w_pbar = tape.param(store, p.w_pbar);
    let b_pbar = tape.param(store, p.b_pbar);
    let z = tape.dense(x, w_p, None)?;
    let c = tape.activation(ActivationKind::Cos, z)?;
    let s = tape.activation(ActivationKind::Sin, z)?;
    let g = tape.dense(x, w_pbar, Some(b_pbar))?;
    let g = tape.activation(p.sigma, g)?;
    tape.concat_features(&[c, s, g])
}

/// A plain convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `[filters, C_in, K]`.
    pub kernels: ParamId,
    pub bias: Option<ParamId>,
    pub padding: Padding,
}

impl ConvParams {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        filters: usize,
        kernel: usize,
        padding: Padding,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            kernels: store.add_he_uniform(&format!("{name}.kernels"), vec![filters, c_in, kernel], c_in * kernel, seed)?,
            bias: Some(store.add_zeros(&format!("{name}.bias"), vec![filters])?),
            padding,
        })
    }
}

pub fn conv_layer(tape: &mut Tape, store: &ParamStore, x: Var, p: &ConvParams) -> Result<Var> {
    let w = tape.param(store, p.kernels);
    let b = p.bias.map(|b| tape.param(store, b));
    tape.conv1d(x, w, b, p.padding)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanConvBlockParams {
    /// Each `[filters/3, C_in, K]`.
    pub k_cos: ParamId,
    pub k_sin: ParamId,
    pub k_sigma: ParamId,
    /// `[filters/3]`.
    pub b_sigma: ParamId,
    pub sigma: ActivationKind,
    pub filters: usize,
    pub kernel: usize,
}

impl FanConvBlockParams {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        filters: usize,
        kernel: usize,
        sigma: ActivationKind,
        seed: u64,
    ) -> Result<Self> {
        let per = fan_conv_split(filters)?;
        let shape = vec![per, c_in, kernel];
        let fan_in = c_in * kernel;
        Ok(Self {
            k_cos: store.add_he_uniform(&format!("{name}.k_cos"), shape.clone(), fan_in, seed)?,
            k_sin: store.add_he_uniform(&format!("{name}.k_sin"), shape.clone(), fan_in, seed)?,
            k_sigma: store.add_he_uniform(&format!("{name}.k_sigma"), shape, fan_in, seed)?,
            b_sigma: store.add_zeros(&format!("{name}.b_sigma"), vec![per])?,
            sigma,
            filters,
            kernel,
        })
    }
}

/// `cos(K_cos ⋆ x) ‖ sin(K_sin ⋆ x) ‖ σ(K_σ ⋆ x + b)` along channels, same padding.
pub fn fan_conv_block(tape: &mut Tape, store: &ParamStore, x: Var, p: &FanConvBlockParams) -> Result<Var> {
    let kc = tape.param(store, p.k_cos);
    let ks = tape.param(store, p.k_sin);
    let kg = tape.param(store, p.k_sigma);
    let b = tape.param(store, p.b_sigma);
    let c = tape.conv1d(x, kc, None, Padding::Same)?;
    let c = tape.activation(ActivationKind::Cos, c)?;
    let s = tape.conv1d(x, ks, None, Padding::Same)?;
    let s = tape.activation(ActivationKind::Sin, s)?;
    let g = tape.conv1d(x, kg, Some(b), Padding::Same)?;
    let g = tape.activation(p.sigma, g)?;
    tape.concat_channels(&[c, s, g])
}

/// Residual-branch body of a skip block.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipInner {
    /// Convolution then activation.
    Conv(ConvParams, ActivationKind),
    FanConv(FanConvBlockParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipParams {
    pub inner: SkipInner,
}

/// Kind of residual body, used by declarative layer specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipInnerKind {
    Conv,
    FanConv,
}

impl SkipParams {
    /// Channel-preserving residual block of `channels` filters with kernel `kernel`.
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        kind: SkipInnerKind,
        channels: usize,
        kernel: usize,
        activation: ActivationKind,
        seed: u64,
    ) -> Result<Self> {
        let inner = match kind {
            SkipInnerKind::Conv => SkipInner::Conv(
                ConvParams::init(store, &format!("{name}.conv"), channels, channels, kernel, Padding::Same, seed)?,
                activation,
            ),
            SkipInnerKind::FanConv => SkipInner::FanConv(FanConvBlockParams::init(
                store,
                &format!("{name}.fan_conv"),
                channels,
                channels,
                kernel,
                ActivationKind::Gelu,
                seed,
            )?),
        };
        Ok(Self { inner })
    }
}

pub fn skip_inner(tape: &mut Tape, store: &ParamStore, x: Var, p: &SkipParams) -> Result<Var> {
    match &p.inner {
        SkipInner::Conv(conv, act) => {
            let y = conv_layer(tape, store, x, conv)?;
            tape.activation(*act, y)
        }
        SkipInner::FanConv(fan) => fan_conv_block(tape, store, x, fan),
    }
}

fn residual(tape: &mut Tape, x: Var, branch: Var) -> Result<Var> {
    if tape.value(x).shape() != tape.value(branch).shape() {
        return Err(Error::Shape(format!(
            "residual branch {:?} does not match identity {:?}",
            tape.value(branch).shape(),
            tape.value(x).shape()
        )));
    }
    tape.add(x, branch)
}

/// `x + inner(x)`.
pub fn skip_block(tape: &mut Tape, store: &ParamStore, x: Var, p: &SkipParams) -> Result<Var> {
    let branch = skip_inner(tape, store, x, p)?;
    residual(tape, x, branch)
}

/// Squeeze-and-excitation gate over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `[hidden, channels]` and `[hidden]`.
    pub squeeze_w: ParamId,
    pub squeeze_b: ParamId,
    /// `[channels, hidden]` and `[channels]`.
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    pub channels: usize,
    pub hidden: usize,
}

impl AttentionParams {
    pub fn init(store: &mut ParamStore, name: &str, channels: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            squeeze_w: store.add_he_uniform(&format!("{name}.squeeze_w"), vec![hidden, channels], channels, seed)?,
            squeeze_b: store.add_zeros(&format!("{name}.squeeze_b"), vec![hidden])?,
            gate_w: store.add_he_uniform(&format!("{name}.gate_w"), vec![channels, hidden], hidden, seed)?,
            gate_b: store.add_zeros(&format!("{name}.gate_b"), vec![channels])?,
            channels,
            hidden,
        })
    }
}

/// `g = sigmoid(W₂ relu(W₁ gap(x) + b₁) + b₂)`, `out[c, t] = g[c] x[c, t]`.
pub fn attention_block(tape: &mut Tape, store: &ParamStore, x: Var, p: &AttentionParams) -> Result<Var> {
    let s = tape.global_avg_pool1d(x)?;
    let w1 = tape.param(store, p.squeeze_w);
    let b1 = tape.param(store, p.squeeze_b);
    let w2 = tape.param(store, p.gate_w);
    let b2 = tape.param(store, p.gate_b);
    let h = tape.dense(s, w1, Some(b1))?;
    let h = tape.activation(ActivationKind::Relu, h)?;
    let g = tape.dense(h, w2, Some(b2))?;
    let g = tape.activation(ActivationKind::Sigmoid, g)?;
    tape.scale_channels(x, g)
}

/// `x + attention(inner(x))`.
pub fn skip_attention_block(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    skip: &SkipParams,
    attention: &AttentionParams,
) -> Result<Var> {
    let branch = skip_inner(tape, store, x, skip)?;
    let gated = attention_block(tape, store, branch, attention)?;
    residual(tape, x, gated)
}

/// Out-of-range fit of `y = sin(x)`: trained on `[0, 4π]`, scored on `[4π, 6π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationResult {
    pub fan_params: usize,
    pub mlp_params: usize,
    pub fan_train_mse: f64,
    pub mlp_train_mse: f64,
    pub fan_test_mse: f64,
    pub mlp_test_mse: f64,
}

enum SineNet {
    Fan(FanFcBlockParams, FanFcBlockParams),
    Mlp(ParamId, ParamId, ParamId, ParamId),
}

fn sine_net_forward(tape: &mut Tape, store: &ParamStore, net: &SineNet, head: (ParamId, ParamId), x: Var) -> Result<Var> {
    let h = match net {
        SineNet::Fan(a, b) => {
            let h = fan_fc_block(tape, store, x, a)?;
            fan_fc_block(tape, store, h, b)?
        }
        SineNet::Mlp(w1, b1, w2, b2) => {
            let (w1, b1, w2, b2) = (tape.param(store, *w1), tape.param(store, *b1), tape.param(store, *w2), tape.param(store, *b2));
            let h = tape.dense(x, w1, Some(b1))?;
            let h = tape.activation(ActivationKind::Gelu, h)?;
            let h = tape.dense(h, w2, Some(b2))?;
            tape.activation(ActivationKind::Gelu, h)?
        }
    };
    let (w, b) = (tape.param(store, head.0), tape.param(store, head.1));
    tape.dense(h, w, Some(b))
}

/// Fits a two-block FAN network of width `fan_width` and a plain GELU
/// network with the closest parameter count (at least as many) by full-batch Adam.
pub fn sine_extrapolation(fan_width: usize, steps: usize, learning_rate: f64, seed: u64) -> Result<ExtrapolationResult> {
    use crate::tensor::{adam_step, AdamState, Tensor};
    use std::f64::consts::PI;

    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
    let train_x = grid(0.0, 4.0 * PI, 200);
    let test_x = grid(4.0 * PI, 6.0 * PI, 100);
    let target = |xs: &[f64]| -> Vec<f64> { xs.iter().map(|v| v.sin()).collect() };

    let fan_count = {
        let (dp, dpb) = fan_fc_split(fan_width)?;
        let block = |d_x: usize| (dp + dpb) * d_x + dpb;
        block(1) + block(fan_width) + fan_width + 1
    };
    let mlp_hidden = (1..)
        .find(|h| h * h + 4 * h + 1 >= fan_count)
        .expect("hidden width exists");

    let fit = |fan: bool| -> Result<(usize, f64, f64)> {
        let mut store = ParamStore::new();
        let (net, width) = if fan {
            let a = FanFcBlockParams::init(&mut store, "fan1", 1, fan_width, ActivationKind::Gelu, seed)?;
            let b = FanFcBlockParams::init(&mut store, "fan2", fan_width, fan_width, ActivationKind::Gelu, seed)?;
            (SineNet::Fan(a, b), fan_width)
        } else {
            let h = mlp_hidden;
            let w1 = store.add_he_uniform("mlp1.w", vec![h, 1], 1, seed)?;
            let b1 = store.add_zeros("mlp1.b", vec![h])?;
            let w2 = store.add_he_uniform("mlp2.w", vec![h, h], h, seed)?;
            let b2 = store.add_zeros("mlp2.b", vec![h])?;
            (SineNet::Mlp(w1, b1, w2, b2), h)
        };
        let head = (
            store.add_he_uniform("head.w", vec![1, width], width, seed)?,
            store.add_zeros("head.b", vec![1])?,
        );
        let eval = |store: &mut ParamStore, xs: &[f64], backward: bool| -> Result<f64> {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![xs.len(), 1], xs.to_vec())?);
            let y = sine_net_forward(&mut tape, store, &net, head, x)?;
            let loss = tape.mse(y, &target(xs))?;
            if backward {
                tape.backward(loss, store)?;
            }
            Ok(tape.value(loss).item())
        };
        let mut adam = AdamState::new(&store, learning_rate);
        for _ in 0..steps {
            eval(&mut store, &train_x, true)?;
            adam_step(&mut adam, &mut store);
        }
        let train = eval(&mut store, &train_x, false)?;
        let test = eval(&mut store, &test_x, false)?;
        Ok((store.scalar_count(), train, test))
    };
    let (fan_params, fan_train_mse, fan_test_mse) = fit(true)?;
    let (mlp_params, mlp_train_mse, mlp_test_mse) = fit(false)?;
    Ok(ExtrapolationResult {
        fan_params,
        mlp_params,
        fan_train_mse,
        mlp_train_mse,
        fan_test_mse,
        mlp_test_mse,
    })
}

#[cfg(test)]
mod tests;
