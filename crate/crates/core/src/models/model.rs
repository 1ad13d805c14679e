use std::io::{Read, Write};

use crate::dataset::LabeledSegment;
use crate::dsp::RealFft;
use crate::error::{Error, Result};
use crate::fanlayers::{
    attention_block, conv_layer, fan_conv_block, fan_fc_block, skip_attention_block, skip_block, skip_inner,
    AttentionParams, ConvParams, FanConvBlockParams, FanFcBlockParams, SkipParams,
};
use crate::tensor::{ActivationKind, ParamId, ParamStore, Tape, Tensor, Var};

use super::spec::{InputLayout, LayerSpec, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv(ConvParams, Option<ActivationKind>),
    FanConv(FanConvBlockParams),
    Plain(SkipParams),
    Skip(SkipParams),
    Attention(AttentionParams),
    SkipAttention(SkipParams, AttentionParams),
    Activation(ActivationKind),
    AvgPool { pool: usize, stride: usize },
    GlobalAvgPool,
    Dense { w: ParamId, b: ParamId, activation: Option<ActivationKind> },
    FanDense(FanFcBlockParams),
    Output { w: ParamId, b: ParamId },
}

#[derive(Clone, Copy)]
enum Flow {
    Seq { channels: usize, length: usize },
    Feat(usize),
}

/// A built network: its spec, layer wiring and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParamStore,
    layers: Vec<Layer>,
}

fn shape_error(i: usize, what: &str) -> Error {
    Error::Config(format!("layer {i}: {what}"))
}

/// Instantiates `spec` with He-uniform weights and zero biases drawn from `seed`.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut store = ParamStore::new();
    let (c0, l0) = spec.input_dims();
    let mut flow = Flow::Seq {
        channels: c0,
        length: l0,
    };
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, ls) in spec.layers.iter().enumerate() {
        let name = format!("l{i}");
        let seq = match flow {
            Flow::Seq { channels, length } => Some((channels, length)),
            Flow::Feat(_) => None,
        };
        let need_seq = || seq.ok_or_else(|| shape_error(i, "expects a sequence input"));
        let need_feat = || match flow {
            Flow::Feat(w) => Ok(w),
            Flow::Seq { .. } => Err(shape_error(i, "expects a feature vector; add global pooling first")),
        };
        let layer = match ls {
            LayerSpec::Conv {
                filters,
                kernel,
                padding,
                activation,
            } => {
                let (c, l) = need_seq()?;
                flow = Flow::Seq {
                    channels: *filters,
                    length: l,
                };
                Layer::Conv(ConvParams::init(&mut store, &name, c, *filters, *kernel, *padding, seed)?, *activation)
            }
            LayerSpec::FanConv { filters, kernel } => {
                let (c, l) = need_seq()?;
                flow = Flow::Seq {
                    channels: *filters,
                    length: l,
                };
                Layer::FanConv(FanConvBlockParams::init(
                    &mut store,
                    &name,
                    c,
                    *filters,
                    *kernel,
                    ActivationKind::Gelu,
                    seed,
                )?)
            }
            LayerSpec::Plain {
                inner,
                kernel,
                activation,
            } => {
                let (c, _) = need_seq()?;
                Layer::Plain(SkipParams::init(&mut store, &name, *inner, c, *kernel, *activation, seed)?)
            }
            LayerSpec::Skip {
                inner,
                kernel,
                activation,
            } => {
                let (c, _) = need_seq()?;
                Layer::Skip(SkipParams::init(&mut store, &name, *inner, c, *kernel, *activation, seed)?)
            }
            LayerSpec::Attention { hidden } => {
                let (c, _) = need_seq()?;
                Layer::Attention(AttentionParams::init(&mut store, &name, c, *hidden, seed)?)
            }
            LayerSpec::SkipAttention {
                inner,
                kernel,
                activation,
                hidden,
            } => {
                let (c, _) = need_seq()?;
                let skip = SkipParams::init(&mut store, &format!("{name}.skip"), *inner, c, *kernel, *activation, seed)?;
                let att = AttentionParams::init(&mut store, &format!("{name}.attention"), c, *hidden, seed)?;
                Layer::SkipAttention(skip, att)
            }
            LayerSpec::Activation { activation } => Layer::Activation(*activation),
            LayerSpec::AvgPool { pool, stride } => {
                let (c, l) = need_seq()?;
                if l < *pool || *pool == 0 || *stride == 0 {
                    return Err(shape_error(i, &format!("cannot pool length {l} with window {pool}")));
                }
                flow = Flow::Seq {
                    channels: c,
                    length: (l - pool) / stride + 1,
                };
                Layer::AvgPool {
                    pool: *pool,
                    stride: *stride,
                }
            }
            LayerSpec::GlobalAvgPool => {
                let (c, _) = need_seq()?;
                flow = Flow::Feat(c);
                Layer::GlobalAvgPool
            }
            LayerSpec::Dense { units, activation } => {
                let d = need_feat()?;
                flow = Flow::Feat(*units);
                Layer::Dense {
                    w: store.add_he_uniform(&format!("{name}.w"), vec![*units, d], d, seed)?,
                    b: store.add_zeros(&format!("{name}.b"), vec![*units])?,
                    activation: *activation,
                }
            }
            LayerSpec::FanDense { units } => {
                let d = need_feat()?;
                let p = FanFcBlockParams::init(&mut store, &name, d, *units, ActivationKind::Gelu, seed)?;
                flow = Flow::Feat(p.width());
                Layer::FanDense(p)
            }
            LayerSpec::Output { classes } => {
                let d = need_feat()?;
                flow = Flow::Feat(*classes);
                Layer::Output {
                    w: store.add_he_uniform(&format!("{name}.w"), vec![*classes, d], d, seed)?,
                    b: store.add_zeros(&format!("{name}.b"), vec![*classes])?,
                }
            }
        };
        layers.push(layer);
    }
    Ok(Model {
        spec: spec.clone(),
        params: store,
        layers,
    })
}

impl Model {
    /// Network input `[B, C, L]` for raw single-channel segments, applying
    /// the spectrum transform when the layout asks for it.
    pub fn input_tensor(&self, segments: &[&[f64]]) -> Result<Tensor> {
        let n = self.spec.segment_len;
        let (c, l) = self.spec.input_dims();
        let mut data = Vec::with_capacity(segments.len() * c * l);
        let fft = match self.spec.layout {
            InputLayout::Spectrum => Some(RealFft::new(n)),
            InputLayout::Time => None,
        };
        for (i, s) in segments.iter().enumerate() {
            if s.len() != n {
                return Err(Error::Shape(format!(
                    "segment {i} has {} samples, the model expects {n}",
                    s.len()
                )));
            }
            match &fft {
                None => data.extend_from_slice(s),
                Some(f) => {
                    let spec = f.transform(s);
                    data.extend_from_slice(&spec.real);
                    data.extend_from_slice(&spec.imag);
                }
            }
        }
        Tensor::new(vec![segments.len(), c, l], data)
    }

    /// Class probabilities `[B, n_classes]` for an input built by [`Model::input_tensor`].
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let s = &self.params;
        let mut h = x;
        for layer in &self.layers {
            h = match layer {
                Layer::Conv(p, act) => {
                    let y = conv_layer(tape, s, h, p)?;
                    match act {
                        Some(a) => tape.activation(*a, y)?,
                        None => y,
                    }
                }
                Layer::FanConv(p) => fan_conv_block(tape, s, h, p)?,
                Layer::Plain(p) => skip_inner(tape, s, h, p)?,
                Layer::Skip(p) => skip_block(tape, s, h, p)?,
                Layer::Attention(p) => attention_block(tape, s, h, p)?,
                Layer::SkipAttention(sk, at) => skip_attention_block(tape, s, h, sk, at)?,
                Layer::Activation(a) => tape.activation(*a, h)?,
                Layer::AvgPool { pool, stride } => tape.avg_pool1d(h, *pool, *stride)?,
                Layer::GlobalAvgPool => tape.global_avg_pool1d(h)?,
                Layer::Dense { w, b, activation } => {
                    let (wv, bv) = (tape.param(s, *w), tape.param(s, *b));
                    let y = tape.dense(h, wv, Some(bv))?;
                    match activation {
                        Some(a) => tape.activation(*a, y)?,
                        None => y,
                    }
                }
                Layer::FanDense(p) => fan_fc_block(tape, s, h, p)?,
                Layer::Output { w, b } => {
                    let (wv, bv) = (tape.param(s, *w), tape.param(s, *b));
                    let y = tape.dense(h, wv, Some(bv))?;
                    tape.softmax(y)?
                }
            };
        }
        Ok(h)
    }

    /// Probability rows for raw segments, evaluated `chunk` at a time.
    pub fn predict_raw(&self, segments: &[&[f64]], chunk: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(segments.len());
        for part in segments.chunks(chunk.max(1)) {
            let mut tape = Tape::new();
            let x = tape.constant(self.input_tensor(part)?);
            let p = self.forward(&mut tape, x)?;
            out.extend(tape.value(p).data().chunks(self.spec.n_classes).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    /// Parameter ids of the final softmax layer.
    pub fn output_params(&self) -> Option<(ParamId, ParamId)> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Output { w, b } => Some((*w, *b)),
            _ => None,
        })
    }

    pub fn save_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        self.params.save_checkpoint(w)
    }

    pub fn load_checkpoint(&mut self, r: &mut impl Read) -> Result<()> {
        self.params.load_checkpoint(r)
    }
}

/// Probability matrix `[n_segments × n_classes]`.
pub fn predict(model: &Model, segments: &[&LabeledSegment]) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<&[f64]> = segments.iter().map(|s| s.samples.as_slice()).collect();
    model.predict_raw(&raw, 64)
}
