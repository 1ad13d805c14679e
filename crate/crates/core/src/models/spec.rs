use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::fanlayers::SkipInnerKind;
use crate::tensor::{ActivationKind, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn1d,
    Fft1d,
    Fan,
    Cfan,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Self::Cnn1d, Self::Fft1d, Self::Fan, Self::Cfan];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cnn1d => "cnn1d",
            Self::Fft1d => "fft1d",
            Self::Fan => "fan",
            Self::Cfan => "cfan",
        }
    }

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Cnn1d => "CNN1D",
            Self::Fft1d => "FFT1D",
            Self::Fan => "FAN",
            Self::Cfan => "CFAN",
        }
    }

    pub fn input_layout(self) -> InputLayout {
        match self {
            Self::Fft1d => InputLayout::Spectrum,
            _ => InputLayout::Time,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?} (expected cnn1d, fft1d, fan or cfan)")))
    }
}

/// How a raw segment is presented to the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputLayout {
    /// One channel holding the time series.
    Time,
    /// Two channels of `⌊n/2⌋+1` bins: real parts, then imaginary parts.
    Spectrum,
}

impl InputLayout {
    /// `(channels, length)` of the network input for a segment of `n` samples.
    pub fn dims(self, n: usize) -> (usize, usize) {
        match self {
            Self::Time => (1, n),
            Self::Spectrum => (2, n / 2 + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: usize,
        padding: Padding,
        /// `None` leaves the layer linear.
        activation: Option<ActivationKind>,
    },
    FanConv {
        filters: usize,
        kernel: usize,
    },
    /// Channel-preserving inner layer applied without a residual.
    Plain {
        inner: SkipInnerKind,
        kernel: usize,
        activation: ActivationKind,
    },
    Skip {
        inner: SkipInnerKind,
        kernel: usize,
        activation: ActivationKind,
    },
    Attention {
        hidden: usize,
    },
    SkipAttention {
        inner: SkipInnerKind,
        kernel: usize,
        activation: ActivationKind,
        hidden: usize,
    },
    Activation {
        activation: ActivationKind,
    },
    AvgPool {
        pool: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        units: usize,
        activation: Option<ActivationKind>,
    },
    FanDense {
        units: usize,
    },
    /// Dense layer followed by softmax.
    Output {
        classes: usize,
    },
}

/// Residual/attention block choice of the architecture search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    None,
    Plain,
    Skip,
    Attention,
    SkipAttention,
}

/// Hyperparameters of the convolutional stacks. The defaults per task are
/// the final configurations; [`ArchOptions::version`] gives the earlier
/// steps of the apnea architecture search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchOptions {
    pub filters: usize,
    pub kernel: usize,
    pub padding: Padding,
    pub activation: ActivationKind,
    pub block: BlockKind,
    pub pooling: bool,
    pub fc_units: [usize; 2],
    pub attention_hidden: usize,
}

impl ArchOptions {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Mitbih | Task::Ecgid => Self {
                filters: 96,
                kernel: 64,
                padding: Padding::Same,
                activation: ActivationKind::Relu,
                block: BlockKind::Skip,
                pooling: false,
                fc_units: [120, 84],
                attention_hidden: 12,
            },
            Task::Apnea => Self::version(7).expect("v7 exists"),
        }
    }

    /// Apnea architecture-search step `v0`..`v7`.
    pub fn version(v: u8) -> Result<Self> {
        let mut o = Self {
            filters: 12,
            kernel: 64,
            padding: Padding::Same,
            activation: ActivationKind::Sigmoid,
            block: BlockKind::SkipAttention,
            pooling: true,
            fc_units: [120, 84],
            attention_hidden: 12,
        };
        match v {
            0 => {
                o.filters = 6;
                o.kernel = 25;
                o.padding = Padding::Causal;
                o.block = BlockKind::None;
            }
            1 => o.block = BlockKind::None,
            2 => o.block = BlockKind::Plain,
            3 => o.block = BlockKind::Skip,
            4 => {}
            5 => o.activation = ActivationKind::Swish,
            6 => o.activation = ActivationKind::Gelu,
            7 => o.activation = ActivationKind::Relu,
            _ => return Err(Error::Config(format!("no architecture version v{v}"))),
        }
        Ok(o)
    }

    /// Same layout with fewer filters and units, for fast experiments.
    pub fn scaled(mut self, filters: usize, kernel: usize, fc_units: [usize; 2]) -> Self {
        self.filters = filters;
        self.kernel = kernel;
        self.fc_units = fc_units;
        self.attention_hidden = self.attention_hidden.min(filters.max(1));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub task: Option<Task>,
    pub layout: InputLayout,
    /// Raw segment length before the input transform.
    pub segment_len: usize,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// The final network of `architecture` for `task`.
    pub fn for_task(architecture: Architecture, task: Task) -> Result<Self> {
        Self::with_options(architecture, task, &ArchOptions::for_task(task))
    }

    pub fn with_options(architecture: Architecture, task: Task, opts: &ArchOptions) -> Result<Self> {
        let layers = stack(architecture, task == Task::Apnea, opts, task.n_classes());
        let spec = Self {
            architecture,
            task: Some(task),
            layout: architecture.input_layout(),
            segment_len: task.segment_len(),
            n_classes: task.n_classes(),
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A network for arbitrary segment length and class count, using the
    /// beat stack (`pooled = false`) or the apnea stack (`pooled = true`).
    pub fn custom(
        architecture: Architecture,
        segment_len: usize,
        n_classes: usize,
        pooled: bool,
        opts: &ArchOptions,
    ) -> Result<Self> {
        let spec = Self {
            architecture,
            task: None,
            layout: architecture.input_layout(),
            segment_len,
            n_classes,
            layers: stack(architecture, pooled, opts, n_classes),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `(channels, length)` of the network input.
    pub fn input_dims(&self) -> (usize, usize) {
        self.layout.dims(self.segment_len)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(task) = self.task {
            if self.n_classes != task.n_classes() {
                return Err(Error::Config(format!(
                    "{task} has {} classes, spec declares {}",
                    task.n_classes(),
                    self.n_classes
                )));
            }
            if self.segment_len != task.segment_len() {
                return Err(Error::Config(format!(
                    "{task} segments have {} samples, spec declares {}",
                    task.segment_len(),
                    self.segment_len
                )));
            }
        }
        if self.layout != self.architecture.input_layout() {
            return Err(Error::Config(format!(
                "{} requires the {:?} input layout",
                self.architecture,
                self.architecture.input_layout()
            )));
        }
        match self.layers.last() {
            Some(LayerSpec::Output { classes }) if *classes == self.n_classes => Ok(()),
            _ => Err(Error::Config(format!(
                "the final layer must be a softmax output of {} classes",
                self.n_classes
            ))),
        }
    }
}

fn stack(arch: Architecture, pooled: bool, o: &ArchOptions, n_classes: usize) -> Vec<LayerSpec> {
    let fan_conv = arch == Architecture::Cfan;
    let fan_fc = matches!(arch, Architecture::Fan | Architecture::Cfan);
    let inner = if fan_conv { SkipInnerKind::FanConv } else { SkipInnerKind::Conv };
    let conv = |activation: Option<ActivationKind>| {
        if fan_conv {
            LayerSpec::FanConv {
                filters: o.filters,
                kernel: o.kernel,
            }
        } else {
            LayerSpec::Conv {
                filters: o.filters,
                kernel: o.kernel,
                padding: o.padding,
                activation,
            }
        }
    };
    let block = || match o.block {
        BlockKind::None => None,
        BlockKind::Plain => Some(LayerSpec::Plain {
            inner,
            kernel: o.kernel,
            activation: o.activation,
        }),
        BlockKind::Skip => Some(LayerSpec::Skip {
            inner,
            kernel: o.kernel,
            activation: o.activation,
        }),
        BlockKind::Attention => Some(LayerSpec::Attention {
            hidden: o.attention_hidden,
        }),
        BlockKind::SkipAttention => Some(LayerSpec::SkipAttention {
            inner,
            kernel: o.kernel,
            activation: o.activation,
            hidden: o.attention_hidden,
        }),
    };

    let mut layers = Vec::new();
    if pooled {
        for _ in 0..2 {
            layers.push(conv(None));
            layers.extend(block());
            layers.push(LayerSpec::Activation {
                activation: o.activation,
            });
            if o.pooling {
                layers.push(LayerSpec::AvgPool { pool: 4, stride: 4 });
            }
        }
    } else {
        layers.push(conv(Some(o.activation)));
        layers.extend(block());
        layers.push(conv(Some(o.activation)));
        if o.pooling {
            layers.push(LayerSpec::AvgPool { pool: 4, stride: 4 });
        }
    }
    layers.push(LayerSpec::GlobalAvgPool);
    for units in o.fc_units {
        layers.push(if fan_fc {
            LayerSpec::FanDense { units }
        } else {
            LayerSpec::Dense {
                units,
                activation: Some(o.activation),
            }
        });
    }
    layers.push(LayerSpec::Output { classes: n_classes });
    layers
}
