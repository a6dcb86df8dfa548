//! LeNet and MLP families at the published widths and depths.
//!
//! Channel and neuron counts are `floor(k * base / 6)` for a width factor of
//! `k/6`. The starred `1/6*` variant keeps `1/6` for convolutions and uses
//! `1/24` for the fully connected layers. Removing a convolution keeps both
//! pooling stages, which is what the published 1c-1f totals (198 for MNIST,
//! 350 for CIFAR-10) require.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{LayerKind, NetworkSpec};

pub const LENET_CONV: [usize; 2] = [6, 16];
pub const LENET_FC: [usize; 2] = [120, 84];
pub const MLP_HIDDEN: [usize; 4] = [120, 60, 30, 12];

pub const MNIST_SHAPE: [usize; 3] = [1, 28, 28];
pub const CIFAR_SHAPE: [usize; 3] = [3, 32, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WidthFactor {
    sixths: u8,
    starred: bool,
}

impl WidthFactor {
    pub const ONE_SIXTH_STAR: WidthFactor = WidthFactor { sixths: 1, starred: true };
    pub const FULL: WidthFactor = WidthFactor { sixths: 6, starred: false };

    pub fn new(sixths: u8, starred: bool) -> Result<Self> {
        if !(1..=6).contains(&sixths) || (starred && sixths != 1) {
            return Err(Error::Architecture(format!(
                "width {sixths}/6{} not in {}",
                if starred { "*" } else { "" },
                Self::valid_list()
            )));
        }
        Ok(WidthFactor { sixths, starred })
    }

    pub fn sixths(k: u8) -> Self {
        Self::new(k, false).expect("width in 1..=6")
    }

    /// All widths of the published sweep, narrowest first.
    pub fn all() -> [WidthFactor; 7] {
        [
            Self::ONE_SIXTH_STAR,
            Self::sixths(1),
            Self::sixths(2),
            Self::sixths(3),
            Self::sixths(4),
            Self::sixths(5),
            Self::FULL,
        ]
    }

    fn valid_list() -> &'static str {
        "{1/6*, 1/6, 2/6, 3/6, 4/6, 5/6, 1}"
    }

    pub fn conv(&self, base: usize) -> usize {
        self.sixths as usize * base / 6
    }

    pub fn dense(&self, base: usize) -> usize {
        if self.starred {
            base / 24
        } else {
            self.sixths as usize * base / 6
        }
    }

    /// Numeric value used for ordering in sweeps (1/6* sorts below 1/6).
    pub fn as_f64(&self) -> f64 {
        if self.starred {
            1.0 / 24.0
        } else {
            self.sixths as f64 / 6.0
        }
    }
}

impl fmt::Display for WidthFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.sixths, self.starred) {
            (6, _) => f.write_str("1"),
            (k, true) => write!(f, "{k}/6*"),
            (k, false) => write!(f, "{k}/6"),
        }
    }
}

impl FromStr for WidthFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, starred) = match s.strip_suffix('*') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let sixths = match body {
            "1" | "6/6" => 6,
            _ => body
                .strip_suffix("/6")
                .and_then(|k| k.parse::<u8>().ok())
                .ok_or_else(|| {
                    Error::Architecture(format!("width '{s}' not in {}", Self::valid_list()))
                })?,
        };
        WidthFactor::new(sixths, starred)
    }
}

/// A point on the depth ladder 2c-3f -> 2c-2f -> 2c-1f -> 1c-1f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DepthConfig {
    pub conv_layers: u8,
    pub fc_layers: u8,
}

impl DepthConfig {
    pub const STANDARD: DepthConfig = DepthConfig { conv_layers: 2, fc_layers: 3 };

    /// Deepest first; each step discards the largest remaining layer.
    pub fn ladder() -> [DepthConfig; 4] {
        [
            DepthConfig { conv_layers: 2, fc_layers: 3 },
            DepthConfig { conv_layers: 2, fc_layers: 2 },
            DepthConfig { conv_layers: 2, fc_layers: 1 },
            DepthConfig { conv_layers: 1, fc_layers: 1 },
        ]
    }

    pub fn new(conv_layers: u8, fc_layers: u8) -> Result<Self> {
        let d = DepthConfig { conv_layers, fc_layers };
        if Self::ladder().contains(&d) {
            Ok(d)
        } else {
            Err(Error::Architecture(format!(
                "depth {d} not in {{2c-3f, 2c-2f, 2c-1f, 1c-1f}}"
            )))
        }
    }

    pub fn layer_count(&self) -> usize {
        (self.conv_layers + self.fc_layers) as usize
    }
}

impl fmt::Display for DepthConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}c-{}f", self.conv_layers, self.fc_layers)
    }
}

impl FromStr for DepthConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Architecture(format!("depth '{s}' not in {{2c-3f, 2c-2f, 2c-1f, 1c-1f}}"));
        let (c, f) = s.trim().split_once('-').ok_or_else(bad)?;
        let c = c.strip_suffix('c').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let f = f.strip_suffix('f').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        DepthConfig::new(c, f)
    }
}

fn check_image_shape(input_shape: &[usize]) -> Result<()> {
    if input_shape == MNIST_SHAPE || input_shape == CIFAR_SHAPE {
        Ok(())
    } else {
        Err(Error::Architecture(format!(
            "input shape {input_shape:?} is neither 1x28x28 nor 3x32x32"
        )))
    }
}

pub fn build_lenet(input_shape: &[usize], width: WidthFactor, depth: DepthConfig) -> Result<NetworkSpec> {
    check_image_shape(input_shape)?;
    let depth = DepthConfig::new(depth.conv_layers, depth.fc_layers)?;
    let mut layers = Vec::new();
    for (i, &base) in LENET_CONV.iter().enumerate() {
        if i < depth.conv_layers as usize {
            layers.push(LayerKind::Conv5x5 { out_channels: width.conv(base) });
            layers.push(LayerKind::Relu);
        }
        layers.push(LayerKind::MaxPool2x2);
    }
    layers.push(LayerKind::Flatten);
    let hidden = depth.fc_layers as usize - 1;
    for &base in &LENET_FC[LENET_FC.len() - hidden..] {
        layers.push(LayerKind::Dense { out_features: width.dense(base) });
        layers.push(LayerKind::Relu);
    }
    layers.push(LayerKind::Dense { out_features: 2 });
    let name = format!("lenet-{}-{}-{}", dataset_tag(input_shape), width, depth);
    let experimental = depth != DepthConfig::STANDARD && width != WidthFactor::sixths(2);
    Ok(NetworkSpec::new(name, input_shape.to_vec(), layers)?.with_experimental(experimental))
}

/// MLP with a 2x2 max-pool front end; `depth_drop` removes that many of the
/// largest hidden layers.
pub fn build_mlp(input_shape: &[usize], width: WidthFactor, depth_drop: usize) -> Result<NetworkSpec> {
    check_image_shape(input_shape)?;
    if depth_drop > MLP_HIDDEN.len() {
        return Err(Error::Architecture(format!(
            "cannot drop {depth_drop} of {} hidden layers",
            MLP_HIDDEN.len()
        )));
    }
    let mut layers = vec![LayerKind::MaxPool2x2, LayerKind::Flatten];
    for &base in &MLP_HIDDEN[depth_drop..] {
        let n = width.dense(base);
        if n == 0 {
            return Err(Error::Architecture(format!(
                "width {width} leaves the {base}-neuron layer empty"
            )));
        }
        layers.push(LayerKind::Dense { out_features: n });
        layers.push(LayerKind::Relu);
    }
    layers.push(LayerKind::Dense { out_features: 2 });
    let name = format!("mlp-{}-{}-drop{}", dataset_tag(input_shape), width, depth_drop);
    let experimental = depth_drop > 0 && width != WidthFactor::sixths(2);
    Ok(NetworkSpec::new(name, input_shape.to_vec(), layers)?.with_experimental(experimental))
}

/// Fully connected ReLU net on flat inputs of any shape, for small
/// synthetic tasks.
pub fn build_dense(input_shape: &[usize], hidden: &[usize]) -> Result<NetworkSpec> {
    if hidden.contains(&0) {
        return Err(Error::Architecture("hidden layers must be non-empty".into()));
    }
    let mut layers = Vec::new();
    for &n in hidden {
        layers.push(LayerKind::Dense { out_features: n });
        layers.push(LayerKind::Relu);
    }
    layers.push(LayerKind::Dense { out_features: 2 });
    let name = format!("dense-{}", ArchChoice::Dense { hidden: hidden.to_vec() });
    NetworkSpec::new(name, input_shape.to_vec(), layers)
}

/// One architecture of a sweep, e.g. `lenet:2/6:2c-3f`, `mlp:1:0` (width,
/// dropped layers) or `dense:8-8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchChoice {
    Lenet { width: WidthFactor, depth: DepthConfig },
    Mlp { width: WidthFactor, drop: usize },
    Dense { hidden: Vec<usize> },
}

impl ArchChoice {
    pub fn build(&self, input_shape: &[usize]) -> Result<NetworkSpec> {
        match self {
            ArchChoice::Lenet { width, depth } => build_lenet(input_shape, *width, *depth),
            ArchChoice::Mlp { width, drop } => build_mlp(input_shape, *width, *drop),
            ArchChoice::Dense { hidden } => build_dense(input_shape, hidden),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ArchChoice::Lenet { .. } => "lenet",
            ArchChoice::Mlp { .. } => "mlp",
            ArchChoice::Dense { .. } => "dense",
        }
    }
}

impl fmt::Display for ArchChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchChoice::Lenet { width, depth } => write!(f, "lenet:{width}:{depth}"),
            ArchChoice::Mlp { width, drop } => write!(f, "mlp:{width}:{drop}"),
            ArchChoice::Dense { hidden } => {
                let h: Vec<String> = hidden.iter().map(|n| n.to_string()).collect();
                write!(f, "dense:{}", h.join("-"))
            }
        }
    }
}

impl FromStr for ArchChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Architecture(format!("cannot parse architecture '{s}'"));
        match parts.as_slice() {
            ["lenet", w, d] => Ok(ArchChoice::Lenet { width: w.parse()?, depth: d.parse()? }),
            ["mlp", w, k] => Ok(ArchChoice::Mlp {
                width: w.parse()?,
                drop: k.parse().map_err(|_| bad())?,
            }),
            ["dense", h] => {
                let hidden = if h.is_empty() {
                    Vec::new()
                } else {
                    h.split('-').map(|v| v.parse().map_err(|_| bad())).collect::<Result<_>>()?
                };
                Ok(ArchChoice::Dense { hidden })
            }
            _ => Err(bad()),
        }
    }
}

pub fn count_params(spec: &NetworkSpec) -> usize {
    spec.count_params()
}

fn dataset_tag(shape: &[usize]) -> &'static str {
    if shape == MNIST_SHAPE {
        "mnist"
    } else {
        "cifar10"
    }
}
