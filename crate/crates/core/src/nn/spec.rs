use std::fmt;

use crate::error::{Error, Result};

pub const KERNEL: usize = 5;
pub const POOL: usize = 2;

/// One layer of a feed-forward network. Conv kernels are 5x5, stride 1,
/// no padding; pooling is 2x2 max with stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv5x5 { out_channels: usize },
    MaxPool2x2,
    Relu,
    Flatten,
    Dense { out_features: usize },
}

impl LayerKind {
    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerKind::Conv5x5 { .. } | LayerKind::Dense { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv5x5 { .. } => "conv5x5",
            LayerKind::MaxPool2x2 => "maxpool2x2",
            LayerKind::Relu => "relu",
            LayerKind::Flatten => "flatten",
            LayerKind::Dense { .. } => "dense",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Conv5x5 { out_channels } => write!(f, "conv5x5({out_channels})"),
            LayerKind::Dense { out_features } => write!(f, "dense({out_features})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Shapes of the weight and bias of a parametric layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape {
    /// Index of the owning layer in [`NetworkSpec::layers`].
    pub layer: usize,
    pub weight: Vec<usize>,
    pub bias: usize,
    pub fan_in: usize,
}

impl ParamShape {
    pub fn weight_len(&self) -> usize {
        self.weight.iter().product()
    }
}

/// Immutable layer topology with all intermediate shapes resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerKind>,
    /// `shapes[i]` is the output shape of layer `i`.
    shapes: Vec<Vec<usize>>,
    params: Vec<ParamShape>,
    /// Set for configurations outside the published tables.
    experimental: bool,
}

impl NetworkSpec {
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        layers: Vec<LayerKind>,
    ) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Architecture(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut params = Vec::new();
        let mut current = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            let bad = |what: &str| Error::Shape {
                layer: i,
                kind: format!("{layer}: {what}"),
                expected: vec![],
                got: current.clone(),
            };
            let next = match *layer {
                LayerKind::Conv5x5 { out_channels } => {
                    let [c, h, w] = three_d(&current).ok_or_else(|| bad("needs CxHxW input"))?;
                    if h < KERNEL || w < KERNEL {
                        return Err(bad("spatial extent below kernel size"));
                    }
                    if out_channels == 0 {
                        return Err(Error::Architecture(format!("layer {i}: zero channels")));
                    }
                    params.push(ParamShape {
                        layer: i,
                        weight: vec![out_channels, c, KERNEL, KERNEL],
                        bias: out_channels,
                        fan_in: c * KERNEL * KERNEL,
                    });
                    vec![out_channels, h - KERNEL + 1, w - KERNEL + 1]
                }
                LayerKind::MaxPool2x2 => {
                    let [c, h, w] = three_d(&current).ok_or_else(|| bad("needs CxHxW input"))?;
                    if h < POOL || w < POOL {
                        return Err(bad("spatial extent below pool size"));
                    }
                    vec![c, h / POOL, w / POOL]
                }
                LayerKind::Relu => current.clone(),
                LayerKind::Flatten => vec![current.iter().product()],
                LayerKind::Dense { out_features } => {
                    if out_features == 0 {
                        return Err(Error::Architecture(format!("layer {i}: zero features")));
                    }
                    let fan_in: usize = current.iter().product();
                    params.push(ParamShape {
                        layer: i,
                        weight: vec![out_features, fan_in],
                        bias: out_features,
                        fan_in,
                    });
                    vec![out_features]
                }
            };
            shapes.push(next.clone());
            current = next;
        }
        Ok(NetworkSpec {
            name: name.into(),
            input_shape,
            layers,
            shapes,
            params,
            experimental: false,
        })
    }

    pub fn with_experimental(mut self, experimental: bool) -> Self {
        self.experimental = experimental;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn output_shape(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    /// Shape of the value fed into `layer`.
    pub fn input_shape_of(&self, layer: usize) -> &[usize] {
        if layer == 0 {
            &self.input_shape
        } else {
            &self.shapes[layer - 1]
        }
    }

    pub fn output_len(&self) -> usize {
        self.shapes
            .last()
            .map(|s| s.iter().product())
            .unwrap_or_else(|| self.input_len())
    }

    pub fn param_shapes(&self) -> &[ParamShape] {
        &self.params
    }

    pub fn is_experimental(&self) -> bool {
        self.experimental
    }

    /// Weights plus biases over all conv and dense layers.
    pub fn count_params(&self) -> usize {
        self.params.iter().map(|p| p.weight_len() + p.bias).sum()
    }

    /// Length of the feature vector entering the first dense layer.
    pub fn flatten_len(&self) -> Option<usize> {
        self.params
            .iter()
            .find(|p| matches!(self.layers[p.layer], LayerKind::Dense { .. }))
            .map(|p| p.fan_in)
    }

    /// Human-readable provenance document: one line per layer plus totals.
    pub fn describe(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "input = {}", dims(&self.input_shape));
        let _ = writeln!(out, "experimental = {}", self.experimental);
        let mut param_iter = self.params.iter().peekable();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut line = format!("layer {i:>2} {:<16} -> {}", layer.to_string(), dims(&self.shapes[i]));
            if param_iter.peek().map(|p| p.layer) == Some(i) {
                let p = param_iter.next().unwrap();
                let _ = write!(
                    line,
                    "  weights {} ({}) bias {}",
                    dims(&p.weight),
                    p.weight_len(),
                    p.bias
                );
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "params = {}", self.count_params());
        out
    }
}

fn three_d(shape: &[usize]) -> Option<[usize; 3]> {
    match *shape {
        [c, h, w] => Some([c, h, w]),
        _ => None,
    }
}

fn dims(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_and_pool_extents() {
        let spec = NetworkSpec::new(
            "t",
            vec![1, 13, 11],
            vec![
                LayerKind::Conv5x5 { out_channels: 3 },
                LayerKind::MaxPool2x2,
            ],
        )
        .unwrap();
        assert_eq!(spec.output_shape(0), &[3, 9, 7]);
        assert_eq!(spec.output_shape(1), &[3, 4, 3]);
    }

    #[test]
    fn empty_spec_has_no_params() {
        let spec = NetworkSpec::new("empty", vec![2], vec![]).unwrap();
        assert_eq!(spec.count_params(), 0);
        assert_eq!(spec.output_len(), 2);
    }

    #[test]
    fn conv_needs_spatial_input() {
        let err = NetworkSpec::new("t", vec![4], vec![LayerKind::Conv5x5 { out_channels: 1 }]);
        assert!(matches!(err, Err(Error::Shape { layer: 0, .. })));
        let err = NetworkSpec::new("t", vec![1, 4, 8], vec![LayerKind::Conv5x5 { out_channels: 1 }]);
        assert!(err.is_err());
    }

    #[test]
    fn describe_lists_every_layer() {
        let spec = NetworkSpec::new(
            "d",
            vec![3],
            vec![LayerKind::Dense { out_features: 4 }, LayerKind::Relu, LayerKind::Dense { out_features: 2 }],
        )
        .unwrap();
        let text = spec.describe();
        assert!(text.contains("params = 26"));
        assert_eq!(text.lines().filter(|l| l.starts_with("layer")).count(), 3);
    }
}
