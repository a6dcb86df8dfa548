use crate::error::{Error, Result};
use crate::nn::spec::NetworkSpec;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Weights and biases instantiating a [`NetworkSpec`], one entry per conv or
/// dense layer in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layers: Vec<LayerParams>,
}

impl ParameterSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .param_shapes()
            .iter()
            .map(|p| LayerParams {
                weight: Tensor::zeros(p.weight.clone()),
                bias: Tensor::zeros(vec![p.bias]),
            })
            .collect();
        ParameterSet { layers }
    }

    pub fn from_layers(spec: &NetworkSpec, layers: Vec<LayerParams>) -> Result<Self> {
        let set = ParameterSet { layers };
        set.check(spec)?;
        Ok(set)
    }

    /// Rebuilds from the flat order produced by [`ParameterSet::to_flat`].
    pub fn from_flat(spec: &NetworkSpec, values: &[f64]) -> Result<Self> {
        let mut set = ParameterSet::zeros(spec);
        if values.len() != set.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameter values, got {}",
                set.len(),
                values.len()
            )));
        }
        for (dst, src) in set.values_mut().zip(values) {
            *dst = *src;
        }
        Ok(set)
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let shapes = spec.param_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter set has {} layers, spec {} has {}",
                self.layers.len(),
                spec.name(),
                shapes.len()
            )));
        }
        for (p, lp) in shapes.iter().zip(&self.layers) {
            if lp.weight.shape() != p.weight.as_slice() || lp.bias.shape() != [p.bias] {
                return Err(Error::Shape {
                    layer: p.layer,
                    kind: "parameters".into(),
                    expected: p.weight.clone(),
                    got: lp.weight.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Layer by layer, weights then bias.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.data()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| {
            let LayerParams { weight, bias } = l;
            weight.data_mut().iter_mut().chain(bias.data_mut().iter_mut())
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    pub fn norm2(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParameterSet) {
        for (dst, src) in self.values_mut().zip(other.values()) {
            *dst += alpha * src;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.values_mut().for_each(|v| *v = value);
    }

    /// Multiplies the weights of parametric layer `index` by `factor`, and
    /// its bias too when `with_bias` is set.
    pub fn scale_layer(&mut self, index: usize, factor: f64, with_bias: bool) {
        let layer = &mut self.layers[index];
        layer.weight.scale(factor);
        if with_bias {
            layer.bias.scale(factor);
        }
    }

    pub fn zero_biases(&mut self) {
        for l in &mut self.layers {
            l.bias.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn has_zero_biases(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.bias.data().iter().all(|&v| v == 0.0))
    }

    /// Product of the Frobenius norms of the weight tensors (biases excluded).
    pub fn frobenius_product(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.norm2()).product()
    }
}
