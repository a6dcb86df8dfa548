//! Weight priors and the counter-addressed seed contract.
//!
//! Draw `k` of a [`SeedPlan`] reads from ChaCha8 stream `k` under the key
//! derived from the base seed, so a parameter set depends only on
//! `(base_seed, k)` and never on which worker produced it or when.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    /// `U[-bound, bound]` for every weight and bias regardless of layer.
    UniformSymmetric { bound: f64 },
    /// `U[-sqrt(6/fan_in), sqrt(6/fan_in)]` per layer.
    KaimingUniform,
    /// `N(0, 2/fan_in)` per layer.
    KaimingGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasInit {
    /// Same per-layer distribution as the weights.
    #[default]
    FromPrior,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub kind: PriorKind,
    pub bias: BiasInit,
}

impl Prior {
    pub const NAMES: [&'static str; 4] = ["uniform1", "uniform02", "kaiming_uniform", "kaiming_gaussian"];

    pub fn new(kind: PriorKind) -> Self {
        Prior { kind, bias: BiasInit::FromPrior }
    }

    pub fn uniform(bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("uniform bound {bound} must be positive")));
        }
        Ok(Prior::new(PriorKind::UniformSymmetric { bound }))
    }

    pub fn kaiming_uniform() -> Self {
        Prior::new(PriorKind::KaimingUniform)
    }

    pub fn kaiming_gaussian() -> Self {
        Prior::new(PriorKind::KaimingGaussian)
    }

    pub fn with_bias(mut self, bias: BiasInit) -> Self {
        self.bias = bias;
        self
    }

    pub fn is_kaiming(&self) -> bool {
        !matches!(self.kind, PriorKind::UniformSymmetric { .. })
    }

    /// Default SGD learning rate paired with this prior.
    pub fn default_learning_rate(&self) -> f64 {
        if self.is_kaiming() {
            0.1
        } else {
            0.01
        }
    }

    fn layer_dist(&self, fan_in: usize) -> LayerDist {
        match self.kind {
            PriorKind::UniformSymmetric { bound } => {
                LayerDist::Uniform(Uniform::new_inclusive(-bound, bound).expect("positive bound"))
            }
            PriorKind::KaimingUniform => {
                let a = (6.0 / fan_in as f64).sqrt();
                LayerDist::Uniform(Uniform::new_inclusive(-a, a).expect("positive bound"))
            }
            PriorKind::KaimingGaussian => {
                LayerDist::Normal(Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std"))
            }
        }
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PriorKind::UniformSymmetric { bound } if bound == 1.0 => f.write_str("uniform1")?,
            PriorKind::UniformSymmetric { bound } if bound == 0.2 => f.write_str("uniform02")?,
            PriorKind::UniformSymmetric { bound } => write!(f, "uniform({bound})")?,
            PriorKind::KaimingUniform => f.write_str("kaiming_uniform")?,
            PriorKind::KaimingGaussian => f.write_str("kaiming_gaussian")?,
        }
        if self.bias == BiasInit::Zero {
            f.write_str("+zero_bias")?;
        }
        Ok(())
    }
}

impl FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, bias) = match s.trim().strip_suffix("+zero_bias") {
            Some(n) => (n, BiasInit::Zero),
            None => (s.trim(), BiasInit::FromPrior),
        };
        let prior = match name {
            "uniform1" => Prior::uniform(1.0)?,
            "uniform02" => Prior::uniform(0.2)?,
            "kaiming_uniform" => Prior::kaiming_uniform(),
            "kaiming_gaussian" => Prior::kaiming_gaussian(),
            other if other.starts_with("uniform(") && other.ends_with(')') => {
                let bound = other["uniform(".len()..other.len() - 1]
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad uniform bound in '{other}'")))?;
                Prior::uniform(bound)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown prior '{other}' (expected one of {})",
                    Prior::NAMES.join(", ")
                )))
            }
        };
        Ok(prior.with_bias(bias))
    }
}

enum LayerDist {
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
}

impl LayerDist {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            LayerDist::Uniform(d) => d.sample(rng),
            LayerDist::Normal(d) => d.sample(rng),
        }
    }
}

/// Base seed plus the rule mapping draw index `k` to an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPlan {
    pub base_seed: u64,
}

impl SeedPlan {
    pub fn new(base_seed: u64) -> Self {
        SeedPlan { base_seed }
    }

    pub fn stream(&self, draw_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(draw_index);
        rng
    }
}

/// Mixes a base seed with a sequence of tags into a new 64-bit seed
/// (SplitMix64 finalizer applied per tag).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        z = splitmix(z ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    splitmix(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_weights(spec: &NetworkSpec, prior: &Prior, plan: &SeedPlan, draw_index: u64) -> ParameterSet {
    let mut params = ParameterSet::zeros(spec);
    fill_weights(spec, prior, plan, draw_index, &mut params);
    params
}

/// In-place variant of [`sample_weights`] for hot loops.
pub fn fill_weights(
    spec: &NetworkSpec,
    prior: &Prior,
    plan: &SeedPlan,
    draw_index: u64,
    params: &mut ParameterSet,
) {
    let mut rng = plan.stream(draw_index);
    for (shape, layer) in spec.param_shapes().iter().zip(params.layers_mut()) {
        let dist = prior.layer_dist(shape.fan_in);
        for w in layer.weight.data_mut() {
            *w = dist.sample(&mut rng);
        }
        for b in layer.bias.data_mut() {
            *b = match prior.bias {
                BiasInit::FromPrior => dist.sample(&mut rng),
                BiasInit::Zero => 0.0,
            };
        }
    }
}
