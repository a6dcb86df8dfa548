use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch::{ArchChoice, DepthConfig, WidthFactor};
use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::prior::{derive_seed, Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Prior,
    Width,
    Depth,
    SgdFromGnc,
    Trajectory,
    /// One-off cells built from command-line flags.
    Adhoc,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Prior => "prior",
            Study::Width => "width",
            Study::Depth => "depth",
            Study::SgdFromGnc => "sgd_from_gnc",
            Study::Trajectory => "trajectory",
            Study::Adhoc => "adhoc",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sgd,
    Gnc,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Gnc => "gnc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_dataset() -> String {
    "mnist".into()
}
fn default_family() -> String {
    "lenet".into()
}
fn default_widths() -> Vec<String> {
    vec!["2/6".into()]
}
fn default_priors() -> Vec<String> {
    vec!["kaiming_uniform".into()]
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Sgd, Algorithm::Gnc]
}
fn default_networks() -> usize {
    100
}
fn default_replicates() -> usize {
    4
}
fn default_epochs() -> usize {
    crate::sgd::SgdConfig::DEFAULT_EPOCHS
}
fn default_batch() -> usize {
    crate::sgd::SgdConfig::DEFAULT_BATCH
}
fn default_workers() -> usize {
    1
}
fn default_loss_bins() -> usize {
    30
}
fn default_acc_bins() -> usize {
    20
}
fn default_separation() -> f64 {
    3.0
}
fn default_synthetic_count() -> usize {
    256
}

/// Human-editable sweep definition (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep: SweepSection,
    #[serde(default)]
    pub sgd: SgdSection,
    #[serde(default)]
    pub gnc: GncSection,
    #[serde(default)]
    pub bins: BinSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub study: Study,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    /// Directory for whichever dataset is selected; takes precedence over
    /// `mnist_dir` / `cifar_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cifar_dir: Option<PathBuf>,
    /// Class pairs written `"a,b"`.
    pub pairs: Vec<String>,
    pub n: Vec<usize>,
    /// `lenet`, `mlp` or `dense`; combined with `widths` and `depths`
    /// unless `archs` lists full descriptors.
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_widths")]
    pub widths: Vec<String>,
    /// LeNet: `2c-3f` style. MLP: number of dropped hidden layers. Dense:
    /// hidden sizes joined by `-`.
    #[serde(default)]
    pub depths: Vec<String>,
    #[serde(default)]
    pub archs: Vec<String>,
    #[serde(default = "default_priors")]
    pub priors: Vec<String>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_networks")]
    pub networks_per_cell: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra training-set sizes run with SGD only.
    #[serde(default)]
    pub sgd_only_n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Overrides the prior's default rate when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    /// Training runs attempted per cell; defaults to `2 * networks_per_cell + 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<usize>,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

impl Default for SgdSection {
    fn default() -> Self {
        SgdSection {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: None,
            max_attempts: None,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GncSection {
    /// Draw budget per cell; defaults to `2^(n+6)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for GncSection {
    fn default() -> Self {
        GncSection {
            budget: None,
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSection {
    #[serde(default = "default_loss_bins")]
    pub loss_bins: usize,
    #[serde(default = "default_acc_bins")]
    pub acc_bins: usize,
    #[serde(default)]
    pub loss: super::hist::LossMetric,
}

impl Default for BinSection {
    fn default() -> Self {
        BinSection {
            loss_bins: default_loss_bins(),
            acc_bins: default_acc_bins(),
            loss: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_synthetic_count")]
    pub train_per_class: usize,
    #[serde(default = "default_synthetic_count")]
    pub test_per_class: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection {
            separation: default_separation(),
            train_per_class: default_synthetic_count(),
            test_per_class: default_synthetic_count(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub pair: (u8, u8),
    pub n: usize,
    pub arch: ArchChoice,
    pub prior: Prior,
    pub replicate: usize,
    pub algorithm: Algorithm,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}|n{}|{}|{}|r{}|{}",
            self.pair.0, self.pair.1, self.n, self.arch, self.prior, self.replicate, self.algorithm
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Position in the plan; output is ordered by it.
    pub index: usize,
    pub key: CellKey,
    /// Shared by every cell on the same (pair, replicate), so algorithms
    /// and sizes see nested subsets of the same images.
    pub subset_seed: u64,
    /// Unique per cell.
    pub seed: u64,
}

/// Fully resolved sweep: every cell with its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub config: SweepConfig,
    pub dataset: DatasetKind,
    pub cells: Vec<Cell>,
}

const TAG_SUBSET: u64 = 0x5u64 << 56;

pub fn parse_pair(s: &str) -> Result<(u8, u8)> {
    let bad = || Error::Config(format!("class pair '{s}' must look like '0,7'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: u8 = a.trim().parse().map_err(|_| bad())?;
    let b: u8 = b.trim().parse().map_err(|_| bad())?;
    if a == b || a > 9 || b > 9 {
        return Err(Error::Config(format!("class pair '{s}' needs two distinct classes in 0..=9")));
    }
    Ok((a, b))
}

fn cell_seed(base: u64, key: &CellKey) -> u64 {
    let digest = Sha256::digest(format!("{base}|{key}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl SweepPlan {
    pub fn from_config(config: SweepConfig) -> Result<Self> {
        let s = &config.sweep;
        let dataset = DatasetKind::parse(&s.dataset).map_err(|e| Error::Config(e.to_string()))?;
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let pairs = s.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
        let archs = resolve_archs(s).map_err(cfg_err)?;
        let priors = s
            .priors
            .iter()
            .map(|p| p.parse::<Prior>())
            .collect::<Result<Vec<_>>>()
            .map_err(cfg_err)?;
        for (what, empty) in [
            ("pairs", pairs.is_empty()),
            ("n", s.n.is_empty() && s.sgd_only_n.is_empty()),
            ("archs", archs.is_empty()),
            ("priors", priors.is_empty()),
            ("algorithms", s.algorithms.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("'{what}' must not be empty")));
            }
        }
        if s.replicates == 0 {
            return Err(Error::Config("'replicates' must be at least 1".into()));
        }
        for &n in s.n.iter().chain(&s.sgd_only_n) {
            if n == 0 || n % 2 != 0 {
                return Err(Error::Config(format!("training size {n} must be positive and even")));
            }
        }
        if config.sgd.batch_size == 0 {
            return Err(Error::Config("sgd.batch_size must be positive".into()));
        }
        if let Some(lr) = config.sgd.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("sgd.learning_rate {lr} must be positive")));
            }
        }
        if config.gnc.workers == 0 {
            return Err(Error::Config("gnc.workers must be at least 1".into()));
        }
        if config.bins.loss_bins == 0 || config.bins.acc_bins == 0 {
            return Err(Error::Config("bin counts must be positive".into()));
        }
        match s.study {
            Study::Trajectory => {
                if config.sgd.checkpoints.is_empty() {
                    return Err(Error::Config("trajectory study needs sgd.checkpoints".into()));
                }
                if let Some(&c) = config.sgd.checkpoints.iter().find(|&&c| c > config.sgd.epochs) {
                    return Err(Error::Config(format!(
                        "checkpoint {c} is past the last epoch {}",
                        config.sgd.epochs
                    )));
                }
            }
            Study::SgdFromGnc if !s.algorithms.contains(&Algorithm::Gnc) => {
                return Err(Error::Config("sgd_from_gnc study needs the gnc algorithm".into()));
            }
            _ => {}
        }

        let mut algorithms = s.algorithms.clone();
        algorithms.sort();
        algorithms.dedup();
        if s.study == Study::Trajectory {
            algorithms.retain(|&a| a == Algorithm::Sgd);
        }
        if s.study == Study::SgdFromGnc {
            algorithms.retain(|&a| a == Algorithm::Gnc);
        }
        let mut sizes: Vec<(usize, bool)> = s.n.iter().map(|&n| (n, false)).collect();
        sizes.sort();
        sizes.dedup();
        let mut extra: Vec<usize> = s.sgd_only_n.iter().copied().filter(|n| !s.n.contains(n)).collect();
        extra.sort();
        extra.dedup();
        sizes.extend(extra.into_iter().map(|n| (n, true)));

        let mut cells = Vec::new();
        for &pair in &pairs {
            for &(n, sgd_only) in &sizes {
                for arch in &archs {
                    for prior in &priors {
                        for replicate in 0..s.replicates {
                            let subset_seed =
                                derive_seed(s.seed, &[TAG_SUBSET, pair.0.min(pair.1) as u64, pair.0.max(pair.1) as u64, replicate as u64]);
                            for &algorithm in &algorithms {
                                if sgd_only && algorithm != Algorithm::Sgd {
                                    continue;
                                }
                                let key = CellKey {
                                    pair,
                                    n,
                                    arch: arch.clone(),
                                    prior: *prior,
                                    replicate,
                                    algorithm,
                                };
                                cells.push(Cell {
                                    index: cells.len(),
                                    seed: cell_seed(s.seed, &key),
                                    key,
                                    subset_seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for c in &cells {
            if !seen.insert(c.seed) {
                return Err(Error::Config(format!("duplicate cell seed for {}", c.key)));
            }
        }
        Ok(SweepPlan { config, dataset, cells })
    }

    pub fn study(&self) -> Study {
        self.config.sweep.study
    }

    pub fn networks_per_cell(&self) -> usize {
        self.config.sweep.networks_per_cell
    }

    pub fn learning_rate(&self, prior: &Prior) -> f64 {
        self.config.sgd.learning_rate.unwrap_or_else(|| prior.default_learning_rate())
    }

    pub fn budget(&self, n: usize) -> u64 {
        self.config.gnc.budget.unwrap_or_else(|| crate::gnc::default_budget(n))
    }

    pub fn max_attempts(&self) -> usize {
        self.config
            .sgd
            .max_attempts
            .unwrap_or(2 * self.networks_per_cell() + 10)
    }
}

fn resolve_archs(s: &SweepSection) -> Result<Vec<ArchChoice>> {
    if !s.archs.is_empty() {
        return s.archs.iter().map(|a| a.parse()).collect();
    }
    let mut out = Vec::new();
    match s.family.as_str() {
        "lenet" => {
            let depths: Vec<DepthConfig> = if s.depths.is_empty() {
                vec![DepthConfig::STANDARD]
            } else {
                s.depths.iter().map(|d| d.parse()).collect::<Result<_>>()?
            };
            for w in &s.widths {
                let width = WidthFactor::from_str(w)?;
                for &depth in &depths {
                    out.push(ArchChoice::Lenet { width, depth });
                }
            }
        }
        "mlp" => {
            let drops: Vec<usize> = if s.depths.is_empty() {
                vec![0]
            } else {
                s.depths
                    .iter()
                    .map(|d| d.trim().parse().map_err(|_| Error::Architecture(format!("bad MLP depth '{d}'"))))
                    .collect::<Result<_>>()?
            };
            for w in &s.widths {
                let width = WidthFactor::from_str(w)?;
                for &drop in &drops {
                    out.push(ArchChoice::Mlp { width, drop });
                }
            }
        }
        "dense" => {
            for d in &s.depths {
                out.push(format!("dense:{d}").parse()?);
            }
            if s.depths.is_empty() {
                return Err(Error::Architecture("dense family needs 'depths' such as \"8-8\"".into()));
            }
        }
        other => return Err(Error::Architecture(format!("unknown family '{other}'"))),
    }
    Ok(out)
}
