//! Experiment configuration: a JSON document whose omitted fields are filled
//! with per-experiment defaults. The resolved form is written to every
//! output manifest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use otgraph::datasets::ArmSpacing;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Eigenspace recovery on the noisy closed spiral.
    EigenSpiral,
    /// Label propagation on the ten-armed spiral.
    SslSpiral,
    /// Label propagation across sampling densities.
    SslDensity,
    /// Diffusion denoising of the noisy closed spiral.
    Denoise,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EigenSpiral => "eigen-spiral",
            Self::SslSpiral => "ssl-spiral",
            Self::SslDensity => "ssl-density",
            Self::Denoise => "denoise",
        }
    }

    pub fn uses_arms(self) -> bool {
        matches!(self, Self::SslSpiral | Self::SslDensity)
    }
}

/// Graph construction methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    /// Quadratically regularized OT.
    Qot,
    /// Entropically regularized OT.
    Entot,
    /// kNN graph with Gaussian weights.
    KnnGauss,
    /// Complete graph with Gaussian weights.
    Gauss,
    /// Adaptive-bandwidth kernel.
    Magic,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Qot => "qot",
            Self::Entot => "entot",
            Self::KnnGauss => "knn-gauss",
            Self::Gauss => "gauss",
            Self::Magic => "magic",
        }
    }

    pub fn needs_epsilon(self) -> bool {
        !matches!(self, Self::Magic)
    }

    pub fn needs_k(self) -> bool {
        matches!(self, Self::KnnGauss | Self::Magic)
    }
}

/// A parameter grid: explicit values or `points` log-spaced values between `10^log10_start` and `10^log10_stop`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Log {
        log10_start: f64,
        log10_stop: f64,
        points: usize,
    },
}

impl GridSpec {
    pub fn log(log10_start: f64, log10_stop: f64, points: usize) -> Self {
        Self::Log {
            log10_start,
            log10_stop,
            points,
        }
    }

    pub fn values(&self) -> CliResult<Vec<f64>> {
        let values = match *self {
            Self::List(ref v) => v.clone(),
            Self::Log {
                log10_start,
                log10_stop,
                points,
            } => match points {
                0 => Vec::new(),
                1 => vec![10f64.powf(log10_start)],
                _ => (0..points)
                    .map(|i| {
                        let step = (log10_stop - log10_start) * i as f64 / (points - 1) as f64;
                        10f64.powf(log10_start + step)
                    })
                    .collect(),
            },
        };
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CliError::Usage(format!(
                "parameter grid must be non-empty and positive, got {values:?}"
            )));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodFile {
    pub method: MethodTag,
    pub epsilon: Option<GridSpec>,
    pub k: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub n: Option<usize>,
    pub ambient: Option<usize>,
    pub arms: Option<usize>,
    pub per_arm: Option<Vec<usize>>,
    pub t_range: Option<[f64; 2]>,
    pub spacing: Option<ArmSpacing>,
    pub label_fraction: Option<f64>,
    pub labels_per_class: Option<bool>,
    pub normalize: Option<bool>,
    pub cost_exponent: Option<f64>,
    pub forbid_self_mass: Option<bool>,
}

/// A single graph construction, for the `graph`, `ssl` and `denoise` commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub method: MethodTag,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
}

/// The configuration file as written.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub methods: Option<Vec<MethodFile>>,
    pub dataset: Option<DatasetFile>,
    pub mu: Option<f64>,
    pub exclude_labeled: Option<bool>,
    pub eigen_dim: Option<usize>,
    pub denoise_t: Option<Vec<usize>>,
    pub timing: Option<bool>,
    pub input: Option<PathBuf>,
    pub edge_list: Option<PathBuf>,
    pub graph: Option<GraphSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetConfig {
    /// Closed-spiral size.
    pub n: usize,
    pub ambient: usize,
    pub arms: usize,
    /// Points per arm; one sub-experiment per entry.
    pub per_arm: Vec<usize>,
    pub t_range: [f64; 2],
    pub spacing: ArmSpacing,
    pub label_fraction: f64,
    pub labels_per_class: bool,
    /// Rescale the noisy cloud to unit mean squared pairwise distance.
    pub normalize: bool,
    pub cost_exponent: f64,
    /// Give the transport problems infinite self cost.
    pub forbid_self_mass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodConfig {
    pub method: MethodTag,
    pub epsilon: Vec<f64>,
    pub k: Vec<usize>,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub methods: Vec<MethodConfig>,
    pub dataset: DatasetConfig,
    pub mu: f64,
    pub exclude_labeled: bool,
    pub eigen_dim: usize,
    pub denoise_t: Vec<usize>,
    /// Record wall-clock time per result (breaks byte-identical reruns).
    pub timing: bool,
    pub input: Option<PathBuf>,
    pub edge_list: Option<PathBuf>,
    pub graph: GraphSpec,
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const NEIGHBOR_COUNTS: [usize; 5] = [5, 10, 15, 20, 25];
const GRID_POINTS: usize = 13;

fn default_methods(kind: ExperimentKind) -> Vec<MethodFile> {
    let method = |method, epsilon, k| MethodFile { method, epsilon, k };
    match kind {
        ExperimentKind::EigenSpiral => {
            let wide = || Some(GridSpec::log(-2.0, 1.0, GRID_POINTS));
            vec![
                method(MethodTag::Qot, Some(GridSpec::log(-1.5, 1.5, GRID_POINTS)), None),
                method(MethodTag::Entot, wide(), None),
                method(MethodTag::KnnGauss, wide(), Some(NEIGHBOR_COUNTS.to_vec())),
                method(MethodTag::Gauss, wide(), None),
                method(MethodTag::Magic, None, Some(NEIGHBOR_COUNTS.to_vec())),
            ]
        }
        ExperimentKind::SslSpiral | ExperimentKind::SslDensity => vec![
            method(MethodTag::Qot, Some(GridSpec::log(-2.0, 1.0, GRID_POINTS)), None),
            method(
                MethodTag::KnnGauss,
                Some(GridSpec::log(-3.0, 0.0, GRID_POINTS)),
                Some((1..=50).collect()),
            ),
        ],
        ExperimentKind::Denoise => vec![
            method(MethodTag::Qot, Some(GridSpec::List(vec![1.0])), None),
            method(MethodTag::KnnGauss, Some(GridSpec::List(vec![0.1])), Some(vec![10])),
            method(MethodTag::Magic, None, Some(vec![10])),
        ],
    }
}

fn resolve_dataset(kind: ExperimentKind, file: DatasetFile) -> CliResult<DatasetConfig> {
    let ssl = kind.uses_arms();
    let density = kind == ExperimentKind::SslDensity;
    let d = DatasetConfig {
        n: file.n.unwrap_or(1000),
        ambient: file.ambient.unwrap_or(100),
        arms: file.arms.unwrap_or(10),
        per_arm: file
            .per_arm
            .unwrap_or_else(|| if density { vec![100, 150, 200, 250] } else { vec![150] }),
        t_range: file.t_range.unwrap_or(if density { [0.5, 5.0] } else { [1.0, 5.0] }),
        spacing: file.spacing.unwrap_or(if density {
            ArmSpacing::ParamRandom
        } else {
            ArmSpacing::ArcUniform
        }),
        label_fraction: file.label_fraction.unwrap_or(if density { 0.01 } else { 0.025 }),
        labels_per_class: file.labels_per_class.unwrap_or(!density),
        normalize: file.normalize.unwrap_or(!ssl),
        cost_exponent: file.cost_exponent.unwrap_or(2.0),
        forbid_self_mass: file.forbid_self_mass.unwrap_or(ssl),
    };
    if d.n < 3 || d.ambient == 0 || d.arms == 0 || d.per_arm.is_empty() || d.per_arm.contains(&0) {
        return Err(CliError::Usage("dataset sizes must be positive (n >= 3)".into()));
    }
    if !(d.label_fraction > 0.0 && d.label_fraction <= 1.0) {
        return Err(CliError::Usage(format!(
            "label_fraction must lie in (0, 1], got {}",
            d.label_fraction
        )));
    }
    if !(d.cost_exponent > 0.0) {
        return Err(CliError::Usage(format!(
            "cost_exponent must be positive, got {}",
            d.cost_exponent
        )));
    }
    Ok(d)
}

fn resolve_method(file: MethodFile) -> CliResult<MethodConfig> {
    let tag = file.method.as_str();
    let epsilon = match (file.method.needs_epsilon(), file.epsilon) {
        (true, Some(grid)) => grid.values()?,
        (true, None) => return Err(CliError::Usage(format!("method {tag} needs an epsilon grid"))),
        (false, Some(_)) => return Err(CliError::Usage(format!("method {tag} takes no epsilon"))),
        (false, None) => Vec::new(),
    };
    let k = match (file.method.needs_k(), file.k) {
        (true, Some(k)) if !k.is_empty() && !k.contains(&0) => k,
        (true, _) => {
            return Err(CliError::Usage(format!(
                "method {tag} needs a non-empty list of positive k"
            )))
        }
        (false, Some(_)) => return Err(CliError::Usage(format!("method {tag} takes no k"))),
        (false, None) => Vec::new(),
    };
    Ok(MethodConfig {
        method: file.method,
        epsilon,
        k,
    })
}

impl ExperimentConfig {
    /// Fills defaults for the experiment named in `file` (eigen-spiral when absent).
    pub fn resolve(file: ConfigFile) -> CliResult<Self> {
        let experiment = file.experiment.unwrap_or(ExperimentKind::EigenSpiral);
        let methods = file
            .methods
            .unwrap_or_else(|| default_methods(experiment))
            .into_iter()
            .map(resolve_method)
            .collect::<CliResult<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(CliError::Usage("method list is empty".into()));
        }
        let mut seen = BTreeSet::new();
        if let Some(m) = methods.iter().find(|m| !seen.insert(m.method)) {
            return Err(CliError::Usage(format!("method {} listed twice", m.method.as_str())));
        }
        let seeds = file.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(CliError::Usage("seed list is empty".into()));
        }
        let mu = file.mu.unwrap_or(otgraph::learn::DEFAULT_MU);
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(CliError::Usage(format!("mu must be positive, got {mu}")));
        }
        let eigen_dim = file.eigen_dim.unwrap_or(10);
        if eigen_dim == 0 {
            return Err(CliError::Usage("eigen_dim must be positive".into()));
        }
        let graph = file.graph.unwrap_or(GraphSpec {
            method: MethodTag::Qot,
            epsilon: Some(1.0),
            k: None,
        });
        Ok(Self {
            experiment,
            seeds,
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            methods,
            dataset: resolve_dataset(experiment, file.dataset.unwrap_or_default())?,
            mu,
            exclude_labeled: file.exclude_labeled.unwrap_or(true),
            eigen_dim,
            denoise_t: file.denoise_t.unwrap_or_else(|| vec![1, 3, 5]),
            timing: file.timing.unwrap_or(false),
            input: file.input,
            edge_list: file.edge_list,
            graph,
        })
    }

    /// Defaults for `kind` with nothing overridden.
    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::resolve(ConfigFile {
            experiment: Some(kind),
            ..ConfigFile::default()
        })
        .expect("built-in defaults are valid")
    }
}

/// Reads and parses a config file without resolving defaults.
pub fn read_config_file(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grids_hit_integer_powers() {
        let grid = GridSpec::log(-1.5, 1.5, 13).values().unwrap();
        assert_eq!(grid.len(), 13);
        assert_eq!(grid[6], 1.0);
        assert!((grid[0] - 10f64.powf(-1.5)).abs() < 1e-15);
        assert!(grid.windows(2).all(|p| p[1] > p[0]));
        assert_eq!(GridSpec::log(-2.0, 1.0, 13).values().unwrap()[8], 1.0);
        assert_eq!(GridSpec::log(-3.0, 0.0, 13).values().unwrap()[12], 1.0);
        assert!(GridSpec::List(vec![]).values().is_err());
        assert!(GridSpec::List(vec![-1.0]).values().is_err());
    }

    #[test]
    fn defaults_per_experiment() {
        let eig = ExperimentConfig::defaults(ExperimentKind::EigenSpiral);
        assert_eq!(eig.methods.len(), 5);
        assert_eq!(eig.seeds, DEFAULT_SEEDS);
        assert!(eig.dataset.normalize && !eig.dataset.forbid_self_mass);
        let density = ExperimentConfig::defaults(ExperimentKind::SslDensity);
        assert_eq!(density.dataset.per_arm, vec![100, 150, 200, 250]);
        assert_eq!(density.dataset.spacing, ArmSpacing::ParamRandom);
        assert_eq!(density.methods[1].k.len(), 50);
        assert!(!density.dataset.labels_per_class);
        assert!(
            ExperimentConfig::defaults(ExperimentKind::SslSpiral)
                .dataset
                .labels_per_class
        );
        assert_eq!(
            ExperimentConfig::defaults(ExperimentKind::Denoise).denoise_t,
            vec![1, 3, 5]
        );
    }

    #[test]
    fn parse_and_validate() {
        let file: ConfigFile = serde_json::from_str(
            r#"{"experiment": "ssl-spiral", "seeds": [7],
                "methods": [{"method": "qot", "epsilon": [0.5, 1.0]},
                            {"method": "knn-gauss", "epsilon": {"log10_start": -1, "log10_stop": 0, "points": 2}, "k": [3]}]}"#,
        )
        .unwrap();
        let cfg = ExperimentConfig::resolve(file).unwrap();
        assert_eq!(cfg.methods[1].epsilon, vec![0.1, 1.0]);
        assert_eq!(cfg.seeds, vec![7]);
        assert!(serde_json::from_str::<ConfigFile>(r#"{"methods": [{"method": "spectral"}]}"#).is_err());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"bogus": 1}"#).is_err());
        let bad = |json: &str| ExperimentConfig::resolve(serde_json::from_str(json).unwrap()).is_err();
        assert!(bad(r#"{"methods": [{"method": "magic", "epsilon": [1.0], "k": [5]}]}"#));
        assert!(bad(r#"{"methods": [{"method": "knn-gauss", "epsilon": [1.0]}]}"#));
        assert!(bad(r#"{"methods": []}"#));
        assert!(bad(r#"{"seeds": []}"#));
        assert!(bad(r#"{"mu": 0}"#));
    }
}
