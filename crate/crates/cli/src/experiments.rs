//! Dataset preparation, graph construction by method tag, and sweep execution.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use otgraph::datasets::{
    closed_spiral, embed_with_noise, label_subset, mean_pairwise_sq_distance, multi_arm_spiral, pairwise_cost,
    squared_distances, NoiseSpec, PointCloud,
};
use otgraph::graphs::{
    gaussian_full_from, knn_gaussian_from, magic_adaptive_from, plan_to_graph, row_normalize, NeighborTable,
    WeightedGraph,
};
use otgraph::learn::{accuracy, llgc_solve, llgc_stationarity, magic_denoise, predict, LabelMatrix};
use otgraph::numerics::{DenseMatrix, SeededRng};
use otgraph::spectral::{eigenmap, eigenspace_error_against, reference_graph, Subspace};
use otgraph::transport::{solve_entropic, solve_qot, CostMatrix, QotConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{DatasetConfig, ExperimentConfig, ExperimentKind, GraphSpec, MethodConfig, MethodTag};
use crate::error::{CliError, CliResult};
use crate::records::ResultRecord;

/// Convergence tolerance and iteration cap for the entropic solver.
pub const ENTROPIC_TOL: f64 = 1e-8;
pub const ENTROPIC_MAX_ITER: usize = 100_000;
/// Above this size the dense entropic graph gets a warning.
pub const ENTROPIC_WARN_N: usize = 5000;

/// One generated dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub clean: PointCloud,
    pub noisy: PointCloud,
    /// Noise-free points embedded in the ambient space, at the scale of `noisy`.
    pub clean_embedded: DenseMatrix,
    /// Labelled indices (empty for the unlabelled experiments).
    pub labeled: Vec<usize>,
}

/// Generates the dataset of `cfg` for one seed and points-per-arm value.
///
/// The random stream is derived from `(seed, per_arm)`, so every cell of a
/// sweep sees the same data and reruns reproduce it exactly.
pub fn prepare_dataset(cfg: &ExperimentConfig, seed: u64, per_arm: usize) -> CliResult<Dataset> {
    let d = &cfg.dataset;
    let mut rng = SeededRng::derive(seed, per_arm as u64);
    let arms = cfg.experiment.uses_arms();
    let (clean, noise) = if arms {
        let [t0, t1] = d.t_range;
        (
            multi_arm_spiral(d.arms, per_arm, t0, t1, d.spacing, &mut rng)?,
            NoiseSpec::MultiArm,
        )
    } else {
        (closed_spiral(d.n)?, NoiseSpec::ClosedSpiral)
    };
    let embedding = embed_with_noise(&clean, &mut rng, d.ambient, noise)?;
    let mut clean_embedded = embedding.clean_embedded(&clean);
    let mut noisy = embedding.cloud;
    if d.normalize {
        let s = mean_pairwise_sq_distance(noisy.points());
        if !(s > 0.0) {
            return Err(otgraph::Error::DegenerateInput("all points coincide; scale is undefined".into()).into());
        }
        let factor = 1.0 / s.sqrt();
        clean_embedded *= factor;
        noisy = PointCloud::with_metadata(
            noisy.points() * factor,
            noisy.params().map(<[f64]>::to_vec),
            noisy.labels().map(<[usize]>::to_vec),
        )?;
    }
    let labeled = if arms {
        label_subset(&noisy, d.label_fraction, d.labels_per_class, &mut rng)?
    } else {
        Vec::new()
    };
    Ok(Dataset {
        clean,
        noisy,
        clean_embedded,
        labeled,
    })
}

/// The points-per-arm values a config iterates over (a single dummy entry for closed-spiral experiments).
pub fn per_arm_values(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.experiment.uses_arms() {
        cfg.dataset.per_arm.clone()
    } else {
        vec![0]
    }
}

/// Solver statistics of one graph construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub marginal_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BuiltGraph {
    pub graph: WeightedGraph,
    pub solver: Option<SolverSummary>,
}

/// Pairwise quantities shared by every graph built on one point cloud.
pub struct GraphContext {
    cost: CostMatrix,
    /// Squared distances, when they differ from the transport costs.
    sq: Option<DenseMatrix>,
    neighbors: Option<NeighborTable>,
}

impl GraphContext {
    /// Precomputes costs and a neighbour table with `max_neighbors` columns (0 for none).
    pub fn new(cloud: &PointCloud, dataset: &DatasetConfig, max_neighbors: usize) -> CliResult<Self> {
        let mut cost = pairwise_cost(cloud, dataset.cost_exponent)?;
        let sq = (dataset.cost_exponent != 2.0).then(|| {
            let points = cloud.points().as_standard_layout().to_owned();
            squared_distances(&points)
        });
        if dataset.forbid_self_mass {
            cost = cost.forbid_self_mass();
        }
        let mut ctx = Self {
            cost,
            sq,
            neighbors: None,
        };
        let k = max_neighbors.min(cloud.len().saturating_sub(1));
        if k > 0 {
            ctx.neighbors = Some(NeighborTable::new(ctx.sq(), k)?);
        }
        Ok(ctx)
    }

    pub fn n(&self) -> usize {
        self.cost.n()
    }

    fn sq(&self) -> &Array2<f64> {
        self.sq.as_ref().unwrap_or_else(|| self.cost.matrix())
    }

    fn table(&self, needed: usize) -> CliResult<&NeighborTable> {
        match &self.neighbors {
            Some(t) if t.k() >= needed.min(self.n() - 1) => Ok(t),
            _ => Err(CliError::Usage(format!("neighbour table too small for k = {needed}"))),
        }
    }

    /// Builds one graph.
    pub fn build(&self, method: MethodTag, epsilon: Option<f64>, k: Option<usize>) -> CliResult<BuiltGraph> {
        let eps = || epsilon.ok_or_else(|| CliError::Usage(format!("method {} needs epsilon", method.as_str())));
        let kk = || k.ok_or_else(|| CliError::Usage(format!("method {} needs k", method.as_str())));
        let built = match method {
            MethodTag::Qot => {
                let sol = solve_qot(&self.cost, &QotConfig::new(eps()?))?;
                let d = &sol.diagnostics;
                let solver = SolverSummary {
                    iterations: d.iterations,
                    marginal_residual: d.marginal_residual,
                    duality_gap: Some(d.duality_gap),
                };
                BuiltGraph {
                    graph: plan_to_graph(&sol.plan, true)?,
                    solver: Some(solver),
                }
            }
            MethodTag::Entot => {
                let sol = solve_entropic(&self.cost, eps()?, ENTROPIC_TOL, ENTROPIC_MAX_ITER)?;
                let solver = SolverSummary {
                    iterations: sol.iterations,
                    marginal_residual: sol.marginal_residual,
                    duality_gap: None,
                };
                BuiltGraph {
                    graph: plan_to_graph(&sol.plan, true)?,
                    solver: Some(solver),
                }
            }
            MethodTag::KnnGauss => {
                let k = kk()?;
                BuiltGraph {
                    graph: knn_gaussian_from(self.table(k)?, self.sq(), k, eps()?)?,
                    solver: None,
                }
            }
            MethodTag::Gauss => BuiltGraph {
                graph: gaussian_full_from(self.sq(), eps()?)?,
                solver: None,
            },
            MethodTag::Magic => {
                let k = kk()?;
                BuiltGraph {
                    graph: magic_adaptive_from(self.table(3 * k)?, self.sq(), k)?,
                    solver: None,
                }
            }
        };
        Ok(built)
    }
}

/// Neighbour-table width needed by a set of graph constructions.
pub fn neighbors_needed<'a>(specs: impl IntoIterator<Item = (MethodTag, &'a [usize])>) -> usize {
    specs
        .into_iter()
        .flat_map(|(method, ks)| {
            ks.iter().map(move |&k| match method {
                MethodTag::KnnGauss => k,
                MethodTag::Magic => 3 * k,
                _ => 0,
            })
        })
        .max()
        .unwrap_or(0)
}

/// Builds the single graph described by `spec` on `cloud`.
pub fn build_single(cloud: &PointCloud, dataset: &DatasetConfig, spec: &GraphSpec) -> CliResult<BuiltGraph> {
    if spec.method.needs_epsilon() != spec.epsilon.is_some() || spec.method.needs_k() != spec.k.is_some() {
        let need = match (spec.method.needs_epsilon(), spec.method.needs_k()) {
            (true, true) => "epsilon and k",
            (true, false) => "epsilon only",
            (false, true) => "k only",
            (false, false) => "no parameters",
        };
        return Err(CliError::Usage(format!("method {} takes {need}", spec.method.as_str())));
    }
    let ks: Vec<usize> = spec.k.into_iter().collect();
    let ctx = GraphContext::new(cloud, dataset, neighbors_needed([(spec.method, ks.as_slice())]))?;
    ctx.build(spec.method, spec.epsilon, spec.k)
}

/// One point of a method's parameter grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub method: MethodTag,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
}

impl Cell {
    pub fn parameters(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        if let Some(e) = self.epsilon {
            p.insert("epsilon".into(), Value::from(e));
        }
        if let Some(k) = self.k {
            p.insert("k".into(), Value::from(k));
        }
        p
    }
}

/// All grid cells, method by method, epsilon-major.
pub fn cells(methods: &[MethodConfig]) -> Vec<Cell> {
    let mut out = Vec::new();
    for m in methods {
        let eps: Vec<Option<f64>> = if m.epsilon.is_empty() {
            vec![None]
        } else {
            m.epsilon.iter().copied().map(Some).collect()
        };
        let ks: Vec<Option<usize>> = if m.k.is_empty() {
            vec![None]
        } else {
            m.k.iter().copied().map(Some).collect()
        };
        for &epsilon in &eps {
            for &k in &ks {
                out.push(Cell {
                    method: m.method,
                    epsilon,
                    k,
                });
            }
        }
    }
    out
}

/// What is measured on each graph of a sweep.
enum Evaluator {
    Eigen { reference: Subspace },
    Ssl { truth: Vec<usize>, prior: LabelMatrix },
    Denoise { x: DenseMatrix, target: DenseMatrix },
}

/// Metric name and value (with an extra group parameter for denoising).
type Measurement = (Option<(&'static str, Value)>, &'static str, f64);

type Diagnostics = BTreeMap<String, f64>;

impl Evaluator {
    fn new(cfg: &ExperimentConfig, data: &Dataset) -> CliResult<Self> {
        Ok(match cfg.experiment {
            ExperimentKind::EigenSpiral => {
                let reference = eigenmap(&reference_graph(&data.clean)?, cfg.eigen_dim)?.subspace()?;
                Self::Eigen { reference }
            }
            ExperimentKind::SslSpiral | ExperimentKind::SslDensity => {
                let truth = data
                    .noisy
                    .labels()
                    .ok_or_else(|| CliError::Usage("dataset has no labels".into()))?
                    .to_vec();
                let classes = data.noisy.num_classes().unwrap_or(0);
                let prior = LabelMatrix::from_truth(&truth, classes, &data.labeled)?;
                Self::Ssl { truth, prior }
            }
            ExperimentKind::Denoise => Self::Denoise {
                x: data.noisy.points().clone(),
                target: data.clean_embedded.clone(),
            },
        })
    }

    fn measure(
        &self,
        cfg: &ExperimentConfig,
        graph: &WeightedGraph,
        diagnostics: &mut Diagnostics,
    ) -> CliResult<Vec<Measurement>> {
        match self {
            Self::Eigen { reference } => Ok(vec![(
                None,
                "eigenspace_error",
                eigenspace_error_against(graph, reference)?,
            )]),
            Self::Ssl { truth, prior } => {
                let w = row_normalize(graph)?;
                let q = llgc_solve(&w, prior, cfg.mu)?;
                diagnostics.insert("llgc_stationarity".into(), llgc_stationarity(&w, prior, &q.q, cfg.mu)?);
                let pred = predict(&q);
                let exclude: &[usize] = if cfg.exclude_labeled { prior.labeled() } else { &[] };
                Ok(vec![(None, "accuracy", accuracy(&pred.labels, truth, exclude)?)])
            }
            Self::Denoise { x, target } => {
                let w = row_normalize(graph)?;
                cfg.denoise_t
                    .iter()
                    .map(|&t| {
                        let y = magic_denoise(&w, x, t)?;
                        Ok((Some(("t", Value::from(t))), "rmse", rmse(&y, target)))
                    })
                    .collect()
            }
        }
    }
}

/// Root mean squared row distance.
pub fn rmse(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.nrows() as f64).sqrt()
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    ctx: &GraphContext,
    evaluator: &Evaluator,
    cell: &Cell,
    seed: u64,
    group: &BTreeMap<String, Value>,
) -> Vec<ResultRecord> {
    let start = Instant::now();
    let mut diagnostics = Diagnostics::new();
    let outcome = ctx.build(cell.method, cell.epsilon, cell.k).and_then(|g| {
        if let Some(s) = &g.solver {
            diagnostics.insert("solver_iterations".into(), s.iterations as f64);
            diagnostics.insert("marginal_residual".into(), s.marginal_residual);
        }
        evaluator.measure(cfg, &g.graph, &mut diagnostics)
    });
    let wall_time = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let mut params = cell.parameters();
    params.extend(group.clone());
    let record = |params: BTreeMap<String, Value>, metric: &str, value, error| ResultRecord {
        experiment: cfg.experiment,
        method: cell.method,
        parameters: params,
        seed,
        metric: metric.to_string(),
        value,
        error,
        wall_time,
        diagnostics: diagnostics.clone(),
    };
    match outcome {
        Ok(measurements) => measurements
            .into_iter()
            .map(|(extra, metric, value)| {
                let mut p = params.clone();
                if let Some((key, v)) = extra {
                    p.insert(key.to_string(), v);
                }
                record(p, metric, Some(value), None)
            })
            .collect(),
        Err(e) => {
            let metric = match cfg.experiment {
                ExperimentKind::EigenSpiral => "eigenspace_error",
                ExperimentKind::SslSpiral | ExperimentKind::SslDensity => "accuracy",
                ExperimentKind::Denoise => "rmse",
            };
            vec![record(params, metric, None, Some(e.to_string()))]
        }
    }
}

/// Runs every (points-per-arm, seed, cell) combination of `cfg`.
///
/// Cells of one dataset run in parallel on the current rayon pool; records
/// come back in a fixed order (per-arm, seed, then grid order) regardless of
/// scheduling. A failing cell yields a record with `error` set instead of
/// aborting the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRecord>> {
    let grid = cells(&cfg.methods);
    let max_k = neighbors_needed(cfg.methods.iter().map(|m| (m.method, m.k.as_slice())));
    let mut records = Vec::new();
    for per_arm in per_arm_values(cfg) {
        let mut group = BTreeMap::new();
        if cfg.experiment.uses_arms() {
            group.insert("per_arm".to_string(), Value::from(per_arm));
        }
        for &seed in &cfg.seeds {
            let data = prepare_dataset(cfg, seed, per_arm)?;
            let ctx = GraphContext::new(&data.noisy, &cfg.dataset, max_k)?;
            let evaluator = Evaluator::new(cfg, &data)?;
            let batch: Vec<Vec<ResultRecord>> = grid
                .par_iter()
                .map(|cell| evaluate_cell(cfg, &ctx, &evaluator, cell, seed, &group))
                .collect();
            records.extend(batch.into_iter().flatten());
        }
    }
    Ok(records)
}
