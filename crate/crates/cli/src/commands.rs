//! The six subcommands. Each takes a resolved config (command-line overrides
//! already applied), writes its outputs under `cfg.output_dir` and finishes
//! with a `manifest.json` echoing the full configuration.

use std::path::{Path, PathBuf};

use otgraph::datasets::{label_subset, load_csv, save_csv, PointCloud};
use otgraph::graphs::{read_edge_list, row_normalize, write_edge_list, DegreeStats, WeightedGraph};
use otgraph::learn::{
    accuracy, llgc_solve, magic_denoise, predict, write_labels_csv, write_likelihood_csv, LabelMatrix,
};
use otgraph::numerics::SeededRng;
use otgraph::spectral::eigenmap;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, GraphSpec, MethodTag};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    build_single, per_arm_values, prepare_dataset, rmse, run_sweep, SolverSummary, ENTROPIC_WARN_N,
};
use crate::records::{density_heatmap, summarize, write_jsonl};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a ExperimentConfig,
    files: Vec<String>,
}

/// Collects output paths relative to the output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: impl Into<String>) -> PathBuf {
        let name = name.into();
        let p = self.dir.join(&name);
        self.files.push(name);
        p
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        std::fs::write(&path, text).map_err(CliError::io(path))
    }

    fn finish(mut self, command: &str, cfg: &ExperimentConfig) -> CliResult<()> {
        let manifest = Manifest {
            tool: "otgraph",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
            files: std::mem::take(&mut self.files),
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

/// The point cloud to work on: `cfg.input` if set, otherwise the first generated dataset.
fn input_cloud(cfg: &ExperimentConfig) -> CliResult<PointCloud> {
    match &cfg.input {
        Some(path) => Ok(load_csv(path)?),
        None => Ok(prepare_dataset(cfg, first_seed(cfg), per_arm_values(cfg)[0])?.noisy),
    }
}

#[derive(Serialize)]
struct GraphReport<'a> {
    spec: &'a GraphSpec,
    n: usize,
    edges: usize,
    components: usize,
    degree: DegreeStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSummary>,
}

fn build_graph<'a>(cfg: &'a ExperimentConfig, cloud: &PointCloud) -> CliResult<(WeightedGraph, GraphReport<'a>)> {
    let spec = &cfg.graph;
    if spec.method == MethodTag::Entot && cloud.len() > ENTROPIC_WARN_N {
        eprintln!(
            "warning: entot builds a dense graph with {} entries for N = {}",
            cloud.len() * cloud.len(),
            cloud.len()
        );
    }
    let built = build_single(cloud, &cfg.dataset, spec)?;
    let report = GraphReport {
        spec,
        n: built.graph.n(),
        edges: built.graph.num_edges(),
        components: built.graph.components().1,
        degree: built.graph.degree_stats(),
        solver: built.solver,
    };
    Ok((built.graph, report))
}

/// Edge list from `cfg.edge_list`, or built from the input cloud.
fn graph_for(cfg: &ExperimentConfig, cloud: Option<&PointCloud>) -> CliResult<(WeightedGraph, serde_json::Value)> {
    if let Some(path) = &cfg.edge_list {
        let g = read_edge_list(path)?;
        let info = json!({ "edge_list": path, "n": g.n(), "edges": g.num_edges() });
        return Ok((g, info));
    }
    let owned;
    let cloud = match cloud {
        Some(c) => c,
        None => {
            owned = input_cloud(cfg)?;
            &owned
        }
    };
    let (g, report) = build_graph(cfg, cloud)?;
    let info = serde_json::to_value(&report).expect("report serializes");
    Ok((g, info))
}

/// Writes clean and noisy point clouds (and labelled subsets) for every seed.
pub fn generate(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut out = Outputs::create(&cfg.output_dir)?;
    if cfg.experiment.uses_arms() {
        for per_arm in per_arm_values(cfg) {
            for &seed in &cfg.seeds {
                let data = prepare_dataset(cfg, seed, per_arm)?;
                let tag = format!("seed{seed}_arm{per_arm}");
                save_csv(&data.clean, out.path(format!("clean_{tag}.csv")))?;
                save_csv(&data.noisy, out.path(format!("noisy_{tag}.csv")))?;
                let truth = data.noisy.labels().expect("spiral arms are labelled");
                let labels: Vec<usize> = data.labeled.iter().map(|&i| truth[i]).collect();
                write_labels_csv(out.path(format!("labels_{tag}.csv")), &data.labeled, &labels)?;
            }
        }
    } else {
        for (k, &seed) in cfg.seeds.iter().enumerate() {
            let data = prepare_dataset(cfg, seed, 0)?;
            if k == 0 {
                save_csv(&data.clean, out.path("clean.csv"))?;
            }
            save_csv(&data.noisy, out.path(format!("noisy_seed{seed}.csv")))?;
        }
    }
    out.finish("generate", cfg)
}

/// Builds one graph and writes it as an edge list with a diagnostics sidecar.
pub fn graph(cfg: &ExperimentConfig) -> CliResult<()> {
    let cloud = input_cloud(cfg)?;
    let (g, report) = build_graph(cfg, &cloud)?;
    let mut out = Outputs::create(&cfg.output_dir)?;
    write_edge_list(&g, out.path("graph.tsv"))?;
    out.write_json("graph.json", &report)?;
    out.finish("graph", cfg)
}

/// Eigenmap embedding of a graph.
pub fn embed(cfg: &ExperimentConfig) -> CliResult<()> {
    let (g, info) = graph_for(cfg, None)?;
    let emb = eigenmap(&g, cfg.eigen_dim)?;
    let mut out = Outputs::create(&cfg.output_dir)?;
    emb.write_csv(out.path("embedding.csv"))?;
    out.write_json(
        "embedding.json",
        &json!({ "dim": emb.dim(), "eigenvalues": emb.eigenvalues, "graph": info }),
    )?;
    out.finish("embed", cfg)
}

/// Runs the full parameter sweep of the configured experiment.
pub fn sweep(cfg: &ExperimentConfig) -> CliResult<()> {
    let records = run_sweep(cfg)?;
    let mut out = Outputs::create(&cfg.output_dir)?;
    write_jsonl(&records, &out.path("results.jsonl"))?;
    out.write_json("summary.json", &summarize(&records))?;
    if cfg.experiment == ExperimentKind::SslDensity {
        let path = out.path("heatmap.csv");
        std::fs::write(&path, density_heatmap(&records)).map_err(CliError::io(path))?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} cells failed; see the error field in results.jsonl",
            records.len()
        );
    }
    out.finish("sweep", cfg)
}

/// Label propagation on one graph.
pub fn ssl(cfg: &ExperimentConfig) -> CliResult<()> {
    let (cloud, labeled) = match &cfg.input {
        Some(path) => {
            let cloud = load_csv(path)?;
            let mut rng = SeededRng::new(first_seed(cfg));
            let d = &cfg.dataset;
            let labeled = label_subset(&cloud, d.label_fraction, d.labels_per_class, &mut rng)?;
            (cloud, labeled)
        }
        None => {
            let data = prepare_dataset(cfg, first_seed(cfg), per_arm_values(cfg)[0])?;
            (data.noisy, data.labeled)
        }
    };
    let truth = cloud
        .labels()
        .ok_or_else(|| CliError::Usage("label propagation needs a labelled input (label column)".into()))?
        .to_vec();
    let classes = cloud.num_classes().unwrap_or(0);
    let prior = LabelMatrix::from_truth(&truth, classes, &labeled)?;
    let (g, info) = graph_for(cfg, Some(&cloud))?;
    let q = llgc_solve(&row_normalize(&g)?, &prior, cfg.mu)?;
    let pred = predict(&q);
    let exclude: &[usize] = if cfg.exclude_labeled { &labeled } else { &[] };
    let acc = accuracy(&pred.labels, &truth, exclude)?;

    let mut out = Outputs::create(&cfg.output_dir)?;
    let given: Vec<usize> = labeled.iter().map(|&i| truth[i]).collect();
    write_labels_csv(out.path("labels.csv"), &labeled, &given)?;
    let all: Vec<usize> = (0..pred.labels.len()).collect();
    write_labels_csv(out.path("predictions.csv"), &all, &pred.labels)?;
    write_likelihood_csv(out.path("likelihood.csv"), &q)?;
    out.write_json(
        "ssl.json",
        &json!({
            "accuracy": acc,
            "labeled": labeled.len(),
            "ties": pred.ties.len(),
            "mu": cfg.mu,
            "graph": info,
        }),
    )?;
    out.finish("ssl", cfg)
}

/// Diffusion denoising for every `t` in the config.
pub fn denoise(cfg: &ExperimentConfig) -> CliResult<()> {
    let (cloud, target) = match &cfg.input {
        Some(path) => (load_csv(path)?, None),
        None => {
            let data = prepare_dataset(cfg, first_seed(cfg), per_arm_values(cfg)[0])?;
            (data.noisy, Some(data.clean_embedded))
        }
    };
    let (g, info) = graph_for(cfg, Some(&cloud))?;
    if g.n() != cloud.len() {
        return Err(CliError::Usage(format!(
            "graph has {} nodes but the data has {} rows",
            g.n(),
            cloud.len()
        )));
    }
    let w = row_normalize(&g)?;
    let mut out = Outputs::create(&cfg.output_dir)?;
    let mut errors = Vec::new();
    for &t in &cfg.denoise_t {
        let y = magic_denoise(&w, cloud.points(), t)?;
        if let Some(target) = &target {
            errors.push(json!({ "t": t, "rmse": rmse(&y, target) }));
        }
        let denoised = PointCloud::with_metadata(
            y,
            cloud.params().map(<[f64]>::to_vec),
            cloud.labels().map(<[usize]>::to_vec),
        )?;
        save_csv(&denoised, out.path(format!("denoised_t{t}.csv")))?;
    }
    out.write_json(
        "denoise.json",
        &json!({ "t": cfg.denoise_t, "rmse": errors, "graph": info }),
    )?;
    out.finish("denoise", cfg)
}
