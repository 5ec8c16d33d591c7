//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{read_config_file, ExperimentConfig, GraphSpec, MethodTag};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "otgraph",
    version,
    about = "Sparse neighbourhood graphs from quadratically regularized OT"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the clean and noisy datasets of an experiment.
    Generate(CommonArgs),
    /// Build one graph and write it as an edge list.
    Graph(GraphArgs),
    /// Eigenmap embedding of a graph.
    Embed(EmbedArgs),
    /// Run the parameter sweep of an experiment.
    Sweep(CommonArgs),
    /// Label propagation on one graph.
    Ssl(GraphArgs),
    /// Diffusion denoising on one graph.
    Denoise(DenoiseArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for sweep cells.
    #[arg(long, env = "OTGRAPH_JOBS")]
    pub jobs: Option<usize>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Point cloud CSV; generated from the config when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodTag>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Existing edge list to embed instead of building a graph.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Existing edge list to diffuse on.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Diffusion times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<usize>>,
}

fn load(common: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::resolve(read_config_file(&common.config)?)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn load_graph(args: &GraphArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = load(&args.common)?;
    if let Some(input) = &args.input {
        cfg.input = Some(input.clone());
    }
    if let Some(method) = args.method {
        cfg.graph = GraphSpec {
            method,
            epsilon: args.epsilon,
            k: args.k,
        };
    } else {
        if args.epsilon.is_some() {
            cfg.graph.epsilon = args.epsilon;
        }
        if args.k.is_some() {
            cfg.graph.k = args.k;
        }
    }
    Ok(cfg)
}

fn run_command(command: Command) -> CliResult<()> {
    let (cfg, jobs) = match &command {
        Command::Generate(a) | Command::Sweep(a) => (load(a)?, a.jobs),
        Command::Graph(a) | Command::Ssl(a) => (load_graph(a)?, a.common.jobs),
        Command::Embed(a) => {
            let mut cfg = load_graph(&a.graph)?;
            if a.edges.is_some() {
                cfg.edge_list = a.edges.clone();
            }
            if let Some(dim) = a.dim {
                if dim == 0 {
                    return Err(CliError::Usage("--dim must be positive".into()));
                }
                cfg.eigen_dim = dim;
            }
            (cfg, a.graph.common.jobs)
        }
        Command::Denoise(a) => {
            let mut cfg = load_graph(&a.graph)?;
            if a.edges.is_some() {
                cfg.edge_list = a.edges.clone();
            }
            if let Some(t) = &a.t {
                cfg.denoise_t = t.clone();
            }
            (cfg, a.graph.common.jobs)
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match command {
        Command::Generate(_) => commands::generate(&cfg),
        Command::Graph(_) => commands::graph(&cfg),
        Command::Embed(_) => commands::embed(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
        Command::Ssl(_) => commands::ssl(&cfg),
        Command::Denoise(_) => commands::denoise(&cfg),
    })
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("otgraph: {e}");
            e.exit_code()
        }
    }
}
