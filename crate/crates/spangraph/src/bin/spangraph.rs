use std::{path::PathBuf, process::ExitCode};

use clap::{Args, Parser, Subcommand};
use spangraph::{
    bench::{bench_sampling, BenchSpec},
    config::{generator_spec, RunConfig, Settings},
    io, metrics,
    run::{self, VariantSpec},
    synth, Error, Result,
};
use spangraph_core::sampler::EdgeProbabilities;

#[derive(Parser)]
#[command(name = "spangraph", version, about = "Memory-bounded GNN training on growing spanning subgraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write metrics, timings and a checkpoint.
    Train(RunArgs),
    /// Train several variants on the same data and write aligned results.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated variants, e.g. spangnn-vm@0.3,spangnn-gnr,dropedge@0.7,full
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
    },
    /// Write the per-edge sampling distribution of a dataset.
    SampleInspect(RunArgs),
    /// Time two-step against direct sampling on a random graph.
    BenchSampling {
        #[arg(long, default_value_t = 1_000_000)]
        edges: usize,
        #[arg(long, default_value_t = 10_000)]
        s1: usize,
        #[arg(long, default_value_t = 1_000)]
        s2: usize,
        #[arg(long, default_value_t = 9)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for bench.csv; printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    GenData(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory with edges.txt, features.{csv,bin}, labels.txt, splits.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    alpha_up: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    s1: Option<String>,
    #[arg(long)]
    s2: Option<String>,
    #[arg(long, value_parser = ["vm", "gnr", "uniform"])]
    sampler: Option<String>,
    #[arg(long, value_parser = ["spangnn", "dropedge", "full"])]
    baseline: Option<String>,
    #[arg(long, value_parser = ["gcn", "sage"])]
    model: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["sbm", "pa"])]
    kind: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    feature_dim: Option<String>,
    #[arg(long)]
    p_in: Option<String>,
    #[arg(long)]
    p_out: Option<String>,
    /// Edges per arriving node for preferential attachment.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Write features in the binary SPGF layout.
    #[arg(long)]
    binary_features: bool,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn base_settings(config: &Option<PathBuf>) -> Result<Settings> {
    config.as_deref().map_or_else(|| Ok(Settings::default()), Settings::load)
}

fn overlay(s: &mut Settings, pairs: &[(&str, Option<String>)]) -> Result<()> {
    for (k, v) in pairs {
        if let Some(v) = v {
            s.set(k, v.clone())?;
        }
    }
    Ok(())
}

impl RunArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = base_settings(&self.config)?;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        overlay(
            &mut s,
            &[
                ("data", path(&self.data)),
                ("alpha_up", self.alpha_up.clone()),
                ("beta", self.beta.clone()),
                ("s1", self.s1.clone()),
                ("s2", self.s2.clone()),
                ("sampler", self.sampler.clone()),
                ("baseline", self.baseline.clone()),
                ("model", self.model.clone()),
                ("layers", self.layers.clone()),
                ("hidden", self.hidden.clone()),
                ("lr", self.lr.clone()),
                ("epochs", self.epochs.clone()),
                ("seed", self.seed.clone()),
                ("out", path(&self.out)),
            ],
        )?;
        Ok(s)
    }

    fn config(&self) -> Result<RunConfig> {
        RunConfig::from_settings(&self.settings()?)
    }
}

fn report(run: &run::RunOutput) {
    if let (Some(last), Some(best)) = (run.records.last(), metrics::best_epoch(&run.records)) {
        println!(
            "{}: final loss {:.4}, best val_acc {:.4} at epoch {}, edge_ratio {:.3}, peak edges {}",
            run.label, last.loss, best.val_acc, best.epoch, last.edge_ratio, run.memory.peak_directed_edges
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.config()?;
            let run = run::cmd_train(&cfg)?;
            report(&run);
            println!("wrote {}", cfg.out.display());
        }
        Command::Compare { run, variants } => {
            let cfg = run.config()?;
            let specs = variants.iter().map(|v| v.parse()).collect::<Result<Vec<VariantSpec>>>()?;
            for r in run::cmd_compare(&cfg, &specs)? {
                report(&r);
            }
            println!("wrote {}", cfg.out.display());
        }
        Command::SampleInspect(args) => {
            let cfg = args.config()?;
            let data = run::load_data(&cfg)?;
            let probs = EdgeProbabilities::for_graph(&data.graph, cfg.sampler, cfg.layer_type.propagation_kind())?;
            let normalized = probs.normalized();
            std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Io { path: cfg.out.clone(), source: e })?;
            let path = cfg.out.join("sample_inspect.csv");
            let rows = data.graph.edges().iter().enumerate().map(|(e, &(u, v))| {
                vec![e.to_string(), u.to_string(), v.to_string(), probs.weights()[e].to_string(), normalized[e].to_string()]
            });
            metrics::write_csv(&path, metrics::SAMPLE_INSPECT_COLUMNS, rows)?;
            println!("wrote {} ({} edges, sampler {})", path.display(), data.graph.num_edges(), cfg.sampler.name());
        }
        Command::BenchSampling { edges, s1, s2, runs, seed, out } => {
            if runs == 0 || s2 == 0 || s2 > s1 || s1 > edges {
                return Err(Error::Config("need runs >= 1 and 1 <= s2 <= s1 <= edges".into()));
            }
            let result = bench_sampling(&BenchSpec { edges, s1, s2, runs, seed })?;
            println!(
                "two-step median {:.3} ms, direct median {:.3} ms, speedup {:.1}x",
                result.median_two_step_ms(),
                result.median_direct_ms(),
                result.speedup()
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                let rows = (0..runs).map(|i| {
                    vec![i.to_string(), result.two_step_ms[i].to_string(), result.direct_ms[i].to_string()]
                });
                metrics::write_csv(&dir.join("bench.csv"), &["run", "two_step_ms", "direct_ms"], rows)?;
            }
        }
        Command::GenData(args) => {
            let mut s = base_settings(&args.config)?;
            overlay(
                &mut s,
                &[
                    ("gen.kind", args.kind.clone()),
                    ("gen.nodes", args.nodes.clone()),
                    ("gen.classes", args.classes.clone()),
                    ("gen.feature_dim", args.feature_dim.clone()),
                    ("gen.p_in", args.p_in.clone()),
                    ("gen.p_out", args.p_out.clone()),
                    ("gen.m", args.m.clone()),
                    ("gen.noise", args.noise.clone()),
                    ("gen.seed", args.seed.clone()),
                ],
            )?;
            let spec = generator_spec(&s, 0)?;
            let data = synth::generate(&spec)?;
            io::write_dataset(&args.out, &data, args.binary_features)?;
            println!(
                "wrote {} ({} nodes, {} edges, {} classes)",
                args.out.display(),
                data.graph.num_nodes(),
                data.graph.num_edges(),
                data.num_classes()
            );
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPANGRAPH_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Config(format!("SPANGRAPH_THREADS must be a count, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|()| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
