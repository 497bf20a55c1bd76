//! `madp` command line: synthetic graph/data generation, contribution
//! bounding, ILP export, noise calibration, and experiment sweeps.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use madp_core::accounting::{calibrate_sigma_dpsgd, calibrate_sigma_gaussian, PrivacyBudget};
use madp_core::bounding::{
    greedy_dup, greedy_interleaved, greedy_min_sep, greedy_no_dup, random_baseline, BaselinePool,
    BoundingResult, InterleaveSpec, TieBreak,
};
use madp_core::datagen::{gen_regression, save_dataset, CovarianceMode, RegressionSpec};
use madp_core::graphgen::{degree_histogram, gen_regular, gen_skewed, GraphGenSpec};
use madp_core::harness::{
    compare_retention, run_experiment, sweep_bias_tradeoff, ExperimentConfig,
};
use madp_core::hypergraph::{
    load_hypergraph, save_hypergraph, save_schedule, save_selection,
};
use madp_core::ilp::{export_cb_ilp, export_minsep_ilp, exact_solve_cb, SolveLimits};

#[derive(Parser)]
#[command(name = "madp", version, about = "Differentially private training for multi-user examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic attribution hypergraph.
    GenGraph(GenGraphArgs),
    /// Generate synthetic logistic-regression data for a hypergraph.
    GenData(GenDataArgs),
    /// Run a contribution-bounding algorithm.
    Bound(BoundArgs),
    /// Exact formulations: LP export and the small-instance solver.
    #[command(subcommand)]
    Ilp(IlpCommand),
    /// Privacy accounting.
    #[command(subcommand)]
    Account(AccountCommand),
    /// Config-driven experiment sweeps.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphModelArg {
    Regular,
    Skewed,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long, value_enum)]
    model: GraphModelArg,
    #[arg(long)]
    edges: usize,
    #[arg(long, default_value_t = 2.0)]
    arity: f64,
    #[arg(long, default_value_t = 2.0)]
    degree: f64,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CovArg {
    Sqrt,
    Inv,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 20.0)]
    steepness: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "sqrt")]
    cov: CovArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Nodup,
    Dup,
    Minsep,
    Interleaved,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Id,
    SeededShuffle,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    All,
    Low,
    High,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of batches (minsep).
    #[arg(long = "T", default_value_t = 0)]
    num_batches: usize,
    /// Batch size (minsep).
    #[arg(long = "B", default_value_t = 0)]
    batch_size: usize,
    /// Min-separation (minsep).
    #[arg(long = "b", default_value_t = 0)]
    min_sep: usize,
    /// Arity threshold splitting the interleaved groups.
    #[arg(long = "u", default_value_t = 2)]
    threshold: usize,
    #[arg(long, default_value_t = 1)]
    c1: usize,
    #[arg(long, default_value_t = 1)]
    c2: usize,
    #[arg(long, default_value_t = true)]
    allow_dup: bool,
    /// Pool for the random baseline.
    #[arg(long, value_enum, default_value = "all")]
    mode: PoolArg,
    /// Sample size for the random baseline (0: match greedy-dup at k).
    #[arg(long, default_value_t = 0)]
    target_size: usize,
    #[arg(long, value_enum, default_value = "id")]
    tie: TieArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum IlpCommand {
    /// Write the contribution-bounding ILP as a CPLEX-LP file.
    ExportCb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = false)]
        allow_dup: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the min-separation ILP as a CPLEX-LP file.
    ExportMinsep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long = "T")]
        num_batches: usize,
        #[arg(long = "B")]
        batch_size: usize,
        #[arg(long = "b")]
        min_sep: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the contribution-bounding problem exactly (tiny instances).
    SolveCb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = false)]
        allow_dup: bool,
        #[arg(long, default_value_t = 50_000_000)]
        max_nodes: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MechArg {
    Dpsgd,
    Dpmf,
}

#[derive(Subcommand)]
enum AccountCommand {
    /// Calibrate the noise multiplier for a privacy budget.
    Calibrate {
        #[arg(long, value_enum)]
        mech: MechArg,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Sampling probability (dpsgd).
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Composition steps (dpsgd).
        #[arg(long, default_value_t = 1)]
        steps: u64,
        /// Strategy band (dpmf; recorded for context).
        #[arg(long = "b", default_value_t = 1)]
        band: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Full sweep: bound, calibrate, train, evaluate.
    Run(ExperimentArgs),
    /// Bias-mitigation sweep over the 80 interleaved settings.
    SweepBias(ExperimentArgs),
    /// Regular-vs-skewed retention comparison.
    Retention(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenGraph(args) => gen_graph(args),
        Command::GenData(args) => gen_data(args),
        Command::Bound(args) => bound(args),
        Command::Ilp(cmd) => ilp(cmd),
        Command::Account(cmd) => account(cmd),
        Command::Experiment(cmd) => experiment(cmd),
    }
}

fn gen_graph(args: GenGraphArgs) -> Result<()> {
    let spec = GraphGenSpec {
        num_edges: args.edges,
        expected_arity: args.arity,
        expected_degree: args.degree,
        skew_alpha: args.alpha,
        seed: args.seed,
    };
    let h = match args.model {
        GraphModelArg::Regular => gen_regular(&spec),
        GraphModelArg::Skewed => gen_skewed(&spec),
    }?;
    save_hypergraph(&h, &args.out)?;
    let hist = degree_histogram(&h);
    let max_degree = hist.keys().max().copied().unwrap_or(0);
    println!(
        "edges={} users={} max_degree={max_degree} out={}",
        h.num_edges(),
        h.num_users(),
        args.out.display()
    );
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let h = load_hypergraph(&args.graph).context("loading graph")?;
    let ds = gen_regression(
        &h,
        &RegressionSpec {
            dim: args.dim,
            steepness: args.steepness,
            bias_scale: args.beta,
            covariance: match args.cov {
                CovArg::Sqrt => CovarianceMode::Sqrt,
                CovArg::Inv => CovarianceMode::Inv,
            },
            seed: args.seed,
        },
    )?;
    save_dataset(&ds, &args.out)?;
    let (train, test, val) = ds.split_sizes();
    println!(
        "examples={} dim={} split={train}/{test}/{val} out={}",
        ds.len(),
        ds.dim(),
        args.out.display()
    );
    Ok(())
}

fn summary_line(r: &BoundingResult) {
    println!(
        "total={} distinct={} k={} avg_arity={}",
        r.total_count, r.distinct_count, r.achieved_k, r.avg_arity
    );
}

fn bound(args: BoundArgs) -> Result<()> {
    let h = load_hypergraph(&args.graph).context("loading graph")?;
    let tie = match args.tie {
        TieArg::Id => TieBreak::IdAscending,
        TieArg::SeededShuffle => TieBreak::SeededShuffle(args.seed),
    };
    match args.algo {
        AlgoArg::Nodup => {
            let r = greedy_no_dup(&h, args.k, tie);
            save_selection(&r.output, &args.out)?;
            summary_line(&r);
        }
        AlgoArg::Dup => {
            let r = greedy_dup(&h, args.k, tie);
            save_selection(&r.output, &args.out)?;
            summary_line(&r);
        }
        AlgoArg::Interleaved => {
            let spec = InterleaveSpec {
                threshold: args.threshold,
                c1: args.c1,
                c2: args.c2,
                allow_dup: args.allow_dup,
            };
            let r = greedy_interleaved(&h, args.k, &spec, tie);
            save_selection(&r.output, &args.out)?;
            summary_line(&r);
        }
        AlgoArg::Random => {
            let pool = match args.mode {
                PoolArg::All => BaselinePool::All,
                PoolArg::Low => BaselinePool::Low,
                PoolArg::High => BaselinePool::High,
            };
            let target = if args.target_size > 0 {
                args.target_size
            } else {
                greedy_dup(&h, args.k, tie).total_count
            };
            let sel = random_baseline(&h, target, pool, args.seed)?;
            let r = madp_core::bounding::summarize_selection(&h, sel);
            save_selection(&r.output, &args.out)?;
            summary_line(&r);
        }
        AlgoArg::Minsep => {
            if args.num_batches == 0 || args.batch_size == 0 || args.min_sep == 0 {
                bail!("minsep needs --T, --B and --b");
            }
            let r = greedy_min_sep(&h, args.num_batches, args.batch_size, args.min_sep, tie)
                .context("no feasible schedule")?;
            save_schedule(&r.output, &args.out)?;
            println!(
                "total={} distinct={} k={} avg_arity={}",
                r.total_count, r.distinct_count, r.achieved_k, r.avg_arity
            );
        }
    }
    Ok(())
}

fn ilp(cmd: IlpCommand) -> Result<()> {
    match cmd {
        IlpCommand::ExportCb {
            graph,
            k,
            allow_dup,
            out,
        } => {
            let h = load_hypergraph(&graph)?;
            export_cb_ilp(&h, k, allow_dup, &out)?;
            println!("variables={} out={}", h.num_edges(), out.display());
        }
        IlpCommand::ExportMinsep {
            graph,
            num_batches,
            batch_size,
            min_sep,
            out,
        } => {
            let h = load_hypergraph(&graph)?;
            export_minsep_ilp(&h, num_batches, batch_size, min_sep, &out)?;
            println!(
                "variables={} out={}",
                h.num_edges() * num_batches,
                out.display()
            );
        }
        IlpCommand::SolveCb {
            graph,
            k,
            allow_dup,
            max_nodes,
        } => {
            let h = load_hypergraph(&graph)?;
            let limits = SolveLimits {
                max_nodes,
                time_limit: None,
            };
            let r = exact_solve_cb(&h, k, allow_dup, limits)?;
            println!(
                "total={} distinct={} k={} optimal={} nodes={}",
                r.result.total_count,
                r.result.distinct_count,
                r.result.achieved_k,
                r.optimal,
                r.nodes
            );
        }
    }
    Ok(())
}

fn account(cmd: AccountCommand) -> Result<()> {
    match cmd {
        AccountCommand::Calibrate {
            mech,
            eps,
            delta,
            k,
            p,
            steps,
            band,
        } => {
            let budget = PrivacyBudget::new(eps, delta)?;
            let (sigma, accountant) = match mech {
                MechArg::Dpsgd => (
                    calibrate_sigma_dpsgd(budget, k, p, steps)?,
                    "rdp-subsampled-group-lift",
                ),
                MechArg::Dpmf => (
                    calibrate_sigma_gaussian(budget, (k as f64).sqrt())?,
                    "analytic-gaussian-minsep",
                ),
            };
            println!("sigma={sigma} accountant={accountant} k={k} b={band}");
        }
    }
    Ok(())
}

fn experiment(cmd: ExperimentCommand) -> Result<()> {
    match cmd {
        ExperimentCommand::Run(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            let summary = run_experiment(&cfg, &args.out)?;
            println!(
                "rows={} ok={} results={} best={}",
                summary.rows,
                summary.ok_rows,
                summary.results_path.display(),
                summary.best_path.display()
            );
        }
        ExperimentCommand::SweepBias(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            let summary = sweep_bias_tradeoff(&cfg, &args.out)?;
            println!(
                "settings={} survivors={} results={}",
                summary.settings,
                summary.survivors.len(),
                summary.results_path.display()
            );
        }
        ExperimentCommand::Retention(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            let summary = compare_retention(&cfg, &args.out)?;
            println!(
                "cells={} retention={}",
                summary.cells,
                summary.retention_path.display()
            );
        }
    }
    Ok(())
}
