//! Command-line driver: dataset generation, training, baseline solving,
//! evaluation, the depth ablation, and micro-benchmarks.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. A plain-text
//! `key=value` config file can seed any subcommand's flags; explicit
//! flags override it. `NOMANET_SEED` is used when `--seed` is absent.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nomanet_core::baselines::{
    brute_force_oracle, load_results, save_results, sca_solve, solve_dataset, ScaConfig,
    SolveResult, SolveStatus,
};
use nomanet_core::data::{
    generate_datasets, load_dataset, split_slices, standard_datasets, DatasetKind, DatasetSpec,
    DEFAULT_SNR_DB,
};
use nomanet_core::eval::{
    ablation_table, evaluate_checkpoint, inference_time, machine_descriptor, run_ablation,
    write_reports_delimited, write_table, TimingConfig,
};
use nomanet_core::model::{Allocator, GatModel, MlpConfig, MlpModel, ModelConfig, Variant};
use nomanet_core::noma::{NetworkInstance, SystemConfig};
use nomanet_core::training::{
    load_checkpoint, save_checkpoint, train, PayloadFormat, TrainConfig, TrainError,
};

#[derive(Parser)]
#[command(
    name = "nomanet",
    version,
    about = "Energy-efficient NOMA power allocation: datasets, allocator training, convex baseline, evaluation",
    args_override_self = true
)]
struct Cli {
    /// Plain-text key=value file applied as flag defaults for the
    /// subcommand; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Rayleigh-fading channel datasets
    Generate(GenerateArgs),
    /// Train an allocator unsupervised with the penalty loss
    Train(TrainArgs),
    /// Sweep a reference solver over a dataset
    Baseline(BaselineArgs),
    /// Compute optimality/scalability, feasibility rate and timing for checkpoints
    Eval(EvalArgs),
    /// Depth-vs-variant ablation grid
    Ablate(AblateArgs),
    /// Micro-benchmark model inference against the convex solver
    Bench(BenchArgs),
}

#[derive(Args)]
struct SystemFlags {
    /// Transmit power budget, watts
    #[arg(long, default_value_t = 10.0)]
    p_max: f64,
    /// Circuit power, watts
    #[arg(long, default_value_t = 1.0)]
    p_c: f64,
    /// Per-user rate requirement, bit/s/Hz
    #[arg(long, default_value_t = 0.1)]
    r_req: f64,
}

impl SystemFlags {
    fn build(&self) -> Result<SystemConfig, CliError> {
        SystemConfig::new(self.p_max, self.p_c, self.r_req).map_err(usage)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Produce all ten standard datasets
    #[arg(long)]
    all: bool,
    /// Subchannels (N) for a custom dataset
    #[arg(long)]
    n: Option<usize>,
    /// Users per subchannel (K) for a custom dataset
    #[arg(long)]
    k: Option<usize>,
    /// Sample count for a custom dataset
    #[arg(long)]
    size: Option<usize>,
    /// Train,val,test sizes (comma separated); omitted = test-only
    #[arg(long)]
    split: Option<String>,
    /// Name of the custom dataset file (without extension)
    #[arg(long, default_value = "custom")]
    name: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SNR_DB)]
    snr_db: f64,
    /// Output directory
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// plain | res | dense | mlp
    #[arg(long)]
    variant: String,
    /// Dataset file with a train/val split
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Attention layers (GAT variants)
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// QoS penalty weight
    #[arg(long, default_value_t = 10.0)]
    lambda1: f64,
    /// Power-ordering penalty weight
    #[arg(long, default_value_t = 10.0)]
    lambda2: f64,
    /// Relative training-time pad on the rate requirement
    #[arg(long, default_value_t = 0.0)]
    qos_margin: f64,
    /// Feed log10 gains to the first layer
    #[arg(long)]
    log_input: bool,
    /// Cap the number of training samples
    #[arg(long)]
    train_limit: Option<usize>,
    /// Cap the number of validation samples
    #[arg(long)]
    val_limit: Option<usize>,
    /// Checkpoint path (default <variant>.ckpt)
    #[arg(long)]
    out: Option<PathBuf>,
    /// text | binary checkpoint payload
    #[arg(long, default_value = "text")]
    ckpt_format: String,
    #[command(flatten)]
    system: SystemFlags,
}

#[derive(Args)]
struct BaselineArgs {
    /// sca | oracle
    #[arg(long, default_value = "sca")]
    solver: String,
    #[arg(long)]
    data: PathBuf,
    /// Cap the number of samples solved
    #[arg(long)]
    limit: Option<usize>,
    /// Grid step for the oracle (default p_max / 200)
    #[arg(long)]
    grid_step: Option<f64>,
    /// Results file (default <dataset>_<solver>_results.tsv)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    system: SystemFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoints to evaluate
    #[arg(long, num_args = 1.., required = true)]
    ckpt: Vec<PathBuf>,
    /// Datasets to evaluate on
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Baseline results files, one per dataset (same order); computed
    /// with the convex solver when omitted
    #[arg(long, num_args = 0..)]
    baseline: Vec<PathBuf>,
    /// Cap the number of evaluated samples per dataset
    #[arg(long, default_value_t = 100)]
    limit: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Report base path; writes <out>.tsv and <out>.txt
    #[arg(long, default_value = "report")]
    out: PathBuf,
    #[command(flatten)]
    system: SystemFlags,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset with a train/val split
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "1,2,3,4")]
    depths: String,
    #[arg(long, default_value = "plain,res,dense")]
    variants: String,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 0.0)]
    qos_margin: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    val_limit: Option<usize>,
    /// Samples used for the optimality column
    #[arg(long, default_value_t = 100)]
    eval_limit: usize,
    /// Baseline results file for the evaluation slice; computed when omitted
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Output directory for the grid table
    #[arg(long, default_value = "ablation")]
    out: PathBuf,
    #[command(flatten)]
    system: SystemFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Checkpoints to time
    #[arg(long, num_args = 1.., required = true)]
    ckpt: Vec<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Common sample count for model timing
    #[arg(long, default_value_t = 50)]
    limit: usize,
    /// Samples given to the convex solver
    #[arg(long, default_value_t = 10)]
    solver_limit: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Optional output file for the comparison
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    system: SystemFlags,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("NOMANET_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(7)
}

/// Rewrites argv so `key=value` lines from `--config` become flags placed
/// right after the subcommand; explicit flags later in argv override them.
fn inject_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let config_path = args.iter().position(|a| a == "--config").map(|i| i + 1);
    let Some(pi) = config_path else {
        return Ok(args);
    };
    let path = args
        .get(pi)
        .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let subcommands = ["generate", "train", "baseline", "eval", "ablate", "bench"];
    let sub_pos = args
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .ok_or_else(|| CliError::Usage("--config requires a subcommand".into()))?;
    let mut injected = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key=value", ln + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match value {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value.to_string());
            }
        }
    }
    let mut out = args[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend(args[sub_pos + 1..].iter().cloned());
    Ok(out)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match inject_config(args) {
        Ok(a) => a,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::parse_from(args);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_split(s: &str, size: usize) -> Result<DatasetKind, CliError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --split {s:?}: {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Usage("--split needs three comma-separated sizes".into()));
    }
    let kind = DatasetKind::TrainValTest {
        split: [parts[0], parts[1], parts[2]],
    };
    if parts.iter().sum::<usize>() != size {
        return Err(CliError::Usage(format!(
            "--split {s} does not sum to --size {size}"
        )));
    }
    Ok(kind)
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed);
    let specs: Vec<(String, DatasetSpec)> = if a.all {
        standard_datasets(seed, a.snr_db)
    } else {
        let (Some(n), Some(k), Some(size)) = (a.n, a.k, a.size) else {
            return Err(CliError::Usage(
                "generate needs --all or all of --n, --k, --size".into(),
            ));
        };
        let kind = match &a.split {
            Some(s) => parse_split(s, size)?,
            None => DatasetKind::TestOnly,
        };
        vec![(
            a.name.clone(),
            DatasetSpec {
                n_subchannels: n,
                k_per_subchannel: k,
                size,
                kind,
                seed,
                snr_db: a.snr_db,
            },
        )]
    };
    for (_, spec) in &specs {
        spec.validate().map_err(usage)?;
    }
    let paths = generate_datasets(&specs, &a.out).map_err(runtime)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Accepts `data/ds3` for a file stored as `data/ds3.txt`.
fn resolve_dataset(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    let with_ext = path.with_extension("txt");
    if with_ext.exists() {
        return Ok(with_ext);
    }
    Err(CliError::Usage(format!(
        "dataset {} not found",
        path.display()
    )))
}

fn load_split_dataset(
    path: &Path,
) -> Result<(DatasetSpec, Vec<NetworkInstance>), CliError> {
    let path = resolve_dataset(path)?;
    load_dataset(&path).map_err(runtime)
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let sys = a.system.build()?;
    let seed = resolve_seed(a.seed);
    let (spec, instances) = load_split_dataset(&a.data)?;
    let (train_slice, val_slice, _) = split_slices(&spec, &instances);
    if train_slice.is_empty() || val_slice.is_empty() {
        return Err(CliError::Usage(format!(
            "dataset {} has no train/val split; regenerate with --split",
            a.data.display()
        )));
    }
    let train_slice = &train_slice[..a.train_limit.unwrap_or(train_slice.len()).min(train_slice.len())];
    let val_slice = &val_slice[..a.val_limit.unwrap_or(val_slice.len()).min(val_slice.len())];

    let format = match a.ckpt_format.as_str() {
        "text" => PayloadFormat::Text,
        "binary" => PayloadFormat::Binary,
        other => return Err(CliError::Usage(format!("unknown --ckpt-format {other}"))),
    };
    let mut rng = nomanet_core::data::instance_rng(seed, 0);
    let model = match a.variant.as_str() {
        "mlp" => Allocator::Mlp(
            MlpModel::init(
                MlpConfig {
                    log_input: a.log_input,
                    ..MlpConfig::with_input_width(spec.k_per_subchannel)
                },
                &mut rng,
            )
            .map_err(usage)?,
        ),
        v => {
            let variant = Variant::parse(v)
                .ok_or_else(|| CliError::Usage(format!("unknown --variant {v}")))?;
            let cfg = ModelConfig {
                log_input: a.log_input,
                ..ModelConfig::with_depth(variant, a.depth)
            };
            Allocator::Gat(GatModel::init(cfg, &mut rng).map_err(usage)?)
        }
    };
    let tc = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        lambda_qos: a.lambda1,
        lambda_order: a.lambda2,
        qos_margin: a.qos_margin,
        seed,
        system: sys,
        dataset_label: a.data.display().to_string(),
    };
    tc.validate().map_err(usage)?;
    let out_path = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.ckpt", a.variant)));
    let history_path = out_path.with_extension("history.tsv");
    match train(model, train_slice, val_slice, &tc) {
        Ok(outcome) => {
            save_checkpoint(&outcome.checkpoint, &out_path, format).map_err(runtime)?;
            outcome.history.write_tsv(&history_path).map_err(runtime)?;
            println!(
                "wrote {} (best val loss {:.6} at epoch {}) and {}",
                out_path.display(),
                outcome.checkpoint.best_val_loss,
                outcome.checkpoint.epoch,
                history_path.display()
            );
            Ok(())
        }
        Err(TrainError::Diverged {
            epoch,
            last_good,
            history,
            ..
        }) => {
            // Keep partial artifacts for inspection.
            save_checkpoint(&last_good, &out_path, format).map_err(runtime)?;
            history.write_tsv(&history_path).map_err(runtime)?;
            Err(CliError::Runtime(format!(
                "training diverged at epoch {epoch}; last good checkpoint written to {}",
                out_path.display()
            )))
        }
        Err(e) => Err(runtime(e)),
    }
}

/// Evaluation slice of a dataset: the test split (everything for
/// test-only sets), optionally capped.
fn eval_slice<'a>(
    spec: &DatasetSpec,
    instances: &'a [NetworkInstance],
    limit: Option<usize>,
) -> &'a [NetworkInstance] {
    let (_, _, test) = split_slices(spec, instances);
    let cap = limit.unwrap_or(test.len()).min(test.len());
    &test[..cap]
}

fn cmd_baseline(a: BaselineArgs) -> Result<(), CliError> {
    let sys = a.system.build()?;
    let (spec, instances) = load_split_dataset(&a.data)?;
    let slice = eval_slice(&spec, &instances, a.limit);
    if slice.is_empty() {
        return Err(CliError::Usage("no samples to solve".into()));
    }
    let sca_cfg = ScaConfig::default();
    let grid_step = a.grid_step.unwrap_or(sys.p_max / 200.0);
    let solve: Box<dyn Fn(&NetworkInstance) -> SolveResult + Sync> = match a.solver.as_str() {
        "sca" => Box::new(move |inst: &NetworkInstance| sca_solve(inst, &sys, &sca_cfg)),
        "oracle" => Box::new(move |inst: &NetworkInstance| {
            brute_force_oracle(inst, &sys, grid_step).unwrap_or_else(|e| {
                eprintln!("oracle failed on sample {}: {e}", inst.sample_id());
                SolveResult {
                    alloc: nomanet_core::noma::PowerAllocation::zeros(inst),
                    ee: 0.0,
                    status: SolveStatus::Infeasible,
                    iterations: 0,
                    newton_steps: 0,
                    wall_time_s: 0.0,
                    ee_trace: Vec::new(),
                }
            })
        }),
        other => return Err(CliError::Usage(format!("unknown --solver {other}"))),
    };
    let (results, summary) = solve_dataset(|inst| solve(inst), slice);
    let stem = a
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".into());
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{stem}_{}_results.tsv", a.solver)));
    save_results(&out, &a.solver, &stem, slice, &results).map_err(runtime)?;
    println!(
        "{} on {} samples: feasible {:.1}%, mean EE (optimal) {:.4}, total {:.1}s -> {}",
        a.solver,
        summary.count,
        summary.feasibility_rate_percent,
        summary.mean_ee_optimal,
        summary.total_time_s,
        out.display()
    );
    Ok(())
}

fn baseline_mean_for(
    path: Option<&PathBuf>,
    slice: &[NetworkInstance],
    sys: &SystemConfig,
) -> Result<f64, CliError> {
    if let Some(p) = path {
        let (_, _, records) = load_results(p).map_err(runtime)?;
        let optimal: Vec<f64> = records
            .iter()
            .filter(|r| r.status == SolveStatus::Optimal)
            .map(|r| r.ee)
            .collect();
        if optimal.is_empty() {
            return Err(CliError::Usage(format!(
                "baseline file {} holds no optimal records",
                p.display()
            )));
        }
        Ok(optimal.iter().sum::<f64>() / optimal.len() as f64)
    } else {
        let cfg = ScaConfig::default();
        let (results, summary) = solve_dataset(|inst| sca_solve(inst, sys, &cfg), slice);
        let _ = results;
        if summary.optimal == 0 {
            return Err(CliError::Runtime(
                "convex baseline found no feasible sample".into(),
            ));
        }
        Ok(summary.mean_ee_optimal)
    }
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let sys = a.system.build()?;
    if !a.baseline.is_empty() && a.baseline.len() != a.data.len() {
        return Err(CliError::Usage(
            "--baseline needs one results file per --data entry".into(),
        ));
    }
    let timing = TimingConfig {
        warmup: a.warmup,
        reps: a.reps,
    };
    let mut reports = Vec::new();
    for (di, data_path) in a.data.iter().enumerate() {
        let (spec, instances) = load_split_dataset(data_path)?;
        let slice = eval_slice(&spec, &instances, Some(a.limit));
        if slice.is_empty() {
            return Err(CliError::Usage(format!(
                "dataset {} has no evaluation samples",
                data_path.display()
            )));
        }
        let base_mean = baseline_mean_for(a.baseline.get(di), slice, &sys)?;
        let dataset_id = data_path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("data{di}"));
        for ckpt_path in &a.ckpt {
            let ck = load_checkpoint(ckpt_path).map_err(runtime)?;
            let model_id = ckpt_path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "model".into());
            let report = evaluate_checkpoint(
                &ck,
                &model_id,
                &dataset_id,
                slice,
                &sys,
                base_mean,
                &timing,
            )
            .map_err(runtime)?;
            println!(
                "{dataset_id} / {model_id}: OP/SC {} FR {} ({})",
                report
                    .optimality_or_scalability
                    .map_or("x".into(), |v| format!("{v:.2}%")),
                report
                    .feasibility_rate
                    .map_or("x".into(), |v| format!("{v:.1}%")),
                report.scale_tag.as_str(),
            );
            reports.push(report);
        }
    }
    let tsv = a.out.with_extension("tsv");
    let table = a.out.with_extension("txt");
    write_reports_delimited(&reports, &tsv).map_err(runtime)?;
    write_table(&reports, &table).map_err(runtime)?;
    println!("wrote {} and {}", tsv.display(), table.display());
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<(), CliError> {
    let sys = a.system.build()?;
    let seed = resolve_seed(a.seed);
    let depths: Vec<usize> = a
        .depths
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --depths: {e}")))?;
    let variants: Vec<Variant> = a
        .variants
        .split(',')
        .map(|t| {
            Variant::parse(t.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown variant {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    let (spec, instances) = load_split_dataset(&a.data)?;
    let (train_slice, val_slice, test_slice) = split_slices(&spec, &instances);
    if train_slice.is_empty() || val_slice.is_empty() || test_slice.is_empty() {
        return Err(CliError::Usage(
            "ablation needs a dataset with train/val/test splits".into(),
        ));
    }
    let train_slice =
        &train_slice[..a.train_limit.unwrap_or(train_slice.len()).min(train_slice.len())];
    let val_slice = &val_slice[..a.val_limit.unwrap_or(val_slice.len()).min(val_slice.len())];
    let eval_set = &test_slice[..a.eval_limit.min(test_slice.len())];
    let base_mean = baseline_mean_for(a.baseline.as_ref(), eval_set, &sys)?;
    let tc = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        lambda_qos: a.lambda1,
        lambda_order: a.lambda2,
        qos_margin: a.qos_margin,
        seed,
        system: sys,
        dataset_label: a.data.display().to_string(),
    };
    tc.validate().map_err(usage)?;
    let cells = run_ablation(
        &variants, &depths, train_slice, val_slice, eval_set, base_mean, &tc, seed,
    )
    .map_err(runtime)?;
    std::fs::create_dir_all(&a.out).map_err(runtime)?;
    let table = ablation_table(&cells, &variants, &depths);
    print!("{table}");
    let path = a.out.join("ablation.txt");
    std::fs::write(&path, &table).map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let sys = a.system.build()?;
    let (spec, instances) = load_split_dataset(&a.data)?;
    let slice = eval_slice(&spec, &instances, Some(a.limit));
    if slice.is_empty() {
        return Err(CliError::Usage("no samples to benchmark".into()));
    }
    let timing = TimingConfig {
        warmup: a.warmup,
        reps: a.reps,
    };
    let mut lines = vec![format!("machine: {}", machine_descriptor())];
    let solver_slice = &slice[..a.solver_limit.min(slice.len())];
    let cfg = ScaConfig::default();
    let (solver_results, summary) =
        solve_dataset(|inst| sca_solve(inst, &sys, &cfg), solver_slice);
    let mean_n = solver_slice
        .iter()
        .map(|i| i.num_subchannels())
        .sum::<usize>() as f64
        / solver_slice.len() as f64;
    let sca_per_subch = summary.total_time_s / solver_results.len() as f64 / mean_n;
    lines.push(format!(
        "sca: {:.3} ms per subchannel ({} samples)",
        sca_per_subch * 1e3,
        solver_results.len()
    ));
    for ckpt_path in &a.ckpt {
        let ck = load_checkpoint(ckpt_path).map_err(runtime)?;
        let per_subch = inference_time(&ck.model, slice, sys.p_max, &timing).map_err(runtime)?;
        lines.push(format!(
            "{}: {:.3} ms per subchannel, speedup vs sca {:.0}x",
            ckpt_path.display(),
            per_subch * 1e3,
            sca_per_subch / per_subch
        ));
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::write(out, &text).map_err(runtime)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
