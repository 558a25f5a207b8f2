//! Evaluation harness: optimality/scalability ratios against the convex
//! baseline, feasibility rates, inference timing, the depth ablation
//! grid, and report emission.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Allocator, GatModel, ModelConfig, ModelError, Variant};
use crate::noma::{
    check_feasibility, energy_efficiency, NetworkInstance, NomaError, SystemConfig,
    FEASIBILITY_TOL,
};
use crate::training::{train, Checkpoint, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty evaluation input: {0}")]
    Empty(String),
    #[error(transparent)]
    Noma(#[from] NomaError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("report parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Relation between evaluation size and training size (the dagger /
/// pilcrow / section taxonomy of the results table).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleTag {
    /// N and K both match the training size: plain optimality.
    Matched,
    /// Only N differs.
    DiffN,
    /// Only K differs.
    DiffK,
    /// Both differ.
    DiffBoth,
}

impl ScaleTag {
    pub fn of(n_tr: usize, k_tr: usize, n_te: usize, k_te: usize) -> Self {
        match (n_te != n_tr, k_te != k_tr) {
            (false, false) => ScaleTag::Matched,
            (true, false) => ScaleTag::DiffN,
            (false, true) => ScaleTag::DiffK,
            (true, true) => ScaleTag::DiffBoth,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleTag::Matched => "matched",
            ScaleTag::DiffN => "diff_n",
            ScaleTag::DiffK => "diff_k",
            ScaleTag::DiffBoth => "diff_nk",
        }
    }

    /// Table marker: dagger when N differs, pilcrow when K differs,
    /// section sign when both do.
    pub fn marker(&self) -> &'static str {
        match self {
            ScaleTag::Matched => "",
            ScaleTag::DiffN => "\u{2020}",
            ScaleTag::DiffK => "\u{00b6}",
            ScaleTag::DiffBoth => "\u{00a7}",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "matched" => Some(ScaleTag::Matched),
            "diff_n" => Some(ScaleTag::DiffN),
            "diff_k" => Some(ScaleTag::DiffK),
            "diff_nk" => Some(ScaleTag::DiffBoth),
            _ => None,
        }
    }
}

/// Per (dataset, model) metrics. `None` fields mean "not applicable"
/// (a fixed-width model on a mismatched size).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model_id: String,
    pub n_te: usize,
    pub k_te: usize,
    pub scale_tag: ScaleTag,
    /// Optimality (matched size) or scalability (mismatched), percent.
    pub optimality_or_scalability: Option<f64>,
    pub feasibility_rate: Option<f64>,
    /// Mean inference seconds per subchannel.
    pub time_per_subchannel_s: Option<f64>,
}

impl EvalReport {
    pub fn applicable(&self) -> bool {
        self.optimality_or_scalability.is_some()
    }
}

/// `100 * mean(model EE) / mean(baseline EE)`, paired over one dataset.
/// With testing size equal to the training size this is the optimality
/// metric; otherwise it is scalability.
pub fn optimality(model_ees: &[f64], baseline_ees: &[f64]) -> Result<f64, EvalError> {
    if model_ees.is_empty() || baseline_ees.is_empty() {
        return Err(EvalError::Empty("optimality needs non-empty EE lists".into()));
    }
    let model_mean = model_ees.iter().sum::<f64>() / model_ees.len() as f64;
    let base_mean = baseline_ees.iter().sum::<f64>() / baseline_ees.len() as f64;
    Ok(100.0 * model_mean / base_mean)
}

/// Same ratio at a mismatched problem size.
pub fn scalability(model_ees: &[f64], baseline_ees: &[f64]) -> Result<f64, EvalError> {
    optimality(model_ees, baseline_ees)
}

/// Percentage of allocations passing the full feasibility check.
pub fn feasibility_rate(
    allocs: &[crate::noma::PowerAllocation],
    instances: &[NetworkInstance],
    sys: &SystemConfig,
) -> Result<f64, EvalError> {
    if allocs.len() != instances.len() {
        return Err(EvalError::Noma(NomaError::ShapeMismatch(format!(
            "{} allocations for {} instances",
            allocs.len(),
            instances.len()
        ))));
    }
    if allocs.is_empty() {
        return Err(EvalError::Empty("feasibility rate needs samples".into()));
    }
    let mut ok = 0usize;
    for (a, inst) in allocs.iter().zip(instances) {
        if check_feasibility(a, inst, sys, FEASIBILITY_TOL)?.feasible {
            ok += 1;
        }
    }
    Ok(100.0 * ok as f64 / allocs.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct TimingConfig {
    /// Forward passes discarded before measuring.
    pub warmup: usize,
    /// Repetitions of the timed sweep; the median of the per-sweep means
    /// is reported.
    pub reps: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { warmup: 10, reps: 5 }
    }
}

/// Median-of-means wall time of one forward pass, divided by the number
/// of subchannels. Runs serially to avoid contention noise.
pub fn inference_time(
    model: &Allocator,
    instances: &[NetworkInstance],
    p_max: f64,
    timing: &TimingConfig,
) -> Result<f64, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::Empty("timing needs instances".into()));
    }
    for w in 0..timing.warmup {
        let inst = &instances[w % instances.len()];
        model.allocate(inst, p_max)?;
    }
    let mut means = Vec::with_capacity(timing.reps.max(1));
    for _ in 0..timing.reps.max(1) {
        let start = Instant::now();
        for inst in instances {
            model.allocate(inst, p_max)?;
        }
        means.push(start.elapsed().as_secs_f64() / instances.len() as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    let median = means[means.len() / 2];
    let mean_n = instances.iter().map(|i| i.num_subchannels()).sum::<usize>() as f64
        / instances.len() as f64;
    Ok(median / mean_n)
}

/// Host descriptor attached to timing numbers.
pub fn machine_descriptor() -> String {
    format!(
        "{}-{}-{}threads",
        std::env::consts::OS,
        std::env::consts::ARCH,
        std::thread::available_parallelism().map_or(1, |n| n.get())
    )
}

/// Runs one model over one dataset and assembles its report row.
/// `baseline_mean_ee` is the mean EE of the convex baseline on the same
/// dataset. A fixed-width model on a mismatched size reports
/// not-applicable metrics.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model(
    model: &Allocator,
    model_id: &str,
    trained_nk: (usize, usize),
    dataset_id: &str,
    instances: &[NetworkInstance],
    sys: &SystemConfig,
    baseline_mean_ee: f64,
    timing: &TimingConfig,
) -> Result<EvalReport, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::Empty(format!("dataset {dataset_id} is empty")));
    }
    let n_te = instances[0].num_subchannels();
    let k_te = instances[0].users_on(0);
    let scale_tag = ScaleTag::of(trained_nk.0, trained_nk.1, n_te, k_te);
    let mut report = EvalReport {
        dataset_id: dataset_id.to_string(),
        model_id: model_id.to_string(),
        n_te,
        k_te,
        scale_tag,
        optimality_or_scalability: None,
        feasibility_rate: None,
        time_per_subchannel_s: None,
    };
    // Probe one instance: a fixed-width model reports not-applicable.
    match model.allocate(&instances[0], sys.p_max) {
        Err(ModelError::InputWidth { .. }) => return Ok(report),
        Err(e) => return Err(e.into()),
        Ok(_) => {}
    }
    let allocs: Vec<crate::noma::PowerAllocation> = instances
        .par_iter()
        .map(|inst| model.allocate(inst, sys.p_max))
        .collect::<Result<_, _>>()?;
    // Achieved EE of every output, feasible or not; feasibility is its own
    // column.
    let ees: Vec<f64> = allocs
        .iter()
        .zip(instances)
        .map(|(a, i)| energy_efficiency(a, i, sys))
        .collect::<Result<_, _>>()?;
    let model_mean = ees.iter().sum::<f64>() / ees.len() as f64;
    report.optimality_or_scalability = Some(100.0 * model_mean / baseline_mean_ee);
    report.feasibility_rate = Some(feasibility_rate(&allocs, instances, sys)?);
    report.time_per_subchannel_s = Some(inference_time(model, instances, sys.p_max, timing)?);
    Ok(report)
}

/// One cell of the depth-ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub variant: Variant,
    pub depth: usize,
    pub optimality_percent: f64,
    pub best_val_loss: f64,
}

/// Trains one allocator per (variant, depth) with the given widths and
/// training recipe, evaluates each on `eval_set` against the baseline
/// mean EE, and returns the grid in row-major (variant-major) order.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    variants: &[Variant],
    depths: &[usize],
    train_set: &[NetworkInstance],
    val_set: &[NetworkInstance],
    eval_set: &[NetworkInstance],
    baseline_mean_ee: f64,
    train_cfg: &TrainConfig,
    init_seed: u64,
) -> Result<Vec<AblationCell>, EvalError> {
    let cells: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|&v| depths.iter().map(move |&d| (v, d)))
        .collect();
    cells
        .into_par_iter()
        .map(|(variant, depth)| {
            let cfg = ModelConfig::with_depth(variant, depth);
            let mut rng = crate::data::instance_rng(init_seed, depth as u64);
            let model = Allocator::Gat(GatModel::init(cfg, &mut rng)?);
            let outcome = train(model, train_set, val_set, train_cfg)?;
            let ees: Vec<f64> = eval_set
                .iter()
                .map(|inst| {
                    let alloc = outcome
                        .checkpoint
                        .model
                        .allocate(inst, train_cfg.system.p_max)?;
                    Ok::<f64, EvalError>(energy_efficiency(&alloc, inst, &train_cfg.system)?)
                })
                .collect::<Result<_, _>>()?;
            let mean = ees.iter().sum::<f64>() / ees.len().max(1) as f64;
            Ok(AblationCell {
                variant,
                depth,
                optimality_percent: 100.0 * mean / baseline_mean_ee,
                best_val_loss: outcome.checkpoint.best_val_loss,
            })
        })
        .collect()
}

/// Renders the ablation grid: one row per variant, one column per depth.
pub fn ablation_table(cells: &[AblationCell], variants: &[Variant], depths: &[usize]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<10}", "model"));
    for d in depths {
        out.push_str(&format!("{:>10}", format!("depth {d}")));
    }
    out.push('\n');
    for &v in variants {
        out.push_str(&format!("{:<10}", format!("gat-{}", v.as_str())));
        for &d in depths {
            let cell = cells
                .iter()
                .find(|c| c.variant == v && c.depth == d)
                .map_or("NA".to_string(), |c| format!("{:.2}%", c.optimality_percent));
            out.push_str(&format!("{cell:>10}"));
        }
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    match v {
        Some(x) => format!("{x:.6}{unit}"),
        None => "NA".to_string(),
    }
}

/// Writes reports as tab-separated records, one header line, fields named
/// exactly as [`EvalReport`].
pub fn write_reports_delimited(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "dataset_id\tmodel_id\tn_te\tk_te\tscale_tag\toptimality_or_scalability\tfeasibility_rate\ttime_per_subchannel_s"
    )?;
    for r in reports {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.dataset_id,
            r.model_id,
            r.n_te,
            r.k_te,
            r.scale_tag.as_str(),
            fmt_opt(r.optimality_or_scalability, ""),
            fmt_opt(r.feasibility_rate, ""),
            match r.time_per_subchannel_s {
                Some(t) => format!("{t:.9e}"),
                None => "NA".to_string(),
            },
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_reports_delimited(path: &Path) -> Result<Vec<EvalReport>, EvalError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(EvalError::Parse {
                line: line_no,
                msg: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_opt = |s: &str| -> Result<Option<f64>, EvalError> {
            if s == "NA" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| EvalError::Parse {
                    line: line_no,
                    msg: format!("bad number {s:?}: {e}"),
                })
            }
        };
        out.push(EvalReport {
            dataset_id: fields[0].to_string(),
            model_id: fields[1].to_string(),
            n_te: fields[2].parse().map_err(|e| EvalError::Parse {
                line: line_no,
                msg: format!("bad n_te: {e}"),
            })?,
            k_te: fields[3].parse().map_err(|e| EvalError::Parse {
                line: line_no,
                msg: format!("bad k_te: {e}"),
            })?,
            scale_tag: ScaleTag::parse(fields[4]).ok_or_else(|| EvalError::Parse {
                line: line_no,
                msg: format!("bad scale tag {:?}", fields[4]),
            })?,
            optimality_or_scalability: parse_opt(fields[5])?,
            feasibility_rate: parse_opt(fields[6])?,
            time_per_subchannel_s: parse_opt(fields[7])?,
        });
    }
    Ok(out)
}

/// Plain-text table grouped by (N_Te, K_Te), one row per model.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        (a.n_te, a.k_te, a.model_id.as_str()).cmp(&(b.n_te, b.k_te, b.model_id.as_str()))
    });
    let mut out = String::new();
    out.push_str(&format!(
        "{:<5}{:<5}{:<12}{:>12}{:>8}{:>14}  {}\n",
        "N_Te", "K_Te", "model", "OP/SC", "FR", "time/subch", "tag"
    ));
    let mut last_group = None;
    for r in sorted {
        let group = (r.n_te, r.k_te);
        if last_group.is_some() && last_group != Some(group) {
            out.push('\n');
        }
        last_group = Some(group);
        let op = r
            .optimality_or_scalability
            .map_or("x".to_string(), |v| format!("{v:.2}%"));
        let fr = r
            .feasibility_rate
            .map_or("x".to_string(), |v| format!("{v:.1}%"));
        let time = r
            .time_per_subchannel_s
            .map_or("x".to_string(), |v| format!("{:.3} ms", v * 1e3));
        out.push_str(&format!(
            "{:<5}{:<5}{:<12}{:>12}{:>8}{:>14}  {}\n",
            r.n_te,
            r.k_te,
            r.model_id,
            op,
            fr,
            time,
            r.scale_tag.marker()
        ));
    }
    out
}

pub fn write_table(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{}", format_table(reports))?;
    writeln!(w, "\nmachine: {}", machine_descriptor())?;
    w.flush()?;
    Ok(())
}

/// Convenience wrapper: evaluate a persisted checkpoint.
pub fn evaluate_checkpoint(
    ck: &Checkpoint,
    model_id: &str,
    dataset_id: &str,
    instances: &[NetworkInstance],
    sys: &SystemConfig,
    baseline_mean_ee: f64,
    timing: &TimingConfig,
) -> Result<EvalReport, EvalError> {
    evaluate_model(
        &ck.model,
        model_id,
        (ck.trained_n, ck.trained_k),
        dataset_id,
        instances,
        sys,
        baseline_mean_ee,
        timing,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{instance_rng, sample_instance};
    use crate::model::{GatModel, MlpConfig, MlpModel, ModelConfig};
    use crate::noma::PowerAllocation;

    fn tiny_gat(seed: u64) -> Allocator {
        let cfg = ModelConfig {
            depth: 1,
            feature_dims: vec![1, 4],
            head_counts: vec![2],
            variant: Variant::Residual,
            leaky_slope: 0.2,
            mlp_hidden_dims: vec![4],
            log_input: false,
        };
        Allocator::Gat(GatModel::init(cfg, &mut instance_rng(seed, 0)).unwrap())
    }

    fn dataset(n: usize, k: usize, count: usize, seed: u64) -> Vec<NetworkInstance> {
        (0..count as u64)
            .map(|id| sample_instance(&mut instance_rng(seed, id), n, k, 20.0, id))
            .collect()
    }

    #[test]
    fn optimality_identity_is_exactly_100() {
        let ees = vec![0.31, 0.48, 0.77];
        assert_eq!(optimality(&ees, &ees).unwrap(), 100.0);
    }

    #[test]
    fn optimality_zero_model() {
        let base = vec![0.4, 0.6];
        assert_eq!(optimality(&[0.0, 0.0], &base).unwrap(), 0.0);
    }

    #[test]
    fn optimality_rejects_empty() {
        assert!(matches!(optimality(&[], &[1.0]), Err(EvalError::Empty(_))));
    }

    #[test]
    fn feasibility_rate_counts_violations() {
        let instances = dataset(1, 2, 2, 70);
        let sys = SystemConfig::default();
        // First allocation violates ordering; second is zero-power
        // (violates QoS); rate = 0%.
        let allocs = vec![
            PowerAllocation {
                powers: vec![vec![2.0, 1.0]],
            },
            PowerAllocation {
                powers: vec![vec![0.0, 0.0]],
            },
        ];
        assert_eq!(feasibility_rate(&allocs, &instances, &sys).unwrap(), 0.0);
    }

    #[test]
    fn scale_tags() {
        assert_eq!(ScaleTag::of(10, 5, 10, 5), ScaleTag::Matched);
        assert_eq!(ScaleTag::of(10, 5, 8, 5), ScaleTag::DiffN);
        assert_eq!(ScaleTag::of(10, 5, 10, 4), ScaleTag::DiffK);
        assert_eq!(ScaleTag::of(10, 5, 8, 4), ScaleTag::DiffBoth);
    }

    #[test]
    fn budget_clause_never_fails_for_activated_models() {
        let instances = dataset(2, 3, 10, 71);
        let sys = SystemConfig::default();
        let model = tiny_gat(1);
        for inst in &instances {
            let alloc = model.allocate(inst, sys.p_max).unwrap();
            let rep = check_feasibility(&alloc, inst, &sys, FEASIBILITY_TOL).unwrap();
            assert!(rep.budget_ok);
        }
    }

    #[test]
    fn evaluate_model_produces_report() {
        let instances = dataset(2, 3, 6, 72);
        let sys = SystemConfig::default();
        let model = tiny_gat(2);
        let timing = TimingConfig { warmup: 2, reps: 3 };
        let rep = evaluate_model(
            &model,
            "gat-res",
            (2, 3),
            "unit",
            &instances,
            &sys,
            0.5,
            &timing,
        )
        .unwrap();
        assert_eq!(rep.scale_tag, ScaleTag::Matched);
        assert!(rep.applicable());
        assert!(rep.time_per_subchannel_s.unwrap() > 0.0);
        let fr = rep.feasibility_rate.unwrap();
        assert!((0.0..=100.0).contains(&fr));
    }

    #[test]
    fn mlp_reports_not_applicable_on_mismatched_k() {
        let instances = dataset(2, 4, 3, 73);
        let sys = SystemConfig::default();
        let mlp = Allocator::Mlp(
            MlpModel::init(MlpConfig::with_input_width(5), &mut instance_rng(3, 0)).unwrap(),
        );
        let rep = evaluate_model(
            &mlp,
            "mlp",
            (2, 5),
            "unit",
            &instances,
            &sys,
            0.5,
            &TimingConfig { warmup: 0, reps: 1 },
        )
        .unwrap();
        assert!(!rep.applicable());
        assert_eq!(rep.scale_tag, ScaleTag::DiffK);
    }

    #[test]
    fn evaluation_does_not_mutate_params() {
        let instances = dataset(3, 2, 4, 74);
        let sys = SystemConfig::default();
        let model = tiny_gat(4);
        let before = model.params().fingerprint();
        let _ = evaluate_model(
            &model,
            "gat-res",
            (10, 5),
            "unit",
            &instances,
            &sys,
            0.5,
            &TimingConfig { warmup: 1, reps: 1 },
        )
        .unwrap();
        assert_eq!(model.params().fingerprint(), before);
    }

    #[test]
    fn timing_is_stable_between_runs() {
        let instances = dataset(2, 2, 8, 75);
        let model = tiny_gat(5);
        let timing = TimingConfig { warmup: 5, reps: 7 };
        let a = inference_time(&model, &instances, 10.0, &timing).unwrap();
        let b = inference_time(&model, &instances, 10.0, &timing).unwrap();
        let ratio = a / b;
        assert!((0.5..=2.0).contains(&ratio), "timing ratio {ratio}");
    }

    #[test]
    fn reports_round_trip_and_table_layout() {
        let reports = vec![
            EvalReport {
                dataset_id: "ds3".into(),
                model_id: "gat-res".into(),
                n_te: 10,
                k_te: 5,
                scale_tag: ScaleTag::Matched,
                optimality_or_scalability: Some(97.36),
                feasibility_rate: Some(90.8),
                time_per_subchannel_s: Some(3.94e-3),
            },
            EvalReport {
                dataset_id: "ds5".into(),
                model_id: "mlp".into(),
                n_te: 8,
                k_te: 4,
                scale_tag: ScaleTag::DiffBoth,
                optimality_or_scalability: None,
                feasibility_rate: None,
                time_per_subchannel_s: None,
            },
        ];
        let dir = std::env::temp_dir().join(format!("nomanet-ev-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.tsv");
        write_reports_delimited(&reports, &path).unwrap();
        let loaded = load_reports_delimited(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].dataset_id, "ds3");
        assert_eq!(loaded[0].optimality_or_scalability, Some(97.36));
        assert_eq!(loaded[1].optimality_or_scalability, None);

        let table = format_table(&reports);
        // One line per (N_Te, K_Te, model), grouped with the 8-sized row first.
        assert!(table.contains("mlp"));
        assert!(table.contains("gat-res"));
        assert!(table.find("mlp").unwrap() < table.find("gat-res").unwrap());
    }

    #[test]
    fn empty_reports_give_header_only_file() {
        let dir = std::env::temp_dir().join(format!("nomanet-ev0-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.tsv");
        write_reports_delimited(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(load_reports_delimited(&path).unwrap().is_empty());
    }

    #[test]
    fn ablation_grid_runs_tiny() {
        let train_set = dataset(1, 2, 24, 76);
        let val_set = dataset(1, 2, 8, 77);
        let eval_set = dataset(1, 2, 8, 78);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let cells = run_ablation(
            &[Variant::Plain],
            &[1, 2],
            &train_set,
            &val_set,
            &eval_set,
            0.5,
            &cfg,
            9,
        )
        .unwrap();
        assert_eq!(cells.len(), 2);
        let table = ablation_table(&cells, &[Variant::Plain], &[1, 2]);
        assert!(table.contains("gat-plain"));
        assert!(table.contains("depth 1"));
    }
}
