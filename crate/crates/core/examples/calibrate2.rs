use std::time::Instant;
use nomanet_core::baselines::{sca_solve, solve_dataset, ScaConfig};
use nomanet_core::data::*;
use nomanet_core::eval::*;
use nomanet_core::model::*;
use nomanet_core::noma::SystemConfig;
use nomanet_core::training::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let variant = Variant::parse(args.get(1).map(|s| s.as_str()).unwrap_or("res")).unwrap_or(Variant::Residual);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(25);
    let log_input: bool = args.get(3).map(|s| s == "log").unwrap_or(false);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(16);
    let lambda: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let margin: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let mlp_mode: bool = args.get(1).map(|s| s == "mlp").unwrap_or(false);

    let sys = SystemConfig::default();
    let spec = DatasetSpec {
        n_subchannels: 10, k_per_subchannel: 5, size: 2400,
        kind: DatasetKind::TrainValTest { split: [2000, 200, 200] },
        seed: 11, snr_db: 20.0,
    };
    let instances = generate_instances(&spec).unwrap();
    let (train_set, val_set, test_set) = split_slices(&spec, &instances);

    let t0 = Instant::now();
    let eval_slice = &test_set[..100];
    let (sca_results, summary) = solve_dataset(|i| sca_solve(i, &sys, &ScaConfig::default()), eval_slice);
    println!("sca on 100 test: mean_ee {:.4} feasible {:.1}% time {:.1}s (wall {:.1}s)",
        summary.mean_ee_optimal, summary.feasibility_rate_percent, summary.total_time_s, t0.elapsed().as_secs_f64());

    let model = if mlp_mode {
        let mcfg = MlpConfig { log_input, ..MlpConfig::with_input_width(5) };
        Allocator::Mlp(MlpModel::init(mcfg, &mut instance_rng(7, 0)).unwrap())
    } else {
        let mut cfg = ModelConfig::default_gat(variant);
        cfg.log_input = log_input;
        Allocator::Gat(GatModel::init(cfg, &mut instance_rng(7, 0)).unwrap())
    };
    let tc = TrainConfig { epochs, learning_rate: lr, batch_size: batch, lambda_qos: lambda, lambda_order: lambda, qos_margin: margin, dataset_label: "calib".into(), ..TrainConfig::default() };
    let t1 = Instant::now();
    let out = train(model, train_set, val_set, &tc).unwrap();
    println!("train {}ep: {:.0}s, init_val {:.3} best_val {:.3} @ep{}",
        epochs, t1.elapsed().as_secs_f64(), out.history.initial_val_loss,
        out.checkpoint.best_val_loss, out.checkpoint.epoch);
    for (i, e) in out.history.epochs.iter().enumerate() {
        if i % 5 == 0 || i + 1 == out.history.epochs.len() {
            println!("  ep{:>2} train {:.3} val {:.3}", i + 1, e.train_loss, e.val_loss);
        }
    }
    let model_name = if mlp_mode { "mlp".to_string() } else { format!("gat-{}", variant.as_str()) };
    let rep = evaluate_checkpoint(&out.checkpoint, &model_name, "calib",
        eval_slice, &sys, summary.mean_ee_optimal, &TimingConfig { warmup: 5, reps: 3 }).unwrap();
    println!("OPT {:.2}% FR {:.1}% time/subch {:.3}ms",
        rep.optimality_or_scalability.unwrap(), rep.feasibility_rate.unwrap(),
        rep.time_per_subchannel_s.unwrap() * 1e3);
    let mut tot = 0.0;
    for inst in eval_slice {
        tot += out.checkpoint.model.allocate(inst, sys.p_max).unwrap().total_power();
    }
    println!("mean model total power: {:.3} W (sca opt total ~0.3-0.6 W)", tot / eval_slice.len() as f64);
    let _ = sca_results;
}
