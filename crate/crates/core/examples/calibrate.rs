use std::time::Instant;
use nomanet_core::baselines::{sca_solve, ScaConfig};
use nomanet_core::data::{instance_rng, sample_instance};
use nomanet_core::model::{Allocator, GatModel, ModelConfig, Variant};
use nomanet_core::noma::SystemConfig;
use nomanet_core::training::{loss_and_grads, TrainConfig};

fn main() {
    let sys = SystemConfig::default();
    // Time a few SCA solves at (10,5).
    let t0 = Instant::now();
    let mut ee_sum = 0.0;
    let n_solve = 5;
    for id in 0..n_solve {
        let inst = sample_instance(&mut instance_rng(42, id), 10, 5, 20.0, id);
        let r = sca_solve(&inst, &sys, &ScaConfig::default());
        ee_sum += r.ee;
        println!(
            "sca sample {id}: status {:?} ee {:.4} outer {} newton {} time {:.2}s",
            r.status, r.ee, r.iterations, r.newton_steps, r.wall_time_s
        );
    }
    println!("sca mean ee {:.4}, avg time {:.2}s", ee_sum / n_solve as f64, t0.elapsed().as_secs_f64() / n_solve as f64);

    // Time forward+backward of the default model.
    let cfg = ModelConfig::default_gat(Variant::Residual);
    let model = Allocator::Gat(GatModel::init(cfg, &mut instance_rng(7, 0)).unwrap());
    let tc = TrainConfig::default();
    let inst = sample_instance(&mut instance_rng(42, 0), 10, 5, 20.0, 0);
    let t1 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let _ = loss_and_grads(&model, &inst, &tc).unwrap();
    }
    let per = t1.elapsed().as_secs_f64() / reps as f64;
    println!("fwd+bwd per instance: {:.1} ms -> est epoch(2000 samples, serial): {:.0}s", per * 1e3, per * 2000.0);

    // Forward only (inference).
    let t2 = Instant::now();
    for _ in 0..reps {
        let _ = model.allocate(&inst, sys.p_max).unwrap();
    }
    println!("forward per instance: {:.2} ms", t2.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
