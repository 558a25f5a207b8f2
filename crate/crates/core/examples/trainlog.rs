// Scratch instrumentation for training dynamics; not part of the build.
use nomanet_core::baselines::{sca_solve, solve_dataset, ScaConfig};
use nomanet_core::data::*;
use nomanet_core::model::*;
use nomanet_core::noma::{check_feasibility, energy_efficiency, SystemConfig, FEASIBILITY_TOL};
use nomanet_core::training::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_val(model: &Allocator, set: &[nomanet_core::noma::NetworkInstance], cfg: &TrainConfig) -> f64 {
    set.iter().map(|i| instance_loss(model, i, cfg).unwrap()).sum::<f64>() / set.len() as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let variant = Variant::parse(args.get(1).map(|s| s.as_str()).unwrap_or("res")).unwrap();
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(25);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(16);
    let escape: &str = args.get(5).map(|s| s.as_str()).unwrap_or("epoch"); // none|epoch|batch
    let lambda: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let init_shrink_to: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(10.0);

    let sys = SystemConfig::default();
    let spec = DatasetSpec {
        n_subchannels: 10, k_per_subchannel: 5, size: 2400,
        kind: DatasetKind::TrainValTest { split: [2000, 200, 200] },
        seed: 11, snr_db: 20.0,
    };
    let instances = generate_instances(&spec).unwrap();
    let (train_set, val_set, test_set) = split_slices(&spec, &instances);
    let eval_slice = &test_set[..100];
    let (_, summary) = solve_dataset(|i| sca_solve(i, &sys, &ScaConfig::default()), eval_slice);
    eprintln!("sca mean ee {:.4}", summary.mean_ee_optimal);

    let mut cfg_m = ModelConfig::default_gat(variant);
    cfg_m.log_input = true;
    let mut model = Allocator::Gat(GatModel::init(cfg_m, &mut instance_rng(7, 0)).unwrap());
    let tc = TrainConfig { epochs, learning_rate: lr, batch_size: batch, lambda_qos: lambda, lambda_order: lambda, dataset_label: "x".into(), ..TrainConfig::default() };

    let probe = &train_set[..32];
    let stats = |model: &Allocator| -> (f64, f64, f64) {
        let mut pinned = 0usize; let mut total = 0.0; let mut feas = 0usize;
        for inst in probe {
            let alloc = model.allocate(inst, sys.p_max).unwrap();
            let t = alloc.total_power();
            total += t;
            if t >= sys.p_max * (1.0 - 1e-9) { pinned += 1; }
            feas += check_feasibility(&alloc, inst, &sys, FEASIBILITY_TOL).unwrap().feasible as usize;
        }
        (pinned as f64 / probe.len() as f64, total / probe.len() as f64, feas as f64 / probe.len() as f64)
    };

    // init shrink until mean probe total <= init_shrink_to
    let mut shrinks = 0;
    loop {
        let (pinned, mean_t, _) = stats(&model);
        if pinned == 0.0 && mean_t <= init_shrink_to { break; }
        model.scale_output_head(0.5);
        shrinks += 1;
        if shrinks > 60 { break; }
    }
    eprintln!("init shrinks: {shrinks}, stats {:?}", stats(&model));

    let mut adam = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut idx: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (f64::INFINITY, model.clone(), 0usize);
    for ep in 1..=epochs {
        idx.shuffle(&mut rng);
        let mut scale_events = 0;
        let mut tl = 0.0; let mut nb = 0;
        for chunk in idx.chunks(batch) {
            let results: Vec<(f64, Vec<Vec<f64>>)> = chunk.iter()
                .map(|&i| loss_and_grads(&model, &train_set[i], &tc).unwrap()).collect();
            let inv = 1.0 / results.len() as f64;
            let mut g: Vec<Vec<f64>> = model.params().params.iter().map(|p| vec![0.0; p.data.len()]).collect();
            for (l, gr) in &results {
                tl += l * inv;
                for (a, b) in g.iter_mut().zip(gr) { for (x, y) in a.iter_mut().zip(b) { *x += y * inv; } }
            }
            nb += 1;
            optimizer_step(model.params_mut(), &g, &mut adam, lr).unwrap();
            if escape == "batch" {
                let (pinned, _, _) = stats(&model);
                if pinned > 0.0 { model.scale_output_head(0.9 - 0.4 * pinned); scale_events += 1; }
            }
        }
        if escape == "epoch" {
            let (pinned, _, _) = stats(&model);
            if pinned > 0.0 { model.scale_output_head(0.9 - 0.4 * pinned); scale_events += 1; }
        }
        let vl = mean_val(&model, val_set, &tc);
        let (pinned, mean_t, feas) = stats(&model);
        if vl < best.0 { best = (vl, model.clone(), ep); }
        eprintln!("ep{ep:>2} train {:.3} val {vl:.3} pinned {:.0}% meanP {mean_t:.2} feasP {:.0}% scales {scale_events}", tl / nb as f64, pinned * 100.0, feas * 100.0);
    }
    eprintln!("best val {:.4} @ep{}", best.0, best.2);
    let model = best.1;
    let mut ee_sum = 0.0; let mut feas = 0usize; let mut totp = 0.0;
    for inst in eval_slice {
        let alloc = model.allocate(inst, sys.p_max).unwrap();
        ee_sum += energy_efficiency(&alloc, inst, &sys).unwrap();
        feas += check_feasibility(&alloc, inst, &sys, FEASIBILITY_TOL).unwrap().feasible as usize;
        totp += alloc.total_power();
    }
    let opt = 100.0 * (ee_sum / 100.0) / summary.mean_ee_optimal;
    eprintln!("OPT {:.2}% FR {:.0}% mean total {:.2}W", opt, feas as f64, totp / 100.0);
}
