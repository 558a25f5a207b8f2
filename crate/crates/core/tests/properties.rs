//! Property tests for the math invariants: SINR monotonicity, the
//! energy-efficiency reconstruction identity, dataset round trips, the
//! budget guarantee of the activation, and softmax normalization.

use proptest::collection::vec;
use proptest::prelude::*;

use nomanet_core::autodiff::Tape;
use nomanet_core::data::{load_dataset, save_dataset, DatasetKind, DatasetSpec};
use nomanet_core::model::{power_activation, Subgraph};
use nomanet_core::noma::{
    check_feasibility, energy_efficiency, rates, sic_sort, sinr, NetworkInstance,
    PowerAllocation, SystemConfig,
};

fn gains_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.01f64..500.0, k..=k).prop_map(|g| sic_sort(&g).unwrap().0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sinr_monotone_in_own_and_interferer_power(
        gains in gains_strategy(4),
        powers in vec(0.0f64..5.0, 4),
        bump in 0.01f64..2.0,
    ) {
        // Raising a user's own power raises its SINR.
        let i = 2;
        let base = sinr(&powers, &gains, i).unwrap();
        let mut more = powers.clone();
        more[i] += bump;
        prop_assert!(sinr(&more, &gains, i).unwrap() >= base);

        // Raising an earlier-decoded (interfering) user's power lowers it.
        let mut interferer = powers.clone();
        interferer[0] += bump;
        prop_assert!(sinr(&interferer, &gains, i).unwrap() <= base);
    }

    #[test]
    fn ee_reconstruction_identity(
        gains in gains_strategy(3),
        powers_raw in vec(0.0f64..3.0, 3),
        p_circuit in 0.1f64..5.0,
    ) {
        let mut powers = powers_raw;
        powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let inst = NetworkInstance::new(0, 20.0, vec![gains.clone()]).unwrap();
        let cfg = SystemConfig::new(10.0, p_circuit, 0.1).unwrap();
        let alloc = PowerAllocation::new(vec![powers.clone()], &inst).unwrap();
        let ee = energy_efficiency(&alloc, &inst, &cfg).unwrap();
        let rate_sum: f64 = rates(&powers, &gains).unwrap().iter().sum();
        let lhs = ee * (alloc.total_power() + p_circuit);
        prop_assert!((lhs - rate_sum).abs() <= 1e-12 * rate_sum.max(1.0));
    }

    #[test]
    fn dataset_round_trip_is_bit_exact(
        seed in 0u64..1_000_000,
        n in 1usize..4,
        k in 1usize..5,
        size in 1usize..6,
    ) {
        let spec = DatasetSpec {
            n_subchannels: n,
            k_per_subchannel: k,
            size,
            kind: DatasetKind::TestOnly,
            seed,
            snr_db: 20.0,
        };
        let instances = nomanet_core::data::generate_instances(&spec).unwrap();
        let dir = std::env::temp_dir().join(format!(
            "nomanet-prop-{}-{seed}-{n}-{k}-{size}",
            std::process::id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.txt");
        save_dataset(&path, &spec, &instances).unwrap();
        let (spec2, loaded) = load_dataset(&path).unwrap();
        prop_assert_eq!(spec, spec2);
        prop_assert_eq!(instances, loaded);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn activation_total_never_exceeds_budget(
        raws in vec(vec(-20.0f64..40.0, 1..6), 1..5),
        p_max in 0.5f64..20.0,
    ) {
        let tape = Tape::new();
        let raw_tensors: Vec<Vec<_>> = raws
            .iter()
            .map(|sub| sub.iter().map(|&v| tape.leaf(&[], vec![v], false)).collect())
            .collect();
        let powers = power_activation(&raw_tensors, p_max);
        let total: f64 = powers.iter().flatten().map(|t| t.scalar()).sum();
        prop_assert!(total <= p_max, "total {total} > budget {p_max}");
        for (p, r) in powers.iter().flatten().zip(raws.iter().flatten()) {
            prop_assert!(p.scalar() >= 0.0);
            if *r <= 0.0 {
                prop_assert_eq!(p.scalar(), 0.0);
            }
        }
    }

    #[test]
    fn softmax_subset_normalizes_and_ignores_shift(
        logits in vec(-30.0f64..30.0, 4..8),
        shift in -50.0f64..50.0,
    ) {
        let subset: Vec<usize> = (0..logits.len()).step_by(2).collect();
        let tape = Tape::new();
        let y = tape.vector(logits.clone()).softmax_subset(&subset).data();
        let total: f64 = y.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let y2 = tape.vector(shifted).softmax_subset(&subset).data();
        for (a, b) in y.iter().zip(&y2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn subgraph_neighborhood_matches_decoding_order(
        gains in gains_strategy(5),
    ) {
        let sg = Subgraph::from_gains(&gains);
        for i in 0..gains.len() {
            let expect: Vec<usize> = (0..=i).collect();
            prop_assert_eq!(sg.neighbors(i), expect);
        }
    }

    #[test]
    fn budget_boundary_feasibility_tolerance(
        gains in gains_strategy(2),
        frac in 0.0f64..1.0,
    ) {
        // Splitting exactly the budget across ordered powers keeps the
        // budget clause satisfied at zero tolerance.
        let cfg = SystemConfig::default();
        let lo = 0.5 * cfg.p_max * frac.min(1.0 - frac);
        let hi = cfg.p_max - lo;
        let inst = NetworkInstance::new(0, 20.0, vec![gains]).unwrap();
        let alloc = PowerAllocation::new(vec![vec![lo, hi]], &inst).unwrap();
        let rep = check_feasibility(&alloc, &inst, &cfg, 0.0).unwrap();
        prop_assert!(rep.budget_ok);
        prop_assert!(rep.ordering_ok[0]);
    }
}
