//! Shared fixtures for the criterion benches.

use nomanet_core::data::{instance_rng, sample_instance};
use nomanet_core::model::{Allocator, GatModel, ModelConfig, Variant};
use nomanet_core::noma::NetworkInstance;

/// One (N, K) channel realization with a fixed seed.
pub fn fixture_instance(n: usize, k: usize) -> NetworkInstance {
    sample_instance(&mut instance_rng(1234, 0), n, k, 20.0, 0)
}

/// Default-architecture allocator with a fixed seed.
pub fn fixture_model(variant: Variant) -> Allocator {
    let cfg = ModelConfig::default_gat(variant);
    Allocator::Gat(GatModel::init(cfg, &mut instance_rng(99, 0)).expect("valid config"))
}
