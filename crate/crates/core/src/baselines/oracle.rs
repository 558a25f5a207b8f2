//! Exhaustive grid search over tiny instances, used as an independent
//! check on the convex solver.

use std::time::Instant;

use crate::noma::{
    check_feasibility, energy_efficiency, NetworkInstance, NomaError, PowerAllocation,
    SystemConfig, FEASIBILITY_TOL,
};

use super::{SolveResult, SolveStatus};

/// Largest total variable count the oracle accepts.
pub const ORACLE_MAX_VARS: usize = 4;

/// Enumerates every power tuple on the grid `{0, step, 2 step, .., p_max}`
/// that satisfies ordering, budget and QoS, and returns the one with the
/// highest energy efficiency. Deterministic; ties keep the first maximum
/// in enumeration order.
pub fn brute_force_oracle(
    instance: &NetworkInstance,
    sys: &SystemConfig,
    grid_step: f64,
) -> Result<SolveResult, NomaError> {
    let total_vars = instance.total_users();
    if total_vars > ORACLE_MAX_VARS {
        return Err(NomaError::InvalidInput(format!(
            "oracle accepts at most {ORACLE_MAX_VARS} variables, instance has {total_vars}"
        )));
    }
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(NomaError::InvalidInput("grid step must be > 0".into()));
    }
    let start = Instant::now();
    let max_idx = (sys.p_max / grid_step * (1.0 + 1e-12)).floor() as usize;
    let shape: Vec<usize> = (0..instance.num_subchannels())
        .map(|n| instance.users_on(n))
        .collect();

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut evaluated = 0usize;
    // Index tuple per user, subchannel-major; within a subchannel indices
    // are non-decreasing (the ordering constraint on the grid).
    let mut idx: Vec<Vec<usize>> = shape.iter().map(|&k| vec![0; k]).collect();

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        instance: &NetworkInstance,
        sys: &SystemConfig,
        grid_step: f64,
        max_idx: usize,
        n: usize,
        i: usize,
        used: usize,
        idx: &mut Vec<Vec<usize>>,
        best: &mut Option<(f64, Vec<Vec<f64>>)>,
        evaluated: &mut usize,
    ) {
        if n == instance.num_subchannels() {
            *evaluated += 1;
            let powers: Vec<Vec<f64>> = idx
                .iter()
                .map(|row| row.iter().map(|&j| j as f64 * grid_step).collect())
                .collect();
            let alloc = PowerAllocation { powers };
            let rep = check_feasibility(&alloc, instance, sys, FEASIBILITY_TOL)
                .expect("congruent shapes");
            if !rep.feasible {
                return;
            }
            let ee = energy_efficiency(&alloc, instance, sys).expect("congruent shapes");
            if best.as_ref().is_none_or(|(b, _)| ee > *b) {
                *best = Some((ee, alloc.powers));
            }
            return;
        }
        let (next_n, next_i) = if i + 1 == instance.users_on(n) {
            (n + 1, 0)
        } else {
            (n, i + 1)
        };
        // Ordering: start from the previous user's index on this subchannel.
        let lo = if i == 0 { 0 } else { idx[n][i - 1] };
        for j in lo..=max_idx {
            if used + j > max_idx {
                break; // budget cutoff: sum of indices bounds sum of powers
            }
            idx[n][i] = j;
            recurse(
                instance, sys, grid_step, max_idx, next_n, next_i, used + j, idx, best, evaluated,
            );
        }
    }

    recurse(
        instance,
        sys,
        grid_step,
        max_idx,
        0,
        0,
        0,
        &mut idx,
        &mut best,
        &mut evaluated,
    );

    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(match best {
        Some((ee, powers)) => SolveResult {
            alloc: PowerAllocation { powers },
            ee,
            status: SolveStatus::Optimal,
            iterations: evaluated,
            newton_steps: 0,
            wall_time_s,
            ee_trace: vec![ee],
        },
        None => SolveResult {
            alloc: PowerAllocation {
                powers: shape.iter().map(|&k| vec![0.0; k]).collect(),
            },
            ee: 0.0,
            status: SolveStatus::Infeasible,
            iterations: evaluated,
            newton_steps: 0,
            wall_time_s,
            ee_trace: Vec::new(),
        },
    })
}
