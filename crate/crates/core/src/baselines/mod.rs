//! Reference solvers: the fractional-programming convex baseline and the
//! exhaustive grid oracle.
//!
//! `sca_solve` maximizes energy efficiency with a Dinkelbach outer loop
//! (weight `q <- sum rates / (sum p + P_C)`) around an inner successive
//! convex approximation: each rate splits exactly into
//! `log2(1 + H S_i) - log2(1 + H S_{i-1})` (prefix sums S), the subtracted
//! concave term is linearized at the current iterate in both the objective
//! and the QoS constraints, and the resulting concave subproblem is solved
//! by a log-barrier interior method. Initialization bisects a uniform
//! power profile to meet QoS; if that fails the instance is declared
//! infeasible.

mod barrier;
mod oracle;

pub use oracle::{brute_force_oracle, ORACLE_MAX_VARS};

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noma::{
    check_feasibility, energy_efficiency, rates, NetworkInstance, NomaError, PowerAllocation,
    SystemConfig, FEASIBILITY_TOL,
};

use barrier::{solve_subproblem, Subproblem};

/// Dinkelbach fixed-point residual accepted at optimality.
pub const DINKELBACH_RESIDUAL_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Noma(#[from] NomaError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("results parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Tolerances and iteration limits of the convex baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaConfig {
    /// Dinkelbach loop: stop when the EE improvement falls below this.
    pub outer_tol: f64,
    /// SCA loop: stop when the parametric objective improvement falls
    /// below this.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub barrier_t0: f64,
    pub barrier_mu: f64,
    pub barrier_gap: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-6,
            inner_tol: 1e-6,
            max_outer: 50,
            max_inner: 100,
            barrier_t0: 10.0,
            barrier_mu: 20.0,
            barrier_gap: 1e-8,
            newton_tol: 1e-9,
            max_newton: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "maxiter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(SolveStatus::Optimal),
            "infeasible" => Some(SolveStatus::Infeasible),
            "maxiter" => Some(SolveStatus::MaxIter),
            _ => None,
        }
    }
}

/// Outcome of one solver run on one instance.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub alloc: PowerAllocation,
    pub ee: f64,
    pub status: SolveStatus,
    /// Outer (Dinkelbach) iterations; grid points for the oracle.
    pub iterations: usize,
    pub newton_steps: usize,
    pub wall_time_s: f64,
    /// EE after each outer iteration (non-decreasing for the SCA solver).
    pub ee_trace: Vec<f64>,
}

/// Minimal-power profile meeting every QoS with a small rate margin:
/// within each subchannel, give user i exactly the power that makes its
/// rate `r_req + margin` given the users before it,
/// `p_i = gamma (1/H_i + S_{i-1})` with `gamma = 2^(r_req+margin) - 1`.
/// Because gains are SIC-sorted the resulting powers are strictly
/// increasing, so the profile sits strictly inside ordering, positivity
/// and QoS; it is accepted iff it also leaves the budget strictly slack.
/// (This is the minimal total power meeting QoS for the fixed decoding
/// order, so rejection means the instance is genuinely infeasible up to
/// the margin.)
fn restore_feasible(instance: &NetworkInstance, sys: &SystemConfig) -> Option<Vec<Vec<f64>>> {
    let margin = 1e-2 * sys.r_req.max(1e-3);
    let gamma = (sys.r_req + margin).exp2() - 1.0;
    let mut total = 0.0;
    let mut powers = Vec::with_capacity(instance.num_subchannels());
    for n in 0..instance.num_subchannels() {
        let gains = instance.gains(n);
        let mut row = Vec::with_capacity(gains.len());
        let mut prefix = 0.0;
        for &h in gains {
            let p = gamma * (1.0 / h + prefix);
            prefix += p;
            total += p;
            row.push(p);
        }
        powers.push(row);
    }
    if total >= sys.p_max * (1.0 - 1e-9) {
        return None;
    }
    // Move off the QoS wall when the budget allows: scaling the whole
    // profile up only increases rates, so strict feasibility is kept.
    let headroom = 0.25 * sys.p_max / total;
    let scale = headroom.clamp(1.0, 2.0);
    if scale > 1.0 {
        for row in &mut powers {
            for p in row {
                *p *= scale;
            }
        }
    }
    Some(powers)
}

fn flatten(p: &[Vec<f64>]) -> Vec<f64> {
    p.iter().flatten().copied().collect()
}

fn unflatten(flat: &[f64], shape: &NetworkInstance) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(shape.num_subchannels());
    let mut off = 0;
    for n in 0..shape.num_subchannels() {
        let k = shape.users_on(n);
        out.push(flat[off..off + k].to_vec());
        off += k;
    }
    out
}

/// Energy-efficiency maximization via Dinkelbach + SCA + log-barrier.
pub fn sca_solve(
    instance: &NetworkInstance,
    sys: &SystemConfig,
    cfg: &ScaConfig,
) -> SolveResult {
    let start = Instant::now();
    let zeros = PowerAllocation::zeros(instance);
    let Some(p0) = restore_feasible(instance, sys) else {
        return SolveResult {
            alloc: zeros,
            ee: 0.0,
            status: SolveStatus::Infeasible,
            iterations: 0,
            newton_steps: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            ee_trace: Vec::new(),
        };
    };

    let ee_of = |powers: &Vec<Vec<f64>>| -> f64 {
        let alloc = PowerAllocation {
            powers: powers.clone(),
        };
        energy_efficiency(&alloc, instance, sys).expect("congruent shapes")
    };

    let mut powers = p0;
    let mut ee = ee_of(&powers);
    let mut ee_trace = vec![ee];
    let mut status = SolveStatus::MaxIter;
    let mut outer_iters = 0;
    let mut newton_total = 0;

    for _ in 0..cfg.max_outer {
        outer_iters += 1;
        let q = ee;
        // Inner SCA: relinearize and solve until the parametric objective
        // R(p) - q (sum p) stops improving.
        let parametric = |powers: &Vec<Vec<f64>>| -> f64 {
            let mut r_sum = 0.0;
            let mut p_sum = 0.0;
            for (n, p) in powers.iter().enumerate() {
                r_sum += rates(p, instance.gains(n))
                    .expect("congruent shapes")
                    .iter()
                    .sum::<f64>();
                p_sum += p.iter().sum::<f64>();
            }
            r_sum - q * p_sum
        };
        let mut obj = parametric(&powers);
        for _ in 0..cfg.max_inner {
            let sp = Subproblem::new(instance, sys, q, &powers);
            let flat = flatten(&powers);
            if !sp.strictly_feasible(&flat) {
                break;
            }
            let (solution, steps) = solve_subproblem(&sp, &flat, cfg);
            newton_total += steps;
            let candidate = unflatten(&solution, instance);
            let new_obj = parametric(&candidate);
            if new_obj > obj {
                powers = candidate;
            }
            if new_obj - obj < cfg.inner_tol {
                break;
            }
            obj = new_obj;
        }

        let new_ee = ee_of(&powers);
        ee_trace.push(new_ee);
        let improvement = new_ee - ee;
        ee = ee.max(new_ee);
        if improvement < cfg.outer_tol {
            // Dinkelbach fixed point: R - q (sum p + P_C) ~ 0.
            let total_p: f64 = powers.iter().flatten().sum();
            let r_sum: f64 = powers
                .iter()
                .enumerate()
                .map(|(n, p)| {
                    rates(p, instance.gains(n))
                        .expect("congruent shapes")
                        .iter()
                        .sum::<f64>()
                })
                .sum();
            let residual = r_sum - q * (total_p + sys.p_circuit);
            if residual.abs() < DINKELBACH_RESIDUAL_TOL {
                status = SolveStatus::Optimal;
                break;
            }
        }
    }

    let alloc = PowerAllocation { powers };
    if status == SolveStatus::Optimal {
        let rep = check_feasibility(&alloc, instance, sys, FEASIBILITY_TOL)
            .expect("congruent shapes");
        if !rep.feasible {
            status = SolveStatus::MaxIter;
        }
    }
    SolveResult {
        ee: energy_efficiency(&alloc, instance, sys).expect("congruent shapes"),
        alloc,
        status,
        iterations: outer_iters,
        newton_steps: newton_total,
        wall_time_s: start.elapsed().as_secs_f64(),
        ee_trace,
    }
}

/// Aggregate view of a dataset sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub count: usize,
    pub optimal: usize,
    /// Mean achieved EE over samples with Optimal status.
    pub mean_ee_optimal: f64,
    pub feasibility_rate_percent: f64,
    pub total_time_s: f64,
}

/// Applies `solver` to every instance (in parallel), keeping sample order.
pub fn solve_dataset<F>(solver: F, instances: &[NetworkInstance]) -> (Vec<SolveResult>, SweepSummary)
where
    F: Fn(&NetworkInstance) -> SolveResult + Sync,
{
    let results: Vec<SolveResult> = instances.par_iter().map(&solver).collect();
    let summary = summarize(&results);
    (results, summary)
}

pub fn summarize(results: &[SolveResult]) -> SweepSummary {
    let optimal: Vec<&SolveResult> = results
        .iter()
        .filter(|r| r.status == SolveStatus::Optimal)
        .collect();
    let mean_ee_optimal = if optimal.is_empty() {
        0.0
    } else {
        optimal.iter().map(|r| r.ee).sum::<f64>() / optimal.len() as f64
    };
    SweepSummary {
        count: results.len(),
        optimal: optimal.len(),
        mean_ee_optimal,
        feasibility_rate_percent: if results.is_empty() {
            0.0
        } else {
            100.0 * optimal.len() as f64 / results.len() as f64
        },
        total_time_s: results.iter().map(|r| r.wall_time_s).sum(),
    }
}

/// One persisted record of a solver sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub sample_id: u64,
    pub status: SolveStatus,
    pub ee: f64,
    pub wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct ResultsHeader {
    version: u32,
    solver: String,
    dataset: String,
    count: usize,
}

/// Writes sweep results as line-delimited records
/// (sample_id, status, ee, time), one JSON header line first.
pub fn save_results(
    path: &Path,
    solver: &str,
    dataset: &str,
    instances: &[NetworkInstance],
    results: &[SolveResult],
) -> Result<(), BaselineError> {
    assert_eq!(instances.len(), results.len());
    let mut w = BufWriter::new(File::create(path)?);
    let header = ResultsHeader {
        version: 1,
        solver: solver.to_string(),
        dataset: dataset.to_string(),
        count: results.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for (inst, r) in instances.iter().zip(results) {
        writeln!(
            w,
            "{}\t{}\t{:.16e}\t{:.6e}",
            inst.sample_id(),
            r.status.as_str(),
            r.ee,
            r.wall_time_s
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_results(path: &Path) -> Result<(String, String, Vec<ResultRecord>), BaselineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(BaselineError::Parse {
        line: 1,
        msg: "missing header".into(),
    })??;
    let header: ResultsHeader =
        serde_json::from_str(&header_line).map_err(|e| BaselineError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let parse_err = |msg: String| BaselineError::Parse { line: line_no, msg };
        let sample_id = f
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad sample id".into()))?;
        let status = f
            .next()
            .and_then(SolveStatus::parse)
            .ok_or_else(|| parse_err("bad status".into()))?;
        let ee = f
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad ee".into()))?;
        let wall_time_s = f
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad time".into()))?;
        records.push(ResultRecord {
            sample_id,
            status,
            ee,
            wall_time_s,
        });
    }
    if records.len() != header.count {
        return Err(BaselineError::Parse {
            line: records.len() + 2,
            msg: format!("header declares {} records, file has {}", header.count, records.len()),
        });
    }
    Ok((header.solver, header.dataset, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{instance_rng, sample_instance};

    fn single_user(gain: f64) -> NetworkInstance {
        NetworkInstance::new(0, 20.0, vec![vec![gain]]).unwrap()
    }

    #[test]
    fn single_user_matches_fine_grid() {
        let inst = single_user(100.0);
        let sys = SystemConfig::new(10.0, 1.0, 0.1).unwrap();
        // Independent oracle: direct scan of log2(1 + 100 p) / (p + 1).
        let mut best = 0.0f64;
        let step = 1e-4;
        let mut p = 0.0f64;
        while p <= 10.0 + 1e-12 {
            let rate = (100.0f64 * p).ln_1p() / std::f64::consts::LN_2;
            if rate >= 0.1 {
                best = best.max(rate / (p + 1.0));
            }
            p += step;
        }
        let res = sca_solve(&inst, &sys, &ScaConfig::default());
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(
            (res.ee - best).abs() / best < 1e-3,
            "sca {} vs grid {best}",
            res.ee
        );
    }

    #[test]
    fn impossible_qos_is_infeasible() {
        let inst = single_user(1.0);
        // Capacity at full budget is log2(11) ~ 3.46; demand more.
        let sys = SystemConfig::new(10.0, 1.0, 4.0).unwrap();
        let res = sca_solve(&inst, &sys, &ScaConfig::default());
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn ee_trace_is_monotone_and_fixed_point_holds() {
        let mut rng = instance_rng(902, 0);
        let sys = SystemConfig::default();
        let cfg = ScaConfig::default();
        for id in 0..5 {
            let inst = sample_instance(&mut rng, 2, 3, 20.0, id);
            let res = sca_solve(&inst, &sys, &cfg);
            assert_eq!(res.status, SolveStatus::Optimal);
            for w in res.ee_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "trace not monotone: {:?}", res.ee_trace);
            }
            // |sum rates - q (sum p + P_C)| < 1e-5 at the fixed point.
            let r_sum: f64 = (0..inst.num_subchannels())
                .map(|n| {
                    rates(&res.alloc.powers[n], inst.gains(n))
                        .unwrap()
                        .iter()
                        .sum::<f64>()
                })
                .sum();
            let residual = r_sum - res.ee * (res.alloc.total_power() + sys.p_circuit);
            assert!(residual.abs() < DINKELBACH_RESIDUAL_TOL * 10.0, "residual {residual}");
        }
    }

    #[test]
    fn optimal_results_are_feasible_at_tight_tol() {
        let mut rng = instance_rng(903, 0);
        let sys = SystemConfig::default();
        let cfg = ScaConfig::default();
        for id in 0..5 {
            let inst = sample_instance(&mut rng, 2, 2, 20.0, id);
            let res = sca_solve(&inst, &sys, &cfg);
            assert_eq!(res.status, SolveStatus::Optimal);
            let rep = check_feasibility(&res.alloc, &inst, &sys, FEASIBILITY_TOL).unwrap();
            assert!(rep.feasible);
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let inst = sample_instance(&mut instance_rng(904, 0), 2, 3, 20.0, 0);
        let sys = SystemConfig::default();
        let cfg = ScaConfig::default();
        let a = sca_solve(&inst, &sys, &cfg);
        let b = sca_solve(&inst, &sys, &cfg);
        assert_eq!(a.ee.to_bits(), b.ee.to_bits());
        for (x, y) in a.alloc.powers.iter().flatten().zip(b.alloc.powers.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn oracle_single_user_interior_optimum() {
        let inst = single_user(1.0);
        let sys = SystemConfig::new(10.0, 1.0, 1e-9).unwrap();
        let res = brute_force_oracle(&inst, &sys, 1e-3).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(res.ee > 0.0);
        let p = res.alloc.powers[0][0];
        assert!(p > 0.0 && p < 10.0, "optimum should be interior, got {p}");
    }

    #[test]
    fn oracle_degenerate_grid_is_infeasible() {
        let inst = single_user(1.0);
        let sys = SystemConfig::new(10.0, 1.0, 0.5).unwrap();
        // Step larger than the budget: only p = 0 on the grid.
        let res = brute_force_oracle(&inst, &sys, 20.0).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn oracle_refinement_never_decreases_ee() {
        let inst = NetworkInstance::new(0, 20.0, vec![vec![120.0, 30.0]]).unwrap();
        let sys = SystemConfig::default();
        let coarse = brute_force_oracle(&inst, &sys, 10.0 / 100.0).unwrap();
        let fine = brute_force_oracle(&inst, &sys, 10.0 / 200.0).unwrap();
        assert!(fine.ee >= coarse.ee);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let inst = sample_instance(&mut instance_rng(905, 0), 2, 3, 20.0, 0);
        assert!(brute_force_oracle(&inst, &SystemConfig::default(), 0.1).is_err());
    }

    #[test]
    fn sca_close_to_oracle_on_two_user_instances() {
        let sys = SystemConfig::default();
        let cfg = ScaConfig::default();
        let mut within = 0;
        let total = 12;
        for id in 0..total {
            let inst = sample_instance(&mut instance_rng(906, id), 1, 2, 20.0, id);
            let sca = sca_solve(&inst, &sys, &cfg);
            let oracle = brute_force_oracle(&inst, &sys, 10.0 / 400.0).unwrap();
            assert_eq!(sca.status, SolveStatus::Optimal);
            if (sca.ee - oracle.ee).abs() / oracle.ee <= 0.01 {
                within += 1;
            }
        }
        assert!(within >= total - 1, "only {within}/{total} within 1%");
    }

    #[test]
    fn sweep_and_results_round_trip() {
        let sys = SystemConfig::default();
        let cfg = ScaConfig::default();
        let instances: Vec<NetworkInstance> = (0..4)
            .map(|id| sample_instance(&mut instance_rng(907, id), 2, 2, 20.0, id))
            .collect();
        let (results, summary) = solve_dataset(|inst| sca_solve(inst, &sys, &cfg), &instances);
        assert_eq!(summary.count, 4);
        assert_eq!(summary.optimal, 4);
        assert!(summary.mean_ee_optimal > 0.0);

        let dir = std::env::temp_dir().join(format!("nomanet-bl-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("res.txt");
        save_results(&path, "sca", "unit", &instances, &results).unwrap();
        let (solver, dataset, records) = load_results(&path).unwrap();
        assert_eq!(solver, "sca");
        assert_eq!(dataset, "unit");
        assert_eq!(records.len(), 4);
        for (rec, res) in records.iter().zip(&results) {
            assert_eq!(rec.ee.to_bits(), res.ee.to_bits());
            assert_eq!(rec.status, res.status);
        }
    }

    #[test]
    fn empty_sweep_is_empty_summary() {
        let (results, summary) = solve_dataset(
            |inst| sca_solve(inst, &SystemConfig::default(), &ScaConfig::default()),
            &[],
        );
        assert!(results.is_empty());
        assert_eq!(summary.count, 0);
        assert_eq!(summary.feasibility_rate_percent, 0.0);
    }
}
