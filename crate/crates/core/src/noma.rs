//! Downlink NOMA system math: SIC ordering, per-user SINR and rates,
//! system energy efficiency, and constraint checking.
//!
//! Everything here is a pure function of its inputs; the differentiable
//! twins used during training live in [`crate::training`].

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance applied to all three constraint families
/// when judging feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum NomaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range for {len} users")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One channel realization: per-subchannel normalized gains
/// `H = |h|^2 / sigma^2`, stored in SIC order (non-increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    sample_id: u64,
    snr_db: f64,
    subchannels: Vec<Vec<f64>>,
}

impl NetworkInstance {
    /// Builds an instance, validating that every subchannel is non-empty,
    /// every gain is finite and strictly positive, and gains are sorted
    /// non-increasing (the SIC decoding order).
    pub fn new(sample_id: u64, snr_db: f64, subchannels: Vec<Vec<f64>>) -> Result<Self, NomaError> {
        if subchannels.is_empty() {
            return Err(NomaError::InvalidInput("instance has no subchannels".into()));
        }
        for (n, gains) in subchannels.iter().enumerate() {
            if gains.is_empty() {
                return Err(NomaError::InvalidInput(format!(
                    "subchannel {n} has no users"
                )));
            }
            for (i, &g) in gains.iter().enumerate() {
                if !g.is_finite() || g <= 0.0 {
                    return Err(NomaError::InvalidInput(format!(
                        "subchannel {n} gain {i} is {g}; gains must be finite and > 0"
                    )));
                }
            }
            if gains.windows(2).any(|w| w[0] < w[1]) {
                return Err(NomaError::InvalidInput(format!(
                    "subchannel {n} gains are not sorted non-increasing"
                )));
            }
        }
        Ok(Self {
            sample_id,
            snr_db,
            subchannels,
        })
    }

    pub fn sample_id(&self) -> u64 {
        self.sample_id
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn num_subchannels(&self) -> usize {
        self.subchannels.len()
    }

    /// Number of users on subchannel `n`.
    pub fn users_on(&self, n: usize) -> usize {
        self.subchannels[n].len()
    }

    pub fn total_users(&self) -> usize {
        self.subchannels.iter().map(Vec::len).sum()
    }

    /// Sorted gains of subchannel `n`.
    pub fn gains(&self, n: usize) -> &[f64] {
        &self.subchannels[n]
    }

    pub fn subchannels(&self) -> &[Vec<f64>] {
        &self.subchannels
    }
}

/// System-level constants of the allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Total transmit power budget, watts.
    pub p_max: f64,
    /// Circuit power consumption, watts.
    pub p_circuit: f64,
    /// Per-user minimum rate, bit/s/Hz.
    pub r_req: f64,
}

impl SystemConfig {
    pub fn new(p_max: f64, p_circuit: f64, r_req: f64) -> Result<Self, NomaError> {
        for (name, v) in [("p_max", p_max), ("p_circuit", p_circuit), ("r_req", r_req)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(NomaError::InvalidInput(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self {
            p_max,
            p_circuit,
            r_req,
        })
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            p_max: 10.0,
            p_circuit: 1.0,
            r_req: 0.1,
        }
    }
}

/// Per-subchannel power vectors for one instance, watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<Vec<f64>>,
}

impl PowerAllocation {
    /// Validates non-negativity/finiteness and shape congruence with `instance`.
    pub fn new(powers: Vec<Vec<f64>>, instance: &NetworkInstance) -> Result<Self, NomaError> {
        if powers.len() != instance.num_subchannels() {
            return Err(NomaError::ShapeMismatch(format!(
                "{} power vectors for {} subchannels",
                powers.len(),
                instance.num_subchannels()
            )));
        }
        for (n, p) in powers.iter().enumerate() {
            if p.len() != instance.users_on(n) {
                return Err(NomaError::ShapeMismatch(format!(
                    "subchannel {n}: {} powers for {} users",
                    p.len(),
                    instance.users_on(n)
                )));
            }
            for (i, &v) in p.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(NomaError::InvalidInput(format!(
                        "power[{n}][{i}] = {v}; powers must be finite and >= 0"
                    )));
                }
            }
        }
        Ok(Self { powers })
    }

    pub fn zeros(instance: &NetworkInstance) -> Self {
        Self {
            powers: instance
                .subchannels()
                .iter()
                .map(|g| vec![0.0; g.len()])
                .collect(),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().flatten().sum()
    }
}

/// Verdict of the per-constraint feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Per (subchannel, user): rate meets the QoS requirement.
    pub qos_ok: Vec<Vec<bool>>,
    /// Per subchannel: powers are non-decreasing in the SIC index.
    pub ordering_ok: Vec<bool>,
    /// Total power within the budget.
    pub budget_ok: bool,
    /// min over all users of (rate - r_req).
    pub worst_qos_slack: f64,
    /// Conjunction of all component flags.
    pub feasible: bool,
}

/// Sorts gains non-increasing, stably (ties keep original order), and
/// returns the permutation mapping original index -> sorted position.
pub fn sic_sort(gains: &[f64]) -> Result<(Vec<f64>, Vec<usize>), NomaError> {
    if gains.is_empty() {
        return Err(NomaError::InvalidInput("empty gain vector".into()));
    }
    if let Some(&bad) = gains.iter().find(|g| !g.is_finite() || **g <= 0.0) {
        return Err(NomaError::InvalidInput(format!(
            "gain {bad} is not finite and positive"
        )));
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    // sort_by is stable, so equal gains keep ascending original index.
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&j| gains[j]).collect();
    let mut permutation = vec![0usize; gains.len()];
    for (pos, &orig) in order.iter().enumerate() {
        permutation[orig] = pos;
    }
    Ok((sorted, permutation))
}

/// SINR of user `i` (0-based, in SIC order) on one subchannel:
/// `p_i H_i / (1 + sum_{j<i} p_j H_i)`.
pub fn sinr(powers: &[f64], gains: &[f64], i: usize) -> Result<f64, NomaError> {
    if powers.len() != gains.len() {
        return Err(NomaError::ShapeMismatch(format!(
            "{} powers vs {} gains",
            powers.len(),
            gains.len()
        )));
    }
    if i >= powers.len() {
        return Err(NomaError::IndexOutOfRange {
            index: i,
            len: powers.len(),
        });
    }
    let interference: f64 = powers[..i].iter().map(|p| p * gains[i]).sum();
    Ok(powers[i] * gains[i] / (1.0 + interference))
}

/// Spectral efficiency `log2(1 + SINR_i)` of every user on one subchannel,
/// bit/s/Hz. Uses ln(1+x) for accuracy at small SINR.
pub fn rates(powers: &[f64], gains: &[f64]) -> Result<Vec<f64>, NomaError> {
    (0..powers.len())
        .map(|i| Ok(sinr(powers, gains, i)?.ln_1p() / LN_2))
        .collect()
}

/// System energy efficiency: sum rate over total consumed power,
/// `(sum_{n,i} rate_{i,n}) / (sum_{n,i} p_{i,n} + P_C)`, bit/s/Hz per watt.
pub fn energy_efficiency(
    alloc: &PowerAllocation,
    instance: &NetworkInstance,
    cfg: &SystemConfig,
) -> Result<f64, NomaError> {
    let mut rate_sum = 0.0;
    let mut power_sum = 0.0;
    if alloc.powers.len() != instance.num_subchannels() {
        return Err(NomaError::ShapeMismatch(format!(
            "{} power vectors for {} subchannels",
            alloc.powers.len(),
            instance.num_subchannels()
        )));
    }
    for (n, p) in alloc.powers.iter().enumerate() {
        rate_sum += rates(p, instance.gains(n))?.iter().sum::<f64>();
        power_sum += p.iter().sum::<f64>();
    }
    Ok(rate_sum / (power_sum + cfg.p_circuit))
}

/// Checks QoS, SIC power ordering, and the power budget, each with an
/// absolute tolerance `tol` (use [`FEASIBILITY_TOL`] unless noted otherwise).
pub fn check_feasibility(
    alloc: &PowerAllocation,
    instance: &NetworkInstance,
    cfg: &SystemConfig,
    tol: f64,
) -> Result<FeasibilityReport, NomaError> {
    if alloc.powers.len() != instance.num_subchannels() {
        return Err(NomaError::ShapeMismatch(format!(
            "{} power vectors for {} subchannels",
            alloc.powers.len(),
            instance.num_subchannels()
        )));
    }
    let mut qos_ok = Vec::with_capacity(alloc.powers.len());
    let mut ordering_ok = Vec::with_capacity(alloc.powers.len());
    let mut worst_slack = f64::INFINITY;
    for (n, p) in alloc.powers.iter().enumerate() {
        let r = rates(p, instance.gains(n))?;
        let mut ok_row = Vec::with_capacity(r.len());
        for &rate in &r {
            let slack = rate - cfg.r_req;
            worst_slack = worst_slack.min(slack);
            ok_row.push(slack >= -tol);
        }
        qos_ok.push(ok_row);
        ordering_ok.push(p.windows(2).all(|w| w[0] <= w[1] + tol));
    }
    let budget_ok = alloc.total_power() <= cfg.p_max + tol;
    let feasible =
        budget_ok && ordering_ok.iter().all(|&b| b) && qos_ok.iter().flatten().all(|&b| b);
    Ok(FeasibilityReport {
        qos_ok,
        ordering_ok,
        budget_ok,
        worst_qos_slack: worst_slack,
        feasible,
    })
}
