//! Log-barrier interior-point solver for the convexified subproblem.
//!
//! One subproblem (fixed Dinkelbach weight q, fixed linearization point)
//! maximizes the concave surrogate
//! `sum_{n,i} [log2(1 + H S_i) - d - c * S_{i-1}] - q * sum p`
//! subject to surrogate QoS, the power budget, SIC power ordering, and
//! non-negativity; S_i is the within-subchannel prefix sum of powers.
//! All constraints have concave (or affine) slack, so the barrier
//! objective is convex and plain Newton steps apply.

use std::f64::consts::LN_2;

use crate::noma::{NetworkInstance, SystemConfig};

use super::ScaConfig;

/// The convex subproblem frozen at one linearization point.
pub(super) struct Subproblem {
    gains: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    pub(super) num_vars: usize,
    q: f64,
    r_req: f64,
    p_max: f64,
    /// Slope of the linearized interference term, per (n, i); 0 at i = 0.
    lin_c: Vec<Vec<f64>>,
    /// Constant of the linearized interference term, per (n, i).
    lin_d: Vec<Vec<f64>>,
}

impl Subproblem {
    /// Builds the subproblem by linearizing the subtracted concave term
    /// `log2(1 + H_i S_{i-1})` of each rate at `p_lin`.
    pub(super) fn new(
        instance: &NetworkInstance,
        sys: &SystemConfig,
        q: f64,
        p_lin: &[Vec<f64>],
    ) -> Self {
        let mut gains = Vec::with_capacity(instance.num_subchannels());
        let mut offsets = Vec::with_capacity(instance.num_subchannels());
        let mut lin_c = Vec::new();
        let mut lin_d = Vec::new();
        let mut off = 0;
        for (n, lin_row) in p_lin.iter().enumerate().take(instance.num_subchannels()) {
            let g = instance.gains(n);
            offsets.push(off);
            off += g.len();
            let mut c_row = Vec::with_capacity(g.len());
            let mut d_row = Vec::with_capacity(g.len());
            let mut prefix = 0.0;
            for (i, &h) in g.iter().enumerate() {
                if i == 0 {
                    c_row.push(0.0);
                    d_row.push(0.0);
                } else {
                    let z = 1.0 + h * prefix;
                    let c = h / (LN_2 * z);
                    c_row.push(c);
                    d_row.push((h * prefix).ln_1p() / LN_2 - c * prefix);
                }
                prefix += lin_row[i];
            }
            lin_c.push(c_row);
            lin_d.push(d_row);
            gains.push(g.to_vec());
        }
        Self {
            gains,
            offsets,
            num_vars: off,
            q,
            r_req: sys.r_req,
            p_max: sys.p_max,
            lin_c,
            lin_d,
        }
    }

    pub(super) fn num_constraints(&self) -> usize {
        // QoS per user, ordering per consecutive pair, positivity per
        // subchannel, one budget.
        let users = self.num_vars;
        let pairs: usize = self.gains.iter().map(|g| g.len() - 1).sum();
        users + pairs + self.gains.len() + 1
    }

    /// Surrogate rates at `p`, per (n, i). Requires non-negative powers.
    pub(super) fn surrogate_rates(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.gains
            .iter()
            .enumerate()
            .map(|(n, g)| {
                let off = self.offsets[n];
                let mut prefix = 0.0;
                let mut prev_prefix;
                let mut out = Vec::with_capacity(g.len());
                for (i, &h) in g.iter().enumerate() {
                    prev_prefix = prefix;
                    prefix += p[off + i];
                    let phi = (h * prefix).ln_1p() / LN_2;
                    out.push(phi - self.lin_d[n][i] - self.lin_c[n][i] * prev_prefix);
                }
                out
            })
            .collect()
    }

    /// Surrogate objective `sum r_tilde - q * sum p`.
    pub(super) fn objective(&self, p: &[f64]) -> f64 {
        let rates: f64 = self.surrogate_rates(p).iter().flatten().sum();
        rates - self.q * p.iter().sum::<f64>()
    }

    /// All constraint slacks at `p`, or None when an affine slack is not
    /// strictly positive (QoS slacks would then be meaningless).
    fn slacks(&self, p: &[f64]) -> Option<Slacks> {
        let budget = self.p_max - p.iter().sum::<f64>();
        if budget <= 0.0 {
            return None;
        }
        let mut ordering = Vec::with_capacity(self.gains.len());
        let mut positivity = Vec::with_capacity(self.gains.len());
        for (n, g) in self.gains.iter().enumerate() {
            let off = self.offsets[n];
            if p[off] <= 0.0 {
                return None;
            }
            positivity.push(p[off]);
            let mut row = Vec::with_capacity(g.len() - 1);
            for i in 1..g.len() {
                let s = p[off + i] - p[off + i - 1];
                if s <= 0.0 {
                    return None;
                }
                row.push(s);
            }
            ordering.push(row);
        }
        let mut qos = Vec::with_capacity(self.gains.len());
        for rates in self.surrogate_rates(p) {
            let mut row = Vec::with_capacity(rates.len());
            for r in rates {
                let s = r - self.r_req;
                if s <= 0.0 {
                    return None;
                }
                row.push(s);
            }
            qos.push(row);
        }
        Some(Slacks {
            qos,
            ordering,
            positivity,
            budget,
        })
    }

    pub(super) fn strictly_feasible(&self, p: &[f64]) -> bool {
        self.slacks(p).is_some()
    }

    /// Barrier objective `-t * G(p) - sum ln(slack)`; None if infeasible.
    fn phi(&self, p: &[f64], t: f64) -> Option<f64> {
        let slacks = self.slacks(p)?;
        let mut ln_sum = slacks.budget.ln();
        for s in slacks
            .qos
            .iter()
            .flatten()
            .chain(slacks.ordering.iter().flatten())
            .chain(slacks.positivity.iter())
        {
            ln_sum += s.ln();
        }
        Some(-t * self.objective(p) - ln_sum)
    }

    /// Gradient and Hessian of the barrier objective at a strictly
    /// feasible point.
    fn derivatives(&self, p: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let v = self.num_vars;
        let mut grad = vec![0.0; v];
        let mut hess = vec![0.0; v * v];

        // Objective: -t * (sum r_tilde - q sum p).
        for gj in grad.iter_mut() {
            *gj += t * self.q;
        }
        // Budget barrier.
        let budget = self.p_max - p.iter().sum::<f64>();
        let inv_b = 1.0 / budget;
        for j in 0..v {
            grad[j] += inv_b;
            for kk in 0..v {
                hess[j * v + kk] += inv_b * inv_b;
            }
        }

        for (n, g) in self.gains.iter().enumerate() {
            let off = self.offsets[n];
            let k = g.len();
            // Positivity barrier on the first power.
            grad[off] -= 1.0 / p[off];
            hess[off * v + off] += 1.0 / (p[off] * p[off]);
            // Ordering barriers.
            for i in 1..k {
                let s = p[off + i] - p[off + i - 1];
                let inv = 1.0 / s;
                grad[off + i] -= inv;
                grad[off + i - 1] += inv;
                let inv2 = inv * inv;
                hess[(off + i) * v + (off + i)] += inv2;
                hess[(off + i - 1) * v + (off + i - 1)] += inv2;
                hess[(off + i) * v + (off + i - 1)] -= inv2;
                hess[(off + i - 1) * v + (off + i)] -= inv2;
            }

            // Rate terms: objective and QoS barriers share structure.
            let rates = {
                let mut prefix = 0.0;
                let mut out = Vec::with_capacity(k);
                for (i, &h) in g.iter().enumerate() {
                    let prev = prefix;
                    prefix += p[off + i];
                    let phi = (h * prefix).ln_1p() / LN_2;
                    out.push((phi - self.lin_d[n][i] - self.lin_c[n][i] * prev, prefix));
                }
                out
            };
            let mut cons_grad = vec![0.0; k];
            for (i, &h) in g.iter().enumerate() {
                let (r_tilde, s_i) = rates[i];
                let z = 1.0 + h * s_i;
                let a = h / (LN_2 * z);
                let b = h * h / (LN_2 * z * z);
                let c = self.lin_c[n][i];
                // Gradient of r_tilde within the block: a for j <= i, with
                // an extra -c for j <= i-1.
                for row in cons_grad.iter_mut().take(i + 1) {
                    *row = a;
                }
                for row in cons_grad.iter_mut().take(i) {
                    *row -= c;
                }
                let slack = r_tilde - self.r_req;
                let inv_s = 1.0 / slack;
                // Objective part: grad -t * dr, hess +t * b on (j, kk <= i).
                // QoS barrier: grad -dr/s, hess dr drT / s^2 + b E / s.
                for j in 0..=i {
                    let dj = cons_grad[j];
                    grad[off + j] += -t * a - dj * inv_s;
                    if j < i {
                        grad[off + j] += t * c;
                    }
                    for kk in 0..=i {
                        hess[(off + j) * v + (off + kk)] += t * b
                            + dj * cons_grad[kk] * inv_s * inv_s
                            + b * inv_s;
                    }
                }
            }
        }
        (grad, hess)
    }
}

struct Slacks {
    qos: Vec<Vec<f64>>,
    ordering: Vec<Vec<f64>>,
    positivity: Vec<f64>,
    budget: f64,
}

/// In-place Cholesky solve of `h x = rhs` (h row-major, overwritten);
/// None when the factorization hits a non-positive pivot.
fn cholesky_solve(h: &mut [f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    for i in 0..n {
        for j in 0..=i {
            let mut sum = h[i * n + j];
            for k in 0..j {
                sum -= h[i * n + k] * h[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                h[i * n + i] = sum.sqrt();
            } else {
                h[i * n + j] = sum / h[j * n + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= h[i * n + k] * y[k];
        }
        y[i] /= h[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= h[k * n + i] * y[k];
        }
        y[i] /= h[i * n + i];
    }
    Some(y)
}

/// Maximizes the subproblem from a strictly feasible start along the
/// barrier path. Returns the final iterate (always strictly feasible) and
/// the number of Newton steps spent.
pub(super) fn solve_subproblem(
    sp: &Subproblem,
    start: &[f64],
    cfg: &ScaConfig,
) -> (Vec<f64>, usize) {
    debug_assert!(sp.strictly_feasible(start));
    let m = sp.num_constraints() as f64;
    let mut p = start.to_vec();
    let mut t = cfg.barrier_t0;
    let mut newton_steps = 0usize;

    loop {
        // Center along the current barrier weight.
        for _ in 0..cfg.max_newton {
            newton_steps += 1;
            let (grad, hess) = sp.derivatives(&p, t);
            let v = sp.num_vars;
            let max_diag = (0..v)
                .map(|i| hess[i * v + i].abs())
                .fold(0.0f64, f64::max)
                .max(1.0);
            let mut dir = None;
            let mut ridge = 0.0;
            for _ in 0..4 {
                let mut h = hess.clone();
                if ridge > 0.0 {
                    for i in 0..v {
                        h[i * v + i] += ridge;
                    }
                }
                if let Some(d) = cholesky_solve(&mut h, &grad) {
                    dir = Some(d);
                    break;
                }
                ridge = if ridge == 0.0 { 1e-12 * max_diag } else { ridge * 1e3 };
            }
            let Some(mut dir) = dir else { break };
            for d in dir.iter_mut() {
                *d = -*d;
            }
            let decrement: f64 = -grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>();
            // Centering accuracy in objective units: lambda^2 / (2 t).
            if decrement <= 2.0 * cfg.newton_tol * t.max(1.0) {
                break;
            }
            // Backtracking line search: stay strictly feasible, then Armijo.
            let phi0 = sp.phi(&p, t).expect("current iterate is feasible");
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = p
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| x + alpha * d)
                    .collect();
                if let Some(phi) = sp.phi(&trial, t) {
                    if phi <= phi0 + 0.25 * alpha * slope {
                        p = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if m / t < cfg.barrier_gap {
            break;
        }
        t *= cfg.barrier_mu;
    }
    (p, newton_steps)
}
