//! Finite-difference verification of reverse-mode gradients.

use super::{Tape, Tensor};

/// Compares the reverse-mode gradient of `f` at `x` against central finite
/// differences, coordinate by coordinate, and returns the worst relative
/// error `|g_ad - g_fd| / max(1, |g_fd|)`.
///
/// Coordinates where the one-sided differences disagree by more than 10%
/// (relative) straddle a kink of a piecewise-linear primitive; no unique
/// derivative exists there, so they are skipped. If every coordinate is
/// skipped the reported error is 0.
pub fn grad_check<F>(f: F, x: &[f64], shape: &[usize], eps: f64) -> f64
where
    F: Fn(&Tape, &Tensor) -> Tensor,
{
    assert!(
        (1e-7..=1e-4).contains(&eps),
        "eps {eps} outside [1e-7, 1e-4]"
    );
    let eval = |point: &[f64]| -> f64 {
        let tape = Tape::new();
        let leaf = tape.leaf(shape, point.to_vec(), false);
        let out = f(&tape, &leaf);
        assert!(out.rank() == 0, "grad_check requires a scalar-valued f");
        out.scalar()
    };

    let tape = Tape::new();
    let leaf = tape.leaf(shape, x.to_vec(), true);
    let out = f(&tape, &leaf);
    assert!(out.rank() == 0, "grad_check requires a scalar-valued f");
    let g_ad = out.backward().get(&leaf);

    let f0 = eval(x);
    let mut worst = 0.0f64;
    let mut point = x.to_vec();
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let fp = eval(&point);
        point[i] = orig - eps;
        let fm = eval(&point);
        point[i] = orig;

        let fwd = (fp - f0) / eps;
        let bwd = (f0 - fm) / eps;
        let scale = 1.0f64.max(fwd.abs()).max(bwd.abs());
        if (fwd - bwd).abs() > 0.1 * scale {
            continue; // kink coordinate
        }
        let fd = (fp - fm) / (2.0 * eps);
        let err = (g_ad[i] - fd).abs() / 1.0f64.max(fd.abs());
        worst = worst.max(err);
    }
    worst
}
